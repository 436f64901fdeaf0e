import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import dblquad, quad

from descentstat.combinatorics import (Composition, all_compositions, alternating_composition,
                                       brute_force_counts, composition_from_runs, parse_composition)
from descentstat.errors import InvalidInput, InvalidModel
from descentstat.polyalg import PiecewisePoly, RationalPoly
from descentstat.sawtooth import (
    PinnedConditional, SawtoothModel, conditional_density, envelope_bounds, gamma, gamma_minus,
    gamma_plus, gamma_tilde, joint_extremes_on_grid, marginal, marginal_first, marginal_last,
    model_from_composition, volume)

T = RationalPoly([0, 1])
ONE = RationalPoly([1])
small = st.integers(2, 7).flatmap(
    lambda n: st.integers(0, 2 ** (n - 1) - 1).map(lambda mask: list(all_compositions(n))[mask]))
unit = st.fractions(min_value=0, max_value=1, max_denominator=16)


def grid(k):
    return [F(j, k) for j in range(k + 1)]


class TestConstruction:
    def test_alternating_kernels_constant(self):
        m = model_from_composition(alternating_composition(7))
        assert all(k == ONE for k in m.kernels) and m.n_particles == 7

    def test_fig1_kernels(self):
        m = model_from_composition(Composition((3, 2, 4, 1)))
        # run lengths 3,2,2,2,4,2
        assert m.kernels == tuple(gamma_tilde(r) for r in (3, 2, 2, 2, 4, 2))
        assert not m.first_upper and str(m.model_type) == "--"

    def test_single_run(self):
        m = model_from_composition(Composition((5,)))
        assert m.kernels == (RationalPoly([0, 0, 0, F(1, 6)]),)

    def test_single_cell(self):
        m = model_from_composition(Composition((1,)))
        assert m.n_particles == 1 and m.volume == 1

    def test_gamma_normalized(self):
        for r in range(2, 9):
            assert gamma(r).integral() == 1
            assert gamma_tilde(r) * math.factorial(r - 2) == RationalPoly.monomial(r - 2)

    def test_rejects_decreasing_kernel(self):
        with pytest.raises(InvalidModel):
            SawtoothModel((RationalPoly([1, -1]),))
        with pytest.raises(InvalidModel):
            SawtoothModel((RationalPoly([1]),), normalized=True) and SawtoothModel((T,), normalized=True)
        with pytest.raises(InvalidModel):
            SawtoothModel((RationalPoly(),))

    def test_particle_ids(self):
        m = model_from_composition(Composition((3, 2, 4, 1)))
        assert m.particle_index("XI") == 0 and m.particle_index("XF") == 6
        assert m.particle_index("Y1") == 1 and m.particle_index("X2") == 2
        assert m.particle_index("P3") == 2 and m.particle_index(4) == 4
        for bad in ("Y9", "Q1", "P0", 7, 2.0):
            with pytest.raises(InvalidInput):
                m.particle_index(bad)


class TestVolume:
    @pytest.mark.parametrize("parts,want", [((1, 1, 1), F(1, 6)), ((2, 2), F(5, 24)),
                                            ((4,), F(1, 24)), ((1, 2, 1), F(5, 24))])
    def test_examples(self, parts, want):
        assert volume(model_from_composition(Composition(parts))) == want

    @pytest.mark.parametrize("n", range(1, 8))
    def test_counting_identity(self, n):
        brute = brute_force_counts(n)
        for c in all_compositions(n):
            assert math.factorial(n) * model_from_composition(c).volume == brute[c.descent_set().members]

    @given(small)
    def test_symmetries(self, c):
        m = model_from_composition(c)
        assert m.reversed().volume == m.volume == m.reflected().volume

    def test_quadrature(self):
        # (1,2,1): X1 <= Y1 >= X2 <= Y2 with kernels 1, 1, 1: 4-fold integral by hand
        m = model_from_composition(Composition((2, 1, 2)))
        k = [float(c) for c in m.kernels[1].coeffs]
        assert m.kernels[0] == ONE and m.kernels[2] == ONE
        # particles: X1 (cell 1), Y1 (cell 2), X2 (cell 4), Y2 (cell 5); middle run of length 3
        def inner(y1, y2):
            return y1 * quad(lambda x2: k[1] * ((y1 - x2) if len(k) > 1 else 1) * 0 + np.polyval(
                list(reversed(k)), y1 - x2), 0, min(y1, y2))[0]
        got = dblquad(lambda y2, y1: inner(y1, y2), 0, 1, 0, 1)[0]
        assert got == pytest.approx(float(m.volume), abs=1e-9)


class TestMarginals:
    @pytest.mark.parametrize("n", range(2, 8))
    def test_single_run_minimum(self, n):
        r = marginal_first(model_from_composition(Composition((n,))))
        assert r.density == RationalPoly([n]) * RationalPoly([1, -1]) ** (n - 1)
        assert marginal_last(model_from_composition(Composition((n,)))).density == \
            RationalPoly.monomial(n - 1, n)

    def test_two_cell_descent(self):
        assert marginal_first(model_from_composition(Composition((1, 1)))).density == RationalPoly([0, 2])

    @given(small)
    def test_normalized_and_monotone(self, c):
        m = model_from_composition(c)
        for j in range(m.n_particles):
            r = marginal(m, j)
            assert r.cdf(0) == 0 and r.cdf(1) == 1 and r.density.integral() == 1
            slope = r.density.derivative().grid_values(40)
            if m.is_upper(j):
                assert min(slope) >= 0
            else:
                assert max(slope) <= 0

    def test_report_exports(self):
        r = marginal_first(model_from_composition(Composition((4,))))
        lines = r.to_csv(k=4).splitlines()
        assert lines[0] == "t,density,density_exact,cdf,cdf_exact"
        assert lines[2] == "1/4,1.6875,27/16,0.68359375,175/256"
        assert '"normalizer"' in r.to_json(k=2)
        assert r.weight(F(1, 4)) == F(27, 16) * r.normalizer


class TestConditionals:
    def test_hand_integral(self):
        # (2,2): X1 <= Y1 >= X2 <= Y2, all kernels 1; pin Y2 = 1/2
        # weight 3/8 - x^2/2 on [0,1/2], (1-x)/2 on [1/2,1], total 11/48
        r = conditional_density(model_from_composition(Composition((2, 2))), "XI", {"XF": F(1, 2)})
        assert r.density(0) == F(18, 11) and r.density(F(3, 4)) == F(6, 11)
        assert r.normalizer == F(11, 48)

    def test_pinned_top_gives_gamma_minus(self):
        m = model_from_composition(Composition((3,)))
        r = conditional_density(m, "XI", {"XF": 1})
        assert r.cdf.pieces == (gamma_minus(m.kernels[0]),)

    def test_both_neighbours_pinned(self):
        # runs 3,2,4: X1 -t- Y1 -1- X2 -t^2/2- Y2; X2 | Y1=z, Y2=z' has weight (z'-x)^2/2 below min(z, z')
        m = model_from_composition(composition_from_runs([3, 2, 4]))
        z, z2 = F(2, 3), F(1, 2)
        r = conditional_density(m, "X2", {"Y1": z, "Y2": z2})
        w = (RationalPoly([z2, -1]) ** 2) / 2
        norm = w.integral(0, z2)
        for x in grid(12):
            assert r.density(x) == (w(x) / norm if x < z2 else 0)

    def test_out_of_range(self):
        m = model_from_composition(Composition((2, 2)))
        for v in (F(-1, 2), F(3, 2)):
            with pytest.raises(InvalidInput):
                conditional_density(m, "XI", {"XF": v})
        with pytest.raises(InvalidInput):
            conditional_density(m, "XI", {"XI": F(1, 2)})

    def test_point_mass_rejected(self):
        # a lower particle pinned at 1 forces its upper neighbour to 1
        m = model_from_composition(Composition((2, 2)))
        with pytest.raises(InvalidInput):
            conditional_density(m, "Y1", {"X2": 1})

    @settings(max_examples=40)
    @given(small, unit, st.data())
    def test_markov(self, c, v, data):
        m = model_from_composition(c)
        P = m.n_particles
        if P < 4:
            return
        near = data.draw(st.integers(1, P - 2))
        far = data.draw(st.integers(near + 1, P - 1))
        w = data.draw(unit)
        try:
            base = conditional_density(m, 0, {near: v})
            both = conditional_density(m, 0, {near: v, far: w})
        except InvalidInput:  # a pin at an endpoint can force a neighbour to a point mass
            return
        for t in grid(10):
            assert base.density(t) == both.density(t)

    @settings(max_examples=30)
    @given(small, unit, st.data())
    def test_symbolic_matches_pointwise(self, c, v, data):
        m = model_from_composition(c)
        P = m.n_particles
        if P < 2:
            return
        t = data.draw(st.integers(0, P - 1))
        p = data.draw(st.integers(0, P - 1).filter(lambda j: j != t))
        try:
            direct = conditional_density(m, t, {p: v})
        except InvalidInput:
            return
        pc = PinnedConditional(m, t, p)
        for s in grid(8):
            assert pc.density(s, v) == direct.density(s)
            assert pc.cdf(s, v) == direct.cdf(s)

    @settings(max_examples=25)
    @given(small, st.data())
    def test_monotone_density_and_conditioning(self, c, data):
        m = model_from_composition(c)
        P = m.n_particles
        if P < 2:
            return
        t = data.draw(st.integers(0, P - 1))
        p = data.draw(st.integers(0, P - 1).filter(lambda j: j != t))
        pc = PinnedConditional(m, t, p)
        assert pc.density_derivative_violations(24) == 0
        assert pc.cdf_grid(24).column_nonincreasing_violations() == 0


class TestJoint:
    @pytest.mark.parametrize("parts", [(2, 2), (3, 2, 4, 1), (1, 2, 1, 3)])
    def test_marginalization(self, parts):
        m = model_from_composition(Composition(parts))
        P = m.n_particles
        pc = PinnedConditional(m, P - 1, 0)
        dF = marginal_last(m).density
        dI = marginal_first(m).density
        for y in grid(7):
            # integrate the pinned first particle x out: s = y is the target value
            col = pc.hi.at_x(y).integral(0, y) + pc.lo.at_x(y).integral(y, 1)
            assert col / m.volume == dF(y)
        for x in grid(7):
            assert pc.normalizer(x) / m.volume == dI(x)

    def test_methods_agree(self):
        m = model_from_composition(Composition((2, 1, 3)))
        g = grid(6)
        assert joint_extremes_on_grid(m, g) == joint_extremes_on_grid(m, g, method="pointwise")

    def test_single_kernel_chain(self):
        # one lower and one upper particle with a constant kernel: uniform on the triangle
        m = model_from_composition(Composition((2,)))
        j = joint_extremes_on_grid(m, [F(1, 4), F(3, 4)])
        assert j == [[2, 2], [0, 2]]

    def test_bad_grid(self):
        with pytest.raises(InvalidInput):
            joint_extremes_on_grid(model_from_composition(Composition((2, 2))), [F(3, 2)])


class TestGamma:
    @pytest.mark.parametrize("R", range(2, 8))
    def test_examples(self, R):
        g = gamma(R)
        assert gamma_minus(g) == ONE - RationalPoly([1, -1]) ** (R - 1)
        assert gamma_minus(g.primitive()) == ONE - RationalPoly([1, -1]) ** R
        assert gamma_plus(ONE) == T

    def test_zero(self):
        with pytest.raises(InvalidInput):
            gamma_plus(RationalPoly())
        with pytest.raises(InvalidInput):
            gamma_minus(RationalPoly())

    @given(st.lists(st.fractions(min_value=0, max_value=4, max_denominator=5), min_size=1, max_size=5))
    def test_cdf_shape(self, coeffs):
        f = RationalPoly(coeffs)
        if f.is_zero():
            return
        for G in (gamma_plus(f), gamma_minus(f)):
            assert G(0) == 0 and G(1) == 1
            assert min(G.derivative().grid_values(20)) >= 0


class TestEnvelope:
    def test_upper_first_particle(self):
        m = model_from_composition(Composition((1, 2, 2)))
        assert m.first_upper and m.n_particles >= 3
        lower, upper = envelope_bounds(m).first
        assert lower == RationalPoly.monomial(2) and upper == T

    def test_two_run_bounds(self):
        # first run of length 2 (constant kernel): t <= F <= 1 - (1 - t)^2 when the first particle is lower
        m = model_from_composition(Composition((2, 3)))
        assert not m.first_upper
        lower, upper = envelope_bounds(m).first
        assert lower == T and upper == ONE - RationalPoly([1, -1]) ** 2
        for t in grid(100):
            assert lower(t) <= upper(t)

    def test_sizes(self):
        with pytest.raises(InvalidInput):
            envelope_bounds(model_from_composition(Composition((3,))))
        assert envelope_bounds(model_from_composition(Composition((2, 2)))).last is not None
        three = model_from_composition(Composition((3, 1)))
        assert three.n_particles == 3 and envelope_bounds(three).last is None

    @settings(max_examples=25)
    @given(st.integers(4, 8).flatmap(lambda n: st.sampled_from(list(all_compositions(n)))), unit)
    def test_sandwich(self, c, y):
        m = model_from_composition(c)
        if m.n_particles < 4:
            return
        lower, upper = envelope_bounds(m).first
        F_ = PinnedConditional(m, 0, m.n_particles - 1).density_piecewise(y).cumulative()
        for t in grid(40):
            assert lower(t) <= F_(t) <= upper(t)
