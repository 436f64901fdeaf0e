import json
import math
from fractions import Fraction as F

import numpy as np
import pytest

from descentstat import analysis as an
from descentstat.analysis import FAIL, PASS, SKIP
from descentstat.combinatorics import (Composition, alternating_composition, composition_from_runs,
                                       lambda_b)
from descentstat.errors import InvalidInput, ResourceLimit
from descentstat.sampler import embed_batch, make_rng, sample_permutations
from descentstat.sawtooth import PinnedConditional, marginal_first, model_from_composition


class TestSmallChecks:
    def test_counting(self):
        r = an.counting_check(6)
        assert r.status == PASS and r.passed

    def test_partition_symmetry(self):
        assert an.partition_symmetry_check(8).status == PASS

    def test_alternating_ratio(self):
        # ratio of consecutive alternating counts approaches 2n/pi
        assert abs(an.alternating_ratio(12) - 1) < 1e-5 < abs(an.alternating_ratio(4) - 1)
        assert an.alternating_asymptotic_check(14).status == PASS
        assert an.alternating_asymptotic_check(10).status == SKIP

    def test_envelope(self):
        r = an.envelope_check(6, 20)
        assert r.status == PASS and r.observed == 0

    def test_density_bound_example(self):
        # three constant kernels: the conditional density of the middle particle peaks at 2
        r = an.density_bound_check(Composition((2, 2, 2)))
        assert r.status == PASS and r.observed == 2 and r.bound == 4

    def test_density_bound_skip(self):
        assert an.density_bound_check(Composition((3,))).status == SKIP

    def test_model_bound(self):
        # the normalized kernel of a run of length r is (r-1) t^(r-2), with sup r - 1
        assert an.model_bound(model_from_composition(composition_from_runs([4, 2, 3]))) == 3
        assert an.model_bound(model_from_composition(alternating_composition(5))) == 1

    def test_derivative_report(self):
        r = an.derivative_bound_report(Composition((2, 2, 2)), k=40)
        assert r.status == PASS and r.observed <= r.bound

    def test_monotonicity(self):
        r = an.monotonicity_check(5, 20)
        assert r.status == PASS

    def test_chain_rule_on_fig1(self):
        m = model_from_composition(Composition((3, 2, 4, 1)))
        for target in (0, m.n_particles - 1):
            assert an.truncation_chain_violations(m, target, 20) == 0

    def test_pin_versus_truncation(self):
        m = model_from_composition(Composition((2, 3, 2)))
        pc = PinnedConditional(m, 0, m.n_particles - 1)
        assert an.pin_versus_truncation_violations(pc, pc.cdf_grid(10)) == 0

    def test_chain_violation_counter(self):
        up = [[F(1), F(1)]]
        low = [[F(0), F(1, 2)], [F(0), F(1, 4)]]
        assert an._chain_violations(low, up) == 1
        assert an._chain_violations(low[::-1], up) == 0


class TestClosedForm:
    @pytest.mark.parametrize("b", [2, 3, 5])
    def test_check(self, b):
        r = an.closed_form_db_check(b, 8)
        assert r.status == PASS

    def test_limit_at_zero(self):
        # y = 0 forces x = 0 in the formula's limit; the value is finite and nonnegative
        for b in (2, 4):
            for x in (F(0), F(1, 3)):
                assert an.closed_form_db(b, x, 0) >= 0

    def test_integrates_to_one(self):
        from scipy.integrate import quad
        for y in (F(1, 5), F(3, 5)):
            total = quad(lambda x: float(an.closed_form_db(3, F(x), y)), 0, 1, points=[float(y)])[0]
            assert total == pytest.approx(1, abs=1e-6)


class TestIndependenceGap:
    def test_two_particles(self):
        # one lower and one upper particle, uniform on {x <= y}: joint 2, marginals 2(1-x), 2y
        g = an.independence_gap(Composition((2,)), k=8)
        assert g.sup_gap_exact == 2 and g.cdf_gap_exact == 1

    def test_single_cell_rejected(self):
        with pytest.raises(InvalidInput):
            an.independence_gap(Composition((1,)))

    def test_decays(self):
        gaps = [an.independence_gap(alternating_composition(n), 10) for n in (4, 6, 8)]
        assert an.nonincreasing([g.sup_gap for g in gaps])
        assert an.nonincreasing([g.cdf_gap for g in gaps])
        json.dumps(gaps[0].to_dict(), default=str)

    def test_nonincreasing_tolerance(self):
        assert an.nonincreasing([1.0, 1.0 + 1e-9, 0.5])
        assert not an.nonincreasing([1.0, 1.1])

    def test_decay_check_small(self):
        r = an.decay_check((6, 8, 10), 10, (2, 6))
        assert r.status == PASS

    def test_empty(self):
        with pytest.raises(InvalidInput):
            an.decay_experiment(())

    def test_lambda_b_shrinks(self):
        a, b = (an.independence_gap(lambda_b(x), 10).cdf_gap_exact for x in (2, 8))
        assert b < a


class TestLargeRunAndTruncation:
    def test_skip(self):
        assert an.large_run_bound_check(Composition((2, 2))).status == SKIP

    def test_pass(self):
        r = an.large_run_bound_check(composition_from_runs([2, 5, 2]), k=12)
        assert r.status == PASS and r.details["R"] == 5

    def test_full_truncation_is_zero(self):
        c = Composition((3, 2, 4, 1))
        assert an.truncation_gap(c, c.n, 10) == 0

    def test_bad_truncation(self):
        c = Composition((3, 2, 4, 1))
        with pytest.raises(InvalidInput):
            an.truncation_gap(c, 0)
        with pytest.raises(InvalidInput):
            an.truncation_check(c, [2, 5])

    def test_truncation_trend(self):
        r = an.truncation_check(alternating_composition(12), [4, 6, 8, 10], 20)
        assert r.status == PASS


class TestLP:
    def test_identical_samples(self):
        pts = make_rng(0).random((1000, 2))
        est = an.lp_distance_bound(pts, pts, 1 / 8)
        assert est.tv == 0 and est.bound == pytest.approx(math.sqrt(2) / 8)

    def test_disjoint_samples(self):
        a = np.full((10, 2), 0.1)
        b = np.full((10, 2), 0.9)
        assert an.lp_distance_bound(a, b, 0.25).tv == pytest.approx(1)

    def test_dimension_cap(self):
        c = alternating_composition(10)
        with pytest.raises(ResourceLimit):
            an.lp_independence_experiment(c, [1, 2, 3, 4], 100)
        est = an.lp_independence_experiment(c, [1, 2, 3, 4], 100, allow_high_dimension=True)
        assert est.dimension == 4

    def test_bad_positions(self):
        with pytest.raises(InvalidInput):
            an.lp_independence_experiment(alternating_composition(5), [0, 2], 10)
        with pytest.raises(InvalidInput):
            an.lp_gap_experiment(10, (), 10, (0,))
        with pytest.raises(InvalidInput):
            an.lp_gap_experiment(10, (12,), 10, (0,))

    def test_exact_rank_tv_identity(self):
        # a single run fixes sigma to the identity: joint and product coincide
        assert an.exact_pair_tv(Composition((5,)), 1, 4) == 0

    def test_embedded_cells_order_statistics(self):
        # identity permutation of 3 cells: (U_(1), U_(3)) on a 2 x 2 grid
        cells = an.embedded_pair_cells(Composition((3,)), 1, 3, 2)
        assert cells == [[F(1, 8), F(3, 4)], [0, F(1, 8)]]

    def test_embedded_cells_monte_carlo(self):
        c = Composition((2, 2))
        cells = np.array(an.embedded_pair_cells(c, 1, 3, 2), dtype=float)
        rng = make_rng(3)
        x = embed_batch(sample_permutations(c, 200_000, rng), rng)
        ix = (x[:, 0] >= 0.5).astype(int)
        iy = (x[:, 2] >= 0.5).astype(int)
        emp = np.bincount(ix * 2 + iy, minlength=4).reshape(2, 2) / len(x)
        assert np.abs(emp - cells).max() < 0.005

    def test_embedded_tv_decreases(self):
        c = alternating_composition(7)
        tv = [an.embedded_pair_tv(c, 1, 1 + g, 4) for g in range(1, 6)]
        assert all(b < a for a, b in zip(tv, tv[1:]))

    def test_gap_experiment_shape(self):
        res = an.lp_gap_experiment(20, (2, 5), 2000, (0, 1), 1 / 8)
        assert set(res) == {2, 5} and all(len(v) == 2 for v in res.values())
        assert all(b >= math.sqrt(2) / 8 for v in res.values() for b in v)


class TestSamplerChecks:
    def test_candidates(self):
        pool = an.uniformity_candidates()
        assert len(pool) == 212

    def test_chi_square(self):
        stat, p = an.chi_square_uniform(Composition((2, 1, 2)), 20_000, 0)
        assert stat >= 0 and p > 1e-4

    def test_small_uniformity(self):
        r = an.uniformity_check(count=4, seeds=3, factor=100)
        assert r.observed >= 2

    def test_beta_embedding(self):
        r = an.beta_embedding_check(samples=20_000, seed=1)
        assert r.status == PASS

    def test_positivity(self):
        r = an.positivity_spot_check(n=15, window=2, samples=20_000)
        assert r.status == PASS

    def test_positivity_window(self):
        with pytest.raises(InvalidInput):
            an.positivity_spot_check(n=5, window=3)

    def test_summarize(self):
        ok = an.CheckReport("a", PASS)
        skip = an.CheckReport("b", SKIP)
        bad = an.CheckReport("c", FAIL)
        assert an.summarize([ok, skip]) and not an.summarize([ok, bad])
        assert bad.to_dict()["status"] == FAIL
