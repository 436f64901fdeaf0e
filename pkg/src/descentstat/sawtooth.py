"""Sawtooth models: exact volumes, marginals, conditionals and envelopes.

A model is a chain of particles ``0 .. P-1`` on ``[0, 1]`` alternating
between *lower* and *upper* particles.  Consecutive particles ``i, i+1``
interact through a kernel ``k_i`` evaluated at the (nonnegative) height of
the upper one above the lower one, so the unnormalized density is::

    prod_i 1{ordering} k_i(|z_{i+1} - z_i|)

Kernels are stored unnormalized (the ``gamma~_l(t) = t^(l-2)/(l-2)!`` form for
compositions) so that ``n! * volume == beta(D)`` holds literally.

Two exact evaluation paths are available:

* the *pointwise* path conditions on a rational value and sweeps
  :class:`~descentstat.polyalg.PiecewisePoly` weights from both ends;
* the *symbolic-pin* path keeps the pinned value as a second polynomial
  variable (:class:`PinnedConditional`), which turns whole grids of
  conditionals into a few integer matrix products.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import factorial
from typing import Iterable, Sequence, Union

import numpy as np

from .combinatorics import Composition, ModelType, runs
from .errors import InvalidInput, InvalidModel
from .polyalg import (
    BivariatePoly,
    PiecewisePoly,
    RationalPoly,
    as_fraction,
    pinned_start,
    pinned_transfer,
    transfer_down,
    transfer_down_piecewise,
    transfer_up,
    transfer_up_piecewise,
)
from .reports import decimal_str, fraction_str, rows_to_csv, dumps

ONE = RationalPoly([1])
Density = Union[RationalPoly, PiecewisePoly]


def gamma_tilde(r: int) -> RationalPoly:
    """Unnormalized run kernel ``t^(r-2) / (r-2)!`` for a run of length ``r >= 2``."""
    if r < 2:
        raise InvalidInput("run length must be >= 2")
    return RationalPoly.monomial(r - 2, Fraction(1, factorial(r - 2)))


def gamma(r: int) -> RationalPoly:
    """Normalized run kernel ``(r-1) t^(r-2)``."""
    if r < 2:
        raise InvalidInput("run length must be >= 2")
    return RationalPoly.monomial(r - 2, r - 1)


def _bernstein(p: RationalPoly, degree: int) -> list[Fraction]:
    # Bernstein coefficients of p on [0,1] in the basis of the given degree
    from math import comb
    cs = list(p.coeffs) + [Fraction(0)] * (degree + 1 - len(p.coeffs))
    return [sum((Fraction(comb(j, i), comb(degree, i)) * cs[i] for i in range(j + 1)), Fraction(0))
            for j in range(degree + 1)]


def is_nonnegative_on_unit(p: RationalPoly, grid: int = 1000) -> bool:
    """Nonnegativity of ``p`` on ``[0, 1]``.

    Nonnegative Bernstein coefficients (after degree elevation) certify the
    answer; otherwise the polynomial is sampled exactly on a fine rational
    grid, which is a check rather than a proof.
    """
    if p.is_zero():
        return True
    d = max(p.degree, 0)
    for extra in (0, d + 2, 4 * d + 8):
        if all(c >= 0 for c in _bernstein(p, d + extra)):
            return True
    nums, _ = p.scaled_grid(grid)
    return all(v >= 0 for v in nums)


def sup_on_unit(p: RationalPoly) -> Fraction:
    """Exact maximum of a polynomial that is monotone or sampled at its critical grid.

    For the nondecreasing kernels of a model the maximum is attained at 1; in
    general the value is the largest of the endpoint values and a 1000-point
    rational grid.
    """
    best = max(p(0), p(1))
    nums, den = p.scaled_grid(1000)
    return max(best, Fraction(max(nums), den))


@dataclass(frozen=True)
class SawtoothModel:
    kernels: tuple[RationalPoly, ...]
    first_upper: bool = False
    normalized: bool = False
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        ks = tuple(self.kernels)
        object.__setattr__(self, "kernels", ks)
        if not self.validate:
            return
        for i, k in enumerate(ks):
            if not isinstance(k, RationalPoly):
                raise InvalidModel(f"kernel {i} is not a RationalPoly")
            if k.is_zero() or k(0) < 0:
                raise InvalidModel(f"kernel {i} must be nonnegative and not identically zero")
            if not is_nonnegative_on_unit(k.derivative()):
                raise InvalidModel(f"kernel {i} is not nondecreasing on [0,1]")
        if self.normalized and any(k.integral() != 1 for k in ks):
            raise InvalidModel("normalized flag set but a kernel does not integrate to 1")
        if self.volume <= 0:
            raise InvalidModel("model volume must be positive")

    # -- structure --------------------------------------------------------

    @property
    def n_particles(self) -> int:
        return len(self.kernels) + 1

    def is_upper(self, i: int) -> bool:
        return (i % 2 == 0) == self.first_upper

    @property
    def model_type(self) -> ModelType:
        sign = lambda up: "+" if up else "-"
        return ModelType(sign(self.is_upper(0)), sign(self.is_upper(self.n_particles - 1)))

    def particle_name(self, i: int) -> str:
        up = self.is_upper(i)
        k = sum(1 for j in range(i + 1) if self.is_upper(j) == up)
        return f"{'Y' if up else 'X'}{k}"

    def particle_index(self, ident) -> int:
        """Chain index of a particle id: ``XI``, ``XF``, ``X2``, ``Y1``, ``P3`` or an int."""
        P = self.n_particles
        if isinstance(ident, (int, np.integer)) and not isinstance(ident, bool):
            i = int(ident)
            if not 0 <= i < P:
                raise InvalidInput(f"particle index {i} outside 0..{P - 1}")
            return i
        if not isinstance(ident, str):
            raise InvalidInput(f"bad particle id {ident!r}")
        s = ident.strip().upper().replace("_", "")
        if s == "XI":
            return 0
        if s == "XF":
            return P - 1
        m = re.fullmatch(r"([XYP])(\d+)", s)
        if not m:
            raise InvalidInput(f"bad particle id {ident!r}")
        letter, k = m.group(1), int(m.group(2))
        if k < 1:
            raise InvalidInput(f"bad particle id {ident!r}")
        if letter == "P":
            if k > P:
                raise InvalidInput(f"particle {ident!r} does not exist")
            return k - 1
        want_upper = letter == "Y"
        seen = 0
        for i in range(P):
            if self.is_upper(i) == want_upper:
                seen += 1
                if seen == k:
                    return i
        raise InvalidInput(f"particle {ident!r} does not exist in a model with {P} particles")

    # -- derived models ---------------------------------------------------

    def reversed(self) -> "SawtoothModel":
        """Same model read from the last particle to the first."""
        return SawtoothModel(tuple(reversed(self.kernels)), self.is_upper(self.n_particles - 1),
                             self.normalized, validate=False)

    def reflected(self) -> "SawtoothModel":
        """Image under ``t -> 1 - t``: lower and upper particles swap roles."""
        return SawtoothModel(self.kernels, not self.first_upper, self.normalized, validate=False)

    def normalize(self) -> "SawtoothModel":
        return SawtoothModel(tuple(k / k.integral() for k in self.kernels), self.first_upper,
                             True, validate=False)

    def truncate(self, last: int) -> "SawtoothModel":
        """Keep particles ``0..last`` and the interactions among them."""
        if not 0 <= last < self.n_particles:
            raise InvalidInput("truncation index out of range")
        return SawtoothModel(self.kernels[:last], self.first_upper, self.normalized, validate=False)

    def truncate_left(self, first: int) -> "SawtoothModel":
        """Keep particles ``first..P-1``."""
        if not 0 <= first < self.n_particles:
            raise InvalidInput("truncation index out of range")
        return SawtoothModel(self.kernels[first:], self.is_upper(first), self.normalized, validate=False)

    # -- transfer chains --------------------------------------------------

    def _step(self, d: RationalPoly, i_kernel: int, to_upper: bool) -> RationalPoly:
        k = self.kernels[i_kernel]
        return transfer_up(d, k) if to_upper else transfer_down(d, k)

    @cached_property
    def forward_weights(self) -> tuple[RationalPoly, ...]:
        """``a_j``: weight of particle ``j`` from everything on its left."""
        out = [ONE]
        for i in range(len(self.kernels)):
            out.append(self._step(out[-1], i, self.is_upper(i + 1)))
        return tuple(out)

    @cached_property
    def backward_weights(self) -> tuple[RationalPoly, ...]:
        """``b_j``: weight of particle ``j`` from everything on its right."""
        P = self.n_particles
        out = [ONE] * P
        for i in range(P - 2, -1, -1):
            out[i] = self._step(out[i + 1], i, self.is_upper(i))
        return tuple(out)

    @cached_property
    def volume(self) -> Fraction:
        return self.forward_weights[-1].integral()


def model_from_composition(c: Composition) -> SawtoothModel:
    """The unnormalized model whose kernels are ``gamma~`` of the run lengths of ``c``."""
    rs = runs(c)
    if not rs:
        return SawtoothModel((), False)
    return SawtoothModel(tuple(gamma_tilde(r.length) for r in rs), not rs[0].ascending)


def volume(m: SawtoothModel) -> Fraction:
    return m.volume


# -- density reports ------------------------------------------------------


@dataclass(frozen=True)
class DensityReport:
    """A (conditional) density of one particle and its CDF.

    ``density`` is normalized; ``normalizer`` is the integral of the
    unnormalized weight it was obtained from, so ``weight = density *
    normalizer``.  Unconditioned densities are single polynomials; densities
    conditioned on a pinned value are piecewise.
    """

    variable: str
    conditioning: str
    density: Density
    cdf: Density
    normalizer: Fraction

    @property
    def weight(self) -> Density:
        return self.density * self.normalizer

    def rows(self, k: int = 100, precision: int = 12) -> list[list[str]]:
        out = []
        for j in range(k + 1):
            t = Fraction(j, k)
            d, F = self.density(t), self.cdf(t)
            out.append([fraction_str(t), decimal_str(d, precision), fraction_str(d),
                        decimal_str(F, precision), fraction_str(F)])
        return out

    def to_csv(self, k: int = 100, precision: int = 12) -> str:
        header = ["t", "density", "density_exact", "cdf", "cdf_exact"]
        return rows_to_csv(header, self.rows(k, precision))

    def to_json(self, k: int = 100, precision: int = 12) -> str:
        def poly_json(p):
            if isinstance(p, PiecewisePoly):
                return {"breaks": [fraction_str(b) for b in p.breaks],
                        "pieces": [[fraction_str(c) for c in q.coeffs] for q in p.pieces]}
            return [fraction_str(c) for c in p.coeffs]

        return dumps({
            "schema": 1,
            "variable": self.variable,
            "conditioning": self.conditioning,
            "normalizer": self.normalizer,
            "density": poly_json(self.density),
            "cdf": poly_json(self.cdf),
            "table": [dict(zip(["t", "density", "density_exact", "cdf", "cdf_exact"], r))
                      for r in self.rows(k, precision)],
        })


def _report(variable: str, conditioning: str, weight: Density) -> DensityReport:
    norm = weight.integral()
    if norm <= 0:
        raise InvalidInput("conditioning event has zero probability")
    density = weight / norm
    if isinstance(density, PiecewisePoly):
        cdf = density.cumulative()
    else:
        cdf = density.primitive()
    return DensityReport(variable, conditioning, density, cdf, norm)


def marginal(m: SawtoothModel, target) -> DensityReport:
    j = m.particle_index(target)
    w = m.forward_weights[j] * m.backward_weights[j]
    return _report(m.particle_name(j), "none", w)


def marginal_first(m: SawtoothModel) -> DensityReport:
    return marginal(m, 0)


def marginal_last(m: SawtoothModel) -> DensityReport:
    return marginal(m, m.n_particles - 1)


def _shifted_kernel(kernel: RationalPoly, v: Fraction, to_upper: bool) -> PiecewisePoly:
    """Weight ``k(|s - v|)`` on the admissible side of a neighbour pinned at ``v``."""
    zero = RationalPoly()
    if to_upper:
        return PiecewisePoly.split_at(v, zero, kernel.compose_affine(-v, 1))
    return PiecewisePoly.split_at(v, kernel.compose_affine(v, -1), zero)


def _resolve_degenerate_pins(m: SawtoothModel, target: int, pins: dict[int, Fraction]) -> dict[int, Fraction]:
    """Replace boundary pins of zero density by their limit.

    A lower particle pinned at 1 squeezes its upper neighbours to 1 (and an
    upper particle at 0 squeezes its lower neighbours to 0), so the limit
    conditional equals conditioning the neighbour on the target's side.
    """
    pins = dict(pins)
    moved = True
    while moved:
        moved = False
        for i, v in sorted(pins.items()):
            if (not m.is_upper(i) and v == 1) or (m.is_upper(i) and v == 0):
                j = i - 1 if i > target else i + 1
                if j == target:
                    raise InvalidInput(
                        f"conditional law of {m.particle_name(target)} is a point mass at {v}")
                if j in pins and pins[j] != v:
                    raise InvalidInput("conditioning event has zero probability")
                del pins[i]
                pins[j] = v
                moved = True
                break
    return pins


def _parse_given(m: SawtoothModel, given) -> dict[int, Fraction]:
    if given is None:
        return {}
    if isinstance(given, dict):
        items = list(given.items())
    elif isinstance(given, tuple) and len(given) == 2 and not isinstance(given[0], tuple):
        items = [given]
    else:
        items = list(given)
    pins: dict[int, Fraction] = {}
    for ident, value in items:
        i = m.particle_index(ident)
        try:
            v = as_fraction(value)
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise InvalidInput(f"conditioning value {value!r} is not an exact rational") from exc
        if v < 0 or v > 1:
            raise InvalidInput(f"conditioning value {v} outside [0,1]")
        if i in pins and pins[i] != v:
            raise InvalidInput("particle conditioned on two different values")
        pins[i] = v
    return pins


def conditional_weight(m: SawtoothModel, target: int, pins: dict[int, Fraction]) -> PiecewisePoly:
    """Unnormalized density of particle ``target`` given pinned particles.

    Every pin enters the sweep; nothing relies on the Markov property, which
    makes it usable as an independent check of it.
    """
    P = m.n_particles
    w = PiecewisePoly.smooth(ONE)
    for i in range(target):
        to_upper = m.is_upper(i + 1)
        if i in pins:
            w = _shifted_kernel(m.kernels[i], pins[i], to_upper)
        elif to_upper:
            w = transfer_up_piecewise(w, m.kernels[i])
        else:
            w = transfer_down_piecewise(w, m.kernels[i])
    left = w
    w = PiecewisePoly.smooth(ONE)
    for i in range(P - 1, target, -1):
        to_upper = m.is_upper(i - 1)
        if i in pins:
            w = _shifted_kernel(m.kernels[i - 1], pins[i], to_upper)
        elif to_upper:
            w = transfer_up_piecewise(w, m.kernels[i - 1])
        else:
            w = transfer_down_piecewise(w, m.kernels[i - 1])
    return left * w


def conditional_density(m: SawtoothModel, target, given) -> DensityReport:
    """Exact density of ``target`` conditioned on one or more ``(particle, value)`` pins."""
    j = m.particle_index(target)
    pins = _parse_given(m, given)
    if j in pins:
        raise InvalidInput("target particle cannot be conditioned on")
    label = ", ".join(f"{m.particle_name(i)}={v}" for i, v in sorted(pins.items())) or "none"
    pins = _resolve_degenerate_pins(m, j, pins)
    return _report(m.particle_name(j), label, conditional_weight(m, j, pins))


# -- symbolic pins --------------------------------------------------------


@dataclass
class ExactGrid:
    """Exact values ``num[a, b] / den[b]`` on the grid ``(a/k, b/k)``.

    The first axis is the target coordinate, the second the pinned value.
    ``den`` entries are positive Python integers.
    """

    k: int
    num: np.ndarray
    den: np.ndarray

    def value(self, a: int, b: int) -> Fraction:
        return Fraction(int(self.num[a, b]), int(self.den[b]))

    def to_fractions(self) -> list[list[Fraction]]:
        return [[self.value(a, b) for b in range(self.k + 1)] for a in range(self.k + 1)]

    def to_float(self) -> np.ndarray:
        out = np.empty(self.num.shape)
        for a in range(self.num.shape[0]):
            for b in range(self.num.shape[1]):
                out[a, b] = int(self.num[a, b]) / int(self.den[b])
        return out

    def column_nonincreasing_violations(self) -> int:
        """Count pairs where the value increases from pin ``b`` to ``b+1``."""
        left = self.num[:, :-1] * self.den[None, 1:]
        right = self.num[:, 1:] * self.den[None, :-1]
        return int(np.count_nonzero(right > left))


def _piece_select(k: int) -> np.ndarray:
    # True where the ``hi`` piece applies: s >= v, except the corner s = v = 1
    a = np.arange(k + 1)[:, None]
    b = np.arange(k + 1)[None, :]
    sel = a >= b
    sel[k, k] = False
    return sel


class PinnedConditional:
    """Conditional law of one particle given another pinned at a symbolic value.

    Holds ``W(s, v)``, the unnormalized density of the target at ``s`` given
    the pin at ``v``, as two bivariate polynomials: ``lo`` for ``s <= v`` and
    ``hi`` for ``s >= v``.  The normalizer ``D(v) = int W(s, v) ds`` is a
    polynomial; where it vanishes (a lower pin at 1, an upper pin at 0) the
    conditional is defined as its limit, obtained by cancelling the common
    factor ``(v - r)^m`` exactly.
    """

    def __init__(self, m: SawtoothModel, target, pin):
        self.model = m
        self.target = m.particle_index(target)
        self.pin = m.particle_index(pin)
        if self.target == self.pin:
            raise InvalidInput("target and pinned particle must differ")
        self.target_upper = m.is_upper(self.target)
        self.pin_upper = m.is_upper(self.pin)
        work, t, p = m, self.target, self.pin
        if p > t:
            work = m.reversed()
            P = m.n_particles
            t, p = P - 1 - t, P - 1 - p
        lo, hi = pinned_start(work.kernels[p], work.is_upper(p + 1))
        for i in range(p + 1, t):
            lo, hi = pinned_transfer(lo, hi, work.kernels[i], work.is_upper(i + 1))
        far = work.backward_weights[t]
        self.lo = lo.mul_x(far)
        self.hi = hi.mul_x(far)
        plo = self.lo.primitive_x()
        phi = self.hi.primitive_x()
        diag_lo = plo.diagonal()
        diag_hi = phi.diagonal()
        # CDF numerators: G_lo(t, v) for t <= v, G_hi(t, v) for t >= v
        self.cdf_lo = plo
        self.cdf_hi = phi + BivariatePoly.from_y(diag_lo - diag_hi)
        self.normalizer = self.cdf_hi.at_x(1)
        self._limits: dict[int, dict[str, object]] = {}
        for r in (0, 1):
            if self.normalizer(r) == 0:
                self._limits[r] = self._limit_pieces(r)

    def _limit_pieces(self, r: int) -> dict[str, object]:
        D = self.normalizer
        if D.is_zero():
            raise InvalidModel("conditional normalizer vanishes identically")
        mult = 0
        while D(r) == 0:
            q = [Fraction(0)] * D.degree
            acc = Fraction(0)
            for j in range(D.degree, 0, -1):
                acc = acc * r + D.coeffs[j]
                q[j - 1] = acc
            D = RationalPoly(q)
            mult += 1
        # only the piece covering the pinned value's side survives in the limit
        names = ("lo", "cdf_lo") if r == 1 else ("hi", "cdf_hi")
        out: dict[str, object] = {"D": D(r)}
        for name in names:
            w = getattr(self, name)
            for _ in range(mult):
                w = w.divide_y_root(r)
                if w is None:
                    raise InvalidModel("conditional limit at the boundary does not exist")
            out[name] = w.at_y(r)
        return out

    # -- pointwise ---------------------------------------------------------

    def _check_v(self, v) -> Fraction:
        v = as_fraction(v)
        if v < 0 or v > 1:
            raise InvalidInput("pinned value outside [0,1]")
        return v

    def density(self, s, v) -> Fraction:
        s, v = as_fraction(s), self._check_v(v)
        use_hi = s >= v and not (s == 1 and v == 1)
        if v in self._limits:
            lim = self._limits[v]
            poly = lim["hi"] if use_hi else lim["lo"]
            return poly(s) / lim["D"]
        return (self.hi if use_hi else self.lo)(s, v) / self.normalizer(v)

    def cdf(self, t, v) -> Fraction:
        t, v = as_fraction(t), self._check_v(v)
        piece = "cdf_hi" if t >= v else "cdf_lo"
        if v in self._limits:
            lim = self._limits[v]
            piece = "cdf_lo" if v == 1 else "cdf_hi"
            return lim[piece](t) / lim["D"]
        return getattr(self, piece)(t, v) / self.normalizer(v)

    def density_piecewise(self, v) -> PiecewisePoly:
        """Normalized conditional density of the target for a fixed pin value."""
        v = self._check_v(v)
        if v in self._limits:
            lim = self._limits[v]
            poly = lim["lo"] if v == 1 else lim["hi"]
            return PiecewisePoly.smooth(poly / lim["D"])
        D = self.normalizer(v)
        return PiecewisePoly.split_at(v, self.lo.at_y(v) / D, self.hi.at_y(v) / D)

    # -- grids -------------------------------------------------------------

    def _grid(self, lo: BivariatePoly, hi: BivariatePoly, k: int, lo_name: str, hi_name: str,
              select: np.ndarray) -> ExactGrid:
        lo_vals, lo_den = lo.scaled_grid(k)
        hi_vals, hi_den = hi.scaled_grid(k)
        dn, dden = self.normalizer.scaled_grid(k)
        dn = np.array(dn, dtype=object)
        # bring both pieces to the common denominator lo_den * hi_den
        num = np.where(select, hi_vals * lo_den, lo_vals * hi_den)
        num = num * dden
        den = dn * (lo_den * hi_den)
        for r, lim in self._limits.items():
            b = 0 if r == 0 else k
            poly = lim[hi_name] if r == 0 else lim[lo_name]
            vals, pden = poly.scaled_grid(k)
            dlim = lim["D"]
            col_den = dlim.numerator * pden
            scale = dlim.denominator
            if col_den < 0:
                col_den, scale = -col_den, -scale
            num[:, b] = np.array([v * scale for v in vals], dtype=object)
            den[b] = col_den
        if any(d <= 0 for d in den):
            raise InvalidModel("conditional normalizer is not positive on the grid")
        return ExactGrid(k, num, den)

    def cdf_grid(self, k: int) -> ExactGrid:
        """Exact ``F(a/k | pin = b/k)`` for all ``a, b``."""
        a = np.arange(k + 1)[:, None]
        b = np.arange(k + 1)[None, :]
        return self._grid(self.cdf_lo, self.cdf_hi, k, "cdf_lo", "cdf_hi", a >= b)

    def density_grid(self, k: int) -> ExactGrid:
        """Exact conditional density values (``hi`` piece on the diagonal except at 1)."""
        return self._grid(self.lo, self.hi, k, "lo", "hi", _piece_select(k))

    def density_derivative_violations(self, k: int) -> int:
        """Grid points where the conditional density moves the wrong way.

        Lower targets must have nonincreasing densities, upper targets
        nondecreasing ones: the sign of ``d/ds`` is checked on each piece and
        the jump across ``s = v`` is checked for its direction.
        """
        want = -1 if not self.target_upper else 1
        dlo, dhi = self.lo.derivative_x(), self.hi.derivative_x()
        a = np.arange(k + 1)[:, None]
        b = np.arange(k + 1)[None, :]
        bad = 0
        lo_mask = a <= b
        lo_mask[0, 0] = False
        hi_mask = a >= b
        hi_mask[k, k] = False
        for piece, mask in ((dlo, lo_mask), (dhi, hi_mask)):
            vals, _ = piece.scaled_grid(k)
            signs = np.vectorize(lambda x: (x > 0) - (x < 0), otypes=[int])(vals)
            # a positive normalizer keeps the sign; boundary limits are checked below
            interior = mask.copy()
            for r in self._limits:
                interior[:, 0 if r == 0 else k] = False
            bad += int(np.count_nonzero(interior & (signs * want < 0)))
        # jump across the diagonal: hi - lo must have the sign of ``want``
        jump = self.hi - self.lo
        for b_ in range(k + 1):
            v = Fraction(b_, k)
            if v in self._limits or b_ in (0, k):
                continue
            if jump(v, v) * want < 0:
                bad += 1
        for r, lim in self._limits.items():
            poly = lim["lo"] if r == 1 else lim["hi"]
            sgn = 1 if lim["D"] > 0 else -1
            dv, _ = poly.derivative().scaled_grid(k)
            bad += sum(1 for x in dv if x * sgn * want < 0)
        return bad


def joint_extremes_on_grid(m: SawtoothModel, grid: Sequence, method: str = "symbolic") -> list[list[Fraction]]:
    """Exact joint density ``d(X_I = x_i, X_F = y_j)`` on a rational grid.

    ``method="symbolic"`` keeps the pinned value symbolic; ``"pointwise"``
    runs one pinned transfer chain per grid value of ``x``.
    """
    pts = [as_fraction(g) for g in grid]
    if any(p < 0 or p > 1 for p in pts):
        raise InvalidInput("grid points must lie in [0,1]")
    P = m.n_particles
    V = m.volume
    if P == 1:
        return [[Fraction(1) if x == y else Fraction(0) for y in pts] for x in pts]
    out = []
    if method == "symbolic":
        pc = PinnedConditional(m, P - 1, 0)  # target X_F, pin X_I
        for x in pts:
            row = []
            for y in pts:
                use_hi = y >= x and not (y == 1 and x == 1)
                w = (pc.hi if use_hi else pc.lo)(y, x)
                row.append(w / V)
            out.append(row)
        return out
    if method != "pointwise":
        raise InvalidInput(f"unknown method {method!r}")
    for x in pts:
        w = conditional_weight(m, P - 1, {0: x})
        out.append([w(y) / V for y in pts])
    return out


# -- Gamma transforms and envelopes -----------------------------------------


def _check_positive(f: RationalPoly) -> Fraction:
    total = f.integral()
    if f.is_zero() or total == 0:
        raise InvalidInput("Gamma transform of the zero function")
    return total


def gamma_plus(f: RationalPoly) -> RationalPoly:
    """``t -> int_0^t f / int_0^1 f``."""
    total = _check_positive(f)
    return f.primitive() / total


def gamma_minus(f: RationalPoly) -> RationalPoly:
    """``t -> int_{1-t}^1 f / int_0^1 f``."""
    total = _check_positive(f)
    prim = f.primitive()
    return (RationalPoly([prim(1)]) - prim.reflect()) / total


@dataclass(frozen=True)
class EnvelopeBounds:
    """CDF envelopes ``lower <= F <= upper`` for the extreme particles.

    ``first`` bounds ``F_{X_I | X_F = y}`` for every ``y``; ``last`` bounds
    ``F_{X_F | X_I = x}`` and is only set for models with at least four
    particles.
    """

    first: tuple[RationalPoly, RationalPoly]
    last: tuple[RationalPoly, RationalPoly] | None


def _side_bounds(kernel: RationalPoly, upper: bool) -> tuple[RationalPoly, RationalPoly]:
    if upper:
        return gamma_plus(gamma_plus(kernel)), gamma_plus(kernel)
    return gamma_minus(kernel), gamma_minus(gamma_plus(kernel))


def envelope_bounds(m: SawtoothModel) -> EnvelopeBounds:
    P = m.n_particles
    if P < 3:
        raise InvalidInput("envelope bounds need at least three particles")
    first = _side_bounds(m.kernels[0], m.is_upper(0))
    last = _side_bounds(m.kernels[-1], m.is_upper(P - 1)) if P >= 4 else None
    return EnvelopeBounds(first, last)
