"""Verification harness: exact inequality suites, bound checks and decay experiments.

Every verdict is decided by exact rational comparisons on rational grids
``j/k`` or, for sampled experiments, by seeded statistics with an explicit
slack.  Grid suprema are estimates of the true suprema, not certificates.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

from .combinatorics import (Composition, DescentSet, all_compositions, alternating_composition,
                            brute_force_class, brute_force_counts, composition_from_descents,
                            lambda_b, runs)
from .errors import InvalidInput, ResourceLimit
from .polyalg import RationalPoly
from .reports import round_up
from .sampler import (count_class, embed_batch, make_rng, sample_permutations, sample_values)
from .sawtooth import (PinnedConditional, SawtoothModel, envelope_bounds, marginal,
                       model_from_composition, sup_on_unit)

PASS, FAIL, SKIP = "PASS", "FAIL", "SKIP"
TIE_TOLERANCE = 1e-6


@dataclass
class CheckReport:
    """Outcome of one verification: a verdict plus what was measured."""

    name: str
    status: str
    observed: Any = None
    bound: Any = None
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def to_dict(self) -> dict:
        return asdict(self)


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


class _Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def _grid(k: int) -> list[Fraction]:
    return [Fraction(j, k) for j in range(k + 1)]


def normalized_sup(kernel: RationalPoly) -> Fraction:
    """Sup on ``[0,1]`` of the kernel rescaled to a probability density."""
    return sup_on_unit(kernel / kernel.integral())


def model_bound(m: SawtoothModel) -> Fraction:
    """Smallest ``A`` bounding every normalized interaction density of ``m``."""
    return max((normalized_sup(k) for k in m.kernels), default=Fraction(1))


# -- counting ------------------------------------------------------------------


def counting_check(n_max: int = 9) -> CheckReport:
    """``count_class = |brute force class| = n! * volume`` for all compositions ``n <= n_max``."""
    mismatches = []
    checked = 0
    with _Timer() as tm:
        for n in range(1, n_max + 1):
            brute = brute_force_counts(n, cap=max(n_max, 10))
            for c in all_compositions(n):
                beta = count_class(c)
                vol = model_from_composition(c).volume
                checked += 1
                if beta != brute[c.descent_set().members] or math.factorial(n) * vol != beta:
                    mismatches.append(str(c))
    return CheckReport("counting", _verdict(not mismatches), checked, None,
                       {"mismatches": mismatches[:20], "n_max": n_max}, tm.seconds)


def partition_symmetry_check(n_max: int = 12) -> CheckReport:
    """``sum_D beta(D) = n!`` and ``beta(D) = beta(complement D)`` for ``n <= n_max``."""
    bad = []
    with _Timer() as tm:
        for n in range(1, n_max + 1):
            total = 0
            for c in all_compositions(n):
                beta = count_class(c)
                total += beta
                if beta != count_class(c.complement()):
                    bad.append(f"complement {c}")
            if total != math.factorial(n):
                bad.append(f"partition n={n}")
    return CheckReport("partition-symmetry", _verdict(not bad), n_max, None,
                       {"failures": bad[:20]}, tm.seconds)


def alternating_ratio(n: int) -> float:
    """``pi * beta(n) / (2 n beta(n-1))`` for alternating counts; tends to 1."""
    b_n = count_class(alternating_composition(n))
    b_prev = count_class(alternating_composition(n - 1))
    return float(math.pi * Fraction(b_n, 2 * n * b_prev))


def alternating_asymptotic_check(n_max: int = 14, tolerance: float = 0.01) -> CheckReport:
    if n_max < 6:
        raise InvalidInput("n_max must be at least 6")
    with _Timer() as tm:
        ratios = {n: alternating_ratio(n) for n in range(2, n_max + 1)}
    dev = abs(ratios[n_max] - 1)
    status = _verdict(dev <= tolerance) if n_max >= 14 else SKIP
    return CheckReport("alternating-asymptotic", status, dev, tolerance,
                       {"ratios": ratios, "counts": {n: count_class(alternating_composition(n))
                                                     for n in range(1, n_max + 1)}},
                       tm.seconds)


# -- envelopes and density bounds --------------------------------------------------


ENVELOPE_PINS = tuple(Fraction(j, 4) for j in range(5))


def envelope_violations(m: SawtoothModel, pins: Sequence[Fraction] = ENVELOPE_PINS,
                        k: int = 100) -> int:
    """Grid points where a pinned extreme CDF leaves its Gamma envelope."""
    bounds = envelope_bounds(m)
    P = m.n_particles
    sides = [(0, P - 1, bounds.first)]
    if bounds.last is not None:
        sides.append((P - 1, 0, bounds.last))
    bad = 0
    for target, pin, (lower, upper) in sides:
        pc = PinnedConditional(m, target, pin)
        lo_vals, hi_vals = lower.grid_values(k), upper.grid_values(k)
        for y in pins:
            F = pc.density_piecewise(y).cumulative().grid_values(k)
            bad += sum(1 for a, f, b in zip(lo_vals, F, hi_vals) if not a <= f <= b)
    return bad


def envelope_check(n_max: int = 8, k: int = 100) -> CheckReport:
    checked = 0
    failures = []
    with _Timer() as tm:
        for n in range(1, n_max + 1):
            for c in all_compositions(n):
                m = model_from_composition(c)
                if m.n_particles < 4:
                    continue
                checked += 1
                v = envelope_violations(m, k=k)
                if v:
                    failures.append((str(c), v))
    return CheckReport("envelope", _verdict(not failures), sum(v for _, v in failures), 0,
                       {"models": checked, "failures": failures[:20]}, tm.seconds)


DENSITY_PINS = ENVELOPE_PINS


def density_bound_check(c: Composition, A: Fraction | None = None, k: int = 200) -> CheckReport:
    """Sup of ``d(X_I | X_2 = v)`` over the grid against ``4 A^2``.

    ``X_2`` is the second particle of the same kind as the first one (chain
    index 2); ``A`` defaults to the largest sup of a normalized kernel.
    """
    m = model_from_composition(c)
    if m.n_particles < 3:
        return CheckReport("density-bound", SKIP, details={"reason": "no second particle of the first kind",
                                                           "composition": str(c)})
    A = model_bound(m) if A is None else Fraction(A)
    if model_bound(m) > A:
        raise InvalidInput(f"model densities are not bounded by A={A}")
    with _Timer() as tm:
        pc = PinnedConditional(m, 0, 2)
        sup = max(max(pc.density_piecewise(v).grid_values(k)) for v in DENSITY_PINS)
    bound = 4 * A * A
    return CheckReport("density-bound", _verdict(sup <= bound), sup, bound,
                       {"composition": str(c), "A": A}, tm.seconds)


def density_bound_suite(n_max: int = 8, k: int = 200) -> CheckReport:
    failures, checked, worst = [], 0, Fraction(0)
    with _Timer() as tm:
        for n in range(1, n_max + 1):
            for c in all_compositions(n):
                r = density_bound_check(c, k=k)
                if r.status == SKIP:
                    continue
                checked += 1
                worst = max(worst, r.observed / r.bound)
                if r.status == FAIL:
                    failures.append(str(c))
    return CheckReport("density-bound-suite", _verdict(not failures), worst, 1,
                       {"models": checked, "failures": failures[:20],
                        "observed": "largest ratio sup / 4A^2"}, tm.seconds)


def derivative_bound_report(c: Composition, A: Fraction | None = None, k: int = 200) -> CheckReport:
    """Sup of ``|d'|`` for the first particle's density (free and pinned at ``X_2``)."""
    m = model_from_composition(c)
    if m.n_particles < 4:
        return CheckReport("derivative-bound", SKIP, details={"reason": "fewer than four particles",
                                                              "composition": str(c)})
    A = max(normalized_sup(q) for q in m.kernels[:2]) if A is None else Fraction(A)
    K = 4 * A * A
    const = 4 * A ** 3 * (K + 4 * A * K * K)
    with _Timer() as tm:
        free = marginal(m, 0).density.derivative()
        sup = max(abs(x) for x in free.grid_values(k))
        pc = PinnedConditional(m, 0, 2)
        for v in DENSITY_PINS:
            d = pc.density_piecewise(v).derivative()
            sup = max(sup, max(abs(x) for x in d.grid_values(k)))
    return CheckReport("derivative-bound", _verdict(sup <= const), sup, const,
                       {"composition": str(c), "A": A, "K_A": K}, tm.seconds)


# -- monotonicity suite ------------------------------------------------------------


def _cdf_vector(m: SawtoothModel, target: int, k: int) -> list[Fraction]:
    return marginal(m, target).cdf.grid_values(k)


def _chain_violations(seq_lower: list[list[Fraction]], seq_upper: list[list[Fraction]]) -> int:
    """Order violations among truncation CDFs ending at lower / upper particles.

    Cutting the chain at a lower particle frees it from above and lets the
    target rise; cutting at an upper particle lets it sink.  So the CDFs of
    truncations ending at lower particles increase as the truncation grows,
    those ending at upper particles decrease, and every lower-ending CDF lies
    below every upper-ending one.  This holds for both kinds of target.
    """
    bad = 0

    def le(a, b):
        return sum(1 for x, y in zip(a, b) if x > y)

    for a, b in zip(seq_lower, seq_lower[1:]):
        bad += le(a, b)
    for a, b in zip(seq_upper, seq_upper[1:]):
        bad += le(b, a)
    if seq_lower and seq_upper:
        bad += le(seq_lower[-1], seq_upper[-1])
    return bad


def truncation_chain_violations(m: SawtoothModel, target: int, k: int = 200) -> int:
    """Check the ordering of the target's CDF across all one-sided truncations."""
    P = m.n_particles
    bad = 0
    # truncations on the right keep particles 0..j
    lower, upper = [], []
    for j in range(target, P):
        F = _cdf_vector(m.truncate(j), target, k)
        (upper if m.is_upper(j) else lower).append(F)
    bad += _chain_violations(lower, upper)
    # truncations on the left keep particles j..P-1
    lower, upper = [], []
    for j in range(target, -1, -1):
        F = _cdf_vector(m.truncate_left(j), target - j, k)
        (upper if m.is_upper(j) else lower).append(F)
    bad += _chain_violations(lower, upper)
    return bad


def pin_versus_truncation_violations(pc: PinnedConditional, grid) -> int:
    """Compare a pinned CDF with the CDF of the model cut just before the pin.

    With ``q`` the pin's neighbour on the target's side, an upper pin gives
    ``F_{s | pin = v} >= F_{s | cut at q}`` and a lower pin gives ``<=``.
    """
    m, t, p = pc.model, pc.target, pc.pin
    k = grid.k
    if p > t:
        cut = m.truncate(p - 1)
        F = _cdf_vector(cut, t, k)
    else:
        cut = m.truncate_left(p + 1)
        F = _cdf_vector(cut, t - p - 1, k)
    sign = 1 if pc.pin_upper else -1
    bad = 0
    for a in range(k + 1):
        # compare num/den against F[a] exactly: num >= F*den for an upper pin
        f = F[a]
        for b in range(k + 1):
            lhs = int(grid.num[a, b]) * f.denominator
            rhs = f.numerator * int(grid.den[b])
            if sign * (lhs - rhs) < 0:
                bad += 1
    return bad


def monotonicity_violations(m: SawtoothModel, k: int = 200) -> dict[str, int]:
    """All monotonicity checks on one model, by family."""
    P = m.n_particles
    out = {"density": 0, "conditioning": 0, "chain": 0, "pin-vs-cut": 0}
    for t in range(P):
        d = marginal(m, t).density.derivative().grid_values(k)
        want = 1 if m.is_upper(t) else -1
        out["density"] += sum(1 for x in d if x * want < 0)
        out["chain"] += truncation_chain_violations(m, t, k)
        for p in range(P):
            if p == t:
                continue
            pc = PinnedConditional(m, t, p)
            out["density"] += pc.density_derivative_violations(k)
            grid = pc.cdf_grid(k)
            out["conditioning"] += grid.column_nonincreasing_violations()
            out["pin-vs-cut"] += pin_versus_truncation_violations(pc, grid)
    return out


def monotonicity_check(n_max: int = 7, k: int = 200) -> CheckReport:
    totals = {"density": 0, "conditioning": 0, "chain": 0, "pin-vs-cut": 0}
    failures = []
    checked = 0
    with _Timer() as tm:
        for n in range(1, n_max + 1):
            for c in all_compositions(n):
                v = monotonicity_violations(model_from_composition(c), k)
                checked += 1
                for key, val in v.items():
                    totals[key] += val
                if any(v.values()):
                    failures.append((str(c), v))
    return CheckReport("monotonicity", _verdict(not failures), sum(totals.values()), 0,
                       {"models": checked, "by_family": totals, "failures": failures[:20]},
                       tm.seconds)


# -- closed form for three runs ---------------------------------------------------


def closed_form_db(b: int, x, y) -> Fraction:
    """Density of ``X_I`` at ``x`` given ``X_F = y`` for runs ``(2, b, 2)``.

    ``(1 - x^b - (1-y)^b + max(x-y, 0)^b) / ((1 - 1/(b+1))(1 - (1-y)^b) - y(1-y)^b/(b+1))``,
    with the limit ``b (1 - x^(b-1)) / (b-1)`` at ``y = 0``.
    """
    x, y = Fraction(x), Fraction(y)
    if y == 0:
        return Fraction(b) * (1 - x ** (b - 1)) / (b - 1)
    num = 1 - x ** b - (1 - y) ** b + max(x - y, Fraction(0)) ** b
    den = (1 - Fraction(1, b + 1)) * (1 - (1 - y) ** b) - y * (1 - y) ** b / (b + 1)
    return num / den


def closed_form_db_check(b: int, k: int = 20) -> CheckReport:
    """Transfer-computed ``d(X_I | X_F = y)`` for ``lambda_b`` against the closed form."""
    if b < 2:
        raise InvalidInput("b must be at least 2")
    with _Timer() as tm:
        m = model_from_composition(lambda_b(b))
        pc = PinnedConditional(m, 0, m.n_particles - 1)
        mismatches = 0
        dev = Fraction(0)
        for y in _grid(k):
            for x in _grid(k):
                d = pc.density(x, y)
                if d != closed_form_db(b, x, y):
                    mismatches += 1
                dev = max(dev, abs(d - (1 - x ** b)))
    return CheckReport("closed-form", _verdict(mismatches == 0), mismatches, 0,
                       {"b": b, "points": (k + 1) ** 2, "sup_dev_from_1_minus_x^b": dev},
                       tm.seconds)


def closed_form_suite(bs: Iterable[int] = range(2, 9), k: int = 20) -> CheckReport:
    reports = [closed_form_db_check(b, k) for b in bs]
    devs = [r.details["sup_dev_from_1_minus_x^b"] for r in reports]
    trend = all(b <= a for a, b in zip(devs, devs[1:]))
    ok = all(r.status == PASS for r in reports) and trend
    return CheckReport("closed-form-suite", _verdict(ok), [float(d) for d in devs], None,
                       {"mismatches": {r.details["b"]: r.observed for r in reports},
                        "trend_nonincreasing": trend},
                       sum(r.seconds for r in reports))


# -- independence gaps --------------------------------------------------------------


@dataclass
class GapReport:
    """Dependence between the extreme particles measured on a ``k x k`` grid.

    ``sup_gap`` is ``max |d(x, y) - d(x) d(y)|`` and ``cdf_gap`` is
    ``max_t max_{y, y'} |F(t | X_F = y) - F(t | X_F = y')|``; both are
    rounded up from exact values.
    """

    composition: str
    k: int
    sup_gap: float
    cdf_gap: float
    sup_gap_exact: Fraction
    cdf_gap_exact: Fraction
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def independence_gap(c: Composition | SawtoothModel, k: int = 40) -> GapReport:
    m = c if isinstance(c, SawtoothModel) else model_from_composition(c)
    P = m.n_particles
    if P < 2:
        raise InvalidInput("independence gap needs at least two particles")
    start = time.perf_counter()
    pc = PinnedConditional(m, 0, P - 1)
    V = m.volume
    dI = marginal(m, 0).density.grid_values(k)
    dF = marginal(m, P - 1).density.grid_values(k)
    lo_vals, lo_den = pc.lo.scaled_grid(k)
    hi_vals, hi_den = pc.hi.scaled_grid(k)
    sup_gap = Fraction(0)
    for a in range(k + 1):
        for b in range(k + 1):
            prod = dI[a] * dF[b]
            cands = []
            if a <= b:
                cands.append(Fraction(int(lo_vals[a, b]), lo_den))
            if a >= b:
                cands.append(Fraction(int(hi_vals[a, b]), hi_den))
            for w in cands:
                sup_gap = max(sup_gap, abs(w / V - prod))
    grid = pc.cdf_grid(k)
    cdf_gap = Fraction(0)
    for a in range(k + 1):
        row = [grid.value(a, b) for b in range(k + 1)]
        cdf_gap = max(cdf_gap, max(row) - min(row))
    meta = {"particles": P, "seconds": time.perf_counter() - start,
            "degrees": [pc.lo.degrees, pc.hi.degrees]}
    name = str(c) if isinstance(c, Composition) else "model"
    return GapReport(name, k, round_up(sup_gap), round_up(cdf_gap), sup_gap, cdf_gap, meta)


def nonincreasing(values: Sequence[float], tol: float = TIE_TOLERANCE) -> bool:
    return all(b <= a + tol for a, b in zip(values, values[1:]))


def decay_experiment(sizes: Sequence[int] = tuple(range(6, 21, 2)), k: int = 40) -> list[GapReport]:
    if not sizes:
        raise InvalidInput("empty size list")
    return [independence_gap(alternating_composition(n), k) for n in sizes]


def decay_check(sizes: Sequence[int] = tuple(range(6, 21, 2)), k: int = 40,
                b_pair: tuple[int, int] = (2, 10)) -> CheckReport:
    with _Timer() as tm:
        curve = decay_experiment(sizes, k)
        sup = [r.sup_gap for r in curve]
        cdf = [r.cdf_gap for r in curve]
        small, large = (independence_gap(lambda_b(b), k) for b in b_pair)
    ok_sup, ok_cdf = nonincreasing(sup), nonincreasing(cdf)
    ok_b = large.cdf_gap_exact < small.cdf_gap_exact
    return CheckReport("independence-decay", _verdict(ok_sup and ok_cdf and ok_b),
                       {"sup_gap": sup, "cdf_gap": cdf}, None,
                       {"sizes": list(sizes), "k": k, "sup_nonincreasing": ok_sup,
                        "cdf_nonincreasing": ok_cdf,
                        "lambda_b_cdf_gap": {b_pair[0]: small.cdf_gap, b_pair[1]: large.cdf_gap},
                        "tie_tolerance": TIE_TOLERANCE},
                       tm.seconds)


def large_run_bound_check(c: Composition, A: Fraction | None = None, k: int = 40) -> CheckReport:
    """``sup |F(t | X_F = x) - F(t)| <= K_A / (R - 2)`` with ``R`` the longest interior run."""
    rs = runs(c)
    interior = [r.length for r in rs[1:-1]]
    if not interior or max(interior) < 3:
        return CheckReport("large-run", SKIP, details={"reason": "no interior run of length >= 3",
                                                        "composition": str(c)})
    m = model_from_composition(c)
    A = normalized_sup(m.kernels[0]) if A is None else Fraction(A)
    R = max(interior)
    bound = 4 * A * A / (R - 2)
    with _Timer() as tm:
        pc = PinnedConditional(m, 0, m.n_particles - 1)
        F = marginal(m, 0).cdf.grid_values(k)
        grid = pc.cdf_grid(k)
        obs = max(abs(grid.value(a, b) - F[a]) for a in range(k + 1) for b in range(k + 1))
    return CheckReport("large-run", _verdict(obs <= bound), obs, bound,
                       {"composition": str(c), "R": R, "A": A}, tm.seconds)


def truncation_gap(c: Composition, n: int, k: int = 100) -> Fraction:
    """Sup over the grid of ``|F_{X_I}`` of ``c`` minus that of its first ``n`` cells``|``."""
    if not 1 <= n <= c.n:
        raise InvalidInput("truncation size outside 1..n")
    head = composition_from_descents(
        DescentSet(n, tuple(d for d in c.descent_set().members if d < n)))
    F = marginal(model_from_composition(c), 0).cdf.grid_values(k)
    G = marginal(model_from_composition(head), 0).cdf.grid_values(k)
    return max(abs(a - b) for a, b in zip(F, G))


def truncation_check(c: Composition, sizes: Sequence[int], k: int = 100) -> CheckReport:
    first = runs(c)[0].length if c.n > 1 else 1
    if any(n <= first for n in sizes):
        raise InvalidInput("truncation sizes must exceed the first run length")
    with _Timer() as tm:
        gaps = [truncation_gap(c, n, k) for n in sizes]
    trend = all(b <= a for a, b in zip(gaps, gaps[1:]))
    return CheckReport("truncation", _verdict(trend), [float(g) for g in gaps], None,
                       {"composition": str(c), "sizes": list(sizes)}, tm.seconds)


# -- Levy-Prokhorov experiments --------------------------------------------------------


@dataclass
class LPDistanceEstimate:
    """Upper bound ``delta * sqrt(r) + tau`` on the Levy-Prokhorov distance."""

    delta: float
    tv: float
    dimension: int = 2

    @property
    def bound(self) -> float:
        return self.delta * math.sqrt(self.dimension) + self.tv


def _bin(values: np.ndarray, delta: float) -> np.ndarray:
    bins = int(round(1 / delta))
    return np.clip(np.ceil(values * bins).astype(np.int64) - 1, 0, bins - 1)


def binned_tv(points_a: np.ndarray, points_b: np.ndarray, delta: float,
              weights_a=None, weights_b=None) -> float:
    """Total variation between two point clouds in ``[0,1]^r`` after binning."""
    bins = int(round(1 / delta))
    r = points_a.shape[1]

    def hist(points, weights):
        idx = np.zeros(len(points), dtype=np.int64)
        for col in range(r):
            idx = idx * bins + _bin(points[:, col], delta)
        h = np.bincount(idx, weights=weights, minlength=bins ** r).astype(float)
        return h / h.sum()

    return 0.5 * float(np.abs(hist(points_a, weights_a) - hist(points_b, weights_b)).sum())


def lp_distance_bound(points_a: np.ndarray, points_b: np.ndarray, delta: float) -> LPDistanceEstimate:
    points_a, points_b = np.atleast_2d(points_a), np.atleast_2d(points_b)
    return LPDistanceEstimate(delta, binned_tv(points_a, points_b, delta), points_a.shape[1])


def _joint_vs_product_tv(values: np.ndarray, delta: float, weights=None) -> float:
    # values: (samples, r) in (0,1]; compares the binned joint to its marginal product
    bins = int(round(1 / delta))
    r = values.shape[1]
    idx = [_bin(values[:, j], delta) for j in range(r)]
    flat = np.zeros(len(values), dtype=np.int64)
    for col in idx:
        flat = flat * bins + col
    w = np.ones(len(values)) if weights is None else np.asarray(weights, dtype=float)
    joint = np.bincount(flat, weights=w, minlength=bins ** r).reshape((bins,) * r)
    joint = joint / joint.sum()
    prod = np.ones((1,) * r)
    for j in range(r):
        axes = tuple(a for a in range(r) if a != j)
        marg = joint.sum(axis=axes)
        shape = [1] * r
        shape[j] = bins
        prod = prod * marg.reshape(shape)
    return 0.5 * float(np.abs(joint - prod).sum())


MAX_SAMPLED_DIMENSION = 3


def lp_independence_experiment(c: Composition, positions: Sequence[int], samples: int,
                               delta: float = 1 / 32, seed=0,
                               allow_high_dimension: bool = False) -> LPDistanceEstimate:
    """Sampled bound on ``d_pi`` between the joint law of ``sigma(i)/n`` and its marginal product."""
    positions = list(positions)
    if any(not 1 <= p <= c.n for p in positions):
        raise InvalidInput("positions must lie in 1..n")
    if len(positions) > MAX_SAMPLED_DIMENSION and not allow_high_dimension:
        raise ResourceLimit("more than three positions needs an explicit sample budget")
    vals = sample_values(c, positions, samples, seed) / c.n
    return LPDistanceEstimate(delta, _joint_vs_product_tv(vals, delta), len(positions))


def lp_exact_experiment(c: Composition, positions: Sequence[int], delta: float = 1 / 4) -> LPDistanceEstimate:
    """Same bound from the exhaustive class: no sampling noise."""
    positions = list(positions)
    if any(not 1 <= p <= c.n for p in positions):
        raise InvalidInput("positions must lie in 1..n")
    perms = np.array(brute_force_class(c))
    vals = perms[:, [p - 1 for p in positions]] / c.n
    return LPDistanceEstimate(delta, _joint_vs_product_tv(vals, delta), len(positions))


def exact_pair_tv(c: Composition, i: int, j: int) -> Fraction:
    """Exact TV between the law of ``(sigma(i), sigma(j))`` and its marginal product."""
    perms = brute_force_class(c)
    total = len(perms)
    joint: dict[tuple[int, int], int] = {}
    mi: dict[int, int] = {}
    mj: dict[int, int] = {}
    for p in perms:
        a, b = p[i - 1], p[j - 1]
        joint[(a, b)] = joint.get((a, b), 0) + 1
        mi[a] = mi.get(a, 0) + 1
        mj[b] = mj.get(b, 0) + 1
    tv = Fraction(0)
    for a in mi:
        for b in mj:
            tv += abs(Fraction(joint.get((a, b), 0), total) - Fraction(mi[a] * mj[b], total * total))
    return tv / 2


def _order_pair_cdf(n: int, r: int, s: int, x: Fraction, y: Fraction) -> Fraction:
    """``P(U_(r) <= x, U_(s) <= y)`` for order statistics of ``n`` uniforms."""
    if r > s:
        return _order_pair_cdf(n, s, r, y, x)
    if x >= y:
        return sum((math.comb(n, m) * y ** m * (1 - y) ** (n - m) for m in range(s, n + 1)),
                   Fraction(0))
    total = Fraction(0)
    for i in range(r, n + 1):
        for j in range(max(0, s - i), n - i + 1):
            coef = math.factorial(n) // (math.factorial(i) * math.factorial(j)
                                         * math.factorial(n - i - j))
            total += coef * x ** i * (y - x) ** j * (1 - y) ** (n - i - j)
    return total


def embedded_pair_cells(c: Composition, i: int, j: int, bins: int) -> list[list[Fraction]]:
    """Exact cell probabilities of ``(X_i, X_j)`` under the continuous embedding.

    Enumerates the class, so each permutation contributes the law of the
    order statistics of ranks ``(sigma(i), sigma(j))``.
    """
    if i == j:
        raise InvalidInput("positions must differ")
    n = c.n
    counts: dict[tuple[int, int], int] = {}
    for p in brute_force_class(c):
        key = (p[i - 1], p[j - 1])
        counts[key] = counts.get(key, 0) + 1
    total = sum(counts.values())
    edges = [Fraction(e, bins) for e in range(bins + 1)]
    cdf = [[Fraction(0)] * (bins + 1) for _ in range(bins + 1)]
    for (r, s), w in counts.items():
        for a in range(1, bins + 1):
            for b in range(1, bins + 1):
                cdf[a][b] += w * _order_pair_cdf(n, r, s, edges[a], edges[b])
    return [[(cdf[a + 1][b + 1] - cdf[a][b + 1] - cdf[a + 1][b] + cdf[a][b]) / total
             for b in range(bins)] for a in range(bins)]


def embedded_pair_tv(c: Composition, i: int, j: int, bins: int = 4) -> Fraction:
    """Exact binned TV between the embedded pair and the product of its marginals."""
    cells = embedded_pair_cells(c, i, j, bins)
    row = [sum(r) for r in cells]
    col = [sum(cells[a][b] for a in range(bins)) for b in range(bins)]
    return sum(abs(cells[a][b] - row[a] * col[b]) for a in range(bins) for b in range(bins)) / 2


def lp_gap_experiment(n: int = 60, gaps: Sequence[int] = (2, 5, 10, 20), samples: int = 10 ** 6,
                      seeds: Sequence[int] = tuple(range(16)), delta: float = 1 / 32,
                      start: int | None = None) -> dict[int, list[float]]:
    """Bounds per gap and seed for pairs of positions centred in an alternating permutation."""
    if not gaps:
        raise InvalidInput("empty gap list")
    c = alternating_composition(n)
    out: dict[int, list[float]] = {g: [] for g in gaps}
    for s in seeds:
        for g in gaps:
            i = start if start is not None else max(1, (n - g) // 2)
            if i + g > n:
                raise InvalidInput(f"gap {g} does not fit in size {n}")
            est = lp_independence_experiment(c, (i, i + g), samples, delta, seed=(s, g))
            out[g].append(est.bound)
    return out


def lp_decorrelation_check(n: int = 60, samples: int = 10 ** 6, seeds: int = 16,
                           delta: float = 1 / 32, exact_n: int = 8, exact_bins: int = 8) -> CheckReport:
    """Sampled gap-2 versus gap-20 comparison plus an exhaustive small-size curve.

    The exhaustive curve uses the continuous embedding of the class (exact
    cell probabilities at resolution ``1/exact_bins``).  The TV of the raw
    rank pair ``(sigma(i), sigma(j))`` is reported too; at this size it is
    dominated by the exclusion ``sigma(i) != sigma(j)`` and is not monotone.
    """
    with _Timer() as tm:
        res = lp_gap_experiment(n, (2, 20), samples, tuple(range(seeds)), delta)
        wins = sum(1 for a, b in zip(res[2], res[20]) if b < a)
        c = alternating_composition(exact_n)
        gaps = range(1, exact_n)
        tvs = {g: embedded_pair_tv(c, 1, 1 + g, exact_bins) for g in gaps}
        raw = {g: float(exact_pair_tv(c, 1, 1 + g)) for g in gaps}
    curve = [tvs[g] for g in gaps]
    exact_trend = all(b < a for a, b in zip(curve, curve[1:]))
    ok = wins > seeds // 2 and exact_trend
    return CheckReport("lp-decorrelation", _verdict(ok), wins, seeds // 2 + 1,
                       {"gap2": res[2], "gap20": res[20],
                        "exact_embedded_tv": {g: float(v) for g, v in tvs.items()},
                        "exact_rank_tv": raw, "exact_trend": exact_trend}, tm.seconds)


# -- sampler checks --------------------------------------------------------------------


def uniformity_candidates(n_max: int = 8, beta_max: int = 500) -> list[Composition]:
    """Compositions with ``2 <= beta <= beta_max`` and ``n <= n_max``."""
    return [c for n in range(2, n_max + 1) for c in all_compositions(n)
            if 2 <= count_class(c) <= beta_max]


def chi_square_uniform(c: Composition, samples: int, seed) -> tuple[float, float]:
    """Chi-square statistic and p-value of sampled permutations against uniformity."""
    from scipy.stats import chi2

    cls = brute_force_class(c)
    index = {p: i for i, p in enumerate(cls)}
    perms = sample_permutations(c, samples, seed)
    # encode rows as integers to count them quickly
    n = c.n
    weights = (n ** np.arange(n - 1, -1, -1)).astype(np.int64)
    codes = perms.astype(np.int64) @ weights
    lookup = {int(np.dot(np.array(p, dtype=np.int64), weights)): i for p, i in index.items()}
    uniq, cnt = np.unique(codes, return_counts=True)
    observed = np.zeros(len(cls))
    for u, k in zip(uniq.tolist(), cnt.tolist()):
        if u not in lookup:
            raise AssertionError("sampler produced a permutation outside the class")
        observed[lookup[u]] = k
    expected = samples / len(cls)
    stat = float(((observed - expected) ** 2 / expected).sum())
    return stat, float(chi2.sf(stat, len(cls) - 1))


def uniformity_check(count: int = 20, seeds: int = 16, level: float = 1e-3,
                     factor: int = 200, selection_seed: int = 2024) -> CheckReport:
    """Chi-square test of the sampler on ``count`` random small classes, per seed."""
    with _Timer() as tm:
        pool = uniformity_candidates()
        rng = make_rng(selection_seed)
        chosen = [pool[i] for i in rng.choice(len(pool), size=count, replace=False)]
        per_seed = []
        for s in range(seeds):
            pvals = [chi_square_uniform(c, factor * count_class(c), (s, idx))[1]
                     for idx, c in enumerate(chosen)]
            per_seed.append(min(pvals))
        passing = sum(1 for p in per_seed if p > level)
    return CheckReport("uniformity", _verdict(passing >= seeds - 1), passing, seeds - 1,
                       {"compositions": [str(c) for c in chosen], "min_p_per_seed": per_seed,
                        "level": level}, tm.seconds)


FIG1_COMPOSITION = Composition((3, 2, 4, 1))


def beta_embedding_check(c: Composition = FIG1_COMPOSITION, samples: int = 10 ** 5,
                         seed=0) -> CheckReport:
    """Mean of the first embedded coordinate given ``sigma(1) = k`` against ``k / (n+1)``.

    Standard errors use the exact Beta variance ``k (n+1-k) / ((n+1)^2 (n+2))``.
    """
    n = c.n
    rng = make_rng(seed)
    with _Timer() as tm:
        perms = sample_permutations(c, samples, rng)
        x = embed_batch(perms, rng)[:, 0]
        first = perms[:, 0]
        rows = {}
        ok = True
        for k in range(1, n + 1):
            sel = first == k
            m = int(sel.sum())
            if m == 0:
                continue
            mean = float(x[sel].mean())
            se = math.sqrt(k * (n + 1 - k) / ((n + 1) ** 2 * (n + 2)) / m)
            z = (mean - k / (n + 1)) / se
            rows[k] = {"count": m, "mean": mean, "expected": k / (n + 1), "z": z}
            ok = ok and abs(z) <= 3
    worst = max(abs(r["z"]) for r in rows.values())
    return CheckReport("beta-embedding", _verdict(ok), worst, 3,
                       {"composition": str(c), "by_k": rows}, tm.seconds)


# -- positivity spot check ------------------------------------------------------------


def positivity_spot_check(n: int = 41, window: int = 3, eta: float = 0.1,
                          samples: int = 200_000, seed=0, alpha: float = 1e-3) -> CheckReport:
    """``P(min over 2 N0 + 1 central particles < eta) >= 1 - (1 - eta)^(2 N0 + 1)``.

    Uses the alternating class, where every cell is a particle, sampled
    exactly and embedded in ``[0,1]^n``.  The slack is a Hoeffding term.
    """
    width = 2 * window + 1
    if width > n:
        raise InvalidInput("window wider than the model")
    c = alternating_composition(n)
    first = (n - width) // 2 + 1
    positions = list(range(first, first + width))
    rng = make_rng(seed)
    vals = sample_values(c, positions, samples, rng)
    # the smallest coordinate of the window is the order statistic of rank
    # min sigma(i) among n uniforms, which is Beta(rank, n + 1 - rank)
    low = vals.min(axis=1)
    mins = rng.beta(low, n + 1 - low)
    p_hat = float(np.mean(mins < eta))
    target = 1 - (1 - eta) ** width
    slack = math.sqrt(math.log(1 / alpha) / (2 * samples))
    return CheckReport("positivity", _verdict(p_hat >= target - slack), p_hat, target - slack,
                       {"n": n, "window": window, "eta": eta, "samples": samples}, 0.0)


def summarize(reports: Sequence[CheckReport]) -> bool:
    return all(r.passed for r in reports)
