"""Exact counting and uniform sampling of descent classes, plus a Gibbs sampler.

Counting uses the rank-propagation table ``a(i, j)``: the number of ways to
fill cells ``1..i`` so that cell ``i`` has relative rank ``j`` among them.
An ascent ``i -> i+1`` gives ``a(i+1, j) = sum_{j' < j} a(i, j')`` and a
descent gives ``a(i+1, j) = sum_{j' >= j} a(i, j')``.

Sampling runs the table backwards: pick the relative rank of the last cell,
then of each earlier cell, with probabilities proportional to the counts.
Relative ranks determine the permutation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .combinatorics import Composition
from .errors import InvalidInput, InvalidModel
from .sawtooth import SawtoothModel

INT64_EXACT_LIMIT = 1 << 62


# -- random streams ------------------------------------------------------------


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator for a seed (int, SeedSequence or Generator)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_rngs(seed, count: int) -> list[np.random.Generator]:
    """Independent child streams, one per task."""
    ss = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.Philox(child)) for child in ss.spawn(count)]


def randbelow(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in ``[0, bound)`` for arbitrarily large ``bound``."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    if bound < (1 << 63):
        return int(rng.integers(0, bound))
    bits = bound.bit_length()
    words = (bits + 63) // 64
    excess = words * 64 - bits
    while True:
        chunks = rng.integers(0, 1 << 63, size=words, dtype=np.int64, endpoint=False)
        top = rng.integers(0, 2, size=words, dtype=np.int64)
        value = 0
        for c, t in zip(chunks.tolist(), top.tolist()):
            value = (value << 64) | (int(t) << 63) | int(c)
        value >>= excess
        if value < bound:
            return value


# -- counting ------------------------------------------------------------------


@dataclass(frozen=True)
class CountTable:
    """``rows[i-1][j-1] = a(i, j)`` for cells ``i = 1..n`` and ranks ``j = 1..i``."""

    composition: Composition
    rows: tuple[tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return self.composition.n

    @property
    def total(self) -> int:
        return sum(self.rows[-1])

    def entry(self, i: int, j: int) -> int:
        return self.rows[i - 1][j - 1]


@lru_cache(maxsize=256)
def build_count_table(c: Composition) -> CountTable:
    steps = c.steps()
    rows = [(1,)]
    for i, s in enumerate(steps, start=1):
        prev = rows[-1]
        nxt = [0] * (i + 1)
        if s == "A":
            acc = 0
            for j in range(1, i + 2):
                nxt[j - 1] = acc
                if j <= i:
                    acc += prev[j - 1]
        else:
            acc = 0
            for j in range(i, 0, -1):
                acc += prev[j - 1]
                nxt[j - 1] = acc
            nxt[i] = 0
        rows.append(tuple(nxt))
    return CountTable(c, tuple(rows))


def count_class(c: Composition) -> int:
    """``beta(D)``: the number of permutations with descent set ``D(c)``."""
    return build_count_table(c).total


# -- exact sampling ------------------------------------------------------------


def _admissible(step: str, j: int, i: int) -> range:
    # ranks j' of cell i (among 1..i) compatible with rank j of cell i+1
    return range(1, j) if step == "A" else range(j, i + 1)


def unrank_ranks(table: CountTable, index: int) -> list[int]:
    """Relative ranks ``r_1..r_n`` of the ``index``-th filling (0-based)."""
    n = table.n
    if not 0 <= index < table.total:
        raise InvalidInput("index out of range")
    steps = table.composition.steps()
    ranks = [0] * n
    u = index
    last = table.rows[-1]
    for j in range(1, n + 1):
        if u < last[j - 1]:
            ranks[n - 1] = j
            break
        u -= last[j - 1]
    for i in range(n - 1, 0, -1):
        row = table.rows[i - 1]
        for j in _admissible(steps[i - 1], ranks[i], i):
            if u < row[j - 1]:
                ranks[i - 1] = j
                break
            u -= row[j - 1]
    return ranks


def permutation_from_ranks(ranks: Sequence[int]) -> tuple[int, ...]:
    """Rebuild a permutation from the relative rank of each cell among its prefix."""
    n = len(ranks)
    available = list(range(1, n + 1))
    out = [0] * n
    for i in range(n - 1, -1, -1):
        out[i] = available.pop(ranks[i] - 1)
    return tuple(out)


def ranks_from_permutation(p: Sequence[int]) -> list[int]:
    return [sum(1 for q in p[: i + 1] if q <= p[i]) for i in range(len(p))]


def sample_permutation(c: Composition, seed=None) -> tuple[int, ...]:
    """One exactly uniform permutation with descent set ``D(c)``."""
    table = build_count_table(c)
    rng = make_rng(seed)
    return permutation_from_ranks(unrank_ranks(table, randbelow(rng, table.total)))


@lru_cache(maxsize=64)
def _int_tables(c: Composition):
    # cumulative admissible counts as int64 matrices; row j = rank of the next cell
    table = build_count_table(c)
    steps = c.steps()
    n = c.n
    out = []
    for i in range(1, n):
        row = table.rows[i - 1]
        mat = np.full((i + 2, i + 1), np.iinfo(np.int64).max, dtype=np.int64)
        for j in range(1, i + 2):
            acc = 0
            for jj in _admissible(steps[i - 1], j, i):
                acc += row[jj - 1]
                mat[j, jj - 1] = acc
            # ranks outside the admissible set sit below or above it
            lo = _admissible(steps[i - 1], j, i)
            if len(lo):
                mat[j, : lo.start - 1] = 0
        out.append(mat)
    last = np.cumsum(np.array(table.rows[-1], dtype=np.int64))
    return last, out


@lru_cache(maxsize=64)
def _float_tables(c: Composition):
    # conditional CDFs rounded from exact fractions, flattened with row offsets
    table = build_count_table(c)
    steps = c.steps()
    n = c.n
    out = []
    for i in range(1, n):
        row = table.rows[i - 1]
        width = i
        flat = np.empty((i + 2) * width)
        for j in range(i + 2):
            adm = _admissible(steps[i - 1], j, i) if j >= 1 else range(0)
            total = sum(row[jj - 1] for jj in adm)
            acc = 0
            vals = []
            for jj in range(1, i + 1):
                if total and jj in adm:
                    acc += row[jj - 1]
                    vals.append(float(Fraction(acc, total)))
                elif total and jj > adm.stop - 1:
                    vals.append(1.0)
                else:
                    vals.append(0.0)
            flat[j * width:(j + 1) * width] = np.array(vals) + 2.0 * j
        out.append(flat)
    last = np.array([float(Fraction(s, table.total))
                     for s in np.cumsum(np.array(table.rows[-1], dtype=object))])
    return last, out


def sample_ranks(c: Composition, size: int, rng: np.random.Generator) -> np.ndarray:
    """Relative ranks of ``size`` independent uniform fillings, shape ``(n, size)``.

    Exact when ``beta < 2^62`` (integer unranking); otherwise the conditional
    probabilities are exact fractions rounded to doubles.
    """
    n = c.n
    beta = count_class(c)
    ranks = np.zeros((n, size), dtype=np.int16)
    if n == 1:
        ranks[0] = 1
        return ranks
    if beta < INT64_EXACT_LIMIT:
        last, mats = _int_tables(c)
        u = rng.integers(0, beta, size=size, dtype=np.int64)
        j = np.searchsorted(last, u, side="right")
        u = u - np.where(j > 0, last[np.maximum(j - 1, 0)], 0)
        ranks[n - 1] = j + 1
        for i in range(n - 1, 0, -1):
            mat = mats[i - 1]
            cum = mat[ranks[i]]
            jj = np.count_nonzero(cum <= u[:, None], axis=1)
            prev = np.where(jj > 0, cum[np.arange(size), np.maximum(jj - 1, 0)], 0)
            u = u - prev
            ranks[i - 1] = jj + 1
        return ranks
    last, flats = _float_tables(c)
    u = rng.random(size)
    ranks[n - 1] = np.searchsorted(last, u, side="right") + 1
    np.minimum(ranks[n - 1], n, out=ranks[n - 1])
    for i in range(n - 1, 0, -1):
        flat = flats[i - 1]
        key = rng.random(size) + 2.0 * ranks[i]
        pos = np.searchsorted(flat, key, side="right")
        r = pos - ranks[i].astype(np.int64) * i + 1
        ranks[i - 1] = np.clip(r, 1, i)
    return ranks


def values_at(ranks: np.ndarray, positions: Sequence[int]) -> np.ndarray:
    """Permutation values ``sigma(pos)`` (1-based positions) from relative ranks."""
    n = ranks.shape[0]
    out = np.empty((len(positions), ranks.shape[1]), dtype=np.int32)
    for idx, pos in enumerate(positions):
        if not 1 <= pos <= n:
            raise InvalidInput(f"position {pos} outside 1..{n}")
        cur = ranks[pos - 1].astype(np.int32)
        for k in range(pos, n):
            cur = cur + (ranks[k] <= cur)
        out[idx] = cur
    return out


def sample_permutations(c: Composition, size: int, seed=None) -> np.ndarray:
    """``size`` uniform permutations as rows of an ``(size, n)`` array."""
    rng = make_rng(seed)
    ranks = sample_ranks(c, size, rng)
    return values_at(ranks, range(1, c.n + 1)).T.copy()


def sample_values(c: Composition, positions: Sequence[int], size: int, seed=None,
                  chunk: int = 200_000) -> np.ndarray:
    """``sigma(i)`` for the given positions over ``size`` uniform samples, chunked."""
    rng = make_rng(seed)
    parts = []
    left = size
    while left > 0:
        m = min(chunk, left)
        parts.append(values_at(sample_ranks(c, m, rng), positions))
        left -= m
    return np.concatenate(parts, axis=1).T


# -- continuous embedding -------------------------------------------------------


def embed_continuous(p: Sequence[int], seed=None) -> np.ndarray:
    """Positions in ``[0,1]^n``: cell ``j`` gets the ``p(j)``-th smallest of ``n`` uniforms."""
    p = np.asarray(p)
    n = len(p)
    if sorted(p.tolist()) != list(range(1, n + 1)):
        raise InvalidInput("not a permutation of 1..n")
    rng = make_rng(seed)
    u = np.sort(rng.random(n))
    return u[p - 1]


def embed_batch(perms: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`embed_continuous` for an ``(m, n)`` array of permutations."""
    u = np.sort(rng.random(perms.shape), axis=1)
    return np.take_along_axis(u, perms - 1, axis=1)


def standardize(x: Sequence[float]) -> tuple[int, ...]:
    """Inverse of the embedding: the permutation recording the order of ``x``."""
    order = np.argsort(np.asarray(x), kind="stable")
    out = np.empty(len(order), dtype=int)
    out[order] = np.arange(1, len(order) + 1)
    return tuple(int(v) for v in out)


# -- Gibbs sampler ---------------------------------------------------------------


@dataclass(frozen=True)
class GeneralModel:
    """A sawtooth chain with black-box vectorized kernels.

    Kernels map arrays of heights in ``[0, 1]`` to nonnegative weights and
    should be nondecreasing.
    """

    kernels: tuple[Callable[[np.ndarray], np.ndarray], ...]
    first_upper: bool = False

    @property
    def n_particles(self) -> int:
        return len(self.kernels) + 1

    def is_upper(self, i: int) -> bool:
        return (i % 2 == 0) == self.first_upper

    @classmethod
    def from_sawtooth(cls, m: SawtoothModel) -> "GeneralModel":
        def make(k):
            coeffs = np.array([float(c) for c in reversed(k.coeffs)] or [0.0])
            return lambda t: np.polyval(coeffs, t)
        return cls(tuple(make(k) for k in m.kernels), m.first_upper)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _panel_integrals(f, rows: np.ndarray, a: np.ndarray, b: np.ndarray,
                     panels: int) -> tuple[np.ndarray, np.ndarray]:
    # composite 8-point Gauss-Legendre on [a, b] split into equal panels
    h = (b - a) / panels
    left = a[:, None] + h[:, None] * np.arange(panels)[None, :]
    x = left[:, :, None] + (h[:, None, None] / 2) * (_GL_NODES + 1)[None, None, :]
    fx = f(x, rows)
    if np.any(fx < 0):
        raise InvalidModel("density returned a negative value")
    return (fx * _GL_WEIGHTS).sum(axis=2) * (h[:, None] / 2), left


def _partial(f, rows: np.ndarray, a: np.ndarray, x: np.ndarray) -> np.ndarray:
    h = x - a
    pts = a[:, None] + (h[:, None] / 2) * (_GL_NODES + 1)[None, :]
    return (f(pts, rows) * _GL_WEIGHTS).sum(axis=1) * (h / 2)


def _inverse_cdf(f, a: np.ndarray, b: np.ndarray, u: np.ndarray, tol: float,
                 max_panels: int = 1024) -> np.ndarray:
    """Vectorized inverse CDF of densities restricted to ``[a_c, b_c]``.

    ``f(x, rows)`` evaluates the density of each row in ``rows`` at the
    points of the matching row of ``x`` (any trailing shape).
    """
    out = a.copy()
    rows = np.flatnonzero(b > a)
    if rows.size == 0:
        return out
    a, b, uu = a[rows], b[rows], u[rows]
    panels = 2
    ints, left = _panel_integrals(f, rows, a, b, panels)
    while panels < max_panels:
        fine, fleft = _panel_integrals(f, rows, a, b, panels * 2)
        fine_total = fine.sum(axis=1)
        err = np.abs(fine.reshape(len(a), panels, 2).sum(axis=2) - ints).sum(axis=1)
        ints, left, panels = fine, fleft, panels * 2
        if np.all(err <= tol * np.maximum(fine_total, 1e-300)):
            break
    total = ints.sum(axis=1)
    x = np.empty_like(a)
    flat = total <= 0
    # a density vanishing on the whole interval: fall back to uniform
    x[flat] = a[flat] + uu[flat] * (b[flat] - a[flat])
    ok = np.flatnonzero(~flat)
    if ok.size:
        sub = rows[ok]
        cum = np.cumsum(ints[ok], axis=1)
        target = uu[ok] * total[ok]
        idx = np.minimum((cum < target[:, None]).sum(axis=1), panels - 1)
        pick = np.arange(len(idx))
        before = np.where(idx > 0, cum[pick, np.maximum(idx - 1, 0)], 0.0)
        resid = np.clip(target - before, 0.0, ints[ok][pick, idx])
        h = (b[ok] - a[ok]) / panels
        lo = left[ok][pick, idx]
        lo_b, hi_b = lo.copy(), lo + h
        xs = lo + h / 2
        scale = tol * total[ok]
        for _ in range(200):
            g = _partial(f, sub, lo, xs) - resid
            done = (np.abs(g) <= scale) | (hi_b - lo_b <= 1e-15)
            if np.all(done):
                break
            lo_b = np.where(g < 0, xs, lo_b)
            hi_b = np.where(g > 0, xs, hi_b)
            d = f(xs[:, None], sub)[:, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                step = xs - g / d
            bad = ~np.isfinite(step) | (step <= lo_b) | (step >= hi_b)
            xs = np.where(done, xs, np.where(bad, (lo_b + hi_b) / 2, step))
        x[ok] = xs
    out[rows] = x
    return out


def _site_density(m: GeneralModel, z: np.ndarray, i: int):
    nb = [j for j in (i - 1, i + 1) if 0 <= j < z.shape[1]]

    def dens(x, rows):
        out = np.ones_like(x)
        shape = (-1,) + (1,) * (x.ndim - 1)
        for j in nb:
            col = z[rows, j].reshape(shape)
            out = out * m.kernels[min(i, j)](np.abs(x - col))
        return out

    return nb, dens


def gibbs_sample(m, sweeps: int, seed=None, chains: int = 1, tol: float = 1e-10,
                 init: np.ndarray | None = None, trace_site: int | None = None):
    """Single-site Gibbs sampler run on ``chains`` independent chains.

    Each site update draws from the conditional law of that particle given
    its neighbours by numerical inversion of its CDF (accurate to ``tol`` on
    the CDF scale).  Returns the final positions, shape ``(chains, P)``; with
    ``trace_site`` also the per-sweep trace of that particle, shape
    ``(sweeps, chains)``.
    """
    if isinstance(m, SawtoothModel):
        m = GeneralModel.from_sawtooth(m)
    if sweeps < 0 or chains < 1:
        raise InvalidInput("sweeps must be >= 0 and chains >= 1")
    rng = make_rng(seed)
    P = m.n_particles
    upper = np.array([m.is_upper(i) for i in range(P)])
    if init is None:
        z = np.where(upper[None, :], 0.5 + 0.5 * rng.random((chains, P)),
                     0.5 * rng.random((chains, P)))
    else:
        z = np.array(init, dtype=float).reshape(chains, P)
    trace = np.empty((sweeps, chains)) if trace_site is not None else None
    for s in range(sweeps):
        for i in range(P):
            nb, dens = _site_density(m, z, i)
            if upper[i]:
                a = np.max(z[:, nb], axis=1) if nb else np.zeros(chains)
                b = np.ones(chains)
            else:
                a = np.zeros(chains)
                b = np.min(z[:, nb], axis=1) if nb else np.ones(chains)
            z[:, i] = _inverse_cdf(dens, a, b, rng.random(chains), tol)
        if trace is not None:
            trace[s] = z[:, trace_site]
    return (z, trace) if trace is not None else z


# -- dominance ---------------------------------------------------------------------


class Verdict(str, enum.Enum):
    DOMINATES = "DOMINATES"
    INCOMPARABLE = "INCOMPARABLE"


def dkw_epsilon(samples: int, alpha: float = 1e-3) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz band at level ``alpha``."""
    if samples <= 0:
        return 0.0
    return math.sqrt(math.log(2 / alpha) / (2 * samples))


def dominance_check(cdf_a, cdf_b, grid_a=None, grid_b=None, samples_a: int | None = None,
                    samples_b: int | None = None, alpha: float = 1e-3) -> Verdict:
    """``DOMINATES`` when ``cdf_b <= cdf_a`` pointwise, up to DKW slack for empirical CDFs.

    Exact inputs (no sample counts) are compared with zero slack, so exact
    rationals give an exact verdict.
    """
    a, b = list(cdf_a), list(cdf_b)
    if len(a) != len(b):
        raise InvalidInput("CDFs are given on grids of different sizes")
    if grid_a is not None or grid_b is not None:
        if grid_a is None or grid_b is None or list(grid_a) != list(grid_b):
            raise InvalidInput("CDFs are given on different grids")
        if len(list(grid_a)) != len(a):
            raise InvalidInput("grid and CDF lengths differ")
    slack = 0.0
    if samples_a:
        slack += dkw_epsilon(samples_a, alpha)
    if samples_b:
        slack += dkw_epsilon(samples_b, alpha)
    for x, y in zip(a, b):
        if slack == 0:
            if y > x:
                return Verdict.INCOMPARABLE
        elif float(y) > float(x) + slack:
            return Verdict.INCOMPARABLE
    return Verdict.DOMINATES


def empirical_cdf(samples: np.ndarray, grid: Sequence[float]) -> np.ndarray:
    s = np.sort(np.asarray(samples, dtype=float))
    return np.searchsorted(s, np.asarray(grid, dtype=float), side="right") / len(s)


@dataclass
class EmpiricalJoint:
    """Counts of sample pairs on a ``k x k`` grid of equal bins."""

    k: int
    counts: np.ndarray
    total: int

    @classmethod
    def from_samples(cls, x: np.ndarray, y: np.ndarray, k: int) -> "EmpiricalJoint":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ix = np.clip((x * k).astype(np.int64), 0, k - 1)
        iy = np.clip((y * k).astype(np.int64), 0, k - 1)
        counts = np.bincount(ix * k + iy, minlength=k * k).reshape(k, k)
        return cls(k, counts, int(counts.sum()))

    def probabilities(self) -> np.ndarray:
        return self.counts / self.total

    def product_of_marginals(self) -> np.ndarray:
        p = self.probabilities()
        return np.outer(p.sum(axis=1), p.sum(axis=0))

    def tv_to_product(self) -> float:
        return 0.5 * float(np.abs(self.probabilities() - self.product_of_marginals()).sum())
