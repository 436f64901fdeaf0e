"""Exact polynomial arithmetic over the rationals.

Everything here is exact: coefficients are :class:`fractions.Fraction` and no
operation ever rounds.  Three carriers are provided:

* :class:`RationalPoly` -- dense univariate polynomial, index = degree.
* :class:`BivariatePoly` -- dense polynomial in ``(x, y)``.
* :class:`PiecewisePoly` -- univariate polynomial pieces on a rational
  partition of ``[0, 1]``.

The transfer operators push a weight through one interaction kernel of a
sawtooth chain::

    transfer_up(d, k)(y)   = int_0^y d(x) k(y - x) dx
    transfer_down(d, k)(t) = int_t^1 d(y) k(y - t) dy

The ``pinned_*`` functions do the same for a weight that also depends on a
symbolic pinned coordinate ``v``; such weights are split along the diagonal
into a piece valid for ``t <= v`` and one valid for ``t >= v``.
"""

from __future__ import annotations

import json
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, lcm
from typing import Iterable, Sequence, Union

import numpy as np

Rational = Union[int, Fraction]

ZERO = Fraction(0)
ONE = Fraction(1)


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions and ``"num/den"`` strings to a Fraction.

    Floats are rejected: they would smuggle rounding into exact code.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a rational number")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if hasattr(value, "numerator") and hasattr(value, "denominator") and not isinstance(value, float):
        return Fraction(int(value.numerator), int(value.denominator))
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


def _lcm_denominators(values: Iterable[Fraction]) -> int:
    out = 1
    for v in values:
        out = lcm(out, v.denominator)
    return out


@lru_cache(maxsize=None)
def _beta(i: int, a: int) -> Fraction:
    # int_0^1 x^i (1-x)^a dx
    return Fraction(factorial(i) * factorial(a), factorial(i + a + 1))


class RationalPoly:
    """Dense univariate polynomial with exact rational coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        cs = [as_fraction(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs: tuple[Fraction, ...] = tuple(cs)

    @classmethod
    def _raw(cls, coeffs: list) -> "RationalPoly":
        # trusted constructor: coefficients are already Fractions
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        obj = cls.__new__(cls)
        obj.coeffs = tuple(coeffs)
        return obj

    @classmethod
    def constant(cls, c: Rational) -> "RationalPoly":
        return cls([c])

    @classmethod
    def monomial(cls, degree: int, c: Rational = 1) -> "RationalPoly":
        return cls([0] * degree + [c])

    @classmethod
    def identity(cls) -> "RationalPoly":
        return cls([0, 1])

    @property
    def degree(self) -> int:
        """Degree; the zero polynomial has degree -1."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __eq__(self, other) -> bool:
        if isinstance(other, RationalPoly):
            return self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction)):
            return self.coeffs == RationalPoly([other]).coeffs
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        return f"RationalPoly({[str(c) for c in self.coeffs]})"

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            mono = "" if i == 0 else ("t" if i == 1 else f"t^{i}")
            if mono and c == 1:
                terms.append(mono)
            elif mono:
                terms.append(f"({c})*{mono}")
            else:
                terms.append(f"({c})")
        return " + ".join(terms)

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other) -> "RationalPoly":
        if isinstance(other, RationalPoly):
            return other
        return RationalPoly([other])

    def __add__(self, other) -> "RationalPoly":
        o = self._coerce(other).coeffs
        s = self.coeffs
        if len(s) < len(o):
            s, o = o, s
        out = list(s)
        for i, c in enumerate(o):
            out[i] += c
        return RationalPoly._raw(out)

    __radd__ = __add__

    def __neg__(self) -> "RationalPoly":
        return RationalPoly._raw([-c for c in self.coeffs])

    def __sub__(self, other) -> "RationalPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "RationalPoly":
        return self._coerce(other) - self

    def __mul__(self, other) -> "RationalPoly":
        if not isinstance(other, RationalPoly):
            c = as_fraction(other)
            return RationalPoly._raw([c * a for a in self.coeffs])
        a, b = self.coeffs, other.coeffs
        if not a or not b:
            return RationalPoly()
        out = [ZERO] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x == 0:
                continue
            for j, y in enumerate(b):
                out[i + j] += x * y
        return RationalPoly._raw(out)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "RationalPoly":
        c = as_fraction(scalar)
        if c == 0:
            raise ZeroDivisionError("polynomial division by zero scalar")
        return RationalPoly._raw([a / c for a in self.coeffs])

    def __pow__(self, k: int) -> "RationalPoly":
        out = RationalPoly([1])
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- calculus / evaluation --------------------------------------------

    def __call__(self, t) -> Fraction:
        t = as_fraction(t)
        acc = ZERO
        for c in reversed(self.coeffs):
            acc = acc * t + c
        return acc

    def derivative(self) -> "RationalPoly":
        return RationalPoly._raw([i * c for i, c in enumerate(self.coeffs)][1:])

    def primitive(self) -> "RationalPoly":
        """Antiderivative vanishing at 0."""
        return RationalPoly._raw([ZERO] + [c / (i + 1) for i, c in enumerate(self.coeffs)])

    def integral(self, a: Rational = 0, b: Rational = 1) -> Fraction:
        p = self.primitive()
        return p(b) - p(a)

    def compose_affine(self, a: Rational, b: Rational) -> "RationalPoly":
        """Return ``t -> p(a + b t)``."""
        a, b = as_fraction(a), as_fraction(b)
        out = [ZERO] * len(self.coeffs)
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            # (a + b t)^i
            for j in range(i + 1):
                out[j] += c * comb(i, j) * a ** (i - j) * b ** j
        return RationalPoly._raw(out)

    def reflect(self) -> "RationalPoly":
        """Return ``t -> p(1 - t)``."""
        return self.compose_affine(1, -1)

    def scaled_grid(self, k: int) -> tuple[list[int], int]:
        """Exact values at ``j/k`` (j = 0..k) as integers over one denominator.

        Returns ``(nums, den)`` with ``p(j/k) == Fraction(nums[j], den)`` and
        ``den > 0``.  Pure integer Horner; far cheaper than Fraction arithmetic.
        """
        if not self.coeffs:
            return [0] * (k + 1), 1
        lden = _lcm_denominators(self.coeffs)
        ints = [int(c * lden) for c in self.coeffs]
        d = len(ints) - 1
        kp = [k ** e for e in range(d + 1)]
        nums = []
        for j in range(k + 1):
            acc = ints[d]
            for i in range(d - 1, -1, -1):
                acc = acc * j + ints[i] * kp[d - i]
            nums.append(acc)
        return nums, lden * kp[d]

    def grid_values(self, k: int) -> list[Fraction]:
        nums, den = self.scaled_grid(k)
        return [Fraction(v, den) for v in nums]

    def to_json(self) -> str:
        return json.dumps([f"{c.numerator}/{c.denominator}" for c in self.coeffs])

    @classmethod
    def from_json(cls, text: str) -> "RationalPoly":
        return cls(json.loads(text))


def poly_arith(a: RationalPoly, b: RationalPoly, op: str) -> RationalPoly:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def integrate_prefix(p: RationalPoly) -> RationalPoly:
    return p.primitive()


def transfer_up(d: RationalPoly, kernel: RationalPoly) -> RationalPoly:
    """``y -> int_0^y d(x) kernel(y - x) dx`` (exact, degree deg d + deg k + 1)."""
    if not d.coeffs or not kernel.coeffs:
        return RationalPoly()
    out = [ZERO] * (len(d.coeffs) + len(kernel.coeffs))
    for i, di in enumerate(d.coeffs):
        if di == 0:
            continue
        for a, ka in enumerate(kernel.coeffs):
            if ka:
                out[i + a + 1] += di * ka * _beta(i, a)
    return RationalPoly._raw(out)


def transfer_down(d: RationalPoly, kernel: RationalPoly) -> RationalPoly:
    """``t -> int_t^1 d(y) kernel(y - t) dy``; mirror image of :func:`transfer_up`."""
    return transfer_up(d.reflect(), kernel).reflect()


def eval_exact(p, point) -> Fraction:
    """Exact evaluation of a uni- or bivariate polynomial."""
    if isinstance(p, BivariatePoly):
        x, y = point
        return p(x, y)
    return p(point)


def _kernel_integral_const(p: RationalPoly, kernel: RationalPoly, a: Fraction, b: Fraction,
                           up: bool) -> RationalPoly:
    """Integral over ``x in [a, b]`` of ``p(x) k(y - x)`` (up) or ``p(x) k(x - y)`` (down),
    as a polynomial in ``y``."""
    if a == b or not p.coeffs or not kernel.coeffs:
        return RationalPoly()
    top = len(p.coeffs) + len(kernel.coeffs)
    apow = [ONE]
    bpow = [ONE]
    for _ in range(top + 1):
        apow.append(apow[-1] * a)
        bpow.append(bpow[-1] * b)

    def moment(beta: int) -> Fraction:
        # int_a^b p(x) x^beta dx
        s = ZERO
        for i, c in enumerate(p.coeffs):
            e = i + beta + 1
            s += c * (bpow[e] - apow[e]) / e
        return s

    moments = [moment(m) for m in range(len(kernel.coeffs))]
    out = [ZERO] * len(kernel.coeffs)
    for alpha, ka in enumerate(kernel.coeffs):
        if ka == 0:
            continue
        for beta in range(alpha + 1):
            sign = -1 if beta % 2 else 1
            if up:
                # k(y - x): y^(alpha-beta) (-x)^beta
                out[alpha - beta] += ka * comb(alpha, beta) * sign * moments[beta]
            else:
                # k(x - y): x^(alpha-beta) (-y)^beta
                out[beta] += ka * comb(alpha, beta) * sign * moments[alpha - beta]
    return RationalPoly._raw(out)


class PiecewisePoly:
    """Polynomial pieces on a rational partition ``0 = c_0 < ... < c_K = 1``.

    Point evaluation uses the right-continuous convention (the piece starting
    at a breakpoint), except at ``t = 1`` which belongs to the last piece.
    """

    __slots__ = ("breaks", "pieces")

    def __init__(self, breaks: Sequence, pieces: Sequence[RationalPoly]):
        br = tuple(as_fraction(b) for b in breaks)
        if len(br) != len(pieces) + 1 or br[0] != 0 or br[-1] != 1:
            raise ValueError("breaks must run from 0 to 1 with one more entry than pieces")
        if any(br[i] >= br[i + 1] for i in range(len(br) - 1)):
            raise ValueError("breaks must be strictly increasing")
        self.breaks = br
        self.pieces = tuple(pieces)

    @classmethod
    def smooth(cls, p: RationalPoly) -> "PiecewisePoly":
        return cls((0, 1), (p,))

    @classmethod
    def split_at(cls, v: Rational, left: RationalPoly, right: RationalPoly) -> "PiecewisePoly":
        """Two pieces meeting at ``v``; degenerates gracefully when ``v`` is 0 or 1."""
        v = as_fraction(v)
        if v <= 0:
            return cls.smooth(right)
        if v >= 1:
            return cls.smooth(left)
        return cls((0, v, 1), (left, right))

    def __repr__(self) -> str:
        return f"PiecewisePoly(breaks={[str(b) for b in self.breaks]}, pieces={list(self.pieces)})"

    def piece_index(self, t: Fraction, side: str = "right") -> int:
        t = as_fraction(t)
        if t < 0 or t > 1:
            raise ValueError("t outside [0, 1]")
        k = len(self.pieces)
        for i in range(k):
            lo, hi = self.breaks[i], self.breaks[i + 1]
            if side == "left":
                if lo < t <= hi or (t == 0 and i == 0):
                    return i
            elif lo <= t < hi or (t == 1 and i == k - 1):
                return i
        raise AssertionError("unreachable")

    def __call__(self, t, side: str = "right") -> Fraction:
        return self.pieces[self.piece_index(t, side)](t)

    def _refine(self, breaks: Sequence[Fraction]) -> list[RationalPoly]:
        out = []
        for i in range(len(breaks) - 1):
            mid = (breaks[i] + breaks[i + 1]) / 2
            out.append(self.pieces[self.piece_index(mid)])
        return out

    def _combine(self, other, fn) -> "PiecewisePoly":
        if isinstance(other, RationalPoly):
            other = PiecewisePoly.smooth(other)
        br = tuple(sorted(set(self.breaks) | set(other.breaks)))
        a, b = self._refine(br), other._refine(br)
        return PiecewisePoly(br, [fn(x, y) for x, y in zip(a, b)])

    def __add__(self, other) -> "PiecewisePoly":
        return self._combine(other, lambda x, y: x + y)

    def __sub__(self, other) -> "PiecewisePoly":
        return self._combine(other, lambda x, y: x - y)

    def __mul__(self, other) -> "PiecewisePoly":
        if isinstance(other, (RationalPoly, PiecewisePoly)):
            return self._combine(other, lambda x, y: x * y)
        c = as_fraction(other)
        return PiecewisePoly(self.breaks, [p * c for p in self.pieces])

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "PiecewisePoly":
        c = as_fraction(scalar)
        return PiecewisePoly(self.breaks, [p / c for p in self.pieces])

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.pieces)

    def derivative(self) -> "PiecewisePoly":
        return PiecewisePoly(self.breaks, [p.derivative() for p in self.pieces])

    def cumulative(self) -> "PiecewisePoly":
        """Continuous antiderivative vanishing at 0."""
        out = []
        acc = ZERO
        for i, p in enumerate(self.pieces):
            prim = p.primitive()
            lo, hi = self.breaks[i], self.breaks[i + 1]
            out.append(prim + (acc - prim(lo)))
            acc += prim(hi) - prim(lo)
        return PiecewisePoly(self.breaks, out)

    def integral(self) -> Fraction:
        total = ZERO
        for i, p in enumerate(self.pieces):
            total += p.integral(self.breaks[i], self.breaks[i + 1])
        return total

    def reflect(self) -> "PiecewisePoly":
        br = tuple(1 - b for b in reversed(self.breaks))
        return PiecewisePoly(br, [p.reflect() for p in reversed(self.pieces)])

    def grid_values(self, k: int) -> list[Fraction]:
        """Right-continuous values at ``j/k``."""
        out = []
        for j in range(k + 1):
            out.append(self(Fraction(j, k)))
        return out


def transfer_up_piecewise(d: PiecewisePoly, kernel: RationalPoly) -> PiecewisePoly:
    """Piecewise analogue of :func:`transfer_up`; output keeps the input breakpoints."""
    pieces = []
    carried = RationalPoly()
    for m, dm in enumerate(d.pieces):
        lo, hi = d.breaks[m], d.breaks[m + 1]
        own = transfer_up(dm, kernel) - _kernel_integral_const(dm, kernel, ZERO, lo, up=True)
        pieces.append(carried + own)
        carried = carried + _kernel_integral_const(dm, kernel, lo, hi, up=True)
    return PiecewisePoly(d.breaks, pieces)


def transfer_down_piecewise(d: PiecewisePoly, kernel: RationalPoly) -> PiecewisePoly:
    """Piecewise analogue of :func:`transfer_down`."""
    k = len(d.pieces)
    pieces: list[RationalPoly] = [RationalPoly()] * k
    carried = RationalPoly()
    for m in range(k - 1, -1, -1):
        dm = d.pieces[m]
        lo, hi = d.breaks[m], d.breaks[m + 1]
        own = transfer_down(dm, kernel) - _kernel_integral_const(dm, kernel, hi, ONE, up=False)
        pieces[m] = carried + own
        carried = carried + _kernel_integral_const(dm, kernel, lo, hi, up=False)
    return PiecewisePoly(d.breaks, pieces)


class BivariatePoly:
    """Dense polynomial in ``(x, y)``; ``coeffs[i][j]`` multiplies ``x^i y^j``."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Iterable] = ()):
        rows = [[as_fraction(c) for c in row] for row in coeffs]
        self.coeffs = self._trim(rows)

    @staticmethod
    def _trim(rows: list[list[Fraction]]) -> tuple[tuple[Fraction, ...], ...]:
        width = 0
        for row in rows:
            for j in range(len(row) - 1, -1, -1):
                if row[j] != 0:
                    width = max(width, j + 1)
                    break
        out = [tuple(row[:width]) + (ZERO,) * (width - len(row[:width])) for row in rows]
        while out and all(c == 0 for c in out[-1]):
            out.pop()
        if width == 0:
            return ()
        return tuple(out)

    @classmethod
    def _from_dict(cls, terms: dict) -> "BivariatePoly":
        if not terms:
            return cls()
        dx = max(i for i, _ in terms) + 1
        dy = max(j for _, j in terms) + 1
        rows = [[ZERO] * dy for _ in range(dx)]
        for (i, j), c in terms.items():
            rows[i][j] += c
        obj = cls.__new__(cls)
        obj.coeffs = cls._trim(rows)
        return obj

    @classmethod
    def from_x(cls, p: RationalPoly) -> "BivariatePoly":
        return cls([[c] for c in p.coeffs])

    @classmethod
    def from_y(cls, p: RationalPoly) -> "BivariatePoly":
        return cls([list(p.coeffs)]) if p.coeffs else cls()

    def _terms(self):
        for i, row in enumerate(self.coeffs):
            for j, c in enumerate(row):
                if c != 0:
                    yield i, j, c

    @property
    def degrees(self) -> tuple[int, int]:
        if not self.coeffs:
            return (-1, -1)
        return len(self.coeffs) - 1, len(self.coeffs[0]) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other) -> bool:
        if not isinstance(other, BivariatePoly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        return f"BivariatePoly({dict(((i, j), str(c)) for i, j, c in self._terms())})"

    def __add__(self, other: "BivariatePoly") -> "BivariatePoly":
        terms: dict = {}
        for i, j, c in self._terms():
            terms[(i, j)] = c
        for i, j, c in other._terms():
            terms[(i, j)] = terms.get((i, j), ZERO) + c
        return BivariatePoly._from_dict(terms)

    def __neg__(self) -> "BivariatePoly":
        return BivariatePoly._from_dict({(i, j): -c for i, j, c in self._terms()})

    def __sub__(self, other: "BivariatePoly") -> "BivariatePoly":
        return self + (-other)

    def __mul__(self, other) -> "BivariatePoly":
        if isinstance(other, BivariatePoly):
            terms: dict = {}
            for i, j, c in self._terms():
                for k, l, d in other._terms():
                    key = (i + k, j + l)
                    terms[key] = terms.get(key, ZERO) + c * d
            return BivariatePoly._from_dict(terms)
        c = as_fraction(other)
        return BivariatePoly._from_dict({(i, j): a * c for i, j, a in self._terms()})

    __rmul__ = __mul__

    def mul_x(self, p: RationalPoly) -> "BivariatePoly":
        """Multiply by a polynomial in ``x`` alone."""
        return self * BivariatePoly.from_x(p)

    def mul_y(self, p: RationalPoly) -> "BivariatePoly":
        return self * BivariatePoly.from_y(p)

    def __call__(self, x, y) -> Fraction:
        x, y = as_fraction(x), as_fraction(y)
        acc = ZERO
        for row in reversed(self.coeffs):
            inner = ZERO
            for c in reversed(row):
                inner = inner * y + c
            acc = acc * x + inner
        return acc

    def at_x(self, x) -> RationalPoly:
        """Substitute ``x`` and return a polynomial in ``y``."""
        x = as_fraction(x)
        if not self.coeffs:
            return RationalPoly()
        out = [ZERO] * len(self.coeffs[0])
        xp = ONE
        for row in self.coeffs:
            for j, c in enumerate(row):
                out[j] += c * xp
            xp *= x
        return RationalPoly._raw(out)

    def at_y(self, y) -> RationalPoly:
        """Substitute ``y`` and return a polynomial in ``x``."""
        y = as_fraction(y)
        out = []
        for row in self.coeffs:
            acc = ZERO
            for c in reversed(row):
                acc = acc * y + c
            out.append(acc)
        return RationalPoly._raw(out)

    def diagonal(self) -> RationalPoly:
        """Restriction to ``x = y`` as a polynomial in the common variable."""
        if not self.coeffs:
            return RationalPoly()
        out = [ZERO] * (len(self.coeffs) + len(self.coeffs[0]))
        for i, j, c in self._terms():
            out[i + j] += c
        return RationalPoly._raw(out)

    def derivative_x(self) -> "BivariatePoly":
        return BivariatePoly._from_dict({(i - 1, j): i * c for i, j, c in self._terms() if i > 0})

    def derivative_y(self) -> "BivariatePoly":
        return BivariatePoly._from_dict({(i, j - 1): j * c for i, j, c in self._terms() if j > 0})

    def primitive_x(self) -> "BivariatePoly":
        """Antiderivative in ``x`` vanishing on ``x = 0``."""
        return BivariatePoly._from_dict({(i + 1, j): c / (i + 1) for i, j, c in self._terms()})

    def swap(self) -> "BivariatePoly":
        return BivariatePoly._from_dict({(j, i): c for i, j, c in self._terms()})

    def divide_y_root(self, root: Rational) -> "BivariatePoly | None":
        """Exact quotient by ``(y - root)``, or ``None`` if it does not divide."""
        root = as_fraction(root)
        rows = []
        for row in self.coeffs:
            # synthetic division of the y-polynomial ``row``
            q = [ZERO] * max(len(row) - 1, 0)
            acc = ZERO
            for j in range(len(row) - 1, 0, -1):
                acc = acc * root + row[j]
                q[j - 1] = acc
            if acc * root + row[0] != 0:
                return None
            rows.append(q)
        obj = BivariatePoly.__new__(BivariatePoly)
        obj.coeffs = BivariatePoly._trim(rows)
        return obj

    def scaled_grid(self, k: int) -> tuple[np.ndarray, int]:
        """Exact values at ``(a/k, b/k)`` as an integer matrix over one denominator.

        ``result[a, b] / den == self(a/k, b/k)``; the matrix has dtype=object
        so entries are Python integers of unbounded size.
        """
        if not self.coeffs:
            return np.zeros((k + 1, k + 1), dtype=object), 1
        dx, dy = len(self.coeffs) - 1, len(self.coeffs[0]) - 1
        lden = _lcm_denominators(c for row in self.coeffs for c in row)
        cmat = np.array([[int(c * lden) for c in row] for row in self.coeffs], dtype=object)
        ax = _homogeneous_powers(k, dx)
        ay = _homogeneous_powers(k, dy)
        vals = ax.dot(cmat).dot(ay.T)
        return vals, lden * k ** dx * k ** dy


@lru_cache(maxsize=64)
def _homogeneous_powers(k: int, d: int) -> np.ndarray:
    # row a: (a^i * k^(d-i))_i, so that p(a/k) * k^d = row . coeffs
    return np.array([[a ** i * k ** (d - i) for i in range(d + 1)] for a in range(k + 1)],
                    dtype=object)


# -- pinned (symbolic second coordinate) transfers ---------------------------
#
# A pinned weight W(t, v) is a pair (lo, hi) of BivariatePoly in (t, v):
# ``lo`` is valid for t <= v and ``hi`` for t >= v.

_BOUND_ZERO, _BOUND_ONE, _BOUND_S, _BOUND_V = "0", "1", "s", "v"


@lru_cache(maxsize=256)
def _kernel_expansion(kernel: RationalPoly, up: bool) -> tuple[tuple[int, int, Fraction], ...]:
    """Expand ``k(s - t)`` (up) or ``k(t - s)`` (down) into terms ``(t_exp, s_exp, coef)``."""
    terms: dict = {}
    for a, ka in enumerate(kernel.coeffs):
        if ka == 0:
            continue
        for b in range(a + 1):
            c = ka * comb(a, b) * (-1 if b % 2 else 1)
            key = (b, a - b) if up else (a - b, b)
            terms[key] = terms.get(key, ZERO) + c
    return tuple((te, se, c) for (te, se), c in terms.items() if c != 0)


def _pinned_integral(w: BivariatePoly, kernel: RationalPoly, up: bool,
                     lower: str, upper: str) -> BivariatePoly:
    """Integrate ``w(t, v) * k(+-(s - t))`` over ``t`` between symbolic bounds.

    Bounds are one of ``"0"``, ``"1"``, ``"s"``, ``"v"``.  Result is a
    polynomial in ``(s, v)``.
    """
    if w.is_zero() or kernel.is_zero() or lower == upper:
        return BivariatePoly()
    expansion = _kernel_expansion(kernel, up)
    # collect integrand as {(t_exp, s_exp, v_exp): coef}
    integrand: dict = {}
    for i, j, c in w._terms():
        for te, se, kc in expansion:
            key = (i + te, se, j)
            integrand[key] = integrand.get(key, ZERO) + c * kc
    out: dict = {}

    def put(key, val):
        out[key] = out.get(key, ZERO) + val

    for (p, se, ve), c in integrand.items():
        if c == 0:
            continue
        coef = c / (p + 1)
        for bound, sign in ((upper, 1), (lower, -1)):
            if bound == _BOUND_ZERO:
                continue
            if bound == _BOUND_ONE:
                put((se, ve), sign * coef)
            elif bound == _BOUND_S:
                put((se + p + 1, ve), sign * coef)
            else:
                put((se, ve + p + 1), sign * coef)
    return BivariatePoly._from_dict({k: v for k, v in out.items() if v != 0})


def pinned_start(kernel: RationalPoly, to_upper: bool) -> tuple[BivariatePoly, BivariatePoly]:
    """Weight on the neighbour of a particle pinned at ``v``.

    If the neighbour is an upper particle it lives on ``s >= v`` with weight
    ``k(s - v)``; otherwise on ``s <= v`` with weight ``k(v - s)``.
    """
    terms: dict = {}
    for a, ka in enumerate(kernel.coeffs):
        if ka == 0:
            continue
        for b in range(a + 1):
            c = ka * comb(a, b) * (-1 if b % 2 else 1)
            # (s - v)^a -> s^(a-b) (-v)^b ; (v - s)^a -> v^(a-b) (-s)^b
            key = (a - b, b) if to_upper else (b, a - b)
            terms[key] = terms.get(key, ZERO) + c
    w = BivariatePoly._from_dict({k: v for k, v in terms.items() if v != 0})
    if to_upper:
        return BivariatePoly(), w
    return w, BivariatePoly()


def pinned_transfer(lo: BivariatePoly, hi: BivariatePoly, kernel: RationalPoly,
                    to_upper: bool) -> tuple[BivariatePoly, BivariatePoly]:
    """Push a diagonal-split weight through one kernel.

    ``to_upper`` says whether the receiving particle is an upper one (it then
    sits above the current particle: ``s >= t``).
    """
    S, V, Z, O = _BOUND_S, _BOUND_V, _BOUND_ZERO, _BOUND_ONE
    if to_upper:
        new_lo = _pinned_integral(lo, kernel, True, Z, S)
        new_hi = _pinned_integral(lo, kernel, True, Z, V) + _pinned_integral(hi, kernel, True, V, S)
    else:
        new_lo = _pinned_integral(lo, kernel, False, S, V) + _pinned_integral(hi, kernel, False, V, O)
        new_hi = _pinned_integral(hi, kernel, False, S, O)
    return new_lo, new_hi
