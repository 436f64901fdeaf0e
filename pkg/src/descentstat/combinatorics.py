"""Compositions, descent sets and the run structure of ribbon diagrams.

A composition ``lambda = (lambda_1, ..., lambda_r)`` of ``n`` corresponds to
the descent set ``{lambda_1, lambda_1 + lambda_2, ...}``.  Reading the
ribbon diagram cell by cell, step ``i -> i+1`` goes down (a descent) when
``i`` is in the descent set and up otherwise.  A *run* is a maximal block of
equal steps ``i..j``; it covers the cells ``i..j+1`` and shares its extreme
cells with its neighbours.

Cells are 1-based throughout, as are permutation values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

from .errors import InvalidInput, ResourceLimit

DEFAULT_BRUTE_FORCE_CAP = 10

ASCENDING = "ascending"
DESCENDING = "descending"


@dataclass(frozen=True)
class DescentSet:
    n: int
    members: tuple[int, ...]

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise InvalidInput(f"size must be a positive integer, got {self.n!r}")
        members = tuple(self.members)
        if any(not isinstance(m, int) for m in members):
            raise InvalidInput("descent positions must be integers")
        if list(members) != sorted(set(members)):
            raise InvalidInput("descent positions must be strictly increasing")
        for m in members:
            if m <= 0 or m >= self.n:
                raise InvalidInput(f"descent position {m} outside 1..{self.n - 1}")
        object.__setattr__(self, "members", members)

    def __contains__(self, i: int) -> bool:
        return i in self.members

    def __len__(self) -> int:
        return len(self.members)

    def complement(self) -> "DescentSet":
        mine = set(self.members)
        return DescentSet(self.n, tuple(i for i in range(1, self.n) if i not in mine))

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.members)) + "}@" + str(self.n)


@dataclass(frozen=True)
class Run:
    """A maximal monotone segment of cells ``start..end`` (inclusive)."""

    index: int
    start: int
    end: int
    orientation: str

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    @property
    def cells(self) -> tuple[int, ...]:
        return tuple(range(self.start, self.end + 1))

    @property
    def ascending(self) -> bool:
        return self.orientation == ASCENDING


@dataclass(frozen=True)
class ModelType:
    """Signs of the first and last extreme cells: ``+`` for a peak, ``-`` for a valley."""

    first: str
    last: str

    def __str__(self) -> str:
        return self.first + self.last


@dataclass(frozen=True)
class Composition:
    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise InvalidInput("a composition needs at least one part")
        for p in parts:
            if not isinstance(p, int) or isinstance(p, bool) or p < 1:
                raise InvalidInput(f"parts must be positive integers, got {p!r}")
        object.__setattr__(self, "parts", parts)

    @property
    def n(self) -> int:
        return sum(self.parts)

    def descent_set(self) -> DescentSet:
        return DescentSet(self.n, tuple(itertools.accumulate(self.parts[:-1])))

    def steps(self) -> str:
        """One letter per step ``i -> i+1``: ``D`` for a descent, ``A`` otherwise."""
        d = set(self.descent_set().members)
        return "".join("D" if i in d else "A" for i in range(1, self.n))

    def runs(self) -> list[Run]:
        return runs(self)

    def model_type(self) -> ModelType:
        return model_type(self)

    def complement(self) -> "Composition":
        return composition_from_descents(self.descent_set().complement())

    def __str__(self) -> str:
        return ",".join(map(str, self.parts))


def composition_from_descents(d: DescentSet) -> Composition:
    cuts = (0,) + d.members + (d.n,)
    return Composition(tuple(b - a for a, b in zip(cuts, cuts[1:])))


def runs(c: Composition) -> list[Run]:
    """Run decomposition of the ribbon diagram of ``c``, in reading order."""
    steps = c.steps()
    out: list[Run] = []
    i = 0
    while i < len(steps):
        j = i
        while j + 1 < len(steps) and steps[j + 1] == steps[i]:
            j += 1
        # steps i..j (0-based) are steps (i+1)->(i+2) .. (j+1)->(j+2) on 1-based cells
        out.append(Run(len(out) + 1, i + 1, j + 2, DESCENDING if steps[i] == "D" else ASCENDING))
        i = j + 1
    return out


def model_type(c: Composition) -> ModelType:
    steps = c.steps()
    if not steps:
        # a single cell is treated as a valley
        return ModelType("-", "-")
    first = "+" if steps[0] == "D" else "-"
    last = "+" if steps[-1] == "A" else "-"
    return ModelType(first, last)


def composition_from_runs(lengths: Sequence[int], first_ascending: bool = True) -> Composition:
    """Composition whose run lengths are ``lengths`` (each >= 2), runs alternating."""
    lengths = list(lengths)
    if not lengths:
        raise InvalidInput("need at least one run")
    if any(not isinstance(l, int) or l < 2 for l in lengths):
        raise InvalidInput("run lengths must be integers >= 2")
    steps = []
    asc = first_ascending
    for l in lengths:
        steps.extend(["A" if asc else "D"] * (l - 1))
        asc = not asc
    n = len(steps) + 1
    return composition_from_descents(
        DescentSet(n, tuple(i + 1 for i, s in enumerate(steps) if s == "D")))


def alternating_composition(n: int) -> Composition:
    """Composition with descent set ``{1, 3, 5, ...}``: every run has length 2."""
    if n < 1:
        raise InvalidInput("size must be positive")
    return composition_from_descents(DescentSet(n, tuple(range(1, n, 2))))


def lambda_b(b: int) -> Composition:
    """Composition with three runs of lengths 2, b, 2 (first run ascending)."""
    return composition_from_runs([2, b, 2])


def all_compositions(n: int) -> Iterator[Composition]:
    """All ``2^(n-1)`` compositions of ``n``, by descent-set bitmask."""
    for mask in range(1 << (n - 1)):
        members = tuple(i + 1 for i in range(n - 1) if mask >> i & 1)
        yield composition_from_descents(DescentSet(n, members))


def _check_permutation(p: Sequence[int]) -> tuple[int, ...]:
    p = tuple(p)
    if sorted(p) != list(range(1, len(p) + 1)):
        raise InvalidInput("not a permutation of 1..n")
    return p


def descent_set_of_permutation(p: Sequence[int]) -> DescentSet:
    p = _check_permutation(p)
    if not p:
        raise InvalidInput("empty permutation")
    return DescentSet(len(p), tuple(i + 1 for i in range(len(p) - 1) if p[i] > p[i + 1]))


def brute_force_class(c: Composition, cap: int = DEFAULT_BRUTE_FORCE_CAP) -> list[tuple[int, ...]]:
    """All permutations with descent set ``D(c)``, in lexicographic order."""
    n = c.n
    if n > cap:
        raise ResourceLimit(f"brute force over S_{n} exceeds the cap n <= {cap}")
    target = c.steps()
    out = []
    for p in itertools.permutations(range(1, n + 1)):
        if all((p[i] > p[i + 1]) == (target[i] == "D") for i in range(n - 1)):
            out.append(p)
    return out


def brute_force_counts(n: int, cap: int = DEFAULT_BRUTE_FORCE_CAP) -> dict[tuple[int, ...], int]:
    """Number of permutations of ``n`` per descent set, in one pass over ``S_n``."""
    if n > cap:
        raise ResourceLimit(f"brute force over S_{n} exceeds the cap n <= {cap}")
    counts: dict[int, int] = {}
    for p in itertools.permutations(range(n)):
        mask = 0
        for i in range(n - 1):
            if p[i] > p[i + 1]:
                mask |= 1 << i
        counts[mask] = counts.get(mask, 0) + 1
    out = {}
    for mask in range(1 << max(n - 1, 0)):
        members = tuple(i + 1 for i in range(n - 1) if mask >> i & 1)
        out[members] = counts.get(mask, 0)
    return out


def parse_composition(text: str) -> Composition:
    """Parse ``"3,2,4,1"``, ``"{3,5,9}@10"`` or ``"runs:2,5,2"``."""
    s = text.strip()
    try:
        if "@" in s:
            body, size = s.split("@", 1)
            body = body.strip()
            if not (body.startswith("{") and body.endswith("}")):
                raise InvalidInput(f"descent set must be braced: {text!r}")
            inner = body[1:-1].strip()
            members = tuple(int(x) for x in inner.split(",")) if inner else ()
            return composition_from_descents(DescentSet(int(size), members))
        if s.lower().startswith("runs:"):
            lengths = [int(x) for x in s[5:].split(",")]
            return composition_from_runs(lengths)
        s = s.strip("()[] ")
        return Composition(tuple(int(x) for x in s.split(",")))
    except ValueError as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(f"cannot parse composition {text!r}: {exc}") from None


def parse_descent_set(text: str) -> DescentSet:
    """Parse ``"{3,5,9}@10"``."""
    if "@" not in text:
        raise InvalidInput(f"descent set needs the form '{{3,5,9}}@10', got {text!r}")
    return parse_composition(text).descent_set()
