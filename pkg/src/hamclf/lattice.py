"""Observation patterns as bitmasks, and the antichain machinery built on them.

A :class:`Pattern` is a subset of the ``d`` feature coordinates, stored as an
integer bitmask where bit ``j`` marks coordinate ``j + 1``.  Pattern sets are
plain ``frozenset`` objects; every function here checks that the members share
a dimension.

Canonical iteration order is ``(dim, mask)``: increasing number of observed
coordinates, ties broken by the integer value of the mask.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import AbstractSet, Iterable, Iterator

MAX_DIM = 24


class DimensionMismatch(ValueError):
    """Raised when patterns of different ambient dimension are combined."""


@dataclass(frozen=True, order=False)
class Pattern:
    mask: int
    d: int

    def __post_init__(self):
        if not 1 <= self.d <= MAX_DIM:
            raise ValueError(f"dimension must lie in [1, {MAX_DIM}], got {self.d}")
        if self.mask < 0 or self.mask >> self.d:
            raise ValueError(f"mask {self.mask} does not fit in {self.d} bits")

    @classmethod
    def from_bits(cls, bits: Iterable[int | bool]) -> "Pattern":
        bits = [int(bool(b)) for b in bits]
        mask = 0
        for j, b in enumerate(bits):
            mask |= b << j
        return cls(mask, len(bits))

    @classmethod
    def parse(cls, text: str) -> "Pattern":
        """Parse the ``'0110'`` form; leftmost character is coordinate 1."""
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a pattern string: {text!r}")
        return cls.from_bits(c == "1" for c in text)

    @classmethod
    def zeros(cls, d: int) -> "Pattern":
        return cls(0, d)

    @classmethod
    def ones(cls, d: int) -> "Pattern":
        return cls((1 << d) - 1, d)

    @classmethod
    def unit(cls, d: int, j: int) -> "Pattern":
        """Pattern observing only coordinate ``j`` (0-based)."""
        return cls(1 << j, d)

    @property
    def dim(self) -> int:
        return bin(self.mask).count("1")

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.mask >> j) & 1 for j in range(self.d))

    @property
    def coords(self) -> tuple[int, ...]:
        """0-based indices of the observed coordinates, ascending."""
        return tuple(j for j in range(self.d) if (self.mask >> j) & 1)

    def sort_key(self) -> tuple[int, int]:
        return (self.dim, self.mask)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)

    def __repr__(self) -> str:
        return f"Pattern('{self}')"


PatternSet = frozenset  # frozenset[Pattern]


def _check(a: Pattern, b: Pattern) -> None:
    if a.d != b.d:
        raise DimensionMismatch(f"patterns of dimension {a.d} and {b.d}")


def _common_dim(patterns: Iterable[Pattern]) -> int | None:
    d = None
    for p in patterns:
        if d is None:
            d = p.d
        elif p.d != d:
            raise DimensionMismatch(f"pattern set mixes dimensions {d} and {p.d}")
    return d


def pattern_set(items: Iterable[Pattern | str]) -> frozenset:
    """Build a pattern set from patterns or ``'0110'`` strings."""
    out = frozenset(Pattern.parse(p) if isinstance(p, str) else p for p in items)
    _common_dim(out)
    return out


def preceq(a: Pattern, b: Pattern) -> bool:
    _check(a, b)
    return a.mask & ~b.mask == 0


def precedes(a: Pattern, b: Pattern) -> bool:
    """Strict order: ``a`` precedes ``b`` and differs from it."""
    return preceq(a, b) and a.mask != b.mask


def meet(a: Pattern, b: Pattern) -> Pattern:
    _check(a, b)
    return Pattern(a.mask & b.mask, a.d)


def join(a: Pattern, b: Pattern) -> Pattern:
    _check(a, b)
    return Pattern(a.mask | b.mask, a.d)


def all_patterns(d: int) -> list[Pattern]:
    """Every pattern of {0,1}^d in canonical order."""
    if not 1 <= d <= MAX_DIM:
        raise ValueError(f"dimension must lie in [1, {MAX_DIM}], got {d}")
    return sorted((Pattern(m, d) for m in range(1 << d)), key=Pattern.sort_key)


def canonical(patterns: Iterable[Pattern], reverse_dim: bool = False) -> list[Pattern]:
    """Sort by dimension (descending if ``reverse_dim``), then by mask."""
    if reverse_dim:
        return sorted(patterns, key=lambda p: (-p.dim, p.mask))
    return sorted(patterns, key=Pattern.sort_key)


def submasks(mask: int) -> Iterator[int]:
    """All submasks of ``mask``, including ``mask`` itself and 0."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def strict_subpatterns(p: Pattern) -> list[Pattern]:
    """Patterns strictly below ``p``, in canonical order."""
    return canonical(Pattern(m, p.d) for m in submasks(p.mask) if m != p.mask)


def is_antichain(patterns: AbstractSet[Pattern]) -> bool:
    _common_dim(patterns)
    members = list(patterns)
    for i, a in enumerate(members):
        for b in members[i + 1:]:
            if preceq(a, b) or preceq(b, a):
                return False
    return True


def lower_set(patterns: AbstractSet[Pattern]) -> frozenset:
    """L(S): patterns strictly preceded by some member of ``S``."""
    d = _common_dim(patterns)
    if d is None:
        return frozenset()
    out = set()
    for p in patterns:
        out.update(Pattern(m, d) for m in submasks(p.mask) if m != p.mask)
    return frozenset(out)


def upper_complement(patterns: AbstractSet[Pattern], d: int | None = None) -> frozenset:
    """U(S) = {0,1}^d minus (S and L(S)).  ``d`` is required when ``S`` is empty."""
    sd = _common_dim(patterns)
    if sd is None:
        if d is None:
            raise ValueError("dimension needed for the upper complement of an empty set")
    elif d is not None and d != sd:
        raise DimensionMismatch(f"requested d={d} for a set of dimension {sd}")
    else:
        d = sd
    if not is_antichain(patterns):
        raise ValueError("upper_complement requires an antichain")
    covered = set(patterns) | lower_set(patterns)
    return frozenset(p for p in all_patterns(d) if p not in covered)


def strict_dominators(p: Pattern, patterns: AbstractSet[Pattern]) -> frozenset:
    """Members of ``patterns`` strictly above ``p``."""
    return frozenset(q for q in patterns if precedes(p, q))


def down_closure(patterns: AbstractSet[Pattern]) -> frozenset:
    """S together with L(S)."""
    return frozenset(patterns) | lower_set(patterns)


def format_set(patterns: AbstractSet[Pattern], sep: str = "|") -> str:
    return sep.join(str(p) for p in canonical(patterns))
