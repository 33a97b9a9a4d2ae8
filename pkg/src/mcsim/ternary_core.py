"""Ternary values, words, cubes, and the unary/Gray codes.

Signals take values in {0, 1, M}, where M marks a metastable bit. A word
with k M bits stands for its 2^k full resolutions (every M fixed to 0 or
1); read as a cube it stands for its 3^k partial resolutions (every M may
also stay M). Everything downstream is built on these sets.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Iterator, Sequence

# Expanding the resolutions of more than this many M bits fails loudly
# instead of hanging; callers may lower or (carefully) raise it per call.
DEFAULT_MAX_META_BITS = 12

# Cap on states visited by reachability-style searches.
DEFAULT_MAX_STATES = 10**6


class InputError(Exception):
    """Malformed or out-of-range input (bad syntax, width mismatch, ...)."""


class BudgetError(Exception):
    """An enumeration or search exceeded its configured budget."""


class Ternary(IntEnum):
    """One signal value. ZERO and ONE are stable; META is not."""

    ZERO = 0
    ONE = 1
    META = 2

    @property
    def is_stable(self) -> bool:
        return self is not Ternary.META

    def __str__(self) -> str:
        return "01M"[self]


ZERO = Ternary.ZERO
ONE = Ternary.ONE
META = Ternary.META

_CHAR_TO_DIGIT = {"0": ZERO, "1": ONE, "M": META}


@dataclass(frozen=True, order=True)
class TernaryWord:
    """Fixed-width vector over {0,1,M}, MSB first.

    Digits are packed two bits each (0, 1, 2), so comparing the
    (width, packed) tuples orders words lexicographically with 0 < 1 < M.
    """

    width: int
    packed: int

    @staticmethod
    def from_digits(digits: Iterable[Ternary | int]) -> "TernaryWord":
        packed = 0
        width = 0
        for d in digits:
            packed = (packed << 2) | int(d)
            width += 1
        return TernaryWord(width, packed)

    @staticmethod
    def parse(text: str) -> "TernaryWord":
        try:
            return TernaryWord.from_digits(_CHAR_TO_DIGIT[c] for c in text)
        except KeyError as e:
            raise InputError(f"bad word {text!r}: digit must be 0, 1, or M") from e

    def digit(self, i: int) -> Ternary:
        if not 0 <= i < self.width:
            raise InputError(f"digit index {i} out of range for width {self.width}")
        return Ternary((self.packed >> (2 * (self.width - 1 - i))) & 3)

    def digits(self) -> tuple[Ternary, ...]:
        return tuple(self.digit(i) for i in range(self.width))

    def with_digit(self, i: int, d: Ternary) -> "TernaryWord":
        shift = 2 * (self.width - 1 - i)
        cleared = self.packed & ~(3 << shift)
        return TernaryWord(self.width, cleared | (int(d) << shift))

    def concat(self, other: "TernaryWord") -> "TernaryWord":
        return TernaryWord(self.width + other.width,
                           (self.packed << (2 * other.width)) | other.packed)

    def subword(self, start: int, stop: int) -> "TernaryWord":
        if not 0 <= start <= stop <= self.width:
            raise InputError(f"bad subword range [{start}:{stop}] for width {self.width}")
        shift = 2 * (self.width - stop)
        mask = (1 << (2 * (stop - start))) - 1
        return TernaryWord(stop - start, (self.packed >> shift) & mask)

    @property
    def is_stable(self) -> bool:
        return self.meta_count() == 0

    def meta_positions(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.width) if self.digit(i) is META)

    def meta_count(self) -> int:
        n = 0
        p = self.packed
        while p:
            if p & 3 == 2:
                n += 1
            p >>= 2
        return n

    def __len__(self) -> int:
        return self.width

    def __str__(self) -> str:
        return "".join("01M"[(self.packed >> (2 * (self.width - 1 - i))) & 3]
                       for i in range(self.width))

    def __repr__(self) -> str:
        return f"word({str(self)!r})"


def word(text: str) -> TernaryWord:
    """Shorthand parser: word("0M1")."""
    return TernaryWord.parse(text)


def _check_meta_budget(w: TernaryWord, max_meta: int, what: str) -> int:
    m = w.meta_count()
    if m > max_meta:
        raise BudgetError(
            f"{what} of {w} needs 2^{m} expansions; budget is {max_meta} M bits")
    return m


def res_full(w: TernaryWord,
             max_meta: int = DEFAULT_MAX_META_BITS) -> list[TernaryWord]:
    """All full resolutions of w: every M fixed to 0 or 1, in lex order."""
    _check_meta_budget(w, max_meta, "full resolution")
    positions = w.meta_positions()
    out = []
    for choice in itertools.product((ZERO, ONE), repeat=len(positions)):
        y = w
        for i, d in zip(positions, choice):
            y = y.with_digit(i, d)
        out.append(y)
    return out


def res_members(w: TernaryWord,
                max_meta: int = DEFAULT_MAX_META_BITS) -> list[TernaryWord]:
    """All partial resolutions of w (the members of the cube w), in lex order."""
    _check_meta_budget(w, max_meta, "partial resolution")
    positions = w.meta_positions()
    out = []
    for choice in itertools.product((ZERO, ONE, META), repeat=len(positions)):
        y = w
        for i, d in zip(positions, choice):
            y = y.with_digit(i, d)
        out.append(y)
    return sorted(out)


def res_contains(cube: TernaryWord, w: TernaryWord) -> bool:
    """True iff w is a partial resolution of cube (per digit, no enumeration)."""
    if cube.width != w.width:
        raise InputError(f"width mismatch: {cube} vs {w}")
    a, b = cube.packed, w.packed
    while a or b:
        da, db = a & 3, b & 3
        if da != 2 and da != db:
            return False
        a >>= 2
        b >>= 2
    return True


def words_compatible(a: TernaryWord, b: TernaryWord) -> bool:
    """True iff the cubes a and b share at least one member."""
    if a.width != b.width:
        raise InputError(f"width mismatch: {a} vs {b}")
    x, y = a.packed, b.packed
    while x or y:
        dx, dy = x & 3, y & 3
        if dx != dy and dx != 2 and dy != 2:
            return False
        x >>= 2
        y >>= 2
    return True


@dataclass(frozen=True)
class CubeSet:
    """A set of same-width cubes; denotes the union of their members.

    The cubes tuple is sorted and duplicate-free. Canonical form (no cube
    contained in another) is established by cubeset_canonicalize; the
    executor and analysis layers only hand out canonical sets.
    """

    width: int
    cubes: tuple[TernaryWord, ...]

    @staticmethod
    def of(width: int, cubes: Iterable[TernaryWord]) -> "CubeSet":
        items = sorted(set(cubes))
        for c in items:
            if c.width != width:
                raise InputError(f"cube {c} does not have width {width}")
        return CubeSet(width, tuple(items))

    def contains_word(self, w: TernaryWord) -> bool:
        return any(res_contains(c, w) for c in self.cubes)

    def is_disjoint(self, other: "CubeSet") -> bool:
        return not any(words_compatible(a, b)
                       for a in self.cubes for b in other.cubes)

    def __iter__(self) -> Iterator[TernaryWord]:
        return iter(self.cubes)

    def __len__(self) -> int:
        return len(self.cubes)

    def __str__(self) -> str:
        return ", ".join(str(c) for c in self.cubes) if self.cubes else "(empty)"


def cubeset_canonicalize(cs: CubeSet) -> CubeSet:
    """Drop every cube contained in another; denotation is unchanged.

    Idempotent and independent of the input order (the result is sorted).
    """
    kept: list[TernaryWord] = []
    # Fewer M digits first, so potential containers are processed before
    # the cubes they absorb; ties broken lexicographically for determinism.
    for c in sorted(set(cs.cubes), key=lambda c: (-c.meta_count(), c)):
        if not any(res_contains(k, c) for k in kept):
            kept.append(c)
    return CubeSet(cs.width, tuple(sorted(kept)))


def _norm_table(table: str | Sequence[int], arity: int) -> str:
    if not isinstance(table, str):
        table = "".join(str(int(b)) for b in table)
    if len(table) != 1 << arity or any(c not in "01" for c in table):
        raise InputError(
            f"truth table {table!r} does not match arity {arity}")
    return table


def kleene_extend(table: str | Sequence[int], x: TernaryWord) -> Ternary:
    """Evaluate a Boolean truth table on a ternary word.

    Returns b when the table is constant b over all full resolutions of x,
    and M otherwise. The table lists outputs for inputs in ascending binary
    order, MSB first.
    """
    table = _norm_table(table, x.width)
    base = 0
    metas = []
    for i in range(x.width):
        d = x.digit(i)
        bitpos = x.width - 1 - i
        if d is META:
            metas.append(bitpos)
        elif d is ONE:
            base |= 1 << bitpos
    seen0 = seen1 = False
    for combo in range(1 << len(metas)):
        row = base
        for j, bitpos in enumerate(metas):
            if combo >> j & 1:
                row |= 1 << bitpos
        if table[row] == "1":
            seen1 = True
        else:
            seen0 = True
        if seen0 and seen1:
            return META
    return ONE if seen1 else ZERO


@dataclass(frozen=True)
class Code:
    """An encoding of integers as stable words: unary TC or Gray BRGC.

    TC of width n encodes 0..n as 0^(n-v) 1^v; the mirrored spelling
    1^v 0^(n-v) (the order a thermometer delivers) decodes too. BRGC of
    width k encodes 0..2^k-1 bijectively with the reflected construction.
    """

    kind: str
    width: int

    def __post_init__(self):
        if self.kind not in ("TC", "BRGC"):
            raise InputError(f"unknown code kind {self.kind!r}")
        if self.width < 1:
            raise InputError("code width must be positive")

    @property
    def range(self) -> int:
        """Count of codewords."""
        return self.width + 1 if self.kind == "TC" else 1 << self.width


def tc(width: int) -> Code:
    return Code("TC", width)


def brgc(width: int) -> Code:
    return Code("BRGC", width)


def encode(c: Code, v: int) -> TernaryWord:
    """The canonical codeword of v."""
    if not 0 <= v < c.range:
        raise InputError(f"value {v} out of range for {c.kind} width {c.width}")
    if c.kind == "TC":
        return word("0" * (c.width - v) + "1" * v)
    g = v ^ (v >> 1)
    return TernaryWord.from_digits(
        Ternary(g >> (c.width - 1 - i) & 1) for i in range(c.width))


def decode(c: Code, w: TernaryWord) -> int:
    """The value of a stable codeword; raises on anything else."""
    if w.width != c.width:
        raise InputError(f"width mismatch: {w} vs {c.kind} width {c.width}")
    if not w.is_stable:
        raise InputError(f"not a codeword: {w} is not stable")
    if c.kind == "TC":
        ones = sum(1 for d in w.digits() if d is ONE)
        if w not in (encode(c, ones), _tc_mirror(c, ones)):
            raise InputError(f"not a codeword: {w}")
        return ones
    v = 0
    acc = 0
    for i in range(c.width):
        acc ^= int(w.digit(i))
        v = (v << 1) | acc
    return v


def _tc_mirror(c: Code, v: int) -> TernaryWord:
    return word("1" * v + "0" * (c.width - v))


def precision(c: Code, w: TernaryWord,
              max_meta: int = DEFAULT_MAX_META_BITS) -> int:
    """Largest spread between decoded full resolutions of w.

    Every full resolution must be a codeword; otherwise the notion is
    undefined and an error is raised.
    """
    values = []
    for y in res_full(w, max_meta):
        try:
            values.append(decode(c, y))
        except InputError as e:
            raise InputError(
                f"precision undefined: {w} resolves to non-codeword {y}") from e
    return max(values) - min(values)
