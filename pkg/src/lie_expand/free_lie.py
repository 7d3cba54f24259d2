"""Exact free Lie algebra over Q, truncated at a fixed degree.

Elements are sparse rational combinations of Lyndon basis brackets.  A Lyndon
word ``w`` of length >= 2 stands for the bracket ``[P_u, P_v]`` where
``w = uv`` is its standard factorization (``v`` the longest proper Lyndon
suffix).  Products of basis elements are brought back to normal form with the
classical rewriting ``[[u1,u2],v] = [u1,[u2,v]] + [[u1,v],u2]``.

Everything here is exact; no floating point is involved.
"""

from __future__ import annotations

import functools
import math
import re
from collections import defaultdict
from fractions import Fraction
from itertools import product
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Union

from .errors import UsageError

Word = tuple[int, ...]
LyndonWord = Word
Coefficient = Union[Fraction, int]

ZERO_VALUATION = math.inf


# ---------------------------------------------------------------------------
# Lyndon combinatorics
# ---------------------------------------------------------------------------

def is_lyndon(word: Iterable[int]) -> bool:
    """True if ``word`` is strictly smaller than each of its proper rotations."""
    w = tuple(word)
    if not w:
        return False
    return all(w < w[i:] + w[:i] for i in range(1, len(w)))


def lyndon_words(s: int, max_length: int) -> list[LyndonWord]:
    """All Lyndon words over ``1..s`` of length <= ``max_length``, in lex order (Duval)."""
    if s < 1 or max_length < 1:
        raise UsageError(f"need s >= 1 and max_length >= 1, got s={s}, max_length={max_length}")
    out: list[LyndonWord] = []
    w = [1]
    while w:
        out.append(tuple(w))
        m = len(w)
        w = [w[i % m] for i in range(max_length)]
        while w and w[-1] == s:
            w.pop()
        if w:
            w[-1] += 1
    return out


def lyndon_basis(s: int, max_degree: int) -> dict[int, list[LyndonWord]]:
    """Lyndon words of degree <= ``max_degree`` grouped by degree."""
    if s < 1 or max_degree < 1:
        raise UsageError(f"lyndon_basis needs s >= 1 and max_degree >= 1 (got {s}, {max_degree})")
    return dict(_lyndon_basis_cached(s, max_degree))


@functools.lru_cache(maxsize=None)
def _lyndon_basis_cached(s: int, max_degree: int) -> tuple[tuple[int, list[LyndonWord]], ...]:
    by_degree: dict[int, list[LyndonWord]] = {d: [] for d in range(1, max_degree + 1)}
    for w in lyndon_words(s, max_degree):
        by_degree[len(w)].append(w)
    return tuple(by_degree.items())


def _mobius(n: int) -> int:
    result, p = 1, 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            result = -result
        p += 1
    return -result if n > 1 else result


def witt_dimension(s: int, n: int) -> int:
    """Dimension of the degree-``n`` part of the free Lie algebra on ``s`` generators."""
    total = sum(_mobius(d) * s ** (n // d) for d in range(1, n + 1) if n % d == 0)
    return total // n


@functools.lru_cache(maxsize=None)
def standard_factorization(word: LyndonWord) -> tuple[LyndonWord, LyndonWord]:
    """Split a Lyndon word of length >= 2 as ``uv`` with ``v`` its longest proper Lyndon suffix."""
    if len(word) < 2:
        raise UsageError("standard factorization needs a word of length >= 2")
    for i in range(1, len(word)):
        if is_lyndon(word[i:]):
            return word[:i], word[i:]
    raise AssertionError("unreachable: the last letter is always Lyndon")


def bracket_string(word: LyndonWord) -> str:
    """Render the standard bracketing of a Lyndon word, e.g. ``[x1,[x1,x2]]``."""
    if len(word) == 1:
        return f"x{word[0]}"
    u, v = standard_factorization(word)
    return f"[{bracket_string(u)},{bracket_string(v)}]"


# ---------------------------------------------------------------------------
# Structure constants of the Lyndon basis (the shared, read-only BCH cache)
# ---------------------------------------------------------------------------

def _add_into(acc: dict, terms: Mapping, scale) -> None:
    for w, c in terms.items():
        acc[w] = acc.get(w, 0) + scale * c


def _prune(acc: dict) -> dict:
    return {w: c for w, c in acc.items() if c != 0}


@functools.lru_cache(maxsize=None)
def _basis_bracket(u: LyndonWord, v: LyndonWord) -> Mapping[LyndonWord, Fraction]:
    """``[P_u, P_v]`` expanded in the Lyndon basis (homogeneous of degree |u|+|v|)."""
    if u == v:
        return MappingProxyType({})
    if u > v:
        return MappingProxyType({w: -c for w, c in _basis_bracket(v, u).items()})
    if len(u) == 1 or standard_factorization(u)[1] >= v:
        return MappingProxyType({u + v: Fraction(1)})
    u1, u2 = standard_factorization(u)
    acc: dict = {}
    # [[u1,u2],v] = [u1,[u2,v]] + [[u1,v],u2]
    for w, c in _basis_bracket(u2, v).items():
        _add_into(acc, _basis_bracket(u1, w), c)
    for w, c in _basis_bracket(u1, v).items():
        _add_into(acc, _basis_bracket(w, u2), c)
    return MappingProxyType(_prune(acc))


def _bracket_terms(ta: Mapping, tb: Mapping, limit: int) -> dict:
    acc: dict = {}
    for u, cu in ta.items():
        lu = len(u)
        for v, cv in tb.items():
            if lu + len(v) > limit:
                continue
            _add_into(acc, _basis_bracket(u, v), cu * cv)
    return _prune(acc)


def structure_constants(s: int, max_degree: int) -> dict[tuple[LyndonWord, LyndonWord], Mapping[LyndonWord, Fraction]]:
    """Table of ``[P_u, P_v]`` for all basis pairs whose degrees add up to <= ``max_degree``."""
    basis = [w for ws in lyndon_basis(s, max_degree).values() for w in ws]
    return {
        (u, v): _basis_bracket(u, v)
        for u in basis
        for v in basis
        if len(u) + len(v) <= max_degree
    }


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------

class FreeLieElement:
    """Immutable element of the free Lie algebra on ``s`` generators modulo degree > ``max_degree``.

    Terms of degree above ``max_degree`` are dropped on construction, which
    realises the quotient by brackets of length > ``max_degree``.
    """

    __slots__ = ("s", "max_degree", "_terms")

    def __init__(self, terms: Mapping[Word, Coefficient] | None, s: int, max_degree: int, *, _checked: bool = False):
        if s < 1 or max_degree < 1:
            raise UsageError(f"need s >= 1 and max_degree >= 1, got s={s}, max_degree={max_degree}")
        clean: dict[LyndonWord, Fraction] = {}
        for w, c in (terms or {}).items():
            w = tuple(w)
            if not _checked:
                if not is_lyndon(w) or any(not 1 <= i <= s for i in w):
                    raise UsageError(f"{w} is not a Lyndon word over 1..{s}")
            if len(w) > max_degree or c == 0:
                continue
            clean[w] = c if isinstance(c, Fraction) else Fraction(c)
        self.s = s
        self.max_degree = max_degree
        self._terms = MappingProxyType(dict(sorted(clean.items(), key=lambda kv: (len(kv[0]), kv[0]))))

    # constructors ------------------------------------------------------
    @classmethod
    def zero(cls, s: int, max_degree: int) -> FreeLieElement:
        return cls({}, s, max_degree)

    @classmethod
    def generator(cls, i: int, s: int, max_degree: int) -> FreeLieElement:
        if not 1 <= i <= s:
            raise UsageError(f"generator index {i} outside 1..{s}")
        return cls({(i,): Fraction(1)}, s, max_degree, _checked=True)

    @classmethod
    def generators(cls, s: int, max_degree: int) -> list[FreeLieElement]:
        return [cls.generator(i, s, max_degree) for i in range(1, s + 1)]

    @classmethod
    def basis_element(cls, word: Iterable[int], s: int, max_degree: int) -> FreeLieElement:
        return cls({tuple(word): Fraction(1)}, s, max_degree)

    # accessors ---------------------------------------------------------
    @property
    def terms(self) -> Mapping[LyndonWord, Fraction]:
        return self._terms

    def __iter__(self) -> Iterator[tuple[LyndonWord, Fraction]]:
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def coefficient(self, word: Iterable[int]) -> Fraction:
        return self._terms.get(tuple(word), Fraction(0))

    def homogeneous(self, degree: int) -> FreeLieElement:
        """Degree-``degree`` component."""
        return self._same({w: c for w, c in self._terms.items() if len(w) == degree})

    def truncate(self, degree: int) -> FreeLieElement:
        return self._same({w: c for w, c in self._terms.items() if len(w) <= degree})

    def with_max_degree(self, max_degree: int) -> FreeLieElement:
        return FreeLieElement(dict(self._terms), self.s, max_degree, _checked=True)

    @property
    def valuation(self) -> int | float:
        return valuation(self)

    # arithmetic --------------------------------------------------------
    def _same(self, terms: Mapping) -> FreeLieElement:
        return FreeLieElement(terms, self.s, self.max_degree, _checked=True)

    def _check_compatible(self, other: FreeLieElement) -> None:
        if not isinstance(other, FreeLieElement):
            raise TypeError(f"expected FreeLieElement, got {type(other).__name__}")
        if other.s != self.s or other.max_degree != self.max_degree:
            raise UsageError(
                f"incompatible operands: (s={self.s}, max_degree={self.max_degree}) vs "
                f"(s={other.s}, max_degree={other.max_degree})"
            )

    def __add__(self, other: FreeLieElement) -> FreeLieElement:
        self._check_compatible(other)
        acc = dict(self._terms)
        _add_into(acc, other._terms, 1)
        return self._same(acc)

    def __sub__(self, other: FreeLieElement) -> FreeLieElement:
        self._check_compatible(other)
        acc = dict(self._terms)
        _add_into(acc, other._terms, -1)
        return self._same(acc)

    def __neg__(self) -> FreeLieElement:
        return self._same({w: -c for w, c in self._terms.items()})

    def __mul__(self, scalar) -> FreeLieElement:
        if isinstance(scalar, FreeLieElement):
            return NotImplemented
        q = Fraction(scalar)
        return self._same({w: q * c for w, c in self._terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> FreeLieElement:
        return self * (1 / Fraction(scalar))

    def __eq__(self, other) -> bool:
        if isinstance(other, int) and other == 0:
            return not self._terms
        if not isinstance(other, FreeLieElement):
            return NotImplemented
        return (self.s, self.max_degree, dict(self._terms)) == (other.s, other.max_degree, dict(other._terms))

    def __hash__(self) -> int:
        return hash((self.s, self.max_degree, tuple(self._terms.items())))

    def __repr__(self) -> str:
        return f"FreeLieElement({format_element(self)!r}, s={self.s}, max_degree={self.max_degree})"

    def __str__(self) -> str:
        return format_element(self)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def bracket(a: FreeLieElement, b: FreeLieElement) -> FreeLieElement:
    """Lie bracket ``[a, b]`` in Lyndon normal form, truncated at ``max_degree``."""
    a._check_compatible(b)
    return FreeLieElement(_bracket_terms(a.terms, b.terms, a.max_degree), a.s, a.max_degree, _checked=True)


def valuation(a: FreeLieElement) -> int | float:
    """Smallest degree carrying a nonzero coefficient; ``math.inf`` for zero."""
    if not a.terms:
        return ZERO_VALUATION
    return min(len(w) for w in a.terms)


def star_inverse(a: FreeLieElement) -> FreeLieElement:
    """Inverse for the BCH group law: ``exp(a)^-1 = exp(-a)``."""
    return -a


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@functools.lru_cache(maxsize=None)
def _right_normed(word: Word) -> Mapping[LyndonWord, Fraction]:
    """``[x_{w1},[x_{w2},[...,x_{wn}]]]`` in the Lyndon basis."""
    if len(word) == 1:
        return MappingProxyType({word: Fraction(1)})
    inner = _right_normed(word[1:])
    acc: dict = {}
    for w, c in inner.items():
        _add_into(acc, _basis_bracket(word[:1], w), c)
    return MappingProxyType(_prune(acc))


def right_normed_bracket(indices: Iterable[int], s: int, max_degree: int) -> FreeLieElement:
    """The repeated bracket ``[x_{i1},[x_{i2},...,x_{ik}]]`` as an element."""
    word = tuple(indices)
    if not word:
        raise UsageError("a repeated bracket needs at least one index")
    if any(not 1 <= i <= s for i in word):
        raise UsageError(f"indices {word} outside 1..{s}")
    return FreeLieElement(dict(_right_normed(word)), s, max_degree, _checked=True)


@functools.lru_cache(maxsize=None)
def bch_series(order: int) -> Mapping[LyndonWord, Fraction]:
    """``log(exp(x1) exp(x2))`` up to degree ``order`` by Dynkin's formula, in the Lyndon basis."""
    if order < 1:
        raise UsageError("order must be >= 1")
    if order > 1:
        acc = dict(bch_series(order - 1))
    else:
        acc = {}
    m = order
    factorial = math.factorial
    for n in range(1, m + 1):
        sign = Fraction((-1) ** (n - 1), n)
        for blocks in _compositions(m, n):
            # every block of size k splits as (p, q) with p + q = k
            for splits in product(*[range(k + 1) for k in blocks]):
                word: Word = ()
                denom = 1
                for k, p in zip(blocks, splits):
                    q = k - p
                    word += (1,) * p + (2,) * q
                    denom *= factorial(p) * factorial(q)
                rn = _right_normed(word)
                if rn:
                    _add_into(acc, rn, sign / (denom * m))
    return MappingProxyType(_prune(acc))


def bch(a: FreeLieElement, b: FreeLieElement, order: int | None = None) -> FreeLieElement:
    """``a * b = log(exp(a) exp(b))`` truncated at degree ``order`` (default ``max_degree``)."""
    a._check_compatible(b)
    if order is None:
        order = a.max_degree
    if order > a.max_degree:
        raise UsageError(f"order {order} exceeds the truncation degree {a.max_degree}")
    if order < 1:
        raise UsageError("order must be >= 1")
    ta = {w: c for w, c in a.terms.items() if len(w) <= order}
    tb = {w: c for w, c in b.terms.items() if len(w) <= order}
    if not ta or not tb:
        merged = dict(ta)
        _add_into(merged, tb, 1)
        return FreeLieElement(merged, a.s, a.max_degree, _checked=True)

    memo: dict[LyndonWord, dict] = {(1,): ta, (2,): tb}

    def value(w: LyndonWord) -> dict:
        if w not in memo:
            u, v = standard_factorization(w)
            memo[w] = _bracket_terms(value(u), value(v), order)
        return memo[w]

    acc: dict = {}
    for w, c in bch_series(order).items():
        _add_into(acc, value(w), c)
    return FreeLieElement(_prune(acc), a.s, a.max_degree, _checked=True)


def star_commutator(a: FreeLieElement, b: FreeLieElement, order: int | None = None) -> FreeLieElement:
    """Group commutator ``a * b * (-a) * (-b)`` in the truncated BCH group."""
    ab = bch(a, b, order)
    return bch(bch(ab, -a, order), -b, order)


# ---------------------------------------------------------------------------
# Associative expansion (used to convert to and from tensor series)
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def expand_basis(word: LyndonWord) -> Mapping[Word, int]:
    """Expansion of ``P_word`` as a noncommutative polynomial (``[a,b] = ab - ba``)."""
    if len(word) == 1:
        return MappingProxyType({word: 1})
    u, v = standard_factorization(word)
    eu, ev = expand_basis(u), expand_basis(v)
    acc: dict = defaultdict(int)
    for x, cx in eu.items():
        for y, cy in ev.items():
            acc[x + y] += cx * cy
            acc[y + x] -= cx * cy
    return MappingProxyType({w: c for w, c in acc.items() if c})


def to_associative(a: FreeLieElement) -> dict[Word, Fraction]:
    acc: dict = {}
    for w, c in a.terms.items():
        _add_into(acc, expand_basis(w), c)
    return _prune(acc)


def from_associative(poly: Mapping[Word, Coefficient], s: int, max_degree: int) -> FreeLieElement:
    """Write a Lie polynomial given in the word basis in the Lyndon basis.

    Uses triangularity: the smallest word in the support of ``P_w`` is ``w``
    itself, with coefficient 1.  Raises ``UsageError`` if ``poly`` is not a
    Lie polynomial.
    """
    rest = _prune({tuple(w): Fraction(c) for w, c in poly.items()})
    out: dict[LyndonWord, Fraction] = {}
    while rest:
        w = min(rest)
        if not is_lyndon(w):
            raise UsageError(f"not a Lie polynomial: leading word {w} is not Lyndon")
        c = rest[w]
        out[w] = c
        _add_into(rest, expand_basis(w), -c)
        rest = _prune(rest)
    return FreeLieElement(out, s, max_degree, _checked=True)


# ---------------------------------------------------------------------------
# Text form
# ---------------------------------------------------------------------------

def _format_coefficient(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_element(a: FreeLieElement) -> str:
    """Stable text form, e.g. ``x1 + x2 + 1/2 [x1,x2]``; parsed back by :func:`parse_element`."""
    if not a.terms:
        return "0"
    pieces = []
    for i, (w, c) in enumerate(a.terms.items()):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = bracket_string(w) if mag == 1 else f"{_format_coefficient(mag)} {bracket_string(w)}"
        if i == 0:
            pieces.append(body if sign == "+" else f"-{body}")
        else:
            pieces.append(f"{sign} {body}")
    return " ".join(pieces)


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<gen>x\d+)|(?P<sym>[\[\],+\-*]))")


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise UsageError(f"cannot parse {text[pos:pos + 10]!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
        pos = m.end()
    return tokens


def parse_element(text: str, s: int | None = None, max_degree: int | None = None) -> FreeLieElement:
    """Parse the text form written by :func:`format_element`.

    Any bracketing of generators is accepted and reduced to normal form, so
    ``"[x2,x1]"`` parses to ``-[x1,x2]``.
    """
    tokens = _tokenize(text)
    if tokens == [("num", "0")]:
        return FreeLieElement.zero(s or 1, max_degree or 1)

    # pass 1: syntax tree
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else (None, None)

    def take(expected=None):
        nonlocal pos
        tok = peek()
        if tok[0] is None or (expected is not None and tok[1] != expected):
            raise UsageError(f"unexpected token {tok[1]!r} in {text!r}")
        pos += 1
        return tok

    def bracket_expr():
        kind, val = peek()
        if kind == "gen":
            take()
            return int(val[1:])
        take("[")
        left = bracket_expr()
        take(",")
        right = bracket_expr()
        take("]")
        return (left, right)

    terms = []
    first = True
    while pos < len(tokens):
        sign = 1
        kind, val = peek()
        if val in ("+", "-"):
            take()
            sign = -1 if val == "-" else 1
        elif not first:
            raise UsageError(f"expected '+' or '-' in {text!r}")
        coef = Fraction(1)
        if peek()[0] == "num":
            coef = Fraction(take()[1])
            if peek()[1] == "*":
                take()
        terms.append((sign * coef, bracket_expr()))
        first = False

    def degree(tree) -> int:
        return 1 if isinstance(tree, int) else degree(tree[0]) + degree(tree[1])

    def max_index(tree) -> int:
        return tree if isinstance(tree, int) else max(max_index(tree[0]), max_index(tree[1]))

    s = s or max(max_index(t) for _, t in terms)
    max_degree = max_degree or max(degree(t) for _, t in terms)

    def evaluate(tree) -> FreeLieElement:
        if isinstance(tree, int):
            return FreeLieElement.generator(tree, s, max_degree)
        return bracket(evaluate(tree[0]), evaluate(tree[1]))

    total = FreeLieElement.zero(s, max_degree)
    for coef, tree in terms:
        total = total + coef * evaluate(tree)
    return total
