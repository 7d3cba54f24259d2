"""Truncated tensor-algebra series with exact rational coefficients.

A series is stored level by level: level ``d`` is a dense object array of
shape ``(s,) * d`` whose entry at index ``(i1, ..., id)`` (0-based) is the
coefficient of the word ``x_{i1+1} ... x_{id+1}``.  Coefficients are
``gmpy2.mpq``; they are converted to ``Fraction`` at the boundary.

Group-like series (exponentials of Lie elements) multiply like the group they
represent, which makes evaluating long words much cheaper than folding the BCH
product letter by letter.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

import gmpy2
import numpy as np

from .free_lie import FreeLieElement, Word, from_associative, to_associative

mpq = gmpy2.mpq
_ZERO = mpq(0)


def _q(c) -> mpq:
    if isinstance(c, Fraction):
        return mpq(c.numerator, c.denominator)
    return mpq(c)


def _level(x) -> np.ndarray:
    # object-array arithmetic on 0-d arrays returns bare scalars
    if isinstance(x, np.ndarray):
        return x
    out = np.empty((), dtype=object)
    out[()] = x
    return out


def _zeros(s: int, d: int) -> np.ndarray:
    arr = np.empty((s,) * d, dtype=object)
    arr.fill(_ZERO)
    return arr


class TensorSeries:
    """Element of the tensor algebra on ``s`` letters modulo words longer than ``depth``."""

    __slots__ = ("s", "depth", "levels")

    def __init__(self, s: int, depth: int, levels: list[np.ndarray]):
        self.s = s
        self.depth = depth
        self.levels = levels

    @classmethod
    def zero(cls, s: int, depth: int) -> TensorSeries:
        return cls(s, depth, [_zeros(s, d) for d in range(depth + 1)])

    @classmethod
    def one(cls, s: int, depth: int) -> TensorSeries:
        out = cls.zero(s, depth)
        out.levels[0][()] = mpq(1)
        return out

    @classmethod
    def from_polynomial(cls, poly: Mapping[Word, object], s: int, depth: int) -> TensorSeries:
        out = cls.zero(s, depth)
        for w, c in poly.items():
            if len(w) <= depth:
                idx = tuple(i - 1 for i in w)
                out.levels[len(w)][idx] += _q(c)
        return out

    @classmethod
    def from_lie(cls, a: FreeLieElement, depth: int) -> TensorSeries:
        return cls.from_polynomial(to_associative(a), a.s, depth)

    def copy(self) -> TensorSeries:
        return TensorSeries(self.s, self.depth, [lvl.copy() for lvl in self.levels])

    def to_polynomial(self) -> dict[Word, Fraction]:
        out: dict[Word, Fraction] = {}
        for d, lvl in enumerate(self.levels):
            if d == 0:
                c = lvl[()]
                if c != 0:
                    out[()] = Fraction(int(c.numerator), int(c.denominator))
                continue
            for idx in zip(*np.nonzero(lvl != _ZERO)):
                c = lvl[idx]
                out[tuple(int(i) + 1 for i in idx)] = Fraction(int(c.numerator), int(c.denominator))
        return out

    def to_lie(self, max_degree: int | None = None) -> FreeLieElement:
        """Interpret a Lie polynomial series as a :class:`FreeLieElement`."""
        poly = self.to_polynomial()
        poly.pop((), None)
        return from_associative(poly, self.s, max_degree or self.depth)

    # algebra -----------------------------------------------------------
    def __add__(self, other: TensorSeries) -> TensorSeries:
        return TensorSeries(self.s, self.depth, [_level(a + b) for a, b in zip(self.levels, other.levels)])

    def __sub__(self, other: TensorSeries) -> TensorSeries:
        return TensorSeries(self.s, self.depth, [_level(a - b) for a, b in zip(self.levels, other.levels)])

    def scale(self, c) -> TensorSeries:
        c = _q(c)
        return TensorSeries(self.s, self.depth, [_level(lvl * c) for lvl in self.levels])

    def __mul__(self, other: TensorSeries) -> TensorSeries:
        out = TensorSeries.zero(self.s, self.depth)
        for i, a in enumerate(self.levels):
            if not np.any(a != _ZERO):
                continue
            for j in range(self.depth - i + 1):
                b = other.levels[j]
                out.levels[i + j] = _level(out.levels[i + j] + np.multiply.outer(a, b))
        return out

    def mul_letter_exp(self, letter: int, scale) -> TensorSeries:
        """Right-multiply by ``exp(scale * x_letter)``; ``letter`` is 1-based."""
        i = letter - 1
        lam = _q(scale)
        powers = [mpq(1)]
        for m in range(1, self.depth + 1):
            powers.append(powers[-1] * lam / m)
        out = [lvl.copy() for lvl in self.levels]
        for d in range(1, self.depth + 1):
            target = out[d]
            for m in range(1, d + 1):
                src = self.levels[d - m]
                index = (slice(None),) * (d - m) + (i,) * m
                target[index] = target[index] + src * powers[m]
        return TensorSeries(self.s, self.depth, out)

    def constant(self):
        return self.levels[0][()]


def series_exp(x: TensorSeries) -> TensorSeries:
    """exp of a series with zero constant term."""
    out = TensorSeries.one(x.s, x.depth)
    term = TensorSeries.one(x.s, x.depth)
    for n in range(1, x.depth + 1):
        term = (term * x).scale(Fraction(1, n))
        out = out + term
    return out


def series_log(g: TensorSeries) -> TensorSeries:
    """log of a series with constant term 1."""
    one = TensorSeries.one(g.s, g.depth)
    y = g - one
    out = TensorSeries.zero(g.s, g.depth)
    power = one
    for n in range(1, g.depth + 1):
        power = power * y
        out = out + power.scale(Fraction((-1) ** (n + 1), n))
    return out


def lie_exp(a: FreeLieElement, depth: int) -> TensorSeries:
    return series_exp(TensorSeries.from_lie(a, depth))


def single_generator_scale(a: FreeLieElement) -> tuple[int, Fraction] | None:
    """If ``a = c * x_i`` return ``(i, c)``, else None."""
    if len(a.terms) == 1:
        (w, c), = a.terms.items()
        if len(w) == 1:
            return w[0], c
    return None
