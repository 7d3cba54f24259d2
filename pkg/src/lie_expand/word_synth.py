"""Group words whose word map approximates ``exp(C(x1 + ... + xs))`` to a given order.

Starting from ``g1 g2 ... gs`` the construction raises the order one degree at
a time.  At each step the degree-``m`` defect of the current word is written
as a rational combination of repeated brackets ``[x_i1,[x_i2,...]]``; the scale
``C`` is multiplied by the least integer that makes every coefficient an
integer multiple of ``C^-m``, and one group commutator per bracket is
appended.  Since brackets are multilinear, the integer multiplicity
``c C^m`` is spread over the letters of the commutator as powers
``[g_i1^a1,[g_i2^a2,...]]`` (each ``a_j`` about ``C``); a negative coefficient
uses the reversed outer commutator.

Only the certificate (the valuation of the symbolic defect) is contractual;
the words themselves are not unique.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import exact_linalg
from .errors import ResourceLimitError, UsageError
from .free_lie import (
    FreeLieElement,
    _right_normed,
    standard_factorization,
    lyndon_basis,
    valuation,
)
from .tensor_series import (
    TensorSeries,
    lie_exp,
    series_log,
    single_generator_scale,
)

DEFAULT_MAX_WORD_LENGTH = 10**6
MAX_SYNTH_ORDER = 8

Letter = tuple[int, int]


@dataclass(frozen=True)
class GroupWord:
    """Freely reduced word in the free group on ``s`` letters; ``(i, +1)`` is ``g_i``."""

    letters: tuple[Letter, ...]
    s: int

    def __post_init__(self):
        letters = tuple((int(i), int(e)) for i, e in self.letters)
        for i, e in letters:
            if not 1 <= i <= self.s or e not in (1, -1):
                raise UsageError(f"bad letter g{i}^{e} for alphabet size {self.s}")
        object.__setattr__(self, "letters", _free_reduce(letters))

    @classmethod
    def identity(cls, s: int) -> GroupWord:
        return cls((), s)

    @classmethod
    def from_runs(cls, runs: Iterable[tuple[int, int]], s: int) -> GroupWord:
        """Build from ``(generator, signed power)`` pairs."""
        letters: list[Letter] = []
        for i, k in runs:
            e = 1 if k > 0 else -1
            letters.extend([(i, e)] * abs(k))
        return cls(tuple(letters), s)

    def __len__(self) -> int:
        return len(self.letters)

    def __mul__(self, other: GroupWord) -> GroupWord:
        if self.s != other.s:
            raise UsageError("words over different alphabets")
        return GroupWord(self.letters + other.letters, self.s)

    def inverse(self) -> GroupWord:
        return GroupWord(tuple((i, -e) for i, e in reversed(self.letters)), self.s)

    def power_letters(self, k: int) -> GroupWord:
        """Substitute ``g_i -> g_i^k`` for every generator (``k >= 1``)."""
        return GroupWord(tuple(l for l in self.letters for _ in range(k)), self.s)

    def runs(self) -> list[tuple[int, int]]:
        """Run-length form: maximal blocks of one generator as ``(i, signed power)``."""
        out: list[list[int]] = []
        for i, e in self.letters:
            if out and out[-1][0] == i:
                out[-1][1] += e
            else:
                out.append([i, e])
        return [(i, k) for i, k in out if k]

    def generators_used(self) -> set[int]:
        return {i for i, _ in self.letters}

    def __str__(self) -> str:
        if not self.letters:
            return "1"
        return " ".join(f"g{i}" if e == 1 else f"g{i}^-1" for i, e in self.letters)

    def compact(self) -> str:
        """Run-length text form, e.g. ``g1^2 g2^-3``."""
        if not self.letters:
            return "1"
        return " ".join(f"g{i}" if k == 1 else f"g{i}^{k}" for i, k in self.runs())

    @classmethod
    def parse(cls, text: str, s: int) -> GroupWord:
        runs = []
        for tok in text.split():
            if tok == "1":
                continue
            base, _, power = tok.partition("^")
            if not base.startswith("g"):
                raise UsageError(f"bad letter {tok!r}")
            runs.append((int(base[1:]), int(power) if power else 1))
        return cls.from_runs(runs, s)


def _free_reduce(letters: Sequence[Letter]) -> tuple[Letter, ...]:
    stack: list[Letter] = []
    for i, e in letters:
        if stack and stack[-1][0] == i and stack[-1][1] == -e:
            stack.pop()
        else:
            stack.append((i, e))
    return tuple(stack)


def group_commutator(u: GroupWord, v: GroupWord) -> GroupWord:
    """``u v u^-1 v^-1``."""
    return u * v * u.inverse() * v.inverse()


def commutator_word(indices: Sequence[int], s: int | None = None) -> GroupWord:
    """Repeated group commutator ``[g_i1,[g_i2,[...,g_ik]]]``."""
    indices = tuple(indices)
    if not indices:
        raise UsageError("commutator_word needs at least one index")
    s = s or max(indices)
    word = GroupWord(((indices[-1], 1),), s)
    for i in reversed(indices[:-1]):
        word = group_commutator(GroupWord(((i, 1),), s), word)
    return word


def powered_commutator_word(indices: Sequence[int], powers: Sequence[int], s: int, sign: int = 1) -> GroupWord:
    """``[g_i1^a1,[g_i2^a2,[...]]]``, whose log starts with ``a1*a2*...*ak [x_i1,[x_i2,...]]``.

    ``sign=-1`` swaps the outermost commutator, negating the leading bracket.
    """
    if len(indices) < 2 or len(powers) != len(indices) or any(a < 1 for a in powers):
        raise UsageError("need >= 2 indices and one positive power per index")
    blocks = [GroupWord.from_runs([(i, a)], s) for i, a in zip(indices, powers)]
    word = blocks[-1]
    for b in reversed(blocks[1:-1]):
        word = group_commutator(b, word)
    return group_commutator(blocks[0], word) if sign > 0 else group_commutator(word, blocks[0])


def _split_multiplicity(c: Fraction, C: int, degree: int) -> list[int]:
    """Positive powers ``a_j`` with ``prod a_j = |c| C^degree``, each close to ``C``."""
    q = c.denominator
    powers = []
    for _ in range(degree):
        d = math.gcd(C, q)
        q //= d
        powers.append(C // d)
    if q != 1:
        raise AssertionError("scale does not clear the denominator")
    powers[0] *= abs(c.numerator)
    return powers


# ---------------------------------------------------------------------------
# Symbolic evaluation
# ---------------------------------------------------------------------------

def _normalize_substitution(substitution, s_word: int) -> dict[int, FreeLieElement]:
    if isinstance(substitution, Mapping):
        return dict(substitution)
    return {i + 1: a for i, a in enumerate(substitution)}


def word_log(w: GroupWord, substitution, order: int) -> FreeLieElement:
    """``log(w(exp a_1, ..., exp a_s))`` truncated at degree ``order``.

    ``substitution`` maps generator index (1-based) to a FreeLieElement, or is
    a sequence ``[a_1, ..., a_s]``.  The product is evaluated in the group of
    group-like tensor series, with runs ``g_i^k`` handled as ``exp(k a_i)``.
    """
    subs = _normalize_substitution(substitution, w.s)
    missing = w.generators_used() - set(subs)
    if missing:
        raise UsageError(f"no substitution for generators {sorted(missing)}")
    if not subs:
        raise UsageError("empty substitution")
    sample = next(iter(subs.values()))
    s, max_degree = sample.s, sample.max_degree
    if order > max_degree:
        raise UsageError(f"order {order} exceeds the truncation degree {max_degree}")
    for a in subs.values():
        sample._check_compatible(a)

    acc = TensorSeries.one(s, order)
    general: dict[tuple[int, int], TensorSeries] = {}
    for i, k in w.runs():
        simple = single_generator_scale(subs[i])
        if simple is not None:
            acc = acc.mul_letter_exp(simple[0], simple[1] * k)
            continue
        if (i, k) not in general:
            general[(i, k)] = lie_exp(subs[i] * k, order)
        acc = acc * general[(i, k)]
    return series_log(acc).to_lie(max_degree)


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    """Outcome of re-deriving the symbolic defect of an approximant."""

    valuation: int | float  # math.inf when the defect vanishes up to the truncation order
    order: int
    truncation: int

    @property
    def certified(self) -> bool:
        return self.valuation >= self.order

    @property
    def zero_defect(self) -> bool:
        return self.valuation == math.inf

    def describe(self) -> str:
        if self.zero_defect:
            return f"zero defect up to degree {self.truncation}"
        return f"defect valuation {self.valuation}"


@dataclass(frozen=True)
class SynthesizedApproximant:
    C: int
    word: GroupWord
    order: int
    s: int
    steps: tuple[dict, ...] = field(default=(), compare=False)

    def certify(self) -> Certificate:
        return certify(self)


@functools.lru_cache(maxsize=None)
def _right_normed_decomposition(s: int, degree: int):
    """Pick repeated-bracket index sequences spanning degree ``degree`` and the inverse change of basis."""
    basis = lyndon_basis(s, degree)[degree]
    position = {w: r for r, w in enumerate(basis)}
    sequences = list(product(range(1, s + 1), repeat=degree))
    columns = []
    for seq in sequences:
        col = [Fraction(0)] * len(basis)
        for w, c in _right_normed(seq).items():
            col[position[w]] = c
        columns.append(col)
    matrix = exact_linalg.transpose(columns)
    _, pivots = exact_linalg.rref(matrix)
    chosen = [sequences[j] for j in pivots]
    square = [[row[j] for j in pivots] for row in matrix]
    return tuple(chosen), exact_linalg.inverse(square), tuple(basis)


def repeated_bracket_coefficients(f: FreeLieElement, degree: int) -> list[tuple[tuple[int, ...], Fraction]]:
    """Write a homogeneous element as ``sum c_j [x_{j1},[x_{j2},...]]`` (exact)."""
    chosen, inv, basis = _right_normed_decomposition(f.s, degree)
    coords = [f.coefficient(w) for w in basis]
    coeffs = exact_linalg.matvec(inv, coords)
    return [(seq, c) for seq, c in zip(chosen, coeffs) if c != 0]


def _min_root(n: int, power: int) -> int:
    """Least ``m >= 1`` with ``n | m**power``."""
    m, p = 1, 2
    while p * p <= n:
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        if e:
            m *= p ** (-(-e // power))
        p += 1
    return m * n if n > 1 else m


def _scale_multiplier(coeffs: Iterable[Fraction], C: int, degree: int) -> int:
    M = 1
    for c in coeffs:
        den = (c * C**degree).denominator
        M = math.lcm(M, _min_root(den, degree))
    return M


def synthesize(s: int, order: int, *, max_length: int = DEFAULT_MAX_WORD_LENGTH) -> SynthesizedApproximant:
    """Integer ``C`` and word ``w`` with ``log w(x/C) = x_1 + ... + x_s + O(deg >= order)``."""
    if s < 1:
        raise UsageError("s must be >= 1")
    if order < 2:
        raise UsageError("order must be >= 2")
    if order > MAX_SYNTH_ORDER:
        raise UsageError(f"order {order} exceeds the supported maximum {MAX_SYNTH_ORDER}")

    word = GroupWord.from_runs([(i, 1) for i in range(1, s + 1)], s)
    C = 1
    steps = []
    gens = FreeLieElement.generators(s, order)
    target = sum(gens[1:], gens[0])
    for m in range(2, order):
        subs = [g / C for g in gens]
        defect = (target - word_log(word, subs, m)).homogeneous(m)
        if not defect:
            steps.append({"degree": m, "multiplier": 1, "brackets": 0})
            continue
        coeffs = repeated_bracket_coefficients(defect, m)
        M = _scale_multiplier((c for _, c in coeffs), C, m)
        if M > 1:
            word = word.power_letters(M)
            C *= M
        for seq, c in coeffs:
            powers = _split_multiplicity(c, C, m)
            word = word * powered_commutator_word(seq, powers, s, sign=1 if c > 0 else -1)
            if len(word) > max_length:
                raise ResourceLimitError(
                    f"word length {len(word)} exceeds the cap {max_length} at degree {m}"
                )
        steps.append({"degree": m, "multiplier": M, "brackets": len(coeffs)})
    return SynthesizedApproximant(C=C, word=word, order=order, s=s, steps=tuple(steps))


def certify(a: SynthesizedApproximant, truncation: int | None = None) -> Certificate:
    """Recompute the valuation of ``log w(x/C) - (x_1 + ... + x_s)`` in exact arithmetic."""
    truncation = truncation or a.order
    gens = FreeLieElement.generators(a.s, truncation)
    subs = [g / a.C for g in gens]
    defect = word_log(a.word, subs, truncation) - sum(gens[1:], gens[0])
    return Certificate(valuation=valuation(defect), order=a.order, truncation=truncation)


# ---------------------------------------------------------------------------
# Numerical evaluation in a matrix group
# ---------------------------------------------------------------------------

def evaluate_word(word: GroupWord, vectors: Sequence[np.ndarray], backend) -> np.ndarray:
    """``w(exp x_1, ..., exp x_s)`` in ``backend``; runs ``g_i^k`` are computed as ``exp(k x_i)``."""
    g = backend.identity()
    cache: dict[tuple[int, int], np.ndarray] = {}
    for i, k in word.runs():
        if (i, k) not in cache:
            cache[(i, k)] = backend.exp_unchecked(k * np.asarray(vectors[i - 1], dtype=float))
        g = backend.mul(g, cache[(i, k)])
    return g


def approximation_error(approx: SynthesizedApproximant, vectors: Sequence[np.ndarray], backend) -> float:
    """``d(exp(C sum x_i), w(exp x_1, ..., exp x_s))`` in the backend's chart metric."""
    target = backend.exp_unchecked(approx.C * np.sum(np.asarray(vectors, dtype=float), axis=0))
    value = evaluate_word(approx.word, vectors, backend)
    return float(backend.dist(target, value))


def evaluate_lie(a: FreeLieElement, vectors: Sequence[np.ndarray], backend) -> np.ndarray:
    """Numeric value of a Lie polynomial with ``x_i -> vectors[i-1]`` in the backend's algebra."""
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    if len(vecs) < a.s:
        raise UsageError(f"need {a.s} vectors, got {len(vecs)}")
    cache: dict = {}

    def value(w):
        if w not in cache:
            if len(w) == 1:
                cache[w] = vecs[w[0] - 1]
            else:
                u, v = standard_factorization(w)
                cache[w] = backend.bracket(value(u), value(v))
        return cache[w]

    out = np.zeros(backend.dim)
    for w, c in a.terms.items():
        out = out + float(c) * value(w)
    return out
