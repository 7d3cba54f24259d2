from __future__ import annotations

import itertools
import math
from collections import defaultdict
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lie_expand.errors import UsageError
from lie_expand.free_lie import (
    FreeLieElement,
    bch,
    bracket,
    format_element,
    from_associative,
    lyndon_basis,
    parse_element,
    right_normed_bracket,
    star_inverse,
    structure_constants,
    to_associative,
    valuation,
    witt_dimension,
)


# --- oracles ---------------------------------------------------------------

def brute_force_lyndon(s: int, n: int) -> list[tuple[int, ...]]:
    out = []
    for w in itertools.product(range(1, s + 1), repeat=n):
        if all(w < w[k:] + w[:k] for k in range(1, n)):
            out.append(w)
    return out


def poly_mul(p, q, limit):
    out = defaultdict(Fraction)
    for a, ca in p.items():
        for b, cb in q.items():
            if len(a) + len(b) <= limit:
                out[a + b] += ca * cb
    return {w: c for w, c in out.items() if c}


def poly_add(p, q, scale=1):
    out = defaultdict(Fraction, p)
    for w, c in q.items():
        out[w] += scale * c
    return {w: c for w, c in out.items() if c}


def dynkin_oracle(order: int) -> dict:
    """log(e^x e^y) from Dynkin's formula, computed in the free associative algebra.

    Each term x^r1 y^s1 ... x^rn y^sn contributes its right-nested bracket,
    divided by the total degree, with weight (-1)^(n-1) / (n r! s! ...).
    """
    X, Y = {(1,): Fraction(1)}, {(2,): Fraction(1)}

    def lie_bracket(p, q):
        return poly_add(poly_mul(p, q, order), poly_mul(q, p, order), -1)

    def nested(letters):
        acc = letters[-1]
        for a in reversed(letters[:-1]):
            acc = lie_bracket(a, acc)
        return acc

    total = {}
    for n in range(1, order + 1):
        pairs = [(r, s) for r in range(order + 1) for s in range(order + 1) if 0 < r + s <= order]
        for combo in itertools.product(pairs, repeat=n):
            deg = sum(r + s for r, s in combo)
            if deg > order:
                continue
            letters = []
            denom = 1
            for r, s in combo:
                letters += [X] * r + [Y] * s
                denom *= math.factorial(r) * math.factorial(s)
            weight = Fraction((-1) ** (n - 1), n * denom * deg)
            total = poly_add(total, nested(letters), weight)
    return total


elements = st.builds(
    lambda coeffs: FreeLieElement(
        {w: c for w, c in zip([w for ws in lyndon_basis(2, 4).values() for w in ws], coeffs)}, 2, 4
    ),
    st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=4), min_size=8, max_size=8),
)


# --- lyndon basis ----------------------------------------------------------

@pytest.mark.parametrize("s", [1, 2, 3])
@pytest.mark.parametrize("n", range(1, 9))
def test_lyndon_counts_match_rotation_oracle(s, n):
    basis = lyndon_basis(s, n)
    assert sorted(basis[n]) == brute_force_lyndon(s, n)
    assert len(basis[n]) == witt_dimension(s, n)


def test_lyndon_small_examples():
    assert lyndon_basis(2, 1) == {1: [(1,), (2,)]}
    assert len(lyndon_basis(2, 2)[2]) == 1
    assert len(lyndon_basis(2, 3)[3]) == 2


@pytest.mark.parametrize("s,l", [(0, 3), (2, 0)])
def test_lyndon_rejects_degenerate(s, l):
    with pytest.raises(UsageError):
        lyndon_basis(s, l)


# --- bracket ---------------------------------------------------------------

def test_bracket_basics():
    x1, x2, x3 = FreeLieElement.generators(3, 3)
    assert not bracket(x1, x1)
    assert bracket(x1, x2) == FreeLieElement({(1, 2): 1}, 3, 3)
    jac = bracket(x1, bracket(x2, x3)) + bracket(x2, bracket(x3, x1)) + bracket(x3, bracket(x1, x2))
    assert not jac


def test_bracket_mismatch_is_usage_error():
    with pytest.raises(UsageError):
        bracket(FreeLieElement.generator(1, 2, 3), FreeLieElement.generator(1, 3, 3))
    with pytest.raises(UsageError):
        bracket(FreeLieElement.generator(1, 2, 3), FreeLieElement.generator(1, 2, 4))


def test_truncation_drops_high_degree_terms():
    x, y = FreeLieElement.generators(2, 2)
    assert not bracket(x, bracket(x, y))


@settings(max_examples=40, deadline=None)
@given(elements, elements)
def test_antisymmetry(a, b):
    assert not (bracket(a, b) + bracket(b, a))


def test_jacobi_on_basis_triples():
    basis = [FreeLieElement.basis_element(w, 2, 6) for ws in lyndon_basis(2, 4).values() for w in ws]
    for a, b, c in itertools.product(basis, repeat=3):
        if sum(len(next(iter(e.terms))) for e in (a, b, c)) > 6:
            continue
        total = bracket(a, bracket(b, c)) + bracket(b, bracket(c, a)) + bracket(c, bracket(a, b))
        assert not total


def test_structure_constants_match_associative_expansion():
    table = structure_constants(2, 5)
    for (u, v), terms in table.items():
        pu, pv = FreeLieElement.basis_element(u, 2, 5), FreeLieElement.basis_element(v, 2, 5)
        lhs = to_associative(FreeLieElement(dict(terms), 2, 5))
        au, av = to_associative(pu), to_associative(pv)
        rhs = poly_add(poly_mul(au, av, 5), poly_mul(av, au, 5), -1)
        assert lhs == rhs


def test_associative_round_trip():
    x, y, z = FreeLieElement.generators(3, 5)
    a = bracket(x, bracket(y, z)) * Fraction(2, 3) + bracket(bracket(x, y), bracket(x, z))
    assert from_associative(to_associative(a), 3, 5) == a


# --- BCH -------------------------------------------------------------------

def test_bch_order_two():
    x, y = FreeLieElement.generators(2, 2)
    assert bch(x, y, 2) == x + y + bracket(x, y) / 2


def test_bch_order_three_matches_dynkin_oracle():
    x, y = FreeLieElement.generators(2, 3)
    z = bch(x, y, 3)
    assert to_associative(z) == dynkin_oracle(3)
    deg3 = z.homogeneous(3)
    expected = bracket(x, bracket(x, y)) / 12 + bracket(y, bracket(y, x)) / 12
    assert deg3 == expected


def test_bch_order_four_matches_dynkin_oracle():
    x, y = FreeLieElement.generators(2, 4)
    assert to_associative(bch(x, y, 4)) == dynkin_oracle(4)


def test_bch_identity_and_inverse():
    x, y = FreeLieElement.generators(2, 5)
    zero = FreeLieElement.zero(2, 5)
    assert bch(x, zero, 5) == x
    assert star_inverse(x) == -x
    assert not bch(x, -x, 5)
    z = bch(x, y, 4)
    assert not bch(z, star_inverse(z), 4).truncate(4)


def test_bch_order_above_truncation_rejected():
    x, y = FreeLieElement.generators(2, 3)
    with pytest.raises(UsageError):
        bch(x, y, 4)


@settings(max_examples=15, deadline=None)
@given(elements, elements, elements)
def test_bch_associative(a, b, c):
    assert bch(bch(a, b), c) == bch(a, bch(b, c))


# --- valuation -------------------------------------------------------------

def test_valuation():
    x, y = FreeLieElement.generators(2, 3)
    assert valuation(x + bracket(x, y) / 2) == 1
    assert valuation(FreeLieElement.zero(2, 3)) == math.inf
    assert valuation(bch(x, y, 3) - x - y) == 2


def test_right_normed_bracket_is_nested():
    x1, x2 = FreeLieElement.generators(2, 4)
    assert right_normed_bracket((1, 1, 2), 2, 4) == bracket(x1, bracket(x1, x2))
    assert right_normed_bracket((2, 1, 2, 2), 2, 4) == bracket(x2, bracket(x1, bracket(x2, x2)))


# --- text form -------------------------------------------------------------

def test_format_golden():
    x, y = FreeLieElement.generators(2, 3)
    assert format_element(bch(x, y, 3)) == "x1 + x2 + 1/2 [x1,x2] + 1/12 [x1,[x1,x2]] + 1/12 [[x1,x2],x2]"
    assert format_element(FreeLieElement.zero(2, 3)) == "0"


def test_parse_round_trip():
    x, y = FreeLieElement.generators(2, 5)
    z = bch(x, y, 5)
    assert parse_element(format_element(z), 2, 5) == z
    assert parse_element("1/12 [x1,[x1,x2]] - 2 x2", 2, 3) == bracket(x, bracket(x, y)).with_max_degree(3) / 12 - FreeLieElement.generator(2, 2, 3) * 2
