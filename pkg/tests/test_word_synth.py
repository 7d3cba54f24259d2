from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lie_expand.errors import ResourceLimitError, UsageError
from lie_expand.free_lie import FreeLieElement, bch, bracket, right_normed_bracket, valuation
from lie_expand.groups import get_backend
from lie_expand.word_synth import (
    GroupWord,
    approximation_error,
    certify,
    commutator_word,
    evaluate_lie,
    evaluate_word,
    group_commutator,
    powered_commutator_word,
    repeated_bracket_coefficients,
    synthesize,
    word_log,
)

words = st.lists(
    st.tuples(st.integers(1, 2), st.integers(-3, 3).filter(bool)), max_size=6
).map(lambda runs: GroupWord.from_runs(runs, 2))


# --- words -----------------------------------------------------------------

def test_free_reduction_and_inverse():
    w = GroupWord.parse("g1 g2 g2^-1 g1", 2)
    assert w.runs() == [(1, 2)]
    u = GroupWord.parse("g1^2 g2^-1", 2)
    assert len(u * u.inverse()) == 0
    assert str(GroupWord.identity(2)) == "1"


def test_parse_round_trip():
    w = GroupWord.from_runs([(1, 2), (2, -3), (1, 1)], 2)
    assert GroupWord.parse(str(w), 2) == w
    assert GroupWord.parse(w.compact(), 2) == w


def test_parse_rejects_bad_tokens():
    with pytest.raises(UsageError):
        GroupWord.parse("g3", 2)
    with pytest.raises(UsageError):
        GroupWord.parse("h1", 2)


def test_commutator_word_shape():
    assert commutator_word([1, 2]) == GroupWord.parse("g1 g2 g1^-1 g2^-1", 2)
    w = commutator_word([1, 1, 2])
    inner = commutator_word([1, 2])
    assert w == group_commutator(GroupWord.parse("g1", 2), inner)


def test_power_letters():
    w = GroupWord.parse("g1 g2^-1", 2).power_letters(3)
    assert w.runs() == [(1, 3), (2, -3)]


# --- word_log --------------------------------------------------------------

def test_word_log_single_product_is_bch():
    x, y = FreeLieElement.generators(2, 5)
    assert word_log(GroupWord.parse("g1 g2", 2), [x, y], 5) == bch(x, y, 5)


def test_word_log_of_commutator_leads_with_bracket():
    x, y = FreeLieElement.generators(2, 4)
    z = word_log(commutator_word([1, 2]), [x, y], 4)
    assert z.homogeneous(2) == bracket(x, y)
    assert valuation(z) == 2


def test_word_log_with_general_substitution():
    x, y = FreeLieElement.generators(2, 4)
    a = x + bracket(x, y)
    w = GroupWord.parse("g1 g2 g1^-1", 2)
    direct = bch(bch(a, y, 4), -a, 4)
    assert word_log(w, [a, y], 4) == direct


@settings(max_examples=30, deadline=None)
@given(words, words)
def test_word_log_is_a_homomorphism(u, v):
    x, y = FreeLieElement.generators(2, 4)
    assert word_log(u * v, [x, y], 4) == bch(word_log(u, [x, y], 4), word_log(v, [x, y], 4), 4)
    assert word_log(u.inverse(), [x, y], 4) == -word_log(u, [x, y], 4)


def test_word_log_missing_substitution():
    x, = FreeLieElement.generators(1, 3)
    with pytest.raises(UsageError):
        word_log(GroupWord.parse("g1 g2", 2), [x], 3)


def test_powered_commutator_multiplicity():
    x, y = FreeLieElement.generators(2, 3)
    w = powered_commutator_word([1, 2], [2, 3], 2)
    assert word_log(w, [x, y], 3).homogeneous(2) == bracket(x, y) * 6
    w = powered_commutator_word([1, 2], [2, 3], 2, sign=-1)
    assert word_log(w, [x, y], 3).homogeneous(2) == bracket(x, y) * -6


def test_repeated_bracket_coefficients_reconstruct():
    x, y = FreeLieElement.generators(2, 4)
    f = (bracket(x, bracket(x, bracket(x, y))) * Fraction(1, 3)
         - bracket(bracket(x, y), bracket(x, bracket(x, y))).truncate(4)
         + bracket(y, bracket(x, bracket(x, y))) / 7)
    f = f.homogeneous(4)
    coeffs = repeated_bracket_coefficients(f, 4)
    rebuilt = sum((right_normed_bracket(seq, 2, 4) * c for seq, c in coeffs), FreeLieElement.zero(2, 4))
    assert rebuilt == f


# --- synthesis -------------------------------------------------------------

def test_order_three_word_from_the_construction():
    a = synthesize(2, 3)
    assert a.C == 2
    assert a.word == GroupWord.parse("g1 g1 g2 g2 g2 g2 g1 g2^-1 g2^-1 g1^-1", 2)


@pytest.mark.parametrize("s,order", [(1, 4), (2, 2), (2, 3), (2, 4), (3, 3), (3, 4)])
def test_synthesize_certifies(s, order):
    a = synthesize(s, order)
    cert = certify(a)
    assert cert.certified
    assert cert.valuation >= order


def test_synthesize_is_deterministic():
    assert synthesize(2, 4) == synthesize(2, 4)


def test_certificate_detects_a_wrong_word():
    a = synthesize(2, 4)
    broken = type(a)(C=a.C, word=a.word * GroupWord.parse("g1 g2 g1^-1 g2^-1", 2), order=4, s=2)
    assert not certify(broken).certified


def test_single_generator_has_zero_defect():
    cert = certify(synthesize(1, 5))
    assert cert.zero_defect


def test_synthesize_rejects_bad_input():
    for s, order in [(0, 3), (2, 1), (2, 99)]:
        with pytest.raises(UsageError):
            synthesize(s, order)


def test_synthesize_length_cap():
    with pytest.raises(ResourceLimitError):
        synthesize(2, 5, max_length=50)


# --- numeric evaluation ----------------------------------------------------

def test_evaluate_word_matches_backend_products():
    su2 = get_backend("su2")
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=(2, 3)) * 0.2
    w = GroupWord.parse("g1^2 g2^-1 g1", 2)
    expected = su2.mul(su2.mul(su2.exp(2 * x), su2.exp(-y)), su2.exp(x))
    assert np.allclose(evaluate_word(w, [x, y], su2), expected, atol=1e-14)


def test_evaluate_lie_matches_bch_numerically():
    su2 = get_backend("su2")
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(2, 3)) * 1e-2
    X, Y = FreeLieElement.generators(2, 6)
    z = evaluate_lie(bch(X, Y, 6), [x, y], su2)
    exact = su2.log(su2.mul(su2.exp(x), su2.exp(y)))
    assert np.linalg.norm(z - exact) < 1e-13


@pytest.mark.parametrize("backend", ["su2", "sl2r", "heis3"])
def test_error_shrinks_with_scale(backend):
    G = get_backend(backend)
    a = synthesize(2, 3)
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(2, G.dim))
    errs = [approximation_error(a, [h * x, h * y], G) for h in (1e-1, 1e-2)]
    if backend == "heis3":
        # two-step nilpotent: degree >= 3 terms vanish identically
        assert max(errs) < 1e-12
    else:
        assert math.log10(errs[0] / errs[1]) > 2.5
