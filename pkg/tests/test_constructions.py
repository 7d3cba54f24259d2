from __future__ import annotations

import math

import numpy as np
import pytest

from oracles import exact_progression_count

from lie_expand.constructions import (
    APConfig,
    arithmetic_progression_set,
    central_series_witness,
    central_series_witness_map,
    commutator_coverage,
    lift_to_group,
    quotient_profiles,
    verify_nongrowth,
    witness_differential,
)
from lie_expand.delta_sets import (
    away_from_subgroups,
    covering_number,
    covering_profile,
    k_fold,
    lattice_ball,
    profile_fit,
    snap,
)
from lie_expand.errors import DomainError, UsageError
from lie_expand.groups import get_backend


# --- progressions ----------------------------------------------------------

def test_step_is_snapped_power_of_delta():
    c = APConfig(1, 0.5, 2.0**-10)
    assert c.step_units == 32
    assert c.step == 2.0**-5


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("kappa", [0.25, 0.5, 0.75])
def test_progression_counts(d, kappa):
    c = APConfig(d, kappa, 2.0**-8)
    P = arithmetic_progression_set(c)
    K = int(math.floor(c.r / c.step + 1e-9))
    assert len(P) == exact_progression_count(K, d)
    assert len(k_fold(P, 3)) == exact_progression_count(K, d, 3)


def test_progression_factor_four_example():
    # d=2, kappa=1/2, delta=2^-10, r=1/2: N_delta(P) = 33^2, within 4 of 2^10
    P = arithmetic_progression_set(APConfig(2, 0.5, 2.0**-10, 0.5))
    n = covering_number(P, P.delta)
    assert 2**10 / 4 <= n <= 4 * 2**10


def test_progression_rejects_bad_config():
    for args in [(0, 0.5, 0.1), (1, 0.0, 0.1), (1, 0.5, 1.5), (1, 0.5, 0.25, 0.25)]:
        with pytest.raises(UsageError):
            APConfig(*args)


def test_covering_exponent_of_progression():
    P = arithmetic_progression_set(APConfig(1, 0.5, 2.0**-10))
    kappa, _ = profile_fit(covering_profile(P, 1.0))
    assert abs(kappa - 0.5) < 0.1


def test_verify_nongrowth_abelian():
    P = arithmetic_progression_set(APConfig(1, 0.5, 2.0**-10))
    rep = verify_nongrowth(P, r_max=1.0)
    assert rep.ratio <= 24
    assert not rep.truncated
    assert rep.quotient_profiles
    assert rep.min_kappa_hat >= 0.4
    assert rep.away_threshold >= 0


# --- lifts -----------------------------------------------------------------

def test_lift_to_heisenberg_structure():
    H = get_backend("heis3")
    P = arithmetic_progression_set(APConfig(2, 0.5, 2.0**-6, 0.25))
    A = lift_to_group(P, H, 0.25)
    assert len(A) > len(P)
    _, comp = H.abelianization()
    proj = snap(A.points @ comp.T, P.delta, get_backend("abelian:2"))
    assert set(map(tuple, proj.lattice)) <= set(map(tuple, P.lattice))
    assert np.linalg.norm(A.points, axis=1).max() <= 0.5 + 1e-12
    # the center is reached: A has points off the X, Y plane
    assert np.abs(A.points[:, 2]).max() > 0.1


def test_lift_is_away_from_proper_subgroups():
    H = get_backend("heis3")
    A = lift_to_group(arithmetic_progression_set(APConfig(2, 0.5, 2.0**-6, 0.25)), H, 0.25)
    assert all(r.away for r in away_from_subgroups(A, None, 0.05))


def test_lift_into_perfect_group_rejected():
    P = arithmetic_progression_set(APConfig(1, 0.5, 2.0**-6))
    with pytest.raises(UsageError):
        lift_to_group(P, get_backend("su2"), 0.5)


def test_quotient_profiles_of_heisenberg_lift():
    H = get_backend("heis3")
    A = lift_to_group(arithmetic_progression_set(APConfig(2, 0.5, 2.0**-6, 0.25)), H, 0.25)
    names = {q.subgroup for q in quotient_profiles(A, 0.25)}
    assert "center" in names


# --- central series witnesses ----------------------------------------------

def test_witness_spans_center():
    w = central_series_witness(get_backend("heis3"))
    assert w.rank() == 1
    assert np.allclose(np.abs(w.brackets[0]), [0, 0, 1])


def test_witness_map_identity():
    H = get_backend("heis3")
    rng = np.random.default_rng(0)
    for t in rng.uniform(-0.01, 0.01, 200):
        g = central_series_witness_map(H, t, rho=0.1)
        assert float(H.dist(g, H.exp(np.array([0.0, 0.0, t])))) <= 1e-12


def test_witness_map_domain():
    with pytest.raises(DomainError):
        central_series_witness_map(get_backend("heis3"), 0.5, rho=0.1)


def test_witness_differential():
    H = get_backend("heis3")
    D = witness_differential(H)
    assert np.allclose(D[:, 0], [0, 0, 1], atol=1e-8)


def test_witness_for_product_group():
    G = get_backend("sl2rxh3")
    w = central_series_witness(G)
    # perfect: [g, g] is all of g
    assert w.rank() == G.dim


@pytest.mark.parametrize("rho", [0.1, 0.05])
def test_commutator_coverage(rho):
    res = commutator_coverage(get_backend("heis3"), rho, 1)
    assert res.fraction == 1.0
    assert res.c is not None and res.c >= 0.25


def test_coverage_with_no_commutators():
    res = commutator_coverage(get_backend("heis3"), 0.1, 0)
    assert res.fraction == 0.0
    assert res.c is None


def test_coverage_needs_heisenberg():
    with pytest.raises(UsageError):
        commutator_coverage(get_backend("su2"), 0.1, 1)


def test_dense_progression_is_full_net():
    P = arithmetic_progression_set(APConfig(1, 1.0, 2.0**-4))
    assert sorted(P.lattice[:, 0]) == list(range(-16, 17))
    Q = arithmetic_progression_set(APConfig(2, 1.0, 2.0**-4, 0.5))
    assert len(Q) == 17**2


def test_lift_edge_cases():
    P = arithmetic_progression_set(APConfig(2, 0.5, 2.0**-6, 0.25))
    A = lift_to_group(P, get_backend("abelian:2"), 0.25)
    assert np.array_equal(A.lattice, P.lattice)
    empty = P.__class__(P.ambient, P.delta, P.lattice[:0], P.radius)
    assert len(lift_to_group(empty, get_backend("heis3"), 0.25)) == 0


@pytest.mark.parametrize("d", [1, 2])
def test_full_ball_ratio_bounded_by_tripling(d):
    A = lattice_ball(get_backend(f"abelian:{d}"), 2.0**-6, 0.5)
    assert verify_nongrowth(A, r_max=0.5).ratio <= 3**d * 8


def test_witness_map_at_zero_and_negative_time():
    H = get_backend("heis3")
    assert np.array_equal(central_series_witness_map(H, 0.0, rho=0.1), H.identity())
    g = central_series_witness_map(H, -0.005, rho=0.1)
    assert float(H.dist(g, H.exp(np.array([0.0, 0.0, -0.005])))) <= 1e-12


def test_coverage_at_half_and_in_k():
    assert commutator_coverage(get_backend("heis3"), 0.1, 1).fractions[0.5] == 1.0
    fr = [commutator_coverage(get_backend("heis3"), 0.1, k, c_values=(2.0,)).fractions[2.0] for k in range(4)]
    assert fr == sorted(fr)
