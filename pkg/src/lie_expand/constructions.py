"""Explicit sets: the non-growing lifted progression and commutator witnesses.

The progression has step ``h = m delta`` with ``m = round(delta^(kappa-1))``:
the step ``delta^kappa`` is snapped once, so ``P + P + P`` is again an exact
progression with the same step (rounding each point separately would not be).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .delta_sets import (
    DeltaSet,
    away_from_subgroups,
    covering_number,
    covering_profile,
    k_fold,
    lattice_ball,
    profile_fit,
    snap,
    _unique_rows,
)
from .errors import DomainError, UsageError
from .groups import Abelian, Heisenberg3, LieGroupBackend, get_backend, quotient_map


@dataclass(frozen=True)
class APConfig:
    d: int
    kappa: float
    delta: float
    r: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise UsageError("d must be >= 1")
        if not 0 < self.kappa <= 1:
            raise UsageError("kappa must lie in (0, 1]")
        if not 0 < self.delta < 1:
            raise UsageError("delta must lie in (0, 1)")
        if not self.delta**self.kappa < self.r:
            raise UsageError("need delta^kappa < r, otherwise the progression is a single point")

    @property
    def step_units(self) -> int:
        return max(1, round(self.delta ** (self.kappa - 1)))

    @property
    def step(self) -> float:
        return self.step_units * self.delta


def arithmetic_progression_set(c: APConfig) -> DeltaSet:
    """``{h x : x in Z^d, |h x_i| <= r}`` in ``Abelian(d)``, with ``h`` the snapped ``delta^kappa``."""
    m = c.step_units
    K = int(math.floor(c.r / (m * c.delta) + 1e-9))
    axis = np.arange(-K, K + 1, dtype=np.int64) * m
    grid = np.stack(np.meshgrid(*([axis] * c.d), indexing="ij"), axis=-1).reshape(-1, c.d)
    radius = math.sqrt(c.d) * K * m * c.delta
    return DeltaSet(get_backend(f"abelian:{c.d}"), c.delta, _unique_rows(grid, c.d), radius)


def _pack(lat: np.ndarray, lo: np.ndarray, span: np.ndarray) -> np.ndarray:
    key = lat[:, 0] - lo[0]
    for j in range(1, lat.shape[1]):
        key = key * span[j] + (lat[:, j] - lo[j])
    return key


def lift_to_group(P: DeltaSet, backend: LieGroupBackend, r: float) -> DeltaSet:
    """Lattice points of ``B_G(1, 2r)`` whose abelianization snaps onto a point of ``P``.

    The projection of a lattice point is compared with ``P`` after snapping,
    i.e. "within delta/2"; a full delta would also admit neighbouring fibers.
    """
    ab = backend.abelianization()
    if ab is None:
        raise UsageError(f"{backend.name} is perfect: no abelianization to lift from")
    d, comp = ab
    if P.dim != d:
        raise UsageError(f"P lives in dimension {P.dim}, abelianization of {backend.name} has {d}")
    delta = P.delta
    if isinstance(backend, Abelian):
        keep = np.linalg.norm(P.points, axis=1) <= 2 * r * (1 + 1e-12)
        return DeltaSet(backend, delta, P.lattice[keep], 2 * r, P.truncated)
    if len(P) == 0:
        return DeltaSet(backend, delta, np.zeros((0, backend.dim), dtype=np.int64), 2 * r)
    ball = lattice_ball(backend, delta, 2 * r)
    proj = np.round(ball.points @ comp.T / delta).astype(np.int64)
    lo = np.minimum(proj.min(axis=0), P.lattice.min(axis=0))
    span = np.maximum(proj.max(axis=0), P.lattice.max(axis=0)) - lo + 1
    hit = np.isin(_pack(proj, lo, span), _pack(P.lattice, lo, span))
    return DeltaSet(backend, delta, ball.lattice[hit], 2 * r, P.truncated)


@dataclass(frozen=True)
class QuotientProfile:
    subgroup: str
    target: str
    counts: tuple[int, ...]
    ladder: tuple[float, ...]
    kappa_hat: float
    eps_hat: float


@dataclass(frozen=True)
class NongrowthReport:
    n_a: int
    n_aaa: int
    ratio: float
    truncated: bool
    quotient_profiles: list[QuotientProfile] = field(default_factory=list)
    subgroup_distances: list = field(default_factory=list)

    @property
    def min_kappa_hat(self) -> float:
        return min((q.kappa_hat for q in self.quotient_profiles), default=float("nan"))

    @property
    def away_threshold(self) -> float:
        """Largest c such that A is c-away from every catalog subgroup."""
        return min((s.max_distance for s in self.subgroup_distances), default=float("nan"))


def quotient_profiles(A: DeltaSet, r_max: float) -> list[QuotientProfile]:
    backend = A.ambient
    out = []
    for name, N in backend.normal_subgroups().items():
        if N.dim >= backend.dim:
            continue
        try:
            q = quotient_map(backend, N)
        except UsageError:
            continue
        image = snap(q.project_coords(A.points), A.delta, q.target)
        prof = covering_profile(image, r_max)
        kappa_hat, eps_hat = profile_fit(prof)
        out.append(QuotientProfile(name, q.target.name, prof.counts, prof.ladder, kappa_hat, eps_hat))
    return out


def verify_nongrowth(A: DeltaSet, *, r_max: float | None = None, point_cap: int | None = None,
                     with_subgroups: bool = True) -> NongrowthReport:
    """``N(AAA)/N(A)`` at scale delta plus the hypotheses: quotient profiles and subgroup distances."""
    if not isinstance(A.ambient, LieGroupBackend):
        raise UsageError("verify_nongrowth needs a group backend")
    aaa = k_fold(A, 3, point_cap=point_cap)
    n_a = covering_number(A, A.delta)
    n_aaa = covering_number(aaa, A.delta)
    r_max = A.radius if r_max is None else r_max
    profiles = quotient_profiles(A, r_max) if len(A) else []
    dists = away_from_subgroups(A, None, 0.0) if with_subgroups else []
    return NongrowthReport(n_a, n_aaa, n_aaa / n_a if n_a else float("nan"), aaa.truncated, profiles, dists)


# ---------------------------------------------------------------------------
# lower central series witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CentralSeriesWitness:
    """Pairs ``(x_j, y_j)`` with ``x_j`` in ``R`` and ``y_j`` in ``R_i`` whose brackets span ``R_{i+1}``."""

    backend: LieGroupBackend
    level: int
    pairs: tuple[tuple[np.ndarray, np.ndarray], ...]
    k: int = 1

    @property
    def brackets(self) -> np.ndarray:
        return np.array([self.backend.bracket(x, y) for x, y in self.pairs])

    def rank(self) -> int:
        z = self.brackets
        return int(np.linalg.matrix_rank(z, tol=1e-10)) if len(z) else 0


def central_series_witness(backend: LieGroupBackend, level: int = 1, k: int = 1) -> CentralSeriesWitness:
    series = backend.lower_central_series()
    # a series that does not reach 0 has stabilised: later terms equal the last one
    def term(i):
        return series[i] if i < len(series) else (series[-1] if series[-1].shape[0] else series[-1][:0])

    if level < 1 or term(level).shape[0] == 0:
        raise UsageError(f"{backend.name} has no nonzero level-{level + 1} term in its lower central series")
    target_dim = term(level).shape[0]
    pairs, rows = [], []
    for x in series[0]:
        for y in term(level - 1):
            z = backend.bracket(x, y)
            trial = np.array(rows + [z])
            if np.linalg.matrix_rank(trial, tol=1e-10) > len(rows):
                pairs.append((x, y))
                rows.append(z)
            if len(rows) == target_dim:
                return CentralSeriesWitness(backend, level, tuple(pairs), k)
    raise UsageError("brackets of basis vectors do not span the next term")


def _group_commutator(backend, a, b):
    return backend.mul(backend.mul(a, b), backend.mul(backend.inv(a), backend.inv(b)))


def witness_factor(backend: LieGroupBackend, x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
    """``[exp(sqrt t x), exp(sqrt t y)]`` for ``t >= 0``, the reversed commutator for ``t < 0``."""
    s = math.sqrt(abs(t))
    a, b = backend.exp(s * np.asarray(x)), backend.exp(s * np.asarray(y))
    return _group_commutator(backend, a, b) if t >= 0 else _group_commutator(backend, b, a)


def central_series_witness_map(backend: LieGroupBackend, t, *, rho: float | None = None,
                               witness: CentralSeriesWitness | None = None) -> np.ndarray:
    """``f(t_1, ..., t_m) = f_1(t_1) ... f_m(t_m)``; a scalar ``t`` means ``m = 1``."""
    witness = witness or central_series_witness(backend)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if len(ts) != len(witness.pairs):
        raise UsageError(f"expected {len(witness.pairs)} parameters")
    if rho is not None and np.any(np.abs(ts) > rho**2 * (1 + 1e-12)):
        raise DomainError("witness parameters must satisfy |t| <= rho^2")
    g = backend.identity()
    for (x, y), tj in zip(witness.pairs, ts):
        g = backend.mul(g, witness_factor(backend, x, y, float(tj)))
    return g


def witness_differential(backend: LieGroupBackend, witness: CentralSeriesWitness | None = None,
                         h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian at 0 of ``t -> log f(t)``; columns are close to the ``z_j``."""
    witness = witness or central_series_witness(backend)
    m = len(witness.pairs)
    cols = []
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        plus = backend.log(central_series_witness_map(backend, e, witness=witness))
        minus = backend.log(central_series_witness_map(backend, -e, witness=witness))
        cols.append((plus - minus) / (2 * h))
    return np.array(cols).T


@dataclass(frozen=True)
class CoverageResult:
    fraction: float
    c: float | None
    fractions: dict
    targets: int


def commutator_coverage(backend: LieGroupBackend, rho: float, k: int, *, delta: float | None = None,
                        c_values=(1.0, 0.5, 0.25, 0.125), tol: float = 1e-12) -> CoverageResult:
    """Fraction of the delta-net of ``B_center(1, c rho^2)`` written as ``k`` commutators of rho-ball elements.

    Each target ``exp(t Z)`` is solved in closed form (``t_j = t / k``), the
    commutators are built numerically, the factors' distances to the identity
    are checked against ``rho``, and the product is compared with the target.
    Returns the largest scanned ``c`` with full coverage.
    """
    if not isinstance(backend, Heisenberg3):
        raise UsageError("commutator_coverage has a closed-form inverse only for heis3")
    witness = central_series_witness(backend)
    (x, y), = witness.pairs
    z = backend.bracket(x, y)
    delta = rho**2 / 64 if delta is None else delta
    fractions = {}
    targets = 0
    for c in c_values:
        T = int(math.floor(c * rho**2 / delta + 1e-9))
        ts = np.arange(-T, T + 1) * delta
        targets = len(ts)
        if k == 0:
            fractions[c] = 0.0
            continue
        ok = 0
        for t in ts:
            tj = t / k
            s = math.sqrt(abs(tj))
            if s * max(np.linalg.norm(x), np.linalg.norm(y)) > rho * (1 + 1e-12):
                continue
            g = backend.identity()
            for _ in range(k):
                g = backend.mul(g, witness_factor(backend, x, y, tj))
            target = backend.exp(t * z)
            if float(backend.dist(g, target)) <= tol * max(1.0, abs(t)):
                ok += 1
        fractions[c] = ok / targets
    full = [c for c in c_values if fractions[c] == 1.0]
    best = max(full) if full else None
    return CoverageResult(fractions[best] if best is not None else max(fractions.values()), best, fractions, targets)
