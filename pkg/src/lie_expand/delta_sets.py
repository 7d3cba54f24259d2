"""Sets at resolution delta: snapping, covering numbers, product sets and <A, X>_s.

A :class:`DeltaSet` stores integer lattice coordinates ``k`` of its points; the
chart coordinates are ``k * delta`` (the log chart for group backends, plain
coordinates for vector spaces).  Every operation snaps back onto the lattice
and deduplicates, so sets stay sorted and unique.

Covering numbers count occupied cells of side ``rho / sqrt(dim)`` in chart
coordinates.  Each cell has diameter ``rho``, so a greedy rho-separated net has
at most one point per cell, and a rho-ball meets at most ``(2 sqrt(dim) + 1)^dim``
cells.  Hence ``greedy <= cells <= 6^dim * greedy`` for ``dim <= 6``.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.signal import fftconvolve
from scipy.spatial import cKDTree

from .errors import BudgetExceeded, DomainError, UsageError
from .groups import Abelian, LieGroupBackend, SubgroupDescriptor, get_backend

THREADS_ENV = "LIE_EXPAND_THREADS"
DENSE_SUMSET_CAP = 40_000_000
PAIR_CAP = 50_000_000
_CHUNK_PAIRS = 400_000


@dataclass(frozen=True)
class VectorSpace:
    """``R^n`` as a module ambient (no group law beyond addition)."""

    dim: int

    @property
    def name(self) -> str:
        return f"R^{self.dim}"


Ambient = LieGroupBackend | VectorSpace


def get_ambient(name: str) -> Ambient:
    if name.startswith("R^"):
        return VectorSpace(int(name[2:]))
    return get_backend(name)


def _is_additive(ambient: Ambient) -> bool:
    return isinstance(ambient, (VectorSpace, Abelian))


@dataclass(frozen=True)
class GenerationBudget:
    s: int
    region_cap: float = math.inf
    point_cap: int = 2_000_000

    def __post_init__(self):
        if self.s < 1 or not self.region_cap > 0 or self.point_cap < 1:
            raise UsageError("budget caps must be positive and s >= 1")


@dataclass(frozen=True, eq=False)
class DeltaSet:
    ambient: Ambient
    delta: float
    lattice: np.ndarray = field(repr=False)
    radius: float = 0.0
    truncated: bool = False

    def __post_init__(self):
        if not self.delta > 0:
            raise UsageError("delta must be positive")
        lat = np.asarray(self.lattice, dtype=np.int64).reshape(-1, self.ambient.dim)
        object.__setattr__(self, "lattice", lat)

    @property
    def dim(self) -> int:
        return self.ambient.dim

    @property
    def points(self) -> np.ndarray:
        """Chart coordinates, shape ``(n, dim)``."""
        return self.lattice * self.delta

    def __len__(self) -> int:
        return int(self.lattice.shape[0])

    def elements(self) -> np.ndarray:
        """Group elements (or vectors for additive ambients)."""
        if isinstance(self.ambient, VectorSpace):
            return self.points
        return self.ambient.exp(self.points)

    def same_points(self, other: DeltaSet) -> bool:
        return self.delta == other.delta and np.array_equal(self.lattice, other.lattice)

    def with_flag(self, truncated: bool) -> DeltaSet:
        return DeltaSet(self.ambient, self.delta, self.lattice, self.radius, self.truncated or truncated)


def _unique_rows(lat: np.ndarray, dim: int) -> np.ndarray:
    """Sorted unique rows; packs rows into one int64 key when the ranges allow it."""
    lat = np.asarray(lat, dtype=np.int64).reshape(-1, dim)
    if lat.shape[0] == 0:
        return lat
    lo = lat.min(axis=0)
    span = lat.max(axis=0) - lo + 1
    if float(np.prod(span.astype(float))) >= 2.0**62:
        return np.unique(lat, axis=0)
    shifted = lat - lo
    key = shifted[:, 0].copy()
    for j in range(1, dim):
        key *= span[j]
        key += shifted[:, j]
    key = np.unique(key)
    out = np.empty((len(key), dim), dtype=np.int64)
    for j in range(dim - 1, 0, -1):
        key, out[:, j] = np.divmod(key, span[j])
    out[:, 0] = key
    return out + lo


def _from_lattice(ambient: Ambient, delta: float, lat: np.ndarray, radius: float | None = None,
                  truncated: bool = False) -> DeltaSet:
    lat = _unique_rows(lat, ambient.dim)
    if radius is None:
        radius = float(np.linalg.norm(lat * delta, axis=1).max()) if len(lat) else 0.0
    return DeltaSet(ambient, delta, lat, radius, truncated)


def snap(points, delta: float, ambient: Ambient, *, radius: float | None = None) -> DeltaSet:
    """Round to the delta-lattice in chart coordinates and deduplicate.

    ``points`` are chart coordinates ``(n, dim)`` or, for matrix backends,
    group elements ``(n, k, k)`` which are sent through ``log`` first.  With a
    ``radius`` the points outside the closed ball are dropped.
    """
    if not delta > 0:
        raise UsageError("delta must be positive")
    pts = np.asarray(points)
    if isinstance(ambient, LieGroupBackend) and not isinstance(ambient, Abelian) \
            and pts.ndim >= 2 and pts.shape[-2:] == ambient.element_shape:
        pts = ambient.log(pts.reshape((-1,) + ambient.element_shape))
    pts = np.asarray(pts, dtype=float).reshape(-1, ambient.dim)
    lat = np.round(pts / delta).astype(np.int64)
    if radius is not None:
        lat = lat[np.linalg.norm(lat * delta, axis=1) <= radius * (1 + 1e-12)]
    return _from_lattice(ambient, delta, lat, radius)


def empty(ambient: Ambient, delta: float) -> DeltaSet:
    return DeltaSet(ambient, delta, np.zeros((0, ambient.dim), dtype=np.int64), 0.0)


def lattice_ball(ambient: Ambient, delta: float, r: float) -> DeltaSet:
    """The delta-net of the closed chart ball ``B(0, r)``."""
    k = int(math.floor(r / delta + 1e-9))
    axes = [np.arange(-k, k + 1, dtype=np.int64)] * ambient.dim
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, ambient.dim)
    keep = np.sum((grid * delta) ** 2, axis=1) <= (r * (1 + 1e-12)) ** 2
    return DeltaSet(ambient, delta, grid[keep], r)


# ---------------------------------------------------------------------------
# covering numbers
# ---------------------------------------------------------------------------

def _cells(A: DeltaSet, rho: float) -> np.ndarray:
    scale = A.delta * math.sqrt(A.dim) / rho
    return np.floor(A.lattice * scale).astype(np.int64)


def covering_number(A: DeltaSet, rho: float) -> int:
    """Occupied cells of side ``rho / sqrt(dim)``; within ``6^dim`` of the true count."""
    if rho < A.delta * (1 - 1e-12):
        raise UsageError(f"rho={rho} is below the set's scale delta={A.delta}")
    if len(A) == 0:
        return 0
    return int(_unique_rows(_cells(A, rho), A.dim).shape[0])


def greedy_covering_number(A: DeltaSet, rho: float) -> int:
    """Slow oracle: greedy rho-separated net (in sorted point order)."""
    if len(A) == 0:
        return 0
    pts = A.points
    tree = cKDTree(pts)
    covered = np.zeros(len(pts), dtype=bool)
    count = 0
    for i in range(len(pts)):
        if covered[i]:
            continue
        count += 1
        covered[tree.query_ball_point(pts[i], rho * (1 + 1e-12))] = True
    return count


@dataclass(frozen=True)
class CoveringProfile:
    delta: float
    ladder: tuple[float, ...]
    counts: tuple[int, ...]

    def to_csv(self) -> str:
        rows = ["rho,count"] + [f"{r!r},{c}" for r, c in zip(self.ladder, self.counts)]
        return "\n".join(rows) + "\n"


def dyadic_ladder(delta: float, r_max: float) -> tuple[float, ...]:
    k = max(0, int(math.floor(math.log2(max(r_max, delta) / delta) + 1e-9)))
    return tuple(delta * 2.0**j for j in range(k + 1))


def covering_profile(A: DeltaSet, r_max: float | None = None) -> CoveringProfile:
    """Counts ``N(A, delta 2^k)`` for ``delta 2^k <= r_max`` (default: A's radius)."""
    ladder = dyadic_ladder(A.delta, A.radius if r_max is None else r_max)
    return CoveringProfile(A.delta, ladder, tuple(covering_number(A, r) for r in ladder))


def profile_fit(P: CoveringProfile) -> tuple[float, float]:
    """Least-squares ``log N = kappa log(1/rho) - eps log(1/delta)``; returns ``(kappa, eps)``."""
    if len(P.ladder) < 3 or len(set(P.ladder)) < 3:
        raise UsageError("profile_fit needs at least three distinct scales")
    if min(P.counts) < 1:
        raise UsageError("profile_fit needs a nonempty set")
    x = -np.log(np.asarray(P.ladder))
    y = np.log(np.asarray(P.counts, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    log_inv_delta = -math.log(P.delta)
    eps = -intercept / log_inv_delta if log_inv_delta > 0 else float("nan")
    return float(slope), float(eps)


# ---------------------------------------------------------------------------
# product sets
# ---------------------------------------------------------------------------

def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _common_step(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-axis gcd of offsets inside ``a`` and inside ``b`` (1 where undefined)."""
    da = np.gcd.reduce(np.abs(a - a[0]), axis=0)
    db = np.gcd.reduce(np.abs(b - b[0]), axis=0)
    g = np.gcd(da, db)
    return np.where(g == 0, 1, g)


def _sumset_lattice(a: np.ndarray, b: np.ndarray, pair_cap: int) -> np.ndarray:
    """Exact ``{x + y}`` of two integer point sets."""
    dim = a.shape[1]
    if len(a) == 0 or len(b) == 0:
        return np.zeros((0, dim), dtype=np.int64)
    g = _common_step(a, b)
    a0, b0 = a[0].copy(), b[0].copy()
    ra, rb = (a - a0) // g, (b - b0) // g
    lo_a, lo_b = ra.min(axis=0), rb.min(axis=0)
    ra, rb = ra - lo_a, rb - lo_b
    shape_a, shape_b = ra.max(axis=0) + 1, rb.max(axis=0) + 1
    out_shape = shape_a + shape_b - 1
    volume = float(np.prod(out_shape.astype(float)))
    offset = a0 + b0 + g * (lo_a + lo_b)
    if len(a) * len(b) > 4 * volume and volume <= DENSE_SUMSET_CAP:
        ia = np.zeros(tuple(shape_a), dtype=float)
        ib = np.zeros(tuple(shape_b), dtype=float)
        ia[tuple(ra.T)] = 1.0
        ib[tuple(rb.T)] = 1.0
        conv = fftconvolve(ia, ib) if min(ia.size, ib.size) > 64 else _direct_conv(ia, ib)
        hit = np.argwhere(conv > 0.5).astype(np.int64)
        return offset + g * hit
    if len(a) * len(b) > pair_cap:
        raise BudgetExceeded(f"sumset needs {len(a) * len(b)} pairs (cap {pair_cap})")
    return _pairwise_unique(a, b, lambda x, y: (x[:, None, :] + y[None, :, :]).reshape(-1, dim), dim)


def _direct_conv(ia: np.ndarray, ib: np.ndarray) -> np.ndarray:
    out = np.zeros(tuple(np.array(ia.shape) + np.array(ib.shape) - 1))
    for idx in np.argwhere(ib > 0):
        sl = tuple(slice(i, i + n) for i, n in zip(idx, ia.shape))
        out[sl] += ia
    return out


def _pairwise_unique(a: np.ndarray, b: np.ndarray, combine: Callable, dim: int) -> np.ndarray:
    step = max(1, _CHUNK_PAIRS // max(1, len(b)))
    chunks = [a[i:i + step] for i in range(0, len(a), step)]

    def work(chunk):
        return _unique_rows(combine(chunk, b), dim)

    threads = _threads()
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    if not parts:
        return np.zeros((0, dim), dtype=np.int64)
    return _unique_rows(np.concatenate(parts), dim)


def _check_compatible(A: DeltaSet, B: DeltaSet) -> None:
    if A.ambient != B.ambient:
        raise UsageError(f"ambient mismatch: {A.ambient.name} vs {B.ambient.name}")
    if A.delta != B.delta:
        raise UsageError("sets have different scales delta")


def _cap(ambient: Ambient, delta: float, lat: np.ndarray, point_cap: int | None, truncated: bool,
         radius: float | None = None) -> DeltaSet:
    lat = _unique_rows(lat, ambient.dim)
    if point_cap is not None and len(lat) > point_cap:
        lat = lat[:point_cap]
        truncated = True
    return _from_lattice(ambient, delta, lat, radius, truncated)


def product_set(A: DeltaSet, B: DeltaSet, *, point_cap: int | None = None, pair_cap: int = PAIR_CAP) -> DeltaSet:
    """``AB`` snapped at delta.  Above ``point_cap`` the result is cut and flagged as truncated."""
    _check_compatible(A, B)
    amb, delta = A.ambient, A.delta
    truncated = A.truncated or B.truncated
    if _is_additive(amb):
        lat = _sumset_lattice(A.lattice, B.lattice, pair_cap)
        radius = A.radius + B.radius
        return _cap(amb, delta, lat, point_cap, truncated, radius)
    if len(A) * len(B) > pair_cap:
        raise BudgetExceeded(f"product needs {len(A) * len(B)} pairs (cap {pair_cap})")
    ga, gb = A.elements(), B.elements()
    idx_a = np.arange(len(A))

    def combine(ia, ib):
        prod = amb.mul(ga[ia][:, None], gb[None, :])
        try:
            logs = amb.log(prod.reshape((-1,) + amb.element_shape))
        except DomainError as exc:
            raise DomainError(f"product set leaves the chart of {amb.name}: {exc}") from exc
        return np.round(logs / delta).astype(np.int64)

    if len(A) == 0 or len(B) == 0:
        return _cap(amb, delta, np.zeros((0, amb.dim), dtype=np.int64), point_cap, truncated)
    lat = _pairwise_unique(idx_a, np.arange(len(B)), lambda ia, ib: combine(ia, ib), amb.dim)
    return _cap(amb, delta, lat, point_cap, truncated)


def k_fold(A: DeltaSet, k: int, **kwargs) -> DeltaSet:
    """``A^k`` (left to right), snapped after every factor."""
    if k < 1:
        raise UsageError("k_fold needs k >= 1")
    out = A
    for _ in range(k - 1):
        out = product_set(out, A, **kwargs)
    return out


# ---------------------------------------------------------------------------
# module actions and <A, X>_s
# ---------------------------------------------------------------------------

class ModuleAction:
    """Action of a group backend on a vector space, batched over all pairs."""

    group: LieGroupBackend
    space: VectorSpace

    def act(self, a_chart: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Array of shape ``(len(a), len(x), dim V)`` with ``a . x``."""
        raise NotImplementedError


@dataclass(frozen=True)
class ScalarAction(ModuleAction):
    """``Abelian(1)`` acting on ``R^n``: chart coordinate ``t`` multiplies by ``e^t``."""

    n: int

    @property
    def group(self):
        return get_backend("abelian:1")

    @property
    def space(self):
        return VectorSpace(self.n)

    def act(self, a_chart, x):
        factors = np.exp(np.asarray(a_chart, float)[:, 0])
        return factors[:, None, None] * np.asarray(x, float)[None, :, :]


@dataclass(frozen=True)
class AdjointAction(ModuleAction):
    """A backend acting on its own Lie algebra through ``Ad``."""

    backend_name: str

    @property
    def group(self):
        return get_backend(self.backend_name)

    @property
    def space(self):
        return VectorSpace(self.group.dim)

    def act(self, a_chart, x):
        ad = self.group.adjoint(self.group.exp(np.asarray(a_chart, float)))
        return np.einsum("aij,xj->axi", ad, np.asarray(x, float))


def generate_bracket(A: DeltaSet, X: DeltaSet, s: int, action: ModuleAction,
                     budget: GenerationBudget | None = None) -> DeltaSet:
    """``<A, X>_s``: values of expressions in at most ``s`` atoms built with ``+``, ``-`` and ``a . x``.

    Breadth first by atom count: ``E_1 = X`` and ``E_n`` collects ``E_i + E_j``,
    ``E_i - E_j`` (``i + j = n``) and ``a . E_{n-1}``, snapped at delta.
    """
    budget = budget or GenerationBudget(s)
    if s < 1:
        raise UsageError("s must be >= 1")
    if A.ambient != action.group or X.ambient != action.space:
        raise UsageError("action does not match the ambients of A and X")
    if A.delta != X.delta:
        raise UsageError("A and X must share delta")
    delta, dim = X.delta, X.dim
    truncated = A.truncated or X.truncated
    a_chart = A.points

    def clip(lat):
        nonlocal truncated
        lat = _unique_rows(lat, dim)
        if math.isfinite(budget.region_cap):
            keep = np.linalg.norm(lat * delta, axis=1) <= budget.region_cap * (1 + 1e-12)
            if not keep.all():
                truncated = True
                lat = lat[keep]
        if len(lat) > budget.point_cap:
            truncated = True
            lat = lat[: budget.point_cap]
        return lat

    levels: dict[int, np.ndarray] = {1: clip(X.lattice)}
    for n in range(2, s + 1):
        parts = []
        for i in range(1, n // 2 + 1):
            j = n - i
            li, lj = levels[i], levels[j]
            if len(li) and len(lj):
                parts.append(_pairwise_unique(li, lj, lambda p, q: (p[:, None] + q[None]).reshape(-1, dim), dim))
                parts.append(_pairwise_unique(li, lj, lambda p, q: (p[:, None] - q[None]).reshape(-1, dim), dim))
                if i != j:
                    parts.append(_pairwise_unique(lj, li, lambda p, q: (p[:, None] - q[None]).reshape(-1, dim), dim))
        prev = levels[n - 1]
        if len(prev) and len(a_chart):
            acted = action.act(a_chart, prev * delta).reshape(-1, dim)
            parts.append(np.round(acted / delta).astype(np.int64))
        levels[n] = clip(np.concatenate(parts)) if parts else np.zeros((0, dim), dtype=np.int64)
    lat = clip(np.concatenate(list(levels.values())))
    return _from_lattice(X.ambient, delta, lat, None, truncated)


# ---------------------------------------------------------------------------
# predicates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubgroupDistance:
    subgroup: str
    max_distance: float
    away: bool


def away_from_subgroups(A: DeltaSet, catalog: Sequence[SubgroupDescriptor] | None, rho: float) -> list[SubgroupDistance]:
    """For each subgroup ``H``: ``max_{a in A} d(a, H)`` and whether it exceeds ``rho``."""
    amb = A.ambient
    if not isinstance(amb, LieGroupBackend):
        raise UsageError("away_from_subgroups needs a group backend")
    if catalog is None:
        catalog = [h for h in amb.subgroups.values() if h.dim < amb.dim]
    pts = A.points
    out = []
    for H in catalog:
        if len(pts) == 0:
            m = 0.0
        else:
            resid = pts - pts @ H.projector(amb.dim)
            m = float(np.linalg.norm(resid, axis=1).max())
        out.append(SubgroupDistance(H.name, m, m > rho))
    return out


def ball_coverage(Y: DeltaSet, r: float, delta: float | None = None) -> float:
    """Fraction of the delta-grid points of ``B(0, r)`` lying within delta of ``Y``."""
    delta = Y.delta if delta is None else delta
    grid = lattice_ball(VectorSpace(Y.dim), delta, r).points
    if len(Y) == 0 or len(grid) == 0:
        return 0.0
    dist, _ = cKDTree(Y.points).query(grid, k=1)
    return float(np.mean(dist <= delta * (1 + 1e-9)))


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------

def save_delta_set(A: DeltaSet, path: str | Path) -> None:
    """JSON header line, then one CSV row of chart coordinates per point."""
    header = {"backend": A.ambient.name, "delta": A.delta, "radius": A.radius,
              "dim": A.dim, "count": len(A), "truncated": A.truncated}
    lines = [json.dumps(header, sort_keys=True)]
    lines += [",".join(repr(float(c)) for c in row) for row in A.points]
    Path(path).write_text("\n".join(lines) + "\n")


def load_delta_set(path: str | Path) -> DeltaSet:
    text = Path(path).read_text().splitlines()
    if not text:
        raise UsageError(f"{path}: empty file")
    header = json.loads(text[0])
    ambient = get_ambient(header["backend"])
    rows = [[float(c) for c in line.split(",")] for line in text[1:] if line.strip()]
    pts = np.array(rows, dtype=float).reshape(-1, ambient.dim)
    lat = np.round(pts / header["delta"]).astype(np.int64)
    return DeltaSet(ambient, header["delta"], _unique_rows(lat, ambient.dim), header["radius"], header["truncated"])
