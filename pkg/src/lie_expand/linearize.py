"""Recover a linear map from an almost-additive map sampled on a delta-grid.

One-dimensional case: pin ``phi(t*) = sigma(t*)`` at the largest grid point
``t* <= rho2`` on the axis; halving steps keep ``sigma(t* 2^-n)`` within
``rho1`` of ``phi``, and binary expansions spread this over the whole segment
with an error growing like ``log2(1/delta) rho1``.  In higher dimension the
per-axis maps are assembled linearly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from . import exact_linalg
from .delta_sets import VectorSpace, lattice_ball
from .errors import InfeasibleConstraint, UsageError

RANDOM_TRIPLES = 10_000


@dataclass(frozen=True)
class LinearMap:
    """Matrix ``(dim V, dim V')``; either float or exact (nested tuples of ``Fraction``)."""

    matrix: object

    @classmethod
    def from_array(cls, a) -> LinearMap:
        return cls(np.array(a, dtype=float))

    @property
    def exact(self) -> bool:
        return not isinstance(self.matrix, np.ndarray)

    @property
    def shape(self) -> tuple[int, int]:
        if self.exact:
            return len(self.matrix), len(self.matrix[0]) if self.matrix else 0
        return self.matrix.shape

    def as_array(self) -> np.ndarray:
        if self.exact:
            return np.array([[float(c) for c in row] for row in self.matrix], dtype=float)
        return self.matrix

    def as_fractions(self) -> list[list[Fraction]]:
        if self.exact:
            return [list(row) for row in self.matrix]
        return [[Fraction(float(c)) for c in row] for row in self.matrix]

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.as_array().T

    def compose(self, other: LinearMap) -> LinearMap:
        """``self o other``, exact when both are exact."""
        if self.exact or other.exact:
            return LinearMap(tuple(tuple(r) for r in exact_linalg.matmul(self.as_fractions(), other.as_fractions())))
        return LinearMap(self.matrix @ other.matrix)

    def to_json(self) -> list:
        if self.exact:
            return [[str(c) for c in row] for row in self.matrix]
        return self.matrix.tolist()


@dataclass(frozen=True, eq=False)
class SampledMap:
    """Values of ``sigma`` on the delta-net of ``B_{V'}(0, rho2)``."""

    delta: float
    rho1: float
    rho2: float
    lattice: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 0 < self.delta < self.rho1 < self.rho2 <= 1:
            raise UsageError("need 0 < delta < rho1 < rho2 <= 1")
        lat = np.asarray(self.lattice, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        if lat.ndim != 2 or vals.ndim != 2 or len(lat) != len(vals):
            raise UsageError("lattice and values must be 2-d arrays of equal length")
        order = np.lexsort(lat.T[::-1])
        lat, vals = lat[order], vals[order]
        object.__setattr__(self, "lattice", lat)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_lo", lat.min(axis=0))
        object.__setattr__(self, "_span", lat.max(axis=0) - lat.min(axis=0) + 1)
        object.__setattr__(self, "_keys", self._key(lat))
        if np.any(np.diff(self._keys) <= 0):
            raise UsageError("duplicate grid points")
        expected = len(lattice_ball(VectorSpace(self.dim_in), self.delta, self.rho2))
        if len(lat) != expected:
            raise UsageError(f"missing grid values: {len(lat)} of {expected} grid points given")

    @property
    def dim_in(self) -> int:
        return self.lattice.shape[1]

    @property
    def dim_out(self) -> int:
        return self.values.shape[1]

    @property
    def points(self) -> np.ndarray:
        return self.lattice * self.delta

    def _key(self, lat: np.ndarray) -> np.ndarray:
        lat = np.asarray(lat, dtype=np.int64).reshape(-1, self.dim_in)
        key = lat[:, 0] - self._lo[0]
        for j in range(1, self.dim_in):
            key = key * self._span[j] + (lat[:, j] - self._lo[j])
        return key

    def index(self, lat) -> np.ndarray:
        """Row indices of lattice points (``-1`` when outside the domain)."""
        lat = np.asarray(lat, dtype=np.int64).reshape(-1, self.dim_in)
        inside = np.all((lat >= self._lo) & (lat < self._lo + self._span), axis=1)
        keys = self._key(lat)
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, len(self._keys) - 1)
        ok = inside & (self._keys[pos] == keys)
        return np.where(ok, pos, -1)

    def at(self, lat) -> np.ndarray:
        idx = self.index(lat)
        if np.any(idx < 0):
            raise UsageError("grid point outside the sampled domain")
        return self.values[idx]

    def axis_pin(self) -> int:
        """Lattice index of the largest grid point ``t* <= rho2`` on each axis."""
        return int(math.floor(self.rho2 / self.delta + 1e-9))


def sample_function(f: Callable[[np.ndarray], np.ndarray], dim_in: int, delta: float, rho1: float,
                    rho2: float) -> SampledMap:
    """Evaluate a vectorised ``f`` (points ``(n, dim_in)`` to ``(n, dim_out)``) on the grid."""
    ball = lattice_ball(VectorSpace(dim_in), delta, rho2)
    vals = np.asarray(f(ball.points), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return SampledMap(delta, rho1, rho2, ball.lattice, vals)


# ---------------------------------------------------------------------------
# hypotheses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisReport:
    continuity: float
    dyadic_defect: float
    random_defect: float
    triples_checked: int

    def holds(self, rho1: float) -> bool:
        tol = rho1 * (1 + 1e-9)
        return self.continuity <= tol and self.dyadic_defect <= tol and self.random_defect <= tol


def _defects(sigma: SampledMap, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    s = x + y
    ix, iy, i_s = sigma.index(x), sigma.index(y), sigma.index(s)
    ok = (ix >= 0) & (iy >= 0) & (i_s >= 0)
    d = sigma.values[ix[ok]] + sigma.values[iy[ok]] - sigma.values[i_s[ok]]
    return np.linalg.norm(d, axis=1)


def check_hypotheses(sigma: SampledMap, rng: np.random.Generator | None = None,
                     n_random: int = RANDOM_TRIPLES) -> HypothesisReport:
    """Continuity near 0, the dyadic halving chains, and random in-domain triples."""
    rng = rng or np.random.default_rng(0)
    near = np.linalg.norm(sigma.points, axis=1) <= sigma.delta * (1 + 1e-12)
    cont = float(np.linalg.norm(sigma.values[near], axis=1).max())

    pin = sigma.axis_pin()
    xs, ys = [], []
    for i in range(sigma.dim_in):
        for sign in (1, -1):
            k = pin
            while k >= 1:
                half = k // 2
                e = np.zeros(sigma.dim_in, dtype=np.int64)
                e[i] = sign
                xs += [half * e, half * e]
                ys += [(k - half) * e, -(k - half) * e]
                k = half
    dyadic = _defects(sigma, np.array(xs), np.array(ys)) if xs else np.zeros(0)

    n = len(sigma.lattice)
    a = sigma.lattice[rng.integers(0, n, size=4 * n_random)]
    b = sigma.lattice[rng.integers(0, n, size=4 * n_random)]
    inside = sigma.index(a + b) >= 0
    a, b = a[inside][:n_random], b[inside][:n_random]
    rand = _defects(sigma, a, b)
    return HypothesisReport(cont, float(dyadic.max(initial=0.0)), float(rand.max(initial=0.0)), len(a) + len(xs))


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearizeResult:
    phi: LinearMap
    sup_error: float
    K: float
    hypotheses: HypothesisReport | None = None
    constraint_residual: Fraction | None = None

    def to_json(self) -> dict:
        out = {"phi": self.phi.to_json(), "sup_error": self.sup_error, "K": self.K}
        if self.constraint_residual is not None:
            out["constraint_residual"] = str(self.constraint_residual)
        return out


def _pin_columns(sigma: SampledMap) -> tuple[np.ndarray, int]:
    pin = sigma.axis_pin()
    eye = np.eye(sigma.dim_in, dtype=np.int64)
    cols = sigma.at(pin * eye) / (pin * sigma.delta)
    return cols.T, pin


def _measure(sigma: SampledMap, phi: LinearMap) -> tuple[float, float]:
    err = float(np.linalg.norm(sigma.values - phi(sigma.points), axis=1).max())
    scale = (math.log2(1 / sigma.delta) + 1) * sigma.rho1
    return err, err / scale


def linearize(sigma: SampledMap, *, check: bool = True, rng: np.random.Generator | None = None) -> LinearizeResult:
    """Per-axis pinned linear maps assembled into ``phi``; reports ``sup |sigma - phi|`` and ``K``."""
    hyp = None
    if check:
        hyp = check_hypotheses(sigma, rng)
        if not hyp.holds(sigma.rho1):
            raise UsageError(f"sampled map violates the almost-additivity hypotheses: {hyp}")
    cols, _ = _pin_columns(sigma)
    phi = LinearMap(cols)
    err, K = _measure(sigma, phi)
    return LinearizeResult(phi, err, K, hyp)


def linearize_constrained(sigma: SampledMap, pi: LinearMap, psi: LinearMap, *, check: bool = True,
                          rng: np.random.Generator | None = None) -> LinearizeResult:
    """As :func:`linearize`, with ``pi o phi = psi`` enforced exactly.

    The pinned columns are moved by ``pi^T (pi pi^T)^-1 (psi - pi phi)`` in
    exact rational arithmetic, so the returned matrix is rational and the
    constraint residual is exactly zero.
    """
    if pi.shape[1] != sigma.dim_out or psi.shape[1] != sigma.dim_in or pi.shape[0] != psi.shape[0]:
        raise UsageError("shapes of pi, psi and sigma do not match")
    gap = float(np.linalg.norm(sigma.values @ pi.as_array().T - psi(sigma.points), axis=1).max())
    if gap > sigma.delta:
        raise InfeasibleConstraint(f"pi o sigma differs from psi by {gap:.3g} > delta")
    base = linearize(sigma, check=check, rng=rng)
    P = pi.as_fractions()
    Pt = exact_linalg.transpose(P)
    try:
        gram_inv = exact_linalg.inverse(exact_linalg.matmul(P, Pt))
    except ValueError as exc:
        raise InfeasibleConstraint("pi must have full row rank") from exc
    phi = base.phi.as_fractions()
    diff = [[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(psi.as_fractions(), exact_linalg.matmul(P, phi))]
    corr = exact_linalg.matmul(Pt, exact_linalg.matmul(gram_inv, diff))
    exact = tuple(tuple(a + b for a, b in zip(r1, r2)) for r1, r2 in zip(phi, corr))
    phi_map = LinearMap(exact)
    resid_rows = exact_linalg.matmul(P, [list(r) for r in exact])
    residual = max((abs(a - b) for r1, r2 in zip(resid_rows, psi.as_fractions()) for a, b in zip(r1, r2)),
                   default=Fraction(0))
    err, K = _measure(sigma, phi_map)
    return LinearizeResult(phi_map, err, K, base.hypotheses, residual)


def binary_expansion_diagnostic(sigma: SampledMap, phi: LinearMap, axis: int = 0) -> list[dict]:
    """Along one axis: per dyadic level ``n``, ``|sigma(t* 2^-n) - phi(t* 2^-n)|`` against ``rho1``."""
    pin = sigma.axis_pin()
    rows = []
    k, n = pin, 0
    while k >= 1:
        e = np.zeros(sigma.dim_in, dtype=np.int64)
        e[axis] = k
        err = float(np.linalg.norm(sigma.at(e)[0] - phi(e * sigma.delta)))
        rows.append({"level": n, "t": k * sigma.delta, "error": err, "rho1": sigma.rho1})
        k //= 2
        n += 1
    return rows


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------

def save_sampled_map(sigma: SampledMap, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(sigma.dim_in)] + [f"v{i + 1}" for i in range(sigma.dim_out)])
        for p, v in zip(sigma.points, sigma.values):
            w.writerow([repr(float(c)) for c in p] + [repr(float(c)) for c in v])


def load_sampled_map(path: str | Path, delta: float, rho1: float, rho2: float) -> SampledMap:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    dim_in = sum(1 for h in header if h.startswith("x"))
    data = np.array(body, dtype=float).reshape(-1, len(header))
    lat = np.round(data[:, :dim_in] / delta).astype(np.int64)
    return SampledMap(delta, rho1, rho2, lat, data[:, dim_in:])


def save_linear_map(result: LinearizeResult, path: str | Path) -> None:
    Path(path).write_text(json.dumps(result.to_json(), indent=2, sort_keys=True) + "\n")
