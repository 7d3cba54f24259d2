"""Concrete Lie groups near the identity: exp, log, chart metric, Ad, subgroup catalog.

All backend methods are batched over leading axes.  Group elements are
matrices, except for ``abelian:<d>`` where they are plain vectors.  Lie
algebra elements are coefficient vectors over a fixed ordered basis, normed by
the Euclidean norm of the coefficients.

The distance used everywhere is the chart distance ``|log(g^-1 h)|``.  It is
left-invariant by construction and bi-Lipschitz to a left-invariant
Riemannian distance on a neighbourhood of the identity.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UsageError

CLOSURE_TOL = 1e-12
MEMBERSHIP_TOL = 1e-12
_CHART_SLACK = 1e-9


@dataclass(frozen=True)
class SubgroupDescriptor:
    """Closed connected subgroup given by an orthonormal basis of its Lie algebra (rows)."""

    name: str
    kind: str  # "trivial" | "normal-factor kernel" | "lower-central term" | "catalog"
    basis: np.ndarray = field(repr=False)
    normal: bool = False

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    def projector(self, ambient_dim: int) -> np.ndarray:
        if self.dim == 0:
            return np.zeros((ambient_dim, ambient_dim))
        return self.basis.T @ self.basis


def _orthonormal_rows(vectors, dim: int) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=float).reshape(-1, dim)
    if vectors.shape[0] == 0:
        return np.zeros((0, dim))
    u, sv, vt = np.linalg.svd(vectors, full_matrices=False)
    r = int(np.sum(sv > 1e-12 * max(1.0, sv[0])))
    return vt[:r]


class LieGroupBackend:
    """Interface shared by all backends; see the module docstring for conventions."""

    name: str
    dim: int
    chart_radius: float
    basis_names: tuple[str, ...]
    element_shape: tuple[int, ...]

    # --- required by subclasses ----------------------------------------
    def identity(self) -> np.ndarray:
        raise NotImplementedError

    def _exp(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _log(self, g: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def mul(self, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inv(self, g: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def membership_residual(self, g: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @functools.cached_property
    def structure_constants(self) -> np.ndarray:
        """``c[i, j, k]``: coefficient of ``e_k`` in ``[e_i, e_j]``."""
        raise NotImplementedError

    # --- shared ---------------------------------------------------------
    def exp(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise UsageError(f"{self.name}: expected algebra vectors of length {self.dim}, got {v.shape}")
        if np.any(np.linalg.norm(v, axis=-1) > self.chart_radius + _CHART_SLACK):
            raise DomainError(f"{self.name}: exp argument outside the chart radius {self.chart_radius}")
        return self._exp(v)

    def exp_unchecked(self, v) -> np.ndarray:
        """exp without the chart-radius check (used for word evaluation)."""
        return self._exp(np.asarray(v, dtype=float))

    def log(self, g) -> np.ndarray:
        v = self._log(np.asarray(g))
        if np.any(~np.isfinite(v)) or np.any(np.linalg.norm(v, axis=-1) > self.chart_radius + _CHART_SLACK):
            raise DomainError(f"{self.name}: element outside the log chart (radius {self.chart_radius})")
        return v

    def dist(self, g, h) -> np.ndarray:
        return np.linalg.norm(self.log(self.mul(self.inv(g), h)), axis=-1)

    def bracket(self, u, v) -> np.ndarray:
        return np.einsum("...i,...j,ijk->...k", np.asarray(u, float), np.asarray(v, float), self.structure_constants)

    def ad(self, u) -> np.ndarray:
        """Matrix of ``ad u`` acting on coefficient vectors."""
        return np.einsum("...i,ijk->...kj", np.asarray(u, float), self.structure_constants)

    def adjoint(self, g) -> np.ndarray:
        raise NotImplementedError

    def random_algebra(self, rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
        """``n`` points uniform in the algebra ball of the given radius."""
        d = rng.standard_normal((n, self.dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = radius * rng.random(n) ** (1.0 / self.dim)
        return d * r[:, None]

    def random_elements(self, rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
        return self.exp(self.random_algebra(rng, n, radius))

    # --- Lie algebra structure ------------------------------------------
    def bracket_span(self, a_basis: np.ndarray, b_basis: np.ndarray) -> np.ndarray:
        a_basis = np.asarray(a_basis, float).reshape(-1, self.dim)
        b_basis = np.asarray(b_basis, float).reshape(-1, self.dim)
        vecs = [self.bracket(a, b) for a in a_basis for b in b_basis]
        return _orthonormal_rows(vecs, self.dim)

    @functools.cached_property
    def derived_algebra(self) -> np.ndarray:
        eye = np.eye(self.dim)
        return self.bracket_span(eye, eye)

    @property
    def is_perfect(self) -> bool:
        return self.derived_algebra.shape[0] == self.dim

    def lower_central_series(self) -> list[np.ndarray]:
        """``[g, [g, g], [g, [g, g]], ...]`` until it stabilises."""
        eye = np.eye(self.dim)
        terms = [eye]
        while True:
            nxt = self.bracket_span(eye, terms[-1])
            if nxt.shape[0] == terms[-1].shape[0]:
                return terms
            terms.append(nxt)
            if nxt.shape[0] == 0:
                return terms

    def closure_residual(self, basis: np.ndarray) -> float:
        """Largest component of a bracket of basis vectors leaving their span."""
        basis = np.asarray(basis, float).reshape(-1, self.dim)
        if basis.shape[0] == 0:
            return 0.0
        proj = basis.T @ basis
        worst = 0.0
        for a, b in itertools.product(basis, repeat=2):
            w = self.bracket(a, b)
            worst = max(worst, float(np.linalg.norm(w - proj @ w)))
        return worst

    # --- subgroups and quotients ----------------------------------------
    def _catalog_spec(self) -> list[tuple[str, str, list, bool]]:
        return []

    @functools.cached_property
    def subgroups(self) -> dict[str, SubgroupDescriptor]:
        out = {"trivial": SubgroupDescriptor("trivial", "trivial", np.zeros((0, self.dim)), normal=True)}
        for name, kind, vectors, normal in self._catalog_spec():
            out[name] = SubgroupDescriptor(name, kind, _orthonormal_rows(vectors, self.dim), normal)
        return out

    def normal_subgroups(self) -> dict[str, SubgroupDescriptor]:
        return {k: h for k, h in self.subgroups.items() if h.normal}

    def abelianization(self):
        """(target dimension, coordinate projection) or None for perfect groups."""
        if self.is_perfect:
            return None
        complement = _complement(self.derived_algebra, self.dim)
        return complement.shape[0], complement


def _complement(rows: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis of the complement of the row span.

    Gram-Schmidt over the standard basis in order, so coordinate complements
    come out as plain coordinate vectors.
    """
    basis = [r for r in np.asarray(rows, float).reshape(-1, dim)]
    out = []
    for e in np.eye(dim):
        w = e.copy()
        for b in basis + out:
            w -= (w @ b) * b
        n = np.linalg.norm(w)
        if n > 1e-9:
            out.append(w / n)
    return np.array(out).reshape(-1, dim)


# ---------------------------------------------------------------------------
# Abelian
# ---------------------------------------------------------------------------

class Abelian(LieGroupBackend):
    """``R^d`` under addition; exp and log are the identity map."""

    def __init__(self, d: int):
        if d < 1:
            raise UsageError("abelian dimension must be >= 1")
        self.d = self.dim = d
        self.name = f"abelian:{d}"
        self.chart_radius = math.inf
        self.basis_names = tuple(f"e{i + 1}" for i in range(d))
        self.element_shape = (d,)

    def identity(self):
        return np.zeros(self.d)

    def _exp(self, v):
        return np.array(v, dtype=float, copy=True)

    def _log(self, g):
        return np.array(g, dtype=float, copy=True)

    def mul(self, g, h):
        return np.asarray(g, float) + np.asarray(h, float)

    def inv(self, g):
        return -np.asarray(g, float)

    def membership_residual(self, g):
        return np.zeros(np.shape(g)[:-1])

    @functools.cached_property
    def structure_constants(self):
        return np.zeros((self.d, self.d, self.d))

    def adjoint(self, g):
        g = np.asarray(g, float)
        return np.broadcast_to(np.eye(self.d), g.shape[:-1] + (self.d, self.d)).copy()

    def _catalog_spec(self):
        eye = np.eye(self.d)
        out = []
        for k in range(1, self.d):
            for idx in itertools.combinations(range(self.d), k):
                label = "".join(str(i + 1) for i in idx)
                out.append((f"coords{label}", "catalog", eye[list(idx)], True))
        return out


# ---------------------------------------------------------------------------
# Matrix groups
# ---------------------------------------------------------------------------

def _expm_series(x: np.ndarray, order: int = 18) -> np.ndarray:
    """Batched matrix exponential: Taylor series after scaling, then repeated squaring."""
    x = np.asarray(x)
    norms = np.abs(x).sum(axis=-2).max(axis=-1)
    squarings = np.maximum(0, np.ceil(np.log2(np.maximum(norms, 1e-300) / 0.25))).astype(int)
    scaled = x / (2.0 ** squarings)[..., None, None]
    n = x.shape[-1]
    eye = np.broadcast_to(np.eye(n, dtype=x.dtype), x.shape)
    out = eye.copy()
    term = eye.copy()
    for k in range(1, order + 1):
        term = term @ scaled / k
        out = out + term
    for j in range(int(squarings.max(initial=0))):
        mask = squarings > j
        out = np.where(mask[..., None, None], out @ out, out)
    return out


def _sqrtm_db(a: np.ndarray, iters: int = 30) -> np.ndarray:
    """Batched principal square root (Denman-Beavers iteration)."""
    y = a.copy()
    z = np.broadcast_to(np.eye(a.shape[-1], dtype=a.dtype), a.shape).copy()
    for _ in range(iters):
        y_next = 0.5 * (y + np.linalg.inv(z))
        z = 0.5 * (z + np.linalg.inv(y))
        delta = np.max(np.abs(y_next - y)) if y.size else 0.0
        y = y_next
        if delta < 1e-16:
            break
    return y


def _logm_series(g: np.ndarray, terms: int = 40) -> np.ndarray:
    """Batched principal matrix log via inverse scaling and squaring."""
    g = np.array(g, copy=True)
    n = g.shape[-1]
    eye = np.eye(n, dtype=g.dtype)
    flat = g.reshape(-1, n, n)
    roots = np.zeros(flat.shape[0], dtype=int)
    for _ in range(60):
        dev = np.abs(flat - eye).sum(axis=-2).max(axis=-1)
        todo = dev > 0.2
        if not np.any(todo):
            break
        flat[todo] = _sqrtm_db(flat[todo])
        roots[todo] += 1
    m = flat - eye
    out = np.zeros_like(m)
    power = np.broadcast_to(eye, m.shape).copy()
    for k in range(1, terms + 1):
        power = power @ m
        out = out + ((-1) ** (k + 1) / k) * power
    out *= (2.0 ** roots)[:, None, None]
    return out.reshape(g.shape)


class MatrixBackend(LieGroupBackend):
    basis_matrices: np.ndarray  # (dim, n, n)

    def _setup(self, basis_matrices: np.ndarray):
        self.basis_matrices = np.asarray(basis_matrices)
        self.dim = self.basis_matrices.shape[0]
        n = self.basis_matrices.shape[-1]
        self.element_shape = (n, n)
        flat = self.basis_matrices.reshape(self.dim, -1)
        stacked = np.concatenate([flat.real, flat.imag], axis=1) if np.iscomplexobj(flat) else flat
        self._coord_pinv = np.linalg.pinv(stacked)

    @property
    def dtype(self):
        return self.basis_matrices.dtype

    def identity(self):
        return np.eye(self.element_shape[0], dtype=self.dtype)

    def to_matrix(self, v) -> np.ndarray:
        return np.einsum("...i,ijk->...jk", np.asarray(v, float), self.basis_matrices)

    def coords(self, x) -> np.ndarray:
        x = np.asarray(x)
        flat = x.reshape(x.shape[:-2] + (-1,))
        if np.iscomplexobj(self.basis_matrices):
            flat = np.concatenate([flat.real, flat.imag], axis=-1)
        else:
            flat = flat.real
        return flat @ self._coord_pinv

    def _exp(self, v):
        return _expm_series(self.to_matrix(v).astype(self.dtype))

    def _log(self, g):
        return self.coords(_logm_series(np.asarray(g, dtype=self.dtype)))

    def mul(self, g, h):
        return np.asarray(g) @ np.asarray(h)

    def inv(self, g):
        return np.linalg.inv(np.asarray(g))

    @functools.cached_property
    def structure_constants(self):
        b = self.basis_matrices
        c = np.zeros((self.dim, self.dim, self.dim))
        for i in range(self.dim):
            for j in range(self.dim):
                c[i, j] = self.coords(b[i] @ b[j] - b[j] @ b[i])
        return c

    def adjoint(self, g):
        g = np.asarray(g)
        ginv = self.inv(g)
        conj = np.einsum("...ab,kbc,...cd->...kad", g, self.basis_matrices, ginv)
        return np.swapaxes(self.coords(conj), -1, -2)


class Heisenberg3(MatrixBackend):
    """Upper unitriangular 3x3 matrices; basis X = E12, Y = E23, Z = E13, [X, Y] = Z."""

    def __init__(self):
        self.name = "heis3"
        self.chart_radius = 1.0
        self.basis_names = ("X", "Y", "Z")
        b = np.zeros((3, 3, 3))
        b[0, 0, 1] = b[1, 1, 2] = b[2, 0, 2] = 1.0
        self._setup(b)

    def _exp(self, v):
        v = np.asarray(v, float)
        g = np.broadcast_to(np.eye(3), v.shape[:-1] + (3, 3)).copy()
        a, b, c = v[..., 0], v[..., 1], v[..., 2]
        g[..., 0, 1] = a
        g[..., 1, 2] = b
        g[..., 0, 2] = c + 0.5 * a * b
        return g

    def _log(self, g):
        g = np.asarray(g, float)
        a, b = g[..., 0, 1], g[..., 1, 2]
        return np.stack([a, b, g[..., 0, 2] - 0.5 * a * b], axis=-1)

    def inv(self, g):
        g = np.asarray(g, float)
        out = np.broadcast_to(np.eye(3), g.shape).copy()
        a, b, c = g[..., 0, 1], g[..., 1, 2], g[..., 0, 2]
        out[..., 0, 1] = -a
        out[..., 1, 2] = -b
        out[..., 0, 2] = a * b - c
        return out

    def membership_residual(self, g):
        g = np.asarray(g, float)
        lower = np.abs(g[..., 1, 0]) + np.abs(g[..., 2, 0]) + np.abs(g[..., 2, 1])
        diag = np.abs(np.diagonal(g, axis1=-2, axis2=-1) - 1).sum(axis=-1)
        return lower + diag

    def _catalog_spec(self):
        X, Y, Z = np.eye(3)
        return [
            ("center", "lower-central term", [Z], True),
            ("span(X,Z)", "catalog", [X, Z], True),
            ("span(Y,Z)", "catalog", [Y, Z], True),
            ("line(X)", "catalog", [X], False),
            ("line(Y)", "catalog", [Y], False),
            ("line(X+Y)", "catalog", [X + Y], False),
            ("line(X-Y)", "catalog", [X - Y], False),
        ]


_PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


class SU2(MatrixBackend):
    """SU(2) with basis e_k = -i sigma_k, so [e1, e2] = 2 e3 and exp(t e_k) has angle t.

    The chart radius pi - 0.1 keeps the log away from -I.
    """

    def __init__(self):
        self.name = "su2"
        self.chart_radius = math.pi - 0.1
        self.basis_names = ("e1", "e2", "e3")
        self._setup(-1j * _PAULI)

    def _exp(self, v):
        v = np.asarray(v, float)
        theta = np.linalg.norm(v, axis=-1)
        sinc = np.where(theta > 0, np.sin(theta) / np.where(theta > 0, theta, 1.0), 1.0)
        g = np.cos(theta)[..., None, None] * np.eye(2) + sinc[..., None, None] * self.to_matrix(v)
        return g

    def _log(self, g):
        g = np.asarray(g, complex)
        w1 = -0.5 * (g[..., 1, 0].imag + g[..., 0, 1].imag)
        w2 = 0.5 * (g[..., 1, 0].real - g[..., 0, 1].real)
        w3 = 0.5 * (g[..., 1, 1].imag - g[..., 0, 0].imag)
        w = np.stack([w1, w2, w3], axis=-1)
        s = np.linalg.norm(w, axis=-1)
        c = 0.5 * (g[..., 0, 0].real + g[..., 1, 1].real)
        theta = np.arctan2(s, c)
        factor = np.where(s > 0, theta / np.where(s > 0, s, 1.0), 1.0)
        # -I: angle pi with no axis, outside every chart
        factor = np.where((s == 0) & (c < 0), np.nan, factor)
        return w * factor[..., None]

    def inv(self, g):
        return np.conj(np.swapaxes(np.asarray(g), -1, -2))

    def membership_residual(self, g):
        g = np.asarray(g, complex)
        unit = np.abs(g @ np.conj(np.swapaxes(g, -1, -2)) - np.eye(2)).sum(axis=(-1, -2))
        return unit + np.abs(np.linalg.det(g) - 1)

    def _catalog_spec(self):
        e1, e2, e3 = np.eye(3)
        return [
            ("torus(e1)", "catalog", [e1], False),
            ("torus(e2)", "catalog", [e2], False),
            ("diagonal", "catalog", [e3], False),
        ]


def _sl2_basis() -> np.ndarray:
    H = np.array([[1.0, 0.0], [0.0, -1.0]])
    E = np.array([[0.0, 1.0], [0.0, 0.0]])
    F = np.array([[0.0, 0.0], [1.0, 0.0]])
    return np.stack([H, E, F])


class SL2R(MatrixBackend):
    """SL(2, R) with basis H, E, F (elementary matrices)."""

    def __init__(self):
        self.name = "sl2r"
        self.chart_radius = 1.0
        self.basis_names = ("H", "E", "F")
        self._setup(_sl2_basis())

    def inv(self, g):
        g = np.asarray(g, float)
        out = np.empty_like(g)
        out[..., 0, 0] = g[..., 1, 1]
        out[..., 1, 1] = g[..., 0, 0]
        out[..., 0, 1] = -g[..., 0, 1]
        out[..., 1, 0] = -g[..., 1, 0]
        return out

    def membership_residual(self, g):
        return np.abs(np.linalg.det(np.asarray(g, float)) - 1)

    def _catalog_spec(self):
        H, E, F = np.eye(3)
        return [
            ("diagonal", "catalog", [H], False),
            ("upper-unipotent", "catalog", [E], False),
            ("lower-unipotent", "catalog", [F], False),
            ("rotations", "catalog", [E - F], False),
            ("upper-borel", "catalog", [H, E], False),
            ("lower-borel", "catalog", [H, F], False),
        ]


_J = np.array([[0.0, 1.0], [-1.0, 0.0]])


class SL2RxH3(MatrixBackend):
    """SL(2, R) acting on the Heisenberg group H3 through its symplectic action on R^2.

    Realised in 4x4 matrices ``[[1, p, c], [0, A, q], [0, 0, 1]]`` with
    ``A`` in SL(2, R) and ``p = q^T J A / 2``.  Basis: H, E, F of sl(2),
    then X, Y, Z of the Heisenberg ideal with [X, Y] = Z.  The Lie algebra is
    perfect while its radical is the (non-abelian) Heisenberg ideal.
    """

    def __init__(self):
        self.name = "sl2rxh3"
        self.chart_radius = 1.0
        self.basis_names = ("H", "E", "F", "X", "Y", "Z")
        b = np.zeros((6, 4, 4))
        b[:3, 1:3, 1:3] = _sl2_basis()
        for k, q in enumerate(np.eye(2)):
            b[3 + k, 1:3, 3] = q
            b[3 + k, 0, 1:3] = 0.5 * q @ _J
        b[5, 0, 3] = 1.0
        self._setup(b)

    def membership_residual(self, g):
        g = np.asarray(g, float)
        A = g[..., 1:3, 1:3]
        q = g[..., 1:3, 3]
        p = g[..., 0, 1:3]
        shape = np.abs(g[..., 0, 0] - 1) + np.abs(g[..., 3, 3] - 1)
        shape = shape + np.abs(g[..., 1:3, 0]).sum(-1) + np.abs(g[..., 3, :3]).sum(-1)
        det = np.abs(np.linalg.det(A) - 1)
        pair = np.abs(p - 0.5 * np.einsum("...i,ij,...jk->...k", q, _J, A)).sum(-1)
        return shape + det + pair

    def _catalog_spec(self):
        H, E, F, X, Y, Z = np.eye(6)
        return [
            ("heisenberg", "normal-factor kernel", [X, Y, Z], True),
            ("center", "lower-central term", [Z], True),
            ("sl2-factor", "catalog", [H, E, F], False),
            ("sl2xcenter", "catalog", [H, E, F, Z], False),
            ("borel-ext", "catalog", [H, E, X, Y, Z], False),
            ("diagonal", "catalog", [H], False),
        ]


# ---------------------------------------------------------------------------
# Registry and element wrappers
# ---------------------------------------------------------------------------

def get_backend(name: str) -> LieGroupBackend:
    """Backend from its CLI name: ``abelian:<d>``, ``heis3``, ``su2``, ``sl2r``, ``sl2rxh3``."""
    key = name.strip().lower()
    if key.startswith("abelian:"):
        return _abelian(int(key.split(":", 1)[1]))
    simple = {"heis3": Heisenberg3, "su2": SU2, "sl2r": SL2R, "sl2rxh3": SL2RxH3}
    if key not in simple:
        raise UsageError(f"unknown backend {name!r}; expected abelian:<d>, heis3, su2, sl2r or sl2rxh3")
    return _singleton(key, simple[key])


@functools.lru_cache(maxsize=None)
def _abelian(d: int) -> Abelian:
    return Abelian(d)


@functools.lru_cache(maxsize=None)
def _singleton(key: str, cls):
    return cls()


@dataclass(frozen=True)
class AlgebraVector:
    backend: LieGroupBackend
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.backend.dim,):
            raise UsageError(f"{self.backend.name} algebra vectors have length {self.backend.dim}")
        object.__setattr__(self, "coeffs", c)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def exp(self) -> GroupElement:
        return exp(self)


@dataclass(frozen=True)
class GroupElement:
    backend: LieGroupBackend
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data))
        if self.data.shape != self.backend.element_shape:
            raise UsageError(f"{self.backend.name} elements have shape {self.backend.element_shape}")
        if float(self.backend.membership_residual(self.data)) > MEMBERSHIP_TOL:
            raise UsageError(f"not an element of {self.backend.name}")

    def __mul__(self, other: GroupElement) -> GroupElement:
        return GroupElement(self.backend, self.backend.mul(self.data, other.data))

    def inverse(self) -> GroupElement:
        return GroupElement(self.backend, self.backend.inv(self.data))

    def log(self) -> AlgebraVector:
        return log(self)

    def to_json(self) -> list:
        d = self.data
        if np.iscomplexobj(d):
            return [[[z.real, z.imag] for z in row] for row in d.tolist()]
        return d.tolist()


def identity(backend: LieGroupBackend) -> GroupElement:
    return GroupElement(backend, backend.identity())


def exp(x: AlgebraVector) -> GroupElement:
    return GroupElement(x.backend, x.backend.exp(x.coeffs))


def log(g: GroupElement) -> AlgebraVector:
    return AlgebraVector(g.backend, g.backend.log(g.data))


def dist(g: GroupElement, h: GroupElement) -> float:
    if g.backend is not h.backend:
        raise UsageError("elements live in different backends")
    return float(g.backend.dist(g.data, h.data))


def adjoint(g: GroupElement) -> np.ndarray:
    """Matrix of ``Ad g`` on coefficient vectors."""
    return g.backend.adjoint(g.data)


def dist_to_subgroup(g: GroupElement | np.ndarray, H: SubgroupDescriptor, backend: LieGroupBackend | None = None) -> np.ndarray | float:
    """Chart distance from ``log g`` to the Lie algebra of ``H`` (batched on raw arrays)."""
    if isinstance(g, GroupElement):
        backend, data = g.backend, g.data
    else:
        data = g
        if backend is None:
            raise UsageError("raw arrays need an explicit backend")
    v = backend.log(data)
    resid = v - v @ H.projector(backend.dim)
    out = np.linalg.norm(resid, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class QuotientMap:
    """Projection ``G -> G/N`` into another backend (with the quotient metric)."""

    source: LieGroupBackend
    target: LieGroupBackend
    subgroup: SubgroupDescriptor
    kind: str  # "identity" | "abelian" | "block"
    matrix: np.ndarray | None = None

    def __call__(self, g: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return np.asarray(g)
        if self.kind == "abelian":
            return self.source.log(g) @ self.matrix.T
        return np.asarray(g)[..., 1:3, 1:3]

    def project_coords(self, chart: np.ndarray) -> np.ndarray:
        """Chart coordinates of the image, given chart coordinates in the source."""
        chart = np.asarray(chart, float)
        if self.kind == "identity":
            return chart
        if self.kind == "abelian":
            return chart @ self.matrix.T
        # sl(2) part of the log is the log of the SL(2) block
        return chart[..., :3]


def quotient_map(backend: LieGroupBackend, N: SubgroupDescriptor | str) -> QuotientMap:
    if isinstance(N, str):
        if N not in backend.subgroups:
            raise UsageError(f"{backend.name} has no catalog subgroup {N!r}")
        N = backend.subgroups[N]
    if not N.normal:
        raise UsageError(f"{N.name} is not a normal subgroup in the {backend.name} catalog")
    if N.dim == 0:
        return QuotientMap(backend, backend, N, "identity")
    derived = backend.derived_algebra
    proj = N.projector(backend.dim)
    if derived.shape[0] == 0 or np.allclose(derived @ proj, derived, atol=1e-12):
        comp = _complement(N.basis, backend.dim)
        return QuotientMap(backend, get_backend(f"abelian:{comp.shape[0]}"), N, "abelian", comp)
    if isinstance(backend, SL2RxH3) and N.name == "heisenberg":
        return QuotientMap(backend, get_backend("sl2r"), N, "block")
    raise UsageError(f"no quotient backend registered for {backend.name}/{N.name}")


def quotient_project(g: GroupElement, N: SubgroupDescriptor | str) -> GroupElement:
    q = quotient_map(g.backend, N)
    return GroupElement(q.target, q(g.data))
