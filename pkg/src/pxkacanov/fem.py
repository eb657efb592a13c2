"""P1 finite elements for the relaxed p(x)-Poisson problem.

All integrals involving ``p(x)`` or ``f`` use a quadrature rule on each
triangle; gradients of P1 functions are constant per element, so the
relaxed coefficient varies inside an element only through ``p(x_q)``.
Dirichlet conditions are imposed by restricting to interior vertices.
"""
from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernels import (ExponentField, RelaxationPair, mu_from_values,
                      phi_from_values)
from .linalg import SparseSpd
from .mesh import TriMesh


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Barycentric points ``(nq, 3)`` and weights summing to one."""

    points: np.ndarray
    weights: np.ndarray
    name: str = ""

    def __post_init__(self):
        if not np.isclose(self.weights.sum(), 1.0, rtol=0, atol=1e-14):
            raise ValueError("quadrature weights must sum to 1")
        if np.any(self.weights <= 0) or np.any(self.points < 0):
            raise ValueError("weights and barycentric coordinates must be positive")


MIDEDGE = QuadratureRule(
    np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    np.full(3, 1.0 / 3.0),
    "midedge3",
)


def _dunavant7() -> QuadratureRule:
    s = math.sqrt(15.0)
    a1, b1 = (6.0 - s) / 21.0, (9.0 + 2.0 * s) / 21.0
    a2, b2 = (6.0 + s) / 21.0, (9.0 - 2.0 * s) / 21.0
    w1, w2 = (155.0 - s) / 1200.0, (155.0 + s) / 1200.0
    pts = [[1 / 3, 1 / 3, 1 / 3],
           [b1, a1, a1], [a1, b1, a1], [a1, a1, b1],
           [b2, a2, a2], [a2, b2, a2], [a2, a2, b2]]
    return QuadratureRule(np.array(pts), np.array([9 / 40, w1, w1, w1, w2, w2, w2]), "dunavant7")


# degree-5 exact
DUNAVANT7 = _dunavant7()


@dataclass(frozen=True)
class SourceTerm:
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, x, y):
        return np.asarray(self.func(x, y), dtype=float)


@dataclass(eq=False)
class FemFunction:
    """Nodal P1 coefficients on ``mesh``, zero on boundary vertices."""

    mesh: TriMesh
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.mesh.n_vertices,):
            raise ValueError(
                f"expected {self.mesh.n_vertices} coefficients, got {self.coeffs.shape}")
        if np.any(self.coeffs[self.mesh.boundary] != 0.0):
            raise ValueError("FemFunction must vanish on boundary vertices")

    @classmethod
    def zeros(cls, mesh: TriMesh) -> "FemFunction":
        return cls(mesh, np.zeros(mesh.n_vertices))

    @classmethod
    def from_interior(cls, mesh: TriMesh, values) -> "FemFunction":
        c = np.zeros(mesh.n_vertices)
        c[mesh.interior] = values
        return cls(mesh, c)

    @classmethod
    def interpolate(cls, mesh: TriMesh, func) -> "FemFunction":
        """Nodal interpolant, with boundary values forced to zero."""
        c = np.asarray(func(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float).copy()
        c[mesh.boundary] = 0.0
        return cls(mesh, c)

    @property
    def interior_values(self) -> np.ndarray:
        return self.coeffs[self.mesh.interior]

    def gradients(self) -> np.ndarray:
        """Constant element gradients, shape ``(nt, 2)``."""
        return np.einsum("kid,ki->kd", self.mesh.grads, self.coeffs[self.mesh.triangles])

    def __add__(self, other: "FemFunction") -> "FemFunction":
        _same_mesh(self, other)
        return FemFunction(self.mesh, self.coeffs + other.coeffs)

    def __sub__(self, other: "FemFunction") -> "FemFunction":
        _same_mesh(self, other)
        return FemFunction(self.mesh, self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "FemFunction":
        return FemFunction(self.mesh, float(c) * self.coeffs)

    __rmul__ = __mul__


def _same_mesh(u: FemFunction, v: FemFunction) -> None:
    if u.mesh is not v.mesh:
        raise ValueError("functions live on different meshes")


def _check_on(mesh: TriMesh, u: FemFunction) -> None:
    if u.mesh is not mesh:
        raise ValueError("function is not defined on this mesh")


def quadrature_points(mesh: TriMesh, quad: QuadratureRule) -> np.ndarray:
    """Physical quadrature points, shape ``(nt, nq, 2)``."""
    return np.einsum("qi,kid->kqd", quad.points, mesh.vertices[mesh.triangles])


def exponent_at_quadrature(mesh: TriMesh, p: ExponentField, quad: QuadratureRule) -> np.ndarray:
    xq = quadrature_points(mesh, quad)
    return p(xq[..., 0], xq[..., 1])


# --- sparsity pattern over interior vertices, built once per mesh ---------

_PATTERNS: "weakref.WeakKeyDictionary[TriMesh, tuple]" = weakref.WeakKeyDictionary()


def _pattern(mesh: TriMesh):
    cached = _PATTERNS.get(mesh)
    if cached is not None:
        return cached
    idx = mesh.interior_index[mesh.triangles]  # (nt, 3)
    rows = np.repeat(idx[:, :, None], 3, axis=2)
    cols = np.repeat(idx[:, None, :], 3, axis=1)
    valid = ((rows >= 0) & (cols >= 0)).ravel()
    ni = mesh.interior.size
    keys = rows.ravel()[valid] * ni + cols.ravel()[valid]
    uniq, position = np.unique(keys, return_inverse=True)
    indptr = np.searchsorted(uniq, np.arange(ni + 1) * ni).astype(np.int64)
    indices = (uniq % ni).astype(np.int64)
    local = np.einsum("kid,kjd->kij", mesh.grads, mesh.grads) * mesh.areas[:, None, None]
    result = (indptr, indices, valid, position.ravel(), uniq.size, local)
    _PATTERNS[mesh] = result
    return result


def _assemble(mesh: TriMesh, coef: np.ndarray) -> SparseSpd:
    indptr, indices, valid, position, nnz, local = _pattern(mesh)
    vals = (local * coef[:, None, None]).ravel()[valid]
    # bincount sums in input order, so (i, j) and (j, i) agree bit for bit
    data = np.bincount(position, weights=vals, minlength=nnz)
    return SparseSpd(indptr, indices, data)


def element_coefficient(mesh: TriMesh, p: ExponentField, eps: RelaxationPair,
                        u: FemFunction, quad: QuadratureRule = MIDEDGE,
                        pq: np.ndarray | None = None) -> np.ndarray:
    """Quadrature average of ``mu_eps(x, |grad u|^2)`` on each element."""
    _check_on(mesh, u)
    if pq is None:
        pq = exponent_at_quadrature(mesh, p, quad)
    g2 = (u.gradients() ** 2).sum(axis=1)
    return mu_from_values(pq, eps, g2[:, None]) @ quad.weights


def laplacian(mesh: TriMesh) -> SparseSpd:
    """Unweighted P1 stiffness matrix on interior vertices."""
    return _assemble(mesh, np.ones(mesh.n_triangles))


def assemble_weighted_stiffness(mesh: TriMesh, p: ExponentField, eps: RelaxationPair,
                                u: FemFunction, quad: QuadratureRule = MIDEDGE,
                                pq: np.ndarray | None = None) -> SparseSpd:
    """Matrix of ``A_eps[u](v)(w) = int mu_eps(x, |grad u|^2) grad v . grad w``."""
    return _assemble(mesh, element_coefficient(mesh, p, eps, u, quad, pq))


def assemble_load_full(mesh: TriMesh, f: SourceTerm, quad: QuadratureRule = MIDEDGE) -> np.ndarray:
    """Load vector over all vertices, boundary included."""
    xq = quadrature_points(mesh, quad)
    fq = f(xq[..., 0], xq[..., 1])
    bad = ~np.isfinite(fq)
    if np.any(bad):
        k, q = np.argwhere(bad)[0]
        raise ValueError(f"source is not finite at quadrature point {tuple(xq[k, q])}")
    local = np.einsum("kq,q,qi->ki", fq, quad.weights, quad.points) * mesh.areas[:, None]
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(),
                       minlength=mesh.n_vertices)


def assemble_load(mesh: TriMesh, f: SourceTerm, quad: QuadratureRule = MIDEDGE) -> np.ndarray:
    """``l_f(phi_i)`` for every interior vertex ``i``."""
    return assemble_load_full(mesh, f, quad)[mesh.interior]


def residual(mesh: TriMesh, p: ExponentField, eps: RelaxationPair, u: FemFunction,
             load: np.ndarray, quad: QuadratureRule = MIDEDGE) -> np.ndarray:
    """Coefficients of ``F_eps(u) = A_eps[u](u) - l_f`` against the interior hat functions."""
    load = np.asarray(load, dtype=float)
    if load.shape != (mesh.interior.size,):
        raise ValueError(f"load has shape {load.shape}, expected ({mesh.interior.size},)")
    a = assemble_weighted_stiffness(mesh, p, eps, u, quad)
    return a.csr @ u.interior_values - load


def _linear_term(mesh: TriMesh, u: FemFunction, f, quad: QuadratureRule) -> float:
    load = f if isinstance(f, np.ndarray) else assemble_load(mesh, f, quad)
    return math.fsum(load * u.interior_values)


def energy_relaxed(mesh: TriMesh, p: ExponentField, eps: RelaxationPair, u: FemFunction,
                   f, quad: QuadratureRule = MIDEDGE, pq: np.ndarray | None = None) -> float:
    """``E_eps(u) = int phi_eps(x, |grad u|^2) - int f u``.

    ``f`` is a :class:`SourceTerm` or an already assembled interior load
    vector; with the latter the derivative of this energy is exactly
    :func:`residual`.
    """
    _check_on(mesh, u)
    if pq is None:
        pq = exponent_at_quadrature(mesh, p, quad)
    g2 = (u.gradients() ** 2).sum(axis=1)
    dens = (phi_from_values(pq, eps, g2[:, None]) @ quad.weights) * mesh.areas
    return math.fsum(dens) - _linear_term(mesh, u, f, quad)


def energy_unrelaxed(mesh: TriMesh, p: ExponentField, u: FemFunction, f,
                     quad: QuadratureRule = MIDEDGE, pq: np.ndarray | None = None) -> float:
    """``E(u) = int |grad u|^p(x) / p(x) - int f u``."""
    _check_on(mesh, u)
    if pq is None:
        pq = exponent_at_quadrature(mesh, p, quad)
    g = np.sqrt((u.gradients() ** 2).sum(axis=1))[:, None]
    with np.errstate(divide="ignore"):
        powed = np.where(g > 0.0, np.exp(pq * np.log(np.where(g > 0.0, g, 1.0))), 0.0)
    dens = ((powed / pq) @ quad.weights) * mesh.areas
    return math.fsum(dens) - _linear_term(mesh, u, f, quad)


def h1_seminorm_diff(u: FemFunction, v: FemFunction) -> float:
    """``||grad(u - v)||_L2``, exact for P1 functions."""
    _same_mesh(u, v)
    g = np.einsum("kid,ki->kd", u.mesh.grads,
                  (u.coeffs - v.coeffs)[u.mesh.triangles])
    return math.sqrt(math.fsum(u.mesh.areas * (g ** 2).sum(axis=1)))


def h1_seminorm(u: FemFunction) -> float:
    return h1_seminorm_diff(u, FemFunction.zeros(u.mesh))


def h1_error_to_exact(u: FemFunction, exact_gradient, quad: QuadratureRule = DUNAVANT7) -> float:
    """``||grad u - grad u*||_L2`` with ``exact_gradient(x, y) -> (gx, gy)``."""
    mesh = u.mesh
    xq = quadrature_points(mesh, quad)
    gx, gy = exact_gradient(xq[..., 0], xq[..., 1])
    gu = u.gradients()
    err2 = (gu[:, 0, None] - gx) ** 2 + (gu[:, 1, None] - gy) ** 2
    return math.sqrt(math.fsum((err2 @ quad.weights) * mesh.areas))


def gradient_modular(mesh: TriMesh, p: ExponentField, u: FemFunction, lam: float = 1.0,
                     quad: QuadratureRule = MIDEDGE, pq: np.ndarray | None = None) -> float:
    """``int |grad u / lam|^p(x) dx``."""
    if pq is None:
        pq = exponent_at_quadrature(mesh, p, quad)
    g = np.sqrt((u.gradients() ** 2).sum(axis=1))[:, None] / lam
    with np.errstate(divide="ignore"):
        powed = np.where(g > 0.0, np.exp(pq * np.log(np.where(g > 0.0, g, 1.0))), 0.0)
    return math.fsum((powed @ quad.weights) * mesh.areas)


def luxemburg_gradient_norm(mesh: TriMesh, p: ExponentField, u: FemFunction,
                            quad: QuadratureRule = MIDEDGE, rel_tol: float = 1e-12) -> float:
    """Luxemburg norm of ``grad u``, by bisection on the (decreasing) modular."""
    _check_on(mesh, u)
    if not np.any(u.coeffs):
        return 0.0
    pq = exponent_at_quadrature(mesh, p, quad)

    def modular(lam):
        return gradient_modular(mesh, p, u, lam, quad, pq)

    lo = hi = 1.0
    if modular(1.0) > 1.0:
        while modular(hi) > 1.0:
            lo, hi = hi, 2.0 * hi
    else:
        while modular(lo) <= 1.0:
            lo, hi = 0.5 * lo, lo
    # invariant: modular(lo) > 1 >= modular(hi)
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if modular(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def write_function(u: FemFunction, path) -> None:
    """One nodal value per line, in mesh vertex order."""
    with open(path, "w") as fh:
        fh.write("\n".join(f"{c:.17e}" for c in u.coeffs) + "\n")
