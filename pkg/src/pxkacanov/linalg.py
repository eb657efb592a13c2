"""Compressed-row SPD matrices and a Jacobi-preconditioned CG solver."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

DENSE_LIMIT = 512


@dataclass(frozen=True, eq=False)
class SparseSpd:
    """Symmetric matrix stored in full CSR layout (both triangles)."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def dimension(self) -> int:
        return self.indptr.size - 1

    @cached_property
    def csr(self) -> sp.csr_matrix:
        n = self.dimension
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(n, n))

    @cached_property
    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()

    @classmethod
    def from_dense(cls, a) -> "SparseSpd":
        m = sp.csr_matrix(np.asarray(a, dtype=float))
        m.sort_indices()
        return cls(m.indptr.astype(np.int64), m.indices.astype(np.int64), m.data)

    @classmethod
    def identity(cls, n: int) -> "SparseSpd":
        return cls(np.arange(n + 1, dtype=np.int64), np.arange(n, dtype=np.int64), np.ones(n))

    def toarray(self) -> np.ndarray:
        return self.csr.toarray()

    def asymmetry(self) -> float:
        """Largest ``|A_ij - A_ji|`` over stored entries."""
        diff = self.csr - self.csr.T
        return float(abs(diff).max()) if diff.nnz else 0.0


@dataclass
class CgReport:
    iterations: int
    relative_residual: float
    converged: bool


class InnerSolverError(RuntimeError):
    def __init__(self, report: CgReport):
        super().__init__(
            f"CG did not converge: {report.iterations} iterations, "
            f"relative residual {report.relative_residual:.3e}")
        self.report = report


def spmv(a: SparseSpd, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (a.dimension,):
        raise ValueError(f"dimension mismatch: matrix {a.dimension}, vector {x.shape}")
    return a.csr @ x


def cg_solve(a: SparseSpd, b, rel_tol: float = 1e-12, max_iter: int | None = None,
             x0=None) -> tuple[np.ndarray, CgReport]:
    """Solve ``a x = b`` by CG with diagonal (Jacobi) preconditioning.

    Stops once the recursively updated residual satisfies
    ``||r|| <= rel_tol ||b||``; non-convergence is reported, not raised.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    b = np.asarray(b, dtype=float)
    n = a.dimension
    if b.shape != (n,):
        raise ValueError(f"dimension mismatch: matrix {n}, rhs {b.shape}")
    if max_iter is None:
        max_iter = 20 * max(n, 1)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), CgReport(0, 0.0, True)

    mat = a.csr
    dinv = 1.0 / a.diagonal
    if x0 is None:
        x = np.zeros(n)
        r = b.copy()
    else:
        x = np.array(x0, dtype=float)
        r = b - mat @ x
    target = rel_tol * bnorm
    rnorm = np.linalg.norm(r)
    if rnorm <= target:
        return x, CgReport(0, rnorm / bnorm, True)
    z = dinv * r
    d = z.copy()
    rz = r @ z
    it = 0
    while it < max_iter:
        it += 1
        ad = mat @ d
        alpha = rz / (d @ ad)
        x += alpha * d
        r -= alpha * ad
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            break
        z = dinv * r
        rz_new = r @ z
        d *= rz_new / rz
        d += z
        rz = rz_new
    rel = rnorm / bnorm
    return x, CgReport(it, rel, rel <= rel_tol)


def dense_solve(a: SparseSpd, b) -> np.ndarray:
    """Gaussian elimination with partial pivoting (LAPACK ``gesv``); test oracle."""
    if a.dimension > DENSE_LIMIT:
        raise ValueError(f"dense fallback limited to dimension {DENSE_LIMIT}")
    return np.linalg.solve(a.toarray(), np.asarray(b, dtype=float))
