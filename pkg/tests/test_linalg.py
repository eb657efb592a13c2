import numpy as np
import pytest

from pxkacanov.fem import laplacian
from pxkacanov.linalg import SparseSpd, cg_solve, dense_solve, spmv
from pxkacanov.mesh import structured_rectangle


def test_spmv_basics():
    eye = SparseSpd.identity(4)
    x = np.arange(4.0)
    np.testing.assert_array_equal(spmv(eye, x), x)
    a = SparseSpd.from_dense([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_array_equal(spmv(a, np.zeros(2)), 0)
    np.testing.assert_array_equal(spmv(a, np.ones(2)), [3.0, 3.0])
    with pytest.raises(ValueError):
        spmv(a, np.ones(3))


def test_cg_small():
    x, rep = cg_solve(SparseSpd.identity(5), np.arange(5.0))
    assert rep.converged and rep.iterations <= 1
    np.testing.assert_allclose(x, np.arange(5.0))
    x, rep = cg_solve(SparseSpd.from_dense([[2.0, 1.0], [1.0, 2.0]]), [3.0, 3.0])
    np.testing.assert_allclose(x, [1.0, 1.0], rtol=1e-12)


def test_cg_zero_rhs():
    x, rep = cg_solve(SparseSpd.identity(3), np.zeros(3))
    assert rep.converged and rep.iterations == 0 and not x.any()


def test_cg_reports_nonconvergence():
    a = laplacian(structured_rectangle(0, 0, 1, 1, 16))
    _, rep = cg_solve(a, np.ones(a.dimension), rel_tol=1e-12, max_iter=3)
    assert not rep.converged and rep.iterations == 3


def test_cg_matches_dense_oracle(rng):
    a = laplacian(structured_rectangle(0, 0, 1, 1, 8))
    b = rng.standard_normal(a.dimension)
    x, rep = cg_solve(a, b)
    assert rep.converged and rep.relative_residual <= 1e-12
    assert np.max(np.abs(x - dense_solve(a, b))) <= 1e-9


def test_cg_linear_in_rhs(rng):
    a = laplacian(structured_rectangle(0, 0, 1, 1, 8))
    b = rng.standard_normal(a.dimension)
    x1, _ = cg_solve(a, b)
    x10, _ = cg_solve(a, 10 * b)
    np.testing.assert_allclose(x10, 10 * x1, rtol=1e-9, atol=1e-9 * np.abs(x1).max())


def test_laplacian_structure():
    a = laplacian(structured_rectangle(0, 0, 1, 1, 6))
    assert a.asymmetry() == 0.0
    assert np.all(a.diagonal > 0)
    m = a.csr
    assert (m != m.T).nnz == 0


def test_dense_fallback_limit():
    with pytest.raises(ValueError):
        dense_solve(SparseSpd.identity(600), np.ones(600))
