import numpy as np
import pytest
import scipy.sparse as sp

from paramrom.problems import ONE, ParamFunction, SplitProblem


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_sparse(rng, n, density=0.1, shift=None):
    """Well-conditioned random sparse matrix: random entries plus a
    dominant diagonal."""
    nnz = max(int(density * n * n), n)
    rows = rng.integers(0, n, nnz)
    cols = rng.integers(0, n, nnz)
    vals = rng.standard_normal(nnz)
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A = A + sp.identity(n) * (shift if shift is not None else n)
    return sp.csr_matrix(A)


def quadratic_problem(n=12, box=((0.0, 1.0), (0.0, 1.0)), seed=0):
    """Small split problem whose free-axis dependence is exactly quadratic,
    so the Chebyshev operator has degree 2 (handy for dense pencil checks)."""
    r = np.random.default_rng(seed)
    A0 = random_sparse(r, n, 0.3, shift=4.0 * n)
    A1 = random_sparse(r, n, 0.3, shift=0.0)
    f1 = ParamFunction([{"coeff": 1.0, "fn": "pow", "var": "mu1", "k": 2}])
    b = r.standard_normal(n)
    return SplitProblem([A0, A1], [ONE, f1], b, box, name="quadratic")


def linear_problem(n=10, seed=3):
    """Split problem with affine free-axis dependence (degree-1 pencil)."""
    r = np.random.default_rng(seed)
    A0 = random_sparse(r, n, 0.3, shift=4.0 * n)
    A1 = random_sparse(r, n, 0.3, shift=0.0)
    f1 = ParamFunction([
        {"coeff": 0.5, "fn": "const"},
        {"coeff": 1.0, "fn": "pow", "var": "mu1", "k": 1},
    ])
    b = r.standard_normal(n)
    return SplitProblem([A0, A1], [ONE, f1], b, ((0.0, 1.0), (0.0, 1.0)),
                        name="linear")
