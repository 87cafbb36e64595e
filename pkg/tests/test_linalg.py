import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from oseen_vvp.linalg import (BorderedFactorization, DimensionMismatch, SingularMatrix,
                              block_permutation, is_null_vector, lu_factor, nested_dissection, solve)


def _random_saddle(n, m, seed):
    rng = np.random.default_rng(seed)
    A = sp.random(n, n, density=0.3, random_state=seed) + n * sp.eye(n)
    B = sp.random(n, m, density=0.5, random_state=seed + 1) + sp.eye(n, m)
    return sp.bmat([[A, B], [B.T, None]], format="csc"), rng


@given(st.integers(5, 40), st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_lu_recovers_random_solution(n, seed):
    K, rng = _random_saddle(n, max(1, n // 3), seed)
    x = rng.standard_normal(K.shape[0])
    y, rep = solve(lu_factor(K), K @ x)
    assert rep.success and rep.residual < 1e-9
    assert np.linalg.norm(y - x) <= 1e-8 * np.linalg.norm(x)


def test_symmetric_ordering_with_permutation():
    n = 30
    A = sp.diags([-1, 4, -1], [-1, 0, 1], shape=(n, n), format="csc")
    perm = np.random.default_rng(0).permutation(n)
    f = lu_factor(A, "symmetric", perm)
    x, rep = f.solve(np.ones(n))
    assert rep.ordering == "symmetric" and rep.success
    assert np.allclose(A @ x, 1)


def test_symmetric_falls_back_when_diagonal_is_zero():
    K, _ = _random_saddle(8, 3, 0)
    f = lu_factor(K, "symmetric", np.arange(K.shape[0]))
    x, rep = f.solve(np.ones(K.shape[0]))
    assert rep.success
    assert f.ordering in ("symmetric", "colamd")


def test_singular_and_dimension_errors():
    A = sp.csc_matrix(np.array([[1.0, 0], [0, 0]]))
    with pytest.raises(SingularMatrix) as exc:
        lu_factor(A)
    assert exc.value.pivot == 1
    with pytest.raises(DimensionMismatch):
        lu_factor(sp.csc_matrix(np.ones((2, 3))))
    f = lu_factor(sp.eye(3))
    with pytest.raises(DimensionMismatch):
        f.solve(np.ones(4))


def test_bordered_solver_matches_dense():
    # M is a 1D Neumann Laplacian: M 1 = 0
    n = 12
    M = sp.diags([-1, 2, -1], [-1, 0, 1], shape=(n, n)).tolil()
    M[0, 0] = M[-1, -1] = 1
    c = np.linspace(1, 2, n)
    K = sp.bmat([[M.tocsr(), sp.csr_matrix(c[:, None])], [sp.csr_matrix(c[None]), None]], format="csr")
    z = np.ones(n)
    assert is_null_vector(K, z)
    b = np.random.default_rng(3).standard_normal(n + 1)
    x, rep = BorderedFactorization(K, z, pin=0).solve(b)
    assert rep.success
    assert np.allclose(x, np.linalg.solve(K.toarray(), b))


def test_nested_dissection_is_permutation():
    nx = 9
    idx = np.arange(nx * nx).reshape(nx, nx)
    rows = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    cols = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(nx * nx,) * 2)
    adj = adj + adj.T
    xy = np.column_stack([g.ravel() for g in np.meshgrid(np.arange(nx), np.arange(nx), indexing="ij")])
    order = nested_dissection(adj, xy, leaf_size=4)
    assert sorted(order.tolist()) == list(range(nx * nx))
    blocks = np.arange(2 * nx * nx).reshape(nx * nx, 2)
    perm = block_permutation(order, blocks)
    assert sorted(perm.tolist()) == list(range(2 * nx * nx))
