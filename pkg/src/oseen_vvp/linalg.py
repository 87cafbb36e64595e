"""Sparse direct solves for the saddle systems of both schemes.

Factorisation is delegated to SuperLU (scipy.sparse.linalg.splu). Two
modes are used:

* ``colamd``: COLAMD column ordering with partial pivoting; robust for
  systems with a zero diagonal block (the mixed scheme).
* ``symmetric``: a caller-supplied symmetric permutation (or MMD on
  A + A^T) with diagonal pivoting; much less fill on the DG systems, whose
  diagonal is strictly positive. A failed accuracy probe falls back to
  ``colamd``.

Every solve is followed by up to two steps of iterative refinement.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrix(RuntimeError):
    def __init__(self, msg, pivot=None):
        super().__init__(msg)
        self.pivot = pivot


class DimensionMismatch(ValueError):
    pass


RESIDUAL_TOL = 1e-9
REFINE_STEPS = 2
PROBE_TOL = 1e-6


@dataclass
class SolveReport:
    residual: float
    fill: float  # nnz(L + U) / nnz(A)
    success: bool
    ordering: str = "colamd"


class LUFactorization:
    """LU factors of a square sparse matrix; reusable for many right-hand sides."""

    def __init__(self, A, ordering="colamd", perm=None):
        A = sp.csc_matrix(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"matrix is not square: {A.shape}")
        A.sum_duplicates()
        A.sort_indices()
        self.A = A
        self.n = A.shape[0]
        self.perm = None
        self.ordering = ordering
        if ordering == "symmetric":
            try:
                self._factor_symmetric(perm)
            except (RuntimeError, _ProbeFailed):
                self.ordering = "colamd"
                self.perm = None
                self._factor_colamd()
        elif ordering == "colamd":
            self._factor_colamd()
        else:
            raise ValueError(f"unknown ordering {ordering!r}")
        self.fill = self._lu.nnz / max(A.nnz, 1)

    def _factor_colamd(self):
        try:
            self._lu = spla.splu(self.A, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularMatrix(str(exc), _zero_pivot(self.A)) from exc

    def _factor_symmetric(self, perm):
        opts = dict(SymmetricMode=True)
        if perm is None:
            self._lu = spla.splu(self.A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                 options=opts)
        else:
            perm = np.asarray(perm)
            if sorted(perm.tolist()) != list(range(self.n)):
                raise ValueError("perm is not a permutation")
            self.perm = perm
            B = self.A[perm][:, perm].tocsc()
            self._lu = spla.splu(B, permc_spec="NATURAL", diag_pivot_thresh=0.0, options=opts)
            del B
        # diagonal pivoting can be unstable; probe the factors once
        rng = np.random.default_rng(0)
        x = rng.standard_normal(self.n)
        y = self._raw_solve(self.A @ x)
        if not np.linalg.norm(y - x) <= PROBE_TOL * np.linalg.norm(x):
            raise _ProbeFailed()

    def _raw_solve(self, b):
        if self.perm is None:
            return self._lu.solve(b)
        y = np.empty_like(b)
        y[self.perm] = self._lu.solve(b[self.perm])
        return y

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape != (self.n,):
            raise DimensionMismatch(f"rhs of shape {b.shape} for a system of size {self.n}")
        x = self._raw_solve(b)
        r = b - self.A @ x
        rn = np.linalg.norm(r)
        for _ in range(REFINE_STEPS):
            x1 = x + self._raw_solve(r)
            r1 = b - self.A @ x1
            rn1 = np.linalg.norm(r1)
            if not rn1 < rn:
                break
            x, r, rn = x1, r1, rn1
        nb = np.linalg.norm(b)
        res = rn / nb if nb > 0 else rn
        ok = bool(np.all(np.isfinite(x))) and res < RESIDUAL_TOL
        return x, SolveReport(float(res), self.fill, ok, self.ordering)


class _ProbeFailed(Exception):
    pass


def _zero_pivot(A):
    """First structurally empty row or column, if any."""
    A = sp.csr_matrix(A)
    empty = np.flatnonzero(np.diff(A.indptr) == 0)
    if len(empty):
        return int(empty[0])
    empty = np.flatnonzero(np.diff(sp.csc_matrix(A).indptr) == 0)
    return int(empty[0]) if len(empty) else None


def lu_factor(A, ordering="colamd", perm=None) -> LUFactorization:
    return LUFactorization(A, ordering, perm)


def solve(fact: LUFactorization, b):
    return fact.solve(b)


# ------------------------------------------------------------ bordered systems
class BorderedFactorization:
    """Solver for ``[[M, c], [c^T, 0]]`` where M is singular with M z = 0 and z^T M = 0.

    The multiplier is ``lambda = z.b / z.c``; the compatible system
    ``M x = b - lambda c`` is solved with the DoF ``pin`` fixed at zero and
    the result shifted along z so that ``c.x = 0``. The dense border never
    enters the factorisation.
    """

    def __init__(self, K, z, pin, ordering="colamd", perm=None):
        K = sp.csr_matrix(K)
        self.K = K
        n = K.shape[0] - 1
        self.n = K.shape[0]
        self.c = K[:n, n].toarray().ravel()
        self.z = np.asarray(z, dtype=float)
        self.pin = int(pin)
        zc = self.z @ self.c
        if zc == 0:
            raise SingularMatrix("border is orthogonal to the null vector")
        self.zc = zc
        keep = np.ones(n)
        keep[self.pin] = 0.0
        M = sp.diags(keep) @ K[:n, :n] @ sp.diags(keep) + sp.diags(1.0 - keep)
        self.inner = LUFactorization(M, ordering, perm)
        del M
        self.fill = self.inner.fill
        self.ordering = self.inner.ordering

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape != (self.n,):
            raise DimensionMismatch(f"rhs of shape {b.shape} for a system of size {self.n}")
        n = self.n - 1
        lam = (self.z @ b[:n]) / self.zc
        rhs = b[:n] - lam * self.c
        rhs[self.pin] = 0.0
        x, _ = self.inner.solve(rhs)
        x = x + ((b[n] - self.c @ x) / self.zc) * self.z
        out = np.append(x, lam)
        r = b - self.K @ out
        nb = np.linalg.norm(b)
        res = float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))
        ok = bool(np.all(np.isfinite(out))) and res < RESIDUAL_TOL
        return out, SolveReport(res, self.fill, ok, self.ordering)


def is_null_vector(K, z, tol=1e-10):
    """True if z spans a left and right null vector of the leading block of K."""
    n = K.shape[0] - 1
    M = sp.csr_matrix(K)[:n, :n]
    scale = max(abs(M).max(), 1e-300) * max(np.abs(z).sum(), 1.0)
    return bool(np.abs(M @ z).max() <= tol * scale and np.abs(M.T @ z).max() <= tol * scale)


# ------------------------------------------------------------ orderings
def nested_dissection(adjacency, coords, leaf_size=8):
    """Geometric nested dissection of a block graph.

    ``adjacency`` is a symmetric sparse matrix between blocks (cells),
    ``coords`` their centroids. Blocks are split at the median of the wider
    coordinate; the blocks of the second half touching the first half form
    the separator, which is numbered last.
    """
    adjacency = sp.csr_matrix(adjacency)
    coords = np.asarray(coords, dtype=float)
    out = []
    stack = [(np.arange(adjacency.shape[0]), False)]
    # iterative post-order: (cells, emitted)
    while stack:
        cells, done = stack.pop()
        if done:
            out.append(cells)
            continue
        if len(cells) <= leaf_size:
            out.append(cells)
            continue
        c = coords[cells]
        ax = int(np.argmax(np.ptp(c, axis=0)))
        med = np.median(c[:, ax])
        left = c[:, ax] < med
        if left.all() or not left.any():
            out.append(cells)
            continue
        A, B = cells[left], cells[~left]
        touch = np.asarray(adjacency[B][:, A].sum(axis=1)).ravel() > 0
        sep, B = B[touch], B[~touch]
        # pushed in reverse so that A, then B, then the separator are emitted
        stack.append((sep, True))
        stack.append((B, False))
        stack.append((A, False))
    return np.concatenate(out) if out else np.zeros(0, dtype=int)


def block_permutation(block_order, block_dofs):
    """Expand an ordering of blocks into an ordering of their DoFs."""
    return np.asarray(block_dofs)[block_order].ravel()
