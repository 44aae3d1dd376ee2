"""Solvers for the block system ``[[I, A], [-A', I]] (y, x) = (p, q)``.

Both eliminate one block and work with the SPD matrix ``I + AA'`` (or
``I + A'A`` when that side is smaller).  :class:`DirectSolver` factorizes it
once; :class:`CgSolver` runs conjugate gradients on every call.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .kernels import spd_solve

# Above this density (and below the size cap) the dense Cholesky path wins.
_DENSE_DENSITY = 0.25
_DENSE_MAX_ORDER = 4000


class _BlockSolver:
    def __init__(self, A: sp.csc_matrix):
        self.m, self.n = A.shape
        self.use_rows = self.m <= self.n
        density = A.nnz / max(1, self.m * self.n)
        self.dense = density >= _DENSE_DENSITY and min(self.m, self.n) <= _DENSE_MAX_ORDER
        if self.dense:
            self.A = A.toarray()
            self.At = np.ascontiguousarray(self.A.T)
        else:
            self.A = sp.csr_matrix(A)
            self.At = sp.csr_matrix(A.T)

    def solve(self, p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.use_rows:
            y = self._solve_spd(p - self.A @ q)
            x = q + self.At @ y
        else:
            x = self._solve_spd(q + self.At @ p)
            y = p - self.A @ x
        return y, x

    def _normal_matrix(self):
        if self.use_rows:
            G = self.A @ self.At
        else:
            G = self.At @ self.A
        k = G.shape[0]
        if self.dense:
            G = np.asarray(G)
            G[np.diag_indices(k)] += 1.0
            return G
        return sp.csc_matrix(G + sp.identity(k, format="csc"))

    def _solve_spd(self, rhs: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class DirectSolver(_BlockSolver):
    """One-time triangular factorization of the SPD reduction.

    Dense data uses LAPACK Cholesky; sparse data uses SuperLU in symmetric mode
    with a minimum-degree ordering of ``G + G'``, which keeps the fill of the
    SPD matrix low.  Either way the factors are kept as CSC triangles plus
    permutations (:attr:`factor`) so the compiled inner loop can apply them.
    """

    def __init__(self, A: sp.csc_matrix):
        super().__init__(A)
        G = self._normal_matrix()
        k = G.shape[0]
        if self.dense:
            U = sla.cholesky(G, lower=False, check_finite=False)
            U = sp.csc_matrix(np.triu(U))
            L = sp.csc_matrix(U.T)
            perm_r = perm_c = np.arange(k, dtype=np.int64)
        else:
            lu = spla.splu(
                G,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
            L, U = sp.csc_matrix(lu.L), sp.csc_matrix(lu.U)
            perm_r = np.asarray(lu.perm_r, dtype=np.int64)
            perm_c = np.asarray(lu.perm_c, dtype=np.int64)
        self.factor = (*_triangle(L), *_triangle(U), perm_r, perm_c)
        self._ginv = None
        if self.dense:
            self._ginv = sla.cho_solve((U.toarray(), False), np.eye(k), check_finite=False)

    def dense_operators(self):
        """``(is_dense, A, A', G^{-1})`` in the layout the compiled kernels expect."""
        if self.dense:
            return True, np.ascontiguousarray(self.A), np.ascontiguousarray(self.At), np.ascontiguousarray(self._ginv)
        empty = np.empty((0, 0))
        return False, empty, empty, empty

    def _solve_spd(self, rhs: np.ndarray) -> np.ndarray:
        out = np.empty_like(rhs)
        spd_solve(self.factor, np.ascontiguousarray(rhs, dtype=np.float64), out, np.empty_like(out))
        return out


def _triangle(T: sp.csc_matrix):
    T = sp.csc_matrix(T)
    T.sort_indices()
    k = T.shape[0]
    indptr = T.indptr.astype(np.int64)
    indices = T.indices.astype(np.int64)
    diag = np.empty(k, dtype=np.int64)
    for j in range(k):
        lo, hi = indptr[j], indptr[j + 1]
        hit = np.flatnonzero(indices[lo:hi] == j)
        if hit.size == 0 or T.data[lo + hit[0]] == 0.0:
            raise np.linalg.LinAlgError(f"zero pivot in column {j}")
        diag[j] = lo + hit[0]
    return indptr, indices, T.data.astype(np.float64), diag


class CgSolver(_BlockSolver):
    """Conjugate gradients on the SPD reduction, warm-started from the last call."""

    def __init__(self, A: sp.csc_matrix, rtol: float = 1e-12, maxiter: int | None = None):
        super().__init__(A)
        self.rtol = rtol
        k = self.m if self.use_rows else self.n
        self.maxiter = maxiter if maxiter is not None else max(10 * k, 100)
        A_, At_ = self.A, self.At
        if self.use_rows:
            mv = lambda w: w + A_ @ (At_ @ w)
        else:
            mv = lambda w: w + At_ @ (A_ @ w)
        self._op = spla.LinearOperator((k, k), matvec=mv, dtype=np.float64)
        self._last = np.zeros(k)
        # Jacobi preconditioner: diag(I + AA') = 1 + squared row norms.
        if self.use_rows:
            d = 1.0 + np.asarray((self.A.multiply(self.A) if sp.issparse(self.A) else self.A**2).sum(axis=1)).ravel()
        else:
            d = 1.0 + np.asarray((self.A.multiply(self.A) if sp.issparse(self.A) else self.A**2).sum(axis=0)).ravel()
        inv = 1.0 / d
        self._prec = spla.LinearOperator((k, k), matvec=lambda w: inv * w, dtype=np.float64)

    def _solve_spd(self, rhs: np.ndarray) -> np.ndarray:
        sol, info = spla.cg(
            self._op, rhs, x0=self._last, rtol=self.rtol, atol=0.0,
            maxiter=self.maxiter, M=self._prec,
        )
        if info < 0:
            raise np.linalg.LinAlgError("conjugate gradients broke down")
        self._last = sol
        return sol


def make_solver(A: sp.csc_matrix, method: str = "direct") -> _BlockSolver:
    if method == "direct":
        return DirectSolver(A)
    if method == "cg":
        return CgSolver(A)
    raise ValueError(f"unknown linear system method {method!r}; use 'direct' or 'cg'")
