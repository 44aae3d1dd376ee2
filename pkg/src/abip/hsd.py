"""Homogeneous self-dual embedding of a standard-form LP.

With the starting point ``y0 = 0, x0 = e, s0 = e`` the embedding is the
linear system ``Q u = v`` with ``u = (y, x, tau, theta)``,
``v = (r, s, kappa, xi)`` and the skew-symmetric

    Q = [[ 0,    A,   -b,    bbar],
         [-A',   0,    c,   -cbar],
         [ b',  -c',   0,    zbar],
         [-bbar', cbar', -zbar, 0 ]]

where ``bbar = b - Ae``, ``cbar = c - e`` and ``zbar = c'e + 1``.  ``Q`` is
never formed; only its blocks are kept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .linsys import DirectSolver, make_solver
from .lp_model import StandardLp

__all__ = ["HsdEmbedding", "HsdPoint", "build_embedding", "apply_q", "project_affine"]


@dataclass
class HsdPoint:
    """A pair ``(u, v)`` stored as two flat vectors of length ``m + n + 2``."""

    u: np.ndarray
    v: np.ndarray
    m: int
    n: int

    @property
    def y(self):
        return self.u[: self.m]

    @property
    def x(self):
        return self.u[self.m : self.m + self.n]

    @property
    def tau(self) -> float:
        return float(self.u[self.m + self.n])

    @property
    def theta(self) -> float:
        return float(self.u[-1])

    @property
    def r(self):
        return self.v[: self.m]

    @property
    def s(self):
        return self.v[self.m : self.m + self.n]

    @property
    def kappa(self) -> float:
        return float(self.v[self.m + self.n])

    @property
    def xi(self) -> float:
        return float(self.v[-1])

    def copy(self) -> "HsdPoint":
        return HsdPoint(self.u.copy(), self.v.copy(), self.m, self.n)


class HsdEmbedding:
    """Blocks of ``Q`` plus a cached solver for ``(I + Q) w = z``.

    The leading ``(m+n)`` block of ``I + Q`` is handled by a one-time
    factorization of ``I + AA'`` (see :mod:`abip.linsys`); the two trailing
    coordinates ``(tau, theta)`` are eliminated with a 2x2 Schur complement
    computed at construction.
    """

    def __init__(self, lp: StandardLp, linsys: str = "direct", refine: int = 0):
        self.lp = lp
        self.m, self.n = lp.shape
        self.dim = self.m + self.n + 2
        self.b = lp.b
        self.c = lp.c
        self.bbar = lp.b - np.asarray(lp.A.sum(axis=1)).ravel()
        self.cbar = lp.c - 1.0
        self.zbar = float(lp.c.sum()) + 1.0
        self.refine = int(refine)
        try:
            self._blk = make_solver(lp.A, linsys)
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            raise np.linalg.LinAlgError(f"factorization of I + AA' failed: {exc}") from exc
        self.A = self._blk.A
        self.At = self._blk.At
        m, n = self.m, self.n
        # Columns of the border B = [[-b, bbar], [c, -cbar]].
        self._B = np.empty((m + n, 2))
        self._B[:m, 0] = -self.b
        self._B[m:, 0] = self.c
        self._B[:m, 1] = self.bbar
        self._B[m:, 1] = -self.cbar
        W = np.empty_like(self._B)
        for k in range(2):
            yk, xk = self._blk.solve(self._B[:m, k], self._B[m:, k])
            W[:m, k] = yk
            W[m:, k] = xk
        self._W = W
        D = np.array([[1.0, self.zbar], [-self.zbar, 1.0]])
        self._schur = D + self._B.T @ W
        self._schur_inv = np.linalg.inv(self._schur)
        self.kernel_data = None
        if isinstance(self._blk, DirectSolver):
            A_csr = sp.csr_matrix(lp.A)
            At_csr = sp.csr_matrix(lp.A.T)
            self.kernel_data = (
                _i64(A_csr.indptr), _i64(A_csr.indices), A_csr.data.astype(np.float64),
                _i64(At_csr.indptr), _i64(At_csr.indices), At_csr.data.astype(np.float64),
                self.b, self.c, self.bbar, self.cbar, self.zbar,
                self._blk.use_rows, self._blk.factor,
                np.ascontiguousarray(np.hstack([W, self._B])), self._schur_inv,
                *self._blk.dense_operators(),
            )

    def workspace(self):
        """Scratch arrays for the compiled kernels (one set per caller)."""
        m, n, d = self.m, self.n, self.dim
        k = m if self._blk.use_rows else n
        return (np.empty(m), np.empty(n), np.empty(k), np.empty(k),
                np.empty(d), np.empty(d), np.empty(d))

    @property
    def factorization(self):
        return self._blk

    def apply_q(self, w: np.ndarray) -> np.ndarray:
        m, n = self.m, self.n
        if w.shape != (self.dim,):
            raise ValueError(f"vector has length {w.shape}, expected {self.dim}")
        y = w[:m]
        x = w[m : m + n]
        tau = w[m + n]
        theta = w[m + n + 1]
        out = np.empty(self.dim)
        out[:m] = self.A @ x - self.b * tau + self.bbar * theta
        out[m : m + n] = -(self.At @ y) + self.c * tau - self.cbar * theta
        out[m + n] = self.b @ y - self.c @ x + self.zbar * theta
        out[m + n + 1] = -(self.bbar @ y) + self.cbar @ x - self.zbar * tau
        return out

    def _solve_once(self, z: np.ndarray) -> np.ndarray:
        m, n = self.m, self.n
        gy, gx = self._blk.solve(z[:m], z[m : m + n])
        g = np.concatenate([gy, gx])
        w2 = self._schur_inv @ (z[m + n :] + self._B.T @ g)
        out = np.empty(self.dim)
        out[: m + n] = g - self._W @ w2
        out[m + n :] = w2
        return out

    def solve_i_plus_q(self, z: np.ndarray) -> np.ndarray:
        """Return ``w`` with ``(I + Q) w = z``."""
        if self.kernel_data is not None:
            out = np.empty(self.dim)
            kernels.solve_i_plus_q(
                self.kernel_data, np.ascontiguousarray(z, dtype=np.float64), out, self.refine, self.workspace()
            )
            return out
        w = self._solve_once(z)
        for _ in range(self.refine):
            w += self._solve_once(z - w - self.apply_q(w))
        return w

    def project_affine(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Euclidean projection of ``(z, z)`` onto ``{(u, v) : Qu = v}``."""
        if z.shape != (self.dim,):
            raise ValueError(f"vector has length {z.shape}, expected {self.dim}")
        ut = self.solve_i_plus_q(z)
        return ut, z - ut

    def subspace_residual(self, point: HsdPoint) -> np.ndarray:
        return self.apply_q(point.u) - point.v

    def dense_q(self) -> np.ndarray:
        """Materialize ``Q``; intended for small test problems only."""
        m, n = self.m, self.n
        A = self.lp.A.toarray()
        Q = np.zeros((self.dim, self.dim))
        Q[:m, m : m + n] = A
        Q[:m, m + n] = -self.b
        Q[:m, m + n + 1] = self.bbar
        Q[m : m + n, :m] = -A.T
        Q[m : m + n, m + n] = self.c
        Q[m : m + n, m + n + 1] = -self.cbar
        Q[m + n, :m] = self.b
        Q[m + n, m : m + n] = -self.c
        Q[m + n, m + n + 1] = self.zbar
        Q[m + n + 1, :m] = -self.bbar
        Q[m + n + 1, m : m + n] = self.cbar
        Q[m + n + 1, m + n] = -self.zbar
        return Q


def _i64(a) -> np.ndarray:
    return np.asarray(a, dtype=np.int64)


def build_embedding(lp: StandardLp, linsys: str = "direct", refine: int = 0) -> HsdEmbedding:
    return HsdEmbedding(lp, linsys=linsys, refine=refine)


def apply_q(e: HsdEmbedding, w: np.ndarray) -> np.ndarray:
    return e.apply_q(np.asarray(w, dtype=np.float64))


def project_affine(e: HsdEmbedding, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return e.project_affine(np.asarray(z, dtype=np.float64))
