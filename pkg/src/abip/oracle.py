"""Independent reference computations used by the tests.

``vertex_enum_oracle`` solves tiny standard-form LPs by brute force over
bases.  ``explicit_multiplier_admm`` runs the textbook two-block ADMM on the
barrier subproblem with the multipliers ``(p, q)`` stored explicitly; the
production inner step drops them, and the tests compare the two.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .hsd import HsdEmbedding
from .lp_model import StandardLp

__all__ = ["OracleResult", "vertex_enum_oracle", "explicit_multiplier_admm", "MAX_ORACLE_COLUMNS"]

MAX_ORACLE_COLUMNS = 12
_FEAS = 1e-9
_COMBO_CAP = 5_000_000


@dataclass(frozen=True)
class OracleResult:
    status: str  # "Optimal", "Infeasible" or "Unbounded"
    objective: float = math.nan
    x: np.ndarray | None = None
    certificate: np.ndarray | None = None


def _independent_rows(A: np.ndarray, b: np.ndarray):
    if A.shape[0] == 0:
        return A, b, True
    q, r, piv = _qr_pivot(A.T)
    diag = np.abs(np.diag(r)) if r.size else np.zeros(0)
    tol = 1e-10 * max(1.0, diag[0] if diag.size else 1.0)
    rank = int(np.sum(diag > tol))
    rows = np.sort(piv[:rank])
    Ar, br = A[rows], b[rows]
    if rank < A.shape[0]:
        w, *_ = np.linalg.lstsq(Ar.T, A.T, rcond=None)
        consistent = np.allclose(br @ w, b, atol=1e-9 * (1 + np.abs(b).max()))
    else:
        consistent = True
    return Ar, br, consistent


def _qr_pivot(M):
    import scipy.linalg as sla

    return sla.qr(M, pivoting=True)


def _basic_solution(A: np.ndarray, b: np.ndarray, cols) -> np.ndarray | None:
    B = A[:, cols]
    if np.linalg.cond(B) > 1e12:
        return None
    return np.linalg.solve(B, b)


def _check_cap(n: int, k: int):
    if math.comb(n, k) > _COMBO_CAP:
        raise ValueError(f"enumeration of C({n}, {k}) bases is too large")


def vertex_enum_oracle(lp: StandardLp) -> OracleResult:
    """Exact minimum of ``lp`` by enumerating every basis.

    Ties between optimal vertices are broken by the first basis in
    lexicographic order, so the argmin is reproducible.
    """
    m, n = lp.shape
    if n > MAX_ORACLE_COLUMNS:
        raise ValueError(f"oracle handles at most {MAX_ORACLE_COLUMNS} columns, got {n}")
    A = lp.A.toarray()
    b, c = lp.b.copy(), lp.c.copy()
    Ar, br, consistent = _independent_rows(A, b)
    r = Ar.shape[0]
    best, best_x = math.inf, None
    if consistent:
        _check_cap(n, r)
        for cols in itertools.combinations(range(n), r):
            xb = _basic_solution(Ar, br, list(cols)) if r else np.zeros(0)
            if xb is None or np.any(xb < -_FEAS):
                continue
            x = np.zeros(n)
            x[list(cols)] = np.maximum(xb, 0.0)
            val = float(c @ x)
            if val < best - 1e-12 * (1.0 + abs(best) if np.isfinite(best) else 1.0):
                best, best_x = val, x
    if best_x is None:
        return OracleResult("Infeasible", certificate=_farkas_ray(A, b))
    ray = _improving_ray(Ar, c)
    if ray is not None:
        return OracleResult("Unbounded", certificate=ray)
    return OracleResult("Optimal", objective=best + lp.objective_offset, x=best_x)


def _improving_ray(A: np.ndarray, c: np.ndarray) -> np.ndarray | None:
    """Vertex ``d`` of ``{d >= 0, A d = 0, sum(d) = 1}`` with ``c'd < 0``, if any."""
    m, n = A.shape
    M = np.vstack([A, np.ones((1, n))])
    rhs = np.zeros(m + 1)
    rhs[-1] = 1.0
    Mr, rr, ok = _independent_rows(M, rhs)
    if not ok:
        return None
    k = Mr.shape[0]
    _check_cap(n, k)
    for cols in itertools.combinations(range(n), k):
        db = _basic_solution(Mr, rr, list(cols))
        if db is None or np.any(db < -_FEAS):
            continue
        d = np.zeros(n)
        d[list(cols)] = np.maximum(db, 0.0)
        if c @ d < -1e-9:
            return d
    return None


def _farkas_ray(A: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Best vertex of ``max b'y  s.t.  A'y <= 0, -1 <= y <= 1`` when its value is positive."""
    m, n = A.shape
    if m == 0:
        return None
    # constraints G y <= h
    G = np.vstack([A.T, np.eye(m), -np.eye(m)])
    h = np.concatenate([np.zeros(n), np.ones(m), np.ones(m)])
    _check_cap(G.shape[0], m)
    best, best_y = 0.0, None
    for rows in itertools.combinations(range(G.shape[0]), m):
        Gs = G[list(rows)]
        if np.linalg.cond(Gs) > 1e12:
            continue
        y = np.linalg.solve(Gs, h[list(rows)])
        if np.all(G @ y <= h + 1e-9) and b @ y > best + 1e-12:
            best, best_y = float(b @ y), y
    return best_y


# ---------------------------------------------------------------- explicit ADMM


def _prox_log(a: np.ndarray, t: float) -> np.ndarray:
    return 0.5 * (a + np.sqrt(a * a + 4.0 * t))


def explicit_multiplier_admm(e: HsdEmbedding, u0: np.ndarray, v0: np.ndarray, mu: float, beta: float,
                             steps: int, p0=None, q0=None):
    """Unsimplified ADMM on the barrier subproblem, multipliers kept explicitly.

    The projection onto ``{Qu = v}`` is done with a dense solve of
    ``(I + Q'Q) u = a + Q'b``.  Returns the list of ``(u, v)`` after each step.
    """
    m, n = e.m, e.n
    Q = e.dense_q()
    d = Q.shape[0]
    if d > 64:
        raise ValueError("explicit ADMM reference is meant for tiny embeddings")
    H = np.eye(d) + Q.T @ Q
    t = mu / beta
    u, v = u0.astype(float).copy(), v0.astype(float).copy()
    p = v.copy() if p0 is None else np.asarray(p0, float).copy()
    q = u.copy() if q0 is None else np.asarray(q0, float).copy()
    xs, sl = slice(m, m + n), slice(m, m + n)
    out = []
    for _ in range(steps):
        a, bb = u + p, v + q
        ut = np.linalg.solve(H, a + Q.T @ bb)
        vt = Q @ ut
        # primal block: argmin B(u) + beta/2 ||u - (ut - p)||^2
        w = ut - p
        un = w.copy()
        un[xs] = _prox_log(w[xs], t)
        un[m + n] = _prox_log(np.array([w[m + n]]), t)[0]
        un[m + n + 1] = w[m + n + 1] - (n + 1.0)
        # slack block: indicators on r and xi, barrier on s and kappa
        z = vt - q
        vn = z.copy()
        vn[:m] = 0.0
        vn[sl] = _prox_log(z[sl], t)
        vn[m + n] = _prox_log(np.array([z[m + n]]), t)[0]
        vn[m + n + 1] = -(n + 1.0)
        p = p - ut + un
        q = q - vt + vn
        u, v = un, vn
        out.append((u.copy(), v.copy()))
    return out
