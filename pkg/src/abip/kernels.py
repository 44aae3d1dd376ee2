"""Compiled kernels for the inner iteration.

Everything here works on plain arrays: the matrix in CSR form (plus its
transpose in CSR form), a triangular factorization ``P_r G P_c = L U`` of the
SPD reduction ``G`` in CSC form, and the 2x2 Schur data of the border.
The Python-level objects in :mod:`abip.hsd` and :mod:`abip.admm` pack these
into a tuple (``KernelData``) once per embedding.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def csr_matvec(indptr, indices, data, x, out):
    for i in range(indptr.size - 1):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        out[i] = acc


@njit(cache=True)
def _lower_solve(indptr, indices, data, diag, x):
    k = x.size
    for j in range(k):
        xj = x[j] / data[diag[j]]
        x[j] = xj
        if xj != 0.0:
            for p in range(indptr[j], indptr[j + 1]):
                i = indices[p]
                if i > j:
                    x[i] -= data[p] * xj


@njit(cache=True)
def _upper_solve(indptr, indices, data, diag, x):
    k = x.size
    for j in range(k - 1, -1, -1):
        xj = x[j] / data[diag[j]]
        x[j] = xj
        if xj != 0.0:
            for p in range(indptr[j], indptr[j + 1]):
                i = indices[p]
                if i < j:
                    x[i] -= data[p] * xj


@njit(cache=True)
def spd_solve(fac, rhs, out, work):
    """``out = G^{-1} rhs`` using ``G = P_r' L U P_c'``."""
    (l_ptr, l_idx, l_val, l_diag, u_ptr, u_idx, u_val, u_diag, perm_r, perm_c) = fac
    k = rhs.size
    for i in range(k):
        work[perm_r[i]] = rhs[i]
    _lower_solve(l_ptr, l_idx, l_val, l_diag, work)
    _upper_solve(u_ptr, u_idx, u_val, u_diag, work)
    for j in range(k):
        out[j] = work[perm_c[j]]


@njit(cache=True, inline="always")
def _amul(kd, x, out):
    if kd[15]:
        out[:] = np.dot(kd[16], x)
    else:
        csr_matvec(kd[0], kd[1], kd[2], x, out)


@njit(cache=True, inline="always")
def _atmul(kd, y, out):
    if kd[15]:
        out[:] = np.dot(kd[17], y)
    else:
        csr_matvec(kd[3], kd[4], kd[5], y, out)


@njit(cache=True, inline="always")
def _spd(kd, rhs, out, work):
    if kd[15]:
        out[:] = np.dot(kd[18], rhs)
    else:
        spd_solve(kd[12], rhs, out, work)


@njit(cache=True, inline="always")
def apply_q(kd, w, out, tmp_m, tmp_n):
    (a_ptr, a_idx, a_val, at_ptr, at_idx, at_val, b, c, bbar, cbar, zbar,
     use_rows, fac, W, schur_inv, dense, Ad, Atd, Ginv) = kd
    m = b.size
    n = c.size
    tau = w[m + n]
    theta = w[m + n + 1]
    _amul(kd, w[m : m + n], tmp_m)
    for i in range(m):
        out[i] = tmp_m[i] - b[i] * tau + bbar[i] * theta
    _atmul(kd, w[:m], tmp_n)
    for j in range(n):
        out[m + j] = -tmp_n[j] + c[j] * tau - cbar[j] * theta
    by = 0.0
    bby = 0.0
    for i in range(m):
        by += b[i] * w[i]
        bby += bbar[i] * w[i]
    cx = 0.0
    ccx = 0.0
    for j in range(n):
        cx += c[j] * w[m + j]
        ccx += cbar[j] * w[m + j]
    out[m + n] = by - cx + zbar * theta
    out[m + n + 1] = -bby + ccx - zbar * tau


@njit(cache=True, inline="always")
def _solve_once(kd, z, out, tmp_m, tmp_n, tmp_k, work):
    (a_ptr, a_idx, a_val, at_ptr, at_idx, at_val, b, c, bbar, cbar, zbar,
     use_rows, fac, W, schur_inv, dense, Ad, Atd, Ginv) = kd
    m = b.size
    n = c.size
    # leading block [[I, A], [-A', I]] (y, x) = (z_y, z_x)
    if use_rows:
        _amul(kd, z[m : m + n], tmp_m)
        for i in range(m):
            tmp_m[i] = z[i] - tmp_m[i]
        _spd(kd, tmp_m, tmp_k, work)
        for i in range(m):
            out[i] = tmp_k[i]
        _atmul(kd, tmp_k, tmp_n)
        for j in range(n):
            out[m + j] = z[m + j] + tmp_n[j]
    else:
        _atmul(kd, z[:m], tmp_n)
        for j in range(n):
            tmp_n[j] = z[m + j] + tmp_n[j]
        _spd(kd, tmp_n, tmp_k, work)
        for j in range(n):
            out[m + j] = tmp_k[j]
        _amul(kd, tmp_k, tmp_m)
        for i in range(m):
            out[i] = z[i] - tmp_m[i]
    # border coordinates from the 2x2 Schur complement
    r0 = z[m + n]
    r1 = z[m + n + 1]
    for i in range(m + n):
        r0 += W[i, 2] * out[i]
        r1 += W[i, 3] * out[i]
    w0 = schur_inv[0, 0] * r0 + schur_inv[0, 1] * r1
    w1 = schur_inv[1, 0] * r0 + schur_inv[1, 1] * r1
    for i in range(m + n):
        out[i] -= W[i, 0] * w0 + W[i, 1] * w1
    out[m + n] = w0
    out[m + n + 1] = w1


@njit(cache=True, inline="always")
def solve_i_plus_q(kd, z, out, refine, ws):
    """``(I + Q) out = z`` followed by ``refine`` steps of iterative refinement."""
    tmp_m, tmp_n, tmp_k, work, res, corr, qw = ws
    _solve_once(kd, z, out, tmp_m, tmp_n, tmp_k, work)
    d = z.size
    for _ in range(refine):
        apply_q(kd, out, qw, tmp_m, tmp_n)
        for i in range(d):
            res[i] = z[i] - out[i] - qw[i]
        _solve_once(kd, res, corr, tmp_m, tmp_n, tmp_k, work)
        for i in range(d):
            out[i] += corr[i]


@njit(cache=True, inline="always")
def barrier_pair_scalar(a, t):
    root = np.sqrt(a * a + 4.0 * t)
    if a >= 0.0:
        w = 0.5 * (a + root)
        return w, t / w
    s = 0.5 * (root - a)
    return t / s, s


@njit(cache=True, inline="always")
def _residual_sq(qu, v):
    acc = 0.0
    for i in range(v.size):
        r = qu[i] - v[i]
        acc += r * r
    return acc


# exact recomputation period of the running Q u product
_REFRESH = 64


@njit(cache=True)
def run_steps(kd, u, v, ut, t, alpha, mu_cubed, max_steps, refine, ws):
    """Run up to ``max_steps`` relaxed ADMM steps in place on ``(u, v)``.

    Stops early once ``||Qu - v||^2 <= mu_cubed``.  ``ut`` receives the
    projection of the last step.  Returns ``(steps, residual_sq, status)``
    with status 0 = cap reached, 1 = converged, 2 = non-finite iterate.

    ``Qu`` is carried along instead of recomputed: the projection gives
    ``Q ut = z - ut`` for free, the relaxation is linear, and the barrier
    step only moves ``x`` and ``tau``, so one product with ``A`` per step
    suffices.  Rounding in the recursion is damped by ``|1 - alpha|``; the
    product is refreshed exactly every few steps and before declaring
    convergence.
    """
    (a_ptr, a_idx, a_val, at_ptr, at_idx, at_val, b, c, bbar, cbar, zbar,
     use_rows, fac, W, schur_inv, dense, Ad, Atd, Ginv) = kd
    tmp_m, tmp_n, tmp_k, work, res, corr, qw = ws
    m = b.size
    n = c.size
    d = m + n + 2
    z = np.empty(d)
    dx = np.empty(n)
    dax = np.empty(m)
    apply_q(kd, u, qw, tmp_m, tmp_n)
    res_sq = np.inf
    for step in range(max_steps):
        for i in range(d):
            z[i] = u[i] + v[i]
        solve_i_plus_q(kd, z, ut, refine, ws)
        beta_ = 1.0 - alpha
        for i in range(d):
            # Q a = alpha (z - ut) + (1 - alpha) Q u
            qw[i] = alpha * (z[i] - ut[i]) + beta_ * qw[i]
            u[i] = alpha * ut[i] + beta_ * u[i]
        # u now holds the relaxed point a; apply the barrier proximal maps
        for j in range(n):
            k = m + j
            x, s = barrier_pair_scalar(u[k] - v[k], t)
            dx[j] = x - u[k]
            u[k] = x
            v[k] = s
        x, s = barrier_pair_scalar(u[m + n] - v[m + n], t)
        dtau = x - u[m + n]
        u[m + n] = x
        v[m + n] = s
        for i in range(m):
            v[i] = 0.0
        v[m + n + 1] = -(n + 1.0)
        if (step + 1) % _REFRESH == 0:
            apply_q(kd, u, qw, tmp_m, tmp_n)
        else:
            # add Q applied to the change in (x, tau)
            _amul(kd, dx, dax)
            cdx = 0.0
            cbdx = 0.0
            for j in range(n):
                cdx += c[j] * dx[j]
                cbdx += cbar[j] * dx[j]
            for i in range(m):
                qw[i] += dax[i] - b[i] * dtau
            for j in range(n):
                qw[m + j] += c[j] * dtau
            qw[m + n] += -cdx
            qw[m + n + 1] += cbdx - zbar * dtau
        res_sq = _residual_sq(qw, v)
        if not np.isfinite(res_sq):
            return step + 1, res_sq, 2
        if res_sq <= mu_cubed:
            apply_q(kd, u, qw, tmp_m, tmp_n)
            res_sq = _residual_sq(qw, v)
            if res_sq <= mu_cubed:
                return step + 1, res_sq, 1
    return max_steps, res_sq, 0
