"""Diagonal equilibration of a standard-form LP and its inverse map.

The scaled problem is ``A_s = D_r A D_c``, ``b_s = sigma_b D_r b``,
``c_s = sigma_c D_c c``.  A solution of the scaled problem maps back through

    x = D_c x_s / sigma_b,   y = D_r y_s / sigma_c,   s = s_s / (sigma_c D_c).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lp_model import StandardLp

__all__ = ["ScalingRecord", "equilibrate", "identity_scaling"]

_MIN_SCALE = 1e-4
_MAX_SCALE = 1e4


@dataclass(frozen=True, eq=False)
class ScalingRecord:
    original: StandardLp
    scaled: StandardLp
    row_scale: np.ndarray
    col_scale: np.ndarray
    b_scale: float = 1.0
    c_scale: float = 1.0

    def unscale_x(self, x_s: np.ndarray) -> np.ndarray:
        return self.col_scale * x_s / self.b_scale

    def unscale_y(self, y_s: np.ndarray) -> np.ndarray:
        return self.row_scale * y_s / self.c_scale

    def unscale_s(self, s_s: np.ndarray) -> np.ndarray:
        return s_s / (self.col_scale * self.c_scale)

    def unscale(self, x_s, y_s, s_s):
        return self.unscale_x(x_s), self.unscale_y(y_s), self.unscale_s(s_s)


def identity_scaling(lp: StandardLp) -> ScalingRecord:
    m, n = lp.shape
    return ScalingRecord(lp, lp, np.ones(m), np.ones(n))


def _row_col_norms(A: sp.csc_matrix) -> tuple[np.ndarray, np.ndarray]:
    sq = A.multiply(A)
    rows = np.sqrt(np.asarray(sq.sum(axis=1)).ravel())
    cols = np.sqrt(np.asarray(sq.sum(axis=0)).ravel())
    return rows, cols


def equilibrate(lp: StandardLp, iterations: int = 10, scale_vectors: bool = True, b_target: float = 1.0, c_target: float = 1.0) -> ScalingRecord:
    """Ruiz-style equilibration in the Euclidean norm.

    Each sweep divides every row and column by the square root of its norm;
    individual factors are clipped to ``[1e-4, 1e4]`` so that near-empty rows
    or columns do not blow up.  With ``scale_vectors`` the right-hand side and
    cost are then normalized by scalars so that ``||b_s||`` and ``||c_s||``
    are of the same order as the matrix entries.
    """
    m, n = lp.shape
    d_r = np.ones(m)
    d_c = np.ones(n)
    A = lp.A.copy()
    for _ in range(iterations):
        rows, cols = _row_col_norms(A)
        fr = 1.0 / np.sqrt(np.clip(rows, _MIN_SCALE, _MAX_SCALE))
        fc = 1.0 / np.sqrt(np.clip(cols, _MIN_SCALE, _MAX_SCALE))
        fr[rows == 0] = 1.0
        fc[cols == 0] = 1.0
        A = sp.diags(fr) @ A @ sp.diags(fc)
        d_r *= fr
        d_c *= fc
        if np.all(np.abs(rows[rows > 0] - 1.0) < 1e-3) and np.all(np.abs(cols[cols > 0] - 1.0) < 1e-3):
            break
    A = sp.csc_matrix(A)
    b_s = d_r * lp.b
    c_s = d_c * lp.c
    sb = sc = 1.0
    if scale_vectors:
        nb = np.linalg.norm(b_s)
        nc = np.linalg.norm(c_s)
        if nb > 0:
            sb = b_target * np.sqrt(max(m, 1)) / nb
        if nc > 0:
            sc = c_target * np.sqrt(max(n, 1)) / nc
        # keep the scalars from amplifying tiny vectors
        sb = min(sb, _MAX_SCALE)
        sc = min(sc, _MAX_SCALE)
    scaled = StandardLp(
        A=A,
        b=sb * b_s,
        c=sc * c_s,
        objective_offset=0.0,
        name=lp.name,
    )
    return ScalingRecord(lp, scaled, d_r, d_c, float(sb), float(sc))
