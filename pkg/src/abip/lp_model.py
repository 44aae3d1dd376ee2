"""Problem representations shared by every stage of the solver.

Two problem shapes are used:

* :class:`GeneralLp` -- ``min c'x s.t. Ax = b, lower <= x <= upper`` as produced
  by the MPS reader and consumed by presolve.
* :class:`StandardLp` -- ``min c'x s.t. Ax = b, x >= 0``, the form the
  homogeneous self-dual embedding is built from.

Infinite bounds use ``numpy.inf`` / ``-numpy.inf``.  Arithmetic on the
standard form never touches them because bound folding removes them first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "GeneralLp",
    "StandardLp",
    "CandidateSolution",
    "BoundShift",
    "to_standard_form",
    "from_standard_form",
    "kkt_residuals",
]


def _as_csc(A) -> sp.csc_matrix:
    if sp.issparse(A):
        A = sp.csc_matrix(A, dtype=np.float64)
    else:
        A = sp.csc_matrix(np.atleast_2d(np.asarray(A, dtype=np.float64)))
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def _as_vector(v, name: str, size: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape != (size,):
        raise ValueError(f"{name} has length {v.size}, expected {size}")
    return v


@dataclass(frozen=True, eq=False)
class GeneralLp:
    """Equality-constrained LP with simple bounds on every column."""

    A: sp.csc_matrix
    b: np.ndarray
    c: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    objective_offset: float = 0.0
    row_names: tuple[str, ...] | None = None
    col_names: tuple[str, ...] | None = None
    name: str = ""
    # +1 for a minimization model; -1 when the source maximized and ``c`` was negated
    objective_sense: int = 1

    def __post_init__(self):
        A = _as_csc(self.A)
        m, n = A.shape
        if self.objective_sense not in (1, -1):
            raise ValueError("objective_sense must be 1 or -1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", _as_vector(self.b, "b", m))
        object.__setattr__(self, "c", _as_vector(self.c, "c", n))
        object.__setattr__(self, "lower", _as_vector(self.lower, "lower", n))
        object.__setattr__(self, "upper", _as_vector(self.upper, "upper", n))
        object.__setattr__(self, "objective_offset", float(self.objective_offset))
        if self.row_names is not None and len(self.row_names) != m:
            raise ValueError("row_names does not match the row count")
        if self.col_names is not None and len(self.col_names) != n:
            raise ValueError("col_names does not match the column count")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    @property
    def nnz(self) -> int:
        return int(self.A.nnz)

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.objective_offset


@dataclass(frozen=True, eq=False)
class StandardLp:
    """``min c'x + offset  s.t.  Ax = b, x >= 0``."""

    A: sp.csc_matrix
    b: np.ndarray
    c: np.ndarray
    objective_offset: float = 0.0
    name: str = ""

    def __post_init__(self):
        A = _as_csc(self.A)
        m, n = A.shape
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", _as_vector(self.b, "b", m))
        object.__setattr__(self, "c", _as_vector(self.c, "c", n))
        object.__setattr__(self, "objective_offset", float(self.objective_offset))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    @property
    def nnz(self) -> int:
        return int(self.A.nnz)

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.objective_offset


@dataclass
class CandidateSolution:
    """Primal-dual point ``(x, y, s)`` with its two objective values."""

    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    objective_primal: float = np.nan
    objective_dual: float = np.nan

    @classmethod
    def for_lp(cls, lp: StandardLp, x, y, s) -> "CandidateSolution":
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        s = np.asarray(s, dtype=np.float64)
        return cls(
            x=x,
            y=y,
            s=s,
            objective_primal=float(lp.c @ x) + lp.objective_offset,
            objective_dual=float(lp.b @ y) + lp.objective_offset,
        )


@dataclass(frozen=True)
class BoundShift:
    """Undo record for :func:`to_standard_form`.

    ``x_general = x_standard[:n_general] + lower``; the trailing
    ``len(upper_cols)`` standard columns are the slacks of the upper-bound rows.
    """

    lower: np.ndarray
    upper_cols: np.ndarray
    n_general: int
    m_general: int
    offset_added: float = field(default=0.0)

    def recover_x(self, x_std: np.ndarray) -> np.ndarray:
        return np.asarray(x_std[: self.n_general], dtype=np.float64) + self.lower

    def recover_y(self, y_std: np.ndarray) -> np.ndarray:
        return np.asarray(y_std[: self.m_general], dtype=np.float64)


def to_standard_form(p: GeneralLp) -> tuple[StandardLp, BoundShift]:
    """Shift lower bounds to zero and turn finite upper bounds into rows.

    Each column ``j`` with ``upper[j] < inf`` gains the row
    ``xbar_j + t_j = upper_j - lower_j`` with a fresh slack ``t_j >= 0``.
    """
    m, n = p.shape
    lower, upper = p.lower, p.upper
    if np.any(np.isneginf(lower)) or np.any(np.isnan(lower)):
        bad = np.flatnonzero(~np.isfinite(lower))[:5]
        raise ValueError(f"columns {bad.tolist()} have no finite lower bound; split them first")
    if np.any(np.isposinf(lower)):
        raise ValueError("a lower bound is +inf")
    if np.any(upper < lower):
        raise ValueError("a column has upper < lower; presolve should have rejected it")

    upper_cols = np.flatnonzero(np.isfinite(upper))
    k = upper_cols.size
    b = p.b - p.A @ lower
    offset = p.objective_offset + float(p.c @ lower)
    if k:
        bound_rows = sp.csc_matrix(
            (np.ones(k), (np.arange(k), upper_cols)), shape=(k, n)
        )
        A = sp.bmat(
            [[p.A, None], [bound_rows, sp.identity(k, format="csc")]], format="csc"
        )
        # bmat drops the zero block's shape when p.A has no rows
        if A.shape != (m + k, n + k):
            A = sp.csc_matrix(A, shape=(m + k, n + k))
        b = np.concatenate([b, upper[upper_cols] - lower[upper_cols]])
        c = np.concatenate([p.c, np.zeros(k)])
    else:
        A = p.A
        c = p.c.copy()
    std = StandardLp(A=A, b=b, c=c, objective_offset=offset, name=p.name)
    shift = BoundShift(
        lower=lower.copy(),
        upper_cols=upper_cols,
        n_general=n,
        m_general=m,
        offset_added=float(p.c @ lower),
    )
    return std, shift


def from_standard_form(
    shift: BoundShift, p: GeneralLp, cand: CandidateSolution
) -> CandidateSolution:
    """Map a standard-form candidate back onto the bounded problem ``p``."""
    x = shift.recover_x(cand.x)
    y = shift.recover_y(cand.y)
    s = p.c - p.A.T @ y
    return CandidateSolution(
        x=x,
        y=y,
        s=s,
        objective_primal=p.objective(x),
        objective_dual=cand.objective_dual,
    )


def kkt_residuals(lp: StandardLp, cand: CandidateSolution) -> tuple[float, float, float]:
    """Return ``(||Ax - b||, ||A'y + s - c||, c'x - b'y)``."""
    x, y, s = cand.x, cand.y, cand.s
    if x.shape != (lp.n,) or s.shape != (lp.n,) or y.shape != (lp.m,):
        raise ValueError("candidate dimensions do not match the LP")
    pres = lp.A @ x - lp.b
    dres = lp.A.T @ y + s - lp.c
    dgap = float(lp.c @ x - lp.b @ y)
    return float(np.linalg.norm(pres)), float(np.linalg.norm(dres)), dgap
