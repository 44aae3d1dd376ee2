"""Problem reductions, scaling and the inverse (postsolve) map.

Rules run in the order empty row, infeasible variable, fixed variable,
singleton row, empty column, repeated until nothing changes.  Free and
minus-infinity columns are then rewritten so every column has a finite lower
bound, linearly dependent rows are removed, bounds are folded into standard
form and the result is equilibrated.

Every step appends a :class:`Reduction`; :func:`postsolve` walks the list in
reverse to rebuild a solution of the original problem.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import maximum_bipartite_matching

from .lp_model import (
    BoundShift,
    CandidateSolution,
    GeneralLp,
    StandardLp,
    from_standard_form,
    to_standard_form,
)
from .scaling import ScalingRecord, equilibrate, identity_scaling

__all__ = [
    "ReductionKind",
    "Reduction",
    "PresolveStack",
    "ProvenInfeasible",
    "ProvenUnbounded",
    "PreparedLp",
    "presolve",
    "remove_dependent_rows",
    "scale",
    "prepare",
    "postsolve",
    "dims_report",
]

log = logging.getLogger("abip")

_DEP_TOL = 1e-9
_FIX_TOL = 1e-12
_FEAS_TOL = 1e-9
# dense pivoted QR is used for the global rank check up to this many entries
_DENSE_RANK_LIMIT = 4e7


class ReductionKind(str, enum.Enum):
    EMPTY_ROW = "EmptyRow"
    EMPTY_COLUMN = "EmptyColumn"
    INFEASIBLE_VARIABLE = "InfeasibleVariable"
    FIXED_VARIABLE = "FixedVariable"
    FREE_VARIABLE_SPLIT = "FreeVariableSplit"
    SINGLETON_ROW = "SingletonRow"
    DEPENDENT_ROWS_REMOVED = "DependentRowsRemoved"
    BOUND_SHIFT = "BoundShift"
    SCALING = "Scaling"


@dataclass(frozen=True)
class Reduction:
    kind: ReductionKind
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ProvenInfeasible:
    reason: str
    kind: ReductionKind = ReductionKind.INFEASIBLE_VARIABLE


@dataclass(frozen=True)
class ProvenUnbounded:
    reason: str
    kind: ReductionKind = ReductionKind.EMPTY_COLUMN


@dataclass
class PresolveStack:
    """Reductions in application order plus the maps needed to undo them.

    ``row_map[i]`` / ``col_map`` give the original index of each surviving
    row and column of the reduced general problem; ``col_map`` entries of
    the negative half of a split column point to the same original column.
    """

    reductions: list
    original_dims: tuple[int, int]
    reduced_dims: tuple[int, int]
    original: GeneralLp
    reduced: GeneralLp | None = None
    row_map: np.ndarray | None = None
    col_map: np.ndarray | None = None
    col_sign: np.ndarray | None = None
    standard: StandardLp | None = None
    shift: BoundShift | None = None
    scaling: ScalingRecord | None = None

    @property
    def kinds(self) -> list[str]:
        return [r.kind.value for r in self.reductions]

    def count(self, kind: ReductionKind) -> int:
        return sum(1 for r in self.reductions if r.kind == kind)


def _identity_stack(p: GeneralLp) -> PresolveStack:
    m, n = p.shape
    return PresolveStack(
        reductions=[], original_dims=(m, n), reduced_dims=(m, n), original=p, reduced=p,
        row_map=np.arange(m), col_map=np.arange(n), col_sign=np.ones(n),
    )


# ---------------------------------------------------------------- P1 - P6


def presolve(p: GeneralLp, dependent_rows: bool = True):
    """Apply the reduction rules to a fixed point.

    Returns ``(reduced, stack)`` or a :class:`ProvenInfeasible` /
    :class:`ProvenUnbounded` verdict.
    """
    m, n = p.shape
    A = p.A.tocoo()
    er, ec, ev = A.row.astype(np.int64), A.col.astype(np.int64), A.data.copy()
    csc = p.A
    b = p.b.copy()
    lower = p.lower.copy()
    upper = p.upper.copy()
    c = p.c
    offset = p.objective_offset
    row_alive = np.ones(m, dtype=bool)
    col_alive = np.ones(n, dtype=bool)
    reductions: list[Reduction] = []
    b_tol = _FEAS_TOL * (1.0 + (np.max(np.abs(b)) if m else 0.0))

    def column_entries(j):
        lo, hi = csc.indptr[j], csc.indptr[j + 1]
        rows = csc.indices[lo:hi]
        vals = csc.data[lo:hi]
        keep = row_alive[rows]
        return rows[keep], vals[keep]

    changed = True
    while changed:
        changed = False
        alive = row_alive[er] & col_alive[ec]
        row_cnt = np.bincount(er[alive], minlength=m)
        # P1 empty rows
        for i in np.flatnonzero(row_alive & (row_cnt == 0)):
            if abs(b[i]) > b_tol:
                return ProvenInfeasible(f"row {_name(p.row_names, i)} is empty with right-hand side {b[i]:.6g}",
                                        ReductionKind.EMPTY_ROW)
            row_alive[i] = False
            reductions.append(Reduction(ReductionKind.EMPTY_ROW, {"row": int(i)}))
            changed = True
        # P3 infeasible bounds
        bad = np.flatnonzero(col_alive & (lower > upper + _FIX_TOL * (1.0 + np.abs(lower))))
        if bad.size:
            j = int(bad[0])
            return ProvenInfeasible(f"column {_name(p.col_names, j)} has lower {lower[j]:.6g} > upper {upper[j]:.6g}")
        # P4 fixed variables
        fixed = col_alive & np.isfinite(lower) & (np.abs(upper - lower) <= _FIX_TOL * (1.0 + np.abs(lower)))
        for j in np.flatnonzero(fixed):
            val = float(lower[j])
            rows, vals = column_entries(j)
            b[rows] -= vals * val
            offset += float(c[j]) * val
            col_alive[j] = False
            reductions.append(Reduction(ReductionKind.FIXED_VARIABLE, {"col": int(j), "value": val}))
            changed = True
        # P6 singleton rows
        alive = row_alive[er] & col_alive[ec]
        row_cnt = np.bincount(er[alive], minlength=m)
        singles = np.flatnonzero(row_alive & (row_cnt == 1))
        if singles.size:
            idx = np.flatnonzero(alive & np.isin(er, singles))
            for e in idx:
                i, j, a = int(er[e]), int(ec[e]), float(ev[e])
                val = b[i] / a
                tol = _FEAS_TOL * (1.0 + abs(val))
                if val < lower[j] - tol or val > upper[j] + tol:
                    return ProvenInfeasible(
                        f"singleton row {_name(p.row_names, i)} forces column {_name(p.col_names, j)} "
                        f"to {val:.6g}, outside [{lower[j]:.6g}, {upper[j]:.6g}]",
                        ReductionKind.SINGLETON_ROW)
                val = min(max(val, lower[j]), upper[j])
                lower[j] = upper[j] = val
                row_alive[i] = False
                reductions.append(Reduction(ReductionKind.SINGLETON_ROW, {"row": i, "col": j, "coef": a}))
                changed = True
            if changed:
                # a column fixed here must reach the fixed-variable rule before
                # the empty-column rule can look at it
                continue
        # P2 empty columns
        alive = row_alive[er] & col_alive[ec]
        col_cnt = np.bincount(ec[alive], minlength=n)
        for j in np.flatnonzero(col_alive & (col_cnt == 0)):
            cj = float(c[j])
            if cj > 0:
                val = lower[j]
            elif cj < 0:
                val = upper[j]
            else:
                val = lower[j] if np.isfinite(lower[j]) else (upper[j] if np.isfinite(upper[j]) else 0.0)
            if not np.isfinite(val):
                return ProvenUnbounded(f"empty column {_name(p.col_names, j)} with cost {cj:.6g} is unbounded")
            offset += cj * float(val)
            col_alive[j] = False
            reductions.append(Reduction(ReductionKind.EMPTY_COLUMN, {"col": int(j), "value": float(val)}))
            changed = True

    # P5 columns without a finite lower bound. Splitting never creates a new
    # empty, fixed or singleton pattern, so doing it once here is equivalent
    # to running it inside the loop.
    rows_kept = np.flatnonzero(row_alive)
    cols_kept = np.flatnonzero(col_alive)
    sub = csc[rows_kept][:, cols_kept].tocsc()
    new_lower = lower[cols_kept].copy()
    new_upper = upper[cols_kept].copy()
    new_c = c[cols_kept].copy()
    sign = np.ones(cols_kept.size)
    extra_cols, extra_orig = [], []
    for k, j in enumerate(cols_kept):
        if not np.isneginf(new_lower[k]):
            continue
        if np.isposinf(new_upper[k]):
            # x = x_plus - x_minus, both nonnegative
            new_lower[k] = 0.0
            extra_cols.append(k)
            extra_orig.append(int(j))
            reductions.append(Reduction(ReductionKind.FREE_VARIABLE_SPLIT, {"col": int(j), "mode": "split"}))
        else:
            # x = -x' with x' in [-upper, inf)
            sign[k] = -1.0
            new_lower[k], new_upper[k] = -new_upper[k], math.inf
            new_c[k] = -new_c[k]
            reductions.append(Reduction(ReductionKind.FREE_VARIABLE_SPLIT, {"col": int(j), "mode": "negate"}))
    if np.any(sign < 0):
        sub = sub @ sp.diags(sign)
    col_map = cols_kept.astype(np.int64)
    col_sign = sign
    col_names = [p.col_names[j] for j in cols_kept] if p.col_names else None
    if extra_cols:
        neg = -sub[:, extra_cols]
        sub = sp.hstack([sub, neg], format="csc")
        new_lower = np.concatenate([new_lower, np.zeros(len(extra_cols))])
        new_upper = np.concatenate([new_upper, np.full(len(extra_cols), math.inf)])
        new_c = np.concatenate([new_c, -new_c[extra_cols]])
        col_map = np.concatenate([col_map, np.asarray(extra_orig, dtype=np.int64)])
        col_sign = np.concatenate([col_sign, -np.ones(len(extra_cols))])
        if col_names is not None:
            col_names += [f"{p.col_names[j]}_neg" for j in extra_orig]
    reduced = GeneralLp(
        A=sub, b=b[rows_kept], c=new_c, lower=new_lower, upper=new_upper,
        objective_offset=offset,
        row_names=tuple(p.row_names[i] for i in rows_kept) if p.row_names else None,
        col_names=tuple(col_names) if col_names is not None else None,
        name=p.name, objective_sense=p.objective_sense,
    )
    row_map = rows_kept.astype(np.int64)
    if dependent_rows and reduced.shape[0] > 0:
        out = remove_dependent_rows(reduced)
        if isinstance(out, ProvenInfeasible):
            return out
        reduced, red = out
        if red.payload["removed"]:
            red.payload["removed_original"] = row_map[np.asarray(red.payload["removed"], dtype=np.int64)].tolist()
            reductions.append(red)
            row_map = row_map[np.asarray(red.payload["kept"], dtype=np.int64)]
    stack = PresolveStack(
        reductions=reductions, original_dims=p.shape, reduced_dims=reduced.shape,
        original=p, reduced=reduced, row_map=row_map, col_map=col_map, col_sign=col_sign,
    )
    return reduced, stack


def _name(names, k: int) -> str:
    return names[k] if names else str(k)


# ---------------------------------------------------------------- P7


def _overdetermined_rows(A: sp.csr_matrix) -> np.ndarray:
    """Rows of the over-determined coarse Dulmage-Mendelsohn block.

    These are the rows reachable from an unmatched row of a maximum matching
    by alternating paths; every structural rank deficiency lives here.
    """
    m = A.shape[0]
    pattern = A.copy()
    pattern.data = np.ones_like(pattern.data)
    match = maximum_bipartite_matching(pattern, perm_type="column")
    row_of_col = np.full(A.shape[1], -1, dtype=np.int64)
    matched = np.flatnonzero(match >= 0)
    row_of_col[match[matched]] = matched
    seen_row = match < 0
    seen_col = np.zeros(A.shape[1], dtype=bool)
    stack = list(np.flatnonzero(seen_row))
    while stack:
        i = stack.pop()
        for j in A.indices[A.indptr[i] : A.indptr[i + 1]]:
            if seen_col[j]:
                continue
            seen_col[j] = True
            r = row_of_col[j]
            if r >= 0 and not seen_row[r]:
                seen_row[r] = True
                stack.append(r)
    return np.flatnonzero(seen_row) if m else np.zeros(0, dtype=np.int64)


def _independent_subset(A: sp.csr_matrix, rows: np.ndarray) -> np.ndarray:
    """Rows of ``rows`` kept by a column-pivoted QR of the normalized ``A[rows]'``."""
    if rows.size == 0:
        return rows
    sub = A[rows]
    cols = np.unique(sub.indices)
    dense = sub[:, cols].toarray()
    norms = np.linalg.norm(dense, axis=1)
    dense = dense / (1.0 + norms)[:, None]
    _, R, piv = sla.qr(dense.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R)) if R.size else np.zeros(0)
    rank = int(np.sum(diag > _DEP_TOL))
    return np.sort(rows[piv[:rank]])


def remove_dependent_rows(p: GeneralLp):
    """Drop linearly dependent rows; returns ``(lp, reduction)`` or :class:`ProvenInfeasible`."""
    m, n = p.shape
    A = p.A.tocsr()
    if m == 0:
        return p, Reduction(ReductionKind.DEPENDENT_ROWS_REMOVED, {"removed": [], "kept": []})
    over = _overdetermined_rows(A)
    keep = np.ones(m, dtype=bool)
    if over.size:
        indep = _independent_subset(A, over)
        keep[over] = False
        keep[indep] = True
    kept = np.flatnonzero(keep)
    if kept.size * n <= _DENSE_RANK_LIMIT:
        kept = _independent_subset(A, kept)
    else:
        log.warning("rank check skipped on %d x %d rows; only structural dependencies removed", kept.size, n)
    removed = np.setdiff1d(np.arange(m), kept)
    if removed.size:
        K = A[kept].toarray()
        D = A[removed].toarray()
        w, *_ = np.linalg.lstsq(K.T, D.T, rcond=None)
        pred = p.b[kept] @ w
        scale = 1.0 + np.abs(p.b[removed]) + np.abs(p.b[kept]) @ np.abs(w)
        bad = np.flatnonzero(np.abs(p.b[removed] - pred) > 1e-8 * scale)
        if bad.size:
            i = int(removed[bad[0]])
            return ProvenInfeasible(
                f"row {_name(p.row_names, i)} is a combination of other rows with an inconsistent right-hand side",
                ReductionKind.DEPENDENT_ROWS_REMOVED)
    out = GeneralLp(
        A=p.A[kept], b=p.b[kept], c=p.c, lower=p.lower, upper=p.upper,
        objective_offset=p.objective_offset,
        row_names=tuple(p.row_names[i] for i in kept) if p.row_names else None,
        col_names=p.col_names, name=p.name, objective_sense=p.objective_sense,
    )
    red = Reduction(ReductionKind.DEPENDENT_ROWS_REMOVED,
                    {"removed": removed.tolist(), "kept": kept.tolist()})
    return out, red


# ---------------------------------------------------------------- scaling and pipeline


def scale(lp: StandardLp, iterations: int = 10) -> tuple[StandardLp, Reduction]:
    rec = equilibrate(lp, iterations=iterations)
    return rec.scaled, Reduction(ReductionKind.SCALING, {"record": rec})


@dataclass
class PreparedLp:
    """Standard-form problem ready for the solver plus everything to undo it."""

    lp: StandardLp
    scaling: ScalingRecord
    stack: PresolveStack


def prepare(p: GeneralLp, use_presolve: bool = True, use_scaling: bool = True):
    """General LP to scaled standard form; may return a presolve verdict."""
    if use_presolve:
        out = presolve(p)
        if isinstance(out, (ProvenInfeasible, ProvenUnbounded)):
            return out
        reduced, stack = out
    else:
        log.warning("presolve disabled; row rank of the constraint matrix is not verified")
        reduced, stack = _split_only(p)
    std, shift = to_standard_form(reduced)
    stack.reductions.append(Reduction(ReductionKind.BOUND_SHIFT, {"shift": shift}))
    stack.standard = std
    stack.shift = shift
    if use_scaling:
        rec = equilibrate(std)
        stack.reductions.append(Reduction(ReductionKind.SCALING, {"record": rec}))
    else:
        rec = identity_scaling(std)
    stack.scaling = rec
    stack.reduced_dims = std.shape
    return PreparedLp(rec.scaled, rec, stack)


def _split_only(p: GeneralLp):
    """Minimal rewrite when presolve is off: only give every column a finite lower bound."""
    if np.all(np.isfinite(p.lower)):
        return p, _identity_stack(p)
    # run the reduction machinery with every rule except the free-column rewrite disabled
    m, n = p.shape
    lower, upper, c = p.lower.copy(), p.upper.copy(), p.c.copy()
    A = p.A.copy()
    reductions, sign = [], np.ones(n)
    extra = []
    for j in range(n):
        if not np.isneginf(lower[j]):
            continue
        if np.isposinf(upper[j]):
            lower[j] = 0.0
            extra.append(j)
            reductions.append(Reduction(ReductionKind.FREE_VARIABLE_SPLIT, {"col": j, "mode": "split"}))
        else:
            sign[j] = -1.0
            lower[j], upper[j], c[j] = -upper[j], math.inf, -c[j]
            reductions.append(Reduction(ReductionKind.FREE_VARIABLE_SPLIT, {"col": j, "mode": "negate"}))
    A = A @ sp.diags(sign)
    col_map = np.arange(n)
    col_sign = sign.copy()
    if extra:
        A = sp.hstack([A, -A[:, extra]], format="csc")
        lower = np.concatenate([lower, np.zeros(len(extra))])
        upper = np.concatenate([upper, np.full(len(extra), math.inf)])
        c = np.concatenate([c, -c[extra]])
        col_map = np.concatenate([col_map, extra])
        col_sign = np.concatenate([col_sign, -np.ones(len(extra))])
    reduced = GeneralLp(A, p.b, c, lower, upper, p.objective_offset, p.row_names, None, p.name, p.objective_sense)
    stack = PresolveStack(reductions, p.shape, reduced.shape, p, reduced,
                          np.arange(m), col_map, col_sign)
    return reduced, stack


# ---------------------------------------------------------------- postsolve


def postsolve(stack: PresolveStack, reduced_solution: CandidateSolution, scaled: bool = False) -> CandidateSolution:
    """Map a solution of the reduced problem back to the original one.

    By default ``reduced_solution`` belongs to the unscaled standard form
    (the solver already undoes scaling when it reports); pass ``scaled=True``
    for a point of the equilibrated problem.  Without a standard form in the
    stack the candidate refers to ``stack.reduced`` directly.
    """
    cand = reduced_solution
    m_red, n_red = stack.reduced_dims
    if cand.x.shape != (n_red,) or cand.y.shape != (m_red,):
        raise ValueError(f"solution has dims ({cand.y.size}, {cand.x.size}), expected {stack.reduced_dims}")
    if scaled and stack.scaling is not None:
        x, y, s = stack.scaling.unscale(cand.x, cand.y, cand.s)
        cand = CandidateSolution.for_lp(stack.scaling.original, x, y, s)
    if stack.shift is not None:
        cand = from_standard_form(stack.shift, stack.reduced, cand)
    p = stack.original
    m, n = p.shape
    x = np.zeros(n)
    np.add.at(x, stack.col_map, stack.col_sign * cand.x)
    y = np.zeros(m)
    y[stack.row_map] = cand.y
    restored_rows = np.zeros(m, dtype=bool)
    restored_rows[stack.row_map] = True
    A = p.A
    for red in reversed(stack.reductions):
        kind, pl = red.kind, red.payload
        if kind in (ReductionKind.FIXED_VARIABLE, ReductionKind.EMPTY_COLUMN):
            x[pl["col"]] = pl["value"]
        elif kind == ReductionKind.SINGLETON_ROW:
            i, j, a = pl["row"], pl["col"], pl["coef"]
            lo, hi = A.indptr[j], A.indptr[j + 1]
            rows, vals = A.indices[lo:hi], A.data[lo:hi]
            others = (rows != i) & restored_rows[rows]
            y[i] = (p.c[j] - vals[others] @ y[rows[others]]) / a
            restored_rows[i] = True
        elif kind in (ReductionKind.EMPTY_ROW,):
            y[pl["row"]] = 0.0
            restored_rows[pl["row"]] = True
        elif kind == ReductionKind.DEPENDENT_ROWS_REMOVED:
            restored_rows[pl.get("removed_original", [])] = True
    s = p.c - A.T @ y
    return CandidateSolution(
        x=x, y=y, s=s,
        objective_primal=p.objective(x),
        objective_dual=_box_dual_objective(p, y, s),
    )


def _box_dual_objective(p: GeneralLp, y: np.ndarray, s: np.ndarray) -> float:
    """``b'y + l's+ - u's- + offset``; -inf when a needed bound is infinite."""
    sp_, sn = np.maximum(s, 0.0), np.maximum(-s, 0.0)
    with np.errstate(invalid="ignore"):
        lo = np.where(sp_ > 0, p.lower * sp_, 0.0)
        up = np.where(sn > 0, p.upper * sn, 0.0)
    val = float(p.b @ y + lo.sum() - up.sum()) + p.objective_offset
    return val if np.isfinite(val) else -math.inf


def dims_report(lp) -> dict:
    m, n = lp.shape
    nnz = int(lp.A.nnz)
    return {"rows": m, "cols": n, "nonzeros": nnz, "sparsity": nnz / (m * n) if m * n else 0.0}
