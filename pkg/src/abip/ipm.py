"""Outer path-following loop around the inner ADMM iteration.

Each outer iteration picks a penalty ``beta`` (Barzilai-Borwein estimate with
safeguards), runs the inner loop at a fixed barrier weight ``mu`` and then
shrinks ``mu`` by a factor ``gamma`` with a warm restart that keeps every
complementarity product on the new central-path level.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .admm import (
    InnerCaps,
    InnerExit,
    IterateState,
    inner_converged,
    inner_step,
    run_inner_loop,
)
from .hsd import HsdEmbedding, HsdPoint, build_embedding
from .lp_model import CandidateSolution, StandardLp
from .scaling import ScalingRecord, identity_scaling

__all__ = [
    "Status",
    "SolverConfig",
    "Residuals",
    "SolveReport",
    "init_state",
    "warm_restart",
    "select_gamma",
    "bb_select_beta",
    "check_termination",
    "solve",
]

log = logging.getLogger("abip")

# Optimality is only tested when tau is clearly away from zero.
_TAU_FLOOR = 1e-10
# Penalty estimates outside this window are treated as unreliable.
_BETA_MIN = 1e-6
_BETA_MAX = 1e6


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    UNFINISHED = "Unfinished"
    NUMERICAL_FAILURE = "NumericalFailure"

    @property
    def exit_code(self) -> int:
        return _EXIT_CODES[self]


_EXIT_CODES = {
    Status.OPTIMAL: 0,
    Status.PRIMAL_INFEASIBLE: 2,
    Status.DUAL_INFEASIBLE: 3,
    Status.UNFINISHED: 4,
    Status.NUMERICAL_FAILURE: 5,
}


@dataclass(frozen=True)
class SolverConfig:
    eps_pres: float = 1e-3
    eps_dres: float = 1e-3
    eps_dgap: float = 1e-3
    eps_pinfeas: float = 1e-3
    eps_dinfeas: float = 1e-3
    eps_cor: float = 0.2
    eps_penalty: float = 0.1
    alpha: float = 1.8
    beta0: float = 1.0
    gamma_min: float = 0.1
    gamma_max: float = 0.9
    max_admm_steps: int = 1_000_000
    max_outer: int = 200
    bb_enabled: bool = True
    bb_retry_cap: int = 3
    probe_every: int = 50
    linsys: str = "direct"

    def __post_init__(self):
        for name in ("eps_pres", "eps_dres", "eps_dgap", "eps_pinfeas", "eps_dinfeas", "eps_cor", "eps_penalty"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.gamma_min <= self.gamma_max < 1.0:
            raise ValueError("need 0 < gamma_min <= gamma_max < 1")
        if not 0.0 <= self.alpha <= 2.0:
            raise ValueError("alpha must lie in [0, 2]")
        if not self.beta0 > 0:
            raise ValueError("beta0 must be positive")
        if self.max_admm_steps < 0 or self.max_outer < 0 or self.bb_retry_cap < 0:
            raise ValueError("iteration caps must be nonnegative")
        if self.linsys not in ("direct", "cg"):
            raise ValueError("linsys must be 'direct' or 'cg'")

    @classmethod
    def with_tolerance(cls, eps: float, **kw) -> "SolverConfig":
        return cls(eps_pres=eps, eps_dres=eps, eps_dgap=eps, eps_pinfeas=eps, eps_dinfeas=eps, **kw)

    @property
    def eps_target(self) -> float:
        return min(self.eps_pres, self.eps_dres, self.eps_dgap)


@dataclass(frozen=True)
class Residuals:
    """Residuals of the tau-scaled candidate on the unscaled problem."""

    pres: float
    dres: float
    dgap: float
    pres_rel: float
    dres_rel: float
    dgap_rel: float
    tau: float
    kappa: float

    @property
    def max_rel(self) -> float:
        return max(self.pres_rel, self.dres_rel, self.dgap_rel)

    @classmethod
    def unavailable(cls, tau: float, kappa: float) -> "Residuals":
        inf = math.inf
        return cls(inf, inf, inf, inf, inf, inf, tau, kappa)


@dataclass
class SolveReport:
    status: Status
    solution: CandidateSolution | None = None
    certificate: np.ndarray | None = None
    residuals: tuple[float, float, float] = (math.nan, math.nan, math.nan)
    # the same three quantities normalized as in the stopping test
    relative_residuals: tuple[float, float, float] = (math.nan, math.nan, math.nan)
    outer_iters: int = 0
    total_admm_steps: int = 0
    bb_updates: int = 0
    wall_time: float = 0.0
    final_mu: float = math.nan
    final_beta: float = math.nan
    message: str = ""

    @property
    def objective(self) -> float:
        return self.solution.objective_primal if self.solution is not None else math.nan


@dataclass
class _Verdict:
    status: Status | None
    residuals: Residuals
    solution: CandidateSolution | None = None
    certificate: np.ndarray | None = None


def init_state(e: HsdEmbedding, cfg: SolverConfig) -> IterateState:
    m, n = e.m, e.n
    u = np.zeros(e.dim)
    v = np.zeros(e.dim)
    u[m : m + n] = 1.0
    u[m + n] = 1.0
    u[m + n + 1] = 1.0
    v[m : m + n] = 1.0
    v[m + n] = 1.0
    v[m + n + 1] = -(n + 1.0)
    return IterateState(HsdPoint(u, v, m, n), mu=cfg.beta0, beta=cfg.beta0, relax_alpha=cfg.alpha)


def warm_restart(st: IterateState, gamma: float) -> IterateState:
    """Shrink ``mu`` by ``gamma`` and scale the cone pairs by ``sqrt(gamma)``."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie strictly between 0 and 1")
    p = st.point
    m, n = p.m, p.n
    g = math.sqrt(gamma)
    u = p.u * g
    v = p.v * g
    v[:m] = 0.0
    v[m + n + 1] = -(n + 1.0)
    return IterateState(HsdPoint(u, v, m, n), mu=st.mu * gamma, beta=st.beta,
                        inner_count=st.inner_count, relax_alpha=st.relax_alpha)


def select_gamma(st: IterateState | None, residuals: Residuals, cfg: SolverConfig) -> float:
    """Log-linear schedule from ``gamma_min`` (far) to ``gamma_max`` (at tolerance)."""
    eps = cfg.eps_target
    r = residuals.max_rel
    if not np.isfinite(r):
        return cfg.gamma_min
    if r <= 0:
        frac = 1.0
    else:
        frac = 1.0 - math.log(r / eps) / math.log(1.0 / eps)
    frac = min(max(frac, 0.0), 1.0)
    return cfg.gamma_min + (cfg.gamma_max - cfg.gamma_min) * frac


def _hybrid(sd: float, mg: float) -> float:
    return mg if 2.0 * mg > sd else sd - 0.5 * mg


def _spectral(dv: np.ndarray, du: np.ndarray) -> tuple[float, float]:
    """Hybrid spectral estimate and its correlation; ``(nan, 0)`` if degenerate."""
    vv = float(dv @ dv)
    vu = float(dv @ du)
    uu = float(du @ du)
    if vv <= 0 or uu <= 0 or vu <= 0 or not np.isfinite(vu):
        return math.nan, 0.0
    est = _hybrid(vv / vu, vu / uu)
    cor = vu / math.sqrt(vv * uu)
    return est, cor


def _rebeta(st: IterateState, beta: float) -> IterateState:
    """Move ``st`` onto the complementarity level of a new penalty."""
    if beta == st.beta:
        return st
    p = st.point.copy()
    m, n = p.m, p.n
    ratio = st.beta / beta
    p.v[m : m + n + 1] *= ratio
    return IterateState(p, mu=st.mu, beta=beta, inner_count=st.inner_count, relax_alpha=st.relax_alpha)


def _estimate_beta(st0: IterateState, e: HsdEmbedding, cfg: SolverConfig):
    """Run two inner steps from ``st0`` and return ``(beta_hat, st2, steps)``."""
    alpha = st0.relax_alpha
    u0, v0 = st0.point.u, st0.point.v
    ut1 = e.solve_i_plus_q(u0 + v0)
    st1 = inner_step(st0, e)
    u1, v1 = st1.point.u, st1.point.v
    ut2 = e.solve_i_plus_q(u1 + v1)
    st2 = inner_step(st1, e)
    u2 = st2.point.u
    vh1 = v0 - alpha * ut1 - (1.0 - alpha) * u0 + alpha * u1
    vh2 = v1 - alpha * ut2 - (1.0 - alpha) * u1 + alpha * u2
    dv = vh2 - vh1
    dut = alpha * (ut2 - ut1) + (1.0 - alpha) * (u1 - u0)
    du = -(u2 - u1)
    phi, phi_cor = _spectral(dv, dut)
    psi, psi_cor = _spectral(dv, du)
    ok_phi = phi_cor > cfg.eps_cor and np.isfinite(phi)
    ok_psi = psi_cor > cfg.eps_cor and np.isfinite(psi)
    if ok_phi and ok_psi:
        bh = math.sqrt(phi * psi)
    elif ok_phi:
        bh = phi
    elif ok_psi:
        bh = psi
    else:
        bh = st0.beta
    if not (np.isfinite(bh) and _BETA_MIN <= bh <= _BETA_MAX):
        bh = st0.beta
    return bh, st2, 2


def bb_select_beta(st: IterateState, e: HsdEmbedding, cfg: SolverConfig) -> tuple[float, IterateState, int, bool]:
    """Choose the penalty for the coming inner loop.

    Returns ``(beta, state, steps_used, changed)``.  When the estimate agrees
    with the current penalty the two probing steps are kept; otherwise the
    state returned is the starting point moved to the chosen penalty.
    """
    beta = st.beta
    start = st
    steps = 0
    bh, st2, k = _estimate_beta(start, e, cfg)
    steps += k
    retries = 0
    while bh != beta and abs(bh - beta) > cfg.eps_penalty and retries < cfg.bb_retry_cap:
        beta = bh
        start = _rebeta(st, beta)
        bh, st2, k = _estimate_beta(start, e, cfg)
        steps += k
        retries += 1
    if bh == beta:
        return beta, st2, steps, beta != st.beta
    if abs(bh - beta) <= cfg.eps_penalty:
        beta = 0.5 * (beta + bh)
    else:
        beta = bh
    return beta, _rebeta(st, beta), steps, beta != st.beta


def _norm(v) -> float:
    return float(np.linalg.norm(v))


def check_termination(
    st: IterateState, lp: StandardLp, cfg: SolverConfig, scaling: ScalingRecord | None = None, at=None
) -> _Verdict:
    """Evaluate the stopping tests on the current ``(u, v)``.

    ``lp`` is the problem that was embedded; with ``scaling`` the tests are
    carried out on ``scaling.original`` after undoing the scaling.  ``at``
    may hold a precomputed transpose of the original matrix.
    """
    if scaling is None:
        scaling = identity_scaling(lp)
    orig = scaling.original
    p = st.point
    x, y, s = scaling.unscale(p.x, p.y, p.s)
    tau, kappa = p.tau, p.kappa
    A, b, c = orig.A, orig.b, orig.c
    At = at if at is not None else A.T
    nb, nc = _norm(b), _norm(c)

    if tau >= _TAU_FLOOR * (1.0 + kappa):
        xs, ys, ss = x / tau, y / tau, s / tau
        pres = _norm(A @ xs - b)
        dres = _norm(At @ ys + ss - c)
        cx = float(c @ xs)
        by = float(b @ ys)
        dgap = cx - by
        res = Residuals(
            pres, dres, dgap,
            pres / (1.0 + nb), dres / (1.0 + nc), abs(dgap) / (1.0 + abs(cx) + abs(by)),
            tau, kappa,
        )
        if res.pres_rel <= cfg.eps_pres and res.dres_rel <= cfg.eps_dres and res.dgap_rel <= cfg.eps_dgap:
            sol = CandidateSolution.for_lp(orig, xs, ys, ss)
            return _Verdict(Status.OPTIMAL, res, solution=sol)
    else:
        res = Residuals.unavailable(tau, kappa)

    by_raw = float(b @ y)
    if nb > 0 and by_raw > 0:
        if _norm(At @ y + s) <= cfg.eps_pinfeas * by_raw / nb:
            return _Verdict(Status.PRIMAL_INFEASIBLE, res, certificate=y / by_raw)
    cx_raw = float(c @ x)
    if nc > 0 and cx_raw < 0:
        if _norm(A @ x) <= cfg.eps_dinfeas * (-cx_raw) / nc:
            return _Verdict(Status.DUAL_INFEASIBLE, res, certificate=-x / cx_raw)
    return _Verdict(None, res)


def solve(
    lp: StandardLp,
    cfg: SolverConfig | None = None,
    scaling: ScalingRecord | None = None,
    embedding: HsdEmbedding | None = None,
    on_step=None,
) -> SolveReport:
    """Solve ``lp`` (already scaled if ``scaling`` is given).

    Returned solutions and certificates refer to ``scaling.original``.
    ``on_step`` receives every inner iterate, which is how the structural
    tests watch the complementarity invariant.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    if scaling is None:
        scaling = identity_scaling(lp)
    try:
        e = embedding if embedding is not None else build_embedding(lp, linsys=cfg.linsys)
    except np.linalg.LinAlgError as exc:
        return SolveReport(Status.NUMERICAL_FAILURE, wall_time=time.perf_counter() - t0, message=str(exc))

    at = scaling.original.A.T.tocsr()
    st = init_state(e, cfg)
    total = 0
    bb_updates = 0
    verdict = check_termination(st, lp, cfg, scaling, at)
    holder: dict = {}

    def probe(s_: IterateState) -> bool:
        v = check_termination(s_, lp, cfg, scaling, at)
        holder["v"] = v
        return v.status is not None

    def finish(status: Status, verdict: _Verdict, k: int, message: str = "") -> SolveReport:
        r = verdict.residuals
        return SolveReport(
            status=status,
            solution=verdict.solution if status is Status.OPTIMAL else None,
            certificate=verdict.certificate,
            residuals=(r.pres, r.dres, r.dgap),
            relative_residuals=(r.pres_rel, r.dres_rel, r.dgap_rel),
            outer_iters=k,
            total_admm_steps=total,
            bb_updates=bb_updates,
            wall_time=time.perf_counter() - t0,
            final_mu=st.mu,
            final_beta=st.beta,
            message=message,
        )

    k = 0
    while True:
        if verdict.status is not None:
            return finish(verdict.status, verdict, k)
        if cfg.bb_enabled and total + 2 <= cfg.max_admm_steps and not inner_converged(st, e):
            beta, st_new, used, changed = bb_select_beta(st, e, cfg)
            total += used
            if changed:
                bb_updates += 1
            st = st_new
            if not (np.all(np.isfinite(st.point.u)) and np.all(np.isfinite(st.point.v))):
                return finish(Status.NUMERICAL_FAILURE, verdict, k, "non-finite iterate during penalty selection")
        caps = InnerCaps(max_steps=max(cfg.max_admm_steps - total, 0), probe_every=cfg.probe_every)
        holder.clear()
        st, reason, steps = run_inner_loop(st, e, caps, probe=probe, on_step=on_step)
        total += steps
        if reason is InnerExit.NUMERICAL:
            return finish(Status.NUMERICAL_FAILURE, verdict, k, "non-finite iterate")
        verdict = holder["v"] if reason is InnerExit.PROBE else check_termination(st, lp, cfg, scaling, at)
        if log.isEnabledFor(logging.INFO):
            r = verdict.residuals
            log.info(
                "k=%d mu=%.3e beta=%.3e inner=%d pres=%.2e dres=%.2e dgap=%.2e",
                k, st.mu, st.beta, steps, r.pres_rel, r.dres_rel, r.dgap_rel,
            )
        if verdict.status is not None:
            return finish(verdict.status, verdict, k + 1)
        if total >= cfg.max_admm_steps or reason is InnerExit.STEP_CAP:
            return finish(Status.UNFINISHED, verdict, k + 1, "ADMM step limit reached")
        k += 1
        if k >= cfg.max_outer:
            return finish(Status.UNFINISHED, verdict, k, "outer iteration limit reached")
        gamma = select_gamma(st, verdict.residuals, cfg)
        st = warm_restart(st, gamma)
