"""End-to-end solve of a general LP: presolve, embed, solve, postsolve."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ingest.generators import SiceSpec, build_sice_lp, sice_solution
from .ipm import SolveReport, SolverConfig, Status, solve
from .lp_model import CandidateSolution, GeneralLp
from .presolve import PresolveStack, ProvenInfeasible, ProvenUnbounded, postsolve, prepare
from .scaling import equilibrate

__all__ = ["PipelineResult", "SiceResult", "solve_general", "solve_sice"]


@dataclass
class PipelineResult:
    status: Status
    solution: CandidateSolution | None
    report: SolveReport | None
    stack: PresolveStack | None
    wall_time: float
    message: str = ""

    @property
    def objective(self) -> float:
        """Objective in the sense of the source model (maximization restored)."""
        if self.solution is None:
            return float("nan")
        sense = self.stack.original.objective_sense if self.stack is not None else 1
        return sense * self.solution.objective_primal


def solve_general(
    p: GeneralLp,
    cfg: SolverConfig | None = None,
    use_presolve: bool = True,
    use_scaling: bool = True,
) -> PipelineResult:
    """Solve ``p``; timing covers presolve, factorization and postsolve."""
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    prep = prepare(p, use_presolve=use_presolve, use_scaling=use_scaling)
    if isinstance(prep, ProvenInfeasible):
        return PipelineResult(Status.PRIMAL_INFEASIBLE, None, None, None, time.perf_counter() - t0, prep.reason)
    if isinstance(prep, ProvenUnbounded):
        return PipelineResult(Status.DUAL_INFEASIBLE, None, None, None, time.perf_counter() - t0, prep.reason)
    report = solve(prep.lp, cfg, scaling=prep.scaling)
    sol = None
    if report.status is Status.OPTIMAL and report.solution is not None:
        sol = postsolve(prep.stack, report.solution)
    return PipelineResult(report.status, sol, report, prep.stack, time.perf_counter() - t0, report.message)


@dataclass
class SiceResult:
    omega: np.ndarray
    reports: list[SolveReport]
    lam: float
    wall_time: float

    @property
    def all_optimal(self) -> bool:
        return all(r.status is Status.OPTIMAL for r in self.reports)


def solve_sice(sigma, samples: int, cfg: SolverConfig | None = None, threads: int = 1) -> SiceResult:
    """Estimate the inverse covariance column by column.

    The ``d`` column LPs share ``sigma`` read-only and run as independent
    jobs; columns that do not reach Optimal are left as NaN in ``omega``.
    """
    t0 = time.perf_counter()
    specs = [SiceSpec(sigma, samples, j) for j in range(1, np.shape(sigma)[0] + 1)]

    def one(spec: SiceSpec) -> SolveReport:
        rec = equilibrate(build_sice_lp(spec))
        return solve(rec.scaled, cfg, scaling=rec)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            reports = list(pool.map(one, specs))
    else:
        reports = [one(spec) for spec in specs]
    d = len(specs)
    omega = np.full((d, d), np.nan)
    for spec, rep in zip(specs, reports):
        if rep.status is Status.OPTIMAL:
            omega[:, spec.column - 1] = sice_solution(spec, rep.solution.x)
    return SiceResult(omega, reports, specs[0].lam, time.perf_counter() - t0)
