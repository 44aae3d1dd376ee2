"""ADMM-based interior point method for linear programming."""

from .lp_model import CandidateSolution, GeneralLp, StandardLp, kkt_residuals, to_standard_form
from .hsd import HsdEmbedding, HsdPoint, build_embedding
from .ipm import SolverConfig, SolveReport, Status, solve
from .presolve import PresolveStack, ProvenInfeasible, ProvenUnbounded, postsolve, prepare, presolve
from .pipeline import PipelineResult, SiceResult, solve_general, solve_sice
from .ingest.mps import MpsParseError, parse_mps, read_mps, write_mps
from .ingest.generators import SiceSpec, build_sice_lp, generate_random_lp
from .oracle import vertex_enum_oracle

__all__ = [
    "CandidateSolution",
    "GeneralLp",
    "StandardLp",
    "kkt_residuals",
    "to_standard_form",
    "HsdEmbedding",
    "HsdPoint",
    "build_embedding",
    "SolverConfig",
    "SolveReport",
    "Status",
    "solve",
    "PresolveStack",
    "ProvenInfeasible",
    "ProvenUnbounded",
    "postsolve",
    "prepare",
    "presolve",
    "PipelineResult",
    "SiceResult",
    "solve_general",
    "solve_sice",
    "MpsParseError",
    "parse_mps",
    "read_mps",
    "write_mps",
    "SiceSpec",
    "build_sice_lp",
    "generate_random_lp",
    "vertex_enum_oracle",
]
