import json
import pathlib

import numpy as np
import pytest
import scipy.sparse as sp

from abip import GeneralLp, StandardLp

DATA = pathlib.Path(__file__).parent / "data"
NETLIB = DATA / "netlib"


def netlib_path(name: str) -> pathlib.Path:
    return NETLIB / f"{name}.mps"


def reference_objectives() -> dict:
    with open(NETLIB / "reference_objectives.json") as fh:
        return json.load(fh)["objective"]


def random_bounded_lp(rng: np.random.Generator, m: int, n: int) -> tuple[GeneralLp, np.ndarray]:
    """Feasible bounded LP together with a point strictly inside its box."""
    A = rng.standard_normal((m, n))
    A[rng.random((m, n)) < 0.3] = 0.0
    # no structurally empty columns
    A[0, ~A.any(axis=0)] = 1.0
    lower = np.where(rng.random(n) < 0.2, -np.inf, rng.uniform(-2, 1, n))
    upper = np.where(rng.random(n) < 0.5, np.inf, rng.uniform(2, 4, n))
    x = np.where(np.isfinite(lower), lower, -1.0) + rng.uniform(0.1, 0.9, n)
    x = np.minimum(x, np.where(np.isfinite(upper), upper - 0.05, np.inf))
    b = A @ x
    c = rng.standard_normal(n)
    return GeneralLp(sp.csc_matrix(A), b, c, lower, upper, objective_offset=float(rng.normal())), x


def tiny_standard_lp(A, b, c, offset=0.0) -> StandardLp:
    return StandardLp(np.asarray(A, float), np.asarray(b, float), np.asarray(c, float), objective_offset=offset)


# ------------------------------------------------------------ acceptance summary

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k}: {msg}")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)
