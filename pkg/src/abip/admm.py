"""Inner ADMM iteration on the log-barrier subproblem of the embedding.

The dual multipliers of the splitting coincide with the iterates themselves
(``p = v`` and ``q = u`` along the whole run), so only ``(u, v)`` is stored.
One step is a projection onto ``{Qu = v}`` followed by closed-form barrier
proximal updates of the coordinates that live in the cone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import kernels
from .hsd import HsdEmbedding, HsdPoint

__all__ = [
    "IterateState",
    "InnerCaps",
    "InnerExit",
    "barrier_prox",
    "barrier_pair",
    "inner_step",
    "inner_converged",
    "subspace_residual_sq",
    "run_inner_loop",
]


@dataclass
class IterateState:
    point: HsdPoint
    mu: float
    beta: float
    inner_count: int = 0
    relax_alpha: float = 1.8

    def __post_init__(self):
        if not 0.0 <= self.relax_alpha <= 2.0:
            raise ValueError(f"relaxation parameter {self.relax_alpha} is outside [0, 2]")
        if not (self.mu > 0 and self.beta > 0):
            raise ValueError("mu and beta must be positive")

    @property
    def target(self) -> float:
        """Complementarity level ``mu / beta`` every iterate sits on."""
        return self.mu / self.beta

    def copy(self) -> "IterateState":
        return replace(self, point=self.point.copy())


@dataclass(frozen=True)
class InnerCaps:
    max_steps: int
    probe_every: int = 50


class InnerExit(enum.Enum):
    CONVERGED = "converged"
    PROBE = "probe"
    STEP_CAP = "step_cap"
    NUMERICAL = "numerical"


def barrier_pair(a, t: float):
    """Return ``(w, t / w)`` with ``w = (a + sqrt(a^2 + 4t)) / 2``.

    The larger of the two factors is formed by addition and the smaller by
    division, so no cancellation occurs and ``w * (t / w)`` equals ``t`` to
    within a couple of ulps regardless of the sign or size of ``a``.
    """
    if not t > 0:
        raise ValueError("mu/beta must be positive")
    a = np.asarray(a, dtype=np.float64)
    root = np.sqrt(a * a + 4.0 * t)
    pos = a >= 0
    big_w = 0.5 * (a + root)
    big_s = 0.5 * (root - a)
    w = np.where(pos, big_w, t / np.where(pos, 1.0, big_s))
    s = np.where(pos, t / np.where(pos, big_w, 1.0), big_s)
    if w.ndim == 0:
        return float(w), float(s)
    return w, s


def barrier_prox(a, mu_over_beta: float):
    """Minimizer of ``-t log(w) + 0.5 ||w - a||^2`` with ``t = mu_over_beta``."""
    return barrier_pair(a, mu_over_beta)[0]


def subspace_residual_sq(st: IterateState, e: HsdEmbedding) -> float:
    r = e.apply_q(st.point.u) - st.point.v
    return float(r @ r)


def inner_converged(st: IterateState, e: HsdEmbedding) -> bool:
    return subspace_residual_sq(st, e) <= st.mu**3


def inner_step(st: IterateState, e: HsdEmbedding) -> IterateState:
    """One relaxed ADMM step.

    With ``a = alpha * u_tilde + (1 - alpha) * u`` the update is
    ``y, theta <- a``; ``x <- prox(a_x - s)``, ``tau <- prox(a_tau - kappa)``
    and ``v <- v - a + u_new``.  The last one is written in its closed form:
    ``r`` and ``xi`` do not move, and ``s = (mu/beta) / x``, ``kappa = (mu/beta) / tau``.
    """
    if e.kernel_data is not None:
        u = st.point.u.copy()
        v = st.point.v.copy()
        ut = np.empty(e.dim)
        kernels.run_steps(e.kernel_data, u, v, ut, st.target, float(st.relax_alpha),
                          -1.0, 1, e.refine, e.workspace())
        return _advanced(st, u, v, 1)
    return _inner_step_numpy(st, e)


def _advanced(st: IterateState, u: np.ndarray, v: np.ndarray, steps: int) -> IterateState:
    return IterateState(
        point=HsdPoint(u, v, st.point.m, st.point.n),
        mu=st.mu,
        beta=st.beta,
        inner_count=st.inner_count + steps,
        relax_alpha=st.relax_alpha,
    )


def _inner_step_numpy(st: IterateState, e: HsdEmbedding) -> IterateState:
    m, n = e.m, e.n
    u, v = st.point.u, st.point.v
    alpha = st.relax_alpha
    ut = e.solve_i_plus_q(u + v)
    if alpha == 1.0:
        ah = ut
    else:
        ah = alpha * ut + (1.0 - alpha) * u
    t = st.target
    nu = ah.copy()
    nv = np.empty_like(v)
    x, s = barrier_pair(ah[m : m + n] - v[m : m + n], t)
    tau, kappa = barrier_pair(ah[m + n] - v[m + n], t)
    nu[m : m + n] = x
    nu[m + n] = tau
    nv[:m] = 0.0
    nv[m : m + n] = s
    nv[m + n] = kappa
    nv[m + n + 1] = -(n + 1.0)
    return _advanced(st, nu, nv, 1)


def run_inner_loop(
    st: IterateState,
    e: HsdEmbedding,
    caps: InnerCaps,
    probe: Callable[[IterateState], bool] | None = None,
    on_step: Callable[[IterateState], None] | None = None,
) -> tuple[IterateState, InnerExit, int]:
    """Iterate until the subspace residual satisfies ``||Qu - v||^2 <= mu^3``.

    ``probe`` is called every ``caps.probe_every`` steps and should return
    True when the outer problem is solved; ``on_step`` sees every iterate.
    Returns ``(state, reason, steps)``.
    """
    if inner_converged(st, e):
        return st, InnerExit.CONVERGED, 0
    if e.kernel_data is None:
        return _run_inner_numpy(st, e, caps, probe, on_step)
    every = caps.probe_every if (probe is not None and caps.probe_every > 0) else 0
    kd = e.kernel_data
    ws = e.workspace()
    u = st.point.u.copy()
    v = st.point.v.copy()
    ut = np.empty(e.dim)
    t = st.target
    alpha = float(st.relax_alpha)
    mu3 = st.mu**3
    steps = 0
    while steps < caps.max_steps:
        chunk = caps.max_steps - steps
        if every:
            chunk = min(chunk, every - steps % every)
        if on_step is not None:
            chunk = 1
        taken, _, flag = kernels.run_steps(kd, u, v, ut, t, alpha, mu3, chunk, e.refine, ws)
        steps += taken
        cur = _advanced(st, u.copy(), v.copy(), steps)
        if flag == 2:
            return cur, InnerExit.NUMERICAL, steps
        if on_step is not None:
            on_step(cur)
        if flag == 1:
            return cur, InnerExit.CONVERGED, steps
        if every and steps % every == 0 and probe(cur):
            return cur, InnerExit.PROBE, steps
    return _advanced(st, u, v, steps), InnerExit.STEP_CAP, steps


def _run_inner_numpy(st, e, caps, probe, on_step):
    steps = 0
    while steps < caps.max_steps:
        st = _inner_step_numpy(st, e)
        steps += 1
        if not (np.all(np.isfinite(st.point.u)) and np.all(np.isfinite(st.point.v))):
            return st, InnerExit.NUMERICAL, steps
        if on_step is not None:
            on_step(st)
        if inner_converged(st, e):
            return st, InnerExit.CONVERGED, steps
        if probe is not None and caps.probe_every > 0 and steps % caps.probe_every == 0:
            if probe(st):
                return st, InnerExit.PROBE, steps
    return st, InnerExit.STEP_CAP, steps
