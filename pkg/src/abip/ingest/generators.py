"""Synthetic instance generators.

``generate_random_lp`` plants a strictly complementary primal-dual optimum.
``build_sice_lp`` turns one column of sparse inverse covariance estimation
into an LP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..lp_model import StandardLp

__all__ = ["PlantedLp", "generate_random_lp", "SiceSpec", "build_sice_lp", "sice_solution"]


@dataclass(frozen=True, eq=False)
class PlantedLp:
    lp: StandardLp
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    seed: int

    @property
    def objective(self) -> float:
        return float(self.lp.c @ self.x)

    def __iter__(self):
        # unpacks as (lp, x, y, s, objective)
        return iter((self.lp, self.x, self.y, self.s, self.objective))


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def generate_random_lp(m: int, n: int, seed: int) -> PlantedLp:
    """Random dense LP with a known optimal primal-dual pair.

    A Gaussian ``x`` is permuted; 60% of its entries are zeroed, 10% are
    multiplied by 10 and the rest divided by 10, then absolute values are
    taken.  ``s`` is half-normal on the zero set of ``x`` and zero elsewhere.
    With Gaussian ``A`` and ``y``, ``b = Ax`` and ``c = A'y + s``.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    if m >= n:
        raise ValueError(f"need m < n, got m={m}, n={n}")
    rng = _rng(seed)
    x = rng.standard_normal(n)
    perm = rng.permutation(n)
    n_zero = int(round(0.6 * n))
    n_big = int(round(0.1 * n))
    zero = perm[:n_zero]
    big = perm[n_zero : n_zero + n_big]
    small = perm[n_zero + n_big :]
    x[zero] = 0.0
    x[big] *= 10.0
    x[small] /= 10.0
    x = np.abs(x)
    s = np.zeros(n)
    s[zero] = np.abs(rng.standard_normal(n_zero))
    A = rng.standard_normal((m, n))
    y = rng.standard_normal(m)
    b = A @ x
    c = A.T @ y + s
    lp = StandardLp(A=sp.csc_matrix(A), b=b, c=c, name=f"random_m{m}_n{n}_s{seed}")
    return PlantedLp(lp=lp, x=x, y=y, s=s, seed=seed)


@dataclass(frozen=True, eq=False)
class SiceSpec:
    """One column subproblem of sparse inverse covariance estimation.

    ``column`` is 1-based.  ``lam = 1.5 * sqrt(log(d) / N)``, which is zero
    for ``d = 1``.
    """

    sigma: np.ndarray
    samples: int
    column: int
    lam: float = field(init=False)

    def __post_init__(self):
        S = np.asarray(self.sigma, dtype=np.float64)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError("covariance must be a square matrix")
        if not np.allclose(S, S.T, rtol=0.0, atol=1e-10):
            raise ValueError("covariance is not symmetric within 1e-10")
        d = S.shape[0]
        if not self.samples >= 2:
            raise ValueError("need at least two samples")
        if not 1 <= self.column <= d:
            raise ValueError(f"column index {self.column} outside [1, {d}]")
        object.__setattr__(self, "sigma", S)
        object.__setattr__(self, "lam", 1.5 * math.sqrt(math.log(d) / self.samples))

    @property
    def d(self) -> int:
        return self.sigma.shape[0]


def build_sice_lp(spec: SiceSpec) -> StandardLp:
    """LP ``min ||beta||_1  s.t.  ||Sigma beta - e_j||_inf <= lam``.

    With ``beta = bp - bm`` and slacks ``wp, wm`` the constraints become
    ``Sigma bp - Sigma bm + wp = lam e + e_j`` and ``wp + wm = 2 lam e``,
    all variables nonnegative.
    """
    d = spec.d
    S = sp.csc_matrix(spec.sigma)
    I = sp.identity(d, format="csc")
    Z = sp.csc_matrix((d, d))
    A = sp.bmat([[S, -S, I, Z], [Z, Z, I, I]], format="csc")
    ej = np.zeros(d)
    ej[spec.column - 1] = 1.0
    b = np.concatenate([spec.lam + ej, np.full(d, 2.0 * spec.lam)])
    c = np.concatenate([np.ones(2 * d), np.zeros(2 * d)])
    return StandardLp(A=A, b=b, c=c, name=f"sice_col{spec.column}")


def sice_solution(spec: SiceSpec, x: np.ndarray) -> np.ndarray:
    """Recover ``beta = bp - bm`` from a solution of :func:`build_sice_lp`."""
    d = spec.d
    return x[:d] - x[d : 2 * d]
