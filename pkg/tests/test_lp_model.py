import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from abip import CandidateSolution, GeneralLp, StandardLp, kkt_residuals, to_standard_form
from abip.lp_model import from_standard_form

from conftest import random_bounded_lp


def test_general_lp_validates_lengths():
    with pytest.raises(ValueError):
        GeneralLp(np.eye(2), [1.0], [1.0, 1.0], [0, 0], [1, 1])
    with pytest.raises(ValueError):
        GeneralLp(np.eye(2), [1, 1], [1, 1], [0, 0], [1, 1], objective_sense=2)
    with pytest.raises(ValueError):
        GeneralLp(np.eye(2), [1, 1], [1, 1], [0, 0], [1, 1], row_names=("a",))


def test_matrix_is_canonical_csc():
    A = sp.coo_matrix(([1.0, 2.0, 0.0], ([0, 0, 1], [1, 1, 0])), shape=(2, 2))
    lp = StandardLp(A, [1, 1], [0, 0])
    assert isinstance(lp.A, sp.csc_matrix)
    assert lp.nnz == 1
    assert lp.A[0, 1] == 3.0


def test_standard_form_of_box():
    # 1 <= x0 <= 3, x1 >= -2 free of upper bound
    p = GeneralLp(np.array([[1.0, 1.0]]), [4.0], [2.0, 1.0], [1.0, -2.0], [3.0, np.inf], objective_offset=0.5)
    std, shift = to_standard_form(p)
    assert std.shape == (2, 3)
    np.testing.assert_allclose(std.b, [5.0, 2.0])
    assert std.objective_offset == pytest.approx(0.5 + 2.0 - 2.0)
    x = np.array([2.0, 2.0])
    xs = np.array([1.0, 4.0, 1.0])
    np.testing.assert_allclose(std.A @ xs, std.b)
    assert std.objective(xs) == pytest.approx(p.objective(x))
    np.testing.assert_allclose(shift.recover_x(xs), x)


def test_standard_form_needs_finite_lower():
    p = GeneralLp(np.eye(1), [1.0], [1.0], [-np.inf], [np.inf])
    with pytest.raises(ValueError):
        to_standard_form(p)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 6), n=st.integers(1, 8))
def test_standard_form_equivalence(seed, m, n):
    rng = np.random.default_rng(seed)
    p, x = random_bounded_lp(rng, m, n)
    p = GeneralLp(p.A, p.b, p.c, np.where(np.isfinite(p.lower), p.lower, -3.0), p.upper, p.objective_offset)
    std, shift = to_standard_form(p)
    xb = x - p.lower
    slack = p.upper[shift.upper_cols] - x[shift.upper_cols]
    xs = np.concatenate([xb, slack])
    assert np.all(xs >= 0)
    np.testing.assert_allclose(std.A @ xs, std.b, atol=1e-10 * (1 + np.abs(std.b).max()))
    assert std.objective(xs) == pytest.approx(p.objective(x), rel=1e-12, abs=1e-12)


def test_from_standard_form_recovers_duals():
    p = GeneralLp(np.array([[1.0, 2.0]]), [2.0], [1.0, 1.0], [0.0, 0.0], [np.inf, 5.0])
    std, shift = to_standard_form(p)
    cand = CandidateSolution.for_lp(std, np.array([0.0, 1.0, 4.0]), np.array([0.5, 0.0]), np.zeros(3))
    out = from_standard_form(shift, p, cand)
    np.testing.assert_allclose(out.x, [0.0, 1.0])
    np.testing.assert_allclose(out.s, p.c - p.A.T @ out.y)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 6), n=st.integers(1, 8))
def test_kkt_residuals_permutation_invariant(seed, m, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    lp = StandardLp(A, rng.standard_normal(m), rng.standard_normal(n))
    cand = CandidateSolution(rng.standard_normal(n), rng.standard_normal(m), rng.standard_normal(n))
    pr, pc = rng.permutation(m), rng.permutation(n)
    lp2 = StandardLp(A[pr][:, pc], lp.b[pr], lp.c[pc])
    cand2 = CandidateSolution(cand.x[pc], cand.y[pr], cand.s[pc])
    r1, r2 = kkt_residuals(lp, cand), kkt_residuals(lp2, cand2)
    np.testing.assert_allclose(r1, r2, rtol=1e-12, atol=1e-12)


def test_kkt_residuals_zero_at_optimum():
    lp = StandardLp(np.array([[1.0, 1.0]]), [1.0], [1.0, 2.0])
    cand = CandidateSolution(np.array([1.0, 0.0]), np.array([1.0]), np.array([0.0, 1.0]))
    assert kkt_residuals(lp, cand) == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        kkt_residuals(lp, CandidateSolution(np.zeros(3), np.zeros(1), np.zeros(2)))


def test_candidate_objectives_include_offset():
    lp = StandardLp(np.array([[1.0]]), [2.0], [3.0], objective_offset=-1.0)
    cand = CandidateSolution.for_lp(lp, [2.0], [3.0], [0.0])
    assert cand.objective_primal == 5.0
    assert cand.objective_dual == 5.0
    assert not math.isnan(cand.objective_primal)
