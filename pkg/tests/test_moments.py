import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quenched_portfolio.errors import SingularMatrixError
from quenched_portfolio.model import build_risk_matrix, risk_from_matrix
from quenched_portfolio.moments import FIELD_NAMES, MomentSet, batch_raw_moments, compute_moments

from conftest import random_instance


def explicit_inverse_moments(j, r):
    """Oracle: full inverse, then the six quadratic forms."""
    n = len(r)
    e = np.ones(n)
    inv = np.linalg.inv(j)
    inv2 = inv @ inv
    return np.array([e @ inv @ e, r @ inv @ e, r @ inv @ r, e @ inv2 @ e, r @ inv2 @ e, r @ inv2 @ r]) / n


def test_identity_instance(backend):
    m = compute_moments(risk_from_matrix(np.eye(3)), np.ones(3))
    assert m.raw() == pytest.approx([1, 1, 1, 1, 1, 1], abs=1e-15)
    assert (m.r1, m.v_big, m.v_f, m.eps0) == pytest.approx((1.0, 0.0, 0.0, 0.5), abs=1e-15)


def test_scaled_identity_instance(backend):
    m = compute_moments(risk_from_matrix(2.0 * np.eye(2)), np.array([1.0, 3.0]))
    assert m.raw() == pytest.approx([0.5, 1.0, 2.5, 0.25, 0.5, 1.25], rel=1e-15)
    assert m.r1 == pytest.approx(2.0) and m.v_big == pytest.approx(1.0)
    assert m.v_f == pytest.approx(1.0) and m.eps0 == pytest.approx(1.0)


@pytest.mark.parametrize("n,alpha,seed", [(20, 3.0, 0), (50, 1.5, 1), (100, 2.0, 2), (80, 4.0, 3)])
def test_solve_path_matches_explicit_inverse(n, alpha, seed, backend):
    params, risk = random_instance(n, alpha, seed)
    m = compute_moments(risk, params.means)
    oracle = explicit_inverse_moments(risk.j, params.means)
    assert np.allclose(m.raw(), oracle, rtol=1e-10, atol=0)


def test_batch_matches_single(backend):
    params, r1 = random_instance(25, 2.0, 4)
    _, r2 = random_instance(25, 2.0, 5)
    out = batch_raw_moments(np.stack([r1.j, r2.j]), params.means)
    for row, risk in zip(out, (r1, r2)):
        assert np.allclose(row, compute_moments(risk, params.means).raw(), rtol=1e-12)


def test_derived_fields_recompute():
    params, risk = random_instance(30, 2.0, 6)
    m = compute_moments(risk, params.means)
    assert m.r1 == pytest.approx(m.g1 / m.g0, rel=1e-14)
    assert m.eps0 == pytest.approx(1.0 / (2.0 * m.g0), rel=1e-14)
    assert abs(m.g1 - m.r1 * m.g0) < 1e-12 * abs(m.g1) + 1e-14
    assert m.g0 > 0 and m.f0 > 0 and m.v_big >= 0 and m.v_f >= 0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 40), c=st.floats(0.1, 10.0))
def test_scaling_invariance(seed, n, c):
    params, risk = random_instance(n, 2.5, seed)
    m1 = compute_moments(risk, params.means)
    m2 = compute_moments(risk_from_matrix(c * risk.j), params.means)
    assert np.allclose(m2.raw()[:3], m1.raw()[:3] / c, rtol=1e-10)
    assert np.allclose(m2.raw()[3:], m1.raw()[3:] / c**2, rtol=1e-10)
    for a, b in ((m1.r1, m2.r1), (m1.v_big, m2.v_big), (m1.v_f, m2.v_f)):
        assert b == pytest.approx(a, rel=1e-9, abs=1e-12)
    assert m2.eps0 == pytest.approx(c * m1.eps0, rel=1e-10)


def test_doubling_exact_invariance():
    params, risk = random_instance(30, 2.0, 9)
    m1 = compute_moments(risk, params.means)
    m2 = compute_moments(risk_from_matrix(2.0 * risk.j), params.means)
    for a, b in ((m1.r1, m2.r1), (m1.v_big, m2.v_big), (m1.v_f, m2.v_f)):
        assert b == pytest.approx(a, rel=1e-12)
    assert m2.eps0 == pytest.approx(2.0 * m1.eps0, rel=1e-12)


def test_singular_raises(backend):
    # p < N: rank-deficient J
    risk = build_risk_matrix(np.random.default_rng(0).standard_normal((5, 3)))
    with pytest.raises(SingularMatrixError):
        compute_moments(risk, np.ones(5))


def test_json_field_names_and_round_trip():
    params, risk = random_instance(10, 2.0, 1)
    m = compute_moments(risk, params.means)
    d = json.loads(json.dumps(m.to_dict()))
    assert tuple(d) == FIELD_NAMES
    assert MomentSet.from_dict(d) == m
