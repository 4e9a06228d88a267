import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condlab import conductivity_zoo as zoo
from condlab.errors import DimensionTooLow, NotPositiveDefinite
from condlab.geometry import curvature, euclidean, normal_chart, random_analytic_metric
from condlab.model_space import RadialProfile, space_form_warping
from condlab.tensor_core import box_samples, checked_eigenvalues

from conftest import identity_field


# ---------------------------------------------------------------------------
# W_(lambda, alpha)
# ---------------------------------------------------------------------------


def test_w_lambda_alpha_values():
    W = zoo.w_lambda_alpha(3.0, 0.0).field
    assert np.allclose(W(np.array([0.3, -1.0])), [[4.0, 2.0], [2.0, 4.0]])
    W = zoo.w_lambda_alpha(1.0, 0.5).field
    assert np.allclose(W(np.array([1.0, 1.0])), 2 * math.e * np.eye(2))


@pytest.mark.parametrize("lam,alpha", [(0.25, -1.0), (1.0, 0.0), (4.0, 1.0), (2.0, 0.5)])
def test_w_lambda_alpha_claims(lam, alpha):
    assert all(r.passed for r in zoo.w_lambda_alpha(lam, alpha).self_test(100))


def test_w_lambda_alpha_needs_positive_lambda():
    with pytest.raises(NotPositiveDefinite):
        zoo.w_lambda_alpha(0.0, 1.0)


# ---------------------------------------------------------------------------
# Schouten and Einstein tensors
# ---------------------------------------------------------------------------


def test_schouten_needs_dimension_three():
    with pytest.raises(DimensionTooLow):
        zoo.schouten(euclidean(2), np.array([[1.0, 0.0]]))


def test_schouten_of_round_three_sphere():
    m = normal_chart(3, space_form_warping(1.0))
    x = m.sample_shell(0.3, 1.2, 12)
    assert np.allclose(zoo.schouten(m, x), 0.5 * np.eye(3), atol=1e-5)


def test_flat_schouten_is_not_a_conductivity():
    x = box_samples(((-1, 1),) * 3, 8)
    S = zoo.schouten(euclidean(3), x)
    assert np.abs(S).max() < 1e-10
    with pytest.raises(NotPositiveDefinite):
        checked_eigenvalues(S, euclidean(3).g(x))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_schouten_trace_and_shift(seed):
    m = random_analytic_metric(3, seed)
    res = zoo.schouten_identities(m, np.random.default_rng(seed).uniform(-1, 1, (6, 3)))
    assert res["trace"].max() < 1e-10
    assert res["eigenvalue_shift"].max() < 1e-10


def test_einstein_of_hyperbolic_space():
    nc = zoo.einstein_on_space_form(3, -1.0)
    x = nc.samples(20)
    assert np.allclose(nc.field(x), np.eye(3), atol=1e-5)
    assert all(r.passed for r in nc.self_test(50))


def test_einstein_of_flat_space_vanishes():
    x = box_samples(((-1, 1),) * 3, 8)
    assert np.abs(zoo.einstein(euclidean(3), x)).max() < 1e-10


def test_einstein_positive_on_negatively_curved_model():
    # w = sinh t + t^3/10: radial curvature -w''/w < 0 and tangential curvature (1 - w'^2)/w^2 < 0
    w = RadialProfile(lambda t: np.sinh(t) + 0.1 * t**3, lambda t: np.cosh(t) + 0.3 * t * t,
                      lambda t: np.sinh(t) + 0.6 * t, name="sinh + t^3/10")
    m = normal_chart(3, w)
    x = m.sample_shell(0.4, 2.0, 24)
    E = zoo.einstein(m, x, 2e-3)
    ev = zoo.checked_eigen_any(E, m.g(x))
    assert ev.min() > 0
    # not isotropic: the curvature is not constant
    assert (ev[:, -1] - ev[:, 0]).max() > 1e-2


def test_einstein_trace_identity():
    m = random_analytic_metric(4, 3)
    x = np.random.default_rng(3).uniform(-1, 1, (5, 4))
    pack = curvature(m, x)
    assert np.allclose(np.trace(zoo.einstein(m, x), axis1=-2, axis2=-1), -(4 / 2 - 1) * pack.scalar, atol=1e-10)


# ---------------------------------------------------------------------------
# gas tensors
# ---------------------------------------------------------------------------


def test_gas_at_rest_is_pressure_times_identity():
    nc = zoo.gas_tensor(lambda x: np.ones(x.shape[:-1]), lambda x: np.zeros_like(x), lambda x: np.ones(x.shape[:-1]), 3)
    x = nc.samples(16)
    assert np.allclose(nc.field(x), np.eye(3))
    assert all(r.passed for r in nc.self_test(32))


def test_gas_with_negative_pressure_rejected():
    with pytest.raises(NotPositiveDefinite):
        zoo.gas_tensor(lambda x: np.ones(x.shape[:-1]), lambda x: np.zeros_like(x), lambda x: -np.ones(x.shape[:-1]), 2)


def test_rotating_and_source_gas_flow_angles():
    rot = zoo.rotating_gas(1.5)
    vel = lambda x: 1.5 * np.stack([-x[..., 1], x[..., 0], np.zeros_like(x[..., 0])], axis=-1)
    assert zoo.cos2_flow_angle(vel, rot.samples(64)).max() <= 1 / 3
    src = zoo.source_gas()
    assert np.allclose(zoo.cos2_flow_angle(lambda x: x / np.sum(x * x, -1, keepdims=True), src.samples(64)), 1.0)
    for nc in (rot, src):
        assert all(r.passed for r in nc.self_test(64))


# ---------------------------------------------------------------------------
# equivalent metrics
# ---------------------------------------------------------------------------


def test_equivalent_metric_of_identity_is_the_metric():
    m = random_analytic_metric(3, 2)
    x = np.random.default_rng(2).uniform(-1, 1, (6, 3))
    G = zoo.equivalent_metric(m, identity_field(3))
    # W = Id as a (1,1) tensor: G = (det Id)^(1) g Id^-1 = g
    assert np.allclose(G.g(x), m.g(x), atol=1e-12)


def test_equivalent_metric_in_dimension_two():
    m = euclidean(2)
    G = zoo.equivalent_metric(m, lambda x: 4.0 * identity_field(2)(x))
    assert np.allclose(G.g(np.array([[0.3, 0.1]])), 0.25 * np.eye(2))
    G = zoo.equivalent_metric(m, identity_field(2), h=lambda x: np.sum(x * x, -1))
    assert np.allclose(G.g(np.array([[1.0, 1.0]])), math.exp(2) * np.eye(2))
    with pytest.raises(DimensionTooLow):
        zoo.equivalent_metric(euclidean(1), identity_field(1))


def test_r6_equivalent_metric_closed_form():
    G = zoo.r6_equivalent_metric()
    x = box_samples(((-2, 2),) * 6, 32)
    got, want = G.g(x), zoo.r6_metric_closed_form(x)
    assert (np.abs(got - want) / np.maximum(1.0, np.abs(want))).max() < 1e-12


@settings(max_examples=15)
@given(st.integers(0, 1000))
def test_energy_density_identity(seed):
    rng = np.random.default_rng(seed)
    n = 3
    m = random_analytic_metric(n, seed % 7)
    B = rng.normal(size=(n, n))
    S = B @ B.T + n * np.eye(n)
    W = lambda x: np.linalg.inv(m.g(x)) @ S  # self-adjoint for g
    F = lambda x: np.exp(0.3 * x[..., 0])
    G = zoo.equivalent_metric(m, W, f=F)
    x = rng.uniform(-1, 1, (4, n))
    dphi = rng.normal(size=(4, n))
    full_F = lambda y: F(y) * np.linalg.det(W(y)) ** (1 / (n - 2))
    lhs, rhs = zoo.energy_density_pair(m, W, G, full_F, x, dphi)
    assert np.allclose(lhs, rhs, rtol=1e-8)


# ---------------------------------------------------------------------------
# divergence-free diagonal families
# ---------------------------------------------------------------------------


def test_rn_divfree_examples():
    nc = zoo.rn_divfree([lambda t: 2 + np.sin(t), lambda t: np.exp(t)], c=3.0)
    x = nc.samples(16)
    W = nc.field(x)
    assert np.allclose(np.diagonal(W, axis1=-2, axis2=-1)[:, 0], 2 + np.sin(x[:, 2]))
    assert np.allclose(W[:, 2, 2], 3.0)
    assert all(r.passed for r in nc.self_test(64))
    with pytest.raises(NotPositiveDefinite):
        zoo.rn_divfree([np.exp], c=0.0)


def test_r6_cv_closed_form():
    assert zoo.r6_cv_closed_form(0.0) == 0.0
    t = np.array([1.0, 2.0, 5.0])
    assert np.all(zoo.r6_cv_closed_form(t) < zoo.R6_CV_BOUND)
    assert zoo.r6_cv_closed_form(5.0) == pytest.approx(zoo.R6_CV_BOUND, abs=1e-9)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

REGISTRY_PARAMS = {"w_lambda_alpha": {"lam": 2.0, "alpha": 0.3}}


@pytest.mark.parametrize("name", sorted(zoo.REGISTRY))
def test_registry_self_tests_pass(name):
    nc = zoo.build(name, **REGISTRY_PARAMS.get(name, {}))
    results = nc.self_test(64)
    assert all(r.passed for r in results), [(r.name, r.worst, r.tol) for r in results if not r.passed]


def test_registry_rejects_unknown_name():
    with pytest.raises(KeyError):
        zoo.build("no_such_field")


def test_frame_conductivity_spectrum():
    W = zoo.paraboloid_conductivity()
    x = np.array([[1.0, 2.0, 0.5], [3.0, -1.0, 2.0]])
    ev = np.sort(np.linalg.eigvalsh(W(x)), axis=-1)
    assert np.allclose(ev, np.sort(zoo.paraboloid_eigenvalues(x), axis=-1), rtol=1e-12)
    E = zoo.hyperbola_frame(x)
    assert np.allclose(E @ np.swapaxes(E, -1, -2), np.eye(3), atol=1e-12)
