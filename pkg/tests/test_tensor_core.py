import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from condlab import conductivity_zoo as zoo
from condlab.errors import EmptySampleSet, NotPositiveDefinite, NotSelfAdjoint
from condlab.tensor_core import (
    box_samples,
    cv_supremum,
    cv_values,
    eigen_stats,
    generalized_eigenvalues,
    low_discrepancy,
    validate_conductivity,
)

from conftest import identity_field


def spd(n, seed):
    A = np.random.default_rng(seed).normal(size=(n, n))
    return A @ A.T + n * np.eye(n)


def conductivity_for(g, eigenvalues, seed):
    """Mixed tensor ``g^-1 S`` with ``S`` symmetric and the given generalized spectrum."""
    n = len(eigenvalues)
    L = np.linalg.cholesky(g)
    Q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(n, n)))
    M = Q @ np.diag(eigenvalues) @ Q.T  # spectrum of L^-1 S L^-T
    S = L @ M @ L.T
    return np.linalg.solve(g, S)


# ---------------------------------------------------------------------------
# validate_conductivity
# ---------------------------------------------------------------------------


def test_identity_spectrum():
    sp = validate_conductivity(np.eye(3), np.eye(3))
    assert np.allclose(sp.eigenvalues, 1.0)
    assert sp.cv == 0.0
    assert sp.mu == sp.kappa == 1.0


def test_w_lambda_alpha_spectrum_alpha_zero():
    W = zoo.w_lambda_alpha(3.0, 0.0).field(np.array([0.4, -1.3]))
    sp = validate_conductivity(W, np.eye(2))
    assert np.allclose(sp.eigenvalues, [2.0, 6.0], atol=1e-12)


def test_r6_spectrum_at_unit_height():
    nc = zoo.r6_example()
    x = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 1.0])
    sp = validate_conductivity(nc.field(x), np.eye(6))
    e = math.e
    assert np.allclose(sp.eigenvalues, [1 / e, 1, e, e, e, e], rtol=1e-12)


def test_not_self_adjoint():
    W = np.array([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(NotSelfAdjoint):
        validate_conductivity(W, np.eye(2))


def test_not_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        validate_conductivity(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(NotPositiveDefinite):
        validate_conductivity(np.diag([1.0, 1e-13]), np.eye(2))


def test_self_adjoint_with_respect_to_nontrivial_metric():
    g = spd(3, 1)
    W = conductivity_for(g, [0.5, 2.0, 7.0], 2)
    sp = validate_conductivity(W, g)
    assert np.allclose(sp.eigenvalues, [0.5, 2.0, 7.0], rtol=1e-10)
    # the same tensor is not self-adjoint for the Euclidean metric
    with pytest.raises(NotSelfAdjoint):
        validate_conductivity(W, np.eye(3))


# ---------------------------------------------------------------------------
# eigen_stats and cv
# ---------------------------------------------------------------------------


def test_isotropic_has_zero_cv():
    for f in (-3.0, 0.0, 2.5):
        sp = eigen_stats(math.exp(f) * np.eye(4), np.eye(4))
        assert sp.sd == pytest.approx(0.0, abs=1e-12 * math.exp(f))
        assert sp.cv == pytest.approx(0.0, abs=1e-12)


def test_r6_cv_closed_form():
    nc = zoo.r6_example()
    t = np.linspace(-3, 3, 41)
    x = np.zeros((len(t), 6))
    x[:, 5] = t
    cv = cv_values(nc.field(x), np.broadcast_to(np.eye(6), (len(t), 6, 6)))
    assert np.allclose(cv, zoo.r6_cv_closed_form(t), atol=1e-13)


def test_stats_match_direct_sample_statistics():
    ev = np.array([1, 1, 1, 1, 1, 3.0])
    sp = eigen_stats(np.diag(ev), np.eye(6))
    assert sp.mean == pytest.approx(4 / 3)
    assert sp.sd == pytest.approx(np.std(ev), rel=1e-12)
    assert sp.cv == pytest.approx(np.std(ev) / np.mean(ev), rel=1e-12)


@given(arrays(np.float64, 5, elements=st.floats(0.01, 100.0)), st.floats(0.01, 100.0))
def test_cv_is_scale_invariant(diag, c):
    W = np.diag(diag)
    assert eigen_stats(c * W, np.eye(5)).cv == pytest.approx(eigen_stats(W, np.eye(5)).cv, rel=1e-9, abs=1e-12)


@given(arrays(np.float64, 4, elements=st.floats(0.05, 20.0)), arrays(np.float64, 4, elements=st.floats(0.2, 5.0)))
def test_diagonal_stats_with_diagonal_metric(w_diag, g_diag):
    sp = eigen_stats(np.diag(w_diag), np.diag(g_diag))
    assert sp.mean == pytest.approx(np.mean(w_diag), rel=1e-12)
    assert sp.sd == pytest.approx(np.std(w_diag), rel=1e-9, abs=1e-12)


@given(st.integers(2, 5), st.integers(0, 10_000))
def test_rayleigh_quotient_sandwich(n, seed):
    rng = np.random.default_rng(seed)
    g = spd(n, seed)
    W = conductivity_for(g, np.sort(rng.uniform(0.1, 10.0, n)), seed + 1)
    sp = validate_conductivity(W, g)
    v = rng.normal(size=(1000, n))
    norms = np.einsum("ki,ij,kj->k", v, g, v)
    v /= np.sqrt(norms)[:, None]
    quad = np.einsum("ki,ij,jl,kl->k", v, g, W, v)
    assert np.all(quad >= sp.mu * (1 - 1e-10))
    assert np.all(quad <= sp.kappa * (1 + 1e-10))


def test_batched_eigenvalues_match_pointwise():
    g = np.stack([spd(3, s) for s in range(4)])
    W = np.stack([conductivity_for(g[s], [1.0, 2.0 + s, 5.0 + s], s) for s in range(4)])
    batch = generalized_eigenvalues(W, g)
    for s in range(4):
        assert np.allclose(batch[s], generalized_eigenvalues(W[s], g[s]))


# ---------------------------------------------------------------------------
# cv_supremum
# ---------------------------------------------------------------------------


def test_cv_supremum_constant_field_is_zero():
    pts = box_samples(((-2, 2),) * 3, 64)
    sup = cv_supremum(identity_field(3), identity_field(3), pts)
    assert sup.value == 0.0 and sup.sampled


def test_cv_supremum_r6_bounded_by_sqrt_half():
    nc = zoo.r6_example()
    pts = box_samples(((-1, 1),) * 5 + ((-10, 10),), 512)
    pts = np.concatenate([pts, np.array([[0, 0, 0, 0, 0, 10.0]])])
    sup = cv_supremum(nc.field, identity_field(6), pts, validate=False)
    assert sup.value <= math.sqrt(0.5) + 1e-12
    assert sup.value > math.sqrt(0.5) - 1e-9


def test_cv_supremum_refuses_uncertifiable_spectra():
    nc = zoo.r6_example()
    with pytest.raises(NotPositiveDefinite):
        cv_supremum(nc.field, identity_field(6), np.array([[0, 0, 0, 0, 0, 10.0]]))
    ok = cv_supremum(nc.field, identity_field(6), box_samples(((-1, 1),) * 5 + ((-3, 3),), 256))
    assert ok.value <= math.sqrt(0.5)


def test_cv_supremum_matches_dense_scan():
    def W(x):
        t = np.asarray(x)[..., 0]
        return np.stack([np.ones_like(t), t], axis=-1)[..., :, None] * np.eye(2)

    metric = identity_field(2)
    pts = np.column_stack([np.linspace(1, 2, 33), np.zeros(33)])
    dense = np.column_stack([np.linspace(1, 2, 100_000), np.zeros(100_000)])
    sup = cv_supremum(W, metric, pts)
    assert sup.witness[0] == pytest.approx(2.0)
    assert sup.value == pytest.approx(cv_values(W(dense), metric(dense)).max(), rel=1e-12)


def test_cv_supremum_empty():
    with pytest.raises(EmptySampleSet):
        cv_supremum(identity_field(2), identity_field(2), np.empty((0, 2)))


def test_low_discrepancy_is_deterministic():
    a = low_discrepancy(3, 64, seed=5)
    b = low_discrepancy(3, 64, seed=5)
    assert np.array_equal(a, b)
    assert np.all((a >= 0) & (a < 1))
