import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condlab import classifier as cl
from condlab import conductivity_zoo as zoo
from condlab.errors import ContradictoryVerdicts, UnboundedSpectrumDetected
from condlab.geometry import euclidean, normal_chart, polar_chart
from condlab.model_space import Theta, space_form_warping

from conftest import identity_field

S = cl.CriterionSpec
PLANE = euclidean(2)


def test_w_lambda_alpha_parabolic():
    W = zoo.w_lambda_alpha(3.0, -0.2).field
    rep = cl.classify(PLANE, W, S(cl.MAIN, q=4, theta=Theta(b=-0.4), side=cl.LOWER, horizon=8, budget=1024))
    assert rep.verdict == cl.PARABOLIC
    assert rep.tail_evidence["status"] == "Diverges"
    assert rep.capacity_bound["direction"] == "upper"


def test_w_lambda_alpha_hyperbolic():
    W = zoo.w_lambda_alpha(0.5, 1.0).field
    rep = cl.classify(PLANE, W, S(cl.MAIN, q=1, theta=Theta(b=2.0), side=cl.UPPER, horizon=8, budget=1024))
    assert rep.verdict == cl.HYPERBOLIC
    assert rep.capacity_bound["direction"] == "lower"
    assert rep.capacity_bound["value"] > 0


def test_euclidean_plane_is_parabolic_and_not_hyperbolic():
    assert cl.classify(PLANE, identity_field(2), S(cl.MAIN, q=2, side=cl.LOWER, horizon=8, budget=512)).verdict == cl.PARABOLIC
    rep = cl.classify(PLANE, identity_field(2), S(cl.MAIN, q=2, side=cl.UPPER, horizon=8, budget=512))
    assert rep.verdict == cl.UNDECIDED
    assert "tail" in rep.reason


def test_hyperbolic_plane_is_hyperbolic():
    H = normal_chart(2, space_form_warping(-1.0))
    rep = cl.classify(H, identity_field(2), S(cl.MAIN, w=space_form_warping(-1.0), q=2, side=cl.UPPER, horizon=4, budget=256))
    assert rep.verdict == cl.HYPERBOLIC


def test_divergence_free_r6():
    nc = zoo.r6_example()
    assert cl.classify(nc.manifold, nc.field, S(cl.DIVERGENCE_FREE, q=3, horizon=3, budget=256)).verdict == cl.HYPERBOLIC
    # q = 2 is not enough for the tail
    assert cl.classify(nc.manifold, nc.field, S(cl.DIVERGENCE_FREE, q=2, horizon=3, budget=256)).verdict == cl.UNDECIDED


def test_divergence_free_rejects_weight():
    with pytest.raises(ValueError):
        cl.classify(PLANE, identity_field(2), S(cl.DIVERGENCE_FREE, theta=Theta(a=1.0)))


def test_kappa_balance_identity_is_undecided():
    rep = cl.classify(PLANE, identity_field(2), S(cl.KAPPA_BALANCE, side=cl.LOWER, horizon=8, budget=256))
    assert rep.verdict == cl.UNDECIDED
    assert "balance" in rep.failing


def test_mu_balance_on_sphere_cap():
    w = space_form_warping(1.0)
    sphere = polar_chart(2, w)
    spec = S(cl.MU_BALANCE, w=w, theta=Theta(a=10.0), rho=1.7, side=cl.LOWER, horizon=2.8, budget=256)
    rep = cl.classify(sphere, identity_field(2), spec)
    assert rep.verdict == cl.PARABOLIC
    with pytest.raises(ValueError):
        cl.classify(sphere, identity_field(2), S(cl.MU_BALANCE, w=w, side=cl.UPPER, rho=1.7, horizon=2.8))


def test_cv_criterion_examples():
    nc = zoo.r6_example()
    assert cl.classify(nc.manifold, nc.field, S(cl.CV_CRITERION, horizon=3, budget=256)).verdict == cl.HYPERBOLIC
    assert cl.classify(euclidean(3), identity_field(3), S(cl.CV_CRITERION, horizon=8, budget=256)).verdict == cl.HYPERBOLIC
    assert cl.classify(PLANE, identity_field(2), S(cl.CV_CRITERION, horizon=8, budget=64)).verdict == cl.UNDECIDED


def test_cv_criterion_large_anisotropy_undecided():
    A = np.diag([1.0, 1.0, 100.0])
    W = lambda x: np.broadcast_to(A, np.asarray(x).shape[:-1] + (3, 3)).copy()
    rep = cl.classify(euclidean(3), W, S(cl.CV_CRITERION, horizon=8, budget=128))
    assert rep.verdict == cl.UNDECIDED
    assert rep.failing == ["cv_bound"]


def test_cv_criterion_positive_curvature_undecided():
    sphere = normal_chart(3, space_form_warping(1.0))
    rep = cl.classify(sphere, identity_field(3), S(cl.CV_CRITERION, rho=0.5, horizon=1.5, budget=64))
    assert "nonpositive_curvature" in rep.failing


def test_bounded_eigen_transfers_verdicts():
    W = zoo.w_lambda_alpha(2.0, 0.0).field
    assert cl.classify(PLANE, W, S(cl.BOUNDED_EIGEN, horizon=8, budget=256), cl.PARABOLIC).verdict == cl.PARABOLIC
    H = normal_chart(2, space_form_warping(-1.0))
    W = lambda x: (2 + np.sin(x[..., 0]))[..., None, None] * np.eye(2)
    assert cl.classify(H, W, S(cl.BOUNDED_EIGEN, horizon=4, budget=256), cl.HYPERBOLIC).verdict == cl.HYPERBOLIC
    assert cl.classify(PLANE, identity_field(2), S(cl.BOUNDED_EIGEN, budget=16), cl.UNDECIDED).verdict == cl.UNDECIDED


def test_bounded_eigen_refuses_unbounded_spectrum():
    with pytest.raises(UnboundedSpectrumDetected):
        cl.classify(PLANE, zoo.w_lambda_alpha(2.0, 0.5).field, S(cl.BOUNDED_EIGEN, horizon=8, budget=256), cl.PARABOLIC)
    with pytest.raises(ValueError):
        cl.classify(PLANE, identity_field(2), S(cl.BOUNDED_EIGEN))


def test_spec_validation():
    with pytest.raises(ValueError):
        S("NoSuchTheorem")
    with pytest.raises(ValueError):
        S(cl.MAIN, side="sideways")
    with pytest.raises(ValueError):
        S(cl.MAIN, rho=1.0, horizon=0.5)
    with pytest.raises(ValueError):
        S(cl.MAIN, budget=0)
    with pytest.raises(ValueError):
        S(cl.MAIN, q=-1)


def test_report_is_json_serialisable():
    rep = cl.classify(PLANE, zoo.w_lambda_alpha(3.0, -0.2).field,
                      S(cl.MAIN, q=4, theta=Theta(b=-0.4), side=cl.LOWER, horizon=8, budget=128))
    d = json.loads(json.dumps(rep.as_dict(), allow_nan=False))
    assert d["certificate"]["weight"] == "h(t) = -0.2*(t^2-1)"
    assert {mg["condition"] for mg in d["margins"]} == {"curvature", "trace", "divergence"}


@pytest.mark.parametrize(
    "W,spec,ref",
    [
        (zoo.w_lambda_alpha(3.0, -0.2).field, S(cl.MAIN, q=4, theta=Theta(b=-0.4), side=cl.LOWER, horizon=8, budget=256), None),
        (zoo.w_lambda_alpha(0.5, 1.0).field, S(cl.MAIN, q=1, theta=Theta(b=2), side=cl.UPPER, horizon=8, budget=256), None),
        (identity_field(2), S(cl.KAPPA_BALANCE, side=cl.LOWER, horizon=8, budget=128), None),
        (zoo.w_lambda_alpha(2.0, 0.0).field, S(cl.BOUNDED_EIGEN, horizon=8, budget=128), cl.PARABOLIC),
    ],
)
def test_replay_reproduces_margins_exactly(W, spec, ref):
    rep = cl.classify(PLANE, W, spec, ref)
    assert cl.replay(rep, PLANE, W, spec)


def test_replay_detects_tampering():
    W = zoo.w_lambda_alpha(3.0, -0.2).field
    spec = S(cl.MAIN, q=4, theta=Theta(b=-0.4), side=cl.LOWER, horizon=8, budget=128)
    rep = cl.classify(PLANE, W, spec)
    mg = rep.margins[0]
    rep.margins[0] = cl.Margin(mg.condition, mg.worst + 1e-15 * max(1, abs(mg.worst)) + 1e-300, mg.slack, mg.witness,
                               mg.n_samples)
    assert not cl.replay(rep, PLANE, W, spec)


def test_classification_is_deterministic():
    W = zoo.w_lambda_alpha(0.5, 1.0).field
    spec = S(cl.MAIN, q=1, theta=Theta(b=2), side=cl.UPPER, horizon=8, budget=256, seed=5)
    assert cl.classify(PLANE, W, spec).as_dict() == cl.classify(PLANE, W, spec).as_dict()


def test_combine():
    p = cl.classify(PLANE, identity_field(2), S(cl.MAIN, q=2, side=cl.LOWER, horizon=8, budget=64))
    u = cl.classify(PLANE, identity_field(2), S(cl.MAIN, q=2, side=cl.UPPER, horizon=8, budget=64))
    assert cl.combine([p, u]) == cl.PARABOLIC
    assert cl.combine([u]) == cl.UNDECIDED
    h = cl.ClassificationReport(cl.HYPERBOLIC, cl.MAIN, {}, "", [], None, None, "")
    with pytest.raises(ContradictoryVerdicts):
        cl.combine([p, h])


@settings(max_examples=12)
@given(st.sampled_from([0.25, 0.5, 1.0, 2.0, 4.0]), st.floats(-1.0, 1.0), st.sampled_from([1.0, 1.5, 2.0, 3.0, 5.0]))
def test_sides_never_contradict(lam, alpha, q):
    W = zoo.w_lambda_alpha(lam, alpha).field
    th = Theta(b=2 * alpha)
    reps = [cl.classify(PLANE, W, S(cl.MAIN, q=q, theta=th, side=side, horizon=6, budget=128))
            for side in (cl.UPPER, cl.LOWER)]
    cl.combine(reps)


def test_search_finds_a_decisive_criterion():
    W = zoo.w_lambda_alpha(0.5, 1.0).field
    rep = cl.search(PLANE, W, S(cl.MAIN, horizon=8, budget=128), thetas=(Theta(), Theta(b=2.0)))
    assert rep.verdict == cl.HYPERBOLIC
    assert rep.parameters["q"] == 1.0
