"""Check tables for the named examples.

Each example runs its full list of claims and returns rows
``(claim, anchor, computed, expected, status)``.  ``anchor`` names the result
the claim reproduces in plain words.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import classifier as cl
from . import conductivity_zoo as zoo
from . import submanifold as sub
from .capacity_solver import capacity
from .errors import NotPositiveDefinite, UnknownExample
from .geometry import curvature, divergence_w, euclidean, gradient, polar_chart, random_analytic_metric
from .model_space import (
    CONVERGES,
    DIVERGES,
    Theta,
    WarpedModel,
    capacity_model,
    constant_profile,
    linear_warping,
    space_form_warping,
    tail_convergence,
)
from .tensor_core import box_samples, checked_eigenvalues, cv_values

PASS = "PASS"
FAIL = "FAIL"


@dataclass(frozen=True)
class Row:
    claim: str
    anchor: str
    computed: object
    expected: object
    status: str

    def as_dict(self) -> dict:
        return {"claim": self.claim, "anchor": self.anchor, "computed": _plain(self.computed),
                "expected": _plain(self.expected), "status": self.status}


def _plain(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _row(claim, anchor, computed, expected, ok) -> Row:
    return Row(claim, anchor, computed, expected, PASS if bool(ok) else FAIL)


def _close(claim, anchor, computed, expected, rtol=0.0, atol=0.0) -> Row:
    computed = float(computed)
    ok = abs(computed - expected) <= atol + rtol * abs(expected)
    return _row(claim, anchor, computed, float(expected), ok)


def _identity(n):
    eye = np.eye(n)
    return lambda x: np.broadcast_to(eye, np.asarray(x).shape[:-1] + (n, n)).copy()


# ---------------------------------------------------------------------------
# examples
# ---------------------------------------------------------------------------


def intro_cylinder(alpha: float = 1.0, c: float = 1.0, L: float = 10.0) -> list:
    """Flat cylinder of radius alpha and length L with constant conductivity c."""
    anchor = "capacity of a homogeneous flat cylinder, 2 pi alpha c / L"
    m = polar_chart(2, constant_profile(alpha), name="flat cylinder")
    W = lambda x: c * _identity(2)(x)
    exact = 2 * math.pi * alpha * c / L
    est = capacity(m, W, 1.0, 1.0 + L, ladder=((16, 16), (32, 32), (64, 64)))
    model = WarpedModel(2.0, constant_profile(alpha), V0=2 * math.pi)
    return [
        _close("grid capacity", anchor, est.richardson_extrapolate, exact, rtol=1e-6),
        _close("model capacity (c times 2 pi / integral of 1/w)", anchor,
               c * capacity_model(model, 1.0, 1.0 + L), exact, rtol=1e-10),
        _row("tail of 1/w diverges, so the infinite cylinder is parabolic", anchor,
             tail_convergence(model, 1.0).status, DIVERGES, tail_convergence(model, 1.0).status == DIVERGES),
    ]


def warped_cylinder() -> list:
    """``dr^2 + w(r)^2 dtheta^2`` with constant conductivity: Cap = 2 pi c / integral of 1/w."""
    anchor = "warped cylinder capacity 2 pi c / integral of 1/w, type decided by that integral"
    rows = []
    c = 1.5
    for label, w, R, tail_expected in (
        ("w = r", linear_warping(), 2.0, DIVERGES),
        ("w = sinh r", space_form_warping(-1.0), 2.0, CONVERGES),
    ):
        m = polar_chart(2, w, name=label)
        W = lambda x, c=c: c * _identity(2)(x)
        model = WarpedModel(2.0, w, V0=2 * math.pi)
        exact = c * capacity_model(model, 1.0, R)
        est = capacity(m, W, 1.0, R, ladder=((32, 32), (64, 64), (128, 128)))
        rows.append(_close(f"{label}: grid capacity vs closed form", anchor, est.richardson_extrapolate, exact, rtol=1e-4))
        status = tail_convergence(model, 1.0).status
        rows.append(_row(f"{label}: tail of 1/w", anchor, status, tail_expected, status == tail_expected))
    return rows


PHASE_LAMBDAS = (0.25, 1.0, 4.0)
PHASE_ALPHAS = (-1.0, -0.1, 0.0, 0.1, 1.0)


def wlambdaalpha_phase(horizon: float = 8.0, budget: int = 1024) -> dict:
    """Verdict for every ``(lambda, alpha)`` cell of the phase grid.

    Three criteria are tried per cell and combined (a disagreement raises):
    the hyperbolic side of the comparison criterion with ``q = 1`` and
    ``theta = 2 alpha r``; its parabolic side with ``q = 1 + max(lambda,
    1/lambda)``; and the bounded-eigenvalue transfer from the Euclidean plane,
    which only applies when the sampled spectrum stays bounded.
    """
    m = euclidean(2)
    plane = cl.check_main(m, _identity(2), cl.CriterionSpec(cl.MAIN, q=2, side=cl.LOWER, horizon=horizon, budget=budget))
    grid = {}
    for lam in PHASE_LAMBDAS:
        for al in PHASE_ALPHAS:
            W = zoo.w_lambda_alpha(lam, al).field
            th = Theta(b=2 * al)
            reps = [
                cl.check_main(m, W, cl.CriterionSpec(cl.MAIN, q=1, theta=th, side=cl.UPPER, horizon=horizon, budget=budget)),
                cl.check_main(m, W, cl.CriterionSpec(cl.MAIN, q=1 + max(lam, 1 / lam), theta=th, side=cl.LOWER,
                                                     horizon=horizon, budget=budget)),
            ]
            try:
                reps.append(cl.check_bounded_eigen(m, W, cl.CriterionSpec(cl.BOUNDED_EIGEN, budget=budget), plane.verdict))
            except Exception:  # noqa: BLE001 - an unbounded spectrum just means this criterion does not apply
                pass
            grid[(lam, al)] = (cl.combine(reps), reps)
    return grid


def wlambdaalpha_rows() -> list:
    anchor = "two-dimensional family W_(lambda, alpha): parabolic for alpha <= 0, hyperbolic for alpha > 0"
    rows = []
    for (lam, al), (verdict, _) in wlambdaalpha_phase().items():
        expected = cl.PARABOLIC if al <= 0 else cl.HYPERBOLIC
        rows.append(_row(f"lambda={lam:g}, alpha={al:g}", anchor, verdict, expected, verdict == expected))
    return rows


def r6_rows() -> list:
    anchor = "six-dimensional divergence-free diagonal example and its equivalent metric"
    nc = zoo.r6_example()
    rows = []
    pts = box_samples(((-3, 3),) * 5 + ((-4, 4),), 100, 11)
    div = np.linalg.norm(divergence_w(nc.manifold, nc.field, pts), axis=-1)
    rows.append(_row("max |div W| at 100 points", anchor, float(div.max()), "<= 1e-8", div.max() <= 1e-8))
    far = pts.copy()
    far[:, 5] = np.where(np.arange(len(pts)) % 2 == 0, 1.0, -1.0) * np.linspace(5.0, 12.0, len(pts))
    allpts = np.concatenate([pts, far])
    cv = cv_values(nc.field(allpts), nc.manifold.g(allpts), validate=False)
    rows.append(_row("sup cv <= sqrt(1/2) + 1e-9", anchor, float(cv.max()), zoo.R6_CV_BOUND,
                     cv.max() <= zoo.R6_CV_BOUND + 1e-9))
    rows.append(_close("cv at |x6| >= 5 approaches sqrt(1/2)", anchor, float(cv[len(pts):].min()), zoo.R6_CV_BOUND,
                       atol=1e-9))
    G = zoo.r6_equivalent_metric()
    x0 = np.array([[0.3, -0.7, 1.1, 0.2, -0.4, 0.0]])
    ric = np.diag(curvature(G, x0, 1e-2).ricci[0])
    err = float(np.abs(ric - zoo.R6_RICCI_AT_ORIGIN).max())
    rows.append(_row("Ricci of G at x6 = 0", anchor, ric, zoo.R6_RICCI_AT_ORIGIN, err <= 1e-4))
    exact = zoo.r6_metric_closed_form(pts)
    gerr = float((np.abs(G.g(pts) - exact) / np.maximum(1.0, np.abs(exact))).max())
    rows.append(_row("G = diag(e^(-s^2/4), e^(7s^2/4), e^(-s^2/4) x3, e^(3s^2/4)), relative", anchor, gerr,
                     "<= 1e-12", gerr <= 1e-12))
    rep = cl.check_cv(nc.manifold, nc.field, cl.CriterionSpec(cl.CV_CRITERION, horizon=3.0, budget=256))
    rows.append(_row("anisotropy criterion (sqrt(1/2) < 4/(2 sqrt 6))", anchor, rep.verdict, cl.HYPERBOLIC,
                     rep.verdict == cl.HYPERBOLIC))
    return rows


def schouten_rows() -> list:
    anchor = "Schouten tensor Ric - R/(2(n-1)) g"
    rows = []
    sphere3 = polar_chart(3, space_form_warping(1.0), r_max=math.pi)
    x = np.array([[1.0, 1.2, 0.5], [2.0, 0.9, 4.0]])
    S = zoo.schouten(sphere3, x, 2e-3)
    err = float(np.abs(S - 0.5 * np.eye(3)).max())
    rows.append(_row("round 3-sphere: S = g/2", anchor, err, "<= 1e-6", err <= 1e-6))
    worst_tr, worst_shift, worst_div = 0.0, 0.0, 0.0
    for n, seed in ((3, 0), (3, 1), (4, 2)):
        m = random_analytic_metric(n, seed)
        pts = np.random.default_rng(seed).uniform(-1, 1, (5, n))
        ids = zoo.schouten_identities(m, pts, 2e-3)
        worst_tr = max(worst_tr, float(ids["trace"].max()))
        worst_shift = max(worst_shift, float(ids["eigenvalue_shift"].max()))
        dS = divergence_w(m, zoo.schouten_field(m, 2e-3), pts, 2e-3)
        gR = gradient(m, lambda y: curvature(m, y, 2e-3).scalar, pts, 2e-3)
        worst_div = max(worst_div, float(np.abs(dS - (n - 2) / (2 * (n - 1)) * gR).max()))
    rows.append(_row("tr S = (n-2) R / (2(n-1)) on random metrics", anchor, worst_tr, "<= 1e-6", worst_tr <= 1e-6))
    rows.append(_row("eigenvalues of S = eigenvalues of Ric - R/(2(n-1))", anchor, worst_shift, "<= 1e-6",
                     worst_shift <= 1e-6))
    rows.append(_row("div S = (n-2)/(2(n-1)) grad R", anchor, worst_div, "<= 1e-5", worst_div <= 1e-5))
    flat = euclidean(3)
    try:
        checked_eigenvalues(zoo.schouten(flat, x), flat.g(x))
        flat_status = "accepted"
    except NotPositiveDefinite:
        flat_status = "rejected"
    rows.append(_row("flat chart: S = 0 fails validation", anchor, flat_status, "rejected", flat_status == "rejected"))
    return rows


def einstein_rows() -> list:
    anchor = "Einstein tensor Ric - (R/2) g as a conductivity"
    rows = []
    nc = zoo.einstein_on_space_form(3, -1.0)
    for res in nc.self_test(100):
        rows.append(_row(f"hyperbolic 3-space: {res.name}", anchor, res.worst, f"<= {res.tol:g}", res.passed))
    spec = cl.CriterionSpec(cl.DIVERGENCE_FREE, w=space_form_warping(-1.0), q=2, side=cl.UPPER, horizon=4.0,
                            budget=128, step=2e-3)
    rep = cl.classify(nc.manifold, nc.field, spec)
    rows.append(_row("divergence-free criterion, q = 2, w = sinh", anchor, rep.verdict, cl.HYPERBOLIC,
                     rep.verdict == cl.HYPERBOLIC))
    flat = euclidean(3)
    E0 = float(np.abs(zoo.einstein(flat, np.array([[0.3, 0.2, 0.1]]))).max())
    rows.append(_row("flat chart: E = 0", anchor, E0, "<= 1e-10", E0 <= 1e-10))
    worst = 0.0
    for n, seed in ((3, 3), (4, 4)):
        m = random_analytic_metric(n, seed)
        pts = np.random.default_rng(seed).uniform(-1, 1, (5, n))
        worst = max(worst, float(np.abs(divergence_w(m, zoo.einstein_field(m, 2e-3), pts, 2e-3)).max()))
    rows.append(_row("contracted Bianchi identity on random metrics", anchor, worst, "<= 1e-5", worst <= 1e-5))
    return rows


def newton_p1_rows() -> list:
    anchor = "first Newton transformation P_1 = m H I - A"
    rows = []
    u = np.array([[0.7, 0.4], [1.9, 2.5]])
    P = sub.newton_p1(sub.extrinsic_frame(sub.sphere(), u))
    err = float(np.abs(P - np.eye(2)).max())
    rows.append(_row("unit sphere, inner normal: P_1 = I", anchor, err, "<= 1e-8", err <= 1e-8))
    P0 = sub.newton_p1(sub.extrinsic_frame(sub.plane(), u))
    rows.append(_row("plane: P_1 = 0 (degenerate)", anchor, float(np.abs(P0).max()), "<= 1e-10",
                     np.abs(P0).max() <= 1e-10))
    el = sub.ellipsoid()
    pts = box_samples(el.sample_box, 64, 5)
    fr = sub.extrinsic_frame(el, pts)
    lam = np.linalg.eigvalsh(fr.shape_operator)
    direct = np.sort(lam.sum(axis=-1)[..., None] - lam, axis=-1)
    err = float(np.abs(np.linalg.eigvalsh(sub.newton_p1(fr)) - direct).max())
    rows.append(_row("ellipsoid: eigenvalues of P_1 = m H - lambda_i", anchor, err, "<= 1e-10", err <= 1e-10))
    d = float(sub.newton_p1_divergence(el, pts).max())
    rows.append(_row("ellipsoid: |div P_1| in Euclidean space", anchor, d, "<= 1e-5", d <= 1e-5))
    return rows


def gas_rows() -> list:
    anchor = "stress tensor rho u (x) u + p I of a steady compressible gas"
    rows = []
    for nc, n, q, side, expected, cos_claim in (
        (zoo.rotating_gas(1.0), 3, 3, cl.UPPER, cl.HYPERBOLIC, ("cos^2 <= 1/3", lambda c: c <= 1 / 3)),
        (zoo.source_gas(), 2, 2, cl.LOWER, cl.PARABOLIC, ("cos^2 >= 1/2", lambda c: c >= 0.5)),
    ):
        for res in nc.self_test(100):
            rows.append(_row(f"{nc.name}: {res.name}", anchor, res.worst, f"<= {res.tol:g}", res.passed))
        pts = nc.samples(100)
        vel = {3: lambda x: np.stack([-x[..., 1], x[..., 0], np.zeros_like(x[..., 0])], axis=-1),
               2: lambda x: x / np.sum(x * x, axis=-1, keepdims=True)}[n]
        c2 = zoo.cos2_flow_angle(vel, pts)
        label, test = cos_claim
        rows.append(_row(f"{nc.name}: {label}", anchor, float(c2.max() if n == 3 else c2.min()), label,
                         np.all(test(c2))))
        spec = cl.CriterionSpec(cl.DIVERGENCE_FREE, q=q, side=side, horizon=8.0, budget=256)
        rep = cl.classify(nc.manifold, nc.field, spec)
        rows.append(_row(f"{nc.name}: divergence-free criterion with q = {q}", anchor, rep.verdict, expected,
                         rep.verdict == expected))
    return rows


def sigma_rows(sigma: float = 1.0) -> list:
    anchor = "surfaces x^2 - y^2 = sigma with lambda_2 = e^(r/2), lambda_3 = e^r"
    rows = []
    s = sub.hyperbolic_cylinder(sigma)
    W = zoo.hyperbola_conductivity()
    pts = box_samples(s.sample_box, 200, 2)
    comp = sub.w_compatibility(s, W, pts)
    worst = float(max(comp["tangent_defect"].max(), comp["normal_defect"].max()))
    rows.append(_row("W-compatibility defects", anchor, worst, "<= 1e-10", worst <= 1e-10))
    hw = sub._w_mean_curvature_raw(s, W, pts, 1e-3)
    rows.append(_row("H_W formulas agree within 10x differencing error", anchor, bool(hw.agree.all()), True,
                     hw.agree.all()))
    spec = cl.CriterionSpec(cl.EXTRINSIC_MAIN, q=1, theta=Theta(a=0.5), rho=1.0, side=cl.UPPER, horizon=8.0, budget=256)
    rep = sub.classify_extrinsic(s, W, spec)
    rows.append(_row("extrinsic comparison with q = 1, theta = 1/2, h(t) = (t-1)/2", anchor, rep.verdict,
                     cl.HYPERBOLIC, rep.verdict == cl.HYPERBOLIC))
    tail = rep.tail_evidence["tail_estimate"] if rep.tail_evidence else float("nan")
    rows.append(_close("tail integral of e^((1-s)/2) from 1", anchor, tail, 2.0, rtol=1e-8))
    return rows


def paraboloid_rows() -> list:
    anchor = "paraboloid z = (x^2+y^2)/2 with lambda_2 = r^(16/9) e^(9r/8)"
    rows = []
    s = sub.paraboloid()
    W = zoo.paraboloid_conductivity()
    u = np.array([[1.5, 0.4], [3.0, 2.0]])
    fr = sub.extrinsic_frame(s, u)
    X = fr.point
    rho = np.hypot(X[:, 0], X[:, 1])
    N = np.stack([X[:, 0], X[:, 1], -np.ones_like(rho)], axis=-1) / np.sqrt(rho * rho + 1)[:, None]
    err = float(np.abs(fr.normal[:, 0, :] - N).max())
    rows.append(_row("unit normal (x, y, -1)/sqrt(rho^2 + 1)", anchor, err, "<= 1e-10", err <= 1e-10))
    pts = box_samples(((1.1, 6.0), (0.0, 2 * math.pi)), 1000, 4)
    comp = sub.w_compatibility(s, W, pts)
    worst = float(max(comp["tangent_defect"].max(), comp["normal_defect"].max()))
    rows.append(_row("W-compatibility defects", anchor, worst, "<= 1e-10", worst <= 1e-10))
    hw = sub._w_mean_curvature_raw(s, W, pts, 1e-3)
    rows.append(_row("H_W formulas agree within 10x differencing error", anchor, bool(hw.agree.all()), True,
                     hw.agree.all()))
    Xp = s(pts)
    r = np.linalg.norm(Xp, axis=-1)
    lhs = 2 * np.einsum("...i,...i->...", hw.vector, Xp / r[:, None])
    ratio = float((lhs / (r ** (16 / 9) * np.exp(9 * r / 8))).min())
    rows.append(_row("<2 H_W, grad r> / (r^(16/9) e^(9r/8)) at 1000 points", anchor, ratio, ">= 1", ratio >= 1.0))
    spec = cl.CriterionSpec(cl.EXTRINSIC_MAIN, q=1, theta=Theta(a=1.0), rho=1.0, side=cl.UPPER, horizon=12.0, budget=256)
    rep = sub.classify_extrinsic(s, W, spec)
    rows.append(_row("extrinsic comparison with q = 1, theta = 1", anchor, rep.verdict, cl.HYPERBOLIC,
                     rep.verdict == cl.HYPERBOLIC))
    rep_id = sub.classify_extrinsic(s, _identity(3), spec)
    rows.append(_row("identity conductivity is not certified hyperbolic", anchor, rep_id.verdict, cl.UNDECIDED,
                     rep_id.verdict == cl.UNDECIDED))
    return rows


EXAMPLES: dict = {
    "intro-cylinder": intro_cylinder,
    "warped-cylinder": warped_cylinder,
    "wlambdaalpha-phase": wlambdaalpha_rows,
    "r6": r6_rows,
    "schouten": schouten_rows,
    "einstein": einstein_rows,
    "newton-p1": newton_p1_rows,
    "gas": gas_rows,
    "sigma-family": sigma_rows,
    "paraboloid": paraboloid_rows,
}


def verify_example(name: str) -> list:
    if name not in EXAMPLES:
        raise UnknownExample(f"unknown example {name!r}; known: {', '.join(sorted(EXAMPLES))}")
    return EXAMPLES[name]()
