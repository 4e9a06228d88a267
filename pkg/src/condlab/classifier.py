"""Parabolicity and hyperbolicity certificates for conductive manifolds.

Every criterion has the same shape: a list of pointwise hypotheses that must
hold outside a ball ``B_rho``, plus (usually) a one-dimensional tail integral
``integral_rho^inf w^(1-q) e^(-h)`` whose finiteness decides the type.

Hypotheses are checked on a low-discrepancy sample of the shell
``rho <= r <= horizon``.  Each hypothesis is turned into a dimensionless
margin that is nonnegative when the hypothesis holds.  Finite differences
make equality cases noisy, so each margin is evaluated at steps ``h`` and
``2h``; a point passes when its margin is at least ``-(ABS_SLACK + 2|m(h) -
m(2h)|)``.  The worst point becomes the witness, and its margin is
re-evaluated on its own so that a later replay reproduces the number
bit for bit.

A verdict other than ``Undecided`` is only issued when every margin passes
and the tail test is decisive in the direction the criterion needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContradictoryVerdicts, UnboundedSpectrumDetected
from .geometry import (
    DEFAULT_STEP,
    ChartManifold,
    coordinate_plane_sectionals,
    divergence_w,
    radial_sectional_range,
)
from .model_space import (
    CONVERGES,
    DIVERGES,
    RadialProfile,
    Theta,
    WarpedModel,
    linear_warping,
    radial_solution,
    tail_convergence,
)
from .tensor_core import checked_eigenvalues

Field = Callable[[np.ndarray], np.ndarray]

PARABOLIC = "WParabolic"
HYPERBOLIC = "WHyperbolic"
UNDECIDED = "Undecided"

UPPER = "UpperBound"
LOWER = "LowerBound"

MAIN = "MainComparison"
DIVERGENCE_FREE = "DivergenceFree"
KAPPA_BALANCE = "KappaBalance"
MU_BALANCE = "MuBalance"
CV_CRITERION = "CVCriterion"
BOUNDED_EIGEN = "BoundedEigen"
ISOTROPIC = "Isotropic"

EXTRINSIC_MAIN = "ExtrinsicComparison"
EXTRINSIC_BALANCE = "ExtrinsicBalance"
EXTRINSIC_CV = "ExtrinsicCV"
EXTRINSIC_THEOREMS = (EXTRINSIC_MAIN, EXTRINSIC_BALANCE, EXTRINSIC_CV)

THEOREMS = (MAIN, DIVERGENCE_FREE, KAPPA_BALANCE, MU_BALANCE, CV_CRITERION, BOUNDED_EIGEN, ISOTROPIC) + EXTRINSIC_THEOREMS

#: a margin this close to zero counts as satisfied even without FD noise
ABS_SLACK = 1e-9
#: a divergence-free field may show |div W| up to this fraction of |W|
DIV_FREE_TOL = 1e-8
#: sampled max kappa / min mu beyond this factor means the spectrum is unbounded
SPECTRUM_FACTOR = 1e3
#: a conductivity counts as isotropic when its sampled cv stays below this
ISOTROPY_TOL = 1e-9


@dataclass(frozen=True)
class CriterionSpec:
    """Which theorem to try and with which comparison data."""

    theorem: str
    w: RadialProfile = field(default_factory=linear_warping)
    q: float = 2.0
    theta: Theta = field(default_factory=Theta)
    rho: float = 1.0
    side: str = UPPER
    horizon: Optional[float] = None
    budget: int = 4096
    seed: int = 0
    step: float = DEFAULT_STEP

    def __post_init__(self):
        if self.theorem not in THEOREMS:
            raise ValueError(f"unknown theorem {self.theorem!r}; expected one of {THEOREMS}")
        if self.side not in (UPPER, LOWER):
            raise ValueError(f"side must be {UPPER} or {LOWER}")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.q > 0:
            raise ValueError("q must be positive")
        if self.horizon is not None and not self.horizon > self.rho:
            raise ValueError("horizon must exceed rho")
        if self.budget <= 0:
            raise ValueError("budget must be positive")

    @property
    def shell_top(self) -> float:
        return self.horizon if self.horizon is not None else 64.0 * self.rho

    def parameters(self) -> dict:
        return {
            "w": self.w.name,
            "q": self.q,
            "theta": self.theta.as_dict(),
            "rho": self.rho,
            "side": self.side,
            "horizon": self.shell_top,
            "budget": self.budget,
            "seed": self.seed,
            "step": self.step,
        }


@dataclass(frozen=True)
class Margin:
    """Worst sampled value of one hypothesis, normalized to be dimensionless."""

    condition: str
    worst: float
    slack: float
    witness: tuple
    n_samples: int

    @property
    def satisfied(self) -> bool:
        return bool(math.isfinite(self.worst) and self.worst >= -self.slack)

    def as_dict(self) -> dict:
        return {
            "condition": self.condition,
            "worst": _num(self.worst),
            "slack": _num(self.slack),
            "witness": [float(v) for v in self.witness],
            "n_samples": self.n_samples,
            "satisfied": self.satisfied,
        }


@dataclass
class ClassificationReport:
    verdict: str
    theorem: str
    parameters: dict
    weight: str
    margins: list
    tail_evidence: Optional[dict]
    capacity_bound: Optional[dict]
    reason: str
    sampled_up_to_horizon: bool = True

    @property
    def decisive(self) -> bool:
        return self.verdict != UNDECIDED

    @property
    def failing(self) -> list:
        return [mg.condition for mg in self.margins if not mg.satisfied]

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "theorem": self.theorem,
            "parameters": self.parameters,
            "certificate": {
                "theorem": self.theorem,
                "parameters": self.parameters,
                "weight": self.weight,
            },
            "margins": [mg.as_dict() for mg in self.margins],
            "tail_evidence": self.tail_evidence,
            "capacity_bound": self.capacity_bound,
            "reason": self.reason,
            "sampled_up_to_horizon": self.sampled_up_to_horizon,
        }


def _num(x: float):
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


# ---------------------------------------------------------------------------
# pointwise quantities
# ---------------------------------------------------------------------------


class _Quantities:
    """Lazily computed per-point quantities on a batch of chart points."""

    def __init__(self, m: ChartManifold, W: Field, x: np.ndarray, step: float):
        self.m, self.W, self.x, self.step = m, W, x, step
        m.check_radial(x, step)
        self.r = m.radius(x)
        self.g = m.g(x)
        self.N = m.radial_gradient(x)
        self.Wx = np.asarray(W(x), dtype=float)
        self._cache: dict = {}

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def wrr(self):
        return self._get("wrr", lambda: np.einsum("...ij,...j,...ik,...k->...", self.Wx, self.N, self.g, self.N))

    @property
    def trace(self):
        return np.trace(self.Wx, axis1=-2, axis2=-1)

    @property
    def div(self):
        return self._get("div", lambda: divergence_w(self.m, self.W, self.x, self.step))

    @property
    def div_r(self):
        return np.einsum("...i,...ij,...j->...", self.div, self.g, self.N)

    @property
    def div_norm(self):
        return np.sqrt(np.abs(np.einsum("...i,...ij,...j->...", self.div, self.g, self.div)))

    @property
    def w_scale(self):
        return np.maximum(1.0, np.abs(self.Wx).max(axis=(-2, -1)))

    @property
    def spectrum(self):
        return self._get("spec", lambda: checked_eigenvalues(self.Wx, self.g))

    @property
    def kappa(self):
        return self.spectrum[..., -1]

    @property
    def mu(self):
        return self.spectrum[..., 0]

    @property
    def cv(self):
        ev = self.spectrum
        mean = self.trace / self.m.dim
        sd = np.sqrt(np.mean((ev - ev.mean(axis=-1, keepdims=True)) ** 2, axis=-1))
        return sd / mean

    @property
    def radial_sec(self):
        return self._get("rsec", lambda: radial_sectional_range(self.m, self.x, self.step))

    @property
    def max_sec(self):
        """Largest sectional curvature over coordinate planes and radial planes."""

        def fn():
            coord = coordinate_plane_sectionals(self.m, self.x, self.step).max(axis=-1)
            return np.maximum(coord, self.radial_sec[1])

        return self._get("maxsec", fn)


def _curvature_margin(Q: _Quantities, w: RadialProfile, sec_upper: bool):
    r = Q.r
    bound = -w.d2(r) / w(r)
    lo, hi = Q.radial_sec
    if sec_upper:
        return (bound - hi) / (1.0 + np.abs(bound))
    return (lo - bound) / (1.0 + np.abs(bound))


def _trace_margin(w, trace, wrr, q, r, sign):
    wp = w.d1(r)
    return sign * wp * (trace - q * wrr) / (np.abs(trace) * np.maximum(1.0, np.abs(wp)))


MarginFn = Callable[[np.ndarray, float], dict]


def _margin_function(m: ChartManifold, W: Field, spec: CriterionSpec) -> MarginFn:
    """Batched ``points, step -> {condition: margins}`` for the requested theorem."""
    th = spec.theorem
    upper = spec.side == UPPER
    sign = 1.0 if upper else -1.0
    n = m.dim
    w, q, theta = spec.w, spec.q, spec.theta

    def fn(x, step):
        Q = _Quantities(m, W, x, step)
        r = Q.r
        out = {}
        if th in (MAIN, DIVERGENCE_FREE):
            out["curvature"] = _curvature_margin(Q, w, sec_upper=upper)
            out["trace"] = _trace_margin(w, Q.trace, Q.wrr, q, r, sign)
            if th == MAIN:
                out["divergence"] = sign * (Q.div_r - theta(r) * Q.wrr) / Q.wrr
            else:
                out["divergence_free"] = (DIV_FREE_TOL * Q.w_scale - Q.div_norm) / Q.w_scale
        elif th in (KAPPA_BALANCE, MU_BALANCE, ISOTROPIC):
            # parabolic direction: sec >= bound, div/kappa <= theta, theta + n w'/w <= 0, w' >= 0
            parabolic = not upper
            out["curvature"] = _curvature_margin(Q, w, sec_upper=not parabolic)
            t = theta(r)
            s = 1.0 if parabolic else -1.0
            scale = Q.mu if th == MU_BALANCE else Q.kappa
            out["divergence_ratio"] = s * (t - Q.div_r / scale) / (1.0 + np.abs(t))
            eta = w.d1(r) / w(r)
            if th == ISOTROPIC:
                out["isotropy"] = -Q.cv
            elif th == KAPPA_BALANCE:
                out["balance"] = -s * (t + n * eta) / (1.0 + np.abs(t) + n * np.abs(eta))
                out["warping_slope"] = s * w.d1(r) / np.maximum(1.0, np.abs(w.d1(r)))
            else:
                out["balance"] = (t + n * eta) / (1.0 + np.abs(t) + n * np.abs(eta))
                out["warping_slope"] = -w.d1(r) / np.maximum(1.0, np.abs(w.d1(r)))
        elif th == CV_CRITERION:
            out["nonpositive_curvature"] = -Q.max_sec
            bound = (n - 2) / (2 * math.sqrt(n))
            out["cv_bound"] = (bound - Q.cv) / bound
            out["divergence_free"] = (DIV_FREE_TOL * Q.w_scale - Q.div_norm) / Q.w_scale
        else:
            raise ValueError(f"theorem {th} has no pointwise margins")
        return out

    return fn


# ---------------------------------------------------------------------------
# margin engine
# ---------------------------------------------------------------------------


def _chunk_size(n: int) -> int:
    return max(16, int(2**25 // (8 * 16 * n**5)))


def _batched(fn: MarginFn, pts: np.ndarray, step: float, chunk: int) -> dict:
    parts: dict = {}
    for k in range(0, len(pts), chunk):
        res = fn(pts[k : k + chunk], step)
        for key, val in res.items():
            parts.setdefault(key, []).append(np.asarray(val, dtype=float))
    return {k: np.concatenate(v) for k, v in parts.items()}


def _witness_value(fn: MarginFn, point: np.ndarray, step: float) -> dict:
    """Margins and slacks at a single point; the replay path uses exactly this."""
    x = point[None, :]
    fine = fn(x, step)
    coarse = fn(x, 2 * step)
    return {
        k: (float(np.asarray(fine[k])[0]), ABS_SLACK + 2.0 * abs(float(np.asarray(fine[k])[0]) - float(np.asarray(coarse[k])[0])))
        for k in fine
    }


def evaluate_margins(fn: MarginFn, pts: np.ndarray, step: float, dim: int) -> list:
    chunk = _chunk_size(dim)
    fine = _batched(fn, pts, step, chunk)
    coarse = _batched(fn, pts, 2 * step, chunk)
    margins = []
    for key in fine:
        m1 = fine[key]
        slack = ABS_SLACK + 2.0 * np.abs(m1 - coarse[key])
        score = np.where(np.isfinite(m1 + slack), m1 + slack, -np.inf)
        k = int(np.argmin(score))
        value, sl = _witness_value(fn, pts[k], step)[key]
        margins.append(Margin(key, value, sl, tuple(float(v) for v in pts[k]), len(pts)))
    return margins


def replay(report: ClassificationReport, m: ChartManifold, W: Field, spec: CriterionSpec) -> bool:
    """Re-evaluate each recorded margin at its witness; True when all match exactly."""
    if spec.theorem == BOUNDED_EIGEN:
        return _bounded_eigen_margins(m, W, spec)[0] == report.margins
    fn = _margin_function(m, W, spec)
    for mg in report.margins:
        value, sl = _witness_value(fn, np.asarray(mg.witness, dtype=float), spec.step)[mg.condition]
        if value != mg.worst and not (math.isnan(value) and math.isnan(mg.worst)):
            return False
        if sl != mg.slack and not (math.isnan(sl) and math.isnan(mg.slack)):
            return False
    return True


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def _tail(spec: CriterionSpec, q: float):
    model = WarpedModel(q, spec.w, spec.theta.weight(spec.rho), V0=1.0)
    return model, tail_convergence(model, spec.rho)


def _capacity_bound(m: ChartManifold, W: Field, model: WarpedModel, spec: CriterionSpec, direction: str):
    """``-phi'(rho) Vol_W(dB_rho)`` at ``R = horizon`` (two-dimensional charts only)."""
    if m.dim != 2:
        return None
    from .capacity_solver import vol_w_sphere

    R = spec.shell_top
    try:
        sol = radial_solution(model, spec.rho, R)
        vol = vol_w_sphere(m, W, spec.rho)
    except Exception as exc:  # the bound is informative only; never fail the verdict on it
        return {"R": R, "value": None, "direction": direction, "note": f"unavailable: {exc}"}
    return {"R": R, "value": -sol.derivative_at_rho * vol, "vol_w": vol, "direction": direction}


def _sample(m: ChartManifold, spec: CriterionSpec) -> np.ndarray:
    return m.sample_shell(spec.rho, spec.shell_top, spec.budget, spec.seed)


def _finish(spec, margins, tail, needed, verdict_if, capacity=None, q_used=None) -> ClassificationReport:
    params = spec.parameters()
    if q_used is not None:
        params["q"] = q_used
    failing = [mg.condition for mg in margins if not mg.satisfied]
    weight = spec.theta.describe(spec.rho)
    tail_dict = tail.as_dict() if tail is not None else None
    if failing:
        return ClassificationReport(UNDECIDED, spec.theorem, params, weight, margins, tail_dict, capacity,
                                    "hypotheses fail: " + ", ".join(failing))
    if tail is not None and tail.status != needed:
        return ClassificationReport(UNDECIDED, spec.theorem, params, weight, margins, tail_dict, capacity,
                                    f"tail integral {tail.status}; this side needs {needed}")
    return ClassificationReport(verdict_if, spec.theorem, params, weight, margins, tail_dict, capacity,
                                "all sampled hypotheses hold" + (f" and the tail {needed.lower()}" if tail else ""))


def check_main(m: ChartManifold, W: Field, spec: CriterionSpec) -> ClassificationReport:
    """Comparison criterion with ``q``, ``theta`` and warping ``w`` (and its divergence-free variant)."""
    if spec.theorem not in (MAIN, DIVERGENCE_FREE):
        raise ValueError("check_main handles MainComparison and DivergenceFree")
    if spec.theorem == DIVERGENCE_FREE and (spec.theta.a or spec.theta.b or spec.theta.c):
        raise ValueError("the divergence-free criterion uses h = 0")
    margins = evaluate_margins(_margin_function(m, W, spec), _sample(m, spec), spec.step, m.dim)
    model, tail = _tail(spec, spec.q)
    if spec.side == UPPER:
        needed, verdict, direction = CONVERGES, HYPERBOLIC, "lower"
    else:
        needed, verdict, direction = DIVERGES, PARABOLIC, "upper"
    cap = _capacity_bound(m, W, model, spec, direction)
    return _finish(spec, margins, tail, needed, verdict, cap)


def check_divergence_free(m: ChartManifold, W: Field, spec: CriterionSpec) -> ClassificationReport:
    if spec.theorem != DIVERGENCE_FREE:
        raise ValueError("spec.theorem must be DivergenceFree")
    return check_main(m, W, spec)


def check_balance(m: ChartManifold, W: Field, spec: CriterionSpec) -> ClassificationReport:
    """Eigenvalue-balance criteria; the tail uses the manifold dimension as exponent.

    ``side=LowerBound`` is the parabolic direction (sectional curvature bounded
    below).  ``MuBalance`` exists only in that direction.
    """
    if spec.theorem not in (KAPPA_BALANCE, MU_BALANCE, ISOTROPIC):
        raise ValueError("check_balance handles KappaBalance, MuBalance and Isotropic")
    if spec.theorem == MU_BALANCE and spec.side != LOWER:
        raise ValueError("MuBalance is a parabolicity criterion; use side=LowerBound")
    margins = evaluate_margins(_margin_function(m, W, spec), _sample(m, spec), spec.step, m.dim)
    if spec.theorem == ISOTROPIC:
        margins = [
            Margin(mg.condition, mg.worst, max(mg.slack, ISOTROPY_TOL), mg.witness, mg.n_samples)
            if mg.condition == "isotropy" else mg
            for mg in margins
        ]
    _, tail = _tail(spec, float(m.dim))
    if spec.side == LOWER:
        return _finish(spec, margins, tail, DIVERGES, PARABOLIC, q_used=float(m.dim))
    return _finish(spec, margins, tail, CONVERGES, HYPERBOLIC, q_used=float(m.dim))


def check_cv(m: ChartManifold, W: Field, spec: CriterionSpec) -> ClassificationReport:
    """Nonpositive curvature, small anisotropy and zero divergence give hyperbolicity."""
    if spec.theorem != CV_CRITERION:
        raise ValueError("spec.theorem must be CVCriterion")
    if m.dim < 3:
        return ClassificationReport(UNDECIDED, spec.theorem, spec.parameters(), "none", [], None, None,
                                    "the anisotropy criterion needs dimension at least 3")
    margins = evaluate_margins(_margin_function(m, W, spec), _sample(m, spec), spec.step, m.dim)
    rep = _finish(spec, margins, None, None, HYPERBOLIC)
    rep.weight = "none"
    return rep


def _bounded_eigen_margins(m: ChartManifold, W: Field, spec: CriterionSpec):
    pts = _sample(m, spec)
    with np.errstate(all="ignore"):
        Wx = np.asarray(W(pts), dtype=float)
    if not np.all(np.isfinite(Wx)):
        raise UnboundedSpectrumDetected("conductivity overflows inside the sampling horizon")
    ev = checked_eigenvalues(Wx, m.g(pts))
    kmax, kmin = ev[:, -1].max(), ev[:, -1].min()
    mmax, mmin = ev[:, 0].max(), ev[:, 0].min()
    spread = max(kmax / kmin, mmax / mmin, kmax / mmin)
    worst_k = int(np.argmax(ev[:, -1] / mmin))
    value = (math.log(SPECTRUM_FACTOR) - math.log(spread)) / math.log(SPECTRUM_FACTOR)
    margins = [Margin("spectrum_spread", value, ABS_SLACK, tuple(float(v) for v in pts[worst_k]), len(pts))]
    return margins, spread, (float(mmin), float(kmax))


def check_bounded_eigen(
    m: ChartManifold, W: Field, spec: CriterionSpec, reference_verdict: str
) -> ClassificationReport:
    """Transfer the Riemannian type when the spectrum stays within fixed bounds."""
    if spec.theorem != BOUNDED_EIGEN:
        raise ValueError("spec.theorem must be BoundedEigen")
    ref = reference_verdict.verdict if isinstance(reference_verdict, ClassificationReport) else reference_verdict
    margins, spread, (mu_min, kappa_max) = _bounded_eigen_margins(m, W, spec)
    if not margins[0].satisfied:
        raise UnboundedSpectrumDetected(
            f"sampled max kappa / min mu = {spread:.3g} exceeds {SPECTRUM_FACTOR:g} within r <= {spec.shell_top:g}"
        )
    params = spec.parameters()
    params["reference_verdict"] = ref
    params["mu_min"] = mu_min
    params["kappa_max"] = kappa_max
    verdict = ref if ref in (PARABOLIC, HYPERBOLIC) else UNDECIDED
    reason = "eigenvalues stay within sampled bounds; the Riemannian type transfers"
    if verdict == UNDECIDED:
        reason = "no decisive reference verdict to transfer"
    return ClassificationReport(verdict, spec.theorem, params, "none", margins, None, None, reason)


def classify(m: ChartManifold, W: Field, spec: CriterionSpec, reference_verdict: Optional[str] = None) -> ClassificationReport:
    """Dispatch on ``spec.theorem``."""
    th = spec.theorem
    if th in (MAIN, DIVERGENCE_FREE):
        return check_main(m, W, spec)
    if th in (KAPPA_BALANCE, MU_BALANCE, ISOTROPIC):
        return check_balance(m, W, spec)
    if th == CV_CRITERION:
        return check_cv(m, W, spec)
    if th in EXTRINSIC_THEOREMS:
        raise ValueError(f"{th} concerns submanifolds; use submanifold.classify_extrinsic")
    if reference_verdict is None:
        raise ValueError("BoundedEigen needs the Riemannian verdict of the underlying manifold")
    return check_bounded_eigen(m, W, spec, reference_verdict)


def combine(reports: Sequence[ClassificationReport]) -> str:
    """Joint verdict of several criteria; raises if two of them disagree."""
    decisive = {r.verdict for r in reports if r.decisive}
    if len(decisive) > 1:
        names = ", ".join(f"{r.theorem}={r.verdict}" for r in reports if r.decisive)
        raise ContradictoryVerdicts(f"criteria disagree: {names}")
    return decisive.pop() if decisive else UNDECIDED


def search(
    m: ChartManifold,
    W: Field,
    base: CriterionSpec,
    qs: Sequence[float] = (1.0, 1.5, 2.0, 2.5, 3.0),
    thetas: Sequence[Theta] = (Theta(),),
) -> ClassificationReport:
    """Try a grid of ``q`` and ``theta`` on both sides; return the first decisive report.

    When nothing is decisive the last report is returned (its verdict is Undecided).
    """
    last = None
    for side in (UPPER, LOWER):
        for q in qs:
            for th in thetas:
                spec = CriterionSpec(base.theorem, base.w, q, th, base.rho, side, base.horizon,
                                     base.budget, base.seed, base.step)
                rep = classify(m, W, spec)
                if rep.decisive:
                    return rep
                last = rep
    return last
