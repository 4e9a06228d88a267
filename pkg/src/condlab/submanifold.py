"""Immersed submanifolds: frames, second fundamental form, W-mean curvature.

All routines are batched over parameter points ``u`` of shape ``(..., m)``.
Derivatives of the immersion come from the same fourth-order stencils as the
ambient geometry; the second fundamental form is
``B(d_a, d_b) = (d_a d_b X + Gamma(d_a X, d_b X))`` projected to the normal
space.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .classifier import (
    EXTRINSIC_BALANCE,
    EXTRINSIC_CV,
    EXTRINSIC_MAIN,
    HYPERBOLIC,
    LOWER,
    PARABOLIC,
    UNDECIDED,
    UPPER,
    ClassificationReport,
    CriterionSpec,
    _witness_value,
    evaluate_margins,
)
from .errors import EmptySampleSet, FormulaMismatch, NotHypersurface, RankDeficient
from .geometry import (
    DEFAULT_STEP,
    ChartManifold,
    christoffel,
    coordinate_plane_sectionals,
    covariant_derivative,
    divergence_w,
    euclidean,
    laplace_w_direct,
    partials,
    radial_sectional_range,
)
from .model_space import CONVERGES, DIVERGES, RadialProfile, WarpedModel, tail_convergence
from .tensor_core import POSITIVE_REL_TOL, box_samples

Field = Callable[[np.ndarray], np.ndarray]

#: the induced metric counts as degenerate below this eigenvalue ratio
RANK_TOL = 1e-12
#: default tolerance for the relative W-compatibility defects
COMPATIBILITY_TOL = 1e-8
#: the two W-mean-curvature formulas may differ by this multiple of the differencing error
AGREEMENT_FACTOR = 10.0
#: absolute floor for the agreement test, relative to the size of the vectors
AGREEMENT_FLOOR = 1e-9
# largest candidate pool drawn when searching the parameter box for a radial shell
MAX_SAMPLE_POOL = 1 << 20


@dataclass(frozen=True)
class ImmersedSubmanifold:
    """``immersion: (..., m) -> (..., n)`` into ``ambient`` over a parameter box.

    ``bounds`` limit finite-difference stencils; ``sample_box`` is the finite
    box used for sampling.  ``normal_hint`` orients the unit normal of a
    hypersurface (the normal has positive inner product with the hint).
    """

    dim: int
    ambient: ChartManifold
    immersion: Field
    sample_box: tuple
    bounds: tuple = ()
    normal_hint: Optional[Field] = None
    name: str = ""

    def __post_init__(self):
        if not 0 < self.dim < self.ambient.dim:
            raise ValueError("need 0 < m < n")
        if not self.bounds:
            object.__setattr__(self, "bounds", tuple((-math.inf, math.inf) for _ in range(self.dim)))
        if len(self.sample_box) != self.dim or len(self.bounds) != self.dim:
            raise ValueError("sample_box and bounds need one (lo, hi) pair per parameter")

    def __call__(self, u) -> np.ndarray:
        return np.asarray(self.immersion(np.asarray(u, dtype=float)), dtype=float)

    def jacobian(self, u, step: float = DEFAULT_STEP) -> np.ndarray:
        """Rows ``d_a X``: shape ``(..., m, n)``."""
        return partials(self.immersion, np.asarray(u, dtype=float), step, self.bounds)

    def induced_metric(self, u, step: float = DEFAULT_STEP) -> np.ndarray:
        J = self.jacobian(u, step)
        g = self.ambient.g(self(u))
        h = J @ g @ np.swapaxes(J, -1, -2)
        return 0.5 * (h + np.swapaxes(h, -1, -2))

    def chart(self, step: float = DEFAULT_STEP) -> ChartManifold:
        """The parameter domain with the induced metric."""
        return ChartManifold(self.dim, lambda u: self.induced_metric(u, step), self.bounds, None,
                             f"induced({self.name})")

    def radius(self, u) -> np.ndarray:
        return self.ambient.radius(self(u))


@dataclass
class ExtrinsicFrame:
    """Frame data at a batch of parameter points (ambient vectors are rows)."""

    point: np.ndarray  # (..., n)
    metric: np.ndarray  # ambient g at the point, (..., n, n)
    jacobian: np.ndarray  # (..., m, n)
    coframe: np.ndarray  # (..., m, m): e_i = sum_a coframe[a, i] d_a X
    tangent: np.ndarray  # (..., m, n)
    normal: np.ndarray  # (..., n - m, n)
    second_form: np.ndarray  # (..., m, m, n): B(e_i, e_j)
    mean_curvature: np.ndarray  # (..., n)

    @property
    def dim(self) -> int:
        return self.tangent.shape[-2]

    def inner(self, a, b) -> np.ndarray:
        return np.einsum("...i,...ij,...j->...", a, self.metric, b)

    @property
    def shape_operator(self) -> np.ndarray:
        """``A_ij = <B(e_i, e_j), N>`` for the oriented unit normal of a hypersurface."""
        if self.normal.shape[-2] != 1:
            raise NotHypersurface(f"codimension {self.normal.shape[-2]} has no single shape operator")
        N = self.normal[..., 0, :]
        A = np.einsum("...ijk,...kl,...l->...ij", self.second_form, self.metric, N)
        return 0.5 * (A + np.swapaxes(A, -1, -2))

    @property
    def scalar_mean_curvature(self) -> np.ndarray:
        return np.trace(self.shape_operator, axis1=-2, axis2=-1) / self.dim

    def tangential(self, v) -> np.ndarray:
        c = np.einsum("...in,...nk,...k->...i", self.tangent, self.metric, v)
        return np.einsum("...i,...in->...n", c, self.tangent)

    def normal_part(self, v) -> np.ndarray:
        return v - self.tangential(v)


def _normal_basis(g: np.ndarray, tangent: np.ndarray) -> np.ndarray:
    """g-orthonormal rows spanning the g-orthogonal complement of the tangent rows."""
    n = g.shape[-1]
    m = tangent.shape[-2]
    K = np.linalg.cholesky(g)  # g = K K^T
    y = np.einsum("...nk,...in->...ik", K, tangent)  # rows K^T e_i, Euclidean-orthonormal
    _, _, Vt = np.linalg.svd(y, full_matrices=True)
    z = Vt[..., m:, :]  # (..., n - m, n)
    Kt = np.swapaxes(K, -1, -2)
    sol = np.linalg.solve(Kt[..., None, :, :], z[..., None])[..., 0]
    return sol.reshape(z.shape[:-1] + (n,))


def extrinsic_frame(s: ImmersedSubmanifold, u, step: float = DEFAULT_STEP) -> ExtrinsicFrame:
    u = np.asarray(u, dtype=float)
    X = s(u)
    J = s.jacobian(u, step)
    g = s.ambient.g(X)
    h = J @ g @ np.swapaxes(J, -1, -2)
    h = 0.5 * (h + np.swapaxes(h, -1, -2))
    ev = np.linalg.eigvalsh(h)
    if np.any(ev[..., 0] <= RANK_TOL * np.abs(ev[..., -1])) or np.any(~np.isfinite(ev)):
        raise RankDeficient(f"immersion differential loses rank (min eigenvalue {float(np.min(ev[..., 0])):.3e})")
    L = np.linalg.cholesky(h)
    C = np.swapaxes(np.linalg.inv(L), -1, -2)  # e_i = sum_a C[a, i] d_a X
    E = np.einsum("...ai,...an->...in", C, J)
    nu = _normal_basis(g, E)
    if nu.shape[-2] == 1 and s.normal_hint is not None:
        hint = np.asarray(s.normal_hint(u), dtype=float)
        sgn = np.where(np.einsum("...i,...ij,...j->...", nu[..., 0, :], g, hint) < 0, -1.0, 1.0)
        nu = nu * sgn[..., None, None]

    D2 = partials(lambda v: s.jacobian(v, step), u, step, s.bounds)  # (..., b, a, n)
    G = christoffel(s.ambient, X, step)  # (..., k, l, j)
    Bc = D2 + np.einsum("...klj,...al,...bj->...bak", G, J, J)
    Bc = 0.5 * (Bc + np.swapaxes(Bc, -2, -3))
    coeff = np.einsum("...abk,...kl,...pl->...abp", Bc, g, nu)
    Bc = np.einsum("...abp,...pn->...abn", coeff, nu)
    B = np.einsum("...ai,...bj,...abn->...ijn", C, C, Bc)
    H = np.einsum("...iin->...n", B) / s.dim

    if nu.shape[-2] == 1 and s.normal_hint is None:
        # orient towards the mean curvature vector; break ties by the first significant component
        dot = np.einsum("...i,...ij,...j->...", nu[..., 0, :], g, H)
        first = np.take_along_axis(
            nu[..., 0, :], np.argmax(np.abs(nu[..., 0, :]) > 1e-8, axis=-1)[..., None], axis=-1
        )[..., 0]
        tiny = np.abs(dot) <= 1e-10 * np.maximum(1.0, np.linalg.norm(H, axis=-1))
        sgn = np.where(tiny, np.sign(first), np.sign(dot))
        sgn = np.where(sgn == 0, 1.0, sgn)
        nu = nu * sgn[..., None, None]
    return ExtrinsicFrame(X, g, J, C, E, nu, B, H)


# ---------------------------------------------------------------------------
# compatibility and W-mean curvature
# ---------------------------------------------------------------------------


def _scale(Wx):
    return np.maximum(1.0, np.abs(Wx).max(axis=(-2, -1)))


def w_compatibility(s: ImmersedSubmanifold, W: Field, u, tol: float = COMPATIBILITY_TOL,
                    step: float = DEFAULT_STEP, frame: Optional[ExtrinsicFrame] = None) -> dict:
    """Relative defects ``|(W e_i)^perp|`` and ``|(W nu)^T|``, divided by ``max(1, |W|)``."""
    fr = frame if frame is not None else extrinsic_frame(s, u, step)
    Wx = np.asarray(W(fr.point), dtype=float)
    WE = np.einsum("...kl,...il->...ik", Wx, fr.tangent)
    WN = np.einsum("...kl,...il->...ik", Wx, fr.normal)
    t_perp = np.stack([fr.normal_part(WE[..., i, :]) for i in range(fr.dim)], axis=-2)
    n_tan = np.stack([fr.tangential(WN[..., a, :]) for a in range(WN.shape[-2])], axis=-2)
    norm = lambda V: np.sqrt(np.abs(np.einsum("...ik,...kl,...il->...i", V, fr.metric, V))).max(axis=-1)
    sc = _scale(Wx)
    td = norm(t_perp) / sc
    nd = norm(n_tan) / sc
    return {"tangent_defect": td, "normal_defect": nd, "compatible": (td < tol) & (nd < tol)}


def restricted_conductivity(s: ImmersedSubmanifold, W: Field, step: float = DEFAULT_STEP) -> Field:
    """``W^Sigma`` in parameter coordinates: ``T^a_b = h^{ac} <d_c X, W d_b X>``."""

    def T(u):
        u = np.asarray(u, dtype=float)
        X = s(u)
        J = s.jacobian(u, step)
        g = s.ambient.g(X)
        h = J @ g @ np.swapaxes(J, -1, -2)
        M = J @ g @ np.asarray(W(X), dtype=float) @ np.swapaxes(J, -1, -2)
        M = 0.5 * (M + np.swapaxes(M, -1, -2))
        return np.linalg.solve(0.5 * (h + np.swapaxes(h, -1, -2)), M)

    return T


def _hw_ambient_trace(s, W, u, step):
    """``W(m H) + tr_Sigma(nabla W)`` from ambient covariant derivatives."""
    fr = extrinsic_frame(s, u, step)
    Wx = np.asarray(W(fr.point), dtype=float)
    nab = covariant_derivative(s.ambient, W, fr.point, step)  # [j, k, i] = W^k_{i;j}
    tr = np.einsum("...aj,...ai,...jki->...k", fr.tangent, fr.tangent, nab)
    return np.einsum("...kl,...l->...k", Wx, fr.dim * fr.mean_curvature) + tr


def _hw_intrinsic(s, W, u, step):
    """``sum_i B(e_i, W e_i) + div^Sigma(W^Sigma)`` from the induced geometry."""
    fr = extrinsic_frame(s, u, step)
    Wx = np.asarray(W(fr.point), dtype=float)
    WE = np.einsum("...kl,...il->...ik", Wx, fr.tangent)
    S = np.einsum("...ik,...kl,...jl->...ij", WE, fr.metric, fr.tangent)  # <W e_i, e_j>
    first = np.einsum("...ij,...ijn->...n", S, fr.second_form)
    div = divergence_w(s.chart(step), restricted_conductivity(s, W, step), u, step)  # (..., m)
    return first + np.einsum("...a,...an->...n", div, fr.jacobian)


@dataclass
class WMeanCurvature:
    """``H_W`` (ambient components) with its tangential and normal parts."""

    vector: np.ndarray
    tangential: np.ndarray
    normal: np.ndarray
    via_ambient: np.ndarray  # m H_W from the ambient trace formula
    via_intrinsic: np.ndarray  # m H_W from the induced-geometry formula
    discrepancy: np.ndarray
    differencing_error: np.ndarray

    @property
    def agree(self) -> np.ndarray:
        return self.discrepancy <= _agreement_bound(self)


def _agreement_bound(hw) -> np.ndarray:
    size = np.maximum(1.0, np.linalg.norm(hw.via_ambient, axis=-1))
    return AGREEMENT_FACTOR * hw.differencing_error + AGREEMENT_FLOOR * size


def _w_mean_curvature_raw(s, W, u, step) -> WMeanCurvature:
    a1 = _hw_ambient_trace(s, W, u, step)
    b1 = _hw_intrinsic(s, W, u, step)
    a2 = _hw_ambient_trace(s, W, u, 2 * step)
    b2 = _hw_intrinsic(s, W, u, 2 * step)
    err = np.maximum(np.linalg.norm(a1 - a2, axis=-1), np.linalg.norm(b1 - b2, axis=-1))
    fr = extrinsic_frame(s, u, step)
    H = 0.5 * (a1 + b1) / s.dim
    tan = fr.tangential(H)
    return WMeanCurvature(H, tan, H - tan, a1, b1, np.linalg.norm(a1 - b1, axis=-1), err)


def w_mean_curvature(s: ImmersedSubmanifold, W: Field, u, step: float = DEFAULT_STEP) -> WMeanCurvature:
    """``H_W`` as the mean of its two equivalent formulas.

    Raises ``FormulaMismatch`` when the formulas differ by more than ten times
    the differencing error (estimated from steps ``h`` and ``2h``).  A mismatch
    signals an incompatible ``W`` or a field that is not smooth enough.
    """
    hw = _w_mean_curvature_raw(s, W, u, step)
    bad = ~hw.agree
    if np.any(bad):
        k = int(np.argmax(hw.discrepancy - _agreement_bound(hw)))
        raise FormulaMismatch(
            f"W-mean curvature formulas differ by {float(np.ravel(hw.discrepancy)[k]):.3e} "
            f"against differencing error {float(np.ravel(hw.differencing_error)[k]):.3e}"
        )
    return hw


# ---------------------------------------------------------------------------
# first Newton transformation
# ---------------------------------------------------------------------------


def newton_p1(frame: ExtrinsicFrame) -> np.ndarray:
    """``P_1 = m H I - A`` in the tangent frame of a hypersurface."""
    if frame.normal.shape[-2] != 1:
        raise NotHypersurface(f"P_1 needs codimension 1, got {frame.normal.shape[-2]}")
    A = frame.shape_operator
    m = frame.dim
    return np.trace(A, axis1=-2, axis2=-1)[..., None, None] * np.eye(m) - A


def newton_p1_field(s: ImmersedSubmanifold, step: float = DEFAULT_STEP) -> Field:
    """``P_1`` in parameter coordinates, suitable for intrinsic divergence checks."""

    def P(u):
        fr = extrinsic_frame(s, u, step)
        C = fr.coframe
        return C @ newton_p1(fr) @ np.linalg.inv(C)

    return P


def newton_p1_divergence(s: ImmersedSubmanifold, u, step: float = DEFAULT_STEP) -> np.ndarray:
    """Norm of ``div^Sigma P_1`` in the induced metric."""
    u = np.asarray(u, dtype=float)
    ch = s.chart(step)
    d = divergence_w(ch, newton_p1_field(s, step), u, step)
    return np.sqrt(np.abs(np.einsum("...a,...ab,...b->...", d, ch.g(u), d)))


# ---------------------------------------------------------------------------
# extrinsic quantities and classification
# ---------------------------------------------------------------------------


class _ExtrinsicQuantities:
    def __init__(self, s: ImmersedSubmanifold, W: Field, u: np.ndarray, step: float):
        self.s, self.W, self.u, self.step = s, W, u, step
        self.frame = extrinsic_frame(s, u, step)
        X = self.frame.point
        s.ambient.check_radial(X, step)
        self.r = s.ambient.radius(X)
        self.N = s.ambient.radial_gradient(X)
        self.Wx = np.asarray(W(X), dtype=float)
        fr = self.frame
        WE = np.einsum("...kl,...il->...ik", self.Wx, fr.tangent)
        S = np.einsum("...ik,...kl,...jl->...ij", WE, fr.metric, fr.tangent)
        self.tangent_matrix = 0.5 * (S + np.swapaxes(S, -1, -2))
        self.trace = np.trace(self.tangent_matrix, axis1=-2, axis2=-1)
        c = np.einsum("...in,...nk,...k->...i", fr.tangent, fr.metric, self.N)  # grad^Sigma r in the frame
        self.grad_sigma_r = c
        self.wrr = np.einsum("...i,...ij,...j->...", c, self.tangent_matrix, c)
        self.spectrum = np.linalg.eigvalsh(self.tangent_matrix)
        self._hw = None

    @property
    def hw(self) -> WMeanCurvature:
        if self._hw is None:
            self._hw = _w_mean_curvature_raw(self.s, self.W, self.u, self.step)
        return self._hw

    @property
    def hw_pairing(self):
        """``m <H_W, grad r>``."""
        return self.s.dim * self.frame.inner(self.hw.vector, self.N)

    def cv(self):
        ev = self.spectrum
        mean = ev.mean(axis=-1)
        return np.sqrt(np.mean((ev - mean[..., None]) ** 2, axis=-1)) / mean


def _extrinsic_margin_function(s: ImmersedSubmanifold, W: Field, spec: CriterionSpec):
    th = spec.theorem
    upper = spec.side == UPPER
    sign = 1.0 if upper else -1.0
    mdim = s.dim
    w, q, theta = spec.w, spec.q, spec.theta

    def fn(u, step):
        Q = _ExtrinsicQuantities(s, W, u, step)
        r = Q.r
        X = Q.frame.point
        out = {}
        comp = w_compatibility(s, W, u, frame=Q.frame)
        out["compatibility"] = (COMPATIBILITY_TOL - np.maximum(comp["tangent_defect"], comp["normal_defect"])) / COMPATIBILITY_TOL
        out["definite"] = Q.spectrum[..., 0] / Q.spectrum[..., -1] - POSITIVE_REL_TOL
        hw = Q.hw
        bound = _agreement_bound(hw)
        out["formula_agreement"] = (bound - hw.discrepancy) / bound
        if th in (EXTRINSIC_MAIN, EXTRINSIC_BALANCE):
            lo, hi = radial_sectional_range(s.ambient, X, step)
            cb = -w.d2(r) / w(r)
            curv_upper = upper
            if curv_upper:
                out["curvature"] = (cb - hi) / (1.0 + np.abs(cb))
            else:
                out["curvature"] = (lo - cb) / (1.0 + np.abs(cb))
        if th == EXTRINSIC_MAIN:
            wp = w.d1(r)
            out["trace"] = sign * wp * (Q.trace - q * Q.wrr) / (np.abs(Q.trace) * np.maximum(1.0, np.abs(wp)))
            out["mean_curvature"] = sign * (Q.hw_pairing - theta(r) * Q.wrr) / Q.trace
        elif th == EXTRINSIC_BALANCE:
            # parabolic direction (LowerBound): m<grad r, H_W> <= theta kappa, w' >= 0, m w'/w + theta <= 0
            s_ = -sign
            kappa = Q.spectrum[..., -1]
            t = theta(r)
            out["mean_curvature_ratio"] = s_ * (t - Q.hw_pairing / kappa) / (1.0 + np.abs(t))
            out["warping_slope"] = s_ * w.d1(r) / np.maximum(1.0, np.abs(w.d1(r)))
            eta = w.d1(r) / w(r)
            out["balance"] = -s_ * (t + mdim * eta) / (1.0 + np.abs(t) + mdim * np.abs(eta))
        elif th == EXTRINSIC_CV:
            coord = coordinate_plane_sectionals(s.ambient, X, step).max(axis=-1)
            out["nonpositive_curvature"] = -np.maximum(coord, radial_sectional_range(s.ambient, X, step)[1])
            bound_cv = (mdim - 2) / (2 * math.sqrt(mdim))
            out["cv_bound"] = (bound_cv - Q.cv()) / bound_cv
            out["mean_curvature_sign"] = -Q.hw_pairing / np.maximum(1.0, np.abs(Q.trace))
        else:
            raise ValueError(f"{th} is not an extrinsic criterion")
        return out

    return fn


def sample_parameters(s: ImmersedSubmanifold, rho: float, horizon: float, budget: int, seed: int = 0) -> np.ndarray:
    """Low-discrepancy parameters whose image satisfies ``rho <= r <= horizon``."""
    pool = 4 * budget
    while True:
        u = box_samples(s.sample_box, pool, seed)
        r = s.radius(u)
        keep = u[(r >= rho) & (r <= horizon)]
        if len(keep) >= budget or pool >= MAX_SAMPLE_POOL:
            break
        pool = min(4 * pool, MAX_SAMPLE_POOL)
    if len(keep) >= budget:
        return keep[:budget]
    if len(keep) == 0:
        raise EmptySampleSet(f"no parameter in the sample box maps into {rho} <= r <= {horizon}")
    return keep


def classify_extrinsic(s: ImmersedSubmanifold, W: Field, spec: CriterionSpec) -> ClassificationReport:
    """Extrinsic comparison, balance and anisotropy criteria for a submanifold.

    ``side=UpperBound`` of the comparison criterion is the hyperbolic direction
    (ambient radial curvature bounded above, trace and mean-curvature
    conditions from below).  The balance criterion's ``LowerBound`` side is
    the parabolic direction.  Any failure yields ``Undecided``.
    """
    th = spec.theorem
    params = spec.parameters()
    params["submanifold"] = s.name
    weight = spec.theta.describe(spec.rho)
    if th == EXTRINSIC_CV and s.dim < 3:
        return ClassificationReport(UNDECIDED, th, params, "none", [], None, None,
                                    "the anisotropy criterion needs dimension at least 3")
    fn = _extrinsic_margin_function(s, W, spec)
    try:
        pts = sample_parameters(s, spec.rho, spec.shell_top, spec.budget, spec.seed)
        margins = evaluate_margins(fn, pts, spec.step, s.ambient.dim)
    except Exception as exc:  # noqa: BLE001 - any evaluation failure is an undecided verdict
        return ClassificationReport(UNDECIDED, th, params, weight, [], None, None,
                                    f"evaluation failed: {type(exc).__name__}: {exc}")
    failing = [mg.condition for mg in margins if not mg.satisfied]
    if th == EXTRINSIC_CV:
        verdict = UNDECIDED if failing else HYPERBOLIC
        reason = "hypotheses fail: " + ", ".join(failing) if failing else "all sampled hypotheses hold"
        return ClassificationReport(verdict, th, params, "none", margins, None, None, reason)
    q = spec.q if th == EXTRINSIC_MAIN else float(s.dim)
    params["q"] = q
    model = WarpedModel(q, spec.w, spec.theta.weight(spec.rho), V0=1.0)
    tail = tail_convergence(model, spec.rho)
    if th == EXTRINSIC_MAIN:
        needed, verdict = (CONVERGES, HYPERBOLIC) if spec.side == UPPER else (DIVERGES, PARABOLIC)
    else:
        needed, verdict = (DIVERGES, PARABOLIC) if spec.side == LOWER else (CONVERGES, HYPERBOLIC)
    if failing:
        return ClassificationReport(UNDECIDED, th, params, weight, margins, tail.as_dict(), None,
                                    "hypotheses fail: " + ", ".join(failing))
    if tail.status != needed:
        return ClassificationReport(UNDECIDED, th, params, weight, margins, tail.as_dict(), None,
                                    f"tail integral {tail.status}; this side needs {needed}")
    return ClassificationReport(verdict, th, params, weight, margins, tail.as_dict(), None,
                                f"all sampled hypotheses hold and the tail {needed.lower()}")


def replay_extrinsic(report: ClassificationReport, s: ImmersedSubmanifold, W: Field, spec: CriterionSpec) -> bool:
    fn = _extrinsic_margin_function(s, W, spec)
    for mg in report.margins:
        value, sl = _witness_value(fn, np.asarray(mg.witness, dtype=float), spec.step)[mg.condition]
        if value != mg.worst or sl != mg.slack:
            return False
    return True


def extrinsic_laplacian_check(
    s: ImmersedSubmanifold, W: Field, F: RadialProfile, w: RadialProfile, u, step: float = DEFAULT_STEP
) -> dict:
    """Both sides of the comparison for ``Delta_W^Sigma (F o r)``.

    ``lhs`` is the intrinsic ``div(W^Sigma grad (F o r))``; ``rhs`` is
    ``(F'' - F' w'/w) <W grad^Sigma r, grad^Sigma r> + tr_Sigma(W) F' w'/w + m F' <H_W, grad r>``.
    The caller decides which inequality the ambient curvature implies.
    """
    u = np.asarray(u, dtype=float)
    lhs = laplace_w_direct(s.chart(step), restricted_conductivity(s, W, step), lambda v: F(s.radius(v)), u, step)
    Q = _ExtrinsicQuantities(s, W, u, step)
    r = Q.r
    eta = w.d1(r) / w(r)
    rhs = (F.d2(r) - F.d1(r) * eta) * Q.wrr + Q.trace * F.d1(r) * eta + F.d1(r) * Q.hw_pairing
    return {"lhs": lhs, "rhs": rhs, "r": r}


# ---------------------------------------------------------------------------
# named surfaces in Euclidean R^3
# ---------------------------------------------------------------------------


def plane() -> ImmersedSubmanifold:
    """``z = 0`` through the origin."""
    f = lambda u: np.concatenate([u, np.zeros(u.shape[:-1] + (1,))], axis=-1)
    return ImmersedSubmanifold(2, euclidean(3), f, ((-8.0, 8.0), (-8.0, 8.0)),
                               normal_hint=lambda u: np.broadcast_to([0.0, 0.0, 1.0], u.shape[:-1] + (3,)),
                               name="plane")


def cylinder(radius: float = 1.0) -> ImmersedSubmanifold:
    """``x^2 + y^2 = radius^2``, parameters ``(angle, z)``."""

    def f(u):
        t, z = u[..., 0], u[..., 1]
        return np.stack([radius * np.cos(t), radius * np.sin(t), z], axis=-1)

    inward = lambda u: -np.stack([np.cos(u[..., 0]), np.sin(u[..., 0]), np.zeros(u.shape[:-1])], axis=-1)
    return ImmersedSubmanifold(2, euclidean(3), f, ((0.0, 2 * math.pi), (-8.0, 8.0)), normal_hint=inward,
                               name=f"cylinder({radius:g})")


def sphere(radius: float = 1.0, center=(0.0, 0.0, 2.0)) -> ImmersedSubmanifold:
    """Round sphere, parameters ``(polar, azimuth)``; inward normal.

    The default center keeps the pole of the ambient chart off the sphere.
    """
    c = np.asarray(center, dtype=float)

    def f(u):
        t, p = u[..., 0], u[..., 1]
        return c + radius * np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1)

    inward = lambda u: c - f(u)
    return ImmersedSubmanifold(2, euclidean(3), f, ((0.3, math.pi - 0.3), (0.0, 2 * math.pi)),
                               bounds=((0.05, math.pi - 0.05), (-math.inf, math.inf)), normal_hint=inward,
                               name=f"sphere({radius:g})")


def ellipsoid(a: float = 1.0, b: float = 1.5, c: float = 2.0, center=(0.0, 0.0, 4.0)) -> ImmersedSubmanifold:
    """``x^2/a^2 + y^2/b^2 + z^2/c^2 = 1`` shifted by ``center``; inward normal."""
    o = np.asarray(center, dtype=float)

    def f(u):
        t, p = u[..., 0], u[..., 1]
        return o + np.stack([a * np.sin(t) * np.cos(p), b * np.sin(t) * np.sin(p), c * np.cos(t)], axis=-1)

    inward = lambda u: o - f(u)
    return ImmersedSubmanifold(2, euclidean(3), f, ((0.3, math.pi - 0.3), (0.0, 2 * math.pi)),
                               bounds=((0.05, math.pi - 0.05), (-math.inf, math.inf)), normal_hint=inward,
                               name=f"ellipsoid({a:g},{b:g},{c:g})")


def paraboloid() -> ImmersedSubmanifold:
    """``z = (x^2 + y^2)/2`` with parameters ``(rho, angle)``, ``rho >= 0.1``.

    The normal is oriented along ``(x, y, -1)``.
    """

    def f(u):
        p, t = u[..., 0], u[..., 1]
        return np.stack([p * np.cos(t), p * np.sin(t), 0.5 * p * p], axis=-1)

    def hint(u):
        X = f(u)
        return np.stack([X[..., 0], X[..., 1], -np.ones(u.shape[:-1])], axis=-1)

    return ImmersedSubmanifold(2, euclidean(3), f, ((0.1, 6.0), (0.0, 2 * math.pi)),
                               bounds=((0.05, math.inf), (-math.inf, math.inf)), normal_hint=hint, name="paraboloid")


def hyperbolic_cylinder(sigma: float = 1.0) -> ImmersedSubmanifold:
    """The branch ``x > 0`` of ``x^2 - y^2 = sigma`` (sigma > 0), parameters ``(a, z)``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    c = math.sqrt(sigma)

    def f(u):
        a, z = u[..., 0], u[..., 1]
        return np.stack([c * np.cosh(a), c * np.sinh(a), z], axis=-1)

    def hint(u):
        X = f(u)
        return np.stack([X[..., 0], -X[..., 1], np.zeros(u.shape[:-1])], axis=-1)

    return ImmersedSubmanifold(2, euclidean(3), f, ((-2.5, 2.5), (-8.0, 8.0)), normal_hint=hint,
                               name=f"hyperbolic_cylinder({sigma:g})")


# ---------------------------------------------------------------------------
# plot data
# ---------------------------------------------------------------------------


def export_point_cloud(s: ImmersedSubmanifold, u, quantities: dict, path) -> Path:
    """CSV with columns ``u1.., x1.., <quantity names>``."""
    u = np.asarray(u, dtype=float).reshape(-1, s.dim)
    X = s(u)
    cols = {f"u{i + 1}": u[:, i] for i in range(s.dim)}
    cols.update({f"x{i + 1}": X[:, i] for i in range(X.shape[1])})
    for k, v in quantities.items():
        cols[k] = np.asarray(v, dtype=float).reshape(len(u))
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(list(cols))
        for row in zip(*cols.values()):
            wr.writerow([repr(float(v)) for v in row])
    return path
