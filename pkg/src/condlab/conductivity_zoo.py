"""Named conductivities and metrics, each carrying identities it can self-check.

A :class:`NamedConductivity` bundles a chart, a batched field and a list of
claims.  A claim maps a batch of points to a residual that must stay below
its tolerance; ``self_test`` evaluates all claims on low-discrepancy samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionTooLow, NotPositiveDefinite
from .geometry import (
    DEFAULT_STEP,
    ChartManifold,
    curvature,
    divergence_w,
    euclidean,
    normal_chart,
)
from .model_space import space_form_warping
from .tensor_core import checked_eigenvalues, cv_values

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Claim:
    """``residual(points) <= tol`` at every sample."""

    name: str
    residual: Callable[[np.ndarray], np.ndarray]
    tol: float


@dataclass(frozen=True)
class ClaimResult:
    name: str
    worst: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(math.isfinite(self.worst) and self.worst <= self.tol)


@dataclass
class NamedConductivity:
    name: str
    manifold: ChartManifold
    field: Field
    claims: list = field(default_factory=list)
    sample_region: tuple = (1.0, 4.0)
    description: str = ""

    def __call__(self, x):
        return self.field(x)

    def samples(self, budget: int = 100, seed: int = 0) -> np.ndarray:
        lo, hi = self.sample_region
        return self.manifold.sample_shell(lo, hi, budget, seed)

    def self_test(self, budget: int = 100, seed: int = 0) -> list:
        pts = self.samples(budget, seed)
        out = []
        for c in self.claims:
            res = np.abs(np.asarray(c.residual(pts), dtype=float))
            worst = float(np.max(res)) if np.all(np.isfinite(res)) else math.inf
            out.append(ClaimResult(c.name, worst, c.tol))
        return out


def _identity(n: int) -> Field:
    eye = np.eye(n)

    def W(x):
        x = np.asarray(x)
        return np.broadcast_to(eye, x.shape[:-1] + (n, n)).copy()

    return W


def _rel(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.abs(b))


def _radial_pairing(W: Field, m: ChartManifold):
    def wrr(x):
        N = m.radial_gradient(x)
        return np.einsum("...i,...ij,...jk,...k->...", N, m.g(x), W(x), N)

    return wrr


def _div_claim(m: ChartManifold, W: Field, tol: float = 1e-8, step: float = DEFAULT_STEP) -> Claim:
    def res(x):
        d = divergence_w(m, W, x, step)
        return np.linalg.norm(d, axis=-1) / np.maximum(1.0, np.abs(W(x)).max(axis=(-2, -1)))

    return Claim("divergence-free", res, tol)


# ---------------------------------------------------------------------------
# two-dimensional family
# ---------------------------------------------------------------------------


def w_lambda_alpha(lam: float, alpha: float) -> NamedConductivity:
    """``e^(alpha r^2) [[lam + 1, lam - 1], [lam - 1, lam + 1]]`` on the Euclidean plane."""
    if not lam > 0:
        raise NotPositiveDefinite("lambda must be positive")
    M = np.array([[lam + 1.0, lam - 1.0], [lam - 1.0, lam + 1.0]])
    m = euclidean(2)

    def W(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            return np.exp(alpha * np.sum(x * x, axis=-1))[..., None, None] * M

    def eig_res(x):
        e = np.exp(alpha * np.sum(x * x, axis=-1))
        want = np.sort(np.stack([2 * e, 2 * lam * e], axis=-1), axis=-1)
        got = checked_eigenvalues(W(x), m.g(x))
        return (np.abs(got - want) / want).max(axis=-1)

    def wrr_res(x):
        r2 = np.sum(x * x, axis=-1)
        want = np.exp(alpha * r2) * (lam + 1 + 2 * x[..., 0] * x[..., 1] / r2 * (lam - 1))
        return _rel(_radial_pairing(W, m)(x), want) / np.maximum(1.0, np.exp(alpha * r2))

    def div_res(x):
        d = divergence_w(m, W, x)
        r = np.linalg.norm(x, axis=-1)
        lhs = np.einsum("...i,...i->...", d, x / r[..., None])
        want = 2 * alpha * r * _radial_pairing(W, m)(x)
        return np.abs(lhs - want) / np.maximum(1.0, np.abs(want))

    claims = [
        Claim("eigenvalues 2e^(a r^2), 2 lam e^(a r^2)", eig_res, 1e-12),
        Claim("<W grad r, grad r> closed form", wrr_res, 1e-12),
        Claim("<div W, grad r> = 2 a r <W grad r, grad r>", div_res, 1e-6),
    ]
    return NamedConductivity(f"w_lambda_alpha(lam={lam:g}, alpha={alpha:g})", m, W, claims, (0.5, 2.0),
                             "constant anisotropic matrix scaled by a radial Gaussian factor")


# ---------------------------------------------------------------------------
# curvature-derived tensors
# ---------------------------------------------------------------------------


def schouten(m: ChartManifold, x, step: float = DEFAULT_STEP) -> np.ndarray:
    """Mixed Schouten tensor ``Ric - R/(2(n-1)) Id``."""
    n = m.dim
    if n < 3:
        raise DimensionTooLow("the Schouten tensor needs dimension at least 3")
    pack = curvature(m, x, step)
    return pack.ricci_mixed - (pack.scalar / (2 * (n - 1)))[..., None, None] * np.eye(n)


def einstein(m: ChartManifold, x, step: float = DEFAULT_STEP) -> np.ndarray:
    """Mixed Einstein tensor ``Ric - (R/2) Id``."""
    if m.dim < 2:
        raise DimensionTooLow("the Einstein tensor needs dimension at least 2")
    pack = curvature(m, x, step)
    return pack.ricci_mixed - (pack.scalar / 2)[..., None, None] * np.eye(m.dim)


def schouten_field(m: ChartManifold, step: float = DEFAULT_STEP) -> Field:
    return lambda x: schouten(m, x, step)


def einstein_field(m: ChartManifold, step: float = DEFAULT_STEP) -> Field:
    return lambda x: einstein(m, x, step)


def schouten_identities(m: ChartManifold, x, step: float = DEFAULT_STEP) -> dict:
    """Residuals of the trace formula and the eigenvalue shift of the Schouten tensor."""
    n = m.dim
    pack = curvature(m, x, step)
    S = pack.ricci_mixed - (pack.scalar / (2 * (n - 1)))[..., None, None] * np.eye(n)
    tr = np.trace(S, axis1=-2, axis2=-1)
    shift = pack.scalar / (2 * (n - 1))
    ric_ev = checked_eigen_any(pack.ricci_mixed, pack.metric)
    s_ev = checked_eigen_any(S, pack.metric)
    return {
        "trace": np.abs(tr - (n - 2) * pack.scalar / (2 * (n - 1))),
        "eigenvalue_shift": np.abs(s_ev - (ric_ev - shift[..., None])).max(axis=-1),
    }


def checked_eigen_any(T: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Sorted eigenvalues of a g-self-adjoint tensor of any signature."""
    L = np.linalg.cholesky(g)
    Li = np.linalg.inv(L)
    gT = g @ T
    M = Li @ (0.5 * (gT + np.swapaxes(gT, -1, -2))) @ np.swapaxes(Li, -1, -2)
    return np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))


def hyperbolic_space(n: int = 3, curvature_value: float = -1.0) -> ChartManifold:
    """Normal-coordinate chart of the space form of constant curvature ``b < 0``."""
    return normal_chart(n, space_form_warping(curvature_value), name=f"H{n}({curvature_value:g})")


def einstein_on_space_form(n: int = 3, b: float = -1.0, step: float = 2e-3) -> NamedConductivity:
    """Einstein tensor of a negatively curved space form: ``-(n-1)(n-2) b / 2`` times the identity."""
    m = hyperbolic_space(n, b)
    E = einstein_field(m, step)
    c = -(n - 1) * (n - 2) * b / 2

    def iso_res(x):
        return np.abs(E(x) - c * np.eye(n)).max(axis=(-2, -1))

    def trace_res(x):
        pack = curvature(m, x, step)
        return np.abs(np.trace(E(x), axis1=-2, axis2=-1) + (n / 2 - 1) * pack.scalar)

    claims = [
        Claim(f"E = {c:g} Id", iso_res, 1e-5),
        Claim("tr E = -(n/2 - 1) R", trace_res, 1e-8),
        _div_claim(m, E, 1e-5, step),
    ]
    return NamedConductivity(f"einstein(H{n}, b={b:g})", m, E, claims, (0.5, 3.0),
                             "Einstein tensor of a hyperbolic space form, computed by finite differences")


# ---------------------------------------------------------------------------
# compressible gas
# ---------------------------------------------------------------------------


def gas_tensor(
    density: Field, velocity: Field, pressure: Field, n: int, name: str = "gas",
    sample_region: tuple = (1.0, 4.0), steady: bool = True,
) -> NamedConductivity:
    """``A = rho u (x) u + p Id`` on Euclidean ``R^n``.

    Raises ``NotPositiveDefinite`` when ``A`` is not positive definite at the
    low-discrepancy sample of ``sample_region``.
    """
    m = euclidean(n)

    def A(x):
        x = np.asarray(x, dtype=float)
        u = np.asarray(velocity(x), dtype=float)
        rho = np.asarray(density(x), dtype=float)
        p = np.asarray(pressure(x), dtype=float)
        return rho[..., None, None] * u[..., :, None] * u[..., None, :] + p[..., None, None] * np.eye(n)

    nc = NamedConductivity(name, m, A, [], sample_region, "steady compressible gas stress tensor")
    pts = nc.samples(256, 7)
    checked_eigenvalues(A(pts), m.g(pts))

    def wrr_res(x):
        u = velocity(x)
        N = m.radial_gradient(x)
        want = density(x) * np.einsum("...i,...i->...", u, N) ** 2 + pressure(x)
        return _rel(_radial_pairing(A, m)(x), want)

    def trace_res(x):
        u = velocity(x)
        want = density(x) * np.einsum("...i,...i->...", u, u) + n * pressure(x)
        return _rel(np.trace(A(x), axis1=-2, axis2=-1), want)

    nc.claims = [
        Claim("<A grad r, grad r> = rho <u, grad r>^2 + p", wrr_res, 1e-12),
        Claim("tr A = rho |u|^2 + n p", trace_res, 1e-12),
    ]
    if steady:
        nc.claims.append(_div_claim(m, A, 1e-8))
    return nc


def cos2_flow_angle(velocity: Field, x) -> np.ndarray:
    """Squared cosine of the angle between the velocity and the radial direction."""
    x = np.asarray(x, dtype=float)
    u = velocity(x)
    N = x / np.linalg.norm(x, axis=-1, keepdims=True)
    return np.einsum("...i,...i->...", u, N) ** 2 / np.einsum("...i,...i->...", u, u)


def rotating_gas(omega: float = 1.0) -> NamedConductivity:
    """Rigid rotation about the third axis in ``R^3`` with the matching pressure.

    ``u = omega (-y, x, 0)``, unit density and ``p = 1 + omega^2 (x^2 + y^2) / 2``
    solve the steady Euler equations; the flow is orthogonal to ``grad r``.
    """

    def vel(x):
        return omega * np.stack([-x[..., 1], x[..., 0], np.zeros_like(x[..., 0])], axis=-1)

    return gas_tensor(
        lambda x: np.ones(x.shape[:-1]),
        vel,
        lambda x: 1.0 + 0.5 * omega**2 * (x[..., 0] ** 2 + x[..., 1] ** 2),
        3,
        name=f"rotating_gas(omega={omega:g})",
    )


def source_gas() -> NamedConductivity:
    """Planar point source ``u = x / |x|^2`` with unit density and ``p = 1 - 1/(2 r^2)``.

    The flow is irrotational and divergence-free away from the origin, the
    pressure follows from Bernoulli's law and stays positive for ``r > 1/sqrt 2``.
    The velocity is radial, so the squared cosine of the flow angle is 1.
    """

    def vel(x):
        return x / np.sum(x * x, axis=-1, keepdims=True)

    return gas_tensor(
        lambda x: np.ones(x.shape[:-1]),
        vel,
        lambda x: 1.0 - 0.5 / np.sum(x * x, axis=-1),
        2,
        name="source_gas",
    )


# ---------------------------------------------------------------------------
# equivalent metric
# ---------------------------------------------------------------------------


def equivalent_metric(
    m: ChartManifold, W: Field, f: Optional[Callable] = None, h: Optional[Callable] = None
) -> ChartManifold:
    """Metric ``G = F g W^-1`` whose Riemannian type matches the W-type.

    ``F = e^h`` in dimension 2 and ``F = f (det W)^(1/(n-2))`` above; ``f`` and
    ``h`` default to 1 and 0.  The new chart has no pole.
    """
    n = m.dim
    if n < 2:
        raise DimensionTooLow("equivalent metrics need dimension at least 2")

    def factor(x):
        if n == 2:
            return np.exp(h(x)) if h is not None else np.ones(x.shape[:-1])
        fx = f(x) if f is not None else np.ones(x.shape[:-1])
        return fx * np.linalg.det(W(x)) ** (1.0 / (n - 2))

    def G(x):
        x = np.asarray(x, dtype=float)
        M = m.g(x) @ np.linalg.inv(W(x))
        M = 0.5 * (M + np.swapaxes(M, -1, -2))
        return factor(x)[..., None, None] * M

    return ChartManifold(n, G, m.bounds, None, f"equivalent({m.name})")


def energy_density_pair(m: ChartManifold, W: Field, G: ChartManifold, F: Callable, x, dphi) -> tuple:
    """Both sides of ``|dphi|_G^2 dV_G = F^((n-2)/2) (det W)^(-1/2) <W grad phi, grad phi> dV_g``."""
    x = np.asarray(x, dtype=float)
    dphi = np.asarray(dphi, dtype=float)
    n = m.dim
    Gx = G.g(x)
    gx = m.g(x)
    lhs = np.einsum("...i,...ij,...j->...", dphi, np.linalg.inv(Gx), dphi) * np.sqrt(np.linalg.det(Gx))
    K = W(x) @ np.linalg.inv(gx)
    rhs = (
        F(x) ** ((n - 2) / 2)
        * np.linalg.det(W(x)) ** -0.5
        * np.einsum("...i,...ij,...j->...", dphi, K, dphi)
        * np.sqrt(np.linalg.det(gx))
    )
    return lhs, rhs


# ---------------------------------------------------------------------------
# divergence-free diagonal families on R^n
# ---------------------------------------------------------------------------


def rn_divfree(f_list: Sequence[Callable], c: float = 1.0, name: str = "rn_divfree") -> NamedConductivity:
    """``diag(f_1(x_n), ..., f_{n-1}(x_n), c)`` on Euclidean ``R^n``."""
    if not c > 0:
        raise NotPositiveDefinite("c must be positive")
    n = len(f_list) + 1
    m = euclidean(n)

    def W(x):
        x = np.asarray(x, dtype=float)
        t = x[..., -1]
        d = [np.broadcast_to(np.asarray(fi(t), dtype=float), t.shape) for fi in f_list]
        d.append(np.full(t.shape, float(c)))
        return np.stack(d, axis=-1)[..., :, None] * np.eye(n)

    def cv_res(x):
        diag = np.diagonal(W(x), axis1=-2, axis2=-1)
        want = diag.std(axis=-1) / diag.mean(axis=-1)
        return np.abs(cv_values(W(x), m.g(x)) - want)

    claims = [_div_claim(m, W, 1e-8), Claim("cv equals sample statistics of the diagonal", cv_res, 1e-12)]
    return NamedConductivity(name, m, W, claims, (0.5, 4.0), "diagonal conductivity depending on the last coordinate")


R6_CV_BOUND = math.sqrt(0.5)


def r6_cv_closed_form(t) -> np.ndarray:
    e = np.exp(np.asarray(t, dtype=float) ** 2)
    return (e - 1) * np.sqrt(5 + 8 * e + 8 * e * e) / (1 + e + 4 * e * e)


def r6_example() -> NamedConductivity:
    """``diag(e^(t^2), e^(-t^2), e^(t^2), e^(t^2), e^(t^2), 1)`` with ``t = x_6``."""
    up = lambda t: np.exp(t * t)
    down = lambda t: np.exp(-t * t)
    nc = rn_divfree([up, down, up, up, up], 1.0, name="r6")

    def cv_closed(x):
        return np.abs(cv_values(nc.field(x), nc.manifold.g(x)) - r6_cv_closed_form(x[..., -1]))

    def cv_bound(x):
        return np.maximum(0.0, cv_values(nc.field(x), nc.manifold.g(x)) - R6_CV_BOUND)

    nc.claims += [Claim("cv closed form", cv_closed, 1e-12), Claim("cv <= sqrt(1/2)", cv_bound, 1e-9)]
    return nc


def r6_equivalent_metric() -> ChartManifold:
    nc = r6_example()
    return equivalent_metric(nc.manifold, nc.field, f=lambda x: np.ones(x.shape[:-1]))


R6_RICCI_AT_ORIGIN = np.array([0.25, -1.75, 0.25, 0.25, 0.25, -0.75])


def r6_metric_closed_form(x) -> np.ndarray:
    t2 = np.asarray(x, dtype=float)[..., 5] ** 2
    expo = np.stack([-t2 / 4, 7 * t2 / 4, -t2 / 4, -t2 / 4, -t2 / 4, 3 * t2 / 4], axis=-1)
    return np.exp(expo)[..., :, None] * np.eye(6)


# ---------------------------------------------------------------------------
# frame conductivities on R^3 minus the z-axis
# ---------------------------------------------------------------------------


def frame_conductivity(frame: Callable, eigenvalues: Callable) -> Field:
    """``sum_i lambda_i E_i (x) theta^i`` for a Euclidean orthonormal frame.

    ``frame(x)`` returns rows ``E_1, E_2, E_3`` with shape ``(..., 3, 3)``;
    ``eigenvalues(x)`` returns ``(..., 3)``.
    """

    def W(x):
        x = np.asarray(x, dtype=float)
        E = frame(x)
        lam = eigenvalues(x)
        return np.einsum("...ki,...k,...kj->...ij", E, lam, E)

    return W


def paraboloid_frame(x) -> np.ndarray:
    """Normal ``E_1``, radial-tangent ``E_2`` and rotational ``E_3`` of the paraboloid family."""
    x = np.asarray(x, dtype=float)
    px, py = x[..., 0], x[..., 1]
    rho = np.hypot(px, py)
    s = np.sqrt(rho * rho + 1)
    zero = np.zeros_like(rho)
    E1 = np.stack([px / s, py / s, -1 / s], axis=-1)
    E2 = np.stack([px / (rho * s), py / (rho * s), rho / s], axis=-1)
    E3 = np.stack([py / rho, -px / rho, zero], axis=-1)
    return np.stack([E1, E2, E3], axis=-2)


def paraboloid_eigenvalues(x) -> np.ndarray:
    """``(1, r^(16/9) e^(9r/8), r^(16/9) e^(9r/8) / (2 (1 + 4 r^2)))`` with ``r = |x|``."""
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    lam2 = r ** (16 / 9) * np.exp(9 * r / 8)
    return np.stack([np.ones_like(r), lam2, lam2 / (2 * (1 + 4 * r * r))], axis=-1)


def paraboloid_conductivity() -> Field:
    """Conductivity that makes the paraboloid ``z = (x^2 + y^2)/2`` hyperbolic.

    The formula is used wherever the frame is defined (off the z-axis).  The
    transition to the identity near the axis is not modelled; checks stay in
    the region ``x^2 + y^2 > 1`` where the formula is the intended one.
    """
    return frame_conductivity(paraboloid_frame, paraboloid_eigenvalues)


def hyperbola_frame(x) -> np.ndarray:
    """Frame adapted to the cylinders ``x^2 - y^2 = sigma``: normal, horizontal tangent, vertical."""
    x = np.asarray(x, dtype=float)
    px, py = x[..., 0], x[..., 1]
    rho = np.hypot(px, py)
    zero = np.zeros_like(rho)
    E1 = np.stack([px / rho, -py / rho, zero], axis=-1)
    E2 = np.stack([py / rho, px / rho, zero], axis=-1)
    E3 = np.stack([zero, zero, np.ones_like(rho)], axis=-1)
    return np.stack([E1, E2, E3], axis=-2)


def hyperbola_eigenvalues(x) -> np.ndarray:
    """``(1, e^(r/2), e^r)`` with ``r = |x|``."""
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    return np.stack([np.ones_like(r), np.exp(r / 2), np.exp(r)], axis=-1)


def hyperbola_conductivity() -> Field:
    """Conductivity that makes each ``x^2 - y^2 = sigma`` (sigma != 0) hyperbolic."""
    return frame_conductivity(hyperbola_frame, hyperbola_eigenvalues)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


def scaled_identity(n: int = 2, c: float = 1.0) -> NamedConductivity:
    m = euclidean(n)
    base = _identity(n)
    return NamedConductivity(f"identity(n={n}, c={c:g})", m, lambda x: c * base(x), [], (1.0, 4.0),
                             "constant multiple of the identity")


def radial_diagonal() -> NamedConductivity:
    """``diag(1, 1 + r^2)`` in polar coordinates of the plane (Cartesian form)."""
    m = euclidean(2)

    def W(x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        r = np.sqrt(r2)
        er = x / r[..., None]
        et = np.stack([-er[..., 1], er[..., 0]], axis=-1)
        return er[..., :, None] * er[..., None, :] + (1 + r2)[..., None, None] * et[..., :, None] * et[..., None, :]

    return NamedConductivity("radial_diagonal", m, W, [], (1.0, 2.0),
                             "radial eigenvalue 1, angular eigenvalue 1 + r^2")


def _frame_example(name, frame, eigenvalues, region, description) -> NamedConductivity:
    m = euclidean(3)
    W = frame_conductivity(frame, eigenvalues)

    def spectrum(x):
        return np.abs(np.sort(np.linalg.eigvalsh(W(x)), axis=-1) - np.sort(eigenvalues(x), axis=-1)) / np.maximum(
            1.0, np.abs(eigenvalues(x)).max(axis=-1, keepdims=True))

    def orthonormal(x):
        E = frame(x)
        return np.abs(E @ np.swapaxes(E, -1, -2) - np.eye(3)).max(axis=(-2, -1))

    claims = [Claim("frame is orthonormal", orthonormal, 1e-12), Claim("eigenvalues", spectrum, 1e-12)]
    return NamedConductivity(name, m, W, claims, region, description)


def paraboloid_example() -> NamedConductivity:
    return _frame_example("paraboloid_frame", paraboloid_frame, paraboloid_eigenvalues, (1.5, 6.0),
                          "frame conductivity adapted to the paraboloid z = (x^2 + y^2)/2")


def hyperbola_example() -> NamedConductivity:
    return _frame_example("hyperbola_frame", hyperbola_frame, hyperbola_eigenvalues, (1.5, 6.0),
                          "frame conductivity adapted to the cylinders x^2 - y^2 = sigma")


REGISTRY: dict = {
    "identity": scaled_identity,
    "w_lambda_alpha": w_lambda_alpha,
    "r6": r6_example,
    "rotating_gas": rotating_gas,
    "source_gas": source_gas,
    "einstein_hyperbolic": einstein_on_space_form,
    "radial_diagonal": radial_diagonal,
    "paraboloid_frame": paraboloid_example,
    "hyperbola_frame": hyperbola_example,
}


def build(name: str, **params) -> NamedConductivity:
    if name not in REGISTRY:
        raise KeyError(f"unknown conductivity {name!r}; known: {sorted(REGISTRY)}")
    return REGISTRY[name](**params)
