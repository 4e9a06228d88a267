"""Chart-based tensor calculus by finite differences.

All field callbacks are batched: a point array of shape ``(..., n)`` maps to
``(...)`` for scalars, ``(..., n)`` for vectors and ``(..., n, n)`` for
matrices.  Mixed tensors are stored row-up, ``W[..., k, i] = W^k_i``.

Derivatives use the 4th-order central stencil with per-axis step
``step * max(1, |x_k|)``.  Curvature differentiates Christoffel symbols that
are themselves differenced, so two stencil levels must fit in the chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import ndtri

from .errors import NotPolarAdapted, SingularMetric, StencilOutOfDomain
from .model_space import RadialProfile, linear_warping
from .tensor_core import low_discrepancy

DEFAULT_STEP = 1e-3
POLAR_TOL = 1e-8

Field = Callable[[np.ndarray], np.ndarray]

_OFFSETS = np.array([2.0, 1.0, -1.0, -2.0])


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolarPole:
    """The chart is polar-adapted: ``x[0]`` is the distance to the pole.

    ``angle_bounds`` are finite sampling ranges for the remaining coordinates.
    """

    angle_bounds: tuple = ()


@dataclass(frozen=True)
class EuclideanPole:
    """Cartesian normal coordinates about ``origin``: the distance is the Euclidean norm.

    This holds for flat charts and for exponential-map charts, where the
    metric fixes the radial direction (``g N = N``).
    """

    origin: tuple = ()


Pole = Union[PolarPole, EuclideanPole, None]


@dataclass(frozen=True)
class ChartManifold:
    dim: int
    metric: Field
    bounds: tuple = ()
    pole: Pole = None
    name: str = ""

    def __post_init__(self):
        if not self.bounds:
            object.__setattr__(self, "bounds", tuple((-math.inf, math.inf) for _ in range(self.dim)))
        if len(self.bounds) != self.dim:
            raise ValueError("bounds must have one (lo, hi) pair per coordinate")

    # metric -------------------------------------------------------------
    def g(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.metric(x), dtype=float)

    def g_inv(self, x) -> np.ndarray:
        return inverse_metric(self.g(x))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        b = np.asarray(self.bounds, dtype=float)
        return np.all((x >= b[:, 0]) & (x <= b[:, 1]), axis=-1)

    # radial structure ----------------------------------------------------
    def _need_pole(self):
        if self.pole is None:
            raise NotPolarAdapted(f"chart {self.name or '<unnamed>'} has no pole")

    def radius(self, x) -> np.ndarray:
        self._need_pole()
        x = np.asarray(x, dtype=float)
        if isinstance(self.pole, PolarPole):
            return x[..., 0]
        return np.linalg.norm(x - np.asarray(self.pole.origin, dtype=float), axis=-1)

    def radial_gradient(self, x) -> np.ndarray:
        """Contravariant components of the gradient of the distance to the pole."""
        self._need_pole()
        x = np.asarray(x, dtype=float)
        if isinstance(self.pole, PolarPole):
            e = np.zeros_like(x)
            e[..., 0] = 1.0
            return e
        d = x - np.asarray(self.pole.origin, dtype=float)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def check_radial(self, x, step: float = DEFAULT_STEP, tol: float = POLAR_TOL) -> None:
        """Runtime check that the radial description is valid at ``x``."""
        self._need_pole()
        x = np.asarray(x, dtype=float)
        r = self.radius(x)
        if np.any(r < 10 * step):
            raise StencilOutOfDomain(f"radius {float(np.min(r)):.3g} below 10*step; refusing near the pole")
        g = self.g(x)
        if isinstance(self.pole, PolarPole):
            bad = np.maximum(np.abs(g[..., 0, 0] - 1.0), np.abs(g[..., 0, 1:]).max(axis=-1, initial=0.0))
            if np.any(bad > tol):
                raise NotPolarAdapted(f"g_rr = 1, g_ra = 0 violated by {float(np.max(bad)):.3e}")
        else:
            N = self.radial_gradient(x)
            bad = np.abs(np.einsum("...ij,...j->...i", g, N) - N).max(axis=-1)
            if np.any(bad > tol):
                raise NotPolarAdapted(f"Euclidean pole needs normal coordinates; |g N - N| = {float(np.max(bad)):.3e}")

    def sample_shell(self, rho: float, horizon: float, budget: int, seed: int = 0) -> np.ndarray:
        """Low-discrepancy points with ``rho <= r <= horizon`` (log-uniform in r)."""
        self._need_pole()
        if not (0 < rho < horizon):
            raise ValueError("need 0 < rho < horizon")
        n = self.dim
        if isinstance(self.pole, PolarPole):
            ab = np.asarray(self.pole.angle_bounds, dtype=float).reshape(-1, 2)
            if len(ab) != n - 1 or not np.all(np.isfinite(ab)):
                raise ValueError("polar pole needs finite angle bounds for sampling")
            u = low_discrepancy(n, budget, seed)
            r = rho * (horizon / rho) ** u[:, 0]
            ang = ab[:, 0] + u[:, 1:] * (ab[:, 1] - ab[:, 0])
            return np.column_stack([r, ang])
        u = low_discrepancy(n + 1, budget, seed)
        r = rho * (horizon / rho) ** u[:, 0]
        d = ndtri(np.clip(u[:, 1:], 1e-12, 1 - 1e-12))
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        return np.asarray(self.pole.origin, dtype=float) + r[:, None] * d


def inverse_metric(g: np.ndarray) -> np.ndarray:
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise SingularMetric("metric is not positive definite") from exc
    return np.linalg.inv(g)


def euclidean(n: int, origin: Optional[Sequence[float]] = None) -> ChartManifold:
    eye = np.eye(n)

    def metric(x):
        x = np.asarray(x)
        return np.broadcast_to(eye, x.shape[:-1] + (n, n)).copy()

    o = tuple(float(v) for v in (origin if origin is not None else np.zeros(n)))
    return ChartManifold(n, metric, pole=EuclideanPole(o), name=f"euclidean{n}")


def normal_chart(n: int, w: Optional[RadialProfile] = None, name: str = "") -> ChartManifold:
    """Model metric ``dr^2 + w(r)^2 g_sphere`` in Cartesian normal coordinates.

    ``g = N N^T + (w(r)/r)^2 (I - N N^T)`` with ``N = x/|x|``; free of the
    angular coordinate singularities of :func:`polar_chart`.
    """
    w = w or linear_warping()
    eye = np.eye(n)
    top = w.domain[1]

    def metric(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        N = x / safe[..., None]
        ratio = np.where(r > 0, w(safe) / safe, w.d1(np.zeros_like(r)))
        P = N[..., :, None] * N[..., None, :]
        return P + (ratio**2)[..., None, None] * (eye - P)

    bound = top / math.sqrt(n) if math.isfinite(top) else math.inf
    bounds = tuple((-bound, bound) for _ in range(n))
    return ChartManifold(n, metric, bounds, EuclideanPole(tuple([0.0] * n)), name or f"normal{n}[{w.name}]")


def sphere_angle_factors(theta: np.ndarray) -> np.ndarray:
    """Diagonal of the round metric on S^(n-1) in hyperspherical angles."""
    k = theta.shape[-1]
    out = np.ones(theta.shape)
    s2 = np.sin(theta) ** 2
    for i in range(1, k):
        out[..., i] = out[..., i - 1] * s2[..., i - 1]
    return out


def polar_chart(n: int, w: Optional[RadialProfile] = None, r_max: Optional[float] = None, name: str = "") -> ChartManifold:
    """Model chart ``dr^2 + w(r)^2 g_sphere`` in hyperspherical angles."""
    w = w or linear_warping()
    top = r_max if r_max is not None else w.domain[1]

    def metric(x):
        x = np.asarray(x, dtype=float)
        r = x[..., 0]
        diag = np.empty(x.shape)
        diag[..., 0] = 1.0
        if n > 1:
            diag[..., 1:] = (w(r) ** 2)[..., None] * sphere_angle_factors(x[..., 1:])
        return diag[..., :, None] * np.eye(n)

    bounds = [(0.0, top)]
    angle = []
    for i in range(n - 1):
        if i < n - 2:
            bounds.append((0.0, math.pi))
            angle.append((0.15, math.pi - 0.15))
        else:
            bounds.append((-math.inf, math.inf))
            angle.append((0.0, 2 * math.pi))
    return ChartManifold(n, metric, tuple(bounds), PolarPole(tuple(angle)), name or f"polar{n}[{w.name}]")


def polar_to_cartesian(y: np.ndarray) -> np.ndarray:
    """Hyperspherical ``(r, theta_1, ..., theta_{n-1})`` to Cartesian; complex-safe."""
    r = y[..., 0]
    th = y[..., 1:]
    n = y.shape[-1]
    out = []
    prod = r
    for i in range(n - 1):
        out.append(prod * np.cos(th[..., i]))
        prod = prod * np.sin(th[..., i])
    out.append(prod)
    return np.stack(out, axis=-1)


def polar_jacobian(y: np.ndarray) -> np.ndarray:
    """``d x / d y`` by complex-step differentiation (exact to rounding)."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    h = 1e-30
    cols = []
    for k in range(n):
        yc = y.astype(complex)
        yc[..., k] += 1j * h
        cols.append(polar_to_cartesian(yc).imag / h)
    return np.stack(cols, axis=-1)


def pullback_to_polar(W_cart: Field) -> Field:
    """Express a Cartesian mixed tensor field on Euclidean space in polar coordinates."""

    def W(y):
        y = np.asarray(y, dtype=float)
        J = polar_jacobian(y)
        return np.linalg.solve(J, W_cart(polar_to_cartesian(y)) @ J)

    return W


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def axis_steps(x: np.ndarray, step: float) -> np.ndarray:
    return step * np.maximum(1.0, np.abs(x))


def partials(f: Field, x, step: float = DEFAULT_STEP, bounds=None) -> np.ndarray:
    """All first partials of a batched field: ``out[..., k, *] = d_k f``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    batch = x.shape[:-1]
    h = axis_steps(x, step)  # (..., n)
    eye = np.eye(n)
    # stencil points: (4, n, ..., n)
    disp = _OFFSETS[:, None, None] * eye[None, :, :]  # (4, n, n)
    disp = disp.reshape((4, n) + (1,) * len(batch) + (n,))
    hk = np.moveaxis(h, -1, 0)  # (n, ...)
    pts = x[None, None] + disp * hk[None, ..., None]
    if bounds is not None:
        b = np.asarray(bounds, dtype=float)
        if np.any(pts < b[:, 0]) or np.any(pts > b[:, 1]):
            raise StencilOutOfDomain("finite-difference stencil leaves the chart box")
    vals = np.asarray(f(pts), dtype=float)
    extra = vals.ndim - 2 - len(batch)
    # paired differences: a field that does not vary along an axis gets an exactly zero partial
    d = (8.0 * (vals[1] - vals[2]) - (vals[0] - vals[3])) / 12.0  # (n, ..., *fs)
    d = d / hk.reshape(hk.shape + (1,) * extra)
    return np.moveaxis(d, 0, len(batch))


def _chart_partials(m: ChartManifold, f: Field, x, step: float) -> np.ndarray:
    return partials(f, x, step, m.bounds)


# ---------------------------------------------------------------------------
# connection and divergence
# ---------------------------------------------------------------------------


def christoffel(m: ChartManifold, x, step: float = DEFAULT_STEP) -> np.ndarray:
    """``Gamma[..., k, i, j]``, symmetric in ``(i, j)`` by construction."""
    x = np.asarray(x, dtype=float)
    dg = _chart_partials(m, m.metric, x, step)  # (..., l, i, j) = d_l g_ij
    gi = m.g_inv(x)
    # lowered symbols [l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    low = 0.5 * (np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg)
    G = np.einsum("...kl,...lij->...kij", gi, low)
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def covariant_derivative(m: ChartManifold, W: Field, x, step: float = DEFAULT_STEP) -> np.ndarray:
    """``out[..., j, k, i] = W^k_{i;j}``."""
    x = np.asarray(x, dtype=float)
    dW = _chart_partials(m, W, x, step)  # (..., j, k, i)
    G = christoffel(m, x, step)  # (..., k, l, j)
    Wx = np.asarray(W(x), dtype=float)
    t1 = np.einsum("...klj,...li->...jki", G, Wx)
    t2 = np.einsum("...lij,...kl->...jki", G, Wx)
    return dW + t1 - t2


def divergence_w(m: ChartManifold, W: Field, x, step: float = DEFAULT_STEP) -> np.ndarray:
    """``(div W)^k = g^{ij} W^k_{i;j}``."""
    x = np.asarray(x, dtype=float)
    nab = covariant_derivative(m, W, x, step)
    return np.einsum("...ij,...jki->...k", m.g_inv(x), nab)


def gradient(m: ChartManifold, u: Field, x, step: float = DEFAULT_STEP) -> np.ndarray:
    """Contravariant gradient ``g^{ij} d_j u``."""
    x = np.asarray(x, dtype=float)
    du = _chart_partials(m, u, x, step)
    return np.einsum("...ij,...j->...i", m.g_inv(x), du)


def hessian(m: ChartManifold, u: Field, x, step: float = DEFAULT_STEP) -> np.ndarray:
    """Covariant Hessian ``d_i d_j u - Gamma^k_ij d_k u``."""
    x = np.asarray(x, dtype=float)
    du = _chart_partials(m, u, x, step)
    ddu = _chart_partials(m, lambda y: _chart_partials(m, u, y, step), x, step)
    H = ddu - np.einsum("...kij,...k->...ij", christoffel(m, x, step), du)
    return 0.5 * (H + np.swapaxes(H, -1, -2))


def laplace_w(m: ChartManifold, W: Field, u: Field, x, step: float = DEFAULT_STEP) -> np.ndarray:
    """``tr(Hess_W u) + <grad u, div W>`` with ``Hess_W u(X, Y) = <nabla_X grad u, W Y>``."""
    x = np.asarray(x, dtype=float)
    gi = m.g_inv(x)
    Wx = np.asarray(W(x), dtype=float)
    Wup = Wx @ gi  # W^{kj}
    tr = np.einsum("...kj,...kj->...", hessian(m, u, x, step), Wup)
    du = _chart_partials(m, u, x, step)
    return tr + np.einsum("...k,...k->...", du, divergence_w(m, W, x, step))


def laplace_w_direct(m: ChartManifold, W: Field, u: Field, x, step: float = DEFAULT_STEP) -> np.ndarray:
    """``div(W grad u)`` as ``|g|^-1/2 d_j (|g|^1/2 (W grad u)^j)``."""

    def flux(y):
        g = m.g(y)
        V = np.einsum("...ij,...j->...i", np.asarray(W(y), dtype=float), gradient(m, u, y, step))
        return np.sqrt(np.linalg.det(g))[..., None] * V

    x = np.asarray(x, dtype=float)
    d = _chart_partials(m, flux, x, step)  # (..., j, i)
    return np.einsum("...jj->...", d) / np.sqrt(np.linalg.det(m.g(x)))


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvaturePack:
    riemann: np.ndarray  # R^a_{bcd}
    ricci: np.ndarray  # R_{bd}
    scalar: np.ndarray
    metric: np.ndarray

    @property
    def riemann_lowered(self) -> np.ndarray:
        return np.einsum("...ae,...ebcd->...abcd", self.metric, self.riemann)

    @property
    def ricci_mixed(self) -> np.ndarray:
        return inverse_metric(self.metric) @ self.ricci

    def sectional(self, u, v) -> np.ndarray:
        """Sectional curvature of the plane spanned by ``u`` and ``v``."""
        g = self.metric
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        num = np.einsum("...abcd,...a,...b,...c,...d->...", self.riemann_lowered, u, v, u, v)
        uu = np.einsum("...i,...ij,...j->...", u, g, u)
        vv = np.einsum("...i,...ij,...j->...", v, g, v)
        uv = np.einsum("...i,...ij,...j->...", u, g, v)
        return num / (uu * vv - uv * uv)


def riemann(m: ChartManifold, x, step: float = DEFAULT_STEP) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    G = christoffel(m, x, step)  # [a, d, b]
    dG = _chart_partials(m, lambda y: christoffel(m, y, step), x, step)  # [c, a, d, b]
    R = (
        np.einsum("...cadb->...abcd", dG)
        - np.einsum("...dacb->...abcd", dG)
        + np.einsum("...ace,...edb->...abcd", G, G)
        - np.einsum("...ade,...ecb->...abcd", G, G)
    )
    return R


def curvature(m: ChartManifold, x, step: float = DEFAULT_STEP) -> CurvaturePack:
    x = np.asarray(x, dtype=float)
    R = riemann(m, x, step)
    ric = np.einsum("...abad->...bd", R)
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    g = m.g(x)
    scal = np.einsum("...bd,...bd->...", inverse_metric(g), ric)
    return CurvaturePack(R, ric, scal, g)


def orthonormal_complement(g: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Columns: a g-orthonormal basis of the g-orthogonal complement of ``v``."""
    n = g.shape[-1]
    L = np.linalg.cholesky(g)
    y = np.einsum("...ji,...j->...i", L, v)  # L^T v
    y = y / np.linalg.norm(y, axis=-1, keepdims=True)
    # Householder reflection sending e_0 to y; its other columns span y-perp
    e0 = np.zeros_like(y)
    e0[..., 0] = 1.0
    s = np.where(y[..., :1] >= 0, 1.0, -1.0)
    u = y + s * e0
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    Hh = np.eye(n) - 2 * u[..., :, None] * u[..., None, :]
    Q = Hh[..., :, 1:]
    return np.linalg.solve(np.swapaxes(L, -1, -2), Q)


def radial_sectional_range(m: ChartManifold, x, step: float = DEFAULT_STEP) -> tuple[np.ndarray, np.ndarray]:
    """Min and max sectional curvature over planes containing the radial direction."""
    x = np.asarray(x, dtype=float)
    pack = curvature(m, x, step)
    N = m.radial_gradient(x)
    Rl = pack.riemann_lowered
    Q = np.einsum("...abcd,...b,...d->...ac", Rl, N, N)
    Q = 0.5 * (Q + np.swapaxes(Q, -1, -2))
    E = orthonormal_complement(pack.metric, N)
    K = np.swapaxes(E, -1, -2) @ Q @ E
    ev = np.linalg.eigvalsh(K)
    return ev[..., 0], ev[..., -1]


def coordinate_plane_sectionals(m: ChartManifold, x, step: float = DEFAULT_STEP) -> np.ndarray:
    """Sectional curvatures of all coordinate planes, ``(..., n(n-1)/2)``."""
    x = np.asarray(x, dtype=float)
    pack = curvature(m, x, step)
    n = m.dim
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            u = np.zeros(x.shape)
            v = np.zeros(x.shape)
            u[..., i] = 1.0
            v[..., j] = 1.0
            out.append(pack.sectional(u, v))
    return np.stack(out, axis=-1)


# ---------------------------------------------------------------------------
# radial quantities
# ---------------------------------------------------------------------------


def radial_quantities(m: ChartManifold, W: Field, x, step: float = DEFAULT_STEP) -> dict:
    """``r``, ``<W grad r, grad r>``, ``tr W`` and ``<div W, grad r>`` at ``x``."""
    x = np.asarray(x, dtype=float)
    m.check_radial(x, step)
    g = m.g(x)
    N = m.radial_gradient(x)
    Wx = np.asarray(W(x), dtype=float)
    WN = np.einsum("...ij,...j->...i", Wx, N)
    return {
        "r": m.radius(x),
        "wrr": np.einsum("...i,...ij,...j->...", WN, g, N),
        "trace": np.trace(Wx, axis1=-2, axis2=-1),
        "div_r": np.einsum("...i,...ij,...j->...", divergence_w(m, W, x, step), g, N),
    }


def hessian_radial_check(
    m: ChartManifold, W: Field, F: RadialProfile, w: RadialProfile, x, step: float = DEFAULT_STEP
) -> dict:
    """Both sides of the W-Laplacian comparison for a radial function ``F(r)``.

    Returns ``lhs = Delta_W (F o r)`` and
    ``rhs = (F'' - F' w'/w) <W grad r, grad r> + tr(W) F' w'/w + F' <div W, grad r>``.
    """
    q = radial_quantities(m, W, x, step)
    r = q["r"]
    lhs = laplace_w(m, W, lambda y: F(m.radius(y)), x, step)
    eta = w.d1(r) / w(r)
    Fp = F.d1(r)
    rhs = (F.d2(r) - Fp * eta) * q["wrr"] + q["trace"] * Fp * eta + Fp * q["div_r"]
    return {"lhs": lhs, "rhs": rhs, "r": r}


def radial_hessian_defect(m: ChartManifold, x, step: float = DEFAULT_STEP) -> np.ndarray:
    """``max_j |Hess r(grad r, e_j)|``; zero for a true distance function."""
    x = np.asarray(x, dtype=float)
    m.check_radial(x, step)
    H = hessian(m, m.radius, x, step)
    N = m.radial_gradient(x)
    return np.abs(np.einsum("...ij,...i->...j", H, N)).max(axis=-1)


def random_analytic_metric(n: int, seed: int = 0, amplitude: float = 0.2) -> ChartManifold:
    """Smooth positive-definite test metric ``I + A(x) A(x)^T + amplitude S(x)``.

    ``A`` and ``S`` have trigonometric entries with random frequencies and
    phases; ``S`` is symmetric with entries bounded by 1, so the metric stays
    positive definite for ``amplitude < 1/n``.
    """
    rng = np.random.default_rng(seed)
    fa = rng.normal(size=(n, n, n)) * 0.5
    pa = rng.uniform(0, 2 * math.pi, size=(n, n))
    fs = rng.normal(size=(n, n, n)) * 0.5
    ps = rng.uniform(0, 2 * math.pi, size=(n, n))
    amp = min(amplitude, 0.9 / n)

    def metric(x):
        x = np.asarray(x, dtype=float)
        A = 0.3 * np.sin(np.einsum("...k,ijk->...ij", x, fa) + pa)
        S = np.cos(np.einsum("...k,ijk->...ij", x, fs) + ps)
        S = 0.5 * (S + np.swapaxes(S, -1, -2))
        return np.eye(n) + A @ np.swapaxes(A, -1, -2) + amp * S

    return ChartManifold(n, metric, name=f"random{n}[seed={seed}]")
