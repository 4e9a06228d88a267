"""W-capacity of two-dimensional annuli by bilinear finite elements.

The annulus ``rho <= r <= R`` is meshed in polar coordinates ``(r, t)`` with
``t`` periodic.  The discrete potential minimizes

    E(u) = integral <W grad u, grad u> dV = integral du . K du  sqrt(det g) dr dt

with ``K = W g^-1`` (a symmetric matrix because ``W`` is self-adjoint), over
piecewise-bilinear functions equal to 1 on the inner ring and 0 on the outer
one.  Integrals use 2x2 Gauss points per cell.  Because the discrete energy
of the minimizer equals its own reaction on the inner ring, a second,
independent estimate is taken from a one-sided radial derivative of ``u``
at ``r = rho``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, cg

from .errors import NotPolarAdapted, SolverDiverged
from .geometry import ChartManifold, EuclideanPole, PolarPole
from .parallel import ordered_map
from .tensor_core import checked_eigenvalues

Field = Callable[[np.ndarray], np.ndarray]

CG_RTOL = 1e-10
MIN_RESOLUTION = 8
#: tolerated overshoot of the discrete solution outside [0, 1]
RANGE_SLACK = 1e-12
# relative rounding allowed in the eigenvalue sandwich (equality cases are common)
RATIO_ROUNDING = 1e-10

_GAUSS = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])


# ---------------------------------------------------------------------------
# polar description of the chart
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolarFields:
    """Metric and conductivity of a 2D chart written in ``(r, t)`` coordinates."""

    metric: Field
    conductivity: Field
    period: float


def polar_fields(m: ChartManifold, W: Field) -> PolarFields:
    if m.dim != 2:
        raise ValueError("the grid solver handles two-dimensional charts only")
    if isinstance(m.pole, PolarPole):
        ab = np.asarray(m.pole.angle_bounds, dtype=float).reshape(-1, 2)
        period = float(ab[0, 1] - ab[0, 0])

        def metric(y):
            m.check_radial(y)
            return m.g(y)

        return PolarFields(metric, lambda y: np.asarray(W(y), dtype=float), period)
    if isinstance(m.pole, EuclideanPole):
        o = np.asarray(m.pole.origin, dtype=float)

        def to_cart(y):
            r, t = y[..., 0], y[..., 1]
            return o + np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)

        def jac(y):
            r, t = y[..., 0], y[..., 1]
            c, s = np.cos(t), np.sin(t)
            J = np.empty(y.shape[:-1] + (2, 2))
            J[..., 0, 0], J[..., 0, 1] = c, -r * s
            J[..., 1, 0], J[..., 1, 1] = s, r * c
            return J

        def metric(y):
            x = to_cart(y)
            m.check_radial(x)
            J = jac(y)
            out = np.swapaxes(J, -1, -2) @ m.g(x) @ J
            return 0.5 * (out + np.swapaxes(out, -1, -2))

        def cond(y):
            J = jac(y)
            return np.linalg.solve(J, np.asarray(W(to_cart(y)), dtype=float) @ J)

        return PolarFields(metric, cond, 2 * math.pi)
    raise NotPolarAdapted("the annulus solver needs a chart with a pole")


# ---------------------------------------------------------------------------
# assembly and solve
# ---------------------------------------------------------------------------


@dataclass
class AnnulusGrid:
    """Nodal solution on the polar grid; ``u[i, j]`` sits at ``(r[i], t[j])``."""

    rho: float
    R: float
    r: np.ndarray
    t: np.ndarray
    u: np.ndarray
    energy: float
    flux: float
    iterations: int
    residual: float

    @property
    def n_r(self) -> int:
        return len(self.r) - 1

    @property
    def n_theta(self) -> int:
        return len(self.t)

    def range_violation(self) -> float:
        """How far ``u`` leaves ``[0, 1]`` (0 when the maximum principle holds)."""
        return float(max(0.0, -self.u.min(), self.u.max() - 1.0))

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["r", "theta", "u"])
            for i, ri in enumerate(self.r):
                for j, tj in enumerate(self.t):
                    wr.writerow([repr(float(ri)), repr(float(tj)), repr(float(self.u[i, j]))])


def _quadrature_points(r: np.ndarray, t: np.ndarray, period: float):
    dr = np.diff(r)
    dt = period / len(t)
    gr = r[:-1, None] + dr[:, None] * _GAUSS[None, :]  # (n_r, 2)
    gt = t[:, None] + dt * _GAUSS[None, :]  # (n_t, 2)
    # (n_r, n_t, 2 [xi], 2 [eta], 2 coords)
    R_, T_ = np.broadcast_arrays(gr[:, None, :, None], gt[None, :, None, :])
    return np.stack([R_, T_], axis=-1), dr, dt


def _shape_gradients():
    """``dN[a, b, k, c]``: derivative ``c`` (xi, eta) of shape ``k`` at Gauss point ``(a, b)``."""
    out = np.empty((2, 2, 4, 2))
    for a, xi in enumerate(_GAUSS):
        for b, eta in enumerate(_GAUSS):
            out[a, b, :, 0] = [-(1 - eta), (1 - eta), eta, -eta]
            out[a, b, :, 1] = [-(1 - xi), -xi, xi, (1 - xi)]
    return out


def _element_data(fields: PolarFields, r: np.ndarray, t: np.ndarray):
    pts, dr, dt = _quadrature_points(r, t, fields.period)
    g = fields.metric(pts)
    Wq = fields.conductivity(pts)
    checked_eigenvalues(Wq, g)
    K = Wq @ np.linalg.inv(g)
    K = 0.5 * (K + np.swapaxes(K, -1, -2))
    vol = np.sqrt(np.linalg.det(g))
    return pts, g, Wq, K, vol, dr, dt


def _stiffness(fields: PolarFields, r: np.ndarray, t: np.ndarray) -> tuple[sparse.csr_matrix, tuple]:
    n_r, n_t = len(r) - 1, len(t)
    pts, g, Wq, K, vol, dr, dt = _element_data(fields, r, t)
    dN = _shape_gradients()  # (2, 2, 4, 2)
    # physical partials: d/dr = d/dxi / dr, d/dt = d/deta / dt
    scale = np.stack([1.0 / dr[:, None] * np.ones((1, n_t)), np.full((n_r, n_t), 1.0 / dt)], axis=-1)
    B = dN[None, None] * scale[:, :, None, None, None, :]  # (n_r, n_t, 2, 2, 4, 2)
    wq = 0.25 * dr[:, None, None, None] * dt * vol  # Gauss weights are 1/4 on the unit cell
    Ke = np.einsum("ijab,ijabkc,ijabcd,ijabld->ijkl", wq, B, K, B)
    i = np.arange(n_r)[:, None]
    j = np.arange(n_t)[None, :]
    jp = (j + 1) % n_t
    nodes = np.stack(
        np.broadcast_arrays(i * n_t + j, (i + 1) * n_t + j, (i + 1) * n_t + jp, i * n_t + jp), axis=-1
    )  # (n_r, n_t, 4)
    rows = np.broadcast_to(nodes[..., :, None], Ke.shape).ravel()
    cols = np.broadcast_to(nodes[..., None, :], Ke.shape).ravel()
    N = (n_r + 1) * n_t
    A = sparse.coo_matrix((Ke.ravel(), (rows, cols)), shape=(N, N)).tocsr()
    A = 0.5 * (A + A.T)
    return A.tocsr(), (K, g)


def _radial_grid(rho: float, R: float, n_r: int, n_theta: int, period: float):
    r = np.linspace(rho, R, n_r + 1)
    t = np.arange(n_theta) * (period / n_theta)
    return r, t


def solve_dirichlet(
    m: ChartManifold, W: Field, rho: float, R: float, n_r: int, n_theta: int
) -> AnnulusGrid:
    """Discrete W-harmonic potential with ``u = 1`` at ``r = rho`` and ``u = 0`` at ``r = R``."""
    return _solve_fields(polar_fields(m, W), rho, R, n_r, n_theta)


def _solve_fields(fields: PolarFields, rho: float, R: float, n_r: int, n_theta: int) -> AnnulusGrid:
    if not (0 < rho < R):
        raise ValueError("need 0 < rho < R")
    if n_r < MIN_RESOLUTION or n_theta < MIN_RESOLUTION:
        raise ValueError(f"grid resolutions must be at least {MIN_RESOLUTION}")
    r, t = _radial_grid(rho, R, n_r, n_theta, fields.period)
    A, _ = _stiffness(fields, r, t)
    n_t = n_theta
    N = (n_r + 1) * n_t
    interior = np.arange(n_t, n_r * n_t)
    ub = np.zeros(N)
    ub[:n_t] = 1.0
    A_II = A[interior][:, interior]
    b = -(A[interior] @ ub)
    diag = A_II.diagonal()
    if np.any(diag <= 0):
        raise SolverDiverged("stiffness matrix has a non-positive diagonal")
    precond = LinearOperator(A_II.shape, matvec=lambda v: v / diag)
    count = [0]

    def _tick(_):
        count[0] += 1

    x0 = np.repeat(1.0 - (r[1:-1] - rho) / (R - rho), n_t)
    sol, info = cg(A_II, b, x0=x0, rtol=CG_RTOL, atol=0.0, maxiter=20 * len(b) + 1000, M=precond, callback=_tick)
    if info != 0 or not np.all(np.isfinite(sol)):
        raise SolverDiverged(f"conjugate gradient stopped with status {info} after {count[0]} iterations")
    res = float(np.linalg.norm(A_II @ sol - b) / max(np.linalg.norm(b), 1e-300))
    u = ub.copy()
    u[interior] = sol
    energy = float(u @ (A @ u))
    if not (energy >= 0 and math.isfinite(energy)):
        raise SolverDiverged(f"discrete energy {energy} is not a nonnegative number")
    U = u.reshape(n_r + 1, n_t)
    flux = _inner_flux(fields, r, t, U)
    return AnnulusGrid(float(rho), float(R), r, t, U, energy, flux, count[0], res)


def _inner_flux(fields: PolarFields, r: np.ndarray, t: np.ndarray, U: np.ndarray) -> float:
    """``-integral_{r=rho} (K du)^r sqrt(det g) dt`` with a second-order one-sided ``du/dr``."""
    h = r[1] - r[0]
    du_r = (-3 * U[0] + 4 * U[1] - U[2]) / (2 * h)
    dt = fields.period / len(t)
    du_t = (np.roll(U[0], -1) - np.roll(U[0], 1)) / (2 * dt)  # identically 0 on the ring
    y = np.stack([np.full_like(t, r[0]), t], axis=-1)
    g = fields.metric(y)
    K = np.asarray(fields.conductivity(y), dtype=float) @ np.linalg.inv(g)
    flow = K[:, 0, 0] * du_r + K[:, 0, 1] * du_t
    return float(-np.sum(flow * np.sqrt(np.linalg.det(g))) * dt)


# ---------------------------------------------------------------------------
# ladders and extrapolation
# ---------------------------------------------------------------------------


@dataclass
class CapacityEstimate:
    energy_value: float
    flux_value: float
    richardson_extrapolate: float
    flux_extrapolate: float
    observed_order: float
    error_bar: float
    ladder: list = field(default_factory=list)

    @property
    def estimators_agree(self) -> bool:
        return abs(self.richardson_extrapolate - self.flux_extrapolate) <= self.error_bar

    def as_dict(self) -> dict:
        return {
            "energy_value": self.energy_value,
            "flux_value": self.flux_value,
            "richardson_extrapolate": self.richardson_extrapolate,
            "flux_extrapolate": self.flux_extrapolate,
            "observed_order": self.observed_order,
            "error_bar": self.error_bar,
            "ladder": self.ladder,
        }


def richardson(values: Sequence[float], ratio: float = 2.0, default_order: float = 2.0) -> tuple[float, float, float]:
    """Extrapolate a refinement ladder; returns ``(limit, observed_order, error_bar)``.

    With three or more levels the order is observed from the last three; with
    two levels ``default_order`` is assumed.  The error bar is the size of the
    final correction.
    """
    v = np.asarray(values, dtype=float)
    if len(v) == 1:
        return float(v[0]), math.nan, math.inf
    p = default_order
    if len(v) >= 3:
        d1, d2 = v[-2] - v[-3], v[-1] - v[-2]
        if d1 != 0 and d2 != 0 and d1 * d2 > 0:
            p = math.log(abs(d1 / d2)) / math.log(ratio)
        elif d2 == 0:
            return float(v[-1]), math.inf, 0.0
        else:
            p = math.nan
    if not (math.isfinite(p) and p > 0):
        return float(v[-1]), p, float(abs(v[-1] - v[-2]))
    corr = (v[-1] - v[-2]) / (ratio**p - 1.0)
    return float(v[-1] + corr), float(p), float(abs(corr))


def capacity(
    m: ChartManifold,
    W: Field,
    rho: float,
    R: float,
    ladder: Sequence[tuple[int, int]] = ((64, 64), (128, 128), (256, 256)),
) -> CapacityEstimate:
    """Energy and flux capacities on a refinement ladder plus their extrapolations.

    Ladder levels should double in both directions for the extrapolation to be
    meaningful.  Levels are solved concurrently when ``CONDLAB_THREADS > 1``.
    """
    grids = ordered_map(lambda nn: solve_dirichlet(m, W, rho, R, nn[0], nn[1]), list(ladder))
    energies = [gr.energy for gr in grids]
    fluxes = [gr.flux for gr in grids]
    e_lim, p, e_err = richardson(energies)
    f_lim, _, f_err = richardson(fluxes)
    bar = 2.0 * (e_err + f_err) + 1e-12 * abs(e_lim)
    rows = [
        {"n_r": gr.n_r, "n_theta": gr.n_theta, "energy": gr.energy, "flux": gr.flux,
         "iterations": gr.iterations, "range_violation": gr.range_violation()}
        for gr in grids
    ]
    return CapacityEstimate(energies[-1], fluxes[-1], e_lim, f_lim, p, bar, rows)


# ---------------------------------------------------------------------------
# sphere integrals and eigenvalue sandwich
# ---------------------------------------------------------------------------


def vol_w_sphere(m: ChartManifold, W: Field, R: float, n_theta: int = 512) -> float:
    """``integral over r = R of <W grad r, grad r>`` against arc length (periodic trapezoid)."""
    fields = polar_fields(m, W)
    t = np.arange(n_theta) * (fields.period / n_theta)
    y = np.stack([np.full_like(t, R), t], axis=-1)
    g = fields.metric(y)
    gW = g @ fields.conductivity(y)
    # grad r = d_r in polar-adapted coordinates; arc length element sqrt(g_tt) dt
    return float(np.sum(gW[:, 0, 0] * np.sqrt(g[:, 1, 1])) * fields.period / n_theta)


@dataclass(frozen=True)
class RatioBounds:
    lower: float
    upper: float
    ratio: float
    capacity_w: float
    capacity_id: float

    @property
    def holds(self) -> bool:
        """The sandwich up to rounding in the two sparse solves."""
        slack = RATIO_ROUNDING * max(1.0, abs(self.ratio))
        return self.lower - slack <= self.ratio <= self.upper + slack


def capacity_ratio_bounds(
    m: ChartManifold, W: Field, rho: float, R: float, n_r: int = 64, n_theta: int = 64
) -> RatioBounds:
    """Eigenvalue sandwich ``min mu <= Cap_W / Cap <= max kappa`` on one grid.

    The extremes are taken over the quadrature points, which is exactly the set
    of points the discrete energies see, so the sandwich holds for the discrete
    capacities without discretization slack.
    """
    fields = polar_fields(m, W)
    r, t = _radial_grid(rho, R, n_r, n_theta, fields.period)
    pts, g, Wq, *_ = _element_data(fields, r, t)
    ev = checked_eigenvalues(Wq, g)

    def identity(y):
        return np.broadcast_to(np.eye(2), y.shape[:-1] + (2, 2)).copy()

    cw = _solve_fields(fields, rho, R, n_r, n_theta).energy
    ci = _solve_fields(PolarFields(fields.metric, identity, fields.period), rho, R, n_r, n_theta).energy
    return RatioBounds(float(ev[..., 0].min()), float(ev[..., -1].max()), cw / ci, cw, ci)
