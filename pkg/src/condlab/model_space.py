"""Radial machinery on warped model spaces.

A model is described by a warping ``w``, a radial weight ``h`` and a real
dimension parameter ``q``.  Everything here reduces to one-dimensional
integrals of ``w^(1-q) e^(-h)``, evaluated in log space so that exponential
warpings and weights do not overflow before they are integrated.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import NonIntegrableOnFiniteInterval

QUAD_ABS_TOL = 1e-10
QUAD_REL_TOL = 1e-12

# tail test thresholds
TAIL_DOUBLINGS = 40
# approaching a finite endpoint, deeper cutoffs lose all relative precision
FINITE_END_DOUBLINGS = 20
TAIL_RATIO = 0.9
TAIL_FRACTION = 1e-3
TAIL_FIT_POINTS = 6
SLOPE_TOL = 1e-9

Array = np.ndarray


def _fd1(f, t, h):
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)


def _fd2(f, t, h):
    return (-f(t + 2 * h) + 16 * f(t + h) - 30 * f(t) + 16 * f(t - h) - f(t - 2 * h)) / (12 * h * h)


class RadialProfile:
    """A scalar function of the radius with its first two derivatives.

    Derivatives not supplied are obtained by 4th-order central differences.
    ``log`` may be supplied for profiles that overflow (``sinh`` at large r).
    """

    def __init__(
        self,
        f: Callable[[Array], Array],
        d1: Optional[Callable] = None,
        d2: Optional[Callable] = None,
        log: Optional[Callable] = None,
        name: str = "",
        domain: tuple[float, float] = (0.0, math.inf),
    ):
        self._f = f
        self._d1 = d1
        self._d2 = d2
        self._log = log
        self.name = name
        self.domain = domain

    def __call__(self, t):
        return self._f(np.asarray(t, dtype=float))

    def _step(self, t):
        return 1e-3 * np.maximum(1.0, np.abs(t))

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        if self._d1 is not None:
            return self._d1(t)
        return _fd1(self._f, t, self._step(t))

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        if self._d2 is not None:
            return self._d2(t)
        if self._d1 is not None:
            return _fd1(self._d1, t, self._step(t))
        return _fd2(self._f, t, self._step(t))

    def log(self, t):
        t = np.asarray(t, dtype=float)
        if self._log is not None:
            return self._log(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.log(self._f(t))

    def __repr__(self):
        return f"RadialProfile({self.name or '<callable>'})"


def space_form_warping(b: float) -> RadialProfile:
    """Warping of the simply connected space form of constant curvature ``b``."""
    b = float(b)
    if b > 0:
        k = math.sqrt(b)
        return RadialProfile(
            lambda t: np.sin(k * t) / k,
            lambda t: np.cos(k * t),
            lambda t: -k * np.sin(k * t),
            name=f"sin({k:g} r)/{k:g}" if k != 1 else "sin(r)",
            domain=(0.0, math.pi / k),
        )
    if b < 0:
        k = math.sqrt(-b)

        def log_sinh(t):
            x = k * t
            return x + np.log1p(-np.exp(-2 * x)) - math.log(2 * k)

        return RadialProfile(
            lambda t: np.sinh(k * t) / k,
            lambda t: np.cosh(k * t),
            lambda t: k * np.sinh(k * t),
            log=log_sinh,
            name=f"sinh({k:g} r)/{k:g}" if k != 1 else "sinh(r)",
        )
    return linear_warping()


def linear_warping() -> RadialProfile:
    return RadialProfile(lambda t: t, lambda t: np.ones_like(t), lambda t: np.zeros_like(t), name="r")


def constant_profile(c: float) -> RadialProfile:
    c = float(c)
    return RadialProfile(
        lambda t: np.full_like(t, c),
        lambda t: np.zeros_like(t),
        lambda t: np.zeros_like(t),
        log=lambda t: np.full_like(t, math.log(c)) if c > 0 else np.full_like(t, -math.inf),
        name=f"{c:g}",
    )


ZERO = constant_profile(0.0)


@dataclass(frozen=True)
class Theta:
    """Radial divergence bound ``theta(r) = a + b r + c / r``.

    The weight is ``h(t) = integral of theta from rho to t``, in closed form.
    """

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.a + self.b * r + self.c / r

    def weight(self, rho: float) -> RadialProfile:
        a, b, c, rho = self.a, self.b, self.c, float(rho)

        def h(t):
            return a * (t - rho) + 0.5 * b * (t * t - rho * rho) + c * np.log(t / rho)

        return RadialProfile(h, lambda t: a + b * t + c / t, lambda t: b - c / (t * t), name=self.describe(rho))

    def describe(self, rho: float) -> str:
        terms = []
        if self.a:
            terms.append(f"{self.a:g}*(t-{rho:g})")
        if self.b:
            terms.append(f"{0.5 * self.b:g}*(t^2-{rho * rho:g})")
        if self.c:
            terms.append(f"{self.c:g}*log(t/{rho:g})")
        return "h(t) = " + (" + ".join(terms) if terms else "0")

    def as_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c}


def unit_sphere_area(k: float) -> float:
    """Area of the unit k-sphere in R^(k+1)."""
    return float(2 * math.exp(0.5 * (k + 1) * math.log(math.pi) - gammaln(0.5 * (k + 1))))


@dataclass
class WarpedModel:
    """Warped model ``[0, L) x_w S^(q-1)`` with radial weight ``e^h``.

    ``q`` may be any positive real; ``V0`` defaults to the area of the unit
    ``(q-1)``-sphere when ``q`` is an integer and to 1 otherwise.
    """

    q: float
    w: RadialProfile
    h: RadialProfile = field(default_factory=lambda: ZERO)
    V0: Optional[float] = None

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError("q must be positive")
        if self.V0 is None:
            self.V0 = unit_sphere_area(self.q - 1) if float(self.q).is_integer() else 1.0

    @property
    def r_max(self) -> float:
        return self.w.domain[1]

    def log_integrand(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(all="ignore"):
            lw = self.w.log(s)
        if self.q == 1:
            lw = np.zeros_like(lw)
        return (1.0 - self.q) * lw - self.h(s)

    def integrand(self, s):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.exp(self.log_integrand(s))

    def integrand_log_derivative(self, s):
        s = np.asarray(s, dtype=float)
        return (1.0 - self.q) * self.w.d1(s) / self.w(s) - self.h.d1(s)

    def check_warping(self, tol: float = 1e-6) -> None:
        """``w(0) = 0``, ``w'(0) = 1`` (one-sided differences) and ``w > 0`` on samples."""
        w = self.w
        eps = 1e-4
        w0 = float(w(0.0))
        slope = float((-3 * w(0.0) + 4 * w(eps) - w(2 * eps)) / (2 * eps))
        if abs(w0) > tol or abs(slope - 1.0) > tol:
            raise ValueError(f"warping must satisfy w(0)=0, w'(0)=1; got {w0:g}, {slope:g}")
        top = min(self.r_max, 64.0)
        s = np.linspace(0, top, 513)[1:-1]
        if np.any(w(s) <= 0):
            raise ValueError("warping is not positive on (0, L)")


def integrate_model(model: WarpedModel, a: float, b: float) -> float:
    """``integral_a^b w^(1-q) e^(-h)`` on a finite interval."""
    if not (b > a):
        raise ValueError("need a < b")
    probe = np.linspace(a, b, 257)
    with np.errstate(all="ignore"):
        lw = np.asarray(model.w.log(probe), dtype=float)
    if np.any(np.isnan(lw)) or np.any(lw == -np.inf):
        raise NonIntegrableOnFiniteInterval(f"warping vanishes or is undefined in [{a:g}, {b:g}]")
    fv = model.integrand(probe)
    if not np.all(np.isfinite(fv)):
        raise NonIntegrableOnFiniteInterval(f"integrand not finite on [{a:g}, {b:g}]")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(
            lambda s: float(model.integrand(s)), a, b, epsabs=QUAD_ABS_TOL, epsrel=QUAD_REL_TOL, limit=400
        )
    if not math.isfinite(val):
        raise NonIntegrableOnFiniteInterval(f"quadrature failed on [{a:g}, {b:g}]")
    return val


@dataclass(frozen=True)
class RadialSolution:
    """The radial Dirichlet solution ``phi`` with ``phi(rho) = 1``, ``phi(R) = 0``."""

    model: WarpedModel
    rho: float
    R: float
    total: float

    def __call__(self, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        for i, ri in enumerate(r.flat):
            if ri >= self.R:
                out.flat[i] = 0.0
            elif ri <= self.rho:
                out.flat[i] = 1.0
            else:
                out.flat[i] = integrate_model(self.model, ri, self.R) / self.total
        return out

    def derivative(self, r):
        return -self.model.integrand(r) / self.total

    def second_derivative(self, r):
        r = np.asarray(r, dtype=float)
        return _fd1(self.derivative, r, 1e-3 * np.maximum(1.0, np.abs(r)))

    @property
    def derivative_at_rho(self) -> float:
        return float(self.derivative(self.rho))

    def ode_residual(self, r):
        """``phi'' + phi' ((q-1) w'/w + h')`` on the given radii."""
        m = self.model
        r = np.asarray(r, dtype=float)
        return self.second_derivative(r) + self.derivative(r) * (
            (m.q - 1) * m.w.d1(r) / m.w(r) + m.h.d1(r)
        )


def radial_solution(model: WarpedModel, rho: float, R: float) -> RadialSolution:
    if not (0 < rho < R):
        raise ValueError("need 0 < rho < R")
    return RadialSolution(model, float(rho), float(R), integrate_model(model, rho, R))


def capacity_model(model: WarpedModel, rho: float, R: float) -> float:
    """``V0 / integral_rho^R w^(1-q) e^(-h)``."""
    if not (0 < rho < R):
        raise ValueError("need 0 < rho < R")
    return model.V0 / integrate_model(model, rho, R)


def flux_capacity(model: WarpedModel, rho: float, R: float) -> float:
    """Capacity written as the flux ``-phi'(rho) e^h(rho) w^(q-1)(rho) V0``."""
    sol = radial_solution(model, rho, R)
    scale = float(np.exp(model.h(rho) + (model.q - 1) * model.w.log(rho)))
    return -sol.derivative_at_rho * scale * model.V0


# ---------------------------------------------------------------------------
# tail convergence
# ---------------------------------------------------------------------------

CONVERGES = "Converges"
DIVERGES = "Diverges"
UNDECIDED = "Undecided"


@dataclass(frozen=True)
class ConvergenceVerdict:
    status: str
    tail_estimate: float
    cutoffs: tuple
    partials: tuple
    ratio: float
    log_slope: float
    reason: str

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "tail_estimate": _jsonable(self.tail_estimate),
            "cutoffs": [_jsonable(c) for c in self.cutoffs],
            "partials": [_jsonable(p) for p in self.partials],
            "ratio": _jsonable(self.ratio),
            "log_slope": _jsonable(self.log_slope),
            "reason": self.reason,
        }


def _jsonable(x: float):
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def _fit_slope(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        return math.nan
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


def tail_convergence(model: WarpedModel, rho: float, doublings: int = TAIL_DOUBLINGS) -> ConvergenceVerdict:
    """Decide whether ``integral_rho^L w^(1-q) e^(-h)`` is finite, ``L`` the end of the model.

    For an unbounded model the cutoffs are ``rho 2^k``; for a bounded one
    (positive curvature) they approach the endpoint as ``L - (L - rho) 2^-k``
    and the log-slope is measured against the distance to the endpoint.
    """
    L = model.r_max
    finite_end = math.isfinite(L)
    if finite_end:
        doublings = min(doublings, FINITE_END_DOUBLINGS)
    k = np.arange(doublings + 1, dtype=float)
    if finite_end:
        if not rho < L:
            raise ValueError("rho beyond the end of the model")
        cut = L - (L - rho) * 2.0 ** (-k)
        scale_var = np.log(L - cut)
    else:
        cut = rho * 2.0**k
        scale_var = np.log(cut)
    with np.errstate(all="ignore"):
        logf = np.asarray(model.log_integrand(cut), dtype=float)

    increments: list[float] = []
    overflow = False
    for j in range(1, len(cut)):
        if not (np.isfinite(logf[j - 1]) or logf[j - 1] == -np.inf) or logf[j - 1] > 600 or logf[j] > 600:
            overflow = True
            break
        a, b = cut[j - 1], cut[j]
        if logf[j - 1] < -745 and logf[j] < -745 and len(increments) > 0 and increments[-1] == 0.0:
            increments.append(0.0)
            continue
        try:
            inc = integrate_model(model, a, b)
        except NonIntegrableOnFiniteInterval:
            overflow = True
            break
        increments.append(inc)
        if len(increments) >= 3 and increments[-1] == increments[-2] == increments[-3] == 0.0:
            break

    inc = np.asarray(increments, dtype=float)
    partials = np.cumsum(inc)
    total = float(partials[-1]) if len(partials) else 0.0
    used = cut[: len(inc) + 1]

    # geometric decay of the increments
    ratio = math.nan
    if len(inc) >= 2:
        if inc[-1] == 0.0:
            ratio = 0.0
        else:
            tail = inc[-TAIL_FIT_POINTS:]
            tail = tail[tail > 0]
            if len(tail) >= 2:
                ratio = math.exp(_fit_slope(np.arange(len(tail)), np.log(tail)))

    # power-law exponent of the integrand at the largest cutoffs
    fin = np.isfinite(logf[: len(inc) + 1 + (1 if overflow else 0)])
    xs = scale_var[: len(fin)][fin][-TAIL_FIT_POINTS:]
    ys = logf[: len(fin)][fin][-TAIL_FIT_POINTS:]
    slope = _fit_slope(xs, ys)
    if finite_end and len(xs) >= 3:
        # near the endpoint a smooth integrand has local log-slopes s + O(distance); the distance
        # halves between cutoffs, so one Richardson step removes the linear term
        local = np.diff(ys) / np.diff(xs)
        slope = float(2.0 * local[-1] - local[-2])
    if finite_end:
        slope_diverges = math.isfinite(slope) and slope <= -1.0 + SLOPE_TOL
    else:
        slope_diverges = math.isfinite(slope) and slope >= -1.0 - SLOPE_TOL

    if overflow:
        growing = len(logf) > 1 and np.nanmax(logf[np.isfinite(logf)]) > 600
        if growing or slope_diverges:
            return ConvergenceVerdict(
                DIVERGES, math.inf, tuple(used), tuple(partials), ratio, slope,
                "integrand overflows at large radii",
            )
        return ConvergenceVerdict(UNDECIDED, math.nan, tuple(used), tuple(partials), ratio, slope,
                                  "integrand could not be evaluated")

    if math.isfinite(ratio) and ratio < TAIL_RATIO and total > 0:
        extra = float(inc[-1]) * ratio / (1.0 - ratio)
        if extra < TAIL_FRACTION * total:
            return ConvergenceVerdict(
                CONVERGES, total + extra, tuple(used), tuple(partials), ratio, slope,
                f"increments decay with ratio {ratio:.3g}",
            )
    growing = len(inc) >= 2 and bool(np.all(np.diff(partials) >= 0)) and (not math.isfinite(ratio) or ratio >= TAIL_RATIO)
    if growing and slope_diverges:
        return ConvergenceVerdict(
            DIVERGES, math.inf, tuple(used), tuple(partials), ratio, slope,
            f"partial integrals grow and the integrand log-slope is {slope:.4g}",
        )
    return ConvergenceVerdict(
        UNDECIDED, math.nan, tuple(used), tuple(partials), ratio, slope,
        f"inconclusive: ratio {ratio:.4g}, log-slope {slope:.4g}",
    )
