"""Pointwise algebra of conductivities relative to a metric.

A conductivity at a point is a mixed (1,1) tensor ``W[i, j] = W^i_j`` (row
index up).  It is admissible when ``g @ W`` is symmetric and the generalized
eigenvalues of the pencil ``(g W, g)`` are positive.  All array functions
accept a leading batch shape, so ``W`` may be ``(..., n, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import EmptySampleSet, NotPositiveDefinite, NotSelfAdjoint

#: relative tolerance on the asymmetry of ``g W``
SELF_ADJOINT_TOL = 1e-9
#: an eigenvalue counts as positive when it exceeds this fraction of the largest
POSITIVE_REL_TOL = 1e-10


@dataclass(frozen=True)
class PointSpectrum:
    """Generalized spectrum of a conductivity at one point."""

    eigenvalues: np.ndarray
    mean: float
    sd: float
    cv: float

    @property
    def mu(self) -> float:
        """Smallest eigenvalue."""
        return float(self.eigenvalues[0])

    @property
    def kappa(self) -> float:
        """Largest eigenvalue."""
        return float(self.eigenvalues[-1])


def lowered(W: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Covariant form ``W_ij = g_ik W^k_j``."""
    return g @ W


def self_adjoint_defect(W: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Relative max-norm asymmetry of ``g W`` (batched)."""
    gW = lowered(W, g)
    asym = np.abs(gW - np.swapaxes(gW, -1, -2)).max(axis=(-2, -1))
    scale = np.abs(gW).max(axis=(-2, -1))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(scale > 0, asym / np.where(scale > 0, scale, 1.0), asym)


def generalized_eigenvalues(W: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Sorted eigenvalues of the pencil ``(g W, g)``, batched.

    Uses ``g = L L^T`` and the symmetric matrix ``L^-1 (g W) L^-T``; the
    lowered form is symmetrized first so the result is real by construction.
    """
    gW = lowered(W, g)
    sym = 0.5 * (gW + np.swapaxes(gW, -1, -2))
    L = np.linalg.cholesky(g)
    Linv = np.linalg.inv(L)
    M = Linv @ sym @ np.swapaxes(Linv, -1, -2)
    return np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))


def checked_eigenvalues(W: np.ndarray, g: np.ndarray, tol: float = SELF_ADJOINT_TOL) -> np.ndarray:
    """Batched validation; returns the sorted spectra or raises."""
    W = np.asarray(W, dtype=float)
    g = np.asarray(g, dtype=float)
    if W.shape[-2:] != g.shape[-2:] or W.shape[-1] != W.shape[-2]:
        raise ValueError(f"dimension mismatch: W {W.shape}, g {g.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(g))):
        raise NotPositiveDefinite("non-finite tensor components")
    defect = self_adjoint_defect(W, g)
    if np.any(defect > tol):
        raise NotSelfAdjoint(f"|gW - (gW)^T| / |gW| = {float(np.max(defect)):.3e} > {tol:g}")
    ev = generalized_eigenvalues(W, g)
    kappa = ev[..., -1]
    if np.any(ev[..., 0] <= POSITIVE_REL_TOL * np.abs(kappa)) or np.any(kappa <= 0):
        raise NotPositiveDefinite(f"smallest eigenvalue {float(np.min(ev[..., 0])):.3e} not positive")
    return ev


def _stats(W: np.ndarray, ev: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = W.shape[-1]
    mean = np.trace(W, axis1=-2, axis2=-1) / n
    # two-pass variance over the spectrum: same quantity as tr(W^2)/n - mean^2
    # but free of cancellation when W is nearly isotropic
    sd = np.sqrt(np.mean((ev - ev.mean(axis=-1, keepdims=True)) ** 2, axis=-1))
    return mean, sd


def validate_conductivity(W: np.ndarray, g: np.ndarray, tol: float = SELF_ADJOINT_TOL) -> PointSpectrum:
    """Check admissibility of ``W`` at a single point and return its spectrum."""
    W = np.asarray(W, dtype=float)
    g = np.asarray(g, dtype=float)
    if W.ndim != 2:
        raise ValueError("validate_conductivity works on a single point; use checked_eigenvalues for batches")
    ev = checked_eigenvalues(W, g, tol)
    mean, sd = _stats(W, ev)
    mean = float(mean)
    sd = float(sd)
    return PointSpectrum(eigenvalues=ev, mean=mean, sd=sd, cv=sd / mean)


def eigen_stats(W: np.ndarray, g: np.ndarray) -> PointSpectrum:
    return validate_conductivity(W, g)


def cv_values(W: np.ndarray, g: np.ndarray, validate: bool = True) -> np.ndarray:
    """Coefficient of variation at every point of a batch.

    ``validate=False`` skips the admissibility check, for spectra whose
    condition number is beyond what a floating-point positivity test can
    certify but whose definiteness is known by construction.
    """
    W = np.asarray(W, dtype=float)
    ev = checked_eigenvalues(W, g) if validate else generalized_eigenvalues(W, np.asarray(g, dtype=float))
    mean, sd = _stats(np.asarray(W, dtype=float), ev)
    return sd / mean


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def low_discrepancy(dim: int, budget: int, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points in the unit cube, reproducible for a fixed seed."""
    if budget <= 0:
        raise EmptySampleSet("sample budget must be positive")
    return qmc.Halton(d=dim, scramble=True, seed=seed).random(budget)


def box_samples(bounds, budget: int, seed: int = 0) -> np.ndarray:
    """Low-discrepancy points in a finite coordinate box ``[(lo, hi), ...]``."""
    b = np.asarray(bounds, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ValueError("box_samples needs finite bounds")
    u = low_discrepancy(len(b), budget, seed)
    return b[:, 0] + u * (b[:, 1] - b[:, 0])


@dataclass(frozen=True)
class SampledSupremum:
    """Largest sampled value; a lower estimate of the true supremum."""

    value: float
    witness: np.ndarray
    n_samples: int
    sampled: bool = True


def cv_supremum(
    field: Callable[[np.ndarray], np.ndarray],
    metric: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    validate: bool = True,
) -> SampledSupremum:
    """Max of cv over a sample set (batched callbacks ``(..., n) -> (..., n, n)``).

    ``validate=False`` skips the definiteness certificate, for spectra whose
    condition number exceeds what the relative tolerance can certify.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0 or pts.size == 0:
        raise EmptySampleSet("cv_supremum called with no sample points")
    cv = cv_values(field(pts), metric(pts), validate)
    k = int(np.argmax(cv))
    return SampledSupremum(value=float(cv[k]), witness=pts[k].copy(), n_samples=len(pts))
