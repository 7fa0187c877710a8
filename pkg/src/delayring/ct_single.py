"""Continuous-time delayed single integrators.

Each error mode obeys ``dx = -lam x(t - tau) dt + dw``.  It is mean-square
stable iff ``0 < lam tau < pi/2`` and then has stationary variance

    sigma2(lam, tau) = (1 + sin(lam tau)) / (2 lam cos(lam tau)).

Writing ``beta = lam tau`` gives ``sigma2 = tau * g(beta)`` with
``g(beta) = (1 + sin beta) / (2 beta cos beta)``, so the optimal eigenvalue is
``beta_star / tau`` for a delay-free constant ``beta_star``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import InfeasibleDesignError, UnstableError
from .topology import NetworkSpec, Spectrum, offset_weights

__all__ = [
    "HALF_PI",
    "CtStabilityVerdict",
    "OptimalPoint",
    "g_normalized",
    "variance_ct_single",
    "variance_ct_single_array",
    "variance_ct_single_derivatives",
    "stability_ct_single",
    "optimal_point",
    "suboptimal_multipliers",
    "suboptimal_coefficients",
]

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class CtStabilityVerdict:
    stable: bool
    margin: float
    margins: tuple[float, ...] = ()
    min_lambda: float = math.nan


@dataclass(frozen=True)
class OptimalPoint:
    """Minimizer of the per-mode variance for a given delay."""

    beta_star: float
    C_star: float
    tau: float = 1.0

    @property
    def lambda_star(self) -> float:
        return self.beta_star / self.tau

    @property
    def variance(self) -> float:
        return self.C_star * self.tau


def g_normalized(beta):
    """Delay-normalized variance ``g(beta)``; defined on (0, pi/2)."""
    beta = np.asarray(beta, dtype=float)
    return (1.0 + np.sin(beta)) / (2.0 * beta * np.cos(beta))


def _in_region(lam, tau):
    lam = np.asarray(lam, dtype=float)
    return (lam > 0) & (lam * tau < HALF_PI)


def variance_ct_single(lam: float, tau: float) -> float:
    if tau < 0:
        raise ValueError(f"delay must be non-negative, got {tau}")
    if not _in_region(lam, tau):
        raise UnstableError(
            f"lambda={lam!r}, tau={tau!r} is outside the stability region 0 < lambda*tau < pi/2"
        )
    theta = lam * tau
    return (1.0 + math.sin(theta)) / (2.0 * lam * math.cos(theta))


def variance_ct_single_array(lam, tau: float) -> np.ndarray:
    """Vectorized variance; raises if any entry is outside the region."""
    lam = np.asarray(lam, dtype=float)
    if not np.all(_in_region(lam, tau)):
        bad = lam[~_in_region(lam, tau)]
        raise UnstableError(f"{bad.size} eigenvalue(s) outside 0 < lambda*tau < pi/2, e.g. {bad.flat[0]!r}")
    theta = lam * tau
    return (1.0 + np.sin(theta)) / (2.0 * lam * np.cos(theta))


def variance_ct_single_derivatives(lam, tau: float):
    """Return ``(sigma2, d sigma2/d lam, d2 sigma2/d lam2)`` elementwise.

    Uses ``d log sigma2 / d lam = tau / cos(lam tau) - 1 / lam``.
    """
    lam = np.asarray(lam, dtype=float)
    s2 = variance_ct_single_array(lam, tau)
    theta = lam * tau
    c = np.cos(theta)
    dlog = tau / c - 1.0 / lam
    d2log = tau * tau * np.sin(theta) / (c * c) + 1.0 / (lam * lam)
    d1 = s2 * dlog
    d2 = s2 * (dlog * dlog + d2log)
    return s2, d1, d2


def stability_ct_single(spectrum: Spectrum, tau: float) -> CtStabilityVerdict:
    lam = spectrum.nontrivial()
    scaled = lam * tau
    margins = HALF_PI - scaled
    margin = float(np.min(margins)) if margins.size else HALF_PI
    min_lam = float(np.min(lam)) if lam.size else math.nan
    stable = bool(margin > 0 and min_lam > 0)
    return CtStabilityVerdict(stable, margin, tuple(float(m) for m in margins), min_lam)


def _g_slope_sign(beta: float) -> float:
    # sign of g'(beta): d log g / d beta = 1/cos(beta) - 1/beta
    return 1.0 / math.cos(beta) - 1.0 / beta


_BETA_CACHE: list[tuple[float, float]] = []


def _beta_star() -> tuple[float, float]:
    if _BETA_CACHE:
        return _BETA_CACHE[0]
    lo, hi = 1e-6, HALF_PI - 1e-6
    coarse = optimize.minimize_scalar(
        lambda b: float(g_normalized(b)), bracket=(0.2, 0.7, 1.4), method="golden", tol=1e-8
    )
    b0 = float(coarse.x)
    # refine on the sign change of g' around the golden-section estimate
    left, right = max(lo, b0 - 1e-3), min(hi, b0 + 1e-3)
    while _g_slope_sign(left) > 0:
        left = max(lo, left - 1e-2)
    while _g_slope_sign(right) < 0:
        right = min(hi, right + 1e-2)
    beta = optimize.bisect(_g_slope_sign, left, right, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    value = float(g_normalized(beta))
    _BETA_CACHE.append((beta, value))
    return beta, value


def optimal_point(tau: float = 1.0) -> OptimalPoint:
    if not tau > 0:
        raise ValueError(f"delay must be positive, got {tau}")
    beta, C = _beta_star()
    return OptimalPoint(beta, C, float(tau))


def suboptimal_multipliers(spec: NetworkSpec) -> np.ndarray:
    """Ratios ``lambda_j / lambda_star`` under the uniform gain ``lambda_star/(2n+1)``."""
    W = offset_weights(spec.N, spec.n)
    g = W.sum(axis=1)[1:]
    return g / (2 * spec.n + 1)


def suboptimal_coefficients(spec: NetworkSpec) -> np.ndarray:
    """Per-mode variance constants for the uniform-gain design, j = 2..N.

    Each mode's variance under that design is ``coefficient * tau_n``.
    """
    beta, _ = _beta_star()
    scaled = suboptimal_multipliers(spec) * beta
    bad = np.flatnonzero(~((scaled > 0) & (scaled < HALF_PI)))
    if bad.size:
        j = int(bad[0]) + 2
        raise InfeasibleDesignError(
            f"uniform gain destabilizes subsystem j={j} (lambda*tau={scaled[bad[0]]:.6g} not in (0, pi/2))"
        )
    return g_normalized(scaled)
