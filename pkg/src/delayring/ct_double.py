"""Continuous-time double integrators under delayed PD feedback.

After rescaling time by the delay, every error mode follows

    x'' = -eta x' - eta lam x(t - 1) + w'

with unit delay.  The mode is stable iff ``0 < lam < phi(eta)`` where
``phi(eta) = beta / sin(beta)`` and ``beta`` is the root of
``beta tan(beta) = eta`` in (0, pi/2).

For large ``eta`` the velocity relaxes much faster than the position and the
position behaves like a delayed single integrator driven by noise of
intensity ``1/eta**2``; :func:`reduced_model_variance` returns that
approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .ct_single import HALF_PI, variance_ct_single_derivatives
from .errors import TopologyError, UnstableError
from .topology import GainProfile, NetworkSpec, circulant_eigenvalues

__all__ = [
    "NormalizedPdModel",
    "PdStabilityVerdict",
    "normalize_double_integrator",
    "normalize_pd",
    "denormalize_pd",
    "boundary_angle",
    "phi_of_eta",
    "stability_ct_double",
    "reduced_model_variance",
    "reduced_model_variance_derivatives",
]


@dataclass(frozen=True)
class NormalizedPdModel:
    """PD loop expressed in delay units (the delay is exactly one).

    ``scale`` is the physical delay that was divided out; it is kept so the
    map can be inverted.
    """

    eta: float
    lambdas: tuple[float, ...]
    scale: float = 1.0
    delay: float = 1.0

    def nontrivial(self) -> np.ndarray:
        return np.asarray(self.lambdas[1:], dtype=float)


@dataclass(frozen=True)
class PdStabilityVerdict:
    stable: bool
    margin: float
    boundary: float
    margins: tuple[float, ...] = ()


def normalize_pd(eta: float, lambdas, tau: float) -> NormalizedPdModel:
    if not (tau > 0 and math.isfinite(tau)):
        raise TopologyError(f"delay must be positive to normalize, got {tau!r}")
    if eta is None or not eta > 0:
        raise TopologyError(f"derivative gain eta must be positive, got {eta!r}")
    lam = np.asarray(lambdas, dtype=float) * tau
    return NormalizedPdModel(float(eta) * tau, tuple(lam), float(tau))


def denormalize_pd(model: NormalizedPdModel) -> tuple[float, np.ndarray]:
    """Inverse of :func:`normalize_pd`: physical ``(eta, lambdas)``."""
    return model.eta / model.scale, np.asarray(model.lambdas) / model.scale


def normalize_double_integrator(spec: NetworkSpec, gains: GainProfile) -> NormalizedPdModel:
    if gains.eta is None:
        raise TopologyError("gains.eta is required for double-integrator models")
    spectrum = circulant_eigenvalues(spec, gains)
    return normalize_pd(gains.eta, spectrum.lambdas, spec.tau)


def boundary_angle(eta: float) -> float:
    """Root ``beta`` of ``beta tan(beta) = eta`` in (0, pi/2)."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta!r}")
    hi = HALF_PI - 1e-12
    f = lambda b: b * math.tan(b) - eta
    if f(hi) < 0:
        raise ValueError(f"eta={eta!r} too large to resolve the boundary angle in double precision")
    return optimize.brentq(f, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def phi_of_eta(eta: float) -> float:
    beta = boundary_angle(eta)
    if beta < 1e-6:
        # beta/sin(beta) = 1 + beta^2/6 + 7 beta^4/360 + ...
        b2 = beta * beta
        return 1.0 + b2 / 6.0 + 7.0 * b2 * b2 / 360.0
    return beta / math.sin(beta)


def stability_ct_double(model: NormalizedPdModel) -> PdStabilityVerdict:
    phi = phi_of_eta(model.eta)
    lam = model.nontrivial()
    margins = np.minimum(phi - lam, lam)
    stable = bool(lam.size == 0 or (np.all(lam > 0) and np.all(lam < phi)))
    margin = float(np.min(phi - lam)) if lam.size else phi
    return PdStabilityVerdict(stable, margin, phi, tuple(float(m) for m in margins))


def reduced_model_variance(eta: float, lam: float) -> float:
    """Approximate position variance of a normalized PD mode (large ``eta``).

    Equals ``sigma2_single(lam, 1) / eta**2``.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta!r}")
    if not (0 < lam < phi_of_eta(eta)):
        raise UnstableError(f"lambda={lam!r} outside the stability interval (0, phi({eta!r}))")
    s2, _, _ = variance_ct_single_derivatives(np.array([lam]), 1.0)
    return float(s2[0]) / (eta * eta)


def reduced_model_variance_derivatives(eta: float, lam):
    """Vectorized value and first two ``lam``-derivatives of the reduced variance."""
    lam = np.asarray(lam, dtype=float)
    phi = phi_of_eta(eta)
    if not np.all((lam > 0) & (lam < phi)):
        raise UnstableError(f"eigenvalue(s) outside (0, phi(eta)={phi:.6g})")
    s2, d1, d2 = variance_ct_single_derivatives(lam, 1.0)
    w = 1.0 / (eta * eta)
    return s2 * w, d1 * w, d2 * w
