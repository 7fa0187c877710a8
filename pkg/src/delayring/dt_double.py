"""Discrete-time delayed double integrators with velocity damping ``eta``.

Decoupled mode::

    x[k+1] = x[k] + z[k]
    z[k+1] = (1 - eta) z[k] - eta lam x[k - tau] + w[k]

Eliminating ``z`` gives an autoregression in ``x`` whose monic characteristic
polynomial is ``z**(tau+2) - (2-eta) z**(tau+1) + (1-eta) z**tau + eta lam``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dt_single import root_radius, solve_moment_derivatives, wiener_khintchine_variance
from .errors import ConvergenceError, UnstableError

__all__ = [
    "DtPdSubsystem",
    "characteristic_coeffs_double",
    "stability_dt_double",
    "dt_double_upper",
    "moment_matching_dt_double",
    "moment_matching_dt_double_derivatives",
    "quadrature_dt_double",
]


@dataclass(frozen=True)
class DtPdSubsystem:
    eta: float
    lam: float
    tau: int

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta!r}")
        if int(self.tau) != self.tau or self.tau < 0:
            raise ValueError(f"tau must be a non-negative integer, got {self.tau!r}")

    @property
    def coeffs(self) -> np.ndarray:
        return characteristic_coeffs_double(self.eta, self.lam, self.tau)


def characteristic_coeffs_double(eta: float, lam: float, tau: int) -> np.ndarray:
    c = np.zeros(tau + 3)
    c[0] = 1.0
    c[1] = -(2.0 - eta)
    c[2] += 1.0 - eta
    c[-1] += eta * lam
    return c


def stability_dt_double(sub: DtPdSubsystem) -> bool:
    # h(1) = eta * lam exactly; h(1) <= 0 forces a real root >= 1, which the
    # eigenvalue solver can place a rounding error inside the circle
    if not sub.eta * sub.lam > 0:
        return False
    return root_radius(sub.coeffs) < 1.0


def dt_double_upper(eta: float, tau: int, grid: int = 400) -> float:
    """Upper end of the stable interval ``(0, lam_max)`` in ``lam``.

    Stability requires ``eta * lam < 1`` (product of root moduli), so the
    first loss of stability is searched on ``(0, 1/eta]`` and refined by
    bisection.  Returns 0 when no positive ``lam`` is stable (e.g. eta >= 2).
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta!r}")
    hi = 1.0 / eta
    lams = hi * np.arange(1, grid + 1) / grid
    stable = np.array([root_radius(characteristic_coeffs_double(eta, v, tau)) < 1.0 for v in lams])
    if not stable[0]:
        return 0.0
    first_bad = np.flatnonzero(~stable)
    if first_bad.size == 0:
        return hi
    a, b = lams[first_bad[0] - 1], lams[first_bad[0]]
    for _ in range(200):
        mid = 0.5 * (a + b)
        if root_radius(characteristic_coeffs_double(eta, mid, tau)) < 1.0:
            a = mid
        else:
            b = mid
        if b - a <= 4 * np.finfo(float).eps * b:
            break
    return a


def _moment_parts(eta: float, tau: int):
    size = tau + 2
    A0 = np.zeros((size, size))
    A1 = np.zeros((size, size))
    A2 = np.zeros((size, size))
    a = 2.0 - eta
    b = 1.0 - eta
    # rho_0 = (a^2 + b^2 + eta^2 lam^2) rho_0 + 1 - 2ab rho_1
    #         - 2 a eta lam rho_{tau+1} + 2 b eta lam rho_tau
    A0[0, 0] += 1.0 - a * a - b * b
    A2[0, 0] -= eta * eta
    A0[0, 1] += 2.0 * a * b
    A1[0, tau + 1] += 2.0 * a * eta
    A1[0, tau] -= 2.0 * b * eta
    # rho_m = a rho_{m-1} - b rho_{|m-2|} - eta lam rho_{|tau+2-m|}, m = 1..tau+1
    for m in range(1, size):
        A0[m, m] += 1.0
        A0[m, m - 1] -= a
        A0[m, abs(m - 2)] += b
        A1[m, abs(tau + 2 - m)] += eta
    return A0, A1, A2


def moment_matching_dt_double_derivatives(sub: DtPdSubsystem) -> tuple[float, float, float]:
    if not stability_dt_double(sub):
        raise UnstableError(f"unstable double-integrator mode: eta={sub.eta}, lambda={sub.lam}, tau={sub.tau}")
    rhs = np.zeros(sub.tau + 2)
    rhs[0] = 1.0
    try:
        rho, drho, d2rho, residual = solve_moment_derivatives(_moment_parts(sub.eta, sub.tau), sub.lam, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(
            f"singular moment system for eta={sub.eta}, lambda={sub.lam}, tau={sub.tau}"
        ) from exc
    if not math.isfinite(rho[0]) or residual > 1e-10 * max(1.0, abs(rho[0])):
        raise ConvergenceError(
            f"moment system residual {residual:.3g} for eta={sub.eta}, lambda={sub.lam}, tau={sub.tau}"
        )
    return float(rho[0]), float(drho[0]), float(d2rho[0])


def moment_matching_dt_double(sub: DtPdSubsystem) -> float:
    """Stationary position variance ``E[x^2]`` of the mode."""
    return moment_matching_dt_double_derivatives(sub)[0]


def quadrature_dt_double(sub: DtPdSubsystem, quadrature_points: int | None = None) -> float:
    return wiener_khintchine_variance(sub.coeffs, quadrature_points)
