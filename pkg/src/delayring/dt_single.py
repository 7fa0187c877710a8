"""Discrete-time delayed single integrators.

A decoupled error mode evolves as ``x[k+1] = x[k] - lam x[k-tau] + w[k]`` with
unit-variance white noise.  Its characteristic polynomial (monic, descending
powers) is ``z**(tau+1) - z**tau + lam`` and it is mean-square stable iff
``0 < lam < 2 sin(pi / (2 (2 tau + 1)))``.

The stationary variance is available three ways, which are used to check one
another: spectral quadrature, the Yule-Walker moment system, and a
determinant recursion over the delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg

from .errors import ConvergenceError, UnstableError

__all__ = [
    "DtDelay",
    "MomentSystem",
    "characteristic_coeffs",
    "dt_single_threshold",
    "root_radius",
    "wiener_khintchine_variance",
    "moment_system",
    "moment_matching_variance",
    "moment_matching_derivatives",
    "recursive_variance",
    "numeric_convexity_check",
    "solve_moment_derivatives",
]


@dataclass(frozen=True)
class DtDelay:
    """Delay in whole sampling periods."""

    steps: int
    sampling_time: float = 1.0

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 0:
            raise ValueError(f"delay steps must be a non-negative integer, got {self.steps!r}")
        if not self.sampling_time > 0:
            raise ValueError(f"sampling_time must be positive, got {self.sampling_time!r}")

    @classmethod
    def from_continuous(cls, delay: float, sampling_time: float = 1.0) -> "DtDelay":
        ratio = delay / sampling_time
        # guard against 10.000000000000002 turning into 11
        steps = math.ceil(ratio - 1e-9 * max(1.0, abs(ratio)))
        return cls(max(steps, 0), sampling_time)


@dataclass(frozen=True)
class MomentSystem:
    """``A rho = rhs`` for the autocovariances ``rho_0 .. rho_tau``."""

    tau: int
    A: np.ndarray
    rhs: np.ndarray

    def solve(self) -> np.ndarray:
        return linalg.solve(self.A, self.rhs)


def characteristic_coeffs(lam: float, tau: int) -> np.ndarray:
    c = np.zeros(tau + 2)
    c[0] = 1.0
    c[1] -= 1.0
    c[-1] += lam
    return c


_PI_EXTENDED = np.longdouble("3.14159265358979323846264338327950288")


def dt_single_threshold(tau: int) -> float:
    """Upper end ``2 sin(pi / (2 (2 tau + 1)))`` of the stable gain interval.

    Evaluated in extended precision and rounded once, so ``tau = 1`` gives
    exactly 1.0 (in plain doubles ``pi / 6`` is inexact and the result lands
    one ulp low).  Platforms whose long double is a plain double fall back to
    ordinary rounding.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return float(2 * np.sin(_PI_EXTENDED / (2 * (2 * np.longdouble(tau) + 1))))


def root_radius(coeffs) -> float:
    """Largest root modulus of a polynomial given in descending powers.

    Leading zeros are not allowed; the roots are the eigenvalues of the
    companion matrix.
    """
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex if np.iscomplexobj(coeffs) else float))
    if c.size == 0 or not np.any(c):
        raise ValueError("polynomial is identically zero")
    if c.size < 2:
        raise ValueError("polynomial must have degree >= 1")
    if c[0] == 0:
        raise ValueError("leading coefficient must be nonzero")
    roots = np.linalg.eigvals(linalg.companion(c))
    return float(np.max(np.abs(roots)))


def _unit_circle_integrand(h, theta):
    z = np.exp(1j * theta)
    if callable(h):
        vals = h(z)
    else:
        vals = np.polyval(h, z)
    return 1.0 / np.abs(vals) ** 2


def wiener_khintchine_variance(
    h: np.ndarray | Callable,
    quadrature_points: int | None = None,
    tol: float = 1e-12,
    max_points: int = 1 << 24,
) -> float:
    """Variance ``(1/2pi) * integral of |h(e^{i theta})|^-2`` over one period.

    Parameters
    ----------
    h : array_like or callable
        Polynomial coefficients in descending powers, or a vectorized
        evaluator ``h(z)``.  Coefficients are checked for stability; a
        callable is trusted.
    quadrature_points : int, optional
        Use exactly this many equispaced nodes.  When omitted the node count
        doubles from 64 until successive estimates differ by less than
        ``tol`` (relative to ``max(1, value)``).
    """
    if not callable(h):
        if root_radius(h) >= 1.0:
            raise UnstableError("characteristic polynomial has a root on or outside the unit circle")
    if quadrature_points is not None:
        M = int(quadrature_points)
        theta = 2.0 * np.pi * np.arange(M) / M
        return float(np.mean(_unit_circle_integrand(h, theta)))

    M = 64
    total = float(np.sum(_unit_circle_integrand(h, 2.0 * np.pi * np.arange(M) / M)))
    value = total / M
    while M < max_points:
        # midpoints of the current grid
        mids = 2.0 * np.pi * (np.arange(M) + 0.5) / M
        total += float(np.sum(_unit_circle_integrand(h, mids)))
        M *= 2
        new = total / M
        if abs(new - value) < tol * max(1.0, abs(new)):
            return new
        value = new
    raise ConvergenceError(f"quadrature did not converge with {M} points", last=value)


def _moment_parts(tau: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split ``A(lam) = A0 + lam A1 + lam**2 A2`` for the single-integrator system."""
    size = tau + 1
    A0 = np.zeros((size, size))
    A1 = np.zeros((size, size))
    A2 = np.zeros((size, size))
    # rho_0 = rho_0 + lam^2 rho_0 + 1 - 2 lam rho_tau
    A2[0, 0] -= 1.0
    A1[0, tau] += 2.0
    # rho_m = rho_{m-1} - lam rho_{|tau+1-m|}, m = 1..tau
    for m in range(1, size):
        A0[m, m - 1] += 1.0
        A0[m, m] -= 1.0
        A1[m, abs(tau + 1 - m)] -= 1.0
    return A0, A1, A2


def moment_system(lam: float, tau: int) -> MomentSystem:
    A0, A1, A2 = _moment_parts(tau)
    rhs = np.zeros(tau + 1)
    rhs[0] = 1.0
    return MomentSystem(tau, A0 + lam * A1 + lam * lam * A2, rhs)


def _check_stable(lam: float, tau: int) -> None:
    if int(tau) != tau or tau < 0:
        raise ValueError(f"tau must be a non-negative integer, got {tau!r}")
    thr = dt_single_threshold(tau)
    if not (0 < lam < thr):
        raise UnstableError(f"lambda={lam!r} outside the stability interval (0, {thr!r}) for tau={tau}")


def solve_moment_derivatives(parts, lam: float, rhs: np.ndarray):
    """Solve ``A(lam) rho = rhs`` and differentiate twice in ``lam``.

    ``parts`` is ``(A0, A1, A2)`` with ``A = A0 + lam A1 + lam**2 A2``.
    Returns ``(rho, drho, d2rho)`` and the residual norm.
    """
    A0, A1, A2 = parts
    A = A0 + lam * A1 + lam * lam * A2
    dA = A1 + 2.0 * lam * A2
    lu = linalg.lu_factor(A)
    rho = linalg.lu_solve(lu, rhs)
    drho = linalg.lu_solve(lu, -dA @ rho)
    d2rho = linalg.lu_solve(lu, -(2.0 * dA @ drho + 2.0 * A2 @ rho))
    residual = float(np.max(np.abs(A @ rho - rhs)))
    return rho, drho, d2rho, residual


def moment_matching_derivatives(lam: float, tau: int) -> tuple[float, float, float]:
    """Variance and its first two ``lam``-derivatives from the moment system."""
    _check_stable(lam, tau)
    rhs = np.zeros(tau + 1)
    rhs[0] = 1.0
    rho, drho, d2rho, residual = solve_moment_derivatives(_moment_parts(tau), lam, rhs)
    if residual > 1e-10 * max(1.0, abs(rho[0])):
        raise ConvergenceError(f"moment system residual {residual:.3g} at lambda={lam}, tau={tau}")
    return float(rho[0]), float(drho[0]), float(d2rho[0])


def moment_matching_variance(lam: float, tau: int) -> float:
    return moment_matching_derivatives(lam, tau)[0]


def recursive_variance(lam: float, tau: int) -> float:
    """Variance as ``n_tau / d_tau`` built from the determinant recursions.

    ``n_tau`` is the top-left minor of the moment matrix and ``d_tau`` its
    determinant.  The auxiliary sequence ``nt`` splits into an even and an
    odd chain; the even chain starts from ``nt[-2] = -lam**2``.
    """
    _check_stable(lam, tau)
    l2 = lam * lam
    nt = {-3: -1.0 + l2, -2: -l2, -1: -1.0, 0: 0.0}
    n = {-1: 0.0, 0: 1.0}
    d = {-1: -2.0 * lam, 0: 2.0 * lam - l2}
    for t in range(1, tau + 1):
        nt[t] = (2.0 - l2) * nt[t - 2] - nt[t - 4]
        if t % 2:
            n[t] = (-1.0 - lam) * n[t - 1] + nt[t - 1]
        else:
            n[t] = -(1.0 - lam) * n[t - 1] - lam * nt[t - 1]
        d[t] = d[t - 2] - l2 * (n[t] + n[t - 2])
    if d[tau] == 0.0:
        raise UnstableError(f"determinant vanishes at lambda={lam}, tau={tau}")
    return n[tau] / d[tau]


def numeric_convexity_check(tau: int, grid_size: int = 200, slack: float = 1e-9) -> bool:
    """Second central differences of the variance on a grid inside the stable interval."""
    thr = dt_single_threshold(tau)
    lam = thr * np.arange(1, grid_size + 1) / (grid_size + 1)
    rho = np.array([moment_matching_variance(float(v), tau) for v in lam])
    second = rho[2:] - 2.0 * rho[1:-1] + rho[:-2]
    return bool(np.all(second > -slack))
