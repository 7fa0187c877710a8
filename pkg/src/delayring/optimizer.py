"""Minimum-variance gain design on the ring.

The eigenvalues of K are linear in the offset gains, ``lam = W k``, and each
mode's variance is convex on its stability interval and blows up at both
ends.  The total variance is therefore a smooth convex function of ``k`` on
an open polyhedron whose boundary it already penalizes, so a damped Newton
iteration with feasibility-preserving backtracking needs no extra barrier
term and converges in a handful of steps.

The uniform-gain design ``k_l = lam_star / (2n + 1)`` minimizes the squared
spread of the spectrum around ``lam_star`` and is used as the starting point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleDesignError
from .modes import ModelKind, ModelSettings, ModeVariance
from .topology import GainProfile, NetworkSpec, Spectrum, circulant_eigenvalues, offset_weights

__all__ = [
    "DesignResult",
    "ModeFold",
    "design_quadratic_approx",
    "design_exact",
    "random_feasible_start",
    "objective_and_gradient",
]

GRAD_TOL = 1e-8
MAX_ITER = 10_000


@dataclass(frozen=True)
class DesignResult:
    gains: GainProfile
    spectrum: Spectrum
    objective: float
    method: str
    iterations: int = 0
    converged: bool = True
    feasible: bool = True
    grad_norm: float = math.nan
    model: str = ""
    tau: float = math.nan
    message: str = ""

    def record(self) -> dict:
        return {
            "method": self.method,
            "model": self.model,
            "tau": self.tau,
            "gains": list(self.gains.k),
            "eta": self.gains.eta,
            "spectrum": list(self.spectrum.lambdas),
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "feasible": self.feasible,
            "grad_norm": self.grad_norm,
            "message": self.message,
        }


@dataclass(frozen=True)
class ModeFold:
    """Distinct nontrivial modes with their multiplicities.

    Modes ``j`` and ``N - j`` share an eigenvalue, so only ``j = 1..N//2``
    (0-based) are kept, each counted twice except the Nyquist mode.
    """

    W: np.ndarray
    weights: np.ndarray = field(repr=False)

    @classmethod
    def for_spec(cls, spec: NetworkSpec) -> "ModeFold":
        N = spec.N
        rows = np.arange(1, N // 2 + 1)
        weights = np.where(2 * rows == N, 1.0, 2.0)
        return cls(offset_weights(N, spec.n)[rows], weights)

    def eigenvalues(self, k: np.ndarray) -> np.ndarray:
        return self.W @ k


def _physical_eta(settings: ModelSettings, mv: ModeVariance) -> float | None:
    if settings.kind is ModelKind.CT_DOUBLE:
        return mv.eta / mv.tau
    if settings.kind is ModelKind.DT_DOUBLE:
        return settings.eta
    return None


def _evaluate(fold: ModeFold, mv: ModeVariance, k: np.ndarray, order: int = 1):
    lam = fold.eigenvalues(k)
    if not np.all(mv.stable(lam)):
        return math.inf, None, None
    v, d1, d2 = mv.derivatives(lam)
    f = float(np.dot(fold.weights, v))
    g = fold.W.T @ (fold.weights * d1)
    H = fold.W.T @ ((fold.weights * d2)[:, None] * fold.W) if order > 1 else None
    return f, g, H


def objective_and_gradient(spec: NetworkSpec, settings: ModelSettings, k, variance_fn: ModeVariance | None = None):
    """Total variance over modes j = 2..N and its gradient in the gains."""
    mv = variance_fn or settings.mode_variance(spec)
    f, g, _ = _evaluate(ModeFold.for_spec(spec), mv, np.asarray(k, dtype=float))
    return f, g


def _result(spec, settings, mv, k, objective, method, **kw) -> DesignResult:
    gains = GainProfile(tuple(k), _physical_eta(settings, mv))
    return DesignResult(
        gains=gains,
        spectrum=circulant_eigenvalues(spec, gains),
        objective=objective,
        method=method,
        model=mv.label,
        tau=float(mv.tau),
        **kw,
    )


def design_quadratic_approx(
    spec: NetworkSpec, settings: ModelSettings, variance_fn: ModeVariance | None = None
) -> DesignResult:
    mv = variance_fn or settings.mode_variance(spec)
    k = np.full(spec.n, mv.lambda_star / (2 * spec.n + 1))
    fold = ModeFold.for_spec(spec)
    lam = fold.eigenvalues(k)
    ok = mv.stable(lam)
    if not np.all(ok):
        j = int(np.flatnonzero(~ok)[0]) + 2
        msg = f"uniform gain destabilizes subsystem j={j} (lambda={lam[~ok][0]:.6g}, bound {mv.upper:.6g})"
        return _result(spec, settings, mv, k, math.inf, "quadratic-approx", feasible=False, converged=False, message=msg)
    f, g, _ = _evaluate(fold, mv, k)
    return _result(spec, settings, mv, k, f, "quadratic-approx", grad_norm=float(np.linalg.norm(g)))


def _feasible_start(fold: ModeFold, mv: ModeVariance, n: int) -> np.ndarray:
    k = np.full(n, mv.lambda_star / (2 * n + 1))
    for _ in range(200):
        if np.all(mv.stable(fold.eigenvalues(k))):
            return k
        k = 0.5 * k
    raise InfeasibleDesignError("no feasible starting gains found by shrinking the uniform design")


def random_feasible_start(spec: NetworkSpec, settings: ModelSettings, rng: np.random.Generator, spread: float = 0.5):
    """Random positive gains around the uniform design, shrunk until stable."""
    mv = settings.mode_variance(spec)
    fold = ModeFold.for_spec(spec)
    base = _feasible_start(fold, mv, spec.n)
    k = base * (1.0 + spread * rng.uniform(-1.0, 1.0, size=spec.n))
    while not np.all(mv.stable(fold.eigenvalues(k))):
        k = 0.9 * k
    return k


def design_exact(
    spec: NetworkSpec,
    settings: ModelSettings,
    variance_fn: ModeVariance | None = None,
    start=None,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
) -> DesignResult:
    """Minimize the total steady-state variance over all offset gains.

    Raises
    ------
    InfeasibleDesignError
        If no stable starting point can be found.
    """
    mv = variance_fn or settings.mode_variance(spec)
    fold = ModeFold.for_spec(spec)
    if start is None:
        k = _feasible_start(fold, mv, spec.n)
    else:
        k = np.asarray(start, dtype=float).copy()
        if k.size != spec.n:
            raise ValueError(f"start has {k.size} gains, expected {spec.n}")
        if not np.all(mv.stable(fold.eigenvalues(k))):
            raise InfeasibleDesignError("starting gains are not stable")

    f, g, H = _evaluate(fold, mv, k, order=2)
    gnorm = float(np.linalg.norm(g))
    it = 0
    stalled = False
    while gnorm >= tol and it < max_iter:
        it += 1
        try:
            step = -np.linalg.solve(H, g)
            if not np.dot(step, g) < 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = -g
        slope = float(np.dot(step, g))
        # Near the optimum the predicted decrease can fall below the
        # resolution of f while the gradient is still well resolved.  The
        # Armijo test is then meaningless, so a full step is accepted if it
        # shrinks the gradient instead.
        if -0.5 * slope < 64 * np.finfo(float).eps * abs(f):
            f_new, g_new, H_new = _evaluate(fold, mv, k + step, order=2)
            if g_new is None or not np.linalg.norm(g_new) < gnorm:
                stalled = True
                break
            k = k + step
            f, g, H = f_new, g_new, H_new
            gnorm = float(np.linalg.norm(g))
            continue
        t = 1.0
        while True:
            f_new, g_new, H_new = _evaluate(fold, mv, k + t * step, order=2)
            if f_new <= f + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-20:
                break
        if t < 1e-20 or not f_new < f:
            stalled = True
            break
        k = k + t * step
        f, g, H = f_new, g_new, H_new
        gnorm = float(np.linalg.norm(g))

    converged = gnorm < tol
    msg = ""
    if not converged and stalled:
        # A one-ulp change in k moves the gradient by about |H| eps |k|, so
        # no representable iterate can do much better than this floor.
        floor = 16.0 * np.linalg.norm(H, 2) * np.finfo(float).eps * np.linalg.norm(k)
        converged = gnorm <= floor
        if converged:
            msg = f"gradient norm {gnorm:.3g} is at the rounding floor {floor:.3g} of the iterate"
    if not converged:
        msg = ("line search stalled" if stalled else f"iteration limit {max_iter} reached") + (
            f" with gradient norm {gnorm:.3g}"
        )
    return _result(spec, settings, mv, k, f, "exact", iterations=it, converged=converged,
                   grad_norm=gnorm, message=msg)
