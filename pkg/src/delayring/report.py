"""Per-eigenvalue stability and variance reports.

Both reports work on a list of nontrivial eigenvalues in the model's own
units (time for continuous models, sampling periods for discrete ones), so
they serve network configs (eigenvalues from ``K``) and explicit eigenvalue
lists alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import ct_double, ct_single, dt_double, dt_single
from .errors import UnstableError
from .modes import ModelKind, mode_variance
from .sim import SimConfig, simulate

__all__ = [
    "METHODS",
    "StabilityRow",
    "StabilityReport",
    "VarianceRow",
    "VarianceReport",
    "stability_report",
    "variance_report",
    "default_method",
]

METHODS = ("closed-form", "quadrature", "moment-matching", "recursive", "monte-carlo")

_ALLOWED = {
    ModelKind.CT_SINGLE: ("closed-form", "monte-carlo"),
    ModelKind.CT_DOUBLE: ("closed-form", "monte-carlo"),
    ModelKind.DT_SINGLE: ("quadrature", "moment-matching", "recursive", "monte-carlo"),
    ModelKind.DT_DOUBLE: ("quadrature", "moment-matching", "monte-carlo"),
}

_TAGS = {
    (ModelKind.CT_SINGLE, "closed-form"): "ct-single-closed-form",
    (ModelKind.CT_DOUBLE, "closed-form"): "ct-double-reduced",
    (ModelKind.DT_SINGLE, "quadrature"): "dt-quadrature",
    (ModelKind.DT_SINGLE, "moment-matching"): "dt-moment-matching",
    (ModelKind.DT_SINGLE, "recursive"): "dt-recursive",
    (ModelKind.DT_DOUBLE, "quadrature"): "dt2-quadrature",
    (ModelKind.DT_DOUBLE, "moment-matching"): "dt2-moment-matching",
}


def default_method(kind: ModelKind) -> str:
    return "moment-matching" if ModelKind(kind).discrete else "closed-form"


@dataclass(frozen=True)
class StabilityRow:
    j: int
    lam: float
    upper: float
    margin: float
    stable: bool

    def record(self) -> dict:
        return {"j": self.j, "lambda": self.lam, "upper": self.upper, "margin": self.margin, "stable": self.stable}


@dataclass(frozen=True)
class StabilityReport:
    model: str
    tau: float
    upper: float
    rows: tuple[StabilityRow, ...]

    @property
    def stable(self) -> bool:
        return all(r.stable for r in self.rows)

    @property
    def margin(self) -> float:
        return min((r.margin for r in self.rows), default=math.inf)


def _upper(kind: ModelKind, tau: float, eta: float | None) -> float:
    if kind is ModelKind.CT_SINGLE:
        return math.inf if tau == 0 else ct_single.HALF_PI / tau
    if kind is ModelKind.CT_DOUBLE:
        return ct_double.phi_of_eta(eta * tau) / tau
    if kind is ModelKind.DT_SINGLE:
        return dt_single.dt_single_threshold(int(tau))
    return dt_double.dt_double_upper(eta, int(tau))


def stability_report(kind, lambdas: Sequence[float], tau: float, eta: float | None = None,
                     indices: Sequence[int] | None = None) -> StabilityReport:
    """Stable interval ``(0, upper)`` and each eigenvalue's distance to its edge.

    ``eta`` is the physical derivative gain (ct-double) or the velocity gain
    (dt-double).  A negative margin means the eigenvalue is outside.
    """
    kind = ModelKind(kind)
    upper = _upper(kind, tau, eta)
    idx = list(indices) if indices is not None else list(range(2, len(lambdas) + 2))
    rows = []
    for j, lam in zip(idx, lambdas):
        lam = float(lam)
        rows.append(StabilityRow(j, lam, upper, min(lam, upper - lam), bool(0 < lam < upper)))
    return StabilityReport(kind.value, float(tau), upper, tuple(rows))


@dataclass(frozen=True)
class VarianceRow:
    j: int
    lam: float
    variance: float
    standard_error: float = math.nan

    def record(self) -> dict:
        return {"j": self.j, "lambda": self.lam, "variance": self.variance, "standard_error": self.standard_error}


@dataclass(frozen=True)
class VarianceReport:
    rows: tuple[VarianceRow, ...]
    total: float
    method: str
    model: str
    approximate: bool = False
    standard_error: float = math.nan
    diverged: bool = False


def _analytic(kind: ModelKind, method: str, lam: float, tau: float, eta: float | None) -> float:
    if kind is ModelKind.CT_SINGLE:
        return ct_single.variance_ct_single(lam, tau)
    if kind is ModelKind.CT_DOUBLE:
        mv = mode_variance(kind, tau, eta * tau)
        return float(mv(np.array([lam]))[0])
    t = int(tau)
    if kind is ModelKind.DT_SINGLE:
        if method == "quadrature":
            return dt_single.wiener_khintchine_variance(dt_single.characteristic_coeffs(lam, t))
        if method == "recursive":
            return dt_single.recursive_variance(lam, t)
        return dt_single.moment_matching_variance(lam, t)
    sub = dt_double.DtPdSubsystem(eta, lam, t)
    if method == "quadrature":
        return dt_double.quadrature_dt_double(sub)
    return dt_double.moment_matching_dt_double(sub)


def variance_report(
    kind,
    lambdas: Sequence[float],
    tau: float,
    eta: float | None = None,
    method: str | None = None,
    indices: Sequence[int] | None = None,
    sim: dict | None = None,
) -> VarianceReport:
    """Variance of each mode and their total.

    Parameters
    ----------
    method : str, optional
        One of :data:`METHODS`; defaults to closed form for continuous models
        and moment matching for discrete ones.
    sim : dict, optional
        Keyword arguments for :class:`~delayring.sim.SimConfig` used by
        ``monte-carlo`` (``horizon``, ``step_size``, ``seed``, ...).  The
        modes are simulated as independent subsystems.

    Raises
    ------
    UnstableError
        If an analytic method is asked for an unstable eigenvalue.
    ValueError
        If the method does not apply to the model.
    """
    kind = ModelKind(kind)
    method = method or default_method(kind)
    if method not in _ALLOWED[kind]:
        raise ValueError(f"method {method!r} is not available for {kind.value}; choose from {', '.join(_ALLOWED[kind])}")
    lam = [float(v) for v in lambdas]
    idx = list(indices) if indices is not None else list(range(2, len(lam) + 2))

    if method == "monte-carlo":
        cfg = SimConfig(model=kind, lambdas=tuple(lam), tau=tau, eta=eta, **(sim or {}))
        res = simulate(cfg)
        per_rep = np.asarray(res.replicate_estimates)
        rows = tuple(VarianceRow(j, l, v) for j, l, v in zip(idx, lam, res.component_estimates))
        return VarianceReport(rows, res.variance_estimate, "monte-carlo", kind.value, False,
                              res.standard_error if per_rep.size > 1 else math.nan, res.diverged)

    rep = stability_report(kind, lam, tau, eta, idx)
    bad = [r for r in rep.rows if not r.stable]
    if bad:
        raise UnstableError(
            f"{kind.value}: eigenvalue j={bad[0].j} lambda={bad[0].lam:.6g} outside (0, {rep.upper:.6g})"
        )
    rows = tuple(VarianceRow(j, l, _analytic(kind, method, l, tau, eta)) for j, l in zip(idx, lam))
    total = math.fsum(r.variance for r in rows)
    return VarianceReport(rows, total, _TAGS[(kind, method)], kind.value, kind is ModelKind.CT_DOUBLE)
