"""Per-eigenvalue variance evaluators for the four agent models.

Every model decouples into scalar modes indexed by the eigenvalues of K.  A
:class:`ModeVariance` bundles, for one model at one delay, the stationary
variance of a mode as a function of its eigenvalue, its first two
derivatives, the open stability interval ``(0, upper)`` and the
variance-minimizing eigenvalue.  All eigenvalues are in physical units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import optimize

from . import ct_double, ct_single, dt_double, dt_single
from .dt_single import DtDelay
from .errors import TopologyError, UnstableError
from .topology import NetworkSpec

__all__ = ["ModelKind", "ModelSettings", "ModeVariance", "mode_variance"]


class ModelKind(str, Enum):
    CT_SINGLE = "ct-single"
    CT_DOUBLE = "ct-double"
    DT_SINGLE = "dt-single"
    DT_DOUBLE = "dt-double"

    @property
    def discrete(self) -> bool:
        return self in (ModelKind.DT_SINGLE, ModelKind.DT_DOUBLE)

    @property
    def second_order(self) -> bool:
        return self in (ModelKind.CT_DOUBLE, ModelKind.DT_DOUBLE)


@dataclass(frozen=True)
class ModelSettings:
    """Model choice plus the parameters that are not part of the topology.

    For ``ct-double`` give exactly one of ``eta`` (physical derivative gain)
    or ``eta_normalized`` (``eta * tau_n``, held fixed across radii).
    ``dt-double`` uses ``eta`` as the discrete velocity gain.
    """

    kind: ModelKind
    sampling_time: float = 1.0
    eta: float | None = None
    eta_normalized: float | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", ModelKind(self.kind))
        except ValueError:
            choices = ", ".join(k.value for k in ModelKind)
            raise TopologyError(f"model must be one of {choices}, got {self.kind!r}") from None
        if not self.sampling_time > 0:
            raise TopologyError(f"sampling_time must be positive, got {self.sampling_time!r}")
        if self.eta is not None and self.eta_normalized is not None:
            raise TopologyError("give either gains.eta or eta_normalized, not both")
        if self.eta_normalized is not None and self.kind is not ModelKind.CT_DOUBLE:
            raise TopologyError("eta_normalized only applies to the ct-double model")
        if self.kind is ModelKind.CT_DOUBLE and self.eta is None and self.eta_normalized is None:
            raise TopologyError("ct-double needs gains.eta or eta_normalized")
        if self.kind is ModelKind.DT_DOUBLE and self.eta is None:
            raise TopologyError("dt-double needs gains.eta")
        for name in ("eta", "eta_normalized"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise TopologyError(f"{name} must be positive, got {v!r}")

    def delay_for(self, spec: NetworkSpec) -> float:
        """Delay in the model's own units: time (ct) or steps (dt)."""
        if self.kind.discrete:
            return DtDelay.from_continuous(spec.tau, self.sampling_time).steps
        return spec.tau

    def mode_variance(self, spec: NetworkSpec) -> "ModeVariance":
        tau = self.delay_for(spec)
        if self.kind is ModelKind.CT_DOUBLE:
            eta_n = self.eta_normalized if self.eta_normalized is not None else self.eta * tau
            return mode_variance(self.kind, tau, eta_n)
        return mode_variance(self.kind, tau, self.eta)


@dataclass(frozen=True)
class ModeVariance:
    kind: ModelKind
    tau: float
    eta: float | None
    upper: float
    label: str
    approximate: bool = False
    _star: list = field(default_factory=list, repr=False, compare=False)

    def stable(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        return (lam > 0) & (lam < self.upper)

    def derivatives(self, lam):
        """Value, first and second derivative at each eigenvalue (array input)."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if not np.all(self.stable(lam)):
            raise UnstableError(f"{self.label}: eigenvalue(s) outside (0, {self.upper:.6g})")
        k = self.kind
        if k is ModelKind.CT_SINGLE:
            return ct_single.variance_ct_single_derivatives(lam, self.tau)
        if k is ModelKind.CT_DOUBLE:
            # physical variance = tau^3 * normalized variance at lam * tau
            t = self.tau
            v, d1, d2 = ct_double.reduced_model_variance_derivatives(self.eta, lam * t)
            return v * t**3, d1 * t**4, d2 * t**5
        out = np.empty((3, lam.size))
        for i, x in enumerate(lam):
            if k is ModelKind.DT_SINGLE:
                out[:, i] = dt_single.moment_matching_derivatives(float(x), int(self.tau))
            else:
                sub = dt_double.DtPdSubsystem(self.eta, float(x), int(self.tau))
                out[:, i] = dt_double.moment_matching_dt_double_derivatives(sub)
        return out[0], out[1], out[2]

    def __call__(self, lam) -> np.ndarray:
        return self.derivatives(lam)[0]

    @property
    def lambda_star(self) -> float:
        """Eigenvalue minimizing the per-mode variance."""
        if not self._star:
            self._star.append(self._find_star())
        return self._star[0]

    def _find_star(self) -> float:
        if self.kind in (ModelKind.CT_SINGLE, ModelKind.CT_DOUBLE):
            if self.tau == 0:
                raise ValueError("no finite optimal eigenvalue without delay")
            return ct_single.optimal_point(self.tau).lambda_star
        f = lambda x: float(self(np.array([x]))[0])
        hi = self.upper
        res = optimize.minimize_scalar(f, bounds=(hi * 1e-6, hi * (1 - 1e-9)), method="bounded",
                                       options={"xatol": hi * 1e-10})
        x = float(res.x)
        # polish with Newton steps on the derivative
        for _ in range(20):
            _, d1, d2 = self.derivatives(np.array([x]))
            if d2[0] <= 0:
                break
            step = d1[0] / d2[0]
            if not self.stable(x - step):
                break
            x -= step
            if abs(step) < 1e-15 * max(1.0, abs(x)):
                break
        return x


def mode_variance(kind: ModelKind | str, tau: float, eta: float | None = None) -> ModeVariance:
    """Build the per-mode evaluator.

    ``tau`` is the delay in the model's units (time, or steps for discrete
    models).  ``eta`` is the normalized derivative gain for ``ct-double`` and
    the discrete velocity gain for ``dt-double``.
    """
    kind = ModelKind(kind)
    if kind is ModelKind.CT_SINGLE:
        upper = math.inf if tau == 0 else ct_single.HALF_PI / tau
        return ModeVariance(kind, float(tau), None, upper, "ct-single-closed-form")
    if kind is ModelKind.CT_DOUBLE:
        if eta is None or not tau > 0:
            raise TopologyError("ct-double needs a positive delay and eta")
        upper = ct_double.phi_of_eta(eta) / tau
        return ModeVariance(kind, float(tau), float(eta), upper, "ct-double-reduced", approximate=True)
    tau = int(tau)
    if kind is ModelKind.DT_SINGLE:
        return ModeVariance(kind, tau, None, dt_single.dt_single_threshold(tau), "dt-moment-matching")
    if eta is None:
        raise TopologyError("dt-double needs eta")
    upper = dt_double.dt_double_upper(eta, tau)
    if upper <= 0:
        raise UnstableError(f"no stable eigenvalue for dt-double with eta={eta}, tau={tau}")
    return ModeVariance(kind, tau, float(eta), upper, "dt2-moment-matching")
