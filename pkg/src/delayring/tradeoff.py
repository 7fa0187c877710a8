"""Sweeps over the neighborhood radius and the latency/network decomposition.

For the continuous single integrator under the uniform-gain design every
mode's variance is ``C~_j(n) * tau_n`` with ``C~_j >= C*``, so the total splits
into a latency term ``(N - 1) C* tau_n`` (what a perfect spectrum at the
delay ``tau_n`` would cost) and a network term ``tau_n * sum(C~_j - C*)``
(the excess from not placing every eigenvalue at ``lambda*``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import ct_single
from .errors import InfeasibleDesignError
from .modes import ModelKind, ModelSettings
from .optimizer import DesignResult, design_exact, design_quadratic_approx
from .topology import DelayModel, NetworkSpec

__all__ = [
    "Decomposition",
    "TradeoffRow",
    "TradeoffCurve",
    "decompose",
    "local_minima",
    "sweep",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("n", "tau", "objective_exact", "objective_approx", "j_network", "j_latency")


@dataclass(frozen=True)
class Decomposition:
    j_network: float
    j_latency: float
    product_form: float
    coefficient_sum: float


def decompose(spec: NetworkSpec) -> Decomposition:
    """Split the uniform-gain ct single-integrator variance at ``spec``.

    Raises
    ------
    InfeasibleDesignError
        If the uniform design destabilizes a mode at this radius.
    """
    coeffs = ct_single.suboptimal_coefficients(spec)
    c_star = ct_single.optimal_point(1.0).C_star
    tau = spec.tau
    return Decomposition(
        j_network=tau * float(np.sum(coeffs - c_star)),
        j_latency=(spec.N - 1) * c_star * tau,
        product_form=tau * float(np.sum(coeffs)),
        coefficient_sum=float(np.sum(coeffs)),
    )


@dataclass(frozen=True)
class TradeoffRow:
    n: int
    tau: float
    objective_exact: float
    objective_approx: float
    j_network: float = math.nan
    j_latency: float = math.nan
    coefficient_sum: float = math.nan
    feasible_exact: bool = True
    feasible_approx: bool = True
    converged: bool = True

    @property
    def infeasible(self) -> bool:
        return not (self.feasible_exact or self.feasible_approx)

    def record(self) -> dict:
        return {
            "n": self.n,
            "tau": self.tau,
            "objective_exact": self.objective_exact,
            "objective_approx": self.objective_approx,
            "j_network": self.j_network,
            "j_latency": self.j_latency,
            "coefficient_sum": self.coefficient_sum,
            "feasible_exact": self.feasible_exact,
            "feasible_approx": self.feasible_approx,
            "converged": self.converged,
        }


def local_minima(values: Sequence[float]) -> list[int]:
    """Indices of local minima; a flat run counts once, at its left end."""
    v = np.asarray(values, dtype=float)
    out = []
    for i in range(v.size):
        if not math.isfinite(v[i]):
            continue
        left_ok = i == 0 or not v[i] >= v[i - 1]
        right_ok = i == v.size - 1 or v[i] <= v[i + 1] or not math.isfinite(v[i + 1])
        if left_ok and right_ok:
            out.append(i)
    return out


def _argmin_first(values: np.ndarray) -> int | None:
    finite = np.isfinite(values)
    if not finite.any():
        return None
    # np.argmin returns the first occurrence, which breaks ties toward smaller n
    return int(np.argmin(np.where(finite, values, np.inf)))


@dataclass(frozen=True)
class TradeoffCurve:
    rows: tuple[TradeoffRow, ...]
    model: str
    designs: tuple[tuple[DesignResult, DesignResult], ...] = ()

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def _n_at(self, idx: int | None) -> int | None:
        return None if idx is None else self.rows[idx].n

    @property
    def n_star_exact(self) -> int | None:
        return self._n_at(_argmin_first(self.column("objective_exact")))

    @property
    def n_star_approx(self) -> int | None:
        return self._n_at(_argmin_first(self.column("objective_approx")))

    def local_minima_exact(self) -> list[int]:
        return [self.rows[i].n for i in local_minima(self.column("objective_exact"))]

    def local_minima_approx(self) -> list[int]:
        return [self.rows[i].n for i in local_minima(self.column("objective_approx"))]


def sweep(
    N: int,
    delay_model: DelayModel,
    settings: ModelSettings,
    n_range: Iterable[int] | None = None,
    keep_designs: bool = False,
) -> TradeoffCurve:
    """Optimal variance for every radius in ``n_range`` (default: all radii).

    The decomposition columns are filled for the ct single-integrator model
    only and are NaN otherwise, as is any column whose design is infeasible.
    """
    max_n = (N - 1) // 2
    radii = list(range(1, max_n + 1)) if n_range is None else sorted({int(n) for n in n_range})
    if not radii:
        raise ValueError("n_range is empty")
    bad = [n for n in radii if not 1 <= n <= max_n]
    if bad:
        raise ValueError(f"n_range must lie in 1..{max_n} for N={N}, got {bad}")

    rows = []
    designs = []
    for n in radii:
        spec = NetworkSpec(N, n, delay_model)
        mv = settings.mode_variance(spec)
        approx = design_quadratic_approx(spec, settings, mv)
        try:
            exact = design_exact(spec, settings, mv)
        except InfeasibleDesignError:
            exact = None
        parts = {}
        if settings.kind is ModelKind.CT_SINGLE and approx.feasible:
            d = decompose(spec)
            parts = dict(j_network=d.j_network, j_latency=d.j_latency, coefficient_sum=d.coefficient_sum)
        rows.append(
            TradeoffRow(
                n=n,
                tau=float(mv.tau),
                objective_exact=exact.objective if exact is not None else math.inf,
                objective_approx=approx.objective,
                feasible_exact=exact is not None,
                feasible_approx=approx.feasible,
                converged=exact is None or exact.converged,
                **parts,
            )
        )
        if keep_designs:
            designs.append((exact, approx))
    return TradeoffCurve(tuple(rows), settings.mode_variance(NetworkSpec(N, radii[0], delay_model)).label,
                         tuple(designs))
