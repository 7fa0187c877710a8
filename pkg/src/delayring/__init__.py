"""Minimum-variance consensus on ring networks with topology-dependent delay."""

from .errors import ConvergenceError, DelayRingError, InfeasibleDesignError, TopologyError, UnstableError
from .modes import ModelKind, ModelSettings, mode_variance
from .optimizer import DesignResult, design_exact, design_quadratic_approx
from .sim import SimConfig, SimResult, simulate
from .topology import DelayModel, GainProfile, NetworkSpec, Spectrum, circulant_eigenvalues
from .tradeoff import TradeoffCurve, decompose, sweep

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DelayRingError",
    "InfeasibleDesignError",
    "TopologyError",
    "UnstableError",
    "ModelKind",
    "ModelSettings",
    "mode_variance",
    "DesignResult",
    "design_exact",
    "design_quadratic_approx",
    "SimConfig",
    "SimResult",
    "simulate",
    "DelayModel",
    "GainProfile",
    "NetworkSpec",
    "Spectrum",
    "circulant_eigenvalues",
    "TradeoffCurve",
    "decompose",
    "sweep",
]
