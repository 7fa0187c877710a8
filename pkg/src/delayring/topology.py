"""Ring networks, delay models and the circulant feedback matrix.

Eigenvalues of the symmetric circulant gain matrix are available in closed
form, so the spectrum is never obtained from a dense eigensolver here; the
dense matrix exists for cross-checks and for simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import TopologyError

__all__ = [
    "DelayKind",
    "DelayModel",
    "NetworkSpec",
    "GainProfile",
    "Spectrum",
    "TopologyError",
    "circulant_eigenvalues",
    "build_feedback_matrix",
    "control_from_mismatches",
    "error_projector",
    "dft_frequencies",
    "offset_weights",
]


class DelayKind(str, Enum):
    LINEAR = "linear"
    SQRT = "sqrt"
    POWER = "power"
    TABLE = "table"
    CONSTANT = "constant"


@dataclass(frozen=True)
class DelayModel:
    """Latency as a function of the neighborhood radius, ``tau_n = f(n)``.

    Parameters
    ----------
    kind : DelayKind or str
        ``linear`` (scale*n), ``sqrt`` (scale*sqrt(n)), ``power``
        (scale*n**exponent), ``table`` (scale*table[n-1]) or ``constant``.
    scale : float
        Positive multiplier applied to every kind.
    exponent : float, optional
        Required for ``power``; must be non-negative so f is non-decreasing.
    table : sequence of float, optional
        Required for ``table``; entry ``i`` is the delay for ``n = i + 1``.
    """

    kind: DelayKind
    scale: float = 1.0
    exponent: float | None = None
    table: tuple[float, ...] | None = None

    def __post_init__(self):
        try:
            kind = DelayKind(self.kind)
        except ValueError:
            choices = ", ".join(k.value for k in DelayKind)
            raise TopologyError(f"delay.kind must be one of {choices}, got {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise TopologyError(f"delay.scale must be a positive finite number, got {self.scale!r}")
        if kind is DelayKind.POWER:
            if self.exponent is None or not math.isfinite(self.exponent) or self.exponent < 0:
                raise TopologyError("delay.exponent must be a finite number >= 0 for kind 'power'")
        if kind is DelayKind.TABLE:
            if not self.table:
                raise TopologyError("delay.table must be a non-empty list for kind 'table'")
            table = tuple(float(v) for v in self.table)
            if any(not math.isfinite(v) or v <= 0 for v in table):
                raise TopologyError("delay.table entries must be positive finite numbers")
            if any(b < a for a, b in zip(table, table[1:])):
                raise TopologyError("delay.table entries must be non-decreasing")
            object.__setattr__(self, "table", table)

    def __call__(self, n: int) -> float:
        if n < 1:
            raise TopologyError(f"neighborhood radius must be >= 1, got {n}")
        if self.kind is DelayKind.LINEAR:
            base = float(n)
        elif self.kind is DelayKind.SQRT:
            base = math.sqrt(n)
        elif self.kind is DelayKind.POWER:
            base = float(n) ** self.exponent
        elif self.kind is DelayKind.CONSTANT:
            base = 1.0
        else:
            if n > len(self.table):
                raise TopologyError(f"delay.table has {len(self.table)} entries, n={n} requested")
            base = self.table[n - 1]
        return self.scale * base

    @classmethod
    def linear(cls, scale: float = 1.0) -> "DelayModel":
        return cls(DelayKind.LINEAR, scale)

    @classmethod
    def sqrt(cls, scale: float = 1.0) -> "DelayModel":
        return cls(DelayKind.SQRT, scale)

    @classmethod
    def constant(cls, value: float = 1.0) -> "DelayModel":
        return cls(DelayKind.CONSTANT, value)

    @classmethod
    def power(cls, exponent: float, scale: float = 1.0) -> "DelayModel":
        return cls(DelayKind.POWER, scale, exponent=exponent)

    @classmethod
    def from_table(cls, values: Sequence[float], scale: float = 1.0) -> "DelayModel":
        return cls(DelayKind.TABLE, scale, table=tuple(values))


@dataclass(frozen=True)
class NetworkSpec:
    """Ring of ``N`` agents, each hearing from its ``n`` nearest pairs."""

    N: int
    n: int
    delay_model: DelayModel = field(default_factory=DelayModel.linear)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise TopologyError(f"N must be an integer >= 3, got {self.N!r}")
        if int(self.n) != self.n or self.n < 1:
            raise TopologyError(f"n must be an integer >= 1, got {self.n!r}")
        if 2 * self.n >= self.N:
            raise TopologyError(f"n must satisfy n < N/2 (N={self.N}, n={self.n})")
        tau = self.delay_model(self.n)
        if not (math.isfinite(tau) and tau > 0):
            raise TopologyError(f"delay at n={self.n} must be positive, got {tau!r}")

    @property
    def tau(self) -> float:
        return self.delay_model(self.n)

    @property
    def max_radius(self) -> int:
        return (self.N - 1) // 2

    @property
    def fully_connected(self) -> bool:
        return self.n == self.max_radius

    def with_radius(self, n: int) -> "NetworkSpec":
        return NetworkSpec(self.N, n, self.delay_model)


@dataclass(frozen=True)
class GainProfile:
    """Per-offset proportional gains ``k[l-1]`` and derivative gain ``eta``.

    Gains are not sign-constrained; stability is a property of the spectrum.
    """

    k: tuple[float, ...]
    eta: float | None = None

    def __post_init__(self):
        k = tuple(float(v) for v in np.atleast_1d(np.asarray(self.k, dtype=float)))
        if not k:
            raise TopologyError("gains.k must contain at least one gain")
        if not all(math.isfinite(v) for v in k):
            raise TopologyError("gains.k entries must be finite")
        object.__setattr__(self, "k", k)
        if self.eta is not None and not (math.isfinite(self.eta) and self.eta > 0):
            raise TopologyError(f"gains.eta must be positive, got {self.eta!r}")

    @classmethod
    def uniform(cls, n: int, k: float, eta: float | None = None) -> "GainProfile":
        return cls((float(k),) * n, eta)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.k, dtype=float)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of K ordered by DFT index; ``lambdas[0]`` is the consensus mode."""

    lambdas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))

    @property
    def N(self) -> int:
        return len(self.lambdas)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.lambdas, dtype=float)

    def nontrivial(self) -> np.ndarray:
        """Eigenvalues for j = 2..N (the controllable error modes)."""
        return self.as_array()[1:]


def dft_frequencies(N: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(N) / N


def offset_weights(N: int, n: int) -> np.ndarray:
    """Matrix ``W`` of shape (N, n) with ``W[j, l-1] = 2 (1 - cos(2 pi j l / N))``.

    Row ``j`` holds the sensitivity of eigenvalue ``j`` (0-based) to ``k_l``,
    so the spectrum is ``W @ k``.
    """
    # integer product reduced mod N before the cosine keeps large N exact
    jl = np.outer(np.arange(N), np.arange(1, n + 1)) % N
    W = 2.0 * (1.0 - np.cos(2.0 * np.pi * jl / N))
    W[0, :] = 0.0
    return W


def _check_gains(spec: NetworkSpec, gains: GainProfile) -> np.ndarray:
    k = gains.as_array()
    if k.size != spec.n:
        raise TopologyError(f"gains.k has {k.size} entries but the network has n={spec.n}")
    return k


def circulant_eigenvalues(spec: NetworkSpec, gains: GainProfile) -> Spectrum:
    k = _check_gains(spec, gains)
    lam = offset_weights(spec.N, spec.n) @ k
    lam[0] = 0.0
    # enforce the palindromic pairing exactly
    half = lam[1:]
    lam[1:] = 0.5 * (half + half[::-1])
    return Spectrum(tuple(lam))


def build_feedback_matrix(spec: NetworkSpec, gains: GainProfile) -> np.ndarray:
    k = _check_gains(spec, gains)
    if 2 * spec.n + 1 > spec.N:
        raise TopologyError("offsets overlap around the ring (2n + 1 > N)")
    first = np.zeros(spec.N)
    # zero row sums: the diagonal carries both the ahead and behind offsets
    first[0] = 2.0 * k.sum()
    first[1 : spec.n + 1] = -k
    first[spec.N - spec.n :] = -k[::-1]
    idx = (np.arange(spec.N)[None, :] - np.arange(spec.N)[:, None]) % spec.N
    return first[idx]


def control_from_mismatches(spec: NetworkSpec, gains: GainProfile, states) -> np.ndarray:
    """Proportional input computed agent by agent from neighbor mismatches."""
    k = _check_gains(spec, gains)
    x = np.asarray(states, dtype=float)
    if x.shape[-1] != spec.N:
        raise TopologyError(f"states must have length N={spec.N}, got {x.shape[-1]}")
    u = np.zeros_like(x)
    for ell in range(1, spec.n + 1):
        ahead = x - np.roll(x, -ell, axis=-1)
        behind = x - np.roll(x, ell, axis=-1)
        u -= k[ell - 1] * (ahead + behind)
    return u


def error_projector(N: int) -> np.ndarray:
    if N < 2:
        raise TopologyError("N must be >= 2")
    return np.eye(N) - np.full((N, N), 1.0 / N)
