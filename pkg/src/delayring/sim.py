"""Monte Carlo estimates of the steady-state consensus-error variance.

Continuous models are integrated with Euler-Maruyama on a grid aligned to the
delay, discrete models are iterated exactly.  Two layouts are supported:

* network: ``N`` agents coupled through the circulant ``K``; the error
  ``x = Omega x_bar`` is measured after every step;
* subsystems: independent scalar modes with the given eigenvalues, each
  driven by its own unit noise, which is what the decoupling predicts.

Replicates are batched in one array but every replicate draws its noise
from its own Philox stream keyed by ``(seed, replicate)``, so a replicate's
path does not depend on how many others run beside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dt_single import DtDelay
from .modes import ModelKind
from .topology import GainProfile, NetworkSpec, build_feedback_matrix

__all__ = [
    "SimConfig",
    "SimResult",
    "simulate",
    "simulate_ct_single",
    "simulate_ct_double",
    "simulate_dt",
    "default_step_size",
    "replicate_generator",
]

DIVERGENCE_CEILING = 1e12
_CHUNK = 2048


def replicate_generator(seed: int, replicate: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replicate,))))


@dataclass(frozen=True)
class SimConfig:
    """Simulation setup.

    Give either ``spec`` and ``gains`` (network layout) or ``lambdas`` and
    ``tau`` (subsystem layout).  ``horizon`` is a time for continuous models
    and a number of steps for discrete ones; ``tau`` follows the same
    convention.  ``eta`` is the physical derivative gain for ``ct-double`` and
    the velocity gain for ``dt-double``; in the network layout it is taken
    from ``gains.eta`` when not given.
    """

    model: ModelKind
    horizon: float
    spec: NetworkSpec | None = None
    gains: GainProfile | None = None
    lambdas: tuple[float, ...] | None = None
    tau: float | None = None
    eta: float | None = None
    step_size: float | None = None
    burn_in: float = 0.5
    seed: int = 0
    replicates: int = 16
    sampling_time: float = 1.0
    noise_substeps: int = 1
    divergence_ceiling: float = DIVERGENCE_CEILING
    trajectory_every: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model", ModelKind(self.model))
        network = self.spec is not None or self.gains is not None
        subsystems = self.lambdas is not None or self.tau is not None
        if network == subsystems:
            raise ValueError("give either spec and gains, or lambdas and tau")
        if network and (self.spec is None or self.gains is None):
            raise ValueError("network simulation needs both spec and gains")
        if subsystems:
            if self.lambdas is None or self.tau is None:
                raise ValueError("subsystem simulation needs both lambdas and tau")
            object.__setattr__(self, "lambdas", tuple(float(v) for v in np.atleast_1d(self.lambdas)))
            if not self.lambdas:
                raise ValueError("lambdas is empty")
            if not self.tau >= 0:
                raise ValueError(f"tau must be >= 0, got {self.tau!r}")
        if self.model.second_order and self.effective_eta is None:
            raise ValueError(f"{self.model.value} needs eta")
        if not 0 <= self.burn_in < 1:
            raise ValueError(f"burn_in must be in [0, 1), got {self.burn_in!r}")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ValueError(f"replicates must be a positive integer, got {self.replicates!r}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size!r}")
        if int(self.noise_substeps) != self.noise_substeps or self.noise_substeps < 1:
            raise ValueError("noise_substeps must be a positive integer")
        if self.model.discrete and self.noise_substeps != 1:
            raise ValueError("noise_substeps only applies to continuous models")
        if not int(self.seed) == self.seed or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")

    @property
    def network(self) -> bool:
        return self.spec is not None

    @property
    def effective_eta(self) -> float | None:
        if self.eta is not None:
            return float(self.eta)
        if self.gains is not None and self.gains.eta is not None:
            return float(self.gains.eta)
        return None

    @property
    def delay(self) -> float:
        """Delay in model units (time or steps)."""
        if self.network:
            if self.model.discrete:
                return DtDelay.from_continuous(self.spec.tau, self.sampling_time).steps
            return self.spec.tau
        return self.tau


def default_step_size(model: ModelKind, tau: float, eta: float | None = None) -> float:
    """``tau / m`` with ``m >= 64`` a power of two.

    For the continuous double integrator ``m`` also keeps ``eta * dt <= 1/16``
    so the fast velocity pole is resolved.  Without delay the step is 1/64.
    """
    model = ModelKind(model)
    base = tau if tau > 0 else 1.0
    m = 64
    if model is ModelKind.CT_DOUBLE and eta is not None:
        while eta * base / m > 1.0 / 16:
            m *= 2
    return base / m


@dataclass(frozen=True)
class SimResult:
    variance_estimate: float
    standard_error: float
    replicate_estimates: tuple[float, ...]
    diverged: bool
    component_estimates: tuple[float, ...] = ()
    component_diverged: tuple[bool, ...] = ()
    step_size: float = 1.0
    history_length: int = 0
    steps: int = 0
    warnings: tuple[str, ...] = ()
    trajectory: np.ndarray | None = field(default=None, repr=False, compare=False)

    def record(self) -> dict:
        return {
            "variance_estimate": self.variance_estimate,
            "standard_error": self.standard_error,
            "replicate_estimates": list(self.replicate_estimates),
            "diverged": self.diverged,
            "component_estimates": list(self.component_estimates),
            "component_diverged": list(self.component_diverged),
            "step_size": self.step_size,
            "history_length": self.history_length,
            "steps": self.steps,
            "warnings": list(self.warnings),
        }


def _grid(cfg: SimConfig):
    tau = float(cfg.delay)
    warnings = []
    if cfg.model.discrete:
        if int(tau) != tau:
            raise ValueError(f"discrete delay must be an integer number of steps, got {tau!r}")
        dt, d = 1.0, int(tau)
        steps = int(round(cfg.horizon))
    else:
        dt = cfg.step_size or default_step_size(cfg.model, tau, cfg.effective_eta)
        d = int(round(tau / dt))
        if tau > 0:
            d = max(d, 1)
            if abs(d * dt - tau) > 1e-9 * tau:
                warnings.append(f"delay {tau:.6g} is not a multiple of step {dt:.6g}; using {d} steps")
            if tau / dt < 10:
                warnings.append(f"step {dt:.6g} resolves the delay with only {tau / dt:.3g} steps (< 10)")
        steps = int(round(cfg.horizon / dt))
    burn = int(math.floor(cfg.burn_in * steps))
    if steps - burn < 1:
        raise ValueError("horizon leaves no samples after burn-in")
    return dt, d, steps, burn, warnings


def _run(cfg: SimConfig) -> SimResult:
    dt, d, steps, burn, warnings = _grid(cfg)
    R = int(cfg.replicates)
    if cfg.network:
        K = build_feedback_matrix(cfg.spec, cfg.gains)
        M = cfg.spec.N
        couple = lambda y: y @ K  # K is symmetric
    else:
        lam = np.asarray(cfg.lambdas, dtype=float)
        M = lam.size
        couple = lambda y: y * lam
    eta = cfg.effective_eta
    second = cfg.model.second_order
    res = int(cfg.noise_substeps)
    gens = [replicate_generator(int(cfg.seed), r) for r in range(R)]
    noise_scale = 1.0 if cfg.model.discrete else math.sqrt(dt / res)

    L = d + 1
    hist = np.zeros((L, R, M))
    x = np.zeros((R, M))
    v = np.zeros((R, M)) if second else None
    acc = np.zeros((R, M))
    dead = np.zeros((R, M), dtype=bool)
    ceiling = cfg.divergence_ceiling
    every = int(cfg.trajectory_every)
    traj = [] if every > 0 else None

    for start in range(0, steps, _CHUNK):
        count = min(_CHUNK, steps - start)
        raw = np.stack([g.standard_normal((count, res, M)) for g in gens], axis=1)
        noise = noise_scale * (raw.sum(axis=2) if res > 1 else raw[:, :, 0, :])
        for i in range(count):
            t = start + i
            hist[t % L] = x
            feedback = couple(hist[(t + 1) % L])
            w = noise[i]
            if cfg.model is ModelKind.CT_SINGLE:
                x = x - dt * feedback + w
            elif cfg.model is ModelKind.DT_SINGLE:
                x = x - feedback + w
            elif cfg.model is ModelKind.CT_DOUBLE:
                x, v = x + dt * v, v - dt * eta * (v + feedback) + w
            else:
                x, v = x + v, (1.0 - eta) * v - eta * feedback + w
            err = x - x.mean(axis=1, keepdims=True) if cfg.network else x
            sq = err * err
            if cfg.network:
                bad = sq.sum(axis=1) > ceiling
                newly = bad & ~dead[:, 0]
                if newly.any():
                    dead[newly] = True
            else:
                newly_mask = (sq > ceiling) & ~dead
                if newly_mask.any():
                    dead |= newly_mask
                newly = newly_mask.any(axis=1)
            if newly.any():
                # NaN out diverged components; NaN then propagates silently
                # instead of overflowing
                x = np.where(dead, np.nan, x)
                if second:
                    v = np.where(dead, np.nan, v)
                sq = np.where(dead, np.nan, sq)
            if t >= burn:
                acc += sq
            if traj is not None and t % every == 0:
                traj.append(np.concatenate(([(t + 1) * dt], err[0])))
        if dead.all():
            break

    samples = steps - burn
    comp = acc / samples  # (R, M); NaN where diverged
    comp = np.where(dead, np.inf, comp)
    per_rep = comp.sum(axis=1)
    diverged = bool(dead.any())
    mean = float(per_rep.mean())
    se = float(per_rep.std(ddof=1) / math.sqrt(R)) if R > 1 and math.isfinite(mean) else math.nan
    return SimResult(
        variance_estimate=mean,
        standard_error=se,
        replicate_estimates=tuple(float(p) for p in per_rep),
        diverged=diverged,
        component_estimates=tuple(float(c) for c in comp.mean(axis=0)),
        component_diverged=tuple(bool(b) for b in dead.any(axis=0)),
        step_size=dt,
        history_length=d,
        steps=steps,
        warnings=tuple(warnings),
        trajectory=np.array(traj) if traj is not None else None,
    )


def _check_model(cfg: SimConfig, allowed, name):
    if cfg.model not in allowed:
        raise ValueError(f"{name} does not handle model {cfg.model.value}")


def simulate_ct_single(cfg: SimConfig) -> SimResult:
    """Euler-Maruyama for ``dx = -K x(t - tau) dt + dw``."""
    _check_model(cfg, (ModelKind.CT_SINGLE,), "simulate_ct_single")
    return _run(cfg)


def simulate_ct_double(cfg: SimConfig) -> SimResult:
    """Euler-Maruyama for ``x'' = -eta x' - eta K x(t - tau) + noise``."""
    _check_model(cfg, (ModelKind.CT_DOUBLE,), "simulate_ct_double")
    return _run(cfg)


def simulate_dt(cfg: SimConfig) -> SimResult:
    """Exact iteration of the discrete single or double integrator."""
    _check_model(cfg, (ModelKind.DT_SINGLE, ModelKind.DT_DOUBLE), "simulate_dt")
    return _run(cfg)


def simulate(cfg: SimConfig) -> SimResult:
    if cfg.model is ModelKind.CT_SINGLE:
        return simulate_ct_single(cfg)
    if cfg.model is ModelKind.CT_DOUBLE:
        return simulate_ct_double(cfg)
    return simulate_dt(cfg)
