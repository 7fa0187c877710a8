"""TOML run configuration: loading, overrides, validation and resolution.

A config describes either a ring network (``N``, ``n``, ``[delay]``,
``[gains]``) or a bare list of eigenvalues (``lambdas`` with ``tau``).  Keys
mirror the field names of the library types.  Every subcommand reads a
subset of the keys; unknown keys are rejected so typos surface early.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .errors import DelayRingError, TopologyError
from .modes import ModelKind, ModelSettings
from .topology import DelayModel, GainProfile, NetworkSpec, circulant_eigenvalues

__all__ = ["ConfigError", "KEYS", "load_config", "apply_overrides", "config_digest", "Problem", "resolve"]


class ConfigError(DelayRingError, ValueError):
    """Malformed or inconsistent configuration (exit code 2)."""


# key -> description; dotted keys live in tables
KEYS: dict[str, str] = {
    "model": "agent model: ct-single, ct-double, dt-single or dt-double",
    "N": "number of agents on the ring (>= 3)",
    "n": "neighborhood radius, 1 <= n < N/2",
    "lambdas": "explicit nontrivial eigenvalues, instead of N/n/gains",
    "tau": "delay for 'lambdas' configs (time, or steps for dt models)",
    "sampling_time": "sampling period for dt models (delay steps = ceil(tau_n / sampling_time))",
    "eta_normalized": "ct-double only: eta * tau_n, held fixed across radii",
    "delay.kind": "tau_n = f(n): linear, sqrt, power, table or constant",
    "delay.scale": "multiplier on f(n) (the value for constant)",
    "delay.exponent": "exponent for kind = power",
    "delay.table": "tau_1, tau_2, ... for kind = table",
    "gains.k": "offset gains k_1..k_n",
    "gains.eta": "derivative gain (ct-double, physical) or velocity gain (dt-double)",
    "variance.method": "closed-form, quadrature, moment-matching, recursive or monte-carlo",
    "tradeoff.n_range": "radii to sweep: a list of integers or a string 'lo..hi'",
    "sim.horizon": "simulated time (ct) or steps (dt)",
    "sim.step_size": "Euler-Maruyama step (ct); default tau / 64 or finer",
    "sim.burn_in": "fraction of the horizon discarded, in [0, 1)",
    "sim.seed": "non-negative integer seed",
    "sim.replicates": "number of independent replicates",
    "sim.noise_substeps": "Brownian sub-increments summed per step (ct)",
    "sim.divergence_ceiling": "running ||x||^2 above this flags divergence",
    "sim.trajectory_every": "record replicate 0 every this many steps (0 = off)",
}

_TOPOLOGY = ["model", "N", "n", "lambdas", "tau", "sampling_time", "eta_normalized",
             "delay.kind", "delay.scale", "delay.exponent", "delay.table", "gains.k", "gains.eta"]
_SIM = [k for k in KEYS if k.startswith("sim.")]

SUBCOMMAND_KEYS: dict[str, list[str]] = {
    "stability": _TOPOLOGY,
    "variance": _TOPOLOGY + ["variance.method"] + _SIM,
    "optimize": [k for k in _TOPOLOGY if k not in ("lambdas", "tau", "gains.k")],
    "tradeoff": [k for k in _TOPOLOGY if k not in ("n", "lambdas", "tau", "gains.k")] + ["tradeoff.n_range"],
    "simulate": _TOPOLOGY + _SIM,
}

_TABLES = {"delay", "gains", "variance", "tradeoff", "sim"}


def _flatten(cfg: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for key, value in cfg.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            if prefix or key not in _TABLES:
                raise ConfigError(f"unexpected table [{name}]")
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def load_config(path: str | Path) -> dict[str, Any]:
    """Read a TOML file into a flat ``{dotted.key: value}`` mapping."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    flat = _flatten(raw)
    unknown = sorted(set(flat) - set(KEYS))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
    return flat


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Apply ``key=value`` overrides; values use TOML syntax, bare words are strings."""
    out = copy.deepcopy(cfg)
    for item in overrides or []:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        if key not in KEYS:
            raise ConfigError(f"override names unknown key {key!r}")
        out[key] = _parse_value(value.strip())
    return out


def config_digest(cfg: dict[str, Any]) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _get(cfg, key, kind, required=False, default=None):
    if key not in cfg:
        if required:
            raise ConfigError(f"missing required field '{key}'")
        return default
    value = cfg[key]
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"field '{key}' must be an integer, got {value!r}")
    elif kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"field '{key}' must be a number, got {value!r}")
        value = float(value)
    elif kind is list:
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"field '{key}' must be a list of numbers, got {value!r}")
        value = [float(v) for v in value]
    elif kind is str and not isinstance(value, str):
        raise ConfigError(f"field '{key}' must be a string, got {value!r}")
    return value


def delay_model_from(cfg) -> DelayModel:
    kind = _get(cfg, "delay.kind", str, default="linear")
    scale = _get(cfg, "delay.scale", float, default=1.0)
    exponent = _get(cfg, "delay.exponent", float)
    table = _get(cfg, "delay.table", list)
    try:
        return DelayModel(kind, scale, exponent, tuple(table) if table is not None else None)
    except (TopologyError, ValueError) as exc:
        raise ConfigError(f"[delay]: {exc}") from None


def settings_from(cfg) -> ModelSettings:
    model = _get(cfg, "model", str, required=True)
    try:
        return ModelSettings(
            model,
            sampling_time=_get(cfg, "sampling_time", float, default=1.0),
            eta=_get(cfg, "gains.eta", float),
            eta_normalized=_get(cfg, "eta_normalized", float),
        )
    except (TopologyError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class Problem:
    """A config resolved into model-unit quantities.

    ``lambdas`` are the nontrivial eigenvalues with mode indices
    ``indices`` (``j = 2..N`` for networks), ``tau`` the delay in model
    units and ``eta`` the physical or discrete derivative gain.
    """

    settings: ModelSettings
    lambdas: tuple[float, ...]
    indices: tuple[int, ...]
    tau: float
    eta: float | None
    spec: NetworkSpec | None = None
    gains: GainProfile | None = None

    @property
    def kind(self) -> ModelKind:
        return self.settings.kind


def network_spec_from(cfg, n: int | None = None) -> NetworkSpec:
    N = _get(cfg, "N", int, required=True)
    if n is None:
        n = _get(cfg, "n", int, required=True)
    try:
        return NetworkSpec(N, n, delay_model_from(cfg))
    except (TopologyError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _eta_for(settings: ModelSettings, tau: float) -> float | None:
    if settings.kind is ModelKind.CT_DOUBLE:
        if settings.eta is not None:
            return settings.eta
        if not tau > 0:
            raise ConfigError("eta_normalized needs a positive delay")
        return settings.eta_normalized / tau
    if settings.kind is ModelKind.DT_DOUBLE:
        return settings.eta
    return None


def resolve(cfg, need_gains: bool = True) -> Problem:
    """Build the eigenvalue problem a config describes."""
    settings = settings_from(cfg)
    if "lambdas" in cfg or "tau" in cfg:
        clash = [k for k in ("N", "n", "gains.k") if k in cfg]
        if clash:
            raise ConfigError(f"'lambdas'/'tau' cannot be combined with {', '.join(clash)}")
        lam = _get(cfg, "lambdas", list, required=True)
        tau = _get(cfg, "tau", float, required=True)
        if not lam:
            raise ConfigError("field 'lambdas' is empty")
        if tau < 0:
            raise ConfigError("field 'tau' must be >= 0")
        if settings.kind.discrete and int(tau) != tau:
            raise ConfigError("field 'tau' must be a whole number of steps for dt models")
        return Problem(settings, tuple(lam), tuple(range(2, len(lam) + 2)), tau, _eta_for(settings, tau))

    spec = network_spec_from(cfg)
    tau = float(settings.delay_for(spec))
    if not need_gains:
        return Problem(settings, (), (), tau, _eta_for(settings, spec.tau), spec)
    k = _get(cfg, "gains.k", list, required=True)
    try:
        gains = GainProfile(tuple(k), _eta_for(settings, spec.tau))
        spectrum = circulant_eigenvalues(spec, gains)
    except (TopologyError, ValueError) as exc:
        raise ConfigError(f"[gains]: {exc}") from None
    lam = tuple(float(v) for v in spectrum.nontrivial())
    return Problem(settings, lam, tuple(range(2, spec.N + 1)), tau, gains.eta, spec, gains)


def n_range_from(cfg, N: int) -> list[int] | None:
    if "tradeoff.n_range" not in cfg:
        return None
    value = cfg["tradeoff.n_range"]
    if isinstance(value, str):
        lo, sep, hi = value.partition("..")
        try:
            if not sep:
                raise ValueError
            return list(range(int(lo), int(hi) + 1))
        except ValueError:
            raise ConfigError(f"field 'tradeoff.n_range' must look like 'lo..hi', got {value!r}") from None
    if isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        return list(value)
    raise ConfigError(f"field 'tradeoff.n_range' must be a list of integers or 'lo..hi', got {value!r}")


def sim_kwargs_from(cfg) -> dict[str, Any]:
    out: dict[str, Any] = {"horizon": _get(cfg, "sim.horizon", float, required=True)}
    for key, kind in (("step_size", float), ("burn_in", float), ("seed", int), ("replicates", int),
                      ("noise_substeps", int), ("divergence_ceiling", float), ("trajectory_every", int)):
        value = _get(cfg, f"sim.{key}", kind)
        if value is not None:
            out[key] = value
    return out

