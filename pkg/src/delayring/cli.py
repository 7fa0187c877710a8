"""Command-line front end.

``delayring <subcommand> CONFIG [--set key=value ...] [--format csv|json]
[--output PATH]``.  Exit codes: 0 success, 2 configuration error, 3 unstable
or infeasible, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .config import (
    KEYS,
    SUBCOMMAND_KEYS,
    ConfigError,
    apply_overrides,
    config_digest,
    delay_model_from,
    load_config,
    n_range_from,
    network_spec_from,
    resolve,
    settings_from,
    sim_kwargs_from,
)
from .errors import ConvergenceError, InfeasibleDesignError, TopologyError, UnstableError
from .optimizer import design_exact, design_quadratic_approx
from .report import METHODS, stability_report, variance_report
from .sim import SimConfig, simulate
from .tradeoff import CSV_COLUMNS, sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_NONCONVERGED = 4


@dataclass(frozen=True)
class RunManifest:
    config_digest: str
    version: str
    seed: int | None
    timestamp: str
    subcommand: str
    outputs: tuple[str, ...] = ()
    summary: dict = field(default_factory=dict)

    def record(self) -> dict:
        d = asdict(self)
        d["outputs"] = list(self.outputs)
        return d


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the stamp for reproducible builds
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
            else _dt.datetime.now(_dt.timezone.utc))
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


# ---------------------------------------------------------------- formatting

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    if value is None:
        return ""
    return str(value)


def _json_dumps(obj, level: int = 0) -> str:
    """JSON with 17-significant-digit floats; non-finite floats become null."""
    pad, inner = "  " * level, "  " * (level + 1)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, float):
        return "%.17g" % obj if math.isfinite(obj) else "null"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_json_dumps(v, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + _json_dumps(v, level + 1) for v in obj) + "\n" + pad + "]"
    if hasattr(obj, "item"):  # numpy scalars
        return _json_dumps(obj.item(), level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def render(rows: list[dict], fmt: str, manifest: RunManifest, columns=None) -> str:
    if fmt == "json":
        return _json_dumps({"manifest": manifest.record(), "rows": rows}) + "\n"
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


# ---------------------------------------------------------------- commands

@dataclass
class Outcome:
    rows: list[dict]
    columns: list[str] | None = None
    code: int = EXIT_OK
    summary: dict = field(default_factory=dict)
    seed: int | None = None
    message: str = ""


def cmd_stability(cfg, args) -> Outcome:
    prob = resolve(cfg)
    rep = stability_report(prob.kind, prob.lambdas, prob.tau, prob.eta, prob.indices)
    rows = [r.record() for r in rep.rows]
    rows.append({"j": "all", "lambda": math.nan, "upper": rep.upper, "margin": rep.margin, "stable": rep.stable})
    verdict = "stable" if rep.stable else "unstable"
    return Outcome(rows, ["j", "lambda", "upper", "margin", "stable"],
                   summary={"stable": rep.stable, "upper": rep.upper, "margin": rep.margin},
                   message=f"{prob.kind.value}: {verdict}, stable interval (0, {rep.upper:.17g})")


def cmd_variance(cfg, args) -> Outcome:
    prob = resolve(cfg)
    method = args.method or cfg.get("variance.method")
    if method is not None and method not in METHODS:
        raise ConfigError(f"field 'variance.method' must be one of {', '.join(METHODS)}, got {method!r}")
    sim = sim_kwargs_from(cfg) if method == "monte-carlo" else None
    try:
        rep = variance_report(prob.kind, prob.lambdas, prob.tau, prob.eta, method, prob.indices, sim)
    except UnstableError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = [dict(r.record(), method=rep.method) for r in rep.rows]
    rows.append({"j": "total", "lambda": math.nan, "variance": rep.total,
                 "standard_error": rep.standard_error, "method": rep.method})
    code = EXIT_UNSTABLE if rep.diverged else EXIT_OK
    return Outcome(rows, ["j", "lambda", "variance", "standard_error", "method"], code,
                   summary={"total": rep.total, "method": rep.method, "approximate": rep.approximate,
                            "diverged": rep.diverged},
                   seed=sim.get("seed", 0) if sim else None)


def cmd_optimize(cfg, args) -> Outcome:
    prob = resolve(cfg, need_gains=False)
    spec = prob.spec
    settings = prob.settings
    mv = settings.mode_variance(spec)
    which = args.method
    designs = []
    if which in ("quadratic-approx", "both"):
        designs.append(design_quadratic_approx(spec, settings, mv))
    if which in ("exact", "both"):
        designs.append(design_exact(spec, settings, mv))
    rows, code = [], EXIT_OK
    for d in designs:
        rec = d.record()
        if args.format == "csv":
            flat = {k: rec[k] for k in ("method", "model", "tau", "objective", "iterations", "converged", "grad_norm")}
            flat.update({f"k_{i + 1}": v for i, v in enumerate(rec["gains"])})
            rows.append(flat)
        else:
            rows.append(rec)
        if not d.feasible:
            code = max(code, EXIT_UNSTABLE)
        elif not d.converged:
            code = max(code, EXIT_NONCONVERGED)
    messages = "; ".join(d.message for d in designs if d.message)
    return Outcome(rows, None, code, summary={"approximate": mv.approximate}, message=messages)


def cmd_tradeoff(cfg, args) -> Outcome:
    settings = settings_from(cfg)
    N = network_spec_from(cfg, n=1).N
    try:
        curve = sweep(N, delay_model_from(cfg), settings, n_range_from(cfg, N))
    except UnstableError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[tradeoff]: {exc}") from None
    rows = [r.record() for r in curve.rows]
    columns = list(CSV_COLUMNS)
    code = EXIT_OK
    if any(not r.converged for r in curve.rows):
        code = EXIT_NONCONVERGED
    if all(r.infeasible for r in curve.rows):
        code = EXIT_UNSTABLE
    summary = {
        "model": curve.model,
        "n_star_exact": curve.n_star_exact,
        "n_star_approx": curve.n_star_approx,
        "local_minima_exact": curve.local_minima_exact(),
        "local_minima_approx": curve.local_minima_approx(),
    }
    msg = (f"n* exact = {curve.n_star_exact}, n* approx = {curve.n_star_approx}, "
           f"local minima (exact) at n = {curve.local_minima_exact()}")
    return Outcome(rows, columns, code, summary=summary, message=msg)


def cmd_simulate(cfg, args) -> Outcome:
    prob = resolve(cfg)
    kw = sim_kwargs_from(cfg)
    if args.trajectory and not kw.get("trajectory_every"):
        kw["trajectory_every"] = 1
    try:
        if prob.spec is not None:
            sc = SimConfig(model=prob.kind, spec=prob.spec, gains=prob.gains,
                           sampling_time=prob.settings.sampling_time, **kw)
        else:
            sc = SimConfig(model=prob.kind, lambdas=prob.lambdas, tau=prob.tau, eta=prob.eta, **kw)
    except ValueError as exc:
        raise ConfigError(f"[sim]: {exc}") from None
    res = simulate(sc)
    rows = [{"replicate": i, "variance": v, "standard_error": math.nan, "diverged": not math.isfinite(v)}
            for i, v in enumerate(res.replicate_estimates)]
    rows.append({"replicate": "mean", "variance": res.variance_estimate,
                 "standard_error": res.standard_error, "diverged": res.diverged})
    if args.trajectory and res.trajectory is not None:
        _write_trajectory(Path(args.trajectory), res.trajectory)
    return Outcome(rows, ["replicate", "variance", "standard_error", "diverged"],
                   EXIT_UNSTABLE if res.diverged else EXIT_OK,
                   summary={"variance_estimate": res.variance_estimate, "standard_error": res.standard_error,
                            "diverged": res.diverged, "step_size": res.step_size,
                            "history_length": res.history_length, "warnings": list(res.warnings)},
                   seed=sc.seed, message="; ".join(res.warnings))


def _write_trajectory(path: Path, traj) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time"] + [f"x_{i + 1}" for i in range(traj.shape[1] - 1)])
        for row in traj:
            writer.writerow(["%.17g" % v for v in row])


COMMANDS = {
    "stability": (cmd_stability, "stability verdict and margin for every eigenvalue"),
    "variance": (cmd_variance, "steady-state variance per eigenvalue and in total"),
    "optimize": (cmd_optimize, "minimum-variance offset gains for one radius"),
    "tradeoff": (cmd_tradeoff, "optimal variance over the neighborhood radius"),
    "simulate": (cmd_simulate, "Monte Carlo estimate of the steady-state variance"),
}


def _epilog(name: str) -> str:
    lines = ["config keys read:"]
    width = max(len(k) for k in SUBCOMMAND_KEYS[name])
    for key in SUBCOMMAND_KEYS[name]:
        lines.append(f"  {key.ljust(width)}  {KEYS[key]}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delayring", description="Delayed consensus on ring networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=_epilog(name),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("config", help="TOML configuration file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (TOML value syntax); repeatable, wins over the file")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--output", "-o", help="write here instead of stdout, plus a .manifest.json beside it")
        if name == "variance":
            p.add_argument("--method", choices=METHODS, help="overrides variance.method")
        if name == "optimize":
            p.add_argument("--method", choices=("exact", "quadratic-approx", "both"), default="exact")
        if name == "simulate":
            p.add_argument("--trajectory", metavar="PATH",
                           help="dump replicate 0 as CSV (time, x_1..x_N); uses sim.trajectory_every")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        cfg = apply_overrides(load_config(args.config), args.overrides)
        outcome = func(cfg, args)
    except (ConfigError, TopologyError) as exc:
        print(f"delayring: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UnstableError, InfeasibleDesignError) as exc:
        print(f"delayring: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except ConvergenceError as exc:
        print(f"delayring: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED

    outputs = (args.output,) if args.output else ()
    manifest = RunManifest(config_digest(cfg), __version__, outcome.seed, _timestamp(), args.command,
                           outputs, outcome.summary)
    text = render(outcome.rows, args.format, manifest, outcome.columns)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        sidecar = Path(str(args.output) + ".manifest.json")
        sidecar.write_text(_json_dumps(manifest.record()) + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text)
    if outcome.message:
        print(f"delayring: {outcome.message}", file=sys.stderr)
    return outcome.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
