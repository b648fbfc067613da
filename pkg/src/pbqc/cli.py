"""Command-line entry point.

Every output carries the tool name, version, seed and the fully resolved
parameters, so feeding an output back through ``--config`` reproduces it.
Exit codes: 0 success/accept, 1 usage or configuration error, 2 reject or
insecure finding.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Any, Callable

import numpy as np

from . import __version__
from .cv import attack_variance, cv_secure, honest_variance, monte_carlo_report
from .decoy import (
    ChannelModel,
    IntensityPair,
    NonMonotoneDecisionError,
    best_intensities,
    intensity_grid,
    scan_intensities,
    security_boundary,
)
from .dv_strategy import asymptotic_frontier, optimal_frontier
from .spacetime import ConfigError, parse_config, run_session, write_rounds_csv

TOOL = "pbqc"
SIG_DIGITS = 12

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_REJECT = 2


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    return format(x, f".{SIG_DIGITS}g")


def round_floats(obj: Any) -> Any:
    """Round every float to 12 significant digits (NaN/inf become None)."""
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    if isinstance(obj, np.generic):
        return round_floats(obj.item())
    return obj


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return fmt(v)
    return str(v)


def render(payload: dict, columns: list[str], rows: list[dict], fmt_name: str) -> str:
    """JSON document, or CSV with ``#`` provenance lines above the header."""
    if fmt_name == "json":
        doc = dict(payload)
        doc["rows"] = rows
        return json.dumps(round_floats(doc), indent=2, ensure_ascii=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# tool: {payload['tool']}\n")
    buf.write(f"# version: {payload['version']}\n")
    buf.write(f"# seed: {payload['seed']}\n")
    buf.write(f"# config: {json.dumps(round_floats(payload['config']), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _header(config: dict, seed: int) -> dict:
    return {"tool": TOOL, "version": __version__, "seed": seed, "config": config}


def load_config(path: str) -> dict:
    """Parameters from a JSON file, a previous JSON output, or a previous CSV output."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    if text.lstrip().startswith("#"):
        for line in text.splitlines():
            if line.startswith("# config: "):
                return json.loads(line[len("# config: "):])
        raise UsageError(f"{path}: no '# config:' line found")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: expected a JSON object")
    if "config" in data and "tool" in data:
        data = dict(data["config"])
    return data


# -- subcommands ---------------------------------------------------------------


def _check_range(name: str, value: float, lo: float, hi: float, lo_open=False) -> None:
    bad = value <= lo if lo_open else value < lo
    if bad or value > hi or not math.isfinite(value):
        bracket = "(" if lo_open else "["
        raise UsageError(f"{name} must lie in {bracket}{lo}, {hi}], got {value}")


def cmd_dv_curve(cfg: dict) -> tuple[list[str], list[dict], int]:
    rows = []
    for n in cfg["n"]:
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise UsageError(f"n: N must be a positive integer, got {n!r}")
        front = optimal_frontier(n)
        for m0, pt in zip(front.generators, front.points):
            rows.append({"source": str(n), "m0_or_theta0": m0, "R1": pt.reporting_rate, "Q1": pt.qber})
    if cfg["asymptotic"]:
        if cfg["points"] < 2:
            raise UsageError("points: need at least two points")
        front = asymptotic_frontier(cfg["points"])
        for t0, pt in zip(front.generators, front.points):
            rows.append(
                {"source": "asymptotic", "m0_or_theta0": t0, "R1": pt.reporting_rate, "Q1": pt.qber}
            )
    return ["source", "m0_or_theta0", "R1", "Q1"], rows, EXIT_OK


def _channel(cfg: dict) -> ChannelModel:
    try:
        return ChannelModel(eta=1.0, y0=cfg["y0"], e_det=cfg["edet"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _mode(cfg: dict) -> bool:
    if cfg["mode"] not in ("decoy", "no-decoy"):
        raise UsageError(f"mode: expected 'decoy' or 'no-decoy', got {cfg['mode']!r}")
    return cfg["mode"] == "decoy"


def cmd_decoy_boundary(cfg: dict) -> tuple[list[str], list[dict], int]:
    use_decoy = _mode(cfg)
    try:
        pair = IntensityPair(cfg["mu1"], cfg["mu2"] if use_decoy else 0.0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if use_decoy and pair.mu2 <= 0:
        raise UsageError("mu2: decoy mode needs mu2 > 0")
    _check_range("tol", cfg["tol"], 0.0, 1.0, lo_open=True)
    res = security_boundary(_channel(cfg), pair, use_decoy, tol=cfg["tol"])
    row = {
        "mode": cfg["mode"],
        "mu1": pair.mu1,
        "mu2": pair.mu2 if use_decoy else None,
        "eta_star": res.eta_star,
        "loss_db": res.loss_db,
        "secure_everywhere": res.secure_everywhere,
        "insecure_everywhere": res.insecure_everywhere,
    }
    if cfg["trace"]:
        row["decision_trace"] = res.decision_trace
    code = EXIT_REJECT if res.insecure_everywhere else EXIT_OK
    return [k for k in row if k != "decision_trace"], [row], code


def _frange(lo: float, hi: float, step: float) -> list[float]:
    if not step > 0:
        raise UsageError(f"mu_step must be positive, got {step}")
    if hi < lo:
        raise UsageError(f"mu_max must be at least mu_min ({hi} < {lo})")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + i * step, 12) for i in range(n + 1)]


def cmd_optimize_mu(cfg: dict) -> tuple[list[str], list[dict], int]:
    use_decoy = _mode(cfg)
    mu1 = _frange(cfg["mu_min"], cfg["mu_max"], cfg["mu_step"])
    if mu1[0] <= 0:
        raise UsageError("mu_min must be positive")
    grid = intensity_grid(mu1, mu1 if use_decoy else None)
    if not grid:
        raise UsageError("empty intensity grid")
    scan = scan_intensities(_channel(cfg), use_decoy, grid, tol=cfg["tol"])
    best, _ = best_intensities(scan)
    rows = [
        {
            "mu1": pair.mu1,
            "mu2": pair.mu2 if use_decoy else None,
            "eta_star": res.eta_star,
            "loss_db": res.loss_db,
            "best": pair == best,
        }
        for pair, res in scan
    ]
    return ["mu1", "mu2", "eta_star", "loss_db", "best"], rows, EXIT_OK


def cmd_cv(cfg: dict) -> tuple[list[str], list[dict], int]:
    if cfg["rounds"] < 0 or cfg["rounds"] == 1:
        raise UsageError("rounds must be 0 (analytic only) or at least 2")
    rows = []
    index = 0
    for s in cfg["s"]:
        if s < 0:
            raise UsageError(f"s: squeezing must be non-negative, got {s}")
        for eta in cfg["eta"]:
            _check_range("eta", eta, 0.0, 1.0, lo_open=True)
            row = {
                "s": s,
                "eta": eta,
                "delta_honest": honest_variance(s, eta),
                "delta_attack": attack_variance(s),
                "mc_estimate": None,
                "std_error": None,
                "secure": cv_secure(eta, s),
            }
            if cfg["rounds"]:
                seed = int(np.random.SeedSequence([cfg["seed"], index]).generate_state(1)[0])
                mc = monte_carlo_report(s, eta, cfg["rounds"], seed, attack=cfg["attack"])
                row["mc_estimate"], row["std_error"] = mc["delta_estimate"], mc["std_error"]
            rows.append(row)
            index += 1
    return ["s", "eta", "delta_honest", "delta_attack", "mc_estimate", "std_error", "secure"], rows, EXIT_OK


# -- argument parsing ----------------------------------------------------------

DEFAULTS: dict[str, dict[str, Any]] = {
    "dv-curve": {"n": [4, 8], "asymptotic": False, "points": 91},
    "decoy-boundary": {
        "y0": 1e-5, "edet": 0.01, "mu1": 0.12, "mu2": 0.1, "mode": "decoy", "tol": 1e-4, "trace": False,
    },
    "optimize-mu": {
        "y0": 1e-5, "edet": 0.01, "mode": "no-decoy",
        "mu_min": 0.005, "mu_max": 0.05, "mu_step": 0.001, "tol": 1e-6,
    },
    "cv": {"s": [0.0, 0.5, 1.0, 2.0, 5.0], "eta": [0.25, 0.5, 0.75, 1.0], "rounds": 0, "attack": False},
}

COMMANDS: dict[str, Callable[[dict], tuple[list[str], list[dict], int]]] = {
    "dv-curve": cmd_dv_curve,
    "decoy-boundary": cmd_decoy_boundary,
    "optimize-mu": cmd_optimize_mu,
    "cv": cmd_cv,
}

DEFAULT_FORMAT = {"dv-curve": "csv", "decoy-boundary": "json", "optimize-mu": "csv", "cv": "json", "simulate": "json"}


def _common(p: argparse.ArgumentParser, with_config: bool = True) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--output", "-o", default="-", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--seed", type=int, default=S)
    if with_config:
        p.add_argument("--config", help="JSON parameters or a previous output to rerun")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog=TOOL, description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dv-curve", help="optimal (R1, Q1) frontiers for basis lattices")
    p.add_argument("--n", type=int, action="append", default=S, help="lattice size N (repeatable)")
    p.add_argument("--asymptotic", action="store_true", default=S, help="add the continuous-basis curve")
    p.add_argument("--points", type=int, default=S, help="samples on the continuous curve")
    _common(p)

    for name, mode_help in (
        ("decoy-boundary", "transmittance at which the protocol becomes secure"),
        ("optimize-mu", "scan signal (and decoy) intensities for the lowest eta*"),
    ):
        p = sub.add_parser(name, help=mode_help)
        p.add_argument("--y0", type=float, default=S, help="dark-count probability")
        p.add_argument("--edet", type=float, default=S, help="misalignment error")
        p.add_argument("--mode", choices=("decoy", "no-decoy"), default=S)
        p.add_argument("--tol", type=float, default=S, help="bisection tolerance in eta")
        if name == "decoy-boundary":
            p.add_argument("--mu1", type=float, default=S)
            p.add_argument("--mu2", type=float, default=S)
            p.add_argument("--trace", action="store_true", default=S, help="include the decision trace (json)")
        else:
            p.add_argument("--mu-min", dest="mu_min", type=float, default=S)
            p.add_argument("--mu-max", dest="mu_max", type=float, default=S)
            p.add_argument("--mu-step", dest="mu_step", type=float, default=S)
        _common(p)

    p = sub.add_parser("cv", help="conditional variances of the squeezed-state protocol")
    p.add_argument("--s", type=float, nargs="+", default=S, help="squeezing parameters")
    p.add_argument("--eta", type=float, nargs="+", default=S, help="transmittances")
    p.add_argument("--rounds", type=int, default=S, help="Monte Carlo rounds per row (0 = analytic)")
    p.add_argument("--attack", action="store_true", default=S, help="simulate the attack instead of the prover")
    _common(p)

    p = sub.add_parser("simulate", help="run a protocol session from a scenario file")
    p.add_argument("scenario", help="scenario JSON (or a previous simulate output)")
    p.add_argument("--rounds", type=int, default=S)
    p.add_argument("--per-round", dest="per_round", help="also write a per-round CSV here")
    _common(p, with_config=False)
    return parser


_META = {"command", "output", "format", "config", "per_round", "scenario"}


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Built-in defaults, overridden by the config file, overridden by flags."""
    cfg = dict(DEFAULTS[command])
    cfg["seed"] = 0
    if args.config:
        loaded = load_config(args.config)
        for key, value in loaded.items():
            if key not in cfg:
                raise UsageError(f"config key {key!r}: unknown parameter for {command}")
            cfg[key] = value
    for key, value in vars(args).items():
        if key not in _META:
            cfg[key] = value
    return cfg


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run_simulate(args: argparse.Namespace) -> int:
    config = load_config(args.scenario)
    if "rounds" in args:
        config["rounds"] = args.rounds
    if "seed" in args:
        config["seed"] = args.seed
    try:
        scenario, rounds, seed, acceptance = parse_config(config)
    except ConfigError as exc:
        print(f"error: config key {exc.key or '<root>'!r}: {exc.reason}", file=sys.stderr)
        return EXIT_USAGE
    config["rounds"], config["seed"] = rounds, seed
    result = run_session(scenario, rounds, acceptance, rng=seed)
    stats = result.stats.to_dict()
    fmt_name = args.format or DEFAULT_FORMAT["simulate"]
    _write(args.output, render(_header(config, seed), list(stats), [stats], fmt_name))
    if args.per_round:
        with open(args.per_round, "w", encoding="utf-8", newline="\n") as fh:
            write_rounds_csv(result, fh)
    return EXIT_OK if result.stats.accepted else EXIT_REJECT


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "simulate":
            return run_simulate(args)
        cfg = resolve(args.command, args)
        columns, rows, code = COMMANDS[args.command](cfg)
        fmt_name = args.format or DEFAULT_FORMAT[args.command]
        _write(args.output, render(_header(cfg, cfg["seed"]), columns, rows, fmt_name))
        return code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonMonotoneDecisionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for t in exc.trace:
            print(f"  eta={fmt(t['eta'])} secure={t['secure']}", file=sys.stderr)
        return EXIT_USAGE
    except (TypeError, KeyError, ValueError) as exc:
        print(f"error: malformed parameter ({exc})", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
