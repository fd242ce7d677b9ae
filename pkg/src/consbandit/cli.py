"""Command-line driver: run experiments, sweep parameters, emit CSVs.

Subcommands: run, sweep-alpha, sweep-horizon, report, presets.  Exit codes:
0 success, 1 configuration error, 2 runtime error.  The worker count comes
from --workers, else the CONSBANDIT_THREADS environment variable, else the
CPU count.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .core import ConfigurationError
from .harness import (
    ExperimentConfig,
    lower_bound_reference,
    monte_carlo,
    resolve_workers,
    write_runs_csv,
    write_summary_csv,
)

CONFIG_KEYS = {
    "means", "alpha", "n", "delta", "policies", "replications",
    "seed_base", "noise", "psi", "expectation_mode",
}
REQUIRED_KEYS = ("means", "alpha", "n", "delta", "policies", "replications", "seed_base")

# Alpha grid: 0.05..1.0 in steps of 0.05, plus 0.01 to probe the harsh end.
# Alpha = 0 is excluded: the constraint would forbid exploration outright.
_ALPHA_GRID = [0.01] + [round(0.05 * i, 10) for i in range(1, 21)]
_HORIZON_GRID = [100, 200, 500, 1000, 2000, 5000, 10000, 20000, 50000, 100000]
_EXPERIMENT_MEANS = [0.5, 0.6, 0.4, 0.4, 0.4]
_FULL_ROSTER = ["ucb", "cucb", "cucb-unknown-mu0", "budgetfirst", "unbalanced-moss"]

PRESETS: dict[str, dict] = {
    "fig2": {
        "means": _EXPERIMENT_MEANS,
        "alpha": _ALPHA_GRID,
        "n": 10000,
        "delta": "1/n",
        "policies": _FULL_ROSTER,
        "replications": 4000,
        "seed_base": 20160,
        "noise": "gaussian",
        "psi": "refined",
        "expectation_mode": False,
    },
    "fig3": {
        "means": _EXPERIMENT_MEANS,
        "alpha": 0.1,
        "n": _HORIZON_GRID,
        "delta": "1/n",
        "policies": _FULL_ROSTER,
        "replications": 4000,
        "seed_base": 20160,
        "noise": "gaussian",
        "psi": "refined",
        "expectation_mode": False,
    },
}
PRESET_NOTES = {
    "fig2": "alpha sweep at n=10^4: regret degradation as the constraint tightens",
    "fig3": "horizon sweep at alpha=0.1: long-run average regret per round",
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a raw config mapping; unknown keys are errors, not ignored."""
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        raise ConfigurationError(f"missing config keys: {missing}")
    return ExperimentConfig(
        means=tuple(raw["means"]),
        alpha=raw["alpha"],
        horizon=raw["n"],
        delta=raw["delta"],
        policies=tuple(raw["policies"]),
        replications=int(raw["replications"]),
        seed_base=int(raw["seed_base"]),
        noise=raw.get("noise", "gaussian"),
        psi=raw.get("psi", "refined"),
        expectation_mode=bool(raw.get("expectation_mode", False)),
    )


def config_to_dict(config: ExperimentConfig) -> dict:
    """Serialize a config back to its file form (round-trips through parse)."""
    return {
        "means": list(config.means),
        "alpha": list(config.alpha) if isinstance(config.alpha, tuple) else config.alpha,
        "n": list(config.horizon) if isinstance(config.horizon, tuple) else config.horizon,
        "delta": config.delta,
        "policies": list(config.policies),
        "replications": config.replications,
        "seed_base": config.seed_base,
        "noise": config.noise,
        "psi": config.psi,
        "expectation_mode": config.expectation_mode,
    }


def parse_config(path) -> ExperimentConfig:
    """Load and validate a JSON experiment config from disk."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")
    return config_from_dict(raw)


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigurationError(f"override {text!r} must look like key=value")
    key, _, value = text.partition("=")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    return key, parsed


def _load_config(args) -> ExperimentConfig:
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigurationError(
                f"unknown preset {args.preset!r}; available: {sorted(PRESETS)}")
        raw = dict(PRESETS[args.preset])
    elif args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigurationError(f"config file {args.config} must hold a JSON object")
    else:
        raise ConfigurationError("pass --config FILE or --preset NAME")
    for item in args.set or []:
        key, value = _parse_override(item)
        raw[key] = value
    return config_from_dict(raw)


def _parse_alpha_grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigurationError(f"--grid must look like start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise ConfigurationError(f"bad grid bounds {text!r}")
    count = int(round((stop - start) / step)) + 1
    values = [round(start + i * step, 10) for i in range(count)]
    return [v for v in values if v <= stop + 1e-12]


def _write_outputs(config: ExperimentConfig, summaries, rows, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_runs_csv(out_dir / "runs.csv", rows, len(config.means))
    write_summary_csv(out_dir / "summary.csv", summaries)
    with open(out_dir / "config.json", "w") as fh:
        json.dump(config_to_dict(config), fh, indent=2)
        fh.write("\n")


def _print_summaries(summaries) -> None:
    for s in summaries:
        print(
            f"policy={s.policy} {s.sweep_var}={s.sweep_value:g} "
            f"mean_pseudo_regret={s.mean_pseudo_regret:.4f} stderr={s.stderr:.4f} "
            f"violation_rate={s.violation_rate:.4g} mean_min_budget={s.mean_min_budget:.4f}"
        )


def cmd_run(args) -> int:
    config = _load_config(args)
    workers = resolve_workers(args.workers)
    summaries, rows = monte_carlo(config, workers=workers)
    _write_outputs(config, summaries, rows, Path(args.out))
    _print_summaries(summaries)
    return 0


def cmd_sweep_alpha(args) -> int:
    config = _load_config(args)
    raw = config_to_dict(config)
    raw["alpha"] = _parse_alpha_grid(args.grid) if args.grid else list(_ALPHA_GRID)
    config = config_from_dict(raw)
    workers = resolve_workers(args.workers)
    summaries, rows = monte_carlo(config, workers=workers)
    _write_outputs(config, summaries, rows, Path(args.out))
    _print_summaries(summaries)
    return 0


def cmd_sweep_horizon(args) -> int:
    config = _load_config(args)
    raw = config_to_dict(config)
    if args.grid:
        raw["n"] = sorted(int(v) for v in args.grid.split(","))
    else:
        raw["n"] = list(_HORIZON_GRID)
    config = config_from_dict(raw)
    workers = resolve_workers(args.workers)
    summaries, rows = monte_carlo(config, workers=workers)
    _write_outputs(config, summaries, rows, Path(args.out))
    _print_summaries(summaries)
    return 0


def cmd_report(args) -> int:
    in_dir = Path(args.input)
    summary_path = in_dir / "summary.csv"
    config_path = in_dir / "config.json"
    if not summary_path.exists():
        raise ConfigurationError(f"no summary.csv in {in_dir}")
    if not config_path.exists():
        raise ConfigurationError(f"no config.json in {in_dir} (produced by the run command)")
    with open(config_path) as fh:
        config = config_from_dict(json.load(fh))
    with open(summary_path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ConfigurationError(f"{summary_path} has no data rows")
    k = len(config.means) - 1
    mu0 = config.means[0]
    out_lines = []
    header = list(rows[0].keys()) + ["lower_bound_B", "lower_bound_valid"]
    for row in rows:
        alpha = float(row["sweep_value"]) if row["sweep_var"] == "alpha" else float(config.alpha)
        horizon = int(float(row["sweep_value"])) if row["sweep_var"] == "horizon" else int(config.horizon)
        bound, valid = lower_bound_reference(k, horizon, alpha, mu0)
        out_lines.append(list(row.values()) + [f"{bound:.17g}", "1" if valid else "0"])
    report_path = in_dir / "report.csv"
    with open(report_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(out_lines)
    print(",".join(header))
    for line in out_lines:
        print(",".join(str(c) for c in line))
    return 0


def cmd_presets(args) -> int:
    for name in sorted(PRESETS):
        print(f"{name}: {PRESET_NOTES[name]}")
        print(json.dumps(PRESETS[name], indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consbandit",
        description="Conservative bandit simulation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="path to a JSON experiment config")
        p.add_argument("--preset", help="name of an embedded preset (see `presets`)")
        p.add_argument("--out", required=True, help="output directory for CSVs")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (JSON value)")
        p.add_argument("--workers", type=int, default=None,
                       help=f"worker processes (default: ${'{'}CONSBANDIT_THREADS{'}'} or CPU count)")

    p_run = sub.add_parser("run", help="run the configured experiment")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sa = sub.add_parser("sweep-alpha", help="sweep the constraint fraction")
    add_common(p_sa)
    p_sa.add_argument("--grid", help="start:stop:step (inclusive), e.g. 0.05:1:0.05")
    p_sa.set_defaults(func=cmd_sweep_alpha)

    p_sh = sub.add_parser("sweep-horizon", help="sweep the horizon")
    add_common(p_sh)
    p_sh.add_argument("--grid", help="comma-separated horizons, e.g. 1000,10000,100000")
    p_sh.set_defaults(func=cmd_sweep_horizon)

    p_rep = sub.add_parser("report", help="join lower-bound references onto a summary")
    p_rep.add_argument("--in", dest="input", required=True, help="directory with summary.csv + config.json")
    p_rep.set_defaults(func=cmd_report)

    p_pre = sub.add_parser("presets", help="list embedded experiment presets")
    p_pre.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
