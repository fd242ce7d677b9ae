"""Render experiment summary CSVs into per-round regret figures.

Input is the harness summary format
(``policy,sweep_var,sweep_value,mean_pseudo_regret,stderr,violation_rate,mean_min_budget``).
Output is a line chart of mean regret divided by the horizon, one series
per policy, with a stderr band.  Rendering is read-only and deterministic:
the same inputs produce byte-identical image files.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

REQUIRED_COLUMNS = ("policy", "sweep_var", "sweep_value", "mean_pseudo_regret", "stderr")
FIGURE_KINDS = ("alpha", "horizon")

# One stable color per roster slot; policies beyond the palette cycle.
_PALETTE = ("#d62728", "#2ca02c", "#1f77b4", "#000000", "#9467bd",
            "#ff7f0e", "#8c564b", "#17becf")


class FigureInputError(ValueError):
    """Summary CSV is unusable for the requested figure."""


@dataclass
class FigureSpec:
    """One figure to render.

    ``horizon`` supplies the fixed n that alpha-sweep regret is divided by
    (horizon sweeps divide each point by its own sweep value instead).
    """

    summary_csv: Path
    kind: str
    output: Path
    styles: dict[str, dict] = field(default_factory=dict)
    horizon: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise FigureInputError(f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}")


def load_summary(path) -> list[dict]:
    """Read summary rows, insisting on the columns the figures need."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise FigureInputError(f"{path}: empty summary CSV")
            missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
            if missing:
                raise FigureInputError(f"{path}: summary CSV is missing columns {missing}")
            rows = list(reader)
    except FileNotFoundError as exc:
        raise FigureInputError(f"summary CSV not found: {path}") from exc
    if not rows:
        raise FigureInputError(f"{path}: summary CSV has no data rows")
    return rows


def build_figure(spec: FigureSpec):
    """Assemble the matplotlib figure for ``spec`` (also used by tests)."""
    rows = load_summary(spec.summary_csv)
    expected_var = spec.kind if spec.kind == "alpha" else "horizon"
    vars_seen = {row["sweep_var"] for row in rows}
    if vars_seen != {expected_var}:
        raise FigureInputError(
            f"figure kind {spec.kind!r} needs sweep_var {expected_var!r} rows, found {sorted(vars_seen)}")
    if spec.kind == "alpha" and spec.horizon is None:
        raise FigureInputError("alpha-sweep figures need the fixed horizon to scale regret by")

    series: dict[str, list[tuple[float, float, float]]] = {}
    for row in rows:
        x = float(row["sweep_value"])
        mean = float(row["mean_pseudo_regret"])
        err = float(row["stderr"])
        series.setdefault(row["policy"], []).append((x, mean, err))

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i, (policy, points) in enumerate(series.items()):
        points.sort(key=lambda p: p[0])
        xs = [p[0] for p in points]
        divisor = [spec.horizon] * len(points) if spec.kind == "alpha" else xs
        ys = [p[1] / d for p, d in zip(points, divisor)]
        lo = [(p[1] - p[2]) / d for p, d in zip(points, divisor)]
        hi = [(p[1] + p[2]) / d for p, d in zip(points, divisor)]
        style = dict(color=_PALETTE[i % len(_PALETTE)])
        style.update(spec.styles.get(policy, {}))
        line, = ax.plot(xs, ys, label=policy, linewidth=2, **style)
        ax.fill_between(xs, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
    ax.set_xlabel("alpha" if spec.kind == "alpha" else "n")
    ax.set_ylabel("Expected Regret / n")
    if spec.kind == "horizon":
        ax.set_xscale("log")
    ax.set_ylim(bottom=0)
    ax.legend(loc="best", fontsize=9)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig, ax


def render(spec: FigureSpec) -> Path:
    """Render ``spec`` to its output path and return that path."""
    fig, _ = build_figure(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
