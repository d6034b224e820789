"""Render sweep CSVs as deterministic PNG charts.

Consumes only the frozen simulator CSV contract:

    scenario,N,topology,param,mode,seed,gAvg,gMax,ccptBlocks,ccptBytes,
    txCount,rejected,equivocations

For ring rows `param` is the neighbor count c; for erdosRenyi rows it is
the edge probability p.  Charts are byte-reproducible: fixed style, fixed
geometry, and no timestamp or software metadata in the PNG.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

COLUMNS = (
    "scenario", "N", "topology", "param", "mode", "seed", "gAvg", "gMax",
    "ccptBlocks", "ccptBytes", "txCount", "rejected", "equivocations",
)

_STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
    "svg.hashsalt": "vtl-plots",
}

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
           "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


class PlotError(ValueError):
    pass


@dataclass(frozen=True)
class Row:
    scenario: str
    n: int
    topology: str
    param: str
    seed: int
    g_avg: float


def read_rows(input_csv) -> list[Row]:
    """Parse the frozen CSV; raise PlotError naming the bad column or row."""
    path = Path(input_csv)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise PlotError(f"{path}: {exc}") from exc
    if not lines:
        raise PlotError(f"{path}: empty file")
    reader = csv.DictReader(lines)
    for col in COLUMNS:
        if col not in (reader.fieldnames or ()):
            raise PlotError(f"{path}: missing column {col!r}")
    rows = []
    for i, rec in enumerate(reader, start=2):
        try:
            if any(rec[c] is None for c in COLUMNS):
                raise ValueError("wrong field count")
            rows.append(Row(
                scenario=rec["scenario"],
                n=int(rec["N"]),
                topology=rec["topology"],
                param=rec["param"],
                seed=int(rec["seed"]),
                g_avg=float(rec["gAvg"]),
            ))
        except (ValueError, KeyError) as exc:
            raise PlotError(f"{path}: malformed row {i}: {exc}") from exc
    if not rows:
        raise PlotError(f"{path}: no data rows")
    return rows


def _new_axes():
    plt.rcdefaults()
    plt.rcParams.update(_STYLE)
    fig, ax = plt.subplots()
    return fig, ax


def _save(fig, output) -> None:
    fig.savefig(output, format="png",
                metadata={"Software": None})
    plt.close(fig)


def plot_fig2(input_csv, output):
    """Average acquired chains vs ring connectivity, one series per N, with
    a horizontal saturation reference at y = N per series.  Missing sweep
    points stay as gaps (no interpolation)."""
    rows = [r for r in read_rows(input_csv) if r.topology == "ring"]
    if not rows:
        raise PlotError(f"{input_csv}: no ring rows")
    by_n: dict[int, dict[int, list[float]]] = {}
    for r in rows:
        try:
            c = int(r.param)
        except ValueError as exc:
            raise PlotError(
                f"{input_csv}: ring param {r.param!r} is not an integer"
            ) from exc
        by_n.setdefault(r.n, {}).setdefault(c, []).append(r.g_avg)
    all_c = sorted({c for series in by_n.values() for c in series})
    fig, ax = _new_axes()
    for idx, n in enumerate(sorted(by_n)):
        series = by_n[n]
        xs = list(range(min(all_c), max(all_c) + 1))
        ys = [sum(series[c]) / len(series[c]) if c in series else math.nan
              for c in xs]
        color = _COLORS[idx % len(_COLORS)]
        ax.plot(xs, ys, marker="o", markersize=3.5, color=color,
                label=f"N={n}")
        ax.axhline(n, color=color, linestyle=":", linewidth=0.8,
                   label=f"_N={n}-saturation")
    ax.set_xlabel("connectivity c")
    ax.set_ylabel("average chains acquired per node (gAvg)")
    ax.set_title("Acquired chains vs connectivity (stable state)")
    ax.set_xticks(all_c)
    ax.legend(loc="lower right")
    _save(fig, output)
    return fig


def predict_g(n: int, p: float, f: float = 1.0) -> float:
    """Analytic chains-per-node estimate 2·f·c·lnN/lnc with c = p(N-1)."""
    c = p * (n - 1)
    if c <= 1:
        raise PlotError(f"predictor undefined: c = p(N-1) = {c:.3f} <= 1")
    return 2.0 * f * c * math.log(n) / math.log(c)


def plot_predictor(input_csv, output, f: float = 1.0, logx: bool = False):
    """Measured gAvg for Erdős–Rényi sweeps against the analytic predictor.

    Predicted values are recomputed from the N and p columns (p is the
    `param` field of erdosRenyi rows) with weight factor `f`; they are never
    read from the CSV."""
    rows = [r for r in read_rows(input_csv) if r.topology == "erdosRenyi"]
    if not rows:
        raise PlotError(f"{input_csv}: no erdosRenyi rows")
    p_of: dict[int, float] = {}
    measured: dict[int, list[float]] = {}
    for r in rows:
        try:
            p = float(r.param)
        except ValueError as exc:
            raise PlotError(
                f"{input_csv}: erdosRenyi param {r.param!r} is not a float"
            ) from exc
        if r.n in p_of and p_of[r.n] != p:
            raise PlotError(
                f"{input_csv}: conflicting p values for N={r.n}")
        p_of[r.n] = p
        measured.setdefault(r.n, []).append(r.g_avg)
    ns = sorted(measured)
    fig, ax = _new_axes()
    for r in rows:
        ax.plot(r.n, r.g_avg, marker="o", markersize=3, color="#1f77b4",
                linestyle="none",
                label="measured gAvg (per seed)" if r is rows[0] else "_")
    mean = [sum(measured[n]) / len(measured[n]) for n in ns]
    ax.plot(ns, mean, marker="s", markersize=4, color="#1f77b4",
            linestyle="-", label="measured gAvg (mean)")
    predicted = [predict_g(n, p_of[n], f) for n in ns]
    ax.plot(ns, predicted, marker="^", markersize=4, color="#d62728",
            linestyle="--", label=f"predicted 2·f·c·lnN/lnc (f={f:g})")
    if logx:
        ax.set_xscale("log", base=2)
    ax.set_xlabel("network size N")
    ax.set_ylabel("chains acquired per node (gAvg)")
    ax.set_title("Measured vs predicted acquired chains (Erdős–Rényi)")
    ax.set_xticks(ns)
    ax.get_xaxis().set_major_formatter(plt.FuncFormatter(
        lambda v, _pos: f"{int(v)}" if v in ns else ""))
    ax.legend(loc="best")
    _save(fig, output)
    return fig
