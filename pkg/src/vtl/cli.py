"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
`VTL_LOG` in {off, summary, events} controls log verbosity on stderr.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from vtl.fixtures import write_corpus
from vtl.simnet import (
    CSV_HEADER,
    ConfigError,
    Metrics,
    ScenarioConfig,
    Simulator,
)

_SWEEP_KEYS = {"base", "vary", "repetitions"}
_VARY_PARAMS = {"c", "p", "N"}


def _log_level() -> str:
    level = os.environ.get("VTL_LOG", "off")
    if level not in ("off", "summary", "events"):
        raise ConfigError("VTL_LOG must be one of off, summary, events")
    return level


def _read_config(path: str, seed, rounds) -> ScenarioConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    if seed is not None:
        raw["seed"] = seed
    if rounds is not None:
        raw["rounds"] = rounds
    try:
        return ScenarioConfig.from_dict(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _emit_logs(sim: Simulator, metrics: Metrics, level: str) -> None:
    if level == "off":
        return
    cfg = sim.cfg
    print(
        f"[vtl] {cfg.scenario}: N={cfg.n} {cfg.topology}({cfg.param}) "
        f"seed={cfg.seed} rounds={cfg.rounds} gAvg={metrics.g_avg:.3f} "
        f"accepted={metrics.accepted} rejected={metrics.rejected} "
        f"skipped={metrics.skipped} equivocations={metrics.equivocations}",
        file=sys.stderr,
    )
    if level == "events":
        for line in sim.events:
            print(f"[vtl:event] {line}", file=sys.stderr)


@click.group()
def main() -> None:
    """Value-transfer-ledger simulator."""


@main.command("run")
@click.argument("config_path", type=click.Path())
@click.option("-o", "--out", "out_path", type=click.Path(), default=None,
              help="CSV output file (default: stdout).")
@click.option("--seed", type=int, default=None, help="Override config seed.")
@click.option("--rounds", type=int, default=None, help="Override config rounds.")
def cmd_run(config_path: str, out_path, seed, rounds) -> None:
    """Run one scenario and emit its metrics CSV."""
    try:
        level = _log_level()
        cfg = _read_config(config_path, seed, rounds)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    try:
        sim = Simulator(cfg)
        metrics = sim.run()
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(2)
    csv = CSV_HEADER + "\n" + metrics.csv_row(cfg) + "\n"
    if out_path:
        Path(out_path).write_text(csv)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(csv, nl=False)
    _emit_logs(sim, metrics, level)


def _expand_sweep(doc: dict) -> tuple[list[ScenarioConfig], list[str], int]:
    unknown = set(doc) - _SWEEP_KEYS
    if unknown:
        raise ConfigError(f"unknown sweep keys: {sorted(unknown)}")
    if "base" not in doc:
        raise ConfigError("sweep requires a 'base' config")
    base_raw = doc["base"]
    vary = doc.get("vary")
    reps = int(doc.get("repetitions", 1))
    if reps < 1:
        raise ConfigError("repetitions must be >= 1")
    points: list[tuple[str, dict]] = []
    if not vary:
        points.append(("base", dict(base_raw)))
    else:
        if set(vary) - {"param", "values"}:
            raise ConfigError("vary accepts only 'param' and 'values'")
        param = vary.get("param")
        values = vary.get("values", [])
        if param not in _VARY_PARAMS:
            raise ConfigError(f"vary.param must be one of {sorted(_VARY_PARAMS)}")
        if not values:
            points.append(("base", dict(base_raw)))
        for value in values:
            raw = json.loads(json.dumps(base_raw))  # deep copy
            if param == "N":
                raw["N"] = value
            else:
                raw.setdefault("topology", {})[param] = value
            points.append((f"{param}{value}", raw))
    configs = []
    labels = []
    for label, raw in points:
        base_seed = int(raw.get("seed", 0))
        for rep in range(reps):
            rep_raw = json.loads(json.dumps(raw))
            rep_raw["seed"] = base_seed + rep
            rep_raw["scenario"] = f"{raw.get('scenario', 'sweep')}-{label}"
            configs.append(ScenarioConfig.from_dict(rep_raw))
            labels.append(label)
    return configs, labels, reps


def _aggregate_row(cfgs: list[ScenarioConfig], rows: list[Metrics]) -> str:
    first = cfgs[0]
    n = len(rows)
    return ",".join([
        first.scenario,
        str(first.n),
        first.topology,
        first.param,
        first.mode,
        str(min(c.seed for c in cfgs)),
        f"{sum(m.g_avg for m in rows) / n:.6f}",
        str(max(m.g_max for m in rows)),
        f"{sum(m.ccpt_blocks for m in rows) / n:.6f}",
        f"{sum(m.ccpt_bytes for m in rows) / n:.2f}",
        str(round(sum(m.tx_count for m in rows) / n)),
        str(round(sum(m.rejected for m in rows) / n)),
        str(round(sum(m.equivocations for m in rows) / n)),
    ])


@main.command("sweep")
@click.argument("sweep_path", type=click.Path())
@click.argument("out_dir", type=click.Path())
def cmd_sweep(sweep_path: str, out_dir: str) -> None:
    """Run a parameter sweep: per-point CSVs plus an aggregate CSV."""
    try:
        level = _log_level()
        doc = json.loads(Path(sweep_path).read_text())
        configs, labels, reps = _expand_sweep(doc)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    aggregate_rows = []
    by_label: dict[str, tuple[list[ScenarioConfig], list[Metrics]]] = {}
    order: list[str] = []
    for cfg, label in zip(configs, labels):
        try:
            sim = Simulator(cfg)
            metrics = sim.run()
        except Exception as exc:  # noqa: BLE001 - keep remaining points running
            click.echo(f"point {cfg.scenario} seed={cfg.seed} failed: {exc}",
                       err=True)
            failures += 1
            continue
        point_path = out / f"{cfg.scenario}-s{cfg.seed}.csv"
        point_path.write_text(
            CSV_HEADER + "\n" + metrics.csv_row(cfg) + "\n")
        if label not in by_label:
            by_label[label] = ([], [])
            order.append(label)
        by_label[label][0].append(cfg)
        by_label[label][1].append(metrics)
        _emit_logs(sim, metrics, level)
    for label in order:
        cfgs, rows = by_label[label]
        aggregate_rows.append(_aggregate_row(cfgs, rows))
    (out / "aggregate.csv").write_text(
        CSV_HEADER + "\n" + "\n".join(aggregate_rows) + "\n")
    click.echo(f"wrote {len(aggregate_rows)} aggregate points to "
               f"{out / 'aggregate.csv'}")
    sys.exit(2 if failures else 0)


@main.command("fixtures")
@click.argument("out_dir", type=click.Path())
def cmd_fixtures(out_dir: str) -> None:
    """Write the adversarial proof-bundle fixture corpus."""
    paths = write_corpus(out_dir)
    click.echo(f"wrote {len(paths)} files to {out_dir}")


if __name__ == "__main__":
    main()
