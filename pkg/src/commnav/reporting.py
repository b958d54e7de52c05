"""Aggregation of evaluation summaries and training metrics into tables.

Inputs are the ``summary.csv`` / ``metrics.csv`` files written by the
command line tools.  Outputs are plot-ready CSV tables: per-scenario
mean(std) rewards across seeds, communication accuracies for the
medium-learning algorithm, min-max normalised per-scenario bars and
averaged learning curves.  Everything here is a pure function of the
input files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import trainer

SUMMARY_COLUMNS = (
    "scenario",
    "algorithm",
    "seed",
    "episodes",
    "mean_reward",
    "std_reward",
    "mean_intrinsic",
    "acc_all",
    "acc_any",
    "checkpoint",
    "manifest",
)


class ReportError(ValueError):
    """Inconsistent or insufficient report inputs."""


def write_summary_csv(path, summary: trainer.EvalSummary, checkpoint: str, manifest: str):
    row = summary.as_dict()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        writer.writerow(
            [
                row["scenario"],
                row["algorithm"],
                str(row["seed"]),
                str(row["episodes"]),
                repr(row["mean_reward"]),
                repr(row["std_reward"]),
                repr(row["mean_intrinsic"]),
                repr(row["acc_all"]),
                repr(row["acc_any"]),
                checkpoint,
                manifest,
            ]
        )


def write_summary_text(path, summary: trainer.EvalSummary, checkpoint: str, manifest: str):
    lines = [f"{k} = {v!r}" for k, v in summary.as_dict().items()]
    lines.append(f"checkpoint = {checkpoint!r}")
    lines.append(f"manifest = {manifest!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_summary(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != 1:
        raise ReportError(f"{path}: expected exactly one summary row, found {len(rows)}")
    row = rows[0]
    for key in ("mean_reward", "std_reward", "mean_intrinsic", "acc_all", "acc_any"):
        row[key] = float(row[key])
    row["seed"] = int(row["seed"])
    row["episodes"] = int(row["episodes"])
    row["path"] = str(path)
    return row


def find_summaries(root) -> list[dict]:
    return [read_summary(p) for p in sorted(Path(root).rglob("summary.csv"))]


def group_runs(summaries) -> dict:
    """Map (scenario, algorithm) to the list of per-seed summaries."""
    groups: dict[tuple[str, str], list[dict]] = {}
    for s in summaries:
        groups.setdefault((s["scenario"], s["algorithm"]), []).append(s)
    return groups


def _mean_std(values) -> tuple[float, float]:
    # population statistics, matching the mean(std) table convention
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def reward_table(summaries) -> list[dict]:
    """One row per (scenario, algorithm): reward mean/std across seeds."""
    if not summaries:
        raise ReportError("no evaluation summaries found")
    rows = []
    for (scenario, algorithm), runs in sorted(group_runs(summaries).items()):
        mean, std = _mean_std([r["mean_reward"] for r in runs])
        rows.append(
            {
                "scenario": scenario,
                "algorithm": algorithm,
                "n_runs": len(runs),
                "mean_reward": mean,
                "std_reward": std,
            }
        )
    return rows


def accuracy_table(summaries) -> list[dict]:
    """Communication accuracy rows for medium-learning runs."""
    rows = []
    groups = group_runs([s for s in summaries if s["algorithm"] == "maddpg-m"])
    for (scenario, _), runs in sorted(groups.items()):
        all_mean, all_std = _mean_std([r["acc_all"] for r in runs])
        any_mean, any_std = _mean_std([r["acc_any"] for r in runs])
        rows.append(
            {
                "scenario": scenario,
                "n_runs": len(runs),
                "acc_all_mean": all_mean,
                "acc_all_std": all_std,
                "acc_any_mean": any_mean,
                "acc_any_std": any_std,
            }
        )
    return rows


def normalized_table(summaries, require_all: bool = False) -> list[dict]:
    """Per-scenario min-max normalised mean rewards across algorithms."""
    rows = []
    by_scenario: dict[str, list[dict]] = {}
    for row in reward_table(summaries):
        by_scenario.setdefault(row["scenario"], []).append(row)
    for scenario, entries in sorted(by_scenario.items()):
        if len(entries) < 2:
            if require_all:
                raise ReportError(
                    f"scenario {scenario!r} has {len(entries)} algorithm(s); "
                    "normalisation needs at least 2"
                )
            continue
        values = trainer.normalize_rewards([e["mean_reward"] for e in entries])
        for entry, value in zip(entries, values):
            rows.append(
                {
                    "scenario": scenario,
                    "algorithm": entry["algorithm"],
                    "normalized_reward": float(value),
                }
            )
    if not rows:
        raise ReportError("no scenario had two or more algorithms to normalise")
    return rows


def single_group_tables(files):
    """Aggregate an explicit list of summary files as one group.

    All files must belong to the same scenario; used for hand-picked
    aggregations where silent mixing would be an error.
    """
    summaries = [read_summary(f) for f in files]
    scenarios = {s["scenario"] for s in summaries}
    if len(scenarios) > 1:
        raise ReportError(
            f"mixed-scenario aggregation rejected: {', '.join(sorted(scenarios))}"
        )
    rewards = reward_table(summaries)
    normalized = normalized_table(summaries, require_all=True)
    return rewards, normalized


def pretty_reward_table(rows) -> list[list[str]]:
    """Pivot to one row per algorithm, one mean(std) cell per scenario."""
    scenarios = sorted({r["scenario"] for r in rows})
    algorithms = sorted({r["algorithm"] for r in rows})
    cells = {(r["algorithm"], r["scenario"]): r for r in rows}
    table = [["algorithm", *scenarios]]
    for algo in algorithms:
        line = [algo]
        for scenario in scenarios:
            r = cells.get((algo, scenario))
            line.append(
                f"{r['mean_reward']:.2f}(±{r['std_reward']:.2f})" if r else ""
            )
        table.append(line)
    return table


def learning_curves(root) -> dict[tuple[str, str], list[dict]]:
    """Average the per-interval training metrics across matching runs.

    Scans run directories (manifest.json next to metrics.csv) under
    ``root`` and groups by (scenario, algorithm); runs in one group must
    share their logging grid.
    """
    import json

    by_key: dict[tuple[str, str], list[list[dict]]] = {}
    for metrics_path in sorted(Path(root).rglob("metrics.csv")):
        manifest_path = metrics_path.parent / "manifest.json"
        if not manifest_path.exists():
            continue
        config = json.loads(manifest_path.read_text())["config"]
        key = (config["scenario"], config["algorithm"])
        with open(metrics_path, newline="") as fh:
            rows = [
                {"episode": int(r["episode"]), "mean_reward": float(r["mean_reward"])}
                for r in csv.DictReader(fh)
            ]
        by_key.setdefault(key, []).append(rows)
    curves = {}
    for key, runs in sorted(by_key.items()):
        episodes = [r["episode"] for r in runs[0]]
        if any([row["episode"] for row in run] != episodes for run in runs):
            raise ReportError(f"runs for {key} have different logging grids")
        out = []
        for idx, episode in enumerate(episodes):
            vals = [run[idx]["mean_reward"] for run in runs]
            mean, std = _mean_std(vals)
            out.append(
                {
                    "episode": episode,
                    "mean_reward": mean,
                    "std_reward": std,
                    "n_runs": len(runs),
                }
            )
        curves[key] = out
    return curves


def write_table(path, rows: list[dict]):
    if not rows:
        raise ReportError("refusing to write an empty table")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        cols = list(rows[0].keys())
        writer.writerow(cols)
        for row in rows:
            writer.writerow(
                [repr(v) if isinstance(v, float) else str(v) for v in (row[c] for c in cols)]
            )


def read_table(path) -> list[dict]:
    """Inverse of :func:`write_table` for float/int/str cells."""
    with open(path, newline="") as fh:
        out = []
        for row in csv.DictReader(fh):
            parsed = {}
            for key, val in row.items():
                try:
                    parsed[key] = int(val)
                except ValueError:
                    try:
                        parsed[key] = float(val)
                    except ValueError:
                        parsed[key] = val
            out.append(parsed)
        return out


def write_report(out_dir, summaries, curves=None, pretty: bool = True):
    """Emit the full table set into ``out_dir``; returns the file map."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    rewards = reward_table(summaries)
    write_table(out_dir / "table_rewards.csv", rewards)
    files["rewards"] = out_dir / "table_rewards.csv"
    if pretty:
        with open(out_dir / "table_rewards_pretty.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(pretty_reward_table(rewards))
        files["rewards_pretty"] = out_dir / "table_rewards_pretty.csv"
    acc = accuracy_table(summaries)
    if acc:
        write_table(out_dir / "table_comm_accuracy.csv", acc)
        files["accuracy"] = out_dir / "table_comm_accuracy.csv"
    try:
        normalized = normalized_table(summaries)
        write_table(out_dir / "figure_rewards_normalized.csv", normalized)
        files["normalized"] = out_dir / "figure_rewards_normalized.csv"
    except ReportError:
        pass
    for (scenario, algorithm), rows in (curves or {}).items():
        path = out_dir / f"curve_{scenario}_{algorithm}.csv"
        write_table(path, rows)
        files[f"curve_{scenario}_{algorithm}"] = path
    return files
