"""End-to-end report pipeline on miniature runs.

Trains two algorithms for a handful of episodes across two seeds each,
evaluates them, and builds the aggregate tables: mean(std) rewards,
communication accuracies and min-max normalised bars.  Uses the same CLI
entry points as a real experiment, just tiny budgets.
"""

import tempfile
from pathlib import Path

from commnav import cli, reporting

with tempfile.TemporaryDirectory() as tmp:
    runs = Path(tmp) / "runs"
    rc = cli.main([
        "train",
        "--scenario", "fixed-broadcast",
        "--algo", "maddpg-m,ddpg",
        "--seed", "1,2",
        "--episodes", "60",
        "--steps", "15",
        "--batch-size", "64",
        "--update-every", "150",
        "--log-every", "30",
        "--out-dir", str(runs),
        "--quiet",
    ])
    assert rc == 0
    for run_dir in sorted(runs.iterdir()):
        assert cli.main(["eval", "--run-dir", str(run_dir), "--episodes", "30"]) == 0

    report = Path(tmp) / "report"
    assert cli.main(["report", "--in-dir", str(runs), "--out-dir", str(report)]) == 0

    print("reward table (mean/std across seeds):")
    for row in reporting.read_table(report / "table_rewards.csv"):
        print(f"  {row['scenario']:>16} {row['algorithm']:>9} "
              f"{row['mean_reward']:8.2f} +- {row['std_reward']:.2f} ({row['n_runs']} seeds)")

    print("\nnormalised bars (1 = best in scenario, 0 = worst):")
    for row in reporting.read_table(report / "figure_rewards_normalized.csv"):
        print(f"  {row['algorithm']:>9} {row['normalized_reward']:.3f}")

    print("\npretty table:")
    print((report / "table_rewards_pretty.csv").read_text())

    print("learning-curve files:")
    for p in sorted(report.glob("curve_*.csv")):
        print(f"  {p.name}: {len(p.read_text().splitlines()) - 1} intervals")
