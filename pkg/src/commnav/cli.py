"""Command line front end: ``commnav train | eval | report``.

``train`` runs one or more (scenario, algorithm, seed) combinations, each
into its own run directory holding ``manifest.json``, ``metrics.csv``,
``checkpoint_final.npz`` and ``timing.json``.  ``eval`` loads a checkpoint
and writes a greedy-execution summary.  ``report`` aggregates summaries
and training metrics into the plot-ready tables.

Configuration precedence: command line flags, then a ``key = value``
config file, then ``COMMNAV_<FIELD>`` environment variables, then the
scenario defaults.  Every run artifact is reproducible from its manifest;
real wall-clock timings live only in ``timing.json`` so that repeated runs
are byte-identical.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import fields as dataclass_fields
from pathlib import Path

from . import __version__, agents, env, reporting, trainer

ENV_PREFIX = "COMMNAV_"

_CONFIG_FIELDS = {f.name: f for f in dataclass_fields(trainer.TrainConfig)}


def _parse_value(name: str, raw: str):
    text = raw.strip()
    lowered = text.lower()
    if lowered in ("none", "null"):
        return None
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def read_config_file(path) -> dict:
    """Flat ``key = value`` file mirroring the TrainConfig field names."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _CONFIG_FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    values = {}
    for name in _CONFIG_FIELDS:
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            values[name] = _parse_value(name, raw)
    return values


def merge_config(flag_values: dict, file_values: dict, environ=None) -> dict:
    merged = dict(env_overrides(environ))
    merged.update(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    return merged


def run_name(scenario: str, algorithm: str, seed: int) -> str:
    return f"{scenario}_{algorithm}_seed{seed}"


def _comma_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


# ---------------------------------------------------------------------------
# train


def train_one(config: trainer.TrainConfig, out_dir: Path, checkpoint_every: int = 0,
              checkpoint_buffers: bool = False, quiet: bool = True) -> Path:
    """Execute one run into ``out_dir / run_name`` and return that path."""
    config = trainer.resolve_config(config)
    run_dir = Path(out_dir) / run_name(config.scenario, config.algorithm, config.seed)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "commnav train",
        "version": __version__,
        "config": {f.name: getattr(config, f.name) for f in dataclass_fields(trainer.TrainConfig)},
        "seeds": [config.seed],
        "layout": {
            "metrics": "metrics.csv",
            "checkpoint": "checkpoint_final.npz",
            "timing": "timing.json",
        },
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    started = time.perf_counter()
    run = trainer.TrainRun(config)

    def progress(record):
        if not quiet:
            print(
                f"[{run_name(config.scenario, config.algorithm, config.seed)}] "
                f"episode {record.episode}: reward {record.mean_reward:.2f} "
                f"acc_all {record.acc_all:.3f}",
                file=sys.stderr,
            )

    if checkpoint_every:
        while run.episodes_done < config.num_episodes:
            run.run(progress=progress, limit=checkpoint_every)
            run.save(
                run_dir / f"checkpoint_ep{run.episodes_done}.npz",
                include_buffers=checkpoint_buffers,
            )
    else:
        run.run(progress=progress)
    trainer.write_metrics_csv(run_dir / "metrics.csv", run.metrics)
    run.save(run_dir / "checkpoint_final.npz", include_buffers=checkpoint_buffers)
    (run_dir / "timing.json").write_text(
        json.dumps({"train_wallclock_s": time.perf_counter() - started}) + "\n"
    )
    return run_dir


def _train_worker(payload):
    config_kwargs, out_dir, checkpoint_every, checkpoint_buffers, quiet = payload
    return str(
        train_one(
            trainer.TrainConfig(**config_kwargs),
            Path(out_dir),
            checkpoint_every,
            checkpoint_buffers,
            quiet,
        )
    )


def cmd_train(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    flag_values = {
        "num_episodes": args.episodes,
        "steps_per_episode": args.steps,
        "c_period": args.c_period,
        "gamma": args.gamma,
        "medium_update_mode": args.medium_mode,
        "batch_size": args.batch_size,
        "update_every": args.update_every,
        "log_every": args.log_every,
        "eval_episodes": args.eval_episodes,
    }
    merged = merge_config(flag_values, file_values)
    combos = []
    for scenario in _comma_list(args.scenario):
        for algorithm in _comma_list(args.algo):
            for seed in _comma_list(args.seed):
                kwargs = dict(merged)
                kwargs.update(scenario=scenario, algorithm=algorithm, seed=int(seed))
                trainer.resolve_config(trainer.TrainConfig(**kwargs))  # fail fast
                combos.append(kwargs)
    payloads = [
        (kwargs, str(args.out_dir), args.checkpoint_every, args.checkpoint_buffers, args.quiet)
        for kwargs in combos
    ]
    if args.jobs > 1 and len(payloads) > 1:
        import multiprocessing as mp

        with mp.get_context("spawn").Pool(processes=args.jobs) as pool:
            for run_dir in pool.imap(_train_worker, payloads):
                print(run_dir)
    else:
        for payload in payloads:
            print(_train_worker(payload))
    return 0


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    if args.checkpoint:
        checkpoint = Path(args.checkpoint)
        default_out = checkpoint.parent
    else:
        run_dir = Path(args.run_dir)
        checkpoint = run_dir / "checkpoint_final.npz"
        default_out = run_dir
    if not checkpoint.exists():
        print(f"checkpoint not found: {checkpoint}", file=sys.stderr)
        return 1
    out_dir = Path(args.out_dir) if args.out_dir else default_out
    out_dir.mkdir(parents=True, exist_ok=True)
    run = trainer.load_checkpoint(checkpoint)
    summary = run.evaluate(
        episodes=args.episodes,
        eval_seed=args.seed,
        trajectory_path=(out_dir / "trajectories.csv") if args.dump_trajectories else None,
    )
    manifest_ref = str(checkpoint.parent / "manifest.json")
    reporting.write_summary_csv(out_dir / "summary.csv", summary, str(checkpoint), manifest_ref)
    reporting.write_summary_text(out_dir / "summary.txt", summary, str(checkpoint), manifest_ref)
    print((out_dir / "summary.txt").read_text(), end="")
    return 0


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    out_dir = Path(args.out_dir)
    if args.files:
        rewards, normalized = reporting.single_group_tables(args.files)
        out_dir.mkdir(parents=True, exist_ok=True)
        reporting.write_table(out_dir / "table_rewards.csv", rewards)
        reporting.write_table(out_dir / "figure_rewards_normalized.csv", normalized)
        print(out_dir)
        return 0
    summaries = reporting.find_summaries(args.in_dir)
    if args.scenario:
        summaries = [s for s in summaries if s["scenario"] == args.scenario]
    curves = reporting.learning_curves(args.in_dir)
    if args.scenario:
        curves = {k: v for k, v in curves.items() if k[0] == args.scenario}
    files = reporting.write_report(out_dir, summaries, curves)
    for name in sorted(files):
        print(files[name])
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commnav",
        description="Train, evaluate and report on communication-medium navigation runs.",
    )
    parser.add_argument("--version", action="version", version=f"commnav {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run training for scenario/algorithm/seed combos")
    p_train.add_argument("--scenario", required=True,
                         help="scenario preset, comma-separable: "
                         + ", ".join(sorted(env.SCENARIO_PRESETS)))
    p_train.add_argument("--algo", required=True,
                         help="algorithm, comma-separable: " + ", ".join(agents.ALGORITHMS))
    p_train.add_argument("--seed", required=True, help="integer seed(s), comma-separable")
    p_train.add_argument("--out-dir", required=True)
    p_train.add_argument("--episodes", type=int, default=None)
    p_train.add_argument("--steps", type=int, default=None)
    p_train.add_argument("--c-period", type=int, default=None)
    p_train.add_argument("--gamma", type=float, default=None)
    p_train.add_argument("--medium-mode", choices=trainer.MEDIUM_UPDATE_MODES, default=None)
    p_train.add_argument("--batch-size", type=int, default=None)
    p_train.add_argument("--update-every", type=int, default=None)
    p_train.add_argument("--log-every", type=int, default=None)
    p_train.add_argument("--eval-episodes", type=int, default=None)
    p_train.add_argument("--config", default=None, help="key = value config file")
    p_train.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p_train.add_argument("--checkpoint-every", type=int, default=0,
                         help="also checkpoint every N episodes (0: final only)")
    p_train.add_argument("--checkpoint-buffers", action="store_true",
                         help="include replay buffers in checkpoints (exact resume)")
    p_train.add_argument("--quiet", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="greedy evaluation of a trained checkpoint")
    source = p_eval.add_mutually_exclusive_group(required=True)
    source.add_argument("--run-dir", help="run directory holding checkpoint_final.npz")
    source.add_argument("--checkpoint", help="explicit checkpoint file")
    p_eval.add_argument("--episodes", type=int, default=None,
                        help="evaluation episodes (default: config, 1000)")
    p_eval.add_argument("--seed", type=int, default=None, help="evaluation seed")
    p_eval.add_argument("--out-dir", default=None)
    p_eval.add_argument("--dump-trajectories", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_rep = sub.add_parser("report", help="aggregate summaries into tables")
    p_rep.add_argument("--in-dir", help="directory scanned for summary.csv/metrics.csv")
    p_rep.add_argument("--out-dir", required=True)
    p_rep.add_argument("--scenario", default=None, help="restrict to one scenario")
    p_rep.add_argument("--files", nargs="*", default=None,
                       help="explicit summary files aggregated as one group")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "report" and not args.files and not args.in_dir:
        parser.error("report needs --in-dir or --files")
    try:
        return args.func(args)
    except (trainer.ConfigError, reporting.ReportError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except agents.TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
