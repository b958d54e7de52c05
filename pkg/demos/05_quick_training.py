"""A short two-level training run on fixed-broadcast.

Trains the medium-learning algorithm for a few hundred episodes (enough to
see the communication accuracy lift off the 1/3 chance level), evaluates
greedily, and round-trips the run through a checkpoint.  Takes roughly a
minute on a laptop CPU; bump the episode count for real learning curves.
"""

import tempfile
from pathlib import Path

from commnav import trainer

cfg = trainer.TrainConfig(
    scenario="fixed-broadcast",
    algorithm="maddpg-m",
    seed=1,
    num_episodes=800,
    log_every=100,
)
resolved = trainer.resolve_config(cfg)
print(f"scenario={resolved.scenario} algorithm={resolved.algorithm} gamma={resolved.gamma}")
print("episodes  reward   intrinsic  acc_all")

run = trainer.TrainRun(cfg)
run.run(progress=lambda r: print(
    f"{r.episode:8d}  {r.mean_reward:7.2f}  {r.mean_intrinsic:8.2f}  {r.acc_all:7.3f}"
))

summary = run.evaluate(episodes=100)
print(f"\ngreedy evaluation over {summary.episodes} episodes:")
print(f"  reward {summary.mean_reward:.2f} +- {summary.std_reward:.2f}")
print(f"  comm accuracy all={summary.acc_all:.3f} any={summary.acc_any:.3f}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "run.npz"
    run.save(path, include_buffers=False)
    again = trainer.load_checkpoint(path).evaluate(episodes=100)
    print(f"\nre-evaluating the checkpoint gives the same numbers: "
          f"{again.mean_reward == summary.mean_reward}")
