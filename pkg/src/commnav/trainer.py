"""Two-timescale training loop, evaluation protocol and run checkpoints.

Training alternates two clocks.  Communication actions are selected once
per window of ``c_period`` environment steps and the resulting medium is
held fixed inside the window; environment actions are selected every step
against that fixed medium.  Action-level transitions go to one replay
buffer every step, communication-level transitions (with the window's
accumulated extrinsic reward) to a second buffer at window ends.  Every
``update_every`` environment steps each agent takes one update on each of
its network pairs, followed by a soft target refresh.

Baselines reuse the same loop: ddpg/maddpg/meta skip all communication
machinery, ddpg-oc substitutes the hard-coded oracle medium every step.
Evaluation runs the same episode code greedily with a window of one and no
learning.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import agents, env, medium, nets

MEDIUM_ALGOS = ("maddpg-m", "ddpg-oc")
MEDIUM_UPDATE_MODES = ("fix_medium", "fix_comm_actions")

# scenarios where the low discount is used by the medium-learning algorithm
_LOW_GAMMA_SCENARIOS = ("fixed-broadcast", "alt-unicast", "dyn-unicast")

METRICS_COLUMNS = (
    "episode",
    "mean_reward",
    "mean_intrinsic",
    "acc_all",
    "acc_any",
    "critic_loss_mean",
    "actor_obj_mean",
    "wallclock_s",
)


class ConfigError(ValueError):
    """Invalid or inconsistent training configuration."""


@dataclass(frozen=True)
class TrainConfig:
    scenario: str
    algorithm: str
    seed: int = 0
    num_episodes: int = 100_000
    steps_per_episode: int = 25
    c_period: int = 5
    gamma: float | None = None  # None resolves to the per-scenario default
    update_every: int = 100
    batch_size: int = 1024
    lr: float = 0.01
    tau: float = 0.01
    buffer_capacity: int = 1_000_000
    medium_update_mode: str = "fix_medium"
    eval_episodes: int = 1000
    log_every: int = 100
    grad_clip: float | None = 0.5
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    ddpg_oc_reward: str = "extrinsic"
    comm_metrics: bool | None = None  # None: on exactly for medium algorithms
    force_oracle_medium: bool = False  # structural-reduction/ablation hook


def default_gamma(scenario: str, algorithm: str) -> float:
    if algorithm == "maddpg-m" and scenario in _LOW_GAMMA_SCENARIOS:
        return 0.8
    return 0.85


def resolve_config(config: TrainConfig) -> TrainConfig:
    """Validate and fill derived defaults; raises :class:`ConfigError`."""
    if config.scenario not in env.SCENARIO_PRESETS:
        raise ConfigError(
            f"unknown scenario {config.scenario!r}; valid: "
            f"{', '.join(sorted(env.SCENARIO_PRESETS))}"
        )
    if config.algorithm not in agents.ALGORITHMS:
        raise ConfigError(
            f"unknown algorithm {config.algorithm!r}; valid: {', '.join(agents.ALGORITHMS)}"
        )
    if config.c_period < 1:
        raise ConfigError("c_period must be >= 1")
    if config.medium_update_mode not in MEDIUM_UPDATE_MODES:
        raise ConfigError(f"medium_update_mode must be one of {MEDIUM_UPDATE_MODES}")
    if config.ddpg_oc_reward not in ("extrinsic", "intrinsic"):
        raise ConfigError("ddpg_oc_reward must be 'extrinsic' or 'intrinsic'")
    if config.num_episodes < 1 or config.steps_per_episode < 1:
        raise ConfigError("num_episodes and steps_per_episode must be >= 1")
    if config.update_every < 1 or config.batch_size < 1 or config.log_every < 1:
        raise ConfigError("update_every, batch_size and log_every must be >= 1")
    has_medium = config.algorithm in MEDIUM_ALGOS
    comm_metrics = has_medium if config.comm_metrics is None else config.comm_metrics
    if comm_metrics and not has_medium:
        raise ConfigError(
            f"communication metrics requested but {config.algorithm} has no medium"
        )
    if config.force_oracle_medium and config.algorithm != "maddpg-m":
        raise ConfigError("force_oracle_medium only applies to maddpg-m")
    gamma = config.gamma
    if gamma is None:
        gamma = default_gamma(config.scenario, config.algorithm)
    if not 0.0 <= gamma < 1.0:
        raise ConfigError("gamma must lie in [0, 1)")
    return replace(config, gamma=gamma, comm_metrics=comm_metrics)


@dataclass
class MetricsRecord:
    """Averages over one logging interval of training episodes."""

    episode: int
    mean_reward: float
    mean_intrinsic: float
    acc_all: float
    acc_any: float
    critic_loss_mean: float
    actor_obj_mean: float
    wallclock_s: float

    def row(self) -> list[str]:
        return [
            str(self.episode),
            repr(self.mean_reward),
            repr(self.mean_intrinsic),
            repr(self.acc_all),
            repr(self.acc_any),
            repr(self.critic_loss_mean),
            repr(self.actor_obj_mean),
            repr(self.wallclock_s),
        ]


@dataclass
class EvalSummary:
    """Greedy-execution metrics over a batch of evaluation episodes."""

    scenario: str
    algorithm: str
    seed: int
    episodes: int
    mean_reward: float
    std_reward: float
    mean_intrinsic: float
    acc_all: float
    acc_any: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainHooks:
    """Optional instrumentation callbacks used by audits and tests."""

    on_step: callable | None = None  # (episode, t, medium_or_None, actions, rewards, q)
    on_action_store: callable | None = None  # (episode, t, fields dict)
    on_comm_store: callable | None = None  # (episode, t, fields dict)
    on_update: callable | None = None  # (total_steps, losses dict)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *key]))


class TrainRun:
    """Mutable state of one training run; supports checkpoint and resume."""

    def __init__(self, config: TrainConfig):
        self.config = resolve_config(config)
        cfg = self.config
        self.scenario_cfg = env.scenario_config(cfg.scenario)
        scfg = self.scenario_cfg
        self.bundles = agents.build_bundles(scfg, cfg.algorithm, cfg.seed, lr=cfg.lr)
        self.env_rng = _stream(cfg.seed, 2, 0)
        self.noise_mu_rngs = [_stream(cfg.seed, 1, 0, i) for i in range(scfg.n_agents)]
        self.noise_nu_rngs = [_stream(cfg.seed, 1, 1, i) for i in range(scfg.n_agents)]
        self.buf_mu_rng = _stream(cfg.seed, 3, 0)
        self.buf_nu_rng = _stream(cfg.seed, 3, 1)
        self.noise_mu = [
            agents.ou_init(agents.ACTION_DIM, cfg.ou_theta, cfg.ou_sigma)
            for _ in range(scfg.n_agents)
        ]
        self.noise_nu = [
            agents.ou_init(scfg.comm_dim, cfg.ou_theta, cfg.ou_sigma)
            for _ in range(scfg.n_agents)
        ]
        n, obs = scfg.n_agents, scfg.obs_dim
        if cfg.algorithm in MEDIUM_ALGOS:
            self.buffer_mu = agents.ReplayBuffer(
                {
                    "obs": (n, obs),
                    "med": (n, 2 * n),
                    "act": (n, agents.ACTION_DIM),
                    "rew": (n,),
                    "obs_next": (n, obs),
                },
                cfg.buffer_capacity,
            )
        else:
            self.buffer_mu = agents.ReplayBuffer(
                {
                    "obs": (n, obs),
                    "act": (n, agents.ACTION_DIM),
                    "rew": (n,),
                    "obs_next": (n, obs),
                },
                cfg.buffer_capacity,
            )
        self.buffer_nu = None
        if cfg.algorithm == "maddpg-m":
            self.buffer_nu = agents.ReplayBuffer(
                {
                    "obs": (n, obs),
                    "comm": (n, scfg.comm_dim),
                    "K": (n,),
                    "obs_after": (n, obs),
                },
                cfg.buffer_capacity,
            )
        self.episodes_done = 0
        self.total_steps = 0
        self.metrics: list[MetricsRecord] = []
        self._interval = _IntervalAccumulator()

    # -- selection helpers -------------------------------------------------

    def _comm_actions(self, obs: np.ndarray, explore: bool) -> np.ndarray:
        rows = []
        for i, bundle in enumerate(self.bundles):
            noise = None
            if explore:
                noise, self.noise_nu[i] = agents.ou_sample(
                    self.noise_nu[i], self.noise_nu_rngs[i]
                )
            rows.append(agents.select_comm(bundle, obs[i], noise))
        return np.stack(rows)

    def _env_actions(self, obs: np.ndarray, med_feed, explore: bool) -> np.ndarray:
        cfg = self.config
        rows = []
        flat_obs = obs.reshape(-1) if cfg.algorithm == "meta" else None
        for i, bundle in enumerate(self.bundles):
            noise = None
            if explore:
                noise, self.noise_mu[i] = agents.ou_sample(
                    self.noise_mu[i], self.noise_mu_rngs[i]
                )
            if cfg.algorithm in MEDIUM_ALGOS:
                a = agents.select_action(bundle, obs[i], med_feed[i], noise)
            elif cfg.algorithm == "meta":
                a = agents.select_action(bundle, flat_obs, None, noise)
            else:
                a = agents.select_action(bundle, obs[i], None, noise)
            rows.append(a)
        return np.stack(rows)

    def _comm_for_medium(self, obs: np.ndarray, comm: np.ndarray) -> np.ndarray:
        # broadcast comm actions are one scalar per agent, unicast one row
        if self.scenario_cfg.group == "broadcasting":
            return comm[:, 0]
        return comm

    # -- episode -----------------------------------------------------------

    def _run_episode(
        self,
        episode_index: int,
        env_rng: np.random.Generator,
        learn: bool,
        c_period: int,
        hooks: TrainHooks | None = None,
        trajectory=None,
    ):
        cfg = self.config
        scfg = self.scenario_cfg
        n = scfg.n_agents
        state = env.reset(scfg, env_rng)
        obs = env.observe(state, scfg)
        if learn:
            self.noise_mu = [agents.ou_reset(s) for s in self.noise_mu]
            self.noise_nu = [agents.ou_reset(s) for s in self.noise_nu]

        med = None
        comm = None
        o_init = None
        k_accum = None
        count = 0
        reward_sums = np.zeros(n)
        intr_sums = np.zeros(n)
        acc_all_sum = 0.0
        acc_any_sum = 0.0

        for t in range(cfg.steps_per_episode):
            if cfg.algorithm == "maddpg-m":
                if count == 0:
                    comm = self._comm_actions(obs, explore=learn)
                    o_init = obs.copy()
                    k_accum = np.zeros(n)
                    if not cfg.force_oracle_medium:
                        med = medium.assemble(
                            scfg.group, obs, self._comm_for_medium(obs, comm)
                        )
                elif cfg.medium_update_mode == "fix_comm_actions" and not cfg.force_oracle_medium:
                    med = medium.assemble(scfg.group, obs, self._comm_for_medium(obs, comm))
                if cfg.force_oracle_medium:
                    med = medium.oracle_medium(state, scfg, obs)
            elif cfg.algorithm == "ddpg-oc":
                med = medium.oracle_medium(state, scfg, obs)

            if med is not None and cfg.comm_metrics:
                oracle_now = medium.oracle_medium(state, scfg, obs)
                a_all, a_any = medium.medium_accuracy(med, oracle_now)
                acc_all_sum += a_all
                acc_any_sum += a_any

            med_feed = med.policy_feed() if med is not None else None
            actions = self._env_actions(obs, med_feed, explore=learn)
            new_state, rewards = env.step(state, scfg, actions)
            new_obs = env.observe(new_state, scfg)
            reward_sums += rewards

            q = None
            if med is not None:
                q = env.intrinsic_rewards(new_state, scfg, med)
                intr_sums += q

            if hooks and hooks.on_step:
                hooks.on_step(episode_index, t, med, actions, rewards, q)
            if trajectory is not None:
                trajectory.append(
                    env.trajectory_row(episode_index, t, new_state, scfg, actions, rewards)
                )

            if learn:
                if cfg.algorithm in MEDIUM_ALGOS:
                    if cfg.algorithm == "maddpg-m":
                        stored_rew = q
                    else:
                        stored_rew = q if cfg.ddpg_oc_reward == "intrinsic" else rewards
                    fields = {
                        "obs": obs,
                        "med": med_feed,
                        "act": actions,
                        "rew": stored_rew,
                        "obs_next": new_obs,
                    }
                else:
                    fields = {
                        "obs": obs,
                        "act": actions,
                        "rew": rewards,
                        "obs_next": new_obs,
                    }
                self.buffer_mu.push(**fields)
                if hooks and hooks.on_action_store:
                    hooks.on_action_store(episode_index, t, fields)

                if cfg.algorithm == "maddpg-m":
                    k_accum = k_accum + rewards
                    if count == c_period - 1:
                        comm_fields = {
                            "obs": o_init,
                            "comm": comm,
                            "K": k_accum,
                            "obs_after": new_obs,
                        }
                        self.buffer_nu.push(**comm_fields)
                        if hooks and hooks.on_comm_store:
                            hooks.on_comm_store(episode_index, t, comm_fields)
                        count = 0
                    else:
                        count += 1

                self.total_steps += 1
                if self.total_steps % cfg.update_every == 0:
                    self._update_all(hooks)
            else:
                if cfg.algorithm == "maddpg-m":
                    count = 0 if count == c_period - 1 else count + 1

            obs = new_obs
            state = new_state

        steps = cfg.steps_per_episode
        return {
            "reward": float(reward_sums.mean()),
            "intrinsic": float(intr_sums.mean()) if med is not None else float("nan"),
            "acc_all": acc_all_sum / steps if cfg.comm_metrics else float("nan"),
            "acc_any": acc_any_sum / steps if cfg.comm_metrics else float("nan"),
        }

    # -- updates -----------------------------------------------------------

    def _update_all(self, hooks: TrainHooks | None = None):
        # each agent draws its own minibatch from each buffer
        cfg = self.config
        losses = {"critic": [], "actor": []}
        any_update = False
        for i, bundle in enumerate(self.bundles):
            batch_mu = self.buffer_mu.sample(self.buf_mu_rng, cfg.batch_size)
            if batch_mu is not None:
                any_update = True
                if cfg.algorithm in MEDIUM_ALGOS:
                    out = agents.update_action_policy(
                        bundle, batch_mu, cfg.gamma, cfg.grad_clip
                    )
                else:
                    out = agents.update_baseline(
                        self.bundles, i, batch_mu, cfg.gamma, cfg.grad_clip
                    )
                losses["critic"].append(out["critic_loss"])
                losses["actor"].append(out["actor_obj"])
            if self.buffer_nu is not None:
                batch_nu = self.buffer_nu.sample(self.buf_nu_rng, cfg.batch_size)
                if batch_nu is not None:
                    any_update = True
                    out = agents.update_comm_policy(
                        self.bundles, i, batch_nu, cfg.gamma, cfg.grad_clip
                    )
                    losses["critic"].append(out["critic_loss"])
                    losses["actor"].append(out["actor_obj"])
        if any_update:
            for bundle in self.bundles:
                agents.soft_update_bundle(bundle, cfg.tau)
        self._interval.add_losses(losses)
        if hooks and hooks.on_update:
            hooks.on_update(self.total_steps, losses)

    # -- driver ------------------------------------------------------------

    def run(
        self, hooks: TrainHooks | None = None, progress=None, limit: int | None = None
    ) -> list[MetricsRecord]:
        """Train until ``num_episodes`` episodes are done; returns metrics.

        ``limit`` caps how many episodes this call executes (for staged
        runs around checkpoints); alignment with ``log_every`` keeps the
        metrics stream identical to an uninterrupted run.
        """
        cfg = self.config
        started = time.perf_counter()
        stop_at = cfg.num_episodes
        if limit is not None:
            stop_at = min(stop_at, self.episodes_done + limit)
        while self.episodes_done < stop_at:
            stats = self._run_episode(
                self.episodes_done,
                self.env_rng,
                learn=True,
                c_period=cfg.c_period,
                hooks=hooks,
            )
            self.episodes_done += 1
            self._interval.add_episode(stats)
            at_interval = self.episodes_done % cfg.log_every == 0
            if at_interval or self.episodes_done == cfg.num_episodes:
                if self._interval.episodes:
                    record = self._interval.flush(
                        self.episodes_done, time.perf_counter() - started
                    )
                    self.metrics.append(record)
                    if progress:
                        progress(record)
        return self.metrics

    def evaluate(
        self,
        episodes: int | None = None,
        eval_seed: int | None = None,
        trajectory_path=None,
    ) -> EvalSummary:
        """Noise-free greedy execution with a one-step medium window."""
        cfg = self.config
        n_eps = cfg.eval_episodes if episodes is None else int(episodes)
        seed = cfg.seed if eval_seed is None else int(eval_seed)
        rng = _stream(seed, 2, 1)
        rewards = np.empty(n_eps)
        intr = np.empty(n_eps)
        acc_all = np.empty(n_eps)
        acc_any = np.empty(n_eps)
        rows = [] if trajectory_path is not None else None
        for e in range(n_eps):
            stats = self._run_episode(
                e, rng, learn=False, c_period=1, trajectory=rows
            )
            rewards[e] = stats["reward"]
            intr[e] = stats["intrinsic"]
            acc_all[e] = stats["acc_all"]
            acc_any[e] = stats["acc_any"]
        if trajectory_path is not None:
            import csv

            with open(trajectory_path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(env.trajectory_header(self.scenario_cfg))
                writer.writerows(rows)
        return EvalSummary(
            scenario=cfg.scenario,
            algorithm=cfg.algorithm,
            seed=seed,
            episodes=n_eps,
            mean_reward=float(rewards.mean()),
            std_reward=float(rewards.std()),
            mean_intrinsic=float(intr.mean()) if cfg.comm_metrics else float("nan"),
            acc_all=float(acc_all.mean()) if cfg.comm_metrics else float("nan"),
            acc_any=float(acc_any.mean()) if cfg.comm_metrics else float("nan"),
        )

    # -- checkpointing -----------------------------------------------------

    def save(self, path, include_buffers: bool = True) -> None:
        save_checkpoint(path, self, include_buffers=include_buffers)


class _IntervalAccumulator:
    def __init__(self):
        self.episodes = 0
        self.reward = 0.0
        self.intrinsic = 0.0
        self.acc_all = 0.0
        self.acc_any = 0.0
        self.critic_losses: list[float] = []
        self.actor_objs: list[float] = []

    def add_episode(self, stats: dict):
        self.episodes += 1
        self.reward += stats["reward"]
        self.intrinsic += stats["intrinsic"]
        self.acc_all += stats["acc_all"]
        self.acc_any += stats["acc_any"]

    def add_losses(self, losses: dict):
        self.critic_losses.extend(losses["critic"])
        self.actor_objs.extend(losses["actor"])

    def flush(self, episode: int, wallclock: float) -> MetricsRecord:
        n = self.episodes
        record = MetricsRecord(
            episode=episode,
            mean_reward=self.reward / n,
            mean_intrinsic=self.intrinsic / n,
            acc_all=self.acc_all / n,
            acc_any=self.acc_any / n,
            critic_loss_mean=(
                float(np.mean(self.critic_losses)) if self.critic_losses else float("nan")
            ),
            actor_obj_mean=(
                float(np.mean(self.actor_objs)) if self.actor_objs else float("nan")
            ),
            wallclock_s=wallclock,
        )
        self.__init__()
        return record


def train(config: TrainConfig, hooks: TrainHooks | None = None, progress=None):
    """Convenience wrapper: build a run, train it, return ``(run, metrics)``."""
    run = TrainRun(config)
    metrics = run.run(hooks=hooks, progress=progress)
    return run, metrics


def normalize_rewards(values) -> np.ndarray:
    """Min-max normalisation across algorithms within one scenario.

    All-equal inputs map to all ones; fewer than two values is an error.
    """
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size < 2:
        raise ValueError("normalisation needs at least two algorithms")
    lo, hi = arr.min(), arr.max()
    if lo == hi:
        return np.ones_like(arr)
    return (arr - lo) / (hi - lo)


# ---------------------------------------------------------------------------
# metrics CSV


def write_metrics_csv(path, records, deterministic_wallclock: bool = True) -> None:
    """Write the metrics table.

    With ``deterministic_wallclock`` (the default) the wall-clock column is
    zeroed so two identically configured runs emit byte-identical files;
    real timings live in the run's ``timing.json``.
    """
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for rec in records:
            row = rec.row()
            if deterministic_wallclock:
                row[-1] = "0.0"
            writer.writerow(row)


# ---------------------------------------------------------------------------
# checkpoints


_NET_ROLES = ("mu", "mu_target", "q_mu", "q_mu_target", "nu", "nu_target", "q_nu", "q_nu_target")
_ADAM_FOR = {"mu": "adam_mu", "q_mu": "adam_q_mu", "nu": "adam_nu", "q_nu": "adam_q_nu"}


def save_checkpoint(path, run: TrainRun, include_buffers: bool = True) -> None:
    """Serialise a run to ``.npz``: config, networks, Adam moments, noise and
    RNG cursors, and (optionally) replay buffer contents for exact resume."""
    payload: dict[str, np.ndarray] = {}
    meta = {
        "config": asdict(run.config),
        "episodes_done": run.episodes_done,
        "total_steps": run.total_steps,
        "rng": {
            "env": run.env_rng.bit_generator.state,
            "noise_mu": [g.bit_generator.state for g in run.noise_mu_rngs],
            "noise_nu": [g.bit_generator.state for g in run.noise_nu_rngs],
            "buf_mu": run.buf_mu_rng.bit_generator.state,
            "buf_nu": run.buf_nu_rng.bit_generator.state,
        },
        "has_buffers": include_buffers,
    }
    for i, bundle in enumerate(run.bundles):
        for role in _NET_ROLES:
            params = getattr(bundle, role, None)
            if params is None:
                continue
            payload[f"agent{i}/{role}/flat"] = nets.params_to_flat(params)
            meta.setdefault("net_dims", {})[f"agent{i}/{role}"] = {
                "layer_dims": list(params.layer_dims),
                "output_activation": params.output_activation,
            }
            adam_attr = _ADAM_FOR.get(role)
            if adam_attr:
                adam = getattr(bundle, adam_attr)
                m_flat, v_flat = nets.adam_to_flat(adam)
                payload[f"agent{i}/{role}/adam_m"] = m_flat
                payload[f"agent{i}/{role}/adam_v"] = v_flat
                meta.setdefault("adam_steps", {})[f"agent{i}/{role}"] = adam.step_count
    for i, noise in enumerate(run.noise_mu):
        payload[f"noise_mu{i}"] = noise.value
    for i, noise in enumerate(run.noise_nu):
        payload[f"noise_nu{i}"] = noise.value
    if include_buffers:
        for tag, buf in (("buf_mu", run.buffer_mu), ("buf_nu", run.buffer_nu)):
            if buf is None:
                continue
            state = buf.state_dict()
            for name, arr in state.pop("data").items():
                payload[f"{tag}/{name}"] = arr
            meta[tag] = state
    payload["meta"] = np.array(json.dumps(meta))
    np.savez_compressed(path, **payload)


def load_checkpoint(path) -> TrainRun:
    """Restore a run saved by :func:`save_checkpoint`."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        config = TrainConfig(**meta["config"])
        run = TrainRun(config)
        run.episodes_done = meta["episodes_done"]
        run.total_steps = meta["total_steps"]
        run.env_rng.bit_generator.state = meta["rng"]["env"]
        for g, s in zip(run.noise_mu_rngs, meta["rng"]["noise_mu"]):
            g.bit_generator.state = s
        for g, s in zip(run.noise_nu_rngs, meta["rng"]["noise_nu"]):
            g.bit_generator.state = s
        run.buf_mu_rng.bit_generator.state = meta["rng"]["buf_mu"]
        run.buf_nu_rng.bit_generator.state = meta["rng"]["buf_nu"]
        for i, bundle in enumerate(run.bundles):
            for role in _NET_ROLES:
                key = f"agent{i}/{role}/flat"
                if key not in data:
                    continue
                dims = meta["net_dims"][f"agent{i}/{role}"]
                params = nets.flat_to_params(
                    data[key], dims["layer_dims"], "relu", dims["output_activation"]
                )
                setattr(bundle, role, params)
                adam_attr = _ADAM_FOR.get(role)
                if adam_attr:
                    adam = nets.adam_from_flat(
                        params,
                        data[f"agent{i}/{role}/adam_m"],
                        data[f"agent{i}/{role}/adam_v"],
                        meta["adam_steps"][f"agent{i}/{role}"],
                        run.config.lr,
                    )
                    setattr(bundle, adam_attr, adam)
        for i in range(len(run.noise_mu)):
            run.noise_mu[i] = agents.OUNoiseState(
                data[f"noise_mu{i}"].copy(), config.ou_theta, config.ou_sigma
            )
        for i in range(len(run.noise_nu)):
            run.noise_nu[i] = agents.OUNoiseState(
                data[f"noise_nu{i}"].copy(), config.ou_theta, config.ou_sigma
            )
        if meta.get("has_buffers"):
            for tag, buf in (("buf_mu", run.buffer_mu), ("buf_nu", run.buffer_nu)):
                if buf is None:
                    continue
                state = dict(meta[tag])
                state["data"] = (
                    {name: data[f"{tag}/{name}"] for name in buf.fields}
                    if state["size"]
                    else {}
                )
                buf.load_state(state)
    return run
