"""Actor-critic machinery shared by all five algorithms.

Each agent owns an independent set of networks (no parameter sharing):

- ``maddpg-m``: an action actor over (own observation, medium slot), a
  decentralized action critic over (observation, medium slot, action), plus
  a communication actor over the own observation and a centralized
  communication critic over every agent's (observation, comm action).
- ``ddpg-oc``: the action-level networks only; the medium is hard-coded.
- ``ddpg``: decentralized actor and critic on private data.
- ``maddpg``: decentralized actor, centralized critic.
- ``meta``: centralized critic and an actor reading all observations.

Updates are plain deterministic-policy-gradient steps: the critic minimises
a squared temporal-difference error against target networks, the actor
follows the critic's gradient with respect to its own action slot.  Every
update takes one Adam step per network, with optional global-norm gradient
clipping, and never touches the other network of the pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nets

ALGORITHMS = ("maddpg-m", "ddpg", "maddpg", "meta", "ddpg-oc")
ACTION_DIM = 4

POLICY_HIDDEN = (64, 64)
CRITIC_HIDDEN = (128, 128)

_ROLE_MU, _ROLE_QMU, _ROLE_NU, _ROLE_QNU = 0, 1, 2, 3


class TrainingDiverged(RuntimeError):
    """Raised when a loss or gradient turns non-finite during an update."""


# ---------------------------------------------------------------------------
# exploration noise


@dataclass
class OUNoiseState:
    """State of one Ornstein-Uhlenbeck process (dt = 1)."""

    value: np.ndarray
    theta: float = 0.15
    sigma: float = 0.2
    mean: np.ndarray | None = None

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros_like(self.value)


def ou_init(dim: int, theta: float = 0.15, sigma: float = 0.2) -> OUNoiseState:
    return OUNoiseState(np.zeros(dim), theta, sigma)


def ou_reset(state: OUNoiseState) -> OUNoiseState:
    return OUNoiseState(np.zeros_like(state.value), state.theta, state.sigma, state.mean.copy())


def ou_sample(state: OUNoiseState, rng: np.random.Generator):
    """Advance the process one step; the new value is the perturbation."""
    gauss = rng.standard_normal(state.value.shape)
    value = state.value + state.theta * (state.mean - state.value) + state.sigma * gauss
    return value, OUNoiseState(value, state.theta, state.sigma, state.mean.copy())


# ---------------------------------------------------------------------------
# replay


class ReplayBuffer:
    """Fixed-capacity FIFO ring over named float64 arrays.

    Storage grows lazily up to ``capacity``; sampling is uniform with
    replacement and reports "not ready" (None) while fewer than
    ``batch_size`` transitions are stored.
    """

    def __init__(self, fields: dict[str, tuple[int, ...]], capacity: int = 1_000_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.fields = {k: tuple(s) for k, s in fields.items()}
        self._data: dict[str, np.ndarray] = {}
        self._allocated = 0
        self.size = 0
        self._next = 0
        self.insert_count = 0

    def _ensure_capacity(self, needed: int):
        if needed <= self._allocated:
            return
        new_alloc = min(self.capacity, max(1024, 2 * self._allocated))
        while new_alloc < needed:
            new_alloc = min(self.capacity, 2 * new_alloc)
        for name, shape in self.fields.items():
            fresh = np.empty((new_alloc, *shape))
            if self._allocated:
                fresh[: self.size] = self._data[name][: self.size]
            self._data[name] = fresh
        self._allocated = new_alloc

    def push(self, **items):
        if set(items) != set(self.fields):
            raise ValueError(f"expected fields {sorted(self.fields)}, got {sorted(items)}")
        self._ensure_capacity(min(self.capacity, self.size + 1))
        for name, value in items.items():
            arr = np.asarray(value, dtype=np.float64)
            if arr.shape != self.fields[name]:
                raise ValueError(
                    f"field {name!r} has shape {arr.shape}, want {self.fields[name]}"
                )
            self._data[name][self._next] = arr
        self._next = (self._next + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.insert_count += 1

    def sample(self, rng: np.random.Generator, batch_size: int):
        if self.size < batch_size:
            return None
        idx = rng.integers(0, self.size, size=batch_size)
        return {name: self._data[name][idx] for name in self.fields}

    def __len__(self) -> int:
        return self.size

    def state_dict(self) -> dict:
        return {
            "capacity": self.capacity,
            "size": self.size,
            "next": self._next,
            "insert_count": self.insert_count,
            "data": {k: self._data[k][: self.size].copy() for k in self.fields}
            if self.size
            else {},
        }

    def load_state(self, state: dict):
        if state["capacity"] != self.capacity:
            raise ValueError("checkpointed buffer capacity differs from configured")
        self.size = 0
        self._next = 0
        if state["size"]:
            self._ensure_capacity(state["size"])
            for k in self.fields:
                self._data[k][: state["size"]] = state["data"][k]
        self.size = state["size"]
        self._next = state["next"]
        self.insert_count = state["insert_count"]


# ---------------------------------------------------------------------------
# bundles


@dataclass
class AgentBundle:
    """All networks and optimizer states owned by one agent."""

    algorithm: str
    index: int
    mu: nets.MLPParams
    mu_target: nets.MLPParams
    q_mu: nets.MLPParams
    q_mu_target: nets.MLPParams
    adam_mu: nets.AdamState
    adam_q_mu: nets.AdamState
    nu: nets.MLPParams | None = None
    nu_target: nets.MLPParams | None = None
    q_nu: nets.MLPParams | None = None
    q_nu_target: nets.MLPParams | None = None
    adam_nu: nets.AdamState | None = None
    adam_q_nu: nets.AdamState | None = None

    @property
    def has_comm(self) -> bool:
        return self.nu is not None


def _net_rng(seed: int, agent: int, role: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), agent, role]))


def bundle_dims(config, algorithm: str) -> dict:
    """Input widths for each network of the given algorithm."""
    obs = config.obs_dim
    n = config.n_agents
    med = 2 * n
    comm = config.comm_dim
    if algorithm in ("maddpg-m", "ddpg-oc"):
        dims = {"mu_in": obs + med, "q_mu_in": obs + med + ACTION_DIM}
    elif algorithm == "ddpg":
        dims = {"mu_in": obs, "q_mu_in": obs + ACTION_DIM}
    elif algorithm == "maddpg":
        dims = {"mu_in": obs, "q_mu_in": n * (obs + ACTION_DIM)}
    elif algorithm == "meta":
        dims = {"mu_in": n * obs, "q_mu_in": n * (obs + ACTION_DIM)}
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}; valid: {', '.join(ALGORITHMS)}")
    if algorithm == "maddpg-m":
        dims["nu_in"] = obs
        dims["nu_out"] = comm
        dims["q_nu_in"] = n * (obs + comm)
    return dims


def build_bundles(config, algorithm: str, seed: int, lr: float = 0.01) -> list[AgentBundle]:
    """One independent bundle per agent, seeded reproducibly.

    Network initialisation seeds depend only on (seed, agent, network role),
    so two algorithms sharing a network role start from identical weights.
    """
    dims = bundle_dims(config, algorithm)
    bundles = []
    for i in range(config.n_agents):
        mu = nets.init_params(
            (dims["mu_in"], *POLICY_HIDDEN, ACTION_DIM), "sigmoid", _net_rng(seed, i, _ROLE_MU)
        )
        q_mu = nets.init_params(
            (dims["q_mu_in"], *CRITIC_HIDDEN, 1), "identity", _net_rng(seed, i, _ROLE_QMU)
        )
        bundle = AgentBundle(
            algorithm=algorithm,
            index=i,
            mu=mu,
            mu_target=mu.copy(),
            q_mu=q_mu,
            q_mu_target=q_mu.copy(),
            adam_mu=nets.init_adam(mu, lr),
            adam_q_mu=nets.init_adam(q_mu, lr),
        )
        if algorithm == "maddpg-m":
            nu = nets.init_params(
                (dims["nu_in"], *POLICY_HIDDEN, dims["nu_out"]),
                "sigmoid",
                _net_rng(seed, i, _ROLE_NU),
            )
            q_nu = nets.init_params(
                (dims["q_nu_in"], *CRITIC_HIDDEN, 1), "identity", _net_rng(seed, i, _ROLE_QNU)
            )
            bundle.nu = nu
            bundle.nu_target = nu.copy()
            bundle.q_nu = q_nu
            bundle.q_nu_target = q_nu.copy()
            bundle.adam_nu = nets.init_adam(nu, lr)
            bundle.adam_q_nu = nets.init_adam(q_nu, lr)
        bundles.append(bundle)
    return bundles


def soft_update_bundle(bundle: AgentBundle, tau: float):
    bundle.mu_target = nets.soft_update(bundle.mu_target, bundle.mu, tau)
    bundle.q_mu_target = nets.soft_update(bundle.q_mu_target, bundle.q_mu, tau)
    if bundle.has_comm:
        bundle.nu_target = nets.soft_update(bundle.nu_target, bundle.nu, tau)
        bundle.q_nu_target = nets.soft_update(bundle.q_nu_target, bundle.q_nu, tau)


# ---------------------------------------------------------------------------
# action selection


def select_action(bundle: AgentBundle, o_i: np.ndarray, m_i: np.ndarray | None = None, noise=None):
    """Greedy action of agent i, optionally perturbed, clamped to [0, 1].

    ``m_i`` is the agent's decoded medium slot for medium-conditioned
    algorithms and must be None otherwise.  For ``meta`` pass the
    concatenation of all observations as ``o_i``.
    """
    if bundle.algorithm in ("maddpg-m", "ddpg-oc"):
        if m_i is None:
            raise ValueError(f"{bundle.algorithm} needs a medium slot")
        x = np.concatenate([o_i, m_i])
    else:
        if m_i is not None:
            raise ValueError(f"{bundle.algorithm} does not take a medium slot")
        x = np.asarray(o_i)
    a = nets.forward(bundle.mu, x)
    if noise is not None:
        a = a + noise
    return np.clip(a, 0.0, 1.0)


def select_comm(bundle: AgentBundle, o_i: np.ndarray, noise=None):
    """Communication action of agent i, clamped to [0, 1]."""
    if not bundle.has_comm:
        raise ValueError(f"{bundle.algorithm} has no communication policy")
    c = nets.forward(bundle.nu, o_i)
    if noise is not None:
        c = c + noise
    return np.clip(c, 0.0, 1.0)


# ---------------------------------------------------------------------------
# updates


def _check_finite(value: float, what: str, agent: int):
    if not np.isfinite(value):
        raise TrainingDiverged(f"{what} for agent {agent} became {value}")


def _critic_step(bundle_attr_q, bundle_attr_adam, bundle, q_in, y, grad_clip):
    q_params = getattr(bundle, bundle_attr_q)
    q_pred, cache = nets.forward_cached(q_params, q_in)
    td = q_pred[:, 0] - y
    loss = float(np.mean(td * td))
    _check_finite(loss, "critic loss", bundle.index)
    upstream = (2.0 / td.shape[0]) * td[:, None]
    grads, _ = nets.backward(q_params, q_in, upstream, cache)
    if grad_clip is not None:
        grads = nets.clip_grads(grads, grad_clip)
    new_q, new_adam = nets.adam_step(getattr(bundle, bundle_attr_adam), q_params, grads)
    setattr(bundle, bundle_attr_q, new_q)
    setattr(bundle, bundle_attr_adam, new_adam)
    return loss


def policy_gradient_through_critic(actor_params, critic_params, x_actor, q_in_fn, slot):
    """Gradient of mean critic value w.r.t. the actor parameters.

    The actor output enters the critic input through ``q_in_fn``; ``slot``
    is the column range it occupies there, and the gradient flows only
    through that slot.  Returns ``(objective, ascent_grads)``.
    """
    out, cache_actor = nets.forward_cached(actor_params, x_actor)
    q_in = q_in_fn(out)
    q_val, cache_q = nets.forward_cached(critic_params, q_in)
    objective = float(np.mean(q_val))
    batch = q_in.shape[0]
    _, dq_din = nets.backward(
        critic_params, q_in, np.full((batch, 1), 1.0 / batch), cache_q
    )
    d_out = dq_din[:, slot[0] : slot[1]]
    grads, _ = nets.backward(actor_params, x_actor, d_out, cache_actor)
    return objective, grads


def _actor_step(bundle, actor_attr, adam_attr, critic_params, x_actor, q_in_fn, slot, grad_clip):
    """Ascend the critic along the actor's own action slot."""
    actor_params = getattr(bundle, actor_attr)
    objective, ascent = policy_gradient_through_critic(
        actor_params, critic_params, x_actor, q_in_fn, slot
    )
    _check_finite(objective, "actor objective", bundle.index)
    grads = nets.scale_grads(ascent, -1.0)
    if grad_clip is not None:
        grads = nets.clip_grads(grads, grad_clip)
    new_actor, new_adam = nets.adam_step(getattr(bundle, adam_attr), actor_params, grads)
    setattr(bundle, actor_attr, new_actor)
    setattr(bundle, adam_attr, new_adam)
    return objective


def update_action_policy(bundle: AgentBundle, batch: dict, gamma: float, grad_clip: float | None = 0.5):
    """Critic + actor step on the decentralized medium-conditioned pair.

    The TD target reuses the stored medium slot: y = rew + gamma *
    Q'(o', m, mu'(o', m)).  Used by maddpg-m (rew = intrinsic) and ddpg-oc
    (rew = extrinsic under the oracle medium).
    """
    i = bundle.index
    o = batch["obs"][:, i]
    m = batch["med"][:, i]
    a = batch["act"][:, i]
    rew = batch["rew"][:, i]
    o2 = batch["obs_next"][:, i]

    x2 = np.hstack([o2, m])
    a2 = nets.forward(bundle.mu_target, x2)
    q_next = nets.forward(bundle.q_mu_target, np.hstack([x2, a2]))[:, 0]
    y = rew + gamma * q_next

    critic_loss = _critic_step("q_mu", "adam_q_mu", bundle, np.hstack([o, m, a]), y, grad_clip)

    x = np.hstack([o, m])
    base = x.shape[1]
    actor_obj = _actor_step(
        bundle,
        "mu",
        "adam_mu",
        bundle.q_mu,
        x,
        lambda out: np.hstack([x, out]),
        (base, base + ACTION_DIM),
        grad_clip,
    )
    return {"critic_loss": critic_loss, "actor_obj": actor_obj}


def _interleave(blocks_a: np.ndarray, blocks_b: np.ndarray) -> np.ndarray:
    """Concatenate per-agent pairs (a_1, b_1, ..., a_N, b_N) column-wise."""
    n = blocks_a.shape[1]
    parts = []
    for j in range(n):
        parts.append(blocks_a[:, j])
        parts.append(blocks_b[:, j])
    return np.hstack(parts)


def update_comm_policy(
    bundles: list[AgentBundle], i: int, batch: dict, gamma: float, grad_clip: float | None = 0.5
):
    """Centralized communication critic and local communication actor step.

    The target bootstraps through every agent's target communication actor;
    the actor gradient flows only through agent i's own comm slot.
    """
    bundle = bundles[i]
    if not bundle.has_comm:
        raise ValueError("bundle has no communication networks")
    obs = batch["obs"]
    comm = batch["comm"]
    k_rew = batch["K"][:, i]
    obs2 = batch["obs_after"]
    n = obs.shape[1]
    comm_dim = comm.shape[2]
    obs_dim = obs.shape[2]

    c2 = np.stack(
        [nets.forward(bundles[j].nu_target, obs2[:, j]) for j in range(n)], axis=1
    )
    y = k_rew + gamma * nets.forward(bundle.q_nu_target, _interleave(obs2, c2))[:, 0]

    critic_loss = _critic_step(
        "q_nu", "adam_q_nu", bundle, _interleave(obs, comm), y, grad_clip
    )

    o_i = obs[:, i]
    stride = obs_dim + comm_dim
    slot0 = i * stride + obs_dim

    def q_in_fn(c_out):
        c_mix = comm.copy()
        c_mix[:, i] = c_out
        return _interleave(obs, c_mix)

    actor_obj = _actor_step(
        bundle,
        "nu",
        "adam_nu",
        bundle.q_nu,
        o_i,
        q_in_fn,
        (slot0, slot0 + comm_dim),
        grad_clip,
    )
    return {"critic_loss": critic_loss, "actor_obj": actor_obj}


def update_baseline(
    bundles: list[AgentBundle], i: int, batch: dict, gamma: float, grad_clip: float | None = 0.5
):
    """One critic + actor step for ddpg, maddpg or meta on extrinsic rewards."""
    bundle = bundles[i]
    algorithm = bundle.algorithm
    obs = batch["obs"]
    act = batch["act"]
    rew = batch["rew"][:, i]
    obs2 = batch["obs_next"]
    n = obs.shape[1]
    obs_dim = obs.shape[2]

    if algorithm == "ddpg":
        o, a, o2 = obs[:, i], act[:, i], obs2[:, i]
        a2 = nets.forward(bundle.mu_target, o2)
        y = rew + gamma * nets.forward(bundle.q_mu_target, np.hstack([o2, a2]))[:, 0]
        critic_loss = _critic_step("q_mu", "adam_q_mu", bundle, np.hstack([o, a]), y, grad_clip)
        actor_obj = _actor_step(
            bundle,
            "mu",
            "adam_mu",
            bundle.q_mu,
            o,
            lambda out: np.hstack([o, out]),
            (obs_dim, obs_dim + ACTION_DIM),
            grad_clip,
        )
    elif algorithm in ("maddpg", "meta"):
        a2 = np.stack(
            [
                nets.forward(
                    bundles[j].mu_target,
                    obs2[:, j] if algorithm == "maddpg" else obs2.reshape(obs2.shape[0], -1),
                )
                for j in range(n)
            ],
            axis=1,
        )
        y = rew + gamma * nets.forward(bundle.q_mu_target, _interleave(obs2, a2))[:, 0]
        critic_loss = _critic_step(
            "q_mu", "adam_q_mu", bundle, _interleave(obs, act), y, grad_clip
        )
        x_actor = obs[:, i] if algorithm == "maddpg" else obs.reshape(obs.shape[0], -1)
        stride = obs_dim + ACTION_DIM
        slot0 = i * stride + obs_dim

        def q_in_fn(a_out):
            a_mix = act.copy()
            a_mix[:, i] = a_out
            return _interleave(obs, a_mix)

        actor_obj = _actor_step(
            bundle,
            "mu",
            "adam_mu",
            bundle.q_mu,
            x_actor,
            q_in_fn,
            (slot0, slot0 + ACTION_DIM),
            grad_clip,
        )
    else:
        raise ValueError(f"update_baseline does not handle {algorithm!r}")
    return {"critic_loss": critic_loss, "actor_obj": actor_obj}
