"""Noisy cooperative-navigation particle worlds.

N disc-shaped agents move in a square arena trying to cover N landmarks.
Landmark observations are corrupted: depending on the scenario either a
single "gifted" agent sees all true landmark positions (broadcasting
group), or each agent correctly sees exactly one landmark, usually one
dedicated to somebody else (unicasting group).  Who observes correctly is
fixed for the whole run, redrawn each episode, or recomputed every step
from the agents' distances to the arena centre.

Dynamics are per-step velocity control: an action is four scalars in
[0, 1] read as (+x, -x, +y, -y) throttle, positions integrate one step and
clamp to the arena.  All randomness flows through an explicit
``numpy.random.Generator``; stepping is deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

GROUPS = ("broadcasting", "unicasting")
VARIANTS = ("fixed", "alternating", "dynamic")

_RESET_MAX_RETRIES = 100
_clamp_warned = False


class EpisodeFinishedError(RuntimeError):
    """Raised when stepping an episode past its configured length."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Geometry, dynamics and assignment rules of one scenario."""

    group: str
    variant: str
    n_agents: int = 3
    arena_half_width: float = 1.0
    agent_radius: float = 0.1
    landmark_radius: float = 0.05
    max_speed: float = 0.1
    episode_length: int = 25
    collision_penalty: float = 1.0
    fixed_gifted_index: int = 0

    def __post_init__(self):
        if self.group not in GROUPS:
            raise ValueError(f"group must be one of {GROUPS}, got {self.group!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.n_agents < 2:
            raise ValueError("need at least two agents")
        if self.episode_length < 1:
            raise ValueError("episode_length must be >= 1")
        if self.agent_radius <= 0 or self.landmark_radius <= 0:
            raise ValueError("radii must be positive")
        if not 0 <= self.fixed_gifted_index < self.n_agents:
            raise ValueError("fixed_gifted_index out of range")

    @property
    def has_flag(self) -> bool:
        # alternating variants expose a correctness flag in the observation
        return self.variant == "alternating"

    @property
    def landmark_slot(self) -> int:
        """Offset of the landmark block inside an observation vector."""
        return 4 + 2 * (self.n_agents - 1)

    @property
    def obs_dim(self) -> int:
        return 4 + 2 * (self.n_agents - 1) + 2 * self.n_agents + (1 if self.has_flag else 0)

    @property
    def comm_dim(self) -> int:
        """Width of one agent's communication action."""
        return 1 if self.group == "broadcasting" else self.n_agents


SCENARIO_PRESETS = {
    "fixed-broadcast": ScenarioConfig("broadcasting", "fixed"),
    "alt-broadcast": ScenarioConfig("broadcasting", "alternating"),
    "dyn-broadcast": ScenarioConfig("broadcasting", "dynamic"),
    "fixed-unicast": ScenarioConfig("unicasting", "fixed"),
    "alt-unicast": ScenarioConfig("unicasting", "alternating"),
    "dyn-unicast": ScenarioConfig("unicasting", "dynamic"),
}


def scenario_config(name: str) -> ScenarioConfig:
    try:
        return SCENARIO_PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown scenario {name!r}; valid names: {', '.join(sorted(SCENARIO_PRESETS))}"
        ) from None


@dataclass
class WorldState:
    """Ground-truth simulator state for one episode."""

    positions: np.ndarray  # (N, 2)
    velocities: np.ndarray  # (N, 2)
    true_landmarks: np.ndarray  # (N, 2)
    fake_landmarks: np.ndarray  # (N, N, 2): observer i's wrong position for landmark j
    gifted: int | None  # broadcasting groups
    sigma: np.ndarray | None  # unicasting groups: sigma[j] = agent observing landmark j
    step_index: int
    episode_rng_state: dict | None = None

    def copy(self) -> "WorldState":
        return WorldState(
            self.positions.copy(),
            self.velocities.copy(),
            self.true_landmarks.copy(),
            self.fake_landmarks.copy(),
            self.gifted,
            None if self.sigma is None else self.sigma.copy(),
            self.step_index,
            self.episode_rng_state,
        )


def _sample_separated(rng, n, half_width, min_dist, anchors=None, anchor_dist=0.0):
    """Sample n points uniformly, retrying while any pair (or any point vs an
    anchor set) is closer than the given distances; gives up after a bounded
    number of retries and returns the last draw."""
    pts = None
    for _ in range(_RESET_MAX_RETRIES):
        pts = rng.uniform(-half_width, half_width, size=(n, 2))
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        np.fill_diagonal(d, np.inf)
        if d.min() < min_dist:
            continue
        if anchors is not None:
            da = np.linalg.norm(pts[:, None, :] - anchors[None, :, :], axis=-1)
            if da.min() < anchor_dist:
                continue
        return pts
    return pts


def gifted_assignment(state: WorldState, config: ScenarioConfig):
    """Current correct-observer assignment.

    Dynamic variants derive it from the agents' distances to the arena
    centre; fixed and alternating variants return the stored value.
    Broadcasting returns the gifted agent index, unicasting the permutation
    ``sigma`` with ``sigma[j]`` = index of the agent observing landmark j
    correctly.
    """
    if config.variant != "dynamic":
        return state.gifted if config.group == "broadcasting" else state.sigma
    dist = np.linalg.norm(state.positions, axis=1)
    if config.group == "broadcasting":
        return int(np.argmin(dist))  # ties resolve to the lowest index
    ranking = np.argsort(dist, kind="stable")
    sigma = np.empty(config.n_agents, dtype=np.int64)
    for r in range(config.n_agents):
        # the agent ranked r observes the landmark dedicated to the agent
        # ranked (r + 1) mod N
        sigma[ranking[(r + 1) % config.n_agents]] = ranking[r]
    return sigma


def reset(config: ScenarioConfig, rng: np.random.Generator) -> WorldState:
    """Start a fresh episode: sample geometry, noise and the assignment."""
    n = config.n_agents
    rng_state = rng.bit_generator.state
    positions = _sample_separated(rng, n, config.arena_half_width, 2 * config.agent_radius)
    true_landmarks = _sample_separated(
        rng,
        n,
        config.arena_half_width,
        2 * config.landmark_radius,
        anchors=positions,
        anchor_dist=config.agent_radius + config.landmark_radius,
    )
    fake_landmarks = rng.uniform(-config.arena_half_width, config.arena_half_width, size=(n, n, 2))

    gifted: int | None = None
    sigma: np.ndarray | None = None
    if config.group == "broadcasting":
        if config.variant == "fixed":
            gifted = config.fixed_gifted_index
        elif config.variant == "alternating":
            gifted = int(rng.integers(n))
    else:
        if config.variant == "fixed":
            sigma = (np.arange(n, dtype=np.int64) + 1) % n
        elif config.variant == "alternating":
            sigma = rng.permutation(n).astype(np.int64)

    state = WorldState(
        positions=positions,
        velocities=np.zeros((n, 2)),
        true_landmarks=true_landmarks,
        fake_landmarks=fake_landmarks,
        gifted=gifted,
        sigma=sigma,
        step_index=0,
        episode_rng_state=rng_state,
    )
    if config.variant == "dynamic":
        assignment = gifted_assignment(state, config)
        if config.group == "broadcasting":
            state.gifted = assignment
        else:
            state.sigma = assignment
    return state


def _sees_landmark(state: WorldState, config: ScenarioConfig, agent: int, landmark: int) -> bool:
    if config.group == "broadcasting":
        return agent == state.gifted
    return int(state.sigma[landmark]) == agent


def observe(state: WorldState, config: ScenarioConfig) -> np.ndarray:
    """Private observation vectors, one row per agent.

    Layout: own position (2), own velocity (2), true relative positions of
    the other agents in ascending index order (2(N-1)), perceived relative
    landmark positions in landmark order (2N), and in alternating variants
    a trailing correctness flag.
    """
    n = config.n_agents
    out = np.zeros((n, config.obs_dim))
    for i in range(n):
        row = [state.positions[i], state.velocities[i]]
        for j in range(n):
            if j != i:
                row.append(state.positions[j] - state.positions[i])
        for j in range(n):
            if _sees_landmark(state, config, i, j):
                row.append(state.true_landmarks[j] - state.positions[i])
            else:
                row.append(state.fake_landmarks[i, j] - state.positions[i])
        flat = np.concatenate(row)
        if config.has_flag:
            if config.group == "broadcasting":
                flag = 1.0 if i == state.gifted else 0.0
            else:
                # set when this agent correctly observes a landmark dedicated
                # to another agent
                flag = 1.0 if any(
                    int(state.sigma[j]) == i and j != i for j in range(n)
                ) else 0.0
            flat = np.concatenate([flat, [flag]])
        out[i] = flat
    return out


def _collision_counts(positions: np.ndarray, config: ScenarioConfig):
    """(#colliding pairs, per-agent collision counts)."""
    d = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    hit = d < 2 * config.agent_radius
    per_agent = hit.sum(axis=1)
    return int(hit.sum()) // 2, per_agent


def extrinsic_rewards(state: WorldState, config: ScenarioConfig) -> np.ndarray:
    """Distance-based rewards for the current positions.

    Broadcasting: one shared value, minus the sum over landmarks of the
    closest agent distance, minus a penalty per colliding pair.
    Unicasting: per agent, minus the distance to its dedicated landmark
    (landmark i belongs to agent i) minus a penalty per collision it is
    involved in.
    """
    n = config.n_agents
    pairs, per_agent = _collision_counts(state.positions, config)
    if config.group == "broadcasting":
        d = np.linalg.norm(
            state.positions[:, None, :] - state.true_landmarks[None, :, :], axis=-1
        )
        shared = -float(d.min(axis=0).sum()) - config.collision_penalty * pairs
        return np.full(n, shared)
    own = np.linalg.norm(state.positions - state.true_landmarks, axis=1)
    return -own - config.collision_penalty * per_agent


def step(state: WorldState, config: ScenarioConfig, actions: np.ndarray):
    """Advance one step; returns ``(new_state, extrinsic_rewards)``.

    Actions are one row of four scalars in [0, 1] per agent; out-of-range
    values are clamped (with a one-time warning), stepping past the episode
    length raises :class:`EpisodeFinishedError`.
    """
    global _clamp_warned
    if state.step_index >= config.episode_length:
        raise EpisodeFinishedError(
            f"episode already finished after {config.episode_length} steps"
        )
    actions = np.asarray(actions, dtype=np.float64)
    if actions.shape != (config.n_agents, 4):
        raise ValueError(f"actions must have shape ({config.n_agents}, 4), got {actions.shape}")
    if actions.min() < 0.0 or actions.max() > 1.0:
        if not _clamp_warned:
            logger.warning("action components outside [0, 1]; clamping (reported once)")
            _clamp_warned = True
        actions = np.clip(actions, 0.0, 1.0)

    velocities = config.max_speed * np.stack(
        [actions[:, 0] - actions[:, 1], actions[:, 2] - actions[:, 3]], axis=1
    )
    positions = np.clip(
        state.positions + velocities, -config.arena_half_width, config.arena_half_width
    )
    new_state = WorldState(
        positions=positions,
        velocities=velocities,
        true_landmarks=state.true_landmarks.copy(),
        fake_landmarks=state.fake_landmarks.copy(),
        gifted=state.gifted,
        sigma=None if state.sigma is None else state.sigma.copy(),
        step_index=state.step_index + 1,
        episode_rng_state=state.episode_rng_state,
    )
    if config.variant == "dynamic":
        assignment = gifted_assignment(new_state, config)
        if config.group == "broadcasting":
            new_state.gifted = assignment
        else:
            new_state.sigma = assignment
    return new_state, extrinsic_rewards(new_state, config)


def intrinsic_rewards(state: WorldState, config: ScenarioConfig, medium) -> np.ndarray:
    """Rewards measured against the landmark positions carried by the medium.

    Same formulas as the extrinsic rewards, with each recipient's decoded
    medium landmarks substituted for the true ones.  When the medium holds
    the correct observations this reproduces the extrinsic rewards.
    """
    n = config.n_agents
    decoded = medium.decoded_landmarks
    if decoded.shape != (n, n, 2):
        raise ValueError(f"medium landmark block has shape {decoded.shape}, want ({n}, {n}, 2)")
    pairs, per_agent = _collision_counts(state.positions, config)
    q = np.empty(n)
    for i in range(n):
        if config.group == "broadcasting":
            d = np.linalg.norm(
                state.positions[:, None, :] - decoded[i][None, :, :], axis=-1
            )
            q[i] = -float(d.min(axis=0).sum()) - config.collision_penalty * pairs
        else:
            q[i] = (
                -float(np.linalg.norm(state.positions[i] - decoded[i, i]))
                - config.collision_penalty * per_agent[i]
            )
    return q


# ---------------------------------------------------------------------------
# trajectory dumps


def trajectory_header(config: ScenarioConfig) -> list[str]:
    cols = ["episode", "step"]
    for i in range(config.n_agents):
        cols += [f"agent{i}_x", f"agent{i}_y"]
    for i in range(config.n_agents):
        cols += [f"agent{i}_a{k}" for k in range(4)]
    cols += [f"reward{i}" for i in range(config.n_agents)]
    cols.append("assignment")
    return cols


def trajectory_row(episode, step_idx, state, config, actions, rewards) -> list[str]:
    if config.group == "broadcasting":
        assignment = str(state.gifted)
    else:
        assignment = "|".join(str(int(s)) for s in state.sigma)
    vals = [str(episode), str(step_idx)]
    vals += [repr(float(v)) for v in state.positions.ravel()]
    vals += [repr(float(v)) for v in np.asarray(actions).ravel()]
    vals += [repr(float(v)) for v in np.asarray(rewards).ravel()]
    vals.append(assignment)
    return vals
