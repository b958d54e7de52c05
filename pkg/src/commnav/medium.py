"""Assembly and decoding of the shared communication medium.

The medium has one slot per recipient.  Each slot holds a copy of one
sender's private observation, chosen by argmax over communication actions:
broadcasting picks a single sender for everybody (largest scalar action),
unicasting picks a sender per recipient (column-wise argmax over the
willingness matrix).  Ties go to the lowest sender index so runs are
reproducible.

Landmark coordinates inside an observation are relative to the sender, so
at assembly time every slot's landmark block is decoded to world frame
(relative coordinates plus the sender's own position).  Action policies
and intrinsic rewards consume that decoded block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Medium:
    """One observation snapshot per recipient, plus decoded landmarks."""

    sender_index: np.ndarray  # (N,) int64
    snapshots: np.ndarray  # (N, obs_dim), row i = observation of sender_index[i]
    decoded_landmarks: np.ndarray  # (N, N, 2) world frame

    @property
    def n_agents(self) -> int:
        return self.sender_index.shape[0]

    def policy_feed(self) -> np.ndarray:
        """Flattened decoded landmark block, one (2N,) row per recipient."""
        n = self.n_agents
        return self.decoded_landmarks.reshape(n, 2 * n)


def _landmark_slot(n_agents: int) -> int:
    return 4 + 2 * (n_agents - 1)


def decode_landmarks(observation: np.ndarray, n_agents: int) -> np.ndarray:
    """World-frame landmark positions carried by one observation vector."""
    slot = _landmark_slot(n_agents)
    rel = observation[slot : slot + 2 * n_agents].reshape(n_agents, 2)
    return rel + observation[:2]


def _build(observations: np.ndarray, senders: np.ndarray) -> Medium:
    n = observations.shape[0]
    snapshots = observations[senders].copy()
    decoded = np.stack([decode_landmarks(snapshots[i], n) for i in range(n)])
    return Medium(senders.astype(np.int64), snapshots, decoded)


def assemble_broadcast(observations: np.ndarray, comm_actions: np.ndarray) -> Medium:
    """Every recipient gets the observation of the agent with the largest
    scalar communication action."""
    observations = np.asarray(observations, dtype=np.float64)
    c = np.asarray(comm_actions, dtype=np.float64).reshape(-1)
    n = observations.shape[0]
    if c.shape != (n,):
        raise ValueError(f"expected {n} scalar comm actions, got shape {c.shape}")
    if c.min() < 0.0 or c.max() > 1.0:
        raise ValueError("comm actions must lie in [0, 1]")
    k = int(np.argmax(c))
    return _build(observations, np.full(n, k, dtype=np.int64))


def assemble_unicast(observations: np.ndarray, comm_actions: np.ndarray) -> Medium:
    """Recipient i gets the observation of the row-agent with the largest
    willingness in column i."""
    observations = np.asarray(observations, dtype=np.float64)
    c = np.asarray(comm_actions, dtype=np.float64)
    n = observations.shape[0]
    if c.shape != (n, n):
        raise ValueError(f"expected a ({n}, {n}) willingness matrix, got shape {c.shape}")
    if c.min() < 0.0 or c.max() > 1.0:
        raise ValueError("comm actions must lie in [0, 1]")
    senders = np.argmax(c, axis=0).astype(np.int64)
    return _build(observations, senders)


def assemble(group: str, observations: np.ndarray, comm_actions: np.ndarray) -> Medium:
    if group == "broadcasting":
        return assemble_broadcast(observations, comm_actions)
    return assemble_unicast(observations, comm_actions)


def oracle_medium(state, config, observations: np.ndarray) -> Medium:
    """Medium filled from ground truth: the gifted agent's observation for
    everybody (broadcasting), or for each recipient i the observation of
    the agent that correctly sees landmark i (unicasting)."""
    observations = np.asarray(observations, dtype=np.float64)
    n = config.n_agents
    if config.group == "broadcasting":
        senders = np.full(n, state.gifted, dtype=np.int64)
    else:
        senders = np.asarray(state.sigma, dtype=np.int64).copy()
    return _build(observations, senders)


def medium_accuracy(actual: Medium, oracle: Medium):
    """(all slots correct as 0/1, fraction of correct slots)."""
    if actual.n_agents != oracle.n_agents:
        raise ValueError("media have different agent counts")
    match = actual.sender_index == oracle.sender_index
    return int(match.all()), float(match.mean())
