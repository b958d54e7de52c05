import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commnav import env, medium


def make_observations(seed, cfg=None, steps=1):
    cfg = cfg or env.scenario_config("fixed-broadcast")
    rng = np.random.default_rng(seed)
    state = env.reset(cfg, rng)
    for _ in range(steps):
        state, _ = env.step(state, cfg, rng.uniform(0, 1, (cfg.n_agents, 4)))
    return state, cfg, env.observe(state, cfg)


def brute_force_broadcast_sender(c):
    best, best_v = 0, c[0]
    for j, v in enumerate(c):
        if v > best_v:
            best, best_v = j, v
    return best


def brute_force_unicast_senders(c):
    n = c.shape[0]
    out = []
    for i in range(n):
        best, best_v = 0, c[0, i]
        for j in range(n):
            if c[j, i] > best_v:
                best, best_v = j, c[j, i]
        out.append(best)
    return out


# ---------------------------------------------------------------------------
# broadcast assembly


def test_broadcast_argmax():
    _, _, obs = make_observations(0)
    med = medium.assemble_broadcast(obs, np.array([0.2, 0.9, 0.4]))
    assert list(med.sender_index) == [1, 1, 1]
    np.testing.assert_array_equal(med.snapshots[0], obs[1])


def test_broadcast_tie_breaks_lowest():
    _, _, obs = make_observations(1)
    med = medium.assemble_broadcast(obs, np.array([0.5, 0.5, 0.5]))
    assert list(med.sender_index) == [0, 0, 0]


def test_broadcast_decoded_landmarks_world_frame():
    state, cfg, obs = make_observations(2)
    med = medium.assemble_broadcast(obs, np.array([1.0, 0.0, 0.0]))
    slot = cfg.landmark_slot
    expected = obs[0, slot : slot + 6].reshape(3, 2) + obs[0, :2]
    for i in range(3):
        np.testing.assert_array_equal(med.decoded_landmarks[i], expected)


def test_broadcast_shape_errors():
    _, _, obs = make_observations(3)
    with pytest.raises(ValueError):
        medium.assemble_broadcast(obs, np.array([0.2, 0.9]))
    with pytest.raises(ValueError):
        medium.assemble_broadcast(obs, np.array([0.2, 0.9, 1.1]))


# ---------------------------------------------------------------------------
# unicast assembly


def test_unicast_one_hot_columns():
    _, _, obs = make_observations(4)
    c = np.zeros((3, 3))
    c[2, 0] = 1.0
    c[0, 1] = 1.0
    c[1, 2] = 1.0
    med = medium.assemble_unicast(obs, c)
    assert list(med.sender_index) == [2, 0, 1]
    for i, k in enumerate([2, 0, 1]):
        np.testing.assert_array_equal(med.snapshots[i], obs[k])


def test_unicast_all_equal_ties_to_zero():
    _, _, obs = make_observations(5)
    med = medium.assemble_unicast(obs, np.full((3, 3), 0.7))
    assert list(med.sender_index) == [0, 0, 0]


def test_unicast_matches_brute_force_scan():
    _, _, obs = make_observations(6)
    rng = np.random.default_rng(99)
    for _ in range(200):
        c = rng.uniform(0, 1, (3, 3))
        med = medium.assemble_unicast(obs, c)
        assert list(med.sender_index) == brute_force_unicast_senders(c)


def test_broadcast_matches_brute_force_scan():
    _, _, obs = make_observations(7)
    rng = np.random.default_rng(100)
    for _ in range(200):
        c = rng.uniform(0, 1, 3)
        med = medium.assemble_broadcast(obs, c)
        assert med.sender_index[0] == brute_force_broadcast_sender(c)


def test_unicast_shape_error():
    _, _, obs = make_observations(8)
    with pytest.raises(ValueError):
        medium.assemble_unicast(obs, np.zeros((2, 3)))


# ---------------------------------------------------------------------------
# properties


@given(st.integers(0, 2**31 - 1), st.sampled_from(["affine", "cube", "exp"]))
@settings(max_examples=40, deadline=None)
def test_argmax_invariant_under_increasing_transform(seed, kind):
    rng = np.random.default_rng(seed)
    _, _, obs = make_observations(9)
    c = rng.uniform(0, 1, (3, 3))
    if kind == "affine":
        f = lambda x: 0.25 + 0.5 * x
    elif kind == "cube":
        f = lambda x: x**3
    else:
        f = lambda x: (np.exp(x) - 1) / (np.e - 1)
    before = medium.assemble_unicast(obs, c).sender_index
    after = medium.assemble_unicast(obs, np.clip(f(c), 0, 1)).sender_index
    assert np.array_equal(before, after)


@given(st.integers(0, 2**31 - 1), st.integers(0, 2))
@settings(max_examples=40, deadline=None)
def test_unicast_columns_independent(seed, col):
    rng = np.random.default_rng(seed)
    _, _, obs = make_observations(10)
    c = rng.uniform(0, 1, (3, 3))
    before = medium.assemble_unicast(obs, c).sender_index
    c2 = c.copy()
    c2[:, col] = rng.uniform(0, 1, 3)
    after = medium.assemble_unicast(obs, c2).sender_index
    for i in range(3):
        if i != col:
            assert before[i] == after[i]


def test_decoded_round_trip():
    # re-encoding decoded world positions relative to the sender reproduces
    # the snapshot's landmark block exactly
    state, cfg, obs = make_observations(11, steps=3)
    med = medium.assemble_broadcast(obs, np.array([0.1, 0.8, 0.3]))
    slot = cfg.landmark_slot
    for i in range(3):
        snap = med.snapshots[i]
        reencoded = (med.decoded_landmarks[i] - snap[:2]).reshape(-1)
        np.testing.assert_array_equal(reencoded, snap[slot : slot + 6])


# ---------------------------------------------------------------------------
# oracle medium


def test_oracle_broadcast_sender_is_gifted():
    state, cfg, obs = make_observations(12)
    state.gifted = 2
    med = medium.oracle_medium(state, cfg, obs)
    assert list(med.sender_index) == [2, 2, 2]


def test_oracle_unicast_senders_follow_sigma():
    cfg = env.scenario_config("fixed-unicast")
    state, cfg, obs = make_observations(13, cfg)
    state.sigma = np.array([1, 2, 0])
    med = medium.oracle_medium(state, cfg, obs)
    assert list(med.sender_index) == [1, 2, 0]


def test_oracle_medium_reproduces_extrinsic_rewards():
    for name in ("dyn-broadcast", "dyn-unicast"):
        cfg = env.scenario_config(name)
        rng = np.random.default_rng(14)
        s = env.reset(cfg, rng)
        s, r = env.step(s, cfg, rng.uniform(0, 1, (3, 4)))
        med = medium.oracle_medium(s, cfg, env.observe(s, cfg))
        np.testing.assert_allclose(env.intrinsic_rewards(s, cfg, med), r, atol=1e-12)


# ---------------------------------------------------------------------------
# accuracy


def test_accuracy_exact_match():
    state, cfg, obs = make_observations(15)
    a = medium.oracle_medium(state, cfg, obs)
    assert medium.medium_accuracy(a, a) == (1, 1.0)


def test_accuracy_partial_match():
    state, cfg, obs = make_observations(16)
    oracle = medium.Medium(np.array([1, 1, 1]), obs[[1, 1, 1]], np.zeros((3, 3, 2)))
    actual = medium.Medium(np.array([1, 1, 2]), obs[[1, 1, 2]], np.zeros((3, 3, 2)))
    all_ok, frac = medium.medium_accuracy(actual, oracle)
    assert all_ok == 0
    assert frac == pytest.approx(2 / 3)


def test_policy_feed_shape():
    state, cfg, obs = make_observations(17)
    med = medium.assemble_broadcast(obs, np.array([0.9, 0.1, 0.1]))
    feed = med.policy_feed()
    assert feed.shape == (3, 6)
    np.testing.assert_array_equal(feed[0], med.decoded_landmarks[0].reshape(-1))
