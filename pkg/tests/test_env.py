import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from commnav import env, medium


CFG_B = env.scenario_config("fixed-broadcast")
CFG_U = env.scenario_config("fixed-unicast")


def random_state(cfg, seed, steps=0):
    rng = np.random.default_rng(seed)
    state = env.reset(cfg, rng)
    for _ in range(steps):
        state, _ = env.step(state, cfg, rng.uniform(0, 1, size=(cfg.n_agents, 4)))
    return state, rng


# ---------------------------------------------------------------------------
# presets and reset


def test_presets_exist():
    assert sorted(env.SCENARIO_PRESETS) == [
        "alt-broadcast",
        "alt-unicast",
        "dyn-broadcast",
        "dyn-unicast",
        "fixed-broadcast",
        "fixed-unicast",
    ]
    with pytest.raises(KeyError):
        env.scenario_config("no-such-scenario")


def test_fixed_variant_assignment_constant_across_resets():
    rng = np.random.default_rng(0)
    s1 = env.reset(CFG_B, rng)
    s2 = env.reset(CFG_B, rng)
    assert s1.gifted == s2.gifted == CFG_B.fixed_gifted_index
    s3 = env.reset(CFG_U, rng)
    s4 = env.reset(CFG_U, rng)
    assert np.array_equal(s3.sigma, s4.sigma)
    assert np.array_equal(s3.sigma, (np.arange(3) + 1) % 3)


def test_alternating_broadcast_gifted_uniform():
    cfg = env.scenario_config("alt-broadcast")
    rng = np.random.default_rng(123)
    counts = np.zeros(3)
    n = 3000
    for _ in range(n):
        counts[env.reset(cfg, rng).gifted] += 1
    p = stats.chisquare(counts).pvalue
    assert p > 1e-3


def test_alternating_unicast_sigma_is_permutation():
    cfg = env.scenario_config("alt-unicast")
    rng = np.random.default_rng(5)
    seen = set()
    for _ in range(200):
        s = env.reset(cfg, rng)
        assert sorted(s.sigma) == [0, 1, 2]
        seen.add(tuple(s.sigma))
    assert len(seen) == 6  # all 3! permutations occur


def test_reset_no_initial_overlaps():
    rng = np.random.default_rng(7)
    for _ in range(50):
        s = env.reset(CFG_B, rng)
        d = np.linalg.norm(s.positions[:, None] - s.positions[None, :], axis=-1)
        np.fill_diagonal(d, np.inf)
        assert d.min() >= 2 * CFG_B.agent_radius
        dl = np.linalg.norm(s.true_landmarks[:, None] - s.true_landmarks[None, :], axis=-1)
        np.fill_diagonal(dl, np.inf)
        assert dl.min() >= 2 * CFG_B.landmark_radius


def test_dynamic_reset_assignment_matches_positions():
    cfg = env.scenario_config("dyn-broadcast")
    rng = np.random.default_rng(11)
    for _ in range(20):
        s = env.reset(cfg, rng)
        assert s.gifted == int(np.argmin(np.linalg.norm(s.positions, axis=1)))


# ---------------------------------------------------------------------------
# gifted_assignment


def _state_with_positions(cfg, positions):
    state, _ = random_state(cfg, 0)
    state.positions = np.asarray(positions, dtype=float)
    return state


def test_dynamic_broadcast_closest_to_centre():
    cfg = env.scenario_config("dyn-broadcast")
    s = _state_with_positions(cfg, [(0, 0), (1, 1), (2, 2)])
    assert env.gifted_assignment(s, cfg) == 0
    s.positions = np.array([(0.9, 0.9), (0.5, 0.5), (0.2, 0.2)])
    assert env.gifted_assignment(s, cfg) == 2


def test_dynamic_broadcast_tie_breaks_to_lowest_index():
    cfg = env.scenario_config("dyn-broadcast")
    s = _state_with_positions(cfg, [(0.5, 0.0), (0.0, 0.5), (-0.5, 0.0)])
    assert env.gifted_assignment(s, cfg) == 0


def test_dynamic_unicast_sigma_is_shifted_ranking():
    cfg = env.scenario_config("dyn-unicast")
    s = _state_with_positions(cfg, [(0.3, 0.0), (0.1, 0.0), (0.7, 0.0)])
    # ranking by distance: 1, 0, 2 -> agent 1 observes agent 0's landmark,
    # agent 0 observes agent 2's landmark, agent 2 observes agent 1's
    sigma = env.gifted_assignment(s, cfg)
    assert list(sigma) == [1, 2, 0]
    ranking = [1, 0, 2]
    for r in range(3):
        assert sigma[ranking[(r + 1) % 3]] == ranking[r]


def test_fixed_assignment_returned_unchanged():
    s, _ = random_state(CFG_U, 3)
    before = s.sigma.copy()
    assert np.array_equal(env.gifted_assignment(s, CFG_U), before)


# ---------------------------------------------------------------------------
# observe


def test_observation_length_broadcasting():
    s, _ = random_state(CFG_B, 1)
    obs = env.observe(s, CFG_B)
    assert obs.shape == (3, 14)
    alt = env.scenario_config("alt-broadcast")
    s2, _ = random_state(alt, 1)
    assert env.observe(s2, alt).shape == (3, 15)


def test_gifted_on_landmark_sees_zero_relative():
    s, _ = random_state(CFG_B, 2)
    g = s.gifted
    k = 1
    s.positions[g] = s.true_landmarks[k].copy()
    obs = env.observe(s, CFG_B)
    slot = CFG_B.landmark_slot + 2 * k
    assert np.array_equal(obs[g, slot : slot + 2], np.zeros(2))


def test_non_gifted_slots_equal_fake_minus_position():
    s, _ = random_state(CFG_B, 4)
    obs = env.observe(s, CFG_B)
    for i in range(3):
        if i == s.gifted:
            continue
        for j in range(3):
            slot = CFG_B.landmark_slot + 2 * j
            np.testing.assert_array_equal(
                obs[i, slot : slot + 2], s.fake_landmarks[i, j] - s.positions[i]
            )


def test_observation_layout_prefix():
    s, _ = random_state(CFG_B, 6, steps=2)
    obs = env.observe(s, CFG_B)
    for i in range(3):
        np.testing.assert_array_equal(obs[i, 0:2], s.positions[i])
        np.testing.assert_array_equal(obs[i, 2:4], s.velocities[i])
    np.testing.assert_array_equal(obs[0, 4:6], s.positions[1] - s.positions[0])
    np.testing.assert_array_equal(obs[0, 6:8], s.positions[2] - s.positions[0])
    np.testing.assert_array_equal(obs[1, 4:6], s.positions[0] - s.positions[1])


def test_unicast_correct_slots_follow_sigma():
    s, _ = random_state(CFG_U, 9)
    obs = env.observe(s, CFG_U)
    for j in range(3):
        a = int(s.sigma[j])
        slot = CFG_U.landmark_slot + 2 * j
        np.testing.assert_array_equal(
            obs[a, slot : slot + 2], s.true_landmarks[j] - s.positions[a]
        )
        for i in range(3):
            if i != a:
                np.testing.assert_array_equal(
                    obs[i, slot : slot + 2], s.fake_landmarks[i, j] - s.positions[i]
                )


def test_alternating_flags():
    cfg = env.scenario_config("alt-broadcast")
    s, _ = random_state(cfg, 10)
    obs = env.observe(s, cfg)
    flags = obs[:, -1]
    assert flags[s.gifted] == 1.0
    assert flags.sum() == 1.0

    cfg_u = env.scenario_config("alt-unicast")
    s2, _ = random_state(cfg_u, 11)
    obs2 = env.observe(s2, cfg_u)
    for i in range(3):
        expect = 1.0 if any(int(s2.sigma[j]) == i and j != i for j in range(3)) else 0.0
        assert obs2[i, -1] == expect


# ---------------------------------------------------------------------------
# step


def test_step_kinematics():
    cfg = env.ScenarioConfig("broadcasting", "fixed", max_speed=1.0)
    s, _ = random_state(cfg, 0)
    s.positions[0] = np.zeros(2)
    actions = np.zeros((3, 4))
    actions[0] = [1.0, 0.0, 0.0, 0.0]
    new, _ = env.step(s, cfg, actions)
    np.testing.assert_array_equal(new.positions[0], [1.0, 0.0])
    assert new.step_index == s.step_index + 1


def test_step_clamps_to_arena():
    s, _ = random_state(CFG_B, 1)
    s.positions[:] = CFG_B.arena_half_width
    actions = np.tile([1.0, 0.0, 1.0, 0.0], (3, 1))
    new, _ = env.step(s, CFG_B, actions)
    assert np.all(new.positions <= CFG_B.arena_half_width)


def test_broadcast_reward_zero_when_all_on_landmarks():
    s, _ = random_state(CFG_B, 3)
    s.true_landmarks = np.array([[0.5, 0.5], [-0.5, 0.5], [0.0, -0.5]])
    # place each agent so that a zero-velocity step leaves it on a landmark
    s.positions = s.true_landmarks.copy()
    _, r = env.step(s, CFG_B, np.full((3, 4), 0.5))
    np.testing.assert_allclose(r, np.zeros(3), atol=1e-12)


def test_unicast_reward_is_own_distance():
    s, _ = random_state(CFG_U, 4)
    s.positions = np.array([[0.9, 0.9], [-0.9, 0.9], [0.9, -0.9]])
    s.true_landmarks = np.array([[0.6, 0.9], [-0.9, 0.9], [0.9, -0.9]])
    _, r = env.step(s, CFG_U, np.full((3, 4), 0.5))
    np.testing.assert_allclose(r, [-0.3, 0.0, 0.0], atol=1e-12)


def test_step_finished_episode_raises():
    s, rng = random_state(CFG_B, 5)
    actions = np.full((3, 4), 0.5)
    for _ in range(CFG_B.episode_length):
        s, _ = env.step(s, CFG_B, actions)
    with pytest.raises(env.EpisodeFinishedError):
        env.step(s, CFG_B, actions)


def test_out_of_range_actions_clamped_not_fatal():
    s, _ = random_state(CFG_B, 6)
    s.positions[0] = np.zeros(2)
    actions = np.full((3, 4), 0.5)
    actions[0] = [2.0, 0.5, 0.5, 0.5]  # clamps to 1.0
    new, _ = env.step(s, CFG_B, actions)
    np.testing.assert_allclose(new.positions[0], [CFG_B.max_speed * 0.5, 0.0], atol=1e-12)


def test_collision_penalty_counted():
    cfg = env.ScenarioConfig("unicasting", "fixed")
    s, _ = random_state(cfg, 8)
    s.positions = np.array([[0.0, 0.0], [0.05, 0.0], [0.9, 0.9]])
    s.true_landmarks = s.positions.copy()
    _, r = env.step(s, cfg, np.full((3, 4), 0.5))
    # agents 0 and 1 collide; each pays one penalty
    assert r[0] == pytest.approx(-1.0)
    assert r[1] == pytest.approx(-1.0)
    assert r[2] == pytest.approx(0.0)


def test_broadcast_rewards_shared():
    rng = np.random.default_rng(12)
    s = env.reset(CFG_B, rng)
    for _ in range(10):
        s, r = env.step(s, CFG_B, rng.uniform(0, 1, (3, 4)))
        assert np.all(r == r[0])


def test_reward_invariant_under_gift_relabeling():
    s, _ = random_state(CFG_B, 13, steps=3)
    r0 = env.extrinsic_rewards(s, CFG_B)
    s2 = s.copy()
    s2.gifted = (s.gifted + 1) % 3
    np.testing.assert_array_equal(env.extrinsic_rewards(s2, CFG_B), r0)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_kinematic_bound(seed):
    rng = np.random.default_rng(seed)
    s = env.reset(CFG_B, rng)
    before = s.positions.copy()
    s2, _ = env.step(s, CFG_B, rng.uniform(0, 1, (3, 4)))
    move = np.linalg.norm(s2.positions - before, axis=1)
    assert np.all(move <= np.sqrt(2) * CFG_B.max_speed + 1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=10, deadline=None)
def test_episode_determinism(seed):
    actions = np.random.default_rng(seed).uniform(0, 1, size=(5, 3, 4))
    traces = []
    for _ in range(2):
        rng = np.random.default_rng(seed)
        s = env.reset(CFG_U, rng)
        rows = []
        for a in actions:
            s, r = env.step(s, CFG_U, a)
            rows.append((s.positions.copy(), r.copy()))
        traces.append(rows)
    for (p1, r1), (p2, r2) in zip(*traces):
        assert np.array_equal(p1, p2)
        assert np.array_equal(r1, r2)


def test_dynamic_assignment_recomputed_after_step():
    cfg = env.scenario_config("dyn-broadcast")
    s, _ = random_state(cfg, 20)
    s.positions = np.array([[0.9, 0.9], [0.02, 0.0], [-0.8, 0.8]])
    actions = np.full((3, 4), 0.5)
    actions[2] = [0.5, 0.5, 0.5, 0.5]
    new, _ = env.step(s, cfg, actions)
    assert new.gifted == int(np.argmin(np.linalg.norm(new.positions, axis=1)))


# ---------------------------------------------------------------------------
# intrinsic rewards


def brute_force_intrinsic(state, cfg, med):
    """Independent recomputation from raw world coordinates."""
    n = cfg.n_agents
    dist = lambda a, b: float(np.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2))
    pair_count = 0
    per_agent = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dist(state.positions[i], state.positions[j]) < 2 * cfg.agent_radius:
                pair_count += 1
                per_agent[i] += 1
                per_agent[j] += 1
    out = []
    for i in range(n):
        lms = med.decoded_landmarks[i]
        if cfg.group == "broadcasting":
            total = 0.0
            for j in range(n):
                total += min(dist(state.positions[a], lms[j]) for a in range(n))
            out.append(-total - cfg.collision_penalty * pair_count)
        else:
            out.append(
                -dist(state.positions[i], lms[i]) - cfg.collision_penalty * per_agent[i]
            )
    return np.array(out)


@pytest.mark.parametrize("name", sorted(env.SCENARIO_PRESETS))
def test_intrinsic_equals_extrinsic_under_oracle_medium(name):
    cfg = env.scenario_config(name)
    rng = np.random.default_rng(42)
    for _ in range(20):
        s = env.reset(cfg, rng)
        s, r = env.step(s, cfg, rng.uniform(0, 1, (3, 4)))
        med = medium.oracle_medium(s, cfg, env.observe(s, cfg))
        q = env.intrinsic_rewards(s, cfg, med)
        np.testing.assert_allclose(q, r, rtol=0, atol=1e-12)


@pytest.mark.parametrize("name", ["fixed-broadcast", "fixed-unicast"])
def test_intrinsic_matches_brute_force(name):
    cfg = env.scenario_config(name)
    rng = np.random.default_rng(77)
    for _ in range(25):
        s = env.reset(cfg, rng)
        s, _ = env.step(s, cfg, rng.uniform(0, 1, (3, 4)))
        c = (
            rng.uniform(0, 1, 3)
            if cfg.group == "broadcasting"
            else rng.uniform(0, 1, (3, 3))
        )
        med = medium.assemble(cfg.group, env.observe(s, cfg), c)
        np.testing.assert_allclose(
            env.intrinsic_rewards(s, cfg, med),
            brute_force_intrinsic(s, cfg, med),
            rtol=1e-12,
            atol=1e-12,
        )


def test_unicast_agent_on_medium_landmark_gets_zero():
    s, _ = random_state(CFG_U, 30)
    s.positions = np.array([[0.4, 0.4], [-0.4, 0.4], [0.4, -0.4]])
    obs = env.observe(s, CFG_U)
    med = medium.assemble_unicast(obs, np.eye(3))
    s.positions[0] = med.decoded_landmarks[0, 0].copy()
    med2 = medium.Medium(med.sender_index, med.snapshots, med.decoded_landmarks)
    q = env.intrinsic_rewards(s, CFG_U, med2)
    if _no_collisions(s, CFG_U):
        assert q[0] == pytest.approx(0.0, abs=1e-12)


def _no_collisions(state, cfg):
    d = np.linalg.norm(state.positions[:, None] - state.positions[None, :], axis=-1)
    np.fill_diagonal(d, np.inf)
    return d.min() >= 2 * cfg.agent_radius


# ---------------------------------------------------------------------------
# trajectory rows


def test_trajectory_row_shapes():
    s, _ = random_state(CFG_U, 31)
    header = env.trajectory_header(CFG_U)
    row = env.trajectory_row(3, 7, s, CFG_U, np.full((3, 4), 0.5), np.zeros(3))
    assert len(header) == len(row)
    assert row[0] == "3" and row[1] == "7"
    assert row[-1].count("|") == 2
