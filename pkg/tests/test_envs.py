"""Environment tests: placement, grasp rule, physics, rewards, termination."""

import math
from dataclasses import replace

import numpy as np
import pytest

from ktrl.envs import (
    EnvConfig,
    ManipulationEnv,
    VectorEnv,
    dense_reward,
    oracle_success_rate,
    privileged_obs,
    read_trajectory,
    run_oracle_episode,
    step_record,
    success_check,
    support_height,
    task_reward,
    write_trajectory,
)
from ktrl.envs.core import DRAWER_AXIS, HANDLE_HOME
from ktrl.envs.oracle import ScriptedOracle
from ktrl.humandata.objects import PlacementError
from ktrl.kinematics import JointConfig


def rng(seed):
    return np.random.default_rng(seed)


def fresh(task="grasp_lift", seed=0, **kw):
    env = ManipulationEnv(EnvConfig(task=task, **kw))
    env.reset(rng(seed))
    return env


def states_equal(a, b) -> bool:
    return (np.array_equal(a.joints.as_vector(), b.joints.as_vector())
            and np.array_equal(a.keypoints, b.keypoints)
            and np.array_equal(a.object_positions, b.object_positions)
            and np.array_equal(a.object_quats, b.object_quats)
            and np.array_equal(a.object_vz, b.object_vz)
            and a.attached == b.attached
            and a.drawer_x == b.drawer_x
            and a.hold_steps == b.hold_steps
            and a.success == b.success and a.failure == b.failure
            and a.timeout == b.timeout and a.faulted == b.faulted)


# ---------------------------------------------------------------- config


def test_config_rejects_invalid():
    with pytest.raises(ValueError, match="unknown task"):
        EnvConfig(task="juggle")
    with pytest.raises(ValueError, match="gamma"):
        EnvConfig(gamma=0.0)
    with pytest.raises(ValueError, match="positive"):
        EnvConfig(control_rate=-30.0)
    with pytest.raises(ValueError, match="drawer_limit"):
        EnvConfig(drawer_limit=0.3, drawer_travel=0.2)
    with pytest.raises(ValueError, match="valid fields"):
        EnvConfig.from_dict({"task": "grasp_lift", "tabel_extent": 1.0})


def test_config_task_defaults():
    cfg = EnvConfig()
    assert cfg.max_steps == 900
    assert cfg.n_objects == 1
    assert cfg.hold_steps_required == 150
    clutter = EnvConfig(task="grasp_lift_clutter")
    assert clutter.n_objects == 3
    assert clutter.hold_steps_required == 75
    loaded = EnvConfig.from_dict(
        {"task": "lift_throw", "receptacle_center": [0.55, 0.1]})
    assert loaded.receptacle_center == (0.55, 0.1)


# ----------------------------------------------------------------- reset


def test_reset_same_seed_is_identical():
    env = ManipulationEnv(EnvConfig())
    s1, o1 = env.reset(rng(123))
    c1 = o1.cloud.copy()
    s2, o2 = env.reset(rng(123))
    assert states_equal(s1, s2)
    assert np.array_equal(c1, o2.cloud)
    assert o1.goal == o2.goal


def test_clutter_places_three_separated_objects():
    env = ManipulationEnv(EnvConfig(task="grasp_lift_clutter"))
    for seed in range(10):
        state, obs = env.reset(rng(seed))
        assert len(state.specs) == 3
        assert obs.cloud.shape == (300, 3)
        for i in range(3):
            for j in range(i + 1, 3):
                gap = np.linalg.norm(state.object_positions[i, :2]
                                     - state.object_positions[j, :2])
                assert gap > (state.specs[i].bounding_radius
                              + state.specs[j].bounding_radius)


def test_single_object_observation_shapes():
    env = ManipulationEnv(EnvConfig())
    state, obs = env.reset(rng(4))
    assert obs.cloud.shape == (100, 3)
    assert obs.proprio.shape == (7 + env.hand.n_finger_dof,)
    assert obs.keypoints.shape == (env.hand.n_keypoints, 3)
    assert obs.goal == state.specs[state.target_index].category


def test_reset_reports_placement_failure():
    env = ManipulationEnv(EnvConfig(task="grasp_lift_clutter",
                                    table_extent=0.4))
    with pytest.raises(PlacementError, match="100 attempts"):
        env.reset(rng(0))


# ------------------------------------------------------------------ step


def test_zero_action_only_advances_clock():
    env = fresh(seed=1)
    before = env.state
    after, _, flags = env.step(np.zeros(env.action_size))
    assert after.step_count == before.step_count + 1
    assert np.array_equal(after.joints.as_vector(), before.joints.as_vector())
    assert np.array_equal(after.keypoints, before.keypoints)
    assert np.array_equal(after.object_positions, before.object_positions)
    assert not flags.done


def test_action_clipping_bounds():
    env = fresh(seed=2)
    before = env.state
    big = np.full(env.action_size, 10.0)
    after, _, _ = env.step(big)
    dpos = after.joints.wrist_pos - before.joints.wrist_pos
    assert np.linalg.norm(dpos) <= env.cfg.wrist_step + 1e-12
    dang = after.joints.angles - before.joints.angles
    assert np.all(np.abs(dang) <= env.cfg.finger_step + 1e-12)
    with pytest.raises(ValueError, match="action must have shape"):
        env.step(np.zeros(3))


def test_nonfinite_action_faults_episode():
    env = fresh(seed=3)
    bad = np.zeros(env.action_size)
    bad[0] = np.nan
    state, _, flags = env.step(bad)
    assert flags.faulted and flags.done and not flags.success
    frozen, _, flags2 = env.step(np.zeros(env.action_size))
    assert flags2.faulted
    assert frozen.step_count == state.step_count


def test_released_object_lands_within_ballistic_bound():
    env = fresh(seed=5)
    s = env.state
    spec = s.specs[s.target_index]
    pos = s.object_positions.copy()
    rest = spec.resting_height
    pos[s.target_index, 2] = rest + 0.3
    env._state = replace(s, object_positions=pos)
    bound = math.ceil(math.sqrt(2 * 0.3 / 9.81) * 30)
    zeros = np.zeros(env.action_size)
    for step in range(1, bound + 1):
        state, _, _ = env.step(zeros)
        z = state.object_positions[s.target_index, 2]
        assert z >= support_height(env.cfg, *state.object_positions[
            s.target_index, :2]) - 1e-9
        if z == rest and state.object_vz[s.target_index] == 0.0:
            break
    else:
        pytest.fail(f"object still falling after {bound} steps")


def test_support_height_regions():
    lift = EnvConfig()
    throw = EnvConfig(task="lift_throw")
    assert support_height(lift, 0.0, 0.0) == 0.0
    assert support_height(lift, 0.49, -0.49) == 0.0
    assert support_height(lift, 0.6, 0.0) == lift.ground_z
    assert support_height(throw, 0.6, 0.0) == -throw.receptacle_size
    assert support_height(throw, 0.9, 0.0) == throw.ground_z


# ------------------------------------------------------------ grasp rule


def curled_pose(env, clearance=0.065, angle=1.2):
    """Wrist above the target with fingers curled to a pincer."""
    target = env.state.target_position
    wrist = target + np.array([0.0, 0.0, clearance])
    angles = env.hand.clamp_angles(np.full(env.hand.n_finger_dof, angle))
    return JointConfig(wrist, np.array([1.0, 0.0, 0.0, 0.0]), angles)


def test_opposing_fingertips_attach():
    env = fresh(seed=6)
    env._state = replace(env.state, joints=curled_pose(env))
    state, _, _ = env.step(np.zeros(env.action_size))
    assert state.attached == state.target_index


def test_same_side_fingertips_do_not_attach():
    env = fresh(seed=7)
    s = env.state
    # all non-thumb tips near the center but on one side of it
    wrist = s.target_position - np.array([0.105, 0.0, 0.0])
    env._state = replace(s, joints=JointConfig(
        wrist, np.array([1.0, 0.0, 0.0, 0.0]),
        np.zeros(env.hand.n_finger_dof)))
    state, _, _ = env.step(np.zeros(env.action_size))
    tips = state.keypoints[1:]
    dists = np.linalg.norm(tips - state.target_position, axis=1)
    contact = state.specs[state.target_index].bounding_radius \
        + env.cfg.contact_margin
    assert (dists <= contact).sum() >= 2
    assert state.attached == -1


def attach_with_oracle(env, max_steps=200):
    oracle = ScriptedOracle(env)
    state = env.state
    for _ in range(max_steps):
        if state.attached == state.target_index:
            return state
        state, _, _ = env.step(oracle.act(state))
    pytest.fail("oracle never attached the target")


def test_attached_object_is_rigid_in_the_wrist_frame():
    env = fresh(seed=8)
    state = attach_with_oracle(env)
    from ktrl.kinematics import quat_to_mat

    def rel(s):
        r = quat_to_mat(s.joints.wrist_quat)
        return r.T @ (s.target_position - s.joints.wrist_pos)

    rel0 = rel(state)
    rng_a = np.random.default_rng(9)
    for _ in range(20):
        a = np.zeros(env.action_size)
        a[:6] = rng_a.uniform(-0.05, 0.05, 6)
        state, _, _ = env.step(a)
        if state.attached != state.target_index:
            pytest.fail("grasp unexpectedly released")
        assert np.linalg.norm(rel(state) - rel0) < 1e-12


def test_raising_wrist_raises_attached_object():
    env = fresh(seed=10)
    state = attach_with_oracle(env)
    z0 = state.target_position[2]
    a = np.zeros(env.action_size)
    a[2] = env.cfg.wrist_step
    for _ in range(10):
        state, _, _ = env.step(a)
    assert state.target_position[2] - z0 == pytest.approx(0.2, abs=1e-12)


def test_opened_fingers_release_and_object_falls():
    env = fresh(seed=11)
    state = attach_with_oracle(env)
    lift = np.zeros(env.action_size)
    lift[2] = env.cfg.wrist_step
    for _ in range(8):
        state, _, _ = env.step(lift)
    opened = np.zeros(env.action_size)
    opened[6:] = -0.08
    for _ in range(40):
        state, _, _ = env.step(opened)
        if state.attached == -1:
            break
    else:
        pytest.fail("grasp never released")
    rest = state.specs[state.target_index].resting_height
    zeros = np.zeros(env.action_size)
    for _ in range(20):
        state, _, _ = env.step(zeros)
    assert state.target_position[2] == pytest.approx(rest)


# --------------------------------------------------------------- rewards


def test_sparse_reward_gated_until_lifted():
    env = fresh(seed=12)
    s = env.state
    low = s.object_positions.copy()
    low[s.target_index, 2] = 0.05        # closer to goal height, still low
    prev = replace(s, object_positions=s.object_positions.copy())
    cur = replace(s, object_positions=low, step_count=1)
    assert task_reward(env.cfg, prev, cur) == 0.0


def test_sparse_reward_progress_formula():
    cfg = EnvConfig(task="lift_throw", receptacle_center=(0.6, 0.0))
    env = ManipulationEnv(cfg)
    s, _ = env.reset(rng(13))
    goal = np.array([0.6, 0.0, -cfg.receptacle_size / 2])
    far = s.object_positions.copy()
    far[s.target_index] = goal + np.array([0.0, 0.0, 0.40])
    near = s.object_positions.copy()
    near[s.target_index] = goal + np.array([0.0, 0.0, 0.35])
    prev = replace(s, object_positions=far)
    cur = replace(s, object_positions=near, step_count=1)
    assert task_reward(cfg, prev, cur) == pytest.approx(0.05, abs=1e-12)
    assert task_reward(cfg, prev, cur, literal=True) == 0.0
    retreat = replace(s, object_positions=far, step_count=1)
    assert task_reward(cfg, cur, retreat, literal=True) == pytest.approx(
        0.05, abs=1e-12)
    assert task_reward(cfg, cur, retreat) == 0.0


def test_cabinet_reward_formula():
    cfg = EnvConfig(task="open_cabinet", drawer_limit=0.10, cabinet_bonus=10.0)
    env = ManipulationEnv(cfg)
    s, _ = env.reset(rng(14))
    prev = replace(s, drawer_x=0.12)
    cur = replace(s, drawer_x=0.12, step_count=1)
    assert task_reward(cfg, prev, cur) == pytest.approx(1.32, abs=1e-12)
    below = replace(s, drawer_x=0.05, step_count=1)
    assert task_reward(cfg, prev, below) == pytest.approx(0.05, abs=1e-12)
    crossing = replace(s, drawer_x=0.12, step_count=1, success=True)
    assert task_reward(cfg, prev, crossing) == pytest.approx(
        1.32 + cfg.success_bonus, abs=1e-12)


def test_dense_reward_terms():
    env = fresh(seed=15)
    cfg, s = env.cfg, env.state
    assert dense_reward(cfg, s, replace(s, step_count=1)) == 0.0

    target = s.target_position
    near_kp = s.keypoints.copy()
    far_kp = s.keypoints.copy()
    far_kp[1:] = target + np.array([0.10, 0.0, 0.0])
    near_kp[1:] = target + np.array([0.05, 0.0, 0.0])
    prev = replace(s, keypoints=far_kp)
    cur = replace(s, keypoints=near_kp, step_count=1)
    assert dense_reward(cfg, prev, cur) == pytest.approx(
        cfg.w_approach * 0.05, abs=1e-12)

    lifted_pos = s.object_positions.copy()
    lifted_pos[s.target_index, 2] = cfg.goal_height - 0.1
    first_lift = replace(s, object_positions=lifted_pos, lifted_ever=True,
                         step_count=1)
    r = dense_reward(cfg, prev, first_lift)
    d_prev = abs(s.target_position[2] - cfg.goal_height)
    hand_prev = np.linalg.norm(far_kp[1:] - s.target_position, axis=1).mean()
    hand_cur = np.linalg.norm(s.keypoints[1:]
                              - lifted_pos[s.target_index], axis=1).mean()
    expected = (cfg.w_approach * (hand_prev - hand_cur) + cfg.w_lift_bonus
                + cfg.w_goal_progress * (d_prev - 0.1))
    assert r == pytest.approx(expected, abs=1e-12)

    succeeded = replace(s, success=True, step_count=1)
    assert dense_reward(cfg, s, succeeded) == pytest.approx(
        cfg.w_success, abs=1e-12)


def test_privileged_obs_distances():
    env = fresh(task="grasp_lift_clutter", seed=16)
    s = env.state
    kp = s.keypoints.copy()
    kp[1] = s.target_position
    kp[2] = s.target_position + np.array([0.03, 0.04, 0.0])
    state = replace(s, keypoints=kp)
    d = privileged_obs(state)
    assert d.shape == (env.hand.n_keypoints - 1,)
    assert d[0] == 0.0
    assert d[1] == pytest.approx(0.05, abs=1e-15)
    other = (state.target_index + 1) % 3
    assert not np.allclose(d, np.linalg.norm(
        kp[1:] - state.object_positions[other], axis=1))


def test_no_reward_after_done():
    env = fresh(seed=17)
    state = run_oracle_episode(env, rng(17))
    assert state.success
    after, _, flags = env.step(np.zeros(env.action_size))
    assert flags.done
    assert after.step_count == state.step_count
    assert task_reward(env.cfg, state, after) == 0.0
    assert dense_reward(env.cfg, state, after) == 0.0


# ----------------------------------------------------------- termination


def test_hold_timer_resets_when_leaving_band():
    env = fresh(seed=18)
    state = attach_with_oracle(env)
    cfg = env.cfg
    up = np.zeros(env.action_size)
    while abs(state.target_position[2] - cfg.goal_height) > 1e-6:
        up[2] = cfg.goal_height - state.target_position[2]
        state, _, _ = env.step(up)
    hold = np.zeros(env.action_size)
    for _ in range(120 - state.hold_steps):
        state, _, _ = env.step(hold)
    assert state.hold_steps == 120 and not state.success
    down = np.zeros(env.action_size)
    down[2] = -cfg.wrist_step
    for _ in range(4):
        state, _, _ = env.step(down)
    assert state.hold_steps == 0 and not state.done
    up2 = np.zeros(env.action_size)
    while not state.success:
        up2[2] = cfg.goal_height - state.target_position[2]
        state, _, _ = env.step(up2)
        assert state.step_count < cfg.max_steps
    assert state.hold_steps == cfg.hold_steps_required
    assert success_check(cfg, state)


def test_throw_success_object_rests_in_receptacle():
    env = ManipulationEnv(EnvConfig(task="lift_throw"))
    state = run_oracle_episode(env, rng(19))
    assert state.success
    cx, cy = env.cfg.receptacle_center
    t = state.target_position
    assert abs(t[0] - cx) < env.cfg.receptacle_size / 2
    assert abs(t[1] - cy) < env.cfg.receptacle_size / 2
    rest = -env.cfg.receptacle_size \
        + state.specs[state.target_index].resting_height
    assert t[2] == pytest.approx(rest)
    assert success_check(env.cfg, state)


def test_cabinet_success_and_handle_tracking():
    env = ManipulationEnv(EnvConfig(task="open_cabinet"))
    state = run_oracle_episode(env, rng(20))
    assert state.success
    assert state.drawer_x >= env.cfg.drawer_limit
    assert np.allclose(state.object_positions[0],
                       HANDLE_HOME + DRAWER_AXIS * state.drawer_x)


def test_timeout_flag():
    env = ManipulationEnv(EnvConfig(episode_seconds=0.5))
    env.reset(rng(21))
    zeros = np.zeros(env.action_size)
    for _ in range(env.cfg.max_steps):
        state, _, flags = env.step(zeros)
    assert flags.timeout and flags.done
    assert not flags.success and not flags.failure
    assert state.step_count == env.cfg.max_steps


def test_object_dropped_off_table_is_failure():
    env = fresh(seed=22)
    state = attach_with_oracle(env)
    lift = np.zeros(env.action_size)
    lift[2] = env.cfg.wrist_step
    for _ in range(5):
        state, _, _ = env.step(lift)
    sideways = np.zeros(env.action_size)
    while state.joints.wrist_pos[0] < 0.55:
        sideways[0] = 0.55 + 1e-3 - state.joints.wrist_pos[0]
        state, _, _ = env.step(sideways)
    opened = np.zeros(env.action_size)
    opened[6:] = -0.08
    for _ in range(60):
        state, _, flags = env.step(opened)
        if flags.done:
            break
    assert state.failure and not state.success


# ------------------------------------------------- determinism and dumps


def test_trajectories_bitwise_deterministic():
    actions = np.random.default_rng(23).uniform(-0.05, 0.05, (50, 14))
    runs = []
    for _ in range(2):
        env = ManipulationEnv(EnvConfig())
        env.reset(rng(23))
        states = [env.step(a)[0] for a in actions]
        runs.append(states)
    for a, b in zip(*runs):
        assert states_equal(a, b)


def test_vector_env_matches_individual_envs():
    cfg = EnvConfig()
    vec = VectorEnv(cfg, 3)
    vec.reset([rng((24, i)) for i in range(3)])
    singles = [ManipulationEnv(cfg) for _ in range(3)]
    for i, env in enumerate(singles):
        env.reset(rng((24, i)))
    actions = np.random.default_rng(25).uniform(-0.05, 0.05, (20, 3, 14))
    for batch in actions:
        vstates, _, _ = vec.step(batch)
        for env, s, a in zip(singles, vstates, batch):
            alone, _, _ = env.step(a)
            assert states_equal(s, alone)
    with pytest.raises(ValueError, match="need 3"):
        vec.step(actions[0][:2])


def test_oracle_certifies_solvability():
    env = ManipulationEnv(EnvConfig())
    assert oracle_success_rate(env, 20) >= 0.95


def test_trajectory_dump_roundtrip(tmp_path):
    env = fresh(seed=26)
    oracle = ScriptedOracle(env)
    records = []
    state = env.state
    for step in range(10):
        prev = state
        state, _, _ = env.step(oracle.act(state))
        rewards = {"task": task_reward(env.cfg, prev, state),
                   "dense": dense_reward(env.cfg, prev, state)}
        records.append(step_record(step, state, rewards,
                                   prediction=state.keypoints))
    path = tmp_path / "traj.jsonl"
    write_trajectory(path, records)
    loaded = read_trajectory(path)
    assert len(loaded) == 10
    for rec, orig in zip(loaded, records):
        assert rec["step"] == orig["step"]
        assert rec["proprio"] == orig["proprio"]
        assert rec["rewards"] == orig["rewards"]
        assert rec["prediction"] == orig["prediction"]
