"""Motion-predictor tests: tokenization, causality, training, closed loop."""

import logging

import numpy as np
import pytest

from ktrl.humandata.dataset import TrajectoryRecord
from ktrl.humandata.generator import generate_dataset
from ktrl.nn import Tensor, load_checkpoint, save_checkpoint
from ktrl.predictor import (
    BatchedClosedLoopPredictor,
    ClosedLoopPredictor,
    MotionPredictor,
    PredictorConfig,
    PredictorTrainingError,
    assemble_batch,
    closed_loop_drift,
    desk_config,
    eval_teacher_forced_mse,
    mean_drift,
    one_hot,
    paper_config,
    sample_window_batch,
    partition_by_cloud_size,
    train_predictor,
)
from ktrl.seeding import make_rng

SMALL = PredictorConfig(layers=2, heads=4, width=32, context=8,
                        pointnet_hidden=(16, 16), steps=25)


@pytest.fixture(scope="module")
def records3():
    """Two single-object records plus one two-object record (mixed P)."""
    recs = generate_dataset(2, make_rng(11, 0))
    recs += generate_dataset(1, make_rng(11, 1), n_objects_choices=(2,))
    return recs


@pytest.fixture(scope="module")
def small_model():
    return MotionPredictor(SMALL, make_rng(0, 0))


@pytest.fixture(scope="module")
def overfit():
    """Single-record memorization run used by the accuracy tests."""
    recs = generate_dataset(1, make_rng(7, 99))
    cfg = desk_config(steps=2500, sigma=0.0)
    model, info = train_predictor(recs, cfg, seed=3)
    return model, recs[0], cfg, info


def random_window(rng, t, width_d=18, points=100):
    kps = rng.normal(0.2, 0.1, size=(t, width_d))
    clouds = rng.normal(0.2, 0.1, size=(t, points, 3))
    return kps, clouds


# ---------------------------------------------------------------- config


def test_config_rejects_invalid():
    with pytest.raises(ValueError, match="divisible"):
        PredictorConfig(width=100, heads=8)
    with pytest.raises(ValueError, match="context"):
        PredictorConfig(context=1)
    with pytest.raises(ValueError, match="sigma"):
        PredictorConfig(sigma=-0.1)
    with pytest.raises(ValueError, match="lr_schedule"):
        PredictorConfig(lr_schedule="warp")
    with pytest.raises(ValueError, match="d_keypoints"):
        PredictorConfig(d_keypoints=0)


def test_presets():
    p = paper_config()
    assert (p.layers, p.heads, p.width, p.context) == (6, 8, 512, 16)
    d = desk_config()
    assert (d.layers, d.width) == (4, 128)
    assert paper_config(context=8).context == 8


def test_one_hot_scalar_and_batch():
    v = one_hot(3, 5)
    assert v.shape == (5,) and v[3] == 1.0 and v.sum() == 1.0
    m = one_hot(np.array([0, 4]), 5)
    assert m.shape == (2, 5)
    assert np.array_equal(m, np.array([[1, 0, 0, 0, 0], [0, 0, 0, 0, 1.0]]))


# ------------------------------------------------------- cloud encoding


def test_cloud_embedding_permutation_invariant_bitwise(small_model):
    rng = np.random.default_rng(5)
    cloud = rng.normal(0.2, 0.1, size=(100, 3))
    base = small_model.encode_cloud(Tensor(cloud)).data
    for seed in range(5):
        perm = np.random.default_rng(seed).permutation(100)
        out = small_model.encode_cloud(Tensor(cloud[perm])).data
        assert np.array_equal(base, out)


def test_cloud_embedding_duplication_invariant(small_model):
    rng = np.random.default_rng(6)
    cloud = rng.normal(0.2, 0.1, size=(100, 3))
    base = small_model.encode_cloud(Tensor(cloud)).data
    doubled = small_model.encode_cloud(Tensor(np.vstack([cloud, cloud]))).data
    assert np.array_equal(base, doubled)


def test_cloud_embedding_dominant_point():
    """With per-point features monotone in x, the max-x point owns the pool."""
    model = MotionPredictor(SMALL, make_rng(1, 0))
    enc = model.cloud_encoder
    h0, h1 = SMALL.pointnet_hidden
    enc.fc1.w.data = np.zeros((3, h0))
    enc.fc1.w.data[0, :] = 1.0          # hidden = relu(x) in every channel
    enc.fc1.b.data = np.zeros(h0)
    enc.fc2.w.data = np.eye(h0, h1)
    enc.fc2.b.data = np.zeros(h1)
    rng = np.random.default_rng(2)
    cloud = rng.uniform(-1.0, 1.0, size=(100, 3))
    cloud[17, 0] = 2.0                  # unique x maximum
    feats = enc.point_features(Tensor(cloud)).data
    assert np.array_equal(feats.max(axis=0), feats[17])
    full = model.encode_cloud(Tensor(cloud)).data
    alone = model.encode_cloud(Tensor(np.tile(cloud[17], (100, 1)))).data
    assert np.array_equal(full, alone)


def test_encode_cloud_rejects_empty_and_partial_groups(small_model):
    with pytest.raises(ValueError):
        small_model.encode_cloud(Tensor(np.zeros((0, 3))))
    with pytest.raises(ValueError, match="multiple"):
        small_model.encode_cloud(Tensor(np.zeros((150, 3))))


# ------------------------------------------------------------- forward


def test_output_causality_bitwise(small_model):
    rng = np.random.default_rng(7)
    kps, clouds = random_window(rng, 6)
    goal = Tensor(one_hot(4, SMALL.goal_vocab))
    base = small_model.forward_all(Tensor(kps), Tensor(clouds), goal).data
    for j in range(6):
        bumped = kps.copy()
        bumped[j] += 0.25
        out = small_model.forward_all(Tensor(bumped), Tensor(clouds), goal).data
        assert np.array_equal(base[:j], out[:j])
        assert not np.array_equal(base[j], out[j])


def test_cloud_perturbation_is_also_causal(small_model):
    rng = np.random.default_rng(8)
    kps, clouds = random_window(rng, 5)
    goal = Tensor(one_hot(0, SMALL.goal_vocab))
    base = small_model.forward_all(Tensor(kps), Tensor(clouds), goal).data
    bumped = clouds.copy()
    bumped[3] += 0.3
    out = small_model.forward_all(Tensor(kps), Tensor(bumped), goal).data
    assert np.array_equal(base[:3], out[:3])
    assert not np.array_equal(base[3], out[3])


def test_appended_future_frame_cannot_change_past(small_model):
    """Only the appended frame's own output reacts to its contents."""
    rng = np.random.default_rng(9)
    kps, clouds = random_window(rng, 7)
    goal = Tensor(one_hot(2, SMALL.goal_vocab))
    a = small_model.forward_all(Tensor(kps), Tensor(clouds), goal).data
    kps2, clouds2 = kps.copy(), clouds.copy()
    kps2[-1] += 1.0
    clouds2[-1] -= 1.0
    b = small_model.forward_all(Tensor(kps2), Tensor(clouds2), goal).data
    assert np.array_equal(a[:-1], b[:-1])


def test_forward_rejects_empty_and_overlong_windows(small_model):
    goal = Tensor(one_hot(0, SMALL.goal_vocab))
    with pytest.raises(ValueError, match="empty"):
        small_model.forward_all(Tensor(np.zeros((0, 18))),
                                Tensor(np.zeros((0, 100, 3))), goal)
    rng = np.random.default_rng(10)
    kps, clouds = random_window(rng, SMALL.context + 1)
    with pytest.raises(ValueError, match="exceeds context"):
        small_model.forward_all(Tensor(kps), Tensor(clouds), goal)


def test_zero_output_head_returns_bias():
    model = MotionPredictor(SMALL, make_rng(2, 0))
    rng = np.random.default_rng(11)
    bias = rng.normal(size=18)
    model.head.w.data = np.zeros_like(model.head.w.data)
    model.head.b.data = bias.copy()
    kps, clouds = random_window(rng, 4)
    goal = Tensor(one_hot(7, SMALL.goal_vocab))
    out = model.forward_all(Tensor(kps), Tensor(clouds), goal).data
    assert np.array_equal(out, np.broadcast_to(bias, out.shape))
    pred = model.predict_next(kps, clouds, 7)
    assert np.array_equal(pred, bias.reshape(6, 3))


def test_partial_windows_give_finite_output(small_model):
    rng = np.random.default_rng(12)
    for t in range(1, SMALL.context + 1):
        kps, clouds = random_window(rng, t)
        pred = small_model.predict_next(kps, clouds, 3)
        assert pred.shape == (6, 3)
        assert np.all(np.isfinite(pred))


# ------------------------------------------------------------- training


def test_assemble_batch_noise_touches_inputs_never_targets(records3):
    pairs = [(0, 0), (1, 5), (0, 11)]      # one cloud-size group per batch
    clean_in, clean_t, clouds, goals = assemble_batch(
        records3, pairs, 16, 0.0, np.random.default_rng(0))
    noisy_in, noisy_t, _, _ = assemble_batch(
        records3, pairs, 16, 0.005, np.random.default_rng(0))
    assert np.array_equal(clean_t, noisy_t)
    assert not np.array_equal(clean_in, noisy_in)
    for row, (ri, s) in enumerate(pairs):
        rec = records3[ri]
        want = rec.keypoints[s:s + 16].astype(float).reshape(16, -1)
        assert np.array_equal(clean_in[row], want)
        want_t = rec.keypoints[s + 1:s + 17].astype(float).reshape(16, -1)
        assert np.array_equal(clean_t[row], want_t)
        assert np.array_equal(clouds[row], rec.clouds[s:s + 16].astype(float))
    assert list(goals) == [records3[ri].goal for ri, _ in pairs]


def test_batches_never_mix_cloud_sizes(records3):
    parts = partition_by_cloud_size(records3)
    assert sorted(parts) == [100, 200]
    rng = np.random.default_rng(3)
    for _ in range(50):
        pairs = sample_window_batch(records3, parts, 8, 16, rng)
        sizes = {records3[ri].clouds.shape[1] for ri, _ in pairs}
        assert len(sizes) == 1
        for ri, s in pairs:
            assert 0 <= s <= records3[ri].n_frames - 17


def test_training_rejects_empty_and_short_datasets():
    with pytest.raises(PredictorTrainingError, match="empty"):
        train_predictor([], SMALL, seed=0)
    short = TrajectoryRecord(
        goal=0, keypoints=np.zeros((SMALL.context, 6, 3), np.float32),
        clouds=np.zeros((SMALL.context, 100, 3), np.float32),
        frame_rate=30.0)
    with pytest.raises(PredictorTrainingError, match="frames"):
        train_predictor([short], SMALL, seed=0)


def test_training_aborts_with_step_diagnostic_on_nonfinite_loss():
    bad = TrajectoryRecord(
        goal=0, keypoints=np.zeros((20, 6, 3), np.float32),
        clouds=np.full((20, 100, 3), np.nan, np.float32), frame_rate=30.0)
    with pytest.raises(PredictorTrainingError, match="at step 0"):
        train_predictor([bad], SMALL, seed=0)


def test_training_is_deterministic_under_fixed_seed(records3):
    m1, i1 = train_predictor(records3[:1], SMALL, seed=42)
    m2, i2 = train_predictor(records3[:1], SMALL, seed=42)
    assert np.array_equal(i1["loss_curve"], i2["loss_curve"])
    p1, p2 = m1.parameters(), m2.parameters()
    assert p1.keys() == p2.keys()
    for k in p1:
        assert np.array_equal(p1[k].data, p2[k].data)


# ---------------------------------------------------------- closed loop


def test_closed_loop_matches_teacher_forced_stream(small_model, records3):
    rec = records3[0]
    kps = rec.keypoints.astype(float)
    clouds = rec.clouds.astype(float)
    loop = ClosedLoopPredictor(small_model, rec.goal)
    L = SMALL.context
    for t in range(30):
        got = loop.step(kps[t], clouds[t])
        lo = max(0, t - L + 1)
        want = small_model.predict_next(kps[lo:t + 1], clouds[lo:t + 1],
                                        rec.goal)
        assert np.array_equal(got, want)
    assert loop.window_length == L


def test_missing_frame_replays_previous_prediction(small_model, records3,
                                                   caplog):
    rec = records3[0]
    kps = rec.keypoints.astype(float)
    clouds = rec.clouds.astype(float)
    loop = ClosedLoopPredictor(small_model, rec.goal)
    for t in range(3):
        last = loop.step(kps[t], clouds[t])
    with caplog.at_level(logging.WARNING, logger="ktrl.predictor.closed_loop"):
        repl = loop.step(None, None)
    assert np.array_equal(repl, last)
    assert loop.window_length == 3
    assert "missing observation" in caplog.text
    loop.step(kps[3], clouds[3])
    assert loop.window_length == 4

    fresh = ClosedLoopPredictor(small_model, rec.goal)
    with pytest.raises(ValueError, match="missing observation"):
        fresh.step(None, None)


def test_batched_loop_equals_stepping_each_env_alone(small_model, records3):
    goals = [records3[i].goal for i in range(2)] + [7]
    batched = BatchedClosedLoopPredictor(small_model, goals)
    singles = [ClosedLoopPredictor(small_model, g) for g in goals]
    assert len(batched) == 3
    rng = np.random.default_rng(13)
    streams = [random_window(rng, 12) for _ in range(3)]
    for t in range(12):
        ks = [s[0][t] for s in streams]
        cs = [s[1][t] for s in streams]
        got = batched.step(ks, cs)
        want = np.stack([p.step(k, c)
                         for p, k, c in zip(singles, ks, cs)])
        assert np.array_equal(got, want)
    batched.reset(1, goal=3)
    assert batched.predictors[1].goal == 3
    assert batched.predictors[1].window_length == 0


def test_drift_metric_replicates_manual_rollout(small_model, records3):
    rec = records3[1]
    L = SMALL.context
    kps = rec.keypoints.astype(float)
    clouds = rec.clouds.astype(float)
    start, horizon = 2, 4
    loop = ClosedLoopPredictor(small_model, rec.goal)
    pred = None
    for t in range(start, start + L):
        pred = loop.step(kps[t], clouds[t])
    vals = []
    for i in range(horizon):
        t = start + L + i
        vals.append(np.linalg.norm(pred - kps[t], axis=-1).mean())
        pred = loop.step(pred, clouds[t])
    want = float(np.mean(vals))
    got = closed_loop_drift(small_model, rec, start, horizon)
    assert got == want

    with pytest.raises(ValueError, match="exceeds record length"):
        closed_loop_drift(small_model, rec, rec.n_frames - L, 1)


def test_mean_drift_averages_over_records(small_model, records3):
    value = mean_drift(small_model, records3, horizon=5,
                       rollouts_per_record=2, rng=np.random.default_rng(0))
    assert np.isfinite(value) and value >= 0
    with pytest.raises(ValueError, match="long enough"):
        mean_drift(small_model, records3, horizon=10_000)


def test_checkpoint_roundtrip_preserves_predictions(small_model, tmp_path):
    path = tmp_path / "weights.ktrlckpt"
    save_checkpoint(path, small_model.state())
    other = MotionPredictor(SMALL, make_rng(99, 0))
    other.load_state(load_checkpoint(path))
    rng = np.random.default_rng(14)
    kps, clouds = random_window(rng, SMALL.context)
    assert np.array_equal(small_model.predict_next(kps, clouds, 5),
                          other.predict_next(kps, clouds, 5))


# -------------------------------------------------- trained-model checks


def test_single_record_overfit_reaches_mse_bound(overfit):
    model, rec, cfg, info = overfit
    assert info["final_loss"] < 1e-4
    assert eval_teacher_forced_mse(model, [rec], seed=0) < 1e-4
    curve = info["loss_curve"]
    assert curve[-1] < curve[0]


def test_overfit_replays_trajectory_within_millimeter(overfit):
    model, rec, cfg, _ = overfit
    kps = rec.keypoints.astype(float)
    clouds = rec.clouds.astype(float)
    L = cfg.context
    worst = 0.0
    for t in range(rec.n_frames - 1):
        lo = max(0, t - L + 1)
        pred = model.predict_next(kps[lo:t + 1], clouds[lo:t + 1], rec.goal)
        worst = max(worst, float(
            np.linalg.norm(pred - kps[t + 1], axis=-1).max()))
    assert worst <= 1e-3, f"worst per-keypoint error {worst:.2e}"


def test_still_stream_displacement_bounded_by_training_data(overfit):
    model, rec, cfg, _ = overfit
    kps = rec.keypoints.astype(float)
    clouds = rec.clouds.astype(float)
    bound = float(np.linalg.norm(np.diff(kps, axis=0), axis=-1).max())
    loop = ClosedLoopPredictor(model, rec.goal)
    for _ in range(40):
        pred = loop.step(kps[0], clouds[0])
        disp = float(np.linalg.norm(pred - kps[0], axis=-1).max())
        assert disp <= bound
