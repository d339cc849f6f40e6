"""Pinned behaviour of the network building blocks.

Expected values are either immediate consequences of the definitions or are
recomputed inline with plain numpy, independent of the autodiff code.
"""

import numpy as np
import pytest

from ktrl.nn import (
    Adam,
    Affine,
    CausalSelfAttention,
    LayerNorm,
    NonFiniteGradientError,
    Tensor,
    ops,
)
from ktrl.nn.checkpoint import (
    CheckpointError,
    decode_text,
    encode_text,
    load_checkpoint,
    save_checkpoint,
)


# ---------------------------------------------------------------- affine

def make_affine(w: np.ndarray, b: np.ndarray) -> Affine:
    layer = Affine(w.shape[0], w.shape[1], np.random.default_rng(0))
    layer.w.data = w.astype(float)
    layer.b.data = b.astype(float)
    return layer


def test_affine_identity():
    layer = make_affine(np.eye(3), np.zeros(3))
    x = Tensor(np.array([[1.0, 2.0, 3.0]]))
    np.testing.assert_array_equal(layer(x).data, [[1.0, 2.0, 3.0]])


def test_affine_zero_weights():
    layer = make_affine(np.zeros((3, 1)), np.array([5.0]))
    for x in ([0.0, 0.0, 0.0], [1.0, -2.0, 7.0]):
        np.testing.assert_array_equal(layer(Tensor(np.array([x]))).data, [[5.0]])


def test_affine_ones_input_gives_column_sums():
    rng = np.random.default_rng(3)
    w = rng.standard_normal((3, 2))
    b = rng.standard_normal(2)
    layer = make_affine(w, b)
    out = layer(Tensor(np.ones((1, 3))))
    np.testing.assert_allclose(out.data[0], w.sum(axis=0) + b, rtol=0, atol=1e-15)


def test_affine_shape_mismatch_reports_dimensions():
    layer = make_affine(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(ValueError, match="3"):
        layer(Tensor(np.ones((1, 4))))


# ------------------------------------------------------------- attention

def test_attention_single_token_is_value_then_output_projection():
    rng = np.random.default_rng(11)
    attn = CausalSelfAttention(width=4, heads=2, context=8, rng=rng)
    x = rng.standard_normal((1, 4))
    out = attn(Tensor(x)).data
    v = x @ attn.wv.w.data + attn.wv.b.data
    expected = v @ attn.wo.w.data + attn.wo.b.data
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_attention_causality_bitwise():
    rng = np.random.default_rng(12)
    attn = CausalSelfAttention(width=8, heads=2, context=16, rng=rng)
    x = rng.standard_normal((6, 8))
    base = attn(Tensor(x)).data
    for t in range(5):
        perturbed = x.copy()
        perturbed[t + 1 :] += rng.standard_normal(perturbed[t + 1 :].shape)
        out = attn(Tensor(perturbed)).data
        assert np.array_equal(out[: t + 1], base[: t + 1])


def test_attention_two_token_hand_computed():
    # H=1, width 2, hand-set projections; oracle evaluated with raw numpy
    attn = CausalSelfAttention(width=2, heads=1, context=4, rng=np.random.default_rng(0))
    wq = np.array([[1.0, 0.0], [0.0, 1.0]])
    wk = np.array([[0.5, -0.25], [0.75, 1.0]])
    wv = np.array([[2.0, 0.0], [1.0, -1.0]])
    wo = np.array([[1.0, 0.5], [0.0, 1.0]])
    for layer, w in ((attn.wq, wq), (attn.wk, wk), (attn.wv, wv), (attn.wo, wo)):
        layer.w.data = w
        layer.b.data = np.zeros(2)
    x = np.array([[0.3, -0.7], [1.1, 0.4]])

    q, k, v = x @ wq, x @ wk, x @ wv
    scores = q @ k.T / np.sqrt(2.0)
    row0 = v[0]
    e = np.exp(scores[1] - scores[1].max())
    w1 = e / e.sum()
    row1 = w1[0] * v[0] + w1[1] * v[1]
    expected = np.stack([row0, row1]) @ wo

    np.testing.assert_allclose(attn(Tensor(x)).data, expected, atol=1e-12)


def test_attention_rejects_sequences_longer_than_context():
    attn = CausalSelfAttention(width=2, heads=1, context=3, rng=np.random.default_rng(0))
    with pytest.raises(ValueError, match="context"):
        attn(Tensor(np.zeros((4, 2))))


# ------------------------------------------------------------ layer norm

def test_layer_norm_constant_row_collapses_to_bias():
    ln = LayerNorm(4)
    out = ln(Tensor(np.full((2, 4), 3.7)))
    np.testing.assert_allclose(out.data, 0.0, atol=1e-4)


def test_layer_norm_pm_one_row_fixed_point():
    ln = LayerNorm(2, eps=1e-12)
    out = ln(Tensor(np.array([[-1.0, 1.0]])))
    np.testing.assert_allclose(out.data, [[-1.0, 1.0]], atol=1e-6)


def test_layer_norm_zero_gain_gives_bias():
    ln = LayerNorm(3)
    ln.gain.data = np.zeros(3)
    ln.bias.data = np.array([1.0, -2.0, 0.5])
    out = ln(Tensor(np.random.default_rng(5).standard_normal((4, 3))))
    np.testing.assert_array_equal(out.data, np.broadcast_to(ln.bias.data, (4, 3)))


def test_layer_norm_row_statistics():
    rng = np.random.default_rng(6)
    ln = LayerNorm(16, eps=1e-12)
    out = ln(Tensor(rng.standard_normal((8, 16)))).data
    np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.std(axis=-1), 1.0, atol=1e-6)


def test_layer_norm_rejects_singleton_axis():
    with pytest.raises(ValueError):
        LayerNorm(4)(Tensor(np.zeros((3, 1))))


# ------------------------------------------------------------------ mse

def test_mse_equal_inputs_is_zero():
    x = np.random.default_rng(7).standard_normal((3, 4))
    assert ops.mse_loss(Tensor(x), x).item() == 0.0


def test_mse_unit_difference_is_one():
    t = np.zeros((2, 5))
    assert ops.mse_loss(Tensor(t + 1.0), t).item() == 1.0


def test_mse_pinned_value():
    loss = ops.mse_loss(Tensor(np.array([1.0, 2.0])), np.array([0.0, 0.0]))
    assert loss.item() == 2.5


def test_mse_gradient_formula():
    rng = np.random.default_rng(8)
    pred = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
    target = rng.standard_normal((3, 2))
    ops.mse_loss(pred, target).backward()
    np.testing.assert_allclose(pred.grad, 2 * (pred.data - target) / 6, atol=1e-15)


def test_mse_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        ops.mse_loss(Tensor(np.zeros((2, 3))), np.zeros((3, 2)))


# ----------------------------------------------------------------- adam

def test_adam_zero_gradient_is_fixed_point():
    p = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    opt = Adam({"p": p}, lr=0.1)
    before = p.data.copy()
    for _ in range(5):
        p.grad = np.zeros(3)
        opt.step()
    np.testing.assert_array_equal(p.data, before)


def test_adam_moments_decay_under_zero_gradients():
    p = Tensor(np.zeros(2), requires_grad=True)
    opt = Adam({"p": p}, lr=0.1)
    p.grad = np.array([1.0, -2.0])
    opt.step()
    m0, v0 = np.abs(opt.m["p"]).copy(), opt.v["p"].copy()
    for i in range(1, 6):
        p.grad = np.zeros(2)
        opt.step()
        np.testing.assert_allclose(np.abs(opt.m["p"]), m0 * 0.9**i, rtol=1e-12)
        np.testing.assert_allclose(opt.v["p"], v0 * 0.999**i, rtol=1e-12)


def test_adam_first_step_approximates_signed_lr():
    p = Tensor(np.array([0.0, 0.0]), requires_grad=True)
    opt = Adam({"p": p}, lr=0.01)
    p.grad = np.array([0.3, -4.0])
    opt.step()
    np.testing.assert_allclose(p.data, [-0.01, 0.01], rtol=1e-6)


def test_adam_two_identical_steps_match_hand_unrolled_recursion():
    g = np.array([0.7, -1.3])
    p = Tensor(np.zeros(2), requires_grad=True)
    lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
    opt = Adam({"p": p}, lr=lr, beta1=b1, beta2=b2, eps=eps)
    for _ in range(2):
        p.grad = g.copy()
        opt.step()

    ref = np.zeros(2)
    m = np.zeros(2)
    v = np.zeros(2)
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        ref = ref - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    np.testing.assert_array_equal(p.data, ref)


def test_adam_rejects_non_finite_gradient_without_mutating():
    p = Tensor(np.array([1.0]), requires_grad=True)
    q = Tensor(np.array([2.0]), requires_grad=True)
    opt = Adam({"p": p, "q": q}, lr=0.1)
    p.grad = np.array([0.5])
    q.grad = np.array([np.nan])
    with pytest.raises(NonFiniteGradientError):
        opt.step()
    assert p.data[0] == 1.0 and q.data[0] == 2.0 and opt.t == 0


# --------------------------------------------------------- determinism

def build_and_run(seed: int):
    rng = np.random.default_rng(seed)
    layer = Affine(4, 3, rng)
    x = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
    loss = ops.mse_loss(ops.tanh(layer(x)), rng.standard_normal((5, 3)))
    loss.backward()
    return loss.data.copy(), x.grad.copy(), layer.w.grad.copy()


def test_identical_seeds_bit_identical_forward_backward():
    a = build_and_run(123)
    b = build_and_run(123)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


# --------------------------------------------------------- checkpoints

def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    params = {
        "block.0/w": rng.standard_normal((3, 4)),
        "scalar": np.array(2.5),
        "meta/name": encode_text("xhand"),
    }
    path = tmp_path / "model.ktrlckpt"
    save_checkpoint(path, params)
    loaded = load_checkpoint(path)
    assert set(loaded) == set(params)
    for k in params:
        np.testing.assert_array_equal(loaded[k], np.asarray(params[k], dtype=float))
    assert decode_text(loaded["meta/name"]) == "xhand"


def test_checkpoint_magic_bytes(tmp_path):
    path = tmp_path / "m.ktrlckpt"
    save_checkpoint(path, {"a": np.zeros(2)})
    assert path.read_bytes()[:8] == b"KTRLCKPT"


def test_checkpoint_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.ktrlckpt"
    path.write_bytes(b"NOTACKPT" + b"\x00" * 16)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_checkpoint_truncation_reports_offset(tmp_path):
    path = tmp_path / "t.ktrlckpt"
    save_checkpoint(path, {"a": np.arange(6.0)})
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(CheckpointError, match="offset"):
        load_checkpoint(path)


def test_checkpoint_unsupported_version(tmp_path):
    path = tmp_path / "v.ktrlckpt"
    save_checkpoint(path, {"a": np.zeros(1)})
    blob = bytearray(path.read_bytes())
    blob[8:12] = (99).to_bytes(4, "little")
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_checkpoint_values_little_endian_f64(tmp_path):
    path = tmp_path / "le.ktrlckpt"
    save_checkpoint(path, {"x": np.array([1.5])})
    blob = path.read_bytes()
    # magic(8) version(4) namelen(4) name(1) rank(4) extent(4) → data at 25
    assert blob[25:33] == np.array([1.5], dtype="<f8").tobytes()
