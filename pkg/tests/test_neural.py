import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import CHECKS, TOLERANCE
from macda.errors import DimensionError
from macda.neural import (
    Adam,
    AttentionHead,
    Mlp,
    Sgd,
    attention_mix,
    leaky_relu,
    load_checkpoint,
    make_optimizer,
    save_checkpoint,
    softmax_policy,
)


def reference_mlp(params, x):
    """Plain loop re-implementation used as an independent oracle."""
    h = np.array(x, dtype=float)
    n = len(params) // 2
    for layer in range(n):
        W, b = params[2 * layer], params[2 * layer + 1]
        out = np.zeros((h.shape[0], W.shape[1]))
        for r in range(h.shape[0]):
            for c in range(W.shape[1]):
                out[r, c] = math.fsum(h[r, k] * W[k, c] for k in range(W.shape[0])) + b[c]
        if layer < n - 1:
            out = np.where(out > 0, out, 0.01 * out)
        h = out
    return h


def test_three_layer_matches_reference(rng):
    for _ in range(20):
        sizes = [int(s) for s in rng.integers(1, 7, 4)]
        net = Mlp(sizes, rng)
        for p in net.params[1::2]:
            p[:] = rng.normal(size=p.shape)
        x = rng.normal(size=(5, sizes[0]))
        np.testing.assert_allclose(net(x), reference_mlp(net.params, x), rtol=1e-12, atol=1e-12)


def test_single_row_stays_one_dimensional():
    net = Mlp([3, 4, 2])
    assert net(np.ones(3)).shape == (2,)
    assert net(np.ones((6, 3))).shape == (6, 2)


def test_input_width_checked():
    with pytest.raises(DimensionError):
        Mlp([3, 2])(np.ones(4))


def test_invalid_sizes():
    with pytest.raises(ValueError):
        Mlp([3])
    with pytest.raises(ValueError):
        Mlp([3, 0, 1])


def test_leaky_relu_values():
    np.testing.assert_array_equal(leaky_relu(np.array([-2.0, 0.0, 3.0])), [-0.02, 0.0, 3.0])


def test_softmax_examples():
    np.testing.assert_allclose(softmax_policy([0.0, math.log(3.0)]), [0.25, 0.75], rtol=1e-12)
    p = softmax_policy([1.0, 5.0, 2.0], mask=[True, False, True])
    assert p[1] == 0.0
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        softmax_policy([1.0, 2.0], mask=[False, False])
    with pytest.raises(DimensionError):
        softmax_policy([1.0, 2.0], mask=[True])


def test_softmax_temperature():
    sharp = softmax_policy([0.0, 1.0], temperature=0.1)
    flat = softmax_policy([0.0, 1.0], temperature=10.0)
    assert sharp[1] > flat[1] > 0.5


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-700, 700), min_size=1, max_size=12))
def test_softmax_is_distribution(logits):
    p = softmax_policy(logits)
    assert np.all(p >= 0) and abs(p.sum() - 1.0) <= 1e-12


def test_attention_equal_keys_split_evenly():
    head = AttentionHead(3, 2, 3, np.random.default_rng(1))
    g = np.array([0.3, -0.1, 0.7])
    _, w = attention_mix(np.ones(3), np.stack([g, g]), head)
    np.testing.assert_allclose(w, [0.5, 0.5], rtol=0, atol=1e-15)


def test_two_agent_weight_is_one():
    head = AttentionHead(4, 3, 4, np.random.default_rng(2))
    _, w = attention_mix(np.ones(4), np.arange(4.0), head)
    assert w.tolist() == [1.0]


def test_zero_value_transform_gives_zero_mix():
    head = AttentionHead(4, 3, 4, np.random.default_rng(2))
    head.V[...] = 0.0
    x, _ = attention_mix(np.ones(4), np.ones((3, 4)), head)
    assert np.all(x == 0.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_attention_weights_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    E, M = int(rng.integers(1, 6)), int(rng.integers(1, 6))
    head = AttentionHead(E, int(rng.integers(1, 5)), E, rng)
    _, w, _ = head.forward(rng.normal(size=(3, E)) * 5, rng.normal(size=(3, M, E)) * 5)
    assert np.all(np.abs(w.sum(axis=1) - 1.0) <= 1e-9)


def test_attention_shape_checks():
    head = AttentionHead(4, 3, 4)
    with pytest.raises(DimensionError):
        head.forward(np.ones((1, 4)), np.ones((1, 2, 3)))


@pytest.mark.parametrize("name", sorted(CHECKS))
def test_gradients_match_finite_differences(name):
    for k in range(20):
        result = CHECKS[name](np.random.default_rng([7, k]))
        assert result.error < TOLERANCE
        assert result.kinked <= max(1, result.checked // 50)


def test_adam_first_step_moves_by_lr():
    p = [np.array([1.0, -2.0, 0.0])]
    Adam(p, lr=0.1).step([np.array([3.0, -0.5, 0.0])])
    np.testing.assert_allclose(p[0], [0.9, -1.9, 0.0], atol=1e-8)


def test_frozen_parameters_untouched():
    for name in ("adam", "sgd"):
        params = [np.ones(3), np.ones(2)]
        opt = make_optimizer(name, params, 0.1, frozen=[1])
        for _ in range(3):
            opt.step([np.ones(3), np.ones(2)])
        assert params[1].tolist() == [1.0, 1.0]
        assert np.all(params[0] < 1.0)


def test_sgd_step():
    p = [np.array([1.0])]
    Sgd(p, lr=0.5).step([np.array([2.0])])
    assert p[0].tolist() == [0.0]


def test_bad_optimizer_settings():
    with pytest.raises(ValueError):
        make_optimizer("rmsprop", [], 0.1)
    with pytest.raises(ValueError):
        Adam([], lr=0.0)


def test_parameters_stay_finite_under_training(rng):
    net = Mlp([4, 8, 1], rng)
    opt = Adam(net.params, lr=0.01)
    x, y = rng.normal(size=(16, 4)), rng.normal(size=(16, 1))
    for _ in range(200):
        out, cache = net.forward(x)
        grads, _ = net.backward(cache, 2 * (out - y) / len(x))
        opt.step(grads)
        assert all(np.all(np.isfinite(p)) for p in net.params)


def test_checkpoint_round_trip(tmp_path, rng):
    arrays = {"w": rng.normal(size=(3, 4)), "b": rng.normal(size=4), "s": np.array(2.5)}
    path = tmp_path / "net.ckpt"
    save_checkpoint(path, arrays)
    back = load_checkpoint(path)
    assert list(back) == list(arrays)
    for k in arrays:
        assert np.array_equal(back[k], arrays[k])


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "x"
    path.write_bytes(b'{"format": "other"}\n')
    with pytest.raises(ValueError):
        load_checkpoint(path)
