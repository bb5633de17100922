import math

import numpy as np
import pytest

from forgenet.data import Dataset
from forgenet.masked_net import MaskedNet, NetConfig, TrainingDiverged, init_net, train


def random_mask(k, density, seed):
    rng = np.random.default_rng(seed)
    a = (rng.random((k, k)) < density).astype(float)
    np.fill_diagonal(a, 1.0)
    return a


def zero_net(net):
    for p in net.params:
        p[...] = 0.0
    return net


def finite_difference_errors(net, x, y, h=1e-5):
    """Max relative error between backprop and central differences, per parameter block."""
    _, grads = net.loss_and_grads(x, y)
    errors = []
    for p, g in zip(net.params, grads):
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = net.loss_and_grads(x, y)[0]
            p[idx] = old - h
            down = net.loss_and_grads(x, y)[0]
            p[idx] = old
            num[idx] = (up - down) / (2 * h)
        denom = np.maximum(np.maximum(np.abs(num), np.abs(g)), 1e-8)
        errors.append(float(np.max(np.abs(num - g) / denom)))
    return errors


def test_init_scalar():
    net = init_net(np.ones((1, 1)), NetConfig(seed=0))
    assert net.w_in.shape == (1, 1) and net.w_in[0, 0] != 0.0


def test_init_masks_and_zero_biases():
    a = np.array([[1.0, 0.0], [1.0, 1.0]])
    net = init_net(a, NetConfig(seed=1))
    assert net.w_in[0, 1] == 0.0
    assert all(np.all(b == 0) for b in net.biases)
    assert [w.shape for w in net.weights] == [(2, 2), (2, 64), (64, 16), (16, 2)]


def test_init_deterministic_and_rejects_non_square():
    a = random_mask(6, 0.3, 0)
    n1, n2 = init_net(a, NetConfig(seed=5)), init_net(a, NetConfig(seed=5))
    for p, q in zip(n1.params, n2.params):
        np.testing.assert_array_equal(p, q)
    with pytest.raises(ValueError):
        init_net(np.ones((2, 3)))


def test_init_fan_in_uses_mask_columns():
    a = np.eye(50)
    a[:, 0] = 1.0  # neuron 0 has 50 inputs, the rest have 1
    net = init_net(a, NetConfig(seed=0))
    assert np.abs(net.w_in[:, 0]).max() <= math.sqrt(6 / 50)
    assert np.abs(np.diag(net.w_in)[1:]).max() > math.sqrt(6 / 50)


def test_zero_net_outputs_half():
    net = zero_net(init_net(random_mask(4, 0.5, 0)))
    probs, _ = net.forward(np.random.default_rng(0).standard_normal((5, 4)))
    np.testing.assert_array_equal(probs, 0.5)
    np.testing.assert_array_equal(net.predict_proba(np.ones((3, 4))), 0.5)


def test_softmax_rows_sum_to_one():
    net = init_net(random_mask(10, 0.3, 1), NetConfig(seed=2))
    x = np.random.default_rng(3).standard_normal((40, 10)) * 50
    probs, _ = net.forward(x)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert np.all((probs >= 0) & (probs <= 1))
    np.testing.assert_array_equal(net.predict_proba(x), probs[:, 1])


def test_forward_hand_evaluated():
    a = np.array([[1.0, 1.0], [0.0, 1.0]])
    cfg = NetConfig(hidden_dims=[1], dropout_keep=1.0)
    net = init_net(a, cfg)
    net.weights[0][...] = [[0.5, -1.0], [9.9, 2.0]]  # 9.9 is masked out
    net.biases[0][...] = [0.1, 0.0]
    net.weights[1][...] = [[1.5], [-0.5]]
    net.biases[1][...] = [0.2]
    net.weights[2][...] = [[1.0, -1.0]]
    net.biases[2][...] = [0.0, 0.3]
    x = np.array([[2.0, 1.0]])
    # z1 = [2*0.5 + 0.1, 2*-1 + 1*2] = [1.1, 0.0] -> relu [1.1, 0.0]
    # z2 = 1.1*1.5 + 0*-0.5 + 0.2 = 1.85
    # logits = [1.85, -1.85 + 0.3] = [1.85, -1.55]
    p1 = 1.0 / (1.0 + math.exp(1.85 - (-1.55)))
    probs, _ = net.forward(x)
    np.testing.assert_allclose(probs[0], [1 - p1, p1], atol=1e-10)


def test_forward_dimension_mismatch():
    net = init_net(np.eye(3))
    with pytest.raises(ValueError):
        net.forward(np.zeros((2, 4)))


def test_loss_values():
    net = zero_net(init_net(np.eye(2)))
    loss, _ = net.loss_and_grads(np.zeros((4, 2)), np.array([0, 1, 0, 1]))
    assert loss == pytest.approx(math.log(2), abs=1e-12)
    net.biases[-1][...] = [0.0, 800.0]
    loss, _ = net.loss_and_grads(np.zeros((2, 2)), np.array([1, 1]))
    assert loss == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = init_net(random_mask(20, 0.2, seed),
                   NetConfig(hidden_dims=[8, 4], dropout_keep=1.0, seed=seed))
    for b in net.biases:
        b[...] = rng.normal(0, 0.1, b.shape)
    x = rng.standard_normal((8, 20))
    y = rng.integers(0, 2, 8)
    assert max(finite_difference_errors(net, x, y)) < 1e-4


def test_gradients_without_hidden_layers():
    rng = np.random.default_rng(7)
    net = init_net(random_mask(5, 0.4, 7), NetConfig(hidden_dims=[], dropout_keep=1.0, seed=7))
    x = rng.standard_normal((6, 5))
    assert max(finite_difference_errors(net, x, rng.integers(0, 2, 6))) < 1e-4


def test_masked_gradient_is_zero():
    a = random_mask(8, 0.2, 4)
    net = init_net(a, NetConfig(seed=4))
    _, grads = net.loss_and_grads(np.random.default_rng(0).standard_normal((5, 8)),
                                  np.array([0, 1, 1, 0, 1]))
    assert np.all(grads[0][a == 0] == 0.0)


def test_adam_single_step_scalar():
    net = init_net(np.ones((1, 1)), NetConfig(hidden_dims=[], seed=0))
    for p in net.params:
        p[...] = 0.0
    grads = [np.zeros_like(p) for p in net.params]
    grads[0][...] = 1.0
    net.adam_step(grads, lr=0.001)
    assert net.w_in[0, 0] == pytest.approx(-0.001, abs=1e-9)


def test_adam_zero_gradient_leaves_params():
    net = init_net(random_mask(4, 0.5, 0), NetConfig(seed=0))
    before = [p.copy() for p in net.params]
    net.adam_step([np.zeros_like(p) for p in net.params])
    for p, q in zip(net.params, before):
        np.testing.assert_array_equal(p, q)


def test_adam_reapplies_mask_to_injected_gradient():
    a = np.array([[1.0, 0.0], [0.0, 1.0]])
    net = init_net(a, NetConfig(seed=0))
    grads = [np.ones_like(p) for p in net.params]
    net.adam_step(grads)
    assert net.w_in[0, 1] == 0.0 and net.w_in[1, 0] == 0.0


def _separable(n=80, k=4, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, k))
    return Dataset(x, (x[:, 0] - x[:, 1] > 0).astype(int))


def test_training_reduces_loss_and_keeps_mask():
    d = _separable()
    a = random_mask(4, 0.3, 1)
    net = init_net(a, NetConfig(epochs=30, seed=3))
    initial, _ = net.loss_and_grads(d.x, d.y)
    net, trace = train(net, d)
    final, _ = net.loss_and_grads(d.x, d.y)
    assert final < initial and trace[-1] < trace[0]
    assert np.all(net.w_in[a == 0] == 0.0)


def test_zero_epochs_leaves_net_unchanged():
    net = init_net(random_mask(4, 0.5, 0), NetConfig(epochs=0))
    before = [p.copy() for p in net.params]
    d = _separable()
    assert net.fit(d.x, d.y) == []
    for p, q in zip(net.params, before):
        np.testing.assert_array_equal(p, q)


def test_training_deterministic():
    d = _separable()
    traces = []
    for _ in range(2):
        net = init_net(random_mask(4, 0.5, 2), NetConfig(epochs=5, seed=11))
        traces.append(net.fit(d.x, d.y))
    assert traces[0] == traces[1]


def test_identity_mask_no_hidden_fits_separable_1d():
    # a lone ReLU gate can die during training, in which case the output is
    # constant; every live run must fit the data
    rng = np.random.default_rng(0)
    x = np.r_[rng.uniform(-3, -0.5, 40), rng.uniform(0.5, 3, 40)][:, None]
    y = np.r_[np.zeros(40), np.ones(40)].astype(int)
    fitted = 0
    for seed in range(10):
        net = init_net(np.eye(1), NetConfig(hidden_dims=[], epochs=300, learning_rate=0.05,
                                            dropout_keep=1.0, seed=seed))
        net.fit(x, y)
        loss = net.loss_and_grads(x, y)[0]
        dead = np.all(np.maximum(x @ net.w_in + net.biases[0], 0) == 0)
        assert loss < 0.1 or dead
        fitted += loss < 0.1
    assert fitted >= 7


def test_divergence_reported_with_position():
    net = init_net(np.eye(2), NetConfig(epochs=1, batch_size=2, seed=0))
    net.weights[0][0, 0] = np.nan
    with pytest.raises(TrainingDiverged, match="epoch 0, step 0"):
        net.fit(np.ones((4, 2)), np.array([0, 1, 0, 1]))


def test_dropout_only_in_train_mode():
    net = init_net(random_mask(6, 0.5, 0), NetConfig(dropout_keep=0.5, seed=0))
    x = np.random.default_rng(1).standard_normal((10, 6))
    a, _ = net.forward(x)
    b, _ = net.forward(x)
    np.testing.assert_array_equal(a, b)
    c, _ = net.forward(x, train_mode=True, rng=0)
    assert not np.array_equal(a, c)


def test_json_round_trip():
    net = init_net(random_mask(7, 0.3, 0), NetConfig(hidden_dims=[5, 3], seed=1))
    x = np.random.default_rng(2).standard_normal((4, 7))
    back = MaskedNet.from_json(net.to_json())
    np.testing.assert_array_equal(back.mask, net.mask)
    np.testing.assert_array_equal(back.predict_proba(x), net.predict_proba(x))
    assert '"version": "forgenet-net-v1"' in net.to_json()
