"""Dense/GELU/BCE kernels, Adam, schedulers, checkpoint format."""

import math

import mpmath
import numpy as np
import pytest

import oracles
from tweetgage import nn


def test_dense_identity_passthrough():
    layer = nn.Dense(3, 3, np.random.default_rng(0))
    layer.W[:] = np.eye(3)
    layer.b[:] = 0.0
    x = np.array([[1.0, 2.0, 3.0]])
    assert np.array_equal(layer.forward(x), x)


def test_dense_zero_input_bias_rows():
    layer = nn.Dense(2, 4, np.random.default_rng(0))
    layer.b[:] = 7.5
    out = layer.forward(np.zeros((3, 2)))
    assert np.array_equal(out, np.full((3, 4), 7.5))


def test_dense_hand_product():
    layer = nn.Dense(2, 1, np.random.default_rng(0))
    layer.W[:] = [[1.0], [1.0]]
    layer.b[:] = 0.0
    assert layer.forward(np.array([[2.0, 3.0]])).tolist() == [[5.0]]


def test_dense_shape_mismatch():
    layer = nn.Dense(3, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        layer.forward(np.zeros((4, 5)))


def test_dense_backward_matches_finite_differences():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        layer = nn.Dense(4, 3, rng)
        x = rng.normal(0, 1, (6, 4))
        target = rng.normal(0, 1, (6, 3))

        def loss():
            return float(np.sum((layer.forward(x) - target) ** 2))

        layer.zero_grad()
        d_out = 2.0 * (layer.forward(x) - target)
        d_x = layer.backward(d_out)
        fd = oracles.finite_difference_grads(loss, layer.params())
        assert oracles.grad_compare(layer.grads(), fd) < 1e-6
        fd_x = oracles.finite_difference_grads(loss, [x])
        assert oracles.grad_compare([d_x], fd_x) < 1e-6


def test_gelu_values():
    assert nn.gelu(np.array(0.0)) == 0.0
    assert abs(float(nn.gelu(np.array(10.0))) - 10.0) < 1e-6
    # closed form at x=1 evaluated with high-precision arithmetic
    with mpmath.workdps(50):
        x = mpmath.mpf(1)
        c = mpmath.sqrt(2 / mpmath.pi)
        ref = 0.5 * x * (1 + mpmath.tanh(c * (x + mpmath.mpf("0.044715") * x**3)))
    assert float(nn.gelu(np.array(1.0))) == pytest.approx(float(ref), abs=1e-15)


def test_gelu_shape_and_limits():
    x = np.linspace(0, 6, 200)
    y = nn.gelu(x)
    assert np.all(np.diff(y) >= 0)
    assert abs(float(nn.gelu(np.array(30.0))) - 30.0) < 1e-12
    assert abs(float(nn.gelu(np.array(-30.0)))) < 1e-12


def test_gelu_grad_matches_finite_differences():
    rng = np.random.default_rng(1)
    x = rng.normal(0, 2, 50)
    h = 1e-6
    fd = (nn.gelu(x + h) - nn.gelu(x - h)) / (2 * h)
    assert np.allclose(nn.gelu_grad(x), fd, atol=1e-8)


def test_bce_known_values():
    loss, _ = nn.bce_with_logits(np.zeros(1), np.array([1.0]))
    assert loss == pytest.approx(math.log(2.0), abs=1e-12)
    loss, _ = nn.bce_with_logits(np.array([50.0]), np.array([1.0]))
    assert loss == pytest.approx(0.0, abs=1e-12)
    loss, _ = nn.bce_with_logits(np.array([-50.0]), np.array([0.0]))
    assert loss == pytest.approx(0.0, abs=1e-12)
    # no overflow warnings at extreme logits
    loss, grad = nn.bce_with_logits(np.array([750.0, -750.0]), np.array([0.0, 1.0]))
    assert np.isfinite(loss)
    assert np.all(np.isfinite(grad))


def test_bce_matches_high_precision_oracle():
    rng = np.random.default_rng(2)
    z = rng.normal(0, 3, 20)
    y = rng.integers(0, 2, 20).astype(float)
    loss, _ = nn.bce_with_logits(z, y)
    assert loss == pytest.approx(oracles.bce_oracle(z, y), abs=1e-12)


def test_bce_grad_matches_finite_differences():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        z = rng.normal(0, 2, 15)
        y = rng.integers(0, 2, 15).astype(float)

        def loss():
            return nn.bce_with_logits(z, y)[0]

        _, grad = nn.bce_with_logits(z, y)
        fd = oracles.finite_difference_grads(loss, [z])
        assert oracles.grad_compare([grad], fd) < 1e-6


def test_adam_zero_grad_no_change():
    rng = np.random.default_rng(0)
    p = rng.normal(0, 1, (3, 2))
    before = p.copy()
    opt = nn.Adam(lr=0.1)
    opt.step([p], [np.zeros_like(p)])
    assert np.array_equal(p, before)


def test_adam_first_step_is_signed_lr():
    p = np.array([1.0, -2.0])
    g = np.array([0.3, -0.7])
    opt = nn.Adam(lr=0.05)
    opt.step([p], [g])
    # bias-corrected first step: -lr * g / (|g| + eps) ~ -lr * sign(g)
    assert p[0] == pytest.approx(1.0 - 0.05, abs=1e-6)
    assert p[1] == pytest.approx(-2.0 + 0.05, abs=1e-6)


def test_adam_matches_scalar_recurrence():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        grads = rng.normal(0, 1, 12)
        p = np.array([0.0])
        opt = nn.Adam(lr=0.01)
        mine = []
        for g in grads:
            opt.step([p], [np.array([g])])
            mine.append(float(p[0]))
        ref = oracles.adam_scalar_oracle(grads, lr=0.01)
        assert np.allclose(mine, ref, atol=1e-12)


def test_adam_constant_grad_two_steps():
    p = np.array([0.0])
    opt = nn.Adam(lr=0.1)
    for _ in range(2):
        opt.step([p], [np.array([2.0])])
    ref = oracles.adam_scalar_oracle([2.0, 2.0], lr=0.1)
    assert float(p[0]) == pytest.approx(ref[-1], abs=1e-12)


def test_plateau_improving_keeps_lr():
    sched = nn.PlateauScheduler(0.1, patience=2)
    for m in (1.0, 0.9, 0.8, 0.7):
        assert sched.step(m) == 0.1


def test_plateau_flat_drops_on_third_call():
    sched = nn.PlateauScheduler(0.1, patience=2)
    assert sched.step(1.0) == 0.1
    assert sched.step(1.0) == 0.1
    assert sched.step(1.0) == pytest.approx(0.01)


def test_plateau_improvement_threshold():
    # gains below 1e-4 do not count as improvement
    sched = nn.PlateauScheduler(0.1, patience=2)
    sched.step(1.0)
    assert sched.step(1.0 - 5e-5) == 0.1       # wait 1
    assert sched.step(1.0 - 2e-4) == 0.1       # real improvement resets
    assert sched.step(1.0 - 2e-4) == 0.1       # wait 1
    assert sched.step(1.0 - 2e-4) == pytest.approx(0.01)


def test_plateau_respects_min_lr():
    sched = nn.PlateauScheduler(1e-5, patience=1, min_lr=1e-6)
    sched.step(1.0)
    for _ in range(5):
        lr = sched.step(1.0)
    assert lr == 1e-6


def test_early_stop_monotone_never_stops():
    best, wait = math.inf, 0
    for metric in np.linspace(1.0, 0.1, 30):
        stop, best, wait = nn.early_stop(best, float(metric), wait, patience=5)
        assert not stop


def test_early_stop_after_patience():
    best, wait = 0.5, 0
    for k in range(5):
        stop, best, wait = nn.early_stop(best, 0.5, wait, patience=5)
    assert stop
    assert wait == 5


def test_early_stop_reset_on_improvement():
    best, wait = 0.5, 0
    for _ in range(3):
        stop, best, wait = nn.early_stop(best, 0.5, wait, patience=5)
        assert not stop
    stop, best, wait = nn.early_stop(best, 0.4, wait, patience=5)
    assert not stop
    assert wait == 0
    assert best == 0.4


def test_early_stopping_tracks_best_epoch():
    stopper = nn.EarlyStopping(patience=3)
    metrics = [1.0, 0.8, 0.85, 0.7, 0.75, 0.76, 0.77]
    stops = [stopper.update(m, epoch) for epoch, m in enumerate(metrics)]
    assert stopper.best_epoch == 3
    assert stops == [False] * 6 + [True]


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    tensors = [rng.normal(0, 1, (5, 3)), rng.normal(0, 1, 7),
               rng.normal(0, 1, (2, 4, 3))]
    path = tmp_path / "model.tgm1"
    nn.save_checkpoint(path, tensors)
    back = nn.load_checkpoint(path)
    assert len(back) == 3
    assert np.array_equal(back[0], tensors[0])
    assert np.array_equal(back[1].ravel(), tensors[1])
    assert np.array_equal(back[2].ravel(), tensors[2].ravel())


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "junk.tgm1"
    path.write_bytes(b"JUNK" + b"\x00" * 8)
    with pytest.raises(ValueError):
        nn.load_checkpoint(path)


def test_conv1d_backward_matches_finite_differences():
    for seed in range(3):
        rng = np.random.default_rng(seed)
        conv = nn.Conv1d(2, 3, 3, rng)
        x = rng.normal(0, 1, (4, 9, 2))
        target = rng.normal(0, 1, (4, 7, 3))

        def loss():
            return float(np.sum((conv.forward(x) - target) ** 2))

        conv.zero_grad()
        d_out = 2.0 * (conv.forward(x) - target)
        d_x = conv.backward(d_out)
        fd = oracles.finite_difference_grads(loss, conv.params())
        assert oracles.grad_compare(conv.grads(), fd) < 1e-6
        fd_x = oracles.finite_difference_grads(loss, [x])
        assert oracles.grad_compare([d_x], fd_x) < 1e-6


def test_conv1d_valid_length():
    rng = np.random.default_rng(0)
    conv = nn.Conv1d(1, 2, 3, rng)
    out = conv.forward(np.zeros((2, 10, 1)))
    assert out.shape == (2, 8, 2)
