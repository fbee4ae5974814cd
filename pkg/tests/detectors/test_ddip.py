import logging
import math

import numpy as np
import pytest

from ddipotfs.detectors.ddip import (
    AdamState,
    DdipConfig,
    DecoderNet,
    StopDecision,
    StopMonitor,
    adam_update,
    forward,
    gradients,
    init_net,
    loss,
    run_ddip,
    stop_check,
)
from ddipotfs.exceptions import InputSizeError, ParameterError
from ddipotfs.link.channel import RealLinearModel

C = 1 / math.sqrt(2)


def _model(rng, n, scale=1.0):
    H = rng.standard_normal((n, n)) * scale
    return RealLinearModel(H=H, y=rng.standard_normal(n), sigma2=0.1)


def _zero_net(layer_sizes, c=C):
    weights = [np.zeros((q, p)) for p, q in zip(layer_sizes[:-1], layer_sizes[1:])]
    biases = [np.zeros(q) for q in layer_sizes[1:]]
    return DecoderNet(layer_sizes=tuple(layer_sizes), weights=weights, biases=biases, z0=np.ones(layer_sizes[0]), c=c)


def test_init_net_layer_shapes():
    net = init_net(12, 7, C, np.random.default_rng(0))
    assert net.layer_sizes == (4, 8, 16, 32, 168)
    assert net.weights[-1].shape == (168, 32)
    assert net.biases[-1].shape == (168,)
    assert [w.shape for w in net.weights] == [(8, 4), (16, 8), (32, 16), (168, 32)]
    assert net.z0.shape == (4,)


def test_init_net_bounds_use_destination_width():
    net = init_net(12, 7, C, np.random.default_rng(1))
    assert np.all(np.abs(net.weights[1]) < 1 / 4)
    assert np.all(np.abs(net.biases[1]) < 1 / 4)
    assert np.all(np.abs(net.weights[-1]) < 1 / math.sqrt(168))


def test_init_net_weights_are_zero_mean():
    rng = np.random.default_rng(2)
    entries = np.concatenate([init_net(12, 7, C, rng).weights[-1].ravel() for _ in range(2)])
    sigma = (1 / math.sqrt(168)) / math.sqrt(3)
    assert abs(entries.mean()) < 5 * sigma / math.sqrt(entries.size)


def test_init_net_rejects_empty_grid(rng):
    with pytest.raises(ParameterError):
        init_net(0, 7, C, rng)


def test_z0_is_read_only(rng):
    net = init_net(2, 2, C, rng)
    with pytest.raises(ValueError):
        net.z0[0] = 1.0


def test_decoder_net_checks_shapes():
    with pytest.raises(InputSizeError):
        DecoderNet(layer_sizes=(2, 3), weights=[np.zeros((2, 3))], biases=[np.zeros(3)], z0=np.zeros(2), c=1.0)


def test_forward_zero_net_outputs_zero():
    assert np.array_equal(forward(_zero_net((4, 8, 16, 32, 8))), np.zeros(8))


def test_forward_bounded_by_c(rng):
    for _ in range(10):
        net = init_net(3, 4, 0.9, rng)
        net.weights[-1] *= 50
        assert np.all(np.abs(forward(net)) <= 0.9)


def test_forward_stays_within_scale_over_many_nets():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10_000):
        c = rng.uniform(0.1, 2.0)
        net = init_net(1, 2, c, rng, hidden_sizes=(2, 4))
        net.weights[-1] *= rng.uniform(1.0, 100.0)
        worst = max(worst, float(np.max(np.abs(forward(net)))) - c)
    assert worst <= 0.0


def test_forward_matches_hand_chain(rng):
    W2, b2 = rng.standard_normal((3, 2)), rng.standard_normal(3)
    W3, b3 = rng.standard_normal((4, 3)), rng.standard_normal(4)
    z0 = rng.standard_normal(2)
    net = DecoderNet(layer_sizes=(2, 3, 4), weights=[W2, W3], biases=[b2, b3], z0=z0, c=0.5)
    f2 = [math.tanh(sum(W2[i, j] * z0[j] for j in range(2)) + b2[i]) for i in range(3)]
    f3 = [math.tanh(sum(W3[i, j] * f2[j] for j in range(3)) + b3[i]) for i in range(4)]
    assert np.allclose(forward(net), 0.5 * np.array(f3), atol=1e-14)


def test_loss_cases(rng):
    net = init_net(2, 2, C, rng)
    x = forward(net)
    H = rng.standard_normal((8, 8))
    assert loss(net, RealLinearModel(H=H, y=H @ x, sigma2=0.0)) == 0.0
    assert loss(net, RealLinearModel(H=np.eye(8), y=np.zeros(8), sigma2=0.0)) == pytest.approx(x @ x / 8)

    model = _model(rng, 8)
    expected = sum((sum(model.H[i, j] * x[j] for j in range(8)) - model.y[i]) ** 2 for i in range(8)) / 8
    assert loss(net, model) == pytest.approx(expected, rel=1e-12)


def _finite_difference(net, model, step=1e-5):
    grads = []
    for param in net.parameters():
        grad = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            original = param[idx]
            param[idx] = original + step
            up = loss(net, model)
            param[idx] = original - step
            down = loss(net, model)
            param[idx] = original
            grad[idx] = (up - down) / (2 * step)
        grads.append(grad)
    return grads


@pytest.mark.parametrize("seed", range(100))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    M, N = rng.integers(1, 3, size=2)
    net = init_net(int(M), int(N), rng.uniform(0.5, 1.5), rng)
    model = _model(rng, net.output_size, scale=rng.uniform(0.2, 2.0))
    analytic = gradients(net, model)
    numeric = _finite_difference(net, model)
    assert [g.shape for g in analytic] == [p.shape for p in net.parameters()]
    for a, n in zip(analytic, numeric):
        scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
        assert np.linalg.norm(a - n) / scale < 1e-4


def test_gradients_of_zero_net_only_reach_last_bias(rng):
    net = _zero_net((4, 8, 16, 32, 8))
    model = _model(rng, 8)
    grads = gradients(net, model)
    assert np.linalg.norm(grads[-1]) > 0
    assert all(np.count_nonzero(g) == 0 for g in grads[:-1])
    numeric = _finite_difference(net, model)
    assert np.allclose(grads[-1], numeric[-1], atol=1e-8)


def test_gradients_vanish_at_perfect_fit(rng):
    net = init_net(2, 2, C, rng)
    H = rng.standard_normal((8, 8))
    model = RealLinearModel(H=H, y=H @ forward(net), sigma2=0.0)
    assert all(np.count_nonzero(g) == 0 for g in gradients(net, model))


def test_gradients_reject_size_mismatch(rng):
    with pytest.raises(InputSizeError):
        gradients(init_net(2, 2, C, rng), _model(rng, 6))


def test_adam_zero_gradient_keeps_parameters(rng):
    net = init_net(2, 2, C, rng)
    before = [p.copy() for p in net.parameters()]
    adam = AdamState.zeros_like(net.parameters(), lr=0.01)
    adam_update(net, [np.zeros_like(p) for p in before], adam)
    assert adam.step == 1
    assert all(np.array_equal(p, b) for p, b in zip(net.parameters(), before))


def test_adam_moments_decay_under_zero_gradient(rng):
    net = init_net(2, 2, C, rng)
    adam = AdamState.zeros_like(net.parameters(), lr=0.01)
    adam.m = [np.ones_like(p) for p in net.parameters()]
    adam.v = [np.ones_like(p) for p in net.parameters()]
    adam_update(net, [np.zeros_like(p) for p in net.parameters()], adam)
    assert all(np.allclose(m, 0.9) for m in adam.m)
    assert all(np.allclose(v, 0.999) for v in adam.v)


def test_adam_first_step_is_signed_learning_rate(rng):
    net = init_net(2, 2, C, rng)
    before = [p.copy() for p in net.parameters()]
    grads = [rng.choice([-1.0, 1.0], size=p.shape) * rng.uniform(0.1, 5.0, size=p.shape) for p in before]
    adam_update(net, grads, AdamState.zeros_like(net.parameters(), lr=0.01))
    for p, b, g in zip(net.parameters(), before, grads):
        assert np.allclose(p - b, -0.01 * np.sign(g), atol=1e-9)


def test_adam_three_scalar_steps():
    net = DecoderNet(layer_sizes=(1, 1), weights=[np.array([[0.5]])], biases=[np.array([-0.2])], z0=np.ones(1), c=1.0)
    adam = AdamState.zeros_like(net.parameters(), lr=0.1)
    w, m, v = 0.5, 0.0, 0.0
    for step, g in enumerate([0.3, -1.2, 0.05], start=1):
        adam_update(net, [np.array([[g]]), np.array([0.0])], adam)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w -= 0.1 * (m / (1 - 0.9**step)) / (math.sqrt(v / (1 - 0.999**step)) + 1e-8)
        assert net.weights[0][0, 0] == pytest.approx(w, abs=1e-12)
    assert adam.step == 3


def test_adam_rejects_wrong_gradient_count(rng):
    net = init_net(2, 2, C, rng)
    with pytest.raises(InputSizeError):
        adam_update(net, [np.zeros(1)], AdamState.zeros_like(net.parameters(), lr=0.01))


def test_stop_check_inactive_before_window():
    monitor = StopMonitor(window=5, threshold=1e-3)
    outputs = [np.full(3, float(i)) for i in range(4)]
    assert all(stop_check(monitor, x) is StopDecision.CONTINUE for x in outputs)
    assert monitor.last_variance is None
    assert not monitor.active


def test_stop_check_identical_outputs_stop_at_window():
    monitor = StopMonitor(window=4, threshold=1e-3)
    decisions = [stop_check(monitor, np.ones(6)) for _ in range(4)]
    assert decisions[:3] == [StopDecision.CONTINUE] * 3
    assert decisions[3] is StopDecision.STOP
    assert monitor.last_variance == 0.0


def test_stop_check_alternating_outputs():
    x = np.array([0.3, -0.4, 1.2])
    monitor = StopMonitor(window=2, threshold=1e-6)
    stop_check(monitor, x)
    assert stop_check(monitor, -x) is StopDecision.CONTINUE
    assert monitor.last_variance == pytest.approx(x @ x)


def test_stop_monitor_rejects_empty_window():
    with pytest.raises(ParameterError):
        StopMonitor(window=0, threshold=1e-3)


def _well_conditioned(rng, n=8):
    x = rng.choice([-C, C], size=n)
    H = np.eye(n) + 0.1 * rng.standard_normal((n, n))
    return RealLinearModel(H=H, y=H @ x, sigma2=0.0, x_true=x)


def test_run_ddip_fits_noise_free_instance(rng):
    model = _well_conditioned(rng)
    config = DdipConfig(window=30, threshold=1e-9, cap=5000)
    result = run_ddip(model, config, np.random.default_rng(3))
    assert np.linalg.norm(result.x_init - model.x_true) / np.linalg.norm(model.x_true) < 0.1
    losses = [row.loss for row in result.loss_trace]
    assert np.mean(losses[-30:]) < np.mean(losses[:30])


def test_run_ddip_basic_invariants(rng):
    model = _model(rng, 8, scale=0.5)
    config = DdipConfig(window=10, threshold=1e-3, cap=400, c=0.8)
    result = run_ddip(model, config, np.random.default_rng(4))
    assert config.window <= result.iterations <= config.cap
    assert len(result.loss_trace) == result.iterations
    assert np.all(np.abs(result.x_init) <= 0.8)
    assert all(row.variance is None for row in result.loss_trace[: config.window - 1])
    assert result.loss_trace[config.window - 1].variance is not None


def test_run_ddip_is_deterministic(rng):
    model = _model(rng, 8)
    config = DdipConfig(window=10, cap=200)
    first = run_ddip(model, config, np.random.default_rng(5))
    second = run_ddip(model, config, np.random.default_rng(5))
    assert np.array_equal(first.x_init, second.x_init)
    assert first.iterations == second.iterations
    assert first.loss_trace == second.loss_trace


def test_run_ddip_flags_truncation(rng, caplog):
    model = _model(rng, 8)
    config = DdipConfig(window=5, threshold=0.0, cap=20)
    with caplog.at_level(logging.WARNING, logger="ddipotfs"):
        result = run_ddip(model, config, np.random.default_rng(6))
    assert result.truncated
    assert result.iterations == 20
    assert "cap of 20" in caplog.text


def test_run_ddip_rejects_cap_below_window(rng):
    with pytest.raises(ParameterError):
        run_ddip(_model(rng, 8), DdipConfig(window=30, cap=10), rng)


def test_run_ddip_builds_its_net_with_init_net(rng, monkeypatch):
    import ddipotfs.detectors.ddip as ddip_module

    calls = []

    def recording_init_net(M, N, c, rng, hidden_sizes=ddip_module.HIDDEN_SIZES):
        calls.append((M * N, c, hidden_sizes))
        return init_net(M, N, c, rng, hidden_sizes)

    monkeypatch.setattr(ddip_module, "init_net", recording_init_net)
    model = _model(rng, 12)
    config = DdipConfig(window=5, cap=10, c=0.6, hidden_sizes=(3, 5))
    result = run_ddip(model, config, np.random.default_rng(8))
    assert calls == [(6, 0.6, (3, 5))]
    assert result.net.layer_sizes == (3, 5, 12)

    expected = init_net(6, 1, 0.6, np.random.default_rng(8), (3, 5))
    untrained = DdipConfig(window=1, threshold=math.inf, cap=1, c=0.6, hidden_sizes=(3, 5))
    fresh = run_ddip(model, untrained, np.random.default_rng(8))
    assert all(np.array_equal(a, b) for a, b in zip(fresh.net.parameters(), expected.parameters()))


def test_run_ddip_rejects_odd_model_size(rng):
    with pytest.raises(InputSizeError):
        run_ddip(_model(rng, 7), DdipConfig(window=2, cap=4), rng)


@pytest.mark.parametrize("cap", [5, 6, 20])
def test_truncated_output_is_the_fitted_net_output(rng, cap):
    model = _model(rng, 8)
    config = DdipConfig(window=5, threshold=0.0, cap=cap)
    result = run_ddip(model, config, np.random.default_rng(12))
    assert result.truncated
    assert np.array_equal(result.x_init, forward(result.net))
    assert result.loss_trace[-1].loss == loss(result.net, model)


def test_stopped_output_is_the_fitted_net_output(rng):
    model = _model(rng, 8)
    result = run_ddip(model, DdipConfig(window=5, threshold=math.inf, cap=50), np.random.default_rng(13))
    assert not result.truncated and result.iterations == 5
    assert np.array_equal(result.x_init, forward(result.net))
