import math

import numpy as np
import pytest

from ddipotfs.exceptions import InputSizeError, ParameterError
from ddipotfs.link.channel import (
    ChannelRealization,
    PathParams,
    RealLinearModel,
    add_awgn,
    apply_channel_samplewise,
    effective_dd_matrix,
    sample_channel,
    snr_to_sigma2,
    time_domain_matrix,
    to_real_model,
)
from ddipotfs.link.dd_frame import DDGrid, TimeSignal, demodulate, dft_matrix, modulate, stack_real


def _channel(*paths, M=4, N=3):
    return ChannelRealization(paths=tuple(PathParams(*p) for p in paths), M=M, N=N)


def _signal(rng, M, N):
    return TimeSignal(rng.standard_normal(M * N) + 1j * rng.standard_normal(M * N), M=M)


def test_sample_channel_single_pair():
    ch = sample_channel(1, 0, 0, 4, 3, np.random.default_rng(0))
    assert ch.P == 1
    assert (ch.paths[0].delay_index, ch.paths[0].doppler_index) == (0, 0)


def test_sample_channel_rejects_infeasible_parameters(rng):
    with pytest.raises(ParameterError, match="6 distinct"):
        sample_channel(7, 1, 1, 4, 3, rng)
    with pytest.raises(ParameterError):
        sample_channel(1, 4, 0, 4, 3, rng)
    with pytest.raises(ParameterError):
        sample_channel(1, 0, 2, 4, 3, rng)
    with pytest.raises(ParameterError):
        sample_channel(0, 0, 0, 4, 3, rng)


def test_sample_channel_gain_power_is_one_on_average():
    rng = np.random.default_rng(7)
    total = [sum(abs(p.gain) ** 2 for p in sample_channel(6, 11, 3, 12, 7, rng).paths) for _ in range(20_000)]
    assert np.mean(total) == pytest.approx(1.0, abs=0.02)


def test_sample_channel_pairs_stay_distinct_and_in_range():
    rng = np.random.default_rng(3)
    for _ in range(2_000):
        ch = sample_channel(6, 2, 1, 12, 7, rng)
        pairs = {(p.delay_index, p.doppler_index) for p in ch.paths}
        assert len(pairs) == 6
        assert all(0 <= l <= 2 and -1 <= k <= 1 for l, k in pairs)


def test_channel_realization_validates_paths():
    with pytest.raises(ParameterError):
        ChannelRealization(paths=(), M=4, N=3)
    with pytest.raises(ParameterError):
        _channel((1, 0, 0), (0.5, 0, 0))
    with pytest.raises(ParameterError):
        _channel((1, 4, 0))
    with pytest.raises(ParameterError):
        _channel((1, 0, 2))


def test_channel_text_format_round_trip():
    ch = _channel((0.25 - 0.5j, 1, -1), (1e-3 + 2j, 3, 1))
    text = ch.to_text()
    assert text.splitlines()[0] == "# M=4 N=3"
    assert ChannelRealization.from_text(text) == ch
    with pytest.raises(InputSizeError):
        ChannelRealization.from_text("1.0 0.0 0 0\n")


def test_path_physical_values():
    path = PathParams(1.0, 3, -2)
    assert path.delay_seconds(12, 15e3) == pytest.approx(3 / (12 * 15e3))
    assert path.doppler_hz(7, 15e3) == pytest.approx(-2 * 15e3 / 7)
    described = _channel((1.0, 3, -1), M=12, N=7).describe(15e3)
    assert described[0]["delay_us"] == pytest.approx(3 / (12 * 15e3) * 1e6)


def test_time_domain_matrix_identity_and_shift():
    assert np.allclose(time_domain_matrix(_channel((1, 0, 0))), np.eye(12))
    shift = time_domain_matrix(_channel((1, 1, 0)))
    assert np.allclose(shift, np.roll(np.eye(12), 1, axis=0))
    s = np.arange(12, dtype=complex)
    assert np.allclose(shift @ s, np.roll(s, 1))


def test_time_domain_matrix_columns_match_samplewise_channel():
    ch = sample_channel(4, 3, 1, 4, 3, np.random.default_rng(11))
    H = time_domain_matrix(ch)
    for j in range(12):
        e = np.zeros(12, dtype=complex)
        e[j] = 1
        assert np.allclose(H[:, j], apply_channel_samplewise(TimeSignal(e, M=4), ch).samples, atol=1e-12)


def test_apply_channel_samplewise_basic_channels(rng):
    s = _signal(rng, 4, 3)
    assert np.allclose(apply_channel_samplewise(s, _channel((1, 0, 0))).samples, s.samples)
    assert np.allclose(apply_channel_samplewise(s, _channel((1, 2, 0))).samples, np.roll(s.samples, 2))
    with pytest.raises(InputSizeError):
        apply_channel_samplewise(TimeSignal(np.zeros(5, dtype=complex), M=5), _channel((1, 0, 0)))


def test_apply_channel_samplewise_matches_matrix(rng):
    ch = sample_channel(5, 3, 1, 4, 3, rng)
    s = _signal(rng, 4, 3)
    assert np.allclose(apply_channel_samplewise(s, ch).samples, time_domain_matrix(ch) @ s.samples, atol=1e-10)


def test_effective_dd_matrix_identity_and_norm(rng):
    assert np.allclose(effective_dd_matrix(_channel((1, 0, 0))), np.eye(12), atol=1e-12)
    ch = sample_channel(6, 3, 1, 4, 3, rng)
    assert np.linalg.norm(effective_dd_matrix(ch)) == pytest.approx(np.linalg.norm(time_domain_matrix(ch)), abs=1e-10)


def test_effective_dd_matrix_matches_full_pipeline(rng):
    ch = sample_channel(6, 11, 3, 12, 7, rng)
    X = DDGrid(rng.standard_normal((12, 7)) + 1j * rng.standard_normal((12, 7)))
    y = demodulate(apply_channel_samplewise(modulate(X), ch)).vectorized
    H_DD = effective_dd_matrix(ch)
    assert np.max(np.abs(H_DD @ X.vectorized - y)) < 1e-9
    columns = np.column_stack([
        demodulate(apply_channel_samplewise(modulate(DDGrid.from_vector(e, 12, 7)), ch)).vectorized
        for e in np.eye(84, dtype=complex)
    ])
    assert np.max(np.abs(columns - H_DD)) < 1e-9


def test_effective_dd_matrix_over_random_configurations():
    rng = np.random.default_rng(20)
    worst = 0.0
    for _ in range(100):
        M, N = int(rng.choice([4, 8, 12])), int(rng.choice([2, 4, 7]))
        l_max, k_max = int(rng.integers(0, M)), int(rng.integers(0, N // 2 + 1))
        P = int(rng.integers(1, min(6, (l_max + 1) * (2 * k_max + 1)) + 1))
        ch = sample_channel(P, l_max, k_max, M, N, rng)
        X = DDGrid(rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N)))
        y = demodulate(apply_channel_samplewise(modulate(X), ch)).vectorized
        worst = max(worst, np.linalg.norm(effective_dd_matrix(ch) @ X.vectorized - y) / np.linalg.norm(y))
    assert worst < 1e-9


def test_end_to_end_with_noise(rng):
    ch = sample_channel(3, 3, 1, 4, 3, rng)
    X = DDGrid(rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3)))
    clean = apply_channel_samplewise(modulate(X), ch)
    noisy = add_awgn(clean, 0.3, np.random.default_rng(5))
    w = noisy.samples - clean.samples
    expected = effective_dd_matrix(ch) @ X.vectorized + np.kron(dft_matrix(3), np.eye(4)) @ w
    assert np.allclose(demodulate(noisy).vectorized, expected, atol=1e-9)


def test_snr_to_sigma2():
    assert snr_to_sigma2(0) == 1.0
    assert snr_to_sigma2(10) == pytest.approx(0.1)
    assert snr_to_sigma2(15) == pytest.approx(0.0316227766, rel=1e-8)
    assert snr_to_sigma2(math.inf) == 0.0


def test_add_awgn_zero_variance_leaves_signal(rng):
    s = _signal(rng, 4, 3)
    assert np.array_equal(add_awgn(s, 0.0, rng).samples, s.samples)
    with pytest.raises(ParameterError):
        add_awgn(s, -0.1, rng)


def test_add_awgn_variance():
    s = TimeSignal(np.zeros(100_000, dtype=complex), M=100)
    noise = add_awgn(s, 0.1, np.random.default_rng(2)).samples
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(0.1, rel=0.02)
    assert np.var(noise.real) == pytest.approx(0.05, rel=0.03)


def test_add_awgn_same_stream_scales_same_draw():
    s = TimeSignal(np.zeros(16, dtype=complex), M=4)
    low = add_awgn(s, 0.1, np.random.default_rng(9)).samples
    high = add_awgn(s, 0.4, np.random.default_rng(9)).samples
    assert np.allclose(high, 2 * low)


def test_to_real_model_blocks_and_products(rng):
    H_real = rng.standard_normal((3, 3))
    model = to_real_model(H_real, np.zeros(3), 0.2)
    assert np.all(model.H[:3, 3:] == 0) and np.all(model.H[3:, :3] == 0)
    assert model.sigma2 == pytest.approx(0.1)

    H_DD = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    x = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    model = to_real_model(H_DD, H_DD @ x, 0.0, x)
    assert np.allclose(model.H @ stack_real(x), stack_real(H_DD @ x), atol=1e-12)
    assert np.array_equal(model.x_true, stack_real(x))
    assert np.array_equal(model.complex_matrix(), H_DD)


def test_real_linear_model_validation():
    with pytest.raises(InputSizeError):
        RealLinearModel(H=np.eye(4), y=np.zeros(3), sigma2=0.0)
    with pytest.raises(ParameterError):
        RealLinearModel(H=np.eye(2), y=np.zeros(2), sigma2=-1.0)
    with pytest.raises(InputSizeError):
        to_real_model(np.eye(3), np.zeros(4), 0.1)
