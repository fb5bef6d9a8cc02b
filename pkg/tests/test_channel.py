import math

import numpy as np
import pytest
import torch
from hypothesis import given, strategies as st

from sbrnn_imdd.channel import (MZM_DRIVE_MAX, ChannelConfig, IMDDChannel, Waveform, adc_full_scale,
                                apply_channel, channel_forward, dispersion_memory, lowpass_filter,
                                mzm_modulate, photodetect, propagate_fiber, quantization_step,
                                quantize_noise, sample_noise)
from sbrnn_imdd.errors import ConfigurationError

RATE = 336e9


def centred_pulse(n=4096, width=40.0):
    t = np.arange(n) - n / 2
    return np.exp(-(t / width) ** 2).astype(complex)


# --- configuration -----------------------------------------------------------

def test_defaults_match_reference_link():
    cfg = ChannelConfig()
    assert cfg.sample_rate == 336e9
    assert cfg.lpf_bandwidth == 32e9
    assert cfg.enob == 6
    assert cfg.rx_noise_power == 0.245e-3


@pytest.mark.parametrize("kwargs", [dict(distance=-1.0), dict(enob=0.5), dict(dac_rate=0.0),
                                    dict(oversampling=0), dict(mzm_transfer="cos"), dict(attenuation=-0.1)])
def test_invalid_config_rejected(kwargs):
    with pytest.raises(ConfigurationError):
        ChannelConfig(**kwargs)


def test_beta2_from_dispersion_parameter():
    # D = 17 ps/nm/km at 1550 nm -> beta2 = -D lambda^2 / (2 pi c) = -21.6826 ps^2/km
    beta2_ps2_per_km = ChannelConfig().beta2 * 1e24 * 1e3
    assert beta2_ps2_per_km == pytest.approx(-21.6826, abs=1e-4)


# --- low-pass filter ---------------------------------------------------------

def test_lpf_bandwidth_above_nyquist_rejected():
    with pytest.raises(ConfigurationError):
        lowpass_filter(Waveform(np.zeros(16), 50e9), 32e9)


def test_lpf_passes_inband_tone_and_removes_outband_tone():
    n = 1024
    t = np.arange(n) / RATE
    f_in = 21 * RATE / n  # on-grid tones
    f_out = 200 * RATE / n
    x = np.cos(2 * np.pi * f_in * t) + np.cos(2 * np.pi * f_out * t)
    y = lowpass_filter(Waveform(x, RATE), 32e9).numpy()
    np.testing.assert_allclose(y, np.cos(2 * np.pi * f_in * t), atol=1e-12)


@given(st.integers(min_value=2, max_value=300), st.integers(0, 2**32 - 1))
def test_lpf_idempotent(n, seed):
    x = np.random.default_rng(seed).normal(size=n)
    once = lowpass_filter(Waveform(x, RATE), 32e9)
    twice = lowpass_filter(once, 32e9)
    np.testing.assert_allclose(twice.numpy(), once.numpy(), atol=1e-12)


@given(st.integers(min_value=2, max_value=300), st.integers(0, 2**32 - 1))
def test_lpf_matches_numpy_fft_oracle(n, seed):
    x = np.random.default_rng(seed).normal(size=n)
    X = np.fft.fft(x)
    X[np.abs(np.fft.fftfreq(n, 1 / RATE)) > 32e9 * (1 + 1e-12)] = 0
    np.testing.assert_allclose(lowpass_filter(Waveform(x, RATE), 32e9).numpy(), np.fft.ifft(X).real,
                               atol=1e-12)


# --- DAC / ADC quantization noise --------------------------------------------

@given(st.floats(1, 12), st.floats(1e-3, 10), st.integers(0, 2**32 - 1))
def test_quantization_noise_bounded_by_half_step(enob, full_scale, seed):
    x = np.random.default_rng(seed).uniform(0, full_scale, 200)
    y = quantize_noise(Waveform(x, RATE), enob, full_scale, np.random.default_rng(seed + 1)).numpy()
    assert np.all(np.abs(y - x) <= quantization_step(full_scale, enob) / 2)


def test_quantization_noise_moments():
    step = quantization_step(1.0, 6)
    assert step == 1 / 64
    e = quantize_noise(Waveform(np.zeros(200_000), RATE), 6, 1.0, np.random.default_rng(0)).numpy()
    assert abs(e.mean()) < 5 * step / math.sqrt(12 * 200_000)
    assert e.var() == pytest.approx(step**2 / 12, rel=0.02)


# --- modulator / photodiode --------------------------------------------------

@given(st.lists(st.floats(-2, 2), min_size=1, max_size=50))
def test_mzm_clamps_drive_to_range(values):
    from sbrnn_imdd.channel import NoiseRealization
    real = NoiseRealization(None, None, None)
    out = mzm_modulate(Waveform(np.array(values), RATE), "sin", real).numpy()
    x = np.clip(values, 0, MZM_DRIVE_MAX)
    np.testing.assert_allclose(out.real, np.sin(x), atol=1e-15)
    assert np.all(out.imag == 0)
    assert real.clamped == int(np.sum((np.array(values) < 0) | (np.array(values) > MZM_DRIVE_MAX)))


def test_photodiode_is_square_law():
    f = np.array([1 + 1j, 0.5, -2j])
    np.testing.assert_allclose(photodetect(Waveform(f, RATE)).numpy(), [2.0, 0.25, 4.0])


# --- fiber -------------------------------------------------------------------

def test_zero_length_fiber_is_identity():
    x = np.random.default_rng(1).normal(size=300) + 1j * np.random.default_rng(2).normal(size=300)
    y = propagate_fiber(Waveform(x, RATE), ChannelConfig(distance=0.0)).numpy()
    np.testing.assert_array_equal(y, x)


@pytest.mark.parametrize("distance", [1.0, 20.0, 100.0])
def test_dispersion_conserves_energy_without_loss(distance):
    cfg = ChannelConfig(distance=distance, attenuation=0.0)
    x = np.random.default_rng(3).normal(size=2048) + 0j
    y = propagate_fiber(Waveform(x, RATE), cfg, pad=False).numpy()
    assert abs(np.sum(np.abs(y) ** 2) / np.sum(np.abs(x) ** 2) - 1) < 1e-9
    # padded propagation of a pulse well inside the window also conserves energy
    p = centred_pulse()
    q = propagate_fiber(Waveform(p, RATE), cfg).numpy()
    assert abs(np.sum(np.abs(q) ** 2) / np.sum(np.abs(p) ** 2) - 1) < 1e-9


def test_attenuation_100km_is_minus_20_db():
    cfg = ChannelConfig(distance=100.0, dispersion=0.0)
    x = np.ones(64, dtype=complex)
    y = propagate_fiber(Waveform(x, RATE), cfg).numpy()
    assert 10 * math.log10(np.sum(np.abs(y) ** 2) / np.sum(np.abs(x) ** 2)) == pytest.approx(-20.0, abs=1e-12)
    cfg = ChannelConfig(distance=100.0, attenuation=0.2)
    p = centred_pulse()
    q = propagate_fiber(Waveform(p, RATE), cfg).numpy()
    assert 10 * math.log10(np.sum(np.abs(q) ** 2) / np.sum(np.abs(p) ** 2)) == pytest.approx(-20.0, abs=1e-9)


def test_gaussian_pulse_broadening_matches_closed_form():
    # a Gaussian exp(-t^2 / (2 T0^2)) broadens to T0 sqrt(1 + (beta2 L / T0^2)^2)
    cfg = ChannelConfig(distance=40.0, attenuation=0.0)
    n = 1 << 14
    t = (np.arange(n) - n / 2) / RATE
    T0 = 20e-12
    p = np.exp(-t**2 / (2 * T0**2)).astype(complex)
    q = propagate_fiber(Waveform(p, RATE), cfg).numpy()

    def rms_width(a):
        w = np.abs(a) ** 2
        w = w / w.sum()
        m = np.sum(w * t)
        return math.sqrt(np.sum(w * (t - m) ** 2))

    beta2_l = cfg.beta2 * cfg.distance * 1e3
    expected = rms_width(p) * math.sqrt(1 + (beta2_l / T0**2) ** 2)
    assert rms_width(q) == pytest.approx(expected, rel=1e-6)


def test_dispersion_matches_direct_fft_oracle():
    cfg = ChannelConfig(distance=30.0)
    x = np.random.default_rng(5).normal(size=512) + 0j
    y = propagate_fiber(Waveform(x, RATE), cfg, pad=False).numpy()
    w = 2 * np.pi * np.fft.fftfreq(512, 1 / RATE)
    H = np.exp(0.5j * cfg.beta2 * 30e3 * w**2) * 10 ** (-0.2 * 30 / 20)
    np.testing.assert_allclose(y, np.fft.ifft(np.fft.fft(x) * H), atol=1e-12)


def test_dispersion_memory_grows_linearly_with_distance():
    m20 = dispersion_memory(ChannelConfig(distance=20.0), RATE)
    m100 = dispersion_memory(ChannelConfig(distance=100.0), RATE)
    assert m20 > 0 and m100 == pytest.approx(5 * m20, abs=5)


# --- full chain --------------------------------------------------------------

def test_noiseless_back_to_back_chain_is_deterministic_square_law():
    cfg = ChannelConfig(distance=0.0, include_tx_lpf=False, include_rx_lpf=False).noiseless()
    x = np.random.default_rng(0).uniform(0, MZM_DRIVE_MAX, 96)
    y, _ = channel_forward(Waveform(x, cfg.sample_rate), cfg, np.random.default_rng(0))
    np.testing.assert_allclose(y.numpy(), np.sin(x) ** 2, atol=1e-15)


def test_noise_variance_matches_configuration():
    cfg = ChannelConfig(dac_noise=False, adc_noise=False, include_rx_lpf=False)
    noise = sample_noise((100_000,), cfg, np.random.default_rng(1))
    assert noise.rx_noise.var().item() == pytest.approx(cfg.rx_noise_variance, rel=0.02)
    assert noise.dac_noise is None and noise.adc_noise is None


def test_channel_reproducible_for_fixed_seed():
    cfg = ChannelConfig(distance=20.0)
    x = Waveform(np.random.default_rng(0).uniform(0, MZM_DRIVE_MAX, 480), cfg.sample_rate)
    a, _ = channel_forward(x, cfg, np.random.default_rng(9))
    b, _ = channel_forward(x, cfg, np.random.default_rng(9))
    assert torch.equal(a.samples, b.samples)


def test_apply_channel_rejects_wrong_rate():
    cfg = ChannelConfig()
    with pytest.raises(ConfigurationError):
        apply_channel(Waveform(np.zeros(8), 84e9), cfg, sample_noise((8,), cfg, np.random.default_rng(0)))


def test_adc_full_scale_decreases_with_distance():
    spans = [adc_full_scale(ChannelConfig(distance=d)) for d in (0.0, 20.0, 50.0, 100.0)]
    assert all(a > b for a, b in zip(spans, spans[1:]))


def test_channel_wrapper_batches_rows_independently():
    ch = IMDDChannel(ChannelConfig(distance=20.0).noiseless())
    x = torch.as_tensor(np.random.default_rng(0).uniform(0, MZM_DRIVE_MAX, (3, 200)))
    together = ch(x, np.random.default_rng(0))
    for i in range(3):
        np.testing.assert_allclose(ch(x[i], np.random.default_rng(0)).numpy(), together[i].numpy(), atol=1e-14)
