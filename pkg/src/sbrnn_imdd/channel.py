"""IM/DD optical link model: LPF, DAC/ADC quantization noise, MZM, dispersive fiber,
square-law photodiode and receiver amplifier noise.

Every stage is written with torch operations so the whole link is differentiable
with respect to the transmit waveform once a noise realization has been drawn.
Noise is sampled with an explicit ``numpy.random.Generator`` and then treated as an
additive constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import torch
from scipy.fft import next_fast_len

from .errors import ConfigurationError

SPEED_OF_LIGHT = 299_792_458.0
MZM_DRIVE_MAX = math.pi / 4


@dataclass(frozen=True)
class ChannelConfig:
    """Physical parameters of the link. Defaults follow the 84 GSa/s reference setup."""

    dac_rate: float = 84e9
    oversampling: int = 4
    lpf_bandwidth: float = 32e9
    enob: float = 6.0
    dispersion: float = 17.0  # ps/nm/km
    attenuation: float = 0.2  # dB/km
    distance: float = 0.0  # km
    wavelength: float = 1550e-9
    rx_noise_power: float = 0.245e-3  # W, per sample at the simulation rate
    # normalized noise variance per watt of rx_noise_power
    noise_calibration: float = 1.0
    include_tx_lpf: bool = True
    include_rx_lpf: bool = True
    dac_noise: bool = True
    rx_noise: bool = True
    adc_noise: bool = True
    mzm_transfer: str = "sin"

    def __post_init__(self):
        for name in ("dac_rate", "lpf_bandwidth", "rx_noise_power", "wavelength", "noise_calibration"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be strictly positive, got {getattr(self, name)}")
        if self.distance < 0:
            raise ConfigurationError(f"distance must be >= 0, got {self.distance}")
        if self.enob < 1:
            raise ConfigurationError(f"enob must be >= 1, got {self.enob}")
        if int(self.oversampling) != self.oversampling or self.oversampling < 1:
            raise ConfigurationError(f"oversampling must be a positive integer, got {self.oversampling}")
        if self.mzm_transfer not in ("sin", "identity"):
            raise ConfigurationError(f"unknown mzm_transfer {self.mzm_transfer!r}")
        if self.attenuation < 0 or self.dispersion != self.dispersion:
            raise ConfigurationError("attenuation must be >= 0 and dispersion finite")

    @property
    def sample_rate(self) -> float:
        return self.dac_rate * self.oversampling

    @property
    def beta2(self) -> float:
        """Group-velocity dispersion in s^2/m."""
        d_si = self.dispersion * 1e-6  # ps/(nm km) -> s/m^2
        return -d_si * self.wavelength**2 / (2 * math.pi * SPEED_OF_LIGHT)

    @property
    def rx_noise_variance(self) -> float:
        return self.rx_noise_power * self.noise_calibration

    def noiseless(self) -> "ChannelConfig":
        return replace(self, dac_noise=False, rx_noise=False, adc_noise=False)

    def at_distance(self, distance: float) -> "ChannelConfig":
        return replace(self, distance=float(distance))


@dataclass
class Waveform:
    """Samples along the last axis at ``rate`` samples per second."""

    samples: torch.Tensor
    rate: float

    def __post_init__(self):
        if not isinstance(self.samples, torch.Tensor):
            arr = np.asarray(self.samples)
            dtype = torch.complex128 if np.iscomplexobj(arr) else torch.float64
            self.samples = torch.as_tensor(arr, dtype=dtype)
        if not self.rate > 0:
            raise ConfigurationError(f"waveform rate must be positive, got {self.rate}")

    def __len__(self):
        return self.samples.shape[-1]

    def numpy(self) -> np.ndarray:
        return self.samples.detach().cpu().numpy()


@dataclass
class NoiseRealization:
    """Additive noise arrays for one pass through the channel (``None`` = disabled)."""

    dac_noise: torch.Tensor | None
    rx_noise: torch.Tensor | None
    adc_noise: torch.Tensor | None
    dac_step: float = 0.0
    adc_step: float = 0.0
    seed: object = None
    # drive samples clamped into the MZM range on the last pass
    clamped: int = field(default=0, compare=False)


def quantization_step(full_scale: float, enob: float) -> float:
    return full_scale / 2.0**enob


def _uniform_noise(shape, step, rng) -> torch.Tensor:
    return torch.as_tensor(rng.uniform(-step / 2, step / 2, size=shape), dtype=torch.float64)


@lru_cache(maxsize=64)
def _lpf_mask(n: int, rate: float, bandwidth: float, onesided: bool) -> torch.Tensor:
    freqs = np.fft.rfftfreq(n, d=1.0 / rate) if onesided else np.fft.fftfreq(n, d=1.0 / rate)
    return torch.as_tensor(np.abs(freqs) <= bandwidth * (1 + 1e-12))


def lowpass_filter(w: Waveform, bandwidth: float) -> Waveform:
    """Ideal brick-wall low-pass: zero every DFT bin with |f| > bandwidth."""
    if w.rate < 2 * bandwidth * (1 - 1e-12):
        raise ConfigurationError(
            f"LPF bandwidth {bandwidth:g} Hz exceeds Nyquist for rate {w.rate:g} Sa/s"
        )
    n = w.samples.shape[-1]
    if n == 0:
        return w
    real = not torch.is_complex(w.samples)
    keep = _lpf_mask(n, float(w.rate), float(bandwidth), real)
    if bool(keep.all()):
        return Waveform(w.samples, w.rate)
    if real:
        out = torch.fft.irfft(torch.fft.rfft(w.samples, dim=-1) * keep, n=n, dim=-1)
    else:
        out = torch.fft.ifft(torch.fft.fft(w.samples, dim=-1) * keep, dim=-1)
    return Waveform(out, w.rate)


def quantize_noise(w: Waveform, enob: float, full_scale: float, rng) -> Waveform:
    """Add i.i.d. uniform quantization noise on [-step/2, step/2], step = full_scale / 2**enob."""
    step = quantization_step(full_scale, enob)
    if step == 0 or w.samples.shape[-1] == 0:
        return Waveform(w.samples, w.rate)
    noise = _uniform_noise(tuple(w.samples.shape), step, rng)
    return Waveform(w.samples + noise, w.rate)


def mzm_modulate(drive: Waveform, transfer: str = "sin", realization: NoiseRealization | None = None) -> Waveform:
    """Map the electrical drive signal to the optical field.

    The drive is clamped to [0, pi/4]; the number of clamped samples is written to
    ``realization.clamped`` when a realization is passed.
    """
    x = drive.samples
    outside = (x < 0) | (x > MZM_DRIVE_MAX)
    n_clamped = int(outside.sum())
    if realization is not None:
        realization.clamped = n_clamped
    if n_clamped:
        x = torch.clamp(x, 0.0, MZM_DRIVE_MAX)
    field_ = torch.sin(x) if transfer == "sin" else x
    return Waveform(field_.to(torch.complex128), drive.rate)


def dispersion_memory(cfg: ChannelConfig, rate: float) -> int:
    """Delay spread (in samples) of the dispersive all-pass across the full simulated band."""
    spread = abs(cfg.beta2) * cfg.distance * 1e3 * 2 * math.pi * rate
    return int(math.ceil(spread * rate))


@lru_cache(maxsize=64)
def _dispersion_response(n_fft: int, rate: float, beta2_length: float) -> torch.Tensor:
    omega = 2 * math.pi * np.fft.fftfreq(n_fft, d=1.0 / rate)
    return torch.as_tensor(np.exp(0.5j * beta2_length * omega**2))


def propagate_fiber(fld: Waveform, cfg: ChannelConfig, pad: bool = True) -> Waveform:
    """Chromatic dispersion as a frequency-domain quadratic phase, then fiber loss.

    With ``pad`` the sequence is zero-padded by four times the dispersion memory on
    each side before the FFT, and the padding is discarded afterwards.
    """
    length_m = cfg.distance * 1e3
    gain = 10.0 ** (-cfg.attenuation * cfg.distance / 20.0)
    x = fld.samples.to(torch.complex128)
    n = x.shape[-1]
    if length_m == 0 or cfg.dispersion == 0 or n == 0:
        return Waveform(x * gain, fld.rate)
    margin = 4 * dispersion_memory(cfg, fld.rate) if pad else 0
    n_fft = next_fast_len(n + 2 * margin) if pad else n
    if margin or n_fft != n:
        x = torch.nn.functional.pad(x, (margin, n_fft - n - margin))
    h = _dispersion_response(n_fft, float(fld.rate), cfg.beta2 * length_m)
    y = torch.fft.ifft(torch.fft.fft(x, dim=-1) * h, dim=-1)
    y = y[..., margin:margin + n]
    return Waveform(y * gain, fld.rate)


def photodetect(fld: Waveform) -> Waveform:
    x = fld.samples
    if torch.is_complex(x):
        return Waveform(x.real**2 + x.imag**2, fld.rate)
    return Waveform(x**2, fld.rate)


def _noiseless_chain(tx: Waveform, cfg: ChannelConfig) -> Waveform:
    x = lowpass_filter(tx, cfg.lpf_bandwidth) if cfg.include_tx_lpf else tx
    y = photodetect(propagate_fiber(mzm_modulate(x, cfg.mzm_transfer), cfg))
    return lowpass_filter(y, cfg.lpf_bandwidth) if cfg.include_rx_lpf else y


@lru_cache(maxsize=256)
def adc_full_scale(cfg: ChannelConfig) -> float:
    """Span of the noiseless received signal for a fixed binary probe at this configuration."""
    probe_rng = np.random.default_rng(0x5EED)
    levels = probe_rng.integers(0, 2, size=4096) * MZM_DRIVE_MAX
    drive = np.repeat(levels, cfg.oversampling)
    rx = _noiseless_chain(Waveform(drive, cfg.sample_rate), cfg).numpy()
    span = float(rx.max() - rx.min())
    return span if span > 0 else 1.0


def sample_noise(shape, cfg: ChannelConfig, rng) -> NoiseRealization:
    """Draw DAC, receiver and ADC noise for a transmit waveform of the given shape."""
    shape = tuple(shape)
    dac_step = quantization_step(MZM_DRIVE_MAX, cfg.enob)
    adc_step = quantization_step(adc_full_scale(cfg), cfg.enob)
    dac = _uniform_noise(shape, dac_step, rng) if cfg.dac_noise else None
    if cfg.rx_noise:
        rx = torch.as_tensor(rng.normal(0.0, math.sqrt(cfg.rx_noise_variance), size=shape), dtype=torch.float64)
    else:
        rx = None
    adc = _uniform_noise(shape, adc_step, rng) if cfg.adc_noise else None
    return NoiseRealization(dac, rx, adc, dac_step=dac_step, adc_step=adc_step)


def apply_channel(tx: Waveform, cfg: ChannelConfig, noise: NoiseRealization) -> Waveform:
    """Deterministic channel map for a fixed noise realization."""
    rate = cfg.sample_rate
    if abs(tx.rate - rate) > 1e-6 * rate:
        raise ConfigurationError(f"transmit waveform at {tx.rate:g} Sa/s, channel expects {rate:g}")
    x = lowpass_filter(tx, cfg.lpf_bandwidth) if cfg.include_tx_lpf else tx
    if noise.dac_noise is not None:
        x = Waveform(x.samples + noise.dac_noise, rate)
    fld = mzm_modulate(x, cfg.mzm_transfer, realization=noise)
    y = photodetect(propagate_fiber(fld, cfg))
    if noise.rx_noise is not None:
        y = Waveform(y.samples + noise.rx_noise, rate)
    if cfg.include_rx_lpf:
        y = lowpass_filter(y, cfg.lpf_bandwidth)
    if noise.adc_noise is not None:
        y = Waveform(y.samples + noise.adc_noise, rate)
    return y


def channel_forward(tx: Waveform, cfg: ChannelConfig, rng) -> tuple[Waveform, NoiseRealization]:
    """Tx LPF -> DAC noise -> MZM -> fiber -> photodiode -> Rx noise -> Rx LPF -> ADC noise."""
    noise = sample_noise(tx.samples.shape, cfg, rng)
    return apply_channel(tx, cfg, noise), noise


class IMDDChannel:
    """Callable wrapper used by the trainer: tensor in, tensor out, fresh noise per call."""

    def __init__(self, cfg: ChannelConfig):
        self.cfg = cfg

    def __call__(self, samples: torch.Tensor, rng) -> torch.Tensor:
        rx, _ = channel_forward(Waveform(samples, self.cfg.sample_rate), self.cfg, rng)
        return rx.samples

    @property
    def rx_scale(self) -> float:
        """Fixed receiver gain mapping the ADC full-scale range to unit amplitude."""
        return 1.0 / adc_full_scale(self.cfg)


class IdentityChannel:
    """Pass-through channel for toy training runs."""

    rx_scale = 1.0

    def __call__(self, samples: torch.Tensor, rng) -> torch.Tensor:
        return samples
