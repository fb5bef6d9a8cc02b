"""Experiment configuration: flat ``key = value`` sections, one per module.

Example::

    [experiment]
    system = sbrnn
    distances = 20, 40, 60
    seed = 7

    [channel]
    enob = 6

Every key is optional; defaults reproduce the reference link and transceiver sizes.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .autoencoder import AutoencoderDims
from .channel import ChannelConfig
from .errors import ConfigurationError
from .mlsd import PamConfig
from .trainer import AdamConfig, TrainConfig

SYSTEMS = ("sbrnn", "pam2_mlsd", "pam4_mlsd")


@dataclass(frozen=True)
class MlsdSettings:
    mu: int = 12
    pam4_mu: int = 6
    train_symbols: int = 10**7
    test_symbols: int = 10**5
    block_len: int = 2048
    rolloff: float = 0.25
    sps: int = 2
    rrc_span: int = 16
    pam4_dac_rate: float = 42e9
    pam4_rx_noise_power: float = 0.127e-3


@dataclass(frozen=True)
class EstimatorSettings:
    windows: tuple = (2, 10)
    representative_length: int = 10000
    test_sequences: int = 250
    test_length: int = 10000
    inference_dtype: str = "float64"


@dataclass(frozen=True)
class LabelingSettings:
    tabu_iters: int = 1000
    tabu_list: int = 256


@dataclass(frozen=True)
class ExperimentConfig:
    system: str = "sbrnn"
    distances: tuple = ()
    seed: int = 0
    train_missing: bool = False
    checkpoint_dir: str = "checkpoints"
    output_dir: str = "results"
    hd_fec_threshold: float | None = None
    dims: AutoencoderDims = field(default_factory=AutoencoderDims)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    estimator: EstimatorSettings = field(default_factory=EstimatorSettings)
    labeling: LabelingSettings = field(default_factory=LabelingSettings)
    mlsd: MlsdSettings = field(default_factory=MlsdSettings)

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ConfigurationError(f"system must be one of {SYSTEMS}, got {self.system!r}")

    @property
    def pam_order(self) -> int:
        return 2 if self.system == "pam2_mlsd" else 4

    def system_channel(self) -> ChannelConfig:
        """Channel parameters for this system (PAM4 runs at its own DAC rate and noise power)."""
        if self.system == "pam4_mlsd":
            return replace(self.channel, dac_rate=self.mlsd.pam4_dac_rate,
                           rx_noise_power=self.mlsd.pam4_rx_noise_power)
        return self.channel

    @property
    def mu(self) -> int:
        """Viterbi memory of the configured MLSD system."""
        return self.mlsd.pam4_mu if self.system == "pam4_mlsd" else self.mlsd.mu

    def pam(self) -> PamConfig:
        ch = self.system_channel()
        return PamConfig(self.pam_order, self.mlsd.rolloff, self.mlsd.sps, self.mlsd.rrc_span, ch.dac_rate)

    def etas(self) -> list[int]:
        if self.system == "sbrnn":
            return [w * self.dims.bits for w in self.estimator.windows]
        return [self.mu * int(math.log2(self.pam_order))]

    def to_text(self) -> str:
        return dump_config(self)

    def hash(self) -> str:
        """Digest of every setting that can change results (paths excluded)."""
        neutral = replace(self, checkpoint_dir="", output_dir="", train_missing=False)
        return hashlib.sha256(dump_config(neutral).encode()).hexdigest()[:12]


_SECTIONS = {
    "experiment": None,
    "autoencoder": "dims",
    "channel": "channel",
    "trainer": "train",
    "adam": "train.adam",
    "estimator": "estimator",
    "labeling": "labeling",
    "mlsd": "mlsd",
}


def _number(token: str):
    try:
        return int(token)
    except ValueError:
        return float(token)


def _convert(value: str, current):
    value = value.strip()
    if isinstance(current, bool):
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"not a boolean: {value!r}")
    if isinstance(current, tuple):
        return tuple(_number(v) for v in value.replace(",", " ").split())
    if isinstance(current, int):
        f = float(value)
        if not f.is_integer():
            raise ConfigurationError(f"expected an integer, got {value!r}")
        return int(f)
    if isinstance(current, float) or current is None:
        if value.lower() in ("", "none"):
            return None
        return float(value)
    return value


def _update(obj, values: dict, where: str):
    known = {f.name: f for f in fields(obj)}
    changes = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigurationError(f"unknown key {key!r} in [{where}]")
        current = getattr(obj, key)
        if hasattr(current, "__dataclass_fields__"):
            raise ConfigurationError(f"[{where}] {key} is a section, not a value")
        changes[key] = _convert(raw, current)
    return replace(obj, **changes)


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_string(text)
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigurationError(f"unknown config section [{section}]")
    exp = dict(parser["experiment"]) if parser.has_section("experiment") else {}
    sub = {}
    for section, attr in _SECTIONS.items():
        if attr is None or not parser.has_section(section):
            continue
        sub[section] = dict(parser[section])
    dims = _update(cfg.dims, sub.get("autoencoder", {}), "autoencoder")
    channel = _update(cfg.channel, sub.get("channel", {}), "channel")
    adam = _update(cfg.train.adam, sub.get("adam", {}), "adam")
    train = _update(replace(cfg.train, adam=adam), sub.get("trainer", {}), "trainer")
    est = _update(cfg.estimator, sub.get("estimator", {}), "estimator")
    lab = _update(cfg.labeling, sub.get("labeling", {}), "labeling")
    mlsd = _update(cfg.mlsd, sub.get("mlsd", {}), "mlsd")
    cfg = replace(cfg, dims=dims, channel=channel, train=train, estimator=est, labeling=lab, mlsd=mlsd)
    return _update(cfg, exp, "experiment")


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(dump_config(c)) == c``."""
    lines = ["[experiment]"]
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if not hasattr(v, "__dataclass_fields__"):
            lines.append(f"{f.name} = {_fmt(v)}")
    for section, attr in _SECTIONS.items():
        if attr is None:
            continue
        obj = cfg
        for part in attr.split("."):
            obj = getattr(obj, part)
        lines.append("")
        lines.append(f"[{section}]")
        for k, v in asdict(obj).items():
            if not isinstance(v, dict):
                lines.append(f"{k} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def derive_seed(*keys) -> int:
    """Deterministic 32-bit seed from integer keys."""
    ints = [int(round(k * 1000)) if isinstance(k, float) else int(k) for k in keys]
    return int(np.random.SeedSequence(ints).generate_state(1)[0])
