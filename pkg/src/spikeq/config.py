"""Experiment configuration: schema, YAML file loading, dotted overrides.

One structured file drives a whole experiment. Sections mirror the
library's dataclasses (link, encoder, snn, train, sweep) plus a root
seed and an output directory; command-line flags with dotted paths
(--train.alpha 0.01) override individual fields.
"""

import dataclasses
import json
import os
from dataclasses import dataclass, field

import yaml

from .channel import LinkConfig
from .evaluation import SweepSpec
from .snn import (
    DEFAULT_DECAY,
    DEFAULT_I_DECAY,
    DEFAULT_READOUT_DECAY,
    DEFAULT_SURROGATE_SLOPE,
    DEFAULT_W_HO_SCALE,
)
from .training import TrainConfig

ENV_OUTPUT_DIR = "SPIKEQ_OUTPUT_DIR"

ENCODER_DEFAULTS = {
    # (m_neurons, t_steps) per encoder type
    "learned": (8, 10),
    "log_scale": (10, 30),
    "ternary": (8, 10),
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class EncoderConfig:
    type: str = "learned"
    n_classes: int = 256
    m_neurons: int | None = None  # None: per-type default
    t_steps: int | None = None
    graded_bits: int | None = None

    def __post_init__(self):
        if self.type not in ENCODER_DEFAULTS:
            raise ConfigError(
                f"encoder.type: {self.type!r} not one of {sorted(ENCODER_DEFAULTS)}"
            )
        if self.n_classes < 2:
            raise ConfigError("encoder.n_classes: must be >= 2")
        if self.graded_bits is not None and self.graded_bits < 2:
            raise ConfigError("encoder.graded_bits: must be >= 2 when set")
        defaults = ENCODER_DEFAULTS[self.type]
        if self.m_neurons is None:
            self.m_neurons = defaults[0]
        if self.t_steps is None:
            self.t_steps = defaults[1]
        if self.m_neurons < 1 or self.t_steps < 1:
            raise ConfigError("encoder.m_neurons / encoder.t_steps: must be positive")


@dataclass
class SnnConfig:
    n_hidden: int = 80
    n_out: int = 4
    v_decay: float = DEFAULT_DECAY
    i_decay: float = DEFAULT_I_DECAY
    threshold: float = 1.0
    reset: str = "zero"
    readout_v_decay: float = DEFAULT_READOUT_DECAY
    readout_i_decay: float = DEFAULT_READOUT_DECAY
    surrogate_slope: float = DEFAULT_SURROGATE_SLOPE
    readout_statistic: str = "last"
    w_ho_init_scale: float = DEFAULT_W_HO_SCALE  # of 1/sqrt(fan_in); see README

    def __post_init__(self):
        if self.n_hidden < 1 or self.n_out < 2:
            raise ConfigError("snn.n_hidden / snn.n_out: must be positive (n_out >= 2)")
        for name in ("v_decay", "i_decay", "readout_v_decay", "readout_i_decay"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"snn.{name}: must lie strictly inside (0, 1)")
        if self.threshold <= 0:
            raise ConfigError("snn.threshold: must be positive")
        if self.reset not in ("zero", "subtract"):
            raise ConfigError("snn.reset: must be 'zero' or 'subtract'")
        if self.surrogate_slope <= 0:
            raise ConfigError("snn.surrogate_slope: must be positive")
        if self.readout_statistic not in ("max", "last"):
            raise ConfigError("snn.readout_statistic: must be 'max' or 'last'")
        if self.w_ho_init_scale <= 0:
            raise ConfigError("snn.w_ho_init_scale: must be positive")


@dataclass
class ExperimentConfig:
    link: LinkConfig = field(default_factory=LinkConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    snn: SnnConfig = field(default_factory=SnnConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    output_dir: str = "runs/spikeq"
    seed: int = 0

    def __post_init__(self):
        env_dir = os.environ.get(ENV_OUTPUT_DIR)
        if env_dir:
            self.output_dir = env_dir

    def to_dict(self) -> dict:
        """Experiment-defining fields only: the output directory is
        environmental and would break cross-run hash agreement."""
        out = dataclasses.asdict(self)
        del out["output_dir"]
        return out


_SECTIONS = {
    "link": LinkConfig,
    "encoder": EncoderConfig,
    "snn": SnnConfig,
    "train": TrainConfig,
    "sweep": SweepSpec,
}


def _build_section(name, cls, data):
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{name}.{sorted(unknown)[0]}: unknown field")
    try:
        return cls(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{name}: {err}") from err


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data or {})
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = data.pop(name, {})
        kwargs[name] = _build_section(name, cls, section or {})
    if "output_dir" in data:
        kwargs["output_dir"] = str(data.pop("output_dir"))
    if "seed" in data:
        seed = data.pop("seed")
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed: must be a nonnegative integer")
        kwargs["seed"] = seed
    if data:
        raise ConfigError(f"{sorted(data)[0]}: unknown top-level field")
    return ExperimentConfig(**kwargs)


def load_config(path: str, overrides: list | None = None) -> ExperimentConfig:
    """Read a YAML config file and apply dotted-path overrides."""
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as err:
        raise ConfigError(f"{path}: invalid YAML ({err})") from err
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    for dotted, value in overrides or []:
        apply_override(data, dotted, value)
    _inherit_seed(data)
    return config_from_dict(data)


def _inherit_seed(data: dict) -> None:
    """train.seed follows the experiment seed unless given explicitly."""
    if "seed" in data:
        train = data.setdefault("train", {}) or {}
        if isinstance(train, dict) and "seed" not in train:
            train["seed"] = data["seed"]
            data["train"] = train


def apply_override(data: dict, dotted: str, raw_value) -> None:
    """Set a possibly nested field from a dotted path like train.alpha."""
    parts = dotted.split(".")
    if not all(parts):
        raise ConfigError(f"{dotted}: malformed override path")
    node = data
    for part in parts[:-1]:
        nxt = node.get(part)
        if nxt is None:
            nxt = {}
            node[part] = nxt
        if not isinstance(nxt, dict):
            raise ConfigError(f"{dotted}: {part} is not a section")
        node = nxt
    node[parts[-1]] = parse_scalar(raw_value) if isinstance(raw_value, str) else raw_value


def parse_scalar(text: str):
    """Interpret a command-line value: JSON first, then int/float, else str."""
    lowered = text.strip().lower()
    if lowered in ("null", "none"):
        return None
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text
