"""Run configuration: one YAML manifest drives every command.

Every field defaults to the reference simulation settings; unknown keys are
rejected so a stale manifest fails loudly instead of silently drifting.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .baselines import AcoConfig, ScanConfig
from .channel import ChannelParams
from .ddpg import TrainConfig
from .environment import EnvParams
from .mdp import MdpConfig


class ConfigError(ValueError):
    """Malformed or unknown configuration content."""


@dataclass(frozen=True)
class EvalConfig:
    realizations: int = 25

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("realizations must be at least 1")


@dataclass
class RunConfig:
    seed: int = 1
    out_dir: str = "runs/default"
    env: EnvParams = field(default_factory=EnvParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    mdp: MdpConfig = field(default_factory=MdpConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    aco: AcoConfig = field(default_factory=AcoConfig)


_SECTIONS = {
    "env": EnvParams,
    "channel": ChannelParams,
    "mdp": MdpConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
    "scan": ScanConfig,
    "aco": AcoConfig,
}


def _coerce(value, reference):
    """Best-effort cast of a YAML scalar/list onto the default's type."""
    if isinstance(reference, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list, got {value!r}")
        return tuple(_coerce(v, reference[0]) if reference else v for v in value)
    if isinstance(reference, bool):
        return bool(value)
    if isinstance(reference, int) and not isinstance(reference, bool):
        return int(value)
    if isinstance(reference, float):
        return float(value)
    return value


def _build_section(cls, data, section):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    defaults = cls()
    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError(f"unknown key {key!r} in section {section!r}")
        reference = getattr(defaults, key)
        if value is None:
            kwargs[key] = None
        elif isinstance(value, str) and isinstance(reference, (int, float)) \
                and not isinstance(reference, bool):
            # PyYAML reads exponent-form floats without a signed exponent
            # (e.g. 2.0e9) as strings; accept them.
            kwargs[key] = _coerce(float(value), reference)
        else:
            kwargs[key] = _coerce(value, reference)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid section {section!r}: {exc}") from exc


def load_config(path) -> RunConfig:
    with open(path) as f:
        data = yaml.safe_load(f)
    return config_from_dict(data or {})


def config_from_dict(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    cfg = RunConfig()
    for key, value in data.items():
        if key == "seed":
            cfg.seed = int(value)
        elif key == "out_dir":
            cfg.out_dir = str(value)
        elif key in _SECTIONS:
            setattr(cfg, key, _build_section(_SECTIONS[key], value, key))
        else:
            raise ConfigError(f"unknown top-level key {key!r}")
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    out = {"seed": cfg.seed, "out_dir": cfg.out_dir}
    for section, _cls in _SECTIONS.items():
        values = dataclasses.asdict(getattr(cfg, section))
        out[section] = {
            k: (list(v) if isinstance(v, tuple) else v) for k, v in values.items()
        }
    return out


def save_config(cfg: RunConfig, path):
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=False)
