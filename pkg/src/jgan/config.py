"""Run configuration files: INI-style, one ``key = value`` per line, sections per module.

    [trainer]
    mode = joint
    noise_ratio = 0.4

    [data]
    source = mixture
"""

from __future__ import annotations

import configparser
import io
from dataclasses import asdict, dataclass, fields

from .errors import ConfigurationError
from .trainer import TrainConfig

DATA_SOURCES = ("cifar10", "cifar100", "stl", "mixture", "dir")


@dataclass
class DataConfig:
    source: str = "mixture"
    path: str = ""
    split: str = "train"
    target_size: int = 48
    weak_labels: str = ""
    mixture_k: int = 8
    mixture_radius: float = 2.0
    mixture_stddev: float = 0.05
    mixture_n: int = 10_000
    mixture_seed: int = 0

    def __post_init__(self):
        if self.source not in DATA_SOURCES:
            raise ConfigurationError(f"data source must be one of {DATA_SOURCES}, got {self.source!r}")


SECTIONS = {"trainer": TrainConfig, "data": DataConfig}


def _coerce(cls, key, raw):
    types = {f.name: type(getattr(cls(), f.name)) for f in fields(cls)}
    if key not in types:
        raise ConfigurationError(f"unknown key {key!r} for section of {cls.__name__}")
    kind = types[key]
    try:
        if kind is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return kind(raw)
    except ValueError as exc:
        raise ConfigurationError(f"bad value {raw!r} for {key}: {exc}") from exc


def parse_config_text(text: str) -> dict[str, dict]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc
    out: dict[str, dict] = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigurationError(f"unknown config section [{section}]")
        cls = SECTIONS[section]
        out[section] = {k: _coerce(cls, k, v) for k, v in parser.items(section)}
    return out


def load_config(path) -> dict[str, dict]:
    with open(path) as f:
        return parse_config_text(f.read())


def resolve(file_values: dict[str, dict], overrides: dict[str, dict]) -> tuple[TrainConfig, DataConfig]:
    """File values first, then non-None overrides on top."""
    merged = {}
    for section in SECTIONS:
        merged[section] = dict(file_values.get(section, {}))
        merged[section].update({k: v for k, v in overrides.get(section, {}).items() if v is not None})
    return TrainConfig(**merged["trainer"]), DataConfig(**merged["data"])


def dump_config(train: TrainConfig, data: DataConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for name, obj in (("trainer", train), ("data", data)):
        parser[name] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in asdict(obj).items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
