"""Run configuration: flat ``key = value`` files with typed validation.

Blank lines and ``#`` comments are ignored. Lists are comma separated.
Command-line ``--set key=value`` overrides are applied on top of the file.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .network import ConfigError, NetworkConfig


def _ints(v: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(v).replace(" ", "").split(",") if x)


@dataclass
class RunConfig:
    train_data: str = ""
    test_data: str = ""
    encoding: str = "binary"
    output_dir: str = "runs"
    layer_sizes: tuple[int, ...] = (8000,)
    neuron_kind: str = "gate"
    lut_inputs: int = 2
    temperature: float = 35.0
    seeds: tuple[int, ...] = (0,)
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 100
    heldout_size: int = 1000

    _PARSERS = {
        "layer_sizes": _ints, "seeds": _ints,
        "lut_inputs": int, "epochs": int, "batch_size": int, "heldout_size": int,
        "temperature": float, "learning_rate": float,
    }

    def validate(self) -> "RunConfig":
        if self.encoding not in ("binary", "rate"):
            raise ConfigError(f"encoding must be 'binary' or 'rate', got {self.encoding!r}")
        if not self.train_data:
            raise ConfigError("train_data is required")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.heldout_size < 0:
            raise ConfigError("heldout_size must be >= 0")
        # Surface network-level errors before any data is read; the class
        # count is only known once the labels are loaded.
        self.network_config(self.seeds[0], input_width=1, num_classes=1)
        return self

    def network_config(self, seed: int, input_width: int, num_classes: int) -> NetworkConfig:
        return NetworkConfig(
            layer_sizes=self.layer_sizes, input_width=input_width, num_classes=num_classes,
            neuron_kind=self.neuron_kind, lut_inputs=self.lut_inputs,
            temperature=self.temperature, seed=seed, learning_rate=self.learning_rate,
            epochs=self.epochs, batch_size=self.batch_size)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


def _known_keys() -> set[str]:
    return {f.name for f in dataclasses.fields(RunConfig)}


def apply_settings(cfg: RunConfig, items: dict[str, str], source: str = "config") -> RunConfig:
    unknown = set(items) - _known_keys()
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    for key, raw in items.items():
        parse = RunConfig._PARSERS.get(key, str)
        try:
            setattr(cfg, key, parse(raw))
        except ValueError as exc:
            raise ConfigError(f"{source}: bad value for {key}: {raw!r} ({exc})") from exc
    return cfg


def parse_config_text(text: str, source: str = "config") -> dict[str, str]:
    items = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in items:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        items[key] = value
    return items


def load_run_config(path, overrides: list[str] | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = apply_settings(RunConfig(), parse_config_text(text, str(path)), str(path))
    extra = {}
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        extra[k.strip()] = v.strip()
    apply_settings(cfg, extra, "--set")
    base = path.parent
    for key in ("train_data", "test_data", "output_dir"):
        val = getattr(cfg, key)
        if val and not val.startswith("idx:") and not Path(val).is_absolute():
            setattr(cfg, key, str(base / val))
        elif val.startswith("idx:"):
            d, split = parse_idx_spec(val)
            if not Path(d).is_absolute():
                setattr(cfg, key, f"idx:{base / d}:{split}")
    return cfg.validate()


def parse_idx_spec(spec: str) -> tuple[str, str]:
    """``idx:DIR:train|test`` (split defaults to train)."""
    body = spec[4:]
    d, sep, split = body.rpartition(":")
    if not sep or split not in ("train", "test"):
        d, split = body, "train"
    if not d:
        raise ConfigError(f"bad IDX data spec {spec!r}")
    return d, split
