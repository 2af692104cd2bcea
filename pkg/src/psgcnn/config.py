"""Flat ``key = value`` experiment configuration.

One key per line, ``#`` starts a comment. Values are typed by the key:
integers, floats, booleans (``true``/``false``), strings, and comma-separated
float lists. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    model: str = "LV"
    nodes: int = 100
    radius: float = 0.2
    diffusivities: tuple[float, ...] = (0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10)
    diffusivity: float = 0.05
    noise: float = 10.0
    dt: float = 0.01
    horizon: float = 100.0
    lv_nonnegative: bool = True
    max_retries: int = 10
    depth: int = 4
    augment_time: bool = False
    standardize_paths: bool = False
    featurizer: str = "signature"
    trials: int = 10
    folds: int = 4
    epochs: int = 300
    learning_rate: float = 0.01
    weight_decay: float = 0.005
    radii: tuple[float, ...] = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 80.0, 100.0)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}


# The defaults of the real-data classifier differ from the simulated regressor.
CLASSIFIER_DEFAULTS = dict(learning_rate=0.001, weight_decay=0.005, standardize_paths=True)

_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def parse_value(key: str, text: str):
    if key not in _TYPES:
        raise DataError(f"unknown config key {key!r}")
    kind = _TYPES[key]
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if kind.startswith("tuple"):
            return tuple(float(x) for x in text.split(",") if x.strip())
        return text
    except ValueError:
        raise DataError(f"config key {key!r}: cannot parse {text!r} as {kind}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = parse_value(key, val)
        except DataError as exc:
            raise DataError(f"{source}:{lineno}: {exc}") from None
    return values


def load_config(path=None, base: ExperimentConfig | None = None, **overrides) -> ExperimentConfig:
    """Defaults <- ``base`` <- file ``path`` <- non-``None`` ``overrides``."""
    cfg = base or ExperimentConfig()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise DataError(f"cannot read config {p}: {exc}") from exc
        cfg = cfg.replace(**parse_config_text(text, str(p)))
    return cfg.replace(**{k: v for k, v in overrides.items() if v is not None})


def config_help() -> str:
    lines = ["config keys (key = value):"]
    for f in dataclasses.fields(ExperimentConfig):
        default = f.default
        if isinstance(default, tuple):
            default = ",".join(repr(x) for x in default)
        lines.append(f"  {f.name:<18} {f.type:<20} default {default}")
    return "\n".join(lines)
