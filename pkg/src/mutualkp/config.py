"""Training configuration and its flat key=value file format.

Config files hold one ``key=value`` per line with dotted keys (for example
``loss.mutual_target=input``); '#' comments and blank lines are skipped.
Values round-trip losslessly: floats are emitted with repr.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ParseError

MUTUAL_DIRECTIONS = ("standard", "mirrored")
MUTUAL_TARGETS = ("input", "self_rec")


def _parse_pairs(text: str):
    if text == "auto":
        return None
    return int(text)


@dataclass
class TrainConfig:
    category: str = "synthetic"
    k: int = 10
    points_per_cloud: int = 2048
    epochs: int = 80
    pairs_per_epoch: int | None = None  # None -> floor(dataset/2)
    lambda_self: float = 0.5
    lambda_mutual: float = 0.5
    mu_skeleton: float = 0.01
    mu_keypoint: float = 0.01
    learning_rate: float = 1e-3
    grad_clip: float = 5.0
    seed: int = 0
    mutual_direction: str = "standard"
    mutual_target: str = "input"
    spacing: float = 0.05
    cap_per_segment: int = 64
    sa1_points: int = 512
    sa1_radius: float = 0.2
    sa1_neighbors: int = 32
    sa2_points: int = 128
    sa2_radius: float = 0.4
    sa2_neighbors: int = 32
    offset_feature_dim: int = 64

    def __post_init__(self):
        for name in ("k", "points_per_cloud", "epochs", "cap_per_segment",
                     "sa1_points", "sa1_neighbors", "sa2_points", "sa2_neighbors",
                     "offset_feature_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if self.pairs_per_epoch is not None and self.pairs_per_epoch < 1:
            raise ValueError("pairs_per_epoch must be >= 1 (or auto)")
        for name in ("lambda_self", "lambda_mutual", "mu_skeleton", "mu_keypoint",
                     "learning_rate", "grad_clip"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("spacing", "sa1_radius", "sa2_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.mutual_direction not in MUTUAL_DIRECTIONS:
            raise ValueError(f"mutual.direction must be one of {MUTUAL_DIRECTIONS}")
        if self.mutual_target not in MUTUAL_TARGETS:
            raise ValueError(f"loss.mutual_target must be one of {MUTUAL_TARGETS}")


# attribute -> (file key, parse, format)
_FIELD_KEYS = {
    "category": ("category", str, str),
    "k": ("k", int, str),
    "points_per_cloud": ("points_per_cloud", int, str),
    "epochs": ("epochs", int, str),
    "pairs_per_epoch": ("pairs_per_epoch", _parse_pairs,
                        lambda v: "auto" if v is None else str(v)),
    "lambda_self": ("lambda_self", float, repr),
    "lambda_mutual": ("lambda_mutual", float, repr),
    "mu_skeleton": ("mu_skeleton", float, repr),
    "mu_keypoint": ("mu_keypoint", float, repr),
    "learning_rate": ("learning_rate", float, repr),
    "grad_clip": ("grad_clip", float, repr),
    "seed": ("seed", int, str),
    "mutual_direction": ("mutual.direction", str, str),
    "mutual_target": ("loss.mutual_target", str, str),
    "spacing": ("skeleton.spacing", float, repr),
    "cap_per_segment": ("skeleton.cap_per_segment", int, str),
    "sa1_points": ("encoder.sa1_points", int, str),
    "sa1_radius": ("encoder.sa1_radius", float, repr),
    "sa1_neighbors": ("encoder.sa1_neighbors", int, str),
    "sa2_points": ("encoder.sa2_points", int, str),
    "sa2_radius": ("encoder.sa2_radius", float, repr),
    "sa2_neighbors": ("encoder.sa2_neighbors", int, str),
    "offset_feature_dim": ("encoder.offset_dim", int, str),
}

_KEY_TO_ATTR = {key: attr for attr, (key, _, _) in _FIELD_KEYS.items()}

assert set(_FIELD_KEYS) == {f.name for f in fields(TrainConfig)}


def config_keys() -> list[str]:
    return sorted(_KEY_TO_ATTR)


def format_config(config: TrainConfig) -> str:
    lines = []
    for attr, (key, _, fmt) in _FIELD_KEYS.items():
        lines.append(f"{key}={fmt(getattr(config, attr))}")
    return "\n".join(lines) + "\n"


def _set_entry(values: dict, key: str, raw: str, where: str, line_no: int):
    attr = _KEY_TO_ATTR.get(key)
    if attr is None:
        raise ParseError(where, line_no,
                         f"unknown config key {key!r}; valid keys: {', '.join(config_keys())}")
    _, parse, _ = _FIELD_KEYS[attr]
    try:
        values[attr] = parse(raw)
    except ValueError as exc:
        raise ParseError(where, line_no, f"bad value for {key!r}: {raw!r}") from exc


def parse_config(text: str, where: str = "<config>",
                 base: TrainConfig | None = None) -> TrainConfig:
    values = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(where, no, f"expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        _set_entry(values, key.strip(), value.strip(), where, no)
    merged = {f.name: getattr(base, f.name) for f in fields(TrainConfig)} if base else {}
    merged.update(values)
    return TrainConfig(**merged)


def load_config(path) -> TrainConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), where=str(path))


def apply_overrides(config: TrainConfig, overrides: list[str]) -> TrainConfig:
    """Apply CLI 'key=value' overrides on top of an existing config."""
    text = []
    for ov in overrides:
        if "=" not in ov:
            raise ValueError(f"override must be key=value, got {ov!r}")
        text.append(ov)
    return parse_config("\n".join(text), where="<override>", base=config)


def config_to_dict(config: TrainConfig) -> dict:
    return {key: getattr(config, attr) for attr, (key, _, _) in _FIELD_KEYS.items()}


def config_from_dict(data: dict) -> TrainConfig:
    values = {}
    for key, value in data.items():
        attr = _KEY_TO_ATTR.get(key)
        if attr is None:
            raise ValueError(f"unknown config key {key!r}")
        values[attr] = value
    return TrainConfig(**values)
