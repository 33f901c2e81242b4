"""Flat dotted-key configuration shared by the CLI subcommands.

Config files hold one `key = value` assignment per line (`#` starts a
comment). Every key maps onto a field of one of the module configs and is
validated by that module's own invariants when the config is built; unknown
keys are rejected. A dumped effective config reloads to an identical value.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .fusion import FusionConfig
from .separator import CutParams
from .side_loss import LossHyperparams
from .simulator import SimConfig


class ConfigError(ValueError):
    """Invalid configuration key, value, or combination."""


@dataclass(frozen=True)
class ToolConfig:
    """Merged view of every module's knobs plus the global seed."""

    seed: int = 0
    conf_thr: float = 0.7  # crop-extraction confidence floor
    size_buckets: bool = True  # evaluator area buckets on/off
    sim: SimConfig = field(default_factory=SimConfig)
    cut: CutParams = field(default_factory=CutParams)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    loss: LossHyperparams = field(default_factory=lambda: LossHyperparams(num_cls=4))

    def __post_init__(self) -> None:
        if not 0.0 <= self.conf_thr:
            raise ConfigError(f"conf_thr must be >= 0, got {self.conf_thr}")


# key -> (section, field, type); section "" is ToolConfig itself
_KEYS: dict[str, tuple[str, str, type]] = {
    "seed": ("", "seed", int),
    "extract.conf_thr": ("", "conf_thr", float),
    "eval.size_buckets": ("", "size_buckets", bool),
    "sim.total_figures": ("sim", "total_figures", int),
    "sim.intra_figures": ("sim", "intra_figures", int),
    "sim.n_min": ("sim", "n_range:0", int),
    "sim.n_max": ("sim", "n_range:1", int),
    "sim.band_min": ("sim", "band_extent_range:0", int),
    "sim.band_max": ("sim", "band_extent_range:1", int),
    "sim.gutter": ("sim", "gutter", int),
    "sim.background": ("sim", "background", str),
    "sim.max_layout_retries": ("sim", "max_layout_retries", int),
    "cut.background_tolerance": ("cut", "background_tolerance", float),
    "cut.min_gap": ("cut", "min_gap", int),
    "cut.min_region": ("cut", "min_region", int),
    "cut.max_depth": ("cut", "max_depth", int),
    "cut.confidence": ("cut", "confidence", float),
    "fuse.iou_thr": ("fuse", "iou_thr", float),
    "fuse.skip_box_thr": ("fuse", "skip_box_thr", float),
    "fuse.conf_scaling": ("fuse", "conf_scaling", str),
    "loss.box": ("loss", "box", float),
    "loss.obj": ("loss", "obj", float),
    "loss.cls": ("loss", "cls", float),
    "loss.nl": ("loss", "nl", int),
    "loss.imgsize": ("loss", "imgsize", float),
    "loss.num_cls": ("loss", "num_cls", int),
}


def _parse_value(key: str, text: str, kind: type):
    text = text.strip()
    if kind is bool:
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    try:
        return kind(text)
    except ValueError as e:
        raise ConfigError(f"{key}: {e}") from e


def _flatten(cfg: ToolConfig) -> dict[str, object]:
    values: dict[str, object] = {}
    sections = {"": cfg, "sim": cfg.sim, "cut": cfg.cut, "fuse": cfg.fusion, "loss": cfg.loss}
    for key, (section, fname, _) in _KEYS.items():
        obj = sections[section]
        if ":" in fname:
            attr, idx = fname.split(":")
            values[key] = getattr(obj, attr)[int(idx)]
        else:
            values[key] = getattr(obj, fname)
    return values


def _build(values: dict[str, object]) -> ToolConfig:
    by_section: dict[str, dict[str, object]] = {"": {}, "sim": {}, "cut": {}, "fuse": {}, "loss": {}}
    pairs: dict[tuple[str, str], dict[int, object]] = {}
    for key, value in values.items():
        section, fname, _ = _KEYS[key]
        if ":" in fname:
            attr, idx = fname.split(":")
            pairs.setdefault((section, attr), {})[int(idx)] = value
        else:
            by_section[section][fname] = value
    for (section, attr), parts in pairs.items():
        by_section[section][attr] = (parts[0], parts[1])
    try:
        return ToolConfig(
            sim=SimConfig(**by_section["sim"]),
            cut=CutParams(**by_section["cut"]),
            fusion=FusionConfig(**by_section["fuse"]),
            loss=LossHyperparams(**by_section["loss"]),
            **by_section[""],
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e


def load_config(
    path: "Path | str | None" = None,
    overrides: "dict[str, object] | None" = None,
) -> ToolConfig:
    """Build a ToolConfig from defaults, an optional file, then overrides.

    Override values may be already-typed Python values (e.g. from CLI flags)
    or strings to be parsed like file values.
    """
    values = _flatten(ToolConfig())
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(key, value, _KEYS[key][2])
    for key, value in (overrides or {}).items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if value is None:
            continue
        if isinstance(value, str) and _KEYS[key][2] is not str:
            value = _parse_value(key, value, _KEYS[key][2])
        values[key] = value
    return _build(values)


def dump_config(cfg: ToolConfig) -> str:
    """Render the effective configuration as a reloadable key = value file."""
    values = _flatten(cfg)
    lines = []
    for key in sorted(values):
        v = values[key]
        if isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


def with_fusion_weights(cfg: ToolConfig, weights: "tuple[float, ...] | None") -> FusionConfig:
    """Fusion config with per-model weights applied (weights are CLI-only)."""
    if weights is None:
        return cfg.fusion
    return replace(cfg.fusion, model_weights=weights)
