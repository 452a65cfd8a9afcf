"""Pipeline configuration: one INI file, every tuning constant visible.

Defaults reproduce the reference recipe end-to-end, so an empty config
file is a valid run. The hash of the canonical serialization is stamped
into reports and output descriptions, tying artifacts to the exact
settings that produced them.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, fields
from pathlib import Path

from .sampling import DEFAULT_SPLIT_RATIOS


class ConfigError(ValueError):
    """Unknown keys, malformed values, or unreadable config files."""


@dataclass
class PipelineConfig:
    # paths (relative entries resolve against the workspace)
    workspace: str = "."
    scenes_dir: str = "scenes"
    label_tiles_dir: str = "label_tiles"
    downsampled_dir: str = "downsampled"
    aligned_labels_dir: str = "aligned_labels"
    patches_dir: str = "patches"
    reports_dir: str = "reports"
    legend_file: str = "legend.txt"
    blob_dir: str = ""
    # downsample
    power_domain: bool = False
    # calibration
    calibration_mode: str = "formula"
    calibration_factor: float = -83.0
    calibration_table: str = ""
    # patchify
    patch_size: int = 256
    allow_label_gaps: bool = False
    # sampling
    sample_points: int = 400
    filter_forest: bool = True
    split_train: float = DEFAULT_SPLIT_RATIOS["train"]
    split_val: float = DEFAULT_SPLIT_RATIOS["val"]
    split_test: float = DEFAULT_SPLIT_RATIOS["test"]
    # masking
    token_size: int = 32
    mask_ratio: float = 0.6
    # recon loss weight map
    intensity_decay: float = 1.0
    intensity_mean: float = 0.0
    intensity_std: float = 1.0
    normalize_weights: bool = True
    # schedules
    pretrain_base_lr: float = 1e-4
    pretrain_min_lr: float = 5e-7
    pretrain_epochs: int = 800
    pretrain_warmup_epochs: int = 40
    finetune_base_lr: float = 1.25e-4
    finetune_min_lr: float = 2.5e-7
    finetune_epochs: int = 100
    finetune_warmup_epochs: int = 20
    # segmentation loss
    dice_weight: float = 0.32
    focal_weight: float = 0.57
    gamma: float = 1.1
    alpha: float = 0.35
    epsilon: float = 1e-6
    dice_denominator: str = "conventional_sums"


SECTION_FIELDS = {
    "paths": (
        "workspace", "scenes_dir", "label_tiles_dir", "downsampled_dir",
        "aligned_labels_dir", "patches_dir", "reports_dir", "legend_file",
        "blob_dir",
    ),
    "downsample": ("power_domain",),
    "calibration": ("calibration_mode", "calibration_factor", "calibration_table"),
    "patchify": ("patch_size", "allow_label_gaps"),
    "sampling": (
        "sample_points", "filter_forest", "split_train", "split_val", "split_test",
    ),
    "masking": ("token_size", "mask_ratio"),
    "recon_loss": (
        "intensity_decay", "intensity_mean", "intensity_std", "normalize_weights",
    ),
    "schedule": (
        "pretrain_base_lr", "pretrain_min_lr", "pretrain_epochs",
        "pretrain_warmup_epochs", "finetune_base_lr", "finetune_min_lr",
        "finetune_epochs", "finetune_warmup_epochs",
    ),
    "seg_loss": (
        "dice_weight", "focal_weight", "gamma", "alpha", "epsilon",
        "dice_denominator",
    ),
}

_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _parse_value(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    try:
        if kind == "bool":
            lowered = raw.strip().lower()
            if lowered in ("true", "yes", "on", "1"):
                return True
            if lowered in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from exc


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def default_config() -> PipelineConfig:
    return PipelineConfig()


def serialize_config(cfg: PipelineConfig) -> str:
    """Canonical INI text: fixed section and key order, repr'd floats."""
    out = io.StringIO()
    for section, names in SECTION_FIELDS.items():
        out.write(f"[{section}]\n")
        for name in names:
            out.write(f"{name} = {_format_value(getattr(cfg, name))}\n")
        out.write("\n")
    return out.getvalue()


def save_config(cfg: PipelineConfig, path) -> None:
    Path(path).write_text(serialize_config(cfg), encoding="ascii")


def load_config(path) -> PipelineConfig:
    """Read an INI config; omitted keys keep their defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        text = Path(path).read_text(encoding="utf-8")
        parser.read_string(text)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    cfg = PipelineConfig()
    for section in parser.sections():
        if section not in SECTION_FIELDS:
            raise ConfigError(f"unknown config section [{section}]")
        allowed = set(SECTION_FIELDS[section])
        for key, raw in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            setattr(cfg, key, _parse_value(key, raw))
    _validate(cfg)
    return cfg


def _validate(cfg: PipelineConfig) -> None:
    if cfg.patch_size <= 0:
        raise ConfigError("patch_size must be positive")
    if not 0.0 <= cfg.mask_ratio <= 1.0:
        raise ConfigError("mask_ratio must lie in [0, 1]")
    if cfg.token_size <= 0:
        raise ConfigError("token_size must be positive")
    if cfg.calibration_mode not in ("formula", "lookup"):
        raise ConfigError(f"unknown calibration_mode {cfg.calibration_mode!r}")
    if cfg.calibration_mode == "lookup" and not cfg.calibration_table:
        raise ConfigError("lookup calibration needs calibration_table")
    if cfg.dice_denominator not in ("conventional_sums", "max_union"):
        raise ConfigError(f"unknown dice_denominator {cfg.dice_denominator!r}")
    for name in ("split_train", "split_val", "split_test"):
        if getattr(cfg, name) < 0:
            raise ConfigError(f"{name} must be non-negative")
    if cfg.split_train + cfg.split_val + cfg.split_test <= 0:
        raise ConfigError("split ratios sum to zero")
    if cfg.sample_points < 0:
        raise ConfigError("sample_points must be non-negative")


def config_hash(cfg: PipelineConfig) -> str:
    """Short digest of the canonical serialization."""
    digest = hashlib.sha256(serialize_config(cfg).encode("ascii")).hexdigest()
    return digest[:12]


def resolve_path(cfg: PipelineConfig, name: str) -> Path:
    """A path field resolved against the workspace directory."""
    value = Path(getattr(cfg, name))
    if value.is_absolute():
        return value
    return Path(cfg.workspace) / value
