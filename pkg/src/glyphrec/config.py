"""Dataclass configs for every pipeline stage plus INI-file round-tripping.

The on-disk format is flat ``[section] key = value`` INI, one section per
pipeline stage, so run configs stay hand-editable and diffable. Every run
directory receives a snapshot of its effective config.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

DIGITS = "0123456789"
UPPER = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
LOWER = "abcdefghijklmnopqrstuvwxyz"
DEFAULT_CHARSET = DIGITS + UPPER + LOWER  # 62 classes; case kept for glyph targets

DEVICE_ENV_VAR = "GLYPHREC_DEVICE"


class ConfigurationError(Exception):
    """Invalid or inconsistent configuration."""


@dataclass
class RenderConfig:
    """Glyph rasterization parameters (corpus stage)."""

    charset: str = DEFAULT_CHARSET
    font_size: int = 64        # nominal rasterization size before downscale
    glyph_size: int = 32       # final square glyph resolution
    pad_frac: float = 0.08     # margin around the tight ink box, fraction of box side


@dataclass
class SynthConfig:
    """Synthetic word-image generation (synthgen stage)."""

    image_height: int = 48
    image_width: int = 160
    t_max: int = 16                 # max label length / decode steps
    n_train: int = 5000
    n_test_seen: int = 500
    n_test_novel: int = 200
    novel_fonts: int = 2            # fonts held out of training entirely
    lexicon_path: str = ""          # empty -> bundled lexicon
    max_rotation_deg: float = 10.0
    max_perspective_jitter: float = 0.06   # corner displacement, fraction of size
    max_noise_std: float = 0.04
    max_blur_radius: float = 1.2
    min_contrast: float = 0.25      # min |fg-bg| mean intensity gap


@dataclass
class BackboneConfig:
    """Residual CNN feature extractor."""

    channels: tuple[int, ...] = (32, 64, 128, 256)  # block1..block4 widths
    feat_channels: int = 256                        # top-level width C (block5)
    units_per_block: tuple[int, ...] = (1, 1, 2, 2, 2)


@dataclass
class AttnConfig:
    """LSTM encoder/decoder and 2D attention."""

    hidden_size: int = 512
    attn_dim: int = 512
    num_layers: int = 2


@dataclass
class GlyphConfig:
    """Glyph generator / discriminator and font embeddings."""

    embed_dim: int = 128            # font embedding width
    skip_channels: int = 32         # per-scale FC skip output channels
    skips: bool = True
    glyph_source: str = "glimpse"   # glimpse | pooled | encoder
    glyph_size: int = 32


@dataclass
class TrainConfig:
    """Composite loss weights, optimizer schedule, and branch switches."""

    alpha: float = 0.01             # adversarial weight
    lr0: float = 1e-3
    lr_decay: float = 0.9
    decay_interval: int = 500       # staircase period, iterations
    lr_floor: float = 1e-5
    batch_size: int = 16
    iterations: int = 2000
    clip_norm: float = 5.0
    l1_reduction: str = "mean"      # per-glyph pixel mean; "sum" also runnable
    adversarial: bool = True
    trainable_embeddings: bool = True   # TFE vs FFE
    glyph_generation: bool = True       # False = recognition-only (-GG/-GD)
    log_interval: int = 10
    checkpoint_interval: int = 500
    snapshot_interval: int = 100    # embedding-table snapshot period

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError("train.alpha must be >= 0")
        if self.lr_floor >= self.lr0:
            raise ConfigurationError("train.lr_floor must be below train.lr0")


@dataclass
class EvalConfig:
    batch_size: int = 32
    l1_seed: int = 123    # font sampling for per-font L1 report


@dataclass
class RunConfig:
    """Merged snapshot of all stage configs plus run identity."""

    run_id: str = "run"
    seed: int = 0
    render: RenderConfig = field(default_factory=RenderConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    attn: AttnConfig = field(default_factory=AttnConfig)
    glyph: GlyphConfig = field(default_factory=GlyphConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    _SECTIONS = {
        "corpus": "render",
        "synthgen": "synth",
        "backbone": "backbone",
        "attnseq": "attn",
        "glyphgan": "glyph",
        "training": "train",
        "evalviz": "eval",
    }


def small_preset() -> RunConfig:
    """CPU-friendly config: same architecture, reduced widths."""
    cfg = RunConfig()
    cfg.backbone = BackboneConfig(channels=(16, 32, 64, 128), feat_channels=128,
                                  units_per_block=(1, 1, 1, 1, 1))
    cfg.attn = AttnConfig(hidden_size=256, attn_dim=128)
    return cfg


def _parse_value(text: str, kind):
    if kind is bool or kind == "bool":
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind is str:
        return text
    # tuples of ints, e.g. "32,64,128,256"
    if kind is tuple or str(kind).startswith("tuple"):
        return tuple(int(tok) for tok in text.replace("(", "").replace(")", "").split(",") if tok.strip())
    raise ConfigurationError(f"unsupported config field type {kind!r}")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    parser = configparser.ConfigParser()
    parser["run"] = {"run_id": cfg.run_id, "seed": str(cfg.seed)}
    for section, attr in RunConfig._SECTIONS.items():
        sub = getattr(cfg, attr)
        parser[section] = {f.name: _format_value(getattr(sub, f.name)) for f in fields(sub)}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        parser.write(fh)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)
    cfg = RunConfig()
    if parser.has_section("run"):
        cfg.run_id = parser.get("run", "run_id", fallback=cfg.run_id)
        cfg.seed = parser.getint("run", "seed", fallback=cfg.seed)
    for section, attr in RunConfig._SECTIONS.items():
        if not parser.has_section(section):
            continue
        sub = getattr(cfg, attr)
        known = {f.name: f for f in fields(sub)}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigurationError(f"unknown config field: {section}.{key}")
            hint = known[key].type if isinstance(known[key].type, type) else str(known[key].type)
            setattr(sub, key, _parse_value(raw, type(getattr(sub, key)) if getattr(sub, key) is not None else hint))
    # re-validate dataclass constraints touched by overrides
    cfg.train.__post_init__()
    return cfg


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    """Apply ``section.key=value`` strings on top of a config."""
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigurationError(f"override must look like section.key=value, got {item!r}")
        dotted, value = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if section == "run":
            if key == "seed":
                cfg.seed = int(value)
            elif key == "run_id":
                cfg.run_id = value
            else:
                raise ConfigurationError(f"unknown config field: run.{key}")
            continue
        if section not in RunConfig._SECTIONS:
            raise ConfigurationError(f"unknown config section: {section}")
        sub = getattr(cfg, RunConfig._SECTIONS[section])
        if not hasattr(sub, key):
            raise ConfigurationError(f"unknown config field: {section}.{key}")
        setattr(sub, key, _parse_value(value, type(getattr(sub, key))))
    cfg.train.__post_init__()
    return cfg


def config_identity(cfg: RunConfig) -> str:
    """Stable textual identity of a config, for report provenance."""
    parts = [f"run_id={cfg.run_id}", f"seed={cfg.seed}"]
    for section, attr in sorted(RunConfig._SECTIONS.items()):
        sub = getattr(cfg, attr)
        for f in sorted(fields(sub), key=lambda f: f.name):
            parts.append(f"{section}.{f.name}={_format_value(getattr(sub, f.name))}")
    return ";".join(parts)


def resolve_device(default: str | None = None) -> str:
    """Device selection: env var wins, else CUDA when present, else CPU."""
    env = os.environ.get(DEVICE_ENV_VAR)
    if env:
        return env
    if default is not None:
        return default
    import torch

    return "cuda" if torch.cuda.is_available() else "cpu"


def clone_config(cfg: RunConfig) -> RunConfig:
    out = RunConfig(run_id=cfg.run_id, seed=cfg.seed)
    for attr in RunConfig._SECTIONS.values():
        setattr(out, attr, dataclasses.replace(getattr(cfg, attr)))
    return out
