"""Desk-scale synthetic word-image dataset with a held-out-font split.

Every sample is a word rendered in one registry font with randomized
colors, rotation, perspective jitter, noise and blur, resized to the
recognizer input resolution. Fonts assigned to the novel-font test split
never appear in training, standing in for a novel-font benchmark.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import torch
from PIL import Image, ImageDraw, ImageFilter, ImageFont

from .config import ConfigurationError, SynthConfig
from .corpus import FontRegistry, GlyphBank
from .vocab import Vocab

SPLITS = ("train", "test_seen_fonts", "test_novel_fonts")


@dataclass
class StyleParams:
    """One sampled appearance for a word rendering."""

    fg: tuple[int, int, int]
    bg: tuple[int, int, int]
    rotation_deg: float
    perspective: list[float]     # 8 corner offsets, fraction of size
    noise_std: float
    blur_radius: float
    casing: str                  # keep | upper | title


def sample_style(cfg: SynthConfig, rng: np.random.Generator) -> StyleParams:
    while True:
        fg = tuple(int(v) for v in rng.integers(0, 256, size=3))
        bg = tuple(int(v) for v in rng.integers(0, 256, size=3))
        if abs(sum(fg) - sum(bg)) / (3 * 255.0) >= cfg.min_contrast:
            break
    return StyleParams(
        fg=fg,
        bg=bg,
        rotation_deg=float(rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg)),
        perspective=[float(v) for v in rng.uniform(-cfg.max_perspective_jitter,
                                                   cfg.max_perspective_jitter, size=8)],
        noise_std=float(rng.uniform(0.0, cfg.max_noise_std)),
        blur_radius=float(rng.uniform(0.0, cfg.max_blur_radius)),
        casing=["keep", "upper", "title"][int(rng.integers(0, 3))],
    )


@dataclass
class SceneSample:
    image: np.ndarray   # (H0, W0, 3) float32 in [0, 1]
    label: str
    font_name: str
    split: str


def _apply_casing(word: str, casing: str) -> str:
    if casing == "upper":
        return word.upper()
    if casing == "title":
        return word[:1].upper() + word[1:]
    return word


def _render_once(word: str, font_path: str, style: StyleParams,
                 cfg: SynthConfig) -> np.ndarray | None:
    # render at 2x target then downsample for cheap anti-aliasing
    big_h, big_w = cfg.image_height * 2, cfg.image_width * 2
    font = ImageFont.truetype(font_path, int(big_h * 0.62))
    canvas = Image.new("RGB", (big_w, big_h), style.bg)
    draw = ImageDraw.Draw(canvas)
    left, top, right, bottom = draw.textbbox((0, 0), word, font=font)
    tw, th = max(right - left, 1), max(bottom - top, 1)
    scale = min((big_w * 0.86) / tw, (big_h * 0.74) / th, 1.0)
    if scale < 1.0:
        font = ImageFont.truetype(font_path, max(8, int(big_h * 0.62 * scale)))
        left, top, right, bottom = draw.textbbox((0, 0), word, font=font)
        tw, th = max(right - left, 1), max(bottom - top, 1)
    x = (big_w - tw) // 2 - left
    y = (big_h - th) // 2 - top
    draw.text((x, y), word, font=font, fill=style.fg)

    ink = Image.new("L", (big_w, big_h), 0)
    ImageDraw.Draw(ink).text((x, y), word, font=font, fill=255)
    if ink.getbbox() is None:
        return None

    canvas = canvas.rotate(style.rotation_deg, resample=Image.BILINEAR,
                           fillcolor=style.bg, expand=False)
    p = style.perspective
    src = [(p[0] * big_w, p[1] * big_h),
           (big_w + p[2] * big_w, p[3] * big_h),
           (big_w + p[4] * big_w, big_h + p[5] * big_h),
           (p[6] * big_w, big_h + p[7] * big_h)]
    canvas = canvas.transform((big_w, big_h), Image.QUAD,
                              [c for xy in src for c in xy],
                              resample=Image.BILINEAR, fillcolor=style.bg)
    if style.blur_radius > 0.05:
        canvas = canvas.filter(ImageFilter.GaussianBlur(style.blur_radius))
    canvas = canvas.resize((cfg.image_width, cfg.image_height), Image.BILINEAR)
    return np.asarray(canvas, dtype=np.float32) / 255.0


def synth_word_image(word: str, font_path: str, font_name: str,
                     cfg: SynthConfig, rng: np.random.Generator,
                     split: str = "train") -> SceneSample:
    """Render one labeled word image; deterministic given the rng state."""
    if len(word) > cfg.t_max:
        raise ValueError(f"word longer than t_max={cfg.t_max}: {word!r}")
    if not word:
        raise ValueError("word must be non-empty")
    style = sample_style(cfg, rng)
    cased = _apply_casing(word, style.casing)
    arr = _render_once(cased, font_path, style, cfg)
    if arr is None:
        style = sample_style(cfg, rng)   # one style resample, then give up
        cased = _apply_casing(word, style.casing)
        arr = _render_once(cased, font_path, style, cfg)
        if arr is None:
            raise RuntimeError(f"word {word!r} rendered blank twice in {font_name}")
    if style.noise_std > 0:
        arr = np.clip(arr + rng.normal(0.0, style.noise_std, arr.shape).astype(np.float32),
                      0.0, 1.0)
    return SceneSample(image=arr, label=cased, font_name=font_name, split=split)


def default_lexicon() -> list[str]:
    text = resources.files("glyphrec").joinpath("data/lexicon.txt").read_text()
    return [w for w in text.split() if w]


def load_lexicon(cfg: SynthConfig) -> list[str]:
    if cfg.lexicon_path:
        words = [w for w in Path(cfg.lexicon_path).read_text().split() if w]
    else:
        words = default_lexicon()
    words = [w for w in words if 0 < len(w) <= cfg.t_max]
    if not words:
        raise ConfigurationError("lexicon is empty after length filtering")
    return words


@dataclass
class ManifestRecord:
    path: str
    label: str
    font_name: str
    split: str


@dataclass
class DatasetManifest:
    records: list[ManifestRecord]
    config: dict
    seed: int
    train_fonts: list[str]
    novel_fonts: list[str]

    def split_records(self, split: str) -> list[ManifestRecord]:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}; expected one of {SPLITS}")
        return [r for r in self.records if r.split == split]


def generate_dataset(registry: FontRegistry, cfg: SynthConfig, seed: int,
                     out_dir: str | Path) -> DatasetManifest:
    """Generate all three splits under out_dir and write manifest.jsonl."""
    if cfg.novel_fonts < 1:
        raise ConfigurationError("novel_fonts must be >= 1; the novel-font "
                                 "evaluation is mandatory")
    if len(registry) < cfg.novel_fonts + 2:
        raise ConfigurationError(
            f"{len(registry)} fonts cannot support a disjoint split with "
            f"{cfg.novel_fonts} novel fonts and >=2 training fonts")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    names = registry.names()
    order = rng.permutation(len(names))
    novel = sorted(names[i] for i in order[:cfg.novel_fonts])
    train_fonts = sorted(names[i] for i in order[cfg.novel_fonts:])
    path_by_name = {f.display_name: f.source_path for f in registry.fonts}

    words = load_lexicon(cfg)
    plan = [("train", cfg.n_train, train_fonts),
            ("test_seen_fonts", cfg.n_test_seen, train_fonts),
            ("test_novel_fonts", cfg.n_test_novel, novel)]
    records: list[ManifestRecord] = []
    for split, count, fonts in plan:
        for i in range(count):
            word = words[int(rng.integers(0, len(words)))]
            font_name = fonts[int(rng.integers(0, len(fonts)))]
            sample_rng = np.random.default_rng(rng.integers(0, 2**63 - 1))
            sample = synth_word_image(word, path_by_name[font_name], font_name,
                                      cfg, sample_rng, split=split)
            rel = f"images/{split}_{i:06d}.png"
            img = Image.fromarray(np.round(sample.image * 255.0).astype(np.uint8))
            img.save(out_dir / rel)
            records.append(ManifestRecord(rel, sample.label, font_name, split))

    manifest = DatasetManifest(
        records=records,
        config={k: getattr(cfg, k) for k in vars(cfg)},
        seed=seed,
        train_fonts=train_fonts,
        novel_fonts=novel,
    )
    save_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    lines = [json.dumps({"type": "meta", "seed": manifest.seed,
                         "config": manifest.config,
                         "train_fonts": manifest.train_fonts,
                         "novel_fonts": manifest.novel_fonts}, sort_keys=True)]
    for r in manifest.records:
        lines.append(json.dumps({"path": r.path, "label": r.label,
                                 "font_name": r.font_name, "split": r.split},
                                sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"manifest not found: {path}")
    lines = path.read_text().splitlines()
    meta = json.loads(lines[0])
    records = [ManifestRecord(**json.loads(ln)) for ln in lines[1:] if ln.strip()]
    manifest = DatasetManifest(records=records, config=meta["config"],
                               seed=meta["seed"], train_fonts=meta["train_fonts"],
                               novel_fonts=meta["novel_fonts"])
    overlap = set(manifest.novel_fonts) & {r.font_name for r in records if r.split == "train"}
    if overlap:
        raise ConfigurationError(f"novel fonts leak into training split: {sorted(overlap)}")
    return manifest


@dataclass
class Batch:
    """One training batch with per-step glyph supervision.

    labels hold char ids then EOS then PAD (length t_max + 1). Glyph
    tensors cover the t_max character positions; glyph_mask is 1 only at
    real character steps (the EOS step carries no glyph target).
    """

    images: torch.Tensor       # (B, 3, H0, W0)
    labels: torch.Tensor       # (B, t_max + 1) int64
    texts: list[str]
    glyphs: torch.Tensor       # (B, t_max, 1, G, G)
    glyph_mask: torch.Tensor   # (B, t_max) float
    font_ids: torch.Tensor     # (B, t_max) int64, valid where glyph_mask == 1


def _load_image(root: Path, rel: str) -> np.ndarray:
    arr = np.asarray(Image.open(root / rel).convert("RGB"), dtype=np.float32) / 255.0
    return arr


def _sample_step_fonts(label: str, bank: GlyphBank, rng: np.random.Generator,
                       t_max: int):
    """Uniform font index per character step, resampling missing pairs."""
    g = bank.render_cfg.glyph_size
    glyphs = np.zeros((t_max, 1, g, g), dtype=np.float32)
    mask = np.zeros(t_max, dtype=np.float32)
    fonts = np.zeros(t_max, dtype=np.int64)
    for t, char in enumerate(label):
        fid = int(rng.integers(0, bank.num_fonts))
        if not bank.has(char, fid):
            candidates = bank.fonts_with(char)
            if not candidates:
                raise ConfigurationError(f"no font in bank covers {char!r}")
            fid = candidates[int(rng.integers(0, len(candidates)))]
        glyphs[t, 0] = bank.glyph(char, fid)
        mask[t] = 1.0
        fonts[t] = fid
    return glyphs, mask, fonts


def load_batches(manifest: DatasetManifest, root: str | Path, split: str,
                 batch_size: int, bank: GlyphBank, rng: np.random.Generator,
                 vocab: Vocab | None = None, t_max: int | None = None,
                 shuffle: bool = True):
    """Yield Batch objects over a split; last partial batch allowed."""
    vocab = vocab or Vocab()
    t_max = t_max or int(manifest.config["t_max"])
    root = Path(root)
    records = manifest.split_records(split)
    overlap = set(manifest.novel_fonts) & set(bank.registry.names())
    if split == "train" and overlap:
        raise ConfigurationError(f"glyph bank contains novel-split fonts: {sorted(overlap)}")
    order = rng.permutation(len(records)) if shuffle else np.arange(len(records))
    for start in range(0, len(records), batch_size):
        chunk = [records[i] for i in order[start:start + batch_size]]
        images = np.stack([_load_image(root, r.path) for r in chunk])
        labels = np.stack([vocab.pad_target(r.label, t_max) for r in chunk])
        per_step = [_sample_step_fonts(r.label, bank, rng, t_max) for r in chunk]
        glyphs = np.stack([p[0] for p in per_step])
        mask = np.stack([p[1] for p in per_step])
        fonts = np.stack([p[2] for p in per_step])
        yield Batch(
            images=torch.from_numpy(images).permute(0, 3, 1, 2).contiguous(),
            labels=torch.from_numpy(labels.astype(np.int64)),
            texts=[r.label for r in chunk],
            glyphs=torch.from_numpy(glyphs),
            glyph_mask=torch.from_numpy(mask),
            font_ids=torch.from_numpy(fonts),
        )
