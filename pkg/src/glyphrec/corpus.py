"""Font loading and per-character glyph rasterization.

Glyph targets are rendered dark-ink-on-white at a nominal font size,
tightly cropped, padded to a centered square, and resized to 32x32 floats
in [0, 1]. Rendering is a pure function of (char, font bytes, render
params), so banks are reproducible byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fontTools.ttLib import TTFont
from PIL import Image, ImageDraw, ImageFont

from .config import ConfigurationError, RenderConfig

log = logging.getLogger(__name__)

FONT_EXTENSIONS = (".ttf", ".otf")


class MissingGlyphError(Exception):
    """The font has no glyph for the requested codepoint."""


@dataclass(frozen=True)
class FontEntry:
    font_id: int
    display_name: str
    source_path: str


@dataclass
class FontRegistry:
    """Dense, filename-sorted registry of loadable fonts."""

    fonts: list[FontEntry]
    skipped: list[str] = field(default_factory=list)  # unreadable files, for the report

    def __len__(self) -> int:
        return len(self.fonts)

    def path(self, font_id: int) -> str:
        return self.fonts[font_id].source_path

    def name(self, font_id: int) -> str:
        return self.fonts[font_id].display_name

    def names(self) -> list[str]:
        return [f.display_name for f in self.fonts]

    def subset(self, names: list[str]) -> "FontRegistry":
        """Dense re-indexed registry over the named fonts (sorted by name)."""
        by_name = {f.display_name: f for f in self.fonts}
        missing = [n for n in names if n not in by_name]
        if missing:
            raise ConfigurationError(f"fonts not in registry: {missing}")
        picked = sorted(set(names))
        entries = [FontEntry(i, n, by_name[n].source_path) for i, n in enumerate(picked)]
        if len(entries) < 2:
            raise ConfigurationError("a registry needs at least 2 fonts")
        return FontRegistry(fonts=entries)


def _loadable(path: Path) -> bool:
    try:
        ImageFont.truetype(str(path), 24)
        TTFont(str(path), fontNumber=0, lazy=True).getBestCmap()
        return True
    except Exception:
        return False


def register_fonts(font_dir: str | Path) -> FontRegistry:
    """Scan a directory for font files; ids follow filename sort order."""
    font_dir = Path(font_dir)
    if not font_dir.is_dir():
        raise ConfigurationError(f"font directory not found: {font_dir}")
    entries: list[FontEntry] = []
    skipped: list[str] = []
    for path in sorted(font_dir.iterdir(), key=lambda p: p.name):
        if path.suffix.lower() not in FONT_EXTENSIONS:
            continue
        if not _loadable(path):
            log.warning("skipping unreadable font file: %s", path)
            skipped.append(path.name)
            continue
        entries.append(FontEntry(len(entries), path.stem, str(path)))
    if len(entries) < 2:
        raise ConfigurationError(
            f"need at least 2 loadable fonts in {font_dir}, found {len(entries)}"
        )
    return FontRegistry(fonts=entries, skipped=skipped)


def _codepoint_covered(font_path: str, char: str, _cache: dict = {}) -> bool:
    cmap = _cache.get(font_path)
    if cmap is None:
        cmap = TTFont(font_path, fontNumber=0, lazy=True).getBestCmap()
        _cache[font_path] = cmap
    return ord(char) in cmap


@dataclass
class GlyphImage:
    """32x32 single-channel glyph, white background, ink near 0."""

    pixels: np.ndarray  # (glyph_size, glyph_size) float32 in [0, 1]
    char: str
    font_id: int


def render_glyph(char: str, font_id: int, registry: FontRegistry,
                 cfg: RenderConfig | None = None) -> GlyphImage:
    """Rasterize one character in one font to the canonical glyph format.

    Raises MissingGlyphError when the font's character map has no entry
    for the codepoint (tofu fallbacks would otherwise pass silently).
    """
    cfg = cfg or RenderConfig()
    if len(char) != 1:
        raise ValueError(f"expected a single character, got {char!r}")
    path = registry.path(font_id)
    if not _codepoint_covered(path, char):
        raise MissingGlyphError(f"U+{ord(char):04X} not in font {registry.name(font_id)}")

    font = ImageFont.truetype(path, cfg.font_size)
    canvas_side = cfg.font_size * 3  # roomy; we crop to ink afterwards
    canvas = Image.new("L", (canvas_side, canvas_side), 255)
    draw = ImageDraw.Draw(canvas)
    draw.text((canvas_side // 2, canvas_side // 2), char, font=font, fill=0, anchor="mm")

    arr = np.asarray(canvas)
    ink_rows = np.where((arr < 255).any(axis=1))[0]
    ink_cols = np.where((arr < 255).any(axis=0))[0]
    if ink_rows.size == 0:
        raise MissingGlyphError(f"U+{ord(char):04X} rendered blank in {registry.name(font_id)}")
    top, bottom = int(ink_rows[0]), int(ink_rows[-1]) + 1
    left, right = int(ink_cols[0]), int(ink_cols[-1]) + 1
    tight = canvas.crop((left, top, right, bottom))

    # pad the tight box to a centered square so size variance survives
    # across fonts but position variance does not
    w, h = tight.size
    side = max(w, h)
    side = side + max(2, int(round(2 * cfg.pad_frac * side)))
    square = Image.new("L", (side, side), 255)
    square.paste(tight, ((side - w) // 2, (side - h) // 2))

    small = square.resize((cfg.glyph_size, cfg.glyph_size), Image.BILINEAR)
    pixels = np.asarray(small, dtype=np.float32) / 255.0
    return GlyphImage(pixels=pixels, char=char, font_id=font_id)


@dataclass
class GlyphBank:
    """Complete (char, font) -> glyph table, with an explicit missing set."""

    table: dict[tuple[str, int], np.ndarray]
    charset: str
    registry: FontRegistry
    missing: set[tuple[str, int]]
    render_cfg: RenderConfig

    @property
    def num_fonts(self) -> int:
        return len(self.registry)

    def glyph(self, char: str, font_id: int) -> np.ndarray:
        key = (char, font_id)
        if key in self.missing:
            raise MissingGlyphError(f"({char!r}, font {font_id}) recorded missing")
        return self.table[key]

    def has(self, char: str, font_id: int) -> bool:
        return (char, font_id) in self.table

    def fonts_with(self, char: str) -> list[int]:
        return [f.font_id for f in self.registry.fonts if self.has(char, f.font_id)]


def build_glyph_bank(charset: str, registry: FontRegistry,
                     cfg: RenderConfig | None = None) -> GlyphBank:
    """Render every (char, font) pair, recording absent codepoints."""
    cfg = cfg or RenderConfig()
    if not charset:
        raise ConfigurationError("charset must be non-empty")
    table: dict[tuple[str, int], np.ndarray] = {}
    missing: set[tuple[str, int]] = set()
    for entry in registry.fonts:
        absent = 0
        for char in charset:
            try:
                table[(char, entry.font_id)] = render_glyph(char, entry.font_id, registry, cfg).pixels
            except MissingGlyphError:
                missing.add((char, entry.font_id))
                absent += 1
        if absent > len(charset) / 2:
            log.warning("font %s is missing %d/%d charset glyphs",
                        entry.display_name, absent, len(charset))
    return GlyphBank(table=table, charset=charset, registry=registry,
                     missing=missing, render_cfg=cfg)


def save_glyph_bank(bank: GlyphBank, out_dir: str | Path) -> str:
    """Persist as glyphs/<font_id>/u<hex>.png plus an index manifest.

    Returns the sha256 of the manifest text (stable across reruns).
    """
    out_dir = Path(out_dir)
    for (char, font_id), pixels in bank.table.items():
        font_sub = out_dir / str(font_id)
        font_sub.mkdir(parents=True, exist_ok=True)
        img = Image.fromarray(np.round(pixels * 255.0).astype(np.uint8), mode="L")
        img.save(font_sub / f"u{ord(char):04x}.png")
    index = {
        "charset": bank.charset,
        "fonts": [{"font_id": f.font_id, "display_name": f.display_name,
                   "source_path": f.source_path} for f in bank.registry.fonts],
        "missing": sorted([f"u{ord(c):04x}/{fid}" for c, fid in bank.missing]),
        "render_params": {
            "font_size": bank.render_cfg.font_size,
            "glyph_size": bank.render_cfg.glyph_size,
            "pad_frac": bank.render_cfg.pad_frac,
        },
    }
    text = json.dumps(index, sort_keys=True, indent=1)
    (out_dir / "index.json").write_text(text)
    return hashlib.sha256(text.encode()).hexdigest()


def load_glyph_bank(bank_dir: str | Path) -> GlyphBank:
    bank_dir = Path(bank_dir)
    index_path = bank_dir / "index.json"
    if not index_path.exists():
        raise ConfigurationError(f"glyph bank index not found: {index_path}")
    index = json.loads(index_path.read_text())
    entries = [FontEntry(f["font_id"], f["display_name"], f["source_path"])
               for f in index["fonts"]]
    registry = FontRegistry(fonts=entries)
    params = index["render_params"]
    cfg = RenderConfig(charset=index["charset"], font_size=params["font_size"],
                       glyph_size=params["glyph_size"], pad_frac=params["pad_frac"])
    missing = set()
    for item in index["missing"]:
        code, fid = item.split("/")
        missing.add((chr(int(code[1:], 16)), int(fid)))
    table: dict[tuple[str, int], np.ndarray] = {}
    for entry in entries:
        for char in index["charset"]:
            if (char, entry.font_id) in missing:
                continue
            img = Image.open(bank_dir / str(entry.font_id) / f"u{ord(char):04x}.png")
            table[(char, entry.font_id)] = np.asarray(img, dtype=np.float32) / 255.0
    return GlyphBank(table=table, charset=index["charset"], registry=registry,
                     missing=missing, render_cfg=cfg)
