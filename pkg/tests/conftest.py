import shutil
from pathlib import Path

import matplotlib
import pytest

from glyphrec.config import RunConfig, small_preset
from glyphrec.corpus import build_glyph_bank, register_fonts

MPL_TTF = Path(matplotlib.get_data_path()) / "fonts" / "ttf"

# fonts with full alphanumeric coverage; DejaVu/STIX vs Computer Modern
# gives a real style contrast for the novel-font split
SANS_FONTS = [
    "DejaVuSans.ttf", "DejaVuSans-Bold.ttf", "DejaVuSans-Oblique.ttf",
    "DejaVuSans-BoldOblique.ttf", "DejaVuSansMono.ttf", "DejaVuSansMono-Bold.ttf",
]
SERIF_FONTS = [
    "DejaVuSerif.ttf", "DejaVuSerif-Bold.ttf", "DejaVuSerif-Italic.ttf",
    "STIXGeneral.ttf", "STIXGeneralBol.ttf", "STIXGeneralItalic.ttf",
]
NOVEL_FONTS = ["cmr10.ttf", "cmss10.ttf", "cmtt10.ttf", "cmb10.ttf"]


def copy_fonts(dest: Path, names: list[str]) -> Path:
    dest.mkdir(parents=True, exist_ok=True)
    for name in names:
        shutil.copy(MPL_TTF / name, dest / name)
    return dest


@pytest.fixture(scope="session")
def font_dir(tmp_path_factory) -> Path:
    """Six-font directory for fast registry/bank tests."""
    return copy_fonts(tmp_path_factory.mktemp("fonts"), SANS_FONTS)


@pytest.fixture(scope="session")
def big_font_dir(tmp_path_factory) -> Path:
    """Twelve usable fonts plus two style outliers for split tests."""
    names = SANS_FONTS + SERIF_FONTS[:4] + NOVEL_FONTS[:2]
    return copy_fonts(tmp_path_factory.mktemp("fonts_big"), names)


@pytest.fixture(scope="session")
def registry(font_dir):
    return register_fonts(font_dir)


@pytest.fixture(scope="session")
def small_bank(registry):
    """Glyph bank over a reduced charset; enough for loader tests."""
    from glyphrec.config import RenderConfig

    cfg = RenderConfig(charset="0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"
                               "abcdefghijklmnopqrstuvwxyz")
    return build_glyph_bank(cfg.charset, registry, cfg)


@pytest.fixture(scope="session")
def mini_data(big_font_dir, tmp_path_factory):
    """Tiny three-split dataset plus a train-font glyph bank."""
    from glyphrec.config import SynthConfig
    from glyphrec.synthgen import generate_dataset

    out = tmp_path_factory.mktemp("mini_data")
    cfg = SynthConfig(n_train=16, n_test_seen=8, n_test_novel=6, novel_fonts=2)
    registry = register_fonts(big_font_dir)
    manifest = generate_dataset(registry, cfg, seed=11, out_dir=out)
    bank_registry = registry.subset(manifest.train_fonts)
    bank = build_glyph_bank(RunConfig().render.charset, bank_registry)
    return manifest, out, bank


@pytest.fixture()
def tiny_cfg() -> RunConfig:
    """Smallest config that still satisfies every shape contract."""
    cfg = small_preset()
    cfg.train.batch_size = 2
    cfg.train.iterations = 3
    cfg.train.decay_interval = 2
    cfg.train.log_interval = 1
    cfg.train.checkpoint_interval = 3
    cfg.train.snapshot_interval = 1
    cfg.synth.n_train = 8
    cfg.synth.n_test_seen = 4
    cfg.synth.n_test_novel = 4
    return cfg
