"""Named run configurations for the desk-scale experiments.

``desk_config`` keeps the published architecture numbers (512 hidden units,
256 top channels). The CPU variants shrink widths so the acceptance
experiments finish on a laptop-class CPU; every shape contract that the
architecture pins (stride plan, generator/discriminator layer sizes, 32x32
glyphs, 128-dim font embeddings) is unchanged.
"""

from __future__ import annotations

from .config import (AttnConfig, BackboneConfig, GlyphConfig, RunConfig,
                     SynthConfig)


def desk_config() -> RunConfig:
    cfg = RunConfig(run_id="desk")
    cfg.backbone = BackboneConfig(channels=(32, 64, 128, 256), feat_channels=256)
    cfg.attn = AttnConfig(hidden_size=512, attn_dim=512)
    return cfg


def cpu_small_config() -> RunConfig:
    """Reduced widths for 2-core CPU experiments."""
    cfg = RunConfig(run_id="cpu-small")
    cfg.backbone = BackboneConfig(channels=(8, 16, 32, 64), feat_channels=64,
                                  units_per_block=(1, 1, 1, 1, 1))
    cfg.attn = AttnConfig(hidden_size=128, attn_dim=64)
    cfg.glyph = GlyphConfig(embed_dim=128, skip_channels=16)
    return cfg


def acceptance_overfit_config() -> RunConfig:
    """100-sample overfit run: basic objective, trainable embeddings."""
    cfg = cpu_small_config()
    cfg.run_id = "overfit"
    cfg.synth = SynthConfig(n_train=100, n_test_seen=20, n_test_novel=20,
                            novel_fonts=2)
    cfg.train.batch_size = 16
    cfg.train.iterations = 2000
    cfg.train.adversarial = False
    cfg.train.snapshot_interval = 100
    cfg.train.checkpoint_interval = 1000
    return cfg


def acceptance_sweep_config() -> RunConfig:
    """Framework-comparison scale: 5k samples, 10 training fonts."""
    cfg = cpu_small_config()
    cfg.run_id = "sweep"
    cfg.synth = SynthConfig(n_train=5000, n_test_seen=500, n_test_novel=200,
                            novel_fonts=2)
    cfg.train.batch_size = 16
    cfg.train.snapshot_interval = 200
    cfg.train.checkpoint_interval = 2000
    return cfg
