"""End-to-end model: CNN features, attention decoding, glyph generation.

Construction order is fixed (recognition trunk first, glyph branch last)
so two models built from the same seed share identical recognition
weights even when their glyph-branch configs differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .attnseq import ColumnEncoder, DecoderStep, SequenceDecoder
from .backbone import FeatureExtractor, FeaturePyramid
from .config import RunConfig
from .vocab import Vocab


@dataclass
class ForwardOutput:
    pyramid: FeaturePyramid
    steps: list[DecoderStep]
    enc_final: tuple[torch.Tensor, torch.Tensor] | None = None

    @property
    def logits(self) -> torch.Tensor:        # (B, T, |V|)
        return torch.stack([s.logits for s in self.steps], dim=1)

    @property
    def masks(self) -> torch.Tensor:         # (B, T, H, W)
        return torch.stack([s.mask for s in self.steps], dim=1)

    @property
    def glimpses(self) -> torch.Tensor:      # (B, T, C)
        return torch.stack([s.glimpse for s in self.steps], dim=1)


class SceneTextModel(nn.Module):
    def __init__(self, cfg: RunConfig, num_fonts: int, vocab: Vocab | None = None):
        super().__init__()
        from .glyphgan import GlyphBranch  # deferred to keep import graph flat

        self.cfg = cfg
        self.vocab = vocab or Vocab()
        torch.manual_seed(cfg.seed)
        self.backbone = FeatureExtractor(cfg.backbone)
        self.encoder = ColumnEncoder(cfg.backbone.feat_channels, cfg.attn)
        self.decoder = SequenceDecoder(cfg.backbone.feat_channels, cfg.attn, self.vocab)
        # projects the encoder's final hidden state to glimpse width, used
        # only by the encoder-content ablation variant
        self.content_proj = nn.Linear(cfg.attn.hidden_size, cfg.backbone.feat_channels)

        h = cfg.synth.image_height // 8
        w = cfg.synth.image_width // 4
        self.level_sizes = [(h * 4, w * 2), (h * 2, w), (h, w), (h, w)]
        self.glyphs = GlyphBranch(self.backbone.level_channels, self.level_sizes,
                                  num_fonts, cfg.glyph, seed=cfg.seed,
                                  trainable_embeddings=cfg.train.trainable_embeddings)
        from .glyphgan import GlyphDiscriminator

        self.discriminator = GlyphDiscriminator()
        self.num_fonts = num_fonts

    def encode(self, images: torch.Tensor):
        pyramid = self.backbone(images)
        enc = self.encoder(pyramid.top)
        return pyramid, enc

    def forward(self, images: torch.Tensor, targets: torch.Tensor) -> ForwardOutput:
        """Teacher-forced pass; step t predicts targets[:, t]."""
        pyramid, enc = self.encode(images)
        steps = self.decoder.teacher_forced(pyramid.top, targets, enc.final)
        return ForwardOutput(pyramid=pyramid, steps=steps, enc_final=enc.final)

    def greedy(self, images: torch.Tensor, t_max: int) -> ForwardOutput:
        pyramid, enc = self.encode(images)
        steps = self.decoder.greedy(pyramid.top, enc.final, t_max)
        return ForwardOutput(pyramid=pyramid, steps=steps, enc_final=enc.final)

    def decode_texts(self, out: ForwardOutput) -> list[str]:
        ids = out.logits.argmax(dim=2)
        return [self.vocab.decode(row) for row in ids]

    def step_content(self, out: ForwardOutput, enc_final, step: int) -> torch.Tensor:
        """Content vector feeding the generator at one decode step."""
        source = self.cfg.glyph.glyph_source
        if source == "glimpse":
            return out.steps[step].glimpse
        if source == "pooled":
            return out.pyramid.top.mean(dim=(2, 3))
        if source == "encoder":
            return self.content_proj(enc_final[0][-1])
        raise ValueError(f"unknown glyph_source {source!r}")

    def generate_step_glyphs(self, out: ForwardOutput, font_ids: torch.Tensor,
                             glyph_mask: torch.Tensor,
                             enc_final=None) -> tuple[torch.Tensor, torch.Tensor]:
        """Generate glyphs at every valid character step.

        Returns (generated (N, 1, G, G), flat index (N,) into B*t_max) for
        steps where glyph_mask == 1.
        """
        b, t_max = glyph_mask.shape
        flat_idx = glyph_mask.reshape(-1).nonzero(as_tuple=True)[0]
        if flat_idx.numel() == 0:
            g = self.cfg.glyph.glyph_size
            return torch.zeros(0, 1, g, g, device=glyph_mask.device), flat_idx
        batch_idx = flat_idx // t_max
        step_idx = flat_idx % t_max

        source = self.cfg.glyph.glyph_source
        use_attention = source == "glimpse"
        levels = [lvl[batch_idx] for lvl in out.pyramid.levels]
        masks_all = out.masks  # (B, T, H, W)
        mask_sel = masks_all[batch_idx, step_idx]
        if not use_attention:
            # content does not follow attention; skips are disabled for
            # these variants, so only the top-scale path matters
            if source == "pooled":
                content = out.pyramid.top.mean(dim=(2, 3))[batch_idx]
            else:
                final = enc_final if enc_final is not None else out.enc_final
                content = self.content_proj(final[0][-1])[batch_idx]
            scale_masks = [torch.zeros(lvl.shape[0], lvl.shape[2], lvl.shape[3],
                                       device=lvl.device) for lvl in levels]
            generated = self.glyphs(levels, scale_masks,
                                    font_ids.reshape(-1)[flat_idx], content=content)
            return generated, flat_idx
        scale_masks = self.glyphs.upsampled_masks(mask_sel, self.level_sizes)
        generated = self.glyphs(levels, scale_masks, font_ids.reshape(-1)[flat_idx])
        return generated, flat_idx


def build_model(cfg: RunConfig, num_fonts: int, vocab: Vocab | None = None,
                device: str = "cpu") -> SceneTextModel:
    model = SceneTextModel(cfg, num_fonts, vocab)
    return model.to(device)
