"""Conditional glyph generation with trainable font embeddings.

A deconv stack maps the concatenated [glimpse; font embedding] through
2x2x128 -> 4x4x64 -> 8x8x32 -> 16x16x16 -> 32x32x1. Masked multi-scale CNN
features, reduced to matching spatial sizes and concatenated with tiled
embeddings, enter as skip connections on the intermediate inputs. A small
conv discriminator scores glyph realism.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import GlyphConfig


class FontEmbeddingTable(nn.Module):
    """m trainable style vectors, Gaussian-initialized (mean 0, std 0.1)."""

    def __init__(self, num_fonts: int, embed_dim: int, seed: int = 0,
                 trainable: bool = True):
        super().__init__()
        if num_fonts < 2:
            raise ValueError("need at least 2 fonts for a style contrast")
        if embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        gen = torch.Generator().manual_seed(seed)
        init = torch.normal(0.0, 0.1, (num_fonts, embed_dim), generator=gen)
        self.weight = nn.Parameter(init, requires_grad=trainable)
        self.num_fonts = num_fonts
        self.embed_dim = embed_dim

    @property
    def trainable(self) -> bool:
        return self.weight.requires_grad

    def forward(self, font_ids: torch.Tensor) -> torch.Tensor:
        return self.weight[font_ids]

    def snapshot(self) -> np.ndarray:
        return self.weight.detach().cpu().numpy().copy()


def init_font_embeddings(num_fonts: int, embed_dim: int, seed: int = 0,
                         trainable: bool = True) -> FontEmbeddingTable:
    return FontEmbeddingTable(num_fonts, embed_dim, seed, trainable)


def tile_embedding(z: torch.Tensor, scale: int, num_scales: int) -> torch.Tensor:
    """Duplicate (B, C') vectors onto a 2^(l-i) x 2^(l-i) grid."""
    if not 1 <= scale <= num_scales:
        raise ValueError(f"scale {scale} outside 1..{num_scales}")
    side = 2 ** (num_scales - scale)
    return z[:, :, None, None].expand(-1, -1, side, side)


def upsample_mask(mask: torch.Tensor, target_h: int, target_w: int) -> torch.Tensor:
    """Bilinear resize of (B, H, W) masks, renormalized to sum 1."""
    if target_h < mask.shape[1] or target_w < mask.shape[2]:
        raise ValueError("target size must be at least the source size")
    if (target_h, target_w) == mask.shape[1:]:
        return mask
    up = F.interpolate(mask.unsqueeze(1), size=(target_h, target_w),
                       mode="bilinear", align_corners=False).squeeze(1)
    total = up.sum(dim=(1, 2), keepdim=True).clamp_min(1e-12)
    return up / total


class SkipReducer(nn.Module):
    """Masked features at one scale -> 2^(l-i) grid, plus tiled embedding.

    At the top scale the mask-weighted features are summed to 1x1 (the
    glimpse); lower scales use a learned linear reduction, factorized as a
    per-channel spatial map followed by 1x1 channel mixing to stay small.
    """

    def __init__(self, feat_channels: int, feat_h: int, feat_w: int,
                 scale: int, num_scales: int, out_channels: int, embed_dim: int):
        super().__init__()
        self.scale = scale
        self.num_scales = num_scales
        self.side = 2 ** (num_scales - scale)
        self.embed_dim = embed_dim
        if scale == num_scales:
            self.out_channels = feat_channels + embed_dim
        else:
            self.spatial = nn.Linear(feat_h * feat_w, self.side * self.side, bias=False)
            self.mix = nn.Conv2d(feat_channels, out_channels, 1)
            self.out_channels = out_channels + embed_dim

    def forward(self, feat: torch.Tensor, mask: torch.Tensor,
                z: torch.Tensor) -> torch.Tensor:
        b, c, h, w = feat.shape
        masked = feat * mask.unsqueeze(1)
        if self.scale == self.num_scales:
            reduced = masked.sum(dim=(2, 3))[:, :, None, None]
        else:
            flat = self.spatial(masked.view(b, c, h * w))
            reduced = self.mix(flat.view(b, c, self.side, self.side))
        tiled = tile_embedding(z, self.scale, self.num_scales)
        return torch.cat([reduced, tiled], dim=1)


def reduce_skip(reducer: SkipReducer, feat, mask, z) -> torch.Tensor:
    return reducer(feat, mask, z)


class GlyphGenerator(nn.Module):
    """Deconv stack from the 1x1 [glimpse; embedding] input to a 32x32 glyph.

    skip_channels[i] gives the extra channels concatenated onto the inputs
    of layers 2..4 (from the 2x2, 4x4, 8x8 skips); zeros disable a slot.
    """

    LAYER_SHAPES = [(2, 2, 128), (4, 4, 64), (8, 8, 32), (16, 16, 16), (32, 32, 1)]

    def __init__(self, in_channels: int, skip_channels: tuple[int, int, int] = (0, 0, 0)):
        super().__init__()
        self.skip_channels = skip_channels
        widths = [s[2] for s in self.LAYER_SHAPES]
        self.layer1 = nn.ConvTranspose2d(in_channels, widths[0], 2, stride=2)
        self.layer2 = nn.ConvTranspose2d(widths[0] + skip_channels[0], widths[1],
                                         3, stride=2, padding=1, output_padding=1)
        self.layer3 = nn.ConvTranspose2d(widths[1] + skip_channels[1], widths[2],
                                         3, stride=2, padding=1, output_padding=1)
        self.layer4 = nn.ConvTranspose2d(widths[2] + skip_channels[2], widths[3],
                                         3, stride=2, padding=1, output_padding=1)
        self.layer5 = nn.ConvTranspose2d(widths[3], widths[4],
                                         3, stride=2, padding=1, output_padding=1)

    def forward(self, seed: torch.Tensor, skips=None) -> torch.Tensor:
        """seed (B, in_channels, 1, 1); skips = 2x2, 4x4, 8x8 maps or None."""
        skips = skips or [None, None, None]
        x = F.relu(self.layer1(seed))
        for layer, skip in zip((self.layer2, self.layer3, self.layer4), skips):
            if skip is not None:
                x = torch.cat([x, skip], dim=1)
            x = F.relu(layer(x))
        return torch.sigmoid(self.layer5(x))


class GlyphDiscriminator(nn.Module):
    """Convolutional realness score for 32x32 single-channel glyphs."""

    LAYER_SHAPES = [(16, 16, 16), (8, 8, 32), (4, 4, 64), (2, 2, 128),
                    (1, 1, 128), (1, 1, 1)]

    def __init__(self):
        super().__init__()
        self.convs = nn.ModuleList([
            nn.Conv2d(1, 16, 3, stride=2, padding=1),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.Conv2d(32, 64, 3, stride=2, padding=1),
            nn.Conv2d(64, 128, 3, stride=2, padding=1),
            nn.Conv2d(128, 128, 3, stride=2, padding=1),
        ])
        self.head = nn.Conv2d(128, 1, 1)

    def forward(self, glyphs: torch.Tensor) -> torch.Tensor:
        x = glyphs
        for conv in self.convs:
            x = F.leaky_relu(conv(x), 0.2)
        return torch.sigmoid(self.head(x)).view(-1)


def discriminate(disc: GlyphDiscriminator, glyphs: torch.Tensor) -> torch.Tensor:
    return disc(glyphs)


class GlyphBranch(nn.Module):
    """Font table + skip reducers + generator, wired for one feature pyramid."""

    def __init__(self, level_channels: list[int], level_sizes: list[tuple[int, int]],
                 num_fonts: int, cfg: GlyphConfig, seed: int = 0,
                 trainable_embeddings: bool = True):
        super().__init__()
        self.cfg = cfg
        self.num_scales = len(level_channels)
        self.fonts = init_font_embeddings(num_fonts, cfg.embed_dim, seed=seed,
                                          trainable=trainable_embeddings)
        reducers = []
        for idx, (ch, (h, w)) in enumerate(zip(level_channels, level_sizes)):
            scale = idx + 1
            reducers.append(SkipReducer(ch, h, w, scale, self.num_scales,
                                        cfg.skip_channels, cfg.embed_dim))
        self.reducers = nn.ModuleList(reducers)
        top_in = level_channels[-1] + cfg.embed_dim
        if cfg.skips:
            lower = [r.out_channels for r in self.reducers[:-1]]
            # reducer order is scale 1..l-1; generator wants 2x2 first
            skip_ch = tuple(reversed(lower))
        else:
            skip_ch = (0, 0, 0)
        self.generator = GlyphGenerator(top_in, skip_ch)

    def upsampled_masks(self, mask: torch.Tensor,
                        level_sizes: list[tuple[int, int]]) -> list[torch.Tensor]:
        return [upsample_mask(mask, h, w) for h, w in level_sizes[:-1]] + [mask]

    def forward(self, levels: list[torch.Tensor], masks: list[torch.Tensor],
                font_ids: torch.Tensor, content: torch.Tensor | None = None) -> torch.Tensor:
        """Generate glyphs; content overrides the top-scale glimpse if given."""
        z = self.fonts(font_ids)
        if content is None:
            seed = self.reducers[-1](levels[-1], masks[-1], z)
        else:
            seed = torch.cat([content[:, :, None, None],
                              tile_embedding(z, self.num_scales, self.num_scales)], dim=1)
        if self.cfg.skips:
            lower = [r(f, m, z) for r, f, m in
                     zip(self.reducers[:-1], levels[:-1], masks[:-1])]
            skips = list(reversed(lower))  # 2x2, 4x4, 8x8
        else:
            skips = None
        return self.generator(seed, skips)


def select_representative_fonts(table: np.ndarray, count: int,
                                seed: int = 0, max_iter: int = 100) -> list[int]:
    """K-means over embedding vectors; per cluster, the id nearest its centroid.

    Ties break toward the lowest font id. count == m returns every id.
    """
    m = table.shape[0]
    if not 2 <= count <= m:
        raise ValueError(f"count must be in [2, {m}], got {count}")
    if count == m:
        return list(range(m))
    rng = np.random.default_rng(seed)
    # k-means++ seeding
    centroids = [table[int(rng.integers(0, m))]]
    for _ in range(count - 1):
        d2 = np.min([((table - c) ** 2).sum(axis=1) for c in centroids], axis=0)
        probs = d2 / d2.sum() if d2.sum() > 0 else np.full(m, 1.0 / m)
        centroids.append(table[int(rng.choice(m, p=probs))])
    centroids = np.stack(centroids)
    assign = np.zeros(m, dtype=np.int64)
    for _ in range(max_iter):
        dists = ((table[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = dists.argmin(axis=1)
        if (new_assign == assign).all() and _ > 0:
            break
        assign = new_assign
        for k in range(count):
            members = table[assign == k]
            if len(members):
                centroids[k] = members.mean(axis=0)
    chosen: list[int] = []
    for k in range(count):
        ids = np.where(assign == k)[0]
        if ids.size == 0:  # empty cluster; take nearest unused id overall
            d = ((table - centroids[k]) ** 2).sum(axis=1)
            order = np.argsort(d, kind="stable")
            ids = np.array([i for i in order if i not in chosen][:1])
        d = ((table[ids] - centroids[k]) ** 2).sum(axis=1)
        best = ids[np.lexsort((ids, d))[0]]  # distance, then lowest id
        if best in chosen:
            remaining = [i for i in ids if i not in chosen]
            if remaining:
                best = remaining[0]
            else:
                best = next(i for i in range(m) if i not in chosen)
        chosen.append(int(best))
    return sorted(chosen)
