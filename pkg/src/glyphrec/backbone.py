"""Residual CNN feature extractor preserving 2D layout at the top level.

Five residual blocks; blocks four and five keep stride 1x1 so the top
feature map is H0/8 x W0/4 instead of collapsing the vertical axis.
Multi-scale taps: block1 (H0/2 x W0/2), block2 (H0/4 x W0/4), block3
(H0/8 x W0/4), and the final block output at the same resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .config import BackboneConfig


@dataclass
class FeaturePyramid:
    levels: list[torch.Tensor]  # coarse-to-fine index: levels[0] is largest

    @property
    def top(self) -> torch.Tensor:
        return self.levels[-1]

    @property
    def num_scales(self) -> int:
        return len(self.levels)


class ResidualUnit(nn.Module):
    def __init__(self, in_ch, out_ch, stride=(1, 1)):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.relu = nn.ReLU(inplace=True)
        if stride != (1, 1) or in_ch != out_ch:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + self.shortcut(x))


def _block(in_ch, out_ch, stride, units):
    layers = [ResidualUnit(in_ch, out_ch, stride)]
    layers += [ResidualUnit(out_ch, out_ch) for _ in range(units - 1)]
    return nn.Sequential(*layers)


class FeatureExtractor(nn.Module):
    """images (B, 3, H0, W0) -> 4-level FeaturePyramid."""

    # per-block strides chosen so H shrinks 8x and W shrinks 4x overall
    STRIDES = ((2, 2), (2, 2), (2, 1), (1, 1), (1, 1))

    def __init__(self, cfg: BackboneConfig | None = None):
        super().__init__()
        cfg = cfg or BackboneConfig()
        widths = list(cfg.channels) + [cfg.feat_channels]
        if len(widths) != 5 or len(cfg.units_per_block) != 5:
            raise ValueError("backbone expects 5 block widths and unit counts")
        self.feat_channels = cfg.feat_channels
        self.level_channels = [widths[0], widths[1], widths[2], widths[4]]
        self.stem = nn.Sequential(
            nn.Conv2d(3, widths[0], 3, padding=1, bias=False),
            nn.BatchNorm2d(widths[0]),
            nn.ReLU(inplace=True),
        )
        blocks = []
        in_ch = widths[0]
        for out_ch, stride, units in zip(widths, self.STRIDES, cfg.units_per_block):
            blocks.append(_block(in_ch, out_ch, stride, units))
            in_ch = out_ch
        self.blocks = nn.ModuleList(blocks)

    def forward(self, images: torch.Tensor) -> FeaturePyramid:
        if images.dim() != 4 or images.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H0, W0) images, got {tuple(images.shape)}")
        h0, w0 = images.shape[2], images.shape[3]
        if h0 % 8 != 0 or w0 % 4 != 0:
            raise ValueError(f"input {h0}x{w0} not divisible by 8 (H) and 4 (W)")
        x = self.stem(images)
        taps = []
        for i, block in enumerate(self.blocks):
            x = block(x)
            if i in (0, 1, 2):
                taps.append(x)
        taps.append(x)  # final block output at top resolution
        return FeaturePyramid(levels=taps)


def extract_features(model: FeatureExtractor, images: torch.Tensor) -> FeaturePyramid:
    return model(images)
