"""LSTM sequence encoder/decoder with a 2D spatial attention mask.

The encoder consumes vertically max-pooled feature columns; its final
state seeds the decoder. At each decode step the attention scores every
spatial position from a 3x3 neighborhood transform of the features plus
the decoder hidden state, the softmax-normalized mask pools the features
into a glimpse, and the classifier reads [hidden; glimpse].
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import AttnConfig
from .vocab import EOS, Vocab


@dataclass
class EncoderState:
    outputs: torch.Tensor                       # (B, W, hidden)
    final: tuple[torch.Tensor, torch.Tensor]    # LSTM (h, c), each (layers, B, hidden)


@dataclass
class DecoderStep:
    hidden: torch.Tensor    # (B, hidden)
    mask: torch.Tensor      # (B, H, W), entries >= 0, sums to 1
    glimpse: torch.Tensor   # (B, C)
    logits: torch.Tensor    # (B, |V|)


class ColumnEncoder(nn.Module):
    """One LSTM step per feature-map column, max-pooled over height."""

    def __init__(self, feat_channels: int, cfg: AttnConfig):
        super().__init__()
        self.lstm = nn.LSTM(feat_channels, cfg.hidden_size,
                            num_layers=cfg.num_layers, batch_first=True)

    def forward(self, feat: torch.Tensor) -> EncoderState:
        # feat (B, C, H, W) -> column sequence (B, W, C)
        cols = feat.max(dim=2).values.permute(0, 2, 1)
        outputs, final = self.lstm(cols)
        return EncoderState(outputs=outputs, final=final)


class SpatialAttention(nn.Module):
    """Scores = linear(tanh(3x3-neighborhood(F) + broadcast hidden))."""

    def __init__(self, feat_channels: int, cfg: AttnConfig):
        super().__init__()
        # zero-padded 3x3 conv realizes the sum over the (i,j) neighborhood
        self.feat_map = nn.Conv2d(feat_channels, cfg.attn_dim, 3, padding=1, bias=False)
        self.hidden_map = nn.Linear(cfg.hidden_size, cfg.attn_dim, bias=False)
        self.score_map = nn.Conv2d(cfg.attn_dim, 1, 1, bias=False)

    def forward(self, feat: torch.Tensor, hidden: torch.Tensor) -> torch.Tensor:
        b, _, h, w = feat.shape
        pre = torch.tanh(self.feat_map(feat) + self.hidden_map(hidden)[:, :, None, None])
        scores = self.score_map(pre).view(b, h * w)
        return F.softmax(scores, dim=1).view(b, h, w)


def glimpse(feat: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mask-weighted channel sums: (B, C, H, W) x (B, H, W) -> (B, C)."""
    return (feat * mask.unsqueeze(1)).sum(dim=(2, 3))


class SequenceDecoder(nn.Module):
    """Per-step LSTM decoding with attention and symbol classification."""

    def __init__(self, feat_channels: int, cfg: AttnConfig, vocab: Vocab):
        super().__init__()
        self.vocab = vocab
        self.embedding = nn.Embedding(vocab.num_embeddings, cfg.hidden_size)
        self.lstm = nn.LSTM(cfg.hidden_size, cfg.hidden_size,
                            num_layers=cfg.num_layers, batch_first=True)
        self.attention = SpatialAttention(feat_channels, cfg)
        self.classifier = nn.Linear(cfg.hidden_size + feat_channels, len(vocab))

    def step(self, prev_symbol: torch.Tensor, state, feat: torch.Tensor):
        """prev_symbol (B,) int64 -> (DecoderStep, next state)."""
        emb = self.embedding(prev_symbol).unsqueeze(1)
        out, state = self.lstm(emb, state)
        hidden = out[:, 0]
        mask = self.attention(feat, hidden)
        context = glimpse(feat, mask)
        logits = self.classifier(torch.cat([hidden, context], dim=1))
        return DecoderStep(hidden=hidden, mask=mask, glimpse=context,
                           logits=logits), state

    def teacher_forced(self, feat: torch.Tensor, targets: torch.Tensor,
                       init_state) -> list[DecoderStep]:
        """Unroll with ground-truth inputs; step t predicts targets[:, t]."""
        b, steps = targets.shape
        prev = torch.full((b,), self.vocab.go, dtype=torch.long, device=feat.device)
        state = init_state
        outputs = []
        for t in range(steps):
            dec, state = self.step(prev, state, feat)
            outputs.append(dec)
            prev = targets[:, t]
        return outputs

    @torch.no_grad()
    def greedy(self, feat: torch.Tensor, init_state, t_max: int) -> list[DecoderStep]:
        """Argmax decoding: at most t_max steps, stopping at EOS."""
        b = feat.shape[0]
        prev = torch.full((b,), self.vocab.go, dtype=torch.long, device=feat.device)
        state = init_state
        finished = torch.zeros(b, dtype=torch.bool, device=feat.device)
        outputs = []
        for _ in range(t_max):
            dec, state = self.step(prev, state, feat)
            outputs.append(dec)
            prev = dec.logits.argmax(dim=1)
            finished |= prev == EOS
            if bool(finished.all()):
                break
        return outputs
