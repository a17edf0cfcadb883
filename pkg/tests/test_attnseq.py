import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from glyphrec.attnseq import (ColumnEncoder, SequenceDecoder, SpatialAttention,
                              glimpse)
from glyphrec.config import AttnConfig
from glyphrec.vocab import EOS, Vocab

CFG = AttnConfig(hidden_size=64, attn_dim=32)
C = 24


def brute_force_glimpse(feat: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Independent oracle: explicit double loop over spatial positions."""
    b, c, h, w = feat.shape
    out = np.zeros((b, c))
    for bi in range(b):
        for i in range(h):
            for j in range(w):
                out[bi] += mask[bi, i, j] * feat[bi, :, i, j]
    return out


class TestEncoder:
    def test_step_count_and_width(self):
        torch.manual_seed(0)
        enc = ColumnEncoder(C, AttnConfig(hidden_size=512, attn_dim=64))
        state = enc(torch.rand(2, C, 6, 40))
        assert tuple(state.outputs.shape) == (2, 40, 512)
        assert state.final[0].shape == (2, 2, 512)  # layers, batch, hidden

    def test_constant_column_maxpool(self):
        torch.manual_seed(0)
        enc = ColumnEncoder(C, CFG)
        feat = torch.rand(1, C, 1, 5).expand(1, C, 6, 5).contiguous()
        cols = feat.max(dim=2).values.permute(0, 2, 1)
        assert torch.allclose(cols[0, 0], feat[0, :, 0, 0])

    def test_batch_independence(self):
        torch.manual_seed(0)
        enc = ColumnEncoder(C, CFG).eval()
        feat = torch.rand(2, C, 6, 10)
        both = enc(feat).outputs
        solo = enc(feat[:1]).outputs
        assert torch.allclose(both[:1], solo, atol=1e-6)


class TestAttention:
    def test_mask_normalized(self):
        torch.manual_seed(1)
        attn = SpatialAttention(C, CFG)
        mask = attn(torch.rand(3, C, 6, 40), torch.rand(3, CFG.hidden_size))
        assert tuple(mask.shape) == (3, 6, 40)
        assert mask.min() >= 0
        assert torch.allclose(mask.sum(dim=(1, 2)), torch.ones(3), atol=1e-5)

    def test_mask_entry_count(self):
        torch.manual_seed(1)
        attn = SpatialAttention(C, CFG)
        mask = attn(torch.rand(1, C, 6, 40), torch.rand(1, CFG.hidden_size))
        assert mask.numel() == 240

    def test_zero_score_map_gives_uniform(self):
        torch.manual_seed(1)
        attn = SpatialAttention(C, CFG)
        with torch.no_grad():
            attn.score_map.weight.zero_()
        mask = attn(torch.rand(2, C, 6, 40), torch.rand(2, CFG.hidden_size))
        assert torch.allclose(mask, torch.full_like(mask, 1.0 / 240))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), h=st.integers(2, 7), w=st.integers(2, 9))
    def test_normalization_random_weights(self, seed, h, w):
        torch.manual_seed(seed)
        attn = SpatialAttention(C, CFG)
        mask = attn(torch.randn(2, C, h, w), torch.randn(2, CFG.hidden_size))
        assert mask.min() >= 0
        assert torch.allclose(mask.sum(dim=(1, 2)), torch.ones(2), atol=1e-5)


class TestGlimpse:
    def test_one_hot_selects(self):
        feat = torch.rand(1, C, 4, 5)
        mask = torch.zeros(1, 4, 5)
        mask[0, 2, 3] = 1.0
        out = glimpse(feat, mask)
        assert torch.allclose(out[0], feat[0, :, 2, 3])

    def test_uniform_is_spatial_mean(self):
        feat = torch.rand(2, C, 4, 5)
        mask = torch.full((2, 4, 5), 1.0 / 20)
        out = glimpse(feat, mask)
        assert torch.allclose(out, feat.mean(dim=(2, 3)), atol=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), h=st.integers(1, 4), w=st.integers(1, 4))
    def test_matches_brute_force(self, seed, h, w):
        gen = torch.Generator().manual_seed(seed)
        feat = torch.rand(2, C, h, w, generator=gen, dtype=torch.float64)
        raw = torch.rand(2, h, w, generator=gen, dtype=torch.float64)
        mask = raw / raw.sum(dim=(1, 2), keepdim=True)
        ours = glimpse(feat, mask).numpy()
        oracle = brute_force_glimpse(feat.numpy(), mask.numpy())
        assert np.abs(ours - oracle).max() < 1e-6


class TestDecoder:
    @pytest.fixture()
    def decoder(self):
        torch.manual_seed(2)
        return SequenceDecoder(C, CFG, Vocab()).eval()

    def _init_state(self, b):
        zeros = torch.zeros(CFG.num_layers, b, CFG.hidden_size)
        return (zeros, zeros.clone())

    def test_logit_width(self, decoder):
        feat = torch.rand(2, C, 6, 10)
        prev = torch.tensor([decoder.vocab.go] * 2)
        step, _ = decoder.step(prev, self._init_state(2), feat)
        assert step.logits.shape == (2, len(decoder.vocab))
        assert len(decoder.vocab) == 65

    def test_eval_deterministic(self, decoder):
        feat = torch.rand(1, C, 6, 10)
        targets = torch.tensor([[5, 6, EOS]])
        with torch.no_grad():
            a = decoder.teacher_forced(feat, targets, self._init_state(1))
            b = decoder.teacher_forced(feat, targets, self._init_state(1))
        for sa, sb in zip(a, b):
            assert torch.equal(sa.logits, sb.logits)

    def test_greedy_stops_at_eos_or_budget(self, decoder):
        feat = torch.rand(2, C, 6, 10)
        steps = decoder.greedy(feat, self._init_state(2), t_max=7)
        assert 1 <= len(steps) <= 7
        texts = [decoder.vocab.decode(torch.stack(
            [s.logits[i].argmax() for s in steps])) for i in range(2)]
        for text in texts:
            assert len(text) <= 7

    def test_masks_match_emitted_length(self, decoder):
        feat = torch.rand(1, C, 6, 10)
        steps = decoder.greedy(feat, self._init_state(1), t_max=5)
        assert all(s.mask.shape == (1, 6, 10) for s in steps)
        assert len(steps) <= 6

    def test_glimpse_consistency_inside_step(self, decoder):
        from glyphrec.attnseq import glimpse as glimpse_fn

        feat = torch.rand(1, C, 6, 10)
        prev = torch.tensor([decoder.vocab.go])
        step, _ = decoder.step(prev, self._init_state(1), feat)
        assert torch.allclose(step.glimpse, glimpse_fn(feat, step.mask), atol=1e-6)
