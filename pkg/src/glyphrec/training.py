"""Composite losses, alternating adversarial optimization, and gradient checks.

The basic objective sums per-step cross-entropy with per-step glyph L1
against bank targets in uniformly sampled fonts. With the adversarial
switch on, one discriminator update precedes each generator update; the
learning rate follows a staircase decay with a floor.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .config import RunConfig
from .model import SceneTextModel, build_model
from .synthgen import Batch, DatasetManifest, load_batches
from .vocab import PAD, Vocab

PROB_EPS = 1e-7

METRIC_FIELDS = ["iteration", "loss", "loss_g", "loss_d", "ce", "l1", "lr", "grad_norm"]


def lr_at(iteration: int, cfg) -> float:
    """Staircase schedule: lr0 * decay^(iteration // interval), floored."""
    return max(cfg.lr0 * cfg.lr_decay ** (iteration // cfg.decay_interval), cfg.lr_floor)


def sequence_ce(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Cross-entropy summed over non-PAD steps, averaged over the batch."""
    b, t, v = logits.shape
    if labels.shape != (b, t):
        raise ValueError(f"labels {tuple(labels.shape)} do not match logits {(b, t)}")
    total = F.cross_entropy(logits.reshape(b * t, v), labels.reshape(b * t),
                            ignore_index=PAD, reduction="sum")
    return total / b


def glyph_l1(generated: torch.Tensor, targets: torch.Tensor, batch_size: int,
             reduction: str = "mean") -> torch.Tensor:
    """Per-step glyph L1, summed over steps and averaged over the batch.

    reduction "mean" divides each glyph's absolute error by its pixel
    count, keeping the term comparable to the cross-entropy at desk scale.
    """
    if generated.shape != targets.shape:
        raise ValueError(f"glyph shapes differ: {tuple(generated.shape)} vs "
                         f"{tuple(targets.shape)}")
    if generated.numel() == 0:
        return torch.zeros((), device=generated.device)
    per_glyph = (generated - targets).abs().sum(dim=(1, 2, 3))
    if reduction == "mean":
        per_glyph = per_glyph / generated[0].numel()
    elif reduction != "sum":
        raise ValueError(f"unknown l1 reduction {reduction!r}")
    return per_glyph.sum() / batch_size


def basic_loss(logits, labels, generated, target_glyphs, batch_size,
               l1_reduction="mean"):
    """Cross-entropy plus glyph L1; returns (total, ce, l1)."""
    ce = sequence_ce(logits, labels)
    l1 = glyph_l1(generated, target_glyphs, batch_size, l1_reduction)
    return ce + l1, ce, l1


def adversarial_losses(logits, labels, generated, target_glyphs, disc,
                       batch_size, alpha, l1_reduction="mean"):
    """Generator and discriminator objectives; returns (L_G, L_D, ce, l1).

    The discriminator sees detached generated glyphs in its own loss; the
    generator loss backpropagates through a fresh discriminator pass.
    """
    ce = sequence_ce(logits, labels)
    l1 = glyph_l1(generated, target_glyphs, batch_size, l1_reduction)
    p_fake_for_g = disc(generated).clamp(PROB_EPS, 1 - PROB_EPS)
    loss_g = ce + l1 - alpha * torch.log(p_fake_for_g).sum() / batch_size
    p_fake = disc(generated.detach()).clamp(PROB_EPS, 1 - PROB_EPS)
    p_real = disc(target_glyphs).clamp(PROB_EPS, 1 - PROB_EPS)
    loss_d = -alpha * (torch.log(1 - p_fake) + torch.log(p_real)).sum() / batch_size
    return loss_g, loss_d, ce, l1


def generator_parameters(model: SceneTextModel):
    """Everything the generator-side update touches (excludes the critic)."""
    return [p for name, p in model.named_parameters()
            if not name.startswith("discriminator.") and p.requires_grad]


def build_optimizers(model: SceneTextModel, cfg: RunConfig):
    opt_g = torch.optim.Adam(generator_parameters(model), lr=cfg.train.lr0)
    opt_d = torch.optim.Adam(model.discriminator.parameters(), lr=cfg.train.lr0)
    return opt_g, opt_d


def train_step(model: SceneTextModel, batch: Batch, opt_g, opt_d,
               cfg: RunConfig, iteration: int) -> dict:
    """One optimization step; returns a metrics record."""
    tc = cfg.train
    lr = lr_at(iteration, tc)
    for opt in (opt_g, opt_d):
        for group in opt.param_groups:
            group["lr"] = lr

    lengths = (batch.labels != PAD).sum(dim=1)
    steps = int(lengths.max())
    labels = batch.labels[:, :steps]
    b = batch.images.shape[0]

    model.train()
    pyramid_out = model(batch.images, labels)
    record = {"iteration": iteration, "lr": lr, "loss_g": math.nan,
              "loss_d": math.nan, "l1": math.nan}

    if tc.glyph_generation:
        glyph_steps = steps - 1
        mask = batch.glyph_mask[:, :glyph_steps]
        fonts = batch.font_ids[:, :glyph_steps]
        trimmed = ForwardSlice(pyramid_out, glyph_steps)
        generated, flat_idx = model.generate_step_glyphs(trimmed, fonts, mask)
        targets = batch.glyphs[:, :glyph_steps].reshape(-1, *batch.glyphs.shape[2:])[flat_idx]
        if tc.adversarial:
            ce = sequence_ce(pyramid_out.logits, labels)
            l1 = glyph_l1(generated, targets, b, tc.l1_reduction)
            disc = model.discriminator
            # critic update first, on detached glyphs
            p_fake = disc(generated.detach()).clamp(PROB_EPS, 1 - PROB_EPS)
            p_real = disc(targets).clamp(PROB_EPS, 1 - PROB_EPS)
            loss_d = -tc.alpha * (torch.log(1 - p_fake)
                                  + torch.log(p_real)).sum() / b
            opt_d.zero_grad(set_to_none=True)
            loss_d.backward()
            opt_d.step()
            # generator update against the refreshed critic
            p_fake_g = disc(generated).clamp(PROB_EPS, 1 - PROB_EPS)
            loss_g = ce + l1 - tc.alpha * torch.log(p_fake_g).sum() / b
            opt_g.zero_grad(set_to_none=True)
            disc.zero_grad(set_to_none=True)
            loss_g.backward()
            grad_norm = torch.nn.utils.clip_grad_norm_(generator_parameters(model),
                                                       tc.clip_norm)
            opt_g.step()
            disc.zero_grad(set_to_none=True)
            loss = ce + l1
            record.update(loss_g=loss_g.item(), loss_d=loss_d.item())
        else:
            loss, ce, l1 = basic_loss(pyramid_out.logits, labels, generated,
                                      targets, b, tc.l1_reduction)
            opt_g.zero_grad(set_to_none=True)
            loss.backward()
            grad_norm = torch.nn.utils.clip_grad_norm_(generator_parameters(model),
                                                       tc.clip_norm)
            opt_g.step()
        record.update(l1=l1.item())
    else:
        ce = sequence_ce(pyramid_out.logits, labels)
        loss = ce
        opt_g.zero_grad(set_to_none=True)
        loss.backward()
        grad_norm = torch.nn.utils.clip_grad_norm_(generator_parameters(model),
                                                   tc.clip_norm)
        opt_g.step()

    record.update(loss=loss.item(), ce=ce.item(), grad_norm=float(grad_norm))
    if not math.isfinite(record["loss"]):
        raise RuntimeError(f"non-finite loss at iteration {iteration}; "
                           f"batch labels: {batch.texts}")
    return record


class ForwardSlice:
    """View of a ForwardOutput truncated to the first n decode steps."""

    def __init__(self, out, n: int):
        self.pyramid = out.pyramid
        self.steps = out.steps[:n]
        self.masks = out.masks[:, :n]
        self.enc_final = out.enc_final

    @property
    def logits(self):
        return torch.stack([s.logits for s in self.steps], dim=1)

    @property
    def glimpses(self):
        return torch.stack([s.glimpse for s in self.steps], dim=1)


def save_checkpoint(path: str | Path, model: SceneTextModel, opt_g, opt_d,
                    cfg: RunConfig, iteration: int) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    from .config import config_identity

    torch.save({
        "model": model.state_dict(),
        "opt_g": opt_g.state_dict() if opt_g else None,
        "opt_d": opt_d.state_dict() if opt_d else None,
        "config_identity": config_identity(cfg),
        "config": _cfg_to_dict(cfg),
        "iteration": iteration,
        "num_fonts": model.num_fonts,
        "charset": model.vocab.charset,
    }, path)


def _cfg_to_dict(cfg: RunConfig) -> dict:
    import dataclasses

    out = {"run_id": cfg.run_id, "seed": cfg.seed}
    for attr in RunConfig._SECTIONS.values():
        out[attr] = dataclasses.asdict(getattr(cfg, attr))
    return out


def _cfg_from_dict(data: dict) -> RunConfig:
    from .config import (AttnConfig, BackboneConfig, EvalConfig, GlyphConfig,
                         RenderConfig, SynthConfig, TrainConfig)

    cfg = RunConfig(run_id=data["run_id"], seed=data["seed"])
    classes = {"render": RenderConfig, "synth": SynthConfig, "backbone": BackboneConfig,
               "attn": AttnConfig, "glyph": GlyphConfig, "train": TrainConfig,
               "eval": EvalConfig}
    for attr, cls in classes.items():
        payload = {k: tuple(v) if isinstance(v, list) else v
                   for k, v in data[attr].items()}
        setattr(cfg, attr, cls(**payload))
    return cfg


def load_checkpoint(path: str | Path, device: str = "cpu"):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location=device, weights_only=False)
    cfg = _cfg_from_dict(payload["config"])
    vocab = Vocab(charset=payload["charset"])
    model = build_model(cfg, payload["num_fonts"], vocab, device)
    model.load_state_dict(payload["model"])
    return model, cfg, payload


class Trainer:
    """Drives the optimization loop; owns metrics, snapshots, checkpoints."""

    def __init__(self, cfg: RunConfig, manifest: DatasetManifest, data_root,
                 bank, run_dir: str | Path, device: str = "cpu"):
        self.cfg = cfg
        self.manifest = manifest
        self.data_root = Path(data_root)
        self.bank = bank
        self.run_dir = Path(run_dir)
        self.device = device
        self.vocab = Vocab(charset=bank.charset)
        self.model = build_model(cfg, bank.num_fonts, self.vocab, device)
        self.opt_g, self.opt_d = build_optimizers(self.model, cfg)
        (self.run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
        (self.run_dir / "embeddings").mkdir(parents=True, exist_ok=True)

    def _batches(self):
        epoch = 0
        while True:
            rng = np.random.default_rng((self.cfg.seed, epoch))
            yield from load_batches(self.manifest, self.data_root, "train",
                                    self.cfg.train.batch_size, self.bank, rng,
                                    vocab=self.vocab,
                                    t_max=self.cfg.synth.t_max)
            epoch += 1

    def _snapshot(self, iteration: int) -> None:
        np.save(self.run_dir / "embeddings" / f"snap_{iteration:06d}.npy",
                self.model.glyphs.fonts.snapshot())

    def train(self) -> list[dict]:
        tc = self.cfg.train
        torch.manual_seed(self.cfg.seed)
        metrics: list[dict] = []
        self._snapshot(0)
        batches = self._batches()
        for iteration in range(tc.iterations):
            batch = next(batches)
            batch = Batch(images=batch.images.to(self.device),
                          labels=batch.labels.to(self.device),
                          texts=batch.texts,
                          glyphs=batch.glyphs.to(self.device),
                          glyph_mask=batch.glyph_mask.to(self.device),
                          font_ids=batch.font_ids.to(self.device))
            record = train_step(self.model, batch, self.opt_g, self.opt_d,
                                self.cfg, iteration)
            metrics.append(record)
            nxt = iteration + 1
            if nxt % tc.snapshot_interval == 0 or nxt == tc.iterations:
                self._snapshot(nxt)
            if nxt % tc.checkpoint_interval == 0 or nxt == tc.iterations:
                save_checkpoint(self.run_dir / "checkpoints" / f"ckpt_{nxt:06d}.pt",
                                self.model, self.opt_g, self.opt_d, self.cfg, nxt)
        write_metrics(metrics, self.run_dir / "metrics.csv")
        return metrics


def write_metrics(metrics: list[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_FIELDS)
        writer.writeheader()
        for row in metrics:
            writer.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k]
                             for k in METRIC_FIELDS})


# ---------------------------------------------------------------------------
# Gradient oracles for the font embeddings
# ---------------------------------------------------------------------------

@dataclass
class GradCheckResult:
    analytic: np.ndarray
    numeric: np.ndarray
    rel_error: float
    targets_perturbed: bool


def _rel_error(a: np.ndarray, n: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    return float(np.max(np.abs(a - n) / denom))


def embedding_gradient_oracle(w_content: np.ndarray, w_embed: np.ndarray,
                              contents: np.ndarray, table: np.ndarray,
                              font_steps: np.ndarray, targets: np.ndarray,
                              font_k: int, h: float = 1e-5) -> GradCheckResult:
    """Analytic vs central-difference gradient on the one-layer toy generator.

    Each step t produces tanh(W_c c_t + W_z z_{font_steps[t]}); the loss is
    the summed absolute deviation from targets[t]. Only steps whose sampled
    font equals font_k contribute to the gradient of that embedding row.
    Targets within 1e-6 of the prediction are nudged by 1e-3 so the sign
    function is well-defined at the evaluation point.
    """
    w_content = np.asarray(w_content, dtype=np.float64)
    w_embed = np.asarray(w_embed, dtype=np.float64)
    contents = np.asarray(contents, dtype=np.float64)
    table = np.asarray(table, dtype=np.float64).copy()
    targets = np.asarray(targets, dtype=np.float64).copy()
    steps = len(font_steps)

    def predictions(tbl):
        pre = contents @ w_content.T + tbl[font_steps] @ w_embed.T
        return np.tanh(pre), pre

    preds, _ = predictions(table)
    perturbed = False
    close = np.abs(preds - targets) < 1e-6
    if close.any():
        targets[close] += 1e-3
        perturbed = True

    def loss(tbl):
        p, _ = predictions(tbl)
        return np.abs(p - targets).sum()

    preds, pre = predictions(table)
    analytic = np.zeros(table.shape[1])
    for t in range(steps):
        if font_steps[t] != font_k:
            continue
        dtanh = 1.0 - preds[t] ** 2
        analytic += w_embed.T @ (dtanh * np.sign(preds[t] - targets[t]))

    numeric = np.zeros_like(analytic)
    for j in range(table.shape[1]):
        plus = table.copy()
        plus[font_k, j] += h
        minus = table.copy()
        minus[font_k, j] -= h
        numeric[j] = (loss(plus) - loss(minus)) / (2 * h)

    return GradCheckResult(analytic=analytic, numeric=numeric,
                           rel_error=_rel_error(analytic, numeric),
                           targets_perturbed=perturbed)


def random_oracle_instance(rng: np.random.Generator, max_dim: int = 8):
    """Random small toy-generator instance for the oracle."""
    n = int(rng.integers(2, max_dim + 1))       # glyph dim
    q = int(rng.integers(2, max_dim + 1))       # content dim
    p = int(rng.integers(2, max_dim + 1))       # embedding dim
    m = int(rng.integers(2, 5))                 # fonts
    steps = int(rng.integers(1, 6))
    return dict(
        w_content=rng.normal(size=(n, q)),
        w_embed=rng.normal(size=(n, p)),
        contents=rng.normal(size=(steps, q)),
        table=rng.normal(0, 0.5, size=(m, p)),
        font_steps=rng.integers(0, m, size=steps),
        targets=rng.uniform(-0.9, 0.9, size=(steps, n)),
        font_k=int(rng.integers(0, m)),
    )


def full_model_embedding_grad_check(model: SceneTextModel, batch: Batch,
                                    font_k: int, num_coords: int = 16,
                                    h: float = 1e-5, seed: int = 0) -> GradCheckResult:
    """Autodiff vs finite differences on one embedding row of the full model.

    Runs in double precision and eval mode (frozen normalization stats) so
    repeated forwards are bit-reproducible.
    """
    model = model.double().eval()
    images = batch.images.double()
    lengths = (batch.labels != PAD).sum(dim=1)
    steps = int(lengths.max())
    labels = batch.labels[:, :steps]
    glyph_steps = steps - 1
    mask = batch.glyph_mask[:, :glyph_steps]
    fonts = batch.font_ids[:, :glyph_steps]
    targets_all = batch.glyphs[:, :glyph_steps].double()
    b = images.shape[0]

    def compute_loss() -> torch.Tensor:
        out = model(images, labels)
        trimmed = ForwardSlice(out, glyph_steps)
        generated, flat_idx = model.generate_step_glyphs(trimmed, fonts, mask)
        targets = targets_all.reshape(-1, *targets_all.shape[2:])[flat_idx]
        total, _, _ = basic_loss(out.logits, labels, generated, targets, b,
                                 model.cfg.train.l1_reduction)
        return total

    weight = model.glyphs.fonts.weight
    for p in model.parameters():
        p.requires_grad_(False)
    weight.requires_grad_(True)
    loss = compute_loss()
    loss.backward()
    grad = weight.grad[font_k].detach().clone().numpy()

    rng = np.random.default_rng(seed)
    coords = rng.choice(weight.shape[1], size=min(num_coords, weight.shape[1]),
                        replace=False)
    analytic = grad[coords]
    numeric = np.zeros_like(analytic)
    with torch.no_grad():
        for idx, j in enumerate(coords):
            original = float(weight[font_k, j])
            weight[font_k, j] = original + h
            plus = float(compute_loss())
            weight[font_k, j] = original - h
            minus = float(compute_loss())
            weight[font_k, j] = original
            numeric[idx] = (plus - minus) / (2 * h)

    return GradCheckResult(analytic=analytic, numeric=numeric,
                           rel_error=_rel_error(analytic, numeric),
                           targets_perturbed=False)
