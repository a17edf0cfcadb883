"""Recognition metrics, ablation/sweep harnesses, and visualization dumps."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import torch

from .config import ConfigurationError, RunConfig, clone_config, config_identity
from .corpus import GlyphBank
from .model import SceneTextModel
from .synthgen import DatasetManifest, load_batches
from .training import Trainer, glyph_l1
from .vocab import Vocab


def _fold(text: str) -> str:
    return "".join(c for c in text.lower() if c.isalnum())


def word_accuracy(preds: list[str], gts: list[str]) -> float:
    """Case-folded, alphanumeric-filtered exact-match fraction."""
    if not preds or len(preds) != len(gts):
        raise ValueError("predictions and ground truths must be equal-length, non-empty")
    hits = sum(1 for p, g in zip(preds, gts) if _fold(p) == _fold(g))
    return hits / len(preds)


@dataclass
class EvalReport:
    word_accuracy: dict[str, float]
    mean_l1_per_font: dict[str, float]
    predictions: dict[str, list[tuple[str, str]]]  # split -> (pred, gt)
    config_identity: str
    sample_counts: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "word_accuracy": self.word_accuracy,
            "mean_l1_per_font": self.mean_l1_per_font,
            "sample_counts": self.sample_counts,
            "config_identity": self.config_identity,
        }, sort_keys=True, indent=1)


@torch.no_grad()
def predict_split(model: SceneTextModel, manifest: DatasetManifest, root,
                  split: str, bank: GlyphBank, batch_size: int, t_max: int,
                  l1_seed: int = 123):
    """Greedy predictions plus per-font glyph L1 over one split."""
    model.eval()
    rng = np.random.default_rng(l1_seed)
    preds: list[str] = []
    gts: list[str] = []
    l1_sums: dict[int, float] = {}
    l1_counts: dict[int, int] = {}
    glyph_on = model.cfg.train.glyph_generation
    for batch in load_batches(manifest, root, split, batch_size, bank, rng,
                              vocab=model.vocab, t_max=t_max, shuffle=False):
        out = model.greedy(batch.images, t_max)
        preds.extend(model.decode_texts(out))
        gts.extend(batch.texts)
        if not glyph_on:
            continue
        # teacher-forced masks for glyph reconstruction quality
        tf_out = model(batch.images, batch.labels[:, :batch.glyph_mask.shape[1] + 1])
        from .training import ForwardSlice

        trimmed = ForwardSlice(tf_out, batch.glyph_mask.shape[1])
        generated, flat_idx = model.generate_step_glyphs(trimmed, batch.font_ids,
                                                         batch.glyph_mask)
        targets = batch.glyphs.reshape(-1, *batch.glyphs.shape[2:])[flat_idx]
        fonts_flat = batch.font_ids.reshape(-1)[flat_idx]
        per = (generated - targets).abs().mean(dim=(1, 2, 3))
        for fid, val in zip(fonts_flat.tolist(), per.tolist()):
            l1_sums[fid] = l1_sums.get(fid, 0.0) + val
            l1_counts[fid] = l1_counts.get(fid, 0) + 1
    per_font = {bank.registry.name(fid): l1_sums[fid] / l1_counts[fid]
                for fid in sorted(l1_sums)}
    return preds, gts, per_font


def evaluate(model: SceneTextModel, manifest: DatasetManifest, root,
             bank: GlyphBank, splits=("test_seen_fonts", "test_novel_fonts"),
             batch_size: int = 32, l1_seed: int = 123) -> EvalReport:
    accs: dict[str, float] = {}
    preds_by_split: dict[str, list[tuple[str, str]]] = {}
    counts: dict[str, int] = {}
    per_font_all: dict[str, float] = {}
    t_max = model.cfg.synth.t_max
    for split in splits:
        preds, gts, per_font = predict_split(model, manifest, root, split, bank,
                                             batch_size, t_max, l1_seed)
        accs[split] = word_accuracy(preds, gts)
        preds_by_split[split] = list(zip(preds, gts))
        counts[split] = len(preds)
        if split == "test_seen_fonts":
            per_font_all = per_font
    return EvalReport(word_accuracy=accs, mean_l1_per_font=per_font_all,
                      predictions=preds_by_split,
                      config_identity=config_identity(model.cfg),
                      sample_counts=counts)


def save_report(report: EvalReport, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json())
    with open(out_dir / "predictions.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split", "prediction", "ground_truth"])
        for split in sorted(report.predictions):
            for pred, gt in report.predictions[split]:
                writer.writerow([split, pred, gt])


def regenerate_report(out_dir: str | Path) -> EvalReport:
    """Rebuild the report from persisted predictions; bit-identical metrics."""
    out_dir = Path(out_dir)
    data = json.loads((out_dir / "report.json").read_text())
    preds: dict[str, list[tuple[str, str]]] = {}
    with open(out_dir / "predictions.csv", newline="") as fh:
        for row in list(csv.reader(fh))[1:]:
            preds.setdefault(row[0], []).append((row[1], row[2]))
    accs = {split: word_accuracy([p for p, _ in pairs], [g for _, g in pairs])
            for split, pairs in preds.items()}
    return EvalReport(word_accuracy=accs,
                      mean_l1_per_font=data["mean_l1_per_font"],
                      predictions=preds,
                      config_identity=data["config_identity"],
                      sample_counts={s: len(p) for s, p in preds.items()})


# ---------------------------------------------------------------------------
# Ablation variants and sweeps
# ---------------------------------------------------------------------------

class AblationVariant(str, Enum):
    CNN_DCNN = "CNN-DCNN"
    CNN_LSTM_DCNN = "CNN-LSTM-DCNN"
    ATT_NOSKIP_FFE = "ATT-NOSKIP-FFE"
    ATT_FFE = "ATT-FFE"
    ATT_TFE = "ATT-TFE"
    NO_GG = "NO-GG"


def variant_config(base: RunConfig, variant: AblationVariant) -> RunConfig:
    """Complete buildable config for a framework-comparison variant.

    The recognition branch is identical across variants; only the glyph
    branch differs (content source, skips, embedding trainability, or its
    removal), so reconstruction curves isolate the generation pathway.
    """
    cfg = clone_config(base)
    cfg.run_id = f"{base.run_id}-{variant.value}"
    if variant == AblationVariant.CNN_DCNN:
        cfg.glyph.glyph_source = "pooled"
        cfg.glyph.skips = False
        cfg.train.trainable_embeddings = False
    elif variant == AblationVariant.CNN_LSTM_DCNN:
        cfg.glyph.glyph_source = "encoder"
        cfg.glyph.skips = False
        cfg.train.trainable_embeddings = False
    elif variant == AblationVariant.ATT_NOSKIP_FFE:
        cfg.glyph.skips = False
        cfg.train.trainable_embeddings = False
    elif variant == AblationVariant.ATT_FFE:
        cfg.train.trainable_embeddings = False
    elif variant == AblationVariant.ATT_TFE:
        pass
    elif variant == AblationVariant.NO_GG:
        cfg.train.glyph_generation = False
        cfg.train.adversarial = False
    return cfg


@dataclass
class AblationResult:
    variant: AblationVariant
    seed: int
    metrics: list[dict]
    report: EvalReport
    run_dir: str

    def l1_curve(self) -> list[tuple[int, float]]:
        return [(m["iteration"], m["l1"]) for m in self.metrics
                if not np.isnan(m["l1"])]

    def final_l1(self, tail: int = 20) -> float:
        curve = [v for _, v in self.l1_curve()]
        if not curve:
            return float("nan")
        return float(np.mean(curve[-tail:]))


def run_ablation(variant: AblationVariant, base_cfg: RunConfig,
                 manifest: DatasetManifest, data_root, bank: GlyphBank,
                 budget: int, seed: int, out_dir: str | Path,
                 device: str = "cpu") -> AblationResult:
    """Train one variant for a fixed budget and evaluate it."""
    cfg = variant_config(base_cfg, variant)
    cfg.seed = seed
    cfg.train.iterations = budget
    run_dir = Path(out_dir) / f"{variant.value}_seed{seed}"
    trainer = Trainer(cfg, manifest, data_root, bank, run_dir, device)
    metrics = trainer.train()
    report = evaluate(trainer.model, manifest, data_root, bank)
    save_report(report, run_dir)
    return AblationResult(variant=variant, seed=seed, metrics=metrics,
                          report=report, run_dir=str(run_dir))


def aggregate_sweep(results: list[AblationResult]) -> dict:
    """Aligned final-L1 table; refuses mixed-seed comparisons."""
    seeds = {r.seed for r in results}
    if len(seeds) != 1:
        raise ConfigurationError(f"sweep mixes seeds {sorted(seeds)}; "
                                 "refusing to aggregate")
    return {r.variant.value: {"final_l1": r.final_l1(),
                              "word_accuracy": r.report.word_accuracy}
            for r in results}


def font_count_sweep(counts: list[int], table: np.ndarray, base_cfg: RunConfig,
                     manifest: DatasetManifest, data_root, full_bank: GlyphBank,
                     budget: int, seed: int, out_dir: str | Path,
                     device: str = "cpu") -> list[dict]:
    """Retrain with k-means-selected font subsets; report split accuracies."""
    from .corpus import build_glyph_bank
    from .glyphgan import select_representative_fonts

    rows = []
    for count in counts:
        if count > full_bank.num_fonts:
            raise ConfigurationError(f"requested {count} fonts but bank has "
                                     f"{full_bank.num_fonts}")
        ids = select_representative_fonts(table, count, seed=seed)
        names = [full_bank.registry.name(i) for i in ids]
        sub_registry = full_bank.registry.subset(names)
        sub_bank = build_glyph_bank(full_bank.charset, sub_registry,
                                    full_bank.render_cfg)
        cfg = clone_config(base_cfg)
        cfg.run_id = f"{base_cfg.run_id}-fonts{count}"
        cfg.seed = seed
        cfg.train.iterations = budget
        run_dir = Path(out_dir) / f"fonts{count}"
        trainer = Trainer(cfg, manifest, data_root, sub_bank, run_dir, device)
        trainer.train()
        report = evaluate(trainer.model, manifest, data_root, sub_bank)
        save_report(report, run_dir)
        rows.append({"num_fonts": count, "font_names": names,
                     "word_accuracy": report.word_accuracy})
    return rows


# ---------------------------------------------------------------------------
# Visualization dumps
# ---------------------------------------------------------------------------

def dump_attention_heatmaps(model: SceneTextModel, images: torch.Tensor,
                            out_dir: str | Path, prefix: str = "sample") -> list[Path]:
    """Per decode step: mask upscaled to input size, colored, 50/50 blended."""
    import matplotlib.cm as cm
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.eval()
    t_max = model.cfg.synth.t_max
    written: list[Path] = []
    with torch.no_grad():
        out = model.greedy(images, t_max)
        texts = model.decode_texts(out)
        masks = out.masks  # (B, T, H, W)
        for b in range(images.shape[0]):
            base = images[b].permute(1, 2, 0).cpu().numpy()
            h0, w0 = base.shape[:2]
            for t, char in enumerate(texts[b]):
                mask = masks[b, t].cpu().numpy()
                mask = np.asarray(Image.fromarray(mask).resize((w0, h0),
                                                               Image.BILINEAR))
                span = mask.max() - mask.min()
                norm = (mask - mask.min()) / (span if span > 0 else 1.0)
                colored = cm.jet(norm)[:, :, :3]
                blend = np.clip(0.5 * base + 0.5 * colored, 0, 1)
                path = out_dir / f"{prefix}{b:03d}_t{t:02d}_{char}.png"
                Image.fromarray((blend * 255).astype(np.uint8)).save(path)
                written.append(path)
    return written


def dump_glyph_strips(model: SceneTextModel, images: torch.Tensor,
                      font_ids: list[int], out_dir: str | Path,
                      prefix: str = "strip") -> list[Path]:
    """Generated glyph grid per image: decode steps x requested fonts."""
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.eval()
    t_max = model.cfg.synth.t_max
    g = model.cfg.glyph.glyph_size
    written: list[Path] = []
    with torch.no_grad():
        out = model.greedy(images, t_max)
        texts = model.decode_texts(out)
        for b in range(images.shape[0]):
            steps = len(texts[b])
            if steps == 0:
                continue
            grid = np.ones((len(font_ids) * g, steps * g), dtype=np.float32)
            for row, fid in enumerate(font_ids):
                for t in range(steps):
                    levels = [lvl[b:b + 1] for lvl in out.pyramid.levels]
                    mask = out.masks[b:b + 1, t]
                    scale_masks = model.glyphs.upsampled_masks(mask, model.level_sizes)
                    ids = torch.tensor([fid], device=images.device)
                    glyph = model.glyphs(levels, scale_masks, ids)
                    grid[row * g:(row + 1) * g, t * g:(t + 1) * g] = \
                        glyph[0, 0].cpu().numpy()
            path = out_dir / f"{prefix}{b:03d}_{texts[b]}.png"
            Image.fromarray((grid * 255).astype(np.uint8), mode="L").save(path)
            written.append(path)
    return written


def pca_2d(table: np.ndarray) -> np.ndarray:
    """Top-2 principal coordinates with a deterministic sign convention."""
    centered = table - table.mean(axis=0, keepdims=True)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:2]
    for i in range(2):
        j = np.argmax(np.abs(components[i]))
        if components[i, j] < 0:
            components[i] = -components[i]
    return centered @ components.T


def dump_embedding_views(snapshots: dict[int, np.ndarray], out_dir: str | Path,
                         bank: GlyphBank | None = None) -> list[Path]:
    """PCA scatter of the final table plus per-snapshot value histograms."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.offsetbox import AnnotationBbox, OffsetImage

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not snapshots:
        raise ValueError("need at least one embedding snapshot")
    written: list[Path] = []

    final_iter = max(snapshots)
    coords = pca_2d(snapshots[final_iter])
    fig, ax = plt.subplots(figsize=(8, 8))
    ax.scatter(coords[:, 0], coords[:, 1], s=12, color="tab:blue")
    if bank is not None:
        for fid in range(coords.shape[0]):
            if bank.has("A", fid):
                thumb = OffsetImage(bank.glyph("A", fid), cmap="gray", zoom=0.75)
                ax.add_artist(AnnotationBbox(thumb, coords[fid], frameon=False))
    ax.set_title(f"font embeddings, PCA at iteration {final_iter}")
    pca_path = out_dir / "embedding_pca.png"
    fig.savefig(pca_path, dpi=110)
    plt.close(fig)
    written.append(pca_path)

    iters = sorted(snapshots)
    fig, axes = plt.subplots(len(iters), 1, figsize=(6, 1.6 * len(iters)),
                             sharex=True, squeeze=False)
    for ax, it in zip(axes[:, 0], iters):
        ax.hist(snapshots[it].ravel(), bins=60, color="tab:orange")
        ax.set_ylabel(f"it {it}", rotation=0, ha="right", va="center")
    axes[-1, 0].set_xlabel("embedding value")
    hist_path = out_dir / "embedding_histograms.png"
    fig.tight_layout()
    fig.savefig(hist_path, dpi=110)
    plt.close(fig)
    written.append(hist_path)
    return written


def load_snapshots(run_dir: str | Path) -> dict[int, np.ndarray]:
    snaps = {}
    for path in sorted(Path(run_dir, "embeddings").glob("snap_*.npy")):
        snaps[int(path.stem.split("_")[1])] = np.load(path)
    return snaps
