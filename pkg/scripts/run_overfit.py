#!/usr/bin/env python3
"""Overfit experiment: 100 samples, 10 fonts, CPU-sized model.

Generates data, trains with the basic objective, and prints train accuracy,
glyph-L1 descent, and embedding-movement statistics.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from glyphrec.config import save_config
from glyphrec.corpus import build_glyph_bank, register_fonts
from glyphrec.evalviz import load_snapshots, predict_split, word_accuracy
from glyphrec.presets import acceptance_overfit_config
from glyphrec.synthgen import generate_dataset
from glyphrec.training import Trainer


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--fonts", required=True)
    parser.add_argument("--out", default="runs/overfit")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--iterations", type=int, default=2000)
    args = parser.parse_args()

    cfg = acceptance_overfit_config()
    cfg.seed = args.seed
    cfg.train.iterations = args.iterations
    out = Path(args.out)
    registry = register_fonts(args.fonts)
    manifest = generate_dataset(registry, cfg.synth, cfg.seed, out / "data")
    bank = build_glyph_bank(cfg.render.charset,
                            registry.subset(manifest.train_fonts), cfg.render)
    save_config(cfg, out / "config.ini")

    trainer = Trainer(cfg, manifest, out / "data", bank, out / "run")
    t0 = time.time()
    metrics = trainer.train()
    print(f"{len(metrics)} iterations in {(time.time() - t0) / 60:.1f} min")

    preds, gts, _ = predict_split(trainer.model, manifest, out / "data",
                                  "train", bank, 32, cfg.synth.t_max)
    print(f"train word accuracy: {word_accuracy(preds, gts):.3f}")
    l1s = np.array([m["l1"] for m in metrics])
    print(f"glyph L1: init {l1s[:10].mean():.3f} -> final {l1s[-20:].mean():.3f} "
          f"(ratio {l1s[-20:].mean() / l1s[:10].mean():.2f})")
    snaps = load_snapshots(out / "run")
    its = sorted(snaps)
    early = np.linalg.norm(snaps[its[1]] - snaps[0]) / its[1]
    late_span = its[-1] - its[len(its) // 2]
    late = np.linalg.norm(snaps[its[-1]] - snaps[its[len(its) // 2]]) / late_span
    print(f"embedding movement per iteration: early {early:.2e}, late {late:.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
