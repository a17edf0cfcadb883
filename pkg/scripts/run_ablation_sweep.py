#!/usr/bin/env python3
"""Framework comparison at the 5k-sample scale: final glyph-L1 per variant.

Trains CNN-DCNN, CNN-LSTM-DCNN, ATT-NOSKIP-FFE, ATT-FFE and ATT-TFE under
one seed and budget and prints the aligned final L1 table.
"""

import argparse
from pathlib import Path

from glyphrec.corpus import build_glyph_bank, register_fonts
from glyphrec.evalviz import AblationVariant, aggregate_sweep, run_ablation
from glyphrec.presets import acceptance_sweep_config
from glyphrec.synthgen import generate_dataset

DEFAULT = "CNN-DCNN,CNN-LSTM-DCNN,ATT-NOSKIP-FFE,ATT-FFE,ATT-TFE"


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--fonts", required=True)
    parser.add_argument("--out", default="runs/ablation")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--budget", type=int, default=1500)
    parser.add_argument("--variants", default=DEFAULT)
    args = parser.parse_args()

    cfg = acceptance_sweep_config()
    cfg.seed = args.seed
    out = Path(args.out)
    registry = register_fonts(args.fonts)
    manifest = generate_dataset(registry, cfg.synth, cfg.seed, out / "data")
    bank = build_glyph_bank(cfg.render.charset,
                            registry.subset(manifest.train_fonts), cfg.render)

    results = []
    for name in args.variants.split(","):
        variant = AblationVariant(name)
        print(f"== training {variant.value} (seed {cfg.seed}, "
              f"budget {args.budget}) ==")
        results.append(run_ablation(variant, cfg, manifest, out / "data", bank,
                                    args.budget, cfg.seed, out))
    table = aggregate_sweep(results)
    print(f"{'variant':18s} {'final L1':>9s} {'seen acc':>9s} {'novel acc':>10s}")
    for name, row in table.items():
        acc = row["word_accuracy"]
        print(f"{name:18s} {row['final_l1']:9.4f} "
              f"{acc['test_seen_fonts']:9.3f} {acc['test_novel_fonts']:10.3f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
