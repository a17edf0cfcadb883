#!/usr/bin/env python3
"""Font-count sweep: k-means-select representative fonts, retrain, compare.

Requires a trained full-font checkpoint whose embedding table drives the
selection.
"""

import argparse
from pathlib import Path

from glyphrec.corpus import load_glyph_bank
from glyphrec.evalviz import font_count_sweep
from glyphrec.presets import acceptance_sweep_config
from glyphrec.synthgen import load_manifest
from glyphrec.training import load_checkpoint


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--data", required=True)
    parser.add_argument("--glyphs", required=True)
    parser.add_argument("--out", default="runs/font_sweep")
    parser.add_argument("--budget", type=int, default=1500)
    parser.add_argument("--counts", default="2,5,10")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    model, _, _ = load_checkpoint(args.checkpoint)
    table = model.glyphs.fonts.snapshot()
    cfg = acceptance_sweep_config()
    cfg.seed = args.seed
    manifest = load_manifest(Path(args.data) / "manifest.jsonl")
    bank = load_glyph_bank(args.glyphs)
    counts = [int(c) for c in args.counts.split(",")]
    rows = font_count_sweep(counts, table, cfg, manifest, Path(args.data),
                            bank, args.budget, cfg.seed, args.out)
    for row in rows:
        acc = row["word_accuracy"]
        print(f"{row['num_fonts']:3d} fonts: seen {acc['test_seen_fonts']:.3f} "
              f"novel {acc['test_novel_fonts']:.3f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
