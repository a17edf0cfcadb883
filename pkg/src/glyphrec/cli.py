"""Single command-line entry point for every workflow.

Subcommands: render-glyphs, synth-data, train, eval, ablate, sweep-fonts,
viz, grad-check. All accept an INI config file plus repeated
``--set section.key=value`` overrides; every run directory receives the
effective config snapshot. Exit codes: 0 success, 1 invalid config or
runtime failure (one-line error on stderr), 2 usage.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import (ConfigurationError, RunConfig, apply_overrides,
                     load_config, resolve_device, save_config)


def _load_cfg(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "set", None):
        apply_overrides(cfg, args.set)
    return cfg


def _add_common(parser):
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--seed", type=int, help="override run seed")
    parser.add_argument("--set", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="config override")


def cmd_render_glyphs(args) -> int:
    from .corpus import build_glyph_bank, register_fonts, save_glyph_bank
    from .synthgen import load_manifest

    cfg = _load_cfg(args)
    registry = register_fonts(args.fonts)
    if args.names_from:
        manifest = load_manifest(args.names_from)
        registry = registry.subset(manifest.train_fonts)
    elif args.names:
        registry = registry.subset(args.names.split(","))
    bank = build_glyph_bank(cfg.render.charset, registry, cfg.render)
    digest = save_glyph_bank(bank, args.out)
    print(f"glyph bank: {bank.num_fonts} fonts, {len(bank.table)} glyphs, "
          f"{len(bank.missing)} missing, manifest sha256 {digest[:16]}")
    return 0


def cmd_synth_data(args) -> int:
    from .corpus import register_fonts
    from .synthgen import generate_dataset

    cfg = _load_cfg(args)
    registry = register_fonts(args.fonts)
    out = Path(args.out)
    manifest = generate_dataset(registry, cfg.synth, cfg.seed, out)
    save_config(cfg, out / "config.ini")
    print(f"dataset: {len(manifest.records)} samples, train fonts "
          f"{manifest.train_fonts}, novel fonts {manifest.novel_fonts}")
    return 0


def cmd_train(args) -> int:
    from .corpus import load_glyph_bank
    from .synthgen import load_manifest
    from .training import Trainer

    cfg = _load_cfg(args)
    data_root = Path(args.data)
    manifest = load_manifest(data_root / "manifest.jsonl")
    bank = load_glyph_bank(args.glyphs)
    run_dir = Path(args.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    save_config(cfg, run_dir / "config.ini")
    trainer = Trainer(cfg, manifest, data_root, bank, run_dir,
                      device=resolve_device())
    metrics = trainer.train()
    print(f"trained {len(metrics)} iterations; final loss "
          f"{metrics[-1]['loss']:.4f}; run dir {run_dir}")
    return 0


def cmd_eval(args) -> int:
    from .corpus import load_glyph_bank
    from .evalviz import evaluate, save_report
    from .synthgen import load_manifest
    from .training import load_checkpoint

    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        raise ConfigurationError(f"checkpoint not found: {ckpt}")
    model, cfg, _ = load_checkpoint(ckpt, device=resolve_device())
    data_root = Path(args.data)
    manifest = load_manifest(data_root / "manifest.jsonl")
    bank = load_glyph_bank(args.glyphs)
    report = evaluate(model, manifest, data_root, bank,
                      batch_size=cfg.eval.batch_size, l1_seed=cfg.eval.l1_seed)
    out = Path(args.out)
    save_report(report, out)
    for split, acc in sorted(report.word_accuracy.items()):
        print(f"{split}: word accuracy {acc:.4f} "
              f"({report.sample_counts[split]} samples)")
    return 0


def cmd_ablate(args) -> int:
    from .corpus import load_glyph_bank
    from .evalviz import AblationVariant, aggregate_sweep, run_ablation
    from .synthgen import load_manifest

    cfg = _load_cfg(args)
    data_root = Path(args.data)
    manifest = load_manifest(data_root / "manifest.jsonl")
    bank = load_glyph_bank(args.glyphs)
    variants = [AblationVariant(v) for v in args.variants.split(",")]
    results = [run_ablation(v, cfg, manifest, data_root, bank, args.budget,
                            cfg.seed, args.out, device=resolve_device())
               for v in variants]
    table = aggregate_sweep(results)
    for name, row in table.items():
        print(f"{name}: final L1 {row['final_l1']:.4f}, "
              f"accuracy {row['word_accuracy']}")
    return 0


def cmd_sweep_fonts(args) -> int:
    from .corpus import load_glyph_bank
    from .evalviz import font_count_sweep
    from .synthgen import load_manifest
    from .training import load_checkpoint

    cfg = _load_cfg(args)
    model, _, _ = load_checkpoint(args.checkpoint, device="cpu")
    table = model.glyphs.fonts.snapshot()
    data_root = Path(args.data)
    manifest = load_manifest(data_root / "manifest.jsonl")
    bank = load_glyph_bank(args.glyphs)
    counts = [int(c) for c in args.counts.split(",")]
    rows = font_count_sweep(counts, table, cfg, manifest, data_root, bank,
                            args.budget, cfg.seed, args.out,
                            device=resolve_device())
    for row in rows:
        print(f"{row['num_fonts']} fonts: accuracy {row['word_accuracy']}")
    return 0


def cmd_viz(args) -> int:
    from .corpus import load_glyph_bank
    from .evalviz import (dump_attention_heatmaps, dump_embedding_views,
                          dump_glyph_strips, load_snapshots)
    from .synthgen import load_batches, load_manifest
    from .training import load_checkpoint

    model, cfg, _ = load_checkpoint(args.checkpoint, device="cpu")
    data_root = Path(args.data)
    manifest = load_manifest(data_root / "manifest.jsonl")
    bank = load_glyph_bank(args.glyphs)
    rng = np.random.default_rng(cfg.seed)
    batch = next(load_batches(manifest, data_root, args.split, args.num_samples,
                              bank, rng, vocab=model.vocab,
                              t_max=cfg.synth.t_max, shuffle=False))
    out = Path(args.out)
    written = dump_attention_heatmaps(model, batch.images, out / "heatmaps")
    written += dump_glyph_strips(model, batch.images,
                                 list(range(min(4, bank.num_fonts))),
                                 out / "glyphs")
    run_dir = Path(args.checkpoint).parent.parent
    snaps = load_snapshots(run_dir)
    if snaps:
        written += dump_embedding_views(snaps, out / "embeddings", bank)
    print(f"wrote {len(written)} visualization files under {out}")
    return 0


def cmd_grad_check(args) -> int:
    from .training import embedding_gradient_oracle, random_oracle_instance

    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    worst = 0.0
    for _ in range(args.trials):
        inst = random_oracle_instance(rng)
        result = embedding_gradient_oracle(**inst)
        worst = max(worst, result.rel_error)
    print(f"rel_error {worst:.3e} over {args.trials} instances")
    return 0 if worst < 1e-4 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glyphrec")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render-glyphs", help="rasterize the glyph bank")
    _add_common(p)
    p.add_argument("--fonts", required=True, help="directory of font files")
    p.add_argument("--out", required=True)
    p.add_argument("--names", help="comma-separated font names to include")
    p.add_argument("--names-from", help="dataset manifest; use its train fonts")
    p.set_defaults(func=cmd_render_glyphs)

    p = sub.add_parser("synth-data", help="generate the synthetic dataset")
    _add_common(p)
    p.add_argument("--fonts", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", help="train a model")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--glyphs", required=True, help="glyph bank directory")
    p.add_argument("--out", required=True, help="run directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--glyphs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="framework-comparison sweep")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--glyphs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--variants",
                   default="CNN-DCNN,CNN-LSTM-DCNN,ATT-NOSKIP-FFE,ATT-FFE,ATT-TFE")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep-fonts", help="font-count sweep via k-means selection")
    _add_common(p)
    p.add_argument("--checkpoint", required=True, help="full-font trained model")
    p.add_argument("--data", required=True)
    p.add_argument("--glyphs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--counts", default="2,5,10")
    p.set_defaults(func=cmd_sweep_fonts)

    p = sub.add_parser("viz", help="attention/glyph/embedding visualizations")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--glyphs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test_seen_fonts")
    p.add_argument("--num-samples", type=int, default=4)
    p.set_defaults(func=cmd_viz)

    p = sub.add_parser("grad-check", help="font-embedding gradient oracle")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grad_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
