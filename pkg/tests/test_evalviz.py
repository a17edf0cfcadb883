import hashlib

import numpy as np
import pytest
import torch

from glyphrec.evalviz import (AblationVariant, EvalReport, aggregate_sweep,
                              dump_attention_heatmaps, dump_embedding_views,
                              evaluate, pca_2d, regenerate_report, run_ablation,
                              save_report, variant_config, word_accuracy)
from glyphrec.training import Trainer


class TestWordAccuracy:
    def test_exact_match(self):
        assert word_accuracy(["abc", "D4"], ["abc", "D4"]) == 1.0

    def test_case_folded(self):
        assert word_accuracy(["Apple"], ["apple"]) == 1.0

    def test_punctuation_ignored(self):
        assert word_accuracy(["it's"], ["its"]) == 1.0

    def test_fraction(self):
        assert word_accuracy(["a", "b", "c", "x"], ["a", "b", "c", "d"]) == 0.75

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            word_accuracy([], [])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            word_accuracy(["a"], ["a", "b"])


class TestVariantConfigs:
    def test_every_variant_buildable(self, tiny_cfg):
        from glyphrec.model import build_model

        for variant in AblationVariant:
            cfg = variant_config(tiny_cfg, variant)
            model = build_model(cfg, num_fonts=3)
            assert model is not None

    def test_no_gg_disables_generation(self, tiny_cfg):
        cfg = variant_config(tiny_cfg, AblationVariant.NO_GG)
        assert not cfg.train.glyph_generation
        assert not cfg.train.adversarial

    def test_base_config_untouched(self, tiny_cfg):
        variant_config(tiny_cfg, AblationVariant.CNN_DCNN)
        assert tiny_cfg.glyph.glyph_source == "glimpse"
        assert tiny_cfg.train.trainable_embeddings


@pytest.fixture(scope="module")
def trained(mini_data, tmp_path_factory):
    from glyphrec.config import small_preset

    manifest, root, bank = mini_data
    cfg = small_preset()
    cfg.train.batch_size = 4
    cfg.train.iterations = 4
    cfg.train.checkpoint_interval = 4
    cfg.train.snapshot_interval = 2
    run_dir = tmp_path_factory.mktemp("trained_run")
    trainer = Trainer(cfg, manifest, root, bank, run_dir)
    trainer.train()
    return trainer, run_dir


class TestEvaluate:
    def test_report_contents(self, trained, mini_data):
        trainer, _ = trained
        manifest, root, bank = mini_data
        report = evaluate(trainer.model, manifest, root, bank)
        assert set(report.word_accuracy) == {"test_seen_fonts", "test_novel_fonts"}
        for acc in report.word_accuracy.values():
            assert 0.0 <= acc <= 1.0
        assert report.sample_counts["test_seen_fonts"] == 8
        assert report.sample_counts["test_novel_fonts"] == 6
        assert report.mean_l1_per_font  # glyph branch on -> per-font table

    def test_eval_does_not_mutate_parameters(self, trained, mini_data):
        trainer, _ = trained
        manifest, root, bank = mini_data

        def digest(model):
            h = hashlib.sha256()
            for _, p in sorted(model.state_dict().items()):
                h.update(p.numpy().tobytes())
            return h.hexdigest()

        before = digest(trainer.model)
        evaluate(trainer.model, manifest, root, bank)
        assert digest(trainer.model) == before

    def test_report_roundtrip_bit_identical(self, trained, mini_data, tmp_path):
        trainer, _ = trained
        manifest, root, bank = mini_data
        report = evaluate(trainer.model, manifest, root, bank)
        save_report(report, tmp_path)
        again = regenerate_report(tmp_path)
        assert again.word_accuracy == report.word_accuracy
        assert again.to_json() == report.to_json()

    def test_eval_deterministic(self, trained, mini_data):
        trainer, _ = trained
        manifest, root, bank = mini_data
        a = evaluate(trainer.model, manifest, root, bank)
        b = evaluate(trainer.model, manifest, root, bank)
        assert a.to_json() == b.to_json()


class TestAblationHarness:
    def test_two_variant_sweep(self, mini_data, tiny_cfg, tmp_path):
        manifest, root, bank = mini_data
        results = [run_ablation(v, tiny_cfg, manifest, root, bank, budget=2,
                                seed=5, out_dir=tmp_path)
                   for v in (AblationVariant.ATT_TFE, AblationVariant.NO_GG)]
        table = aggregate_sweep(results)
        assert set(table) == {"ATT-TFE", "NO-GG"}
        assert np.isfinite(table["ATT-TFE"]["final_l1"])
        assert np.isnan(table["NO-GG"]["final_l1"])  # no reconstruction column

    def test_mixed_seeds_refused(self, mini_data, tiny_cfg, tmp_path):
        from glyphrec.config import ConfigurationError

        manifest, root, bank = mini_data
        results = [run_ablation(AblationVariant.NO_GG, tiny_cfg, manifest, root,
                                bank, budget=1, seed=s, out_dir=tmp_path / str(s))
                   for s in (1, 2)]
        with pytest.raises(ConfigurationError):
            aggregate_sweep(results)

    def test_same_seed_same_curve(self, mini_data, tiny_cfg, tmp_path):
        manifest, root, bank = mini_data
        a = run_ablation(AblationVariant.ATT_FFE, tiny_cfg, manifest, root, bank,
                         budget=2, seed=3, out_dir=tmp_path / "a")
        b = run_ablation(AblationVariant.ATT_FFE, tiny_cfg, manifest, root, bank,
                         budget=2, seed=3, out_dir=tmp_path / "b")
        assert a.l1_curve() == b.l1_curve()


class TestFontCountSweep:
    def test_rows_and_identity(self, mini_data, tiny_cfg, tmp_path):
        from glyphrec.evalviz import font_count_sweep

        manifest, root, bank = mini_data
        table = np.random.default_rng(0).normal(0, 0.1,
                                                size=(bank.num_fonts, 8))
        rows = font_count_sweep([2, bank.num_fonts], table, tiny_cfg, manifest,
                                root, bank, budget=1, seed=0,
                                out_dir=tmp_path)
        assert len(rows) == 2
        assert rows[0]["num_fonts"] == 2
        assert len(rows[1]["font_names"]) == bank.num_fonts

    def test_count_above_m_rejected(self, mini_data, tiny_cfg, tmp_path):
        from glyphrec.config import ConfigurationError
        from glyphrec.evalviz import font_count_sweep

        manifest, root, bank = mini_data
        table = np.zeros((bank.num_fonts, 4))
        with pytest.raises((ConfigurationError, ValueError)):
            font_count_sweep([bank.num_fonts + 1], table, tiny_cfg, manifest,
                             root, bank, budget=1, seed=0, out_dir=tmp_path)


class TestVisualizations:
    def test_heatmap_panels_per_emitted_char(self, trained, mini_data, tmp_path):
        trainer, _ = trained
        manifest, root, bank = mini_data
        from glyphrec.synthgen import load_batches

        batch = next(load_batches(manifest, root, "test_seen_fonts", 2, bank,
                                  np.random.default_rng(0), shuffle=False))
        files = dump_attention_heatmaps(trainer.model, batch.images, tmp_path)
        out = trainer.model.greedy(batch.images, trainer.cfg.synth.t_max)
        texts = trainer.model.decode_texts(out)
        assert len(files) == sum(len(t) for t in texts)
        for f in files:
            assert f.exists()

    def test_heatmaps_deterministic(self, trained, mini_data, tmp_path):
        trainer, _ = trained
        manifest, root, bank = mini_data
        from glyphrec.synthgen import load_batches

        batch = next(load_batches(manifest, root, "test_seen_fonts", 1, bank,
                                  np.random.default_rng(0), shuffle=False))
        a = dump_attention_heatmaps(trainer.model, batch.images, tmp_path / "a")
        b = dump_attention_heatmaps(trainer.model, batch.images, tmp_path / "b")
        assert [f.read_bytes() for f in a] == [f.read_bytes() for f in b]

    def test_embedding_views(self, trained, tmp_path, mini_data):
        from glyphrec.evalviz import load_snapshots

        trainer, run_dir = trained
        _, _, bank = mini_data
        snaps = load_snapshots(run_dir)
        assert 0 in snaps
        files = dump_embedding_views(snaps, tmp_path, bank)
        assert all(f.exists() for f in files)

    def test_initial_snapshot_gaussian(self, trained):
        _, run_dir = trained
        from glyphrec.evalviz import load_snapshots

        snaps = load_snapshots(run_dir)
        init = snaps[0]
        assert abs(init.std() - 0.1) / 0.1 < 0.2
        assert abs(init.mean()) < 0.02


class TestPCA:
    def test_shape_and_sign_convention(self):
        rng = np.random.default_rng(1)
        table = rng.normal(size=(20, 8))
        coords = pca_2d(table)
        assert coords.shape == (20, 2)
        again = pca_2d(table)
        assert np.allclose(coords, again)

    def test_sign_deterministic_under_flip(self):
        rng = np.random.default_rng(2)
        table = rng.normal(size=(30, 5))
        a = pca_2d(table)
        b = pca_2d(table[::-1])[::-1]
        assert np.allclose(np.abs(a), np.abs(b), atol=1e-8)
