import json

import pytest

from glyphrec.cli import main

FAST_OVERRIDES = [
    "--set", "synthgen.n_train=8", "--set", "synthgen.n_test_seen=4",
    "--set", "synthgen.n_test_novel=4", "--set", "synthgen.novel_fonts=2",
    "--set", "backbone.channels=8,16,32,64", "--set", "backbone.feat_channels=64",
    "--set", "backbone.units_per_block=1,1,1,1,1",
    "--set", "attnseq.hidden_size=64", "--set", "attnseq.attn_dim=32",
    "--set", "glyphgan.embed_dim=16", "--set", "training.batch_size=4",
    "--set", "training.iterations=2", "--set", "training.checkpoint_interval=2",
    "--set", "training.snapshot_interval=1",
]


@pytest.fixture(scope="module")
def workspace(big_font_dir, tmp_path_factory):
    """End-to-end CLI workspace: dataset, glyph bank, one trained run."""
    ws = tmp_path_factory.mktemp("cli_ws")
    rc = main(["synth-data", "--fonts", str(big_font_dir), "--out",
               str(ws / "data"), "--seed", "5", *FAST_OVERRIDES])
    assert rc == 0
    rc = main(["render-glyphs", "--fonts", str(big_font_dir), "--out",
               str(ws / "glyphs"), "--names-from", str(ws / "data" / "manifest.jsonl")])
    assert rc == 0
    rc = main(["train", "--data", str(ws / "data"), "--glyphs", str(ws / "glyphs"),
               "--out", str(ws / "run"), "--seed", "5", *FAST_OVERRIDES])
    assert rc == 0
    return ws


class TestSubcommands:
    def test_workspace_artifacts(self, workspace):
        assert (workspace / "data" / "manifest.jsonl").exists()
        assert (workspace / "glyphs" / "index.json").exists()
        assert (workspace / "run" / "metrics.csv").exists()
        assert (workspace / "run" / "config.ini").exists()
        assert (workspace / "run" / "checkpoints" / "ckpt_000002.pt").exists()

    def test_bank_excludes_novel_fonts(self, workspace):
        manifest_meta = json.loads(
            (workspace / "data" / "manifest.jsonl").read_text().splitlines()[0])
        index = json.loads((workspace / "glyphs" / "index.json").read_text())
        bank_fonts = {f["display_name"] for f in index["fonts"]}
        assert not bank_fonts & set(manifest_meta["novel_fonts"])

    def test_eval_writes_report(self, workspace):
        rc = main(["eval", "--checkpoint",
                   str(workspace / "run" / "checkpoints" / "ckpt_000002.pt"),
                   "--data", str(workspace / "data"),
                   "--glyphs", str(workspace / "glyphs"),
                   "--out", str(workspace / "eval")])
        assert rc == 0
        report = json.loads((workspace / "eval" / "report.json").read_text())
        assert "test_novel_fonts" in report["word_accuracy"]

    def test_eval_missing_checkpoint_exit1(self, workspace, tmp_path, capsys):
        rc = main(["eval", "--checkpoint", str(tmp_path / "missing.pt"),
                   "--data", str(workspace / "data"),
                   "--glyphs", str(workspace / "glyphs"),
                   "--out", str(tmp_path / "out")])
        assert rc == 1
        assert "missing.pt" in capsys.readouterr().err

    def test_viz_outputs(self, workspace):
        rc = main(["viz", "--checkpoint",
                   str(workspace / "run" / "checkpoints" / "ckpt_000002.pt"),
                   "--data", str(workspace / "data"),
                   "--glyphs", str(workspace / "glyphs"),
                   "--out", str(workspace / "viz"), "--num-samples", "2"])
        assert rc == 0
        assert list((workspace / "viz" / "heatmaps").glob("*.png"))
        assert (workspace / "viz" / "embeddings" / "embedding_pca.png").exists()

    def test_grad_check_passes(self, capsys):
        rc = main(["grad-check", "--trials", "20", "--seed", "1"])
        assert rc == 0
        assert "rel_error" in capsys.readouterr().out

    def test_ablate_two_variants(self, workspace, tmp_path):
        rc = main(["ablate", "--data", str(workspace / "data"),
                   "--glyphs", str(workspace / "glyphs"),
                   "--out", str(tmp_path / "ablate"), "--budget", "1",
                   "--variants", "ATT-TFE,NO-GG", "--seed", "5",
                   *FAST_OVERRIDES])
        assert rc == 0

    def test_sweep_fonts(self, workspace, tmp_path):
        rc = main(["sweep-fonts",
                   "--checkpoint", str(workspace / "run" / "checkpoints" / "ckpt_000002.pt"),
                   "--data", str(workspace / "data"),
                   "--glyphs", str(workspace / "glyphs"),
                   "--out", str(tmp_path / "sweep"), "--budget", "1",
                   "--counts", "2", "--seed", "5", *FAST_OVERRIDES])
        assert rc == 0


class TestCliContracts:
    def test_unknown_subcommand_usage_exit2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_unknown_flag_exit2(self):
        with pytest.raises(SystemExit) as exc:
            main(["grad-check", "--bogus"])
        assert exc.value.code == 2

    def test_invalid_config_override_exit1(self, big_font_dir, tmp_path, capsys):
        rc = main(["synth-data", "--fonts", str(big_font_dir),
                   "--out", str(tmp_path), "--set", "training.lr_floor=5"])
        assert rc == 1
        assert "lr_floor" in capsys.readouterr().err

    def test_synth_data_deterministic(self, big_font_dir, tmp_path):
        for name in ("a", "b"):
            rc = main(["synth-data", "--fonts", str(big_font_dir), "--out",
                       str(tmp_path / name), "--seed", "9", *FAST_OVERRIDES])
            assert rc == 0
        a = (tmp_path / "a" / "manifest.jsonl").read_bytes()
        b = (tmp_path / "b" / "manifest.jsonl").read_bytes()
        assert a == b

    def test_train_metrics_deterministic(self, workspace, tmp_path):
        metrics = []
        for name in ("a", "b"):
            rc = main(["train", "--data", str(workspace / "data"),
                       "--glyphs", str(workspace / "glyphs"),
                       "--out", str(tmp_path / name), "--seed", "7",
                       *FAST_OVERRIDES])
            assert rc == 0
            metrics.append((tmp_path / name / "metrics.csv").read_bytes())
        assert metrics[0] == metrics[1]

    def test_run_dir_has_effective_config(self, workspace):
        text = (workspace / "run" / "config.ini").read_text()
        assert "[training]" in text and "iterations = 2" in text
