import pytest

from glyphrec.config import (ConfigurationError, RunConfig, apply_overrides,
                             clone_config, config_identity, load_config,
                             save_config, small_preset)


class TestRoundTrip:
    def test_save_load_identity(self, tmp_path):
        cfg = small_preset()
        cfg.seed = 42
        cfg.train.alpha = 0.02
        cfg.backbone.channels = (8, 16, 32, 64)
        path = tmp_path / "cfg.ini"
        save_config(cfg, path)
        loaded = load_config(path)
        assert config_identity(loaded) == config_identity(cfg)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "nope.ini")

    def test_unknown_field_rejected(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("[training]\nbogus = 1\n")
        with pytest.raises(ConfigurationError, match="training.bogus"):
            load_config(path)


class TestOverrides:
    def test_typed_overrides(self):
        cfg = RunConfig()
        apply_overrides(cfg, ["training.lr0=0.01", "training.adversarial=false",
                              "backbone.channels=8,16,32,64", "run.seed=9"])
        assert cfg.train.lr0 == 0.01
        assert cfg.train.adversarial is False
        assert cfg.backbone.channels == (8, 16, 32, 64)
        assert cfg.seed == 9

    def test_bad_override_shape(self):
        with pytest.raises(ConfigurationError):
            apply_overrides(RunConfig(), ["no_dots"])

    def test_unknown_section(self):
        with pytest.raises(ConfigurationError):
            apply_overrides(RunConfig(), ["nosuch.key=1"])

    def test_validation_reapplied(self):
        with pytest.raises(ConfigurationError):
            apply_overrides(RunConfig(), ["training.lr_floor=1.0"])


class TestInvariants:
    def test_alpha_nonnegative(self):
        from glyphrec.config import TrainConfig

        with pytest.raises(ConfigurationError):
            TrainConfig(alpha=-0.1)

    def test_clone_is_deep(self):
        cfg = RunConfig()
        other = clone_config(cfg)
        other.train.lr0 = 0.5
        assert cfg.train.lr0 == 1e-3
