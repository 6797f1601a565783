"""Config schema: defaults, validation messages, provenance hashing and the
object builders."""

import numpy as np
import pytest

from risopt.config import ConfigError, ExperimentConfig


class TestMergeAndValidate:
    def test_empty_gets_defaults(self):
        cfg = ExperimentConfig.from_dict({})
        assert cfg.raw["spaces"]["n"] == 1
        assert cfg.raw["grid"]["K"] == 1000
        assert cfg.raw["dissipation"]["eps"] == 1e-3

    def test_partial_override(self):
        cfg = ExperimentConfig.from_dict({"grid": {"K": 50}})
        assert cfg.raw["grid"]["K"] == 50
        assert cfg.raw["grid"]["T"] == 1.0

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key: gird"):
            ExperimentConfig.from_dict({"gird": {}})
        with pytest.raises(ConfigError, match="grid.steps"):
            ExperimentConfig.from_dict({"grid": {"steps": 5}})

    @pytest.mark.parametrize("bad,match", [
        ({"spaces": {"n": 0}}, "spaces.n"),
        ({"spaces": {"L": -1.0}}, "spaces.L"),
        ({"spaces": {"kappa": 7.0}}, "kappa"),
        ({"nonlinearity": {"kind": "cubic"}}, "nonlinearity.kind"),
        ({"nonlinearity": {"kind": "doublewell"}}, "nonlinearity.a"),
        ({"grid": {"K": -3}}, "grid"),
        ({"dissipation": {"eps": 0.0}}, "dissipation.eps"),
        ({"dissipation": {"delta": -1.0}}, "dissipation"),
        ({"load": {"preset": "spline"}}, "load.preset"),
        ({"load": {"preset": "custom"}}, "load.csv"),
        ({"study": {"delta_list": []}}, "study.delta_list"),
        ({"study": {"eps_list": [1e-3, 1e-2]}}, "study.eps_list"),
        ({"control": {"beta": 0.0}}, "control.beta"),
    ])
    def test_validation_errors(self, bad, match):
        with pytest.raises(ConfigError, match=match):
            ExperimentConfig.from_dict(bad)


class TestHash:
    def test_stable_and_order_independent(self):
        a = ExperimentConfig.from_dict({"grid": {"K": 7, "T": 2.0}})
        b = ExperimentConfig.from_dict({"grid": {"T": 2.0, "K": 7}})
        assert a.hash() == b.hash()
        assert len(a.hash()) == 16

    def test_sensitive_to_values(self):
        a = ExperimentConfig.from_dict({})
        b = ExperimentConfig.from_dict({"seed": 1})
        assert a.hash() != b.hash()


class TestBuilders:
    def test_spaces_and_model(self):
        cfg = ExperimentConfig.from_dict({"spaces": {"n": 4, "L": 2.0},
                                          "nonlinearity": {"kind": "sine"}})
        sp = cfg.build_spaces()
        assert sp.n == 4 and sp.length == 2.0
        model = cfg.build_model()
        assert model.nonlinearity.kind == "sine"

    def test_unit_spaces_flag(self):
        cfg = ExperimentConfig.from_dict({"spaces": {"n": 2, "unit": True}})
        sp = cfg.build_spaces()
        np.testing.assert_allclose(sp.stiffness, np.eye(2))

    def test_grid_and_params(self):
        cfg = ExperimentConfig.from_dict({"grid": {"T": 3.0, "K": 6},
                                          "dissipation": {"eps": 0.5,
                                                          "delta": 0.25}})
        grid = cfg.build_grid()
        assert grid.tau == pytest.approx(0.5)
        p = cfg.build_params()
        assert (p.eps, p.delta) == (0.5, 0.25)

    def test_load_presets(self):
        cfg = ExperimentConfig.from_dict({"spaces": {"n": 2, "unit": True},
                                          "grid": {"K": 4},
                                          "load": {"preset": "ramp",
                                                   "rate": 2.0,
                                                   "direction": [1.0, 0.5]}})
        sp = cfg.build_spaces()
        ell = cfg.build_load(sp, cfg.build_grid())
        np.testing.assert_allclose(ell.values[-1], [2.0, 1.0])
        zero = ExperimentConfig.from_dict({"load": {"preset": "zero"}})
        assert np.all(zero.build_load(zero.build_spaces(),
                                      zero.build_grid()).values == 0.0)

    def test_custom_csv_load(self, tmp_path):
        csv = tmp_path / "load.csv"
        rows = ["t,l0"] + [f"{0.25 * k},{0.1 * k}" for k in range(5)]
        csv.write_text("\n".join(rows) + "\n")
        cfg = ExperimentConfig.from_dict({"grid": {"K": 4},
                                          "load": {"preset": "custom",
                                                   "csv": str(csv)}})
        ell = cfg.build_load(cfg.build_spaces(), cfg.build_grid())
        np.testing.assert_allclose(ell.values[:, 0], 0.1 * np.arange(5))

    def test_custom_csv_wrong_shape(self, tmp_path):
        csv = tmp_path / "load.csv"
        csv.write_text("t,l0\n0,0\n1,1\n")
        cfg = ExperimentConfig.from_dict({"grid": {"K": 4},
                                          "load": {"preset": "custom",
                                                   "csv": str(csv)}})
        with pytest.raises(ConfigError, match="load.csv"):
            cfg.build_load(cfg.build_spaces(), cfg.build_grid())

    def test_state_vectors(self):
        cfg = ExperimentConfig.from_dict({"spaces": {"n": 2, "unit": True},
                                          "initial_state": [0.1, 0.2],
                                          "control": {"z_des": [1.0, -1.0]}})
        sp = cfg.build_spaces()
        np.testing.assert_allclose(cfg.initial_state(sp), [0.1, 0.2])
        np.testing.assert_allclose(cfg.target_state(sp), [1.0, -1.0])
        bad = ExperimentConfig.from_dict({"initial_state": [0.1, 0.2]})
        with pytest.raises(ConfigError):
            bad.initial_state(bad.build_spaces())

    def test_direction_validation(self):
        cfg = ExperimentConfig.from_dict({"load": {"direction": [1.0, 2.0]}})
        with pytest.raises(ConfigError, match="direction"):
            cfg.load_direction(cfg.build_spaces())


class TestPresets:
    @pytest.mark.parametrize("name", ["play", "stick", "doublewell",
                                      "delta_sweep", "variation",
                                      "convex_control", "recovery_sine"])
    def test_all_presets_valid(self, name):
        cfg = ExperimentConfig.from_preset(name)
        cfg.build_model()
        cfg.build_grid()
        cfg.build_params()

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            ExperimentConfig.from_preset("nope")

    def test_yaml_roundtrip(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("grid: {K: 12}\nnonlinearity: {kind: sine}\n")
        cfg = ExperimentConfig.from_yaml(path)
        assert cfg.raw["grid"]["K"] == 12
        assert cfg.hash() == ExperimentConfig.from_dict(
            {"grid": {"K": 12}, "nonlinearity": {"kind": "sine"}}).hash()
