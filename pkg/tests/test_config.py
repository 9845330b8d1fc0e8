import json

import pytest

from dispguard.errors import ConfigError
from dispguard.harness.config import ExperimentConfig, load_config


def test_defaults_match_rig_and_attack_setup():
    cfg = ExperimentConfig()
    assert (cfg.rig.image_width, cfg.rig.image_height) == (1242, 375)
    assert (cfg.attacks.spoof_width, cfg.attacks.spoof_height) == (2.5, 1.5)
    assert cfg.attacks.spoof_distance == (6.0, 10.0)
    assert cfg.attacks.facula_radius == (187.0, 375.0)
    assert cfg.r_values == (0.0, 0.01, 0.02, 0.03, 0.05)


def test_dict_roundtrip():
    cfg = ExperimentConfig(seed=4, frames=9)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_partial_yaml(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("seed: 5\nnoise:\n  gaussian_sigma: 0.5\nsweep:\n  spoof_widths: [1, 2]\n")
    cfg = load_config(path)
    assert cfg.seed == 5
    assert cfg.noise.gaussian_sigma == 0.5
    assert cfg.noise.outlier_fraction == 0.01
    assert cfg.sweep.spoof_widths == (1.0, 2.0)


def test_json_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"frames": 3, "rig": {"lidar_pose": [0, 0, 0]}}))
    cfg = load_config(path)
    assert cfg.frames == 3 and cfg.rig.lidar_pose == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("text", [
    "bogus: 1\n",
    "noise:\n  sigma: 1\n",
    "frames: many\n",
    "frames: 0\n",
    "r_grid: [0.5, 2]\n",
    "rig: 3\n",
    "scene:\n  depth_range: [50, 10]\n",
    "noise:\n  gaussian_sigma: -1\n",
    "seed: [1\n",
])
def test_schema_violations(tmp_path, text):
    path = tmp_path / "c.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")
