import pytest

from truncsr.config import (OUTPUT_ENV, ConfigError, ExperimentConfig, load_config, preset)


def test_yaml_round_trip():
    cfg = preset("smoke").replace(**{"plan.total_evals": 9, "data.quant_levels": 16})
    back = ExperimentConfig.from_yaml(cfg.to_yaml())
    assert back == cfg
    assert back.data.blur_sigma == (0.8, 1.6)


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.schedule.T == 45 and cfg.plan.total_evals == 15 and cfg.n_runs == 10
    assert cfg.build_plan().steps[:2] == (45, 30)
    assert cfg.transition == "renoise"


def test_ablation_switches_drive_training_mode():
    cfg = ExperimentConfig().replace(**{"ablation.nutl": False})
    assert cfg.stage1.nutl is False
    base = ExperimentConfig().replace(**{"ablation.baseline": True})
    assert base.stage1.timesteps == "uniform" and base.transition == "posterior"
    assert base.build_plan().steps == (45, 42, 39, 36, 32, 29, 26, 23, 20, 17, 14, 10, 7, 4, 1)


@pytest.mark.parametrize("text", [
    "bogus: 1",
    "plan: {t_max: 0.5}",
    "data: {kind: voxels}",
    "model: {output: x0}",
    "n_runs: 0",
    "- a list",
])
def test_invalid_files_rejected(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_yaml(text)


def test_unknown_override():
    with pytest.raises(ConfigError):
        ExperimentConfig().replace(**{"plan.nope": 1})


def test_load_file_and_env(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("plan:\n  total_evals: 8\n")
    cfg = load_config(path, env={})
    assert cfg.plan.total_evals == 8 and cfg.output_dir == "runs/default"
    cfg = load_config(path, env={OUTPUT_ENV: str(tmp_path / "o")})
    assert cfg.out == tmp_path / "o"
    path.write_text("plan: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(path, env={})


def test_presets():
    assert preset("low-lr").stage1.lr == 1e-4
    assert preset("smoke").data.size == 32
    with pytest.raises(ConfigError):
        preset("huge")
