import json
import os
import subprocess
import sys

import pytest

from rdpipe.config import ConfigError, PipelineConfig, default_config, validate_config


def test_defaults_are_valid():
    cfg = default_config()
    assert validate_config(cfg) == []
    assert cfg.temperature == 0 and cfg.mode == "replay"
    assert "key" not in json.dumps(cfg.to_dict()).replace("api_key_env", "").replace("x-api-key", "")


def test_save_load_round_trip(tmp_path):
    cfg = default_config()
    cfg.workers = 2
    cfg.budget.max_input_tokens = 9000
    cfg.save(tmp_path / "c.json")
    back = PipelineConfig.load(tmp_path / "c.json")
    assert back == cfg and back.config_hash() == cfg.config_hash()
    assert back.resolve("cassettes") == tmp_path / "cassettes"


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"api_key": "sk-123"})
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"budget": {"max_tokens": 1}})


def test_invalid_json(tmp_path):
    (tmp_path / "c.json").write_text("{nope")
    with pytest.raises(ConfigError):
        PipelineConfig.load(tmp_path / "c.json")


@pytest.mark.parametrize("change,fragment", [
    ({"temperature": 0.3}, "pinned to 0"),
    ({"temperature": 3}, "outside"),
    ({"mode": "offline"}, "mode"),
    ({"workers": 0}, "workers"),
    ({"budget": {"max_output_tokens": -1}}, "max_output_tokens"),
    ({"budget": {"instruction_tokens": 200000}}, "instruction_tokens"),
    ({"budget": {"safety_margin": 1.0}}, "safety_margin"),
    ({"retry": {"backoff_multiplier": 0.5}}, "backoff_multiplier"),
    ({"rate": {"tokens_per_minute": 1000}}, "never admitted"),
    ({"templates": {"seedlist": "missing.txt"}}, "not found"),
])
def test_diagnostics(change, fragment):
    data = default_config().to_dict()
    for k, v in change.items():
        if isinstance(v, dict):
            data[k].update(v)
        else:
            data[k] = v
    diags = validate_config(PipelineConfig.from_dict(data))
    assert any(fragment in d for d in diags), diags


def test_override_allows_temperature():
    cfg = default_config()
    cfg.temperature = 0.5
    cfg.allow_nonzero_temperature = True
    assert validate_config(cfg) == []


def test_pure_python_backend_is_selectable():
    code = "from rdpipe import kernels; print(kernels.BACKEND, kernels.levenshtein('kitten', 'sitting'))"
    env = {**os.environ, "RDPIPE_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "3"]
