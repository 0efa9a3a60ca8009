from __future__ import annotations

import json

import pytest

from claimtree.backend import ScriptedBackend
from claimtree.config import (
    RunConfig,
    build_backend,
    build_registry,
    config_from_dict,
    load_config,
)
from claimtree.errors import InvalidInputError

from fixtures_data import GLAUCOMA
from helpers import materialize_run


def test_load_config_resolves_relative_paths(tmp_path):
    config_path, _ = materialize_run(GLAUCOMA.scenario, tmp_path)
    config = load_config(config_path)
    assert config.backend.kind == "scripted"
    backend = build_backend(config)
    assert isinstance(backend, ScriptedBackend)
    registry = build_registry(config)
    assert len(registry) == 1


def test_load_config_reports_all_missing_paths(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "backend": {"kind": "scripted", "fixture_path": "missing_fixture.json"},
                "tools": [
                    {
                        "id": "corpus",
                        "kind": "corpus_search",
                        "description": "d",
                        "corpus_path": "missing_corpus.jsonl",
                    }
                ],
            }
        ),
        encoding="utf-8",
    )
    with pytest.raises(InvalidInputError) as err:
        load_config(config_path)
    message = str(err.value)
    assert "missing_fixture.json" in message
    assert "missing_corpus.jsonl" in message


def test_deterministic_flag_forces_single_job_and_deterministic_consolidation():
    config = config_from_dict(
        {"deterministic": True, "jobs": 8, "consolidation_mode": "llm"}
    )
    assert config.jobs == 1
    assert config.consolidation_mode == "deterministic"
    assert config.backend.temperature == 0.0


def test_config_validation_errors():
    with pytest.raises(InvalidInputError):
        config_from_dict({"consolidation_mode": "vote"})
    with pytest.raises(InvalidInputError):
        config_from_dict({"jobs": 0})
    with pytest.raises(InvalidInputError):
        config_from_dict({"backend": {"kind": "http"}})
    with pytest.raises(InvalidInputError):
        config_from_dict({"tools": [{"id": "w", "kind": "web_search", "description": "d"}]})
    with pytest.raises(InvalidInputError):
        config_from_dict({"unknown_field": 1})


def test_scripted_backend_requires_fixture_at_build_time():
    config = RunConfig()
    with pytest.raises(InvalidInputError):
        build_backend(config)


def test_config_round_trips_seed_and_env_names_only():
    config = config_from_dict(
        {
            "backend": {
                "kind": "http",
                "endpoint": "https://api.example.test/v1",
                "model": "m",
                "api_key_env": "MY_KEY",
            },
            "seed": 99,
        }
    )
    data = config.to_dict()
    assert data["seed"] == 99
    assert data["backend"]["api_key_env"] == "MY_KEY"
    assert "MY_KEY_VALUE" not in json.dumps(data)
    rebuilt = config_from_dict({k: v for k, v in data.items()})
    assert rebuilt.seed == 99
