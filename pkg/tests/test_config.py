import json

import pytest

from qcoreset.config import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    load_config,
    parse_override,
)


def test_parse_override_values():
    assert parse_override("qubo.lambda=2.0") == (["qubo", "lambda"], 2.0)
    assert parse_override("pairs=[[1,2],[3,4]]") == (["pairs"], [[1, 2], [3, 4]])
    assert parse_override("svm.gamma=median") == (["svm", "gamma"], "median")
    assert parse_override("anneal.t_start=null") == (["anneal", "t_start"], None)
    with pytest.raises(ConfigError):
        parse_override("qubo.lambda")


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError, match="qubo.bogus"):
        load_config(None, ["qubo.bogus=1"])
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"svm": {"C": 1.0, "extra": 2}}))
    with pytest.raises(ConfigError, match="svm.extra"):
        load_config(p)


def test_overrides_apply_after_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"dataset": {"path": "data.csv"}, "qubo": {"lambda": 5.0}}))
    doc = load_config(p, ["qubo.lambda=2.0"])
    assert doc["qubo"]["lambda"] == 2.0
    assert doc["dataset"]["path"] == str(tmp_path / "data.csv")
    cfg = ExperimentConfig.from_dict(doc)
    assert cfg.encoding.penalty == 2.0 and cfg.C == 7.0


def test_synthetic_section_overrides():
    doc = apply_overrides(load_config(), ["dataset.synthetic.n_classes=3"])
    assert doc["dataset"]["synthetic"] == {"n_classes": 3}
    ExperimentConfig.from_dict(doc)
    bad = apply_overrides(load_config(), ["dataset.synthetic.colour=3"])
    with pytest.raises(ConfigError, match="colour"):
        ExperimentConfig.from_dict(bad)


@pytest.mark.parametrize("override", [
    "split.test_fraction=1.5",
    "qubo.solver=quantum",
    "svm.kernel=poly",
    "coreset.size=0",
    "qubo.bits=0",
    "anneal.sweeps=0",
    "pairs=[]",
])
def test_invalid_values(override):
    doc = apply_overrides(load_config(), ["dataset.synthetic={}", override])
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(doc)


def test_dataset_required():
    with pytest.raises(ConfigError, match="dataset"):
        ExperimentConfig.from_dict(load_config())


def test_fractional_coreset_size():
    cfg = ExperimentConfig.from_dict(load_config(None, ["dataset.synthetic={}",
                                                        "coreset.size=0.15"]))
    assert cfg.coreset_config(60, seed=0).size == 9
    assert cfg.coreset_config(3, seed=0).size == 1
