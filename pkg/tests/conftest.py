import os
import sys

import numpy as np
import pytest
import yaml

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(__file__)), "src"))

from clusterInference.components.population import population_from_table  # noqa: E402
from clusterInference.entity.domain_entity import SampleDraw  # noqa: E402


def make_sample(y, w, cluster) -> SampleDraw:
    y = np.asarray(y, dtype=np.float64)
    return SampleDraw(
        unit_index=np.arange(y.size),
        cluster_id=np.asarray(cluster, dtype=np.int64),
        w=np.asarray(w, dtype=np.int8),
        y=y,
    )


def random_population(seed: int, sizes=(3, 2, 4), effect_sd: float = 1.0):
    rng = np.random.default_rng(seed)
    cluster = np.repeat(np.arange(1, len(sizes) + 1), sizes)
    effects = effect_sd * rng.standard_normal(len(sizes))
    y0 = rng.standard_normal(cluster.size)
    y1 = y0 + effects[cluster - 1] + 0.3 * rng.standard_normal(cluster.size)
    return population_from_table(cluster, y0, y1)


@pytest.fixture
def hand_sample():
    return make_sample([1.0, 3.0, 2.0, 4.0], [1, 1, 0, 0], [1, 1, 2, 2])


@pytest.fixture
def hand_population():
    return population_from_table([1, 1, 2, 2], [0.0, 2.0, 1.0, 3.0], [1.0, 3.0, 0.0, 2.0])


CONFIG = {
    "artifacts_root": "artifacts",
    "population": {"root_dir": "artifacts/population"},
    "simulation": {
        "root_dir": "artifacts/simulation",
        "report_json": "artifacts/simulation/coverage_report.json",
        "report_csv": "artifacts/simulation/coverage_report.csv",
        "resolved_params": "artifacts/simulation/resolved_params.json",
    },
    "variance_validation": {
        "root_dir": "artifacts/variance_validation",
        "report_csv": "artifacts/variance_validation/variance_validation.csv",
    },
    "oracle": {"root_dir": "artifacts/oracle", "fixture_csv": "artifacts/oracle/oracle_fixtures.csv"},
    "analysis": {"root_dir": "artifacts/analysis", "report_json": "artifacts/analysis/estimate_report.json"},
}

PARAMS = {
    "population": {"clusters": 4, "units_per_cluster": 30, "noise_sd": 1.0, "seed": 7},
    "p_c": 1.0,
    "p_u": 0.5,
    "sigma2": 0.0,
    "assignment_family": "two-point",
    "replications": 10,
    "seed": 11,
    "confidence": 0.95,
    "models": ["plain", "fe"],
    "estimators": ["ols", "ehw", "lz", "cca"],
    "threads": 1,
    "validation": {"replications": 10, "grid": [{"p_c": 1.0, "p_u": 0.5, "sigma2": 0.0}]},
    "oracle": {"max_units": 4, "seed": 3, "grid": {"p_c": [0.5, 1.0], "p_u": [1.0], "sigma2": [0.0, 0.09]}},
}


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    """A working directory holding config/config.yaml and params.yaml."""
    monkeypatch.chdir(tmp_path)
    (tmp_path / "config").mkdir()
    config_path = tmp_path / "config" / "config.yaml"
    params_path = tmp_path / "params.yaml"
    config_path.write_text(yaml.safe_dump(CONFIG), encoding="utf-8")
    params_path.write_text(yaml.safe_dump(PARAMS), encoding="utf-8")
    return config_path, params_path
