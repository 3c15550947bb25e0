import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from clusterInference.components.population import (
    build_population,
    cached_population,
    compute_estimands,
    load_population_csv,
    population_from_table,
    population_to_frame,
)
from clusterInference.entity.config_entity import (
    AssignmentDesign,
    ExperimentConfig,
    PopulationCacheConfig,
    PopulationSpec,
    SamplingDesign,
)
from clusterInference.exception import ConfigurationError


def test_hand_table_estimands(hand_population):
    est = compute_estimands(hand_population)
    assert est.tau == 0.0
    assert_allclose(est.tau_c, [1.0, -1.0])
    assert_allclose(est.eps0, [-1.5, 0.5, -0.5, 1.5])
    assert_allclose(est.eps1, [-0.5, 1.5, -1.5, 0.5])
    assert_allclose(est.eps1_bar_c - est.eps0_bar_c, [1.0, -1.0])


def test_residuals_are_centered(hand_population):
    est = compute_estimands(hand_population)
    assert abs(est.eps0.sum()) < 1e-12
    assert abs(est.eps1.sum()) < 1e-12


def test_default_design_without_noise():
    spec = PopulationSpec(cluster_count=4, units_per_cluster=3, noise_sd=0.0)
    pop = build_population(spec, seed=1)
    assert pop.unit_count == 12
    assert_array_equal(pop.cluster_sizes, [3, 3, 3, 3])
    assert_allclose(pop.y0, 0.0)
    assert_allclose(pop.y1, [-1.0] * 6 + [1.0] * 6)
    assert compute_estimands(pop).tau == 0.0


def test_zero_effects_and_noise_give_zero_residuals():
    spec = PopulationSpec(cluster_count=2, units_per_cluster=5, tau_pattern=(0.0, 0.0), noise_sd=0.0)
    est = compute_estimands(build_population(spec, seed=1))
    assert est.tau == 0.0
    assert_allclose(est.eps0, 0.0)
    assert_allclose(est.eps1, 0.0)


def test_no_effect_population_has_equal_residuals():
    pop = population_from_table([1, 1, 2], [0.3, -1.0, 2.0], [0.3, -1.0, 2.0])
    est = compute_estimands(pop)
    assert est.tau == 0.0
    assert_allclose(est.tau_c, 0.0)
    assert_allclose(est.eps1, est.eps0)


def test_symmetric_baseline_splits_the_effect():
    spec = PopulationSpec(cluster_count=2, units_per_cluster=2, noise_sd=0.0, baseline="symmetric")
    pop = build_population(spec, seed=1)
    assert_allclose(pop.y0, [0.5, 0.5, -0.5, -0.5])
    assert_allclose(pop.y1, [-0.5, -0.5, 0.5, 0.5])


def test_population_is_reproducible_from_the_seed():
    spec = PopulationSpec(cluster_count=4, units_per_cluster=(2, 3, 4, 5))
    first, second = build_population(spec, seed=9), build_population(spec, seed=9)
    assert_array_equal(first.y0, second.y0)
    assert_array_equal(first.y1, second.y1)
    assert not np.array_equal(first.y0, build_population(spec, seed=10).y0)
    assert_array_equal(first.cluster_sizes, [2, 3, 4, 5])


def test_cluster_effects_are_near_the_pattern():
    spec = PopulationSpec(cluster_count=4, units_per_cluster=20000)
    est = compute_estimands(build_population(spec, seed=3))
    assert_allclose(est.tau_c, [-1.0, -1.0, 1.0, 1.0], atol=0.05)


def test_population_arrays_are_read_only(hand_population):
    with pytest.raises(ValueError):
        hand_population.y0[0] = 5.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"cluster_count": 3, "units_per_cluster": 2},
        {"cluster_count": 2, "units_per_cluster": (2, 2, 2)},
        {"cluster_count": 2, "units_per_cluster": 0},
        {"cluster_count": 2, "units_per_cluster": 2, "tau_pattern": (1.0,)},
        {"cluster_count": 2, "units_per_cluster": 2, "noise_sd": -1.0},
        {"cluster_count": 2, "units_per_cluster": 2, "baseline": "treated"},
        {"cluster_count": 2, "units_per_cluster": 2, "kind": "census"},
        {"cluster_count": 0, "units_per_cluster": 2, "kind": "explicit"},
    ],
)
def test_invalid_specs_are_rejected(kwargs):
    with pytest.raises(ConfigurationError):
        PopulationSpec(**kwargs)


def test_labels_are_mapped_in_sorted_order():
    pop = population_from_table(["b", "a", "b"], [1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert_array_equal(pop.cluster_id, [2, 1, 2])
    assert pop.cluster_count == 2


def test_table_round_trip(tmp_path, hand_population):
    path = tmp_path / "population.csv"
    population_to_frame(hand_population).to_csv(path, index=False)
    loaded = load_population_csv(path)
    assert_array_equal(loaded.cluster_id, hand_population.cluster_id)
    assert_array_equal(loaded.y1, hand_population.y1)


def test_table_without_outcomes_is_rejected(tmp_path):
    path = tmp_path / "population.csv"
    pd.DataFrame({"cluster": [1, 2], "y0": [0.0, 1.0]}).to_csv(path, index=False)
    with pytest.raises(ConfigurationError, match="y1"):
        load_population_csv(path)


def test_non_finite_outcomes_are_rejected():
    with pytest.raises(ConfigurationError):
        population_from_table([1, 2], [0.0, np.nan], [0.0, 1.0])


def test_population_cache_reuses_the_build(tmp_path):
    config = ExperimentConfig(
        population=PopulationSpec(cluster_count=2, units_per_cluster=3),
        population_seed=4,
        sampling=SamplingDesign(p_c=1.0, p_u=0.5),
        assignment=AssignmentDesign(sigma2=0.0),
        replications=1,
        master_seed=1,
    )
    cache = PopulationCacheConfig(root_dir=tmp_path)
    built = cached_population(config, cache)
    assert len(list(tmp_path.glob("population-*.joblib"))) == 1
    reused = cached_population(config, cache)
    assert_array_equal(built.y0, reused.y0)
    assert_array_equal(built.cluster_id, reused.cluster_id)


def test_negative_seed_is_reproducible():
    spec = PopulationSpec(cluster_count=2, units_per_cluster=3)
    first = build_population(spec, seed=-1)
    assert_array_equal(first.y0, build_population(spec, seed=-1).y0)
    assert_array_equal(first.y0, build_population(spec, seed=2 ** 64 - 1).y0)
    assert not np.array_equal(first.y0, build_population(spec, seed=1).y0)
