import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.integrate import quad
from scipy.stats import beta as beta_dist

from clusterInference.components.design import (
    analytic_moments,
    assignment_support,
    draw_sample,
    kappa_moments,
    replication_rng,
    sample_to_frame,
    warn_small_design,
)
from clusterInference.components.population import build_population, population_from_table
from clusterInference.entity.config_entity import AssignmentDesign, PopulationSpec, SamplingDesign
from clusterInference.exception import ConfigurationError


@pytest.fixture
def grid_population():
    return build_population(PopulationSpec(cluster_count=6, units_per_cluster=4), seed=2)


def test_replication_streams_are_reproducible_and_distinct():
    first = replication_rng(5, 3).random(4)
    assert_array_equal(first, replication_rng(5, 3).random(4))
    assert not np.array_equal(first, replication_rng(5, 4).random(4))
    assert not np.array_equal(first, replication_rng(6, 3).random(4))


def test_negative_master_seed_wraps_to_unsigned():
    first = replication_rng(-1, 0).random(4)
    assert_array_equal(first, replication_rng(-1, 0).random(4))
    assert_array_equal(first, replication_rng(2 ** 64 - 1, 0).random(4))
    sample = draw_sample(build_population(PopulationSpec(cluster_count=2, units_per_cluster=3), seed=1),
                         SamplingDesign(1.0, 1.0), AssignmentDesign(0.0), seed=-5)
    assert sample.n == 6


def test_census_samples_every_unit(grid_population):
    sample = draw_sample(grid_population, SamplingDesign(1.0, 1.0), AssignmentDesign(0.0), seed=1)
    assert sample.n == grid_population.unit_count
    assert_array_equal(sample.unit_index, np.arange(grid_population.unit_count))
    treated = sample.w == 1
    assert_array_equal(sample.y[treated], grid_population.y1[treated])
    assert_array_equal(sample.y[~treated], grid_population.y0[~treated])


@pytest.mark.parametrize("full_vectors", [True, False])
def test_perfectly_correlated_assignment_is_constant_within_clusters(grid_population, full_vectors):
    for seed in range(20):
        sample = draw_sample(grid_population, SamplingDesign(1.0, 1.0), AssignmentDesign(0.25),
                             seed=seed, full_vectors=full_vectors)
        for c in np.unique(sample.cluster_id):
            assert np.unique(sample.w[sample.cluster_id == c]).size == 1
        assert set(np.unique(sample.q)) <= {0.0, 1.0}


def test_draws_are_reproducible(grid_population):
    sampling, assignment = SamplingDesign(0.5, 0.5), AssignmentDesign(0.09)
    for full_vectors in (True, False):
        first = draw_sample(grid_population, sampling, assignment, seed=7, full_vectors=full_vectors)
        second = draw_sample(grid_population, sampling, assignment, seed=7, full_vectors=full_vectors)
        assert_array_equal(first.unit_index, second.unit_index)
        assert_array_equal(first.w, second.w)


def test_full_vectors_are_consistent_with_the_sample(grid_population):
    sample = draw_sample(grid_population, SamplingDesign(0.5, 0.5), AssignmentDesign(0.09), seed=3)
    assert_array_equal(np.flatnonzero(sample.sampled), sample.unit_index)
    assert_array_equal(sample.assigned[sample.unit_index], sample.w)


def test_cluster_inclusion_frequency(hand_population):
    draws = 10000
    present = sum(
        bool(np.any(draw_sample(hand_population, SamplingDesign(0.5, 1.0), AssignmentDesign(0.0), seed=s).cluster_id == 1))
        for s in range(draws)
    )
    assert abs(present / draws - 0.5) < 4 * np.sqrt(0.25 / draws)


def test_moments_table_values():
    table = analytic_moments(SamplingDesign(0.5, 1.0), AssignmentDesign(0.25))
    assert table.loc["RW", "within_cluster_covariance"] == pytest.approx(0.1875)
    assert table.loc["R", "mean"] == pytest.approx(0.5)
    assert table.loc["W", "variance"] == pytest.approx(0.25)
    assert (table["between_cluster_covariance"] == 0.0).all()


def test_moments_table_vanishing_covariances():
    assert analytic_moments(SamplingDesign(1.0, 0.3), AssignmentDesign(0.09)).loc["R", "within_cluster_covariance"] == 0.0
    assert analytic_moments(SamplingDesign(0.4, 0.3), AssignmentDesign(0.0)).loc["W", "within_cluster_covariance"] == 0.0


PAIR_CLUSTERS = 50_000
GRID = [(p_c, p_u, sigma2) for p_c in (0.25, 0.5, 1.0) for p_u in (0.5, 1.0) for sigma2 in (0.0, 0.09, 0.25)]


@pytest.fixture(scope="module")
def pair_population():
    # clusters are drawn independently, so every two-unit cluster is one draw of (R_i, R_j, W_i, W_j)
    cluster = np.repeat(np.arange(1, PAIR_CLUSTERS + 1), 2)
    zeros = np.zeros(cluster.size)
    return population_from_table(cluster, zeros, zeros)


def _pair_draws(pop, sampling, assignment, seeds=(0, 1)):
    r, w = [], []
    for seed in seeds:
        sample = draw_sample(pop, sampling, assignment, seed=seed)
        r.append(sample.sampled.reshape(-1, 2).astype(np.float64))
        w.append(sample.assigned.reshape(-1, 2).astype(np.float64))
    return np.vstack(r), np.vstack(w)


def _within_mcse(values: np.ndarray, target: float) -> bool:
    return abs(values.mean() - target) <= 4 * values.std() / np.sqrt(values.size) + 1e-12


@pytest.mark.parametrize("p_c,p_u,sigma2", GRID)
def test_empirical_moments_match_the_table(pair_population, p_c, p_u, sigma2):
    sampling, assignment = SamplingDesign(p_c, p_u), AssignmentDesign(sigma2)
    table = analytic_moments(sampling, assignment)
    r, w = _pair_draws(pair_population, sampling, assignment)
    assert r.shape[0] >= 100_000

    for name, values in {"R": r, "W": w, "RW": r * w}.items():
        mean = table.loc[name, "mean"]
        assert _within_mcse(values[:, 0], mean)
        assert _within_mcse((values[:, 0] - mean) ** 2, table.loc[name, "variance"])
        products = (values[:, 0] - mean) * (values[:, 1] - mean)
        assert _within_mcse(products, table.loc[name, "within_cluster_covariance"])


@pytest.mark.parametrize("p_c,p_u,sigma2", GRID)
def test_sampling_is_independent_of_assignment(pair_population, p_c, p_u, sigma2):
    r, w = _pair_draws(pair_population, SamplingDesign(p_c, p_u), AssignmentDesign(sigma2))
    products = (r[:, 0] - p_c * p_u) * (w[:, 0] - 0.5)
    assert _within_mcse(products, 0.0)


def test_kappa_moments_point_mass():
    k = kappa_moments(AssignmentDesign(0.0))
    assert k.kappa == 0.0
    assert k.kappa_31 == pytest.approx(1 / 16)
    assert k.kappa_13 == pytest.approx(1 / 16)
    assert k.eq1q == pytest.approx(0.25)
    assert k.fourth_moment == pytest.approx(1 / 16)


def test_kappa_moments_two_point():
    k = kappa_moments(AssignmentDesign(0.09))
    assert k.kappa == 0.0
    assert k.kappa_31 == pytest.approx(0.0544)
    assert k.kappa_22 == pytest.approx(0.16 ** 2)


def test_kappa_moments_uniform():
    k = kappa_moments(AssignmentDesign(1 / 12, family="beta"))
    assert k.kappa_31 == pytest.approx(1 / 20)
    assert k.kappa_13 == pytest.approx(1 / 20)
    assert k.kappa_22 == pytest.approx(1 / 30)
    assert k.kappa == pytest.approx(1 / 180)


@pytest.mark.parametrize("sigma2", [0.02, 0.05, 1 / 12])
def test_beta_moments_against_quadrature(sigma2):
    assignment = AssignmentDesign(sigma2, family="beta")
    shape = assignment.beta_shape
    density = beta_dist(shape, shape).pdf
    k = kappa_moments(assignment)
    assert k.kappa_31 == pytest.approx(quad(lambda q: q ** 3 * (1 - q) * density(q), 0, 1)[0], rel=1e-6)
    assert k.kappa_22 == pytest.approx(quad(lambda q: (q * (1 - q)) ** 2 * density(q), 0, 1)[0], rel=1e-6)
    assert quad(lambda q: (q - 0.5) ** 2 * density(q), 0, 1)[0] == pytest.approx(sigma2, rel=1e-6)


def test_beta_has_no_finite_support():
    with pytest.raises(ConfigurationError):
        assignment_support(AssignmentDesign(0.05, family="beta"))


@pytest.mark.parametrize("sigma2,family", [(0.3, "two-point"), (-0.1, "two-point"), (0.0, "beta"), (0.1, "normal")])
def test_invalid_assignment_designs(sigma2, family):
    with pytest.raises(ConfigurationError):
        AssignmentDesign(sigma2, family=family)


@pytest.mark.parametrize("p_c,p_u", [(0.0, 0.5), (0.5, 1.5)])
def test_invalid_sampling_designs(p_c, p_u):
    with pytest.raises(ConfigurationError):
        SamplingDesign(p_c, p_u)


def test_small_design_warning(hand_population, caplog):
    with caplog.at_level("WARNING", logger="clusterInferenceLogger"):
        expected = warn_small_design(hand_population, SamplingDesign(1.0, 0.5))
    assert expected == 2.0
    assert "below 30" in caplog.text


def test_sample_export_layout(grid_population):
    sample = draw_sample(grid_population, SamplingDesign(1.0, 0.5), AssignmentDesign(0.0), seed=2)
    frame = sample_to_frame(sample)
    assert list(frame.columns) == ["y", "w", "cluster"]
    assert_allclose(frame["y"], sample.y)
    assert set(frame["w"]) <= {0, 1}
