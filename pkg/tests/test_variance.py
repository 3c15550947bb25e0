import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterInference.components.estimators import fit_fixed_effects, fit_plain
from clusterInference.components.variance import v_cca, v_ehw, v_kloek, v_lz, v_ols, variance_report

from conftest import make_sample


def random_sample(seed: int, clusters: int = 8, per_cluster: int = 6):
    rng = np.random.default_rng(seed)
    cluster = np.repeat(np.arange(1, clusters + 1), per_cluster)
    w = rng.integers(0, 2, cluster.size)
    w[:2] = (1, 0)
    effects = rng.standard_normal(clusters)
    y = rng.standard_normal(cluster.size) + effects[cluster - 1] * w + rng.standard_normal(clusters)[cluster - 1]
    return make_sample(y, w, cluster)


def test_hand_example_sandwiches(hand_sample):
    fit = fit_plain(hand_sample)
    assert v_ehw(fit, hand_sample) == pytest.approx(1.0)
    assert v_lz(fit, hand_sample) == pytest.approx(0.0, abs=1e-15)
    assert v_ols(fit) == pytest.approx(1.0)


def test_zero_residuals_give_zero_variances():
    sample = make_sample([2.0, 2.0, 5.0, 5.0], [0, 0, 1, 1], [1, 2, 1, 2])
    fit = fit_plain(sample)
    assert v_ehw(fit, sample) == 0.0
    assert v_lz(fit, sample) == 0.0


def test_singleton_clusters_make_lz_equal_ehw():
    sample = random_sample(1)
    singletons = make_sample(sample.y, sample.w, np.arange(1, sample.n + 1))
    fit = fit_plain(singletons)
    assert v_lz(fit, singletons) == pytest.approx(v_ehw(fit, singletons), rel=1e-12)


def test_kloek_factor():
    sample = random_sample(2, clusters=50, per_cluster=20)
    fit = fit_plain(sample)
    assert v_kloek(fit, sample, rho_eps=0.1, rho_w=0.5) == pytest.approx(2.0 * v_ols(fit))
    assert v_kloek(fit, sample, rho_eps=0.0, rho_w=0.5) == pytest.approx(v_ols(fit))


def test_cca_correction_of_opposite_cluster_effects():
    # tau_1 = +1, tau_2 = -1, tau_hat = 0, two units per cluster
    sample = make_sample([1.0, 0.0, 0.0, 1.0], [1, 0, 1, 0], [1, 1, 2, 2])
    fit = fit_plain(sample)
    assert fit.tau_hat == 0.0
    result = v_cca(fit, sample)
    assert result.applicable
    assert v_lz(fit, sample) - result.value == pytest.approx(0.5)


def test_cca_equals_lz_without_heterogeneity():
    sample = make_sample([2.0, 1.0, 5.0, 4.0, 3.5, 2.5], [1, 0, 1, 0, 1, 0], [1, 1, 2, 2, 3, 3])
    fit = fit_plain(sample)
    assert fit.tau_hat == pytest.approx(1.0)
    assert v_cca(fit, sample).value == pytest.approx(v_lz(fit, sample))


def test_cca_is_floored_at_zero():
    # one treated unit in cluster 1 and one control unit in cluster 2: LZ = 0.0703125 but the
    # heterogeneity term is (16 * 0.75^2 + 16 * 0.25^2) / 64 = 0.15625
    sample = make_sample([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], [1, 0, 0, 0, 0, 1, 1, 1],
                         [1, 1, 1, 1, 2, 2, 2, 2])
    fit = fit_plain(sample)
    assert fit.tau_hat == pytest.approx(0.25)
    assert v_lz(fit, sample) == pytest.approx(0.0703125)
    result = v_cca(fit, sample)
    assert result.applicable
    assert result.floored is True
    assert result.value == 0.0


def test_cca_not_applicable_without_mixed_clusters(hand_sample):
    fit = fit_plain(hand_sample)
    result = v_cca(fit, hand_sample)
    assert not result.applicable
    assert result.value is None
    assert result.dropped_cluster_count == 2


def test_debiased_cca_needs_two_units_per_arm():
    sample = make_sample([1.0, 0.0, 0.0, 1.0], [1, 0, 1, 0], [1, 1, 2, 2])
    result = v_cca(fit_plain(sample), sample, debias=True)
    assert not result.applicable
    assert result.dropped_cluster_count == 2


def test_debiased_cca_subtracts_the_within_variance():
    sample = random_sample(3, clusters=6, per_cluster=12)
    fit = fit_plain(sample)
    raw, debiased = v_cca(fit, sample), v_cca(fit, sample, debias=True)
    if not (raw.floored or debiased.floored) and debiased.dropped_cluster_count == raw.dropped_cluster_count:
        assert debiased.value >= raw.value


def test_report_collects_all_estimators(hand_sample):
    fit = fit_plain(hand_sample)
    report = variance_report(fit, hand_sample, rho_eps=0.0, rho_w=1.0)
    assert report.get("ehw") == pytest.approx(1.0)
    assert report.get("kloek") == pytest.approx(report.v_ols)
    assert report.standard_errors()["se_ehw"] == pytest.approx(1.0)
    assert report.get("cca") is None
    assert not report.cca_applicable


def test_report_has_no_kloek_for_fixed_effects():
    sample = random_sample(4)
    fit = fit_fixed_effects(sample)
    assert variance_report(fit, sample, rho_eps=0.1, rho_w=0.1).v_kloek is None


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_lz_is_nonnegative_and_scales_quadratically(seed):
    sample = random_sample(seed)
    scaled = make_sample(3.0 * sample.y, sample.w, sample.cluster_id)
    fit, fit_scaled = fit_plain(sample), fit_plain(scaled)
    assert v_lz(fit, sample) >= 0.0
    assert v_lz(fit_scaled, scaled) == pytest.approx(9.0 * v_lz(fit, sample), rel=1e-9)
    assert v_ehw(fit_scaled, scaled) == pytest.approx(9.0 * v_ehw(fit, sample), rel=1e-9)


def _design(sample, fixed_effects: bool) -> np.ndarray:
    columns = [np.ones(sample.n), sample.w.astype(float)]
    if fixed_effects:
        dummies = pd.get_dummies(sample.cluster_id, drop_first=True).to_numpy(dtype=float)
        columns.extend(dummies.T)
    return np.column_stack(columns)


@pytest.mark.parametrize("fixed_effects", [False, True])
@pytest.mark.parametrize("seed", [5, 6, 7])
def test_sandwiches_match_statsmodels(seed, fixed_effects):
    sm = pytest.importorskip("statsmodels.api")
    sample = random_sample(seed)
    fit = fit_fixed_effects(sample) if fixed_effects else fit_plain(sample)
    model = sm.OLS(sample.y, _design(sample, fixed_effects))

    hc0 = model.fit(cov_type="HC0").cov_params()[1, 1]
    clustered = model.fit(
        cov_type="cluster",
        cov_kwds={"groups": sample.cluster_id, "use_correction": False},
    ).cov_params()[1, 1]
    assert v_ehw(fit, sample) == pytest.approx(hc0, rel=1e-8)
    assert v_lz(fit, sample) == pytest.approx(clustered, rel=1e-8)
    assert fit.tau_hat == pytest.approx(model.fit().params[1], rel=1e-9, abs=1e-12)
