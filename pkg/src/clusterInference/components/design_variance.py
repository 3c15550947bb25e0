"""Exact design variances and variance-estimator limits from the full population.

Notation: d = eps1 - eps0 and s = eps1 + eps0 per unit, with bars for the
cluster averages. Everything is normalized by the population size M, so the
values are directly comparable with N times a variance estimate.
"""
import numpy as np

from clusterInference.components.design import kappa_moments
from clusterInference.entity.config_entity import AssignmentDesign, SamplingDesign
from clusterInference.entity.domain_entity import Estimands, ExactVariance, LimitFunctionals
from clusterInference.exception import ConfigurationError
from clusterInference.utils.numerics import compensated_sum


def _unit_mean(values: np.ndarray, m: int) -> float:
    return compensated_sum(values) / m


def _cluster_square(est: Estimands, values_c: np.ndarray) -> float:
    """(1/M) sum_c M_c^2 x_c^2."""
    sizes = est.cluster_sizes.astype(np.float64)
    return compensated_sum(sizes ** 2 * values_c ** 2) / est.unit_count


def _split(est: Estimands):
    d = est.eps1 - est.eps0
    s = est.eps1 + est.eps0
    d_bar = est.eps1_bar_c - est.eps0_bar_c
    s_bar = est.eps1_bar_c + est.eps0_bar_c
    return d, s, d_bar, s_bar


def _require_within_variation(assignment: AssignmentDesign):
    if assignment.sigma2 >= 0.25:
        raise ConfigurationError(
            "the fixed-effects variance needs sigma2 < 1/4; with sigma2 = 1/4 "
            "the assignment within clusters is perfectly correlated"
        )


def lz_gap(est: Estimands, sampling: SamplingDesign) -> float:
    """Limit of the LZ estimator minus the true variance, for both models."""
    _, _, d_bar, _ = _split(est)
    return sampling.p_c * sampling.p_u * _cluster_square(est, d_bar)


def exact_variance_plain(est: Estimands, sampling: SamplingDesign,
                         assignment: AssignmentDesign) -> ExactVariance:
    """Variance of the linearized difference-in-means statistic.

    Built as E[S^2] + E[D^2], the sampling and the assignment components,
    which are uncorrelated.
    """
    m = est.unit_count
    p_c, p_u, s2 = sampling.p_c, sampling.p_u, assignment.sigma2
    d, s, d_bar, s_bar = _split(est)

    unit_d = _unit_mean(d ** 2, m)
    unit_s = _unit_mean(s ** 2, m)
    cluster_d = _cluster_square(est, d_bar)
    cluster_s = _cluster_square(est, s_bar)

    s_part = (1.0 - p_u) * unit_d + p_u * (1.0 - p_c) * cluster_d
    d_part = (1.0 - 4.0 * s2 * p_u) * unit_s + 4.0 * s2 * p_u * cluster_s
    return ExactVariance(
        model="plain",
        total=s_part + d_part,
        unit_term=(1.0 - p_u) * unit_d + (1.0 - 4.0 * s2 * p_u) * unit_s,
        cluster_term=p_u * ((1.0 - p_c) * cluster_d + 4.0 * s2 * cluster_s),
        s_part=s_part,
        d_part=d_part,
    )


def _fe_unit_terms(est: Estimands, assignment: AssignmentDesign):
    k = kappa_moments(assignment)
    m2 = k.eq1q ** 2
    d, _, _, _ = _split(est)
    u = est.eps1 - est.eps1_bar_c[est.codes]
    v = est.eps0 - est.eps0_bar_c[est.codes]
    return k, m2, d, u, v


def _fe_diagonal(est: Estimands, assignment: AssignmentDesign) -> float:
    """(1/M) sum_i E[(W - q)^2 adjusted_residual^2] / E[q(1-q)]^2."""
    k, m2, d, u, v = _fe_unit_terms(est, assignment)
    per_unit = (
        k.fourth_moment * d ** 2
        + k.kappa_31 * u ** 2
        + k.kappa_13 * v ** 2
        + 2.0 * (k.kappa_22 - k.kappa_31) * d * u
        + 2.0 * (k.kappa_13 - k.kappa_22) * d * v
        + 2.0 * k.kappa_22 * u * v
    )
    return _unit_mean(per_unit, est.unit_count) / m2


def exact_variance_fe(est: Estimands, sampling: SamplingDesign,
                      assignment: AssignmentDesign) -> ExactVariance:
    """Variance of the linearized fixed-effects statistic.

    The unit term keeps every within-unit product of the adjusted residual
    expansion, with E[(W - q)^4] = E[q(1-q)] - 3 E[q^2 (1-q)^2]. Pairs of
    units in the same cluster only interact through (W - q)^2 d.
    """
    _require_within_variation(assignment)
    k, m2, d, _, _ = _fe_unit_terms(est, assignment)
    _, _, d_bar, _ = _split(est)
    p_c, p_u = sampling.p_c, sampling.p_u

    unit_term = _fe_diagonal(est, assignment) - p_u * k.kappa_22 / m2 * _unit_mean(d ** 2, est.unit_count)
    cluster_term = p_u * ((1.0 - p_c) + k.kappa / m2) * _cluster_square(est, d_bar)
    return ExactVariance(model="fe", total=unit_term + cluster_term, unit_term=unit_term, cluster_term=cluster_term)


def limit_functionals(est: Estimands, sampling: SamplingDesign, assignment: AssignmentDesign,
                      model: str = "plain") -> LimitFunctionals:
    """Probability limits of N times the EHW and LZ estimates."""
    gap = lz_gap(est, sampling)
    if model == "fe":
        _require_within_variation(assignment)
        v_ehw = _fe_diagonal(est, assignment)
        v_lz = exact_variance_fe(est, sampling, assignment).total + gap
    elif model == "plain":
        m = est.unit_count
        p_u, s2 = sampling.p_u, assignment.sigma2
        _, _, d_bar, s_bar = _split(est)
        squares = est.eps1 ** 2 + est.eps0 ** 2
        v_ehw = 2.0 * _unit_mean(squares, m)
        per_unit = (2.0 - p_u * (1.0 + 4.0 * s2)) * squares + p_u * (2.0 - 8.0 * s2) * est.eps1 * est.eps0
        v_lz = _unit_mean(per_unit, m) + p_u * (_cluster_square(est, d_bar) + 4.0 * s2 * _cluster_square(est, s_bar))
    else:
        raise ConfigurationError(f"unknown model: {model}")
    return LimitFunctionals(
        model=model,
        v_ehw_limit=v_ehw,
        v_lz_limit=v_lz,
        lz_minus_true=gap,
        lz_minus_ehw=v_lz - v_ehw,
    )


def printed_variance_plain(est: Estimands, sampling: SamplingDesign,
                           assignment: AssignmentDesign) -> ExactVariance:
    """The published display, with +4 p_U sigma2 d^2 in the unit term."""
    m = est.unit_count
    p_c, p_u, s2 = sampling.p_c, sampling.p_u, assignment.sigma2
    d, _, d_bar, s_bar = _split(est)
    squares = est.eps1 ** 2 + est.eps0 ** 2
    unit_term = _unit_mean(2.0 * squares - p_u * d ** 2 + 4.0 * p_u * s2 * d ** 2, m)
    cluster_term = p_u * ((1.0 - p_c) * _cluster_square(est, d_bar) + 4.0 * s2 * _cluster_square(est, s_bar))
    return ExactVariance(model="plain", total=unit_term + cluster_term, unit_term=unit_term,
                         cluster_term=cluster_term, variant="printed")


def printed_variance_fe(est: Estimands, sampling: SamplingDesign,
                        assignment: AssignmentDesign) -> ExactVariance:
    """The published fixed-effects display (three unit squares, no cross products)."""
    _require_within_variation(assignment)
    k, m2, d, u, v = _fe_unit_terms(est, assignment)
    _, _, d_bar, _ = _split(est)
    p_c, p_u = sampling.p_c, sampling.p_u
    per_unit = (1.0 - p_u) * (1.0 + k.kappa / m2) * d ** 2 + k.kappa_31 / m2 * u ** 2 + k.kappa_13 / m2 * v ** 2
    unit_term = _unit_mean(per_unit, est.unit_count)
    cluster_term = p_u * ((1.0 - p_c) + k.kappa / m2) * _cluster_square(est, d_bar)
    return ExactVariance(model="fe", total=unit_term + cluster_term, unit_term=unit_term,
                         cluster_term=cluster_term, variant="printed")


def printed_lz_minus_ehw(est: Estimands, sampling: SamplingDesign, assignment: AssignmentDesign) -> float:
    """The published LZ-minus-EHW display, with the leading factor 2 p_U."""
    p_u, s2 = sampling.p_u, assignment.sigma2
    d, s, d_bar, s_bar = _split(est)
    unit = _unit_mean(d ** 2 + 4.0 * s2 * s ** 2, est.unit_count)
    cluster = _cluster_square(est, d_bar) + 4.0 * s2 * _cluster_square(est, s_bar)
    return -2.0 * p_u * unit + p_u * cluster
