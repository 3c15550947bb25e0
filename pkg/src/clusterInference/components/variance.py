"""Variance estimators for the treatment coefficient computed from one sample.

Every sandwich is evaluated on the tau row only: by Frisch-Waugh the row of
(X'X)^-1 X' belonging to tau is regressor / sum(regressor^2), where the
regressor is W minus its grand mean (plain fit) or its cluster mean (fe fit).
No degrees-of-freedom corrections are applied.
"""
import numpy as np

from clusterInference import logger
from clusterInference.components.estimators import cluster_effects
from clusterInference.entity.domain_entity import CcaResult, FitResult, SampleDraw, VarianceReport
from clusterInference.exception import DegenerateSampleError
from clusterInference.utils.numerics import cluster_sums, compensated_sum


def _check_arms(fit: FitResult):
    if fit.n1 == 0 or fit.n0 == 0:
        raise DegenerateSampleError(f"empty treatment arm (N1={fit.n1}, N0={fit.n0})")


def _scores(fit: FitResult) -> np.ndarray:
    return fit.regressor * fit.residuals / fit.sxx


def v_ols(fit: FitResult) -> float:
    """Homoskedastic variance sigma^2 / sum(regressor^2), sigma^2 = mean squared residual."""
    _check_arms(fit)
    sigma2 = compensated_sum(fit.residuals ** 2) / fit.n
    return sigma2 / fit.sxx


def v_ehw(fit: FitResult, sample: SampleDraw) -> float:
    _check_arms(fit)
    return compensated_sum(_scores(fit) ** 2)


def v_lz(fit: FitResult, sample: SampleDraw) -> float:
    _check_arms(fit)
    sums = cluster_sums(_scores(fit), fit.cluster_codes, fit.clusters.size)
    return compensated_sum(sums ** 2)


def v_kloek(fit: FitResult, sample: SampleDraw, rho_eps: float, rho_w: float) -> float:
    """Moulton/Kloek inflation of the OLS variance for equal-sized clusters."""
    factor = 1.0 + rho_eps * rho_w * fit.n / fit.clusters.size
    return v_ols(fit) * factor


def v_cca(fit: FitResult, sample: SampleDraw, debias: bool = False) -> CcaResult:
    """LZ minus the between-cluster effect heterogeneity term.

    The correction is (1/N^2) sum_c N_c^2 (tau_c - tau)^2 over clusters with
    both arms. With `debias`, each squared deviation is reduced by the
    estimated sampling variance of tau_c, and clusters with a single unit in
    an arm drop out. Negative results are floored at zero.
    """
    effects = cluster_effects(sample)
    keep = np.ones(effects.clusters.size, dtype=bool)
    if debias:
        keep = np.isfinite(effects.within_variance_c)
    dropped = effects.uncorrectable.size + int(np.count_nonzero(~keep))
    if not keep.any():
        return CcaResult(value=None, applicable=False, dropped_cluster_count=dropped)

    deviation = (effects.tau_hat_c - fit.tau_hat)[keep] ** 2
    if debias:
        deviation = deviation - effects.within_variance_c[keep]
    weights = effects.n_c[keep].astype(np.float64) ** 2
    correction = compensated_sum(weights * deviation) / fit.n ** 2
    raw = v_lz(fit, sample) - correction
    if dropped:
        logger.debug(f"{dropped} cluster(s) excluded from the cluster-adjusted correction")
    if raw < 0.0:
        logger.debug(f"cluster-adjusted variance {raw:.3g} floored at zero")
        return CcaResult(value=0.0, applicable=True, floored=True, dropped_cluster_count=dropped)
    return CcaResult(value=raw, applicable=True, dropped_cluster_count=dropped)


def variance_report(fit: FitResult, sample: SampleDraw, rho_eps: float | None = None,
                    rho_w: float | None = None) -> VarianceReport:
    kloek = None
    if fit.model == "plain" and rho_eps is not None and rho_w is not None:
        kloek = v_kloek(fit, sample, rho_eps, rho_w)
    return VarianceReport(
        v_ols=v_ols(fit),
        v_ehw=v_ehw(fit, sample),
        v_lz=v_lz(fit, sample),
        v_kloek=kloek,
        cca=v_cca(fit, sample),
        cca_debiased=v_cca(fit, sample, debias=True),
    )
