import numpy as np

from clusterInference.entity.domain_entity import DiagnosticsReport, FitResult, SampleDraw
from clusterInference.exception import UndefinedDiagnosticError
from clusterInference.utils.numerics import cluster_means, compensated_sum


def within_cluster_correlation(values: np.ndarray, cluster_ids: np.ndarray) -> float:
    """Between-cluster share of the variance of `values`.

    rho = [Var(v) - Var(v demeaned within clusters)] / Var(v), with uncorrected
    (divide by N) variances of the grand-demeaned vector.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise UndefinedDiagnosticError("a correlation diagnostic needs at least two units")
    n = values.size
    centered = values - compensated_sum(values) / n
    total = compensated_sum(centered ** 2) / n
    scale = float(np.max(np.abs(values)))
    if total <= (1e-12 * scale) ** 2:
        raise UndefinedDiagnosticError("zero overall variance")

    _, codes = np.unique(cluster_ids, return_inverse=True)
    codes = codes.reshape(-1)
    count = int(codes.max()) + 1
    within = centered - cluster_means(centered, codes, count)[codes]
    rho = (total - compensated_sum(within ** 2) / n) / total
    return float(min(1.0, max(0.0, rho)))


def full_diagnostics(fit: FitResult, sample: SampleDraw, strict: bool = True) -> DiagnosticsReport:
    """Correlations of the residuals, the treatment, and the OLS score.

    The score uses the grand-demeaned treatment for both models. With
    `strict=False` an undefined component is reported as None and listed in
    `undefined` instead of raising.
    """
    w = sample.w.astype(np.float64)
    inputs = {
        "rho_eps": fit.residuals,
        "rho_w": w,
        "rho_epsw": fit.residuals * (w - w.mean()),
    }
    values, undefined = {}, []
    for name, vector in inputs.items():
        try:
            values[name] = within_cluster_correlation(vector, sample.cluster_id)
        except UndefinedDiagnosticError:
            if strict:
                raise
            values[name] = None
            undefined.append(name)
    return DiagnosticsReport(undefined=tuple(undefined), **values)
