import numpy as np

from clusterInference.entity.domain_entity import ClusterEffects, FitResult, SampleDraw
from clusterInference.exception import DegenerateSampleError, SingularDesignError
from clusterInference.utils.numerics import cluster_sums, compensated_sum


def _local_clusters(sample: SampleDraw) -> tuple[np.ndarray, np.ndarray]:
    clusters, codes = np.unique(sample.cluster_id, return_inverse=True)
    return clusters, codes.reshape(-1)


def _arm_counts(w: np.ndarray, codes: np.ndarray, cluster_count: int) -> tuple[np.ndarray, np.ndarray]:
    n_c = np.bincount(codes, minlength=cluster_count)
    n_c1 = np.bincount(codes, weights=w, minlength=cluster_count).astype(np.int64)
    return n_c1, n_c - n_c1


def fit_plain(sample: SampleDraw) -> FitResult:
    """Least squares of Y on (1, W): the difference in arm means."""
    n1, n0 = sample.n1, sample.n0
    if n1 == 0 or n0 == 0:
        raise DegenerateSampleError(f"empty treatment arm (N1={n1}, N0={n0})")

    w = sample.w.astype(np.float64)
    treated = sample.w == 1
    ybar1 = compensated_sum(sample.y[treated]) / n1
    ybar0 = compensated_sum(sample.y[~treated]) / n0
    tau_hat = ybar1 - ybar0
    residuals = sample.y - ybar0 - tau_hat * w

    clusters, codes = _local_clusters(sample)
    n_c1, n_c0 = _arm_counts(w, codes, clusters.size)
    return FitResult(
        model="plain",
        tau_hat=tau_hat,
        alpha=ybar0,
        residuals=residuals,
        regressor=w - n1 / sample.n,
        n1=n1,
        n0=n0,
        clusters=clusters,
        cluster_codes=codes,
        n_c1=n_c1,
        n_c0=n_c0,
    )


def fit_fixed_effects(sample: SampleDraw) -> FitResult:
    """Least squares of Y on W and a full set of cluster dummies.

    Uses the within transformation; the dummy columns are never built.
    """
    clusters, codes = _local_clusters(sample)
    w = sample.w.astype(np.float64)
    n_c1, n_c0 = _arm_counts(w, codes, clusters.size)
    if not np.any((n_c1 > 0) & (n_c0 > 0)):
        raise SingularDesignError("no cluster contains both treated and control units")

    n_c = n_c1 + n_c0
    wbar_c = n_c1 / n_c
    ybar_c = cluster_sums(sample.y, codes, clusters.size) / n_c
    regressor = w - wbar_c[codes]
    sxx = compensated_sum(regressor * regressor)
    tau_hat = compensated_sum(regressor * sample.y) / sxx
    alpha = ybar_c - tau_hat * wbar_c
    residuals = sample.y - alpha[codes] - tau_hat * w
    return FitResult(
        model="fe",
        tau_hat=tau_hat,
        alpha=alpha,
        residuals=residuals,
        regressor=regressor,
        n1=sample.n1,
        n0=sample.n0,
        clusters=clusters,
        cluster_codes=codes,
        n_c1=n_c1,
        n_c0=n_c0,
    )


def cluster_effects(sample: SampleDraw) -> ClusterEffects:
    """Within-cluster differences in arm means.

    Clusters lacking an arm are listed in `uncorrectable`. `within_variance_c`
    holds s1^2/N_c1 + s0^2/N_c0 (NaN when an arm has a single unit).
    """
    clusters, codes = _local_clusters(sample)
    w = sample.w.astype(np.float64)
    count = clusters.size
    n_c1, n_c0 = _arm_counts(w, codes, count)
    both = (n_c1 > 0) & (n_c0 > 0)

    def arm_stats(mask, n_arm):
        sums = cluster_sums(np.where(mask, sample.y, 0.0), codes, count)
        means = np.divide(sums, n_arm, out=np.zeros(count), where=n_arm > 0)
        dev = np.where(mask, sample.y - means[codes], 0.0)
        ss = cluster_sums(dev * dev, codes, count)
        var = np.divide(ss, n_arm - 1, out=np.full(count, np.nan), where=n_arm > 1)
        return means, var

    mean1, var1 = arm_stats(sample.w == 1, n_c1)
    mean0, var0 = arm_stats(sample.w == 0, n_c0)
    with np.errstate(divide="ignore", invalid="ignore"):
        within = var1 / n_c1 + var0 / n_c0
    return ClusterEffects(
        clusters=clusters[both],
        tau_hat_c=(mean1 - mean0)[both],
        n_c=(n_c1 + n_c0)[both],
        within_variance_c=within[both],
        uncorrectable=clusters[~both],
    )
