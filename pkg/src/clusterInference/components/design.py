import numpy as np
import pandas as pd
from scipy.special import betaln

from clusterInference import logger
from clusterInference.constants import MIN_EXPECTED_SAMPLE
from clusterInference.entity.config_entity import AssignmentDesign, SamplingDesign
from clusterInference.entity.domain_entity import KappaMoments, Population, SampleDraw
from clusterInference.exception import ConfigurationError
from clusterInference.utils.numerics import as_generator, seed_sequence


def replication_rng(master_seed: int, replication: int) -> np.random.Generator:
    """Independent stream for one replication.

    SeedSequence hashes (master_seed, replication) into the PCG64 state, so a
    replication draws the same numbers whichever worker runs it.
    """
    return np.random.default_rng(seed_sequence(master_seed, spawn_key=(replication,)))


def warn_small_design(pop: Population, sampling: SamplingDesign) -> float:
    expected = sampling.p * pop.unit_count
    if expected < MIN_EXPECTED_SAMPLE:
        logger.warning(
            f"expected sample size {expected:.1f} is below {MIN_EXPECTED_SAMPLE}; "
            "the normal approximation behind the variance formulas is not credible here"
        )
    return expected


def assignment_support(assignment: AssignmentDesign) -> tuple[np.ndarray, np.ndarray]:
    """Support points and probabilities of q for the finite families."""
    if assignment.family == "degenerate":
        return np.array([0.5]), np.array([1.0])
    if assignment.family == "two-point":
        sigma = np.sqrt(assignment.sigma2)
        return np.array([0.5 - sigma, 0.5 + sigma]), np.array([0.5, 0.5])
    raise ConfigurationError("the beta family has continuous support")


def draw_assignment_probabilities(assignment: AssignmentDesign, cluster_count: int,
                                  rng: np.random.Generator) -> np.ndarray:
    if assignment.family == "beta":
        shape = assignment.beta_shape
        return rng.beta(shape, shape, size=cluster_count)
    values, weights = assignment_support(assignment)
    if values.size == 1:
        return np.full(cluster_count, values[0])
    return np.where(rng.random(cluster_count) < weights[0], values[0], values[1])


def draw_sample(pop: Population, sampling: SamplingDesign, assignment: AssignmentDesign,
                seed, full_vectors: bool = True) -> SampleDraw:
    """One draw of the two-stage sampling and two-stage assignment processes.

    The stream is consumed in a fixed order: q per cluster, cluster inclusion,
    unit inclusion, then treatment. With `full_vectors` every population unit
    gets an R and a W; otherwise only the sampled units are assigned, and unit
    inclusion is drawn as a binomial count per sampled cluster followed by a
    uniform choice of that many members. Both routes give the same
    distribution because R and W are independent.
    """
    rng = as_generator(seed)
    q = draw_assignment_probabilities(assignment, pop.cluster_count, rng)
    cluster_in = rng.random(pop.cluster_count) < sampling.p_c

    if full_vectors:
        unit_in = rng.random(pop.unit_count) < sampling.p_u
        sampled = cluster_in[pop.codes] & unit_in
        assigned = (rng.random(pop.unit_count) < q[pop.codes]).astype(np.int8)
        index = np.flatnonzero(sampled)
        w = assigned[index]
    else:
        order, offsets = pop.members
        picked = []
        for c in np.flatnonzero(cluster_in):
            size = offsets[c + 1] - offsets[c]
            count = rng.binomial(size, sampling.p_u)
            if count:
                picked.append(order[offsets[c] + rng.choice(size, size=count, replace=False)])
        index = np.sort(np.concatenate(picked)) if picked else np.empty(0, dtype=np.int64)
        w = (rng.random(index.shape[0]) < q[pop.codes[index]]).astype(np.int8)
        sampled = assigned = None

    y = np.where(w == 1, pop.y1[index], pop.y0[index])
    return SampleDraw(
        unit_index=index,
        cluster_id=pop.cluster_id[index],
        w=w,
        y=y,
        q=q,
        sampled=sampled,
        assigned=assigned,
    )


def analytic_moments(sampling: SamplingDesign, assignment: AssignmentDesign) -> pd.DataFrame:
    """Means, variances and covariances of R, W and RW for units i != j.

    Units in different clusters are uncorrelated, so the between-cluster
    column is zero throughout.
    """
    p_c, p_u, s2 = sampling.p_c, sampling.p_u, assignment.sigma2
    p = p_c * p_u
    table = pd.DataFrame(
        {
            "mean": [p, 0.5, p / 2.0],
            "variance": [p * (1.0 - p), 0.25, p * (2.0 - p) / 4.0],
            "within_cluster_covariance": [
                p_c * (1.0 - p_c) * p_u ** 2,
                s2,
                p_c * p_u ** 2 * (1.0 - p_c) / 4.0 + s2 * p_c * p_u ** 2,
            ],
            "between_cluster_covariance": [0.0, 0.0, 0.0],
        },
        index=pd.Index(["R", "W", "RW"], name="variable"),
    )
    return table


def _beta_moment(shape: float, j: int, k: int) -> float:
    return float(np.exp(betaln(shape + j, shape + k) - betaln(shape, shape)))


def kappa_moments(assignment: AssignmentDesign) -> KappaMoments:
    """Moments of q(1 - q) entering the fixed-effects variance."""
    s2 = assignment.sigma2
    eq1q = (1.0 - 4.0 * s2) / 4.0
    if assignment.family == "beta":
        shape = assignment.beta_shape
        kappa_22 = _beta_moment(shape, 2, 2)
        return KappaMoments(
            kappa=kappa_22 - eq1q ** 2,
            kappa_31=_beta_moment(shape, 3, 1),
            kappa_13=_beta_moment(shape, 1, 3),
            kappa_22=kappa_22,
            eq1q=eq1q,
        )
    # q(1 - q) is constant on the support {1/2 - sigma, 1/2 + sigma}
    second = 0.25 + s2
    return KappaMoments(
        kappa=0.0,
        kappa_31=eq1q * second,
        kappa_13=eq1q * second,
        kappa_22=eq1q ** 2,
        eq1q=eq1q,
    )


def sample_to_frame(sample: SampleDraw) -> pd.DataFrame:
    """Estimator-facing view of a draw in the analysis CSV layout."""
    return pd.DataFrame({"y": sample.y, "w": sample.w.astype(np.int64), "cluster": sample.cluster_id})
