"""Exhaustive enumeration of the sampling and assignment distribution.

Clusters are independent, so the moments of the linearized statistics (sums of
per-cluster pieces) are assembled from per-cluster enumerations: every
inclusion pattern R, every q in the support and every treatment pattern W of a
single cluster. Only the moments of the estimator itself, which is not additive
over clusters, need the joint product of the per-cluster configurations.
"""
import itertools
from dataclasses import dataclass

import numpy as np
import pandas as pd

from clusterInference import logger
from clusterInference.components.design import assignment_support
from clusterInference.components.design_variance import (
    exact_variance_fe,
    exact_variance_plain,
    limit_functionals,
    printed_variance_fe,
    printed_variance_plain,
)
from clusterInference.components.population import compute_estimands, population_from_table
from clusterInference.constants import (
    ORACLE_BLOCK_CELLS,
    ORACLE_MAX_CELLS,
    ORACLE_MAX_UNITS,
    ORACLE_TOLERANCE,
)
from clusterInference.entity.config_entity import AssignmentDesign, OracleConfig, SamplingDesign
from clusterInference.entity.domain_entity import OracleResult, Population
from clusterInference.exception import OracleSizeError
from clusterInference.utils.numerics import seed_sequence


@dataclass
class _Accumulator:
    """Per-cluster expectations; combined across clusters by independence."""
    eta: float = 0.0
    eta2: float = 0.0
    ehw: float = 0.0
    s: float = 0.0
    s2: float = 0.0
    d: float = 0.0
    d2: float = 0.0
    sd: float = 0.0
    fe: float = 0.0
    fe2: float = 0.0
    no_treated: float = 0.0
    no_control: float = 0.0
    empty: float = 0.0


def _patterns(size: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=size)), dtype=np.float64)


def _inclusion_probabilities(patterns: np.ndarray, sampling: SamplingDesign) -> np.ndarray:
    size = patterns.shape[1]
    k = patterns.sum(axis=1)
    prob = sampling.p_c * sampling.p_u ** k * (1.0 - sampling.p_u) ** (size - k)
    prob[k == 0] += 1.0 - sampling.p_c
    return prob


def _treatment_probabilities(patterns: np.ndarray, q: float) -> np.ndarray:
    size = patterns.shape[1]
    k = patterns.sum(axis=1)
    return q ** k * (1.0 - q) ** (size - k)


def _blocks(rows: int, width: int):
    step = max(1, ORACLE_BLOCK_CELLS // max(width, 1))
    for start in range(0, rows, step):
        yield slice(start, min(rows, start + step))


def _combine(cross: np.ndarray, first: np.ndarray, second: np.ndarray) -> float:
    """E[XY] for X = sum_c X_c, Y = sum_c Y_c with independent clusters."""
    return float(cross.sum() + first.sum() * second.sum() - np.dot(first, second))


def _size_report(pop: Population, max_units: int) -> dict:
    return {
        "unit_count": pop.unit_count,
        "cluster_count": pop.cluster_count,
        "largest_cluster": int(pop.cluster_sizes.max()),
        "max_units": max_units,
        "joint_configurations": f"4^{pop.unit_count}",
    }


def _check_size(pop: Population, assignment: AssignmentDesign, max_units: int):
    limit = min(max_units, ORACLE_MAX_UNITS)
    if max_units > ORACLE_MAX_UNITS or pop.unit_count > limit:
        raise OracleSizeError("population too large to enumerate", _size_report(pop, max_units))
    if assignment.family == "beta":
        raise OracleSizeError("the beta family has continuous support", _size_report(pop, max_units))


def _cluster_pass(acc: _Accumulator, r_pat, pr, w_pat, support, eps0, eps1, eps0_bar, eps1_bar,
                  sampling: SamplingDesign, scale: float, fe_scale: float | None):
    """Adds the expectations of one cluster to `acc`."""
    p = sampling.p
    weights_q = [(q, pq, _treatment_probabilities(w_pat, q)) for q, pq in zip(*support)]
    pw = sum(pq * prob for _, pq, prob in weights_q)

    sign = 2.0 * w_pat - 1.0
    eps_w = w_pat * eps1 + (1.0 - w_pat) * eps0
    eta_cols = 2.0 * scale * sign * eps_w
    d_cols = scale * sign * (eps1 + eps0)
    s_rows = scale * (r_pat - p) @ (eps1 - eps0)
    sampled = r_pat.sum(axis=1)

    for block in _blocks(r_pat.shape[0], w_pat.shape[0]):
        r = r_pat[block]
        weight = pr[block][:, None] * pw[None, :]
        eta = r @ eta_cols.T
        dd = r @ d_cols.T
        ss = s_rows[block][:, None]
        acc.eta += float(np.sum(weight * eta))
        acc.eta2 += float(np.sum(weight * eta ** 2))
        acc.ehw += float(np.sum(weight * (r @ (eta_cols ** 2).T)))
        acc.s += float(np.sum(pr[block] * s_rows[block]))
        acc.s2 += float(np.sum(pr[block] * s_rows[block] ** 2))
        acc.d += float(np.sum(weight * dd))
        acc.d2 += float(np.sum(weight * dd ** 2))
        acc.sd += float(np.sum(weight * ss * dd))
        n1 = r @ w_pat.T
        acc.no_treated += float(np.sum(weight[n1 == 0]))
        acc.no_control += float(np.sum(weight[(sampled[block][:, None] - n1) == 0]))
    acc.empty = float(np.sum(pr[sampled == 0]))

    if fe_scale is None:
        return
    for q, pq, prob_w in weights_q:
        if pq == 0.0:
            continue
        adjusted = eps_w - q * eps1_bar - (1.0 - q) * eps0_bar
        fe_cols = fe_scale * (w_pat - q) * adjusted
        for block in _blocks(r_pat.shape[0], w_pat.shape[0]):
            weight = pq * pr[block][:, None] * prob_w[None, :]
            fe = r_pat[block] @ fe_cols.T
            acc.fe += float(np.sum(weight * fe))
            acc.fe2 += float(np.sum(weight * fe ** 2))


def _estimator_states(r_pat, pr, w_pat, pw, y0, y1) -> dict:
    weight = (pr[:, None] * pw[None, :]).ravel()
    keep = weight > 0.0
    return {
        "prob": weight[keep],
        "n1": (r_pat @ w_pat.T).ravel()[keep],
        "n0": (r_pat @ (1.0 - w_pat).T).ravel()[keep],
        "sy1": (r_pat @ (w_pat * y1).T).ravel()[keep],
        "sy0": (r_pat @ ((1.0 - w_pat) * y0).T).ravel()[keep],
    }


def _joint_moments(states: list[dict], tau: float) -> tuple[float | None, float | None]:
    joint = states[0]
    for nxt in states[1:]:
        joint = {
            key: (np.multiply if key == "prob" else np.add).outer(joint[key], nxt[key]).ravel()
            for key in joint
        }
    valid = (joint["n1"] > 0) & (joint["n0"] > 0)
    mass = joint["prob"][valid].sum()
    if mass <= 0.0:
        return None, None
    n1, n0 = joint["n1"][valid], joint["n0"][valid]
    tau_hat = joint["sy1"][valid] / n1 - joint["sy0"][valid] / n0
    scaled = np.sqrt(n1 + n0) * (tau_hat - tau)
    prob = joint["prob"][valid] / mass
    mean = float(np.dot(prob, scaled))
    return mean, float(np.dot(prob, (scaled - mean) ** 2))


def enumeration_oracle(pop: Population, sampling: SamplingDesign, assignment: AssignmentDesign,
                       max_units: int = ORACLE_MAX_UNITS, estimator_moments: bool = True) -> OracleResult:
    """Exact moments of the linearized statistics by full enumeration.

    The moments of sqrt(N)(tau_hat - tau) are conditional on both arms being
    nonempty and are only computed when the joint configuration count stays
    below ORACLE_MAX_CELLS.
    """
    _check_size(pop, assignment, max_units)
    est = compute_estimands(pop)
    support = assignment_support(assignment)
    m = pop.unit_count
    scale = 1.0 / np.sqrt(m * sampling.p)
    eq1q = (1.0 - 4.0 * assignment.sigma2) / 4.0
    fe_scale = scale / eq1q if assignment.sigma2 < 0.25 else None

    order, offsets = pop.members
    accumulators, states, cluster_states = [], [], []
    joint_count = 1
    for c in range(pop.cluster_count):
        units = order[offsets[c]:offsets[c + 1]]
        patterns = _patterns(units.size)
        pr = _inclusion_probabilities(patterns, sampling)
        pw = sum(pq * _treatment_probabilities(patterns, q) for q, pq in zip(*support))
        r_pat, pr = patterns[pr > 0.0], pr[pr > 0.0]
        w_pat, w_keep = patterns[pw > 0.0], pw > 0.0
        cluster_states.append(int(r_pat.shape[0] * w_pat.shape[0]))
        joint_count *= cluster_states[-1]

        acc = _Accumulator()
        _cluster_pass(
            acc, r_pat, pr, w_pat, support,
            est.eps0[units], est.eps1[units], est.eps0_bar_c[c], est.eps1_bar_c[c],
            sampling, scale, fe_scale,
        )
        accumulators.append(acc)
        if estimator_moments and joint_count <= ORACLE_MAX_CELLS:
            states.append(_estimator_states(r_pat, pr, w_pat, pw[w_keep], pop.y0[units], pop.y1[units]))

    def column(name: str) -> np.ndarray:
        return np.array([getattr(acc, name) for acc in accumulators])

    eta_mean = float(column("eta").sum())
    fe_mean = fe_variance = fe_lz = None
    if fe_scale is not None:
        fe_mean = float(column("fe").sum())
        fe_variance = _combine(column("fe2"), column("fe"), column("fe")) - fe_mean ** 2
        fe_lz = float(column("fe2").sum())

    degenerate = float(
        np.prod(column("no_treated")) + np.prod(column("no_control")) - np.prod(column("empty"))
    )
    enumerated = estimator_moments and joint_count <= ORACLE_MAX_CELLS
    estimator_mean = estimator_variance = None
    if enumerated:
        estimator_mean, estimator_variance = _joint_moments(states, est.tau)
    elif estimator_moments:
        logger.info(f"{joint_count} joint configurations exceed {ORACLE_MAX_CELLS}; estimator moments skipped")

    return OracleResult(
        eta_mean=eta_mean,
        eta_variance=_combine(column("eta2"), column("eta"), column("eta")) - eta_mean ** 2,
        ehw_limit=float(column("ehw").sum()),
        lz_limit=float(column("eta2").sum()),
        s_second_moment=_combine(column("s2"), column("s"), column("s")),
        d_second_moment=_combine(column("d2"), column("d"), column("d")),
        sd_cross_moment=_combine(column("sd"), column("s"), column("d")),
        fe_eta_mean=fe_mean,
        fe_eta_variance=fe_variance,
        fe_lz_limit=fe_lz,
        degenerate_probability=degenerate,
        estimator_mean=estimator_mean,
        estimator_variance=estimator_variance,
        configurations={
            "cluster_states": cluster_states,
            "joint_states": joint_count,
            "estimator_enumerated": enumerated,
        },
    )


def fixture_populations(max_units: int = 10, seed: int = 20240521) -> dict[str, Population]:
    """Small populations used by the oracle fixture table.

    `hand4` is the two-cluster table with cluster effects +1 and -1; the others
    draw normal outcomes with heterogeneous cluster effects.
    """
    rng = np.random.default_rng(seed_sequence(seed))
    fixtures = {"hand4": population_from_table([1, 1, 2, 2], [0.0, 2.0, 1.0, 3.0], [1.0, 3.0, 0.0, 2.0])}
    layouts = {
        "unequal": (1, 2, 3),
        "pairs": (2, 2, 2, 2),
        "halves": (5, 5),
        "singletons": (1, 1, 1, 1, 1),
    }
    for name, sizes in layouts.items():
        cluster = np.repeat(np.arange(1, len(sizes) + 1), sizes)
        effects = rng.normal(size=len(sizes))
        y0 = rng.standard_normal(cluster.size)
        y1 = y0 + effects[cluster - 1] + 0.5 * rng.standard_normal(cluster.size)
        fixtures[name] = population_from_table(cluster, y0, y1)
    return {name: pop for name, pop in fixtures.items() if pop.unit_count <= max_units}


def _row(fixture_id, sampling, sigma2, model, formula, oracle, printed=np.nan) -> dict:
    discrepancy = abs(formula - oracle)
    return {
        "fixture_id": fixture_id,
        "p_c": sampling.p_c,
        "p_u": sampling.p_u,
        "sigma2": sigma2,
        "model": model,
        "formula_value": formula,
        "oracle_value": oracle,
        "discrepancy": discrepancy,
        "printed_value": printed,
        "agrees": bool(discrepancy <= ORACLE_TOLERANCE * max(1.0, abs(oracle))),
    }


def oracle_fixture_table(max_units: int, seed: int, p_c_grid, p_u_grid, sigma2_grid) -> pd.DataFrame:
    """Formula against enumeration for every fixture population and grid point."""
    if max_units > ORACLE_MAX_UNITS:
        raise OracleSizeError("requested fixtures exceed the enumeration limit",
                              {"max_units": max_units, "limit": ORACLE_MAX_UNITS})
    rows = []
    for fixture_id, pop in fixture_populations(max_units, seed).items():
        est = compute_estimands(pop)
        for p_c, p_u, sigma2 in itertools.product(p_c_grid, p_u_grid, sigma2_grid):
            sampling = SamplingDesign(p_c=float(p_c), p_u=float(p_u))
            assignment = AssignmentDesign(sigma2=float(sigma2))
            result = enumeration_oracle(pop, sampling, assignment, max_units, estimator_moments=False)

            plain_limits = limit_functionals(est, sampling, assignment, "plain")
            rows.append(_row(fixture_id, sampling, sigma2, "plain",
                             exact_variance_plain(est, sampling, assignment).total, result.eta_variance,
                             printed_variance_plain(est, sampling, assignment).total))
            rows.append(_row(fixture_id, sampling, sigma2, "plain-ehw-limit",
                             plain_limits.v_ehw_limit, result.ehw_limit))
            rows.append(_row(fixture_id, sampling, sigma2, "plain-lz-limit",
                             plain_limits.v_lz_limit, result.lz_limit))
            if assignment.sigma2 < 0.25:
                fe_limits = limit_functionals(est, sampling, assignment, "fe")
                rows.append(_row(fixture_id, sampling, sigma2, "fe",
                                 exact_variance_fe(est, sampling, assignment).total, result.fe_eta_variance,
                                 printed_variance_fe(est, sampling, assignment).total))
                rows.append(_row(fixture_id, sampling, sigma2, "fe-lz-limit",
                                 fe_limits.v_lz_limit, result.fe_lz_limit))
    table = pd.DataFrame(rows)
    logger.info(
        f"oracle fixtures: {len(table)} rows, max discrepancy {table['discrepancy'].max():.3g}, "
        f"{int((~table['agrees']).sum())} disagreeing"
    )
    return table


class OracleFixtures:
    def __init__(self, config: OracleConfig):
        self.config = config

    def run(self) -> pd.DataFrame:
        self.table = oracle_fixture_table(
            self.config.max_units,
            self.config.seed,
            self.config.p_c_grid,
            self.config.p_u_grid,
            self.config.sigma2_grid,
        )
        return self.table

    def save_fixtures(self):
        self.table.to_csv(self.config.fixture_csv, index=False)
        logger.info(f"oracle fixtures saved at: {self.config.fixture_csv}")

    @property
    def all_agree(self) -> bool:
        return bool(self.table["agrees"].all())
