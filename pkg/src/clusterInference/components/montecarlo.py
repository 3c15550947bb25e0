"""Replication harness: coverage of the confidence intervals and empirical variances."""
import itertools
from dataclasses import replace

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from clusterInference import logger
from clusterInference.components.design import draw_sample, replication_rng, warn_small_design
from clusterInference.components.design_variance import (
    exact_variance_fe,
    exact_variance_plain,
    limit_functionals,
    printed_variance_fe,
    printed_variance_plain,
)
from clusterInference.components.diagnostics import full_diagnostics
from clusterInference.components.estimators import fit_fixed_effects, fit_plain
from clusterInference.components.population import build_population, compute_estimands
from clusterInference.components.variance import v_cca, v_ehw, v_kloek, v_lz, v_ols
from clusterInference.entity.config_entity import (
    AssignmentDesign,
    ExperimentConfig,
    SamplingDesign,
    SimulationConfig,
    VarianceValidationConfig,
)
from clusterInference.entity.domain_entity import CoverageReport, CoverageRow, Estimands, Population
from clusterInference.exception import DegenerateSampleError, SingularDesignError
from clusterInference.utils.common import save_json

FITTERS = {"plain": fit_plain, "fe": fit_fixed_effects}
PRINTED = {"plain": printed_variance_plain, "fe": printed_variance_fe}

ESTIMATES = {
    "ols": lambda fit, sample: v_ols(fit),
    "ehw": v_ehw,
    "lz": v_lz,
    "cca": lambda fit, sample: v_cca(fit, sample).value,
    "cca_debiased": lambda fit, sample: v_cca(fit, sample, debias=True).value,
}


def _pairs(config: ExperimentConfig):
    for model, estimator in itertools.product(config.models, config.estimators):
        # the Kloek factor is defined for the regression without fixed effects only
        if not (estimator == "kloek" and model == "fe"):
            yield model, estimator


def _kloek(fit, sample) -> float | None:
    diagnostics = full_diagnostics(fit, sample, strict=False)
    if diagnostics.rho_eps is None or diagnostics.rho_w is None:
        return None
    return v_kloek(fit, sample, diagnostics.rho_eps, diagnostics.rho_w)


def _replicate(pop: Population, config: ExperimentConfig, replication: int) -> list[dict]:
    rng = replication_rng(config.master_seed, replication)
    sample = draw_sample(pop, config.sampling, config.assignment, rng, full_vectors=False)
    records = []
    for model in config.models:
        try:
            fit = FITTERS[model](sample)
        except (DegenerateSampleError, SingularDesignError):
            fit = None
        for estimator in config.estimators:
            if estimator == "kloek" and model == "fe":
                continue
            variance = None
            if fit is not None:
                variance = _kloek(fit, sample) if estimator == "kloek" else ESTIMATES[estimator](fit, sample)
            records.append({
                "replication": replication,
                "model": model,
                "estimator": estimator,
                "fitted": fit is not None,
                "n": sample.n,
                "tau_hat": np.nan if fit is None else fit.tau_hat,
                "variance": np.nan if variance is None else variance,
            })
    return records


def _run_chunk(pop: Population, config: ExperimentConfig, replications) -> list[dict]:
    return [record for rep in replications for record in _replicate(pop, config, int(rep))]


def _mean_and_mcse(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return np.nan, np.nan
    mcse = values.std(ddof=1) / np.sqrt(values.size) if values.size > 1 else np.nan
    return float(values.mean()), float(mcse)


def _variance_and_mcse(values: np.ndarray) -> tuple[float, float]:
    """Sample variance and its delta-method standard error."""
    if values.size < 2:
        return np.nan, np.nan
    variance = values.var(ddof=1)
    fourth = np.mean((values - values.mean()) ** 4)
    return float(variance), float(np.sqrt(max(fourth - variance ** 2, 0.0) / values.size))


def exact_summary(est: Estimands, sampling: SamplingDesign, assignment: AssignmentDesign) -> dict:
    plain = limit_functionals(est, sampling, assignment, "plain")
    summary = {
        "plain": {
            "exact_variance": exact_variance_plain(est, sampling, assignment).total,
            "printed_variance": printed_variance_plain(est, sampling, assignment).total,
            "ehw_limit": plain.v_ehw_limit,
            "lz_limit": plain.v_lz_limit,
            "lz_gap": plain.lz_minus_true,
        },
        "fe": None,
    }
    if assignment.sigma2 < 0.25:
        fe = limit_functionals(est, sampling, assignment, "fe")
        summary["fe"] = {
            "exact_variance": exact_variance_fe(est, sampling, assignment).total,
            "ehw_limit": fe.v_ehw_limit,
            "lz_limit": fe.v_lz_limit,
            "lz_gap": fe.lz_minus_true,
        }
    return summary


def _coverage_row(frame: pd.DataFrame, model: str, estimator: str, tau: float, z: float,
                  replications: int, exact: dict) -> CoverageRow:
    rows = frame[(frame["model"] == model) & (frame["estimator"] == estimator) & frame["fitted"]]
    valid = rows[rows["variance"].notna()]

    tau_hat = rows["tau_hat"].to_numpy()
    scaled = np.sqrt(rows["n"].to_numpy()) * (tau_hat - tau)
    se = np.sqrt(np.maximum(valid["variance"].to_numpy(), 0.0))
    covered = (np.abs(valid["tau_hat"].to_numpy() - tau) <= z * se).astype(np.float64)
    scaled_estimate = valid["n"].to_numpy() * valid["variance"].to_numpy()

    coverage = float(covered.mean()) if covered.size else np.nan
    coverage_se = float(np.sqrt(coverage * (1.0 - coverage) / covered.size)) if covered.size else np.nan
    mean_se, mean_se_mcse = _mean_and_mcse(se)
    mean_tau, mean_tau_mcse = _mean_and_mcse(tau_hat)
    empirical, empirical_mcse = _variance_and_mcse(scaled)
    mean_scaled, mean_scaled_mcse = _mean_and_mcse(scaled_estimate)
    target = exact.get(model)
    return CoverageRow(
        model=model,
        estimator=estimator,
        coverage=coverage,
        coverage_se=coverage_se,
        mean_se=mean_se,
        mean_se_mcse=mean_se_mcse,
        mean_tau_hat=mean_tau,
        mean_tau_hat_mcse=mean_tau_mcse,
        sd_tau_hat=float(tau_hat.std(ddof=1)) if tau_hat.size > 1 else np.nan,
        valid=int(len(valid)),
        degenerate=replications - int(len(valid)),
        empirical_variance=empirical,
        empirical_variance_mcse=empirical_mcse,
        exact_variance=None if target is None else target["exact_variance"],
        mean_scaled_estimate=mean_scaled,
        mean_scaled_estimate_mcse=mean_scaled_mcse,
    )


def run_experiment(config: ExperimentConfig, population: Population | None = None) -> CoverageReport:
    """Draw `config.replications` samples and summarize every (model, estimator) pair.

    Replication r always uses the stream derived from (master_seed, r), and the
    records are reduced in replication order, so the report does not depend on
    `threads`.
    """
    pop = population if population is not None else build_population(config.population, config.population_seed)
    est = compute_estimands(pop)
    warn_small_design(pop, config.sampling)
    z = config.critical_value
    logger.warning(f"confidence intervals use the normal critical value {z:.9f}")

    exact = exact_summary(est, config.sampling, config.assignment)
    logger.info(
        f"experiment started: R={config.replications}, p_c={config.sampling.p_c}, "
        f"p_u={config.sampling.p_u}, sigma2={config.assignment.sigma2}, threads={config.threads}"
    )
    if config.threads == 1:
        records = _run_chunk(pop, config, tqdm(range(config.replications), desc="replications"))
    else:
        chunks = np.array_split(np.arange(config.replications), min(config.replications, 4 * config.threads))
        results = Parallel(n_jobs=config.threads)(delayed(_run_chunk)(pop, config, chunk) for chunk in chunks)
        records = list(itertools.chain.from_iterable(results))

    frame = pd.DataFrame.from_records(records)
    rows = tuple(
        _coverage_row(frame, model, estimator, est.tau, z, config.replications, exact)
        for model, estimator in _pairs(config)
    )
    for model in config.models:
        failed = frame.loc[(frame["model"] == model) & ~frame["fitted"], "replication"].nunique()
        if failed:
            logger.info(f"{failed} degenerate replication(s) skipped for the {model} model")
    logger.info(f"experiment finished: {len(rows)} estimator rows")

    return CoverageReport(
        rows=rows,
        tau=est.tau,
        replications=config.replications,
        critical_value=z,
        fingerprint=config.fingerprint(),
        exact=exact,
        notes=(f"intervals are tau_hat +/- {z:.9f} se, the normal quantile for confidence {config.confidence}",),
    )


def _agrees(estimate: float, target: float | None, mcse: float, width: float = 3.0) -> bool | None:
    if target is None or not np.isfinite(estimate) or not np.isfinite(mcse):
        return None
    return bool(abs(estimate - target) <= width * mcse)


def _grid_family(assignment: AssignmentDesign, sigma2: float) -> str:
    # the beta family only exists strictly inside (0, 1/4); a degenerate base design has no family to keep
    if assignment.family == "beta" and 0.0 < sigma2 < 0.25:
        return "beta"
    return "two-point"


def variance_validation(config: ExperimentConfig, grid, population: Population | None = None) -> pd.DataFrame:
    """Empirical variances and mean scaled estimates against the exact values, per design point."""
    pop = population if population is not None else build_population(config.population, config.population_seed)
    est = compute_estimands(pop)
    rows = []
    for p_c, p_u, sigma2 in grid:
        family = _grid_family(config.assignment, sigma2)
        point = replace(
            config,
            sampling=SamplingDesign(p_c=float(p_c), p_u=float(p_u)),
            assignment=AssignmentDesign(sigma2=float(sigma2), family=family),
            models=tuple(m for m in config.models if m == "plain" or sigma2 < 0.25),
            estimators=("ehw", "lz", "cca", "cca_debiased"),
        )
        report = run_experiment(point, pop)
        for model in point.models:
            limits = limit_functionals(est, point.sampling, point.assignment, model)
            printed = PRINTED[model](est, point.sampling, point.assignment).total
            ehw, lz = report.row(model, "ehw"), report.row(model, "lz")
            cca, debiased = report.row(model, "cca"), report.row(model, "cca_debiased")
            cca_target = ehw.exact_variance if p_c == 1 else None
            rows.append({
                "p_c": p_c,
                "p_u": p_u,
                "sigma2": sigma2,
                "model": model,
                "valid": ehw.valid,
                "empirical_variance": ehw.empirical_variance,
                "empirical_variance_mcse": ehw.empirical_variance_mcse,
                "exact_variance": ehw.exact_variance,
                "printed_variance": printed,
                "variance_agrees": _agrees(ehw.empirical_variance, ehw.exact_variance, ehw.empirical_variance_mcse),
                "ehw_coverage": ehw.coverage,
                "lz_coverage": lz.coverage,
                "cca_coverage": debiased.coverage,
                "mean_scaled_ehw": ehw.mean_scaled_estimate,
                "ehw_limit": limits.v_ehw_limit,
                "mean_scaled_lz": lz.mean_scaled_estimate,
                "mean_scaled_lz_mcse": lz.mean_scaled_estimate_mcse,
                "lz_limit": limits.v_lz_limit,
                "lz_agrees": _agrees(lz.mean_scaled_estimate, limits.v_lz_limit, lz.mean_scaled_estimate_mcse),
                "mean_scaled_cca": cca.mean_scaled_estimate,
                "mean_scaled_cca_debiased": debiased.mean_scaled_estimate,
                "mean_scaled_cca_debiased_mcse": debiased.mean_scaled_estimate_mcse,
                "cca_agrees": _agrees(debiased.mean_scaled_estimate, cca_target,
                                      debiased.mean_scaled_estimate_mcse),
            })
    table = pd.DataFrame(rows)
    logger.info(f"variance validation finished over {len(grid)} design point(s)")
    return table


class CoverageExperiment:
    def __init__(self, config: SimulationConfig, experiment: ExperimentConfig):
        self.config = config
        self.experiment = experiment

    def run(self, population: Population | None = None) -> CoverageReport:
        self.report = run_experiment(self.experiment, population)
        return self.report

    def save_report(self, resolved_params: dict):
        save_json(path=self.config.report_json, data=self.report.to_dict())
        self.report.to_frame().to_csv(self.config.report_csv, index=False)
        logger.info(f"coverage table saved at: {self.config.report_csv}")
        save_json(
            path=self.config.resolved_params,
            data={
                "params": resolved_params,
                "master_seed": self.experiment.master_seed,
                "fingerprint": self.experiment.fingerprint(),
            },
        )


class VarianceValidation:
    def __init__(self, config: VarianceValidationConfig, experiment: ExperimentConfig):
        self.config = config
        self.experiment = replace(experiment, replications=config.replications)

    def run(self, population: Population | None = None) -> pd.DataFrame:
        self.table = variance_validation(self.experiment, self.config.grid, population)
        return self.table

    def save_report(self):
        self.table.to_csv(self.config.report_csv, index=False)
        logger.info(f"variance validation table saved at: {self.config.report_csv}")
