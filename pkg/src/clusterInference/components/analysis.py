"""Estimates, standard errors and diagnostics for a user-supplied `y,w,cluster` dataset."""
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import norm

from clusterInference import logger
from clusterInference.components.diagnostics import full_diagnostics
from clusterInference.components.estimators import fit_fixed_effects, fit_plain
from clusterInference.components.variance import variance_report
from clusterInference.constants import DEFAULT_CONFIDENCE, ESTIMATORS
from clusterInference.entity.config_entity import AnalysisConfig
from clusterInference.entity.domain_entity import AnalysisInput, EstimateReport, SampleDraw
from clusterInference.exception import DataValidationError, SingularDesignError
from clusterInference.utils.common import save_json

INPUT_COLUMNS = ("y", "w", "cluster")


def load_analysis_input(path: Path) -> AnalysisInput:
    """Parse and validate the CSV; row numbers in errors count the header as row 1."""
    path = Path(path)
    try:
        table = pd.read_csv(path, dtype={"cluster": str}, skip_blank_lines=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise DataValidationError(f"{path} is empty") from e
    missing = [column for column in INPUT_COLUMNS if column not in table.columns]
    if missing:
        raise DataValidationError(f"{path} lacks columns {missing}", row=1)

    blank = table[list(INPUT_COLUMNS)].isna().all(axis=1)
    table = table.loc[~blank]
    for position, record in zip(table.index, table.itertuples(index=False)):
        row = int(position) + 2
        if pd.isna(record.cluster) or not str(record.cluster).strip():
            raise DataValidationError("empty cluster id", row=row)
        try:
            y = float(record.y)
        except (TypeError, ValueError):
            raise DataValidationError(f"non-numeric outcome {record.y!r}", row=row) from None
        if not np.isfinite(y):
            raise DataValidationError("missing or non-finite outcome", row=row)
        if str(record.w).strip() not in ("0", "1", "0.0", "1.0"):
            raise DataValidationError(f"treatment must be 0 or 1, got {record.w!r}", row=row)

    treatment = table["w"].astype(float).astype(np.int8).to_numpy()
    if treatment.size == 0:
        raise DataValidationError(f"{path} has no data rows")
    if treatment.min() == treatment.max():
        raise DataValidationError(f"only one treatment arm (w={treatment[0]}) in {path}")

    data = AnalysisInput(
        outcome=table["y"].astype(float).to_numpy(),
        treatment=treatment,
        cluster=table["cluster"].str.strip().to_numpy(),
        source=path,
        row_count=int(len(table)),
        dropped_rows=int(blank.sum()),
    )
    logger.info(f"analysis input loaded from {path}: {data.row_count} rows, {data.dropped_rows} blank rows dropped")
    return data


def to_sample(data: AnalysisInput) -> SampleDraw:
    codes, _ = pd.factorize(pd.Series(data.cluster), sort=True)
    return SampleDraw(
        unit_index=np.arange(data.row_count),
        cluster_id=codes.astype(np.int64) + 1,
        w=data.treatment,
        y=data.outcome,
    )


def decision_guidance(sampling_clustered: bool | None, assignment_clustered: bool | None,
                      fixed_effects: bool = False, within_cluster_variation: bool = True,
                      max_units_per_cluster: int | None = None) -> tuple[str, ...]:
    """Advice on clustering, driven by the declared design, not by the data."""
    advice = []
    if max_units_per_cluster is not None and max_units_per_cluster <= 1:
        advice.append("At most one sampled unit per cluster: clustering adjustments make no difference.")
    if sampling_clustered is None or assignment_clustered is None:
        advice.append(
            "Declare whether the sampling and the assignment were clustered; "
            "whether to cluster cannot be decided from the data alone."
        )
        return tuple(advice)

    if not sampling_clustered and not assignment_clustered:
        advice.append("Neither sampling nor assignment is clustered: do not cluster, report the EHW standard error.")
        return tuple(advice)

    if fixed_effects:
        advice.append(
            "With cluster fixed effects, clustering matters only if treatment effects are heterogeneous "
            "across clusters; given heterogeneity, clustered sampling or clustered assignment calls for it."
        )
    if assignment_clustered:
        advice.append("Assignment is clustered: the LZ standard error is needed.")
    if sampling_clustered:
        advice.append(
            "Sampling is clustered: LZ is appropriate when the sampled clusters are a small share of the "
            "clusters of interest; otherwise it is conservative unless treatment effects are homogeneous."
        )
    else:
        if within_cluster_variation:
            advice.append(
                "All clusters are sampled and treatment varies within clusters: the cluster-adjusted (CCA) "
                "variance removes the LZ overstatement from effect heterogeneity."
            )
        else:
            advice.append("All clusters are sampled but treatment never varies within a cluster: LZ cannot be improved on.")
    return tuple(advice)


def _interval(tau_hat: float, variance: float | None, z: float) -> list | None:
    if variance is None:
        return None
    half = z * float(np.sqrt(variance))
    return [tau_hat - half, tau_hat + half]


def _fit_summary(fit) -> dict:
    alpha = fit.alpha if np.isscalar(fit.alpha) else None
    return {"tau_hat": fit.tau_hat, "alpha": alpha, "n1": fit.n1, "n0": fit.n0, "clusters": int(fit.clusters.size)}


def analyze_dataset(data: AnalysisInput, fixed_effects: bool = False, estimators=ESTIMATORS,
                    sampling_clustered: bool | None = None, assignment_clustered: bool | None = None,
                    confidence: float = DEFAULT_CONFIDENCE) -> EstimateReport:
    sample = to_sample(data)
    z = float(norm.ppf(0.5 + confidence / 2.0))
    fits = {"plain": fit_plain(sample)}
    notes = []
    if fixed_effects:
        try:
            fits["fe"] = fit_fixed_effects(sample)
        except SingularDesignError as e:
            notes.append(f"fixed-effects fit unavailable: {e}")

    fit_summaries, variances, diagnostics = {}, {}, {}
    for model, fit in fits.items():
        diag = full_diagnostics(fit, sample, strict=False)
        if diag.undefined:
            notes.append(f"{model}: diagnostics undefined for {', '.join(diag.undefined)} (zero variance)")
        report = variance_report(fit, sample, rho_eps=diag.rho_eps, rho_w=diag.rho_w)
        if report.cca.floored:
            notes.append(f"{model}: cluster-adjusted variance floored at zero")
        if report.cca.dropped_cluster_count:
            notes.append(f"{model}: {report.cca.dropped_cluster_count} cluster(s) without both arms left out of the CCA correction")

        values = {}
        for estimator in estimators:
            variance = report.get(estimator)
            values[estimator] = {
                "variance": variance,
                "se": None if variance is None else float(np.sqrt(variance)),
                "ci": _interval(fit.tau_hat, variance, z),
            }
        values["cca_applicable"] = report.cca_applicable
        values["cca_dropped_clusters"] = report.cca.dropped_cluster_count
        fit_summaries[model] = _fit_summary(fit)
        variances[model] = values
        diagnostics[model] = {"rho_eps": diag.rho_eps, "rho_w": diag.rho_w, "rho_epsw": diag.rho_epsw}

    plain = fits["plain"]
    per_cluster = plain.n_c1 + plain.n_c0
    guidance = decision_guidance(
        sampling_clustered,
        assignment_clustered,
        fixed_effects=fixed_effects,
        within_cluster_variation=bool(np.any((plain.n_c1 > 0) & (plain.n_c0 > 0))),
        max_units_per_cluster=int(per_cluster.max()),
    )
    logger.info(f"analysis of {data.source}: tau_hat={plain.tau_hat:.6g}, N={sample.n}, clusters={plain.clusters.size}")
    return EstimateReport(
        source=str(data.source),
        n=sample.n,
        n1=sample.n1,
        n0=sample.n0,
        clusters=int(plain.clusters.size),
        fits=fit_summaries,
        variances=variances,
        diagnostics=diagnostics,
        guidance=guidance,
        notes=tuple(notes),
    )


class DatasetAnalysis:
    def __init__(self, config: AnalysisConfig):
        self.config = config

    def analyze(self, csv_path: Path, **options) -> EstimateReport:
        self.report = analyze_dataset(load_analysis_input(csv_path), **options)
        return self.report

    def save_report(self):
        save_json(path=self.config.report_json, data=self.report.to_dict())
