from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd


@dataclass(frozen=True, eq=False)
class Population:
    """Full finite population: cluster labels 1..C and both potential outcomes."""
    cluster_id: np.ndarray
    y0: np.ndarray
    y1: np.ndarray
    cluster_count: int

    def __post_init__(self):
        for values in (self.cluster_id, self.y0, self.y1):
            values.setflags(write=False)

    @property
    def unit_count(self) -> int:
        return int(self.cluster_id.shape[0])

    @cached_property
    def codes(self) -> np.ndarray:
        return self.cluster_id - 1

    @cached_property
    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.codes, minlength=self.cluster_count)

    @cached_property
    def members(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit indices ordered by cluster, and the start offset of each cluster."""
        order = np.argsort(self.codes, kind="stable")
        offsets = np.concatenate(([0], np.cumsum(self.cluster_sizes)))
        return order, offsets


@dataclass(frozen=True, eq=False)
class Estimands:
    tau: float
    tau_c: np.ndarray
    eps0: np.ndarray
    eps1: np.ndarray
    eps0_bar_c: np.ndarray
    eps1_bar_c: np.ndarray
    ybar0: float
    ybar1: float
    cluster_sizes: np.ndarray
    codes: np.ndarray

    @property
    def unit_count(self) -> int:
        return int(self.eps0.shape[0])


@dataclass(frozen=True, eq=False)
class SampleDraw:
    """One realization of the sampling and assignment process.

    `unit_index`, `cluster_id`, `w` and `y` describe the sampled units. The
    remaining fields are oracle metadata that estimators never read: the
    realized q per population cluster and, when drawn, the full R and W vectors.
    """
    unit_index: np.ndarray
    cluster_id: np.ndarray
    w: np.ndarray
    y: np.ndarray
    q: np.ndarray | None = None
    sampled: np.ndarray | None = None
    assigned: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def n1(self) -> int:
        return int(np.count_nonzero(self.w))

    @property
    def n0(self) -> int:
        return self.n - self.n1


@dataclass(frozen=True)
class KappaMoments:
    kappa: float
    kappa_31: float
    kappa_13: float
    kappa_22: float
    eq1q: float

    @property
    def fourth_moment(self) -> float:
        """E[(W - q)^4] = E[q(1-q)] - 3 E[q^2 (1-q)^2]."""
        return self.eq1q - 3.0 * self.kappa_22


@dataclass(frozen=True, eq=False)
class FitResult:
    """Least-squares fit of Y on W (plain) or on W and cluster dummies (fe).

    `regressor` is the partialled-out treatment (W minus its grand or cluster
    mean); the tau row of the OLS sandwich is built from it.
    """
    model: str
    tau_hat: float
    alpha: float | np.ndarray
    residuals: np.ndarray
    regressor: np.ndarray
    n1: int
    n0: int
    clusters: np.ndarray
    cluster_codes: np.ndarray
    n_c1: np.ndarray
    n_c0: np.ndarray

    @property
    def n(self) -> int:
        return self.n1 + self.n0

    @cached_property
    def sxx(self) -> float:
        return float(np.dot(self.regressor, self.regressor))


@dataclass(frozen=True, eq=False)
class ClusterEffects:
    clusters: np.ndarray
    tau_hat_c: np.ndarray
    n_c: np.ndarray
    within_variance_c: np.ndarray
    uncorrectable: np.ndarray


@dataclass(frozen=True)
class CcaResult:
    value: float | None
    applicable: bool
    floored: bool = False
    dropped_cluster_count: int = 0


@dataclass(frozen=True)
class VarianceReport:
    v_ols: float
    v_ehw: float
    v_lz: float
    v_kloek: float | None
    cca: CcaResult
    cca_debiased: CcaResult

    @property
    def v_cca(self) -> float | None:
        return self.cca.value

    @property
    def cca_applicable(self) -> bool:
        return self.cca.applicable

    def get(self, estimator: str) -> float | None:
        return {
            "ols": self.v_ols,
            "ehw": self.v_ehw,
            "lz": self.v_lz,
            "kloek": self.v_kloek,
            "cca": self.cca.value,
            "cca_debiased": self.cca_debiased.value,
        }[estimator]

    def standard_errors(self) -> dict:
        values = {name: self.get(name) for name in ("ols", "ehw", "lz", "kloek", "cca", "cca_debiased")}
        return {f"se_{name}": (None if v is None else float(np.sqrt(v))) for name, v in values.items()}

    def to_dict(self) -> dict:
        report = asdict(self)
        report.update(self.standard_errors())
        return report


@dataclass(frozen=True)
class ExactVariance:
    model: str
    total: float
    unit_term: float
    cluster_term: float
    s_part: float | None = None
    d_part: float | None = None
    variant: str = "derived"


@dataclass(frozen=True)
class LimitFunctionals:
    model: str
    v_ehw_limit: float
    v_lz_limit: float
    lz_minus_true: float
    lz_minus_ehw: float


@dataclass(frozen=True)
class OracleResult:
    """Exact moments obtained by enumerating every sampling/assignment configuration."""
    eta_mean: float
    eta_variance: float
    ehw_limit: float
    lz_limit: float
    s_second_moment: float
    d_second_moment: float
    sd_cross_moment: float
    fe_eta_mean: float | None
    fe_eta_variance: float | None
    fe_lz_limit: float | None
    degenerate_probability: float
    estimator_mean: float | None
    estimator_variance: float | None
    configurations: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DiagnosticsReport:
    rho_eps: float | None
    rho_w: float | None
    rho_epsw: float | None
    undefined: tuple[str, ...] = ()


@dataclass(frozen=True)
class CoverageRow:
    model: str
    estimator: str
    coverage: float
    coverage_se: float
    mean_se: float
    mean_se_mcse: float
    mean_tau_hat: float
    mean_tau_hat_mcse: float
    sd_tau_hat: float
    valid: int
    degenerate: int
    empirical_variance: float
    empirical_variance_mcse: float
    exact_variance: float | None
    mean_scaled_estimate: float
    mean_scaled_estimate_mcse: float


@dataclass(frozen=True)
class CoverageReport:
    rows: tuple[CoverageRow, ...]
    tau: float
    replications: int
    critical_value: float
    fingerprint: str
    exact: dict
    notes: tuple[str, ...] = ()

    def row(self, model: str, estimator: str) -> CoverageRow:
        for candidate in self.rows:
            if candidate.model == model and candidate.estimator == estimator:
                return candidate
        raise KeyError((model, estimator))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows])

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "replications": self.replications,
            "critical_value": self.critical_value,
            "fingerprint": self.fingerprint,
            "exact": self.exact,
            "notes": list(self.notes),
            "rows": [asdict(row) for row in self.rows],
        }


@dataclass(frozen=True, eq=False)
class AnalysisInput:
    outcome: np.ndarray
    treatment: np.ndarray
    cluster: np.ndarray
    source: Path
    row_count: int
    dropped_rows: int


@dataclass(frozen=True)
class EstimateReport:
    source: str
    n: int
    n1: int
    n0: int
    clusters: int
    fits: dict
    variances: dict
    diagnostics: dict
    guidance: tuple[str, ...]
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        report = asdict(self)
        report["guidance"] = list(self.guidance)
        report["notes"] = list(self.notes)
        return report
