import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from scipy.stats import norm

from clusterInference.constants import ASSIGNMENT_FAMILIES, DEFAULT_CONFIDENCE, ESTIMATORS, MODELS
from clusterInference.exception import ConfigurationError


@dataclass(frozen=True)
class PopulationSpec:
    """Recipe for a finite population.

    `units_per_cluster` is either one size for every cluster or a tuple with one
    size per cluster. `tau_pattern` holds one effect per cluster; None means the
    first half of the clusters get -1 and the second half +1. `baseline` is
    "control" (Y(0) = noise, Y(1) = tau_c + noise) or "symmetric"
    (Y(w) = noise -/+ tau_c / 2).
    """
    cluster_count: int
    units_per_cluster: int | tuple[int, ...]
    tau_pattern: tuple[float, ...] | None = None
    noise_sd: float = 1.0
    baseline: str = "control"
    kind: str = "cluster-effect"
    table_path: Path | None = None

    def __post_init__(self):
        if self.kind == "explicit":
            if self.table_path is None:
                raise ConfigurationError("explicit population needs population.table")
            return
        if self.kind != "cluster-effect":
            raise ConfigurationError(f"unknown population kind: {self.kind}")
        if self.cluster_count < 1:
            raise ConfigurationError("population.clusters must be positive")
        sizes = self.sizes
        if len(sizes) != self.cluster_count:
            raise ConfigurationError(
                f"population.units_per_cluster has {len(sizes)} entries for {self.cluster_count} clusters"
            )
        if min(sizes) < 1:
            raise ConfigurationError("every cluster needs at least one unit")
        if self.tau_pattern is None:
            if self.cluster_count % 2:
                raise ConfigurationError("the default -1/+1 effect split needs an even cluster count")
        elif len(self.tau_pattern) != self.cluster_count:
            raise ConfigurationError("population.tau_pattern needs one effect per cluster")
        if not self.noise_sd >= 0:
            raise ConfigurationError("population.noise_sd must be nonnegative")
        if self.baseline not in ("control", "symmetric"):
            raise ConfigurationError(f"unknown population.baseline: {self.baseline}")

    @property
    def sizes(self) -> tuple[int, ...]:
        if isinstance(self.units_per_cluster, int):
            return (self.units_per_cluster,) * self.cluster_count
        return tuple(int(m) for m in self.units_per_cluster)

    @property
    def effects(self) -> tuple[float, ...]:
        if self.tau_pattern is not None:
            return tuple(float(t) for t in self.tau_pattern)
        half = self.cluster_count // 2
        return (-1.0,) * half + (1.0,) * half


@dataclass(frozen=True)
class SamplingDesign:
    p_c: float
    p_u: float

    def __post_init__(self):
        for name, value in (("p_c", self.p_c), ("p_u", self.p_u)):
            if not 0.0 < value <= 1.0:
                raise ConfigurationError(f"{name} must lie in (0, 1], got {value}")

    @property
    def p(self) -> float:
        return self.p_c * self.p_u


@dataclass(frozen=True)
class AssignmentDesign:
    """Cluster-level assignment probability q_c with mean 1/2 and variance sigma2.

    A two-point family with sigma2 = 0 is stored as degenerate.
    """
    sigma2: float
    family: str = "two-point"

    def __post_init__(self):
        if self.family not in ASSIGNMENT_FAMILIES:
            raise ConfigurationError(f"unknown assignment_family: {self.family}")
        if not 0.0 <= self.sigma2 <= 0.25:
            raise ConfigurationError(f"sigma2 must lie in [0, 1/4], got {self.sigma2}")
        if self.family == "two-point" and self.sigma2 == 0.0:
            object.__setattr__(self, "family", "degenerate")
        if self.family == "degenerate" and self.sigma2 != 0.0:
            raise ConfigurationError("the degenerate family has sigma2 = 0")
        if self.family == "beta" and self.sigma2 in (0.0, 0.25):
            raise ConfigurationError("the beta family needs 0 < sigma2 < 1/4")

    @property
    def beta_shape(self) -> float:
        return (1.0 - 4.0 * self.sigma2) / (8.0 * self.sigma2)


@dataclass(frozen=True)
class ExperimentConfig:
    population: PopulationSpec
    population_seed: int
    sampling: SamplingDesign
    assignment: AssignmentDesign
    replications: int
    master_seed: int
    models: tuple[str, ...] = MODELS
    estimators: tuple[str, ...] = ("ols", "ehw", "lz", "cca")
    confidence: float = DEFAULT_CONFIDENCE
    threads: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigurationError("replications must be at least 1")
        if not 0.0 < self.confidence < 1.0:
            raise ConfigurationError("confidence must lie in (0, 1)")
        for model in self.models:
            if model not in MODELS:
                raise ConfigurationError(f"unknown model: {model}")
        for estimator in self.estimators:
            if estimator not in ESTIMATORS:
                raise ConfigurationError(f"unknown estimator: {estimator}")

    @property
    def critical_value(self) -> float:
        return float(norm.ppf(0.5 + self.confidence / 2.0))

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self), default=str))

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def population_key(self) -> str:
        """Cache key of the population alone; designs and replications do not enter it."""
        payload = json.dumps({"population": self.to_dict()["population"], "seed": self.population_seed},
                             sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class PopulationCacheConfig:
    root_dir: Path


@dataclass(frozen=True)
class SimulationConfig:
    root_dir: Path
    report_json: Path
    report_csv: Path
    resolved_params: Path


@dataclass(frozen=True)
class VarianceValidationConfig:
    root_dir: Path
    report_csv: Path
    replications: int
    grid: tuple[tuple[float, float, float], ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class OracleConfig:
    root_dir: Path
    fixture_csv: Path
    max_units: int
    seed: int
    p_c_grid: tuple[float, ...]
    p_u_grid: tuple[float, ...]
    sigma2_grid: tuple[float, ...]


@dataclass(frozen=True)
class AnalysisConfig:
    root_dir: Path
    report_json: Path
