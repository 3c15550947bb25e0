from pathlib import Path

import yaml
from box import ConfigBox

from clusterInference import logger
from clusterInference.constants import CONFIG_FILE_PATH, PARAM_KEYS, PARAMS_FILE_PATH
from clusterInference.entity.config_entity import (
    AnalysisConfig,
    AssignmentDesign,
    ExperimentConfig,
    OracleConfig,
    PopulationCacheConfig,
    PopulationSpec,
    SamplingDesign,
    SimulationConfig,
    VarianceValidationConfig,
)
from clusterInference.exception import ConfigurationError
from clusterInference.utils.common import create_directories, read_yaml


def flatten_keys(params: dict, prefix: str = "") -> list[str]:
    keys = []
    for key, value in params.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            keys.extend(flatten_keys(value, f"{dotted}."))
        else:
            keys.append(dotted)
    return keys


def apply_override(params: dict, assignment: str) -> dict:
    """Set one `dotted.key=value` pair; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigurationError(f"override must look like key=value, got {assignment!r}")
    key, raw = (part.strip() for part in assignment.split("=", 1))
    if key not in PARAM_KEYS:
        raise ConfigurationError(f"unknown parameter key: {key}")
    node = params
    *parents, leaf = key.split(".")
    for part in parents:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"parameter {part} in {key} is not a section")
    node[leaf] = yaml.safe_load(raw)
    return params


def _sizes(value) -> int | tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(int(m) for m in value)
    return int(value)


class ConfigurationManager:
    def __init__(self,
                 config_filepath=CONFIG_FILE_PATH,
                 params_filepath=PARAMS_FILE_PATH,
                 overrides=(),
                 out_dir: Path | None = None):

        self.config = read_yaml(config_filepath)
        params = read_yaml(params_filepath).to_dict()
        unknown = sorted(set(flatten_keys(params)) - PARAM_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown parameter key(s) in {params_filepath}: {', '.join(unknown)}")
        for assignment in overrides:
            params = apply_override(params, assignment)
        self.params = ConfigBox(params)
        self.params_filepath = Path(params_filepath)
        self.out_dir = None if out_dir is None else Path(out_dir)

        create_directories([self.config.artifacts_root])

    def _root(self, section) -> Path:
        root = self.out_dir if self.out_dir is not None else Path(section.root_dir)
        create_directories([root])
        return root

    def get_experiment_config(self) -> ExperimentConfig:
        params = self.params
        try:
            population = params.population
            tau_pattern = population.get("tau_pattern")
            table = population.get("table")
            spec = PopulationSpec(
                cluster_count=int(population.get("clusters", 0)),
                units_per_cluster=_sizes(population.get("units_per_cluster", 1)),
                tau_pattern=None if tau_pattern is None else tuple(float(t) for t in tau_pattern),
                noise_sd=float(population.get("noise_sd", 1.0)),
                baseline=population.get("baseline", "control"),
                kind=population.get("kind", "cluster-effect"),
                table_path=None if table is None else Path(table),
            )
            experiment_config = ExperimentConfig(
                population=spec,
                population_seed=int(population.seed),
                sampling=SamplingDesign(p_c=float(params.p_c), p_u=float(params.p_u)),
                assignment=AssignmentDesign(
                    sigma2=float(params.sigma2),
                    family=params.get("assignment_family", "two-point"),
                ),
                replications=int(params.replications),
                master_seed=int(params.seed),
                models=tuple(params.get("models", ("plain", "fe"))),
                estimators=tuple(params.get("estimators", ("ols", "ehw", "lz", "cca"))),
                confidence=float(params.get("confidence", 0.95)),
                threads=int(params.get("threads", 1)),
            )
        except ConfigurationError:
            raise
        except (AttributeError, KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"invalid parameters in {self.params_filepath}: {e}") from e

        return experiment_config

    def get_population_cache_config(self) -> PopulationCacheConfig:
        config = self.config.population
        create_directories([config.root_dir])
        return PopulationCacheConfig(root_dir=Path(config.root_dir))

    def get_simulation_config(self) -> SimulationConfig:
        config = self.config.simulation
        root = self._root(config)

        simulation_config = SimulationConfig(
            root_dir=root,
            report_json=root / Path(config.report_json).name,
            report_csv=root / Path(config.report_csv).name,
            resolved_params=root / Path(config.resolved_params).name,
        )
        return simulation_config

    def get_variance_validation_config(self) -> VarianceValidationConfig:
        config = self.config.variance_validation
        root = self._root(config)
        validation = self.params.get("validation", ConfigBox())
        try:
            grid = tuple(
                (float(point["p_c"]), float(point["p_u"]), float(point["sigma2"]))
                for point in validation.get("grid", [])
            )
            replications = int(validation.get("replications", self.params.replications))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"invalid validation grid: {e}") from e

        return VarianceValidationConfig(
            root_dir=root,
            report_csv=root / Path(config.report_csv).name,
            replications=replications,
            grid=grid,
        )

    def get_oracle_config(self) -> OracleConfig:
        config = self.config.oracle
        root = self._root(config)
        oracle = self.params.get("oracle", ConfigBox())
        grid = oracle.get("grid", ConfigBox())
        try:
            oracle_config = OracleConfig(
                root_dir=root,
                fixture_csv=root / Path(config.fixture_csv).name,
                max_units=int(oracle.get("max_units", 10)),
                seed=int(oracle.get("seed", 20240521)),
                p_c_grid=tuple(float(v) for v in grid.get("p_c", (0.25, 0.5, 1.0))),
                p_u_grid=tuple(float(v) for v in grid.get("p_u", (0.5, 1.0))),
                sigma2_grid=tuple(float(v) for v in grid.get("sigma2", (0.0, 0.09, 0.25))),
            )
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"invalid oracle parameters: {e}") from e
        return oracle_config

    def get_analysis_config(self) -> AnalysisConfig:
        config = self.config.analysis
        root = self._root(config)
        return AnalysisConfig(root_dir=root, report_json=root / Path(config.report_json).name)

    def log_resolved(self, experiment_config: ExperimentConfig):
        logger.info(
            f"resolved parameters: master seed {experiment_config.master_seed}, "
            f"fingerprint {experiment_config.fingerprint()[:12]}"
        )
