from pathlib import Path

CONFIG_FILE_PATH = Path("config/config.yaml")
PARAMS_FILE_PATH = Path("params.yaml")

DEFAULT_CONFIDENCE = 0.95

MODELS = ("plain", "fe")
ESTIMATORS = ("ols", "ehw", "lz", "cca", "cca_debiased", "kloek")
ASSIGNMENT_FAMILIES = ("degenerate", "two-point", "beta")

# below this expected sample size the asymptotic regime is not credible
MIN_EXPECTED_SAMPLE = 30

ORACLE_MAX_UNITS = 14
ORACLE_TOLERANCE = 1e-10
# joint (R, W) configurations enumerated for the moments of the estimator itself
ORACLE_MAX_CELLS = 2 ** 22
# matrix entries evaluated per block inside one cluster
ORACLE_BLOCK_CELLS = 2 ** 20

# leaves of params.yaml; anything else is rejected
PARAM_KEYS = frozenset({
    "population.clusters",
    "population.units_per_cluster",
    "population.tau_pattern",
    "population.noise_sd",
    "population.baseline",
    "population.kind",
    "population.table",
    "population.seed",
    "p_c",
    "p_u",
    "sigma2",
    "assignment_family",
    "replications",
    "seed",
    "confidence",
    "models",
    "estimators",
    "threads",
    "validation.grid",
    "validation.replications",
    "oracle.max_units",
    "oracle.seed",
    "oracle.grid.p_c",
    "oracle.grid.p_u",
    "oracle.grid.sigma2",
})
