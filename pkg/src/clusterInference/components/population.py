from pathlib import Path

import numpy as np
import pandas as pd

from clusterInference import logger
from clusterInference.entity.config_entity import ExperimentConfig, PopulationCacheConfig, PopulationSpec
from clusterInference.entity.domain_entity import Estimands, Population
from clusterInference.exception import ConfigurationError
from clusterInference.utils.common import load_bin, save_bin
from clusterInference.utils.numerics import cluster_means, compensated_sum, seed_sequence

TABLE_COLUMNS = ("cluster", "y0", "y1")


def population_from_table(cluster, y0, y1) -> Population:
    """Population from per-unit arrays; cluster labels are mapped to 1..C in sorted order."""
    codes, labels = pd.factorize(pd.Series(cluster), sort=True)
    if (codes < 0).any():
        raise ConfigurationError("cluster labels must not be missing")
    y0 = np.array(y0, dtype=np.float64)
    y1 = np.array(y1, dtype=np.float64)
    if not (codes.shape == y0.shape == y1.shape):
        raise ConfigurationError("cluster, y0 and y1 must have the same length")
    if codes.size == 0:
        raise ConfigurationError("a population needs at least one unit")
    if not (np.isfinite(y0).all() and np.isfinite(y1).all()):
        raise ConfigurationError("potential outcomes must be finite")
    return Population(
        cluster_id=codes.astype(np.int64) + 1,
        y0=y0,
        y1=y1,
        cluster_count=len(labels),
    )


def load_population_csv(path: Path) -> Population:
    """Explicit-table population from a `cluster,y0,y1` CSV."""
    table = pd.read_csv(path, encoding="utf-8")
    missing = [column for column in TABLE_COLUMNS if column not in table.columns]
    if missing:
        raise ConfigurationError(f"population table {path} lacks columns {missing}")
    population = population_from_table(table["cluster"], table["y0"], table["y1"])
    logger.info(f"population table loaded from {path}: M={population.unit_count}, C={population.cluster_count}")
    return population


def build_population(spec: PopulationSpec, seed: int) -> Population:
    """Population of the clustered-effects design.

    Noise is standard normal from numpy's PCG64 generator (ziggurat method),
    scaled by `noise_sd`. Under the "control" baseline Y(0) = noise and
    Y(1) = tau_c + noise; under "symmetric" Y(w) = noise + (w - 1/2) tau_c.
    """
    if spec.kind == "explicit":
        return load_population_csv(spec.table_path)

    sizes = np.asarray(spec.sizes, dtype=np.int64)
    effects = np.asarray(spec.effects, dtype=np.float64)
    cluster_id = np.repeat(np.arange(1, spec.cluster_count + 1, dtype=np.int64), sizes)

    rng = np.random.default_rng(seed_sequence(seed))
    noise = spec.noise_sd * rng.standard_normal(cluster_id.shape[0])
    unit_effect = effects[cluster_id - 1]
    if spec.baseline == "control":
        y0 = noise
        y1 = noise + unit_effect
    else:
        y0 = noise - 0.5 * unit_effect
        y1 = noise + 0.5 * unit_effect

    population = Population(cluster_id=cluster_id, y0=y0, y1=y1, cluster_count=spec.cluster_count)
    logger.info(f"population built: M={population.unit_count}, C={population.cluster_count}, seed={seed}")
    return population


def compute_estimands(pop: Population) -> Estimands:
    """Finite-population estimands; residuals are taken around the grand means."""
    m = pop.unit_count
    ybar0 = compensated_sum(pop.y0) / m
    ybar1 = compensated_sum(pop.y1) / m
    eps0 = pop.y0 - ybar0
    eps1 = pop.y1 - ybar1
    tau_c = (cluster_means(pop.y1, pop.codes, pop.cluster_count)
             - cluster_means(pop.y0, pop.codes, pop.cluster_count))
    return Estimands(
        tau=ybar1 - ybar0,
        tau_c=tau_c,
        eps0=eps0,
        eps1=eps1,
        eps0_bar_c=cluster_means(eps0, pop.codes, pop.cluster_count),
        eps1_bar_c=cluster_means(eps1, pop.codes, pop.cluster_count),
        ybar0=ybar0,
        ybar1=ybar1,
        cluster_sizes=pop.cluster_sizes,
        codes=pop.codes,
    )


def cached_population(config: ExperimentConfig, cache: PopulationCacheConfig) -> Population:
    """Build the population once per (spec, seed) and reuse it from the joblib cache."""
    if config.population.kind == "explicit":
        return build_population(config.population, config.population_seed)
    path = Path(cache.root_dir) / f"population-{config.population_key()}.joblib"
    if path.exists():
        return load_bin(path)
    population = build_population(config.population, config.population_seed)
    save_bin(population, path)
    return population


def population_to_frame(pop: Population) -> pd.DataFrame:
    return pd.DataFrame({"cluster": pop.cluster_id, "y0": pop.y0, "y1": pop.y1})
