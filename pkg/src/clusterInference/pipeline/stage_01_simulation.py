from clusterInference.config.configuration import ConfigurationManager
from clusterInference.components.montecarlo import CoverageExperiment
from clusterInference.components.population import cached_population
from clusterInference.constants import CONFIG_FILE_PATH, PARAMS_FILE_PATH
from clusterInference import logger


STAGE_NAME = "Coverage Simulation Stage"


class SimulationPipeline:
    def __init__(self, config_filepath=CONFIG_FILE_PATH, params_filepath=PARAMS_FILE_PATH,
                 overrides=(), out_dir=None):
        self.config_filepath = config_filepath
        self.params_filepath = params_filepath
        self.overrides = overrides
        self.out_dir = out_dir

    def main(self):
        config = ConfigurationManager(self.config_filepath, self.params_filepath, self.overrides, self.out_dir)
        experiment_config = config.get_experiment_config()
        config.log_resolved(experiment_config)
        simulation_config = config.get_simulation_config()
        population = cached_population(experiment_config, config.get_population_cache_config())

        experiment = CoverageExperiment(config=simulation_config, experiment=experiment_config)
        report = experiment.run(population)
        experiment.save_report(config.params.to_dict())
        return report


if __name__ == "__main__":
    try:
        logger.info(f">>>>>> stage {STAGE_NAME} started <<<<<<")
        obj = SimulationPipeline()
        obj.main()
        logger.info(f">>>>>> stage {STAGE_NAME} completed <<<<<<\n\nx==========x")
    except Exception as e:
        logger.exception(e)
        raise e
