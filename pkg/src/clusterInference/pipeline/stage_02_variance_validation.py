from clusterInference.config.configuration import ConfigurationManager
from clusterInference.components.montecarlo import VarianceValidation
from clusterInference.components.population import cached_population
from clusterInference.constants import CONFIG_FILE_PATH, PARAMS_FILE_PATH
from clusterInference import logger


STAGE_NAME = "Variance Validation Stage"


class VarianceValidationPipeline:
    def __init__(self, config_filepath=CONFIG_FILE_PATH, params_filepath=PARAMS_FILE_PATH,
                 overrides=(), out_dir=None):
        self.config_filepath = config_filepath
        self.params_filepath = params_filepath
        self.overrides = overrides
        self.out_dir = out_dir

    def main(self):
        config = ConfigurationManager(self.config_filepath, self.params_filepath, self.overrides, self.out_dir)
        experiment_config = config.get_experiment_config()
        validation_config = config.get_variance_validation_config()
        population = cached_population(experiment_config, config.get_population_cache_config())

        validation = VarianceValidation(config=validation_config, experiment=experiment_config)
        table = validation.run(population)
        validation.save_report()
        return table


if __name__ == "__main__":
    try:
        logger.info(f">>>>>> stage {STAGE_NAME} started <<<<<<")
        obj = VarianceValidationPipeline()
        obj.main()
        logger.info(f">>>>>> stage {STAGE_NAME} completed <<<<<<\n\nx==========x")
    except Exception as e:
        logger.exception(e)
        raise e
