from clusterInference.config.configuration import ConfigurationManager
from clusterInference.components.oracle import OracleFixtures
from clusterInference.constants import CONFIG_FILE_PATH, PARAMS_FILE_PATH
from clusterInference import logger


STAGE_NAME = "Enumeration Oracle Stage"


class OraclePipeline:
    def __init__(self, config_filepath=CONFIG_FILE_PATH, params_filepath=PARAMS_FILE_PATH,
                 overrides=(), out_dir=None):
        self.config_filepath = config_filepath
        self.params_filepath = params_filepath
        self.overrides = overrides
        self.out_dir = out_dir

    def main(self) -> OracleFixtures:
        config = ConfigurationManager(self.config_filepath, self.params_filepath, self.overrides, self.out_dir)
        oracle_config = config.get_oracle_config()
        fixtures = OracleFixtures(config=oracle_config)
        fixtures.run()
        fixtures.save_fixtures()
        return fixtures


if __name__ == "__main__":
    try:
        logger.info(f">>>>>> stage {STAGE_NAME} started <<<<<<")
        obj = OraclePipeline()
        fixtures = obj.main()
        if not fixtures.all_agree:
            raise RuntimeError("formula and enumeration disagree; see the fixture table")
        logger.info(f">>>>>> stage {STAGE_NAME} completed <<<<<<\n\nx==========x")
    except Exception as e:
        logger.exception(e)
        raise e
