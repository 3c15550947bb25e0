import sys
from pathlib import Path

from clusterInference.config.configuration import ConfigurationManager
from clusterInference.components.analysis import DatasetAnalysis
from clusterInference.constants import CONFIG_FILE_PATH, ESTIMATORS, PARAMS_FILE_PATH
from clusterInference import logger


STAGE_NAME = "Dataset Analysis Stage"


class AnalysisPipeline:
    def __init__(self, csv_path: Path, fixed_effects: bool = False, estimators=ESTIMATORS,
                 sampling_clustered: bool | None = None, assignment_clustered: bool | None = None,
                 config_filepath=CONFIG_FILE_PATH, params_filepath=PARAMS_FILE_PATH, overrides=(), out_dir=None):
        self.csv_path = Path(csv_path)
        self.options = {
            "fixed_effects": fixed_effects,
            "estimators": tuple(estimators),
            "sampling_clustered": sampling_clustered,
            "assignment_clustered": assignment_clustered,
        }
        self.config_filepath = config_filepath
        self.params_filepath = params_filepath
        self.overrides = overrides
        self.out_dir = out_dir

    def main(self):
        config = ConfigurationManager(self.config_filepath, self.params_filepath, self.overrides, self.out_dir)
        analysis_config = config.get_analysis_config()
        analysis = DatasetAnalysis(config=analysis_config)
        report = analysis.analyze(
            self.csv_path,
            confidence=float(config.params.get("confidence", 0.95)),
            **self.options,
        )
        analysis.save_report()
        return report


if __name__ == "__main__":
    try:
        logger.info(f">>>>>> stage {STAGE_NAME} started <<<<<<")
        obj = AnalysisPipeline(csv_path=Path(sys.argv[1]))
        obj.main()
        logger.info(f">>>>>> stage {STAGE_NAME} completed <<<<<<\n\nx==========x")
    except Exception as e:
        logger.exception(e)
        raise e
