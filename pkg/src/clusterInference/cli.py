"""Command-line entry point: `cluster-inference {simulate,validate,analyze,oracle,draw}`.

Exit codes: 0 on success, 1 on a runtime failure (or an oracle disagreement),
2 on a usage, configuration or input error.
"""
import argparse
import sys

from clusterInference import logger
from clusterInference.constants import CONFIG_FILE_PATH, ESTIMATORS, ORACLE_MAX_UNITS, PARAMS_FILE_PATH
from clusterInference.exception import ConfigurationError, DataValidationError, OracleSizeError

USAGE_ERRORS = (ConfigurationError, DataValidationError, OracleSizeError)


def _estimator_list(value: str) -> tuple[str, ...]:
    names = tuple(name.strip() for name in value.split(",") if name.strip())
    unknown = [name for name in names if name not in ESTIMATORS]
    if unknown or not names:
        raise argparse.ArgumentTypeError(
            f"unknown estimator(s) {unknown}; choose from {', '.join(ESTIMATORS)}"
        )
    return names


def _overrides(args) -> list[str]:
    overrides = list(args.set)
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    if getattr(args, "threads", None) is not None:
        overrides.append(f"threads={args.threads}")
    if getattr(args, "confidence", None) is not None:
        overrides.append(f"confidence={args.confidence}")
    if getattr(args, "max_units", None) is not None:
        overrides.append(f"oracle.max_units={args.max_units}")
    return overrides


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=PARAMS_FILE_PATH, help="experiment parameter file (YAML)")
    common.add_argument("--paths", default=CONFIG_FILE_PATH, help="artifact layout file (YAML)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter, e.g. --set replications=100 (repeatable)")
    common.add_argument("--out-dir", default=None, help="write reports here instead of artifacts/<stage>")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=None, help="master seed")
    seeded.add_argument("--threads", type=int, default=None, help="worker processes for the replications")

    parser = argparse.ArgumentParser(
        prog="cluster-inference",
        description="Design-based cluster-robust inference: simulate, validate and analyze.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("simulate", parents=[common, seeded],
                        help="Monte Carlo coverage experiment")
    commands.add_parser("validate", parents=[common, seeded],
                        help="Monte Carlo check of the exact variances over the validation grid")

    analyze = commands.add_parser("analyze", parents=[common],
                                  help="estimates, standard errors and diagnostics for a y,w,cluster CSV")
    analyze.add_argument("csv", help="CSV with header y,w,cluster")
    analyze.add_argument("--fixed-effects", action="store_true", help="also fit the cluster fixed-effects model")
    analyze.add_argument("--estimators", type=_estimator_list, default=ESTIMATORS,
                         help=f"comma-separated subset of {','.join(ESTIMATORS)}")
    analyze.add_argument("--sampling-clustered", action=argparse.BooleanOptionalAction, default=None,
                         help="were clusters sampled (rather than all clusters observed)?")
    analyze.add_argument("--assignment-clustered", action=argparse.BooleanOptionalAction, default=None,
                         help="was treatment assigned with cluster-level correlation?")
    analyze.add_argument("--confidence", type=float, default=None, help="confidence level of the intervals")

    oracle = commands.add_parser("oracle", parents=[common],
                                 help="formula-versus-enumeration fixture table")
    oracle.add_argument("--max-units", type=int, default=None,
                        help=f"largest fixture population (at most {ORACLE_MAX_UNITS})")

    draw = commands.add_parser("draw", parents=[common, seeded],
                               help="write one simulated sample as a y,w,cluster CSV")
    draw.add_argument("--output", required=True, help="CSV file to write")
    draw.add_argument("--replication", type=int, default=0, help="replication index of the draw")
    return parser


def _simulate(args) -> int:
    from clusterInference.pipeline.stage_01_simulation import SimulationPipeline

    SimulationPipeline(args.paths, args.config, _overrides(args), args.out_dir).main()
    return 0


def _validate(args) -> int:
    from clusterInference.pipeline.stage_02_variance_validation import VarianceValidationPipeline

    VarianceValidationPipeline(args.paths, args.config, _overrides(args), args.out_dir).main()
    return 0


def _analyze(args) -> int:
    from clusterInference.pipeline.stage_04_analysis import AnalysisPipeline

    report = AnalysisPipeline(
        csv_path=args.csv,
        fixed_effects=args.fixed_effects,
        estimators=args.estimators,
        sampling_clustered=args.sampling_clustered,
        assignment_clustered=args.assignment_clustered,
        config_filepath=args.paths,
        params_filepath=args.config,
        overrides=_overrides(args),
        out_dir=args.out_dir,
    ).main()
    for line in report.guidance:
        print(line)
    return 0


def _draw(args) -> int:
    from clusterInference.components.design import draw_sample, replication_rng, sample_to_frame
    from clusterInference.components.population import cached_population
    from clusterInference.config.configuration import ConfigurationManager

    config = ConfigurationManager(args.paths, args.config, _overrides(args), args.out_dir)
    experiment_config = config.get_experiment_config()
    population = cached_population(experiment_config, config.get_population_cache_config())
    rng = replication_rng(experiment_config.master_seed, args.replication)
    sample = draw_sample(population, experiment_config.sampling, experiment_config.assignment, rng,
                         full_vectors=False)
    sample_to_frame(sample).to_csv(args.output, index=False)
    logger.info(f"draw {args.replication} with N={sample.n} written to {args.output}")
    return 0


def _oracle(args) -> int:
    from clusterInference.pipeline.stage_03_oracle import OraclePipeline

    fixtures = OraclePipeline(args.paths, args.config, _overrides(args), args.out_dir).main()
    if not fixtures.all_agree:
        logger.error("formula and enumeration disagree beyond tolerance; see the fixture table")
        return 1
    return 0


COMMANDS = {
    "simulate": _simulate,
    "validate": _validate,
    "analyze": _analyze,
    "oracle": _oracle,
    "draw": _draw,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2

    try:
        return COMMANDS[args.command](args)
    except USAGE_ERRORS as e:
        logger.error(str(e))
        return 2
    except Exception as e:
        logger.exception(e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
