import argparse
import os
import sys

from loguru import logger

from skram.skram_manager import SkramManager
from skram.utils.run_report import RunReport, SkramException


def parseArguments(argv=None):
    parser = argparse.ArgumentParser(prog="skram", description="Small mass limit experiments on a spectral basis.")
    parser.add_argument("experiment", help="experiment name, or 'list' for the catalog")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--out", default=None, help="artifact directory")
    parser.add_argument("--seed", type=int, default=None, help="master seed, overrides the configuration")
    parser.add_argument("--threads", type=int, default=None, help="worker cap for independent table cells")
    parser.add_argument("--verbosity", default="INFO", help="level of the console log")
    return parser.parse_args(argv)


@logger.catch(reraise=True)
def runCommand(args):
    manager = SkramManager(args.out, args.threads)
    if args.experiment == "list":
        for name, anchor in manager.listExperiments():
            print(f"{name:16s}{anchor}")
        return 0
    if not args.config:
        raise SkramException("--config is required")
    config = manager.load(args.experiment, args.config, args.seed)
    outDir = manager.outputDirectory(config)
    sink = logger.add(os.path.join(outDir, "run.log"), level="DEBUG")
    try:
        report = manager.execute(config, outDir)
    finally:
        logger.remove(sink)
    print(report)
    print(f"\nartifacts written to {outDir}")
    return 1 if report.hasError() else 0


def main(argv=None):
    args = parseArguments(argv)
    logger.remove()
    logger.add(sys.stderr, level=args.verbosity.upper())
    try:
        return runCommand(args)
    except SkramException as error:
        if error.state is not None:
            report = RunReport(args.experiment)
            report.append(error.state)
            print(report)
        return 1


if __name__ == "__main__":
    sys.exit(main())
