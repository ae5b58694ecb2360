import os
import time

from loguru import logger

from skram.models.experiment_config import loadConfig
from skram.runners.runners import installRunners
from skram.utils.hypotheses import HypothesisChecker
from skram.utils.run_report import ConfigurationError, RunReport, RunState, SkramException
from skram.utils.skram_config import SkramConfig
from skram.utils.utils import configHash, writeJson


class SkramManager():
    """ Entry point of the experiments: loads a configuration, runs it and writes a reproducible manifest.
    """

    def __init__(self, outDir=None, threads=None):
        """Initialize function.

            Parameters
            ----------
            outDir: str
                artifact directory of the run; defaults to ``<output path>/<experiment>-<config hash>``.
            threads: int
                worker cap for independent table cells.
        """
        self.outDir = outDir
        if threads is not None:
            SkramConfig.set_max_threads(threads)
        self.runners = installRunners()

    def listExperiments(self):
        """ Catalog of the experiments.

            Returns
            -------
            list[(str, str)]:
                name and one line statement of every experiment.
        """
        return [(name, clz.getAnchor()) for name, clz in sorted(self.runners.items())]

    def runnerOf(self, experiment):
        if experiment not in self.runners:
            raise ConfigurationError(f"unknown experiment {experiment!r}, valid names are {sorted(self.runners)}")
        return self.runners[experiment]

    def load(self, experiment, configPath, seed=None):
        self.runnerOf(experiment)
        return loadConfig(configPath, experiment, seed)

    def outputDirectory(self, config):
        """Artifact directory of a validated configuration, created on demand."""
        if self.outDir is not None:
            path = self.outDir
        else:
            digest = configHash(config.model_dump(mode="json"))[:12]
            path = os.path.join(SkramConfig.get_output_path(), f"{config.experiment}-{digest}")
        os.makedirs(path, exist_ok=True)
        return path

    def execute(self, config, outDir):
        """ Run a validated configuration and write its manifest.

            Parameters
            ----------
            config: ExperimentConfig
            outDir: str

            Returns
            -------
            RunReport:
                summary of the stages.

            Raises
            ------
            SkramException:
                the failure of the run, carrying its ``RunState``; the manifest is written first.
        """
        state = RunState()
        state.setStageState("validate", True, msg=f"seed={config.seed}")
        runner = self.runnerOf(config.experiment)(config, outDir, state)
        report = RunReport(config.experiment)
        logger.info(f"running {config.experiment} into {outDir}")
        start = time.perf_counter()
        failure = None
        try:
            artifacts = runner.run()
        except SkramException as error:
            failure = error
            artifacts = list(runner.artifacts)
        report.append(state)
        flags = config.hypothesisFlags()
        manifest = {
            "experiment": config.experiment,
            "config_hash": configHash(config.model_dump(mode="json")),
            "seed": config.seed,
            "version": SkramConfig.version,
            "wall_time": time.perf_counter() - start,
            "threads": SkramConfig.max_threads,
            "hypothesis_flags": flags,
            "hypotheses_checked": HypothesisChecker(flags).summary(config.hypothesisUsages()),
            "artifacts": artifacts,
            "run_state": state.toDict(),
            "config": config.model_dump(mode="json"),
        }
        writeJson(os.path.join(outDir, "manifest.json"), manifest)
        if failure is not None:
            raise failure
        return report

    def run(self, experiment, configPath, seed=None):
        """ Load, run and document one experiment.

            Returns
            -------
            (RunReport, str):
                the summary and the artifact directory.
        """
        config = self.load(experiment, configPath, seed)
        outDir = self.outputDirectory(config)
        return self.execute(config, outDir), outDir
