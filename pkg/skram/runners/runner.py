import os

from loguru import logger

from skram.utils.run_report import SkramException
from skram.utils.utils import writeCsv, writeJson


class Runner:
    """Interface defining the stages of an experiment run"""

    def __init__(self, config, outDir, state):
        """Initialize function.

            Parameters
            ----------
            config: ExperimentConfig
                validated configuration.
            outDir: str
                directory of the artifacts; nothing is written elsewhere.
            state: RunState
                collects the outcome of every stage.
        """
        self.config = config
        self.outDir = outDir
        self.state = state
        self.block = config.experimentBlock()
        self.artifacts = []

    def before(self):
        """ Build the solver objects shared by the cells of the experiment.

            Returns
            -------
            dict:
                keyword arguments of :meth:`main_func`.
        """
        cfg = self.config.solverConfig()
        self.state.setStageState("build", True, msg=f"N={cfg.basis.N}, h={cfg.h}")
        return {"cfg": cfg}

    def main_func(self, cfg):
        """ Compute the result tables.

            Returns
            -------
            (list[dict], dict):
                the rows of ``table.csv`` and the JSON result record.
        """
        raise NotImplementedError

    def after(self, rows, result):
        """ Write ``table.csv`` and ``result.json``.

            Parameters
            ----------
            rows: list[dict]
                rows sharing the keys of the first row.
            result: dict
                JSON result record.
        """
        self.writeTable("table.csv", rows)
        self.writeRecord("result.json", result)
        self.state.setStageState("write", True, rows=len(rows), msg=", ".join(self.artifacts))

    def writeTable(self, name, rows):
        header = list(rows[0].keys()) if rows else []
        writeCsv(os.path.join(self.outDir, name), header, [[row.get(key) for key in header] for row in rows])
        self.artifacts.append(name)

    def writeRecord(self, name, record):
        writeJson(os.path.join(self.outDir, name), record)
        self.artifacts.append(name)

    def artifactPath(self, name):
        self.artifacts.append(name)
        return os.path.join(self.outDir, name)

    def run(self):
        """Execute the stages and record failures in the run state before re-raising them."""
        stage = "build"
        try:
            kwargs = self.before()
            stage = "compute"
            rows, result = self.main_func(**kwargs)
            self.state.setStageState("compute", True, rows=len(rows))
            stage = "write"
            self.after(rows, result)
        except SkramException as error:
            logger.error(f"Runner<{self.getName()}> failed at stage {stage}: {error.message}")
            self.state.setStageState(stage, False, msg=error.message)
            error.attachState(self.state)
            raise
        return self.artifacts

    @staticmethod
    def getName():
        """Name of the experiment on the command line.

            Returns
            -------
            str
        """
        return "experiment_not_selected"

    @staticmethod
    def getAnchor():
        """One line statement of the result the experiment illustrates.

            Returns
            -------
            str
        """
        return ""
