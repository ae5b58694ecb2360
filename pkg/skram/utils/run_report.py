from tabulate import tabulate


class RunReport():
    """Summary table of the stages executed by an experiment run"""

    def __init__(self, experiment, tablefmt="grid"):
        """Initialize function.
            Parameters
            ----------
            experiment: str
                name of the experiment.
            tablefmt: str
                table format style.
        """
        self.experiment = experiment
        self.headers = ["Stage", "Status", "Rows", "Message"]
        self.data = []
        self.tableFormat = tablefmt

    def __str__(self):

        table = tabulate(self.data, self.headers, tablefmt=self.tableFormat)
        output = f"\n\nExperiment <{self.experiment}> summary:\n" + str(table)
        return output

    def append(self, state):
        """ Append the rows of a run state to the report.

            Parameters
            ----------
            state: RunState
                state collected while running the experiment.
        """
        for stage in state.stages:
            self.data.append([stage["stage"], stage["status"], stage["rows"], stage["msg"] or ""])

    def hasError(self):
        return any(row[1] == "Failed" for row in self.data)


class RunState():
    """Status of every stage of an experiment run"""

    def __init__(self):
        """Initialize function.

        """
        self.stages = []
        self.hasError = False
        self.msg = None
        self.stage = None

    def setStageState(self, stage, state, rows=0, msg=None):
        """ Record the outcome of one stage.
            Parameters
            ----------
            stage: str
                name of the stage, for example ``validate`` or ``simulate``.
            state: bool
                If False, then state indicates a failing stage.
            rows: int
                number of rows the stage produced.
            msg: str
                optional message.
        """
        status = "Ok" if state else "Failed"
        if not state:
            self.hasError = True
            self.stage = stage
            self.msg = msg
        self.stages.append({"stage": stage, "status": status, "rows": rows, "msg": msg})

    def toDict(self):
        """ Convert the State instance to a dictionary object.

            Returns
            -------
            dict:
                State class in dictionary object.

        """
        return {
            "stages": list(self.stages),
            "hasError": self.hasError,
            "stage": self.stage,
            "msg": self.msg
        }

    def setFailureMsg(self, msg):
        self.hasError = True
        self.msg = msg


class SkramException(Exception):
    """ Base exception of the package; optionally carries the state of the failing run."""

    def __init__(self, msg, state=None):
        """Initialize function.
            Parameters
            ----------
            msg: str
                exception message.
            state: RunState
                state of the run when the failure occurred.
        """
        self.state = None
        self.message = msg
        super().__init__(msg)
        if state is not None:
            self.attachState(state)

    def attachState(self, state):
        """ Attach the state of the failing run and record the message as its failure.

            Returns
            -------
            SkramException:
                the exception itself.
        """
        self.state = state
        state.setFailureMsg(self.message)
        return self


class ConfigurationError(SkramException):
    """Invalid construction parameters or configuration file."""


class InvalidParameterError(ConfigurationError):
    """Invalid numeric parameter of a pure operation."""


class HypothesisError(ConfigurationError):
    """A precondition of the requested experiment does not hold for the chosen covariance or nonlinearity."""


class DomainError(SkramException):
    """Argument outside the domain of the operation."""


class BasisMismatchError(SkramException):
    """Fields or states built on different spectral bases."""


class InternalError(SkramException):
    """Numerical failure that is not caused by the input, for example a non positive covariance."""


class BlowUpError(SkramException):
    """ Non-finite or exploding state detected while stepping."""

    def __init__(self, step, paths, state=None):
        """Initialize function.
            Parameters
            ----------
            step: int
                index of the step that produced the state.
            paths: list[int]
                indices of the affected paths.
        """
        self.step = step
        self.paths = list(paths)
        shown = self.paths[:10]
        more = "" if len(self.paths) <= 10 else f" (+{len(self.paths) - 10} more)"
        super().__init__(f"blow-up at step {step} on paths {shown}{more}", state)
