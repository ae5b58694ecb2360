import os

from skram.utils.run_report import ConfigurationError


class SkramConfig():
    """Static defaults shared by the solvers, the analysis helpers and the command line runner."""
    version = "0.1.0"
    output_path = None
    max_threads = 1
    blow_up_threshold = 1e12
    branch_tolerance = 1e-9
    quadrature_tolerance = 1e-10
    pivot_tolerance = 1e-12
    bootstrap_resamples = 200
    mcmc_step = 0.3
    mcmc_thin = 10
    mcmc_burn_in = 0.2
    action_tolerance = 1e-6
    action_max_iterations = 10000
    start_penalty = 10.0
    ess_warning = 100

    @staticmethod
    def reset(output_path=None):
        """Reset the configuration to the default values.

            Parameters
            ----------
            output_path: str
                directory where experiments write their artifacts. Defaults to ``./skram_runs``.

        """
        SkramConfig.output_path = output_path if output_path else os.path.join(os.getcwd(), "skram_runs")
        SkramConfig.max_threads = 1
        SkramConfig.blow_up_threshold = 1e12
        SkramConfig.bootstrap_resamples = 200
        SkramConfig.mcmc_step = 0.3
        SkramConfig.mcmc_thin = 10
        SkramConfig.mcmc_burn_in = 0.2
        SkramConfig.action_tolerance = 1e-6
        SkramConfig.action_max_iterations = 10000

    @staticmethod
    def set_output_path(path):
        """ Set the directory where the experiment artifacts are stored.

            Parameters
            ----------
            path: str
                output directory.
        """
        SkramConfig.output_path = path

    @staticmethod
    def get_output_path():
        """ Get the directory where the experiment artifacts are stored.

            Returns
            -------
            str:
                output directory.

        """
        if SkramConfig.output_path is None:
            SkramConfig.reset()
        return SkramConfig.output_path

    @staticmethod
    def set_max_threads(n):
        """ Cap the number of workers used for independent table cells.

            Parameters
            ----------
            n: int
                number of workers, at least one.
        """
        if n is None or int(n) < 1:
            raise ConfigurationError(f"the number of threads must be a positive integer, got {n}")
        SkramConfig.max_threads = int(n)
