# runner.py
"""
Dispatch of experiment configurations to their experiment classes.
"""

import logging

from .chaos_experiment import ChaosExperiment
from .config import ExperimentConfig
from .ito_experiment import ItoExperiment
from .potential_experiment import PotentialExperiment
from .qv_experiment import QVExperiment
from .simulate_experiment import SimulateExperiment
from .tanaka_experiment import TanakaExperiment
from .util import BifLabException, ConfigException, DomainError, NumericalFailure

log = logging.getLogger(__name__)

EXPERIMENTS = {cls.kind: cls for cls in (SimulateExperiment, QVExperiment, ItoExperiment, TanakaExperiment,
                                         ChaosExperiment, PotentialExperiment)}

EXIT_OK = 0
EXIT_FAILED_METRICS = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3


def run(config, threads=None, seed=None, out=None, suppress_output=True):
    """
    Runs one experiment.

    Parameters
    ---------
    config:
        ExperimentConfig, a dict in the config JSON layout or the path of a config file.
    threads:
        Worker threads; defaults to BIFBM_THREADS or 1.
    seed, out:
        Overrides of monte_carlo.seed and output.dir.

    Returns
    ---------
    The ExperimentReport; its exit_code is 0 iff every metric passed.
    """

    if isinstance(config, dict):
        config = ExperimentConfig.import_json(config)
    elif not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.init_from_json(config)
    config = config.with_overrides(seed, out)
    try:
        experiment = EXPERIMENTS[config.kind]
    except (KeyError, TypeError):
        raise ConfigException(f'Unknown experiment kind "{config.kind}"; known kinds: {sorted(EXPERIMENTS)}.')
    return experiment(config, threads, suppress_output).run()


def exit_code(error):
    """ Exit code of an exception raised by run(). """
    if isinstance(error, NumericalFailure):
        return EXIT_NUMERICAL_FAILURE
    if isinstance(error, (ConfigException, DomainError)):
        return EXIT_CONFIG_ERROR
    if isinstance(error, BifLabException):
        return EXIT_NUMERICAL_FAILURE
    raise error
