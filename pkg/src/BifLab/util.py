# util.py
# Utility function file

import os
import time
import logging
import qcodes as qc
import pandas as pd
from pathlib import Path
from qcodes import initialise_or_create_database_at

log = logging.getLogger(__name__)


class BifLabException(Exception):
    def __init__(self, message):
        self.message = message
        super().__init__(self)

    def __str__(self):
        return self.message


class DomainError(BifLabException, ValueError):
    """ Raised when an argument lies outside the domain of an operation. """


class InadmissibleSpec(DomainError):
    def __init__(self, gamma):
        self.gamma = gamma
        super().__init__(f'Inadmissible potential spec: gamma = {gamma:.6g} must be positive.')


class ConfigException(BifLabException):
    """
    Raised when an experiment configuration fails validation.

    Attributes
    ---------
    violations:
        List of human-readable descriptions of every violated constraint.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__('Invalid configuration:\n  - ' + '\n  - '.join(self.violations))


class NumericalFailure(BifLabException):
    """ Base class for failures of the numerical routines themselves. """


class NotPositiveSemidefinite(NumericalFailure):
    def __init__(self, pivot, jitter):
        self.pivot = pivot
        self.jitter = jitter
        super().__init__(f'Matrix is not positive semidefinite: factorization failed at pivot {pivot} '
                         f'with jitter {jitter:.3g}.')


class QuadratureFailure(NumericalFailure):
    """ Raised when a quadrature rule is asked for more than it can deliver. """


class SingularityError(NumericalFailure, ValueError):
    """ Raised when a kernel is evaluated at its singular point. """


class ParameterException(BifLabException):
    def __init__(self, message, set=False):
        self.set = set
        super().__init__(message)


def safe_get(p, last_try=False):
    """
    Alerts the user when a parameter's value can not be obtained.

    Numerical failures are raised immediately, anything else is retried once.

    Parameters
    ---------
    p:
        The parameter to be measured.
    last_try:
        Flag to stop attempting to get the value.
    """

    try:
        return p.get()
    except (NumericalFailure, DomainError):
        raise
    except Exception as e:
        if last_try is False:
            log.warning(f"Couldn't get {p.name}. Trying again. {e}")
            time.sleep(0.1)
            return safe_get(p, last_try=True)
        log.error(f"Still couldn't get {p.name}. Giving up. {e}")
        raise ParameterException(f'Could not get {p.name}.', set=False)


def resolve_threads(threads=None):
    """ Number of worker threads: explicit value, else BIFBM_THREADS, else 1. """

    if threads is None:
        env = os.environ.get('BIFBM_THREADS')
        if env is None or env.strip() == '':
            return 1
        try:
            threads = int(env)
        except ValueError:
            raise ConfigException(f'BIFBM_THREADS must be an integer, got "{env}".')
    if threads < 1:
        raise ConfigException(f'Thread count must be at least 1, got {threads}.')
    return int(threads)


def init_database(db, exp, samp):
    """
    Initializes a database with exp and sample names for the resolution sweeps.

    Parameters
    ---------
    db:
        The desired path of the database; '.db' is appended if missing.
    exp:
        The experiment name.
    samp:
        The sample name.
    """

    db = str(db)
    if not db.endswith('.db'):
        db = f'{db}.db'
    Path(db).parent.mkdir(parents=True, exist_ok=True)
    initialise_or_create_database_at(db)
    return qc.new_experiment(exp, samp)


def save_to_csv(ds, fn, use_labels=True):
    """
    Saves a QCoDeS dataset as a CSV file.

    Parameters
    ---------
    ds:
        The dataset to be saved.
    fn:
        The filepath to store the CSV data.
    use_labels=True:
        Puts the parameter labels as the column names of the csv, as opposed to the parameter names.
    """

    def find_param_label(name):
        use_name = name
        unit = None
        for p_name, ps in ds.paramspecs.items():
            if name == p_name:
                unit = ps.unit
                if ps.label:
                    use_name = ps.label

        if unit:
            use_name = f'{use_name} ({unit})'
        return use_name

    df = ds.to_pandas_dataframe_dict()
    export_ds = pd.DataFrame()
    for key, value in df.items():
        if use_labels:
            export_key = find_param_label(key)
            value.index.name = find_param_label(value.index.name)
        else:
            export_key = key
        export_ds[export_key] = value[key]

    write_frame(export_ds, fn)


def write_frame(df, fn, index=True):
    """ Writes a pandas DataFrame as UTF-8 CSV with round-trip float precision. """

    Path(fn).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(fn, index=index, float_format='%.17g', encoding='utf-8')
