# base_experiment.py

import time
import logging
from functools import partial
from pathlib import Path

import qcodes as qc
from qcodes import Parameter

from .report import ExperimentReport, MetricRecord
from .resolution_sweep import ResolutionSweep
from .simulator import sample_paths
from .util import init_database, resolve_threads, save_to_csv, write_frame

log = logging.getLogger(__name__)


class BaseExperiment:
    """
    Parent class of the verification experiments.

    A subclass sets 'kind' and implements execute(), which computes its quantities and records them
    with add_metric. run() wraps execute() with database setup, timing and report writing.

    Attributes
    ---------
    config:
        Materialized and validated ExperimentConfig.
    threads:
        Worker threads used for sampling.
    suppress_output:
        Silences progress messages.
    out_dir:
        Directory receiving the report and CSV artifacts.
    metrics:
        MetricRecords collected so far.
    artifacts:
        Paths of written files, relative to out_dir.

    Methods
    ---------
    add_metric(name, estimate, target, tolerance=0.0, se=None, n_se=0.0)
        Records one checked quantity.
    sample(n_paths=None, grid=None)
        Samples an ensemble with the configured parameters and seed.
    new_sweep(setpoints)
        ResolutionSweep that saves to the database when one is configured.
    write_csv(df, name)
        Writes a table to out_dir when CSV output is enabled.
    run()
        Runs the experiment and writes '<kind>_report.json'.
    """

    kind = None

    def __init__(self, config, threads=None, suppress_output=False):
        self.config = config.materialize().validate()
        self.threads = resolve_threads(threads)
        self.suppress_output = suppress_output
        self.out_dir = Path(self.config.output['dir'])
        self.metrics = []
        self.artifacts = []
        self.report = None

    @property
    def estimator(self):
        return self.config.estimator

    @property
    def quad(self):
        return self.config.quad

    @property
    def save_data(self):
        return self.config.output.get('database') is not None

    def add_metric(self, name, estimate, target, tolerance=0.0, se=None, n_se=0.0):
        m = MetricRecord(name, estimate, target, tolerance, se, n_se)
        self.metrics.append(m)
        if m.passed:
            log.info(f'{m!r}')
        else:
            log.warning(f'{m!r}')
        self.print_msg(f'{"pass" if m.passed else "FAIL"}  {name}: {m.estimate} (target {m.target})')
        return m

    def add_flag(self, name, ok):
        """ A boolean check, recorded as estimate 1/0 against target 1. """
        return self.add_metric(name, 1.0 if ok else 0.0, 1.0)

    def add_estimate(self, name, est, target, tolerance=0.0, n_se=None):
        """ Records an MCEstimate against a target with n_se standard errors of slack. """
        n_se = self.estimator.get('n_se', 3.0) if n_se is None else n_se
        return self.add_metric(name, est.mean, target, tolerance, est.se, n_se)

    def sample(self, n_paths=None, grid=None):
        return sample_paths(self.config.multi_params, grid or self.config.time_grid,
                            n_paths or self.config.n_paths, self.config.seed, self.threads)

    def new_sweep(self, setpoints):
        return ResolutionSweep(setpoints, save_data=self.save_data, suppress_output=self.suppress_output)

    def follow_estimates(self, sweep, func, labels):
        """
        Follows one qcodes Parameter per key of labels on the sweep.

        func(n) returns a dict holding every key; it is evaluated once per resolution n and the
        parameters read their entry from it.
        """

        cache = {}

        def value(key):
            n = int(sweep.set_param.get())
            if n not in cache:
                cache[n] = func(n)
            return cache[n][key]

        params = [Parameter(key, label=label, get_cmd=partial(value, key), get_parser=float, set_cmd=False)
                  for key, label in labels.items()]
        sweep.follow_param(*params)
        return params

    def write_csv(self, df, name, index=True):
        if not self.config.output.get('csv'):
            return None
        fn = self.out_dir / name
        write_frame(df, fn, index=index)
        self.artifacts.append(name)
        return fn

    def write_sweep(self, sweep, name):
        """ Exports a finished sweep: the in-memory table, and the qcodes dataset when one was saved. """
        if not self.config.output.get('csv'):
            return
        self.write_csv(sweep.to_frame(), f'{name}.csv')
        if sweep.dataset is not None:
            ds = qc.load_by_id(sweep.dataset['run id'])
            save_to_csv(ds, self.out_dir / f'{name}_dataset.csv')
            self.artifacts.append(f'{name}_dataset.csv')

    def execute(self):
        raise NotImplementedError

    def run(self):
        """
        Runs the experiment.

        Returns
        ---------
        The ExperimentReport, also written to '<out_dir>/<kind>_report.json'.
        """

        t0 = time.monotonic()
        self.metrics, self.artifacts = [], []
        if self.save_data:
            init_database(self.config.output['database'], f'bifbm_{self.kind}',
                          f'seed_{self.config.seed}')
        self.print_msg(f'Running {self.kind} with {self.config.multi_params!r}.')
        self.execute()

        self.report = ExperimentReport(self.kind, self.config.export_json(), self.metrics, self.config.seed,
                                       time.monotonic() - t0, artifacts=self.artifacts)
        self.report.write(self.out_dir / f'{self.kind}_report.json')
        self.print_msg(f'{self.kind}: {len(self.metrics) - len(self.report.failed_metrics)} of '
                       f'{len(self.metrics)} checks passed in {self.report.runtime_seconds:.1f} s.')
        return self.report

    def print_msg(self, msg):
        if self.suppress_output is False:
            print(msg)

    def __repr__(self):
        return f'{self.__class__.__name__}({self.config!r})'
