# report.py
"""
Structured experiment reports and their JSON schema.
"""

import json
import math
import logging
from importlib import metadata
from pathlib import Path

import jsonschema

from .util import BifLabException

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1

try:
    LIBRARY_VERSION = metadata.version('BifLab')
except metadata.PackageNotFoundError:
    LIBRARY_VERSION = '0.1.0'

_NUMBER_OR_NULL = {'type': ['number', 'null']}

REPORT_SCHEMA = {
    '$schema': 'http://json-schema.org/draft-07/schema#',
    'title': 'bifbm experiment report',
    'type': 'object',
    'required': ['schema_version', 'kind', 'config', 'metrics', 'seed', 'runtime_seconds', 'version',
                 'artifacts', 'passed'],
    'additionalProperties': False,
    'properties': {
        'schema_version': {'const': REPORT_SCHEMA_VERSION},
        'kind': {'enum': ['simulate', 'qv', 'ito', 'tanaka', 'chaos', 'potential']},
        'config': {'type': 'object', 'required': ['kind', 'params', 'grid', 'monte_carlo', 'estimator', 'output']},
        'metrics': {
            'type': 'array',
            'items': {
                'type': 'object',
                'required': ['name', 'estimate', 'standard_error', 'target', 'tolerance', 'se_multiplier',
                             'passed'],
                'additionalProperties': False,
                'properties': {
                    'name': {'type': 'string', 'minLength': 1},
                    'estimate': _NUMBER_OR_NULL,
                    'standard_error': _NUMBER_OR_NULL,
                    'target': _NUMBER_OR_NULL,
                    'tolerance': {'type': 'number', 'minimum': 0},
                    'se_multiplier': {'type': 'number', 'minimum': 0},
                    'passed': {'type': 'boolean'},
                },
            },
        },
        'seed': {'type': 'integer', 'minimum': 0},
        'runtime_seconds': {'type': 'number', 'minimum': 0},
        'version': {'type': 'string'},
        'artifacts': {'type': 'array', 'items': {'type': 'string'}},
        'passed': {'type': 'boolean'},
    },
}


class ReportException(BifLabException):
    """ Raised when a report does not conform to REPORT_SCHEMA. """


def _finite_or_none(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


class MetricRecord:
    """
    One checked quantity.

    The pass flag is recomputed from the stored fields:
    |estimate - target| <= tolerance + se_multiplier * standard_error.
    Non-finite values are stored as null and never pass.
    """

    def __init__(self, name, estimate, target, tolerance, standard_error=None, se_multiplier=0.0):
        if tolerance < 0 or se_multiplier < 0:
            raise ValueError(f'Metric {name}: tolerance and se_multiplier must be nonnegative.')
        self.name = name
        self.estimate = _finite_or_none(estimate)
        self.target = _finite_or_none(target)
        self.tolerance = float(tolerance)
        self.standard_error = _finite_or_none(standard_error)
        self.se_multiplier = float(se_multiplier)

    @property
    def passed(self):
        if self.estimate is None or self.target is None:
            return False
        slack = self.tolerance
        if self.se_multiplier > 0:
            if self.standard_error is None:
                return False
            slack += self.se_multiplier * self.standard_error
        return abs(self.estimate - self.target) <= slack

    def export_json(self):
        return {'name': self.name, 'estimate': self.estimate, 'standard_error': self.standard_error,
                'target': self.target, 'tolerance': self.tolerance, 'se_multiplier': self.se_multiplier,
                'passed': self.passed}

    @classmethod
    def import_json(cls, json_dict):
        return cls(json_dict['name'], json_dict['estimate'], json_dict['target'], json_dict['tolerance'],
                   json_dict['standard_error'], json_dict['se_multiplier'])

    def __repr__(self):
        state = 'pass' if self.passed else 'FAIL'
        return f'MetricRecord({self.name}: {self.estimate} vs {self.target} +- {self.tolerance}, {state})'


class ExperimentReport:
    """
    Outcome of one experiment run.

    Attributes
    ---------
    kind:
        Experiment kind.
    config:
        Materialized configuration echo (a dict).
    metrics:
        List of MetricRecord.
    seed:
        Master seed used.
    runtime_seconds:
        Wall time; the only field allowed to differ between replays.
    version:
        Library version.
    artifacts:
        Paths of written CSV files, relative to the output directory.
    """

    def __init__(self, kind, config, metrics=None, seed=0, runtime_seconds=0.0, version=LIBRARY_VERSION,
                 artifacts=None):
        self.kind = kind
        self.config = config
        self.metrics = list(metrics or [])
        self.seed = int(seed)
        self.runtime_seconds = float(runtime_seconds)
        self.version = version
        self.artifacts = list(artifacts or [])

    @property
    def passed(self):
        return all(m.passed for m in self.metrics)

    @property
    def failed_metrics(self):
        return [m.name for m in self.metrics if not m.passed]

    @property
    def exit_code(self):
        return 0 if self.passed else 1

    def metric(self, name):
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)

    def export_json(self):
        return {'schema_version': REPORT_SCHEMA_VERSION, 'kind': self.kind, 'config': self.config,
                'metrics': [m.export_json() for m in self.metrics], 'seed': self.seed,
                'runtime_seconds': self.runtime_seconds, 'version': self.version,
                'artifacts': [str(a) for a in self.artifacts], 'passed': self.passed}

    def to_json(self):
        return json.dumps(self.export_json(), indent=2, sort_keys=True, allow_nan=False)

    def validate(self):
        try:
            jsonschema.validate(self.export_json(), REPORT_SCHEMA)
        except jsonschema.ValidationError as e:
            raise ReportException(f'Report does not match schema v{REPORT_SCHEMA_VERSION}: {e.message}')
        return self

    def write(self, fn):
        self.validate()
        fn = Path(fn)
        fn.parent.mkdir(parents=True, exist_ok=True)
        with open(fn, 'w', encoding='utf-8') as outfile:
            outfile.write(self.to_json() + '\n')
        log.info(f'Wrote report to {fn}.')
        return fn

    @classmethod
    def import_json(cls, json_dict):
        try:
            jsonschema.validate(json_dict, REPORT_SCHEMA)
        except jsonschema.ValidationError as e:
            raise ReportException(f'Not a v{REPORT_SCHEMA_VERSION} report: {e.message}')
        return cls(json_dict['kind'], json_dict['config'],
                   [MetricRecord.import_json(m) for m in json_dict['metrics']], json_dict['seed'],
                   json_dict['runtime_seconds'], json_dict['version'], json_dict['artifacts'])

    @classmethod
    def init_from_json(cls, fn):
        with open(fn) as json_file:
            return cls.import_json(json.load(json_file))

    def __repr__(self):
        return (f'ExperimentReport(kind={self.kind!r}, metrics={len(self.metrics)}, '
                f'failed={self.failed_metrics})')
