# config.py
"""
Experiment configuration: one JSON document per run, validated with qcodes validators.
"""

import copy
import json
import logging

from qcodes import validators as vals

from .calculus import epsilon_floor
from .params import MultiParams, TimeGrid, QuadratureSpec, gamma_exponent
from .util import ConfigException, DomainError

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

_RESOLUTIONS = [64, 128, 256, 512, 1024]

KINDS = {
    'simulate': {
        'description': 'Exact sampling: factorization quality, empirical covariance, self-similarity and '
                       'increment normality.',
        'params': {'h': [0.5], 'k': [1.0]},
        'grid': {'t': 1.0, 'n': 16},
        'monte_carlo': {'n_paths': 20000, 'seed': 1},
        'estimator': {'n_se': 4.0, 'coverage': 0.99, 'scale': 2.0, 'jitter_tolerance': 1e-8,
                      'reconstruction_tolerance': 1e-10, 'normality_level': 0.01},
    },
    'qv': {
        'description': 'Quadratic variation: exact mean and L2 error, Monte Carlo convergence over dyadic n.',
        'params': {'h': [0.8], 'k': [0.625]},
        'grid': {'t': 1.0, 'n': 4096},
        'monte_carlo': {'n_paths': 5000, 'seed': 7},
        'estimator': {'resolutions': [64, 128, 256, 512, 1024, 2048, 4096], 'relative_tolerance': 0.01,
                      'n_se': 3.0},
    },
    'ito': {
        'description': 'Itô formula: deterministic heat identity, divergence estimator centering and '
                       'pathwise residual over dyadic n.',
        'params': {'h': [0.6], 'k': [0.9]},
        'grid': {'t': 1.0, 'n': 1024},
        'monte_carlo': {'n_paths': 2000, 'seed': 11},
        'estimator': {'test_functions': ['x2', 'cos', 'bump'], 'time_functions': ['t', 'sum_x2', 'cos_prod', 't_x2'],
                      'resolutions': _RESOLUTIONS, 'deterministic_tolerance': 1e-8, 'time_tolerance': 1e-6,
                      'n_se': 3.0},
    },
    'tanaka': {
        'description': 'Weighted local time and the mollified Tanaka formula: exact moments, occupation '
                       'identity, residual over dyadic n and the eps sweep.',
        'params': {'h': [0.6], 'k': [0.9]},
        'grid': {'t': 1.0, 'n': 1024},
        'monte_carlo': {'n_paths': 2000, 'seed': 13},
        'estimator': {'levels': [0.0], 'eps': [0.2, 0.1, 0.05], 'resolutions': _RESOLUTIONS,
                      'schedule_c': 1.0, 'schedule_kappa': None, 'occupation_paths': 20, 'bump_tolerance': 0.02,
                      'n_se': 3.0},
    },
    'chaos': {
        'description': 'Local time chaos: exact chaos norms, truncated and extrapolated second moments, '
                       'Watanabe partial norms and the tail-slope threshold check.',
        'params': {'h': [0.6], 'k': [0.9]},
        'grid': {'t': 1.0, 'n': 1024},
        'monte_carlo': {'n_paths': 2000, 'seed': 17},
        'estimator': {'truncation': 30, 'tail_order': 40, 'fit_range': [10, 40], 'alphas': [-1.0, -0.5, 0.0],
                      'theta': None, 'mc_eps': 0.01, 'moment_tolerance': 0.05, 'threshold_tolerance': 0.3,
                      'n_se': 3.0},
    },
    'potential': {
        'description': 'Newtonian potentials: harmonicity, mollified Laplace identity, derivative and '
                       'envelope checks, multidimensional Itô and the mollified Tanaka harness.',
        'params': {'h': [0.54, 0.54], 'k': [1.0, 1.0]},
        'grid': {'t': 1.0, 'n': 1024},
        'monte_carlo': {'n_paths': 1000, 'seed': 23},
        'estimator': {'theta': 1.5, 'x': [0.3, -0.2], 'eps': 0.5, 'resolutions': [64, 256, 1024],
                      'envelope_samples': 1000, 'time_functions': ['sum_x2', 'cos_prod', 't_x2'],
                      'laplace_eps': 0.1, 'laplace_tolerance': 1e-3, 'derivative_tolerance': 1e-5,
                      'harmonic_tolerance': 1e-6, 'ito_tolerance': 1e-6, 'residual_tolerance': 1e-2,
                      'n_se': 3.0},
    },
}

DEFAULT_OUTPUT = {'dir': 'bifbm_out', 'csv': False, 'database': None}

REQUIRED_FIELDS = ['schema_version', 'kind', 'params.h', 'params.k']

_SECTIONS = ('params', 'grid', 'monte_carlo', 'estimator', 'output')


def tanaka_schedule(est, n):
    """ The (eps, n) pairs a tanaka run evaluates: the largest eps over the resolution sweep, every eps at n. """
    eps = list(est['eps'])
    return [(eps[0], r) for r in est.get('resolutions', [])] + [(e, n) for e in eps]


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for key, value in (given or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def list_experiments():
    """ Stable machine-readable listing of the experiment kinds. """
    return json.dumps({'schema_version': SCHEMA_VERSION,
                       'kinds': [{'kind': k, 'description': v['description']} for k, v in KINDS.items()]},
                      indent=2, sort_keys=True)


def describe(kind):
    """ Required fields and defaults of one experiment kind, as JSON text. """
    if kind not in KINDS:
        raise ConfigException(f'Unknown experiment kind "{kind}"; known kinds: {sorted(KINDS)}.')
    spec = KINDS[kind]
    return json.dumps({'kind': kind, 'description': spec['description'], 'required': REQUIRED_FIELDS,
                       'defaults': {s: spec.get(s, DEFAULT_OUTPUT if s == 'output' else None) for s in _SECTIONS}},
                      indent=2, sort_keys=True)


class ExperimentConfig:
    """
    Configuration of one verification run.

    Attributes
    ---------
    kind:
        One of the KINDS.
    params:
        {'h': [...], 'k': [...]}, one entry per dimension.
    grid:
        {'t': horizon, 'n': steps}.
    monte_carlo:
        {'n_paths': ..., 'seed': ...}.
    estimator:
        Kind-specific settings (eps schedule, truncation, resolutions, ...).
    output:
        {'dir': ..., 'csv': bool, 'database': path or None}.
    """

    def __init__(self, kind, params=None, grid=None, monte_carlo=None, estimator=None, output=None,
                 quadrature=None, schema_version=SCHEMA_VERSION):
        self.schema_version = schema_version
        self.kind = kind
        self.params = params or {}
        self.grid = grid or {}
        self.monte_carlo = monte_carlo or {}
        self.estimator = estimator or {}
        self.output = output or {}
        self.quadrature = quadrature or {}

    @classmethod
    def init_from_json(cls, fn):
        """ Loads a configuration file. """
        try:
            with open(fn) as json_file:
                data = json.load(json_file)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigException(f'Could not read configuration {fn}: {e}')
        return cls.import_json(data)

    @classmethod
    def import_json(cls, json_dict):
        if not isinstance(json_dict, dict):
            raise ConfigException('A configuration must be a JSON object.')
        unknown = set(json_dict) - {'schema_version', 'kind', 'quadrature', *_SECTIONS}
        if unknown:
            raise ConfigException([f'Unknown top-level field "{u}".' for u in sorted(unknown)])
        if 'kind' not in json_dict:
            raise ConfigException('Missing required field "kind".')
        return cls(json_dict['kind'], json_dict.get('params'), json_dict.get('grid'), json_dict.get('monte_carlo'),
                   json_dict.get('estimator'), json_dict.get('output'), json_dict.get('quadrature'),
                   json_dict.get('schema_version', SCHEMA_VERSION))

    def export_json(self, fn=None):
        json_dict = {'schema_version': self.schema_version, 'kind': self.kind, 'params': self.params,
                     'grid': self.grid, 'monte_carlo': self.monte_carlo, 'estimator': self.estimator,
                     'output': self.output, 'quadrature': self.quadrature}
        if fn is not None:
            with open(fn, 'w') as outfile:
                json.dump(json_dict, outfile, indent=2, sort_keys=True)
        return json_dict

    def materialize(self):
        """ A copy with every default filled in, so the report echo is self-contained. """
        if self.kind not in KINDS:
            raise ConfigException(f'Unknown experiment kind "{self.kind}"; known kinds: {sorted(KINDS)}.')
        spec = KINDS[self.kind]
        return ExperimentConfig(self.kind,
                                copy.deepcopy(self.params),
                                _merge(spec['grid'], self.grid), _merge(spec['monte_carlo'], self.monte_carlo),
                                _merge(spec['estimator'], self.estimator), _merge(DEFAULT_OUTPUT, self.output),
                                _merge(QuadratureSpec().export_json(), self.quadrature), self.schema_version)

    def with_overrides(self, seed=None, out=None):
        """ Applies command-line overrides of the seed and output directory. """
        cfg = ExperimentConfig.import_json(copy.deepcopy(self.export_json()))
        if seed is not None:
            cfg.monte_carlo['seed'] = int(seed)
        if out is not None:
            cfg.output['dir'] = str(out)
        return cfg

    # Typed views

    @property
    def multi_params(self):
        return MultiParams.from_lists(self.params['h'], self.params['k'])

    @property
    def time_grid(self):
        return TimeGrid.uniform(self.grid['t'], self.grid['n'])

    @property
    def quad(self):
        return QuadratureSpec(**self.quadrature)

    @property
    def n_paths(self):
        return int(self.monte_carlo['n_paths'])

    @property
    def seed(self):
        return int(self.monte_carlo['seed'])

    def validate(self):
        """
        Checks every constraint and raises ConfigException listing all violations.

        Returns
        ---------
        self, for chaining.
        """

        violations = []

        def check(validator, value, name):
            try:
                validator.validate(value, context=name)
                return True
            except (TypeError, ValueError) as e:
                # element validators of Lists drop the context
                violations.append(f'{name}: {e}')
                return False

        check(vals.Enum(SCHEMA_VERSION), self.schema_version, 'schema_version')
        if not check(vals.Enum(*KINDS), self.kind, 'kind'):
            raise ConfigException(violations)

        h, k = self.params.get('h'), self.params.get('k')
        mp = None
        if not self.params:
            violations.append('Missing required field "params".')
        h_ok = check(vals.Lists(vals.Numbers(0, 1)), h, 'params.h')
        k_ok = check(vals.Lists(vals.Numbers(0, 1)), k, 'params.k')
        if h_ok and k_ok:
            try:
                mp = MultiParams.from_lists(h, k)
            except DomainError as e:
                violations.append(f'params: {e}')

        t_ok = check(vals.Numbers(min_value=0), self.grid.get('t'), 'grid.t')
        n_ok = check(vals.Ints(1), self.grid.get('n'), 'grid.n')
        grid_ok = t_ok and n_ok
        if grid_ok and not self.grid['t'] > 0:
            violations.append('grid.t must be positive.')
            grid_ok = False
        check(vals.Ints(1), self.monte_carlo.get('n_paths'), 'monte_carlo.n_paths')
        check(vals.Ints(0, 2 ** 64 - 1), self.monte_carlo.get('seed'), 'monte_carlo.seed')
        check(vals.Strings(min_length=1), self.output.get('dir'), 'output.dir')
        check(vals.Bool(), self.output.get('csv'), 'output.csv')
        if self.output.get('database') is not None:
            check(vals.Strings(min_length=1), self.output['database'], 'output.database')

        est = self.estimator
        n = self.grid.get('n') if grid_ok else None
        if 'resolutions' in est and check(vals.Lists(vals.Ints(1)), est['resolutions'], 'estimator.resolutions'):
            if n is not None:
                for r in est['resolutions']:
                    if r > n or n % r != 0:
                        violations.append(f'estimator.resolutions: {r} does not divide grid.n = {n}.')
            if list(est['resolutions']) != sorted(est['resolutions']):
                violations.append('estimator.resolutions must be increasing.')

        if mp is not None:
            self._check_kind(mp, est, n, check, violations)

        if violations:
            raise ConfigException(violations)
        return self

    def _check_kind(self, mp, est, n, check, violations):
        kind = self.kind
        if kind in ('qv', 'ito', 'tanaka') and mp.dims != 1:
            violations.append(f'{kind} experiments are one-dimensional, got {mp.dims} components.')
        if kind in ('qv', 'ito', 'tanaka', 'chaos'):
            for p in mp:
                if p.regime == 'subcritical':
                    violations.append(f'{kind} needs 2HK >= 1, got 2HK = {2 * p.hk:g} for {p!r}.')

        if kind == 'tanaka':
            check(vals.Lists(vals.Numbers()), est.get('levels'), 'estimator.levels')
            c_ok = check(vals.Numbers(min_value=0), est.get('schedule_c'), 'estimator.schedule_c')
            if c_ok and not est['schedule_c'] > 0:
                violations.append('estimator.schedule_c must be positive.')
                c_ok = False
            kappa = est.get('schedule_kappa')
            kappa_ok = kappa is None or check(vals.Numbers(min_value=0), kappa, 'estimator.schedule_kappa')
            if check(vals.Lists(vals.Numbers(min_value=0)), est.get('eps'), 'estimator.eps'):
                eps_ok = bool(est['eps']) and all(e > 0 for e in est['eps'])
                if not eps_ok:
                    violations.append('estimator.eps entries must be positive.')
                if list(est['eps']) != sorted(est['eps'], reverse=True):
                    violations.append('estimator.eps must be decreasing.')
                if eps_ok and c_ok and kappa_ok and n is not None:
                    p = mp[0]
                    try:
                        vals.Lists(vals.Ints(1)).validate(est.get('resolutions', []))
                        schedule = tanaka_schedule(est, n)
                    except (TypeError, ValueError):
                        schedule = [(e, n) for e in est['eps']]
                    for e, m in schedule:
                        floor = epsilon_floor(p, m, est['schedule_c'], kappa)
                        if e < floor:
                            violations.append(f'estimator.eps: {e:g} is below the schedule floor {floor:.4g} '
                                              f'at n = {m}.')
            check(vals.Ints(1), est.get('occupation_paths'), 'estimator.occupation_paths')
        elif kind == 'ito':
            check(vals.Lists(vals.Enum('x', 'x2', 'cos', 'bump')), est.get('test_functions'),
                  'estimator.test_functions')
            check(vals.Lists(vals.Enum('t', 'sum_x2', 'cos_prod', 't_x2', 'bump_prod')), est.get('time_functions'),
                  'estimator.time_functions')
        elif kind == 'chaos':
            check(vals.Ints(0, 170), est.get('truncation'), 'estimator.truncation')
            if check(vals.Ints(0, 170), est.get('tail_order'), 'estimator.tail_order'):
                if est['tail_order'] < est.get('truncation', 0):
                    violations.append('estimator.tail_order must be at least the truncation.')
            check(vals.Lists(vals.Numbers()), est.get('alphas'), 'estimator.alphas')
            if check(vals.Numbers(min_value=0), est.get('mc_eps'), 'estimator.mc_eps') and not est['mc_eps'] > 0:
                violations.append('estimator.mc_eps must be positive.')
            if check(vals.Lists(vals.Ints(1)), est.get('fit_range'), 'estimator.fit_range'):
                if len(est['fit_range']) != 2 or est['fit_range'][0] >= est['fit_range'][1]:
                    violations.append('estimator.fit_range must be an increasing pair.')
            if mp.dims >= 2:
                if est.get('theta') is None:
                    violations.append('estimator.theta is required for multidimensional chaos.')
                elif gamma_exponent(mp, est['theta']) <= 0:
                    violations.append(f'gamma = {gamma_exponent(mp, est["theta"]):.4g} must be positive.')
        elif kind == 'potential':
            if mp.dims < 2:
                violations.append('potential experiments need d >= 2.')
            for p in mp:
                if p.regime != 'supercritical':
                    violations.append(f'potential experiments need 2H_iK_i > 1, got {p!r}.')
            if check(vals.Numbers(), est.get('theta'), 'estimator.theta') and mp.dims >= 2:
                gamma = gamma_exponent(mp, est['theta'])
                if gamma <= 0:
                    violations.append(f'gamma = {gamma:.4g} must be positive.')
            if check(vals.Lists(vals.Numbers()), est.get('x'), 'estimator.x') and len(est['x']) != mp.dims:
                violations.append(f'estimator.x must have {mp.dims} entries.')
            if check(vals.Numbers(min_value=0), est.get('eps'), 'estimator.eps') and not est['eps'] > 0:
                violations.append('estimator.eps must be positive.')
            if check(vals.Numbers(min_value=0), est.get('laplace_eps'), 'estimator.laplace_eps') \
                    and not est['laplace_eps'] > 0:
                violations.append('estimator.laplace_eps must be positive.')
            check(vals.Ints(1), est.get('envelope_samples'), 'estimator.envelope_samples')
            check(vals.Lists(vals.Enum('t', 'sum_x2', 'cos_prod', 't_x2', 'bump_prod')), est.get('time_functions'),
                  'estimator.time_functions')

    def __repr__(self):
        return f'ExperimentConfig(kind={self.kind!r}, params={self.params}, grid={self.grid})'
