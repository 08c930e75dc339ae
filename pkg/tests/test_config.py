import json

import pytest

from BifLab.config import KINDS, ExperimentConfig, describe, list_experiments, tanaka_schedule
from BifLab.util import ConfigException


def make(kind, **sections):
    return ExperimentConfig.import_json({'schema_version': 1, 'kind': kind,
                                         'params': sections.pop('params', KINDS[kind]['params']), **sections})


class TestListing:
    def test_list(self):
        listing = json.loads(list_experiments())
        assert [k['kind'] for k in listing['kinds']] == ['simulate', 'qv', 'ito', 'tanaka', 'chaos', 'potential']
        assert list_experiments() == list_experiments()

    def test_describe(self):
        text = json.loads(describe('chaos'))
        assert text['required'] == ['schema_version', 'kind', 'params.h', 'params.k']
        assert text['defaults']['estimator']['truncation'] == 30
        assert text['defaults']['output'] == {'dir': 'bifbm_out', 'csv': False, 'database': None}

    def test_describe_unknown(self):
        with pytest.raises(ConfigException):
            describe('wavelet')


class TestImport:
    def test_unknown_field(self):
        with pytest.raises(ConfigException) as e:
            ExperimentConfig.import_json({'kind': 'qv', 'paths': 10})
        assert 'Unknown top-level field "paths".' in e.value.violations

    def test_missing_kind(self):
        with pytest.raises(ConfigException):
            ExperimentConfig.import_json({'params': {'h': [0.5], 'k': [1.0]}})

    def test_not_an_object(self):
        with pytest.raises(ConfigException):
            ExperimentConfig.import_json([1, 2])

    def test_unreadable_file(self, tmp_path):
        fn = tmp_path / 'broken.json'
        fn.write_text('{"kind": ')
        with pytest.raises(ConfigException):
            ExperimentConfig.init_from_json(fn)
        with pytest.raises(ConfigException):
            ExperimentConfig.init_from_json(tmp_path / 'missing.json')

    def test_file_round_trip(self, tmp_path):
        cfg = make('tanaka', grid={'t': 2.0, 'n': 64})
        cfg.export_json(tmp_path / 'cfg.json')
        loaded = ExperimentConfig.init_from_json(tmp_path / 'cfg.json')
        assert loaded.export_json() == cfg.export_json()


class TestMaterialize:
    def test_defaults_filled(self):
        cfg = make('qv', monte_carlo={'n_paths': 10}).materialize()
        assert cfg.monte_carlo == {'n_paths': 10, 'seed': 7}
        assert cfg.grid == {'t': 1.0, 'n': 4096}
        assert cfg.output['dir'] == 'bifbm_out'
        assert cfg.quad.epsrel == 1e-8

    def test_nested_override(self):
        cfg = make('chaos', estimator={'truncation': 12}).materialize()
        assert cfg.estimator['truncation'] == 12
        assert cfg.estimator['tail_order'] == 40

    def test_defaults_not_shared(self):
        a = make('ito').materialize()
        a.estimator['resolutions'].append(2048)
        assert make('ito').materialize().estimator['resolutions'][-1] == 1024

    def test_unknown_kind(self):
        with pytest.raises(ConfigException):
            ExperimentConfig('wavelet').materialize()

    def test_overrides(self):
        cfg = make('simulate').with_overrides(seed=2 ** 63, out='elsewhere')
        assert cfg.monte_carlo['seed'] == 2 ** 63
        assert cfg.output['dir'] == 'elsewhere'

    def test_typed_views(self):
        cfg = make('potential').materialize()
        assert cfg.multi_params.dims == 2
        assert cfg.time_grid.n_steps == 1024
        assert cfg.n_paths == 1000 and cfg.seed == 23


class TestValidate:
    @pytest.mark.parametrize('kind', list(KINDS))
    def test_defaults_are_valid(self, kind):
        assert make(kind).materialize().validate()

    def test_collects_every_violation(self):
        cfg = make('qv', params={'h': [1.5], 'k': [-1.0]}, grid={'t': -1.0, 'n': 0},
                   monte_carlo={'n_paths': 0, 'seed': -3}).materialize()
        with pytest.raises(ConfigException) as e:
            cfg.validate()
        text = ' '.join(e.value.violations)
        for field in ('params.h', 'params.k', 'grid.t', 'grid.n', 'monte_carlo.n_paths', 'monte_carlo.seed'):
            assert field in text

    def test_missing_params(self):
        cfg = ExperimentConfig.import_json({'kind': 'simulate'}).materialize()
        with pytest.raises(ConfigException) as e:
            cfg.validate()
        assert 'Missing required field "params".' in e.value.violations

    def test_open_interval(self):
        with pytest.raises(ConfigException):
            make('simulate', params={'h': [1.0], 'k': [0.5]}).materialize().validate()

    def test_subcritical_rejected(self):
        with pytest.raises(ConfigException) as e:
            make('ito', params={'h': [0.3], 'k': [0.9]}).materialize().validate()
        assert any('2HK >= 1' in v for v in e.value.violations)

    def test_resolutions_must_divide(self):
        cfg = make('qv', grid={'t': 1.0, 'n': 100}).materialize()
        with pytest.raises(ConfigException) as e:
            cfg.validate()
        assert any('does not divide' in v for v in e.value.violations)

    def test_eps_schedule(self):
        cfg = make('tanaka', estimator={'eps': [0.01, 0.1]}).materialize()
        with pytest.raises(ConfigException) as e:
            cfg.validate()
        assert 'estimator.eps must be decreasing.' in e.value.violations

    def test_eps_below_schedule_floor(self):
        cfg = make('tanaka', estimator={'eps': [0.1, 0.05, 0.02]}).materialize()
        with pytest.raises(ConfigException) as e:
            cfg.validate()
        floors = [v for v in e.value.violations if 'below the schedule floor' in v]
        assert any(v.startswith('estimator.eps: 0.1 ') and v.endswith('n = 64.') for v in floors)
        assert any(v.startswith('estimator.eps: 0.02 ') and v.endswith('n = 1024.') for v in floors)
        assert len(floors) == 2

    @pytest.mark.parametrize('estimator', [{'schedule_c': 0.5}, {'schedule_kappa': 1.0}])
    def test_schedule_is_configurable(self, estimator):
        make('tanaka', estimator={'eps': [0.1, 0.05, 0.02], **estimator}).materialize().validate()

    def test_schedule_constant_must_be_positive(self):
        with pytest.raises(ConfigException) as e:
            make('tanaka', estimator={'schedule_c': 0.0}).materialize().validate()
        assert 'estimator.schedule_c must be positive.' in e.value.violations

    def test_tanaka_schedule_pairs(self):
        est = {'eps': [0.2, 0.1], 'resolutions': [64, 256]}
        assert tanaka_schedule(est, 1024) == [(0.2, 64), (0.2, 256), (0.2, 1024), (0.1, 1024)]

    def test_multidimensional_chaos_needs_theta(self):
        cfg = make('chaos', params={'h': [0.54, 0.54], 'k': [1.0, 1.0]}).materialize()
        with pytest.raises(ConfigException):
            cfg.validate()
        make('chaos', params={'h': [0.54, 0.54], 'k': [1.0, 1.0]}, estimator={'theta': 1.5}).materialize().validate()

    @pytest.mark.parametrize('estimator', [{'theta': 0.5}, {'x': [0.0]}, {'eps': 0.0}])
    def test_potential_constraints(self, estimator):
        with pytest.raises(ConfigException):
            make('potential', estimator=estimator).materialize().validate()

    def test_potential_needs_two_dimensions(self):
        with pytest.raises(ConfigException):
            make('potential', params={'h': [0.6], 'k': [0.9]}, estimator={'x': [0.0]}).materialize().validate()

    def test_unknown_test_function(self):
        with pytest.raises(ConfigException):
            make('ito', estimator={'test_functions': ['sinh']}).materialize().validate()
