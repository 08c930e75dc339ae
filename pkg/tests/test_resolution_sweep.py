import json

import numpy as np
import pytest
import qcodes as qc
from qcodes import Parameter

from BifLab.resolution_sweep import ResolutionSweep
from BifLab.util import ParameterException, init_database, save_to_csv


def inverse_of(sweep, name='error', power=1.0):
    return Parameter(name, label=f'1/n^{power:g}', get_cmd=lambda: sweep.set_param.get() ** -power,
                     get_parser=float, set_cmd=False)


class TestResolutionSweep:
    def test_rejects_setpoints(self):
        with pytest.raises(ParameterException):
            ResolutionSweep([])
        with pytest.raises(ValueError):
            ResolutionSweep([16, 0])

    def test_start(self):
        sweep = ResolutionSweep([4, 16, 64], suppress_output=True)
        sweep.follow_param(inverse_of(sweep))
        df = sweep.start()
        assert list(df.index) == [4, 16, 64]
        np.testing.assert_allclose(df['error'], [0.25, 1 / 16, 1 / 64])
        assert not sweep.is_running
        assert sweep.dataset is None

    def test_follow_and_remove(self):
        sweep = ResolutionSweep([8], suppress_output=True)
        a, b = inverse_of(sweep, 'a'), inverse_of(sweep, 'b', 2.0)
        sweep.follow_param([a, b], a)
        assert sweep.export_json()['follow_params'] == ['a', 'b']
        sweep.remove_param(a)
        assert list(sweep.start().columns) == ['b']

    def test_is_decreasing(self):
        sweep = ResolutionSweep([4, 8, 16, 32], suppress_output=True)
        values = {4: 1.0, 8: 0.5, 16: 0.6, 32: 0.1}
        sweep.follow_param(Parameter('v', get_cmd=lambda: values[sweep.set_param.get()], set_cmd=False),
                           Parameter('v_se', get_cmd=lambda: 0.05, set_cmd=False))
        sweep.start()
        assert sweep.is_decreasing('v') == 1
        assert sweep.is_decreasing('v', 'v_se', n_se=3.0) == 0

    def test_complete_func(self):
        done = []
        sweep = ResolutionSweep([2, 4], suppress_output=True)
        sweep.set_complete_func(done.append, 'finished')
        sweep.start()
        assert done == ['finished']

    def test_failing_parameter(self):
        def broken():
            raise RuntimeError('no reading')

        sweep = ResolutionSweep([2, 4], suppress_output=True)
        sweep.follow_param(Parameter('broken', get_cmd=broken, set_cmd=False))
        with pytest.raises(ParameterException):
            sweep.start()
        assert not sweep.is_running

    def test_export_json(self, tmp_path):
        sweep = ResolutionSweep([2, 4], save_data=True, suppress_output=True)
        sweep.export_json(tmp_path / 'sweep.json')
        data = json.loads((tmp_path / 'sweep.json').read_text())
        assert data['class'] == 'ResolutionSweep'
        assert data['setpoints'] == [2, 4] and data['attributes'] == {'save_data': True}

    def test_saves_to_database(self, tmp_path):
        init_database(tmp_path / 'sweeps', 'resolution', 'inverse')
        sweep = ResolutionSweep([4, 16], save_data=True, suppress_output=True)
        sweep.follow_param(inverse_of(sweep))
        sweep.start()
        assert sweep.dataset['db'].endswith('sweeps.db')
        ds = qc.load_by_id(sweep.dataset['run id'])
        save_to_csv(ds, tmp_path / 'sweep.csv')
        assert (tmp_path / 'sweep.csv').exists()
        sweep.to_csv(tmp_path / 'table.csv')
        assert (tmp_path / 'table.csv').read_text().splitlines()[0] == 'n_steps,error'
