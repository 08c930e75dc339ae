# resolution_sweep.py

import time
import json
import logging
from functools import partial

import numpy as np
import pandas as pd
from qcodes import validators as vals
from qcodes.dataset.measurements import Measurement
from qcodes import ManualParameter

from .util import ParameterException, safe_get, write_frame

log = logging.getLogger(__name__)


class ResolutionSweep:
    """
    Steps the grid resolution n through a list of setpoints and measures followed parameters at each.

    The independent parameter is a qcodes ManualParameter 'n_steps'. Followed parameters are qcodes
    Parameters whose get_cmd computes an estimate at the current resolution; they are read with
    safe_get. Rows are kept in memory and, when save_data is set, written to the active qcodes
    database through a Measurement datasaver.

    Attributes
    ---------
    set_param:
        ManualParameter 'n_steps' holding the current resolution.
    setpoints:
        Resolutions to visit, in order.
    save_data:
        Flag used to determine if the data should be saved to the database.
    suppress_output:
        Silences progress messages.
    meas:
        qcodes Measurement, created by _create_measurement.
    dataset:
        Dictionary describing the saved dataset (db path, run id), if any.
    is_running:
        Flag to determine whether or not the sweep is currently running.
    rows:
        Collected data, one dict per setpoint.

    Methods
    ---------
    follow_param(*p)
        Adds qcodes parameters to be measured at each resolution.
    remove_param(*p)
        Removes parameters that have been assigned to be tracked.
    start()
        Runs through all setpoints and returns the collected table.
    to_frame()
        Collected data as a pandas DataFrame indexed by n_steps.
    is_decreasing(column, se_column=None, n_se=3.0)
        Checks that a column decreases along the sweep within noise.
    export_json(fn=None)
        Saves the sweep setup as a JSON dictionary.
    """

    def __init__(self, setpoints, save_data=False, complete_func=None, suppress_output=False):
        setpoints = [int(n) for n in setpoints]
        if len(setpoints) == 0:
            raise ParameterException('A resolution sweep needs at least one setpoint.', set=True)

        self.set_param = ManualParameter('n_steps', label='Grid resolution', vals=vals.Ints(1))
        for n in setpoints:
            self.set_param.validate(n)
        self.setpoints = setpoints
        self._params = []
        self.save_data = save_data
        self.suppress_output = suppress_output
        self.meas = None
        self.dataset = None
        self.is_running = False
        self.rows = []
        self.t0 = 0

        # Set the function to call when we are finished
        self.complete_func = complete_func if complete_func is not None else self.no_change

    def follow_param(self, *p):
        """
        Saves parameters to be measured at each resolution.

        The parameters must be followed before '_create_measurement()' is called.
        """

        if self.is_running:
            self.print_msg('Cannot update the parameter list while the sweep is running.')
            return

        for param in p:
            if isinstance(param, list):
                for l in param:
                    if l not in self._params:
                        self._params.append(l)
            elif param not in self._params:
                self._params.append(param)

    def remove_param(self, *p):
        if self.is_running:
            self.print_msg('Cannot update the parameter list while the sweep is running.')
            return

        for param in p:
            if isinstance(param, list):
                for l in param:
                    self._params.remove(l)
            else:
                self._params.remove(param)

    def _create_measurement(self):
        """
        Creates a qcodes Measurement with n_steps as setpoint of every followed parameter.

        Returns
        ---------
        The measurement object with the parameters to be followed.
        """

        self.meas = Measurement()
        self.meas.register_parameter(self.set_param)
        for p in self._params:
            self.meas.register_parameter(p, setpoints=(self.set_param,))
        return self.meas

    def update_values(self):
        """ Measures every followed parameter at the current resolution. """
        data = [(self.set_param, self.set_param.get())]
        for p in self._params:
            data.append((p, safe_get(p)))
        return data

    def _step(self, n, datasaver=None):
        self.set_param.set(n)
        t = time.monotonic()
        data = self.update_values()
        if datasaver is not None:
            datasaver.add_result(*data)
        row = {p.name: float(v) for p, v in data}
        self.rows.append(row)
        self.print_msg(f'n = {n}: ' + ', '.join(f'{k} = {v:.6g}' for k, v in row.items() if k != 'n_steps')
                       + f' ({time.monotonic() - t:.2f} s)')

    def start(self):
        """
        Runs through all setpoints.

        Returns
        ---------
        DataFrame of the measured values, indexed by n_steps.
        """

        if self.is_running:
            self.print_msg("We are already running, can't start while running.")
            return None

        self.rows = []
        self.is_running = True
        self.t0 = time.monotonic()
        try:
            if self.save_data:
                if self.meas is None:
                    self._create_measurement()
                with self.meas.run() as datasaver:
                    ds = datasaver.dataset
                    self.dataset = {'db': ds.path_to_db, 'run id': ds.run_id,
                                    'exp name': ds.exp_name, 'sample name': ds.sample_name}
                    for n in self.setpoints:
                        self._step(n, datasaver)
            else:
                for n in self.setpoints:
                    self._step(n)
        except ParameterException as e:
            log.error(f'Resolution sweep stopped: {e}')
            raise
        finally:
            self.is_running = False

        self.complete_func()
        return self.to_frame()

    def to_frame(self):
        if len(self.rows) == 0:
            return pd.DataFrame()
        return pd.DataFrame(self.rows).set_index('n_steps')

    def to_csv(self, fn):
        write_frame(self.to_frame(), fn)

    def is_decreasing(self, column, se_column=None, n_se=3.0):
        """
        Checks that a column is nonincreasing along the sweep, allowing n_se standard errors of slack
        per consecutive pair when se_column is given.

        Returns
        ---------
        Number of violations.
        """

        df = self.to_frame()
        v = df[column].to_numpy()
        se = df[se_column].to_numpy() if se_column is not None else np.zeros_like(v)
        slack = n_se * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
        violations = int(np.count_nonzero(v[1:] > v[:-1] + slack))
        if violations:
            log.warning(f'{column} increases at {violations} of {v.size - 1} refinements.')
        return violations

    def set_complete_func(self, func, *args, **kwargs):
        """ Sets a function to be called whenever the sweep is finished. """
        self.complete_func = partial(func, *args, **kwargs)

    def no_change(self, *args, **kwargs):
        pass

    def print_msg(self, msg):
        if self.suppress_output is False:
            print(msg)

    def export_json(self, fn=None):
        json_dict = {'class': str(self.__class__.__name__), 'module': str(self.__class__.__module__),
                     'setpoints': self.setpoints,
                     'attributes': {'save_data': self.save_data},
                     'follow_params': [p.name for p in self._params]}
        if fn is not None:
            with open(fn, 'w') as outfile:
                json.dump(json_dict, outfile)
        return json_dict

    def __repr__(self):
        return f'ResolutionSweep(setpoints={self.setpoints}, following={[p.name for p in self._params]})'
