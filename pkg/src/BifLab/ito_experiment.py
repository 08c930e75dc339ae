# ito_experiment.py

import logging

from .base_experiment import BaseExperiment
from .calculus import (MCEstimate, get_test_function, ito_deterministic_residual, ito_pathwise_residual,
                       ito_time_residual, skorohod_estimate, time_test_function)

log = logging.getLogger(__name__)


class ItoExperiment(BaseExperiment):
    """
    Itô formula for a one-dimensional bifBm with 2HK >= 1.

    The heat identity E f(B_t) = f(0) + HK int E f''(B_s) s^(2HK-1) ds is checked by quadrature,
    then the divergence estimator is checked to be centered and the pathwise residual to shrink
    as the grid is refined.
    """

    kind = 'ito'

    def execute(self):
        est = self.estimator
        mp = self.config.multi_params
        p = mp[0]
        t = self.config.time_grid.horizon
        functions = [get_test_function(name) for name in est['test_functions']]

        for tf in functions:
            tf.validate()
            self.add_metric(f'deterministic.{tf.name}', ito_deterministic_residual(p, tf, t, self.quad), 0.0,
                            est['deterministic_tolerance'])
        for name in est['time_functions']:
            tf = time_test_function(name, 1)
            tf.validate()
            self.add_metric(f'time_dependent.{name}', ito_time_residual(mp, tf, t, self.quad), 0.0,
                            est['time_tolerance'])

        ensemble = self.sample()
        for tf in functions:
            self.add_estimate(f'skorohod_mean.{tf.name}', MCEstimate(skorohod_estimate(ensemble, tf)), 0.0)

        def residuals_at(m):
            out = {}
            for tf in functions:
                r = ito_pathwise_residual(ensemble, tf, n=m)
                out[f'residual_{tf.name}'] = r.mean
                out[f'residual_{tf.name}_se'] = r.se
            return out

        labels = {}
        for tf in functions:
            labels[f'residual_{tf.name}'] = f'Pathwise residual {tf.name}'
            labels[f'residual_{tf.name}_se'] = f'Pathwise residual {tf.name} SE'
        sweep = self.new_sweep(est['resolutions'])
        self.follow_estimates(sweep, residuals_at, labels)
        sweep.start()
        if p.regime == 'supercritical':
            for tf in functions:
                col = f'residual_{tf.name}'
                self.add_metric(f'pathwise.{tf.name}.decreasing_violations',
                                sweep.is_decreasing(col, f'{col}_se', est['n_se']), 0.0)
        else:
            log.info('Critical pair: the pathwise residual table is reported without a monotonicity check.')
        self.write_sweep(sweep, 'ito_resolution')
