# qv_experiment.py

import logging

import numpy as np

from .base_experiment import BaseExperiment
from .calculus import MCEstimate, at_resolution, expected_qv, qv_l2_error, qv_limit, qv_second_moment, \
    quadratic_variation
from .covariance import h_fn, scaled_h

log = logging.getLogger(__name__)


class QVExperiment(BaseExperiment):
    """
    Quadratic variation V_t^n of a one-dimensional bifBm with 2HK >= 1.

    Exact mean, second moment and L2 error against the limit are compared with Monte Carlo on one
    ensemble observed at every configured resolution.
    """

    kind = 'qv'

    def execute(self):
        est = self.estimator
        p = self.config.multi_params[0]
        grid = self.config.time_grid
        t, n = grid.horizon, grid.n_steps
        limit = qv_limit(p, t)

        mean_variogram = expected_qv(p, t, n, 'variogram')
        mean_h = expected_qv(p, t, n, 'h_sum')
        self.add_metric('exact_mean.route_agreement', mean_h, mean_variogram, 1e-10 * abs(mean_variogram))

        if p.regime == 'critical':
            self.add_metric('h_lemma.critical_scaled_h', scaled_h(p, 1e4), (1 - 2 * p.h) / 4, 1e-3)
        else:
            self.add_metric('h_lemma.supercritical_decay', abs(h_fn(p, 1e6)), 0.0, 1e-6)

        ensemble = self.sample()
        v = MCEstimate(quadratic_variation(ensemble.dimension(0)))
        self.add_estimate('mc_mean.vs_exact', v, mean_variogram)
        if limit > 0:
            self.add_metric('mc_mean.vs_limit', v.mean, limit, est['relative_tolerance'] * limit)
        self.add_estimate('mc_second_moment.vs_exact', MCEstimate(v.values ** 2), qv_second_moment(p, t, n))

        def l2_at(m):
            qv = quadratic_variation(at_resolution(ensemble, m).dimension(0))
            sq = MCEstimate((qv - limit) ** 2)
            return {'mc_l2': sq.mean, 'mc_l2_se': sq.se, 'exact_l2': qv_l2_error(p, t, m, limit),
                    'exact_mean': expected_qv(p, t, m)}

        sweep = self.new_sweep(est['resolutions'])
        self.follow_estimates(sweep, l2_at, {'mc_l2': 'MC L2 error', 'mc_l2_se': 'MC L2 error SE',
                                             'exact_l2': 'Exact L2 error', 'exact_mean': 'Exact mean'})
        df = sweep.start()
        self.add_metric('l2_error.mc_decreasing_violations', sweep.is_decreasing('mc_l2', 'mc_l2_se', est['n_se']),
                        0.0)
        self.add_metric('l2_error.exact_decreasing_violations', sweep.is_decreasing('exact_l2'), 0.0)
        rel = np.abs(df['mc_l2'] - df['exact_l2']) <= est['n_se'] * df['mc_l2_se'] + 1e-12
        # one resolution may fall outside the band
        self.add_metric('l2_error.mc_vs_exact_fraction', float(np.mean(rel)), 1.0, 1.0 / len(df))
        self.write_sweep(sweep, 'qv_resolution')
