# tanaka_experiment.py

import logging

import numpy as np
import pandas as pd

from .base_experiment import BaseExperiment
from .calculus import (MCEstimate, local_time_mean, local_time_second_moment, occupation_identity_check,
                       tanaka_epsilon_sweep, tanaka_residual, weighted_local_time)

log = logging.getLogger(__name__)

OCCUPATION_TOLERANCE = 1e-6


def _unit(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _bump(x):
    return np.exp(-0.5 * np.asarray(x) ** 2)


class TanakaExperiment(BaseExperiment):
    """
    Weighted local time and the mollified Tanaka formula for a one-dimensional bifBm with 2HK >= 1.
    """

    kind = 'tanaka'

    def execute(self):
        est = self.estimator
        p = self.config.multi_params[0]
        t = self.config.time_grid.horizon
        eps_list = list(est['eps'])
        eps_min = eps_list[-1]
        c, kappa = est['schedule_c'], est['schedule_kappa']
        ensemble = self.sample()

        for x in est['levels']:
            tag = f'x{x:g}'
            lt = weighted_local_time(ensemble, x, eps_min)
            self.add_estimate(f'local_time.mean.{tag}', lt, local_time_mean(p, t, x, eps_min, self.quad))
            self.add_estimate(f'local_time.second_moment.{tag}', MCEstimate(lt.values ** 2),
                              local_time_second_moment(p, t, x, eps_min, self.quad))
            log.info(f'{tag}: E L = {local_time_mean(p, t, x, 0.0, self.quad):.6g} without mollification.')

        subset = ensemble.head(min(est['occupation_paths'], ensemble.n_paths))
        self.add_metric('occupation.unit.max_relative_error',
                        occupation_identity_check(subset, _unit, eps_min).max_relative_error, 0.0,
                        OCCUPATION_TOLERANCE)
        self.add_metric('occupation.bump.max_relative_error',
                        occupation_identity_check(subset, _bump, eps_min).max_relative_error, 0.0,
                        est['bump_tolerance'])

        eps = eps_list[0]
        for x in est['levels']:
            tag = f'x{x:g}'

            def residual_at(m, x=x):
                r = tanaka_residual(ensemble, x, eps, m, c=c, kappa=kappa).residual
                return {'residual': r.mean, 'residual_se': r.se}

            sweep = self.new_sweep(est['resolutions'])
            self.follow_estimates(sweep, residual_at, {'residual': 'Tanaka residual',
                                                       'residual_se': 'Tanaka residual SE'})
            sweep.start()
            self.add_metric(f'tanaka.{tag}.decreasing_violations',
                            sweep.is_decreasing('residual', 'residual_se', est['n_se']), 0.0)
            self.write_sweep(sweep, f'tanaka_resolution_{tag}')

            estimates, cauchy, gaps = tanaka_epsilon_sweep(ensemble, x, eps_list, c=c, kappa=kappa)
            gap_means = np.array([g.mean for g in gaps])
            self.add_metric(f'eps_sweep.{tag}.lhs_gap_decreasing_violations',
                            int(np.count_nonzero(np.diff(gap_means) > 0)), 0.0)
            rows = [{'eps_coarse': c['eps'][0], 'eps_fine': c['eps'][1],
                     'integral_msd': c['integral'].mean, 'integral_msd_se': c['integral'].se,
                     'local_time_msd': c['local_time'].mean, 'local_time_msd_se': c['local_time'].se}
                    for c in cauchy]
            for e in estimates:
                log.info(f'{e!r}: term means {e.term_means()}')
            self.write_csv(pd.DataFrame(rows), f'tanaka_eps_cauchy_{tag}.csv', index=False)
