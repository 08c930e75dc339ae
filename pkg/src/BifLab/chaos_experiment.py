# chaos_experiment.py

import logging

import numpy as np
import pandas as pd

from .base_experiment import BaseExperiment
from .calculus import MCEstimate, local_time_mean, local_time_second_moment, weighted_local_time
from .chaos import WatanabeIndex, beta_order0_mean, local_time_chaos_moment, multi_local_time_chaos_norms, \
    watanabe_partial_norm

log = logging.getLogger(__name__)


class ChaosExperiment(BaseExperiment):
    """
    Chaos norms of the weighted local time at the origin.

    In one dimension the exact norms a_n are summed (truncated and tail-extrapolated) and compared
    with the closed-form second moment and with Monte Carlo; in d >= 2 the shell norms of the
    theta-weighted local time are used. In both cases the tail slope of a_n locates the Watanabe
    threshold.
    """

    kind = 'chaos'

    def execute(self):
        est = self.estimator
        mp = self.config.multi_params
        t = self.config.time_grid.horizon
        truncation, tail_order = est['truncation'], est['tail_order']

        if mp.dims == 1:
            series = local_time_chaos_moment(mp[0], t, 0.0, tail_order, quad=self.quad)
            self._check_one_dimensional(series, truncation)
        else:
            series = multi_local_time_chaos_norms(mp, est['theta'], t, tail_order, quad=self.quad)
            mean = beta_order0_mean(mp, est['theta'], np.zeros(mp.dims), 0.0, t, self.quad)
            self.add_metric('order0.vs_squared_mean', series.terms[0], mean ** 2, 1e-8 * mean ** 2)

        self.add_metric('odd_orders.max_abs', float(np.max(np.abs(series.terms[1::2]), initial=0.0)), 0.0)

        fit = series.tail_fit(est['fit_range'])
        threshold = WatanabeIndex(0.0, mp).threshold
        log.info(f'{fit!r}; threshold {threshold:.4f}')
        self.add_metric('tail.implied_boundary', fit.implied_boundary, threshold, est['threshold_tolerance'])

        alphas = sorted(est['alphas'])
        norms = {a: watanabe_partial_norm(WatanabeIndex(a, mp), series.terms) for a in alphas}
        ordered = all(np.all(norms[lo] <= norms[hi] * (1 + 1e-12)) for lo, hi in zip(alphas[:-1], alphas[1:]))
        self.add_flag('watanabe.monotone_in_alpha', ordered)
        self.add_flag('watanabe.monotone_in_order', all(np.all(np.diff(v) >= 0) for v in norms.values()))

        table = pd.DataFrame({'order': series.orders, 'a_n': series.terms,
                              **{f'S_alpha={a:g}': v for a, v in norms.items()}})
        self.write_csv(table, 'chaos_norms.csv', index=False)
        if mp.dims == 1:
            s_grid = np.linspace(t / 64, t, 64)
            self.write_csv(series.coefficient_table(s_grid, range(min(truncation, 8) + 1)),
                           'chaos_coefficients.csv', index=False)

    def _check_one_dimensional(self, series, truncation):
        est = self.estimator
        p = self.config.multi_params[0]
        t = self.config.time_grid.horizon

        mean = local_time_mean(p, t, 0.0, 0.0, self.quad)
        self.add_metric('order0.vs_squared_mean', series.terms[0], mean ** 2, 1e-8 * mean ** 2)

        exact = local_time_second_moment(p, t, 0.0, 0.0, self.quad)
        truncated = float(series.partial_sums[truncation])
        log.info(f'Second moment {exact:.6g}; chaos sum to N = {truncation}: {truncated:.6g} '
                 f'(ratio {truncated / exact:.4f}).')
        self.add_flag('truncated.below_exact', truncated <= exact * (1 + 1e-8))
        extrapolated = series.extrapolated_total(est['fit_range'])
        self.add_metric('extrapolated.vs_exact', extrapolated, exact, est['moment_tolerance'] * exact)

        eps = est['mc_eps']
        ensemble = self.sample()
        lt = weighted_local_time(ensemble, 0.0, eps)
        second = MCEstimate(lt.values ** 2)
        exact_eps = local_time_second_moment(p, t, 0.0, eps, self.quad)
        self.add_estimate('mc.vs_mollified_exact', second, exact_eps)
        self.add_metric('truncated.vs_mc', second.mean, truncated, est['moment_tolerance'] * truncated, second.se,
                        est['n_se'])
        # the chaos norms are unmollified; the exact mollification gap is added to the tolerance
        self.add_metric('extrapolated.vs_mc', second.mean, extrapolated,
                        est['moment_tolerance'] * exact + abs(exact - exact_eps), second.se, est['n_se'])
