# simulate_experiment.py

import logging

from .base_experiment import BaseExperiment
from .calculus import MCEstimate
from .simulator import (covariance_matrix, empirical_covariance_check, factorize, increment_normality,
                        self_similarity_check)

log = logging.getLogger(__name__)


class SimulateExperiment(BaseExperiment):
    """
    Checks the exact sampler: factorization quality of every component's covariance matrix,
    the empirical covariance and terminal variance of the ensemble, increment normality and
    HK-self-similarity.
    """

    kind = 'simulate'

    def execute(self):
        est = self.estimator
        grid = self.config.time_grid
        ensemble = self.sample()

        for i, p in enumerate(ensemble.params):
            tag = f'dim{i}'
            matrix = covariance_matrix(p, grid)
            fac = factorize(matrix)
            self.add_metric(f'{tag}.relative_jitter', fac.relative_jitter, 0.0, est['jitter_tolerance'])
            self.add_metric(f'{tag}.reconstruction_error', fac.reconstruction_error(matrix), 0.0,
                            est['reconstruction_tolerance'])

            fraction, _, _ = empirical_covariance_check(ensemble, i, est['n_se'])
            self.add_metric(f'{tag}.covariance_coverage', fraction, 1.0, 1.0 - est['coverage'])

            terminal = MCEstimate(ensemble.dimension(i)[:, -1] ** 2)
            self.add_estimate(f'{tag}.terminal_variance', terminal, grid.horizon ** (2 * p.hk), n_se=est['n_se'])

            statistic, pvalue = increment_normality(ensemble, i)
            log.info(f'{tag}: increment KS statistic {statistic:.4g}, adjusted p-value {pvalue:.4g}.')
            self.add_metric(f'{tag}.increment_normality_pvalue', pvalue, 1.0, 1.0 - est['normality_level'])

            ss = self_similarity_check(p, est['scale'], grid, self.config.n_paths, self.config.seed, self.threads)
            self.add_metric(f'{tag}.self_similarity_same_seed', ss.max_discrepancy, 0.0, est['n_se'])
            self.add_metric(f'{tag}.self_similarity_law', ss.max_law_discrepancy, 0.0, est['n_se'])

        if self.config.output.get('csv'):
            written = ensemble.to_csv(self.out_dir)
            self.artifacts.extend(fn.name for fn in written)
