# potential_experiment.py

import logging

import numpy as np

from .base_experiment import BaseExperiment
from .calculus import MCEstimate, time_test_function
from .potential import (PotentialSpec, envelope_checks, harmonicity_residual, heat_kernel_d,
                        laplace_identity_residual, mollified_U, mollified_U_quadrature, mollified_multidim_tanaka,
                        multidim_ito_residual, u_bar, u_bar_derivatives)

log = logging.getLogger(__name__)

SPHERE_RADII = (0.5, 1.0, 2.0)
FD_STEP = 1e-6


def _sphere_points(rng, d, radius, n):
    v = rng.standard_normal((n, d))
    return radius * v / np.linalg.norm(v, axis=1, keepdims=True)


class PotentialExperiment(BaseExperiment):
    """
    Newtonian potential identities and the d-dimensional Itô and mollified Tanaka harness for the
    weighted potential Ubar.
    """

    kind = 'potential'

    def execute(self):
        est = self.estimator
        mp = self.config.multi_params
        spec = PotentialSpec(mp, est['theta'], est['x'])
        rng = np.random.default_rng(self.config.seed)
        log.info(f'{spec!r}')

        self.add_flag('spec.derived_bound', spec.derived_bound_holds())
        self._kernel_identities(spec, rng)
        self._derivatives(spec, rng)
        self._envelopes(spec, rng)

        t = self.config.time_grid.horizon
        for name in est['time_functions']:
            tf = time_test_function(name, mp.dims)
            self.add_metric(f'ito.{name}', multidim_ito_residual(mp, tf, t, self.quad), 0.0, est['ito_tolerance'])

        self._tanaka(spec)

    def _kernel_identities(self, spec, rng):
        est = self.estimator
        eps = est['laplace_eps']
        for d in sorted({2, 3, spec.dims}):
            harmonic = max(harmonicity_residual(d, z) for r in SPHERE_RADII for z in _sphere_points(rng, d, r, 8))
            self.add_metric(f'harmonicity.d{d}', harmonic, 0.0, est['harmonic_tolerance'])

            a = spec.scale(0.5) if d == spec.dims else np.ones(d)
            worst = 0.0
            for r in (0.0, 0.5, 1.0, 2.0):
                for w in _sphere_points(rng, d, r * np.sqrt(eps), 4):
                    z = w / a
                    worst = max(worst, laplace_identity_residual(d, a, eps, z) / heat_kernel_d(eps, w))
            self.add_metric(f'laplace_identity.d{d}.relative', worst, 0.0, est['laplace_tolerance'])

            # the quadrature rule is only trusted well away from the singularity
            far = _sphere_points(rng, d, 6 * np.sqrt(eps), 4)
            closed = np.asarray(mollified_U(d, eps, far))
            quad = np.asarray([mollified_U_quadrature(d, eps, w) for w in far])
            self.add_metric(f'mollified_U.d{d}.quadrature_vs_closed',
                            float(np.max(np.abs(quad - closed) / np.abs(closed))), 0.0, 1e-4)

    def _samples(self, spec, rng, n, s_min=0.05):
        """ Times in [s_min, t] and points z = x + s^h q with |q| log-uniform in [0.1, 10]. """
        t = self.config.time_grid.horizon
        s = rng.uniform(s_min * t, t, n)
        direction = _sphere_points(rng, spec.dims, 1.0, n)
        radius = np.exp(rng.uniform(np.log(0.1), np.log(10.0), n))
        z = spec.x + direction * radius[:, None] * s[:, None] ** spec.hk
        return s, z

    def _derivatives(self, spec, rng):
        est = self.estimator
        s, z = self._samples(spec, rng, 20, s_min=0.2)
        for label, eps in (('newtonian', None), ('mollified', est['eps'])):
            ds, grad, _ = u_bar_derivatives(spec, s, z, eps)
            fd_s = (np.asarray(u_bar(spec, s + FD_STEP, z, eps)) - np.asarray(u_bar(spec, s - FD_STEP, z, eps))) \
                / (2 * FD_STEP)
            worst = float(np.max(np.abs(fd_s - ds) / np.maximum(1.0, np.abs(ds))))
            for i in range(spec.dims):
                e = np.zeros(spec.dims)
                e[i] = FD_STEP
                fd = (np.asarray(u_bar(spec, s, z + e, eps)) - np.asarray(u_bar(spec, s, z - e, eps))) / (2 * FD_STEP)
                worst = max(worst, float(np.max(np.abs(fd - grad[:, i]) / np.maximum(1.0, np.abs(grad[:, i])))))
            self.add_metric(f'u_bar.{label}.derivatives_vs_fd', worst, 0.0, est['derivative_tolerance'])

    def _envelopes(self, spec, rng):
        n = self.estimator['envelope_samples']
        s, z = self._samples(spec, rng, 2 * n)
        half = envelope_checks(spec, s[:n], z[:n])
        full = envelope_checks(spec, s, z)
        log.info(f'Envelope constants: {half!r} -> {full!r}')
        self.add_flag('envelope.finite', full.finite)
        for key in ('c_gradient', 'c_time', 'c_value'):
            a, b = getattr(half, key), getattr(full, key)
            self.add_metric(f'envelope.{key}.doubling_change', (b - a) / a if a > 0 else float('inf'), 0.0, 0.2)

    def _tanaka(self, spec):
        est = self.estimator
        eps = est['eps']
        ensemble = self.sample()
        results = {}

        def tanaka_at(m):
            r = mollified_multidim_tanaka(ensemble, spec, eps, m, self.quad)
            results[m] = r
            return {'residual': r.residual.mean, 'residual_se': r.residual.se,
                    'correction': r.correction.mean, 'correction_se': r.correction.se}

        sweep = self.new_sweep(est['resolutions'])
        self.follow_estimates(sweep, tanaka_at, {'residual': 'Tanaka residual', 'residual_se': 'Tanaka residual SE',
                                                 'correction': 'I_2 mean', 'correction_se': 'I_2 SE'})
        sweep.start()
        self.add_metric('tanaka.decreasing_violations', sweep.is_decreasing('residual', 'residual_se', est['n_se']),
                        0.0)
        self.write_sweep(sweep, 'potential_tanaka_resolution')

        finest = results[max(results)]
        self.add_metric('tanaka.boundary', finest.boundary, 0.0, 1e-8)
        self.add_estimate('tanaka.correction_mean', finest.correction, finest.correction_mean)
        scale = MCEstimate(finest.lhs ** 2).mean
        self.add_metric('tanaka.relative_residual', finest.residual.mean / scale if scale > 0 else float('inf'),
                        0.0, est['residual_tolerance'])
