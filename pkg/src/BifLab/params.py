# params.py

import math
import numpy as np
from qcodes import validators as vals

from .util import DomainError

# 2hk is compared to 1 with this tolerance, so that pairs such as (0.7, 1/1.4) count as critical
CRITICAL_TOL = 1e-12

_unit_interval = vals.Numbers(min_value=0, max_value=1)


def _check(validator, value, name):
    try:
        validator.validate(value, context=name)
    except (TypeError, ValueError) as e:
        raise DomainError(str(e))


class HurstParams:
    """
    Exponent pair (H, K) of a bifractional Brownian motion.

    Attributes
    ---------
    h:
        Hurst-type exponent, 0 < h < 1.
    k:
        Bifractional exponent, 0 < k <= 1. k = 1 is fractional Brownian motion.
    hk:
        The self-similarity index h*k.
    regime:
        'subcritical' (2hk < 1), 'critical' (2hk = 1) or 'supercritical' (2hk > 1).
    """

    def __init__(self, h, k=1.0):
        _check(_unit_interval, h, 'h')
        _check(_unit_interval, k, 'k')
        if not 0 < h < 1:
            raise DomainError(f'h must lie in (0, 1), got {h}.')
        if not 0 < k <= 1:
            raise DomainError(f'k must lie in (0, 1], got {k}.')
        self.h = float(h)
        self.k = float(k)
        self.hk = self.h * self.k

        two_hk = 2 * self.h * self.k
        if abs(two_hk - 1) <= CRITICAL_TOL:
            self.regime = 'critical'
        elif two_hk < 1:
            self.regime = 'subcritical'
        else:
            self.regime = 'supercritical'

    @classmethod
    def critical(cls, h):
        """ The pair (h, 1/(2h)); requires h >= 1/2. """
        if h < 0.5:
            raise DomainError(f'No critical pair exists for h = {h} < 1/2.')
        return cls(h, 1 / (2 * h))

    @property
    def two_hk(self):
        return 1.0 if self.regime == 'critical' else 2 * self.hk

    def require_regime(self, *allowed):
        if self.regime not in allowed:
            raise DomainError(f'Operation needs regime in {allowed}, but {self!r} is {self.regime}.')

    def export_json(self):
        return {'h': self.h, 'k': self.k}

    @classmethod
    def import_json(cls, json_dict):
        return cls(json_dict['h'], json_dict['k'])

    def __eq__(self, other):
        return isinstance(other, HurstParams) and (self.h, self.k) == (other.h, other.k)

    def __hash__(self):
        return hash((self.h, self.k))

    def __str__(self):
        return f'bifBm exponents H={self.h:g}, K={self.k:g} (HK={self.hk:g}, {self.regime})'

    def __repr__(self):
        return f'HurstParams({self.h!r}, {self.k!r})'


class MultiParams:
    """
    Exponents of a d-dimensional bifBm with independent components.

    Attributes
    ---------
    params:
        Tuple of HurstParams, one per component.
    dims:
        Number of components d.
    hk_star:
        max_i H_i K_i.
    """

    def __init__(self, params):
        if isinstance(params, HurstParams):
            params = [params]
        params = tuple(params)
        if len(params) < 1:
            raise DomainError('MultiParams needs at least one component.')
        for p in params:
            if not isinstance(p, HurstParams):
                raise DomainError(f'Expected HurstParams, got {type(p).__name__}.')
        self.params = params
        self.dims = len(params)
        self.hk = np.array([p.hk for p in params])
        self.hk_star = float(self.hk.max())

    @classmethod
    def from_lists(cls, h, k):
        h = list(np.atleast_1d(h))
        k = list(np.atleast_1d(k))
        if len(k) == 1 and len(h) > 1:
            k = k * len(h)
        if len(h) != len(k):
            raise DomainError(f'h and k lists differ in length ({len(h)} vs {len(k)}).')
        return cls([HurstParams(a, b) for a, b in zip(h, k)])

    def __getitem__(self, i):
        return self.params[i]

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return self.dims

    def export_json(self):
        return {'h': [p.h for p in self.params], 'k': [p.k for p in self.params]}

    @classmethod
    def import_json(cls, json_dict):
        return cls.from_lists(json_dict['h'], json_dict['k'])

    def __repr__(self):
        return f'MultiParams({list(self.params)!r})'


class TimeGrid:
    """
    Ordered evaluation times starting at the origin.

    Attributes
    ---------
    times:
        Read-only array t_0 = 0 < t_1 < ... < t_n.
    horizon:
        The last time t_n.
    n_steps:
        Number of cells n.
    """

    def __init__(self, times):
        times = np.array(times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise DomainError('A time grid needs at least two times.')
        if times[0] != 0.0:
            raise DomainError(f'Time grids start at 0, got {times[0]}.')
        if np.any(np.diff(times) <= 0):
            raise DomainError('Time grid must be strictly increasing.')
        times.flags.writeable = False
        self.times = times
        self.horizon = float(times[-1])
        self.n_steps = times.size - 1

    @classmethod
    def uniform(cls, t, n):
        """ The grid t_j = j t / n, j = 0..n. """
        if t <= 0:
            raise DomainError(f'Horizon must be positive, got {t}.')
        if int(n) != n or n < 1:
            raise DomainError(f'Number of steps must be a positive integer, got {n}.')
        n = int(n)
        times = t * np.arange(n + 1) / n
        times[-1] = t
        return cls(times)

    @property
    def positive_times(self):
        return self.times[1:]

    @property
    def is_uniform(self):
        dt = np.diff(self.times)
        return bool(np.allclose(dt, dt[0], rtol=1e-12, atol=0))

    def coarsen(self, stride):
        """ Every stride-th time; the horizon must stay on the grid. """
        if self.n_steps % stride != 0:
            raise DomainError(f'Stride {stride} does not divide {self.n_steps} steps.')
        return TimeGrid(self.times[::stride])

    def scaled(self, c):
        return TimeGrid(c * self.times)

    def export_json(self):
        if self.is_uniform:
            return {'t': self.horizon, 'n': self.n_steps}
        return {'times': self.times.tolist()}

    @classmethod
    def import_json(cls, json_dict):
        if 'times' in json_dict:
            return cls(json_dict['times'])
        return cls.uniform(json_dict['t'], json_dict['n'])

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)

    def __repr__(self):
        return f'TimeGrid(horizon={self.horizon:g}, n_steps={self.n_steps})'


class QuadratureSpec:
    """ Tolerances for adaptive quadrature, plus the Gauss-Hermite order used for Gaussian expectations. """

    def __init__(self, epsabs=1e-10, epsrel=1e-8, limit=200, gauss_points=80):
        if epsabs < 0 or epsrel < 0:
            raise DomainError('Quadrature tolerances must be nonnegative.')
        self.epsabs = float(epsabs)
        self.epsrel = float(epsrel)
        self.limit = int(limit)
        self.gauss_points = int(gauss_points)

    def kwargs(self):
        return {'epsabs': self.epsabs, 'epsrel': self.epsrel, 'limit': self.limit}

    def export_json(self):
        return {'epsabs': self.epsabs, 'epsrel': self.epsrel, 'limit': self.limit,
                'gauss_points': self.gauss_points}

    def __repr__(self):
        return (f'QuadratureSpec(epsabs={self.epsabs:g}, epsrel={self.epsrel:g}, '
                f'limit={self.limit}, gauss_points={self.gauss_points})')


def power_weights(grid, alpha):
    """
    Product-trapezoid weights W_j with sum_j W_j g(t_j) ~ int_0^T g(s) s^(alpha-1) ds.

    g is interpolated linearly on every cell and the weight s^(alpha-1) is integrated exactly,
    so the first cell [0, t_1] is closed form and g = 1 is integrated exactly.
    """

    if alpha <= 0:
        raise DomainError(f'Weight exponent must be positive, got {alpha}.')
    t = grid.times
    a, b = t[:-1], t[1:]
    dt = b - a
    pa, pb = a ** alpha, b ** alpha
    qa, qb = a ** (alpha + 1), b ** (alpha + 1)
    mass = (pb - pa) / alpha
    first = (qb - qa) / (alpha + 1)
    right = (first - a * mass) / dt
    left = mass - right
    w = np.zeros(t.size)
    w[:-1] += left
    w[1:] += right
    return w


def critical_trace_constants(p):
    """
    Constants of the critical-regime trace term: (1/2 - 2^-K) from the correction and 2^-K from the
    limit of the Taylor remainder. They add up to HK = 1/2.
    """

    p.require_regime('critical')
    c_correction = 0.5 - 2.0 ** (-p.k)
    c_remainder = 2.0 ** (-p.k)
    assert math.isclose(c_correction + c_remainder, p.hk, rel_tol=1e-12)
    return c_correction, c_remainder


def gamma_exponent(mp, theta):
    """ gamma = (2 - d)/2 + theta + (d - 2) hk_star - sum_i H_iK_i; a potential spec is admissible iff gamma > 0. """
    d = mp.dims
    return (2 - d) / 2 + theta + (d - 2) * mp.hk_star - float(np.sum(mp.hk))
