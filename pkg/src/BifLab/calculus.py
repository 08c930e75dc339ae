# calculus.py
"""
One-dimensional stochastic calculus checks for bifBm: quadratic variation, the Itô
formula (deterministic and pathwise routes), the Skorohod integral estimator, the
weighted local time and the mollified Tanaka formula.
"""

import math
import logging
import itertools

import numpy as np
from scipy import integrate

from .covariance import covariance, variogram, h_fn
from .kernels import (gauss_kernel, gauss_hermite_rule, mollifier, mollifier_prime,
                      mollifier_second, gaussian_expectation)
from .params import MultiParams, HurstParams, QuadratureSpec, TimeGrid, power_weights, critical_trace_constants
from .util import DomainError, QuadratureFailure

log = logging.getLogger(__name__)


class TestFunction:
    """
    A C^2 function with its first two derivatives, all vectorized.

    Attributes
    ---------
    name:
        Identifier used in configs and reports.
    f, f_prime, f_second:
        The function and its derivatives.
    """

    __test__ = False

    def __init__(self, name, f, f_prime, f_second):
        self.name = name
        self.f = f
        self.f_prime = f_prime
        self.f_second = f_second

    def validate(self, seed=0, rtol=1e-4, scale=2.0):
        """ Checks the derivative slots by centered finite differences at 10 random points. """
        rng = np.random.default_rng(seed)
        x = rng.uniform(-scale, scale, 10)
        step = 1e-4 * max(1.0, scale)
        fd1 = (self.f(x + step) - self.f(x - step)) / (2 * step)
        fd2 = (self.f_prime(x + step) - self.f_prime(x - step)) / (2 * step)
        for fd, exact, label in ((fd1, self.f_prime(x), 'f_prime'), (fd2, self.f_second(x), 'f_second')):
            tol = rtol * np.maximum(1.0, np.abs(exact))
            if np.any(np.abs(fd - exact) > tol):
                raise DomainError(f'Test function {self.name}: {label} disagrees with finite differences.')
        return True

    def __repr__(self):
        return f'TestFunction({self.name!r})'


class TimeTestFunction:
    """
    A function f(s, x) of time and a d-vector, with d/ds, the gradient and the Hessian diagonal.

    x is an array whose last axis has length d.
    """

    __test__ = False

    def __init__(self, name, dims, f, ds, grad, second):
        self.name = name
        self.dims = dims
        self.f = f
        self.ds = ds
        self.grad = grad
        self.second = second

    def validate(self, seed=0, rtol=1e-4):
        rng = np.random.default_rng(seed)
        s = rng.uniform(0.2, 1.0, 10)
        x = rng.uniform(-1.5, 1.5, (10, self.dims))
        step = 1e-4
        fd_s = (self.f(s + step, x) - self.f(s - step, x)) / (2 * step)
        if np.any(np.abs(fd_s - self.ds(s, x)) > rtol * np.maximum(1.0, np.abs(fd_s))):
            raise DomainError(f'Test function {self.name}: ds disagrees with finite differences.')
        for i in range(self.dims):
            e = np.zeros(self.dims)
            e[i] = step
            fd1 = (self.f(s, x + e) - self.f(s, x - e)) / (2 * step)
            fd2 = (self.grad(s, x + e)[..., i] - self.grad(s, x - e)[..., i]) / (2 * step)
            if np.any(np.abs(fd1 - self.grad(s, x)[..., i]) > rtol * np.maximum(1.0, np.abs(fd1))):
                raise DomainError(f'Test function {self.name}: gradient component {i} is inconsistent.')
            if np.any(np.abs(fd2 - self.second(s, x)[..., i]) > rtol * np.maximum(1.0, np.abs(fd2))):
                raise DomainError(f'Test function {self.name}: second derivative {i} is inconsistent.')
        return True

    def __repr__(self):
        return f'TimeTestFunction({self.name!r}, dims={self.dims})'


def _bump(x):
    return np.exp(-0.5 * x * x)


TEST_FUNCTIONS = {
    'x': TestFunction('x', lambda x: np.asarray(x, dtype=float),
                      lambda x: np.ones_like(np.asarray(x, dtype=float)),
                      lambda x: np.zeros_like(np.asarray(x, dtype=float))),
    'x2': TestFunction('x2', lambda x: np.asarray(x) ** 2, lambda x: 2 * np.asarray(x),
                       lambda x: 2 * np.ones_like(np.asarray(x, dtype=float))),
    'cos': TestFunction('cos', np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)),
    'bump': TestFunction('bump', _bump, lambda x: -x * _bump(x), lambda x: (x * x - 1) * _bump(x)),
}


def mollified_sign_function(eps, level=0.0):
    """ F_eps(x - level), whose derivative is the mollified sign F'_eps(x - level). """
    return TestFunction(f'mollified_sign(eps={eps:g}, x={level:g})',
                        lambda x: mollifier(eps, np.asarray(x) - level),
                        lambda x: mollifier_prime(eps, np.asarray(x) - level),
                        lambda x: mollifier_second(eps, np.asarray(x) - level))


def get_test_function(name, eps=None, level=0.0):
    if name == 'mollified_sign':
        if eps is None:
            raise DomainError('mollified_sign needs a mollifier variance eps.')
        return mollified_sign_function(eps, level)
    try:
        return TEST_FUNCTIONS[name]
    except KeyError:
        raise DomainError(f'Unknown test function "{name}"; known: {sorted(TEST_FUNCTIONS) + ["mollified_sign"]}.')


def time_test_function(name, dims):
    """ Time-dependent test battery: 't', 'sum_x2', 'cos_prod', 't_x2', 'bump_prod'. """

    def zeros(s, x):
        return np.zeros(np.broadcast(np.asarray(s)[..., None], x).shape[:-1])

    if name == 't':
        return TimeTestFunction(name, dims, lambda s, x: np.asarray(s) + zeros(s, x),
                                lambda s, x: 1.0 + zeros(s, x),
                                lambda s, x: np.zeros(np.broadcast(np.asarray(s)[..., None], x).shape),
                                lambda s, x: np.zeros(np.broadcast(np.asarray(s)[..., None], x).shape))
    if name == 'sum_x2':
        return TimeTestFunction(name, dims, lambda s, x: np.sum(x * x, axis=-1) + zeros(s, x),
                                lambda s, x: zeros(s, x),
                                lambda s, x: 2 * x + 0 * np.asarray(s)[..., None],
                                lambda s, x: 2 * np.ones_like(x) + 0 * np.asarray(s)[..., None])
    if name == 't_x2':
        return TimeTestFunction(name, dims, lambda s, x: np.asarray(s) * np.sum(x * x, axis=-1),
                                lambda s, x: np.sum(x * x, axis=-1) + zeros(s, x),
                                lambda s, x: 2 * np.asarray(s)[..., None] * x,
                                lambda s, x: 2 * np.asarray(s)[..., None] * np.ones_like(x))
    if name in ('cos_prod', 'bump_prod'):
        g, g1, g2 = ((np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)) if name == 'cos_prod' else
                     (_bump, lambda x: -x * _bump(x), lambda x: (x * x - 1) * _bump(x)))

        def prod_except(x, i, factor):
            out = factor(x[..., i])
            for j in range(x.shape[-1]):
                if j != i:
                    out = out * g(x[..., j])
            return out

        return TimeTestFunction(
            name, dims,
            lambda s, x: np.prod(g(x), axis=-1) + zeros(s, x),
            lambda s, x: zeros(s, x),
            lambda s, x: np.stack([prod_except(x, i, g1) for i in range(x.shape[-1])], axis=-1)
            + 0 * np.asarray(s)[..., None],
            lambda s, x: np.stack([prod_except(x, i, g2) for i in range(x.shape[-1])], axis=-1)
            + 0 * np.asarray(s)[..., None])
    raise DomainError(f'Unknown time-dependent test function "{name}".')


class MCEstimate:
    """
    Monte Carlo mean of per-path values with its standard error.

    The mean uses compensated summation so reductions do not depend on summation order.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        self.values = values
        self.n = values.size
        self.mean = math.fsum(values) / self.n
        if self.n > 1:
            var = math.fsum((values - self.mean) ** 2) / (self.n - 1)
            self.se = math.sqrt(var / self.n)
        else:
            self.se = float('nan')

    def within(self, target, n_se=3.0, slack=0.0):
        return abs(self.mean - target) <= n_se * self.se + slack

    def __repr__(self):
        return f'MCEstimate(mean={self.mean:.6g}, se={self.se:.3g}, n={self.n})'


# Quadratic variation

def quadratic_variation(path, grid=None):
    """ Sum of squared increments along the last axis (per path for 2-d input). """
    path = np.asarray(path, dtype=float)
    if grid is not None and path.shape[-1] != len(grid):
        raise DomainError(f'Path has {path.shape[-1]} samples but the grid has {len(grid)} times.')
    return np.sum(np.diff(path, axis=-1) ** 2, axis=-1)


def expected_qv_grid(p, grid):
    """ E V on an arbitrary grid: sum of variograms of consecutive times. """
    t = grid.times
    return math.fsum(np.atleast_1d(variogram(p, t[1:], t[:-1])))


def expected_qv(p, t, n, route='variogram'):
    """
    E V_t^n on the uniform grid t_j = jt/n.

    route='variogram' sums the increment variances; route='h_sum' uses
    (t/n)^2HK sum_j (h(j) + 2^(1-K)), which in the critical regime reads (t/n) sum h(j) + t 2^(1-K).
    """

    if int(n) != n or n < 1:
        raise DomainError(f'n must be a positive integer, got {n}.')
    if route == 'variogram':
        return expected_qv_grid(p, TimeGrid.uniform(t, n))
    if route == 'h_sum':
        j = np.arange(1, int(n) + 1, dtype=float)
        hs = math.fsum(np.atleast_1d(h_fn(p, j)))
        if p.regime == 'critical':
            return (t / n) * hs + t * 2.0 ** (1 - p.k)
        return (t / n) ** (2 * p.hk) * (hs + n * 2.0 ** (1 - p.k))
    raise DomainError(f'Unknown route "{route}".')


def qv_limit(p, t):
    """ lim_n V_t^n: t 2^(1-K) when 2HK = 1, 0 when 2HK > 1. """
    if p.regime == 'critical':
        return t * 2.0 ** (1 - p.k)
    if p.regime == 'supercritical':
        return 0.0
    raise DomainError('The quadratic variation diverges when 2HK < 1.')


def increment_cov_theta(p, t, n, i, j):
    """
    theta_n(i, j) = E[(B_{t_i} - B_{t_(i-1)})(B_{t_j} - B_{t_(j-1)})] in closed form:

        (t/n)^2HK 2^-K [(i^2H + j^2H)^K - (i^2H + (j-1)^2H)^K - ((i-1)^2H + j^2H)^K
                        + ((i-1)^2H + (j-1)^2H)^K - 2|i-j|^2HK + |i-j+1|^2HK + |i-j-1|^2HK]
    """

    for idx in (i, j):
        if int(idx) != idx or not 1 <= idx <= n:
            raise DomainError(f'Index {idx} outside 1..{n}.')
    h, k, a = p.h, p.k, 2 * p.hk

    def b(u, v):
        return (u ** (2 * h) + v ** (2 * h)) ** k

    d = abs(i - j)
    bracket = (b(i, j) - b(i, j - 1) - b(i - 1, j) + b(i - 1, j - 1)
               - 2 * d ** a + abs(i - j + 1) ** a + abs(i - j - 1) ** a)
    return (t / n) ** a * 2.0 ** (-k) * bracket


def increment_covariance(p, t, n):
    """ The n x n matrix theta_n(i, j), by telescoping the grid covariance. """
    times = TimeGrid.uniform(t, n).times
    c = np.asarray(covariance(p, times[:, None], times[None, :]))
    return c[1:, 1:] - c[1:, :-1] - c[:-1, 1:] + c[:-1, :-1]


def qv_second_moment(p, t, n):
    """ E(V_t^n)^2 = sum_ij mu_n(i,j), mu_n = 2 theta_n(i,j)^2 + theta_n(i,i) theta_n(j,j). """
    theta = increment_covariance(p, t, n)
    mean = math.fsum(np.diag(theta))
    return 2 * math.fsum((theta ** 2).ravel()) + mean ** 2


def qv_l2_error(p, t, n, target=None):
    """ Exact E|V_t^n - target|^2, target defaulting to the limit of V_t^n. """
    if target is None:
        target = qv_limit(p, t)
    theta = increment_covariance(p, t, n)
    mean = math.fsum(np.diag(theta))
    return 2 * math.fsum((theta ** 2).ravel()) + (mean - target) ** 2


# Itô formula, deterministic route

def _require_ito_regime(p):
    if p.regime == 'subcritical':
        raise DomainError(f'The Itô formula needs 2HK >= 1, got 2HK = {2 * p.hk:g}.')


def ito_deterministic_residual(p, tf, t, quad=None):
    """
    |E f(B_t) - f(0) - HK int_0^t E f''(B_s) s^(2HK-1) ds| with B_s ~ N(0, s^2HK).

    The time integral is taken in u = s^2HK, where it reads 1/2 int_0^(t^2HK) E f''(sqrt(u) N) du.
    Time-dependent test functions are handled by ito_time_residual.
    """

    if isinstance(tf, TimeTestFunction):
        return ito_time_residual(MultiParams([p]), tf, t, quad)
    quad = quad or QuadratureSpec()
    _require_ito_regime(p)
    if t <= 0:
        raise DomainError('Horizon must be positive.')
    pts = quad.gauss_points
    lhs = gaussian_expectation(tf.f, t ** (2 * p.hk), pts) - float(tf.f(np.array(0.0)))
    val, err = integrate.quad(lambda u: gaussian_expectation(tf.f_second, u, pts),
                              0.0, t ** (2 * p.hk), **quad.kwargs())
    if not np.isfinite(val):
        raise QuadratureFailure(f'Trace integral failed for {tf.name} (error estimate {err}).')
    return abs(lhs - 0.5 * val)


def _product_expectation(g, s, variances, points):
    """ E g(s, X) for X with independent N(0, variances_i) components, by tensor Gauss-Hermite. """
    x, w = gauss_hermite_rule(points)
    d = len(variances)
    nodes = np.array(list(itertools.product(x, repeat=d))) * np.sqrt(variances)
    weights = np.prod(np.array(list(itertools.product(w, repeat=d))), axis=1)
    return weights @ g(s, nodes)


def ito_time_residual(mp, tf, t, quad=None):
    """
    |E f(t, B_t) - f(0, 0) - int_0^t E d_s f(s, B_s) ds - sum_i H_iK_i int_0^t E d_ii f(s, B_s) s^(2H_iK_i - 1) ds|

    for a d-dimensional bifBm with independent components, all with 2H_iK_i >= 1.
    """

    quad = quad or QuadratureSpec()
    if isinstance(mp, HurstParams):
        mp = MultiParams([mp])
    for p in mp:
        _require_ito_regime(p)
    if tf.dims != mp.dims:
        raise DomainError(f'Test function is {tf.dims}-dimensional, process is {mp.dims}-dimensional.')
    hk = mp.hk
    pts = max(8, min(quad.gauss_points, int(round(6400 ** (1.0 / mp.dims)))))

    def var(s):
        return s ** (2 * hk)

    def integrand(s):
        e_ds = _product_expectation(tf.ds, s, var(s), pts)
        e_2 = _product_expectation(lambda u, x: tf.second(u, x) @ (hk * s ** (2 * hk - 1)), s, var(s), pts)
        return e_ds + e_2

    lhs = _product_expectation(tf.f, t, var(t), pts) - float(tf.f(0.0, np.zeros((1, mp.dims)))[0])
    val, err = integrate.quad(integrand, 0.0, t, **quad.kwargs())
    if not np.isfinite(val):
        raise QuadratureFailure(f'Time integral failed for {tf.name} (error estimate {err}).')
    return abs(lhs - val)


# Monte Carlo route

def _paths(ensemble, t, dimension):
    if t is not None:
        ensemble = ensemble.restrict(t)
    return ensemble, ensemble.dimension(dimension), ensemble.params[dimension]


def at_resolution(ensemble, n):
    if n is None or n == ensemble.grid.n_steps:
        return ensemble
    if ensemble.grid.n_steps % n != 0:
        raise DomainError(f'Resolution {n} does not divide the ensemble resolution {ensemble.grid.n_steps}.')
    return ensemble.coarsen(ensemble.grid.n_steps // n)


def skorohod_estimate(ensemble, tf, t=None, dimension=0):
    """
    Per-path estimate of the divergence integral of f'(B):

        sum_j f'(B_{t_(j-1)}) dB_j - sum_j f''(B_{t_(j-1)}) (R(t_(j-1), t_j) - R(t_(j-1), t_(j-1)))
    """

    ensemble, b, p = _paths(ensemble, t, dimension)
    _require_ito_regime(p)
    times = ensemble.grid.times
    left = b[:, :-1]
    corr = np.asarray(covariance(p, times[:-1], times[1:])) - times[:-1] ** (2 * p.hk)
    return np.sum(tf.f_prime(left) * np.diff(b, axis=1), axis=1) - tf.f_second(left) @ corr


def trace_weights(p, grid):
    """ Weights for HK int_0^t g(B_s) s^(2HK-1) ds; the critical coefficient is (1/2 - 2^-K) + 2^-K. """
    if p.regime == 'critical':
        c = sum(critical_trace_constants(p))
        return c * power_weights(grid, 1.0)
    return p.hk * power_weights(grid, 2 * p.hk)


def ito_pathwise_residual(ensemble, tf, t=None, n=None, dimension=0):
    """
    MC estimate of E|f(B_t) - f(0) - I - T|^2, with I the divergence estimate and T the
    weighted trace term, on the ensemble coarsened to n steps.
    """

    ensemble, b, p = _paths(at_resolution(ensemble, n), t, dimension)
    iota = skorohod_estimate(ensemble, tf, dimension=dimension)
    trace = tf.f_second(b) @ trace_weights(p, ensemble.grid)
    resid = tf.f(b[:, -1]) - tf.f(np.zeros(1))[0] - iota - trace
    return MCEstimate(resid ** 2)


# Local time

class LocalTimeEstimate(MCEstimate):
    """
    Weighted local time 2HK int_0^t p_eps(B_s - x) s^(2HK-1) ds per path.

    Attributes
    ---------
    x, t, epsilon:
        Level, horizon and mollifier variance.
    """

    def __init__(self, x, t, epsilon, values):
        self.x = x
        self.t = t
        self.epsilon = epsilon
        super().__init__(values)

    def __repr__(self):
        return (f'LocalTimeEstimate(x={self.x:g}, t={self.t:g}, eps={self.epsilon:g}, '
                f'mean={self.mean:.6g}, se={self.se:.3g})')


def _occupation_weights(p, grid):
    return 2 * p.hk * power_weights(grid, 2 * p.hk)


def weighted_local_time(ensemble, x, eps, t=None, dimension=0):
    ensemble, b, p = _paths(ensemble, t, dimension)
    _require_ito_regime(p)
    if not eps > 0:
        raise DomainError('The local time mollifier needs eps > 0.')
    values = gauss_kernel(eps, b - x) @ _occupation_weights(p, ensemble.grid)
    return LocalTimeEstimate(x, ensemble.grid.horizon, eps, values)


def local_time_mean(p, t, x, eps=0.0, quad=None):
    """ E L_t^x at mollifier variance eps: int_0^(t^2HK) p_(u+eps)(x) du. """
    quad = quad or QuadratureSpec()
    top = t ** (2 * p.hk)
    if x == 0:
        return 2 * (math.sqrt(top + eps) - math.sqrt(eps)) / math.sqrt(2 * math.pi)
    val, _ = integrate.quad(lambda u: gauss_kernel(u + eps, x) if u + eps > 0 else 0.0, 0.0, top, **quad.kwargs())
    return val


def local_time_second_moment(p, t, x=0.0, eps=0.0, quad=None):
    """
    E(L_t^x)^2 at mollifier variance eps:

        4H^2K^2 int int (sr)^(2HK-1) phi_2(x, x; Sigma(s, r) + eps I) ds dr

    reduced with s = r z. At x = 0, eps = 0 the r-integral is closed form and
    E L^2 = (2HK t^2HK / pi) int_0^1 z^(2HK-1) (z^2HK - R(z,1)^2)^(-1/2) dz.
    """

    quad = quad or QuadratureSpec()
    _require_ito_regime(p)
    a = 2 * p.hk
    if x == 0 and eps == 0:
        def g(z):
            # the endpoint behaviour z^(HK-1) (1-z)^(-HK) is carried by the 'alg' weight
            if z <= 0.0:
                return 1.0
            if z >= 1.0:
                return 2.0 ** (0.5 * (p.k - 1))
            gap = z ** a - covariance(p, z, 1.0) ** 2
            return z ** (a - 1) / math.sqrt(max(gap, 1e-300)) * z ** (1 - p.hk) * (1 - z) ** p.hk

        val, _ = integrate.quad(g, 0.0, 1.0, weight='alg', wvar=(p.hk - 1, -p.hk), **quad.kwargs())
        return a * t ** a / math.pi * val

    def integrand(z, r):
        s = r * z
        vs, vr = s ** a + eps, r ** a + eps
        c = covariance(p, s, r)
        det = vs * vr - c * c
        if det <= 0:
            return 0.0
        q = x * x * (vs + vr - 2 * c) / det
        return r * (s * r) ** (a - 1) * math.exp(-0.5 * q) / (2 * math.pi * math.sqrt(det))

    val, err = integrate.dblquad(integrand, 0.0, t, 0.0, 1.0, epsabs=quad.epsabs, epsrel=max(quad.epsrel, 1e-7))
    if not np.isfinite(val):
        raise QuadratureFailure(f'Local time second moment failed (error estimate {err}).')
    return 2 * (p.hk ** 2) * 4 * val


class OccupationCheck:
    """ Per-path comparison of int g(x) L_t^x dx against 2HK int g(B_s) s^(2HK-1) ds. """

    def __init__(self, lhs, rhs):
        self.lhs = lhs
        self.rhs = rhs
        self.relative_errors = np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)
        self.max_relative_error = float(np.max(self.relative_errors))

    def __repr__(self):
        return f'OccupationCheck(max_relative_error={self.max_relative_error:.3g})'


def level_grid(ensemble, eps, dimension=0, spacing=0.25, width=8.0):
    """ Uniform levels covering the path range plus width*sqrt(eps), spaced spacing*sqrt(eps). """
    b = ensemble.dimension(dimension)
    r = math.sqrt(eps)
    lo, hi = float(b.min()) - width * r, float(b.max()) + width * r
    n = int(math.ceil((hi - lo) / (spacing * r))) + 1
    return np.linspace(lo, hi, n)


def occupation_identity_check(ensemble, g, eps, levels=None, t=None, dimension=0):
    """
    Occupation density identity, path by path.

    The left side integrates g times weighted_local_time over the level grid by the trapezoid rule.
    """

    ensemble, b, p = _paths(ensemble, t, dimension)
    if levels is None:
        levels = level_grid(ensemble, eps, dimension)
    levels = np.asarray(levels, dtype=float)
    lt = np.array([weighted_local_time(ensemble, x, eps, dimension=dimension).values for x in levels])
    lhs = integrate.trapezoid(np.asarray(g(levels))[:, None] * lt, levels, axis=0)
    rhs = np.asarray(g(b)) @ _occupation_weights(p, ensemble.grid)
    return OccupationCheck(lhs, rhs)


# Tanaka formula

class TanakaEstimate:
    """
    Terms of the mollified Tanaka formula at level x and variance eps, per path.

    Attributes
    ---------
    lhs:
        F_eps(B_t - x) - F_eps(-x).
    integral:
        Divergence estimate with integrand F'_eps(B - x).
    local_time:
        Weighted local time at (x, eps).
    residual:
        MCEstimate of (lhs - integral - local_time)^2.
    """

    def __init__(self, x, eps, n, lhs, integral, local_time):
        self.x = x
        self.eps = eps
        self.n = n
        self.lhs = lhs
        self.integral = integral
        self.local_time = local_time
        self.residual = MCEstimate((lhs - integral - local_time.values) ** 2)

    def term_means(self):
        return {'lhs': MCEstimate(self.lhs).mean, 'integral': MCEstimate(self.integral).mean,
                'local_time': self.local_time.mean}

    def __repr__(self):
        return f'TanakaEstimate(x={self.x:g}, eps={self.eps:g}, n={self.n}, residual={self.residual!r})'


def epsilon_floor(p, n, c=1.0, kappa=None):
    """ Smallest eps allowed at resolution n: c n^-kappa, kappa defaulting to HK. """
    return c * n ** (-(p.hk if kappa is None else kappa))


def check_epsilon_schedule(p, eps, n, c=1.0, kappa=None):
    floor = epsilon_floor(p, n, c, kappa)
    if eps < floor:
        log.warning(f'eps = {eps:g} is below the schedule floor {floor:.3g} at n = {n}; '
                    'the kernel may be undersampled.')
        return False
    return True


def tanaka_residual(ensemble, x, eps, n=None, t=None, dimension=0, c=1.0, kappa=None):
    """ Mollified Tanaka formula on the ensemble coarsened to n steps; c and kappa set the eps floor. """
    ensemble, b, p = _paths(at_resolution(ensemble, n), t, dimension)
    _require_ito_regime(p)
    check_epsilon_schedule(p, eps, ensemble.grid.n_steps, c, kappa)
    tf = mollified_sign_function(eps, x)
    lhs = tf.f(b[:, -1]) - float(mollifier(eps, -x))
    integral = skorohod_estimate(ensemble, tf, dimension=dimension)
    lt = weighted_local_time(ensemble, x, eps, dimension=dimension)
    return TanakaEstimate(x, eps, ensemble.grid.n_steps, lhs, integral, lt)


def tanaka_epsilon_sweep(ensemble, x, eps_list, n=None, dimension=0, c=1.0, kappa=None):
    """
    Tanaka terms over a decreasing eps sequence.

    Returns
    ---------
    (estimates, cauchy): the TanakaEstimate per eps and, for consecutive pairs, the mean squared
    differences of the integral and local time terms; plus the distance of the left side to
    |B_t - x| - |x| per eps.
    """

    estimates = [tanaka_residual(ensemble, x, e, n, dimension=dimension, c=c, kappa=kappa) for e in eps_list]
    b = at_resolution(ensemble, n).dimension(dimension)
    limit_lhs = np.abs(b[:, -1] - x) - abs(x)
    cauchy = []
    for a, c in zip(estimates[:-1], estimates[1:]):
        cauchy.append({'eps': (a.eps, c.eps),
                       'integral': MCEstimate((a.integral - c.integral) ** 2),
                       'local_time': MCEstimate((a.local_time.values - c.local_time.values) ** 2)})
    lhs_gaps = [MCEstimate((e.lhs - limit_lhs) ** 2) for e in estimates]
    return estimates, cauchy, lhs_gaps
