# chaos.py
"""
Wiener chaos of bifBm local times.

Coefficients are those of the expansion L = sum_n int c_n(s) I_n(1_[0,s]^n) ds, so that
the n-th chaos contributes a_n = n! int int c_n(s) c_n(r) R(s,r)^n ds dr to the second moment.
"""

import math
import logging
import itertools

import numpy as np
import pandas as pd
from scipy import integrate, special, stats

from .covariance import covariance
from .kernels import gauss_kernel, hermite, SQRT_2PI
from .params import HurstParams, MultiParams, QuadratureSpec, gamma_exponent
from .util import DomainError, InadmissibleSpec, QuadratureFailure, write_frame

log = logging.getLogger(__name__)


class WatanabeIndex:
    """
    Smoothness index alpha of a Watanabe space D^(alpha,2) together with the local-time threshold.

    Attributes
    ---------
    alpha:
        The index.
    threshold:
        1/(2 hk_star) - d/2; local times belong to D^(alpha,2) for alpha below it.
    """

    def __init__(self, alpha, mp):
        if isinstance(mp, HurstParams):
            mp = MultiParams([mp])
        self.alpha = float(alpha)
        self.dims = mp.dims
        self.threshold = 1 / (2 * mp.hk_star) - mp.dims / 2
        if not np.isfinite(self.threshold):
            raise DomainError('Watanabe threshold is not finite.')

    @property
    def admissible(self):
        return self.alpha < self.threshold

    def __repr__(self):
        return f'WatanabeIndex(alpha={self.alpha:g}, threshold={self.threshold:.6g})'


class TailFit:
    """ Least-squares power law a_n ~ C n^slope with a confidence band on the slope. """

    def __init__(self, slope, intercept, stderr, band, orders):
        self.slope = slope
        self.intercept = intercept
        self.stderr = stderr
        self.band = band
        self.orders = orders

    @property
    def implied_boundary(self):
        """ sum (1+n)^alpha a_n converges for alpha < -slope - 1. """
        return -self.slope - 1

    def prefactor(self):
        return math.exp(self.intercept)

    def __repr__(self):
        return (f'TailFit(slope={self.slope:.4f} +- {self.stderr:.2g}, '
                f'implied_boundary={self.implied_boundary:.4f})')


def tail_exponent_estimate(a, fit_range=None, orders=None, confidence=0.95):
    """
    Fits log a_n = log C + rho log n over the orders in fit_range (inclusive).

    Parameters
    ---------
    a:
        Sequence of terms.
    fit_range:
        (lo, hi) order range; defaults to every order >= 1.
    orders:
        Orders of the terms, default 0, 1, 2, ...
    confidence:
        Two-sided level of the Student-t band on the slope.
    """

    a = np.asarray(a, dtype=float)
    orders = np.arange(a.size) if orders is None else np.asarray(orders, dtype=float)
    lo, hi = fit_range if fit_range is not None else (1, orders.max())
    sel = (orders >= max(lo, 1)) & (orders <= hi)
    if np.count_nonzero(sel) < 3:
        raise DomainError(f'Need at least 3 orders in the fit range {lo}..{hi}.')
    if np.any(a[sel] <= 0):
        raise DomainError('Tail fit needs positive terms on the fit range.')
    res = stats.linregress(np.log(orders[sel]), np.log(a[sel]))
    q = stats.t.ppf(0.5 + confidence / 2, np.count_nonzero(sel) - 2)
    band = (res.slope - q * res.stderr, res.slope + q * res.stderr)
    return TailFit(res.slope, res.intercept, res.stderr, band, orders[sel])


def watanabe_partial_norm(idx, a, N=None):
    """
    Partial sums S_N = sum_(n<=N) (1+n)^alpha a_n.

    idx is a WatanabeIndex or a bare alpha.
    """

    alpha = idx.alpha if isinstance(idx, WatanabeIndex) else float(idx)
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise DomainError('Chaos norms must be nonnegative.')
    if N is not None:
        a = a[:N + 1]
    n = np.arange(a.size)
    return np.cumsum((1.0 + n) ** alpha * a)


class ChaosSeries:
    """
    Truncated chaos expansion of a local-time functional.

    Attributes
    ---------
    dims:
        Dimension d.
    coefficient:
        Callable (order, s) -> c_n(s); order is an int for d = 1 and a multi-index otherwise.
    max_order:
        Truncation N (total order for d > 1).
    x:
        Level.
    theta:
        Weight exponent of the multidimensional local time, None for d = 1.
    terms:
        a_n per order (per shell |n| = m for d > 1), or None before the norms are computed.
    """

    def __init__(self, dims, coefficient, max_order, x, theta=None, terms=None):
        if max_order < 0:
            raise DomainError('Truncation order must be nonnegative.')
        self.dims = dims
        self.coefficient = coefficient
        self.max_order = int(max_order)
        self.x = x
        self.theta = theta
        self.terms = None if terms is None else np.asarray(terms, dtype=float)

    @property
    def orders(self):
        return np.arange(self.max_order + 1)

    @property
    def partial_sums(self):
        self._require_terms()
        return np.cumsum(self.terms)

    @property
    def total(self):
        return float(self.partial_sums[-1])

    def _require_terms(self):
        if self.terms is None:
            raise DomainError('Chaos norms have not been computed for this series.')

    def _active(self):
        """ Orders carrying the tail; odd orders vanish identically at the origin. """
        if np.all(np.abs(self.terms[1::2]) <= 1e-300):
            return 2
        return 1

    def tail_fit(self, fit_range=None, confidence=0.95):
        self._require_terms()
        step = self._active()
        orders = self.orders[::step]
        if fit_range is None:
            fit_range = (max(2, self.max_order // 3), self.max_order)
        return tail_exponent_estimate(self.terms[::step], fit_range, orders, confidence)

    def extrapolated_total(self, fit_range=None):
        """
        Truncated sum plus the power-law tail beyond N summed with the Hurwitz zeta function.

        Returns inf when the fitted tail is not summable.
        """

        fit = self.tail_fit(fit_range)
        rho = fit.slope
        if rho >= -1:
            log.warning(f'Fitted tail slope {rho:.3f} is not summable.')
            return float('inf')
        step = self._active()
        first = self.max_order + 1
        if step == 2 and first % 2 == 1:
            first += 1
        tail = fit.prefactor() * step ** rho * special.zeta(-rho, first / step)
        return self.total + float(tail)

    def coefficient_table(self, s_grid, orders=None):
        """ Long-format DataFrame (order, s, value) of the coefficient functions. """
        rows = []
        if orders is None:
            orders = self.orders if self.dims == 1 else [tuple(n) for n in shell(self.dims, self.max_order)]
        for n in orders:
            for s in s_grid:
                rows.append((str(n), float(s), float(self.coefficient(n, s))))
        return pd.DataFrame(rows, columns=['order', 's', 'value'])

    def to_csv(self, fn, s_grid, orders=None):
        write_frame(self.coefficient_table(s_grid, orders), fn, index=False)

    def export_json(self):
        out = {'dims': self.dims, 'max_order': self.max_order,
               'x': np.atleast_1d(self.x).tolist(), 'theta': self.theta}
        if self.terms is not None:
            out['terms'] = self.terms.tolist()
        return out

    def __repr__(self):
        state = 'empty' if self.terms is None else f'total={self.total:.6g}'
        return f'ChaosSeries(dims={self.dims}, N={self.max_order}, x={self.x}, {state})'


def multiple_integral_inner(p, n, s, r):
    """ E[I_n(1_[0,s]^n) I_n(1_[0,r]^n)] = n! R(s, r)^n. """
    if int(n) != n or n < 0:
        raise DomainError(f'Order must be a nonnegative integer, got {n}.')
    return math.factorial(int(n)) * covariance(p, s, r) ** int(n)


def _positive_time(s):
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise DomainError('Chaos coefficients are defined for s > 0.')
    return s


def local_time_coeff_1d(p, n, s, x, eps=0.0):
    """
    c_n(s) = 2HK p_v(x) v^(-n/2) H_n(x / sqrt(v)) s^(2HK-1), v = s^2HK + eps.

    eps = 0 gives 2HK p_(s^2HK)(x) s^-((n-2)HK+1) H_n(x/s^HK), the coefficient of the weighted local time;
    eps > 0 that of its mollified version.
    """

    s = _positive_time(s)
    if eps < 0:
        raise DomainError('Mollifier variance must be nonnegative.')
    a = 2 * p.hk
    v = s ** a + eps
    out = a * gauss_kernel(v, x) * v ** (-n / 2) * hermite(n, x / np.sqrt(v)) * s ** (a - 1)
    return float(out) if np.ndim(out) == 0 else out


def _hermite_origin_weight(n):
    """ n! H_n(0)^2. """
    return math.factorial(n) * hermite(n, 0.0) ** 2


def _correlation_power_integral(p, n, quad):
    """ J_n = int_0^1 z^(HK-1) (R(z,1)/z^HK)^n dz, taken in u = z^HK. """
    hk = p.hk

    def rho(u):
        if u <= 0:
            return 0.0
        z = u ** (1 / hk)
        return covariance(p, z, 1.0) / u

    val, err = integrate.quad(lambda u: rho(u) ** n, 0.0, 1.0, **quad.kwargs())
    if not np.isfinite(val):
        raise QuadratureFailure(f'Correlation integral of order {n} failed (error estimate {err}).')
    return val / hk


def local_time_chaos_moment(p, t, x, N, eps=0.0, quad=None):
    """
    Truncated second moment of the weighted local time at level x: the chaos norms
    a_n = n! int int c_n(s) c_n(r) R(s,r)^n ds dr for n = 0..N.

    At x = 0, eps = 0 the self-similar reduction s = rz gives a_n = n! kappa_n^2 (t^2HK / HK) J_n,
    kappa_n = 2HK H_n(0)/sqrt(2 pi). Other levels use an adaptive double quadrature.

    Returns
    ---------
    ChaosSeries with terms a_0..a_N.
    """

    quad = quad or QuadratureSpec()
    if p.regime == 'subcritical':
        raise DomainError('Local time chaos needs 2HK >= 1.')
    if int(N) != N or N < 0:
        raise DomainError(f'Truncation must be a nonnegative integer, got {N}.')
    if p.regime == 'critical':
        log.info('Local time chaos at 2HK = 1 has no integrability margin.')

    series = ChaosSeries(1, lambda n, s: local_time_coeff_1d(p, n, s, x, eps), N, x)
    a = 2 * p.hk
    terms = np.zeros(N + 1)
    if x == 0 and eps == 0:
        for n in range(0, N + 1, 2):
            kappa2 = (a / SQRT_2PI) ** 2
            terms[n] = _hermite_origin_weight(n) * kappa2 * t ** a / p.hk * _correlation_power_integral(p, n, quad)
    else:
        for n in range(N + 1):
            if x == 0 and n % 2 == 1:
                continue

            def integrand(z, r):
                s = r * z
                if s <= 0:
                    return 0.0
                c = covariance(p, z, 1.0) * r ** a
                return r * local_time_coeff_1d(p, n, s, x, eps) * local_time_coeff_1d(p, n, r, x, eps) * c ** n

            val, err = integrate.dblquad(integrand, 0.0, t, 0.0, 1.0,
                                         epsabs=quad.epsabs, epsrel=max(quad.epsrel, 1e-7))
            if not np.isfinite(val):
                raise QuadratureFailure(f'Chaos norm of order {n} failed (error estimate {err}).')
            terms[n] = 2 * math.factorial(n) * val
            log.debug(f'a_{n} = {terms[n]:.6g} (+- {err:.2g})')
    series.terms = terms
    return series


# Multidimensional

def _require_admissible(mp, theta):
    if mp.dims >= 2:
        gamma = gamma_exponent(mp, theta)
        if gamma <= 0:
            raise InadmissibleSpec(gamma)


def multi_local_time_coeff(mp, n, s, x, theta):
    """
    prod_i p_(s^2h_i)(x_i) s^-(1/2 + (n_i - 1) h_i) H_(n_i)(x_i / s^h_i) times s^theta, h_i = H_iK_i.

    The admissibility gate gamma > 0 applies for d >= 2.
    """

    if isinstance(mp, HurstParams):
        mp = MultiParams([mp])
    n = tuple(int(m) for m in np.atleast_1d(n))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if len(n) != mp.dims or x.size != mp.dims:
        raise DomainError(f'Multi-index and level must have {mp.dims} entries.')
    _require_admissible(mp, theta)
    s = _positive_time(s)
    out = s ** theta
    for ni, xi, hi in zip(n, x, mp.hk):
        out = out * gauss_kernel(s ** (2 * hi), xi) * s ** (-(0.5 + (ni - 1) * hi)) * hermite(ni, xi / s ** hi)
    return float(out) if np.ndim(out) == 0 else out


def d1_reduction_ratio(p, n, s, x, theta=None):
    """
    multi_local_time_coeff at d = 1 divided by local_time_coeff_1d / 2HK.

    Equal to 1 when theta = HK - 1/2; at the default theta = 2HK - 1 it is s^(HK - 1/2).
    """

    theta = 2 * p.hk - 1 if theta is None else theta
    return multi_local_time_coeff(MultiParams([p]), (n,), s, x, theta) / (local_time_coeff_1d(p, n, s, x) / (2 * p.hk))


def _beta_scale(hk, s):
    """ c(s)^2 = s^(1 - 2h) / 2h. """
    return s ** (1 - 2 * hk) / (2 * hk)


def beta_coeff(p, n, eps, s, x):
    """
    v^(-n/2) p_v(x) H_n(x/sqrt(v)) with v = s^2HK + eps/c(s)^2 and c(s) = s^(1/2-HK)/sqrt(2HK).
    """

    s = _positive_time(s)
    if eps < 0:
        raise DomainError('Mollifier variance must be nonnegative.')
    v = s ** (2 * p.hk) + eps / _beta_scale(p.hk, s)
    out = v ** (-n / 2) * gauss_kernel(v, x) * hermite(n, x / np.sqrt(v))
    return float(out) if np.ndim(out) == 0 else out


def beta_order0_mean(mp, theta, x, eps, t, quad=None):
    """
    Mean of the mollified correction term of the multidimensional Tanaka formula,

        int_0^t s^theta prod_i p_(v_i(s))(x_i) / s^(1/2 - h_i) ds,   v_i(s) = s^2h_i + eps/c_i(s)^2.
    """

    quad = quad or QuadratureSpec()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _require_admissible(mp, theta)

    def integrand(s):
        if s <= 0:
            return 0.0
        out = s ** theta
        for p, xi in zip(mp, x):
            out *= beta_coeff(p, 0, eps, s, xi) / s ** (0.5 - p.hk)
        return out

    val, err = integrate.quad(integrand, 0.0, t, **quad.kwargs())
    if not np.isfinite(val):
        raise QuadratureFailure(f'Order-0 mean quadrature failed (error estimate {err}).')
    return val


def shell(dims, m):
    """ Multi-indices of total order m, lexicographic. """
    for n in itertools.product(range(m + 1), repeat=dims):
        if sum(n) == m:
            yield n


def multi_local_time_chaos_norms(mp, theta, t, N, quad=None):
    """
    Shell norms a_m = sum_(|n|=m) ||I_n||^2 of the multidimensional weighted local time at the origin.

    Each multi-index contributes

        2 prod_i (n_i! H_(n_i)(0)^2 / 2pi) t^(2theta-d+2)/(2theta-d+2) int_0^1 z^(theta-d/2) prod_i (R_i(z,1)/z^h_i)^(n_i) dz
    """

    quad = quad or QuadratureSpec()
    if isinstance(mp, HurstParams):
        mp = MultiParams([mp])
    _require_admissible(mp, theta)
    d = mp.dims
    power = 2 * theta - d + 2
    if power <= 0 or theta - d / 2 <= -1:
        raise DomainError(f'theta = {theta:g} gives a nonintegrable local time in dimension {d}.')
    x0 = np.zeros(d)

    def corr(z):
        if z <= 0:
            return np.zeros(d)
        return np.array([covariance(p, z, 1.0) / z ** p.hk for p in mp])

    terms = np.zeros(N + 1)
    for m in range(0, N + 1, 2):
        for n in shell(d, m):
            if any(ni % 2 for ni in n):
                continue
            weight = np.prod([_hermite_origin_weight(ni) / (2 * math.pi) for ni in n])
            val, err = integrate.quad(lambda z: float(np.prod(corr(z) ** np.array(n))), 0.0, 1.0,
                                      weight='alg', wvar=(theta - d / 2, 0.0), **quad.kwargs())
            if not np.isfinite(val):
                raise QuadratureFailure(f'Shell norm for {n} failed (error estimate {err}).')
            terms[m] += 2 * weight * t ** power / power * val
        log.debug(f'shell {m}: {terms[m]:.6g}')

    series = ChaosSeries(d, lambda n, s: multi_local_time_coeff(mp, n, s, x0, theta), N, x0, theta, terms)
    return series
