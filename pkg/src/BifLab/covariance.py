# covariance.py
"""
Closed-form covariance of the bifractional Brownian motion

    R(t, s) = 2^-K ((t^2H + s^2H)^K - |t - s|^2HK)

together with its mixed partial derivative, the auxiliary function h of the quadratic
variation analysis, the quasi-helix bounds and the |H|-norm quadrature.
"""

import logging
import numpy as np
from scipy import integrate

from .params import QuadratureSpec
from .util import DomainError, SingularityError, QuadratureFailure

log = logging.getLogger(__name__)


def _times(*args):
    out = [np.asarray(a, dtype=float) for a in args]
    for a in out:
        if np.any(a < 0):
            raise DomainError('Times must be nonnegative.')
    return out


def _log_sum_pow(p, t, s):
    """ log(t^2H + s^2H), computed in the log domain. """
    with np.errstate(divide='ignore'):
        return np.logaddexp(2 * p.h * np.log(t), 2 * p.h * np.log(s))


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def covariance(p, t, s):
    """
    Covariance R(t, s) of bifBm. Vectorized over t and s.

    The diagonal is returned as t^2HK exactly.
    """

    t, s = _times(t, s)
    with np.errstate(divide='ignore', invalid='ignore'):
        first = np.exp(p.k * _log_sum_pow(p, t, s))
        r = 2.0 ** (-p.k) * (first - np.abs(t - s) ** (2 * p.hk))
    r = np.where((t == 0) | (s == 0), 0.0, r)
    r = np.where(t == s, t ** (2 * p.hk), r)
    return _scalar(r)


def covariance_reduced(p, r, s):
    """ R(r, s) evaluated as r^2HK R(1, s/r), the self-similar reduction. Needs r > 0. """
    r, s = _times(r, s)
    if np.any(r <= 0):
        raise DomainError('The reduced form needs r > 0.')
    return _scalar(r ** (2 * p.hk) * np.asarray(covariance(p, 1.0, s / r)))


def variogram(p, t, s):
    """ E(B_t - B_s)^2 = R(t,t) + R(s,s) - 2R(t,s), clipped at zero. """
    t, s = _times(t, s)
    v = t ** (2 * p.hk) + s ** (2 * p.hk) - 2 * np.asarray(covariance(p, t, s))
    v = np.where(t == s, 0.0, np.maximum(v, 0.0))
    return _scalar(v)


def quasi_helix_bounds(p, t, s):
    """
    Bounds 2^-K |t-s|^2HK <= E(B_t - B_s)^2 <= 2^(1-K) |t-s|^2HK.

    Returns
    ---------
    (lower, upper)
    """

    t, s = _times(t, s)
    d = np.abs(t - s) ** (2 * p.hk)
    return _scalar(2.0 ** (-p.k) * d), _scalar(2.0 ** (1 - p.k) * d)


def mixed_partial(p, t, s):
    """
    d^2 R / dt ds off the diagonal:

        2^-K [4H^2 K(K-1) (ts)^(2H-1) (t^2H + s^2H)^(K-2) + 2HK(2HK-1) |t-s|^(2HK-2)]
    """

    t, s = _times(t, s)
    if np.any(t <= 0) or np.any(s <= 0):
        raise DomainError('mixed_partial needs strictly positive times.')
    if np.any(t == s):
        raise SingularityError('mixed_partial is singular on the diagonal t = s.')
    h, k, hk = p.h, p.k, p.hk
    lsum = _log_sum_pow(p, t, s)
    first = 4 * h * h * k * (k - 1) * np.exp((2 * h - 1) * (np.log(t) + np.log(s)) + (k - 2) * lsum)
    second = 2 * hk * (2 * hk - 1) * np.abs(t - s) ** (2 * hk - 2)
    return _scalar(2.0 ** (-k) * (first + second))


def h_fn(p, y):
    """
    h(y) = y^2HK + (y-1)^2HK - 2^(1-K) (y^2H + (y-1)^2H)^K for y >= 1.

    Evaluated as y^2HK times a bracket in e = 1/y built from expm1/log1p, so the
    O(e^2) bracket keeps its relative accuracy at large y.
    """

    y = np.asarray(y, dtype=float)
    if np.any(y < 1):
        raise DomainError('h_fn is defined for y >= 1.')
    h, k, hk = p.h, p.k, p.hk
    e = 1.0 / y
    with np.errstate(divide='ignore'):
        l1 = np.log1p(-e)
        u = np.expm1(2 * h * l1)
        bracket = np.expm1(2 * hk * l1) - 2 * np.expm1(k * np.log1p(u / 2))
    return _scalar(y ** (2 * hk) * bracket)


def scaled_h(p, y):
    """ y h(y); tends to (1 - 2H)/4 in the critical regime. """
    return _scalar(np.asarray(y, dtype=float) * np.asarray(h_fn(p, y)))


def _diagonal_double_integral(kernel, weight_u, weight_v, p, T, quad):
    """
    2 int_0^T du int_0^u dv wu(u) wv(v) kernel(u, v), with v = u - w^(1/(2HK-1)).

    The substitution absorbs the |u-v|^(2HK-2) singularity of the kernel into the Jacobian.
    """

    a = 2 * p.hk - 1
    inv = 1.0 / a

    def integrand(w, u):
        d = w ** inv
        v = u - d
        if v <= 0 or d <= 0:
            return 0.0
        jac = inv * w ** (inv - 1)
        return weight_u(u) * weight_v(v) * kernel(u, v) * jac

    val, err = integrate.dblquad(integrand, 0.0, T, 0.0, lambda u: u ** a,
                                 epsabs=quad.epsabs, epsrel=quad.epsrel)
    if not np.isfinite(val):
        raise QuadratureFailure(f'|H|-norm quadrature did not converge (estimate {val}, error {err}).')
    log.debug(f'|H| double integral {val:.12g} +- {err:.2g}')
    return 2 * val


def abs_h_norm(f, p, T, quad=None):
    """
    |H|-type norms of a real function on [0, T].

    Parameters
    ---------
    f:
        Vectorized callable on [0, T].
    p:
        HurstParams with 2HK > 1.
    T:
        Horizon.
    quad:
        QuadratureSpec, defaults to epsabs 1e-10, epsrel 1e-8.

    Returns
    ---------
    (signed, absolute): the integrals of f(u)f(v) and |f(u)||f(v)| against d^2R/dudv.
    """

    quad = quad or QuadratureSpec()
    if p.regime != 'supercritical':
        raise DomainError(f'abs_h_norm needs 2HK > 1, got 2HK = {2 * p.hk:g}.')
    if T <= 0:
        raise DomainError('Horizon must be positive.')

    h, k, hk = p.h, p.k, p.hk
    c1 = 2.0 ** (-k) * 4 * h * h * k * (k - 1)
    c2 = 2.0 ** (-k) * 2 * hk * (2 * hk - 1)

    def kernel(u, v):
        return (c1 * (u * v) ** (2 * h - 1) * (u ** (2 * h) + v ** (2 * h)) ** (k - 2)
                + c2 * abs(u - v) ** (2 * hk - 2))

    fv = lambda u: float(f(u))
    af = lambda u: abs(float(f(u)))
    signed = _diagonal_double_integral(kernel, fv, fv, p, T, quad)
    absolute = _diagonal_double_integral(kernel, af, af, p, T, quad)
    return signed, absolute


def abs_h_tensor_norm(f, g, p, T, quad=None):
    """
    |H| x |H| norm of the separable kernel phi(u, v) = f(u) g(v).

    The four-fold integral factorizes into the product of the two absolute norms.
    """

    _, nf = abs_h_norm(f, p, T, quad)
    _, ng = abs_h_norm(g, p, T, quad)
    return nf * ng
