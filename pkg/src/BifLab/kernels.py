# kernels.py
"""
Gaussian heat kernels, normalized Hermite polynomials H_n = He_n / n! and the
mollifier family F_eps used for the Tanaka formula.
"""

import math
from functools import lru_cache

import numpy as np
from numpy.polynomial import hermite_e
from scipy import special

from .util import DomainError, QuadratureFailure

SQRT_2PI = math.sqrt(2 * math.pi)

# Orders up to this value are covered by the default Gauss-Hermite rule
MAX_ORDER = 30


class MollifierParam:
    """ Variance epsilon > 0 of the Gaussian mollifier. """

    def __init__(self, epsilon):
        if not epsilon > 0:
            raise DomainError(f'Mollifier variance must be positive, got {epsilon}.')
        self.epsilon = float(epsilon)

    def __float__(self):
        return self.epsilon

    def __repr__(self):
        return f'MollifierParam({self.epsilon!r})'


def _eps(eps):
    return eps.epsilon if isinstance(eps, MollifierParam) else MollifierParam(eps).epsilon


def gauss_kernel(var, y):
    """ p_var(y) = exp(-y^2 / 2var) / sqrt(2 pi var). Vectorized over var and y. """
    var = np.asarray(var, dtype=float)
    if np.any(var <= 0):
        raise DomainError('Gaussian kernel variance must be positive.')
    y = np.asarray(y, dtype=float)
    out = np.exp(-0.5 * y * y / var) / np.sqrt(2 * np.pi * var)
    return float(out) if out.ndim == 0 else out


def hermite(n, x):
    """
    Normalized Hermite polynomial H_n(x), via (n+1) H_{n+1} = x H_n - H_{n-1}, H_0 = 1.
    """

    if int(n) != n or n < 0:
        raise DomainError(f'Hermite order must be a nonnegative integer, got {n}.')
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return float(prev) if x.ndim == 0 else prev
    cur = x.copy()
    for m in range(1, int(n)):
        prev, cur = cur, (x * cur - prev) / (m + 1)
    return float(cur) if x.ndim == 0 else cur


def hermite_table(N, x):
    """ Array of H_0(x), ..., H_N(x) stacked along a new leading axis. """
    x = np.asarray(x, dtype=float)
    out = np.empty((N + 1,) + x.shape)
    out[0] = 1.0
    if N >= 1:
        out[1] = x
    for m in range(1, N):
        out[m + 1] = (x * out[m] - out[m - 1]) / (m + 1)
    return out


def hermite_from_definition(n, x):
    """ He_n(x) / n! from the power-series coefficients; used to cross-check the recurrence. """
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    return hermite_e.hermeval(x, coef) / math.factorial(n)


@lru_cache(maxsize=16)
def gauss_hermite_rule(points):
    """ Nodes and weights for E g(N) = sum_i w_i g(x_i), N standard normal. """
    x, w = hermite_e.hermegauss(points)
    w = w / SQRT_2PI
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gaussian_expectation(g, var=1.0, points=80):
    """ E g(sqrt(var) N) by Gauss-Hermite quadrature; g must be vectorized. """
    if var < 0:
        raise DomainError('Variance must be nonnegative.')
    x, w = gauss_hermite_rule(points)
    return float(np.dot(w, g(np.sqrt(var) * x)))


def hermite_orthogonality(n, m, max_order=MAX_ORDER):
    """
    E[H_n(N) H_m(N)] for N standard normal, by a Gauss-Hermite rule exact up to degree 2*max_order + 1.

    Equals delta_nm / n!.
    """

    if n < 0 or m < 0:
        raise DomainError('Hermite orders must be nonnegative.')
    if n > max_order or m > max_order:
        raise QuadratureFailure(f'Orders ({n}, {m}) exceed the quadrature validity range (max {max_order}).')
    x, w = gauss_hermite_rule(max_order + 1)
    return float(np.dot(w, hermite(n, x) * hermite(m, x)))


def mollifier_prime(eps, z):
    """ F'_eps(z) = 2 Phi(z / sqrt(eps)) - 1 = erf(z / sqrt(2 eps)). """
    e = _eps(eps)
    out = special.erf(np.asarray(z, dtype=float) / math.sqrt(2 * e))
    return float(out) if np.ndim(out) == 0 else out


def mollifier(eps, z):
    """
    F_eps(z) = int_0^z F'_eps(y) dy = z erf(z/c) + c/sqrt(pi) (exp(-z^2/c^2) - 1), c = sqrt(2 eps).

    0 <= F_eps(z) <= |z|.
    """

    e = _eps(eps)
    c = math.sqrt(2 * e)
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    # |z| erfc(|z|/c) and c/sqrt(pi) exp(-z^2/c^2) are both tiny in the tails
    out = a - a * special.erfc(a / c) + c / math.sqrt(math.pi) * np.expm1(-(a / c) ** 2)
    out = np.clip(out, 0.0, a)
    return float(out) if out.ndim == 0 else out


def mollifier_second(eps, z):
    """ F''_eps(z) = 2 p_eps(z). """
    return 2 * gauss_kernel(_eps(eps), z)
