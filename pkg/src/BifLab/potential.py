# potential.py
"""
Newtonian and logarithmic potentials U, the time-weighted potential

    Ubar(s, z) = s^theta / prod_j sqrt(2h_j) * U(w),   w_i = (z_i - x_i) s^(1/2 - h_i) / sqrt(2h_i),

with h_i = H_iK_i, and the d-dimensional Itô and mollified Tanaka checks built on them.
"""

import math
import logging
import itertools

import numpy as np
from scipy import special

from .calculus import MCEstimate, ito_time_residual, at_resolution
from .chaos import beta_order0_mean
from .covariance import covariance
from .kernels import gauss_hermite_rule
from .params import MultiParams, QuadratureSpec, gamma_exponent, power_weights
from .util import DomainError, InadmissibleSpec, SingularityError

log = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329


class PotentialSpec:
    """
    Data of the weighted potential Ubar.

    Attributes
    ---------
    mp:
        MultiParams of dimension d >= 2.
    theta:
        Time weight exponent.
    x:
        Level, a d-vector.
    gamma:
        (2 - d)/2 + theta + (d - 2) hk_star - sum_i H_iK_i; must be positive.
    """

    def __init__(self, mp, theta, x=None):
        if mp.dims < 2:
            raise DomainError('Potential specs need d >= 2.')
        self.mp = mp
        self.dims = mp.dims
        self.theta = float(theta)
        self.x = np.zeros(mp.dims) if x is None else np.asarray(x, dtype=float).reshape(mp.dims)
        self.gamma = gamma_exponent(mp, theta)
        if self.gamma <= 0:
            raise InadmissibleSpec(self.gamma)
        self.hk = mp.hk
        self.norm = float(np.prod(np.sqrt(2 * self.hk)))

    def derived_bound_holds(self):
        """ gamma - 3/2 + H_iK_i > -1 for every i, which follows from gamma > 0 and 2H_iK_i > 1. """
        return bool(np.all(self.gamma - 1.5 + self.hk > -1))

    def scale(self, s):
        """ a_i(s) = s^(1/2 - h_i) / sqrt(2h_i), stacked on a trailing axis. """
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0):
            raise DomainError('Ubar is defined for s > 0.')
        return s[..., None] ** (0.5 - self.hk) / np.sqrt(2 * self.hk)

    def scaled_argument(self, s, z):
        return (np.asarray(z, dtype=float) - self.x) * self.scale(s)

    def export_json(self):
        return {'params': self.mp.export_json(), 'theta': self.theta, 'x': self.x.tolist()}

    def __repr__(self):
        return f'PotentialSpec(d={self.dims}, theta={self.theta:g}, x={self.x.tolist()}, gamma={self.gamma:.4g})'


def _newton_constant(d):
    """ C_d = Gamma(d/2 - 1) / (2 pi^(d/2)) for d >= 3. """
    return special.gamma(d / 2 - 1) / (2 * math.pi ** (d / 2))


def _flux_constant(d):
    """ k_d = Gamma(d/2) / pi^(d/2), so that grad U(w) = k_d w / |w|^d in every dimension. """
    return special.gamma(d / 2) / math.pi ** (d / 2)


def _radius(d, z, allow_zero=False):
    z = np.asarray(z, dtype=float)
    if d < 2:
        raise DomainError('Potentials need d >= 2.')
    if z.shape[-1] != d:
        raise DomainError(f'Expected {d}-vectors, got trailing axis {z.shape[-1]}.')
    r = np.sqrt(np.sum(z * z, axis=-1))
    if not allow_zero and np.any(r == 0):
        raise SingularityError('The potential is singular at the origin.')
    return z, r


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def newtonian_U(d, z):
    """ U(z) = -C_d |z|^(2-d) for d >= 3 and (1/pi) log|z| for d = 2; half its Laplacian is a Dirac mass. """
    z, r = _radius(d, z)
    if d == 2:
        return _out(np.log(r) / math.pi)
    return _out(-_newton_constant(d) * r ** (2 - d))


def newtonian_gradient(d, z):
    z, r = _radius(d, z)
    return _flux_constant(d) * z / r[..., None] ** d


def newtonian_hessian_diag(d, z):
    z, r = _radius(d, z)
    r = r[..., None]
    return _flux_constant(d) * (r ** (-d) - d * z * z * r ** (-d - 2))


def heat_kernel_d(eps, z):
    """ p_eps^d(z), the d-dimensional Gaussian density with covariance eps I. """
    z = np.asarray(z, dtype=float)
    d = z.shape[-1]
    return _out((2 * math.pi * eps) ** (-d / 2) * np.exp(-0.5 * np.sum(z * z, axis=-1) / eps))


def _ein(u):
    """ Ein(u) = gamma + log u + E1(u), entire; series below 1. """
    u = np.asarray(u, dtype=float)
    us = np.minimum(u, 1.0)
    term = us.copy()
    acc = us.copy()
    for k in range(2, 30):
        term = -term * us * (k - 1) / (k * k)
        acc = acc + term
    ub = np.maximum(u, 1.0)
    return np.where(u < 1.0, acc, EULER_GAMMA + np.log(ub) + special.exp1(ub))


def mollified_U(d, eps, z):
    """
    U_eps = p_eps^d * U in closed form, with u = |z|^2 / 2eps:

        d >= 3: -C_d (2eps)^(1-d/2) [u^(1-d/2) P(d/2, u) + e^-u / Gamma(d/2)]
        d = 2:  (1/2pi) [log(2eps) + Ein(u) - gamma]

    P the regularized lower incomplete gamma function. Finite at the origin.
    """

    if not eps > 0:
        raise DomainError('Mollifier variance must be positive.')
    z, r = _radius(d, z, allow_zero=True)
    u = r * r / (2 * eps)
    if d == 2:
        return _out((math.log(2 * eps) + _ein(u) - EULER_GAMMA) / (2 * math.pi))
    a = d / 2
    with np.errstate(divide='ignore', invalid='ignore'):
        inner = np.where(u > 0, u ** (1 - a) * special.gammainc(a, u), 0.0)
    return _out(-_newton_constant(d) * (2 * eps) ** (1 - a) * (inner + np.exp(-u) / special.gamma(a)))


def _mollified_radial_factor(d, eps, r):
    """ G(r) with grad U_eps(w) = G(|w|) w, from the mass of p_eps^d inside the ball of radius r. """
    u = r * r / (2 * eps)
    k = _flux_constant(d)
    origin = k / (special.gamma(d / 2 + 1) * (2 * eps) ** (d / 2))
    with np.errstate(divide='ignore', invalid='ignore'):
        g = np.where(r > 0, k * special.gammainc(d / 2, u) / r ** d, origin)
    # small u loses digits in P(d/2, u) / r^d
    return np.where(u < 1e-8, origin, g)


def mollified_gradient(d, eps, z):
    z, r = _radius(d, z, allow_zero=True)
    return _mollified_radial_factor(d, eps, r)[..., None] * z


def mollified_hessian_diag(d, eps, z):
    """ d_ii U_eps = G + (2 p_eps^d - d G) w_i^2 / |w|^2, with w_i^2/|w|^2 read as 1/d at the origin. """
    z, r = _radius(d, z, allow_zero=True)
    g = _mollified_radial_factor(d, eps, r)[..., None]
    p = np.asarray(heat_kernel_d(eps, z))[..., None]
    r = r[..., None]
    with np.errstate(divide='ignore', invalid='ignore'):
        frac = np.where(r > 0, z * z / (r * r), 1.0 / d)
    return g + (2 * p - d * g) * frac


def mollified_U_quadrature(d, eps, z, points=40):
    """ E U(z + sqrt(eps) N) by a product Gauss-Hermite rule; accurate only well away from the origin. """
    z, _ = _radius(d, z, allow_zero=True)
    x, w = gauss_hermite_rule(points)
    nodes = np.array(list(itertools.product(x, repeat=d))) * math.sqrt(eps)
    weights = np.prod(np.array(list(itertools.product(w, repeat=d))), axis=1)
    values = newtonian_U(d, z[..., None, :] + nodes)
    return _out(values @ weights)


def _kernel_parts(d, w, eps):
    if eps is None:
        return newtonian_U(d, w), newtonian_gradient(d, w), newtonian_hessian_diag(d, w)
    return mollified_U(d, eps, w), mollified_gradient(d, eps, w), mollified_hessian_diag(d, eps, w)


def u_bar(spec, s, z, eps=None):
    """ Ubar(s, z); with eps > 0 the kernel U is replaced by U_eps. """
    w = spec.scaled_argument(s, z)
    u = newtonian_U(spec.dims, w) if eps is None else mollified_U(spec.dims, eps, w)
    return _out(np.asarray(s, dtype=float) ** spec.theta / spec.norm * u)


def u_bar_derivatives(spec, s, z, eps=None):
    """
    Analytic derivatives of Ubar.

    Returns
    ---------
    (ds, grad, second): d/ds, the gradient in z and the diagonal of the Hessian in z.
    """

    s = np.asarray(s, dtype=float)
    a = spec.scale(s)
    w = spec.scaled_argument(s, z)
    u, grad, hess = _kernel_parts(spec.dims, w, eps)
    pref = s ** spec.theta / spec.norm
    ds = spec.theta * s ** (spec.theta - 1) / spec.norm * u + pref / s * np.sum(grad * w * (0.5 - spec.hk), axis=-1)
    pref = np.asarray(pref)[..., None]
    return _out(ds), pref * a * grad, pref * a * a * hess


def laplacian_stencil(func, z, step):
    """
    Second derivatives along each axis by the fourth-order five-point stencil.

    func maps arrays (..., d) to (...). Returns a d-vector.
    """

    z = np.asarray(z, dtype=float)
    d = z.size
    offsets = np.array([-2, -1, 0, 1, 2], dtype=float)
    coef = np.array([-1, 16, -30, 16, -1], dtype=float) / (12 * step * step)
    pts = np.repeat(z[None, None, :], 5, axis=1).repeat(d, axis=0)
    for i in range(d):
        pts[i, :, i] += offsets * step
    values = np.asarray(func(pts.reshape(-1, d))).reshape(d, 5)
    return values @ coef


def harmonicity_residual(d, z, step=None):
    """ |Delta U(z)| by the stencil; zero away from the origin. """
    z = np.asarray(z, dtype=float)
    step = 1e-3 * float(np.linalg.norm(z)) if step is None else step
    return abs(float(np.sum(laplacian_stencil(lambda y: newtonian_U(d, y), z, step))))


def laplace_identity_residual(d, a, eps, z, step=1e-3, method='closed', points=40):
    """
    |1/2 sum_i a_i^-2 d_ii V_eps(z) - p_eps^d(a z)| with V_eps(z) = U_eps(a_1 z_1, ..., a_d z_d).

    method='closed' uses the closed form of U_eps, method='quadrature' the product Gauss-Hermite
    convolution (valid only for |a z| well beyond sqrt(eps)).
    """

    a = np.asarray(a, dtype=float)
    z = np.asarray(z, dtype=float)
    if a.size != d or z.size != d:
        raise DomainError(f'Scalings and point must have {d} entries.')
    if method == 'closed':
        v = lambda y: mollified_U(d, eps, y * a)
    elif method == 'quadrature':
        v = lambda y: mollified_U_quadrature(d, eps, y * a, points)
    else:
        raise DomainError(f'Unknown method "{method}".')
    lhs = 0.5 * float(np.sum(laplacian_stencil(v, z, step) / (a * a)))
    return abs(lhs - heat_kernel_d(eps, a * z))


class EnvelopeReport:
    """
    Smallest constants C for which the bounds

        |d_i Ubar| <= C s^((1-d)/2 + theta) |q|^(1-d)
        |d_s Ubar| <= C s^(-d/2 + theta) |q|^(2-d)
        |Ubar|     <= C s^((2-d)/2 + theta) |q|^(2-d),    q_i = (z_i - x_i) s^-h_i

    hold on a sample. For d = 2 the last two right-hand sides carry a factor (1 + |log|q||)
    and log_adjusted is set.
    """

    def __init__(self, c_gradient, c_time, c_value, n_samples, log_adjusted):
        self.c_gradient = c_gradient
        self.c_time = c_time
        self.c_value = c_value
        self.n_samples = n_samples
        self.log_adjusted = log_adjusted

    @property
    def finite(self):
        return bool(np.all(np.isfinite([self.c_gradient, self.c_time, self.c_value])))

    def export_json(self):
        return {'c_gradient': self.c_gradient, 'c_time': self.c_time, 'c_value': self.c_value,
                'n_samples': self.n_samples, 'log_adjusted': self.log_adjusted}

    def __repr__(self):
        return (f'EnvelopeReport(C_grad={self.c_gradient:.4g}, C_s={self.c_time:.4g}, '
                f'C_value={self.c_value:.4g}, n={self.n_samples})')


def envelope_checks(spec, s, z):
    """ Empirical sup of the envelope ratios over sample times s (m,) and points z (m, d). """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape != (s.size, spec.dims):
        raise DomainError(f'Expected {s.size} points of dimension {spec.dims}, got shape {z.shape}.')
    d, th = spec.dims, spec.theta
    q = np.linalg.norm((z - spec.x) * s[:, None] ** (-spec.hk), axis=-1)
    if np.any(q == 0):
        raise SingularityError('Envelope samples must avoid z = x.')
    value = np.asarray(u_bar(spec, s, z))
    ds, grad, _ = u_bar_derivatives(spec, s, z)
    log_factor = 1 + np.abs(np.log(q)) if d == 2 else 1.0
    c_grad = np.max(np.abs(grad) / (s ** ((1 - d) / 2 + th) * q ** (1 - d))[:, None])
    c_time = np.max(np.abs(ds) / (s ** (-d / 2 + th) * q ** (2 - d) * log_factor))
    c_value = np.max(np.abs(value) / (s ** ((2 - d) / 2 + th) * q ** (2 - d) * log_factor))
    if d == 2:
        log.info('d = 2: potential envelopes are taken against (1 + |log|q||), not |q|^0.')
    return EnvelopeReport(float(c_grad), float(c_time), float(c_value), s.size, d == 2)


def multidim_ito_residual(mp, tf, t, quad=None):
    """ Deterministic d-dimensional Itô identity for time-dependent test functions; needs every 2H_iK_i > 1. """
    if not isinstance(mp, MultiParams):
        mp = MultiParams(mp)
    for p in mp:
        if p.regime != 'supercritical':
            raise DomainError(f'The multidimensional Itô formula needs 2H_iK_i > 1, got {p}.')
    return ito_time_residual(mp, tf, t, quad or QuadratureSpec())


class MultidimTanakaEstimate:
    """
    Terms of the Itô expansion of Ubar_eps(t, B_t), per path.

    Attributes
    ---------
    boundary:
        Ubar_eps at s -> 0+, reported on its own.
    lhs, time_part, integrals, correction:
        Ubar_eps(t, B_t) - boundary, the s-derivative part, the summed divergence estimates and I_2.
    residual:
        MCEstimate of the squared residual.
    correction_mean:
        The exact mean of I_2 from its order-0 chaos term.
    """

    def __init__(self, eps, n, boundary, lhs, time_part, integrals, correction, correction_mean):
        self.eps = eps
        self.n = n
        self.boundary = boundary
        self.lhs = lhs
        self.time_part = time_part
        self.integrals = integrals
        self.correction = MCEstimate(correction)
        self.correction_mean = correction_mean
        self.residual = MCEstimate((lhs - time_part - integrals - correction) ** 2)

    def correction_consistent(self, n_se=3.0, slack=0.0):
        return self.correction.within(self.correction_mean, n_se, slack)

    def __repr__(self):
        return (f'MultidimTanakaEstimate(eps={self.eps:g}, n={self.n}, boundary={self.boundary:.3g}, '
                f'residual={self.residual!r})')


def mollified_multidim_tanaka(ensemble, spec, eps, n=None, quad=None):
    """
    Monte Carlo check of the Itô expansion of Ubar_eps along a d-dimensional ensemble:

        Ubar_eps(t, B_t) - Ubar_eps(0+) = sum_j [Ubar_eps(t_j, B_j-1) - Ubar_eps(t_j-1, B_j-1)]
                                          + sum_i delta_i + I_2,

    I_2 = int_0^t s^theta p_eps^d(w(s, B_s)) ds / prod_j sqrt(2h_j). Time zero is read as 1e-12 t.
    """

    if not eps > 0:
        raise DomainError('The multidimensional Tanaka check needs eps > 0.')
    if ensemble.dims != spec.dims:
        raise DomainError(f'Ensemble is {ensemble.dims}-dimensional, spec is {spec.dims}-dimensional.')
    for p in spec.mp:
        if p.regime != 'supercritical':
            raise DomainError(f'The multidimensional Tanaka check needs 2H_iK_i > 1, got {p}.')
    ensemble = at_resolution(ensemble, n)
    grid = ensemble.grid
    t = grid.horizon
    times = grid.times.copy()
    times[0] = 1e-12 * t
    z = np.moveaxis(np.asarray(ensemble.values), 0, -1)
    d = spec.dims

    boundary = float(u_bar(spec, times[0], np.zeros(d), eps))
    lhs = np.asarray(u_bar(spec, times[-1], z[:, -1], eps)) - boundary

    left = z[:, :-1]
    time_part = np.sum(np.asarray(u_bar(spec, times[1:], left, eps))
                       - np.asarray(u_bar(spec, times[:-1], left, eps)), axis=1)

    _, grad, hess = u_bar_derivatives(spec, times[:-1], left, eps)
    corr = np.stack([np.asarray(covariance(p, grid.times[:-1], grid.times[1:])) - grid.times[:-1] ** (2 * p.hk)
                     for p in spec.mp], axis=-1)
    integrals = np.sum(grad * np.diff(z, axis=1), axis=(1, 2)) - np.sum(hess * corr, axis=(1, 2))

    dens = np.asarray(heat_kernel_d(eps, spec.scaled_argument(times, z)))
    correction = dens @ power_weights(grid, spec.theta + 1) / spec.norm

    expected = beta_order0_mean(spec.mp, spec.theta, spec.x, eps, t, quad)
    est = MultidimTanakaEstimate(eps, grid.n_steps, boundary, lhs, time_part, integrals, correction, expected)
    log.info(f'{est!r}; I_2 mean {est.correction.mean:.6g} +- {est.correction.se:.2g} vs {expected:.6g}')
    return est
