# simulator.py
"""
Exact sampling of (multidimensional) bifBm on a time grid from the Cholesky factor of
its covariance matrix, with counter-based random streams per (dimension, path).
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats
from scipy.linalg import lapack

from .covariance import covariance, variogram
from .params import HurstParams, MultiParams, TimeGrid
from .util import DomainError, NotPositiveSemidefinite, resolve_threads, write_frame

log = logging.getLogger(__name__)

JITTER_START = 1e-14
JITTER_CAP = 1e-8

# Paths per worker task; fixed so that results never depend on the thread count
BLOCK_SIZE = 2048


def covariance_matrix(p, grid):
    """ Covariance matrix over the positive grid times; time 0 is dropped. """
    t = grid.positive_times
    return np.asarray(covariance(p, t[:, None], t[None, :]))


class Factorization:
    """
    Lower Cholesky factor of a covariance matrix.

    Attributes
    ---------
    lower:
        The factor L with L L^T = A + jitter I.
    jitter:
        The diagonal shift that was needed (0 if none).
    max_diagonal:
        max_i A_ii, the scale of the jitter schedule.
    """

    def __init__(self, lower, jitter, max_diagonal):
        self.lower = lower
        self.jitter = jitter
        self.max_diagonal = max_diagonal

    @property
    def relative_jitter(self):
        return self.jitter / self.max_diagonal if self.max_diagonal > 0 else 0.0

    def reconstruction_error(self, matrix):
        """ max |L L^T - A| / max_i A_ii. """
        diff = self.lower @ self.lower.T - matrix
        return float(np.max(np.abs(diff)) / self.max_diagonal)

    def __repr__(self):
        return f'Factorization(size={self.lower.shape[0]}, jitter={self.jitter:.3g})'


def factorize(matrix, jitter_start=JITTER_START, jitter_cap=JITTER_CAP):
    """
    Cholesky factorization with jitter escalation.

    The plain factorization is tried first; on failure a diagonal jitter of
    jitter_start * max-diagonal is added and raised by powers of 10 up to jitter_cap * max-diagonal.

    Raises
    ---------
    NotPositiveSemidefinite:
        Carrying the (0-based) pivot at which the last attempt failed.
    """

    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError('factorize needs a square matrix.')
    if not np.allclose(a, a.T, rtol=1e-12, atol=0):
        raise DomainError('factorize needs a symmetric matrix.')
    scale = float(np.max(np.diag(a)))
    if scale <= 0:
        raise NotPositiveSemidefinite(0, 0.0)

    jitters = [0.0]
    rel = jitter_start
    while rel <= jitter_cap * (1 + 1e-9):
        jitters.append(rel * scale)
        rel *= 10

    info = 0
    for jitter in jitters:
        c, info = lapack.dpotrf(a + jitter * np.eye(a.shape[0]), lower=1, clean=1)
        if info == 0:
            if jitter > 0:
                log.warning(f'Cholesky needed jitter {jitter:.3g} ({jitter / scale:.1g} x max-diagonal).')
            return Factorization(np.tril(c), jitter, scale)
        if info < 0:
            raise DomainError(f'LAPACK rejected argument {-info}.')
    raise NotPositiveSemidefinite(int(info) - 1, jitters[-1])


def stream_key(seed):
    """ Philox key derived from the master seed. """
    return np.random.SeedSequence(int(seed)).generate_state(2, dtype=np.uint64)


def substream(key, dimension, path):
    """
    Generator for one (dimension, path) pair.

    The pair occupies the upper counter words, so substreams never overlap while a path
    draws fewer than 2^128 blocks.
    """

    counter = np.array([0, 0, path, dimension], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


class PathEnsemble:
    """
    Immutable set of sampled bifBm paths.

    Attributes
    ---------
    params:
        MultiParams of the components.
    grid:
        TimeGrid of the samples.
    values:
        Read-only array indexed (dimension, path, time); values[..., 0] == 0.
    seed:
        Master seed.
    n_paths:
        Number of paths.
    """

    def __init__(self, params, grid, values, seed):
        values = np.asarray(values, dtype=float)
        if values.ndim != 3 or values.shape[0] != params.dims or values.shape[2] != len(grid):
            raise DomainError(f'Ensemble values have shape {values.shape}, incompatible with '
                              f'{params.dims} dimensions and {len(grid)} grid times.')
        values.flags.writeable = False
        self.params = params
        self.grid = grid
        self.values = values
        self.seed = seed
        self.n_paths = values.shape[1]

    @property
    def dims(self):
        return self.params.dims

    def dimension(self, i=0):
        """ (n_paths, n_times) view of component i. """
        return self.values[i]

    def coarsen(self, stride):
        """ The same paths observed on every stride-th grid time. """
        if stride == 1:
            return self
        grid = self.grid.coarsen(stride)
        return PathEnsemble(self.params, grid, self.values[:, :, ::stride], self.seed)

    def restrict(self, t):
        """ The paths up to grid time t, which must be on the grid. """
        idx = np.flatnonzero(np.isclose(self.grid.times, t, rtol=1e-12, atol=0))
        if idx.size == 0:
            raise DomainError(f'Time {t} is not a grid time.')
        j = int(idx[0])
        if j == self.grid.n_steps:
            return self
        if j == 0:
            raise DomainError('Cannot restrict an ensemble to time 0.')
        return PathEnsemble(self.params, TimeGrid(self.grid.times[:j + 1]), self.values[:, :, :j + 1], self.seed)

    def head(self, k):
        """ The first k paths. """
        if int(k) != k or not 1 <= k <= self.n_paths:
            raise DomainError(f'Cannot take {k} of {self.n_paths} paths.')
        return PathEnsemble(self.params, self.grid, self.values[:, :int(k)], self.seed)

    def to_csv(self, directory, prefix='ensemble'):
        """
        Writes one CSV per dimension (rows are paths, columns grid times) and a JSON sidecar.

        Returns
        ---------
        List of written paths.
        """

        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        columns = [repr(float(t)) for t in self.grid.times]
        for i in range(self.dims):
            fn = directory / f'{prefix}_dim{i}.csv'
            write_frame(pd.DataFrame(self.values[i], columns=columns), fn, index=False)
            written.append(fn)
        sidecar = directory / f'{prefix}.json'
        with open(sidecar, 'w') as outfile:
            json.dump(self.export_json(), outfile, indent=2, sort_keys=True)
        written.append(sidecar)
        return written

    def export_json(self):
        return {'params': self.params.export_json(), 'grid': self.grid.export_json(),
                'seed': self.seed, 'n_paths': self.n_paths}

    def __repr__(self):
        return f'PathEnsemble(dims={self.dims}, n_paths={self.n_paths}, {self.grid!r}, seed={self.seed})'


def _sample_block(lower, key, dimension, start, stop, out):
    m = lower.shape[0]
    z = np.empty((stop - start, m))
    for j in range(start, stop):
        z[j - start] = substream(key, dimension, j).standard_normal(m)
    out[start:stop, 1:] = z @ lower.T


def sample_paths(mp, grid, n_paths, seed, threads=None):
    """
    Samples n_paths independent copies of the d-dimensional bifBm on grid.

    Identical (mp, grid, n_paths, seed) give bit-identical values for any thread count.

    Parameters
    ---------
    mp:
        MultiParams, or a single HurstParams for d = 1.
    grid:
        TimeGrid.
    n_paths:
        Number of paths, at least 1.
    seed:
        Master seed (unsigned 64-bit integer).
    threads:
        Worker threads; defaults to BIFBM_THREADS or 1.
    """

    if isinstance(mp, HurstParams):
        mp = MultiParams([mp])
    if int(n_paths) != n_paths or n_paths < 1:
        raise DomainError(f'n_paths must be a positive integer, got {n_paths}.')
    n_paths = int(n_paths)
    threads = resolve_threads(threads)
    key = stream_key(seed)

    values = np.zeros((mp.dims, n_paths, len(grid)))
    tasks = []
    for i, p in enumerate(mp):
        fac = factorize(covariance_matrix(p, grid))
        log.info(f'Dimension {i}: factorized {len(grid) - 1} x {len(grid) - 1} covariance, '
                 f'jitter {fac.jitter:.3g}.')
        for start in range(0, n_paths, BLOCK_SIZE):
            tasks.append((fac.lower, key, i, start, min(start + BLOCK_SIZE, n_paths), values[i]))

    if threads == 1:
        for task in tasks:
            _sample_block(*task)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for fut in [pool.submit(_sample_block, *task) for task in tasks]:
                fut.result()
    return PathEnsemble(mp, grid, values, seed)


class SelfSimilarityReport:
    """
    Comparison of second moments of B_{ct_j} with c^2HK times those of B_{t_j}.

    Attributes
    ---------
    c:
        Scale factor.
    target:
        c^2HK.
    ratios:
        Empirical Var B_{ct_j} / Var B_{t_j} per positive grid time.
    discrepancies:
        Standardized differences (m2(ct_j) - c^2HK m2(t_j)) / SE.
    max_discrepancy:
        max_j |discrepancies_j|.
    law_discrepancies:
        (m2(ct_j) - (c t_j)^2HK) / SE against the closed form.
    """

    def __init__(self, c, target, ratios, discrepancies, law_discrepancies):
        self.c = c
        self.target = target
        self.ratios = ratios
        self.discrepancies = discrepancies
        self.max_discrepancy = float(np.max(np.abs(discrepancies)))
        self.law_discrepancies = law_discrepancies
        self.max_law_discrepancy = float(np.max(np.abs(law_discrepancies)))

    def __repr__(self):
        return (f'SelfSimilarityReport(c={self.c:g}, target={self.target:.6g}, '
                f'max_discrepancy={self.max_discrepancy:.3g})')


def self_similarity_check(p, c, grid, n_paths, seed, threads=None):
    """
    Samples B on grid and on c*grid with the same seed and compares second moments.

    With a common seed the two factors differ only by c^HK, so c = 1 gives zero discrepancy
    and any c checks the covariance scaling through the sampler; the closed-form comparison
    (law_discrepancies) is a genuine Monte Carlo test.
    """

    if not c > 0:
        raise DomainError(f'Scale factor must be positive, got {c}.')
    base = sample_paths(p, grid, n_paths, seed, threads).dimension(0)[:, 1:]
    scaled = sample_paths(p, grid.scaled(c), n_paths, seed, threads).dimension(0)[:, 1:]
    target = c ** (2 * p.hk)

    m_base, m_scaled = np.mean(base ** 2, axis=0), np.mean(scaled ** 2, axis=0)
    v_base, v_scaled = np.var(base ** 2, axis=0, ddof=1), np.var(scaled ** 2, axis=0, ddof=1)
    diff = m_scaled - target * m_base
    se = np.sqrt((v_scaled + target ** 2 * v_base) / n_paths)
    disc = np.divide(diff, se, out=np.zeros_like(diff), where=se > 0)
    law = (c * grid.positive_times) ** (2 * p.hk)
    law_disc = (m_scaled - law) / np.sqrt(v_scaled / n_paths)
    return SelfSimilarityReport(c, target, m_scaled / m_base, disc, law_disc)


def empirical_covariance_check(ensemble, dimension=0, n_se=4.0):
    """
    Fraction of empirical covariance entries within n_se standard errors of the closed form.

    The standard error of the mean of X_i X_j is estimated from the sample itself.
    """

    x = ensemble.dimension(dimension)[:, 1:]
    n = x.shape[0]
    exact = covariance_matrix(ensemble.params[dimension], ensemble.grid)
    emp = x.T @ x / n
    sq = x * x
    var = (sq.T @ sq / n - emp ** 2) * n / (n - 1)
    se = np.sqrt(np.maximum(var, 0.0) / n)
    ok = np.abs(emp - exact) <= n_se * se
    return float(np.mean(ok)), emp, se


def increment_normality(ensemble, dimension=0):
    """
    Kolmogorov-Smirnov tests of the increments over each grid cell, standardized by the exact
    increment variance. Paths are independent, so every per-cell test is exact.

    Returns
    ---------
    (statistic, p-value): the largest statistic and the Bonferroni-adjusted smallest p-value.
    """

    p = ensemble.params[dimension]
    t = ensemble.grid.times
    inc = np.diff(ensemble.dimension(dimension), axis=1)
    sd = np.sqrt(np.asarray(variogram(p, t[1:], t[:-1])))
    res = [stats.kstest(col, 'norm') for col in (inc / sd).T]
    statistic = max(float(r.statistic) for r in res)
    pvalue = min(1.0, len(res) * min(float(r.pvalue) for r in res))
    return statistic, pvalue
