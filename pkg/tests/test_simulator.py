import json

import numpy as np
import pytest

from BifLab.params import HurstParams, MultiParams, TimeGrid
from BifLab.simulator import (PathEnsemble, covariance_matrix, empirical_covariance_check, factorize,
                              increment_normality, sample_paths, self_similarity_check)
from BifLab.util import DomainError, NotPositiveSemidefinite


class TestFactorize:
    def test_brownian_matrix(self, brownian):
        a = covariance_matrix(brownian, TimeGrid([0.0, 1.0, 2.0]))
        np.testing.assert_allclose(a, [[1.0, 1.0], [1.0, 2.0]], rtol=1e-14)
        fac = factorize(a)
        assert fac.jitter == 0.0
        np.testing.assert_allclose(fac.lower, [[1.0, 0.0], [1.0, 1.0]], atol=1e-14)

    def test_identity(self):
        fac = factorize(np.eye(4))
        np.testing.assert_array_equal(fac.lower, np.eye(4))

    def test_reconstruction(self):
        a = covariance_matrix(HurstParams(0.7, 0.5), TimeGrid.uniform(1.0, 64))
        fac = factorize(a)
        assert fac.reconstruction_error(a) < 1e-12

    def test_critical_grid(self, critical):
        a = covariance_matrix(critical, TimeGrid.uniform(1.0, 256))
        fac = factorize(a)
        assert fac.relative_jitter <= 1e-10
        assert fac.reconstruction_error(a) < 1e-9

    @pytest.mark.parametrize('n', [16, 64, 256])
    def test_random_admissible_params(self, n):
        rng = np.random.default_rng(2024)
        grid = TimeGrid.uniform(1.0, n)
        for _ in range(50):
            h = rng.uniform(0.5, 0.99)
            k = rng.uniform(1 / (2 * h), 1.0)
            a = covariance_matrix(HurstParams(h, k), grid)
            fac = factorize(a)
            assert fac.relative_jitter <= 1e-8, (h, k)
            assert fac.reconstruction_error(a) <= 1e-10, (h, k)

    def test_singular_matrix_needs_jitter(self):
        a = np.ones((3, 3))
        fac = factorize(a)
        assert 0 < fac.relative_jitter <= 1e-8

    def test_indefinite_matrix(self):
        with pytest.raises(NotPositiveSemidefinite):
            factorize(np.array([[1.0, 2.0], [2.0, 1.0]]))

    @pytest.mark.parametrize('matrix', [np.ones((2, 3)), np.array([[1.0, 0.5], [0.0, 1.0]])])
    def test_rejects_malformed(self, matrix):
        with pytest.raises(DomainError):
            factorize(matrix)


class TestSamplePaths:
    def test_shape_and_origin(self, supercritical, unit_grid):
        ens = sample_paths(supercritical, unit_grid, 10, seed=3)
        assert ens.values.shape == (1, 10, 17)
        assert np.all(ens.values[..., 0] == 0.0)

    def test_read_only(self, supercritical, unit_grid):
        ens = sample_paths(supercritical, unit_grid, 4, seed=3)
        with pytest.raises(ValueError):
            ens.values[0, 0, 1] = 1.0

    def test_reproducible(self, supercritical, unit_grid):
        a = sample_paths(supercritical, unit_grid, 50, seed=42)
        b = sample_paths(supercritical, unit_grid, 50, seed=42)
        np.testing.assert_array_equal(a.values, b.values)
        c = sample_paths(supercritical, unit_grid, 50, seed=43)
        assert not np.array_equal(a.values, c.values)

    def test_thread_count_invariance(self, planar):
        grid = TimeGrid.uniform(1.0, 8)
        one = sample_paths(planar, grid, 5000, seed=9, threads=1)
        four = sample_paths(planar, grid, 5000, seed=9, threads=4)
        np.testing.assert_array_equal(one.values, four.values)

    def test_prefix_stable(self, supercritical, unit_grid):
        small = sample_paths(supercritical, unit_grid, 10, seed=5)
        large = sample_paths(supercritical, unit_grid, 100, seed=5)
        np.testing.assert_array_equal(small.values, large.head(10).values)

    def test_dimensions_differ(self, planar, unit_grid):
        ens = sample_paths(planar, unit_grid, 20, seed=1)
        assert not np.array_equal(ens.dimension(0), ens.dimension(1))

    @pytest.mark.parametrize('n_paths', [0, 2.5, -1])
    def test_rejects_path_count(self, supercritical, unit_grid, n_paths):
        with pytest.raises(DomainError):
            sample_paths(supercritical, unit_grid, n_paths, seed=1)

    @pytest.mark.slow
    def test_empirical_covariance(self):
        p = HurstParams(0.6, 0.8)
        ens = sample_paths(p, TimeGrid([0.0, 1.0, 2.0]), 20000, seed=1)
        fraction, emp, se = empirical_covariance_check(ens, n_se=4.0)
        assert fraction == 1.0
        assert emp[0, 1] == pytest.approx(0.9174, abs=4 * se[0, 1] + 1e-4)

    @pytest.mark.slow
    def test_increments_are_gaussian(self, supercritical, unit_grid):
        ens = sample_paths(supercritical, unit_grid, 5000, seed=2)
        _, pvalue = increment_normality(ens)
        assert pvalue > 1e-4


class TestPathEnsemble:
    @pytest.fixture
    def ensemble(self, supercritical, unit_grid):
        return sample_paths(supercritical, unit_grid, 8, seed=11)

    def test_coarsen(self, ensemble):
        coarse = ensemble.coarsen(4)
        assert len(coarse.grid) == 5
        np.testing.assert_array_equal(coarse.values, ensemble.values[:, :, ::4])
        assert ensemble.coarsen(1) is ensemble

    def test_restrict(self, ensemble):
        half = ensemble.restrict(0.5)
        assert half.grid.horizon == pytest.approx(0.5)
        np.testing.assert_array_equal(half.values, ensemble.values[:, :, :9])
        with pytest.raises(DomainError):
            ensemble.restrict(0.51)
        with pytest.raises(DomainError):
            ensemble.restrict(0.0)

    @pytest.mark.parametrize('k', [0, 9, 1.5])
    def test_head_rejects(self, ensemble, k):
        with pytest.raises(DomainError):
            ensemble.head(k)

    def test_rejects_bad_shape(self, supercritical, unit_grid):
        with pytest.raises(DomainError):
            PathEnsemble(MultiParams([supercritical]), unit_grid, np.zeros((1, 3, 5)), 0)

    def test_to_csv(self, ensemble, tmp_path):
        written = ensemble.to_csv(tmp_path)
        assert [f.name for f in written] == ['ensemble_dim0.csv', 'ensemble.json']
        rows = (tmp_path / 'ensemble_dim0.csv').read_text().splitlines()
        assert len(rows) == 9
        sidecar = json.loads((tmp_path / 'ensemble.json').read_text())
        assert sidecar['seed'] == 11 and sidecar['n_paths'] == 8


class TestSelfSimilarity:
    def test_unit_scale(self, supercritical, unit_grid):
        report = self_similarity_check(supercritical, 1.0, unit_grid, 200, seed=4)
        assert report.max_discrepancy == 0.0
        np.testing.assert_allclose(report.ratios, 1.0)

    def test_common_seed_scaling(self, supercritical, unit_grid):
        report = self_similarity_check(supercritical, 3.0, unit_grid, 200, seed=4)
        assert report.target == pytest.approx(3.0 ** 1.08)
        np.testing.assert_allclose(report.ratios, report.target, rtol=1e-10)

    def test_rejects_scale(self, supercritical, unit_grid):
        with pytest.raises(DomainError):
            self_similarity_check(supercritical, 0.0, unit_grid, 10, seed=1)
