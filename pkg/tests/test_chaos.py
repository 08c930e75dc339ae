import math

import numpy as np
import pytest
from scipy import integrate

from BifLab.calculus import local_time_mean, local_time_second_moment
from BifLab.chaos import (ChaosSeries, WatanabeIndex, beta_coeff, beta_order0_mean, d1_reduction_ratio,
                          local_time_chaos_moment, local_time_coeff_1d, multi_local_time_chaos_norms,
                          multi_local_time_coeff, multiple_integral_inner, shell, tail_exponent_estimate,
                          watanabe_partial_norm)
from BifLab.covariance import covariance
from BifLab.kernels import gauss_kernel, hermite
from BifLab.params import HurstParams, MultiParams
from BifLab.util import DomainError, InadmissibleSpec


def brownian_norm(n):
    """ a_n for Brownian motion at the origin over [0, 1]. """
    if n % 2:
        return 0.0
    m = n // 2
    return math.comb(2 * m, m) / 4 ** m * 2 / (math.pi * (n + 1))


class TestWatanabeIndex:
    def test_threshold(self, brownian, planar):
        assert WatanabeIndex(0.0, brownian).threshold == pytest.approx(0.5)
        assert WatanabeIndex(0.0, planar).threshold == pytest.approx(1 / 1.08 - 1)

    def test_admissible(self, brownian):
        assert WatanabeIndex(0.4, brownian).admissible
        assert not WatanabeIndex(0.5, brownian).admissible


class TestTailFit:
    def test_exact_power_law(self):
        n = np.arange(41)
        a = np.where(n > 0, 1.0 / np.maximum(n, 1) ** 2, 1.0)
        fit = tail_exponent_estimate(a, (10, 40))
        assert fit.slope == pytest.approx(-2.0, abs=1e-12)
        assert fit.implied_boundary == pytest.approx(1.0, abs=1e-12)
        assert fit.prefactor() == pytest.approx(1.0, rel=1e-10)

    def test_extrapolated_total(self):
        n = np.arange(41)
        a = np.where(n > 0, 1.0 / np.maximum(n, 1) ** 2, 1.0)
        series = ChaosSeries(1, None, 40, 0.0, terms=a)
        assert series.extrapolated_total((10, 40)) == pytest.approx(1 + math.pi ** 2 / 6, rel=1e-10)

    def test_not_summable(self):
        series = ChaosSeries(1, None, 20, 0.0, terms=1.0 / np.arange(1, 22) ** 0.5)
        assert series.extrapolated_total() == float('inf')

    @pytest.mark.parametrize('a, fit_range', [([1.0, 0.5, 0.2], (1, 2)), ([1.0, 0.5, 0.0, 0.1, 0.1], (1, 4))])
    def test_rejects(self, a, fit_range):
        with pytest.raises(DomainError):
            tail_exponent_estimate(a, fit_range)


class TestWatanabeNorm:
    def test_partial_sums(self):
        a = np.array([1.0, 0.5, 0.25])
        np.testing.assert_allclose(watanabe_partial_norm(0.0, a), [1.0, 1.5, 1.75])
        np.testing.assert_allclose(watanabe_partial_norm(1.0, a), [1.0, 2.0, 2.75])
        np.testing.assert_allclose(watanabe_partial_norm(-1.0, a, N=1), [1.0, 1.25])

    def test_rejects_negative_norms(self):
        with pytest.raises(DomainError):
            watanabe_partial_norm(0.0, [1.0, -0.1])


class TestOneDimensional:
    def test_inner_product(self, supercritical):
        assert multiple_integral_inner(supercritical, 0, 0.3, 0.8) == 1.0
        expected = 6 * covariance(supercritical, 0.3, 0.8) ** 3
        assert multiple_integral_inner(supercritical, 3, 0.3, 0.8) == pytest.approx(expected)

    @pytest.mark.parametrize('n', [1, 3, 5])
    def test_odd_coefficients_vanish_at_origin(self, supercritical, n):
        assert local_time_coeff_1d(supercritical, n, np.array([0.1, 0.5, 1.0]), 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_order_zero_coefficient_integrates_to_mean(self, critical):
        val, _ = integrate.quad(lambda s: local_time_coeff_1d(critical, 0, s, 0.0), 0.0, 1.0, limit=200)
        assert val == pytest.approx(2 / math.sqrt(2 * math.pi), rel=1e-6)

    def test_brownian_norms(self, brownian):
        series = local_time_chaos_moment(brownian, 1.0, 0.0, 12)
        expected = [brownian_norm(n) for n in range(13)]
        np.testing.assert_allclose(series.terms, expected, rtol=1e-8, atol=1e-300)
        assert series.terms[0] == pytest.approx(local_time_mean(brownian, 1.0, 0.0) ** 2, rel=1e-10)

    def test_brownian_tail(self, brownian):
        series = local_time_chaos_moment(brownian, 1.0, 0.0, 40)
        fit = series.tail_fit((10, 40))
        assert fit.implied_boundary == pytest.approx(WatanabeIndex(0.0, brownian).threshold, abs=0.1)
        assert series.total < 1.0
        assert series.extrapolated_total((10, 40)) == pytest.approx(1.0, rel=2e-2)

    def test_partial_sums_below_second_moment(self, supercritical):
        series = local_time_chaos_moment(supercritical, 1.0, 0.0, 20)
        exact = local_time_second_moment(supercritical, 1.0)
        assert np.all(np.diff(series.partial_sums) >= 0)
        assert series.total <= exact
        np.testing.assert_array_equal(series.terms[1::2], 0.0)

    def test_truncation_shortfall(self, supercritical):
        # orders above 30 still carry about 12% of the second moment
        series = local_time_chaos_moment(supercritical, 1.0, 0.0, 40)
        exact = local_time_second_moment(supercritical, 1.0)
        assert 0.85 < series.partial_sums[30] / exact < 0.92
        assert series.extrapolated_total((10, 40)) == pytest.approx(exact, rel=0.03)

    @pytest.mark.slow
    def test_order_zero_off_origin(self, supercritical):
        series = local_time_chaos_moment(supercritical, 1.0, 0.4, 0)
        assert series.terms[0] == pytest.approx(local_time_mean(supercritical, 1.0, 0.4) ** 2, rel=1e-6)

    def test_rejects(self):
        with pytest.raises(DomainError):
            local_time_chaos_moment(HurstParams(0.3, 0.9), 1.0, 0.0, 4)
        with pytest.raises(DomainError):
            local_time_coeff_1d(HurstParams(0.6, 0.9), 2, 0.0, 0.0)

    def test_coefficient_table(self, supercritical):
        series = local_time_chaos_moment(supercritical, 1.0, 0.0, 4)
        table = series.coefficient_table([0.25, 0.5, 1.0], range(3))
        assert list(table.columns) == ['order', 's', 'value']
        assert len(table) == 9
        assert table[table.order == '1'].value.abs().max() == 0.0

    def test_empty_series(self):
        with pytest.raises(DomainError):
            ChaosSeries(1, None, 4, 0.0).partial_sums


class TestMultidimensional:
    def test_shell(self):
        assert list(shell(2, 2)) == [(0, 2), (1, 1), (2, 0)]
        assert len(list(shell(3, 4))) == 15

    @pytest.mark.parametrize('theta', [None, 0.1])
    def test_d1_reduction(self, supercritical, theta):
        s = 0.5
        expected = s ** (0.54 - 0.5) if theta is None else s ** (theta + 0.5 - 0.54)
        assert d1_reduction_ratio(supercritical, 2, s, 0.3, theta) == pytest.approx(expected, rel=1e-12)

    def test_order_zero(self, planar):
        series = multi_local_time_chaos_norms(planar, 1.5, 1.0, 6)
        mean = beta_order0_mean(planar, 1.5, np.zeros(2), 0.0, 1.0)
        assert mean == pytest.approx(1 / (2 * math.pi * 1.5), rel=1e-10)
        assert series.terms[0] == pytest.approx(mean ** 2, rel=1e-8)
        np.testing.assert_array_equal(series.terms[1::2], 0.0)
        assert np.all(series.terms[::2] > 0)

    @pytest.mark.slow
    def test_planar_tail_threshold(self, planar):
        series = multi_local_time_chaos_norms(planar, 1.5, 1.0, 40)
        fit = series.tail_fit((10, 40))
        assert fit.implied_boundary == pytest.approx(WatanabeIndex(0.0, planar).threshold, abs=0.3)

    def test_inadmissible(self, planar):
        with pytest.raises(InadmissibleSpec):
            multi_local_time_chaos_norms(planar, 0.5, 1.0, 4)

    def test_coefficient_order_zero_two_routes(self, planar):
        s = np.array([0.2, 0.7, 1.0])
        direct = multi_local_time_coeff(planar, (0, 0), s, np.zeros(2), 1.5)
        np.testing.assert_allclose(direct, s ** 0.5 / (2 * math.pi), rtol=1e-12)

    def test_coefficient_odd_order_vanishes(self, planar):
        assert multi_local_time_coeff(planar, (1, 2), 0.5, [0.0, 0.3], 1.5) == pytest.approx(0.0, abs=1e-15)
        assert multi_local_time_coeff(planar, (1, 2), 0.5, [0.2, 0.3], 1.5) != 0.0

    def test_coefficient_rejects(self, planar):
        with pytest.raises(DomainError):
            multi_local_time_coeff(planar, (0,), 0.5, [0.0, 0.0], 1.5)
        with pytest.raises(InadmissibleSpec):
            multi_local_time_coeff(planar, (0, 0), 0.5, [0.0, 0.0], 0.5)


class TestBetaCoefficient:
    @pytest.mark.parametrize('n', [0, 2, 3])
    def test_unmollified(self, supercritical, n):
        s, x = 0.5, 0.3
        v = s ** 1.08
        expected = gauss_kernel(v, x) * s ** (-n * 0.54) * hermite(n, x / s ** 0.54)
        assert beta_coeff(supercritical, n, 0.0, s, x) == pytest.approx(expected, rel=1e-12)

    def test_first_order_at_origin(self, supercritical):
        for eps in (0.0, 1e-3, 0.1):
            assert beta_coeff(supercritical, 1, eps, 0.5, 0.0) == 0.0

    def test_linear_limit(self, supercritical):
        target = beta_coeff(supercritical, 2, 0.0, 0.5, 0.3)
        gaps = [beta_coeff(supercritical, 2, eps, 0.5, 0.3) - target for eps in (1e-4, 5e-5, 2.5e-5)]
        assert gaps[0] / gaps[1] == pytest.approx(2.0, rel=1e-2)
        assert gaps[1] / gaps[2] == pytest.approx(2.0, rel=1e-2)

    @pytest.mark.parametrize('n', range(7))
    def test_lattice_limit(self, supercritical, n):
        for s in (0.1, 0.5, 1.0):
            for x in (-0.4, 0.0, 0.7):
                assert beta_coeff(supercritical, n, 1e-10, s, x) == pytest.approx(
                    beta_coeff(supercritical, n, 0.0, s, x), rel=1e-6, abs=1e-9)

    def test_rejects(self, supercritical):
        with pytest.raises(DomainError):
            beta_coeff(supercritical, 0, -1.0, 0.5, 0.0)
        with pytest.raises(DomainError):
            beta_coeff(supercritical, 0, 0.0, 0.0, 0.0)
