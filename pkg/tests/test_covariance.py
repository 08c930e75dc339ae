import math

import numpy as np
import pytest

from BifLab.covariance import (abs_h_norm, abs_h_tensor_norm, covariance, covariance_reduced, h_fn,
                               mixed_partial, quasi_helix_bounds, scaled_h, variogram)
from BifLab.params import HurstParams, QuadratureSpec
from BifLab.util import DomainError, SingularityError


def direct_covariance(h, k, t, s):
    return 2.0 ** (-k) * ((t ** (2 * h) + s ** (2 * h)) ** k - abs(t - s) ** (2 * h * k))


class TestCovariance:
    def test_brownian_is_min(self, brownian):
        assert covariance(brownian, 3.0, 5.0) == pytest.approx(3.0, rel=1e-14)

    @pytest.mark.parametrize('h, k', [(0.3, 0.5), (0.6, 0.8), (0.9, 1.0)])
    def test_unit_diagonal(self, h, k):
        assert covariance(HurstParams(h, k), 1.0, 1.0) == 1.0

    def test_reference_value(self):
        assert covariance(HurstParams(0.6, 0.8), 2.0, 1.0) == pytest.approx(0.9174, abs=1e-4)

    def test_matches_direct_evaluation(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            h, k = rng.uniform(0.1, 0.95), rng.uniform(0.1, 1.0)
            t, s = rng.uniform(0.01, 5.0, 2)
            assert covariance(HurstParams(h, k), t, s) == pytest.approx(direct_covariance(h, k, t, s), rel=1e-10)

    def test_symmetric_and_vectorized(self, supercritical):
        t = np.linspace(0, 2, 9)
        c = covariance(supercritical, t[:, None], t[None, :])
        np.testing.assert_array_equal(c, c.T)
        assert np.all(c[0] == 0)

    def test_rejects_negative_times(self, supercritical):
        with pytest.raises(DomainError):
            covariance(supercritical, -1.0, 1.0)

    def test_self_similar_reduction(self, supercritical):
        assert covariance_reduced(supercritical, 2.0, 0.7) == pytest.approx(covariance(supercritical, 2.0, 0.7),
                                                                            rel=1e-13)
        with pytest.raises(DomainError):
            covariance_reduced(supercritical, 0.0, 1.0)


class TestVariogram:
    def test_brownian(self, brownian):
        assert variogram(brownian, 2.5, 1.0) == pytest.approx(1.5, rel=1e-13)

    def test_zero_on_diagonal(self, supercritical):
        assert variogram(supercritical, 0.7, 0.7) == 0.0

    def test_three_covariances(self):
        p = HurstParams(0.6, 0.8)
        expected = 2 ** 1.2 + 1 - 2 * direct_covariance(0.6, 0.8, 2.0, 1.0)
        assert variogram(p, 2.0, 1.0) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize('h, k', [(0.8, 0.625), (0.6, 0.8), (0.3, 0.4)])
    def test_quasi_helix_sandwich(self, h, k):
        p = HurstParams(h, k)
        t = np.linspace(0.05, 3, 25)
        s = t[::-1] * 0.7
        lower, upper = quasi_helix_bounds(p, t, s)
        v = variogram(p, t, s)
        assert np.all(lower <= v * (1 + 1e-12))
        assert np.all(v <= upper * (1 + 1e-12))

    def test_fbm_attains_upper_bound(self):
        p = HurstParams(0.7, 1.0)
        lower, upper = quasi_helix_bounds(p, 1.0, 0.25)
        assert upper == pytest.approx(0.75 ** 1.4)
        assert lower == pytest.approx(upper / 2)
        assert variogram(p, 1.0, 0.25) == pytest.approx(upper, rel=1e-12)

    def test_increments_not_stationary(self):
        p = HurstParams(0.6, 0.8)
        assert variogram(p, 1.1, 1.0) != pytest.approx(variogram(p, 3.1, 3.0), rel=1e-6)
        q = HurstParams(0.6, 1.0)
        assert variogram(q, 1.1, 1.0) == pytest.approx(variogram(q, 3.1, 3.0), rel=1e-10)


class TestMixedPartial:
    def test_brownian_vanishes(self, brownian):
        assert mixed_partial(brownian, 2.0, 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_fbm_reduction(self):
        assert mixed_partial(HurstParams(0.7, 1.0), 2.0, 1.0) == pytest.approx(0.28, rel=1e-12)

    def test_finite_difference(self):
        p = HurstParams(0.6, 0.8)
        t, s, e = 2.0, 1.0, 1e-5
        fd = (covariance(p, t + e, s + e) - covariance(p, t + e, s - e)
              - covariance(p, t - e, s + e) + covariance(p, t - e, s - e)) / (4 * e * e)
        assert mixed_partial(p, t, s) == pytest.approx(fd, rel=1e-5)

    def test_diagonal_is_singular(self, supercritical):
        with pytest.raises(SingularityError):
            mixed_partial(supercritical, 1.0, 1.0)


class TestHFunction:
    @pytest.mark.parametrize('h, k', [(0.6, 0.8), (0.8, 0.625), (0.4, 0.3)])
    def test_value_at_one(self, h, k):
        assert h_fn(HurstParams(h, k), 1.0) == pytest.approx(1 - 2 ** (1 - k), abs=1e-14)

    def test_critical_scaled_limit(self, critical):
        assert scaled_h(critical, 1e4) == pytest.approx(-0.15, abs=1e-3)

    @pytest.mark.parametrize('h, k', [(0.6, 0.8), (0.7, 0.9), (0.9, 0.7)])
    def test_supercritical_decay(self, h, k):
        assert abs(h_fn(HurstParams(h, k), 1e6)) < 1e-6

    def test_domain(self, supercritical):
        with pytest.raises(DomainError):
            h_fn(supercritical, 0.5)


class TestAbsHNorm:
    def test_zero_function(self, supercritical):
        signed, absolute = abs_h_norm(lambda u: 0.0, supercritical, 1.0)
        assert signed == 0.0 and absolute == 0.0

    @pytest.mark.parametrize('t', [1.0, 0.6])
    def test_indicator_gives_variance(self, t):
        p = HurstParams(0.6, 0.9)
        signed, absolute = abs_h_norm(lambda u: 1.0 if u <= t else 0.0, p, 1.0, QuadratureSpec(epsrel=1e-9))
        assert signed == pytest.approx(t ** (2 * p.hk), rel=1e-4)
        assert absolute == pytest.approx(signed, rel=1e-12)

    def test_sign_only_enters_signed_norm(self, supercritical):
        _, absolute = abs_h_norm(lambda u: -math.exp(u), supercritical, 1.0)
        signed, _ = abs_h_norm(lambda u: math.exp(u), supercritical, 1.0)
        assert absolute == pytest.approx(signed, rel=1e-12)

    def test_needs_supercritical(self, critical):
        with pytest.raises(DomainError):
            abs_h_norm(lambda u: 1.0, critical, 1.0)

    def test_tensor_norm_factorizes(self, supercritical):
        one = lambda u: 1.0
        _, n1 = abs_h_norm(one, supercritical, 1.0)
        assert abs_h_tensor_norm(one, one, supercritical, 1.0) == pytest.approx(n1 * n1, rel=1e-12)
