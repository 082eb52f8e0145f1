import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssqlab.errors import DomainError
from ssqlab.special import (confluent_1f1, hermite_neg, ln_gamma, log_confluent_1f1,
                            log_hermite_neg)

mpmath.mp.dps = 40


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


class TestLnGamma:
    def test_known_values(self):
        assert ln_gamma(1.0) == 0.0
        assert ln_gamma(0.5) == pytest.approx(0.5723649429247001, rel=1e-14)

    def test_against_mpmath(self):
        for x in (7.3, 0.013, 2.5, 171.2, 1e3):
            assert _rel(ln_gamma(x), float(mpmath.loggamma(x))) < 1e-12

    def test_array(self):
        x = np.array([0.5, 1.0, 7.3])
        assert np.allclose(ln_gamma(x), [math.lgamma(v) for v in x], rtol=1e-14)

    @pytest.mark.parametrize("x", [0.0, -1.0, -0.5, float("nan")])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            ln_gamma(x)


class TestConfluent:
    def test_zero_argument(self):
        assert confluent_1f1(2.0, 0.5, 0.0) == 1.0

    def test_exponential_case(self):
        assert confluent_1f1(1.0, 1.0, 2.5) == pytest.approx(math.exp(2.5), rel=1e-13)

    def test_series_oracle(self):
        # direct high-precision partial sums until the term is negligible
        with mpmath.workdps(50):
            s = t = mpmath.mpf(1)
            k = 0
            while abs(t) > mpmath.mpf(10) ** -18 * abs(s):
                t *= (2 + k) * mpmath.mpf(4) / ((mpmath.mpf(0.5) + k) * (k + 1))
                s += t
                k += 1
        assert _rel(confluent_1f1(2.0, 0.5, 4.0), float(s)) < 1e-12

    @pytest.mark.parametrize("a", [2.0, 2.5, 3.0, 3.5])
    @pytest.mark.parametrize("b", [0.5, 1.5])
    def test_against_mpmath_grid(self, a, b):
        for z in np.concatenate([np.linspace(0, 30, 31), [31.0, 45.0, 80.0, 200.0, 450.0, 700.0]]):
            ref = mpmath.hyp1f1(a, b, z)
            got = log_confluent_1f1(a, b, z)
            assert abs(got - float(mpmath.log(ref))) < 1e-9 * max(1.0, abs(float(mpmath.log(ref))))
            if z < 700:
                assert _rel(confluent_1f1(a, b, z), float(ref)) < 1e-9

    def test_overflow_is_inf(self):
        assert math.isinf(confluent_1f1(2.0, 0.5, 800.0))
        assert math.isfinite(log_confluent_1f1(2.0, 0.5, 800.0))

    def test_vectorised(self):
        z = np.linspace(0, 50, 11)
        v = confluent_1f1(2.0, 0.5, z)
        assert v.shape == z.shape
        assert all(_rel(v[i], float(mpmath.hyp1f1(2, 0.5, z[i]))) < 1e-9 for i in range(z.size))

    @pytest.mark.parametrize("b", [0.0, -1.0, -3.0])
    def test_nonpositive_integer_b(self, b):
        with pytest.raises(DomainError):
            confluent_1f1(2.0, b, 1.0)

    @settings(max_examples=60, deadline=None)
    @given(a=st.sampled_from([2.0, 2.5, 3.0]), b=st.sampled_from([0.5, 1.5]),
           z=st.floats(0.0, 600.0), dz=st.floats(1e-3, 5.0))
    def test_strictly_increasing(self, a, b, z, dz):
        assert log_confluent_1f1(a, b, z + dz) > log_confluent_1f1(a, b, z)

    def test_growth_envelope(self):
        # 1F1(k/2 + 2; 1/2; x^2) / max(1, exp(x^2) x^(k+3)) stays in [m, 1/m]
        x = np.linspace(0.01, 20.0, 400)
        for k in (0, 1, 2):
            lf = log_confluent_1f1(k / 2 + 2, 0.5, x * x)
            lenv = np.maximum(0.0, x * x + (k + 3) * np.log(x))
            r = np.exp(lf - lenv)
            m = min(r.min(), 1.0 / r.max())
            assert m >= 1e-3


class TestHermite:
    def test_h_minus4_at_zero(self):
        assert abs(hermite_neg(-4.0, 0.0) - 1.0 / 12.0) < 1e-10

    def test_h_minus1_at_zero(self):
        assert hermite_neg(-1.0, 0.0) == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-12)

    def test_quadrature_oracle(self):
        with mpmath.workdps(30):
            ref = mpmath.quad(lambda t: t ** 3 * mpmath.exp(-t * t - 3 * t), [0, 40]) / mpmath.gamma(4)
        assert _rel(hermite_neg(-4.0, 1.5), float(ref)) < 1e-10

    def test_against_mpmath(self):
        for nu in (-8.0, -5.5, -4.0, -2.25, -1.0, -0.1):
            for z in (-25.0, -12.0, -5.0, -1.3, 0.0, 0.7, 3.0, 10.0, 30.0):
                ref = float(mpmath.hermite(nu, z))
                assert _rel(hermite_neg(nu, z), ref) < 1e-8, (nu, z)

    @pytest.mark.parametrize("nu", [-4.0, -5.0, -6.0])
    def test_sum_identity(self, nu):
        z = np.linspace(0.0, 10.0, 50)
        lhs = hermite_neg(nu, -z) + hermite_neg(nu, z)
        rhs = (2 ** (nu + 1) * math.sqrt(math.pi) / math.gamma((1 - nu) / 2)
               * confluent_1f1(-nu / 2, 0.5, z * z))
        assert np.all(np.abs(lhs - rhs) <= 1e-7 * np.maximum(1.0, np.abs(rhs)))

    @pytest.mark.parametrize("nu", [-4.0, -5.0, -6.0])
    def test_difference_identity(self, nu):
        z = np.linspace(0.0, 10.0, 50)
        lhs = hermite_neg(nu, -z) - hermite_neg(nu, z)
        rhs = (2 ** (nu + 2) * math.sqrt(math.pi) * z / math.gamma(-nu / 2)
               * confluent_1f1((1 - nu) / 2, 1.5, z * z))
        assert np.all(np.abs(lhs - rhs) <= 1e-7 * np.maximum(1.0, np.abs(rhs)))

    def test_log_consistent(self):
        assert log_hermite_neg(-4.0, 2.0) == pytest.approx(math.log(hermite_neg(-4.0, 2.0)), rel=1e-14)

    def test_overflow_is_inf(self):
        assert math.isinf(hermite_neg(-4.0, -30.0))
        assert math.isfinite(log_hermite_neg(-4.0, -30.0))

    @pytest.mark.parametrize("nu", [0.0, 1.0, 2.5])
    def test_domain(self, nu):
        with pytest.raises(DomainError):
            hermite_neg(nu, 0.0)

    @settings(max_examples=40, deadline=None)
    @given(nu=st.floats(-8.0, -0.05), z=st.floats(-20.0, 20.0))
    def test_positive_and_decreasing(self, nu, z):
        # the integrand decreases pointwise in z
        assert 0 < hermite_neg(nu, z + 0.5) < hermite_neg(nu, z)
