import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssqlab.errors import DataError, DomainError, GridMismatchError
from ssqlab.experiments import ExperimentConfig, complex_corr, integrand_samples
from ssqlab.sst import (INVALID, TFR, SignalGrid, SSTParams, dstft, reassign_rows, reassignment,
                        squeeze, squeeze_pair, sst, sst_integrand, stft, synchrosqueeze)
from ssqlab.window import gaussian_window, m_truncated_window

FS = 142.02
DT = 1.0 / FS


def _tone(xi0, n=4096, amp=1.0):
    t0 = -(n // 2) * DT
    t = t0 + DT * np.arange(n)
    return SignalGrid(amp * np.exp(2j * np.pi * xi0 * t), DT, t0)


def _hhat(x):
    return np.exp(-2.0 * np.pi ** 2 * x * x)


class TestSignalGrid:
    def test_empty(self):
        with pytest.raises(DataError):
            SignalGrid(np.array([]), DT)

    def test_bad_dt(self):
        with pytest.raises(DataError):
            SignalGrid(np.ones(4), 0.0)

    def test_two_dimensional(self):
        with pytest.raises(DataError):
            SignalGrid(np.ones((2, 2)), DT)


class TestSTFT:
    def test_zero_signal(self):
        s = SignalGrid(np.zeros(2048), DT)
        v = stft(s, times=[7.0], etas=[1.0, 5.0])
        assert np.all(v.values == 0)

    def test_tone(self):
        sig = _tone(10.0)
        etas = np.linspace(9.0, 11.0, 41)
        v = stft(sig, times=[0.0, 0.5], etas=etas)
        for i, t in enumerate(v.times):
            ref = np.exp(2j * np.pi * 10.0 * t) * _hhat(etas - 10.0)
            assert np.max(np.abs(v.values[i] - ref) / np.abs(ref)) < 1e-6

    @settings(max_examples=15, deadline=None)
    @given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2 ** 32 - 1))
    def test_linearity(self, a, b, seed):
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal((2, 2400))
        kw = dict(times=[8.0], etas=[0.5, 3.0, 11.0])
        lhs = stft(SignalGrid(a * x + b * y, DT), **kw).values
        rhs = a * stft(SignalGrid(x, DT), **kw).values + b * stft(SignalGrid(y, DT), **kw).values
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_fft_matches_direct(self):
        rng = np.random.default_rng(5)
        n = 2400
        sig = SignalGrid(rng.standard_normal(n), DT)
        times = sig.times[[1136, 1200]]
        etas = np.arange(1, 300) / (n * DT)
        a = stft(sig, times=times, etas=etas, n_fft=n)
        b = stft(sig, times=times, etas=etas)
        assert np.max(np.abs(a.values - b.values)) < 1e-10
        c = dstft(sig, times=times, etas=etas, n_fft=n)
        d = dstft(sig, times=times, etas=etas)
        assert np.max(np.abs(c.values - d.values)) < 1e-9

    def test_off_grid_frequency_rejected(self):
        sig = SignalGrid(np.ones(2400), DT)
        with pytest.raises(DomainError):
            stft(sig, times=[sig.times[1200]], etas=[0.1234567], n_fft=2400)

    def test_padding_flag(self):
        sig = SignalGrid(np.ones(400), DT)
        assert stft(sig, times=[0.0], etas=[1.0]).meta["zero_padded"]
        long = SignalGrid(np.ones(4000), DT)
        assert not stft(long, times=[14.0], etas=[1.0]).meta["zero_padded"]


class TestDerivative:
    def test_tone_derivative(self):
        sig = _tone(10.0)
        etas = np.linspace(9.5, 10.5, 11)
        v = stft(sig, times=[0.0], etas=etas)
        dv = dstft(sig, times=[0.0], etas=etas)
        assert np.allclose(dv.values, 2j * np.pi * 10.0 * v.values, rtol=1e-8, atol=1e-14)

    def test_finite_difference(self):
        # central difference with step dt; its error is about (2 pi eta dt)^2 / 6
        rng = np.random.default_rng(9)
        n = 3000
        t = DT * np.arange(n)
        x = sum(rng.standard_normal() * np.cos(2 * np.pi * f * t + rng.uniform(0, 6.28))
                for f in (0.7, 2.3, 4.1))
        sig = SignalGrid(x, DT)
        c = 1500
        etas = np.array([1.0, 2.5, 4.0])
        v = stft(sig, times=t[[c - 1, c + 1]], etas=etas).values
        dv = dstft(sig, times=t[[c]], etas=etas).values[0]
        fd = (v[1] - v[0]) / (2 * DT)
        assert np.max(np.abs(fd - dv) / np.abs(dv)) < 1e-2


class TestReassignment:
    def test_tone_is_exact(self):
        sig = _tone(10.0)
        etas = np.linspace(8.0, 12.0, 81)
        v = stft(sig, times=[0.0, 1.0], etas=etas)
        om = reassignment(v, dstft(sig, times=[0.0, 1.0], etas=etas))
        big = np.abs(v.values) >= 1e-6 * np.abs(v.values).max()
        assert np.all(~om.invalid_mask[big])
        assert np.max(np.abs(om.values[big] - 10.0)) <= 1e-8
        # below the threshold the cell is marked rather than divided
        assert np.all(om.invalid_mask[np.abs(v.values) <= om.meta["v_threshold"]])

    def test_noise_centered_on_eta(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((3000, 2301)) / math.sqrt(DT)
        from ssqlab.sst import stft_pair_at
        eta, v, dv, _ = stft_pair_at(x, DT, gaussian_window(DT), 1150, 2301, multipliers=[32])
        om = reassign_rows(v, dv)
        assert abs(eta[0] - 2.0) < 0.05
        assert abs(np.median(om.real) - eta[0]) < 0.05

    def test_all_invalid(self):
        z = TFR([0.0], [1.0, 2.0], np.zeros((1, 2)), "stft")
        om = reassignment(z, TFR([0.0], [1.0, 2.0], np.ones((1, 2)), "dstft"))
        assert np.all(om.invalid_mask)
        assert np.all(om.values == INVALID)

    def test_threshold(self):
        v = TFR([0.0], [1.0, 2.0], np.array([[1.0, 1e-20]]), "stft")
        dv = TFR([0.0], [1.0, 2.0], np.array([[2j * np.pi, 1.0]]), "dstft")
        om = reassignment(v, dv)
        assert om.values[0, 0] == pytest.approx(1.0)
        assert om.invalid_mask[0, 1]

    def test_grid_mismatch(self):
        v = TFR([0.0], [1.0], np.ones((1, 1)), "stft")
        dv = TFR([0.0], [2.0], np.ones((1, 1)), "dstft")
        with pytest.raises(GridMismatchError):
            reassignment(v, dv)

    def test_row_rule_matches(self):
        rng = np.random.default_rng(4)
        v = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
        dv = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
        v[1, 2] = 0.0
        a = reassign_rows(v, dv)
        assert a[1, 2] == INVALID
        ok = np.isfinite(a)
        with np.errstate(divide="ignore", invalid="ignore"):
            ref = dv / (2j * np.pi * v)
        assert np.allclose(a[ok], ref[ok])


class TestIntegrand:
    def _pair(self, om):
        v = TFR([0.0], [1.0], np.array([[1.0]]), "stft")
        o = TFR([0.0], [1.0], np.array([[om]]), "reassignment")
        return v, o

    def test_on_ridge(self):
        v, o = self._pair(3.0 + 0j)
        y = sst_integrand(v, o, 3.0, 0.2)
        assert y.values[0, 0] == pytest.approx(1.0 / (np.pi * 0.2), rel=1e-14)

    def test_one_alpha_away(self):
        alpha = 0.3
        v, o = self._pair(complex(3.0, math.sqrt(alpha)))
        y = sst_integrand(v, o, 3.0, alpha)
        assert y.values[0, 0] == pytest.approx(1.0 / (np.pi * alpha * math.e), rel=1e-14)

    def test_invalid_contributes_nothing(self):
        v, o = self._pair(INVALID)
        assert sst_integrand(v, o, 3.0, 0.2).values[0, 0] == 0

    def test_alpha_positive(self):
        v, o = self._pair(1.0 + 0j)
        with pytest.raises(DomainError):
            sst_integrand(v, o, 1.0, 0.0)


class TestSST:
    def _params(self, n, alpha=0.1, xi=(10.0,)):
        return SSTParams(alpha=alpha, delta_eta=1.0 / (n * DT), n_eta=n // 4, xi_grid=xi)

    def test_tone_peak(self):
        n = 4096
        sig = _tone(10.0, n)
        p = self._params(n, xi=[10.0, 13.0])
        _, _, _, s = synchrosqueeze(sig, p, times=[0.0], n_fft=n)
        riemann = p.delta_eta * np.sum(_hhat(p.eta_grid - 10.0)) / (np.pi * p.alpha)
        assert s.values[0, 0] == pytest.approx(riemann, rel=1e-9)
        assert s.values[0, 0].real == pytest.approx(1.0 / (math.sqrt(2 * np.pi) * np.pi * 0.1), rel=1e-6)
        # kernel decay away from the ridge
        assert abs(s.values[0, 1]) <= 1e-30 * abs(s.values[0, 0])

    def test_zero_signal(self):
        n = 2048
        p = self._params(n, xi=[1.0, 2.0])
        _, _, om, s = synchrosqueeze(SignalGrid(np.zeros(n), DT), p, times=[7.0], n_fft=n)
        assert np.all(om.invalid_mask)
        assert np.all(s.values == 0)

    def test_spacing_mismatch(self):
        v = TFR([0.0], [1.0, 2.0], np.ones((1, 2)), "stft")
        om = TFR([0.0], [1.0, 2.0], np.ones((1, 2)), "reassignment")
        with pytest.raises(GridMismatchError):
            sst(v, om, SSTParams(0.1, 0.5, 2, [1.0]))

    def test_squeeze_forms_agree(self):
        rng = np.random.default_rng(8)
        v = rng.standard_normal((4, 50)) + 1j * rng.standard_normal((4, 50))
        dv = rng.standard_normal((4, 50)) + 1j * rng.standard_normal((4, 50))
        v[0, :5] = 0
        xi = np.array([0.3, -0.1, 0.05, 2.0])
        a = squeeze(v, reassign_rows(v, dv), xi, 0.05, 0.1)
        b = squeeze_pair(v, dv, xi, 0.05, 0.1)
        om = reassign_rows(v, dv)
        ref = np.array([[0.1 * np.sum(np.where(np.isfinite(om[r]), v[r] * np.exp(
            -np.abs(x - om[r]) ** 2 / 0.05), 0)) / (np.pi * 0.05) for x in xi] for r in range(4)])
        assert np.allclose(a, ref, rtol=1e-12, atol=1e-14)
        assert np.allclose(b, ref, rtol=1e-12, atol=1e-14)

    def test_squeeze_shape_mismatch(self):
        with pytest.raises(GridMismatchError):
            squeeze(np.ones((2, 3)), np.ones((2, 4)), [0.0], 0.1, 0.1)

    def test_params_validation(self):
        with pytest.raises(DomainError):
            SSTParams(0.0, 0.1, 4, [1.0])
        with pytest.raises(DomainError):
            SSTParams(0.1, 0.1, 0, [1.0])


class TestNullIntegrand:
    CFG = ExperimentConfig(n_samples=2400, n_realizations=4000, seed=17)

    def test_odd_moments_vanish(self):
        y = integrand_samples(self.CFG, 2.0, 2.0, (0.4,))[:, 0, 0]
        for stat in (y, y * np.abs(y) ** 2):
            for part in (stat.real, stat.imag):
                se = part.std(ddof=1) / math.sqrt(part.size)
                assert abs(part.mean()) <= 4 * se

    def test_nearby_frequencies_correlated(self):
        cfg = ExperimentConfig(n_samples=2400, n_realizations=1000, seed=3)
        a = integrand_samples(cfg, 2.0, 2.05, (0.4,))[:, 0, 0]
        b = integrand_samples(cfg, 2.1, 2.05, (0.4,))[:, 0, 0]
        assert abs(complex_corr(a, b)) > 0.5

    def test_truncated_surrogate(self):
        cfg = ExperimentConfig(n_samples=2400, n_realizations=2000, seed=23)
        w = m_truncated_window(3.0, (cfg.dt, 8.0))
        y = integrand_samples(cfg, 2.0, 2.0, (0.4,), windows=[w])[:, 0, :]
        a, b = y[:, 0], y[:, 1]
        d = np.abs(a) ** 2 - a * np.conj(b)
        se = np.abs(d).std(ddof=1) / math.sqrt(d.size)
        assert abs(d.mean()) <= 4 * se + 1e-15
