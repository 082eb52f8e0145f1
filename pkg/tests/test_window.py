import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from ssqlab.errors import DomainError, NumericalError
from ssqlab.sst import stft_pair_at
from ssqlab.window import (bump, gaussian_noise_pseudo, gaussian_noise_gamma, gamma_k, gaussian_window,
                           m_truncated_window, noise_cross_blocks, noise_second_order,
                           noise_second_order_pair, nu_k)

from helpers import gaussian_noise_blocks

SQ = 2.0 * math.sqrt(math.pi)
G = gaussian_window()


def _hat(x):
    return math.exp(-2.0 * math.pi ** 2 * x * x)


def _quad_gamma(s, k):
    v, _ = integrate.quad(lambda u: u ** k * _hat(u) * _hat(u - s), -np.inf, np.inf,
                          epsabs=1e-15, epsrel=1e-13)
    return v


class TestMoments:
    def test_gamma0_at_zero(self):
        assert gamma_k(G, 0.0, 0).real == pytest.approx(1.0 / SQ, rel=1e-12)
        assert gamma_k(G, 0.0, 0, method="closed").real == pytest.approx(1.0 / SQ, rel=1e-14)

    def test_gamma1_at_zero(self):
        assert abs(gamma_k(G, 0.0, 1)) < 1e-14

    def test_gamma2_oracle(self):
        ref = _quad_gamma(0.7, 2)
        assert gamma_k(G, 0.7, 2).real == pytest.approx(ref, rel=1e-9)
        assert gamma_k(G, 0.7, 2, method="closed").real == pytest.approx(ref, rel=1e-9)

    def test_nu0_at_one(self):
        ref = math.exp(-math.pi ** 2) / SQ
        assert nu_k(G, 1.0, 0).real == pytest.approx(ref, rel=1e-9)

    @pytest.mark.parametrize("eta", [0.05, 0.3, 0.8])
    def test_nu1_is_half_shift(self, eta):
        v0 = nu_k(G, 2 * eta, 0)
        assert abs(nu_k(G, 2 * eta, 1) - eta * v0) <= 1e-12 * max(abs(v0), 1e-300) + 1e-16

    def test_closed_matches_quad(self):
        rng = np.random.default_rng(3)
        for s in rng.uniform(-1.5, 1.5, 20):
            for k in range(3):
                assert abs(gamma_k(G, s, k) - gamma_k(G, s, k, method="closed")) < 1e-12
                assert abs(nu_k(G, s, k) - nu_k(G, s, k, method="closed")) < 1e-12

    def test_bad_order(self):
        with pytest.raises(DomainError):
            gamma_k(G, 0.0, 3)

    def test_closed_needs_gaussian(self):
        with pytest.raises(DomainError):
            gamma_k(m_truncated_window(3.0), 0.0, 0, method="closed")


class TestSecondOrder:
    def test_matches_explicit_blocks(self):
        rng = np.random.default_rng(11)
        for eta in rng.uniform(0.01, 1.0, 20):
            ref_g, ref_c = gaussian_noise_blocks(eta)
            q = noise_second_order(G, eta, method="quad")
            assert np.max(np.abs(q.gamma_eta - ref_g)) < 1e-10
            assert np.max(np.abs(q.c_eta - ref_c)) < 1e-10

    def test_closed_constructors(self):
        ref_g, ref_c = gaussian_noise_blocks(0.2)
        assert np.allclose(gaussian_noise_gamma(), ref_g, rtol=0, atol=1e-15)
        assert np.allclose(gaussian_noise_pseudo(0.2), ref_c, rtol=0, atol=1e-15)

    def test_pseudocovariance_negligible_at_high_frequency(self):
        assert np.max(np.abs(noise_second_order(G, 10.0).c_eta)) <= 1e-300

    def test_pseudocovariance_small_at_half(self):
        assert np.max(np.abs(noise_second_order(G, 0.5).c_eta)) < 1e-3

    def test_pseudocovariance_envelope_constant(self):
        # ||C|| / ||Gamma|| <= K eta^2 exp(-4 pi^2 eta^2) for eta >= 1 with K <= 10
        g = np.linalg.norm(gaussian_noise_gamma(), 2)
        for eta in (1.0, 1.5, 2.0, 3.0):
            r = np.linalg.norm(gaussian_noise_pseudo(eta), 2) / g
            assert r <= 10.0 * eta ** 2 * math.exp(-4 * math.pi ** 2 * eta ** 2), eta

    def test_low_frequency_limit(self):
        prev = None
        for eta in (1e-1, 1e-2, 1e-3, 1e-4):
            no = noise_second_order(G, eta)
            gap = abs(no.c_eta[0, 0] - no.gamma_eta[0, 0])
            if prev is not None:
                assert gap < prev
            prev = gap
        assert prev < 1e-6

    @settings(max_examples=25, deadline=None)
    @given(eta=st.floats(0.02, 0.9))
    def test_pseudocovariance_decay(self, eta):
        c = noise_second_order(G, eta, method="quad").c_eta
        bound = 10.0 * (1.0 + (2 * math.pi * eta) ** 2) * math.exp(-4 * math.pi ** 2 * eta ** 2)
        assert np.max(np.abs(c)) <= bound

    @settings(max_examples=25, deadline=None)
    @given(eta=st.floats(0.01, 2.0))
    def test_blocks_form_valid_law(self, eta):
        no = noise_second_order(G, eta)
        assert np.allclose(no.gamma_eta, no.gamma_eta.conj().T)
        assert np.allclose(no.c_eta, no.c_eta.T)
        r = np.block([[no.gamma_eta.real + no.c_eta.real, no.c_eta.imag - no.gamma_eta.imag],
                      [no.gamma_eta.imag + no.c_eta.imag, no.gamma_eta.real - no.c_eta.real]])
        assert np.linalg.eigvalsh(0.5 * (r + r.T))[0] > -1e-14

    def test_nonpositive_eta(self):
        with pytest.raises(DomainError):
            noise_second_order(G, 0.0)

    def test_monte_carlo(self):
        # (V, V^(h')) from simulated white noise against the closed blocks
        dt, n_fft, reps = 0.01, 2000, 4000
        k = int(round(8.0 / dt))
        w = gaussian_window(dt=dt)
        rng = np.random.default_rng(2024)
        x = rng.standard_normal((reps, 2 * k + 1)) / math.sqrt(dt)
        eta, v, dv, _ = stft_pair_at(x, dt, w, k, n_fft, multipliers=[2, 6])
        for j, e in enumerate(eta):
            a = v[:, j]
            b = 2j * math.pi * e * a - dv[:, j]
            gam, c = gaussian_noise_blocks(e)
            pairs = {(0, 0): (a, a), (0, 1): (a, b), (1, 1): (b, b)}
            for (p, q), (u, z) in pairs.items():
                for prod, ref in ((u * z.conj(), gam[p, q]), (u * z, c[p, q])):
                    for part in (np.real, np.imag):
                        vals = part(prod)
                        se = vals.std(ddof=1) / math.sqrt(reps)
                        assert abs(vals.mean() - part(ref)) <= 3 * se + 1e-12, (e, p, q)


class TestPair:
    def test_far_frequencies_decouple(self):
        law = noise_second_order_pair(G, 2.0, 8.0)
        assert np.max(np.abs(law.gamma[:2, 2:])) < 1e-12
        assert np.max(np.abs(law.c[:2, 2:])) < 1e-12

    def test_cross_entry(self):
        law = noise_second_order_pair(G, 2.0, 2.7)
        assert law.gamma[0, 2].real == pytest.approx(math.exp(-math.pi ** 2 * 0.49) / SQ, rel=1e-9)

    def test_continuity(self):
        no = noise_second_order(G, 1.3)
        prev = math.inf
        for eps in (1e-1, 1e-2, 1e-3):
            gam, _ = noise_cross_blocks(G, G, 1.3, 1.3 + eps)
            d = np.max(np.abs(gam - no.gamma_eta))
            assert d < prev
            prev = d
        assert prev < 1e-3

    def test_near_coincident_pair_is_singular(self):
        with pytest.raises(NumericalError):
            noise_second_order_pair(G, 1.3, 1.3 + 1e-4)

    def test_diagonal_blocks(self):
        law = noise_second_order_pair(G, 0.3, 0.5)
        assert np.allclose(law.gamma[:2, :2], gaussian_noise_gamma(), atol=1e-12)
        assert np.allclose(law.c[2:, 2:], gaussian_noise_pseudo(0.5), atol=1e-12)

    def test_equal_frequency_rejected(self):
        with pytest.raises(DomainError):
            noise_second_order_pair(G, 1.0, 1.0)

    def test_truncated_cross_blocks_vanish(self):
        w = m_truncated_window(1.0, grid=(1.0 / 16.0, 8.0))
        for gap in (4.01, 5.0, 9.0):
            gam, c = noise_cross_blocks(w, w, 3.0, 3.0 + gap)
            assert np.max(np.abs(gam)) < 1e-14
            assert np.max(np.abs(c)) < 1e-14

    def test_truncated_against_gaussian(self):
        w = m_truncated_window(3.0, grid=(1.0 / 32.0, 8.0))
        a = noise_second_order(w, 0.4)
        b = noise_second_order(G, 0.4)
        assert np.max(np.abs(a.gamma_eta - b.gamma_eta)) < 1e-12
        assert np.max(np.abs(a.c_eta - b.c_eta)) < 1e-12


class TestTruncatedWindow:
    def test_bump_values(self):
        M = 3.0
        assert bump(0.5 * M, M) == 1.0
        assert bump(2.5 * M, M) == 0.0
        t = np.linspace(M, 2 * M, 400)
        assert np.all(np.diff(bump(t, M)) <= 0)

    @settings(max_examples=50, deadline=None)
    @given(t=st.floats(-20, 20), M=st.floats(0.2, 5.0))
    def test_bump_range_and_symmetry(self, t, M):
        b = bump(t, M)
        assert 0.0 <= b <= 1.0
        assert b == bump(-t, M)

    def test_spectrum_error(self):
        M = 3.0
        w = m_truncated_window(M, grid=(1.0 / 32.0, 8.0))
        f = lambda x: (w.freq_response(x) - _hat(x)) ** 2
        err = 2 * integrate.quad(f, M, 2 * M, epsabs=0)[0] + 2 * integrate.quad(f, 2 * M, np.inf, epsabs=0)[0]
        assert err <= 1e-30

    def test_support(self):
        w = m_truncated_window(2.0, grid=(1.0 / 16.0, 8.0))
        assert w.freq_response(4.0) == 0.0
        assert w.freq_response(4.5) == 0.0

    def test_samples_match_gaussian(self):
        w = m_truncated_window(3.0, grid=(1.0 / 32.0, 8.0))
        x = w.offsets
        h = np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
        assert np.max(np.abs(w.time_samples - h)) < 1e-12
        assert np.max(np.abs(w.derivative_samples + x * h)) < 1e-12

    def test_gaussian_samples_exact(self):
        x = G.offsets
        assert np.max(np.abs(G.time_samples - np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi))) < 1e-15

    def test_under_resolved_grid(self):
        with pytest.raises(DomainError):
            m_truncated_window(3.0, grid=(0.1, 8.0))

    def test_bad_kind(self):
        from ssqlab.window import WindowSpec
        with pytest.raises(DomainError):
            WindowSpec("hann")
