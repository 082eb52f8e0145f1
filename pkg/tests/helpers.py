"""Shared fixtures and random instance builders for the tests."""

import math

import numpy as np

from ssqlab.complex_gaussian import ComplexGaussian2


def gaussian_noise_blocks(eta):
    """Noise covariance and pseudocovariance of (V, V^(h')) for the Gaussian window."""
    k = 1.0 / (2.0 * math.sqrt(math.pi))
    gam = k * np.diag([1.0, 0.5]).astype(complex)
    e = math.exp(-4.0 * math.pi ** 2 * eta ** 2)
    c = k * e * np.array([[1.0, 2j * math.pi * eta],
                          [2j * math.pi * eta, 0.5 - 4.0 * math.pi ** 2 * eta ** 2]])
    return gam, c


def _hpd_sqrt(m):
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(w)) @ v.conj().T


def random_instance(rng, impropriety=0.7, mean_scale=1.0, dim=2):
    """Random valid (mu, gamma, c): c = G^(1/2) K G^(T/2) with ||K|| < 1."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    gam = a @ a.conj().T + 0.3 * np.eye(dim)
    b = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    k = b + b.T
    k *= impropriety * rng.uniform(0.2, 1.0) / np.linalg.norm(k, 2)
    s = _hpd_sqrt(gam)
    c = s @ k @ s.T
    mu = mean_scale * (rng.standard_normal(dim) + 1j * rng.standard_normal(dim))
    return mu, gam, c


def random_g2(rng, **kw):
    mu, gam, c = random_instance(rng, **kw)
    return ComplexGaussian2(mu, gam, c)
