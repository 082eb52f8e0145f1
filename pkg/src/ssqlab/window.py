"""Gaussian analysis window, its band-limited surrogate, and white-noise statistics.

The Fourier convention is ``f^(xi) = int f(x) exp(-2 pi i x xi) dx``. The
Gaussian window ``h(x) = exp(-x^2/2) / sqrt(2 pi)`` has
``h^(xi) = exp(-2 pi^2 xi^2)``.

For real white noise ``Phi`` and test functions ``phi``, ``psi``::

    E Phi(phi) conj(Phi(psi)) = int phi^(xi) conj(psi^(xi)) dxi
    E Phi(phi) Phi(psi)       = int phi^(xi) psi^(-xi) dxi

Applied to the modulated windows ``h(. - t) exp(-2 pi i eta (. - t))`` and
their time derivatives, every entry reduces to one of the moment integrals
``gamma_k`` and ``nu_k`` below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import integrate

from .complex_gaussian import ComplexGaussian4, real_covariance
from .errors import DegenerateCovarianceError, DomainError, NumericalError

__all__ = [
    "WindowSpec",
    "gaussian_window",
    "m_truncated_window",
    "bump",
    "NoiseSecondOrder",
    "gamma_k",
    "nu_k",
    "noise_second_order",
    "noise_cross_blocks",
    "noise_second_order_pair",
    "gaussian_noise_gamma",
    "gaussian_noise_pseudo",
    "GAUSS_SUPPORT",
]

SQRT_PI = math.sqrt(math.pi)
#: |xi| beyond which exp(-2 pi^2 xi^2) < 1e-300
GAUSS_SUPPORT = math.sqrt(math.log(1e300) / (2.0 * math.pi ** 2))
QUAD_EPSABS = 1e-13


def _bfun(x):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def bump(t, M):
    """Smooth even cutoff equal to 1 on ``|t| <= M`` and 0 on ``|t| >= 2M``."""
    a = np.abs(np.asarray(t, dtype=float))
    up = _bfun((2.0 * M - a) / M)
    down = _bfun((a - M) / M)
    with np.errstate(invalid="ignore", divide="ignore"):
        mid = up / (up + down)
    out = np.where(a <= M, 1.0, np.where(a >= 2.0 * M, 0.0, mid))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class WindowSpec:
    """Analysis window description.

    Parameters
    ----------
    kind : {"gaussian", "m_truncated"}
    M : float, optional
        Plateau half-width of the spectral cutoff (``m_truncated`` only).
    dt : float
        Sampling step for :attr:`time_samples`.
    half_width : float
        Time support used when sampling (``|x| <= half_width``).
    """

    kind: str = "gaussian"
    M: Optional[float] = None
    dt: float = 1.0 / 142.02
    half_width: float = 8.0
    _spectral_step: float = field(default=1.0 / 64.0, repr=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "m_truncated"):
            raise DomainError(f"unknown window kind {self.kind!r}")
        if not self.dt > 0 or not self.half_width > 0:
            raise DomainError("dt and half_width must be positive")
        if self.kind == "m_truncated":
            if self.M is None or not self.M > 0:
                raise DomainError("m_truncated window needs M > 0")
            if self.dt > 1.0 / (8.0 * self.M):
                raise DomainError(
                    f"dt={self.dt} under-resolves a spectrum supported on |xi| <= {2 * self.M}"
                    f" (need dt <= {1.0 / (8.0 * self.M):.4g})")

    @property
    def support(self):
        """Radius beyond which the frequency response is zero (or below 1e-300)."""
        return 2.0 * self.M if self.kind == "m_truncated" else GAUSS_SUPPORT

    def freq_response(self, xi):
        xi = np.asarray(xi, dtype=float)
        g = np.exp(-2.0 * np.pi ** 2 * xi * xi)
        if self.kind == "m_truncated":
            g = g * bump(xi, self.M)
        return g

    def deriv_freq_response(self, xi):
        """Fourier transform of the window derivative, ``2 pi i xi h^(xi)``."""
        xi = np.asarray(xi, dtype=float)
        return 2j * np.pi * xi * self.freq_response(xi)

    @cached_property
    def _spectral_grid(self):
        # power-of-two grid over [-2M-2, 2M+2] at spacing <= 1/64
        span = 2.0 * (2.0 * self.M + 2.0)
        n = 1 << int(math.ceil(math.log2(span / self._spectral_step)))
        d = span / n
        xi = -0.5 * span + d * np.arange(n)
        return xi, d

    def _inverse(self, x, deriv):
        xi, d = self._spectral_grid
        g = self.freq_response(xi)
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        flat, res = x.ravel(), out.ravel()
        for lo in range(0, flat.size, 512):
            ph = 2.0 * np.pi * np.outer(flat[lo:lo + 512], xi)
            if deriv:
                res[lo:lo + 512] = -(np.sin(ph) * (2.0 * np.pi * xi * g)).sum(axis=1) * d
            else:
                res[lo:lo + 512] = (np.cos(ph) * g).sum(axis=1) * d
        return out

    def time_response(self, x):
        """Window value ``h(x)`` (analytic, or discrete inverse transform)."""
        if self.kind == "gaussian":
            x = np.asarray(x, dtype=float)
            return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        return self._inverse(x, deriv=False)

    def derivative_response(self, x):
        """Window derivative ``h'(x)``."""
        if self.kind == "gaussian":
            x = np.asarray(x, dtype=float)
            return -x * np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        return self._inverse(x, deriv=True)

    @cached_property
    def offsets(self):
        k = int(math.floor(self.half_width / self.dt + 1e-9))
        return self.dt * np.arange(-k, k + 1)

    @cached_property
    def time_samples(self):
        v = self.time_response(self.offsets)
        v.setflags(write=False)
        return v

    @cached_property
    def derivative_samples(self):
        v = self.derivative_response(self.offsets)
        v.setflags(write=False)
        return v

    def with_dt(self, dt):
        return WindowSpec(self.kind, self.M, dt, self.half_width)


def gaussian_window(dt=1.0 / 142.02, half_width=8.0):
    return WindowSpec("gaussian", None, dt, half_width)


def m_truncated_window(M, grid=(1.0 / 142.02, 8.0)):
    """Band-limited surrogate of the Gaussian window with spectrum ``h^ * bump``.

    Parameters
    ----------
    M : float
        Plateau half-width; the spectrum vanishes for ``|xi| > 2M``.
    grid : (dt, half_width)
        Time sampling of the window.
    """
    dt, half_width = grid
    return WindowSpec("m_truncated", float(M), float(dt), float(half_width))


def _interval(a_rad, b_rad, shift):
    # {u : |u| <= a_rad} intersect {u : |u - shift| <= b_rad}
    return max(-a_rad, shift - b_rad), min(a_rad, shift + b_rad)


def _moment_quad(fa, fb, k, lo, hi, center):
    if hi <= lo:
        return 0.0
    pts = [center] if lo < center < hi else None
    val, _ = integrate.quad(lambda u: u ** k * fa(u) * fb(u), lo, hi, points=pts,
                            epsabs=QUAD_EPSABS, epsrel=1e-12, limit=400)
    return val


def _gauss_moment(s, k):
    g0 = math.exp(-math.pi ** 2 * s * s) / (2.0 * SQRT_PI)
    if k == 0:
        return g0
    if k == 1:
        return 0.5 * s * g0
    return (0.25 * s * s + 1.0 / (8.0 * math.pi ** 2)) * g0


def _check_k(k):
    if k not in (0, 1, 2):
        raise DomainError("k must be 0, 1 or 2")


def gamma_k(window: WindowSpec, s: float, k: int, other: Optional[WindowSpec] = None,
            method: str = "quad") -> complex:
    """``int u^k a^(u) b^(u - s) du`` with ``a = window`` and ``b = other`` (default ``a``).

    ``method="closed"`` is available when both windows are Gaussian.
    """
    _check_k(k)
    other = window if other is None else other
    if method == "closed":
        if window.kind != "gaussian" or other.kind != "gaussian":
            raise DomainError("closed form only exists for the Gaussian window")
        return complex(_gauss_moment(s, k))
    lo, hi = _interval(window.support, other.support, s)
    return complex(_moment_quad(window.freq_response, lambda u: other.freq_response(u - s),
                                k, lo, hi, 0.5 * s))


def nu_k(window: WindowSpec, s: float, k: int, other: Optional[WindowSpec] = None,
         method: str = "quad") -> complex:
    """``int u^k a^(u) b^(s - u) du`` with ``a = window`` and ``b = other`` (default ``a``)."""
    _check_k(k)
    other = window if other is None else other
    if method == "closed":
        if window.kind != "gaussian" or other.kind != "gaussian":
            raise DomainError("closed form only exists for the Gaussian window")
        return complex(_gauss_moment(s, k))
    lo, hi = _interval(window.support, other.support, s)
    return complex(_moment_quad(window.freq_response, lambda u: other.freq_response(s - u),
                                k, lo, hi, 0.5 * s))


@dataclass(frozen=True)
class NoiseSecondOrder:
    """Covariance ``gamma_eta`` and pseudocovariance ``c_eta`` of
    ``(Phi(h_{t,eta}), Phi(h'_{t,eta}))`` for white noise ``Phi``.

    ``gamma_cross``/``c_cross`` hold the off-diagonal blocks against a second
    frequency when requested. ``support_radius`` records where spectral
    integrals were truncated.
    """

    gamma_eta: np.ndarray
    c_eta: np.ndarray
    gamma_cross: Optional[np.ndarray] = None
    c_cross: Optional[np.ndarray] = None
    support_radius: float = GAUSS_SUPPORT


def gaussian_noise_gamma():
    return np.array([[1.0, 0.0], [0.0, 0.5]], dtype=complex) / (2.0 * SQRT_PI)


def gaussian_noise_pseudo(eta):
    e = math.exp(-4.0 * math.pi ** 2 * eta * eta) / (2.0 * SQRT_PI)
    off = 2j * math.pi * eta
    return e * np.array([[1.0, off], [off, 0.5 - 4.0 * math.pi ** 2 * eta * eta]])


def noise_cross_blocks(wa: WindowSpec, wb: WindowSpec, eta: float, eta2: float,
                       method: str = "quad"):
    """Covariance and pseudocovariance between ``(a_eta, a'_eta)`` and ``(b_eta2, b'_eta2)``.

    Returns
    -------
    gam, c : ndarray, shape (2, 2)
        ``gam[i, j] = E X_i conj(Y_j)`` and ``c[i, j] = E X_i Y_j`` with
        ``X = (Phi(a_{t,eta}), Phi(a'_{t,eta}))`` and ``Y`` likewise for ``b``.
    """
    s = eta - eta2
    sig = eta + eta2
    g = [gamma_k(wa, s, k, wb, method) for k in range(3)]
    n = [nu_k(wa, sig, k, wb, method) for k in range(3)]
    tp = 2j * math.pi
    fp = 4.0 * math.pi ** 2
    gam = np.array([
        [g[0], -tp * (g[1] - s * g[0])],
        [tp * g[1], fp * (g[2] - s * g[1])],
    ])
    c = np.array([
        [n[0], tp * (sig * n[0] - n[1])],
        [tp * n[1], -fp * (sig * n[1] - n[2])],
    ])
    return gam, c


def noise_second_order(window: WindowSpec, eta: float, method: str = "closed") -> NoiseSecondOrder:
    """Second-order statistics of the noise STFT pair at frequency ``eta``.

    Parameters
    ----------
    window : WindowSpec
    eta : float
        Positive frequency.
    method : {"closed", "quad"}
        ``"closed"`` uses the explicit Gaussian-window formulas
        ``gamma = diag(1, 1/2) / (2 sqrt(pi))`` and
        ``c = exp(-4 pi^2 eta^2) / (2 sqrt(pi)) [[1, 2 pi i eta], [2 pi i eta, 1/2 - 4 pi^2 eta^2]]``;
        ``"quad"`` assembles both from quadrature of the moment integrals.
        Truncated windows always use quadrature.
    """
    if not eta > 0:
        raise DomainError("eta must be positive")
    if method == "closed" and window.kind == "gaussian":
        return NoiseSecondOrder(gaussian_noise_gamma(), gaussian_noise_pseudo(eta))
    if method not in ("closed", "quad"):
        raise DomainError(f"unknown method {method!r}")
    gam, c = noise_cross_blocks(window, window, eta, eta, "quad")
    gam = 0.5 * (gam + gam.conj().T)
    c = 0.5 * (c + c.T)
    return NoiseSecondOrder(gam, c, support_radius=window.support)


def noise_second_order_pair(window: WindowSpec, eta: float, eta2: float,
                            window2: Optional[WindowSpec] = None,
                            method: str = "quad") -> ComplexGaussian4:
    """Joint law of ``(a_eta, a'_eta, b_eta2, b'_eta2)`` for white noise.

    ``a`` is ``window`` and ``b`` is ``window2`` (default ``window``). With
    distinct windows ``eta2`` may equal ``eta``.
    """
    wb = window if window2 is None else window2
    if not (eta > 0 and eta2 > 0):
        raise DomainError("frequencies must be positive")
    if eta == eta2 and wb == window:
        raise DomainError("eta2 must differ from eta; use noise_second_order")
    gaa, caa = noise_cross_blocks(window, window, eta, eta, method)
    gbb, cbb = noise_cross_blocks(wb, wb, eta2, eta2, method)
    gab, cab = noise_cross_blocks(window, wb, eta, eta2, method)
    gam = np.block([[gaa, gab], [gab.conj().T, gbb]])
    c = np.block([[caa, cab], [cab.T, cbb]])
    gam = 0.5 * (gam + gam.conj().T)
    c = 0.5 * (c + c.T)
    w = np.linalg.eigvalsh(real_covariance(gam, c))
    if w[0] < -1e-10 * w[-1]:
        raise NumericalError(f"pair covariance not PSD (min eigenvalue {w[0]:.3e})")
    try:
        return ComplexGaussian4(np.zeros(4, complex), gam, c)
    except DegenerateCovarianceError as exc:
        raise NumericalError(f"pair covariance is singular: {exc}") from exc
