"""STFT, reassignment and synchrosqueezing on sampled signals.

The STFT uses the phase convention

    V(t, eta) = sum_k f(s_k) h(s_k - t) exp(-2 pi i eta (s_k - t)) dt,

a plain Riemann sum over the samples ``s_k`` with the window cut at
``|s_k - t| <= half_width``. Its time derivative is
``-V^{(h')} + 2 pi i eta V``. The reassignment rule is
``Omega = dV / (2 pi i V)`` and the squeezed transform is

    S(t, xi) = d_eta * sum_l V(t, eta_l) g_alpha(xi - Omega(t, eta_l)),
    g_alpha(z) = exp(-|z|^2 / alpha) / (pi alpha),

with ``|.|`` the complex modulus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
import scipy.fft

from .errors import DataError, DomainError, GridMismatchError
from .window import WindowSpec, gaussian_window

__all__ = [
    "SignalGrid",
    "TFR",
    "SSTParams",
    "INVALID",
    "stft",
    "dstft",
    "reassignment",
    "sst_integrand",
    "sst",
    "synchrosqueeze",
    "stft_pair_at",
    "squeeze",
    "squeeze_pair",
    "reassign_rows",
    "default_threshold",
    "fft_grid_stft",
]

#: Marker stored in a reassignment TFR where ``|V|`` is at or below threshold.
INVALID = complex(-np.inf, 0.0)
THRESHOLD_RTOL = 1e-12
_EXP_CUTOFF = 745.0  # exp(-745) underflows to 0 in float64


@dataclass(frozen=True)
class SignalGrid:
    """Uniformly sampled signal ``samples[k] = f(t0 + k dt)``."""

    samples: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        x = np.array(self.samples, dtype=complex)
        if x.ndim != 1:
            raise DataError("samples must be one-dimensional")
        if x.size == 0:
            raise DataError("signal is empty")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DataError("dt must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    @property
    def n(self):
        return self.samples.size

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def sample_rate(self):
        return 1.0 / self.dt


@dataclass(frozen=True)
class TFR:
    """Complex values on a (time x frequency) grid."""

    times: np.ndarray
    freqs: np.ndarray
    values: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        f = np.array(self.freqs, dtype=float)
        v = np.array(self.values, dtype=complex)
        if v.shape != (t.size, f.size):
            raise GridMismatchError(f"values {v.shape} vs grids ({t.size}, {f.size})")
        if self.kind not in ("stft", "dstft", "reassignment", "sst", "integrand"):
            raise DomainError(f"unknown TFR kind {self.kind!r}")
        for a in (t, f, v):
            a.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "values", v)

    @property
    def invalid_mask(self):
        return np.isneginf(self.values.real)

    def same_grid(self, other):
        return (self.times.shape == other.times.shape and self.freqs.shape == other.freqs.shape
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.freqs, other.freqs))


@dataclass(frozen=True)
class SSTParams:
    """Squeezing parameters.

    The input frequency grid is ``eta_l = l * delta_eta`` for
    ``l = 1..n_eta``; ``H = n_eta * delta_eta``.
    """

    alpha: float
    delta_eta: float
    n_eta: int
    xi_grid: np.ndarray
    v_threshold: Optional[float] = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")
        if not self.delta_eta > 0 or self.n_eta < 1:
            raise DomainError("delta_eta must be positive and n_eta >= 1")
        xi = np.atleast_1d(np.array(self.xi_grid, dtype=float))
        xi.setflags(write=False)
        object.__setattr__(self, "xi_grid", xi)

    @property
    def eta_grid(self):
        return self.delta_eta * np.arange(1, self.n_eta + 1)

    @property
    def bandwidth(self):
        return self.n_eta * self.delta_eta


def _window_values(window, x, deriv):
    # reuse the cached samples when x is the window's own offset grid
    offs = window.offsets
    if x.size == offs.size and np.allclose(x, offs, rtol=0.0, atol=1e-9 * window.dt):
        return window.derivative_samples if deriv else window.time_samples
    return window.derivative_response(x) if deriv else window.time_response(x)


def _stft_direct(samples, dt, t0, window, times, etas, deriv):
    # samples: (R, N). Returns (R, T, F) and the zero-pad flag.
    r, n = samples.shape
    out = np.zeros((r, times.size, etas.size), complex)
    padded = False
    hw = window.half_width
    for i, t in enumerate(times):
        k_lo = int(math.ceil((t - hw - t0) / dt - 1e-9))
        k_hi = int(math.floor((t + hw - t0) / dt + 1e-9))
        if k_lo < 0 or k_hi > n - 1:
            padded = True
        k_lo, k_hi = max(k_lo, 0), min(k_hi, n - 1)
        if k_hi < k_lo:
            continue
        x = t0 + dt * np.arange(k_lo, k_hi + 1) - t
        w = _window_values(window, x, deriv)
        seg = samples[:, k_lo:k_hi + 1] * w
        for lo in range(0, etas.size, 1024):
            e = etas[lo:lo + 1024]
            kern = np.exp(-2j * np.pi * np.outer(x, e))
            out[:, i, lo:lo + 1024] = (seg @ kern) * dt
    return out, padded


def fft_grid_stft(samples, dt, window, center_index, n_fft, deriv=False):
    """STFT at ``t = t0 + center_index * dt`` on the bins ``l / (n_fft dt)``.

    Parameters
    ----------
    samples : ndarray, shape (R, N)
        Batch of signals sharing one time grid.
    center_index : int
        Sample index of the analysis time.
    n_fft : int
        Transform length; must cover the window support.

    Returns
    -------
    ndarray, shape (R, n_fft)
        Column ``l`` holds ``V(t, l / (n_fft dt))`` for ``l = 0..n_fft-1``.
    bool
        Whether the window support left the sample range (zero padding).
    """
    samples = np.atleast_2d(samples)
    r, n = samples.shape
    k = int(math.floor(window.half_width / dt + 1e-9))
    if 2 * k + 1 > n_fft:
        k = (n_fft - 1) // 2
    lo, hi = center_index - k, center_index + k
    padded = lo < 0 or hi > n - 1
    lo_c, hi_c = max(lo, 0), min(hi, n - 1)
    offs = np.arange(lo_c, hi_c + 1) - center_index
    w = _window_values(window, offs * dt, deriv)
    buf = np.zeros((r, n_fft), complex)
    buf[:, offs % n_fft] = samples[:, lo_c:hi_c + 1] * w
    return scipy.fft.fft(buf, axis=1) * dt, padded


def _as_grid(a, name):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.size == 0:
        raise DomainError(f"{name} grid is empty")
    return a


def _fft_plan(signal, times, etas, n_fft):
    if n_fft is None:
        return None
    idx = (times - signal.t0) / signal.dt
    if not np.allclose(idx, np.round(idx), atol=1e-9):
        return None
    bins = etas * n_fft * signal.dt
    if not np.allclose(bins, np.round(bins), atol=1e-7):
        raise DomainError("etas are not on the FFT grid l / (n_fft dt)")
    return np.round(idx).astype(int), np.round(bins).astype(int) % n_fft


def _stft_values(signal, window, times, etas, n_fft, deriv):
    plan = _fft_plan(signal, times, etas, n_fft)
    x = signal.samples[None, :]
    if plan is None:
        v, padded = _stft_direct(x, signal.dt, signal.t0, window, times, etas, deriv)
        return v[0], padded
    idx, bins = plan
    out = np.empty((times.size, etas.size), complex)
    padded = False
    for i, c in enumerate(idx):
        row, p = fft_grid_stft(x, signal.dt, window, int(c), n_fft, deriv)
        out[i] = row[0, bins]
        padded |= p
    return out, padded


def _meta(window, padded, **extra):
    m = {"window": window.kind, "half_width": window.half_width, "zero_padded": bool(padded)}
    if window.M is not None:
        m["M"] = window.M
    m.update(extra)
    return m


def stft(signal: SignalGrid, window: Optional[WindowSpec] = None, times=None, etas=None,
         n_fft: Optional[int] = None) -> TFR:
    """Short-time Fourier transform with the modulated-phase convention.

    Parameters
    ----------
    signal : SignalGrid
    window : WindowSpec, optional
        Defaults to the Gaussian window.
    times, etas : array_like
        Analysis times (seconds) and frequencies (Hz).
    n_fft : int, optional
        When every time is a sample instant and every frequency is a
        multiple of ``1 / (n_fft dt)``, an FFT of this length replaces the
        direct sum (same Riemann sum, different evaluation order).

    Returns
    -------
    TFR
        ``meta["zero_padded"]`` is set when the window support extended past
        the available samples.
    """
    window = gaussian_window(signal.dt) if window is None else window
    times = _as_grid(times, "time")
    etas = _as_grid(etas, "frequency")
    v, padded = _stft_values(signal, window, times, etas, n_fft, deriv=False)
    return TFR(times, etas, v, "stft", _meta(window, padded))


def dstft(signal: SignalGrid, window: Optional[WindowSpec] = None, times=None, etas=None,
          n_fft: Optional[int] = None) -> TFR:
    """Time derivative of :func:`stft`, ``-V^{(h')} + 2 pi i eta V``."""
    window = gaussian_window(signal.dt) if window is None else window
    times = _as_grid(times, "time")
    etas = _as_grid(etas, "frequency")
    v, p1 = _stft_values(signal, window, times, etas, n_fft, deriv=False)
    vd, p2 = _stft_values(signal, window, times, etas, n_fft, deriv=True)
    dv = -vd + 2j * np.pi * etas[None, :] * v
    return TFR(times, etas, dv, "dstft", _meta(window, p1 or p2))


def default_threshold(v):
    """``1e-12`` times the RMS of ``|V|``."""
    v = np.asarray(v)
    return THRESHOLD_RTOL * float(np.sqrt(np.mean(np.abs(v) ** 2))) if v.size else 0.0


def reassign_rows(v, dv):
    """Row-wise reassignment with the default threshold of each row."""
    thr = THRESHOLD_RTOL * np.sqrt(np.mean(np.abs(v) ** 2, axis=-1, keepdims=True))
    ok = np.abs(v) > thr
    with np.errstate(divide="ignore", invalid="ignore"):
        om = dv / (2j * np.pi * v)
    om[~ok] = INVALID
    return om


def _reassign(v, dv, thr):
    ok = np.abs(v) > thr
    om = np.full(v.shape, INVALID, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        om[ok] = dv[ok] / (2j * np.pi * v[ok])
    return om


def reassignment(v: TFR, dv: TFR, v_threshold: Optional[float] = None) -> TFR:
    """Reassignment rule ``Omega = dV / (2 pi i V)``.

    Cells with ``|V| <= v_threshold`` hold :data:`INVALID`. The default
    threshold is ``1e-12 * RMS(|V|)``.
    """
    if not v.same_grid(dv):
        raise GridMismatchError("V and dV are on different grids")
    thr = default_threshold(v.values) if v_threshold is None else float(v_threshold)
    om = _reassign(v.values, dv.values, thr)
    meta = dict(v.meta)
    meta["v_threshold"] = thr
    return TFR(v.times, v.freqs, om, "reassignment", meta)


def _kernel(xi, om, alpha):
    with np.errstate(invalid="ignore", over="ignore"):
        d2 = (xi - om.real) ** 2 + om.imag ** 2
        out = np.exp(-d2 / alpha) / (np.pi * alpha)
    return np.where(np.isneginf(om.real), 0.0, out)


def sst_integrand(v: TFR, omega: TFR, xi: float, alpha: float) -> TFR:
    """``Y = V exp(-|xi - Omega|^2 / alpha) / (pi alpha)`` cell by cell."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if not v.same_grid(omega):
        raise GridMismatchError("V and Omega are on different grids")
    y = v.values * _kernel(float(xi), omega.values, alpha)
    meta = dict(v.meta)
    meta.update(xi=float(xi), alpha=float(alpha))
    return TFR(v.times, v.freqs, y, "integrand", meta)


@numba.njit(cache=True)
def _deposit(out, r, vv, ore, oim, xi_sorted, alpha, cutoff, reach):
    base = oim * oim / alpha
    if base >= cutoff:
        return
    j0 = np.searchsorted(xi_sorted, ore - reach)
    for j in range(j0, xi_sorted.size):
        d = xi_sorted[j] - ore
        if d > reach:
            break
        e = d * d / alpha + base
        if e < cutoff:
            out[r, j] += vv * math.exp(-e)


@numba.njit(cache=True)
def _squeeze_kernel(v, om, xi_sorted, alpha, cutoff, out):
    # v, om: (R, L); xi_sorted: (J,); out: (R, J) accumulated in place
    r_n, l_n = v.shape
    reach = math.sqrt(cutoff * alpha)
    norm = 1.0 / (math.pi * alpha)
    for r in range(r_n):
        for l in range(l_n):
            o = om[r, l]
            if o.real > -np.inf:
                _deposit(out, r, v[r, l] * norm, o.real, o.imag, xi_sorted, alpha, cutoff, reach)


@numba.njit(cache=True)
def _squeeze_pair_kernel(v, dv, xi_sorted, alpha, cutoff, rtol, out):
    # reassignment fused in: same threshold rule as reassign_rows
    r_n, l_n = v.shape
    reach = math.sqrt(cutoff * alpha)
    norm = 1.0 / (math.pi * alpha)
    for r in range(r_n):
        ms = 0.0
        for l in range(l_n):
            ms += v[r, l].real ** 2 + v[r, l].imag ** 2
        thr = rtol * math.sqrt(ms / l_n)
        for l in range(l_n):
            x = v[r, l]
            if not abs(x) > thr:
                continue
            o = dv[r, l] / (2j * math.pi * x)
            _deposit(out, r, x * norm, o.real, o.imag, xi_sorted, alpha, cutoff, reach)


def _sorted_xi(xi):
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    order = np.argsort(xi, kind="stable")
    return order, np.ascontiguousarray(xi[order])


def squeeze_pair(v, dv, xi, alpha, delta_eta, cutoff=_EXP_CUTOFF):
    """:func:`squeeze` of ``(V, reassign_rows(V, dV))`` without the Omega array."""
    v = np.ascontiguousarray(np.atleast_2d(v), dtype=complex)
    dv = np.ascontiguousarray(np.atleast_2d(dv), dtype=complex)
    if v.shape != dv.shape or v.ndim != 2:
        raise GridMismatchError("V and dV must share a 2-d shape")
    order, xs = _sorted_xi(xi)
    acc = np.zeros((v.shape[0], xs.size), complex)
    _squeeze_pair_kernel(v, dv, xs, float(alpha), float(cutoff), THRESHOLD_RTOL, acc)
    out = np.empty_like(acc)
    out[:, order] = acc * delta_eta
    return out


def squeeze(v, om, xi, alpha, delta_eta, cutoff=_EXP_CUTOFF):
    """Squeeze batches of STFT columns.

    Parameters
    ----------
    v, om : ndarray, shape (..., L)
        STFT values and reassignment on a shared frequency grid.
    xi : array_like
        Output frequencies.
    cutoff : float
        Kernel terms ``exp(-e)`` with ``e >= cutoff`` are skipped. The
        default is where ``exp`` underflows, so nothing representable is
        dropped.

    Returns
    -------
    ndarray, shape (..., len(xi))
    """
    v = np.asarray(v, dtype=complex)
    om = np.asarray(om, dtype=complex)
    if v.shape != om.shape:
        raise GridMismatchError("V and Omega shapes differ")
    order, xs = _sorted_xi(xi)
    lead = v.shape[:-1]
    v2 = np.ascontiguousarray(v.reshape(-1, v.shape[-1]))
    o2 = np.ascontiguousarray(om.reshape(-1, om.shape[-1]))
    acc = np.zeros((v2.shape[0], xs.size), complex)
    _squeeze_kernel(v2, o2, xs, float(alpha), float(cutoff), acc)
    out = np.empty_like(acc)
    out[:, order] = acc * delta_eta
    return out.reshape(lead + (xs.size,))


def _uniform_step(freqs):
    if freqs.size < 2:
        return None
    d = np.diff(freqs)
    if np.max(np.abs(d - d[0])) > 1e-9 * max(abs(d[0]), 1e-300):
        return None
    return float(d[0])


def sst(v: TFR, omega: TFR, params: SSTParams) -> TFR:
    """Synchrosqueezed transform ``S(t, xi) = d_eta * sum_l Y(t, eta_l)``.

    The frequency axis of ``v`` must be uniform with spacing
    ``params.delta_eta``. Invalid reassignment cells contribute nothing.
    """
    if not v.same_grid(omega):
        raise GridMismatchError("V and Omega are on different grids")
    step = _uniform_step(v.freqs)
    if step is not None and abs(step - params.delta_eta) > 1e-9 * params.delta_eta:
        raise GridMismatchError(f"frequency spacing {step} != delta_eta {params.delta_eta}")
    s = squeeze(v.values, omega.values, params.xi_grid, params.alpha, params.delta_eta)
    meta = dict(v.meta)
    meta.update(alpha=params.alpha, delta_eta=params.delta_eta)
    return TFR(v.times, params.xi_grid, s, "sst", meta)


def synchrosqueeze(signal: SignalGrid, params: SSTParams, times,
                   window: Optional[WindowSpec] = None, n_fft: Optional[int] = None):
    """Run the full pipeline; returns ``(V, dV, Omega, S)``."""
    window = gaussian_window(signal.dt) if window is None else window
    etas = params.eta_grid
    v = stft(signal, window, times, etas, n_fft=n_fft)
    dv = dstft(signal, window, times, etas, n_fft=n_fft)
    om = reassignment(v, dv, params.v_threshold)
    return v, dv, om, sst(v, om, params)


def stft_pair_at(samples, dt, window, center_index, n_fft, multipliers=None):
    """Batched ``(V, dV)`` at one sample instant on frequencies ``l / (n_fft dt)``.

    Parameters
    ----------
    multipliers : array_like of int, optional
        Values of ``l``; defaults to ``1..n_fft`` (the grid ``eta_l = l d_eta``
        with ``d_eta = 1 / (n_fft dt)``).

    Returns
    -------
    eta : ndarray, shape (L,)
    v, dv : ndarray, shape (R, L)
    padded : bool
    """
    samples = np.atleast_2d(samples)
    r, n = samples.shape
    ls = np.arange(1, n_fft + 1) if multipliers is None else np.asarray(multipliers, int)
    k = int(math.floor(window.half_width / dt + 1e-9))
    if 2 * k + 1 > n_fft:
        k = (n_fft - 1) // 2
    lo, hi = center_index - k, center_index + k
    padded = lo < 0 or hi > n - 1
    lo_c, hi_c = max(lo, 0), min(hi, n - 1)
    offs = np.arange(lo_c, hi_c + 1) - center_index
    x = offs * dt
    seg = samples[:, lo_c:hi_c + 1]
    win = np.stack([_window_values(window, x, False), _window_values(window, x, True)])
    spec = scipy.fft.fft(seg[None, :, :] * win[:, None, :], n=n_fft, axis=-1)
    cols = ls % n_fft
    eta = ls / (n_fft * dt)
    # the segment starts at offset offs[0], not at 0
    phase = dt * np.exp(-2j * np.pi * (cols * int(offs[0]) % n_fft) / n_fft)
    v = spec[0][:, cols] * phase
    return eta, v, 2j * np.pi * eta * v - spec[1][:, cols] * phase, padded
