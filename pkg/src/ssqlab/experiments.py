"""Monte Carlo harness for the synchrosqueezed transform of noisy tones.

Every replicate draws from its own generator seeded by
``SeedSequence(seed, spawn_key=(i,))``, so results do not depend on how
replicates are batched.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigError, DataError, DomainError
from .sst import _stft_direct, squeeze_pair, stft_pair_at
from .window import WindowSpec, gaussian_window, m_truncated_window

__all__ = [
    "ExperimentConfig",
    "SampleSummary",
    "ComplexNormalFit",
    "clt_schedule",
    "replicate_rng",
    "synthesize",
    "simulate_sst_table",
    "simulate_sst_samples",
    "qq_experiment",
    "integrand_samples",
    "covariance_decay_experiment",
    "fit_complex_normal",
    "summarize",
    "complex_corr",
]

BATCH = 64


@dataclass(frozen=True)
class ExperimentConfig:
    """Description of one Monte Carlo experiment.

    The analysed signal is ``A exp(2 pi i xi0 t)`` plus white noise, sampled
    at ``sample_rate`` with ``n_samples`` points centred on ``t = 0``. The
    SST input grid is ``eta_l = l * sample_rate / n_samples`` for
    ``l = 1..n_samples``.

    Parameters
    ----------
    noise : {"real", "proper"}
        ``"real"``: i.i.d. ``N(0, 1/dt)`` samples (discretised real white
        noise). ``"proper"``: circular complex samples with ``E|n|^2 = 1/dt``.
    window_m : float, optional
        Use the band-limited window with this plateau instead of the Gaussian.
    delta : float
        Moment parameter constraining ``beta`` when ``use_clt_schedule``.
    """

    amplitude: float = 0.0
    xi0: float = 10.0
    alpha_list: tuple = (0.02, 0.1, 0.4, 0.8, 1.5)
    xi_list: tuple = (0.0, 5.0, 10.0, 15.0)
    n_realizations: int = 1000
    beta: float = 0.05
    delta: float = 10.0
    sample_rate: float = 142.02
    n_samples: int = 8192
    seed: int = 0
    noise: str = "real"
    window_m: Optional[float] = None
    use_clt_schedule: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha_list", tuple(float(a) for a in self.alpha_list))
        object.__setattr__(self, "xi_list", tuple(float(x) for x in self.xi_list))
        if self.amplitude < 0:
            raise ConfigError("amplitude must be nonnegative")
        if not self.xi0 > 0:
            raise ConfigError("xi0 must be positive")
        if any(not a > 0 for a in self.alpha_list):
            raise ConfigError("alpha values must be positive")
        if self.n_realizations < 1:
            raise ConfigError("n_realizations must be positive")
        if not 0 < self.beta < 0.5:
            raise ConfigError("beta must lie in (0, 1/2)")
        if not self.sample_rate > 0 or self.n_samples < 16:
            raise ConfigError("need sample_rate > 0 and n_samples >= 16")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.noise not in ("real", "proper"):
            raise ConfigError(f"unknown noise model {self.noise!r}")
        if self.use_clt_schedule:
            if not self.delta > 2:
                raise ConfigError("delta must exceed 2")
            if not 1.0 / (2.0 * (1.0 + self.delta)) < self.beta:
                raise ConfigError("beta must exceed 1/(2(1+delta)) for the CLT schedule")

    @property
    def dt(self):
        return 1.0 / self.sample_rate

    @property
    def delta_eta(self):
        return self.sample_rate / self.n_samples

    @property
    def center_index(self):
        return self.n_samples // 2

    def window(self) -> WindowSpec:
        if self.window_m is None:
            return gaussian_window(self.dt)
        return m_truncated_window(self.window_m, (self.dt, 8.0))

    def alphas(self):
        if self.use_clt_schedule:
            return (clt_schedule(self.n_samples, self.beta)[2],)
        return self.alpha_list

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["alpha_list"] = list(self.alpha_list)
        d["xi_list"] = list(self.xi_list)
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def clt_schedule(n: int, beta: float):
    """Parameter schedule ``(delta_eta, M, alpha)`` for ``n`` input frequencies.

    ``delta_eta = n^(-1/2 + beta)``, ``M = sqrt(4 beta ln n)``,
    ``alpha = n^(-2 beta)``.
    """
    if n < 16:
        raise DomainError("n must be at least 16")
    if not 0 < beta < 0.5:
        raise DomainError("beta must lie in (0, 1/2)")
    n = float(n)
    return n ** (-0.5 + beta), math.sqrt(4.0 * beta * math.log(n)), n ** (-2.0 * beta)


def replicate_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for replicate ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


def synthesize(config: ExperimentConfig, rng: np.random.Generator, amplitude=None):
    """One realisation of tone plus white noise on the centred time grid."""
    a = config.amplitude if amplitude is None else amplitude
    n, dt = config.n_samples, config.dt
    t = (np.arange(n) - config.center_index) * dt
    scale = 1.0 / math.sqrt(dt)
    if config.noise == "real":
        noise = rng.standard_normal(n) * scale
    else:
        noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * (scale / math.sqrt(2.0))
    return a * np.exp(2j * np.pi * config.xi0 * t) + noise


def _batch(config, start, stop, stream=0):
    return np.stack([synthesize(config, replicate_rng(config.seed, i, stream))
                     for i in range(start, stop)])


def simulate_sst_table(config: ExperimentConfig, alphas=None, xis=None):
    """``S(0, xi)`` for every replicate, alpha and xi.

    Returns
    -------
    ndarray, shape (n_realizations, len(alphas), len(xis))
    """
    alphas = config.alphas() if alphas is None else tuple(alphas)
    xis = config.xi_list if xis is None else tuple(xis)
    window = config.window()
    out = np.empty((config.n_realizations, len(alphas), len(xis)), complex)
    for lo in range(0, config.n_realizations, BATCH):
        hi = min(lo + BATCH, config.n_realizations)
        x = _batch(config, lo, hi)
        _, v, dv, _ = stft_pair_at(x, config.dt, window, config.center_index, config.n_samples)
        for j, a in enumerate(alphas):
            out[lo:hi, j, :] = squeeze_pair(v, dv, xis, a, config.delta_eta)
    return out


class ComplexNormalFit(NamedTuple):
    variance: float
    pseudo_variance: complex
    fit_stat: float
    degenerate: bool


def fit_complex_normal(samples, min_samples: int = 30) -> ComplexNormalFit:
    """Moment fit of a complex normal law.

    ``variance = mean |s - mean|^2``, ``pseudo_variance = mean (s - mean)^2``.
    ``fit_stat`` is the larger Kolmogorov-Smirnov distance of the real and
    imaginary parts against the normal margins implied by the fit.
    """
    s = np.asarray(samples, dtype=complex).ravel()
    if s.size < min_samples:
        raise DataError(f"need at least {min_samples} samples, got {s.size}")
    d = s - s.mean()
    var = float(np.mean(np.abs(d) ** 2))
    pv = complex(np.mean(d * d))
    vre = 0.5 * (var + pv.real)
    vim = 0.5 * (var - pv.real)
    if var <= 0.0:
        return ComplexNormalFit(0.0, 0j, math.nan, True)
    ks = []
    for part, v in ((d.real, vre), (d.imag, vim)):
        if v > 1e-14 * var:
            ks.append(stats.kstest(part / math.sqrt(v), "norm").statistic)
    return ComplexNormalFit(var, pv, float(max(ks)), False)


@dataclass(frozen=True)
class SampleSummary:
    """Summary of complex Monte Carlo samples.

    ``normal_qq`` holds (normal quantiles, ordered standardised ``Re s``).
    ``qq_corr`` is the probability-plot correlation and ``ks_pvalue`` the
    KS p-value of ``Re s`` against the normal with fitted mean and variance.
    """

    samples: np.ndarray
    mean: complex
    variance: float
    pseudo_variance: complex
    normal_qq: tuple
    fit_stat: float
    qq_corr: float
    ks_pvalue: float
    mean_se: float
    degenerate: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.samples.size

    @property
    def mean_z(self):
        return abs(self.mean) / self.mean_se if self.mean_se > 0 else math.inf


def summarize(samples) -> SampleSummary:
    s = np.asarray(samples, dtype=complex).ravel()
    n = s.size
    mean = complex(s.mean())
    d = s - mean
    var = float(np.mean(np.abs(d) ** 2))
    pv = complex(np.mean(d * d))
    se = math.sqrt(var / n) if n > 1 else 0.0
    if n < 3 or var <= 0.0:
        empty = (np.empty(0), np.empty(0))
        return SampleSummary(s, mean, var, pv, empty, math.nan, math.nan, math.nan, se, True)
    re = s.real
    sd = float(re.std())
    if sd == 0.0:
        empty = (np.empty(0), np.empty(0))
        return SampleSummary(s, mean, var, pv, empty, math.nan, math.nan, math.nan, se, True)
    (osm, osr), (_, _, r) = stats.probplot((re - re.mean()) / sd, dist="norm")
    pval = float(stats.kstest((re - re.mean()) / sd, "norm").pvalue)
    fit = fit_complex_normal(s, min_samples=3)
    return SampleSummary(s, mean, var, pv, (osm, osr), fit.fit_stat, float(r), pval, se)


def simulate_sst_samples(config: ExperimentConfig, alpha: float, xi: float) -> SampleSummary:
    """Summary of ``S(0, xi)`` over ``config.n_realizations`` replicates."""
    s = simulate_sst_table(config, (alpha,), (xi,))[:, 0, 0]
    return summarize(s)


def qq_experiment(config: ExperimentConfig):
    """Summaries over the ``(alpha, xi)`` grid of ``config``.

    Returns
    -------
    list of (alpha, xi, SampleSummary)
    """
    alphas = config.alphas()
    table = simulate_sst_table(config, alphas, config.xi_list)
    return [(a, x, summarize(table[:, i, j]))
            for i, a in enumerate(alphas) for j, x in enumerate(config.xi_list)]


def _pair_at(config, window, etas, lo, hi, stream=0):
    x = _batch(config, lo, hi, stream)
    t = np.array([0.0])
    t0 = -config.center_index * config.dt
    v, _ = _stft_direct(x, config.dt, t0, window, t, etas, deriv=False)
    vd, _ = _stft_direct(x, config.dt, t0, window, t, etas, deriv=True)
    v = v[:, 0, :]
    vd = vd[:, 0, :]
    return v, -vd + 2j * np.pi * etas * v, vd


def integrand_samples(config: ExperimentConfig, eta: float, xi: float, alphas: Sequence[float],
                      windows: Sequence[WindowSpec] = ()):
    """Samples of ``Y(0, eta)`` at output frequency ``xi`` for several alphas.

    Returns
    -------
    ndarray, shape (n_realizations, len(alphas), 1 + len(windows))
        The last axis holds the configured window followed by ``windows``,
        all applied to the same noise realisations.
    """
    wins = [config.window()] + list(windows)
    etas = np.array([float(eta)])
    out = np.empty((config.n_realizations, len(alphas), len(wins)), complex)
    for lo in range(0, config.n_realizations, BATCH):
        hi = min(lo + BATCH, config.n_realizations)
        x = _batch(config, lo, hi)
        t0 = -config.center_index * config.dt
        for k, w in enumerate(wins):
            v, _ = _stft_direct(x, config.dt, t0, w, np.array([0.0]), etas, deriv=False)
            vd, _ = _stft_direct(x, config.dt, t0, w, np.array([0.0]), etas, deriv=True)
            v = v[:, 0, 0]
            dv = -vd[:, 0, 0] + 2j * np.pi * eta * v
            with np.errstate(divide="ignore", invalid="ignore"):
                om = dv / (2j * np.pi * v)
            for j, a in enumerate(alphas):
                out[lo:hi, j, k] = v * np.exp(-np.abs(xi - om) ** 2 / a) / (np.pi * a)
    return out


def complex_corr(x, y):
    """Complex correlation ``E (x - Ex) conj(y - Ey) / sqrt(Var x Var y)``."""
    x = np.asarray(x) - np.mean(x)
    y = np.asarray(y) - np.mean(y)
    den = math.sqrt(float(np.mean(np.abs(x) ** 2) * np.mean(np.abs(y) ** 2)))
    if den == 0.0:
        return math.nan
    return complex(np.mean(x * np.conj(y)) / den)


def covariance_decay_experiment(config: ExperimentConfig, eta_pairs, alpha: float, xi=None):
    """Monte Carlo correlations of ``V`` and ``Y`` between two frequencies.

    Parameters
    ----------
    eta_pairs : sequence of (eta, eta2)
    alpha : float
    xi : float, optional
        Output frequency of ``Y``; defaults to the midpoint of each pair.

    Returns
    -------
    list of dict
        Keys ``eta``, ``eta2``, ``gap``, ``corr_v``, ``corr_y`` (moduli of
        complex correlations), ``se`` (``1/sqrt(n)``) and ``n``.
    """
    window = config.window()
    pairs = [(float(a), float(b)) for a, b in eta_pairs]
    etas = np.array(sorted({e for p in pairs for e in p}))
    pos = {e: i for i, e in enumerate(etas)}
    n = config.n_realizations
    v_all = np.empty((n, etas.size), complex)
    dv_all = np.empty((n, etas.size), complex)
    for lo in range(0, n, BATCH):
        hi = min(lo + BATCH, n)
        v, dv, _ = _pair_at(config, window, etas, lo, hi)
        v_all[lo:hi], dv_all[lo:hi] = v, dv
    with np.errstate(divide="ignore", invalid="ignore"):
        om_all = dv_all / (2j * np.pi * v_all)
    rows = []
    for a, b in pairs:
        x = 0.5 * (a + b) if xi is None else float(xi)
        ya = v_all[:, pos[a]] * np.exp(-np.abs(x - om_all[:, pos[a]]) ** 2 / alpha) / (np.pi * alpha)
        yb = v_all[:, pos[b]] * np.exp(-np.abs(x - om_all[:, pos[b]]) ** 2 / alpha) / (np.pi * alpha)
        rows.append(dict(eta=a, eta2=b, gap=abs(a - b), xi=x,
                         corr_v=abs(complex_corr(v_all[:, pos[a]], v_all[:, pos[b]])),
                         corr_y=abs(complex_corr(ya, yb)), se=1.0 / math.sqrt(n), n=n))
    return rows
