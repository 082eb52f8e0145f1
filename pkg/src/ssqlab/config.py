"""Run configuration documents for the command-line tool.

A configuration is one JSON object with optional flat sections::

    {
      "seed": 0,
      "input": "signal.txt",
      "out": "results",
      "experiment": {...},   # ExperimentConfig fields
      "detection": {...},    # DetectionConfig fields
      "transform": {...},    # TransformConfig fields
      "quotient": {...},     # QuotientConfig fields
      "covdecay": {...},     # CovDecayConfig fields
      "rejection": {...}     # RejectionConfig fields
    }

Unknown keys at any level are rejected.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .detection import DetectionConfig
from .errors import ConfigError
from .experiments import ExperimentConfig

__all__ = [
    "TransformConfig",
    "QuotientConfig",
    "CovDecayConfig",
    "RejectionConfig",
    "RunConfig",
    "load_config",
]


def _from_dict(cls, d, section):
    if not isinstance(d, dict):
        raise ConfigError(f"section {section!r} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{section}: {exc}") from exc


@dataclass(frozen=True)
class TransformConfig:
    """Grids of the ``transform`` command.

    ``delta_eta`` defaults to ``1 / (n dt)`` and ``n_eta`` to the number of
    bins below ``eta_max`` (Nyquist by default). Times default to every
    ``time_step``-th sample.
    """

    alpha: float = 0.4
    delta_eta: Optional[float] = None
    eta_max: Optional[float] = None
    xi_min: float = 0.0
    xi_max: Optional[float] = None
    xi_step: Optional[float] = None
    time_step: int = 16
    window_m: Optional[float] = None
    half_width: float = 8.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if self.time_step < 1:
            raise ConfigError("time_step must be positive")
        if self.delta_eta is not None and not self.delta_eta > 0:
            raise ConfigError("delta_eta must be positive")
        if self.xi_step is not None and not self.xi_step > 0:
            raise ConfigError("xi_step must be positive")
        if not self.half_width > 0:
            raise ConfigError("half_width must be positive")


@dataclass(frozen=True)
class QuotientConfig:
    """Complex normal pair and ``q`` grid of the ``quotient`` command.

    Matrices are given as nested lists of ``[re, im]`` pairs.
    """

    mu: tuple = ((0.0, 0.0), (0.0, 0.0))
    gamma: tuple = (((1.0, 0.0), (0.3, 0.2)), ((0.3, -0.2), (1.5, 0.0)))
    c: tuple = (((0.2, 0.1), (0.1, 0.0)), ((0.1, 0.0), (0.3, -0.1)))
    re_min: float = -3.0
    re_max: float = 3.0
    im_min: float = -3.0
    im_max: float = 3.0
    n_re: int = 61
    n_im: int = 61
    n_mc: int = 0

    def __post_init__(self):
        if self.n_re < 1 or self.n_im < 1 or self.n_mc < 0:
            raise ConfigError("grid sizes must be positive")
        try:
            self.arrays()
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"quotient: malformed matrix ({exc})") from exc

    @staticmethod
    def _cplx(a):
        a = np.asarray(a, dtype=float)
        if a.shape[-1] != 2:
            raise ValueError("entries must be [re, im] pairs")
        return a[..., 0] + 1j * a[..., 1]

    def arrays(self):
        mu, g, c = self._cplx(self.mu), self._cplx(self.gamma), self._cplx(self.c)
        if mu.shape != (2,) or g.shape != (2, 2) or c.shape != (2, 2):
            raise ValueError("need mu of length 2 and 2x2 gamma, c")
        return mu, g, c

    def grid(self):
        re = np.linspace(self.re_min, self.re_max, self.n_re)
        im = np.linspace(self.im_min, self.im_max, self.n_im)
        return re, im


@dataclass(frozen=True)
class CovDecayConfig:
    """Frequency pairs ``(eta, eta + gap)`` of the ``covdecay`` command."""

    eta: float = 20.0
    gaps: tuple = (0.5, 1.0, 2.0, 3.0, 5.0)
    alpha: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "gaps", tuple(float(g) for g in self.gaps))
        if not self.alpha > 0 or not self.eta > 0:
            raise ConfigError("eta and alpha must be positive")


@dataclass(frozen=True)
class RejectionConfig:
    """Synthetic signals of the ``detect`` and ``rejection-curve`` commands.

    ``noise_scale`` is ``"sample"`` (unit variance per sample) or
    ``"density"`` (variance ``1/dt``).
    """

    amplitudes: tuple = tuple(round(0.1 * k, 10) for k in range(10))
    n_trials: int = 1000
    sample_rate: float = 142.02
    xi0: float = 10.0
    noise_scale: str = "sample"

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        if self.n_trials < 1:
            raise ConfigError("n_trials must be positive")
        if not self.amplitudes:
            raise ConfigError("no amplitudes given")
        if self.noise_scale not in ("sample", "density"):
            raise ConfigError(f"unknown noise scale {self.noise_scale!r}")


_SECTIONS = {
    "experiment": ExperimentConfig,
    "detection": DetectionConfig,
    "transform": TransformConfig,
    "quotient": QuotientConfig,
    "covdecay": CovDecayConfig,
    "rejection": RejectionConfig,
}


@dataclass(frozen=True)
class RunConfig:
    seed: Optional[int] = None
    input: Optional[str] = None
    out: Optional[str] = None
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    transform: TransformConfig = field(default_factory=TransformConfig)
    quotient: QuotientConfig = field(default_factory=QuotientConfig)
    covdecay: CovDecayConfig = field(default_factory=CovDecayConfig)
    rejection: RejectionConfig = field(default_factory=RejectionConfig)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {"seed", "input", "out"} | set(_SECTIONS)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        kw = {k: _from_dict(c, d[k], k) for k, c in _SECTIONS.items() if k in d}
        for k in ("input", "out"):
            if k in d and d[k] is not None and not isinstance(d[k], str):
                raise ConfigError(f"{k} must be a string")
            if k in d:
                kw[k] = d[k]
        if "seed" in d and d["seed"] is not None:
            s = d["seed"]
            if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2 ** 64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
            kw["seed"] = s
        return cls(**kw)

    def with_seed(self, seed):
        """Copy with ``seed`` pushed into every seeded section."""
        if seed is None:
            return self
        return dataclasses.replace(
            self, seed=seed,
            experiment=dataclasses.replace(self.experiment, seed=seed),
            detection=dataclasses.replace(self.detection, seed=seed))

    def to_dict(self):
        d = {"seed": self.seed, "input": self.input, "out": self.out}
        for k in _SECTIONS:
            d[k] = dataclasses.asdict(getattr(self, k))
        return d


def load_config(path) -> RunConfig:
    """Read and validate a JSON run configuration."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    cfg = RunConfig.from_dict(d)
    return cfg.with_seed(cfg.seed)
