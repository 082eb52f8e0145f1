"""Synchrosqueezing of noisy signals: transforms, noise statistics and detection."""

from .complex_gaussian import (ComplexGaussian, ComplexGaussian2, ComplexGaussian4, augmented_form,
                               density, quotient_density, quotient_total_mass, sample,
                               sample_quotient)
from .detection import DetectionConfig, DetectionReport, detect, rejection_rate_experiment
from .errors import (ConfigError, DataError, DegenerateCovarianceError, DomainError,
                     GridMismatchError, NumericalError, SsqlabError)
from .experiments import ExperimentConfig, clt_schedule, covariance_decay_experiment, qq_experiment
from .special import confluent_1f1, hermite_neg, log_confluent_1f1
from .sst import TFR, SignalGrid, SSTParams, dstft, reassignment, sst, stft, synchrosqueeze
from .window import WindowSpec, gaussian_window, m_truncated_window, noise_second_order

__version__ = "0.1.0"
