"""Special functions used by the complex Gaussian quotient density.

Only the parameter ranges needed elsewhere in the package are targeted:
``1F1(a; b; z)`` with ``a, b > 0`` and ``z >= 0``, and Hermite functions
of negative order on moderate real arguments.
"""

import math
import warnings

import numba
import numpy as np
from scipy import integrate, special as _sp

from .errors import DomainError

__all__ = [
    "ln_gamma",
    "confluent_1f1",
    "log_confluent_1f1",
    "hermite_neg",
    "log_hermite_neg",
    "SERIES_SWITCH",
]

#: Arguments above this use the large-z expansion (when it is accurate).
SERIES_SWITCH = 30.0
_ASYMPTOTIC_TERMS = 5  # leading term plus four corrections
_MAX_TERMS = 20000


def ln_gamma(x):
    """Natural logarithm of the gamma function for positive arguments.

    Parameters
    ----------
    x : float or array_like
        Strictly positive argument(s).

    Returns
    -------
    float or ndarray
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("ln_gamma requires x > 0")
    if arr.ndim == 0:
        return math.lgamma(float(arr))
    return _sp.gammaln(arr)


@numba.njit(cache=True)
def _series_log(a, b, z):
    # Kahan-compensated power series; returns log of the sum.
    s = 1.0
    comp = 0.0
    t = 1.0
    k = 0
    while k < _MAX_TERMS:
        ratio = (a + k) * z / ((b + k) * (k + 1.0))
        t *= ratio
        y = t - comp
        tmp = s + y
        comp = (tmp - s) - y
        s = tmp
        k += 1
        if not math.isfinite(s):
            return math.inf
        if abs(t) <= 1e-18 * abs(s) and abs(ratio) < 1.0:
            break
        if t == 0.0:
            break
    if s <= 0.0:
        return math.nan
    return math.log(s)


@numba.njit(cache=True)
def _asymptotic_log(a, b, z):
    # Gamma(b)/Gamma(a) e^z z^(a-b) sum_k (b-a)_k (1-a)_k / (k! z^k)
    total = 1.0
    t = 1.0
    last = 0.0
    for k in range(1, _ASYMPTOTIC_TERMS + 1):
        t *= (b - a + k - 1.0) * (1.0 - a + k - 1.0) / (k * z)
        if k < _ASYMPTOTIC_TERMS:
            total += t
        else:
            last = t
    if total <= 0.0:
        return math.nan, math.inf
    lg = math.lgamma(b) - math.lgamma(a) + z + (a - b) * math.log(z) + math.log(total)
    return lg, abs(last / total)


@numba.njit(cache=True)
def _log1f1_scalar(a, b, z):
    if z == 0.0:
        return 0.0
    if z > SERIES_SWITCH and a > 0.0 and b > 0.0:
        lg, err = _asymptotic_log(a, b, z)
        if err < 1e-13:
            return lg
    lg = _series_log(a, b, z)
    if math.isinf(lg) and a > 0.0 and b > 0.0:
        # series overflowed; the expansion is the only option left
        lg, err = _asymptotic_log(a, b, z)
    return lg


@numba.vectorize(["float64(float64, float64, float64)"], cache=True)
def _log1f1_ufunc(a, b, z):
    return _log1f1_scalar(a, b, z)


def _check_1f1_args(a, b, z):
    b_arr = np.asarray(b, dtype=float)
    if np.any((b_arr <= 0) & (b_arr == np.round(b_arr))):
        raise DomainError("b must not be a nonpositive integer")
    if np.any(np.asarray(a, dtype=float) <= 0):
        raise DomainError("only a > 0 is supported")
    if np.any(b_arr <= 0):
        raise DomainError("only b > 0 is supported")
    if np.any(~(np.asarray(z, dtype=float) >= 0)):
        raise DomainError("only z >= 0 is supported")


def log_confluent_1f1(a, b, z):
    """Logarithm of Kummer's function ``1F1(a; b; z)`` for ``a, b > 0``, ``z >= 0``.

    Stays finite far beyond the range where ``1F1`` itself overflows.
    """
    _check_1f1_args(a, b, z)
    out = _log1f1_ufunc(np.asarray(a, float), np.asarray(b, float), np.asarray(z, float))
    return out[()] if isinstance(out, np.ndarray) and out.ndim == 0 else out


def confluent_1f1(a, b, z):
    """Kummer's confluent hypergeometric function ``1F1(a; b; z)``.

    Parameters
    ----------
    a, b : float or array_like
        Positive parameters; ``b`` may not be a nonpositive integer.
    z : float or array_like
        Nonnegative argument.

    Returns
    -------
    float or ndarray
        ``+inf`` where the value exceeds the float64 range.

    Notes
    -----
    A compensated power series is used for ``z <= 30``; above that the
    large-argument expansion with four correction terms, unless its
    truncation error is too large for the requested parameters, in which
    case the (positive-term, cancellation free) series is summed instead.
    """
    with np.errstate(over="ignore"):
        return np.exp(log_confluent_1f1(a, b, z))


def _hermite_identity_log(nu, w):
    """log H_nu(-w) for w >= 0 from the sum/difference identities."""
    lsum = ((nu + 1) * math.log(2.0) + 0.5 * math.log(math.pi)
            - math.lgamma((1 - nu) / 2) + _log1f1_scalar(-nu / 2, 0.5, w * w))
    if w == 0.0:
        return lsum - math.log(2.0)
    ldiff = ((nu + 2) * math.log(2.0) + 0.5 * math.log(math.pi) + math.log(w)
             - math.lgamma(-nu / 2) + _log1f1_scalar((1 - nu) / 2, 1.5, w * w))
    return np.logaddexp(lsum, ldiff) - math.log(2.0)


def _hermite_quad(nu, z):
    upper = 40.0 / max(1.0, z)
    with warnings.catch_warnings():
        # QUADPACK flags roundoff once it is already at machine precision
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(lambda t: math.exp(-t * t - 2.0 * t * z), 0.0, upper,
                                weight="alg", wvar=(-nu - 1.0, 0.0),
                                epsabs=0.0, epsrel=1e-12, limit=200)
    return val


def _hermite_log_scalar(nu, z):
    if z <= 0.0:
        return _hermite_identity_log(nu, -z)
    # positive z: the identities subtract two huge numbers, integrate instead
    return math.log(_hermite_quad(nu, z)) - math.lgamma(-nu)


def log_hermite_neg(nu, z):
    """Logarithm of the Hermite function of negative order ``H_nu(z)``."""
    nu = float(nu)
    if not nu < 0:
        raise DomainError("hermite_neg requires nu < 0")
    zz = np.asarray(z, dtype=float)
    out = np.vectorize(lambda v: _hermite_log_scalar(nu, float(v)), otypes=[float])(zz)
    return float(out) if out.ndim == 0 else out


def hermite_neg(nu, z):
    """Hermite function of negative order.

    ``H_nu(z) = Gamma(-nu)^{-1} int_0^inf t^{-nu-1} exp(-t^2 - 2 t z) dt``.

    Parameters
    ----------
    nu : float
        Negative order.
    z : float or array_like
        Real argument.

    Returns
    -------
    float or ndarray
        ``+inf`` when the value overflows (``z`` below about -26).

    Notes
    -----
    For ``z <= 0`` the value is assembled from two ``1F1`` evaluations, which
    add without cancellation. For ``z > 0`` the same identities would
    subtract two numbers of size ``exp(z^2)`` to produce a small result, so
    the integral is computed directly by adaptive quadrature with an
    algebraic end-point weight.
    """
    with np.errstate(over="ignore"):
        return np.exp(log_hermite_neg(nu, z))
