"""Improper complex Gaussian vectors and the law of their component ratio.

A complex Gaussian ``Z`` in ``C^n`` is described by its mean ``mu``,
covariance ``gamma = E (Z-mu)(Z-mu)^H`` and pseudocovariance
``c = E (Z-mu)(Z-mu)^T``. The augmented covariance
``[[gamma, c], [conj(c), conj(gamma)]]`` carries the full second-order
structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateCovarianceError, DomainError
from .special import log_confluent_1f1, hermite_neg

__all__ = [
    "ComplexGaussian",
    "ComplexGaussian2",
    "ComplexGaussian4",
    "AugmentedForm",
    "augmented_form",
    "density",
    "sample",
    "sample_quotient",
    "quotient_density",
    "quotient_density_circular",
    "quotient_mean_circular",
    "quotient_lower_bound",
    "quotient_total_mass",
    "quotient_projection_cdf",
    "real_covariance",
]

PD_RTOL = 1e-12
PROPER_ATOL = 1e-14
THETA_NODES = 256
_QCHUNK = 2048


def _readonly(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _check_pd(m, name, scale=None):
    w = np.linalg.eigvalsh(m)
    top = float(np.max(np.abs(w))) if scale is None else scale
    if not np.all(np.isfinite(w)) or w[0] <= PD_RTOL * top:
        raise DegenerateCovarianceError(
            name, f"min eigenvalue {w[0]:.3e} vs scale {top:.3e}")
    return w


@dataclass(frozen=True)
class ComplexGaussian:
    """Complex Gaussian law ``CN_n(mu, gamma, c)``.

    Parameters
    ----------
    mu : array_like, shape (n,)
    gamma : array_like, shape (n, n)
        Hermitian positive definite covariance.
    c : array_like, shape (n, n)
        Complex symmetric pseudocovariance.

    Notes
    -----
    ``gamma`` and ``c`` are symmetrised on construction when they are
    Hermitian/symmetric up to rounding, so the stored ``c`` equals its
    transpose exactly. Construction fails if the Schur complement
    ``conj(gamma) - conj(c) gamma^{-1} c`` is not positive definite.
    """

    mu: np.ndarray
    gamma: np.ndarray
    c: np.ndarray
    dim: int = field(init=False, repr=False, default=0)

    expected_dim = None

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=complex)
        c = np.asarray(self.c, dtype=complex)
        n = g.shape[0]
        mu = np.zeros(n, complex) if self.mu is None else np.asarray(self.mu, dtype=complex)
        if g.shape != (n, n) or c.shape != (n, n) or mu.shape != (n,):
            raise DomainError(f"shape mismatch: mu {mu.shape}, gamma {g.shape}, c {c.shape}")
        if self.expected_dim is not None and n != self.expected_dim:
            raise DomainError(f"expected dimension {self.expected_dim}, got {n}")
        scale = max(float(np.max(np.abs(g))), 1e-300)
        if np.max(np.abs(g - g.conj().T)) > 1e-12 * scale:
            raise DegenerateCovarianceError("gamma", "not Hermitian")
        if np.max(np.abs(c - c.T)) > 1e-12 * scale:
            raise DegenerateCovarianceError("c", "not complex symmetric")
        g = 0.5 * (g + g.conj().T)
        c = 0.5 * (c + c.T)
        w = _check_pd(g, "gamma")
        p = _schur(g, c)
        _check_pd(p, "schur_p", scale=float(w[-1]))
        object.__setattr__(self, "mu", _readonly(mu))
        object.__setattr__(self, "gamma", _readonly(g))
        object.__setattr__(self, "c", _readonly(c))
        object.__setattr__(self, "dim", n)

    @property
    def is_proper(self):
        return float(np.max(np.abs(self.c))) < PROPER_ATOL

    def augmented(self):
        return augmented_form(self)


class ComplexGaussian2(ComplexGaussian):
    """Bivariate complex Gaussian (the law of a pair ``(Z1, Z2)``)."""

    expected_dim = 2


class ComplexGaussian4(ComplexGaussian):
    """Four-dimensional complex Gaussian."""

    expected_dim = 4


def _schur(g, c):
    p = g.conj() - c.conj() @ np.linalg.solve(g, c)
    return 0.5 * (p + p.conj().T)


@dataclass(frozen=True)
class AugmentedForm:
    """Augmented covariance and the pieces of its block inverse."""

    sigma: np.ndarray
    sigma_inv: np.ndarray
    schur_p: np.ndarray
    matrix_r: np.ndarray
    log_det: float


def augmented_form(g: ComplexGaussian) -> AugmentedForm:
    """Assemble the augmented covariance and its inverse.

    The inverse is built blockwise,
    ``[[conj(P^-1), -conj(P^-1) conj(R)], [-R^T conj(P^-1), P^-1]]`` with
    ``P = conj(gamma) - conj(c) gamma^-1 c`` and ``R = conj(c) gamma^-1``.
    """
    gam, c = np.asarray(g.gamma), np.asarray(g.c)
    sigma = np.block([[gam, c], [c.conj(), gam.conj()]])
    p = _schur(gam, c)
    _check_pd(p, "schur_p", scale=float(np.max(np.linalg.eigvalsh(gam))))
    r = c.conj() @ np.linalg.inv(gam)
    pinv = np.linalg.inv(p)
    pinv = 0.5 * (pinv + pinv.conj().T)
    pic = pinv.conj()
    sigma_inv = np.block([[pic, -pic @ r.conj()], [-r.T @ pic, pinv]])
    log_det = float(np.linalg.slogdet(gam)[1] + np.linalg.slogdet(p)[1])
    return AugmentedForm(sigma=_readonly(sigma), sigma_inv=_readonly(sigma_inv),
                         schur_p=_readonly(p), matrix_r=_readonly(r), log_det=log_det)


def density(g: ComplexGaussian, z, aug: Optional[AugmentedForm] = None):
    """Probability density of ``g`` at ``z`` (shape ``(n,)`` or ``(m, n)``)."""
    z = np.asarray(z, dtype=complex)
    n = g.dim
    if z.shape[-1] != n:
        raise DomainError(f"expected vectors of length {n}, got shape {z.shape}")
    aug = augmented_form(g) if aug is None else aug
    d = z - np.asarray(g.mu)
    ad = np.concatenate([d, d.conj()], axis=-1)
    quad = np.einsum("...i,ij,...j->...", ad.conj(), aug.sigma_inv, ad).real
    return np.exp(-n * np.log(np.pi) - 0.5 * aug.log_det - 0.5 * quad)


def real_covariance(gamma, c):
    """Covariance of ``(Re Z, Im Z)`` stacked as a real ``2n`` vector."""
    gam, c = np.asarray(gamma), np.asarray(c)
    vxx = 0.5 * (gam + c).real
    vyy = 0.5 * (gam - c).real
    vyx = 0.5 * (gam + c).imag
    vxy = 0.5 * (c - gam).imag
    return np.block([[vxx, vxy], [vyx, vyy]])


def sample(g: ComplexGaussian, rng: np.random.Generator, count: int):
    """Draw ``count`` i.i.d. vectors, returned as an array ``(count, n)``."""
    if count < 1:
        raise DomainError("count must be positive")
    cov = real_covariance(g.gamma, g.c)
    cov = 0.5 * (cov + cov.T)
    w, v = np.linalg.eigh(cov)
    if w[0] < -1e-12 * max(w[-1], 1e-300):
        raise DegenerateCovarianceError("real_covariance", f"eigenvalue {w[0]:.3e}")
    root = v * np.sqrt(np.clip(w, 0.0, None))
    x = rng.standard_normal((count, cov.shape[0])) @ root.T
    n = g.dim
    return np.asarray(g.mu) + x[:, :n] + 1j * x[:, n:]


def sample_quotient(g: ComplexGaussian2, rng: np.random.Generator, count: int):
    """Draw ``count`` realisations of ``Z2 / Z1``."""
    z = sample(g, rng, count)
    return z[:, 1] / z[:, 0]


def quotient_density_circular(gamma, q):
    """Density of ``Z2/Z1`` for a zero-mean proper pair with covariance ``gamma``."""
    gam = np.asarray(gamma, dtype=complex)
    _check_pd(0.5 * (gam + gam.conj().T), "gamma")
    gi = np.linalg.inv(gam)
    q = np.asarray(q, dtype=complex)
    form = (gi[0, 0] + gi[0, 1] * q + gi[1, 0] * q.conj() + gi[1, 1] * np.abs(q) ** 2).real
    det = np.linalg.det(gam).real
    return 1.0 / (np.pi * det * form ** 2)


def quotient_mean_circular(gamma):
    """Mean of ``Z2/Z1`` for a zero-mean proper pair, ``gamma[1,0]/gamma[0,0]``."""
    gam = np.asarray(gamma, dtype=complex)
    _check_pd(0.5 * (gam + gam.conj().T), "gamma")
    return complex(gam[1, 0] / gam[0, 0])


def _gauss_legendre_theta(m):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * np.pi * (x + 1.0), 0.5 * np.pi * w


class _QuotientKernel:
    # Precomputed coefficients of A(theta, q) and B(theta, q) as polynomials in q.

    def __init__(self, g: ComplexGaussian2, aug: AugmentedForm):
        pic = np.asarray(aug.schur_p).conj()
        pic = np.linalg.inv(pic)  # conj(P^{-1})
        r = np.asarray(aug.matrix_r)
        if g.is_proper:
            r = np.zeros_like(r)
            pic = np.linalg.inv(np.asarray(g.gamma))
        m = r.T @ pic
        self.x = pic
        self.m = (m[0, 0], m[0, 1] + m[1, 0], m[1, 1])
        mu = np.asarray(g.mu)
        self.v = (mu.conj() - mu @ r.T) @ pic
        self.has_mean = bool(np.any(mu != 0))
        mu_aug = np.concatenate([mu, mu.conj()])
        quad = float((mu_aug.conj() @ aug.sigma_inv @ mu_aug).real)
        self.log_pref = -0.5 * quad - 2.0 * np.log(np.pi) - 0.5 * aug.log_det

    def log_integrand(self, q, theta):
        x = self.x
        a0 = (x[0, 0] + x[0, 1] * q + x[1, 0] * q.conj() + x[1, 1] * np.abs(q) ** 2).real
        w = self.m[0] + self.m[1] * q + self.m[2] * q * q
        e2 = np.exp(2j * theta)
        a = a0[:, None] - (e2[None, :] * w[:, None]).real
        out = -2.0 * np.log(a)
        if self.has_mean:
            b = (np.exp(1j * theta)[None, :] * (self.v[0] + self.v[1] * q)[:, None]).real
            out = out + log_confluent_1f1(2.0, 0.5, b * b / a)
        return out


def _integrate_theta(kernel, q, m):
    theta, wts = _gauss_legendre_theta(m)
    li = kernel.log_integrand(q, theta)
    top = np.max(li, axis=1)
    s = np.exp(li - top[:, None]) @ wts
    return top + np.log(s)


def quotient_density(g: ComplexGaussian2, q, aug: Optional[AugmentedForm] = None,
                     nodes: int = THETA_NODES, return_log: bool = False):
    """Density of ``Q = Z2 / Z1`` for ``(Z1, Z2) ~ g``.

    Parameters
    ----------
    g : ComplexGaussian2
    q : complex or array_like
    aug : AugmentedForm, optional
        Reuse a precomputed augmented form.
    nodes : int
        Gauss-Legendre nodes on ``[0, pi]``. Each point is also evaluated
        with half as many nodes; points where the two disagree by more than
        ``1e-9`` (relative) are recomputed with twice as many.
    return_log : bool
        Return the natural log of the density.

    Notes
    -----
    With ``qv = (1, q)``, the density is
    ``K * int_0^pi 1F1(2; 1/2; B^2/A) A^-2 dtheta`` where
    ``A = qv^H conj(P^-1) qv - Re(exp(2i theta) qv^T R^T conj(P^-1) qv)``,
    ``B = Re(exp(i theta) (mu^H - mu^T R^T) conj(P^-1) qv)`` and
    ``K = exp(-mu_aug^H Sigma^-1 mu_aug / 2) / (pi^2 sqrt(det gamma det P))``.
    Zero-mean proper laws use the closed form.
    """
    qa = np.asarray(q, dtype=complex)
    flat = qa.ravel()
    if g.is_proper and not np.any(np.asarray(g.mu) != 0):
        out = quotient_density_circular(g.gamma, flat)
        out = np.log(out) if return_log else out
        return out.reshape(qa.shape)[()]
    aug = augmented_form(g) if aug is None else aug
    kern = _QuotientKernel(g, aug)
    res = np.empty(flat.shape, float)
    for lo in range(0, flat.size, _QCHUNK):
        qq = flat[lo:lo + _QCHUNK]
        fine = _integrate_theta(kern, qq, nodes)
        coarse = _integrate_theta(kern, qq, nodes // 2)
        bad = np.abs(np.expm1(coarse - fine)) > 1e-9
        if np.any(bad):
            fine[bad] = _integrate_theta(kern, qq[bad], 2 * nodes)
        res[lo:lo + _QCHUNK] = fine
    res = res + kern.log_pref
    out = res if return_log else np.exp(res)
    return out.reshape(qa.shape)[()]


def _hpd_power(m, p):
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * w ** p) @ v.conj().T


def quotient_lower_bound(g: ComplexGaussian2):
    """Constant ``L`` with ``quotient_density(g, q) >= L * f_circ(q)`` for all ``q``.

    ``f_circ`` is the zero-mean proper quotient density with the same
    ``gamma``. With ``b = ||gamma^{-1/2} mu||`` and
    ``k = 1 + ||M||^2 + ||N||`` (spectral norms of
    ``M = P^{-1/2} c^H gamma^{-1/2}`` and
    ``N = conj(gamma^{-1/2} c P^{-1}) gamma^{1/2}``),
    ``L = 12 exp(-k b^2) H_{-4}(sqrt(k) b) / (k^2 sqrt(det(gamma^{-1} P)))``.
    """
    aug = augmented_form(g)
    gam, c, p = np.asarray(g.gamma), np.asarray(g.c), np.asarray(aug.schur_p)
    gmh = _hpd_power(gam, -0.5)
    mm = _hpd_power(p, -0.5) @ c.conj().T @ gmh
    nn = (gmh @ c @ np.linalg.inv(p)).conj() @ _hpd_power(gam, 0.5)
    k = 1.0 + np.linalg.norm(mm, 2) ** 2 + np.linalg.norm(nn, 2)
    b = float(np.linalg.norm(gmh @ np.asarray(g.mu)))
    det = np.linalg.det(np.linalg.solve(gam, p)).real
    return float(12.0 * np.exp(-k * b * b) * hermite_neg(-4.0, np.sqrt(k) * b)
                 / (k * k * np.sqrt(det)))


def quotient_total_mass(g: ComplexGaussian2, radius: float = 50.0, n_r: int = 160,
                        n_theta: int = 128, center: complex = 0.0):
    """Integrate the quotient density over the plane.

    The disk ``|q - center| <= radius`` is integrated in polar coordinates
    (Gauss-Legendre in ``atan(r)``, periodic trapezoid in angle). Outside,
    the density is modelled as ``K(phi) (1 + r^2)^-2`` with ``K`` read off
    at the boundary, which integrates to ``K / (2 (1 + R^2))`` per radian.

    Returns
    -------
    total, tail : float
    """
    aug = augmented_form(g)
    x, w = np.polynomial.legendre.leggauss(n_r)
    top = np.arctan(radius)
    u = 0.5 * top * (x + 1.0)
    wu = 0.5 * top * w
    r = np.tan(u)
    jac = r / np.cos(u) ** 2
    phi = 2.0 * np.pi * np.arange(n_theta) / n_theta
    qq = center + r[:, None] * np.exp(1j * phi)[None, :]
    f = quotient_density(g, qq, aug=aug)
    inner = float(np.sum(f * (wu * jac)[:, None]) * (2.0 * np.pi / n_theta))
    fb = quotient_density(g, center + radius * np.exp(1j * phi), aug=aug)
    tail = float(np.sum(fb * (1.0 + radius ** 2) / 2.0) * (2.0 * np.pi / n_theta))
    return inner + tail, tail


def quotient_projection_cdf(g: ComplexGaussian2, direction: float, n_x: int = 1200,
                            n_y: int = 240, center: complex = 0.0, scale: float = 1.0):
    """CDF of ``Re(exp(-i direction) (Q - center))`` by integrating the density.

    The marginal density along the ray is obtained by integrating the
    quotient density across the orthogonal line; both axes are mapped to
    finite intervals with ``t -> scale * tan(t)``.

    Returns
    -------
    x, cdf : ndarray
        Abscissae and cumulative probabilities (cdf is not renormalised).
    """
    aug = augmented_form(g)
    rot = np.exp(1j * direction)
    yn, yw = np.polynomial.legendre.leggauss(n_y)
    ty = 0.5 * np.pi * yn
    y = scale * np.tan(ty)
    wy = 0.5 * np.pi * yw * scale / np.cos(ty) ** 2
    tx = np.linspace(-0.5 * np.pi, 0.5 * np.pi, n_x + 2)[1:-1]
    xs = scale * np.tan(tx)
    qq = center + rot * (xs[:, None] + 1j * y[None, :])
    marg = quotient_density(g, qq, aug=aug) @ wy
    dens_t = marg * scale / np.cos(tx) ** 2
    # integrate in t: edges contribute ~0 because the marginal decays like |x|^-3
    h = tx[1] - tx[0]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (dens_t[1:] + dens_t[:-1]))])
    cum += 0.5 * (tx[0] + 0.5 * np.pi) * dens_t[0]
    return xs, cum
