"""Plane-strain isotropic elasticity and the regularized friction potential.

The friction bound is ``mu(t) = (a - b) exp(-alpha t) + b`` and the tangential
potential is its antiderivative evaluated at a C^1 smoothing of ``|s|``::

    theta(s) = |s|                                      if |s| > eps
             = -|s|^4 / (8 eps^3) + 3 |s|^2 / (4 eps) + 3 eps / 8   otherwise

    j_eps(s) = int_0^theta(s) mu(t) dt

All scalar functions here accept numpy arrays and broadcast.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Elasticity:
    """Young's modulus / Poisson ratio pair with derived Lame coefficients."""

    E: float = 1.0
    nu: float = 0.3
    lam: float = field(init=False)
    mu: float = field(init=False)

    def __post_init__(self):
        if not self.E > 0:
            raise ConfigurationError(f"Young's modulus must be positive, got {self.E}")
        if not 0.0 < self.nu < 0.5:
            raise ConfigurationError(f"Poisson ratio must lie in (0, 0.5), got {self.nu}")
        object.__setattr__(self, "lam", self.E * self.nu / ((1 + self.nu) * (1 - 2 * self.nu)))
        object.__setattr__(self, "mu", self.E / (2 * (1 + self.nu)))

    def voigt(self):
        """3x3 constitutive matrix acting on (e_xx, e_yy, 2 e_xy)."""
        lam, mu = self.lam, self.mu
        return np.array([[lam + 2 * mu, lam, 0.0],
                         [lam, lam + 2 * mu, 0.0],
                         [0.0, 0.0, mu]])


@dataclass(frozen=True)
class FrictionParams:
    """Slip-weakening friction law parameters and regularization width."""

    a: float = 4e-3
    b: float = 2e-3
    alpha: float = 100.0
    eps: float = 1e-3

    def __post_init__(self):
        if self.a < self.b or self.b < 0:
            raise ConfigurationError(f"friction bounds need a >= b >= 0, got a={self.a}, b={self.b}")
        if self.alpha < 0:
            raise ConfigurationError(f"decay rate alpha must be >= 0, got {self.alpha}")
        if not self.eps > 0:
            raise ConfigurationError(f"regularization width must be positive, got {self.eps}")

    @property
    def disabled(self):
        return self.a == 0.0 and self.b == 0.0


def stress(elas, strain):
    """Cauchy stress ``lam tr(e) I + 2 mu e`` for a (..., 2, 2) strain array."""
    strain = np.asarray(strain, dtype=float)
    tr = np.trace(strain, axis1=-2, axis2=-1)[..., None, None]
    return elas.lam * tr * np.eye(2) + 2.0 * elas.mu * strain


def mu_friction(fp, t):
    """Friction bound ``(a - b) exp(-alpha t) + b`` for slip magnitude ``t >= 0``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("friction bound is defined for t >= 0 only")
    out = (fp.a - fp.b) * np.exp(-fp.alpha * t) + fp.b
    return out if out.ndim else float(out)


def _lambda_poly(s, eps):
    s2 = s * s
    return -s2 * s2 / (8 * eps**3) + 3 * s2 / (4 * eps) + 3 * eps / 8


def theta(s, eps):
    """C^1 smoothing of ``|s|``; equals ``|s|`` outside ``[-eps, eps]``."""
    s = np.asarray(s, dtype=float)
    out = np.where(np.abs(s) > eps, np.abs(s), _lambda_poly(s, eps))
    return out if out.ndim else float(out)


def _antiderivative(fp, th):
    # int_0^th mu(t) dt in closed form; the alpha -> 0 limit is a * th
    if fp.alpha == 0:
        return fp.a * th
    return (fp.a - fp.b) * (-np.expm1(-fp.alpha * th)) / fp.alpha + fp.b * th


def j_eps(fp, s):
    """Regularized tangential friction potential."""
    out = _antiderivative(fp, np.asarray(theta(s, fp.eps)))
    return out if np.ndim(out) else float(out)


def dj_eps(fp, s):
    """First derivative of :func:`j_eps` (the regularized friction traction)."""
    s = np.asarray(s, dtype=float)
    eps = fp.eps
    inner = np.abs(s) <= eps
    th = np.where(inner, _lambda_poly(s, eps), np.abs(s))
    dth = np.where(inner, -s**3 / (2 * eps**3) + 3 * s / (2 * eps), np.sign(s))
    out = ((fp.a - fp.b) * np.exp(-fp.alpha * th) + fp.b) * dth
    return out if out.ndim else float(out)


def d2j_eps(fp, s):
    """Second derivative of :func:`j_eps`, piecewise on ``|s| <= eps``.

    Outside the band this is ``-alpha (a - b) exp(-alpha |s|)``, which is
    negative (slip weakening).
    """
    s = np.asarray(s, dtype=float)
    eps = fp.eps
    a, b, alpha = fp.a, fp.b, fp.alpha
    outer = -alpha * (a - b) * np.exp(-alpha * np.abs(s))
    sc = np.clip(s, -eps, eps)  # keeps the unused inner branch finite
    s2 = sc * sc
    inner = ((a - b) * (-3 * s2 / (2 * eps**3) + 3 / (2 * eps)
                        - alpha * s2**3 / (4 * eps**6)
                        + 3 * alpha * s2**2 / (2 * eps**4)
                        - 9 * alpha * s2 / (4 * eps**2)) * np.exp(-alpha * _lambda_poly(sc, eps))
             + b * (-3 * s2 / (2 * eps**3) + 3 / (2 * eps)))
    out = np.where(np.abs(s) > eps, outer, inner)
    return out if out.ndim else float(out)
