"""Max-stable families, max-mixture specifications and their bivariate laws.

All functions broadcast over numpy arrays and return a Python ``float`` when
every argument is a scalar.  Distances ``h`` are Euclidean norms of the lag,
the families being isotropic.

Exponent measures are evaluated internally on reciprocal arguments
``y = 1/x``.  This keeps ``x = inf`` (a marginal limit) exact and avoids
overflow of ``x1 * x2`` for very large observations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .exceptions import ParameterDomainError, UsageError
from . import madogram as _mado

__all__ = [
    "ExponentialCorrelation",
    "Variogram",
    "MaxStableFamily",
    "Smith",
    "BrownResnick",
    "TEG",
    "ModelSpec",
    "DependenceProfile",
    "extremal_coefficient",
    "tail_dependence_eta",
    "exponent_measure_V",
    "inverse_transform_g",
    "mm_cdf_partials_numeric",
    "bivariate_cdf_ms",
    "bivariate_cdf_mm",
    "mm_cdf_partials",
    "chi",
    "chibar",
    "ad_range",
    "dependence_profile",
]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _positive(name, value):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ParameterDomainError(f"{name} must be a finite positive number, got {value!r}")
    return value


def _check_lags(h):
    h = np.asarray(h, dtype=float)
    if np.any(np.isnan(h)) or np.any(h < 0):
        raise ParameterDomainError("distances must be nonnegative")
    return h


def _reciprocal(name, x):
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)) or np.any(x <= 0):
        raise ParameterDomainError(f"{name} must be strictly positive")
    with np.errstate(divide="ignore"):
        return 1.0 / x


def _npdf(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


@dataclass(frozen=True)
class ExponentialCorrelation:
    """``rho(h) = exp(-h / theta)``."""

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _positive("theta", self.theta))

    def __call__(self, h):
        return np.exp(-_check_lags(h) / self.theta)


@dataclass(frozen=True)
class Variogram:
    """Semivariogram ``gamma(h) = sigma2 * (1 - exp(-h / theta))``.

    The Brown-Resnick exponent measure uses ``2 * gamma(h)``.
    """

    sigma2: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "sigma2", _positive("sigma2", self.sigma2))
        object.__setattr__(self, "theta", _positive("theta", self.theta))

    def __call__(self, h):
        return self.sigma2 * -np.expm1(-_check_lags(h) / self.theta)


class MaxStableFamily:
    """Isotropic simple max-stable model with unit Frechet margins.

    Subclasses provide ``_measure(h, y1, y2)`` and ``_partials(h, y1, y2)``
    on reciprocal arguments; the partials are derivatives with respect to
    the original arguments ``x1, x2``.
    """

    name = "max-stable"

    def extremal_coefficient(self, h):
        raise NotImplementedError

    def exponent_measure(self, h, x1, x2):
        h = _check_lags(h)
        y1 = _reciprocal("x1", x1)
        y2 = _reciprocal("x2", x2)
        return _out(self._measure(h, y1, y2))

    def exponent_partials(self, h, x1, x2):
        """Return ``(V, dV/dx1, dV/dx2, d2V/dx1dx2)``."""
        h = _check_lags(h)
        y1 = _reciprocal("x1", x1)
        y2 = _reciprocal("x2", x2)
        return tuple(_out(v) for v in self._partials(h, y1, y2))

    @property
    def params(self) -> dict:
        raise NotImplementedError


class _HuslerReissFamily(MaxStableFamily):
    """Families whose bivariate law is Husler-Reiss with ``lam(h) = sqrt(2 gamma(h))``."""

    def semivariogram(self, h):
        raise NotImplementedError

    def dependence(self, h):
        return np.sqrt(2.0 * self.semivariogram(h))

    def extremal_coefficient(self, h):
        return _out(2.0 * ndtr(0.5 * self.dependence(_check_lags(h))))

    def _terms(self, h, y1, y2):
        lam = np.maximum(self.dependence(h), 1e-150)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio = np.log(y1) - np.log(y2)
            log_ratio = np.where(y1 == y2, 0.0, log_ratio)
        w = 0.5 * lam + log_ratio / lam
        v = lam - w
        return lam, w, v

    def _measure(self, h, y1, y2):
        _, w, v = self._terms(h, y1, y2)
        return ndtr(w) * y1 + ndtr(v) * y2

    def _partials(self, h, y1, y2):
        lam, w, v = self._terms(h, y1, y2)
        V = ndtr(w) * y1 + ndtr(v) * y2
        # phi(w) y1 = phi(v) y2 collapses the first derivatives
        V1 = -ndtr(w) * y1 * y1
        V2 = -ndtr(v) * y2 * y2
        V12 = -_npdf(w) * y1 * y1 * y2 / lam
        return V, V1, V2, V12


@dataclass(frozen=True)
class Smith(_HuslerReissFamily):
    """Gaussian extreme-value model with isotropic kernel covariance ``sigma * I``.

    ``tau(h) = h / sqrt(sigma)`` and ``Theta(h) = 2 Phi(tau(h) / 2)``.
    """

    sigma: float
    name = "smith"

    def __post_init__(self):
        object.__setattr__(self, "sigma", _positive("sigma", self.sigma))

    def semivariogram(self, h):
        h = np.asarray(h, dtype=float)
        return h * h / (2.0 * self.sigma)

    def dependence(self, h):
        return np.asarray(h, dtype=float) / np.sqrt(self.sigma)

    @property
    def params(self):
        return {"sigma": self.sigma}


@dataclass(frozen=True)
class BrownResnick(_HuslerReissFamily):
    """Brown-Resnick model driven by a Gaussian field with exponential covariance.

    The semivariogram is ``sigma2 * (1 - exp(-h / theta))``.
    """

    sigma2: float
    theta: float
    name = "brown-resnick"

    def __post_init__(self):
        object.__setattr__(self, "sigma2", _positive("sigma2", self.sigma2))
        object.__setattr__(self, "theta", _positive("theta", self.theta))

    @property
    def variogram(self):
        return Variogram(self.sigma2, self.theta)

    def semivariogram(self, h):
        return self.sigma2 * -np.expm1(-np.asarray(h, dtype=float) / self.theta)

    @property
    def params(self):
        return {"sigma2": self.sigma2, "theta": self.theta}


def disk_overlap(h, r):
    """Fraction of a disk of radius ``r`` covered by its translate at lag ``h``."""
    x = np.clip(np.asarray(h, dtype=float) / (2.0 * r), 0.0, 1.0)
    return (2.0 / np.pi) * (np.arccos(x) - x * np.sqrt(1.0 - x * x))


@dataclass(frozen=True)
class TEG(MaxStableFamily):
    """Truncated extremal Gaussian model.

    Schlather's extremal Gaussian process with exponential correlation
    ``exp(-h / theta)``, restricted to random disks of radius ``r``.

    ``alpha_kind="disk"`` (default) uses the exact disk overlap fraction,
    which is what the simulator realizes.  ``alpha_kind="linear"`` uses
    ``max(1 - h / (2 r), 0)``; that function is not the overlap of any planar
    random set and cannot be simulated, but is kept for comparisons.
    """

    theta: float
    r: float
    alpha_kind: str = "disk"
    name = "teg"

    def __post_init__(self):
        object.__setattr__(self, "theta", _positive("theta", self.theta))
        object.__setattr__(self, "r", _positive("r", self.r))
        if self.alpha_kind not in ("disk", "linear"):
            raise ParameterDomainError(f"unknown alpha_kind {self.alpha_kind!r}")

    @property
    def corr(self):
        return ExponentialCorrelation(self.theta)

    def alpha(self, h):
        h = _check_lags(h)
        if self.alpha_kind == "linear":
            return np.maximum(1.0 - h / (2.0 * self.r), 0.0)
        return disk_overlap(h, self.r)

    def rho(self, h):
        return np.exp(-np.asarray(h, dtype=float) / self.theta)

    def extremal_coefficient(self, h):
        h = _check_lags(h)
        rho = self.rho(h)
        return _out(2.0 - self.alpha(h) * (1.0 - np.sqrt(0.5 * (1.0 - rho))))

    def _q(self, rho, y1, y2):
        return np.sqrt(np.maximum(y1 * y1 - 2.0 * rho * y1 * y2 + y2 * y2, 0.0))

    def _measure(self, h, y1, y2):
        alpha, rho = self.alpha(h), self.rho(h)
        return (1.0 - 0.5 * alpha) * (y1 + y2) + 0.5 * alpha * self._q(rho, y1, y2)

    def _partials(self, h, y1, y2):
        alpha, rho = self.alpha(h), self.rho(h)
        q = self._q(rho, y1, y2)
        V = (1.0 - 0.5 * alpha) * (y1 + y2) + 0.5 * alpha * q
        pos = q > 0
        qs = np.where(pos, q, 1.0)
        g1 = np.where(pos, (rho * y2 - y1) / qs, -np.sign(y1 - y2))
        g2 = np.where(pos, (rho * y1 - y2) / qs, -np.sign(y2 - y1))
        V1 = -(1.0 - 0.5 * alpha) * y1 * y1 + 0.5 * alpha * y1 * y1 * g1
        V2 = -(1.0 - 0.5 * alpha) * y2 * y2 + 0.5 * alpha * y2 * y2 * g2
        V12 = np.where(pos, -0.5 * alpha * (1.0 - rho * rho) * (y1 * y2) ** 3 / qs**3, 0.0)
        return V, V1, V2, V12

    @property
    def params(self):
        return {"theta": self.theta, "r": self.r}


def extremal_coefficient(family: MaxStableFamily, h):
    """Pairwise extremal coefficient ``Theta(h) = V_h(1, 1)`` in ``[1, 2]``."""
    return family.extremal_coefficient(h)


def tail_dependence_eta(family: MaxStableFamily, h):
    """Tail dependence coefficient ``1 / Theta(h)`` of the inverted process."""
    return _out(1.0 / np.asarray(family.extremal_coefficient(h)))


def exponent_measure_V(family: MaxStableFamily, h, x1, x2):
    return family.exponent_measure(h, x1, x2)


def _log_one_minus_exp_neg(t):
    """``log(1 - exp(-t))`` for ``t >= 0`` without cancellation."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(t > np.log(2.0), np.log1p(-np.exp(-t)), np.log(-np.expm1(-t)))


def _check_scale(scale):
    scale = float(scale)
    if not (0.0 < scale <= 1.0):
        raise ParameterDomainError(f"scale must lie in (0, 1], got {scale}")
    return scale


def inverse_transform_g(z, scale=1.0):
    """``g(z) = -1 / log(1 - exp(-scale / z))``.

    At ``scale=1`` this is the unit-Frechet inversion ``F^-1(1 - F(z))``;
    it is strictly decreasing and its own inverse.
    """
    scale = _check_scale(scale)
    y = _reciprocal("z", z)
    with np.errstate(divide="ignore"):
        return _out(-1.0 / _log_one_minus_exp_neg(scale * y))


def _g_recip_and_slope(y, scale):
    """Return ``1/g(z)`` and ``g'(z)`` given ``y = 1/z``."""
    t = scale * y
    L = _log_one_minus_exp_neg(t)
    q = np.exp(-t)
    one_minus_q = -np.expm1(-t)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = -q * scale * y * y / (one_minus_q * L * L)
    return -L, slope


def bivariate_cdf_ms(family: MaxStableFamily, h, z1, z2):
    """``P(X(s) <= z1, X(s+h) <= z2) = exp(-V_h(z1, z2))``."""
    return _out(np.exp(-np.asarray(family.exponent_measure(h, z1, z2))))


@dataclass(frozen=True)
class ModelSpec:
    """Max-mixture ``Z = max(a X, (1 - a) Y)``.

    ``x_family`` is the asymptotically dependent max-stable part and
    ``y_family`` the max-stable process whose inversion gives the
    asymptotically independent part.
    """

    a: float
    x_family: Optional[MaxStableFamily] = None
    y_family: Optional[MaxStableFamily] = None

    def __post_init__(self):
        a = float(self.a)
        if not (0.0 <= a <= 1.0):
            raise ParameterDomainError(f"mixing weight a must lie in [0, 1], got {a}")
        object.__setattr__(self, "a", a)
        if a > 0 and self.x_family is None:
            raise ParameterDomainError("x_family is required when a > 0")
        if a < 1 and self.y_family is None:
            raise ParameterDomainError("y_family is required when a < 1")

    @property
    def has_x(self):
        return self.a > 0

    @property
    def has_y(self):
        return self.a < 1

    def theta_x(self, h):
        """Extremal coefficient of the max-stable part (2 when absent)."""
        h = _check_lags(h)
        if not self.has_x:
            return _out(np.full_like(h, 2.0))
        return self.x_family.extremal_coefficient(h)

    def eta_y(self, h):
        """Tail dependence coefficient of the inverted part.

        Without an inverted part (``a = 1``) this is the coefficient of the
        max-stable process itself: 1 where ``Theta < 2``, else 1/2.
        """
        h = _check_lags(h)
        if not self.has_y:
            theta = np.asarray(self.x_family.extremal_coefficient(h))
            return _out(np.where(theta < 2.0, 1.0, 0.5))
        return tail_dependence_eta(self.y_family, h)


def mm_cdf_partials(spec: ModelSpec, h, z1, z2, order=2):
    """Bivariate max-mixture CDF ``G`` and its partial derivatives.

    Returns ``(G, dG/dz1, dG/dz2, d2G/dz1dz2)``; with ``order=0`` only ``G``
    is returned.  The pure max-stable (``a = 1``) and pure inverted
    (``a = 0``) cases take dedicated paths.
    """
    h = _check_lags(h)
    y1 = _reciprocal("z1", z1)
    y2 = _reciprocal("z2", z2)
    a = spec.a

    if spec.has_x:
        if order == 0:
            VX = spec.x_family._measure(h, y1, y2)
            A = np.exp(-a * VX)
        else:
            VX, VX1, VX2, VX12 = spec.x_family._partials(h, y1, y2)
            A = np.exp(-a * VX)
            A1 = -a * VX1 * A
            A2 = -a * VX2 * A
            A12 = (a * a * VX1 * VX2 - a * VX12) * A
        if not spec.has_y:
            if order == 0:
                return _out(A)
            return tuple(_out(v) for v in (A, A1, A2, A12))

    s = 1.0 - a
    gy1, gs1 = _g_recip_and_slope(y1, s)
    gy2, gs2 = _g_recip_and_slope(y2, s)
    q1 = np.exp(-s * y1)
    q2 = np.exp(-s * y2)
    if order == 0:
        VY = spec.y_family._measure(h, gy1, gy2)
    else:
        VY, VY1, VY2, VY12 = spec.y_family._partials(h, gy1, gy2)
    E = np.exp(-VY)
    B = np.clip(q1 + q2 + np.expm1(-VY), 0.0, 1.0)
    if order == 0:
        return _out(A * B) if spec.has_x else _out(B)

    with np.errstate(invalid="ignore"):
        B1 = s * y1 * y1 * q1 - VY1 * gs1 * E
        B2 = s * y2 * y2 * q2 - VY2 * gs2 * E
        B12 = (VY1 * VY2 - VY12) * gs1 * gs2 * E
    if not spec.has_x:
        return tuple(_out(v) for v in (B, B1, B2, B12))
    G = A * B
    G1 = A1 * B + A * B1
    G2 = A2 * B + A * B2
    G12 = A12 * B + A1 * B2 + A2 * B1 + A * B12
    return tuple(_out(v) for v in (G, G1, G2, G12))


def mm_cdf_partials_numeric(spec: ModelSpec, h, z1, z2, rel_step=1e-3):
    """Central-difference partials of :func:`bivariate_cdf_mm` with one Richardson step.

    Independent of the analytic route in :func:`mm_cdf_partials`; steps are
    ``max(1e-5, rel_step * z)`` per argument (and half of that for the
    refinement), so the truncation error is fourth order.
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    e1 = np.maximum(1e-5, rel_step * z1)
    e2 = np.maximum(1e-5, rel_step * z2)
    if np.any(z1 - 2 * e1 <= 0) or np.any(z2 - 2 * e2 <= 0):
        raise ParameterDomainError("finite-difference stencil leaves the positive half-line")

    def F(u, v):
        return np.asarray(bivariate_cdf_mm(spec, h, u, v), dtype=float)

    def stencil(d1, d2):
        g1 = (F(z1 + d1, z2) - F(z1 - d1, z2)) / (2 * d1)
        g2 = (F(z1, z2 + d2) - F(z1, z2 - d2)) / (2 * d2)
        g12 = (F(z1 + d1, z2 + d2) - F(z1 + d1, z2 - d2) - F(z1 - d1, z2 + d2)
               + F(z1 - d1, z2 - d2)) / (4 * d1 * d2)
        return g1, g2, g12

    coarse = stencil(e1, e2)
    fine = stencil(e1 / 2, e2 / 2)
    refined = [(4 * f - c) / 3 for f, c in zip(fine, coarse)]
    return (_out(F(z1, z2)),) + tuple(_out(v) for v in refined)


def bivariate_cdf_mm(spec: ModelSpec, h, z1, z2):
    """``P(Z(s) <= z1, Z(s+h) <= z2)`` for the max-mixture ``spec``."""
    return mm_cdf_partials(spec, h, z1, z2, order=0)


def chi(spec: ModelSpec, h):
    """Upper tail dependence ``a (2 - Theta_X(h))``."""
    h = _check_lags(h)
    if not spec.has_x:
        return _out(np.zeros_like(h))
    return _out(spec.a * (2.0 - np.asarray(spec.x_family.extremal_coefficient(h))))


def ad_range(spec: ModelSpec) -> float:
    """Distance up to which the mixture is asymptotically dependent."""
    if not spec.has_x:
        return 0.0
    if isinstance(spec.x_family, TEG):
        return 2.0 * spec.x_family.r
    return np.inf


def chibar(spec: ModelSpec, h):
    """Coefficient ``chibar(h)``: 1 below the AD range, else ``2 eta_Y(h) - 1``."""
    h = _check_lags(h)
    inside = h < ad_range(spec)
    return _out(np.where(inside, 1.0, 2.0 * np.asarray(spec.eta_y(h)) - 1.0))


@dataclass(frozen=True)
class DependenceProfile:
    distances: np.ndarray
    theta_x: np.ndarray
    eta_y: np.ndarray
    chi: np.ndarray
    chibar: np.ndarray
    nu_f: np.ndarray = field(repr=False)

    def as_table(self):
        """Column dict suitable for ``csv.DictWriter`` or a DataFrame."""
        return {
            "h": self.distances,
            "theta": self.theta_x,
            "eta": self.eta_y,
            "chi": self.chi,
            "chibar": self.chibar,
            "nu_f": self.nu_f,
        }


def dependence_profile(spec: ModelSpec, grid) -> DependenceProfile:
    grid = np.atleast_1d(_check_lags(grid)).astype(float)
    if grid.size == 0:
        raise UsageError("distance grid is empty")
    if np.any(np.diff(grid) < 0):
        raise UsageError("distance grid must be sorted")
    arrays = dict(
        distances=grid,
        theta_x=np.asarray(spec.theta_x(grid), dtype=float),
        eta_y=np.asarray(spec.eta_y(grid), dtype=float),
        chi=np.asarray(chi(spec, grid), dtype=float),
        chibar=np.asarray(chibar(spec, grid), dtype=float),
        nu_f=np.asarray(_mado.madogram_curve(spec, grid), dtype=float),
    )
    for value in arrays.values():
        value.setflags(write=False)
    return DependenceProfile(**arrays)
