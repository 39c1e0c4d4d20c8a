"""Theoretical F-madograms of max-stable, inverted max-stable and max-mixture pairs.

The max-mixture closed form is checked against :func:`madogram_mm_oracle`,
which integrates the distribution of ``M = max(F(Z(s)), F(Z(s+h)))``
numerically and shares no algebra with the closed form.
"""

import math

import numpy as np
from scipy import integrate, special

from .exceptions import NumericError, ParameterDomainError

__all__ = [
    "madogram_ms",
    "madogram_ims",
    "madogram_mm",
    "madogram_mm_oracle",
    "cdf_max_pair_M",
    "extremal_from_madogram",
    "log_beta",
    "madogram_curve",
]

_EDGE = 1e-9
_TOL = 1e-12


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any(theta < 1 - _TOL) or np.any(theta > 2 + _TOL):
        raise ParameterDomainError("extremal coefficient must lie in [1, 2]")
    return np.clip(theta, 1.0, 2.0)


def _eta(eta):
    eta = np.asarray(eta, dtype=float)
    if np.any(~np.isfinite(eta)) or np.any(eta <= 0) or np.any(eta > 1 + _TOL):
        raise ParameterDomainError("tail dependence coefficient must lie in (0, 1]")
    return np.minimum(eta, 1.0)


def _mixing(a):
    a = float(a)
    if not (0.0 <= a <= 1.0):
        raise ParameterDomainError(f"mixing weight must lie in [0, 1], got {a}")
    return a


def log_beta(p, q):
    """``log B(p, q)`` for positive ``p, q``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(~(p > 0)) or np.any(~(q > 0)):
        raise ParameterDomainError("beta function arguments must be positive")
    return _out(special.betaln(p, q))


def madogram_ms(theta):
    """``(Theta - 1) / (2 (Theta + 1))``."""
    theta = _theta(theta)
    return _out((theta - 1.0) / (2.0 * (theta + 1.0)))


def madogram_ims(eta):
    """``(1 - eta) / (2 (1 + eta))``."""
    eta = _eta(eta)
    return _out((1.0 - eta) / (2.0 * (1.0 + eta)))


def madogram_mm(a, theta, eta):
    """F-madogram of a max-mixture with weight ``a``.

    ``theta`` is the extremal coefficient of the max-stable part and ``eta``
    the tail dependence coefficient of the inverted part at the same lag.
    """
    a = _mixing(a)
    if a >= 1.0 - _EDGE:
        return madogram_ms(theta)
    if a <= _EDGE:
        return madogram_ims(eta)
    theta = _theta(theta)
    eta = _eta(eta)
    at = a * theta
    inv_eta = 1.0 / eta
    first = a * (theta - 1.0) / (a * (theta - 1.0) + 2.0)
    second = (at - 1.0) / (2.0 * at + 2.0)
    log_third = (
        np.log(inv_eta)
        - np.log(at + (1.0 - a) * inv_eta + 1.0)
        + special.betaln((at + 1.0) / (1.0 - a), inv_eta)
    )
    value = first - second - np.exp(log_third)
    # cancellation near complete dependence can leave a few ulps below zero
    return _out(np.where((value < 0) & (value > -1e-14), 0.0, value))


def cdf_max_pair_M(u, a, theta, eta):
    """``P(max(F(Z(s)), F(Z(s+h))) <= u)``."""
    a = _mixing(a)
    theta = _theta(theta)
    eta = _eta(eta)
    u = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(u)) or np.any(u < 0) or np.any(u > 1):
        raise ParameterDomainError("u must lie in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        log_u = np.log(u)
        head = np.exp(a * theta * log_u)
        if a == 1.0:
            return _out(head)
        tail = -np.expm1((1.0 - a) * log_u)
        bracket = 2.0 * np.exp((1.0 - a) * log_u) - 1.0 + tail ** (1.0 / eta)
    return _out(np.where(u == 0, 0.0, head * bracket))


def _one_minus_FM(u, a, at, s, inv_eta):
    if u <= 0.0:
        return 1.0
    log_u = math.log(u)
    head = math.exp(at * log_u)
    if s == 0.0:
        return 1.0 - head
    us = math.exp(s * log_u)
    tail = -math.expm1(s * log_u)
    return 1.0 - head * (2.0 * us - 1.0 + tail**inv_eta)


def madogram_mm_oracle(a, theta, eta, tol=1e-11):
    """``int_0^1 (1 - F_M(u)) du - 1/2`` by adaptive Gauss-Kronrod quadrature."""
    a = _mixing(a)
    theta = float(_theta(theta))
    eta = float(_eta(eta))
    args = (a, a * theta, 1.0 - a, 1.0 / eta)
    value, abserr, info = integrate.quad(
        _one_minus_FM, 0.0, 1.0, args=args, epsabs=tol, epsrel=tol, limit=10_000, full_output=1
    )[:3]
    if abserr > 1e-10 or not math.isfinite(value):
        raise NumericError(
            "quadrature did not reach the requested accuracy",
            diagnostics={"a": a, "theta": theta, "eta": eta, "abserr": abserr,
                         "neval": info.get("neval"), "last": info.get("last")},
        )
    return value - 0.5


def extremal_from_madogram(nu):
    """Invert the max-stable madogram: ``Theta = (1 + 2 nu) / (1 - 2 nu)``."""
    nu = np.asarray(nu, dtype=float)
    if np.any(~np.isfinite(nu)) or np.any(nu < 0) or np.any(nu > 1.0 / 6.0 + _TOL):
        raise ParameterDomainError("max-stable F-madogram values lie in [0, 1/6]")
    nu = np.minimum(nu, 1.0 / 6.0)
    return _out((1.0 + 2.0 * nu) / (1.0 - 2.0 * nu))


def madogram_curve(spec, h):
    """Theoretical ``nu^F(h)`` of a :class:`~maxmix.models.ModelSpec`."""
    if not spec.has_y:
        return madogram_ms(spec.theta_x(h))
    if not spec.has_x:
        return madogram_ims(spec.eta_y(h))
    return madogram_mm(spec.a, spec.theta_x(h), spec.eta_y(h))
