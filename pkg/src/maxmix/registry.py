"""Named model shapes: parameter lists, default box bounds and spec builders.

=====  ==========================================================  ==============================
name   structure                                                   parameters
=====  ==========================================================  ==============================
MM1    TEG ``X`` + inverted Smith ``Y``                            a, theta_x, r_x, sigma_y
MM2    TEG ``X`` + inverted Brown-Resnick ``Y``                    a, theta_x, r_x, theta_y, sigma2_y
M1     TEG                                                         theta_x, r_x
M2     Brown-Resnick                                               theta_x, sigma2_x
M3     inverted Brown-Resnick                                      theta_y, sigma2_y
M4     Smith                                                       sigma_x
M5     inverted Smith                                              sigma_y
=====  ==========================================================  ==============================

Range-type bounds scale with the largest observed pair distance ``hmax`` so
the same defaults serve the unit square and kilometre-scale networks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .exceptions import ParameterDomainError, UsageError
from .models import TEG, BrownResnick, ModelSpec, Smith

__all__ = ["ModelShape", "MODELS", "get_model"]


def _range(hmax):
    return (0.005 * hmax, 3.0 * hmax)


def _radius(hmax):
    return (0.01 * hmax, 2.0 * hmax)


def _smith_sigma(hmax):
    return (1e-4 * hmax**2, 10.0 * hmax**2)


def _sill(hmax):
    return (0.01, 20.0)


def _mixing(hmax):
    return (0.0, 1.0)


_BOUNDS = {
    "a": _mixing,
    "theta_x": _range,
    "theta_y": _range,
    "r_x": _radius,
    "sigma_x": _smith_sigma,
    "sigma_y": _smith_sigma,
    "sigma2_x": _sill,
    "sigma2_y": _sill,
}


@dataclass(frozen=True)
class ModelShape:
    name: str
    params: tuple
    builder: Callable[[Mapping[str, float]], ModelSpec]
    description: str = ""

    @property
    def k(self):
        return len(self.params)

    def build(self, psi) -> ModelSpec:
        """ModelSpec from a mapping or a sequence ordered like ``params``."""
        psi = self.as_dict(psi)
        return self.builder(psi)

    def as_dict(self, psi) -> dict:
        if isinstance(psi, Mapping):
            missing = set(self.params) - set(psi)
            if missing:
                raise ParameterDomainError(f"{self.name}: missing parameters {sorted(missing)}")
            return {p: float(psi[p]) for p in self.params}
        values = np.asarray(psi, dtype=float).ravel()
        if values.size != self.k:
            raise ParameterDomainError(f"{self.name} expects {self.k} parameters, got {values.size}")
        return dict(zip(self.params, values.tolist()))

    def as_array(self, psi) -> np.ndarray:
        return np.array(list(self.as_dict(psi).values()))

    def bounds(self, hmax, overrides=None) -> dict:
        hmax = float(hmax)
        if not hmax > 0:
            raise UsageError("maximum pair distance must be positive")
        out = {p: _BOUNDS[p](hmax) for p in self.params}
        for key, value in (overrides or {}).items():
            if key not in out:
                raise UsageError(f"{self.name} has no parameter {key!r}")
            lo, hi = map(float, value)
            if not hi > lo:
                raise UsageError(f"empty bound interval for {key}")
            out[key] = (lo, hi)
        return out


MODELS = {
    "MM1": ModelShape(
        "MM1", ("a", "theta_x", "r_x", "sigma_y"),
        lambda p: ModelSpec(p["a"], TEG(p["theta_x"], p["r_x"]), Smith(p["sigma_y"])),
        "max-mixture of a TEG process and an inverted Smith process",
    ),
    "MM2": ModelShape(
        "MM2", ("a", "theta_x", "r_x", "theta_y", "sigma2_y"),
        lambda p: ModelSpec(p["a"], TEG(p["theta_x"], p["r_x"]),
                            BrownResnick(p["sigma2_y"], p["theta_y"])),
        "max-mixture of a TEG process and an inverted Brown-Resnick process",
    ),
    "M1": ModelShape(
        "M1", ("theta_x", "r_x"),
        lambda p: ModelSpec(1.0, TEG(p["theta_x"], p["r_x"])),
        "TEG max-stable process",
    ),
    "M2": ModelShape(
        "M2", ("theta_x", "sigma2_x"),
        lambda p: ModelSpec(1.0, BrownResnick(p["sigma2_x"], p["theta_x"])),
        "Brown-Resnick max-stable process",
    ),
    "M3": ModelShape(
        "M3", ("theta_y", "sigma2_y"),
        lambda p: ModelSpec(0.0, None, BrownResnick(p["sigma2_y"], p["theta_y"])),
        "inverted Brown-Resnick process",
    ),
    "M4": ModelShape(
        "M4", ("sigma_x",),
        lambda p: ModelSpec(1.0, Smith(p["sigma_x"])),
        "Smith max-stable process",
    ),
    "M5": ModelShape(
        "M5", ("sigma_y",),
        lambda p: ModelSpec(0.0, None, Smith(p["sigma_y"])),
        "inverted Smith process",
    ),
}


def get_model(model) -> ModelShape:
    if isinstance(model, ModelShape):
        return model
    try:
        return MODELS[str(model)]
    except KeyError:
        raise UsageError(f"unknown model {model!r}; choose from {', '.join(MODELS)}") from None
