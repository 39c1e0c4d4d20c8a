"""Bounded multi-start Nelder-Mead.

Each parameter is mapped to an unconstrained coordinate ``t`` by a logit
of its position in the box; positive parameters are placed on a log scale
first.  ``a`` (bounds within ``[0, 1]``) stays on the linear scale.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit
from scipy.stats import qmc

logger = logging.getLogger(__name__)

_PENALTY = 1e100


@dataclass
class BoxTransform:
    names: tuple
    lower: np.ndarray
    upper: np.ndarray
    log_scale: np.ndarray

    @classmethod
    def from_bounds(cls, bounds: dict):
        names = tuple(bounds)
        lo = np.array([bounds[n][0] for n in names], dtype=float)
        hi = np.array([bounds[n][1] for n in names], dtype=float)
        log_scale = lo > 0
        return cls(names, lo, hi, log_scale)

    def _span(self):
        lo = np.where(self.log_scale, np.log(np.where(self.log_scale, self.lower, 1.0)), self.lower)
        hi = np.where(self.log_scale, np.log(np.where(self.log_scale, self.upper, 1.0)), self.upper)
        return lo, hi

    def to_params(self, t):
        lo, hi = self._span()
        x = lo + (hi - lo) * expit(np.asarray(t, dtype=float))
        return np.where(self.log_scale, np.exp(x), x)

    def to_unconstrained(self, psi):
        lo, hi = self._span()
        psi = np.asarray(psi, dtype=float)
        x = np.where(self.log_scale, np.log(np.maximum(psi, 1e-300)), psi)
        frac = np.clip((x - lo) / (hi - lo), 1e-12, 1 - 1e-12)
        return logit(frac)

    def from_unit(self, u):
        """Map points of the unit cube into the box (through the same scales)."""
        lo, hi = self._span()
        x = lo + (hi - lo) * np.asarray(u, dtype=float)
        return np.where(self.log_scale, np.exp(x), x)


@dataclass
class StartTrace:
    start: np.ndarray
    psi: np.ndarray
    value: float
    n_evals: int
    converged: bool
    message: str = ""


@dataclass
class MultiStartResult:
    psi: np.ndarray
    value: float
    converged: bool
    n_evals: int
    traces: list = field(default_factory=list)


def start_points(transform: BoxTransform, n_starts, seed, margin=0.1):
    """Scrambled Sobol points in the interior ``[margin, 1 - margin]`` of the box."""
    d = len(transform.names)
    sampler = qmc.Sobol(d, scramble=True, seed=np.random.default_rng(seed))
    n_pow = int(np.ceil(np.log2(max(n_starts, 1))))
    u = sampler.random_base2(n_pow)[:n_starts]
    return transform.from_unit(margin + (1 - 2 * margin) * u)


def multistart_nelder_mead(fun, bounds: dict, n_starts=8, max_evals=2000, xatol=1e-6,
                           fatol=1e-10, seed=0, starts=None, step=0.5) -> MultiStartResult:
    """Minimize ``fun(psi)`` over a box from several quasi-random starts.

    The best start is returned; ``converged`` is true when at least one start
    met the simplex-size / function-spread tolerances within ``max_evals``.
    """
    tr = BoxTransform.from_bounds(bounds)
    if starts is None:
        starts = start_points(tr, n_starts, seed)
    starts = np.atleast_2d(np.asarray(starts, dtype=float))

    def objective(t):
        value = fun(tr.to_params(t))
        return value if np.isfinite(value) else _PENALTY

    traces = []
    for psi0 in starts:
        t0 = tr.to_unconstrained(psi0)
        simplex = np.vstack([t0, t0 + step * np.eye(t0.size)])
        res = minimize(
            objective, t0, method="Nelder-Mead",
            options={"maxfev": max_evals, "xatol": xatol, "fatol": fatol,
                     "initial_simplex": simplex},
        )
        traces.append(StartTrace(np.asarray(psi0), tr.to_params(res.x), float(res.fun),
                                 int(res.nfev), bool(res.success), str(res.message)))
        logger.debug("start %s -> %.6g (%d evals, %s)", psi0, res.fun, res.nfev, res.message)

    converged = any(t.converged and t.value < _PENALTY for t in traces)
    best = min(traces, key=lambda t: t.value)
    return MultiStartResult(best.psi, best.value, converged, sum(t.n_evals for t in traces), traces)
