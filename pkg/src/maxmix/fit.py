"""Least-squares F-madogram and censored pairwise composite-likelihood estimation.

The least-squares objective for pair distances ``H`` and replicates ``k`` is

    L(psi) = sum_h mean_k (Y_hk - nu(h; psi))^2
           = sum_h [var_k(Y_hk) + (mean_k Y_hk - nu(h; psi))^2],

so only per-pair means and second moments are needed.  The composite
likelihood uses the four-cell censoring scheme at per-site empirical
quantile thresholds; both-below cells are identical across replicates of a
pair and are evaluated once per pair with a count weight.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .empirical import MadogramCloud, bin_madogram, pair_geometry, rank_uniform
from .exceptions import ConvergenceError, NumericError, ParameterDomainError, UsageError
from .madogram import madogram_curve
from .models import ModelSpec, mm_cdf_partials
from .optim import multistart_nelder_mead
from .registry import ModelShape, get_model
from .simulate import SpatialSample

logger = logging.getLogger(__name__)

__all__ = [
    "FitConfig",
    "FitResult",
    "ErrorMoments",
    "ls_objective",
    "fit_ls",
    "mic",
    "censored_pair_loglik",
    "CensoredPairs",
    "prepare_censored_pairs",
    "cl_objective",
    "cl_per_replicate",
    "fit_cl",
    "godambe_trace",
    "godambe_clic",
    "rmse",
]

_LOG_FLOOR = 1e-300
_COINCIDENT = 1e-12


@dataclass
class FitConfig:
    """Optimizer settings shared by both estimators."""

    n_starts: int = 8
    max_evals: int = 2000
    xatol: float = 1e-6
    fatol: float = 1e-10
    seed: int = 0
    bounds: Optional[dict] = None
    starts: Optional[list] = None


@dataclass
class FitResult:
    model: str
    estimator: str
    psi_hat: dict
    objective: float
    criterion_name: str
    criterion: Optional[float]
    converged: bool
    n_starts: int
    n_evals: int
    seed: int
    trace: list = field(default_factory=list, repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        out = asdict(self)
        out["trace"] = [
            {"start": list(map(float, t.start)), "psi": list(map(float, t.psi)),
             "value": float(t.value), "n_evals": t.n_evals, "converged": t.converged}
            for t in self.trace
        ]
        return out


def _check_in_bounds(model: ModelShape, psi: dict, bounds=None):
    for name, value in psi.items():
        if not np.isfinite(value):
            raise ParameterDomainError(f"{name} is not finite")
        if bounds is not None:
            lo, hi = bounds[name]
            if value < lo or value > hi:
                raise ParameterDomainError(f"{name}={value} outside [{lo}, {hi}]")


# -- least squares ----------------------------------------------------------

@dataclass(frozen=True)
class _LSData:
    h: np.ndarray
    y_bar: np.ndarray
    weight: np.ndarray
    var_sum: float
    n_rep: int

    @property
    def n_pairs(self):
        return int(self.weight.sum())


def _ls_data(cloud: MadogramCloud, binned=None) -> _LSData:
    var = np.maximum(cloud.y_sq_bar - cloud.y_bar**2, 0.0)
    if binned is None:
        return _LSData(cloud.h, cloud.y_bar, np.ones_like(cloud.h), float(var.sum()), cloud.n_rep)
    b = bin_madogram(cloud, binned)
    # within-bin spread of y_bar around the bin mean joins the constant term
    idx = np.clip(np.searchsorted(b.edges, cloud.h, side="right") - 1, 0, b.edges.size - 2)
    centers = np.zeros(b.edges.size - 1)
    keep = np.bincount(idx, minlength=centers.size) > 0
    centers[keep] = b.nu_hat
    spread = float(np.sum((cloud.y_bar - centers[idx]) ** 2))
    return _LSData(b.centers, b.nu_hat, b.counts.astype(float), float(var.sum()) + spread,
                   cloud.n_rep)


def _ls_value(data: _LSData, spec: ModelSpec):
    nu = np.asarray(madogram_curve(spec, data.h))
    return data.var_sum + float(np.sum(data.weight * (data.y_bar - nu) ** 2))


def ls_objective(cloud: MadogramCloud, model, psi, bounds=None) -> float:
    """Least-squares madogram criterion at ``psi`` (each pair its own lag)."""
    model = get_model(model)
    psi = model.as_dict(psi)
    _check_in_bounds(model, psi, bounds)
    return _ls_value(_ls_data(cloud), model.build(psi))


def mic(objective, k, T) -> float:
    """``log L + 2k(k+1)/(T-k-1)``."""
    k, T = int(k), int(T)
    if T <= k + 1:
        raise ParameterDomainError(f"MIC needs T > k + 1 (T={T}, k={k})")
    if not objective > 0:
        raise ParameterDomainError("MIC needs a positive objective value")
    return float(np.log(objective) + 2.0 * k * (k + 1) / (T - k - 1))


def _safe(fun):
    def wrapped(psi):
        try:
            return fun(psi)
        except (ParameterDomainError, FloatingPointError):
            return np.inf
    return wrapped


def _hmax(h):
    h = np.asarray(h)
    return float(h.max()) if h.size and h.max() > 0 else 1.0


def fit_ls(cloud: MadogramCloud, model, config: Optional[FitConfig] = None, binned=None,
           raise_on_failure=True) -> FitResult:
    """Least-squares F-madogram estimate with multi-start bounded Nelder-Mead."""
    model = get_model(model)
    config = config or FitConfig()
    data = _ls_data(cloud, binned)
    if data.h.size < model.k:
        raise UsageError(f"{data.h.size} lags cannot identify {model.k} parameters")
    bounds = model.bounds(_hmax(cloud.h), config.bounds)

    def objective(values):
        return _ls_value(data, model.build(values))

    res = multistart_nelder_mead(
        _safe(objective), bounds, n_starts=config.n_starts, max_evals=config.max_evals,
        xatol=config.xatol, fatol=config.fatol, seed=config.seed, starts=config.starts,
    )
    psi = model.as_dict(res.psi)
    T = cloud.n_rep * len(cloud)
    try:
        crit = mic(res.value, model.k, T)
    except ParameterDomainError:
        crit = None
    result = FitResult(
        model=model.name, estimator="ls", psi_hat=psi, objective=float(res.value),
        criterion_name="MIC", criterion=crit, converged=res.converged,
        n_starts=len(res.traces), n_evals=res.n_evals, seed=config.seed, trace=res.traces,
        diagnostics={"T": T, "k": model.k, "n_lags": int(data.h.size), "bounds": bounds},
    )
    if not res.converged and raise_on_failure:
        raise ConvergenceError(f"no LS start converged for {model.name}", result)
    return result


# -- censored composite likelihood -------------------------------------------

def _margin_density_log(z):
    return -2.0 * np.log(z) - 1.0 / z


def censored_pair_loglik(z1, z2, u1, u2, spec: ModelSpec, h, censoring="four-cell"):
    """Censored bivariate log-likelihood contribution(s).

    Cells: both above their thresholds -> ``log d2G/dz1dz2``; both below ->
    ``log G(u1, u2)``; one above -> the one-sided partial at the censored
    threshold.  ``censoring="two-cell"`` drops mixed cells (contribution 0).
    Coincident sites (``h`` ~ 0) contribute the common margin instead.
    """
    z1, z2, u1, u2, h = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (z1, z2, u1, u2, h)))
    if np.any(u1 <= 0) or np.any(u2 <= 0):
        raise ParameterDomainError("thresholds must be positive")
    if censoring not in ("four-cell", "two-cell"):
        raise UsageError(f"unknown censoring scheme {censoring!r}")
    out = _censored_contrib(z1, z2, u1, u2, spec, h, censoring)
    if not np.all(np.isfinite(out)):
        bad = np.flatnonzero(~np.isfinite(np.atleast_1d(out)))[:5]
        raise NumericError(
            "non-finite censored likelihood contribution",
            diagnostics={"index": bad.tolist(), "z1": np.atleast_1d(z1)[bad].tolist(),
                         "z2": np.atleast_1d(z2)[bad].tolist(), "h": np.atleast_1d(h)[bad].tolist()},
        )
    return float(out) if out.ndim == 0 else out


def _censored_contrib(z1, z2, u1, u2, spec, h, censoring, floor=None):
    above1, above2 = z1 > u1, z2 > u2
    x1 = np.where(above1, z1, u1)
    x2 = np.where(above2, z2, u2)
    G, G1, G2, G12 = (np.asarray(v) for v in mm_cdf_partials(spec, h, x1, x2))
    lik = np.select([above1 & above2, above1 & ~above2, ~above1 & above2], [G12, G1, G2], G)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(lik if floor is None else np.maximum(lik, floor))
    if censoring == "two-cell":
        out = np.where(above1 ^ above2, 0.0, out)
    coincident = h <= _COINCIDENT
    if np.any(coincident):
        dens = np.where(above1, _margin_density_log(x1), _margin_density_log(x2))
        both_below = -1.0 / np.minimum(u1, u2)
        out = np.where(coincident, np.where(above1 | above2, dens, both_below), out)
    return out


@dataclass(frozen=True)
class CensoredPairs:
    """Censoring pattern of a sample, flattened for vectorized evaluation.

    ``rows`` indexes replicates of the uncensored/mixed entries; both-below
    cells are stored once per pair with multiplicity ``below_counts``.
    """

    n_rep: int
    pair_i: np.ndarray
    pair_j: np.ndarray
    pair_h: np.ndarray
    thresholds: np.ndarray
    rows: np.ndarray
    pair_of_entry: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    below_counts: np.ndarray
    below_mask: Optional[np.ndarray] = field(default=None, repr=False)
    censoring: str = "four-cell"

    @property
    def n_pairs(self):
        return self.pair_h.size


def prepare_censored_pairs(sample: SpatialSample, quantile=0.9, delta=np.inf, margin="empirical",
                           censoring="four-cell", keep_below_mask=False) -> CensoredPairs:
    """Frechet-scale data, per-site thresholds and the censoring pattern.

    ``margin="empirical"`` rank-transforms to unit Frechet first; ``"frechet"``
    takes a unit-Frechet sample at face value.
    """
    q = float(quantile)
    if not (0.0 < q < 1.0):
        raise UsageError("censoring quantile must lie strictly between 0 and 1")
    if margin == "empirical":
        Z = -1.0 / np.log(rank_uniform(sample.data))
    elif margin == "frechet":
        if sample.margin != "unit-frechet":
            raise UsageError("margin='frechet' needs a unit-Frechet sample")
        Z = np.asarray(sample.data)
    else:
        raise UsageError(f"unknown margin option {margin!r}")
    if censoring not in ("four-cell", "two-cell"):
        raise UsageError(f"unknown censoring scheme {censoring!r}")
    i, j, h, _ = pair_geometry(sample.sites.coords)
    keep = h <= delta
    if not np.any(keep):
        raise UsageError(f"no site pair within distance delta={delta}")
    i, j, h = i[keep], j[keep], h[keep]
    u = np.quantile(Z, q, axis=0)
    A = Z > u
    Zi, Zj = Z[:, i], Z[:, j]
    Ai, Aj = A[:, i], A[:, j]
    entry = Ai | Aj
    if censoring == "two-cell":
        entry = Ai & Aj
    rows, cols = np.nonzero(entry)
    below = ~(Ai | Aj)
    return CensoredPairs(
        n_rep=Z.shape[0], pair_i=i, pair_j=j, pair_h=h, thresholds=u,
        rows=rows, pair_of_entry=cols,
        z1=np.where(Ai, Zi, u[i])[rows, cols], z2=np.where(Aj, Zj, u[j])[rows, cols],
        below_counts=below.sum(axis=0), below_mask=below if keep_below_mask else None,
        censoring=censoring,
    )


def _contributions(data: CensoredPairs, spec: ModelSpec):
    u1 = data.thresholds[data.pair_i]
    u2 = data.thresholds[data.pair_j]
    p = data.pair_of_entry
    entries = _censored_contrib(data.z1, data.z2, u1[p], u2[p], spec, data.pair_h[p],
                                data.censoring, floor=_LOG_FLOOR)
    below = _censored_contrib(u1, u2, u1, u2, spec, data.pair_h, data.censoring,
                              floor=_LOG_FLOOR)
    return entries, below


def cl_objective(data: CensoredPairs, spec: ModelSpec) -> float:
    """Total censored pairwise log-likelihood ``P(psi)``."""
    entries, below = _contributions(data, spec)
    return float(entries.sum() + np.dot(data.below_counts, below))


def cl_per_replicate(data: CensoredPairs, spec: ModelSpec) -> np.ndarray:
    """Per-replicate contributions ``P_k(psi)``; they sum to :func:`cl_objective`."""
    if data.below_mask is None:
        raise UsageError("per-replicate terms need prepare_censored_pairs(keep_below_mask=True)")
    entries, below = _contributions(data, spec)
    per = np.bincount(data.rows, weights=entries, minlength=data.n_rep)
    return per + data.below_mask.astype(float) @ below


def fit_cl(sample: SpatialSample, model, quantile=0.9, delta=np.inf,
           config: Optional[FitConfig] = None, margin="empirical", censoring="four-cell",
           with_clic=False, raise_on_failure=True) -> FitResult:
    """Maximum censored pairwise composite-likelihood estimate."""
    model = get_model(model)
    config = config or FitConfig()
    data = prepare_censored_pairs(sample, quantile, delta, margin, censoring,
                                  keep_below_mask=with_clic)
    bounds = model.bounds(_hmax(data.pair_h), config.bounds)

    def negloglik(values):
        return -cl_objective(data, model.build(values))

    with np.errstate(all="ignore"):
        res = multistart_nelder_mead(
            _safe(negloglik), bounds, n_starts=config.n_starts, max_evals=config.max_evals,
            xatol=config.xatol, fatol=config.fatol, seed=config.seed, starts=config.starts,
        )
    result = FitResult(
        model=model.name, estimator="cl", psi_hat=model.as_dict(res.psi),
        objective=float(-res.value), criterion_name="CLIC", criterion=None,
        converged=res.converged, n_starts=len(res.traces), n_evals=res.n_evals,
        seed=config.seed, trace=res.traces,
        diagnostics={"quantile": quantile, "delta": float(delta), "n_pairs": data.n_pairs,
                     "censoring": censoring, "bounds": bounds},
    )
    if not res.converged and raise_on_failure:
        raise ConvergenceError(f"no CL start converged for {model.name}", result)
    if with_clic:
        clic, info = godambe_clic(data, result, model)
        result.criterion = clic
        result.diagnostics.update(info)
    return result


def _fd_steps(psi, bounds, rel):
    steps = np.empty_like(psi)
    centre = psi.copy()
    for n, (lo, hi) in enumerate(bounds):
        scale = abs(psi[n]) if psi[n] != 0 else (hi - lo)
        steps[n] = rel * max(scale, 1e-3 * (hi - lo))
        # keep the whole stencil inside the admissible box
        centre[n] = np.clip(psi[n], lo + 2.5 * steps[n], hi - 2.5 * steps[n])
    return centre, steps


def godambe_trace(per_replicate, psi, bounds, rel_step=1e-3):
    """``tr(J^-1 K)`` for per-replicate objective contributions.

    ``per_replicate(psi)`` returns the length-``N`` vector of ``P_k``.  ``J``
    is the central-difference Hessian of ``-sum_k P_k`` divided by ``N`` and
    ``K`` the mean outer product of per-replicate central-difference
    gradients, so both are per-replicate quantities.
    """
    psi = np.asarray(psi, dtype=float)
    d = psi.size
    centre, h = _fd_steps(psi, bounds, rel_step)
    base = np.asarray(per_replicate(centre))
    N = base.size
    f0 = base.sum()
    grads = np.empty((N, d))
    plus, minus = {}, {}
    for a in range(d):
        e = np.zeros(d)
        e[a] = h[a]
        fp = np.asarray(per_replicate(centre + e))
        fm = np.asarray(per_replicate(centre - e))
        grads[:, a] = (fp - fm) / (2 * h[a])
        plus[a], minus[a] = fp.sum(), fm.sum()
    H = np.empty((d, d))
    for a in range(d):
        H[a, a] = (plus[a] - 2 * f0 + minus[a]) / h[a] ** 2
        for b in range(a + 1, d):
            ea = np.zeros(d)
            eb = np.zeros(d)
            ea[a], eb[b] = h[a], h[b]
            f = [np.sum(per_replicate(centre + sa * ea + sb * eb))
                 for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1))]
            H[a, b] = H[b, a] = (f[0] - f[1] - f[2] + f[3]) / (4 * h[a] * h[b])
    J = -H / N
    K = grads.T @ grads / N
    regularized = False
    w, U = np.linalg.eigh(0.5 * (J + J.T))
    floor = 1e-10 * max(np.max(np.abs(w)), 1e-300)
    if np.any(w <= floor):
        regularized = True
        warnings.warn("Hessian not positive definite; eigenvalues floored", RuntimeWarning)
        w = np.maximum(w, floor)
    J_inv = (U / w) @ U.T
    return float(np.trace(J_inv @ K)), {"J": J, "K": K, "regularized": regularized}


def godambe_clic(data, fit: FitResult, model=None):
    """CLIC ``-2 [P(psi_hat) - tr(J^-1 K)]`` at a composite-likelihood fit.

    ``data`` is a :class:`CensoredPairs` built with ``keep_below_mask=True``
    or a :class:`SpatialSample` (prepared with the fit's settings).
    """
    model = get_model(model or fit.model)
    if isinstance(data, SpatialSample):
        diag = fit.diagnostics
        data = prepare_censored_pairs(data, diag.get("quantile", 0.9), diag.get("delta", np.inf),
                                      censoring=diag.get("censoring", "four-cell"),
                                      keep_below_mask=True)
    if data.below_mask is None:
        raise UsageError("CLIC needs per-replicate terms (keep_below_mask=True)")
    bounds = fit.diagnostics.get("bounds") or model.bounds(_hmax(data.pair_h))
    psi = model.as_array(fit.psi_hat)
    box = [bounds[p] for p in model.params]

    def per_rep(values):
        return cl_per_replicate(data, model.build(values))

    with np.errstate(all="ignore"):
        tr, info = godambe_trace(per_rep, psi, box)
        P = cl_objective(data, model.build(psi))
    if not np.isfinite(tr):
        raise NumericError("Godambe trace is not finite", diagnostics={"psi": fit.psi_hat})
    clic = -2.0 * (P - tr)
    return float(clic), {"trace_JinvK": tr, "godambe_regularized": info["regularized"]}


# -- simulation-study summaries ---------------------------------------------

@dataclass(frozen=True)
class ErrorMoments:
    params: tuple
    bias: np.ndarray
    rmse: np.ndarray
    n: int

    def as_dict(self):
        return {p: {"bias": float(b), "rmse": float(r)}
                for p, b, r in zip(self.params, self.bias, self.rmse)}


def rmse(estimates, truth, params=None) -> ErrorMoments:
    """Per-parameter bias and root mean squared error over ``J`` estimates."""
    if isinstance(truth, dict):
        params = tuple(truth) if params is None else tuple(params)
        truth = np.array([truth[p] for p in params], dtype=float)
    truth = np.atleast_1d(np.asarray(truth, dtype=float))
    est = np.asarray(estimates, dtype=float)
    if est.ndim == 1:
        est = est[:, None] if truth.size == 1 else est[None, :]
    if est.ndim != 2 or est.shape[0] < 1 or est.shape[1] != truth.size:
        raise UsageError(f"estimates of shape {est.shape} do not match {truth.size} parameters")
    params = tuple(params) if params is not None else tuple(f"p{n}" for n in range(truth.size))
    err = est - truth
    return ErrorMoments(params, err.mean(axis=0), np.sqrt(np.mean(err**2, axis=0)), est.shape[0])
