"""Replicated simulation study: simulate, fit with LS and/or CL, summarize errors.

Sites are drawn once per study.  Replicate ``j`` at mixing level index
``m`` uses the data stream ``Seed(seed).child("data", m, j)``; each
estimator sees the same replicate data, and results are collected in task
order, so tables do not depend on the number of workers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import io as mio
from .empirical import empirical_fmadogram
from .exceptions import ConvergenceError, MaxMixError, UsageError
from .fit import FitConfig, fit_cl, fit_ls, rmse
from .registry import get_model
from .simulate import Seed, sample_sites, simulate_max_mixture

logger = logging.getLogger(__name__)

__all__ = ["DEFAULT_PSI0", "StudyConfig", "StudyResult", "run_study", "write_study"]

#: Generating parameters of the desk-scale design; also the CLI's fallback values.
DEFAULT_PSI0 = {"a": 0.5, "theta_x": 0.2, "r_x": 0.25, "sigma_y": 0.6}

_ESTIMATORS = ("ls", "cl")


@dataclass
class StudyConfig:
    """Simulation-study settings; defaults are the desk-scale design."""

    model: str = "MM1"
    psi0: dict = field(default_factory=lambda: dict(DEFAULT_PSI0))
    a_grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    n_sites: int = 30
    region: tuple = ((0.0, 1.0), (0.0, 1.0))
    n_rep: int = 500
    J: int = 20
    estimators: tuple = ("ls", "cl")
    seed: int = 0
    n_starts: int = 8
    cl_n_starts: Optional[int] = None
    max_evals: int = 2000
    xatol: float = 1e-6
    quantile: float = 0.9
    delta: float = math.inf
    margin: str = "empirical"
    density_bins: int = 20
    workers: int = 1

    def __post_init__(self):
        model = get_model(self.model)
        self.psi0 = model.as_dict(dict(self.psi0, **({"a": 0.5} if "a" in model.params
                                                     and "a" not in self.psi0 else {})))
        self.a_grid = tuple(float(a) for a in self.a_grid)
        self.estimators = tuple(str(e).lower() for e in self.estimators)
        self.region = tuple(tuple(map(float, r)) for r in self.region)
        if self.J < 1 or self.n_rep < 2:
            raise UsageError("a study needs J >= 1 and N >= 2")
        if self.n_sites < 2:
            raise UsageError("a study needs at least two sites")
        if not self.a_grid or any(not 0.0 <= a <= 1.0 for a in self.a_grid):
            raise UsageError("a-grid values must lie in [0, 1]")
        if "a" not in model.params:
            fixed = model.build(self.psi0).a
            if self.a_grid != (fixed,):
                logger.info("model %s has no mixing parameter; a-grid set to (%s,)",
                            model.name, fixed)
            self.a_grid = (fixed,)
        bad = set(self.estimators) - set(_ESTIMATORS)
        if bad or not self.estimators:
            raise UsageError(f"estimators must be a non-empty subset of {_ESTIMATORS}")
        if self.workers < 1:
            raise UsageError("workers must be at least 1")

    @classmethod
    def from_dict(cls, cfg: dict):
        known = set(cls.__dataclass_fields__)
        unknown = set(cfg) - known - {"out"}
        if unknown:
            raise UsageError(f"unknown study option(s): {sorted(unknown)}")
        return cls(**{k: v for k, v in cfg.items() if k in known})

    def as_dict(self, include_workers=True):
        out = asdict(self)
        if not include_workers:
            out.pop("workers")
        return out

    def truth(self, a):
        psi = dict(self.psi0)
        if "a" in psi:
            psi["a"] = a
        return psi


@dataclass
class StudyResult:
    config: StudyConfig
    estimates: list      # rows aligned with io.ESTIMATE_COLUMNS
    failures: list       # (a_true, replicate, estimator, kind, message)

    def values(self, a, estimator, param):
        return np.array([r[4] for r in self.estimates
                         if r[0] == a and r[2] == estimator and r[3] == param])

    def rmse_table(self):
        """Rows ``(a_true, estimator, param, n, bias, rmse)``."""
        out = []
        for a in self.config.a_grid:
            truth = self.config.truth(a)
            for est in self.config.estimators:
                for p in truth:
                    v = self.values(a, est, p)
                    if v.size == 0:
                        continue
                    m = rmse(v[:, None], [truth[p]], (p,))
                    out.append((a, est, p, m.n, float(m.bias[0]), float(m.rmse[0])))
        return out

    def error_table(self):
        """Boxplot summary rows ``(a_true, estimator, param, n, min, q1, median, q3, max)``."""
        out = []
        for a in self.config.a_grid:
            truth = self.config.truth(a)
            for est in self.config.estimators:
                for p in truth:
                    e = self.values(a, est, p) - truth[p]
                    if e.size == 0:
                        continue
                    q = np.quantile(e, [0.0, 0.25, 0.5, 0.75, 1.0])
                    out.append((a, est, p, e.size, *map(float, q)))
        return out

    def density_table(self):
        """Histogram density of errors, bins shared across estimators per (a, param)."""
        out = []
        for a in self.config.a_grid:
            truth = self.config.truth(a)
            for p in truth:
                errs = {est: self.values(a, est, p) - truth[p] for est in self.config.estimators}
                pooled = np.concatenate([e for e in errs.values()])
                if pooled.size == 0:
                    continue
                lo, hi = float(pooled.min()), float(pooled.max())
                if hi <= lo:
                    lo, hi = lo - 0.5, hi + 0.5
                edges = np.linspace(lo, hi, self.config.density_bins + 1)
                for est, e in errs.items():
                    if e.size == 0:
                        continue
                    dens, _ = np.histogram(e, bins=edges, density=True)
                    out.extend((a, est, p, float(edges[b]), float(edges[b + 1]), float(dens[b]))
                               for b in range(dens.size))
        return out


def _fit_seed(seed: Seed) -> int:
    return int(seed.rng().integers(0, 2**31 - 1))


def _run_task(args):
    cfg, sites, m, a, j = args
    model = get_model(cfg.model)
    truth = cfg.truth(a)
    rep_seed = Seed(cfg.seed).child("data", m, j)
    rows, failures = [], []
    try:
        sample = simulate_max_mixture(model.build(truth), sites, cfg.n_rep, rep_seed)
    except MaxMixError as exc:
        return rows, [(a, j, "-", type(exc).__name__, str(exc))]
    for est in cfg.estimators:
        n_starts = (cfg.cl_n_starts or cfg.n_starts) if est == "cl" else cfg.n_starts
        fc = FitConfig(n_starts=n_starts,
                       max_evals=cfg.max_evals, xatol=cfg.xatol,
                       seed=_fit_seed(Seed(cfg.seed).child("fit", m, j, est)))
        try:
            if est == "ls":
                cloud = empirical_fmadogram(sample, use_true_frechet=cfg.margin == "frechet",
                                            keep_terms=False)
                res = fit_ls(cloud, model, fc)
            else:
                res = fit_cl(sample, model, cfg.quantile, cfg.delta, fc,
                             "frechet" if cfg.margin == "frechet" else "empirical")
        except ConvergenceError as exc:
            res = exc.result
            failures.append((a, j, est, "nonconverged", str(exc)))
        except MaxMixError as exc:
            failures.append((a, j, est, type(exc).__name__, str(exc)))
            logger.warning("replicate %d at a=%s, %s failed: %s", j, a, est, exc)
            continue
        rows.extend((a, j, est, p, v, v - truth[p]) for p, v in res.psi_hat.items())
    return rows, failures


def run_study(cfg: StudyConfig, workers: Optional[int] = None) -> StudyResult:
    workers = cfg.workers if workers is None else int(workers)
    sites = sample_sites(cfg.n_sites, cfg.region, Seed(cfg.seed).child("sites"))
    tasks = [(cfg, sites, m, a, j) for m, a in enumerate(cfg.a_grid) for j in range(cfg.J)]
    if workers == 1:
        results = map(_run_task, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_run_task, tasks)
    estimates, failures = [], []
    try:
        for rows, fails in results:
            estimates.extend(rows)
            failures.extend(fails)
    finally:
        if workers != 1:
            pool.shutdown()
    return StudyResult(cfg, estimates, failures)


def write_study(result: StudyResult, out, config_hash: str):
    """Write the estimates, error, RMSE, density and failure tables plus a report."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    mio.write_table(out / "estimates.csv", mio.ESTIMATE_COLUMNS, result.estimates, config_hash)
    mio.write_table(out / "errors.csv",
                    ("a_true", "estimator", "param", "n", "min", "q1", "median", "q3", "max"),
                    result.error_table(), config_hash)
    mio.write_table(out / "rmse.csv", ("a_true", "estimator", "param", "n", "bias", "rmse"),
                    result.rmse_table(), config_hash)
    mio.write_table(out / "density.csv",
                    ("a_true", "estimator", "param", "bin_lo", "bin_hi", "density"),
                    result.density_table(), config_hash)
    mio.write_table(out / "failures.csv", ("a_true", "replicate", "estimator", "kind", "message"),
                    result.failures, config_hash)
    mio.write_json(out / "report.json", {"config": result.config.as_dict(include_workers=False),
                                         "config_hash": config_hash,
                                         "n_estimates": len(result.estimates),
                                         "n_failures": len(result.failures)})
