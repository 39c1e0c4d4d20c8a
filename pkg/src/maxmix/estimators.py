"""Estimator-style wrappers around the functional fitting API.

>>> est = MadogramLeastSquares("MM1", seed=1).fit(sample)   # doctest: +SKIP
>>> est.psi_, est.predict([0.1, 0.5])                        # doctest: +SKIP
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import fit as _fit
from .empirical import empirical_fmadogram, rank_uniform
from .madogram import madogram_curve
from .registry import get_model
from .validation import as_sample, check_lags, check_observations

__all__ = ["RankFrechetTransformer", "MadogramLeastSquares", "CompositeLikelihood"]


class RankFrechetTransformer(TransformerMixin, BaseEstimator):
    """Column-wise empirical-rank transform to the uniform or unit-Frechet scale.

    Ranks are within the data passed to ``transform``; ``fit`` only records
    the number of columns.
    """

    def __init__(self, scale="frechet"):
        self.scale = scale

    def fit(self, X, y=None):
        X = check_observations(X)
        if self.scale not in ("frechet", "uniform"):
            raise ValueError(f"unknown scale {self.scale!r}")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        if not hasattr(self, "n_features_in_"):
            raise NotFittedError("call fit first")
        X = check_observations(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        U = rank_uniform(X)
        return U if self.scale == "uniform" else -1.0 / np.log(U)


class _DependenceEstimator(BaseEstimator):
    def _config(self):
        return _fit.FitConfig(n_starts=self.n_starts, max_evals=self.max_evals,
                              xatol=self.xatol, seed=self.seed, bounds=self.bounds)

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise NotFittedError("call fit first")

    def _store(self, result):
        self.result_ = result
        self.psi_ = dict(result.psi_hat)
        self.spec_ = get_model(self.model).build(self.psi_)
        self.criterion_ = result.criterion
        return self

    def predict(self, h):
        """Fitted F-madogram at lags ``h``."""
        self._check_fitted()
        return np.asarray(madogram_curve(self.spec_, check_lags(h)), dtype=float)


class MadogramLeastSquares(_DependenceEstimator):
    """Least-squares fit of the F-madogram curve, each pair its own lag.

    Parameters
    ----------
    model : str
        Registered model name (``"MM1"``, ``"M1"``, ...).
    margin : {"empirical", "frechet"}
        Rank-transform the data, or take unit-Frechet input at face value.
    binned : int or array, optional
        Fit bin averages instead of all pairs.
    """

    def __init__(self, model="MM1", margin="empirical", binned=None, n_starts=8,
                 max_evals=2000, xatol=1e-6, seed=0, bounds=None):
        self.model = model
        self.margin = margin
        self.binned = binned
        self.n_starts = n_starts
        self.max_evals = max_evals
        self.xatol = xatol
        self.seed = seed
        self.bounds = bounds

    def fit(self, X, coords=None):
        sample = as_sample(X, coords, "unit-frechet" if self.margin == "frechet" else "raw")
        cloud = empirical_fmadogram(sample, use_true_frechet=self.margin == "frechet",
                                    keep_terms=False)
        self.cloud_ = cloud
        return self._store(_fit.fit_ls(cloud, self.model, self._config(), binned=self.binned))

    def score(self, X=None, coords=None):
        """Negative least-squares objective (higher is better)."""
        self._check_fitted()
        if X is None:
            return -self.result_.objective
        sample = as_sample(X, coords)
        cloud = empirical_fmadogram(sample, keep_terms=False)
        return -_fit.ls_objective(cloud, self.model, self.psi_)


class CompositeLikelihood(_DependenceEstimator):
    """Censored pairwise composite-likelihood fit.

    ``quantile`` sets the per-site censoring thresholds and ``delta`` the
    maximal pair distance included.  With ``clic=True`` the Godambe-based
    selection criterion is computed after fitting.
    """

    def __init__(self, model="MM1", quantile=0.9, delta=np.inf, margin="empirical",
                 censoring="four-cell", clic=False, n_starts=8, max_evals=2000, xatol=1e-6,
                 seed=0, bounds=None):
        self.model = model
        self.quantile = quantile
        self.delta = delta
        self.margin = margin
        self.censoring = censoring
        self.clic = clic
        self.n_starts = n_starts
        self.max_evals = max_evals
        self.xatol = xatol
        self.seed = seed
        self.bounds = bounds

    def fit(self, X, coords=None):
        sample = as_sample(X, coords, "unit-frechet" if self.margin == "frechet" else "raw")
        self._sample_shape = sample.data.shape
        return self._store(_fit.fit_cl(
            sample, self.model, self.quantile, self.delta, self._config(), self.margin,
            self.censoring, with_clic=self.clic,
        ))

    def score(self, X=None, coords=None):
        """Censored pairwise log-likelihood at the fitted parameters."""
        self._check_fitted()
        if X is None:
            return self.result_.objective
        sample = as_sample(X, coords)
        data = _fit.prepare_censored_pairs(sample, self.quantile, self.delta, "empirical",
                                           self.censoring)
        return _fit.cl_objective(data, self.spec_)
