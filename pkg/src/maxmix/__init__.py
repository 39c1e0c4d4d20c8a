"""Max-mixture spatial extremes: closed forms, exact simulation, F-madogram and fitting."""

from .estimators import CompositeLikelihood, MadogramLeastSquares, RankFrechetTransformer
from .exceptions import (ConvergenceError, DataError, MaxMixError, NumericError,
                         ParameterDomainError, UsageError)
from .fit import FitConfig, FitResult, fit_cl, fit_ls, mic, rmse
from .madogram import madogram_curve, madogram_ims, madogram_mm, madogram_ms
from .models import (TEG, BrownResnick, ModelSpec, Smith, bivariate_cdf_mm, chi, chibar,
                     dependence_profile, inverse_transform_g)
from .registry import MODELS, get_model
from .simulate import Seed, SiteSet, SpatialSample, sample_sites, simulate_max_mixture

try:
    from importlib.metadata import version as _version

    __version__ = _version("artifact")
except Exception:  # not installed
    __version__ = "0.0.0"

__all__ = [
    "BrownResnick", "CompositeLikelihood", "ConvergenceError", "FitConfig", "FitResult",
    "MadogramLeastSquares", "RankFrechetTransformer", "DataError", "MODELS", "MaxMixError", "ModelSpec",
    "NumericError", "ParameterDomainError", "Seed", "SiteSet", "Smith", "SpatialSample", "TEG",
    "UsageError", "bivariate_cdf_mm", "chi", "chibar", "dependence_profile", "get_model",
    "inverse_transform_g", "madogram_curve", "madogram_ims", "madogram_mm", "madogram_ms",
    "sample_sites", "simulate_max_mixture", "fit_cl", "fit_ls", "mic", "rmse",
]
