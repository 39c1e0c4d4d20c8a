"""Seeded simulation of max-stable, inverted max-stable and max-mixture fields.

Max-stable fields are drawn exactly on finite site sets with the
extremal-functions algorithm of Dombry, Engelke and Oesting (2016): for each
site ``k`` a Poisson sequence of spectral functions normalized at ``s_k`` is
generated until no further function can exceed the current maximum at
``s_k``.  No truncation parameter is involved, so margins are exactly unit
Frechet up to floating point.

The per-family "spectral function normalized at site k" samplers are

* Smith: ``exp(<s - s_k, N> - |s - s_k|^2 / (2 sigma))``, ``N ~ N(0, I / sigma)``
  (the Smith model is Brown-Resnick with a linear Gaussian process);
* Brown-Resnick: ``exp(G(s) - G(s_k) - gamma(s - s_k))`` with ``G`` a stationary
  Gaussian field of covariance ``sigma2 * exp(-h / theta)``;
* TEG: ``max(eps(s), 0) / eps(s_k) * 1{|s - c| <= r}`` where ``eps(s_k)`` is
  Rayleigh distributed, ``eps`` elsewhere is Gaussian conditional on it, and
  the disk center ``c`` is uniform on the disk of radius ``r`` around ``s_k``.

Replicates are vectorized: all ``n_rep`` rows advance together and finished
rows drop out of the active set.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import DataError, ParameterDomainError, UsageError
from .models import TEG, BrownResnick, MaxStableFamily, ModelSpec, Smith, inverse_transform_g

__all__ = [
    "Seed",
    "SiteSet",
    "SpatialSample",
    "sample_sites",
    "simulate_smith",
    "simulate_brown_resnick",
    "simulate_teg",
    "simulate_max_stable",
    "invert_max_stable",
    "simulate_inverse_max_stable",
    "simulate_max_mixture",
]

_JITTER = 1e-10
MARGINS = ("unit-frechet", "uniform", "raw")


def _tag(key):
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ParameterDomainError("seed keys must be nonnegative")
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


@dataclass(frozen=True)
class Seed:
    """Master seed plus a derivation path of replicate indices and purpose tags.

    ``Seed(7).child(3, "x")`` always yields the same stream; string tags are
    hashed with CRC-32 so derivation does not depend on ``PYTHONHASHSEED``.
    """

    master: int
    path: tuple = ()

    def __post_init__(self):
        master = int(self.master)
        if not (0 <= master < 2**64):
            raise ParameterDomainError("master seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "master", master)
        object.__setattr__(self, "path", tuple(_tag(k) for k in self.path))

    def child(self, *keys) -> "Seed":
        return Seed(self.master, self.path + tuple(_tag(k) for k in keys))

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.master, spawn_key=self.path))


def as_seed(seed) -> Seed:
    if isinstance(seed, Seed):
        return seed
    if seed is None:
        raise UsageError("an explicit seed is required")
    return Seed(int(seed))


@dataclass(frozen=True)
class SiteSet:
    ids: tuple
    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float, copy=True)
        if coords.ndim != 2 or coords.shape[1] != 2 or coords.shape[0] < 1:
            raise DataError("coordinates must be a (D, 2) array with D >= 1")
        if not np.all(np.isfinite(coords)):
            raise DataError("coordinates must be finite")
        ids = tuple(str(i) for i in self.ids) if self.ids is not None else ()
        if not ids:
            ids = tuple(f"s{i:03d}" for i in range(coords.shape[0]))
        if len(ids) != coords.shape[0]:
            raise DataError("number of site ids does not match coordinates")
        if len(set(ids)) != len(ids):
            raise DataError("site ids must be unique")
        coords.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_coords(cls, coords, ids=None):
        return cls(ids if ids is not None else (), coords)

    def __len__(self):
        return self.coords.shape[0]

    def distances(self):
        return cdist(self.coords, self.coords)


@dataclass(frozen=True)
class SpatialSample:
    """``N x D`` observations at ``D`` sites.

    ``margin="unit-frechet"`` promises strictly positive data with unit
    Frechet margins, ``"uniform"`` values in ``(0, 1)`` (rank scale), and
    ``"raw"`` makes no margin claim.
    """

    sites: SiteSet
    data: np.ndarray = field(repr=False)
    margin: str = "unit-frechet"

    def __post_init__(self):
        data = np.array(self.data, dtype=float, copy=True)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] != len(self.sites):
            raise DataError("data must be an (N, D) array matching the site set")
        if self.margin not in MARGINS:
            raise DataError(f"unknown margin {self.margin!r}")
        if not np.all(np.isfinite(data)):
            raise DataError("data must be finite")
        if self.margin == "unit-frechet" and np.any(data <= 0):
            raise DataError("unit-Frechet data must be strictly positive")
        if self.margin == "uniform" and (np.any(data <= 0) or np.any(data >= 1)):
            raise DataError("uniform-scale data must lie strictly inside (0, 1)")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_rep(self):
        return self.data.shape[0]

    @property
    def n_sites(self):
        return self.data.shape[1]


def sample_sites(n, region=((0.0, 1.0), (0.0, 1.0)), seed=0) -> SiteSet:
    """``n`` points i.i.d. uniform on the rectangle ``((x0, x1), (y0, y1))``."""
    n = int(n)
    if n < 1:
        raise UsageError("number of sites must be at least 1")
    (x0, x1), (y0, y1) = region
    if not (x1 > x0 and y1 > y0):
        raise UsageError("region must be a nondegenerate rectangle")
    rng = as_seed(seed).rng()
    coords = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
    return SiteSet.from_coords(coords)


def _psd_sqrt(cov):
    """Square-root factor ``L`` with ``L @ L.T == cov``."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(cov + _JITTER * np.eye(cov.shape[0]))
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(cov)
        return U * np.sqrt(np.clip(w, 0.0, None))


class _SmithSampler:
    def __init__(self, family, coords):
        self.coords = coords
        self.sigma = family.sigma

    def __call__(self, k, m, rng):
        lag = self.coords - self.coords[k]
        N = rng.standard_normal((m, 2)) / np.sqrt(self.sigma)
        return np.exp(N @ lag.T - np.sum(lag * lag, axis=1) / (2.0 * self.sigma))


class _BrownResnickSampler:
    def __init__(self, family, coords):
        d = cdist(coords, coords)
        self.L = _psd_sqrt(family.sigma2 * np.exp(-d / family.theta))
        self.gamma = family.semivariogram(d)

    def __call__(self, k, m, rng):
        G = rng.standard_normal((m, self.L.shape[0])) @ self.L.T
        return np.exp(G - G[:, [k]] - self.gamma[k])


class _TEGSampler:
    def __init__(self, family, coords):
        if family.alpha_kind != "disk":
            raise ParameterDomainError(
                "only alpha_kind='disk' TEG fields can be simulated in the plane"
            )
        d = cdist(coords, coords)
        self.coords = coords
        self.r = family.r
        self.corr = np.exp(-d / family.theta)
        self.L = _psd_sqrt(self.corr)

    def __call__(self, k, m, rng):
        D = self.L.shape[0]
        radius = np.sqrt(-2.0 * np.log1p(-rng.random(m)))  # Rayleigh, size-biased eps(s_k)
        free = rng.standard_normal((m, D)) @ self.L.T
        rho = self.corr[k]
        eps = free - free[:, [k]] * rho + radius[:, None] * rho
        ang = rng.uniform(0.0, 2.0 * np.pi, m)
        rad = self.r * np.sqrt(rng.random(m))
        center = self.coords[k] + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        inside = ((self.coords[None, :, 0] - center[:, [0]]) ** 2
                  + (self.coords[None, :, 1] - center[:, [1]]) ** 2) <= self.r**2
        Y = np.where(inside, np.maximum(eps, 0.0) / radius[:, None], 0.0)
        Y[:, k] = 1.0
        return Y


_SAMPLERS = {Smith: _SmithSampler, BrownResnick: _BrownResnickSampler, TEG: _TEGSampler}


def _extremal_functions(sampler, n_sites, n_rep, rng):
    Z = np.zeros((n_rep, n_sites))
    for k in range(n_sites):
        arrivals = rng.exponential(size=n_rep)
        zeta = 1.0 / arrivals
        idx = np.flatnonzero(zeta > Z[:, k])
        while idx.size:
            cand = zeta[idx, None] * sampler(k, idx.size, rng)
            if k > 0:
                ok = np.all(cand[:, :k] < Z[idx, :k], axis=1)
            else:
                ok = np.ones(idx.size, dtype=bool)
            rows = idx[ok]
            Z[rows] = np.maximum(Z[rows], cand[ok])
            arrivals[idx] += rng.exponential(size=idx.size)
            zeta[idx] = 1.0 / arrivals[idx]
            idx = idx[zeta[idx] > Z[idx, k]]
    return Z


def _unique_sites(sites):
    coords, inverse = np.unique(sites.coords, axis=0, return_inverse=True)
    return coords, np.asarray(inverse).reshape(-1)


def _check_rep(n_rep):
    n_rep = int(n_rep)
    if n_rep < 1:
        raise UsageError("n_rep must be at least 1")
    return n_rep


def simulate_max_stable(family: MaxStableFamily, sites: SiteSet, n_rep, seed) -> SpatialSample:
    """Exact unit-Frechet max-stable sample for any supported family."""
    n_rep = _check_rep(n_rep)
    try:
        sampler_cls = _SAMPLERS[type(family)]
    except KeyError:
        raise ParameterDomainError(f"no simulator for family {type(family).__name__}") from None
    coords, inverse = _unique_sites(sites)
    rng = as_seed(seed).rng()
    Z = _extremal_functions(sampler_cls(family, coords), coords.shape[0], n_rep, rng)
    return SpatialSample(sites, Z[:, inverse], "unit-frechet")


def simulate_smith(family: Smith, sites, n_rep, seed) -> SpatialSample:
    if not isinstance(family, Smith):
        raise ParameterDomainError("simulate_smith expects a Smith family")
    return simulate_max_stable(family, sites, n_rep, seed)


def simulate_brown_resnick(family: BrownResnick, sites, n_rep, seed) -> SpatialSample:
    if not isinstance(family, BrownResnick):
        raise ParameterDomainError("simulate_brown_resnick expects a BrownResnick family")
    return simulate_max_stable(family, sites, n_rep, seed)


def simulate_teg(family: TEG, sites, n_rep, seed) -> SpatialSample:
    if not isinstance(family, TEG):
        raise ParameterDomainError("simulate_teg expects a TEG family")
    return simulate_max_stable(family, sites, n_rep, seed)


def invert_max_stable(sample: SpatialSample) -> SpatialSample:
    """Apply ``g`` elementwise; unit-Frechet margins are preserved."""
    if sample.margin != "unit-frechet":
        raise DataError("inversion requires a unit-Frechet sample")
    return SpatialSample(sample.sites, inverse_transform_g(sample.data), "unit-frechet")


def simulate_inverse_max_stable(family, sites, n_rep, seed) -> SpatialSample:
    return invert_max_stable(simulate_max_stable(family, sites, n_rep, seed))


def simulate_max_mixture(spec: ModelSpec, sites: SiteSet, n_rep, seed) -> SpatialSample:
    """``Z = max(a X, (1 - a) Y)`` with independent ``X`` and inverted ``Y``.

    ``X`` is drawn from ``seed.child("x")`` and ``Y`` from ``seed.child("y")``,
    so ``a = 1`` reproduces ``simulate_max_stable(x_family, ..., seed.child("x"))``.
    """
    seed = as_seed(seed)
    n_rep = _check_rep(n_rep)
    if not spec.has_y:
        return simulate_max_stable(spec.x_family, sites, n_rep, seed.child("x"))
    Y = simulate_inverse_max_stable(spec.y_family, sites, n_rep, seed.child("y"))
    if not spec.has_x:
        return Y
    X = simulate_max_stable(spec.x_family, sites, n_rep, seed.child("x"))
    Z = np.maximum(spec.a * X.data, (1.0 - spec.a) * Y.data)
    return SpatialSample(sites, Z, "unit-frechet")
