"""Rank transforms, empirical F-madogram clouds and finite-level tail diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .exceptions import DataError, UsageError
from .simulate import SpatialSample

__all__ = [
    "DEFAULT_SECTORS",
    "MadogramCloud",
    "BinnedMadogram",
    "SectorMadogram",
    "rank_uniform",
    "empirical_cdf_transform",
    "pair_geometry",
    "empirical_fmadogram",
    "pairwise_fmadogram",
    "rank_uniform_missing",
    "bin_madogram",
    "directional_madogram",
    "empirical_chi_u",
    "empirical_chibar_u",
]

#: Direction sectors (radians from north, taken modulo pi).
DEFAULT_SECTORS = (
    (-np.pi / 8, np.pi / 8),
    (np.pi / 8, 3 * np.pi / 8),
    (3 * np.pi / 8, 5 * np.pi / 8),
    (5 * np.pi / 8, 7 * np.pi / 8),
)
DEFAULT_BINS = 15


def rank_uniform(data, allow_constant=False):
    """Column-wise average ranks divided by ``N + 1``.

    A constant column has no informative ranks; it is rejected unless
    ``allow_constant`` (every entry then maps to 1/2).
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise DataError("expected an (N, D) array")
    n = data.shape[0]
    if n < 2:
        raise DataError("at least two observations per site are needed for ranks")
    constant = np.all(data == data[0], axis=0)
    if np.any(constant) and not allow_constant:
        raise DataError(f"constant column(s) at index {np.flatnonzero(constant).tolist()}")
    return rankdata(data, method="average", axis=0) / (n + 1.0)


def empirical_cdf_transform(sample: SpatialSample, scale="uniform") -> SpatialSample:
    """Non-parametric margin transform by empirical ranks ``r / (N + 1)``.

    ``scale="frechet"`` composes with the unit-Frechet quantile ``-1 / log(u)``.
    """
    u = rank_uniform(sample.data)
    if scale == "uniform":
        return SpatialSample(sample.sites, u, "uniform")
    if scale == "frechet":
        return SpatialSample(sample.sites, -1.0 / np.log(u), "unit-frechet")
    raise UsageError(f"unknown scale {scale!r}; expected 'uniform' or 'frechet'")


def _angle_from_north(dx, dy):
    """Direction of ``(dx, dy)`` clockwise from north, reduced to ``(-pi/2, pi/2]``."""
    ang = np.arctan2(dx, dy)
    ang = np.where(ang > np.pi / 2, ang - np.pi, ang)
    return np.where(ang <= -np.pi / 2, ang + np.pi, ang)


def pair_geometry(coords):
    """Pair indices ``i < j``, distances and directions for a coordinate array."""
    coords = np.asarray(coords, dtype=float)
    i, j = np.triu_indices(coords.shape[0], k=1)
    delta = coords[j] - coords[i]
    h = np.hypot(delta[:, 0], delta[:, 1])
    return i, j, h, _angle_from_north(delta[:, 0], delta[:, 1])


@dataclass(frozen=True)
class MadogramCloud:
    """Per-pair empirical F-madogram.

    ``y_bar`` is the mean over replicates of ``|U_k(s_i) - U_k(s_j)| / 2``
    and ``y_sq_bar`` the mean of its square; ``y_terms`` optionally keeps
    the full ``N x P`` matrix.
    """

    i: np.ndarray
    j: np.ndarray
    h: np.ndarray
    angle: np.ndarray
    y_bar: np.ndarray
    y_sq_bar: np.ndarray
    n_rep: int
    y_terms: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self):
        return self.h.size

    def subset(self, mask) -> "MadogramCloud":
        mask = np.asarray(mask)
        return MadogramCloud(
            self.i[mask], self.j[mask], self.h[mask], self.angle[mask], self.y_bar[mask],
            self.y_sq_bar[mask], self.n_rep,
            None if self.y_terms is None else self.y_terms[:, mask],
        )


def empirical_fmadogram(sample: SpatialSample, use_true_frechet=False, keep_terms=True,
                        block=256) -> MadogramCloud:
    """Empirical F-madogram for every site pair of ``sample``.

    With ``use_true_frechet`` the exact margin ``exp(-1/z)`` is applied
    (requires a unit-Frechet sample); otherwise empirical ranks are used.
    """
    if sample.n_sites < 2:
        raise UsageError("at least two sites are needed")
    if use_true_frechet:
        if sample.margin != "unit-frechet":
            raise DataError("true-margin madogram needs a unit-Frechet sample")
        U = np.exp(-1.0 / sample.data)
    elif sample.margin == "uniform":
        U = np.asarray(sample.data)
    else:
        U = rank_uniform(sample.data, allow_constant=True)
    i, j, h, angle = pair_geometry(sample.sites.coords)
    n, P = U.shape[0], i.size
    y_bar = np.empty(P)
    y_sq = np.empty(P)
    terms = np.empty((n, P)) if keep_terms else None
    for start in range(0, P, block):
        sl = slice(start, min(start + block, P))
        Y = 0.5 * np.abs(U[:, i[sl]] - U[:, j[sl]])
        y_bar[sl] = Y.mean(axis=0)
        y_sq[sl] = np.mean(Y * Y, axis=0)
        if keep_terms:
            terms[:, sl] = Y
    return MadogramCloud(i, j, h, angle, y_bar, y_sq, n, terms)


def rank_uniform_missing(data):
    """Like :func:`rank_uniform` but NaN cells are ignored and stay NaN.

    Each column is ranked among its own ``n_j`` observed values and divided
    by ``n_j + 1``.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise DataError("expected an (N, D) array")
    n_obs = np.sum(~np.isnan(data), axis=0)
    if np.any(n_obs < 2):
        raise DataError(f"site(s) {np.flatnonzero(n_obs < 2).tolist()} have fewer than two values")
    ranks = rankdata(data, method="average", axis=0, nan_policy="omit")
    return ranks / (n_obs + 1.0)


def pairwise_fmadogram(data, coords) -> MadogramCloud:
    """Empirical F-madogram from pairwise-complete rows of data with gaps.

    ``n_rep`` of the result is the smallest per-pair count of shared rows.
    """
    U = rank_uniform_missing(data)
    i, j, h, angle = pair_geometry(coords)
    Y = 0.5 * np.abs(U[:, i] - U[:, j])
    both = ~np.isnan(Y)
    n = both.sum(axis=0)
    if np.any(n == 0):
        raise DataError("some site pairs share no observed rows")
    Y0 = np.where(both, Y, 0.0)
    return MadogramCloud(i, j, h, angle, Y0.sum(axis=0) / n, (Y0 * Y0).sum(axis=0) / n,
                         int(n.min()))


@dataclass(frozen=True)
class BinnedMadogram:
    """Bin-averaged madogram; ``centers`` are mean pair distances per bin."""

    centers: np.ndarray
    counts: np.ndarray
    nu_hat: np.ndarray
    edges: np.ndarray = field(repr=False)

    def smoothed(self, window=3):
        """Centered moving average of ``nu_hat`` over neighbouring bins."""
        if window < 1 or window % 2 == 0:
            raise UsageError("window must be a positive odd integer")
        half = window // 2
        out = np.empty_like(self.nu_hat)
        for k in range(out.size):
            lo, hi = max(0, k - half), min(out.size, k + half + 1)
            out[k] = self.nu_hat[lo:hi].mean()
        return out


def _bin_edges(h, bins):
    if np.ndim(bins) == 0:
        n_bins = int(bins)
        if n_bins < 1:
            raise UsageError("number of bins must be at least 1")
        lo, hi = float(h.min()), float(h.max())
        if hi <= lo:
            hi = lo + 1.0
        return np.linspace(lo, hi, n_bins + 1)
    edges = np.asarray(bins, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise UsageError("bin edges must be a strictly increasing 1-D array")
    return edges


def bin_madogram(cloud: MadogramCloud, bins=DEFAULT_BINS) -> BinnedMadogram:
    """Average ``y_bar`` over distance bins; empty bins are dropped.

    ``bins`` is a bin count (equal width over the observed distance range)
    or an array of edges; the last bin is closed on the right.
    """
    if len(cloud) == 0:
        raise UsageError("madogram cloud is empty")
    edges = _bin_edges(cloud.h, bins)
    idx = np.searchsorted(edges, cloud.h, side="right") - 1
    idx = np.where(cloud.h == edges[-1], edges.size - 2, idx)
    valid = (idx >= 0) & (idx < edges.size - 1)
    idx = idx[valid]
    n_bins = edges.size - 1
    counts = np.bincount(idx, minlength=n_bins)
    sum_h = np.bincount(idx, weights=cloud.h[valid], minlength=n_bins)
    sum_y = np.bincount(idx, weights=cloud.y_bar[valid], minlength=n_bins)
    keep = counts > 0
    return BinnedMadogram(
        centers=sum_h[keep] / counts[keep],
        counts=counts[keep],
        nu_hat=sum_y[keep] / counts[keep],
        edges=edges,
    )


def _in_sector(angle, lo, hi):
    width = hi - lo
    t = np.mod(angle - lo, np.pi)
    t = np.where(t == 0, np.pi, t)
    return t <= width


@dataclass(frozen=True)
class SectorMadogram:
    lo: float
    hi: float
    n_pairs: int
    binned: Optional[BinnedMadogram]


def directional_madogram(cloud: MadogramCloud, sectors=DEFAULT_SECTORS, bins=DEFAULT_BINS):
    """Binned madograms per direction sector ``(lo, hi]`` (angles mod pi).

    All sectors share the bin edges of the full cloud so their curves are
    directly comparable.  Sectors without pairs are reported with
    ``n_pairs == 0`` and ``binned is None``.
    """
    edges = _bin_edges(cloud.h, bins)
    out = []
    for lo, hi in sectors:
        if not hi > lo:
            raise UsageError(f"sector ({lo}, {hi}] is empty")
        mask = _in_sector(cloud.angle, lo, hi)
        n = int(mask.sum())
        binned = bin_madogram(cloud.subset(mask), edges) if n else None
        out.append(SectorMadogram(float(lo), float(hi), n, binned))
    return out


def _pair_ranks(sample, pair):
    i, j = pair
    if isinstance(i, str):
        i = sample.sites.ids.index(i)
    if isinstance(j, str):
        j = sample.sites.ids.index(j)
    if sample.margin == "uniform":
        U = np.asarray(sample.data)[:, [i, j]]
    else:
        U = rank_uniform(np.asarray(sample.data)[:, [i, j]])
    return U[:, 0], U[:, 1]


def _check_level(u):
    u = float(u)
    if not (0.0 < u < 1.0):
        raise UsageError("threshold level u must lie strictly between 0 and 1")
    return u


def empirical_chi_u(sample: SpatialSample, pair, u):
    """``2 - log P(U1 <= u, U2 <= u) / log P(U <= u)`` from rank proportions."""
    u = _check_level(u)
    u1, u2 = _pair_ranks(sample, pair)
    joint = np.mean((u1 <= u) & (u2 <= u))
    marg = 0.5 * (np.mean(u1 <= u) + np.mean(u2 <= u))
    if joint <= 0 or marg >= 1:
        raise DataError(f"chi(u) undefined at u={u}: no joint non-exceedances")
    return float(2.0 - np.log(joint) / np.log(marg))


def empirical_chibar_u(sample: SpatialSample, pair, u):
    """``2 log P(U > u) / log P(U1 > u, U2 > u) - 1`` from rank proportions."""
    u = _check_level(u)
    u1, u2 = _pair_ranks(sample, pair)
    joint = np.mean((u1 > u) & (u2 > u))
    marg = 0.5 * (np.mean(u1 > u) + np.mean(u2 > u))
    if joint <= 0 or joint >= 1:
        raise DataError(f"chibar(u) undefined at u={u}: no joint exceedances")
    return float(2.0 * np.log(marg) / np.log(joint) - 1.0)
