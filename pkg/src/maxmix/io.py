"""File formats: observations, sites, samples, curves, estimates and fit results.

Every CSV written here starts with a ``# config_hash: ...`` comment line when
a hash is supplied; readers skip leading ``#`` lines.  Floats are written
with ``repr`` so a read/write round trip is exact.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io as _io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import DataError
from .simulate import SiteSet, SpatialSample

__all__ = [
    "Observations",
    "read_observations",
    "read_sites",
    "write_sites",
    "write_sample",
    "read_sample",
    "write_table",
    "read_table",
    "write_json",
    "fit_result_json",
    "fit_schema",
    "CURVE_COLUMNS",
    "ESTIMATE_COLUMNS",
]

CURVE_COLUMNS = ("h", "nu_hat", "count")
ESTIMATE_COLUMNS = ("a_true", "replicate", "estimator", "param", "value", "error")
SAMPLE_FILE = "sample.csv"
SITES_FILE = "sites.csv"
META_FILE = "meta.json"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _data_lines(path):
    """Yield ``(line_number, row)`` for non-comment CSV rows."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"{path}: file not found") from None
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not UTF-8 text ({exc})") from None
    reader = csv.reader(_io.StringIO(text))
    for row in reader:
        if row and row[0].lstrip().startswith("#"):
            continue
        if not row or all(not c.strip() for c in row):
            continue
        yield reader.line_num, [c.strip() for c in row]


def _float(text, path, line, col):
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"{path}:{line}: column {col!r}: {text!r} is not a number") from None
    if not math.isfinite(v):
        raise DataError(f"{path}:{line}: column {col!r}: value must be finite")
    return v


def write_table(path, columns, rows, config_hash: Optional[str] = None):
    """Write ``rows`` (sequences aligned with ``columns``) as CSV."""
    buf = _io.StringIO()
    if config_hash:
        buf.write(f"# config_hash: {config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_table(path, required=None):
    """Header plus rows as a list of dicts of strings."""
    lines = list(_data_lines(path))
    if not lines:
        raise DataError(f"{path}: empty file")
    header = lines[0][1]
    missing = [c for c in (required or ()) if c not in header]
    if missing:
        raise DataError(f"{path}:{lines[0][0]}: missing column(s) {missing}")
    out = []
    for line, row in lines[1:]:
        if len(row) != len(header):
            raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        out.append(dict(zip(header, row)))
    return out


# -- raw observations and sites ----------------------------------------------

@dataclass(frozen=True)
class Observations:
    dates: tuple
    station_ids: tuple
    values: np.ndarray  # NaN marks a missing cell


def read_observations(path) -> Observations:
    """Daily observations: first column ISO date, one column per station."""
    lines = list(_data_lines(path))
    if not lines:
        raise DataError(f"{path}: empty file")
    header_line, header = lines[0]
    stations = tuple(header[1:])
    if len(stations) < 2:
        raise DataError(f"{path}:{header_line}: need a date column and at least two stations")
    if len(set(stations)) != len(stations):
        raise DataError(f"{path}:{header_line}: duplicate station ids")
    dates, values = [], []
    for line, row in lines[1:]:
        if len(row) != len(header):
            raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        try:
            dates.append(_dt.date.fromisoformat(row[0]))
        except ValueError:
            raise DataError(f"{path}:{line}: {row[0]!r} is not an ISO date") from None
        values.append([np.nan if not c else _float(c, path, line, stations[k])
                       for k, c in enumerate(row[1:])])
    if not values:
        raise DataError(f"{path}: no observation rows")
    return Observations(tuple(dates), stations, np.array(values, dtype=float))


def read_sites(path) -> SiteSet:
    rows = read_table(path, required=("id", "x", "y"))
    if not rows:
        raise DataError(f"{path}: no sites")
    ids = [r["id"] for r in rows]
    coords = [[_float(r["x"], path, n + 2, "x"), _float(r["y"], path, n + 2, "y")]
              for n, r in enumerate(rows)]
    return SiteSet(tuple(ids), np.array(coords))


def write_sites(path, sites: SiteSet, config_hash=None):
    write_table(path, ("id", "x", "y"),
                [(i, c[0], c[1]) for i, c in zip(sites.ids, sites.coords)], config_hash)


# -- samples -------------------------------------------------------------------

def write_sample(directory, sample: SpatialSample, meta: dict, config_hash=None):
    """Write ``sample.csv``, ``sites.csv`` and ``meta.json`` into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_table(d / SAMPLE_FILE, ("replicate",) + sample.sites.ids,
                ([k] + list(row) for k, row in enumerate(sample.data)), config_hash)
    write_sites(d / SITES_FILE, sample.sites, config_hash)
    meta = dict(meta, margin=sample.margin, n_rep=sample.n_rep, n_sites=sample.n_sites)
    if config_hash:
        meta["config_hash"] = config_hash
    write_json(d / META_FILE, meta)


def read_sample(directory, allow_missing=False):
    """Inverse of :func:`write_sample`; returns ``(sample, meta)``.

    With ``allow_missing`` blank cells become NaN and a raw array (not a
    :class:`SpatialSample`) is returned in place of the sample.
    """
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"{d}: sample directory not found")
    meta_path = d / META_FILE
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    sites = read_sites(d / SITES_FILE)
    lines = list(_data_lines(d / SAMPLE_FILE))
    if not lines:
        raise DataError(f"{d / SAMPLE_FILE}: empty file")
    header_line, header = lines[0]
    ids = tuple(header[1:])
    unmatched = sorted(set(ids) ^ set(sites.ids))
    if unmatched:
        raise DataError(f"{d / SAMPLE_FILE}:{header_line}: ids not matched with sites: {unmatched}")
    rows = []
    for line, row in lines[1:]:
        if len(row) != len(header):
            raise DataError(f"{d / SAMPLE_FILE}:{line}: expected {len(header)} fields, got {len(row)}")
        vals = []
        for k, c in enumerate(row[1:]):
            if not c:
                if not allow_missing:
                    raise DataError(f"{d / SAMPLE_FILE}:{line}: missing value for {ids[k]}")
                vals.append(np.nan)
            else:
                vals.append(_float(c, d / SAMPLE_FILE, line, ids[k]))
        rows.append(vals)
    if not rows:
        raise DataError(f"{d / SAMPLE_FILE}: no replicates")
    order = [ids.index(i) for i in sites.ids]
    data = np.array(rows, dtype=float)[:, order]
    if allow_missing and np.isnan(data).any():
        return (sites, data), meta
    return SpatialSample(sites, data, meta.get("margin", "raw")), meta


# -- JSON -----------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def fit_result_json(result, config_hash: str) -> dict:
    """FitResult as the published JSON document.

    ``criterion`` is ``{"name": ..., "value": ...}``; the same value is also
    exposed as a top-level ``mic`` (least squares) or ``clic`` (composite
    likelihood) key so consumers can branch on presence.
    """
    doc = {
        "model": result.model,
        "estimator": result.estimator,
        "psi_hat": result.psi_hat,
        "objective": result.objective,
        "criterion": {"name": result.criterion_name, "value": result.criterion},
        result.criterion_name.lower(): result.criterion,
        "converged": result.converged,
        "n_starts": result.n_starts,
        "n_evals": result.n_evals,
        "seed": result.seed,
        "config_hash": config_hash,
        "diagnostics": {k: v for k, v in result.diagnostics.items() if k != "bounds"},
        "bounds": {k: list(v) for k, v in result.diagnostics.get("bounds", {}).items()},
        "trace": [{"psi": list(map(float, t.psi)), "value": float(t.value),
                   "n_evals": int(t.n_evals), "converged": bool(t.converged)}
                  for t in result.trace],
    }
    return _jsonable(doc)


def fit_schema() -> dict:
    path = Path(__file__).with_name("schemas") / "fit_result.schema.json"
    return json.loads(path.read_text(encoding="utf-8"))
