"""``maxmix`` command line: simulate | madogram | fit | study | transform | select.

Options come from an optional TOML file (top-level keys plus a table named
after the subcommand), then from command-line flags; ``MAXMIX_SEED``
overrides any seed.  Exit codes: 0 ok, 2 usage, 3 data/schema or I/O,
4 non-convergence, 5 internal numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as mio
from .config import config_hash, load_config, merge, resolve_seed
from .empirical import (DEFAULT_BINS, DEFAULT_SECTORS, bin_madogram, directional_madogram,
                        empirical_fmadogram, pairwise_fmadogram, rank_uniform,
                        rank_uniform_missing)
from .exceptions import ConvergenceError, DataError, MaxMixError, UsageError
from .fit import FitConfig, fit_cl, fit_ls, godambe_clic
from .registry import MODELS, get_model
from .simulate import Seed, SpatialSample, sample_sites, simulate_max_mixture
from .study import DEFAULT_PSI0, StudyConfig, run_study, write_study

logger = logging.getLogger("maxmix")

__all__ = ["main", "cmd_simulate", "cmd_madogram", "cmd_fit", "cmd_study", "cmd_transform",
           "cmd_select", "build_parser"]


# -- helpers --------------------------------------------------------------------

def _params(pairs):
    out = {}
    for item in pairs or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"parameter {item!r} is not NAME=VALUE")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"parameter {key!r}: {value!r} is not a number") from None
    return out


def _floats(text, n=None, name="value"):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        try:
            vals = [float(v) for v in str(text).split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"{name}: {text!r} is not a comma-separated list of numbers") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"{name} needs {n} numbers")
    return vals


def _names(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [str(v) for v in text]
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _resolve(args, command, overrides):
    base = load_config(getattr(args, "config", None))
    section = base.pop(command, {}) if isinstance(base.get(command), dict) else {}
    for other in ("simulate", "madogram", "fit", "study", "transform", "select"):
        if isinstance(base.get(other), dict):
            base.pop(other)
    cfg = merge(merge(base, section), overrides)
    cfg["seed"] = resolve_seed(cfg)
    return cfg


def _open_out(path):
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _fit_config(cfg):
    return FitConfig(n_starts=int(cfg.get("n_starts", 8)), max_evals=int(cfg.get("max_evals", 2000)),
                     xatol=float(cfg.get("xatol", 1e-6)), seed=int(cfg["seed"]),
                     bounds=cfg.get("bounds"))


_LOCATION_KEYS = ("out", "workers", "config", "sample", "observations", "sites")


def _digest(path):
    """SHA-256 of a file, or of the sample and sites tables of a sample directory."""
    path = Path(path)
    files = [path / mio.SAMPLE_FILE, path / mio.SITES_FILE] if path.is_dir() else [path]
    h = hashlib.sha256()
    for f in files:
        h.update(f.read_bytes())
    return h.hexdigest()


def _run_hash(cfg, **extra):
    """Config hash keyed by input contents rather than input locations."""
    inputs = {k: _digest(cfg[k]) for k in ("sample", "observations", "sites") if cfg.get(k)}
    return config_hash(dict(cfg, inputs=inputs, **extra), exclude=_LOCATION_KEYS)


# -- commands -------------------------------------------------------------------

def cmd_simulate(cfg: dict) -> Path:
    """Simulate a max-mixture sample into ``cfg["out"]`` (sample/sites CSV, meta JSON).

    Parameters not given fall back to the desk-scale design values where the
    model has them.
    """
    model = get_model(cfg.get("model", "MM1"))
    psi = {k: v for k, v in DEFAULT_PSI0.items() if k in model.params}
    psi.update(cfg.get("params", {}))
    if "a" in model.params and cfg.get("a") is not None:
        psi["a"] = float(cfg["a"])
    spec = model.build(psi)
    seed = Seed(int(cfg["seed"]))
    if cfg.get("sites"):
        sites = mio.read_sites(cfg["sites"])
    else:
        region = cfg.get("region", [0.0, 1.0, 0.0, 1.0])
        x0, x1, y0, y1 = _floats(region, 4, "region")
        sites = sample_sites(int(cfg.get("n_sites", 30)), ((x0, x1), (y0, y1)), seed.child("sites"))
    n_rep = int(cfg.get("n_rep", 500))
    h = _run_hash(cfg, params=model.as_dict(psi))
    sample = simulate_max_mixture(spec, sites, n_rep, seed.child("sample"))
    meta = {"model": model.name, "psi": model.as_dict(psi), "seed": int(cfg["seed"]),
            "n_rep": n_rep, "version": __version__}
    mio.write_sample(cfg["out"], sample, meta, h)
    return Path(cfg["out"])


def _cloud(sample_dir, true_margin=False):
    loaded, meta = mio.read_sample(sample_dir, allow_missing=True)
    if isinstance(loaded, SpatialSample):
        if true_margin and loaded.margin != "unit-frechet":
            raise DataError("--true-margin needs a unit-Frechet sample")
        return empirical_fmadogram(loaded, use_true_frechet=true_margin, keep_terms=False), meta
    if true_margin:
        raise DataError("--true-margin is not available for data with missing values")
    sites, data = loaded
    return pairwise_fmadogram(data, sites.coords), meta


def cmd_madogram(cfg: dict) -> list:
    """Binned empirical F-madogram (optionally per direction sector) as CSV rows."""
    cloud, _ = _cloud(cfg["sample"], bool(cfg.get("true_margin", False)))
    bins = cfg.get("bins", DEFAULT_BINS)
    h = _run_hash(cfg)
    if cfg.get("sectors"):
        sectors = cfg.get("sector_list", DEFAULT_SECTORS)
        rows = []
        for sec in directional_madogram(cloud, sectors, bins):
            if sec.binned is None:
                continue
            label = f"({sec.lo:.6g},{sec.hi:.6g}]"
            rows.extend((c, v, n, label) for c, v, n in
                        zip(sec.binned.centers, sec.binned.nu_hat, sec.binned.counts))
        columns = mio.CURVE_COLUMNS + ("sector",)
    else:
        b = bin_madogram(cloud, bins)
        rows = list(zip(b.centers, b.nu_hat, b.counts))
        columns = mio.CURVE_COLUMNS
    if cfg.get("out"):
        mio.write_table(_open_out(cfg["out"]), columns, rows, h)
    return rows


def _load_complete(sample_dir):
    sample, meta = mio.read_sample(sample_dir)
    return sample, meta


def _fit_one(sample, model, estimator, cfg):
    fc = _fit_config(cfg)
    margin = cfg.get("margin", "empirical")
    if estimator == "ls":
        if margin == "frechet" and sample.margin != "unit-frechet":
            raise UsageError("margin 'frechet' needs a unit-Frechet sample")
        cloud = empirical_fmadogram(sample, use_true_frechet=margin == "frechet", keep_terms=False)
        binned = cfg.get("binned")
        return fit_ls(cloud, model, fc, binned=int(binned) if binned else None)
    if estimator == "cl":
        delta = float(cfg.get("delta", math.inf))
        res = fit_cl(sample, model, float(cfg.get("quantile", 0.9)), delta, fc, margin,
                     cfg.get("censoring", "four-cell"), with_clic=False)
        res.criterion, info = godambe_clic(sample, res, model)
        res.diagnostics.update(info)
        return res
    raise UsageError(f"unknown estimator {estimator!r}; expected 'ls' or 'cl'")


def cmd_fit(cfg: dict) -> dict:
    """Fit one model; writes the FitResult JSON to ``cfg["out"]`` if given."""
    model = get_model(cfg.get("model", "MM1"))
    estimator = str(cfg.get("estimator", "ls")).lower()
    if estimator not in ("ls", "cl"):
        raise UsageError(f"unknown estimator {estimator!r}; expected 'ls' or 'cl'")
    sample, _ = _load_complete(cfg["sample"])
    h = _run_hash(cfg)
    try:
        res = _fit_one(sample, model, estimator, cfg)
    except ConvergenceError as exc:
        doc = mio.fit_result_json(exc.result, h)
        if cfg.get("out"):
            mio.write_json(_open_out(cfg["out"]), doc)
        exc.document = doc
        raise
    doc = mio.fit_result_json(res, h)
    if cfg.get("out"):
        mio.write_json(_open_out(cfg["out"]), doc)
    return doc


def cmd_study(cfg: dict):
    """Run the replicated study and write its tables into ``cfg["out"]``."""
    study_cfg = StudyConfig.from_dict({k: v for k, v in cfg.items() if k != "config"})
    h = config_hash(study_cfg.as_dict(include_workers=False))
    result = run_study(study_cfg)
    if cfg.get("out"):
        write_study(result, cfg["out"], h)
    return result


def _month_range(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        lo, hi = (int(v) for v in text)
    else:
        try:
            lo, hi = (int(v) for v in str(text).split("-"))
        except ValueError:
            raise UsageError(f"season {text!r} is not a month range like 4-9") from None
    if not (1 <= lo <= 12 and 1 <= hi <= 12):
        raise UsageError("months must lie in 1..12")
    return lo, hi


def _in_season(month, season):
    lo, hi = season
    return lo <= month <= hi if lo <= hi else (month >= lo or month <= hi)


def cmd_transform(cfg: dict) -> Path:
    """Observations + sites -> rank-transformed sample directory."""
    obs = mio.read_observations(cfg["observations"])
    sites = mio.read_sites(cfg["sites"])
    missing_sites = [s for s in obs.station_ids if s not in sites.ids]
    extra_sites = [s for s in sites.ids if s not in obs.station_ids]
    if missing_sites or extra_sites:
        raise DataError("unmatched station ids: "
                        f"without coordinates {missing_sites}; without observations {extra_sites}")
    season = _month_range(cfg.get("season"))
    keep = np.ones(len(obs.dates), dtype=bool)
    if season is not None:
        keep = np.array([_in_season(d.month, season) for d in obs.dates])
    values = obs.values[keep]
    policy = cfg.get("missing", "drop-row")
    if policy == "drop-row":
        values = values[~np.isnan(values).any(axis=1)]
        if values.shape[0] < 2:
            raise DataError("fewer than two complete rows remain after filtering")
        U = rank_uniform(values)
    elif policy == "pairwise":
        U = rank_uniform_missing(values)
    else:
        raise UsageError(f"unknown missing-data policy {policy!r}")
    order = [obs.station_ids.index(s) for s in sites.ids]
    U = U[:, order]
    scale = cfg.get("scale", "uniform")
    if scale == "frechet":
        U, margin = -1.0 / np.log(U), "unit-frechet"
    elif scale == "uniform":
        margin = "uniform"
    else:
        raise UsageError(f"unknown scale {scale!r}")
    h = _run_hash(cfg)
    meta = {"source": Path(cfg["observations"]).name, "season": season, "missing": policy,
            "n_rep": int(U.shape[0]), "version": __version__}
    d = Path(cfg["out"])
    if np.isnan(U).any():
        # gaps survive only under the pairwise policy; write without the sample container
        d.mkdir(parents=True, exist_ok=True)
        mio.write_table(d / mio.SAMPLE_FILE, ("replicate",) + sites.ids,
                        ([k] + list(r) for k, r in enumerate(U)), h)
        mio.write_sites(d / mio.SITES_FILE, sites, h)
        mio.write_json(d / mio.META_FILE, dict(meta, margin=margin, n_sites=len(sites),
                                               config_hash=h))
    else:
        mio.write_sample(d, SpatialSample(sites, U, margin), meta, h)
    return d


SELECT_COLUMNS = ("rank", "model", "criterion", "value", "objective", "converged", "status",
                  "psi_hat")


def cmd_select(cfg: dict) -> dict:
    """Fit each model and rank by MIC (ls) and/or CLIC (cl), ascending.

    Returns ``{"ls": rows, "cl": rows}`` restricted to the requested
    estimators; the two criteria are never merged into one ranking.
    """
    models = _names(cfg.get("models")) or ["MM1", "M1", "M3"]
    for m in models:
        get_model(m)
    estimator = str(cfg.get("estimator", "ls")).lower()
    estimators = {"ls": ["ls"], "cl": ["cl"], "both": ["ls", "cl"]}.get(estimator)
    if estimators is None:
        raise UsageError("estimator must be 'ls', 'cl' or 'both'")
    sample, _ = _load_complete(cfg["sample"])
    h = _run_hash(cfg)
    tables = {}
    for est in estimators:
        ok, failed = [], []
        for name in models:
            try:
                res = _fit_one(sample, get_model(name), est, cfg)
            except (ConvergenceError, MaxMixError) as exc:
                logger.warning("%s/%s failed: %s", name, est, exc)
                failed.append(("", name, "MIC" if est == "ls" else "CLIC", None, None, False,
                               f"failed: {type(exc).__name__}", ""))
                continue
            if res.criterion is None or not np.isfinite(res.criterion):
                failed.append(("", name, res.criterion_name, None, res.objective, res.converged,
                               "failed: criterion undefined", json.dumps(res.psi_hat, sort_keys=True)))
                continue
            ok.append(res)
        ok.sort(key=lambda r: (r.criterion, r.model))
        rows = [(k + 1, r.model, r.criterion_name, r.criterion, r.objective, r.converged, "ok",
                 json.dumps(r.psi_hat, sort_keys=True)) for k, r in enumerate(ok)]
        rows.extend(failed)
        tables[est] = rows
        if cfg.get("out"):
            out = Path(cfg["out"])
            out.mkdir(parents=True, exist_ok=True)
            mio.write_table(out / f"select_{est}.csv", SELECT_COLUMNS,
                            [[("" if v is None else v) for v in row] for row in rows], h)
    return tables


# -- argument parsing -------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="maxmix", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True):
        sp.add_argument("--config", help="TOML configuration file")
        if seed:
            sp.add_argument("--seed", type=int)

    s = sub.add_parser("simulate", help="simulate a max-mixture sample")
    common(s)
    s.add_argument("--model", choices=sorted(MODELS))
    s.add_argument("--param", action="append", metavar="NAME=VALUE")
    s.add_argument("--a", type=float, help="mixing weight (overrides --param a=...)")
    s.add_argument("--n-sites", type=int)
    s.add_argument("--n-rep", type=int)
    s.add_argument("--region", help="x0,x1,y0,y1")
    s.add_argument("--sites", help="sites CSV (id,x,y) instead of random sites")
    s.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("madogram", help="binned empirical F-madogram")
    common(s, seed=False)
    s.add_argument("--sample", required=True, help="sample directory")
    s.add_argument("--bins", type=int)
    s.add_argument("--sectors", action="store_true", help="one curve per direction sector")
    s.add_argument("--true-margin", action="store_true", help="use exp(-1/z) instead of ranks")
    s.add_argument("--out", help="curve CSV (default: stdout)")

    s = sub.add_parser("fit", help="fit one model")
    common(s)
    s.add_argument("--sample", required=True)
    s.add_argument("--model", choices=sorted(MODELS))
    s.add_argument("--estimator", choices=("ls", "cl"))
    _fit_flags(s)
    s.add_argument("--out", help="FitResult JSON (default: stdout)")

    s = sub.add_parser("study", help="replicated simulation study")
    common(s)
    s.add_argument("--model", choices=sorted(MODELS))
    s.add_argument("--param", action="append", metavar="NAME=VALUE")
    s.add_argument("--a-grid", help="comma-separated mixing weights")
    s.add_argument("--n-sites", type=int)
    s.add_argument("--n-rep", type=int)
    s.add_argument("--J", type=int, dest="J")
    s.add_argument("--estimators", help="ls, cl or ls,cl")
    s.add_argument("--n-starts", type=int)
    s.add_argument("--cl-n-starts", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--out", required=True)

    s = sub.add_parser("transform", help="observations + sites -> rank-transformed sample")
    common(s, seed=False)
    s.add_argument("--observations", required=True)
    s.add_argument("--sites", required=True)
    s.add_argument("--season", help="month range, e.g. 4-9")
    s.add_argument("--missing", choices=("drop-row", "pairwise"))
    s.add_argument("--scale", choices=("uniform", "frechet"))
    s.add_argument("--out", required=True)

    s = sub.add_parser("select", help="rank candidate models by MIC / CLIC")
    common(s)
    s.add_argument("--sample", required=True)
    s.add_argument("--models", help="comma-separated model names")
    s.add_argument("--estimator", choices=("ls", "cl", "both"))
    _fit_flags(s)
    s.add_argument("--out", help="directory for select_<estimator>.csv")
    return p


def _fit_flags(s):
    s.add_argument("--quantile", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--margin", choices=("empirical", "frechet"))
    s.add_argument("--censoring", choices=("four-cell", "two-cell"))
    s.add_argument("--binned", type=int)
    s.add_argument("--n-starts", type=int)
    s.add_argument("--max-evals", type=int)


def _overrides(args):
    skip = {"command", "verbose", "config", "param", "a_grid", "estimators"}
    out = {k: v for k, v in vars(args).items() if k not in skip}
    if getattr(args, "param", None):
        out["params" if args.command == "simulate" else "psi0"] = _params(args.param)
    if getattr(args, "a_grid", None):
        out["a_grid"] = _floats(args.a_grid, name="a-grid")
    if getattr(args, "estimators", None):
        out["estimators"] = _names(args.estimators)
    for flag in ("sectors", "true_margin"):
        if out.get(flag) is False:
            out.pop(flag)
    return out


def _print_rows(columns, rows, stream):
    stream.write(",".join(columns) + "\n")
    for row in rows:
        stream.write(",".join(mio._fmt(v) if v is not None else "" for v in row) + "\n")


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"maxmix: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args, args.command, _overrides(args))
        if args.command == "simulate":
            print(cmd_simulate(cfg))
        elif args.command == "madogram":
            rows = cmd_madogram(cfg)
            if not cfg.get("out"):
                cols = mio.CURVE_COLUMNS + (("sector",) if cfg.get("sectors") else ())
                _print_rows(cols, rows, sys.stdout)
        elif args.command == "fit":
            doc = cmd_fit(cfg)
            if not cfg.get("out"):
                print(json.dumps(doc, indent=2, sort_keys=True))
        elif args.command == "study":
            result = cmd_study(cfg)
            _print_rows(("a_true", "estimator", "param", "n", "bias", "rmse"),
                        result.rmse_table(), sys.stdout)
        elif args.command == "transform":
            print(cmd_transform(cfg))
        elif args.command == "select":
            for est, rows in cmd_select(cfg).items():
                print(f"# {est}")
                _print_rows(SELECT_COLUMNS, rows, sys.stdout)
    except MaxMixError as exc:
        print(f"maxmix: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"maxmix: I/O error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
