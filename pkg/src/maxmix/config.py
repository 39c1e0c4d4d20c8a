"""TOML configuration, command-line overrides and the configuration hash."""

from __future__ import annotations

import copy
import hashlib
import json
import os
import sys
from pathlib import Path

from .exceptions import UsageError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

__all__ = ["load_config", "merge", "config_hash", "resolve_seed", "SEED_ENV"]

SEED_ENV = "MAXMIX_SEED"


def load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    try:
        with p.open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"{p}: configuration file not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{p}: invalid TOML ({exc})") from None


def merge(base: dict, overrides: dict) -> dict:
    """Recursive merge; ``None`` in ``overrides`` means "not given"."""
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


def resolve_seed(cfg: dict, default=0) -> int:
    """Seed precedence: environment variable, then config/CLI, then default."""
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            seed = int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    else:
        seed = int(cfg.get("seed", default))
    if seed < 0:
        raise UsageError("seed must be nonnegative")
    return seed


def config_hash(cfg: dict, exclude=("out", "workers")) -> str:
    """First 16 hex digits of SHA-256 over the canonical JSON of ``cfg``.

    Output locations and worker counts do not change results and are left out.
    """
    clean = {k: v for k, v in cfg.items() if k not in exclude}
    text = json.dumps(clean, sort_keys=True, separators=(",", ":"), default=_default)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _default(obj):
    if isinstance(obj, float):
        return repr(obj)
    if isinstance(obj, Path):
        return str(obj)
    try:
        return float(obj)
    except (TypeError, ValueError):
        return str(obj)
