"""Flat key=value configuration files and generator manifests."""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from dotenv import dotenv_values, load_dotenv

from .errors import ConfigError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

ENV_PREFIX = "HYDRA"
L_STAR_KEYS = ("l_star", "lstar", "optimal_value", "f_star")


def normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def load_environment() -> None:
    """Pick up HYDRA_* variables from a .env file in the working directory."""
    load_dotenv(Path.cwd() / ".env")


def load_config(path: PathLike) -> dict[str, str]:
    """Read a key=value file; keys are normalized, empty values dropped."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for key, value in dotenv_values(path).items():
        if value is None or value == "":
            continue
        values[normalize_key(key)] = value
    logger.debug("Loaded %d config values from %s", len(values), path)
    return values


def build_default_map(
    values: Mapping[str, str], commands: Mapping[str, Iterable[str]]
) -> dict[str, dict[str, str]]:
    """Route config values to every command that has a parameter of that name."""
    default_map: dict[str, dict[str, str]] = {}
    used = set()
    for name, params in commands.items():
        params = set(params)
        section = {k: v for k, v in values.items() if k in params}
        used.update(section)
        if section:
            default_map[name] = section
    unknown = sorted(set(values) - used)
    if unknown:
        logger.warning("Ignoring unknown config keys: %s", ", ".join(unknown))
    return default_map


# -------------------- MANIFEST --------------------

def read_manifest(path: PathLike) -> dict[str, str]:
    return load_config(path)


def manifest_float(values: Mapping[str, str], key: str) -> Optional[float]:
    raw = values.get(normalize_key(key))
    if raw is None:
        return None
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"manifest value '{key}' is not a number: {raw!r}") from None


def manifest_l_star(values: Mapping[str, str]) -> Optional[float]:
    """Optimal value L* recorded in a manifest, if any."""
    for key in L_STAR_KEYS:
        v = manifest_float(values, key)
        if v is not None:
            if not math.isfinite(v):
                raise ConfigError(f"manifest L* is not finite: {v}")
            return v
    return None
