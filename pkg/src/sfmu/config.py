"""Flat key=value run configuration and manifest writing."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import SfmuError

CONFIG_KEYS_HELP = """\
features=PATH            train-split SFUFEAT1 file (required)
test_features=PATH       test-split SFUFEAT1 file (required)
residuals=PATH           SFUJRES1 residual targets (mixed-linear runs)
loss=quadratic|logistic  convex loss (default quadratic)
lambda=FLOAT             L2 regularization strength (default 0.01)
forget_fraction=FLOAT    fraction of train data to forget (default 0.1)
split_seed=INT           forget-subset draw seed (default 0)
split_dir=PATH           read split index files instead of drawing
m=INT                    perturbation probe count (default 500)
eta=FLOAT                probe scale; blank = per-loss default
probe_seed=INT           probe sampling seed (default 0)
hessian_source=exact|estimated   removal-update Hessian (default estimated)
sigma=FLOAT              noise scale (default 0)
noise_seed=INT           noise draw seed (default 0)
noise_convention=variance|stddev   sigma^2*xi vs sigma*xi (default variance)
tau=FLOAT                ridge floor added before inversion (default 0)
block=auto|on|off        d x d block-mode estimation (default auto)
normalize=0|1            rescale rows to unit max-norm at load (default 0)
mia_seed=INT             MIA subsample/fold seed (default 0)
"""


class ConfigError(SfmuError):
    """Malformed or inconsistent run configuration (usage error)."""


@dataclass
class RunConfig:
    features: str = ""
    test_features: str = ""
    residuals: str = ""
    loss: str = "quadratic"
    lam: float = 0.01
    forget_fraction: float = 0.1
    split_seed: int = 0
    split_dir: str = ""
    m: int = 500
    eta: float | None = None
    probe_seed: int = 0
    hessian_source: str = "estimated"
    sigma: float = 0.0
    noise_seed: int = 0
    noise_convention: str = "variance"
    tau: float = 0.0
    block: str = "auto"
    normalize: bool = False
    mia_seed: int = 0
    raw: dict = field(default_factory=dict)

    def block_flag(self) -> bool | None:
        return {"auto": None, "on": True, "off": False}[self.block]


_KEY_TO_FIELD = {
    "lambda": "lam",
}
_INT_FIELDS = {"split_seed", "m", "probe_seed", "noise_seed", "mia_seed"}
_FLOAT_FIELDS = {"lam", "forget_fraction", "sigma", "tau"}


def parse_config_text(text: str) -> RunConfig:
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        name = _KEY_TO_FIELD.get(key, key)
        if name not in known or name == "raw":
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        cfg.raw[key] = value
        if value == "":
            continue
        if name in _INT_FIELDS:
            setattr(cfg, name, int(value))
        elif name in _FLOAT_FIELDS:
            setattr(cfg, name, float(value))
        elif name == "eta":
            cfg.eta = float(value)
        elif name == "normalize":
            cfg.normalize = value not in ("0", "false", "no")
        else:
            setattr(cfg, name, value)
    _validate(cfg)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def _validate(cfg: RunConfig) -> None:
    if cfg.loss not in ("quadratic", "logistic"):
        raise ConfigError(f"loss must be quadratic or logistic, got {cfg.loss!r}")
    if cfg.lam < 0:
        raise ConfigError("lambda must be >= 0")
    if cfg.hessian_source not in ("exact", "estimated"):
        raise ConfigError(f"bad hessian_source {cfg.hessian_source!r}")
    if cfg.noise_convention not in ("variance", "stddev"):
        raise ConfigError(f"bad noise_convention {cfg.noise_convention!r}")
    if cfg.block not in ("auto", "on", "off"):
        raise ConfigError(f"bad block {cfg.block!r}")
    if cfg.m < 1:
        raise ConfigError("m must be >= 1")


def write_manifest(out_dir: str | Path, cfg: RunConfig, command: str,
                   extra: dict | None = None) -> Path:
    """Config echo plus versions and seeds; rerunning a manifest must
    reproduce byte-identical artifacts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"command={command}"]
    for f in fields(RunConfig):
        if f.name == "raw":
            continue
        value = getattr(cfg, f.name)
        key = "lambda" if f.name == "lam" else f.name
        lines.append(f"{key}={'' if value is None else value}")
    lines.append(f"python={sys.version.split()[0]}")
    lines.append(f"numpy={np.__version__}")
    for key, value in (extra or {}).items():
        lines.append(f"{key}={value}")
    path = out_dir / "manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path
