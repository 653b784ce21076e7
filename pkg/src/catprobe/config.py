"""Experiment configuration: flat ``key = value`` files plus flag overrides."""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .bath import DIM_CAP
from .errors import ConfigurationError

EXPERIMENTS = ("fluctuating-field", "finite-bath", "counterexample", "synthetic")
THREADS_ENV = "CATPROBE_THREADS"

ALIASES = {
    "trajectories": "n_trajectories",
    "kmax": "k_max",
    "fock_cutoff": "n_max",
    "modes": "n_modes",
}


class ConfigError(ConfigurationError):
    """Invalid configuration; carries the offending field and source line."""

    def __init__(self, message: str, field: Optional[str] = None,
                 source: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.source = source
        self.line = line
        super().__init__(message)

    def __str__(self) -> str:
        where = ""
        if self.source:
            where = f"{self.source}:{self.line}: " if self.line else f"{self.source}: "
        what = f"field '{self.field}': " if self.field else ""
        return f"{where}{what}{self.args[0]}"


def _float(lo=-math.inf, hi=math.inf, lo_open=False):
    def conv(text):
        v = float(text)
        if not math.isfinite(v):
            raise ValueError("must be finite")
        if v < lo or (lo_open and v == lo):
            raise ValueError(f"must be {'>' if lo_open else '>='} {lo:g}")
        if v > hi:
            raise ValueError(f"must be <= {hi:g}")
        return v
    return conv


def _int(lo=0, hi=None):
    def conv(text):
        try:
            v = int(str(text).strip())
        except ValueError:
            f = float(text)
            if not f.is_integer():
                raise ValueError("must be an integer") from None
            v = int(f)
        if v < lo:
            raise ValueError(f"must be >= {lo}")
        if hi is not None and v > hi:
            raise ValueError(f"must be <= {hi}")
        return v
    return conv


def _choice(options):
    def conv(text):
        text = str(text).strip()
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text
    return conv


def _t_grid(text):
    """``start:stop:num`` (inclusive linspace) or a comma-separated list."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("expected start:stop:num")
        start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
        if num < 1:
            raise ValueError("num must be >= 1")
        grid = np.linspace(start, stop, num)
    else:
        grid = np.array([float(x) for x in text.split(",") if x.strip()])
    if grid.size == 0 or np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise ValueError("times must be finite and >= 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("times must be strictly increasing")
    return text


# key -> (converter, default); None default means "derived at run time"
SCHEMA = {
    "experiment": (_choice(EXPERIMENTS), None),
    "delta": (_float(0.0), 1.0),
    "epsilon": (_float(), 0.0),
    "gamma": (_float(0.0), 1.0),
    "alpha": (_float(0.0), 0.2),
    "omega_c": (_float(0.0, lo_open=True), 5.0),
    "n_modes": (_int(1), 4),
    "n_max": (_int(1), 2),
    "beta": (_float(0.0, lo_open=True), 1.0),
    "dim_cap": (_int(2), DIM_CAP),
    "initial": (_choice(("left", "symmetric")), "left"),
    "dt": (_float(0.0, lo_open=True), None),
    "n_steps": (_int(1), None),
    "record_stride": (_int(1), None),
    "n_trajectories": (_int(2), 10000),
    "k_max": (_int(1, 16), 4),
    "t_grid": (_t_grid, "0:20:81"),
    "t_max": (_float(0.0, lo_open=True), None),
    "t_p": (_float(0.0), None),
    "asym_samples": (_int(1), 64),
    "seed": (_int(0, (1 << 64) - 1), 0),
    "kind": (_choice(("collapsed", "delocalized", "uniform")), "collapsed"),
    "n": (_int(1), 1000),
    "overlap": (_float(0.0, 1.0), 0.0),
    "nu": (_float(0.0, 1.0), 1.0 / math.sqrt(2.0)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    delta: float
    epsilon: float
    gamma: float
    alpha: float
    omega_c: float
    n_modes: int
    n_max: int
    beta: float
    dim_cap: int
    initial: str
    dt: Optional[float]
    n_steps: Optional[int]
    record_stride: Optional[int]
    n_trajectories: int
    k_max: int
    t_grid: str
    t_max: Optional[float]
    t_p: Optional[float]
    asym_samples: int
    seed: int
    kind: str
    n: int
    overlap: float
    nu: float

    def to_dict(self) -> dict:
        return asdict(self)

    def times(self) -> np.ndarray:
        text = self.t_grid
        if ":" in text:
            start, stop, num = text.split(":")
            return np.linspace(float(start), float(stop), int(num))
        return np.array([float(x) for x in text.split(",") if x.strip()])

    def dump(self) -> str:
        """Normalized ``key = value`` text; re-parsing it gives the same config."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                lines.append(f"{f.name} = {v!r}" if isinstance(v, float) else f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def canonical_key(key: str) -> str:
    k = key.strip().lower().replace("-", "_")
    return ALIASES.get(k, k)


def read_config_file(path: str) -> dict:
    """Parse a config file into ``{key: (value_text, line_number)}``."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror}", source=path) from exc
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError("expected 'key = value'", source=path, line=lineno)
        key, value = (s.strip() for s in text.split("=", 1))
        key = canonical_key(key)
        if key not in SCHEMA:
            raise ConfigError("unknown key", field=key, source=path, line=lineno)
        if key in out:
            raise ConfigError(f"duplicate key (first on line {out[key][1]})",
                              field=key, source=path, line=lineno)
        out[key] = (value, lineno)
    return out


def build_config(file_values: Optional[dict] = None, overrides: Optional[dict] = None,
                 source: Optional[str] = None) -> ExperimentConfig:
    """Merge file values and flag overrides (flags win), convert and range-check."""
    merged = {k: (v, line, source) for k, (v, line) in (file_values or {}).items()}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        key = canonical_key(key)
        if key not in SCHEMA:
            raise ConfigError("unknown key", field=key, source="command line")
        merged[key] = (value, None, "command line")
    values = {}
    for key, (conv, default) in SCHEMA.items():
        if key not in merged:
            values[key] = default
            continue
        text, line, src = merged[key]
        try:
            values[key] = conv(text)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value {text!r}: {exc}", field=key,
                              source=src, line=line) from None
    if values["experiment"] is None:
        raise ConfigError("missing experiment", field="experiment", source=source)
    cfg = ExperimentConfig(**values)
    _cross_check(cfg, merged)
    return cfg


def _cross_check(cfg: ExperimentConfig, merged: dict) -> None:
    def fail(field, msg):
        _, line, src = merged.get(field, (None, None, None))
        raise ConfigError(msg, field=field, source=src, line=line)

    if cfg.experiment == "finite-bath":
        dim = 2 * (cfg.n_max + 1) ** cfg.n_modes
        if dim > cfg.dim_cap:
            fail("n_modes" if "n_modes" in merged else "n_max",
                 f"Hilbert dimension 2*({cfg.n_max}+1)^{cfg.n_modes} = {dim} exceeds cap {cfg.dim_cap}")
    if cfg.experiment == "fluctuating-field":
        if cfg.n_steps is not None and cfg.record_stride is not None and cfg.record_stride > cfg.n_steps:
            fail("record_stride", "must not exceed n_steps")


def resolve_threads(flag: Optional[str]) -> int:
    """``--threads`` flag, else ``$CATPROBE_THREADS``, else the CPU count."""
    for value, name in ((flag, "threads"), (os.environ.get(THREADS_ENV), THREADS_ENV)):
        if value is None or value == "":
            continue
        try:
            n = int(value)
        except ValueError:
            raise ConfigError(f"invalid value {value!r}: must be an integer", field=name) from None
        if n < 1:
            raise ConfigError(f"invalid value {value!r}: must be >= 1", field=name)
        return n
    return os.cpu_count() or 1
