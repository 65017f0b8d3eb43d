"""Flat ``key = value`` run configuration."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .types import ModelParams, as_fraction

DEFAULTS_BY_DIM = {
    1: {"L": 400.0, "N": 4096},
    2: {"L": 200.0, "N": 512},
    3: {"L": 100.0, "N": 128},
}

KEYS = ("d", "p", "lambda_re", "lambda_im", "L", "N", "dt", "t_end", "record_stride",
        "initial", "seed", "dealias")

_PROFILE = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        loc = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(loc + message)
        self.line = line


@dataclass
class RunConfig:
    d: int = 1
    p: Fraction = Fraction(2)
    lambda_re: float = -1.0
    lambda_im: float = -1.0
    L: float = 400.0
    N: int = 4096
    dt: float = 1e-3
    t_end: float = 100.0
    record_stride: int = 100
    initial: str = "gaussian(1.0, 20.0, 0.0)"
    seed: int = 0
    dealias: bool | None = None
    base_dir: Path = field(default=Path("."), repr=False)

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.d, self.p, self.lambda_re, self.lambda_im)

    def normalized(self) -> str:
        """Canonical text form, one ``key = value`` per line in fixed key order."""
        vals = {
            "d": str(self.d),
            "p": str(self.p),
            "lambda_re": repr(float(self.lambda_re)),
            "lambda_im": repr(float(self.lambda_im)),
            "L": repr(float(self.L)),
            "N": str(self.N),
            "dt": repr(float(self.dt)),
            "t_end": repr(float(self.t_end)),
            "record_stride": str(self.record_stride),
            "initial": self.initial,
            "seed": str(self.seed),
            "dealias": "auto" if self.dealias is None else ("true" if self.dealias else "false"),
        }
        return "".join(f"{k} = {vals[k]}\n" for k in KEYS)

    def as_dict(self) -> dict:
        return {k: (str(v) if isinstance(v, Fraction) else v)
                for k, v in self.__dict__.items() if k != "base_dir"}


def _bool(text: str):
    t = text.strip().lower()
    if t in ("auto", "none", ""):
        return None
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


_CONVERT = {
    "d": int,
    "p": as_fraction,
    "lambda_re": float,
    "lambda_im": float,
    "L": float,
    "N": int,
    "dt": float,
    "t_end": float,
    "record_stride": int,
    "initial": str.strip,
    "seed": int,
    "dealias": _bool,
}


def parse_profile(text: str):
    """``"gaussian(1, 2, 0)"`` -> ``("gaussian", ["1", "2", "0"])``."""
    m = _PROFILE.match(text)
    if not m:
        raise ValueError(f"malformed initial profile {text!r}")
    args = [a.strip() for a in m.group(2).split(",")] if m.group(2).strip() else []
    return m.group(1), args


def parse_config(text: str, source: str = "<config>", base_dir=".") -> RunConfig:
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _CONVERT:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key][1]})", lineno, source)
        try:
            seen[key] = (_CONVERT[key](value), lineno)
        except (ValueError, ZeroDivisionError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno, source) from None
        if key == "initial":
            try:
                name, _ = parse_profile(seen[key][0])
            except ValueError as exc:
                raise ConfigError(str(exc), lineno, source) from None
            if name not in ("gaussian", "two_bump", "file"):
                raise ConfigError(f"unknown initial profile {name!r}", lineno, source)

    d = seen.get("d", (1, None))[0]
    if d not in DEFAULTS_BY_DIM:
        raise ConfigError(f"d must be 1, 2 or 3 for simulation, got {d}", seen["d"][1], source)
    cfg = RunConfig(**{**DEFAULTS_BY_DIM[d], "base_dir": Path(base_dir)})
    for key, (value, _) in seen.items():
        setattr(cfg, key, value)
    for key, check, msg in (
        ("p", lambda v: v > 1, "p must exceed 1"),
        ("L", lambda v: v > 0, "L must be positive"),
        ("N", lambda v: v > 0 and v % 2 == 0, "N must be a positive even integer"),
        ("dt", lambda v: v > 0, "dt must be positive"),
        ("t_end", lambda v: v >= 0, "t_end must be non-negative"),
        ("record_stride", lambda v: v >= 1, "record_stride must be >= 1"),
    ):
        if not check(getattr(cfg, key)):
            raise ConfigError(msg, seen.get(key, (None, None))[1], source)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, source=str(path), base_dir=path.parent)
