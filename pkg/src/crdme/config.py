"""
Line-oriented run configuration.

A config is UTF-8 text of ``key = value`` lines; ``#`` starts a comment.
Lengths are in micrometres, times in seconds, diffusion constants in
um^2/s. A sweep file uses the same syntax, and a comma-separated value
turns that key into a sweep axis.
"""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import math
from dataclasses import dataclass

from .streams import SEED_MASK, derive_seed

__all__ = ["ConfigError", "SimConfig", "SweepSpec", "parse_config", "parse_sweep", "KEYS"]

ENGINES = ("crdme", "rdme", "bd", "multi")
LATTICE_ENGINES = ("crdme", "rdme", "multi")


class ConfigError(ValueError):
    pass


def _float(s):
    return float(s)


def _int(s):
    v = float(s)
    if not v.is_integer():
        raise ValueError(f"{s} is not an integer")
    return int(v)


def _seed(s):
    return int(s, 0)


def _str(s):
    return s


# config key -> (SimConfig field, converter)
KEYS = {
    "engine": ("engine", _str),
    "D": (None, _float),
    "D_A": ("D_A", _float),
    "D_B": ("D_B", _float),
    "D_C": ("D_C", _float),
    "L": ("L", _float),
    "N": ("N", _int),
    "lambda": ("lam", _float),
    "rb": ("rb", _float),
    "k": ("k", _float),
    "dt": ("dt", _float),
    "replicates": ("replicates", _int),
    "seed": ("master_seed", _seed),
    "t_max": ("t_max", _float),
    "t_end": ("t_end", _float),
    "output_dir": ("output_dir", _str),
    "workers": ("workers", _int),
    "tol": ("tol", _float),
    "n_A": ("n_A", _int),
    "n_B": ("n_B", _int),
    "n_C": ("n_C", _int),
    "product": ("product", _str),
    "cache_dir": ("cache_dir", _str),
}
REQUIRED = ("lambda", "replicates")
# fields that do not change any output byte
_RUNTIME_ONLY = ("output_dir", "workers", "cache_dir")


@dataclass(frozen=True)
class SimConfig:
    engine: str = "crdme"
    D_A: float = 10.0
    D_B: float = 10.0
    D_C: float = 10.0
    L: float = 0.2
    N: int | None = None
    lam: float = 0.0
    rb: float = 1e-3
    k: float | None = None
    dt: float | None = None
    replicates: int = 0
    master_seed: int = 0
    t_max: float | None = None
    t_end: float | None = None
    output_dir: str = "out"
    workers: int = 1
    tol: float = 1e-11
    n_A: int = 1
    n_B: int = 1
    n_C: int = 0
    product: str = "C"
    cache_dir: str | None = None

    def __post_init__(self):
        errs = []
        if self.engine not in ENGINES:
            errs.append(f"engine: must be one of {', '.join(ENGINES)}, got {self.engine!r}")
        if self.engine in LATTICE_ENGINES and self.N is None:
            errs.append(f"N: required for engine {self.engine}")
        if self.N is not None and self.N < 1:
            errs.append(f"N: must be >= 1, got {self.N}")
        if self.engine == "bd" and self.dt is None:
            errs.append("dt: required for engine bd")
        if self.dt is not None and not self.dt > 0:
            errs.append(f"dt: must be positive, got {self.dt}")
        for name in ("D_A", "D_B", "D_C", "lam"):
            if not getattr(self, name) >= 0:
                errs.append(f"{'lambda' if name == 'lam' else name}: must be nonnegative")
        for name in ("L", "rb", "tol"):
            if not getattr(self, name) > 0:
                errs.append(f"{name}: must be positive, got {getattr(self, name)}")
        if self.k is not None and not self.k > 0:
            errs.append(f"k: must be positive, got {self.k}")
        if self.replicates < 0:
            errs.append(f"replicates: must be >= 0, got {self.replicates}")
        if self.workers < 1:
            errs.append(f"workers: must be >= 1, got {self.workers}")
        if not 0 <= self.master_seed <= SEED_MASK:
            errs.append("seed: must fit in 64 unsigned bits")
        for name in ("t_max", "t_end"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                errs.append(f"{name}: must be positive, got {v}")
        if min(self.n_A, self.n_B, self.n_C) < 0:
            errs.append("n_A, n_B, n_C: must be nonnegative")
        if self.product not in ("C", "none"):
            errs.append(f"product: must be C or none, got {self.product!r}")
        if self.lam == 0 and self.t_max is None and self.replicates > 0:
            errs.append("t_max: required when lambda = 0, since no reaction can occur")
        if errs:
            raise ConfigError("; ".join(errs))

    @property
    def h(self) -> float | None:
        return None if self.N is None else self.L / self.N

    @property
    def rho(self) -> float | None:
        """``rb N / L`` for lattice engines."""
        return None if self.N is None or self.engine == "bd" else self.rb * self.N / self.L

    def to_text(self) -> str:
        """Canonical config text; parses back to an equal config."""
        lines = []
        for key, (fname, _) in KEYS.items():
            if fname is None or fname in _RUNTIME_ONLY:
                continue
            v = getattr(self, fname)
            if v is None:
                continue
            lines.append(f"{key} = {v!r}" if isinstance(v, float) else f"{key} = {v}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        """Short hash of everything that determines the outputs."""
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def _scan(text: str) -> dict:
    """``key -> (raw value, line number)``; rejects unknown and duplicate keys."""
    seen: dict = {}
    for no, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {no}: expected 'key = value', got {body!r}")
        key, val = (p.strip() for p in body.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {no}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {no}: duplicate key {key!r} (first set on line {seen[key][1]})")
        if not val:
            raise ConfigError(f"line {no}: empty value for {key!r}")
        seen[key] = (val, no)
    return seen


def _build(raw: dict) -> SimConfig:
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    kw = {}
    for key, (val, no) in raw.items():
        fname, conv = KEYS[key]
        try:
            v = conv(val)
        except ValueError:
            where = f"line {no}: " if no else ""
            raise ConfigError(f"{where}{key}: expected a number, got {val!r}") from None
        if fname is None:
            for name in ("D_A", "D_B", "D_C"):
                kw.setdefault(name, v)
        else:
            kw[fname] = v
    # specific diffusion constants win over D regardless of order
    for name in ("D_A", "D_B", "D_C"):
        if name in raw:
            kw[name] = KEYS[name][1](raw[name][0])
    return SimConfig(**kw)


def _merge(text: str, overrides: dict | None) -> dict:
    raw = _scan(text)
    for key, val in (overrides or {}).items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        raw[key] = (str(val), 0)
    return raw


def parse_config(text: str, overrides: dict | None = None) -> SimConfig:
    """Parse and validate config text; ``overrides`` replace keys from the text."""
    raw = _merge(text, overrides)
    for key, (val, no) in raw.items():
        if "," in val:
            raise ConfigError(f"line {no}: {key} has several values; use a sweep")
    return _build(raw)


@dataclass(frozen=True)
class SweepSpec:
    """A base config and the cross product of its axes."""

    base: SimConfig
    axes: tuple  # ((key, (raw values...)), ...)
    fixed: tuple  # ((key, raw value), ...)

    def points(self) -> list[SimConfig]:
        """One config per axis combination; point ``i`` gets seed ``derive_seed(seed, i)``."""
        keys = [k for k, _ in self.axes]
        out = []
        combos = itertools.product(*[v for _, v in self.axes]) if self.axes else [()]
        for i, combo in enumerate(combos):
            raw = {k: (v, 0) for k, v in self.fixed}
            raw.update({k: (v, 0) for k, v in zip(keys, combo)})
            cfg = _build(raw)
            out.append(dataclasses.replace(cfg, master_seed=derive_seed(self.base.master_seed, i)))
        return out

    def axis_values(self, cfg: SimConfig) -> dict:
        return {k: _display(getattr(cfg, KEYS[k][0]) if KEYS[k][0] else cfg.D_A) for k, _ in self.axes}


def _display(v):
    return repr(v) if isinstance(v, float) else str(v)


def parse_sweep(text: str, overrides: dict | None = None) -> SweepSpec:
    raw = _merge(text, overrides)
    axes = []
    fixed = []
    for key, (val, no) in raw.items():
        parts = [p.strip() for p in val.split(",")]
        if any(not p for p in parts):
            raise ConfigError(f"line {no}: empty entry in the value list for {key!r}")
        if len(parts) > 1:
            axes.append((key, tuple(parts)))
        else:
            fixed.append((key, val))
    first = dict(fixed)
    first.update({k: v[0] for k, v in axes})
    base = _build({k: (v, 0) for k, v in first.items()})
    spec = SweepSpec(base=base, axes=tuple(axes), fixed=tuple(fixed))
    n = math.prod(len(v) for _, v in axes)
    if n > 10_000:
        raise ConfigError(f"sweep has {n} points; refusing more than 10000")
    spec.points()  # validate every point up front
    return spec
