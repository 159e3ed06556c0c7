"""
Exact stochastic simulation of one A and one B molecule on the lattice.

Two reaction models share one kernel: the CRDME, where molecules in
voxels ``i`` and ``j`` react at rate ``lam * phi[j - i]``, and the
classical RDME, where they react only when in the same voxel, at rate
``k / h^2``. Both are fed to the kernel as a table of reaction rates by
voxel offset.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .lattice import DIRECTIONS, LatticeSpec, Voxel, allowed_moves, hop_rate
from .parallel import map_replicates
from .stats import ReactionTimeSamples

__all__ = [
    "PairConfig",
    "PairState",
    "pair_propensities",
    "reaction_rate_table",
    "simulate_pair",
    "simulate_pair_race",
    "run_replicates",
]

ENGINES = ("crdme", "rdme")


@dataclass(frozen=True)
class PairConfig:
    D_A: float
    D_B: float
    lattice: LatticeSpec
    lam: float
    rb: float
    engine: str = "crdme"
    k: float | None = None
    t_max: float | None = None

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if not self.rb > 0:
            raise ValueError("rb must be positive")
        if self.D_A < 0 or self.D_B < 0 or self.lam < 0:
            raise ValueError("diffusion constants and lam must be nonnegative")
        if self.engine == "rdme" and not self.rdme_k > 0:
            raise ValueError("the RDME needs a positive bimolecular rate k")
        if self.rb >= self.lattice.L:
            warnings.warn(f"reaction radius {self.rb} is not smaller than the domain {self.lattice.L}",
                          stacklevel=2)

    @property
    def rho(self) -> float:
        return self.rb / self.lattice.h

    @property
    def rdme_k(self) -> float:
        """Macroscopic rate constant used by the RDME (defaults to ``lam pi rb^2``)."""
        return self.lam * math.pi * self.rb**2 if self.k is None else self.k


@dataclass
class PairState:
    a: Voxel
    b: Voxel
    t: float = 0.0


def reaction_rate_table(cfg: PairConfig, table=None) -> tuple[np.ndarray, int]:
    """Reaction rate by voxel offset, ``rates[m + C]``, and the cutoff ``C``."""
    if cfg.engine == "rdme":
        rates = np.array([[cfg.rdme_k / cfg.lattice.h**2]])
        return rates, 0
    if table is None:
        raise ValueError("the CRDME needs a phi table")
    if not math.isclose(table.rho, cfg.rho, rel_tol=1e-9):
        raise ValueError(f"phi table built for rho={table.rho}, config has rho={cfg.rho}")
    return cfg.lam * np.asarray(table.values), table.cutoff


def pair_propensities(s: PairState, cfg: PairConfig, table=None) -> list:
    """All channels leaving state ``s`` as ``(rate, action)`` pairs.

    Actions are ``("hop", species, direction, target)`` or ``("react",)``.
    """
    out = []
    for species, v, D in (("A", s.a, cfg.D_A), ("B", s.b, cfg.D_B)):
        r = hop_rate(D, cfg.lattice)
        if r > 0:
            for name, t in allowed_moves(v, cfg.lattice):
                out.append((r, ("hop", species, name, t)))
    rates, C = reaction_rate_table(cfg, table)
    dx, dy = s.b[0] - s.a[0], s.b[1] - s.a[1]
    if abs(dx) <= C and abs(dy) <= C and rates[dx + C, dy + C] > 0:
        out.append((float(rates[dx + C, dy + C]), ("react",)))
    return out


_DX = np.array([d[1] for d in DIRECTIONS], dtype=np.int64)
_DY = np.array([d[2] for d in DIRECTIONS], dtype=np.int64)


@njit(cache=True)
def _n_moves(ix, iy, N):
    return (ix > 0) + (ix < N - 1) + (iy > 0) + (iy < N - 1)


@njit(cache=True)
def _kth_move(ix, iy, N, k, dxs, dys):
    # k-th allowed direction in DIRECTIONS order
    for d in range(4):
        nx = ix + dxs[d]
        ny = iy + dys[d]
        if 0 <= nx < N and 0 <= ny < N:
            if k == 0:
                return nx, ny
            k -= 1
    return ix, iy


@njit(cache=True)
def _pair_rate(ax, ay, bx, by, rates, C):
    dx = bx - ax
    dy = by - ay
    if -C <= dx <= C and -C <= dy <= C:
        return rates[dx + C, dy + C]
    return 0.0


@njit(cache=True)
def _uniform_voxel(N, rng):
    ix = min(int(rng.random() * N), N - 1)
    iy = min(int(rng.random() * N), N - 1)
    return ix, iy


@njit(cache=True)
def _pair_direct(N, hop_a, hop_b, rates, C, t_max, rng, dxs, dys):
    ax, ay = _uniform_voxel(N, rng)
    bx, by = _uniform_voxel(N, rng)
    t = 0.0
    while True:
        ha = hop_a * _n_moves(ax, ay, N)
        hb = hop_b * _n_moves(bx, by, N)
        rr = _pair_rate(ax, ay, bx, by, rates, C)
        total = rr + ha + hb
        if total <= 0.0:
            return t_max, True
        t += rng.standard_exponential() / total
        if t >= t_max:
            return t_max, True
        u = rng.random() * total
        if u < rr:
            return t, False
        u -= rr
        if u < ha:
            k = min(int(u / hop_a), _n_moves(ax, ay, N) - 1)
            ax, ay = _kth_move(ax, ay, N, k, dxs, dys)
        else:
            u -= ha
            k = min(int(u / hop_b), _n_moves(bx, by, N) - 1)
            bx, by = _kth_move(bx, by, N, k, dxs, dys)


@njit(cache=True)
def _pair_race(N, hop_a, hop_b, rates, C, t_max, rng, dxs, dys):
    # hop clock and reaction clock drawn separately; the earlier one fires
    ax, ay = _uniform_voxel(N, rng)
    bx, by = _uniform_voxel(N, rng)
    t = 0.0
    while True:
        ha = hop_a * _n_moves(ax, ay, N)
        hb = hop_b * _n_moves(bx, by, N)
        rr = _pair_rate(ax, ay, bx, by, rates, C)
        t_hop = np.inf
        if ha + hb > 0.0:
            t_hop = rng.standard_exponential() / (ha + hb)
        t_rx = np.inf
        if rr > 0.0:
            t_rx = rng.standard_exponential() / rr
        if t_rx < t_hop:
            t += t_rx
            if t >= t_max:
                return t_max, True
            return t, False
        if t_hop == np.inf:
            return t_max, True
        t += t_hop
        if t >= t_max:
            return t_max, True
        u = rng.random() * (ha + hb)
        if u < ha:
            k = min(int(u / hop_a), _n_moves(ax, ay, N) - 1)
            ax, ay = _kth_move(ax, ay, N, k, dxs, dys)
        else:
            u -= ha
            k = min(int(u / hop_b), _n_moves(bx, by, N) - 1)
            bx, by = _kth_move(bx, by, N, k, dxs, dys)


def _kernel_args(cfg: PairConfig, table, t_max):
    rates, C = reaction_rate_table(cfg, table)
    tm = cfg.t_max if t_max is None else t_max
    tm = math.inf if tm is None else float(tm)
    return (cfg.lattice.N, hop_rate(cfg.D_A, cfg.lattice), hop_rate(cfg.D_B, cfg.lattice),
            np.ascontiguousarray(rates, dtype=np.float64), C, tm)


def simulate_pair(cfg: PairConfig, table, rng: np.random.Generator, t_max=None):
    """First reaction time of one realization.

    Both molecules start in independent, uniformly chosen voxels. Returns
    ``(time, censored)``; a censored realization reports ``t_max`` (or
    ``inf`` if the pair can never react and no cap was given).
    """
    N, ha, hb, rates, C, tm = _kernel_args(cfg, table, t_max)
    t, cens = _pair_direct(N, ha, hb, rates, C, tm, rng, _DX, _DY)
    return float(t), bool(cens)


def simulate_pair_race(cfg: PairConfig, table, rng: np.random.Generator, t_max=None):
    """Same law as :func:`simulate_pair`, using competing hop and reaction clocks."""
    N, ha, hb, rates, C, tm = _kernel_args(cfg, table, t_max)
    t, cens = _pair_race(N, ha, hb, rates, C, tm, rng, _DX, _DY)
    return float(t), bool(cens)


def _pair_sampler(payload, rng):
    args, race = payload
    kernel = _pair_race if race else _pair_direct
    return kernel(*args, rng, _DX, _DY)


def run_replicates(cfg: PairConfig, table, R: int, master_seed: int, workers: int = 1,
                   t_max=None, race: bool = False, metadata=None) -> ReactionTimeSamples:
    """``R`` independent first-reaction times; replicate ``r`` uses stream ``(master_seed, r)``."""
    args = _kernel_args(cfg, table, t_max)
    times, cens = map_replicates(_pair_sampler, (args, race), R, master_seed, workers)
    meta = {"engine": cfg.engine, "N": cfg.lattice.N, "rho": cfg.rho}
    meta.update(metadata or {})
    return ReactionTimeSamples(times, cens, master_seed=master_seed, metadata=meta)
