"""Square lattice with reflecting walls: indexing, hop rates, reactive partners."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

__all__ = ["LatticeSpec", "Voxel", "DIRECTIONS", "hop_rate", "allowed_moves", "reactive_partners"]

# order matters: the simulation kernels enumerate moves the same way
DIRECTIONS = (("-x", -1, 0), ("+x", 1, 0), ("-y", 0, -1), ("+y", 0, 1))


class Voxel(NamedTuple):
    ix: int
    iy: int


@dataclass(frozen=True)
class LatticeSpec:
    """``N x N`` voxels covering ``[0, L]^2`` (lengths in micrometers)."""

    L: float
    N: int

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def n_voxels(self) -> int:
        return self.N * self.N

    def contains(self, v) -> bool:
        return 0 <= v[0] < self.N and 0 <= v[1] < self.N

    def index(self, v) -> int:
        """Row-major flat index ``ix + N * iy``."""
        return v[0] + self.N * v[1]

    def voxel(self, k: int) -> Voxel:
        return Voxel(k % self.N, k // self.N)

    def center(self, v) -> tuple[float, float]:
        h = self.h
        return ((v[0] + 0.5) * h, (v[1] + 0.5) * h)


def hop_rate(D: float, spec: LatticeSpec) -> float:
    """Jump rate ``D / h^2`` to each in-domain neighbor."""
    if D < 0:
        raise ValueError(f"D must be nonnegative, got {D}")
    return D / spec.h**2


def allowed_moves(v, spec: LatticeSpec) -> list:
    """In-domain axis neighbors of ``v`` as ``(direction, Voxel)`` pairs.

    Hops across the wall have rate zero, which is how the reflecting
    (zero-flux) boundary is realized on the lattice.
    """
    out = []
    for name, dx, dy in DIRECTIONS:
        t = Voxel(v[0] + dx, v[1] + dy)
        if spec.contains(t):
            out.append((name, t))
    return out


def reactive_partners(v, table, spec: LatticeSpec) -> list:
    """In-domain voxels ``j`` with ``phi[j - v] > 0``, paired with that fraction.

    Near the walls the free-space fractions are kept as they are; partners
    outside the domain are simply absent.
    """
    out = []
    C = table.cutoff
    for mx in range(-C, C + 1):
        for my in range(-C, C + 1):
            f = table[(mx, my)]
            if f <= 0.0:
                continue
            j = Voxel(v[0] + mx, v[1] + my)
            if spec.contains(j):
                out.append((j, f))
    return out
