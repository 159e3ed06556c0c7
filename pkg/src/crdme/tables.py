"""
Lookup tables of reaction volume fractions (phi) and product-placement
probabilities (gamma) for a fixed ratio ``rho = r_b / h``.

Only offsets in the canonical octant ``0 <= m_y <= m_x`` are integrated;
every other offset is filled in through the dihedral symmetry of the
square lattice.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .geometry import _disk_rect_area, min_voxel_distance, phi
from .quadrature import integrate_rect

__all__ = [
    "PhiTable",
    "GammaTable",
    "build_phi_table",
    "build_gamma_table",
    "canonical",
    "SYMMETRIES",
    "apply_symmetry",
    "table_cutoff",
]

# (swap, sx, sy): flip signs first, then optionally swap the axes
SYMMETRIES = tuple(itertools.product((False, True), (1, -1), (1, -1)))


def apply_symmetry(g, v):
    swap, sx, sy = g
    x, y = sx * v[0], sy * v[1]
    return (y, x) if swap else (x, y)


def invert_symmetry(g, v):
    swap, sx, sy = g
    x, y = (v[1], v[0]) if swap else (v[0], v[1])
    return (sx * x, sy * y)


def canonical(m):
    """Return ``(c, g)`` with ``c`` in the canonical octant and ``g(m) == c``."""
    sx = 1 if m[0] >= 0 else -1
    sy = 1 if m[1] >= 0 else -1
    ax, ay = abs(m[0]), abs(m[1])
    g = (ay > ax, sx, sy)
    return apply_symmetry(g, m), g


def table_cutoff(rho: float) -> int:
    return int(math.ceil(rho)) + 1


def _fmt(x: float) -> str:
    return f"{x:.16e}"


@dataclass(frozen=True)
class PhiTable:
    """Volume fractions phi_m for offsets ``|m_x|, |m_y| <= cutoff``.

    ``values[m_x + cutoff, m_y + cutoff]`` holds phi for offset m.
    """

    rho: float
    cutoff: int
    values: np.ndarray = field(repr=False)
    tol: float = 1e-11

    def __post_init__(self):
        self.values.setflags(write=False)

    def __getitem__(self, m) -> float:
        C = self.cutoff
        if abs(m[0]) > C or abs(m[1]) > C:
            return 0.0
        return float(self.values[m[0] + C, m[1] + C])

    @property
    def entries(self) -> dict:
        C = self.cutoff
        return {(mx, my): float(self.values[mx + C, my + C])
                for mx in range(-C, C + 1) for my in range(-C, C + 1)}

    def support(self) -> list:
        """Offsets with nonzero phi, sorted lexicographically."""
        return [m for m, v in sorted(self.entries.items()) if v > 0.0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mx", "my", "phi"])
            for (mx, my), v in sorted(self.entries.items()):
                w.writerow([mx, my, _fmt(v)])

    @classmethod
    def from_csv(cls, path, rho: float, tol: float = 1e-11) -> "PhiTable":
        rows = []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                rows.append((int(row["mx"]), int(row["my"]), float(row["phi"])))
        C = max(max(abs(r[0]), abs(r[1])) for r in rows)
        vals = np.zeros((2 * C + 1, 2 * C + 1))
        for mx, my, v in rows:
            vals[mx + C, my + C] = v
        return cls(rho=float(rho), cutoff=C, values=vals, tol=tol)


def _phi_job(args):
    m, rho, tol = args
    return phi(m, rho, tol)


def build_phi_table(rho: float, tol: float = 1e-11, workers: int = 1) -> PhiTable:
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    C = table_cutoff(rho)
    canon = [(mx, my) for mx in range(C + 1) for my in range(mx + 1)
             if min_voxel_distance((mx, my)) < rho]
    jobs = [(m, rho, tol) for m in canon]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            got = list(ex.map(_phi_job, jobs))
    else:
        got = [_phi_job(j) for j in jobs]
    canon_val = dict(zip(canon, got))
    vals = np.zeros((2 * C + 1, 2 * C + 1))
    for mx in range(-C, C + 1):
        for my in range(-C, C + 1):
            c, _ = canonical((mx, my))
            vals[mx + C, my + C] = canon_val.get(c, 0.0)
    return PhiTable(rho=float(rho), cutoff=C, values=vals, tol=tol)


@njit(cache=True, nogil=True)
def _placement_integrand(us, vs, rho, dx, dy):
    # |{w : |w| < rho, u + w/2 in V_0, u - w/2 in V_d}| at midpoint u
    out = np.empty(us.shape[0])
    for k in range(us.shape[0]):
        u = us[k]
        v = vs[k]
        xlo = max(-1.0 - 2.0 * u, 2.0 * u - 2.0 * dx - 1.0)
        xhi = min(1.0 - 2.0 * u, 2.0 * u - 2.0 * dx + 1.0)
        ylo = max(-1.0 - 2.0 * v, 2.0 * v - 2.0 * dy - 1.0)
        yhi = min(1.0 - 2.0 * v, 2.0 * v - 2.0 * dy + 1.0)
        out[k] = _disk_rect_area(0.0, 0.0, rho, xlo, ylo, xhi, yhi)
    return out


def _placement_breaks(d, rho, a, b):
    pts = {0.5 * d}
    for c in (-rho, rho):
        pts.update(((-1 - c) / 2, (c + 2 * d + 1) / 2, (1 - c) / 2, (c + 2 * d - 1) / 2))
    return sorted(p for p in pts if a < p < b)


def _placement_candidates(d):
    """Product offsets whose voxel overlaps the set of possible midpoints."""
    axes = []
    for dk in d:
        axes.append([dk // 2] if dk % 2 == 0 else [(dk - 1) // 2, (dk + 1) // 2])
    return [(rx, ry) for rx in axes[0] for ry in axes[1]]


def placement_mass(d, r, rho, tol):
    """Measure of pairs (x in V_0, y in V_d, |x - y| < rho) with midpoint in V_r."""
    lo = (max(r[0] - 0.5, 0.5 * d[0] - 0.5), max(r[1] - 0.5, 0.5 * d[1] - 0.5))
    hi = (min(r[0] + 0.5, 0.5 * d[0] + 0.5), min(r[1] + 0.5, 0.5 * d[1] + 0.5))
    if hi[0] <= lo[0] or hi[1] <= lo[1]:
        return 0.0

    def integrand(u, v):
        return _placement_integrand(u, v, rho, float(d[0]), float(d[1]))

    bx = _placement_breaks(d[0], rho, lo[0], hi[0])
    by = _placement_breaks(d[1], rho, lo[1], hi[1])
    return max(integrate_rect(integrand, lo, hi, tol, bx, by, rtol=1e-10), 0.0)


@dataclass(frozen=True)
class GammaTable:
    """Placement distributions ``gamma[d][r]`` for pair offsets with phi_d > 0.

    ``raw_sums[d]`` keeps the pre-normalization row sum (should be 1 up
    to quadrature error).
    """

    rho: float
    entries: dict = field(repr=False)
    raw_sums: dict = field(repr=False, default_factory=dict)

    def row(self, d) -> dict:
        return self.entries.get((int(d[0]), int(d[1])), {})

    def __getitem__(self, key) -> float:
        d, r = key
        return self.row(d).get((int(r[0]), int(r[1])), 0.0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dx", "dy", "rx", "ry", "gamma"])
            for d in sorted(self.entries):
                for r in sorted(self.entries[d]):
                    w.writerow([d[0], d[1], r[0], r[1], _fmt(self.entries[d][r])])

    @classmethod
    def from_csv(cls, path, rho: float) -> "GammaTable":
        entries: dict = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                d = (int(row["dx"]), int(row["dy"]))
                entries.setdefault(d, {})[(int(row["rx"]), int(row["ry"]))] = float(row["gamma"])
        return cls(rho=float(rho), entries=entries)


def _normalize(row: dict) -> dict:
    total = math.fsum(row.values())
    out = {r: v / total for r, v in row.items()}
    # push the rounding residue into the largest entry
    big = max(out, key=out.get)
    out[big] = 1.0 - math.fsum(v for r, v in out.items() if r != big)
    return out


def _gamma_job(args):
    d, rho, phi_d, tol = args
    return {r: placement_mass(d, r, rho, tol) for r in _placement_candidates(d)}


def build_gamma_table(phi_table: PhiTable, tol: float = 1e-11, workers: int = 1) -> GammaTable:
    rho = phi_table.rho
    support = phi_table.support()
    canon = sorted({canonical(d)[0] for d in support})
    jobs = [(d, rho, phi_table[d], tol) for d in canon]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            masses = list(ex.map(_gamma_job, jobs))
    else:
        masses = [_gamma_job(j) for j in jobs]

    canon_rows = {}
    raw = {}
    for (d, _, phi_d, _), mass in zip(jobs, masses):
        if phi_d <= 0.0:
            raise ValueError(f"offset {d} has phi = 0; gamma is undefined")
        row = {r: v / phi_d for r, v in mass.items()}
        # average over the symmetries that fix d
        stab = [g for g in SYMMETRIES if apply_symmetry(g, d) == d]
        row = {r: math.fsum(row.get(apply_symmetry(g, r), 0.0) for g in stab) / len(stab)
               for r in row}
        raw[d] = math.fsum(row.values())
        canon_rows[d] = _normalize(row)

    entries = {}
    raw_sums = {}
    for d in support:
        c, g = canonical(d)
        entries[d] = {invert_symmetry(g, r): v for r, v in canon_rows[c].items()}
        raw_sums[d] = raw[c]
    return GammaTable(rho=rho, entries=entries, raw_sums=raw_sums)
