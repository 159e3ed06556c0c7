"""Invariant checks for volume-fraction and placement tables."""

from __future__ import annotations

import math

from .geometry import min_voxel_distance
from .tables import GammaTable, PhiTable, SYMMETRIES, apply_symmetry

__all__ = ["Check", "check_phi_table", "check_gamma_table", "TableInvariantError", "require"]

SUM_RTOL = 1e-8
SYM_ATOL = 1e-12


class TableInvariantError(ValueError):
    pass


class Check(tuple):
    """``(name, ok, detail)``."""

    def __new__(cls, name, ok, detail=""):
        return super().__new__(cls, (name, bool(ok), detail))

    name = property(lambda s: s[0])
    ok = property(lambda s: s[1])
    detail = property(lambda s: s[2])


def check_phi_table(t: PhiTable) -> list[Check]:
    rho = t.rho
    ent = t.entries
    out = []
    total = math.fsum(ent.values())
    rel = abs(total / (math.pi * rho * rho) - 1.0)
    out.append(Check("phi sums to pi rho^2", rel <= SUM_RTOL, f"relative error {rel:.3e}"))
    bad = [m for m, v in ent.items() if not 0.0 <= v <= 1.0]
    out.append(Check("phi in [0, 1]", not bad, f"{len(bad)} entries outside"))
    worst = 0.0
    for m, v in ent.items():
        for g in SYMMETRIES:
            worst = max(worst, abs(v - t[apply_symmetry(g, m)]))
    out.append(Check("phi has square symmetry", worst <= SYM_ATOL, f"max asymmetry {worst:.3e}"))
    stray = [m for m, v in ent.items() if v > 0.0 and min_voxel_distance(m) >= rho]
    out.append(Check("phi vanishes beyond the reaction radius", not stray, f"{len(stray)} stray entries"))
    return out


def check_gamma_table(g: GammaTable, phi_table: PhiTable | None = None) -> list[Check]:
    out = []
    worst = max((abs(math.fsum(row.values()) - 1.0) for row in g.entries.values()), default=0.0)
    out.append(Check("gamma rows sum to 1", worst <= 1e-15, f"max deviation {worst:.3e}"))
    if g.raw_sums:
        raw = max(abs(v - 1.0) for v in g.raw_sums.values())
        out.append(Check("gamma mass before normalization", raw <= SUM_RTOL, f"max deviation {raw:.3e}"))
    neg = sum(1 for row in g.entries.values() for v in row.values() if v < 0.0)
    out.append(Check("gamma nonnegative", neg == 0, f"{neg} negative entries"))
    if g.rho <= math.sqrt(2.0):
        v = g[((0, 0), (0, 0))]
        out.append(Check("same-voxel product stays put", v == 1.0, f"gamma = {v!r}"))
    if phi_table is not None:
        missing = [d for d in phi_table.support() if not g.row(d)]
        out.append(Check("gamma covers the phi support", not missing, f"{len(missing)} rows missing"))
    return out


def require(checks, what: str) -> None:
    failed = [c for c in checks if not c.ok]
    if failed:
        msg = "; ".join(f"{c.name}: {c.detail}" for c in failed)
        raise TableInvariantError(f"{what} failed invariants: {msg}")
