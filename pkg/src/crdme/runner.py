"""
Run orchestration: table caching, single runs and parameter sweeps.

Every output file is a deterministic function of the config (including
its seed); the worker count only changes wall-clock time.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import os
import traceback
from dataclasses import dataclass
from pathlib import Path

from .bd import BdConfig, run_bd_replicates
from .checks import check_gamma_table, check_phi_table, require
from .config import SimConfig, SweepSpec
from .lattice import LatticeSpec
from .multi import MultiConfig, run_multi_replicates, simulate_multi
from .pair import PairConfig, run_replicates
from .stats import ecdf, log_divergence_fit, mean_ci, successive_diffs
from .streams import stream
from .tables import GammaTable, PhiTable, build_gamma_table, build_phi_table

__all__ = [
    "TableCache",
    "RunResult",
    "run",
    "sweep",
    "area_fraction_sweep",
    "SUMMARY_COLUMNS",
]

SUMMARY_COLUMNS = ["engine", "N", "h_um", "rho", "lambda_per_s", "replicates", "mean_s",
                   "ci_half_s", "seed", "digest"]
# replicate key reserved for the logged multiparticle trajectory
TRAJECTORY_KEY = 2**62


def _num(x) -> str:
    return "" if x is None else (f"{x:.16e}" if isinstance(x, float) else str(x))


def rho_key(rho: float) -> str:
    return f"{rho:.12g}"


class TableCache:
    """Phi and gamma tables keyed by (rho to 12 significant digits, tol).

    With a ``directory`` the tables persist as CSV and are checked against
    the table invariants when loaded.
    """

    def __init__(self, directory=None, workers: int = 1):
        self.dir = Path(directory) if directory else None
        self.workers = workers
        self._phi: dict = {}
        self._gamma: dict = {}

    def _path(self, kind, rho, tol):
        return self.dir / f"{kind}_rho{rho_key(rho)}_tol{tol:.3g}.csv"

    def phi(self, rho: float, tol: float = 1e-11) -> PhiTable:
        key = (rho_key(rho), tol)
        if key in self._phi:
            return self._phi[key]
        t = None
        if self.dir is not None:
            p = self._path("phi", rho, tol)
            if p.exists():
                t = PhiTable.from_csv(p, float(rho_key(rho)), tol)
                require(check_phi_table(t), f"cached table {p.name}")
        if t is None:
            t = build_phi_table(float(rho_key(rho)), tol, self.workers)
            require(check_phi_table(t), f"phi table for rho={rho_key(rho)}")
            if self.dir is not None:
                self.dir.mkdir(parents=True, exist_ok=True)
                _atomic(self._path("phi", rho, tol), t.to_csv)
        self._phi[key] = t
        return t

    def gamma(self, rho: float, tol: float = 1e-11) -> GammaTable:
        key = (rho_key(rho), tol)
        if key in self._gamma:
            return self._gamma[key]
        pt = self.phi(rho, tol)
        g = None
        if self.dir is not None:
            p = self._path("gamma", rho, tol)
            if p.exists():
                g = GammaTable.from_csv(p, pt.rho)
                require(check_gamma_table(g, pt), f"cached table {p.name}")
        if g is None:
            g = build_gamma_table(pt, tol, self.workers)
            require(check_gamma_table(g, pt), f"gamma table for rho={rho_key(rho)}")
            if self.dir is not None:
                _atomic(self._path("gamma", rho, tol), g.to_csv)
        self._gamma[key] = g
        return g


def _atomic(path: Path, writer) -> None:
    tmp = path.with_suffix(f".tmp{os.getpid()}")
    writer(tmp)
    os.replace(tmp, path)


@dataclass
class RunResult:
    config: SimConfig
    summary: dict
    samples: object
    out_dir: Path | None


def _lattice(cfg: SimConfig) -> LatticeSpec:
    return LatticeSpec(cfg.L, cfg.N)


def _simulate(cfg: SimConfig, cache: TableCache, out: Path | None):
    R, seed, w = cfg.replicates, cfg.master_seed, cfg.workers
    if cfg.engine in ("crdme", "rdme"):
        pc = PairConfig(cfg.D_A, cfg.D_B, _lattice(cfg), cfg.lam, cfg.rb, cfg.engine, cfg.k, cfg.t_max)
        table = None
        if cfg.engine == "crdme":
            table = cache.phi(pc.rho, cfg.tol)
            if out is not None:
                table.to_csv(out / "phi_table.csv")
        return run_replicates(pc, table, R, seed, w)
    if cfg.engine == "bd":
        bc = BdConfig(cfg.D_A, cfg.D_B, cfg.L, cfg.lam, cfg.rb, cfg.dt, cfg.t_max)
        return run_bd_replicates(bc, R, seed, w)
    # multiparticle
    t_end = math.inf if cfg.t_end is None else cfg.t_end
    mc = MultiConfig(cfg.D_A, cfg.D_B, cfg.D_C, _lattice(cfg), cfg.lam, cfg.rb, cfg.product,
                     cfg.n_A, cfg.n_B, cfg.n_C, t_end=t_end)
    pt = cache.phi(mc.rho, cfg.tol)
    gt = cache.gamma(mc.rho, cfg.tol) if cfg.product == "C" else None
    if out is not None:
        pt.to_csv(out / "phi_table.csv")
        if gt is not None:
            gt.to_csv(out / "gamma_table.csv")
    if out is not None and (R > 0 and (cfg.t_end is not None or cfg.lam > 0)):
        traj = simulate_multi(mc, (pt, gt), rng=stream(seed, TRAJECTORY_KEY))
        traj.log.to_csv(out / "events.csv")
        traj.state.to_csv(out / "final_state.csv")
    mc_first = MultiConfig(cfg.D_A, cfg.D_B, cfg.D_C, _lattice(cfg), cfg.lam, cfg.rb, cfg.product,
                           cfg.n_A, cfg.n_B, cfg.n_C,
                           t_end=math.inf if cfg.t_max is None else cfg.t_max)
    return run_multi_replicates(mc_first, (pt, gt), R, seed, w)


def _summary(cfg: SimConfig, samples) -> dict:
    n = len(samples)
    mean = ci = None
    if n and not samples.censored.any():
        mean = math.fsum(samples.times) / n
        if n >= 30:
            mean, ci = mean_ci(samples)
    lattice = cfg.engine != "bd"
    return {
        "engine": cfg.engine,
        "N": cfg.N if lattice else None,
        "h_um": cfg.L / cfg.N if lattice else None,
        "rho": cfg.rho,
        "lambda_per_s": cfg.lam,
        "replicates": n,
        "mean_s": mean,
        "ci_half_s": ci,
        "seed": cfg.master_seed,
        "digest": cfg.digest(),
    }


def write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(v) for v in r])


def run(cfg: SimConfig, out_dir=None, cache: TableCache | None = None) -> RunResult:
    """Build tables, simulate ``cfg.replicates`` replicates and write CSVs.

    Files: ``config.txt`` (canonical config, re-runnable), table CSVs for
    lattice engines, ``samples.csv``, and when ``replicates > 0`` also
    ``summary.csv`` and ``survival.csv``.
    """
    out = Path(cfg.output_dir if out_dir is None else out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = cache or TableCache(cfg.cache_dir, cfg.workers)
    (out / "config.txt").write_text(cfg.to_text())
    samples = _simulate(cfg, cache, out)
    samples.to_csv(out / "samples.csv")
    summary = _summary(cfg, samples)
    if len(samples):
        write_rows(out / "summary.csv", SUMMARY_COLUMNS, [[summary[c] for c in SUMMARY_COLUMNS]])
        rows = []
        if not samples.censored.all():
            rows = list(ecdf(samples).survival_rows())
        write_rows(out / "survival.csv", ["t_s", "survival", "lo95", "hi95"],
                    [[float(v) for v in r] for r in rows])
    return RunResult(cfg, summary, samples, out)


def area_fraction_sweep(rhos, tol: float = 1e-11, cache: TableCache | None = None):
    """Rows ``(rho, phi_00, phi_10, phi_10 / phi_00, phi_00 / (pi rho^2))``."""
    cache = cache or TableCache()
    rows = []
    for rho in rhos:
        t = cache.phi(rho, tol)
        p00, p10 = t[(0, 0)], t[(1, 0)]
        rows.append((float(rho), p00, p10, p10 / p00, p00 / (math.pi * rho * rho)))
    return rows


AREA_COLUMNS = ["rho", "phi_00", "phi_10", "ratio_10_00", "phi_00_over_pi_rho2"]


def _group_key(cfg: SimConfig, spec: SweepSpec):
    # everything that varies in the sweep except the mesh
    return tuple((k, v) for k, v in spec.axis_values(cfg).items() if k != "N")


def sweep(spec: SweepSpec, out_dir, workers: int | None = None, cache: TableCache | None = None):
    """Run every point of ``spec``; a failing point is recorded and skipped.

    Writes ``point_XXX/`` run directories plus combined ``summary.csv``,
    ``diffs.csv`` (successive mean differences along N), ``logfit.csv``
    (mean against ln(1/h)), ``area_fractions.csv`` and, when anything
    failed, ``errors.csv``. Returns ``(results, errors)``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pts = spec.points()
    if workers is not None:
        pts = [dataclasses.replace(p, workers=workers) for p in pts]
    cache = cache or TableCache(spec.base.cache_dir, pts[0].workers)
    axis_keys = [k for k, _ in spec.axes if k not in SUMMARY_COLUMNS]
    results, errors = {}, []
    for i, cfg in enumerate(pts):
        try:
            results[i] = run(cfg, out / f"point_{i:03d}", cache)
        except Exception as exc:  # isolate the point
            errors.append((i, type(exc).__name__, str(exc).replace("\n", " ")))
            traceback.print_exc()

    rows = []
    for i, cfg in enumerate(pts):
        vals = spec.axis_values(cfg)
        if i in results:
            s = results[i].summary
            rows.append([i] + [vals[k] for k in axis_keys] + [s[c] for c in SUMMARY_COLUMNS])
    write_rows(out / "summary.csv", ["point"] + axis_keys + SUMMARY_COLUMNS, rows)

    groups: dict = {}
    for i, r in results.items():
        s = r.summary
        if s["N"] is not None and s["mean_s"] is not None:
            groups.setdefault(_group_key(r.config, spec), []).append((s["h_um"], s["mean_s"], i))
    diff_rows, fit_rows = [], []
    for key, members in groups.items():
        members.sort(key=lambda m: -m[0])
        label = ";".join(f"{k}={v}" for k, v in key)
        series = [(h, m) for h, m, _ in members]
        try:
            diffs = successive_diffs(series)
        except ValueError:
            diffs = []
        prev = None
        for h, d in diffs:
            diff_rows.append([label, h, d, None if prev is None or d == 0 else prev / d])
            prev = d
        if len(series) >= 3:
            slope, icpt, r2 = log_divergence_fit(series)
            fit_rows.append([label, len(series), slope, icpt, r2])
    write_rows(out / "diffs.csv", ["group", "h_um", "abs_diff_s", "ratio_prev"], diff_rows)
    write_rows(out / "logfit.csv", ["group", "points", "slope_s", "intercept_s", "r2"], fit_rows)

    rhos = sorted({r.config.rho for r in results.values() if r.config.engine in ("crdme", "multi")})
    tol = spec.base.tol
    write_rows(out / "area_fractions.csv", AREA_COLUMNS, area_fraction_sweep(rhos, tol, cache))
    if errors:
        write_rows(out / "errors.csv", ["point", "error", "message"], errors)
    return results, errors
