"""Command-line entry point: ``crdme {phi-table,gamma-table,simulate,sweep,validate}``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 sweep finished with failed points.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .checks import TableInvariantError, check_gamma_table, check_phi_table
from .config import KEYS, ConfigError, parse_config, parse_sweep
from .geometry import phi as phi_entry
from .multi import PropensityIndexError
from .quadrature import QuadratureError
from .runner import AREA_COLUMNS, TableCache, write_rows, area_fraction_sweep, rho_key, run, sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 1, 2, 3
NUMERIC_ERRORS = (QuadratureError, PropensityIndexError, TableInvariantError, FloatingPointError)
# keys with dedicated flags
_SPECIAL = {"seed": "seed", "workers": "workers", "output_dir": "out"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _rhos(text: str) -> list[float]:
    try:
        vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None
    if not vals or any(not v > 0 or not math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("rho values must be positive")
    return vals


def _common(p, out_default="."):
    p.add_argument("--seed", help="master seed (64-bit)")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--out", default=None, help=f"output directory (default {out_default})")


def _config_flags(p):
    for key in KEYS:
        if key in _SPECIAL:
            continue
        p.add_argument(f"--{key}", dest=f"cfg_{key}", metavar="VALUE", help=f"set {key}")


def _overrides(args) -> dict:
    ov = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    for key, attr in _SPECIAL.items():
        v = getattr(args, attr, None)
        if v is not None:
            ov[key] = v
    return ov


def _read(path):
    return "" if path is None else Path(path).read_text(encoding="utf-8")


def cmd_phi_table(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    cache = TableCache(workers=args.workers or 1)
    for rho in args.rho:
        t = cache.phi(rho, args.tol)
        path = out / f"phi_rho{rho_key(rho)}.csv"
        t.to_csv(path)
        print(path)
    if len(args.rho) > 1:
        path = out / "area_fractions.csv"
        write_rows(path, AREA_COLUMNS, area_fraction_sweep(args.rho, args.tol, cache))
        print(path)
    return EXIT_OK


def cmd_gamma_table(args) -> int:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    cache = TableCache(workers=args.workers or 1)
    for rho in args.rho:
        g = cache.gamma(rho, args.tol)
        path = out / f"gamma_rho{rho_key(rho)}.csv"
        g.to_csv(path)
        print(path)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = parse_config(_read(args.config), _overrides(args))
    res = run(cfg)
    s = res.summary
    mean = "undefined" if s["mean_s"] is None else f"{s['mean_s']:.6e} s"
    ci = "" if s["ci_half_s"] is None else f" +/- {s['ci_half_s']:.2e}"
    print(f"{cfg.engine}: {s['replicates']} replicates, mean {mean}{ci} -> {res.out_dir}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    ov = _overrides(args)
    ov.pop("output_dir", None)
    spec = parse_sweep(_read(args.spec), ov)
    out = args.out or spec.base.output_dir
    results, errors = sweep(spec, out, workers=args.workers)
    print(f"{len(results)} points done, {len(errors)} failed -> {out}")
    for i, name, msg in errors:
        print(f"  point {i}: {name}: {msg}", file=sys.stderr)
    return EXIT_PARTIAL if errors else EXIT_OK


def cmd_validate(args) -> int:
    cache = TableCache(workers=args.workers or 1)
    ok = True
    for rho in args.rho:
        t = cache.phi(rho, args.tol)
        checks = check_phi_table(t)
        if rho <= 1.0:
            want = math.pi * rho**2 - 8.0 * rho**3 / 3.0 + rho**4 / 2.0
            err = abs(t[(0, 0)] - want)
            checks.append(("same-voxel fraction matches closed form", err <= 1e-10, f"error {err:.3e}"))
        direct = phi_entry((1, 0), rho)
        checks.append(("cached entry matches direct quadrature", abs(direct - t[(1, 0)]) <= 1e-12,
                       f"{direct!r} vs {t[(1, 0)]!r}"))
        checks.extend(check_gamma_table(cache.gamma(rho, args.tol), t))
        for name, passed, detail in checks:
            ok &= passed
            print(f"rho={rho_key(rho)}  {'PASS' if passed else 'FAIL'}  {name}  ({detail})")
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crdme", description="Convergent reaction-diffusion master equation toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("phi-table", help="volume-fraction tables for one or more rho")
    q.add_argument("--rho", type=_rhos, required=True, help="comma-separated rho = rb/h values")
    q.add_argument("--tol", type=float, default=1e-11)
    _common(q)
    q.set_defaults(func=cmd_phi_table)

    q = sub.add_parser("gamma-table", help="product-placement tables for one or more rho")
    q.add_argument("--rho", type=_rhos, required=True)
    q.add_argument("--tol", type=float, default=1e-11)
    _common(q)
    q.set_defaults(func=cmd_gamma_table)

    q = sub.add_parser("simulate", help="run one configuration")
    q.add_argument("config", nargs="?", help="config file (key = value lines)")
    _config_flags(q)
    _common(q, "out")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("sweep", help="run the cross product of comma-separated values")
    q.add_argument("spec", nargs="?", help="sweep file")
    _config_flags(q)
    _common(q, "out")
    q.set_defaults(func=cmd_sweep)

    q = sub.add_parser("validate", help="check table invariants")
    q.add_argument("--rho", type=_rhos, default=[0.5, 1.25, 3.2])
    q.add_argument("--tol", type=float, default=1e-11)
    _common(q)
    q.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
