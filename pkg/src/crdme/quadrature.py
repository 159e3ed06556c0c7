"""Globally adaptive tensor-product Gauss-Kronrod cubature on rectangles."""

from __future__ import annotations

import heapq
import math

import numpy as np

__all__ = ["QuadratureError", "integrate_rect", "integrate_unit_square"]


# error floor for the relative criterion; keeps vanishing integrals finite
ABS_FLOOR = 1e-18


class QuadratureError(RuntimeError):
    """Raised when the requested tolerance cannot be met."""


# Kronrod 15-point abscissae/weights with the embedded 7-point Gauss rule
# (QUADPACK qk15 constants).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
W_KRONROD = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
W_GAUSS = np.zeros(15)
W_GAUSS[[1, 3, 5]] = _WG[:3]
W_GAUSS[7] = _WG[3]
W_GAUSS[[9, 11, 13]] = _WG[2::-1]

_WK2 = np.outer(W_KRONROD, W_KRONROD).ravel()
_WG2 = np.outer(W_GAUSS, W_GAUSS).ravel()
_NX = np.repeat(NODES, 15)
_NY = np.tile(NODES, 15)


def _eval_cells(f, cells):
    """Kronrod estimate and |Kronrod - Gauss| for each (x0, y0, x1, y1)."""
    c = np.asarray(cells, dtype=float)
    hx = 0.5 * (c[:, 2] - c[:, 0])
    hy = 0.5 * (c[:, 3] - c[:, 1])
    mx = 0.5 * (c[:, 2] + c[:, 0])
    my = 0.5 * (c[:, 3] + c[:, 1])
    xs = (mx[:, None] + hx[:, None] * _NX[None, :]).ravel()
    ys = (my[:, None] + hy[:, None] * _NY[None, :]).ravel()
    vals = np.asarray(f(xs, ys), dtype=float).reshape(len(c), 225)
    jac = hx * hy
    k = vals @ _WK2 * jac
    g = vals @ _WG2 * jac
    return k, np.abs(k - g)


def _grid(a, b, breaks):
    pts = sorted({float(a), float(b), *(float(p) for p in breaks if a < p < b)})
    return list(zip(pts[:-1], pts[1:]))


def integrate_rect(f, lo, hi, tol=1e-11, xbreaks=(), ybreaks=(), max_depth=40,
                   max_cells=2_000_000, rtol=0.0):
    """Integrate ``f`` over the rectangle ``[lo, hi]``.

    Parameters
    ----------
    f : callable
        Vectorized integrand ``f(x, y) -> array`` on 1-D arrays of points.
    lo, hi : pair of float
        Lower-left and upper-right corners.
    tol : float
        Target absolute error. Refinement stops once the summed
        Kronrod-Gauss error estimates drop below it.
    xbreaks, ybreaks : sequence of float
        Known lines of non-smoothness; the domain is split along them
        before refinement starts.
    max_depth : int
        Subdivision depth at which refinement is abandoned.
    rtol : float, optional
        If positive, additionally require the error estimate to be below
        ``rtol * |integral|``; useful for integrals much smaller than ``tol``.

    Returns
    -------
    float
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if hi[0] <= lo[0] or hi[1] <= lo[1]:
        return 0.0
    cells = [(x0, y0, x1, y1) for x0, x1 in _grid(lo[0], hi[0], xbreaks)
             for y0, y1 in _grid(lo[1], hi[1], ybreaks)]
    vals, errs = _eval_cells(f, cells)
    heap = []
    for i, cell in enumerate(cells):
        heapq.heappush(heap, (-errs[i], i, 0, cell, vals[i]))
    counter = len(cells)
    total_err = float(np.sum(errs))
    total_val = float(np.sum(vals))
    n_cells = len(cells)

    def limit():
        if rtol > 0:
            return max(min(tol, rtol * abs(total_val)), ABS_FLOOR)
        return tol

    while total_err > limit():
        negerr, _, depth, cell, oldval = heapq.heappop(heap)
        if depth >= max_depth:
            raise QuadratureError(
                f"subdivision depth {max_depth} reached with error estimate "
                f"{total_err:.3g} > {limit():.3g}"
            )
        if n_cells > max_cells:
            raise QuadratureError(f"more than {max_cells} cells needed for tol {tol:.3g}")
        x0, y0, x1, y1 = cell
        xm = 0.5 * (x0 + x1)
        ym = 0.5 * (y0 + y1)
        kids = [(x0, y0, xm, ym), (xm, y0, x1, ym), (x0, ym, xm, y1), (xm, ym, x1, y1)]
        kv, ke = _eval_cells(f, kids)
        total_err += float(np.sum(ke)) + negerr
        total_val += float(np.sum(kv)) - oldval
        for j in range(4):
            heapq.heappush(heap, (-ke[j], counter, depth + 1, kids[j], kv[j]))
            counter += 1
        n_cells += 3
        if counter % 4096 == 0:
            # resync the running error sum
            total_err = math.fsum(-item[0] for item in heap)
            total_val = math.fsum(item[4] for item in heap)

    return math.fsum(item[4] for item in heap)


def integrate_unit_square(f, tol=1e-11, **kwargs):
    """Integrate ``f`` over ``[-1/2, 1/2]^2``; see :func:`integrate_rect`."""
    return integrate_rect(f, (-0.5, -0.5), (0.5, 0.5), tol, **kwargs)
