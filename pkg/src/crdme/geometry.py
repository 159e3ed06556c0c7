"""
Circle/rectangle intersection areas, reaction volume fractions and
closed-form bimolecular rate constants.

All lengths in this module are dimensionless (units of the voxel width h)
unless stated otherwise. The unit voxel with integer index ``m`` is the
square ``[m - 1/2, m + 1/2]^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .quadrature import integrate_rect

__all__ = [
    "Circle",
    "AxisRect",
    "circle_rect_area",
    "unit_voxel",
    "min_voxel_distance",
    "phi",
    "phi_breakpoints",
    "mc_phi_oracle",
    "well_mixed_rate",
    "k_doi",
]



@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError(f"circle radius must be nonnegative, got {self.radius}")


@dataclass(frozen=True)
class AxisRect:
    lo: tuple[float, float]
    hi: tuple[float, float]

    def __post_init__(self):
        if self.lo[0] > self.hi[0] or self.lo[1] > self.hi[1]:
            raise ValueError(f"rectangle needs lo <= hi componentwise, got {self.lo}, {self.hi}")

    @property
    def area(self) -> float:
        return (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])


def unit_voxel(m) -> AxisRect:
    """Unit square centered at the integer offset ``m``."""
    return AxisRect((m[0] - 0.5, m[1] - 0.5), (m[0] + 0.5, m[1] + 0.5))


@njit(cache=True, nogil=True)
def _half_chord_integral(x, r):
    """Integral of sqrt(r^2 - t^2) for t from -r to x, with x in [-r, r]."""
    u = min(max(x / r, -1.0), 1.0)
    return 0.5 * r * r * (u * math.sqrt(max(1.0 - u * u, 0.0)) + math.asin(u) + 0.5 * math.pi)


@njit(cache=True, nogil=True)
def _disk_quadrant_area(a, b, r):
    """Area of the disk (center 0, radius r) intersected with {x <= a, y <= b}.

    Integrates the vertical chord length over x in [-r, a]. The chord
    is cut by y = b where |x| < xb = sqrt(r^2 - b^2), and lies wholly
    above or below that line elsewhere, so the area is continuous in
    (a, b) with no tangency cases.
    """
    a = min(max(a, -r), r)
    b = min(max(b, -r), r)
    xb = math.sqrt(max(r * r - b * b, 0.0))
    area = _half_chord_integral(a, r)  # lower half-chords
    if a > -xb:
        area += b * (min(a, xb) + xb)
    outer = _half_chord_integral(min(a, -xb), r)
    if a > xb:
        outer += _half_chord_integral(a, r) - _half_chord_integral(xb, r)
    return area + outer if b >= 0.0 else area - outer


@njit(cache=True, nogil=True)
def _disk_rect_area(cx, cy, r, xlo, ylo, xhi, yhi):
    """Area of disk(center, r) intersected with [xlo,xhi]x[ylo,yhi].

    Inclusion-exclusion over the four corner quadrants. Disjoint and
    nested configurations return exact values, so an entry beyond the
    reaction radius is exactly zero.
    """
    if r <= 0.0 or xhi <= xlo or yhi <= ylo:
        return 0.0
    x0 = xlo - cx
    x1 = xhi - cx
    y0 = ylo - cy
    y1 = yhi - cy
    r2 = r * r
    # nearest point of the rectangle to the center
    px = min(max(0.0, x0), x1)
    py = min(max(0.0, y0), y1)
    if px * px + py * py >= r2:
        return 0.0
    rect = (x1 - x0) * (y1 - y0)
    fx = max(-x0, x1)
    fy = max(-y0, y1)
    if fx * fx + fy * fy <= r2:
        return rect
    disk = math.pi * r2
    if x0 <= -r and x1 >= r and y0 <= -r and y1 >= r:
        return disk
    area = (_disk_quadrant_area(x1, y1, r) - _disk_quadrant_area(x0, y1, r)
            - _disk_quadrant_area(x1, y0, r) + _disk_quadrant_area(x0, y0, r))
    return min(max(area, 0.0), rect, disk)


@njit(cache=True, nogil=True)
def _area_moving_disk(xs, ys, r, xlo, ylo, xhi, yhi):
    out = np.empty(xs.shape[0])
    for k in range(xs.shape[0]):
        out[k] = _disk_rect_area(xs[k], ys[k], r, xlo, ylo, xhi, yhi)
    return out


def circle_rect_area(c: Circle, rect: AxisRect) -> float:
    """Exact area of ``c`` intersected with ``rect``.

    Degenerate rectangles (zero width or height) and zero-radius circles
    give 0.
    """
    return float(
        _disk_rect_area(
            float(c.center[0]), float(c.center[1]), float(c.radius),
            float(rect.lo[0]), float(rect.lo[1]), float(rect.hi[0]), float(rect.hi[1]),
        )
    )


def min_voxel_distance(m) -> float:
    """Smallest distance between a point of voxel 0 and a point of voxel ``m``."""
    gx = max(abs(int(m[0])) - 1, 0)
    gy = max(abs(int(m[1])) - 1, 0)
    return math.hypot(gx, gy)


def phi_breakpoints(m, rho):
    """Lines in the center coordinate where the area integrand loses smoothness.

    The disk of radius ``rho`` becomes tangent to an edge of voxel ``m``
    when the center is at distance ``rho`` from the edge line.
    """
    out = []
    for k in range(2):
        pts = set()
        for edge in (m[k] - 0.5, m[k] + 0.5):
            for s in (-rho, 0.0, rho):
                p = edge + s
                if -0.5 < p < 0.5:
                    pts.add(p)
        out.append(sorted(pts))
    return out


def phi(m, rho: float, tol: float = 1e-11, rtol: float = 1e-9) -> float:
    """Fraction of voxel-pair configurations (0, m) closer than ``rho``.

    Integrates ``|B_rho(x) ∩ V_m|`` over centers ``x`` in the unit voxel
    at the origin; ``rho`` is the reaction radius in units of h. The
    error target is ``min(tol, rtol * phi)`` so that the small fractions
    near the edge of the reactive neighborhood keep their relative accuracy.
    """
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    m = (int(m[0]), int(m[1]))
    if min_voxel_distance(m) >= rho:
        return 0.0
    if math.hypot(abs(m[0]) + 1, abs(m[1]) + 1) <= rho:
        # every pair of points lies within rho
        return 1.0
    xlo, ylo, xhi, yhi = m[0] - 0.5, m[1] - 0.5, m[0] + 0.5, m[1] + 0.5

    def integrand(x, y):
        return _area_moving_disk(x, y, rho, xlo, ylo, xhi, yhi)

    bx, by = phi_breakpoints(m, rho)
    val = integrate_rect(integrand, (-0.5, -0.5), (0.5, 0.5), tol, bx, by, rtol=rtol)
    return min(max(val, 0.0), 1.0)


def mc_phi_oracle(m, rho: float, n: int, rng: np.random.Generator, chunk: int = 2_000_000):
    """Plain Monte-Carlo estimate of the volume fraction for offset ``m``.

    Draws ``n`` uniform pairs (x in voxel 0, y in voxel m) and counts the
    pairs closer than ``rho``. Returns ``(estimate, binomial std error)``.
    """
    if n < 10_000:
        raise ValueError("the oracle needs at least 1e4 samples")
    hits = 0
    left = int(n)
    while left > 0:
        k = min(chunk, left)
        u = rng.random((4, k))
        dx = u[2] + m[0] - u[0]
        dy = u[3] + m[1] - u[1]
        hits += int(np.count_nonzero(dx * dx + dy * dy < rho * rho))
        left -= k
    p = hits / n
    return p, math.sqrt(p * (1.0 - p) / n)


def well_mixed_rate(lam: float, rb: float, dim: int = 2) -> float:
    """Small-radius bimolecular rate ``lam * |B_rb|`` in ``dim`` dimensions."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if lam < 0 or not rb > 0:
        raise ValueError("need lam >= 0 and rb > 0")
    if dim == 2:
        return lam * math.pi * rb**2
    return lam * (4.0 / 3.0) * math.pi * rb**3


def k_doi(D: float, rb: float, lam: float) -> float:
    """Diffusion-limited rate constant of the 3D Doi model.

    ``4 pi D rb (1 - sqrt(D/lam) tanh(rb sqrt(lam/D)) / rb)``. The bracket
    is evaluated through a series when ``rb sqrt(lam/D)`` is small, where
    the direct form cancels catastrophically.
    """
    if not (D > 0 and rb > 0 and lam > 0):
        raise ValueError("need D > 0, rb > 0, lam > 0")
    z = rb * math.sqrt(lam / D)
    if z < 1e-2:
        # 1 - tanh(z)/z = z^2/3 - 2 z^4/15 + 17 z^6/315 - 62 z^8/2835
        z2 = z * z
        bracket = z2 * (1.0 / 3.0 - z2 * (2.0 / 15.0 - z2 * (17.0 / 315.0 - z2 * 62.0 / 2835.0)))
    else:
        bracket = 1.0 - math.tanh(z) / z
    return 4.0 * math.pi * D * rb * bracket
