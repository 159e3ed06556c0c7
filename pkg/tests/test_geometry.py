import math

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st
from scipy import integrate

from crdme.geometry import (
    AxisRect,
    Circle,
    circle_rect_area,
    k_doi,
    mc_phi_oracle,
    min_voxel_distance,
    phi,
    unit_voxel,
    well_mixed_rate,
)


def chord_area(cx, cy, r, x0, y0, x1, y1):
    """Independent oracle: integrate the vertical chord length with scipy."""
    a, b = max(x0, cx - r), min(x1, cx + r)
    if a >= b:
        return 0.0

    def chord(x):
        s = math.sqrt(max(r * r - (x - cx) ** 2, 0.0))
        return max(0.0, min(y1, cy + s) - max(y0, cy - s))

    cand = [cx]
    for y in (y0, y1):
        if abs(y - cy) < r:
            s = math.sqrt(r * r - (y - cy) ** 2)
            cand += [cx - s, cx + s]
    pts = sorted(p for p in cand if a < p < b)
    val, _ = integrate.quad(chord, a, b, points=pts or None, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def closed_form_same_voxel(rho):
    return math.pi * rho**2 - 8.0 * rho**3 / 3.0 + rho**4 / 2.0


# --- circle/rectangle areas ---------------------------------------------

def test_circle_inside_rect():
    a = circle_rect_area(Circle((0.5, 0.5), 0.3), AxisRect((0, 0), (1, 1)))
    assert math.isclose(a, 0.09 * math.pi, rel_tol=1e-14)


def test_rect_inside_circle():
    assert circle_rect_area(Circle((0.5, 0.5), 10.0), AxisRect((0, 0), (1, 1))) == 1.0


def test_disjoint():
    assert circle_rect_area(Circle((3, 3), 0.5), AxisRect((0, 0), (1, 1))) == 0.0


def test_half_disk_on_edge():
    a = circle_rect_area(Circle((0, 0.5), 0.5), AxisRect((0, 0), (1, 1)))
    assert math.isclose(a, math.pi / 8, rel_tol=1e-14)


def test_quarter_disk_at_corner():
    a = circle_rect_area(Circle((0, 0), 0.7), AxisRect((0, 0), (1, 1)))
    assert math.isclose(a, math.pi * 0.49 / 4, rel_tol=1e-14)


def test_circular_segment():
    r, d = 1.0, 0.4
    want = r * r * math.acos(d / r) - d * math.sqrt(r * r - d * d)
    a = circle_rect_area(Circle((0, 0), r), AxisRect((d, -5), (5, 5)))
    assert math.isclose(a, want, rel_tol=1e-13)


def test_tangent_circle():
    # touching the rectangle at one point or one edge from outside
    assert circle_rect_area(Circle((-0.5, 0.5), 0.5), AxisRect((0, 0), (1, 1))) == 0.0
    a = circle_rect_area(Circle((0.5, 0.5), 0.5), AxisRect((0, 0), (1, 1)))
    assert math.isclose(a, math.pi / 4, rel_tol=1e-14)


def test_degenerate_inputs():
    assert circle_rect_area(Circle((0, 0), 0.0), AxisRect((-1, -1), (1, 1))) == 0.0
    assert circle_rect_area(Circle((0, 0), 1.0), AxisRect((0, -1), (0, 1))) == 0.0
    with pytest.raises(ValueError):
        Circle((0, 0), -1.0)
    with pytest.raises(ValueError):
        AxisRect((1, 0), (0, 1))


coord = st.floats(-3, 3, allow_nan=False)
size = st.floats(0.01, 3)


@settings(max_examples=150, deadline=None)
@given(cx=coord, cy=coord, r=st.floats(0.01, 3), x0=coord, y0=coord, w=size, hgt=size)
@example(cx=1.0, cy=0.0, r=1.01, x0=0.0, y0=0.0, w=2.01, hgt=1.0)  # tangent edge, rounded inward
def test_area_matches_chord_oracle(cx, cy, r, x0, y0, w, hgt):
    got = circle_rect_area(Circle((cx, cy), r), AxisRect((x0, y0), (x0 + w, y0 + hgt)))
    want = chord_area(cx, cy, r, x0, y0, x0 + w, y0 + hgt)
    assert abs(got - want) <= 1e-9 * max(1.0, want)
    assert 0.0 <= got <= min(w * hgt, math.pi * r * r) * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(cx=coord, cy=coord, r=st.floats(0.01, 3),
       sides=st.lists(st.sampled_from(["lo", "hi", "free"]), min_size=4, max_size=4),
       free=st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_area_with_edges_on_the_circle_extremes(cx, cy, r, sides, free):
    # edges placed at cx +- r or cy +- r in floating point are tangent up to rounding
    ext = [cx - r, cx + r, cy - r, cy + r]
    vals = [ext[2 * (k // 2) + (sides[k] == "hi")] if sides[k] != "free" else free[k] for k in range(4)]
    x0, x1 = sorted(vals[:2])
    y0, y1 = sorted(vals[2:])
    if x1 - x0 < 1e-6 or y1 - y0 < 1e-6:
        return
    got = circle_rect_area(Circle((cx, cy), r), AxisRect((x0, y0), (x1, y1)))
    want = chord_area(cx, cy, r, x0, y0, x1, y1)
    assert abs(got - want) <= 1e-9 * max(1.0, want)


@settings(max_examples=100, deadline=None)
@given(cx=coord, cy=coord, r=st.floats(0.01, 3),
       fx=st.floats(0.01, 0.99), fy=st.floats(0.01, 0.99))
def test_area_additive_over_partition(cx, cy, r, fx, fy):
    x0, y0, x1, y1 = -1.0, -1.5, 2.0, 1.0
    xm, ym = x0 + fx * (x1 - x0), y0 + fy * (y1 - y0)
    c = Circle((cx, cy), r)
    whole = circle_rect_area(c, AxisRect((x0, y0), (x1, y1)))
    parts = sum(circle_rect_area(c, AxisRect(lo, hi)) for lo, hi in [
        ((x0, y0), (xm, ym)), ((xm, y0), (x1, ym)), ((x0, ym), (xm, y1)), ((xm, ym), (x1, y1))])
    assert abs(whole - parts) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(cx=coord, cy=coord, r=st.floats(0.01, 3), dr=st.floats(0, 1))
def test_area_monotone_in_radius(cx, cy, r, dr):
    rect = AxisRect((-1, -1), (1, 1))
    assert circle_rect_area(Circle((cx, cy), r), rect) <= circle_rect_area(Circle((cx, cy), r + dr), rect) + 1e-14


# --- volume fractions ----------------------------------------------------

def test_phi_full_and_empty():
    assert phi((0, 0), 2.0) == 1.0
    assert phi((5, 0), 0.5) == 0.0
    assert min_voxel_distance((5, 0)) == 4.0
    assert min_voxel_distance((1, 1)) == 0.0
    assert unit_voxel((2, -1)) == AxisRect((1.5, -1.5), (2.5, -0.5))


@pytest.mark.parametrize("rho", [0.05, 0.3, 0.5, 0.77, 1.0])
def test_phi_same_voxel_closed_form(rho):
    assert abs(phi((0, 0), rho) - closed_form_same_voxel(rho)) < 1e-11


def test_phi_exact_rationals():
    # polynomial cases at rho = 1/2 evaluated by hand
    assert abs(phi((1, 0), 0.5) - 13.0 / 192.0) < 1e-11
    assert abs(phi((1, 1), 0.5) - 1.0 / 128.0) < 1e-11


def test_phi_small_rho_law():
    assert abs(phi((0, 0), 0.01) / (math.pi * 1e-4) - 1.0) < 0.05


def test_phi_against_oracle_same_voxel():
    p, se = mc_phi_oracle((0, 0), 0.5, 10**8, np.random.default_rng(11))
    assert abs(phi((0, 0), 0.5) - p) < 4 * se


def test_phi_against_oracle_neighbor():
    p, se = mc_phi_oracle((1, 0), 1.25, 10**8, np.random.default_rng(12))
    assert abs(phi((1, 0), 1.25) - p) < 4 * se


def test_oracle_degenerate_cases():
    rng = np.random.default_rng(0)
    assert mc_phi_oracle((9, 9), 0.5, 10**5, rng) == (0.0, 0.0)
    assert mc_phi_oracle((0, 0), 2.0, 10**5, rng) == (1.0, 0.0)
    with pytest.raises(ValueError):
        mc_phi_oracle((0, 0), 1.0, 100, rng)


def test_phi_rejects_bad_rho():
    with pytest.raises(ValueError):
        phi((0, 0), 0.0)


# --- rate constants ------------------------------------------------------

def test_well_mixed_rate():
    assert math.isclose(well_mixed_rate(1e9, 1e-3), math.pi * 1e3, rel_tol=1e-14)
    assert well_mixed_rate(0.0, 1e-3) == 0.0
    assert math.isclose(well_mixed_rate(3 / (4 * math.pi), 1.0, dim=3), 1.0, rel_tol=1e-14)
    with pytest.raises(ValueError):
        well_mixed_rate(1.0, 1.0, dim=1)


def test_k_doi_limits():
    D, rb = 10.0, 1e-3
    assert math.isclose(k_doi(D, rb, 1e30), 4 * math.pi * D * rb, rel_tol=1e-9)
    for lam in (1e-6, 1.0, 1e3, 1e5):
        z2 = rb * rb * lam / D
        ratio = k_doi(D, rb, lam) / well_mixed_rate(lam, rb, 3)
        assert abs(ratio - 1.0) <= 0.4 * z2 * (1 + 1e-6)


def test_k_doi_series_branch():
    # z = rb sqrt(lam/D) = 1e-3; 1 - tanh(z)/z = z^2/3 - 2 z^4/15 + ...
    D, rb = 1.0, 1.0
    lam = 1e-6
    ratio = k_doi(D, rb, lam) / well_mixed_rate(lam, rb, 3)
    assert abs(ratio - 1.0) < 1e-5
    assert math.isclose(ratio, 1.0 - 0.4e-6, rel_tol=1e-12)


def test_k_doi_continuous_across_branches():
    D, rb = 1.0, 1.0
    z = 1e-2
    below = k_doi(D, rb, (z * (1 - 1e-9)) ** 2)
    above = k_doi(D, rb, (z * (1 + 1e-9)) ** 2)
    assert math.isclose(below, above, rel_tol=1e-7)
