import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trapgap.geometry import (CellGeometry, GeometryError, GapConstants, canonical_geometry,
                              effective_unit_coupling, limit_gap, measures, polygon_area, power_rule, rectangle,
                              regular_polygon)


def test_measures_canonical_square():
    m = measures(canonical_geometry())
    assert (m.vol_Y, m.vol_B, m.area_S, m.vol_F) == (1.0, 0.25, 2.0, 0.75)


@pytest.mark.parametrize("s", [0.1, 0.3, 0.5])
def test_measures_centered_square(s):
    m = measures(CellGeometry(1.0, rectangle(0.5, 0.0, s, s)))
    assert m.vol_B == pytest.approx(s * s, rel=1e-14)
    assert m.area_S == pytest.approx(4 * s, rel=1e-14)


def test_measures_hexagon():
    m = measures(CellGeometry(2.0, regular_polygon(1.0, 0.0, 0.2, 6)))
    assert m.vol_B == pytest.approx(1.5 * math.sqrt(3) * 0.04, rel=1e-13)
    assert m.vol_Y == 2.0


def test_degenerate_polygon_rejected():
    with pytest.raises(GeometryError):
        CellGeometry(1.0, [[0.2, 0.0], [0.4, 0.0], [0.6, 0.0]])


def test_self_intersecting_polygon_rejected():
    with pytest.raises(GeometryError):
        CellGeometry(1.0, [[0.2, -0.2], [0.8, 0.2], [0.8, -0.1], [0.2, 0.25]])


def test_trap_must_be_strictly_inside():
    with pytest.raises(GeometryError):
        CellGeometry(1.0, rectangle(0.5, 0.0, 1.0, 0.5))
    with pytest.raises(GeometryError):
        CellGeometry(1.0, rectangle(0.5, 0.0, 0.5, 0.5), margin=0.3)


def test_clockwise_polygon_is_reoriented():
    g = CellGeometry(1.0, rectangle(0.5, 0.0, 0.5, 0.5)[::-1])
    assert polygon_area(g.trap) > 0


def test_limit_gap_examples():
    g = limit_gap(canonical_geometry())
    assert g.alpha == 8.0 and g.beta == pytest.approx(32 / 3, rel=1e-15)
    g2 = limit_gap(canonical_geometry(a=2.0))
    assert g2.alpha == 16.0 and g2.beta == pytest.approx(64 / 3, rel=1e-15)
    # |S| = 1, |B| = 1/16: square of side 1/4
    g3 = limit_gap(CellGeometry(1.0, rectangle(0.5, 0.0, 0.25, 0.25)))
    assert g3.alpha == pytest.approx(16.0) and g3.beta == pytest.approx(16 / 0.9375)


def test_gap_constants_ordering():
    with pytest.raises(GeometryError):
        GapConstants(2.0, 1.0)


def test_effective_unit_coupling_examples():
    assert effective_unit_coupling(canonical_geometry(epsilon=0.1)) == pytest.approx(0.01, rel=1e-15)
    assert effective_unit_coupling(canonical_geometry(epsilon=1.0)) == 1.0
    g = CellGeometry(1.0, rectangle(0.5, 0, 0.5, 0.5), 0.25, 1.0, power_rule(1.0, 1.5))
    assert effective_unit_coupling(g) == pytest.approx(0.25**2.5, rel=1e-15)


def test_coupling_rule_consistency():
    g = canonical_geometry()
    assert g.coupling_rule_consistent([0.4, 0.1], 1e-12)
    bad = g.with_coupling(1.0, power_rule(1.0, 1.5))
    assert not bad.coupling_rule_consistent([0.4, 0.1], 0.1)


def _convex_polygon(draw_pts):
    pts = np.array(draw_pts)
    c = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))
    return pts[order]


polygons = st.lists(st.tuples(st.floats(0.05, 0.95), st.floats(-0.45, 0.45)), min_size=3, max_size=8).map(
    _convex_polygon)


@settings(max_examples=60, deadline=None)
@given(polygons, st.floats(0.1, 5.0))
def test_alpha_below_beta_and_homogeneous(poly, c):
    try:
        g = CellGeometry(1.0, poly)
    except GeometryError:
        return
    lim = limit_gap(g)
    assert lim.alpha < lim.beta
    scaled = limit_gap(g.with_coupling(c * g.coupling_a))
    assert scaled.alpha == pytest.approx(c * lim.alpha, rel=1e-13)
    assert scaled.beta == pytest.approx(c * lim.beta, rel=1e-13)


@settings(max_examples=60, deadline=None)
@given(polygons, st.floats(0.2, 0.95))
def test_shrinking_trap_scales_alpha(poly, t):
    try:
        g = CellGeometry(1.0, poly)
    except GeometryError:
        return
    centroid = g.trap.mean(axis=0)
    small = CellGeometry(1.0, centroid + t * (g.trap - centroid))
    m, ms = measures(g), measures(small)
    assert ms.vol_B == pytest.approx(t * t * m.vol_B, rel=1e-10)
    assert ms.area_S == pytest.approx(t * m.area_S, rel=1e-10)
    assert limit_gap(small).alpha == pytest.approx(limit_gap(g).alpha / t, rel=1e-10)
