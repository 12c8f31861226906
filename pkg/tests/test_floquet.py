import math

import numpy as np
import pytest

from trapgap.floquet import (BandError, BandStructure, band_structure, default_phi_grid, detect_gaps,
                             first_gap_endpoints, gaps_from_edges)
from trapgap.geometry import CellGeometry, canonical_geometry
from trapgap.mesh import build_cell_mesh

PI2 = math.pi**2


@pytest.fixture(scope="module")
def small_eps_bands():
    g = canonical_geometry(epsilon=0.1)
    return band_structure(g, build_cell_mesh(g, 1 / 16), phi_count=9, k_max=4)


def test_default_grid():
    grid = default_phi_grid(17)
    assert grid[0] == 0 and grid[-1] == math.pi and len(grid) == 17


def test_trap_free_first_band(free_geom):
    bands = band_structure(free_geom, build_cell_mesh(free_geom, 1 / 32), phi_count=9, k_max=2)
    assert bands.lower[0] == pytest.approx(0, abs=1e-9)
    assert bands.upper[0] == pytest.approx(PI2, rel=1e-2)
    alpha_eps, beta_eps = first_gap_endpoints(bands)
    assert beta_eps <= alpha_eps * (1 + 1e-2)
    report = detect_gaps(bands, 20.0)
    assert not any(g.status == "certified" and g.below_band == 1 for g in report.gaps)


def test_band_invariants(small_eps_bands):
    b = small_eps_bands
    assert np.all(b.lower <= b.upper)
    assert abs(b.lower[0]) < 1e-6
    assert b.enclosure_slack().min() >= -10 * b.tol
    assert np.array_equal(b.at_phi(0.5 * math.pi), b.at_phi(1.5 * math.pi))
    assert b.at_phi(0.0)[0] == pytest.approx(0, abs=1e-6)


def test_phi_grid_covers_circle(small_eps_bands):
    grid = small_eps_bands.phi_grid
    assert len(grid) == 16 and grid[0] == 0 and np.all(np.diff(grid) > 0) and grid[-1] < 2 * math.pi


def test_first_gap_below_dirichlet_bound(small_eps_bands):
    alpha_eps, beta_eps = first_gap_endpoints(small_eps_bands)
    assert alpha_eps <= 8.0 and beta_eps <= 32 / 3 + 1e-8
    assert alpha_eps < beta_eps


def test_reflected_grid_gives_same_endpoints(canonical_mesh):
    g = canonical_geometry(epsilon=0.3)
    phis = default_phi_grid(5)
    a = band_structure(g, canonical_mesh, phis=phis, k_max=3)
    full = np.sort(np.concatenate([phis, 2 * math.pi - phis[1:-1]]))
    b = band_structure(g, canonical_mesh, phis=full, k_max=3, symmetric=False)
    assert np.allclose(first_gap_endpoints(a), first_gap_endpoints(b), rtol=1e-10)


def test_grid_must_contain_endpoints(canonical_mesh, canonical):
    with pytest.raises(ValueError):
        band_structure(canonical, canonical_mesh, phis=[0.0, 1.0])
    with pytest.raises(ValueError):
        band_structure(canonical, canonical_mesh, k_max=1)


def test_parallel_sweep_is_identical(canonical_mesh):
    g = canonical_geometry(epsilon=0.2)
    a = band_structure(g, canonical_mesh, phi_count=5, k_max=3, jobs=1)
    b = band_structure(g, canonical_mesh, phi_count=5, k_max=3, jobs=4)
    assert np.array_equal(a.values, b.values)


def test_gap_examples():
    r = gaps_from_edges([0, 5], [2, 9], 10.0)
    assert [(g.lo, g.hi, g.status) for g in r.gaps] == [(2.0, 5.0, "estimated")]
    r = gaps_from_edges([0, 5], [2, 9], 10.0, lambda_N=[0, 4.8], lambda_D=[2.1, 9.5])
    (g,) = r.gaps
    assert g.status == "certified" and (g.certified_lo, g.certified_hi) == (2.1, 4.8)
    assert g.lo <= g.certified_lo < g.certified_hi <= g.hi
    assert gaps_from_edges([0, 2.5], [3, 6], 10.0).gaps == ()


def test_gaps_truncated_to_window():
    r = gaps_from_edges([0, 5, 20], [2, 9, 30], 12.0)
    assert [(g.lo, g.hi) for g in r.gaps] == [(2.0, 5.0), (9.0, 12.0)]


def test_enclosure_violation_detected():
    b = BandStructure(np.array([0.0, math.pi]), np.array([[0.0, 5.0], [3.0, 6.0]]), np.array([0.0, 5.0]),
                      np.array([2.0, 7.0]), 1.0, 1.0, 1.0, 1e-9)
    with pytest.raises(BandError):
        b.validate()


def test_one_gap_in_window_at_small_eps():
    g = canonical_geometry(epsilon=0.1)
    bands = band_structure(g, build_cell_mesh(g, 1 / 16), phi_count=9, k_max=3)
    report = detect_gaps(bands, 20.0)
    assert len(report.gaps) == 1 and report.gaps[0].below_band == 1
    assert report.gaps[0].status == "certified"
