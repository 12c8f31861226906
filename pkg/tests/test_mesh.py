import io

import numpy as np
import pytest

from trapgap.geometry import CellGeometry, canonical_geometry, measures, regular_polygon
from trapgap.mesh import (MeshError, build_cell_mesh, build_line_interface_mesh, dump_mesh, inside_area,
                          interface_length, refine)


def _check_invariants(mesh, geom=None):
    areas = mesh.areas()
    assert np.all(areas > 0)
    assert areas.sum() == pytest.approx(mesh.d, rel=1e-12)
    v = mesh.vertices
    b, t = mesh.lid_pairs[:, 0], mesh.lid_pairs[:, 1]
    assert np.all(v[b, 1] == -0.5) and np.all(v[t, 1] == 0.5)
    assert np.array_equal(v[b, 0], v[t, 0])
    on_lid = np.flatnonzero(np.isin(v[:, 1], [-0.5, 0.5]))
    assert sorted(on_lid) == sorted(np.concatenate([b, t]))
    # interface copies share coordinates and are distinct nodes
    e, i = mesh.interface_pairs[:, 0], mesh.interface_pairs[:, 1]
    assert np.array_equal(v[e], v[i]) and np.all(e != i)
    # every interior copy is used only by inside triangles, exterior copies only by outside ones
    used_inside = np.unique(mesh.triangles[mesh.inside])
    used_outside = np.unique(mesh.triangles[~mesh.inside])
    assert not np.isin(i, used_outside).any()
    assert not np.isin(e, used_inside).any()
    if geom is not None and geom.trap is not None:
        m = measures(geom)
        assert inside_area(mesh) == pytest.approx(m.vol_B, rel=1e-12)
        assert interface_length(mesh) == pytest.approx(m.area_S, rel=1e-12)


def test_trap_free_coarse_mesh():
    mesh = build_cell_mesh(CellGeometry(1.0, None), 0.5)
    assert (mesh.n_vertices, len(mesh.triangles), len(mesh.lid_pairs)) == (9, 8, 3)
    _check_invariants(mesh)


def test_canonical_corners_are_vertices():
    g = canonical_geometry()
    mesh = build_cell_mesh(g, 0.25)
    for corner in g.trap:
        assert np.any(np.all(mesh.vertices == corner, axis=1))
    assert len(mesh.interface_pairs) > 0
    _check_invariants(mesh, g)


@pytest.mark.parametrize("h", [1 / 8, 1 / 16, 1 / 32])
def test_canonical_invariants(h):
    g = canonical_geometry()
    _check_invariants(build_cell_mesh(g, h), g)


@pytest.mark.parametrize("geom", [
    CellGeometry(2.0, regular_polygon(1.0, 0.0, 0.2, 6)),
    CellGeometry(1.0, [[0.3, -0.2], [0.7, -0.15], [0.45, 0.3]]),
    CellGeometry(1.0, regular_polygon(0.5, 0.05, 0.25, 5, 0.3)),
], ids=["hexagon", "triangle", "pentagon"])
def test_general_polygons(geom):
    _check_invariants(build_cell_mesh(geom, 1 / 32), geom)


def test_refine_counts_and_nesting():
    g = canonical_geometry()
    coarse = build_cell_mesh(g, 1 / 8)
    fine = refine(coarse)
    assert len(fine.triangles) == 4 * len(coarse.triangles)
    assert len(fine.interface_edges) == 2 * len(coarse.interface_edges)
    assert fine.h == coarse.h / 2
    assert np.array_equal(fine.vertices[: coarse.n_base], coarse.vertices[: coarse.n_base])
    _check_invariants(fine, g)
    assert np.array_equal(np.sort(fine.inside), np.sort(np.tile(coarse.inside, 4)))


def test_refine_small_mesh():
    mesh = build_cell_mesh(CellGeometry(1.0, None), 0.5)
    assert len(refine(mesh).triangles) == 32


def test_trap_too_close_for_h():
    g = CellGeometry(1.0, [[0.05, -0.2], [0.5, -0.2], [0.5, 0.2], [0.05, 0.2]])
    with pytest.raises(MeshError):
        build_cell_mesh(g, 0.1)


def test_short_side_rejected():
    g = CellGeometry(1.0, [[0.3, -0.2], [0.7, -0.2], [0.7, 0.2], [0.31, 0.2], [0.3, 0.19]])
    with pytest.raises(MeshError):
        build_cell_mesh(g, 1 / 16)


def test_line_interface_mesh():
    mesh = build_line_interface_mesh(1.0, 1 / 8)
    assert interface_length(mesh) == pytest.approx(1.0, rel=1e-14)
    _check_invariants(mesh)


def test_dump_mesh_format():
    mesh = build_cell_mesh(canonical_geometry(), 0.25)
    buf = io.StringIO()
    dump_mesh(mesh, buf)
    kinds = [line.split()[0] for line in buf.getvalue().splitlines()]
    assert kinds.count("v") == mesh.n_vertices
    assert kinds.count("t") == len(mesh.triangles)
    assert kinds.count("ip") == len(mesh.interface_pairs)
    assert kinds.count("lp") == len(mesh.lid_pairs)


def test_mesh_is_read_only(canonical_mesh):
    with pytest.raises(ValueError):
        canonical_mesh.vertices[0, 0] = 1.0
