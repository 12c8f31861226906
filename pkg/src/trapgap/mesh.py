"""Interface-conforming triangulations of the unit period cell.

The cell ``(0, d) x (-1/2, 1/2)`` is covered by a structured grid of right
triangles.  The trap polygon is embedded into it: nearby grid nodes are
pulled onto the polygon, remaining corners are inserted, and mesh edges
crossed by a polygon side are split until every side is a chain of mesh
edges.  Nodes on the trap boundary are then duplicated so that triangles
inside the trap use their own copy; the jump between the two copies is the
two-sided trace difference.  Lid nodes on ``y = -1/2`` and ``y = +1/2`` share
the same x grid and are paired by x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, TextIO

import numpy as np

from .geometry import CellGeometry, GeometryError

_REL_TOL = 1e-10


class MeshError(RuntimeError):
    """The requested mesh cannot be built at this resolution."""


@dataclass(frozen=True, eq=False)
class MeshedCell:
    """Triangulation of the unit cell in the broken space across ``S``.

    Attributes
    ----------
    vertices : (N, 2) array
        Base vertices first, then the interior copies of interface nodes.
    triangles : (T, 3) int array
        Counter-clockwise vertex triples.
    inside : (T,) bool array
        Triangle lies in the trap.
    interface_pairs : (P, 2) int array
        ``(exterior, interior)`` copies of every node on ``S``.
    interface_edges : (E, 4) int array
        ``(ext_p, ext_q, int_p, int_q)`` per segment of ``S``.
    edge_lengths : (E,) array
    lid_pairs : (L, 2) int array
        ``(bottom, top)`` nodes with equal x.
    h : float
        Target edge length.
    d : float
        Cell width.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    inside: np.ndarray
    interface_pairs: np.ndarray
    interface_edges: np.ndarray
    edge_lengths: np.ndarray
    lid_pairs: np.ndarray
    h: float
    d: float

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_base(self) -> int:
        return len(self.vertices) - len(self.interface_pairs)

    def areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.triangles)

    def scaled(self, epsilon: float) -> "MeshedCell":
        """Same topology with all coordinates multiplied by ``epsilon``."""
        return MeshedCell(self.vertices * epsilon, self.triangles, self.inside, self.interface_pairs,
                          self.interface_edges, self.edge_lengths * epsilon, self.lid_pairs,
                          self.h * epsilon, self.d * epsilon)

    def base_triangles(self) -> np.ndarray:
        """Triangles with interior copies mapped back to their exterior node."""
        to_base = np.arange(self.n_vertices)
        to_base[self.interface_pairs[:, 1]] = self.interface_pairs[:, 0]
        return to_base[self.triangles]


def _signed_areas(points: np.ndarray, tris: np.ndarray) -> np.ndarray:
    a, b, c = points[tris[:, 0]], points[tris[:, 1]], points[tris[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _grid_shape(d: float, h: float) -> tuple[int, int]:
    if not h > 0:
        raise MeshError(f"mesh size must be positive, got {h}")
    nx = max(1, math.ceil(d / h - 1e-9))
    ny = max(1, math.ceil(1.0 / h - 1e-9))
    return nx, ny


def _structured(d: float, nx: int, ny: int) -> tuple[np.ndarray, np.ndarray]:
    xs = np.linspace(0.0, d, nx + 1)
    ys = np.linspace(-0.5, 0.5, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    points = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    e = idx[1:, :-1].ravel()
    # diagonals mirrored about the cell center lines, pointing towards the center
    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    flip = ((2 * ii + 1 < nx) ^ (2 * jj + 1 < ny)).ravel()
    t1 = np.where(flip[:, None], np.column_stack([a, b, e]), np.column_stack([a, b, c]))
    t2 = np.where(flip[:, None], np.column_stack([b, c, e]), np.column_stack([a, c, e]))
    return points, np.vstack([t1, t2]).astype(np.int64)


class _Triangulation:
    """Mutable conforming triangulation supporting point and segment insertion."""

    def __init__(self, points: np.ndarray, tris: np.ndarray, scale: float):
        self.points = [np.array(p, dtype=float) for p in points]
        self.tris: list[Optional[list[int]]] = [list(map(int, t)) for t in tris]
        self.scale = scale
        self.edges: dict[tuple[int, int], set[int]] = {}
        for t, tri in enumerate(self.tris):
            self._register(t, tri)

    def _register(self, t, tri):
        for k in range(3):
            u, v = tri[k], tri[(k + 1) % 3]
            self.edges.setdefault((min(u, v), max(u, v)), set()).add(t)

    def _unregister(self, t, tri):
        for k in range(3):
            u, v = tri[k], tri[(k + 1) % 3]
            key = (min(u, v), max(u, v))
            self.edges[key].discard(t)
            if not self.edges[key]:
                del self.edges[key]

    def _replace(self, t, new_tris):
        self._unregister(t, self.tris[t])
        self.tris[t] = new_tris[0]
        self._register(t, new_tris[0])
        for tri in new_tris[1:]:
            self.tris.append(tri)
            self._register(len(self.tris) - 1, tri)

    def add_point(self, p) -> int:
        self.points.append(np.array(p, dtype=float))
        return len(self.points) - 1

    def split_edge(self, u: int, v: int, m: int):
        for t in list(self.edges[(min(u, v), max(u, v))]):
            tri = self.tris[t]
            k = next(k for k in range(3) if {tri[k], tri[(k + 1) % 3]} == {u, v})
            a, b, w = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
            self._replace(t, [[a, m, w], [m, b, w]])

    def split_triangle(self, t: int, m: int):
        a, b, c = self.tris[t]
        self._replace(t, [[a, b, m], [b, c, m], [c, a, m]])

    def arrays(self):
        return np.array(self.points), np.array([t for t in self.tris], dtype=np.int64)

    def insert_point(self, p) -> int:
        P, T = self.arrays()
        p = np.asarray(p, dtype=float)
        dist = np.linalg.norm(P - p, axis=1)
        j = int(np.argmin(dist))
        if dist[j] <= _REL_TOL * self.scale:
            self.points[j] = p.copy()
            return j
        a, b, c = P[T[:, 0]], P[T[:, 1]], P[T[:, 2]]
        area = _signed_areas(P, T)

        def sub(x, y):
            return 0.5 * ((y[:, 0] - x[:, 0]) * (p[1] - x[:, 1]) - (y[:, 1] - x[:, 1]) * (p[0] - x[:, 0]))

        bary = np.column_stack([sub(b, c), sub(c, a), sub(a, b)]) / area[:, None]
        t = int(np.argmax(bary.min(axis=1)))
        lam = bary[t]
        if lam.min() < -_REL_TOL:
            raise MeshError(f"point {p} lies outside the cell")
        m = self.add_point(p)
        small = np.abs(lam) <= _REL_TOL
        if small.any():
            k = int(np.argmin(np.abs(lam)))
            tri = T[t]
            self.split_edge(int(tri[(k + 1) % 3]), int(tri[(k + 2) % 3]), m)
        else:
            self.split_triangle(t, m)
        return m

    def insert_segment(self, ip: int, iq: int) -> list[int]:
        """Make segment ``ip -> iq`` a chain of edges; return its vertices in order."""
        P = np.array(self.points)
        p, q = P[ip], P[iq]
        direction = q - p
        length = float(np.linalg.norm(direction))
        tol = _REL_TOL * self.scale * length
        keys = np.array(list(self.edges.keys()), dtype=np.int64)
        e0, e1 = P[keys[:, 0]], P[keys[:, 1]]

        def side(x):
            return direction[0] * (x[..., 1] - p[1]) - direction[1] * (x[..., 0] - p[0])

        s0, s1 = side(e0), side(e1)
        # crossing parameter along the edge and along the segment
        denom = s0 - s1
        with np.errstate(divide="ignore", invalid="ignore"):
            w = s0 / denom
            x = e0 + w[:, None] * (e1 - e0)
            t = ((x - p) @ direction) / length**2
        crossing = (((s0 > tol) & (s1 < -tol)) | ((s0 < -tol) & (s1 > tol))) & (t > 1e-12) & (t < 1 - 1e-12)
        for k in np.flatnonzero(crossing):
            u, v = int(keys[k, 0]), int(keys[k, 1])
            m = self.add_point(x[k])
            self.split_edge(u, v, m)
        P = np.array(self.points)
        s = side(P)
        t = ((P - p) @ direction) / length**2
        on = np.flatnonzero((np.abs(s) <= tol) & (t >= -1e-12) & (t <= 1 + 1e-12))
        chain = on[np.argsort(t[on])].tolist()
        if chain[0] != ip or chain[-1] != iq:
            raise MeshError("segment endpoints are not mesh vertices")
        for a, b in zip(chain[:-1], chain[1:]):
            if (min(a, b), max(a, b)) not in self.edges:
                raise MeshError("failed to recover a trap side as mesh edges; refine the mesh")
            # project onto the exact side to remove round-off
            ta = t[a]
            self.points[a] = p + ta * direction
        self.points[ip], self.points[iq] = p, q
        return chain


def _snap_to_polygon(points: np.ndarray, tris: np.ndarray, polygon: np.ndarray, h: float,
                     fixed: np.ndarray) -> np.ndarray:
    """Pull grid nodes near the polygon onto it, keeping adjacent triangles well shaped."""
    points = points.copy()
    fixed = fixed.copy()
    incident: list[list[int]] = [[] for _ in range(len(points))]
    for t, tri in enumerate(tris):
        for v in tri:
            incident[v].append(t)
    min_area = 0.15 * 0.5 * h * h

    def try_move(v, target):
        old = points[v].copy()
        points[v] = target
        if _signed_areas(points, tris[incident[v]]).min() < min_area:
            points[v] = old
            return False
        fixed[v] = True
        return True

    for corner in polygon:
        dist = np.linalg.norm(points - corner, axis=1)
        dist[fixed] = np.inf
        v = int(np.argmin(dist))
        if dist[v] <= 0.3 * h:
            try_move(v, corner)
    n = len(polygon)
    corner_dist = np.min(np.linalg.norm(points[:, None, :] - polygon[None, :, :], axis=2), axis=1)
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        ab = b - a
        t = np.clip(((points - a) @ ab) / (ab @ ab), 0.0, 1.0)
        proj = a + t[:, None] * ab
        dist = np.linalg.norm(points - proj, axis=1)
        cand = np.flatnonzero((dist <= 0.25 * h) & ~fixed & (corner_dist > 0.5 * h))
        for v in cand[np.argsort(dist[cand])]:
            if dist[v] > 0:
                try_move(v, proj[v])
            else:
                fixed[v] = True
    return points


def points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Even-odd ray casting; points exactly on the boundary are unspecified."""
    x, y = points[:, 0][:, None], points[:, 1][:, None]
    x0, y0 = polygon[:, 0][None, :], polygon[:, 1][None, :]
    x1, y1 = np.roll(polygon[:, 0], -1)[None, :], np.roll(polygon[:, 1], -1)[None, :]
    straddle = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    return (np.count_nonzero(straddle & (x < xcross), axis=1) % 2) == 1


def _finalize(points: np.ndarray, tris: np.ndarray, inside: np.ndarray, iface: np.ndarray,
              h: float, d: float) -> MeshedCell:
    """Duplicate interface nodes, pair lids and validate."""
    areas = _signed_areas(points, tris)
    if areas.min() <= 0:
        raise MeshError("triangulation contains inverted or degenerate triangles")
    n = len(points)
    iface = np.asarray(iface, dtype=np.int64).reshape(-1, 2)
    s_nodes = np.unique(iface)
    copy_of = np.full(n, -1, dtype=np.int64)
    copy_of[s_nodes] = n + np.arange(len(s_nodes))
    new_tris = tris.copy()
    sub = new_tris[inside]
    swap = copy_of[sub] >= 0
    sub[swap] = copy_of[sub][swap]
    new_tris[inside] = sub
    vertices = np.vstack([points, points[s_nodes]])
    pairs = np.column_stack([s_nodes, copy_of[s_nodes]])
    edges = np.column_stack([iface, copy_of[iface]])
    lengths = np.linalg.norm(points[iface[:, 1]] - points[iface[:, 0]], axis=1)

    bottom = np.flatnonzero(points[:, 1] == -0.5)
    top = np.flatnonzero(points[:, 1] == 0.5)
    bottom = bottom[np.argsort(points[bottom, 0])]
    top = top[np.argsort(points[top, 0])]
    if len(bottom) != len(top) or np.any(points[bottom, 0] != points[top, 0]):
        raise MeshError("lid nodes do not match")
    mesh = MeshedCell(vertices, new_tris, inside.copy(), pairs, edges, lengths,
                      np.column_stack([bottom, top]), h, d)
    for arr in (mesh.vertices, mesh.triangles, mesh.inside, mesh.interface_pairs,
                mesh.interface_edges, mesh.edge_lengths, mesh.lid_pairs):
        arr.setflags(write=False)
    return mesh


def build_cell_mesh(geom: CellGeometry, h: float) -> MeshedCell:
    """Conforming triangulation of the unit cell with the trap boundary as interface.

    Raises
    ------
    MeshError
        If the trap is within ``max(h, margin)`` of the cell boundary, a side
        is shorter than ``h/2``, or a side cannot be recovered.
    """
    d = geom.d
    nx, ny = _grid_shape(d, h)
    points, tris = _structured(d, nx, ny)
    hmax = max(d / nx, 1.0 / ny)
    if geom.trap is None:
        return _finalize(points, tris, np.zeros(len(tris), bool), np.zeros((0, 2)), h, d)

    polygon = np.asarray(geom.trap, dtype=float)
    margin = max(geom.margin, h) if geom.margin > 0 else h
    if geom.boundary_distance() < margin * (1 - 1e-9):
        raise MeshError(f"trap is closer than {margin:.3g} to the cell boundary; refine the mesh")
    sides = np.linalg.norm(np.roll(polygon, -1, axis=0) - polygon, axis=1)
    if sides.min() < 0.5 * h * (1 - 1e-9):
        raise MeshError("trap side shorter than h/2; refine the mesh")

    on_boundary = ((points[:, 0] == 0) | (points[:, 0] == d)
                   | (points[:, 1] == -0.5) | (points[:, 1] == 0.5))
    points = _snap_to_polygon(points, tris, polygon, hmax, on_boundary)
    tri = _Triangulation(points, tris, hmax)
    corners = [tri.insert_point(c) for c in polygon]
    iface = []
    for i in range(len(corners)):
        chain = tri.insert_segment(corners[i], corners[(i + 1) % len(corners)])
        iface.extend(zip(chain[:-1], chain[1:]))
    points, tris = tri.arrays()
    centroids = points[tris].mean(axis=1)
    inside = points_in_polygon(centroids, polygon)
    mesh = _finalize(points, tris, inside, np.array(iface), h, d)
    _check_sides(mesh, polygon)
    return mesh


def build_line_interface_mesh(d: float, h: float, y0: float = 0.0) -> MeshedCell:
    """Cell mesh whose interface is the full cross-section line ``y = y0``.

    The lower part ``y < y0`` plays the role of the interior side.
    """
    nx, ny = _grid_shape(d, h)
    j0 = (y0 + 0.5) * ny
    if abs(j0 - round(j0)) > 1e-9 or not 0 < round(j0) < ny:
        raise MeshError(f"interface line y={y0} is not a grid line for h={h}")
    points, tris = _structured(d, nx, ny)
    row = np.flatnonzero(np.isclose(points[:, 1], y0, atol=1e-12))
    row = row[np.argsort(points[row, 0])]
    points[row, 1] = y0
    iface = np.column_stack([row[:-1], row[1:]])
    inside = points[tris].mean(axis=1)[:, 1] < y0
    return _finalize(points, tris, inside, iface, h, d)


def _check_sides(mesh: MeshedCell, polygon: np.ndarray):
    base = mesh.vertices[: mesh.n_base]
    inside_tris = mesh.base_triangles()[mesh.inside]
    on_s = np.zeros(mesh.n_base, bool)
    on_s[mesh.interface_pairs[:, 0]] = True
    verts = np.unique(inside_tris)
    verts = verts[~on_s[verts]]
    if verts.size and not points_in_polygon(base[verts], polygon).all():
        raise MeshError("a triangle straddles the trap boundary")


def refine(mesh: MeshedCell) -> MeshedCell:
    """Uniform red refinement: every triangle is split into four."""
    base_tris = mesh.base_triangles()
    points = mesh.vertices[: mesh.n_base]
    n = len(points)
    edges = np.vstack([base_tris[:, [0, 1]], base_tris[:, [1, 2]], base_tris[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = 0.5 * (points[uniq[:, 0]] + points[uniq[:, 1]])
    new_points = np.vstack([points, mids])
    nt = len(base_tris)
    m01, m12, m20 = n + inv[:nt], n + inv[nt:2 * nt], n + inv[2 * nt:]
    a, b, c = base_tris[:, 0], base_tris[:, 1], base_tris[:, 2]
    tris = np.vstack([
        np.column_stack([a, m01, m20]),
        np.column_stack([m01, b, m12]),
        np.column_stack([m20, m12, c]),
        np.column_stack([m01, m12, m20]),
    ])
    inside = np.tile(mesh.inside, 4)
    lookup = {tuple(e): n + k for k, e in enumerate(uniq)}
    iface = []
    for p, q in mesh.interface_edges[:, :2]:
        m = lookup[(min(p, q), max(p, q))]
        iface.extend([(p, m), (m, q)])
    return _finalize(new_points, tris, inside, np.array(iface), mesh.h / 2, mesh.d)


def dump_mesh(mesh: MeshedCell, fh: TextIO):
    """Write ``v x y``, ``t i j k tag``, ``ip e i`` and ``lp b t`` lines."""
    for x, y in mesh.vertices:
        fh.write(f"v {x!r} {y!r}\n")
    for (i, j, k), tag in zip(mesh.triangles, mesh.inside):
        fh.write(f"t {i} {j} {k} {'in' if tag else 'out'}\n")
    for e, i in mesh.interface_pairs:
        fh.write(f"ip {e} {i}\n")
    for b, t in mesh.lid_pairs:
        fh.write(f"lp {b} {t}\n")


def interface_length(mesh: MeshedCell) -> float:
    return float(mesh.edge_lengths.sum())


def inside_area(mesh: MeshedCell) -> float:
    return float(mesh.areas()[mesh.inside].sum())
