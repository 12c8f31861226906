"""Period cell, polygonal trap and the measure-derived gap constants.

The unscaled period cell is ``Y = (0, d) x (-1/2, 1/2)``.  The trap ``B`` is a
simple polygon strictly inside ``Y`` and ``S`` is its boundary.  The physical
cell at scale ``eps`` is ``eps * Y``; all numerics run on ``Y`` and are
rescaled algebraically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class GeometryError(ValueError):
    """Invalid cell or trap geometry."""


CouplingRule = Callable[[float], float]


def linear_rule(a: float) -> CouplingRule:
    """The default rule ``a_eps = a * eps``."""
    return lambda eps: a * eps


def power_rule(coefficient: float, power: float) -> CouplingRule:
    return lambda eps: coefficient * eps**power


def affine_rule(a: float, b: float) -> CouplingRule:
    """``a_eps = a * eps * (1 + b * eps)``; still has ``a_eps / eps -> a``."""
    return lambda eps: a * eps * (1.0 + b * eps)


def polygon_area(vertices: np.ndarray) -> float:
    """Signed shoelace area (positive for counter-clockwise order)."""
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_perimeter(vertices: np.ndarray) -> float:
    return float(np.linalg.norm(np.roll(vertices, -1, axis=0) - vertices, axis=1).sum())


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and 0 not in (d1, d2, d3, d4):
        return True

    def on_segment(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    return ((d1 == 0 and on_segment(q1, q2, p1)) or (d2 == 0 and on_segment(q1, q2, p2))
            or (d3 == 0 and on_segment(p1, p2, q1)) or (d4 == 0 and on_segment(p1, p2, q2)))


def is_simple_polygon(vertices: np.ndarray) -> bool:
    n = len(vertices)
    if n < 3:
        return False
    if np.any(np.linalg.norm(np.roll(vertices, -1, axis=0) - vertices, axis=1) == 0):
        return False
    for i in range(n):
        p1, p2 = vertices[i], vertices[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if _segments_cross(p1, p2, vertices[j], vertices[(j + 1) % n]):
                return False
    return True


def rectangle(cx: float, cy: float, w: float, h: float) -> np.ndarray:
    """Axis-aligned rectangle with center ``(cx, cy)``, counter-clockwise."""
    return np.array([[cx - w / 2, cy - h / 2], [cx + w / 2, cy - h / 2],
                     [cx + w / 2, cy + h / 2], [cx - w / 2, cy + h / 2]])


def regular_polygon(cx: float, cy: float, radius: float, n: int, rotation: float = 0.0) -> np.ndarray:
    t = rotation + 2 * np.pi * np.arange(n) / n
    return np.column_stack([cx + radius * np.cos(t), cy + radius * np.sin(t)])


@dataclass(frozen=True)
class Measures:
    vol_Y: float
    vol_B: float
    vol_F: float
    area_S: float


@dataclass(frozen=True)
class GapConstants:
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0 < self.alpha < self.beta:
            raise GeometryError(f"gap constants must satisfy 0 < alpha < beta, got {self.alpha}, {self.beta}")


@dataclass(frozen=True, eq=False)
class CellGeometry:
    """Period cell of width ``d`` containing at most one polygonal trap.

    Parameters
    ----------
    d : float
        Cross-section width, ``omega = (0, d)``.
    trap : array_like or None
        Polygon vertices, shape ``(n, 2)``.  Stored counter-clockwise.
        ``None`` gives the trap-free cell used by the separable oracles.
    epsilon : float
        Scale of the physical cell.
    coupling_a : float
        Limit constant ``a = lim a_eps / eps``.
    coupling_rule : callable, optional
        ``eps -> a_eps``.  Defaults to ``a * eps``.
    margin : float
        Minimal distance between trap and cell boundary.  ``0`` only demands
        strict inclusion; meshing additionally enforces one cell ``h``.
    """

    d: float
    trap: Optional[np.ndarray]
    epsilon: float = 1.0
    coupling_a: float = 1.0
    coupling_rule: Optional[CouplingRule] = field(default=None, repr=False)
    margin: float = 0.0

    def __post_init__(self):
        if not self.d > 0:
            raise GeometryError(f"cell width must be positive, got {self.d}")
        if not self.epsilon > 0:
            raise GeometryError(f"epsilon must be positive, got {self.epsilon}")
        if self.coupling_a < 0:
            raise GeometryError("coupling constant a must be nonnegative")
        if self.coupling_rule is None:
            object.__setattr__(self, "coupling_rule", linear_rule(self.coupling_a))
        if self.trap is None:
            return
        verts = np.array(self.trap, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise GeometryError("trap must be a sequence of at least three 2D points")
        area = polygon_area(verts)
        if abs(area) <= 1e-14:
            raise GeometryError("trap polygon is degenerate (zero area)")
        if not is_simple_polygon(verts):
            raise GeometryError("trap polygon is not simple")
        if area < 0:
            verts = verts[::-1].copy()
        verts.setflags(write=False)
        object.__setattr__(self, "trap", verts)
        gap = self.boundary_distance()
        if gap <= 0 or gap < self.margin:
            raise GeometryError(
                f"trap must lie strictly inside the cell with margin {self.margin}; distance is {gap:.3g}")

    def boundary_distance(self) -> float:
        """Distance from the trap closure to the cell boundary."""
        if self.trap is None:
            return math.inf
        x, y = self.trap[:, 0], self.trap[:, 1]
        return float(min(x.min(), self.d - x.max(), y.min() + 0.5, 0.5 - y.max()))

    @property
    def has_trap(self) -> bool:
        return self.trap is not None

    def with_epsilon(self, epsilon: float) -> "CellGeometry":
        return CellGeometry(self.d, self.trap, epsilon, self.coupling_a, self.coupling_rule, self.margin)

    def with_coupling(self, a: float, rule: Optional[CouplingRule] = None) -> "CellGeometry":
        return CellGeometry(self.d, self.trap, self.epsilon, a, rule, self.margin)

    def coupling(self, epsilon: Optional[float] = None) -> float:
        """Physical coupling ``a_eps``."""
        return float(self.coupling_rule(self.epsilon if epsilon is None else epsilon))

    def coupling_rule_consistent(self, eps_list: Sequence[float], rtol: float) -> bool:
        """Check ``a_eps / eps`` is within ``rtol`` of ``a`` on ``eps_list``."""
        a = self.coupling_a
        for eps in eps_list:
            ratio = self.coupling(eps) / eps
            if abs(ratio - a) > rtol * max(abs(a), 1e-300):
                return False
        return True


def measures(geom: CellGeometry) -> Measures:
    vol_y = geom.d * 1.0
    if geom.trap is None:
        return Measures(vol_y, 0.0, vol_y, 0.0)
    vol_b = polygon_area(geom.trap)
    if vol_b <= 0:
        raise GeometryError("trap polygon has zero area")
    return Measures(vol_y, vol_b, vol_y - vol_b, polygon_perimeter(geom.trap))


def limit_gap(geom: CellGeometry) -> GapConstants:
    """Limit gap endpoints ``alpha = a|S|/|B|`` and ``beta = alpha |Y| / (|Y| - |B|)``."""
    if geom.trap is None:
        raise GeometryError("limit gap needs a trap")
    m = measures(geom)
    alpha = geom.coupling_a * m.area_S / m.vol_B
    return GapConstants(alpha, alpha * m.vol_Y / (m.vol_Y - m.vol_B))


def effective_unit_coupling(geom: CellGeometry) -> float:
    """Coupling ``a_eps * eps`` on the unscaled cell; physical eigenvalues are unit-cell ones over ``eps**2``."""
    return geom.coupling() * geom.epsilon


def canonical_geometry(epsilon: float = 1.0, a: float = 1.0) -> CellGeometry:
    """Unit-width cell with the square trap ``(0.25, 0.75) x (-0.25, 0.25)``."""
    return CellGeometry(1.0, rectangle(0.5, 0.0, 0.5, 0.5), epsilon, a)
