"""Discrete stiffness, mass and interface-jump forms with lid conditions.

Piecewise-linear elements on the broken mesh.  The jump form is the edge
mass matrix applied to ``u_ext - u_int`` on every interface segment.  Lid
conditions are imposed by master-slave reduction ``x_full = P @ x``, so the
reduced matrices ``P^H K P`` etc. stay Hermitian and the mass stays
positive definite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np
import scipy.sparse as sps

from .mesh import MeshedCell

# sign of the interior trace in the jump; -1 gives u_ext - u_int
_JUMP_SIGN = -1.0


@dataclass(frozen=True)
class LidCondition:
    """Condition on the lids ``y = -1/2`` and ``y = +1/2``.

    ``kind`` is ``"neumann"``, ``"dirichlet"`` or ``"floquet"``; for Floquet
    the top trace equals ``exp(i phi)`` times the bottom trace.
    """

    kind: str
    phi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("neumann", "dirichlet", "floquet"):
            raise ValueError(f"unknown lid condition {self.kind!r}")
        if self.kind == "floquet":
            object.__setattr__(self, "phi", float(self.phi) % (2 * math.pi))
        else:
            object.__setattr__(self, "phi", 0.0)

    @classmethod
    def neumann(cls):
        return cls("neumann")

    @classmethod
    def dirichlet(cls):
        return cls("dirichlet")

    @classmethod
    def floquet(cls, phi: float):
        return cls("floquet", phi)

    @classmethod
    def parse(cls, text: str) -> "LidCondition":
        """Parse ``neumann``, ``dirichlet`` or ``floquet:PHI`` (PHI in radians, ``pi`` allowed)."""
        text = text.strip().lower()
        if text in ("neumann", "dirichlet"):
            return cls(text)
        if text.startswith("floquet:"):
            return cls.floquet(_parse_angle(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse lid condition {text!r}")

    @property
    def phase(self) -> complex:
        if self.phi == 0.0:
            return 1.0
        if self.phi == math.pi:
            return -1.0
        return complex(math.cos(self.phi), math.sin(self.phi))

    def __str__(self):
        return f"floquet:{self.phi!r}" if self.kind == "floquet" else self.kind


def _parse_angle(text: str) -> float:
    text = text.strip().replace(" ", "")
    if "pi" not in text:
        return float(text)
    num, _, den = text.partition("/")
    num = num.replace("*", "").replace("pi", "")
    factor = 1.0 if num in ("", "+") else -1.0 if num == "-" else float(num)
    return factor * math.pi / (float(den) if den else 1.0)


@dataclass(frozen=True, eq=False)
class AssembledForms:
    """Reduced matrices for one mesh and lid condition.

    ``K`` is the broken stiffness, ``J`` the jump form and ``M`` the mass,
    all already reduced with ``constraint_map`` (full x reduced).
    """

    K: sps.csr_matrix
    J: sps.csr_matrix
    M: sps.csr_matrix
    constraint_map: sps.csr_matrix
    free: np.ndarray
    lid: LidCondition
    n_full: int

    @property
    def n_reduced(self) -> int:
        return self.K.shape[0]

    def restrict(self, full: np.ndarray) -> np.ndarray:
        """Reduced coordinates of a full vector that already satisfies the lid condition."""
        x = np.asarray(full)[self.free]
        if np.abs(self.constraint_map @ x - full).max(initial=0.0) > 1e-12 * max(1.0, np.abs(full).max()):
            raise ValueError("vector does not satisfy the lid condition")
        return x

    def extend(self, reduced: np.ndarray) -> np.ndarray:
        return self.constraint_map @ reduced


def element_matrices(mesh: MeshedCell):
    """Per-triangle P1 stiffness ``(T, 3, 3)`` and mass ``(T, 3, 3)``."""
    p = mesh.vertices[mesh.triangles]
    e0 = p[:, 2] - p[:, 1]
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    area = 0.5 * (e2[:, 0] * (-e1[:, 1]) - e2[:, 1] * (-e1[:, 0]))
    # gradient of barycentric i is rot90(opposite edge) / (2 area)
    edges = np.stack([e0, e1, e2], axis=1)
    grads = np.stack([-edges[..., 1], edges[..., 0]], axis=-1) / (2 * area)[:, None, None]
    stiff = area[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    mass = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))[None]
    return stiff, mass


def _assemble_full(mesh: MeshedCell):
    n = mesh.n_vertices
    stiff, mass = element_matrices(mesh)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    K = sps.coo_matrix((stiff.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sps.coo_matrix((mass.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    E = mesh.interface_edges
    L = mesh.edge_lengths
    local = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    ext, itr = E[:, :2], E[:, 2:]
    rr, cc, vv = [], [], []
    for a_nodes, b_nodes, sign in ((ext, ext, 1.0), (itr, itr, 1.0),
                                   (ext, itr, _JUMP_SIGN), (itr, ext, _JUMP_SIGN)):
        for i in range(2):
            for j in range(2):
                rr.append(a_nodes[:, i])
                cc.append(b_nodes[:, j])
                vv.append(sign * local[i, j] * L)
    if len(E):
        J = sps.coo_matrix((np.concatenate(vv), (np.concatenate(rr), np.concatenate(cc))), shape=(n, n)).tocsr()
    else:
        J = sps.csr_matrix((n, n))
    return K, J, M


def constraint_map(mesh: MeshedCell, lid: LidCondition) -> tuple[sps.csr_matrix, np.ndarray]:
    n = mesh.n_vertices
    bottom, top = mesh.lid_pairs[:, 0], mesh.lid_pairs[:, 1]
    if lid.kind == "neumann":
        return sps.identity(n, format="csr"), np.arange(n)
    keep = np.ones(n, bool)
    if lid.kind == "dirichlet":
        keep[bottom] = False
        keep[top] = False
        free = np.flatnonzero(keep)
        P = sps.coo_matrix((np.ones(len(free)), (free, np.arange(len(free)))), shape=(n, len(free)))
        return P.tocsr(), free
    keep[top] = False
    free = np.flatnonzero(keep)
    col = np.full(n, -1)
    col[free] = np.arange(len(free))
    phase = lid.phase
    dtype = complex if isinstance(phase, complex) else float
    rows = np.concatenate([free, top])
    cols = np.concatenate([np.arange(len(free)), col[bottom]])
    vals = np.concatenate([np.ones(len(free), dtype), np.full(len(top), phase, dtype)])
    return sps.coo_matrix((vals, (rows, cols)), shape=(n, len(free))).tocsr(), free


def assemble(mesh: MeshedCell, lid: LidCondition) -> AssembledForms:
    K, J, M = _assemble_full(mesh)
    P, free = constraint_map(mesh, lid)
    PH = P.conj().T.tocsr()

    def reduce(A):
        R = (PH @ A @ P).tocsr()
        R.sum_duplicates()
        return R

    return AssembledForms(reduce(K), reduce(J), reduce(M), P, free, lid, mesh.n_vertices)


def total_operator(forms: AssembledForms, coupling_c: float):
    """Pencil ``(K + c J, M)``."""
    if coupling_c < 0:
        raise ValueError(f"coupling must be nonnegative, got {coupling_c}")
    if coupling_c == 0:
        return forms.K.copy(), forms.M
    return (forms.K + coupling_c * forms.J).tocsr(), forms.M


def dump_matrix(matrix, fh: TextIO):
    """Coordinate triplets ``row col re im``, one per stored entry."""
    coo = sps.coo_matrix(matrix)
    for r, c, v in zip(coo.row, coo.col, coo.data):
        v = complex(v)
        fh.write(f"{r} {c} {v.real!r} {v.imag!r}\n")
