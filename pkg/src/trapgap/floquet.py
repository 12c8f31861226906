"""Floquet sweeps, band intervals, Neumann/Dirichlet brackets and gap detection."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .eigen import DEFAULT_TOL, EigenSolverError, smallest_eigs
from .forms import LidCondition, assemble, total_operator
from .geometry import CellGeometry, effective_unit_coupling
from .mesh import MeshedCell


class BandError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class BandStructure:
    """Sampled bands over a Floquet grid together with their brackets.

    ``values[i, k]`` is the (k+1)-th eigenvalue at ``phi_grid[i]``; the grid
    covers ``[0, 2 pi)`` (the half ``(pi, 2 pi)`` is mirrored when the sweep
    uses conjugation symmetry).  ``lambda_N`` and ``lambda_D`` are the
    Neumann and Dirichlet lid eigenvalues.
    """

    phi_grid: np.ndarray
    values: np.ndarray
    lambda_N: np.ndarray
    lambda_D: np.ndarray
    epsilon: float
    coupling: float
    unit_coupling: float
    tol: float
    solved_phis: np.ndarray = field(repr=False, default=None)

    @property
    def k_max(self) -> int:
        return self.values.shape[1]

    @property
    def lower(self) -> np.ndarray:
        return self.values.min(axis=0)

    @property
    def upper(self) -> np.ndarray:
        return self.values.max(axis=0)

    def at_phi(self, phi: float) -> np.ndarray:
        i = int(np.argmin(np.abs(np.angle(np.exp(1j * (self.phi_grid - phi))))))
        if abs(np.angle(np.exp(1j * (self.phi_grid[i] - phi)))) > 1e-12:
            raise KeyError(f"phi={phi} is not on the grid")
        return self.values[i]

    def enclosure_slack(self) -> np.ndarray:
        """Signed slack ``min(lam_phi - lam_N, lam_D - lam_phi)`` per (phi, k), normalized."""
        scale = np.maximum(1.0, np.abs(self.lambda_D))[None, :]
        lo = (self.values - self.lambda_N[None, :]) / scale
        hi = (self.lambda_D[None, :] - self.values) / scale
        return np.minimum(lo, hi)

    def validate(self):
        bound = 10 * self.tol
        if self.enclosure_slack().min() < -bound:
            raise BandError(f"enclosure violated by {-self.enclosure_slack().min():.3e} (relative)")
        if abs(self.lower[0]) > bound * max(1.0, abs(self.upper[0])):
            raise BandError(f"first band does not start at zero: {self.lower[0]:.3e}")


def default_phi_grid(phi_count: int) -> np.ndarray:
    """``phi_count`` uniform angles on ``[0, pi]``, both ends included."""
    if phi_count < 2:
        raise ValueError("phi_count must be at least 2")
    return np.linspace(0.0, math.pi, phi_count)


def _mirror(phis: np.ndarray, values: np.ndarray):
    inner = (phis > 0) & (phis < math.pi)
    full_phi = np.concatenate([phis, 2 * math.pi - phis[inner]])
    full_val = np.vstack([values, values[inner]])
    order = np.argsort(full_phi)
    return full_phi[order], full_val[order]


def band_structure(geom: CellGeometry, mesh: MeshedCell, phi_count: int = 17, k_max: int = 5,
                   tol: float = DEFAULT_TOL, *, phis: Optional[Sequence[float]] = None,
                   symmetric: bool = True, jobs: int = 1, **solver) -> BandStructure:
    """Solve the Floquet cell problems on a grid plus the Neumann and Dirichlet pencils.

    With ``symmetric`` the sweep covers ``[0, pi]`` and the other half is
    filled in by ``lam(phi) = lam(2 pi - phi)``.  An explicit ``phis`` list
    must contain both ``0`` and ``pi``.
    """
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    if phis is None:
        phis = default_phi_grid(phi_count) if symmetric else np.linspace(0, 2 * math.pi, phi_count, endpoint=False)
    phis = np.sort(np.mod(np.asarray(phis, dtype=float), 2 * math.pi))
    if not (np.any(phis == 0.0) and np.any(np.isclose(phis, math.pi, rtol=0, atol=1e-14))):
        raise ValueError("phi grid must contain 0 and pi")
    phis[np.isclose(phis, math.pi, rtol=0, atol=1e-14)] = math.pi
    if symmetric and np.any(phis > math.pi):
        raise ValueError("symmetric sweep takes angles in [0, pi]")

    c = effective_unit_coupling(geom)
    scale = 1.0 / geom.epsilon**2
    lids = [LidCondition.floquet(p) for p in phis] + [LidCondition.neumann(), LidCondition.dirichlet()]

    def solve(lid):
        A, M = total_operator(assemble(mesh, lid), c)
        try:
            return smallest_eigs(A, M, k_max, tol, **solver).eigenvalues * scale
        except EigenSolverError as exc:
            raise BandError(f"eigensolve failed for lid condition {lid}: {exc}") from exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(solve, lids))
    else:
        results = [solve(lid) for lid in lids]
    values = np.array(results[:-2])
    lam_n, lam_d = results[-2], results[-1]
    grid, full = _mirror(phis, values) if symmetric else (phis, values)
    bands = BandStructure(grid, full, lam_n, lam_d, geom.epsilon, geom.coupling(), c, tol, phis)
    bands.validate()
    return bands


@dataclass(frozen=True)
class Gap:
    lo: float
    hi: float
    status: str
    below_band: int
    certified_lo: Optional[float] = None
    certified_hi: Optional[float] = None

    def as_dict(self) -> dict:
        out = {"lo": self.lo, "hi": self.hi, "status": self.status, "below_band": self.below_band}
        if self.status == "certified":
            out["certified_lo"] = self.certified_lo
            out["certified_hi"] = self.certified_hi
        return out


@dataclass(frozen=True)
class GapReport:
    window: float
    gaps: tuple
    epsilon: float
    complete_below: float

    def certified(self) -> list:
        return [g for g in self.gaps if g.status == "certified"]


def gaps_from_edges(lower: Sequence[float], upper: Sequence[float], L: float,
                    lambda_N: Optional[Sequence[float]] = None, lambda_D: Optional[Sequence[float]] = None,
                    epsilon: float = 1.0) -> GapReport:
    """Gaps between consecutive bands inside ``[0, L]``.

    A gap ``(upper[k], lower[k+1])`` is *estimated* from the grid extrema; it
    is *certified* when ``lambda_D[k] < lambda_N[k+1]`` as well, because then
    the brackets enclose the true band edges.
    """
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    gaps = []
    for k in range(len(lower) - 1):
        lo, hi = upper[k], lower[k + 1]
        if not lo < hi or lo >= L:
            continue
        hi_clip = min(hi, L)
        status, clo, chi = "estimated", None, None
        if lambda_N is not None and lambda_D is not None and lambda_D[k] < lambda_N[k + 1]:
            status = "certified"
            # the grid extrema sit inside the brackets up to rounding; clip so the
            # certified interval stays a sub-interval of the estimated one
            clo, chi = float(max(lambda_D[k], lo)), float(min(lambda_N[k + 1], hi_clip))
        gaps.append(Gap(float(lo), float(hi_clip), status, k + 1, clo, chi))
    return GapReport(float(L), tuple(gaps), epsilon, float(lower[-1]))


def detect_gaps(bands: BandStructure, L: float) -> GapReport:
    return gaps_from_edges(bands.lower, bands.upper, L, bands.lambda_N, bands.lambda_D, bands.epsilon)


def first_gap_endpoints(bands: BandStructure) -> tuple[float, float]:
    """``(alpha_eps, beta_eps)`` = (top of band 1, bottom of band 2) over the grid."""
    if bands.k_max < 2:
        raise ValueError("need at least two bands")
    return float(bands.upper[0]), float(bands.lower[1])
