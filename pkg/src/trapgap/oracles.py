"""Independent reference spectra.

* the trap-free cell, whose spectrum separates into transverse Neumann
  modes and longitudinal quasi-periodic (or Neumann) modes;
* a 1D periodic chain with one delta-prime vertex per period, solved both
  by its transfer-matrix dispersion relation and by a finite-volume chain;
* the 2D cell cut by a full straight interface, which separates into the
  two previous ingredients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

SCAN_STEP = math.pi / 50
# irrational offset keeps scan points off the exact roots k = m * pi
_SCAN_OFFSET = SCAN_STEP * (math.sqrt(5) - 1) / 7


class OracleError(RuntimeError):
    pass


def separable_eigs(d: float, phi: float, count: int, lids: str = "floquet") -> np.ndarray:
    """Smallest eigenvalues of the trap-free unit cell of width ``d``.

    ``lids="floquet"`` gives ``(pi j / d)^2 + (phi + 2 pi m)^2``,
    ``lids="neumann"`` gives ``(pi j / d)^2 + (pi m)^2`` with ``m >= 0``.
    """
    if count < 1:
        raise ValueError("count must be positive")
    n = count + 2
    trans = (np.pi * np.arange(n) / d) ** 2
    if lids == "floquet":
        m = np.arange(-n, n + 1)
        longi = (phi + 2 * np.pi * m) ** 2
    elif lids == "neumann":
        longi = (np.pi * np.arange(n)) ** 2
    else:
        raise ValueError(f"unknown lid type {lids!r}")
    return np.sort((trans[:, None] + longi[None, :]).ravel())[:count]


def kp_half_trace(c: float, k):
    """Half trace of the period transfer matrix: ``cos k - k sin k / (2c)``.

    Free flight over unit length composed with a vertex where the derivative
    is continuous and the value jumps by ``u' / c``.
    """
    k = np.asarray(k, dtype=float)
    return np.cos(k) - k * np.sin(k) / (2.0 * c)


def _scan_bisect(f, lo: float, hi: float, want: int) -> list[float]:
    """Roots of ``f`` on ``(lo, hi)`` by scanning with ``SCAN_STEP`` and bisecting sign changes."""
    roots = []
    trace = []
    k0 = lo + _SCAN_OFFSET
    f0 = f(k0)
    while k0 < hi and len(roots) < want:
        k1 = min(k0 + SCAN_STEP, hi - 1e-12 * max(1.0, hi))
        if k1 <= k0:
            break
        f1 = f(k1)
        trace.append((k0, f0))
        if f0 == 0.0:
            roots.append(k0)
        elif f0 * f1 < 0:
            roots.append(brentq(f, k0, k1, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
        k0, f0 = k1, f1
    if len(roots) < want:
        raise OracleError(f"found {len(roots)} of {want} roots in ({lo:.6g}, {hi:.6g}); last scan values {trace[-3:]}")
    return roots


def _gap_root(c: float, m: int) -> float:
    """Lower gap edge below ``k = m pi``.

    ``|half trace| = 1`` holds exactly at ``m pi``.  Writing ``k = m pi + t``
    and dividing that root out leaves a simple root in ``t < 0`` that stays
    bracketed even when the gap is far narrower than the scan step.
    """
    sign = (-1.0) ** m

    def g(t):
        half_angle = -2.0 * math.sin(t / 2) ** 2 / t if t != 0 else 0.0
        return sign * (half_angle - (m * math.pi + t) * float(np.sinc(t / math.pi)) / (2.0 * c))

    return m * math.pi + _scan_bisect(g, -math.pi, 0.0, 1)[0]


def kp_eigs(c: float, phi: float, count: int) -> np.ndarray:
    """Smallest ``count`` eigenvalues ``k^2`` of the 1D chain at quasi-momentum ``phi``."""
    if not c > 0:
        raise ValueError("delta-prime coupling must be positive")
    target = math.cos(phi)
    ks = []
    m = 1
    if abs(abs(target) - 1.0) < 1e-14:
        if target > 0:
            ks.append(0.0)
        while len(ks) < count:
            if (-1.0) ** m == round(target):
                ks.extend([_gap_root(c, m), m * math.pi])
            m += 1
    else:
        while len(ks) < count:
            # exactly one root per band interval ((m-1) pi, m pi)
            ks.extend(_scan_bisect(lambda k: float(kp_half_trace(c, k)) - target,
                                   (m - 1) * math.pi, m * math.pi, 1))
            m += 1
    return np.array(sorted(k * k for k in ks)[:count])


def kp_band_edges(c: float, band_index: int) -> tuple[float, float]:
    """Edges ``(lo, hi)`` of band ``band_index`` (1-based) in ``k^2``.

    Band ``n`` is ``[((n - 1) pi)^2, k_n^2]`` where ``k_n`` is the lower edge
    of the gap ending at ``n pi``; the first band starts at ``0``.
    """
    if not c > 0:
        raise ValueError("delta-prime coupling must be positive")
    if band_index < 1:
        raise ValueError("band index is 1-based")
    lo = ((band_index - 1) * math.pi) ** 2
    return lo, _gap_root(c, band_index) ** 2


def fd_chain_eigs(c: float, phi: float, count: int, nodes: int = 10_000) -> np.ndarray:
    """Finite-volume delta-prime chain on one period with ``nodes`` cells.

    The vertex sits on the link that wraps around the period; that link
    has resistance ``h + 1/c`` (two half cells in series with the vertex).
    """
    h = 1.0 / nodes
    g = np.full(nodes, 1.0 / h)
    g[-1] = 1.0 / (h + 1.0 / c)
    phase = np.exp(1j * phi)
    i = np.arange(nodes)
    j = (i + 1) % nodes
    w = np.ones(nodes, complex)
    w[-1] = phase
    diag = g + np.roll(g, 1)
    A = sps.coo_matrix((np.concatenate([diag, -g * w, -g * np.conj(w)]),
                        (np.concatenate([i, i, j]), np.concatenate([i, j, i]))), shape=(nodes, nodes)).tocsc()
    v0 = np.random.default_rng(0).standard_normal(nodes).astype(complex)
    vals = spla.eigsh(A, k=count, M=sps.identity(nodes, format="csc") * h, sigma=-1.0,
                      which="LM", v0=v0, tol=0)[0]
    return np.sort(np.real(vals))


def straight_interface_eigs(d: float, c: float, phi: float, count: int) -> np.ndarray:
    """Transverse Neumann modes plus the 1D chain spectrum."""
    trans = (np.pi * np.arange(count) / d) ** 2
    longi = kp_eigs(c, phi, count)
    return np.sort((trans[:, None] + longi[None, :]).ravel())[:count]


def relative_errors(computed, exact, floor: float = 1.0) -> np.ndarray:
    computed, exact = np.asarray(computed), np.asarray(exact)
    return np.abs(computed - exact) / np.maximum(np.abs(exact), floor)


@dataclass(frozen=True)
class StraightInterfaceResult:
    phis: tuple
    computed: np.ndarray
    exact: np.ndarray
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def straight_interface_check(d: float, c: float, h: float, k_max: int, tol: float = 1e-2,
                             phis=(0.0, math.pi / 2, math.pi)) -> StraightInterfaceResult:
    """Compare the 2D jump assembly on a full-width interface with the separable oracle."""
    from .eigen import smallest_eigs
    from .forms import LidCondition, assemble, total_operator
    from .mesh import build_line_interface_mesh

    if not c > 0:
        raise ValueError("straight-interface check needs c > 0")
    mesh = build_line_interface_mesh(d, h)
    computed, exact = [], []
    for phi in phis:
        A, M = total_operator(assemble(mesh, LidCondition.floquet(phi)), c)
        computed.append(smallest_eigs(A, M, k_max).eigenvalues)
        exact.append(straight_interface_eigs(d, c, phi, k_max))
    computed, exact = np.array(computed), np.array(exact)
    err = float(relative_errors(computed, exact).max())
    return StraightInterfaceResult(tuple(phis), computed, exact, err, tol)
