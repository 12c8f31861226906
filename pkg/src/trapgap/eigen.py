"""Smallest eigenpairs of Hermitian pencils ``A x = lam M x`` with residual certificates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .forms import LidCondition, assemble, total_operator
from .geometry import CellGeometry, effective_unit_coupling
from .mesh import MeshedCell

DENSE_LIMIT = 3000
DEFAULT_TOL = 1e-9
DEFAULT_SEED = 12345


class EigenSolverError(RuntimeError):
    """Eigensolve failed; ``partial`` holds whatever was computed."""

    def __init__(self, message, partial: Optional["SpectrumSlice"] = None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True, eq=False)
class SpectrumSlice:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    k_requested: int
    eigenvectors: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def k_converged(self) -> int:
        return len(self.eigenvalues)

    def scaled(self, factor: float) -> "SpectrumSlice":
        return SpectrumSlice(self.eigenvalues * factor, self.residuals, self.k_requested, self.eigenvectors)


def _onenorm(A) -> float:
    if sps.issparse(A):
        return float(abs(A).sum(axis=0).max())
    return float(np.abs(A).sum(axis=0).max())


def residuals(A, M, eigenvalues, eigenvectors) -> np.ndarray:
    """Normwise backward errors ``|A x - lam M x| / ((|A|_1 + |lam| |M|_1) |x|)``."""
    R = A @ eigenvectors - (M @ eigenvectors) * eigenvalues[None, :]
    scale = (_onenorm(A) + np.abs(eigenvalues) * _onenorm(M)) * np.linalg.norm(eigenvectors, axis=0)
    return np.linalg.norm(R, axis=0) / scale


def smallest_eigs(A, M, k: int, tol: float = DEFAULT_TOL, *, shift: Optional[float] = None,
                  dense_limit: int = DENSE_LIMIT, seed: int = DEFAULT_SEED,
                  keep_vectors: bool = False) -> SpectrumSlice:
    """The ``k`` smallest eigenvalues of the Hermitian pencil ``(A, M)``.

    Small problems use a dense Cholesky-reduced solve; larger ones use
    shift-invert Lanczos (ARPACK) around a slightly negative shift so that
    pencils with a nontrivial kernel stay factorizable.
    """
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if n <= dense_limit:
        Ad = A.toarray() if sps.issparse(A) else np.asarray(A)
        Md = M.toarray() if sps.issparse(M) else np.asarray(M)
        try:
            vals, vecs = sla.eigh(Ad, Md, subset_by_index=[0, k - 1])
        except np.linalg.LinAlgError as exc:
            raise EigenSolverError(f"mass matrix is not positive definite: {exc}") from exc
    else:
        if shift is None:
            shift = -1.0
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        if np.iscomplexobj(A) or np.iscomplexobj(M):
            v0 = v0 + 1j * rng.standard_normal(n)
        ncv = min(n, max(2 * k + 1, 20))
        try:
            vals, vecs = spla.eigsh(sps.csc_matrix(A), k=k, M=sps.csc_matrix(M), sigma=shift,
                                    which="LM", v0=v0, ncv=ncv, tol=0, maxiter=50 * n)
        except spla.ArpackNoConvergence as exc:
            partial = _package(A, M, exc.eigenvalues, exc.eigenvectors, k, keep_vectors)
            raise EigenSolverError("shift-invert Lanczos did not converge", partial) from exc
        except RuntimeError as exc:
            raise EigenSolverError(f"sparse factorization failed: {exc}") from exc
    out = _package(A, M, vals, vecs, k, keep_vectors)
    bad = out.residuals > tol
    if bad.any():
        raise EigenSolverError(
            f"{int(bad.sum())} eigenpairs exceed residual tolerance {tol:g} (max {out.residuals.max():.2e})", out)
    return out


def _package(A, M, vals, vecs, k, keep_vectors) -> SpectrumSlice:
    vals = np.real(np.asarray(vals))
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    res = residuals(A, M, vals, vecs)
    return SpectrumSlice(vals, res, k, vecs if keep_vectors else None)


def solve_cell(geom: CellGeometry, mesh: MeshedCell, lid: LidCondition, k: int,
               tol: float = DEFAULT_TOL, **kwargs) -> SpectrumSlice:
    """Physical eigenvalues at ``geom.epsilon`` from the unit-cell problem.

    The unit cell is solved with coupling ``a_eps * eps`` and the
    eigenvalues are divided by ``eps**2``.
    """
    forms = assemble(mesh, lid)
    A, M = total_operator(forms, effective_unit_coupling(geom))
    return smallest_eigs(A, M, k, tol, **kwargs).scaled(1.0 / geom.epsilon**2)


def degenerate_groups(eigenvalues: np.ndarray, rtol: float = 1e-8) -> list[list[int]]:
    """Group indices of numerically repeated eigenvalues (reporting only)."""
    groups: list[list[int]] = []
    for i, lam in enumerate(eigenvalues):
        if groups and abs(lam - eigenvalues[groups[-1][-1]]) <= rtol * max(1.0, abs(lam)):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups
