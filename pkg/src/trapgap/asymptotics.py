"""Small-cell limit study: trial-function bounds, scaling identity and gap convergence.

Everything is solved on the unit cell with coupling ``a_eps * eps`` and then
divided by ``eps**2``.  Two nested meshes give one Richardson step in ``h``
before the endpoints are compared with the geometric limits.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .eigen import DEFAULT_TOL, smallest_eigs, solve_cell
from .floquet import band_structure, first_gap_endpoints
from .forms import LidCondition, assemble, total_operator
from .geometry import CellGeometry, GapConstants, effective_unit_coupling, limit_gap, measures
from .mesh import MeshedCell, build_cell_mesh, refine


class UpperBoundViolation(AssertionError):
    """A computed eigenvalue exceeds an exact trial-function bound."""


class ScalingError(AssertionError):
    pass


@dataclass(frozen=True)
class TrialBounds:
    """Energies of the piecewise-constant trial functions at the geometry's scale.

    ``E_D`` uses the function equal to ``|B|^{-1/2}`` in the trap and zero
    outside; ``E_N`` the mean-zero function equal to ``kappa_B`` in the trap
    and ``kappa_F`` outside.
    """

    E_D: float
    E_N: float
    kappa_F: float
    kappa_B: float


def trial_bounds(geom: CellGeometry) -> TrialBounds:
    m = measures(geom)
    eps = geom.epsilon
    a_eps = geom.coupling()
    vol_y, vol_b, vol_f, area_s = eps**2 * m.vol_Y, eps**2 * m.vol_B, eps**2 * m.vol_F, eps * m.area_S
    kappa_f = -math.sqrt(vol_b / (vol_f * vol_y))
    kappa_b = math.sqrt(vol_f / (vol_b * vol_y))
    return TrialBounds(a_eps * area_s / vol_b, a_eps * area_s * (kappa_f - kappa_b) ** 2, kappa_f, kappa_b)


def trial_vectors(mesh: MeshedCell, geom: CellGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Nodal vectors of both trial functions on the unit-cell mesh (unit-cell normalization)."""
    m = measures(geom)
    inside_nodes = np.unique(mesh.triangles[mesh.inside])
    v_d = np.zeros(mesh.n_vertices)
    v_d[inside_nodes] = m.vol_B ** -0.5
    v_n = np.full(mesh.n_vertices, -math.sqrt(m.vol_B / (m.vol_F * m.vol_Y)))
    v_n[inside_nodes] = math.sqrt(m.vol_F / (m.vol_B * m.vol_Y))
    return v_d, v_n


def rayleigh_quotient(A, M, x) -> float:
    x = np.asarray(x)
    return float(np.real(np.vdot(x, A @ x)) / np.real(np.vdot(x, M @ x)))


@dataclass(frozen=True)
class UpperBoundCheck:
    lambda_1_D: float
    E_D: float
    lambda_2_N: float
    E_N: float
    rayleigh_D: float
    rayleigh_N: float
    tol: float
    skipped: bool = False

    @property
    def margin_D(self) -> float:
        return self.E_D - self.lambda_1_D

    @property
    def margin_N(self) -> float:
        return self.E_N - self.lambda_2_N

    @property
    def passed(self) -> bool:
        if self.skipped:
            return True
        return self.margin_D >= -10 * self.tol and self.margin_N >= -10 * self.tol


def verify_upper_bounds(geom: CellGeometry, mesh: MeshedCell, tol: float = DEFAULT_TOL,
                        strict: bool = True, **solver) -> UpperBoundCheck:
    """Check ``lambda_1^D <= E_D`` and ``lambda_2^N <= E_N`` on this mesh.

    Both trial functions lie in the discrete broken space, so the discrete
    min-max principle makes the bounds exact.  Zero coupling is skipped.
    """
    bounds = trial_bounds(geom)
    if geom.coupling() == 0:
        return UpperBoundCheck(math.nan, bounds.E_D, math.nan, bounds.E_N, math.nan, math.nan, tol, skipped=True)
    c = effective_unit_coupling(geom)
    scale = 1.0 / geom.epsilon**2
    v_d, v_n = trial_vectors(mesh, geom)
    dir_forms = assemble(mesh, LidCondition.dirichlet())
    neu_forms = assemble(mesh, LidCondition.neumann())
    A_d, M_d = total_operator(dir_forms, c)
    A_n, M_n = total_operator(neu_forms, c)
    lam_d = smallest_eigs(A_d, M_d, 1, tol, **solver).eigenvalues[0] * scale
    lam_n = smallest_eigs(A_n, M_n, 2, tol, **solver).eigenvalues[1] * scale
    check = UpperBoundCheck(
        float(lam_d), bounds.E_D, float(lam_n), bounds.E_N,
        rayleigh_quotient(A_d, M_d, dir_forms.restrict(v_d)) * scale,
        rayleigh_quotient(A_n, M_n, neu_forms.restrict(v_n)) * scale, tol)
    if strict and not check.passed:
        raise UpperBoundViolation(
            f"trial bound violated: lambda_1^D={check.lambda_1_D:.12g} vs {check.E_D:.12g}, "
            f"lambda_2^N={check.lambda_2_N:.12g} vs {check.E_N:.12g}")
    return check


def scaling_check(geom: CellGeometry, mesh: MeshedCell, lid: LidCondition, k: int,
                  tol: float = DEFAULT_TOL, **solver) -> float:
    """Largest relative deviation between a direct solve on the ``eps``-scaled
    cell and the rescaled unit-cell solve.

    Deviations are relative to ``max(|lambda|, eps**-2)`` so zero eigenvalues
    are measured on the physical eigenvalue scale.
    """
    eps = geom.epsilon
    unit = solve_cell(geom, mesh, lid, k, tol, **solver).eigenvalues
    A, M = total_operator(assemble(mesh.scaled(eps), lid), geom.coupling())
    direct = smallest_eigs(A, M, k, tol, **solver).eigenvalues
    dev = float(np.max(np.abs(direct - unit) / np.maximum(np.abs(unit), eps**-2)))
    if dev > 1e-8:
        raise ScalingError(f"scaled and unit-cell spectra differ by {dev:.3e}")
    return dev


def richardson(coarse, fine):
    """One extrapolation step for O(h^2) errors with mesh ratio 2."""
    return (4.0 * np.asarray(fine) - np.asarray(coarse)) / 3.0


_QUANTITIES = ("alpha_eps", "beta_eps", "lambda_1_D", "lambda_1_pi", "lambda_2_N", "lambda_2_0", "lambda_2_pi")


@dataclass(frozen=True)
class EpsilonRecord:
    epsilon: float
    alpha_eps: float
    beta_eps: float
    lambda_1_D: float
    lambda_1_pi: float
    lambda_2_N: float
    lambda_2_0: float
    lambda_2_pi: float
    E_D: float
    E_N: float
    gap_open: bool
    brackets_ok: bool
    bounds_ok: bool
    per_mesh: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ConvergenceReport:
    records: tuple
    alpha: float
    beta: float
    h: float
    richardson: bool
    blowup_slope: float
    blowup_intercept: float

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([r.epsilon for r in self.records])

    @property
    def err_alpha(self) -> np.ndarray:
        return np.array([abs(r.alpha_eps - self.alpha) / self.alpha for r in self.records])

    @property
    def err_beta(self) -> np.ndarray:
        return np.array([abs(r.beta_eps - self.beta) / self.beta for r in self.records])

    @property
    def checks_ok(self) -> bool:
        """Bracket chain and trial bounds hold on every mesh at every ``eps``."""
        return all(r.brackets_ok and r.bounds_ok for r in self.records)

    @property
    def alpha_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.err_alpha) < 0))

    @property
    def beta_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.err_beta) < 0))

    def to_dict(self) -> dict:
        return {
            "units": {"eigenvalues": "1/length^2", "epsilon": "dimensionless", "errors": "relative"},
            "limits": {"alpha": self.alpha, "beta": self.beta},
            "h": self.h,
            "richardson": self.richardson,
            "records": [asdict(r) for r in self.records],
            "err_alpha": self.err_alpha.tolist(),
            "err_beta": self.err_beta.tolist(),
            "alpha_decreasing": self.alpha_decreasing,
            "beta_decreasing": self.beta_decreasing,
            "checks_ok": self.checks_ok,
            "blowup_fit": {"slope": self.blowup_slope, "intercept": self.blowup_intercept},
        }


def blowup_fit(epsilons: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares line through ``(log eps, log lambda)``; returns ``(slope, intercept)``."""
    eps, vals = np.asarray(epsilons, float), np.asarray(values, float)
    if len(eps) < 2:
        return math.nan, math.nan
    slope, intercept = np.polyfit(np.log(eps), np.log(vals), 1)
    return float(slope), float(intercept)


def _mesh_quantities(geom: CellGeometry, mesh: MeshedCell, phi_count: int, k_max: int, tol: float,
                     jobs: int, solver: dict) -> dict:
    bands = band_structure(geom, mesh, phi_count, k_max, tol, jobs=jobs, **solver)
    alpha_eps, beta_eps = first_gap_endpoints(bands)
    at_pi, at_0 = bands.at_phi(math.pi), bands.at_phi(0.0)
    return {
        "alpha_eps": alpha_eps,
        "beta_eps": beta_eps,
        "lambda_1_D": float(bands.lambda_D[0]),
        "lambda_1_pi": float(at_pi[0]),
        "lambda_2_N": float(bands.lambda_N[1]),
        "lambda_2_0": float(at_0[1]),
        "lambda_2_pi": float(at_pi[1]),
        "enclosure_slack": float(bands.enclosure_slack().min()),
    }


def _brackets_ok(q: dict, slack: float) -> bool:
    def le(a, b):
        return a <= b + slack * max(1.0, abs(b))

    return (le(q["lambda_1_pi"], q["alpha_eps"]) and le(q["alpha_eps"], q["lambda_1_D"])
            and le(q["lambda_2_N"], q["beta_eps"]) and le(q["beta_eps"], q["lambda_2_0"]))


def gap_convergence_study(geom: CellGeometry, epsilon_list: Sequence[float], h: float,
                          phi_count: int = 17, k_max: int = 3, tol: float = DEFAULT_TOL,
                          *, use_richardson: bool = True, jobs: int = 1,
                          mesh: Optional[MeshedCell] = None, **solver) -> ConvergenceReport:
    """Gap endpoints along a decreasing ``eps`` list and their distance to ``(alpha, beta)``.

    A missing gap at some ``eps`` is recorded with ``gap_open=False``.  The
    blow-up fit of ``lambda_2`` at ``phi = pi`` skips the largest ``eps``.
    """
    eps_list = [float(e) for e in epsilon_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("epsilon list must be strictly decreasing")
    limits: GapConstants = limit_gap(geom)
    coarse = mesh if mesh is not None else build_cell_mesh(geom, h)
    meshes = [coarse, refine(coarse)] if use_richardson else [coarse]

    def run(eps):
        g = geom.with_epsilon(eps)
        per_mesh = {repr(m.h): _mesh_quantities(g, m, phi_count, k_max, tol, 1, solver) for m in meshes}
        vals = list(per_mesh.values())
        if use_richardson:
            best = {q: float(richardson(vals[0][q], vals[1][q])) for q in _QUANTITIES}
        else:
            best = {q: vals[0][q] for q in _QUANTITIES}
        bounds = trial_bounds(g)
        return EpsilonRecord(
            eps, **best, E_D=bounds.E_D, E_N=bounds.E_N,
            gap_open=best["alpha_eps"] < best["beta_eps"],
            brackets_ok=all(_brackets_ok(v, 10 * tol) for v in vals),
            bounds_ok=all(v["lambda_1_D"] <= bounds.E_D + 10 * tol and v["lambda_2_N"] <= bounds.E_N + 10 * tol
                          for v in vals),
            per_mesh=per_mesh)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run, eps_list))
    else:
        records = [run(e) for e in eps_list]
    fit_records = records[1:] if len(records) > 2 else records
    slope, intercept = blowup_fit([r.epsilon for r in fit_records], [r.lambda_2_pi for r in fit_records])
    return ConvergenceReport(tuple(records), limits.alpha, limits.beta, coarse.h, use_richardson, slope, intercept)
