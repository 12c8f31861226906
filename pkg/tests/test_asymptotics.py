import math

import numpy as np
import pytest

from trapgap.asymptotics import (UpperBoundViolation, blowup_fit, gap_convergence_study,
                                 richardson, scaling_check, trial_bounds, trial_vectors, verify_upper_bounds)
from trapgap.forms import LidCondition
from trapgap.geometry import CellGeometry, canonical_geometry, measures, power_rule, rectangle, regular_polygon
from trapgap.mesh import build_cell_mesh


@pytest.mark.parametrize("eps", [1.0, 0.3, 0.05])
def test_trial_bounds_canonical(eps):
    b = trial_bounds(canonical_geometry(epsilon=eps))
    assert b.E_D == pytest.approx(8.0, rel=1e-13)
    assert b.E_N == pytest.approx(32 / 3, rel=1e-13)
    assert b.E_D < b.E_N


@pytest.mark.parametrize("eps", [1.0, 0.2])
def test_kappa_identity(eps):
    g = CellGeometry(2.0, regular_polygon(1.0, 0.0, 0.2, 6), eps)
    b = trial_bounds(g)
    m = measures(g)
    vy, vb, vf = (eps**2 * v for v in (m.vol_Y, m.vol_B, m.vol_F))
    assert (b.kappa_F - b.kappa_B) ** 2 == pytest.approx(vy / (vb * vf), rel=1e-13)
    assert b.kappa_F * vf + b.kappa_B * vb == pytest.approx(0.0, abs=1e-13)


def test_trial_bounds_zero_coupling():
    b = trial_bounds(canonical_geometry(a=0.0))
    assert b.E_D == 0 and b.E_N == 0


def test_trial_vectors_rayleigh_quotients_are_exact(canonical, canonical_mesh):
    chk = verify_upper_bounds(canonical.with_epsilon(0.3), canonical_mesh)
    assert chk.rayleigh_D == pytest.approx(8.0, rel=1e-10)
    assert chk.rayleigh_N == pytest.approx(32 / 3, rel=1e-10)
    v_d, v_n = trial_vectors(canonical_mesh, canonical)
    assert v_d.max() == pytest.approx(2.0)


def test_upper_bounds_example():
    g = canonical_geometry(epsilon=0.2)
    chk = verify_upper_bounds(g, build_cell_mesh(g, 1 / 32))
    assert chk.passed and chk.lambda_1_D <= 8.0 and chk.lambda_2_N <= 32 / 3


def test_upper_bounds_skipped_without_coupling(canonical_mesh):
    assert verify_upper_bounds(canonical_geometry(a=0.0), canonical_mesh).skipped


def test_upper_bound_violation_is_hard_failure(canonical_mesh, monkeypatch):
    import trapgap.asymptotics as asym
    real = asym.trial_bounds
    monkeypatch.setattr(asym, "trial_bounds", lambda g: real(g).__class__(7.0, 10.0, 0.0, 0.0))
    g = canonical_geometry(epsilon=0.2)
    with pytest.raises(UpperBoundViolation):
        verify_upper_bounds(g, canonical_mesh)
    assert not verify_upper_bounds(g, canonical_mesh, strict=False).passed


@pytest.mark.parametrize("lid", [LidCondition.neumann(), LidCondition.dirichlet(), LidCondition.floquet(0.8)],
                         ids=str)
def test_scaling_identity(canonical_mesh, lid):
    assert scaling_check(canonical_geometry(epsilon=0.5), canonical_mesh, lid, 3) < 1e-10
    assert scaling_check(canonical_geometry(epsilon=1.0), canonical_mesh, lid, 3) < 1e-12
    # binary scale factor: the scaled matrices are exact, so only solver rounding remains
    assert scaling_check(canonical_geometry(epsilon=0.25, a=0.0), canonical_mesh, lid, 3) < 1e-12
    assert scaling_check(canonical_geometry(epsilon=0.3, a=0.0), canonical_mesh, lid, 3) < 1e-10


def test_scaling_identity_custom_rule(canonical_mesh):
    g = CellGeometry(1.0, rectangle(0.5, 0, 0.5, 0.5), 0.25, 1.0, power_rule(1.0, 1.5))
    assert scaling_check(g, canonical_mesh, LidCondition.floquet(2.0), 4) < 1e-10


def test_richardson_removes_h2_term():
    exact, c = 3.0, 0.7
    assert richardson(exact + c * 4, exact + c) == pytest.approx(exact)


def test_blowup_fit_exact_power():
    eps = np.array([0.2, 0.1, 0.05])
    slope, intercept = blowup_fit(eps, 5.0 * eps**-2)
    assert slope == pytest.approx(-2.0) and intercept == pytest.approx(math.log(5.0))


@pytest.fixture(scope="module")
def quick_study():
    return gap_convergence_study(canonical_geometry(), [0.4, 0.2, 0.1], 1 / 16, phi_count=5, k_max=3)


def test_study_records(quick_study):
    r = quick_study
    assert r.alpha == 8.0 and r.beta == pytest.approx(32 / 3)
    assert r.checks_ok
    assert all(rec.gap_open for rec in r.records)
    assert all(rec.E_D == pytest.approx(8.0) and rec.E_N == pytest.approx(32 / 3) for rec in r.records)
    assert r.alpha_decreasing and r.beta_decreasing
    assert np.all(np.isfinite(r.err_alpha)) and np.all(np.isfinite(r.err_beta))
    for rec in r.records:
        assert len(rec.per_mesh) == 2
        assert rec.lambda_1_pi <= rec.lambda_1_D + 1e-8 and rec.lambda_2_N <= rec.lambda_2_0 + 1e-8


def test_study_blowup_slope(quick_study):
    assert -2.2 <= quick_study.blowup_slope <= -1.8


def test_study_requires_decreasing_eps():
    with pytest.raises(ValueError):
        gap_convergence_study(canonical_geometry(), [0.1, 0.2], 1 / 8)


def test_study_without_richardson():
    r = gap_convergence_study(canonical_geometry(), [0.3], 1 / 8, phi_count=3, k_max=2, use_richardson=False)
    assert not r.richardson and len(r.records[0].per_mesh) == 1
    assert math.isnan(r.blowup_slope)
