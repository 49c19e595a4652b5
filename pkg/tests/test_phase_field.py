import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contact_topopt.checks import phase_sensitivity_check
from contact_topopt.config import build_problem, make_config
from contact_topopt.errors import SolverError
from contact_topopt.hvi import solve_state
from contact_topopt.phase_field import (ErsatzInterp, PhaseOperators, WellInterp, double_well, double_well_d1,
                                        double_well_d2, initial_phase, material_volume, normalized_drive,
                                        run_pf1, run_pf2, sensitivity_field, step_allen_cahn, step_willmore,
                                        stiffness_coeff, time_step)

from conftest import rectangle


@pytest.fixture(scope="module")
def mesh():
    return rectangle(h=0.25)


def test_interpolation_examples(mesh):
    interp = ErsatzInterp(3.0, 1e-5)
    n = mesh.n_vertices
    assert np.all(stiffness_coeff(interp, np.ones(n), mesh) == 1.0)
    assert np.all(stiffness_coeff(interp, np.zeros(n), mesh) == 1e-5)
    assert np.allclose(stiffness_coeff(interp, np.full(n, 0.5), mesh), 0.125, rtol=1e-15)


def test_well_interpolation_endpoints():
    w = WellInterp(3.0, 1e-5)
    assert w.k(1.0) == 1.0
    assert w.k(-1.0) == pytest.approx(1e-5)
    assert w.dk(-1.5) == 0.0 and w.dk(1.5) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1.0))
def test_interpolation_derivative(phi):
    interp = ErsatzInterp()
    if abs(phi ** 3 - 1e-5) < 1e-7 or phi > 1 - 1e-6:
        return
    h = 1e-7
    fd = (interp.k(phi + h) - interp.k(phi - h)) / (2 * h)
    assert fd == pytest.approx(interp.dk(phi), rel=1e-5, abs=1e-10)


def test_double_well_derivatives():
    x = np.linspace(-1.5, 1.5, 13)
    h = 1e-6
    assert np.allclose((double_well(x + h) - double_well(x - h)) / (2 * h), double_well_d1(x), atol=1e-8)
    assert np.allclose((double_well_d1(x + h) - double_well_d1(x - h)) / (2 * h), double_well_d2(x), atol=1e-6)
    assert double_well(1.0) == double_well(-1.0) == 0.0


def test_material_volume(mesh):
    n = mesh.n_vertices
    assert material_volume(mesh, np.ones(n)) == pytest.approx(2.0)
    assert material_volume(mesh, np.full(n, 0.25)) == pytest.approx(0.5)
    assert material_volume(mesh, np.zeros(n), wells=True) == pytest.approx(1.0)
    assert material_volume(mesh, -np.ones(n), wells=True) == 0.0


def test_sensitivity_with_zero_adjoint(mesh, elas):
    interp = ErsatzInterp()
    rng = np.random.default_rng(0)
    phi = rng.uniform(0, 1, mesh.n_vertices)
    u = rng.normal(size=2 * mesh.n_vertices)
    s = sensitivity_field(mesh, interp, phi, elas, u, np.zeros_like(u), 0.2, 3.0, 0.7)
    assert np.allclose(s, 0.2 + 3.0 * (material_volume(mesh, phi) - 0.7), rtol=1e-14)


def test_sensitivity_below_floor_has_no_elastic_part(mesh, elas):
    interp = ErsatzInterp(3.0, 1e-5)
    phi = np.full(mesh.n_vertices, 0.01)  # 1e-6 < k_min
    rng = np.random.default_rng(1)
    u = rng.normal(size=2 * mesh.n_vertices)
    s = sensitivity_field(mesh, interp, phi, elas, u, u, 0.0, 1.0, material_volume(mesh, phi))
    assert np.all(s == 0.0)


def test_sensitivity_matches_finite_differences():
    prob = build_problem(make_config(example="ex3a", h=0.2))
    phi = np.random.default_rng(5).uniform(0.3, 1.0, prob.mesh.n_vertices)
    (res,) = phase_sensitivity_check(prob, phi, n_triangles=20, seed=2)
    assert res.passed, res.detail


def test_allen_cahn_fixed_points(mesh):
    ops = PhaseOperators(mesh)
    sens = np.random.default_rng(2).normal(size=mesh.n_triangles)
    for value in (0.0, 1.0):
        phi = np.full(mesh.n_vertices, value)
        out = step_allen_cahn(mesh, phi, sens, 0.1, 1e-5, 20.0, ops)
        assert np.allclose(out, value, atol=1e-14)


def test_allen_cahn_hand_computed_step(mesh):
    sens = np.full(mesh.n_triangles, 3.0)
    phi = np.full(mesh.n_vertices, 0.5)
    dt, eta = 0.1, 20.0
    G = 1 / math.sqrt(mesh.volume)  # uniform drive normalized in L2
    y = -30 * eta * G * 0.25
    expected = 0.5 / (1 - dt * 0.5 * y)
    out = step_allen_cahn(mesh, phi, sens, dt, 0.0, eta)
    assert np.allclose(out, expected, rtol=1e-12)
    assert expected < 0.5


def test_allen_cahn_negative_drive_grows_material(mesh):
    phi = np.full(mesh.n_vertices, 0.5)
    out = step_allen_cahn(mesh, phi, np.full(mesh.n_triangles, -1.0), 0.1, 0.0, 20.0)
    assert np.all(out > 0.5) and np.all(out <= 1.0)


def test_allen_cahn_zero_drive_returns_copy(mesh):
    phi = np.full(mesh.n_vertices, 0.3)
    out = step_allen_cahn(mesh, phi, np.zeros(mesh.n_triangles), 0.1, 1e-5, 20.0)
    assert np.array_equal(out, phi) and out is not phi


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-3, 1.0))
def test_allen_cahn_stays_in_unit_interval(seed, dt):
    m = rectangle(h=0.5)
    rng = np.random.default_rng(seed)
    out = step_allen_cahn(m, rng.uniform(0, 1, m.n_vertices), rng.normal(size=m.n_triangles), dt, 1e-3, 20.0)
    assert np.all((out >= 0) & (out <= 1))


def test_willmore_wells_are_stationary(mesh):
    ops = PhaseOperators(mesh)
    zero = np.zeros(mesh.n_vertices)
    for value in (1.0, -1.0):
        out = step_willmore(mesh, np.full(mesh.n_vertices, value), zero, 0.05, ops=ops)
        assert np.allclose(out, value, atol=1e-12)


def test_willmore_sanity_bound(mesh):
    with pytest.raises(SolverError):
        step_willmore(mesh, np.ones(mesh.n_vertices), np.full(mesh.n_vertices, 100.0), 1.0)


def test_normalized_drive(mesh):
    assert normalized_drive(mesh, np.zeros(mesh.n_triangles)) is None
    G = normalized_drive(mesh, np.full(mesh.n_triangles, 4.0))
    assert np.allclose(G, 1 / math.sqrt(2.0))


def test_time_step_rule():
    cfg = make_config(example="ex3a", h=0.2)
    assert time_step(cfg, 0.2, np.array([0.5, -2.0])) == pytest.approx(cfg.dt_factor * 0.2 / 2.0)
    assert time_step(cfg.replace(dt=0.01), 0.2, np.array([1.0])) == 0.01


def test_initial_phase_is_seeded():
    cfg = make_config(example="ex3a", seed=4)
    assert np.array_equal(initial_phase(cfg, 10), initial_phase(cfg, 10))
    assert not np.array_equal(initial_phase(cfg, 10), initial_phase(cfg.replace(seed=5), 10))
    const = initial_phase(cfg.replace(init="constant", init_value=0.7), 10)
    assert np.all(const == 0.7)


@pytest.mark.parametrize("runner", [run_pf1, run_pf2])
def test_single_row_history(runner):
    hist = runner(make_config(example="ex3a", h=0.2, N_m=0))
    assert len(hist) == 1 and hist.phi is not None


@pytest.mark.parametrize("runner", [run_pf1, run_pf2])
def test_runs_are_reproducible(runner):
    cfg = make_config(example="ex3a", h=0.2, N_m=4)
    a, b = runner(cfg), runner(cfg)
    assert a.rows == b.rows
    assert np.array_equal(a.phi, b.phi)


def test_short_pf1_run_moves_toward_target():
    cfg = make_config(example="ex3a", h=0.1, N_m=15)
    hist = run_pf1(cfg)
    vf = hist.column("volume_fraction")
    assert abs(vf[-1] - cfg.V_f) < abs(vf[0] - cfg.V_f)
    assert np.all((hist.phi >= 0) & (hist.phi <= 1))
    obj = hist.column("objective")
    assert obj[-1] < obj[1]


def test_short_pf2_run_stays_bounded():
    hist = run_pf2(make_config(example="ex3a", h=0.1, N_m=6))
    assert np.abs(hist.phi).max() <= 2.0
    assert all(np.isfinite(hist.column("objective")))


def test_state_on_ersatz_design_converges():
    prob = build_problem(make_config(example="ex3a", h=0.1))
    phi = np.random.default_rng(0).uniform(0, 1, prob.mesh.n_vertices)
    coeff = stiffness_coeff(ErsatzInterp(), phi, prob.mesh)
    st = solve_state(prob.mesh, coeff, prob.elas, prob.fp, prob.loads, **prob.newton)
    assert st.converged and st.newton_iters <= 15
