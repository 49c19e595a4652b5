import numpy as np
import pytest

from contact_topopt.checks import shape_derivative_check, smooth_interior_field
from contact_topopt.config import build_problem, make_config
from contact_topopt.errors import ConfigurationError
from contact_topopt.hvi import Compliance, Energy, General, Loads, solve_adjoint, solve_state
from contact_topopt.material import FrictionParams
from contact_topopt.mesh import move_vertices
from contact_topopt.shape_opt import (_projection_multiplier, augmented, boundary_density_covector, h1_norm_sq,
                                      lagrangian_shape_derivative, run_shape_optimization,
                                      shape_derivative_distributed, shape_gradient_density_boundary,
                                      solve_h1_flow, uzawa_update)


@pytest.fixture(scope="module")
def prob():
    return build_problem(make_config(example="ex1", h=0.1))


@pytest.fixture(scope="module")
def state(prob):
    return solve_state(prob.mesh, 1.0, prob.elas, prob.fp, prob.loads, rtol=1e-12, step_tol=1e-12)


def test_distributed_derivative_of_zero_state(prob, elas):
    g = shape_derivative_distributed(prob.mesh, elas, np.zeros(2 * prob.mesh.n_vertices))
    assert not np.any(g)


def test_distributed_derivative_ignores_translations(prob, state):
    g = shape_derivative_distributed(prob.mesh, prob.elas, state.u)
    V = np.tile([0.7, -0.2], prob.mesh.n_vertices)
    assert abs(g @ V) <= 1e-12 * np.abs(g).sum()


def test_energy_lagrangian_reduces_to_distributed(prob, state):
    g1 = shape_derivative_distributed(prob.mesh, prob.elas, state.u)
    g2 = lagrangian_shape_derivative(prob.mesh, prob.elas, state.u, np.zeros_like(state.u), Energy())
    assert np.allclose(g1, g2, rtol=0, atol=1e-15)


def test_shape_derivative_matches_finite_differences(prob):
    results = shape_derivative_check(prob, n_fields=2, seed=7)
    assert all(r.passed for r in results), [r.detail for r in results]


def test_energy_shape_derivative_matches_finite_differences(prob):
    mesh = prob.mesh
    kind = Energy()
    tight = dict(rtol=1e-12, step_tol=1e-12)
    st = solve_state(mesh, 1.0, prob.elas, prob.fp, prob.loads, **tight)
    from contact_topopt.hvi import evaluate_objective
    J0 = evaluate_objective(mesh, 1.0, prob.elas, prob.fp, st.u, kind, prob.loads)
    g = shape_derivative_distributed(mesh, prob.elas, st.u)
    V = smooth_interior_field(mesh, 3)
    t = 1e-5
    moved = move_vertices(mesh, V, t)
    st_t = solve_state(moved, 1.0, prob.elas, prob.fp, prob.loads, u0=st.u, **tight)
    fd = (evaluate_objective(moved, 1.0, prob.elas, prob.fp, st_t.u, kind, prob.loads) - J0) / t
    assert fd == pytest.approx(g @ V.ravel(), rel=2e-2)


def test_volume_term_is_area_derivative(prob):
    mesh = prob.mesh
    zero = np.zeros(2 * mesh.n_vertices)
    g = lagrangian_shape_derivative(mesh, prob.elas, zero, zero, Compliance(), ell=1.0, gamma=0.0, C=0.0)
    V = smooth_interior_field(mesh, 1)
    t = 1e-6
    fd = (move_vertices(mesh, V, t).volume - move_vertices(mesh, V, -t).volume) / (2 * t)
    assert fd == pytest.approx(g @ V.ravel(), rel=1e-6)


def test_boundary_density_constants(prob):
    mesh = prob.mesh
    zero = np.zeros(2 * mesh.n_vertices)
    ids, dens = shape_gradient_density_boundary(mesh, prob.elas, zero, zero, (0, 0), 0.3, 0.02, mesh.volume,
                                                Compliance())
    assert len(ids) > 0
    assert np.allclose(dens, 0.3, rtol=0, atol=1e-15)
    _, dens = shape_gradient_density_boundary(mesh, prob.elas, zero, zero, (0, 0), 0.01, 0.02,
                                              mesh.volume - 0.05, Compliance())
    assert np.allclose(dens, 0.011, rtol=1e-12)


def test_boundary_density_self_adjoint_sign(prob):
    mesh = prob.mesh
    nofric = FrictionParams(0.0, 0.0)
    st = solve_state(mesh, 1.0, prob.elas, nofric, prob.loads)
    ids, dens = shape_gradient_density_boundary(mesh, prob.elas, st.u, -st.u, (0, 0), 0.01, 0.02, 0.9,
                                                Compliance())
    assert np.all(dens <= 0.01 + 0.02 * (mesh.volume - 0.9))
    assert np.any(dens < 0.01 + 0.02 * (mesh.volume - 0.9) - 1e-6)


def test_boundary_density_rejects_moving_boundary_integrands(prob, state):
    kind = General(r=lambda u: u[..., 0], r_prime=lambda u: np.ones_like(u), r_tags=("F",))
    with pytest.raises(ConfigurationError):
        shape_gradient_density_boundary(prob.mesh, prob.elas, state.u, state.u, (0, 0), 0, 0, 1, kind)
    with pytest.raises(ConfigurationError):
        shape_gradient_density_boundary(prob.mesh, prob.elas, state.u, state.u, (0, 0), 0, 0, 1, Energy())
    with pytest.raises(ConfigurationError):
        lagrangian_shape_derivative(prob.mesh, prob.elas, state.u, state.u, kind)


def test_boundary_covector_of_unit_density_is_perimeter_motion(prob):
    mesh = prob.mesh
    ids = mesh.vertices_on("F")
    g = boundary_density_covector(mesh, ids, np.ones(len(ids)))
    n_edges = mesh.edges_with("F")
    V = np.zeros((mesh.n_vertices, 2))
    V[:, 0] = 1.0  # uniform horizontal velocity
    # int_F n_x ds over the closed hole plus open free segments
    expected = np.sum(mesh.edge_lengths(n_edges) * mesh.outward_normals(n_edges)[:, 0])
    assert g @ V.ravel() == pytest.approx(expected, abs=1e-12)


def test_h1_flow_of_zero_functional(prob):
    V = solve_h1_flow(prob.mesh, np.zeros(2 * prob.mesh.n_vertices))
    assert not np.any(V)


def test_h1_flow_descent_identity(prob, state):
    dJ = lagrangian_shape_derivative(prob.mesh, prob.elas, state.u, -state.u, Compliance())
    omega = 0.01
    V = solve_h1_flow(prob.mesh, dJ, omega)
    assert not np.any(V[prob.mesh.fixed_vertex_mask()])
    assert dJ @ V.ravel() == pytest.approx(-h1_norm_sq(prob.mesh, V, omega), rel=1e-8)
    assert dJ @ V.ravel() < 0


def test_h1_flow_shrinks_with_omega(prob, state):
    dJ = lagrangian_shape_derivative(prob.mesh, prob.elas, state.u, -state.u, Compliance())
    norms = [np.linalg.norm(solve_h1_flow(prob.mesh, dJ, w)) for w in (0.01, 1.0, 100.0)]
    assert norms[0] > norms[1] > norms[2]
    with pytest.raises(ConfigurationError):
        solve_h1_flow(prob.mesh, dJ, 0.0)


def test_uzawa_examples():
    assert uzawa_update(0.3, 0.02, 0.9, 0.9, 1.02)[0] == 0.3
    ell, gamma = uzawa_update(0.01, 0.02, 1.0, 0.95, 1.02)
    assert ell == pytest.approx(0.011, rel=1e-12)
    assert gamma == pytest.approx(0.0204, rel=1e-12)
    assert uzawa_update(0.0, 29.0, 1.0, 1.0, 1.05, gamma_max=30.0)[1] == 30.0
    with pytest.raises(ConfigurationError):
        uzawa_update(0.0, 0.0, 1.0, 1.0, 1.05)
    with pytest.raises(ConfigurationError):
        uzawa_update(0.0, 1.0, 1.0, 1.0, 1.0)


def test_augmented_objective():
    assert augmented(2.0, 1.0, 0.5, 0.1, 4.0) == pytest.approx(2.0 + 0.05 + 0.5)


def test_projection_multiplier_hits_target():
    rng = np.random.default_rng(0)
    V0, V1 = rng.normal(size=(20, 2)), rng.normal(size=(20, 2))
    dVol = rng.normal(size=40)
    V1 *= -np.sign(dVol @ V1.ravel())  # a descent field of the volume, as produced by the flow
    length = 0.01
    target = 0.3 * length * abs(dVol @ V1.ravel()) / np.abs(V1).max()
    ell = _projection_multiplier(V0, V1, dVol, length, target)
    V = V0 + ell * V1
    assert length * (dVol @ V.ravel()) / np.abs(V).max() == pytest.approx(target, rel=1e-8)


def test_run_with_no_iterations():
    hist = run_shape_optimization(make_config(example="ex1", h=0.1, N_m=0))
    assert len(hist) == 1
    assert hist[0].iter == 0


def test_zero_velocity_stops_immediately():
    cfg = make_config(algorithm="shape", domain="rectangle", width=1.0, height=1.0, h=0.25, g_N=(0.0, 0.0),
                      bc=dict(bottom="C", right="D", top="N", left="D"), N_m=10)
    hist = run_shape_optimization(cfg)
    assert len(hist) == 1


@pytest.mark.parametrize("control", ["projection", "uzawa"])
def test_short_run_keeps_fixed_boundary_and_orientation(control):
    cfg = make_config(example="ex1", h=0.1, N_m=6, volume_control=control, smooth_every=3)
    start = build_problem(cfg).mesh
    seen = []
    hist = run_shape_optimization(cfg, callback=lambda n, mesh, u: seen.append(mesh))
    assert len(seen) == len(hist) == 7
    fixed = start.fixed_vertex_mask()
    for mesh in seen:
        assert np.array_equal(mesh.vertices[fixed], start.vertices[fixed])
        assert np.all(mesh.signed_areas() > 0)
    if control == "projection":
        vols = hist.column("volume")
        assert abs(vols[-1] - cfg.C) < abs(vols[0] - cfg.C)


def test_boundary_gradient_variant_runs():
    cfg = make_config(example="ex1", h=0.1, N_m=3, shape_gradient="boundary")
    hist = run_shape_optimization(cfg)
    assert len(hist) == 4
    assert np.all(hist.mesh.signed_areas() > 0)


def test_holed_square_objective_settles():
    hist = run_shape_optimization(make_config(example="ex1", h=0.05, N_m=60))
    J = hist.column("objective")
    assert all(J[n + 1] <= J[n] + 0.01 * abs(J[n]) for n in range(5, len(J) - 1))
    assert abs(hist.mesh.volume - 0.95) < 0.02
