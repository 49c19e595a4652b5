"""Finite-difference checks of the derivatives used by the optimizers."""
from dataclasses import dataclass

import numpy as np

from .config import build_problem
from .hvi import Compliance, evaluate_objective, solve_adjoint, solve_state
from .material import FrictionParams, d2j_eps, dj_eps, j_eps
from .mesh import move_vertices
from .phase_field import ErsatzInterp, sensitivity_field, stiffness_coeff, triangle_average
from .shape_opt import lagrangian_shape_derivative


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def friction_calculus(fp=FrictionParams(), n=10_000, seed=0):
    """Central differences of the friction potential family over [-5 eps, 5 eps]."""
    rng = np.random.default_rng(seed)
    eps = fp.eps
    s = rng.uniform(-5 * eps, 5 * eps, n)
    s = s[np.abs(np.abs(s) - eps) > 1e-3 * eps]
    h1 = 1e-7 * eps
    fd1 = (j_eps(fp, s + h1) - j_eps(fp, s - h1)) / (2 * h1)
    d1 = dj_eps(fp, s)
    h2 = 1e-6 * eps
    fd2 = (dj_eps(fp, s + h2) - dj_eps(fp, s - h2)) / (2 * h2)
    d2 = d2j_eps(fp, s)
    # relative to the derivative scale so that zero crossings do not dominate
    e1 = np.max(np.abs(fd1 - d1) / np.maximum(np.abs(d1), fp.b * 1e-2))
    e2 = np.max(np.abs(fd2 - d2) / np.maximum(np.abs(d2), fp.b / eps * 1e-2))
    coulomb = np.max(np.abs(d1)) <= fp.a
    return [CheckResult("friction first derivative", e1 < 1e-5, f"max rel err {e1:.2e}"),
            CheckResult("friction second derivative", e2 < 1e-4, f"max rel err {e2:.2e}"),
            CheckResult("Coulomb bound", bool(coulomb), f"max |dj| {np.max(np.abs(d1)):.3e} vs a={fp.a}")]


def smooth_interior_field(mesh, seed):
    """Random smooth velocity vanishing on the fixed boundaries."""
    rng = np.random.default_rng(seed)
    x = mesh.vertices
    lo, hi = x.min(axis=0), x.max(axis=0)
    k = rng.uniform(1.0, 4.0, (2, 2))
    c = rng.uniform(0.0, 2 * np.pi, (2, 2))
    z = (x - lo) / (hi - lo)
    V = np.stack([np.sin(k[0, 0] * z[:, 0] + c[0, 0]) * np.cos(k[0, 1] * z[:, 1] + c[0, 1]),
                  np.cos(k[1, 0] * z[:, 0] + c[1, 0]) * np.sin(k[1, 1] * z[:, 1] + c[1, 1])], axis=1)
    V[mesh.fixed_vertex_mask()] = 0.0
    return V


def shape_derivative_check(prob, t=1e-4, n_fields=3, tol=5e-2, seed=0):
    mesh, kind = prob.mesh, prob.objective
    newton = dict(rtol=1e-12, step_tol=1e-12)
    st = solve_state(mesh, 1.0, prob.elas, prob.fp, prob.loads, **newton)
    J0 = evaluate_objective(mesh, 1.0, prob.elas, prob.fp, st.u, kind, prob.loads)
    p = solve_adjoint(mesh, 1.0, prob.elas, prob.fp, st, kind, prob.loads)
    g = lagrangian_shape_derivative(mesh, prob.elas, st.u, p, kind, prob.loads.body_force)
    out = []
    for i in range(n_fields):
        V = smooth_interior_field(mesh, seed + i)
        moved = move_vertices(mesh, V, t)
        st_t = solve_state(moved, 1.0, prob.elas, prob.fp, prob.loads, u0=st.u, **newton)
        fd = (evaluate_objective(moved, 1.0, prob.elas, prob.fp, st_t.u, kind, prob.loads) - J0) / t
        an = float(g @ V.ravel())
        err = abs(fd - an) / abs(an)
        out.append(CheckResult(f"shape derivative field {i}", err < tol, f"fd {fd:.6e} adjoint {an:.6e} rel {err:.2e}"))
    return out


def phase_sensitivity_check(prob, phi, interp=ErsatzInterp(), n_triangles=50, delta=1e-6, tol=1e-2,
                            seed=0, min_pass=0.95):
    """Forward differences of compliance w.r.t. single-triangle coefficients."""
    mesh = prob.mesh
    kind = Compliance()
    newton = dict(rtol=1e-12, step_tol=1e-12)
    coeff = stiffness_coeff(interp, phi, mesh)
    st = solve_state(mesh, coeff, prob.elas, prob.fp, prob.loads, **newton)
    J0 = evaluate_objective(mesh, coeff, prob.elas, prob.fp, st.u, kind, prob.loads)
    p = solve_adjoint(mesh, coeff, prob.elas, prob.fp, st, kind, prob.loads)
    sens = sensitivity_field(mesh, interp, phi, prob.elas, st.u, p, 0.0, 0.0, 0.0)
    phibar = triangle_average(mesh, phi)
    area = mesh.areas()
    rng = np.random.default_rng(seed)
    candidates = np.flatnonzero(interp.dk(phibar) > 0)
    picks = rng.choice(candidates, size=min(n_triangles, len(candidates)), replace=False)
    passed = 0
    for e in picks:
        c2 = coeff.copy()
        c2[e] = interp.k(phibar[e] + delta)
        st2 = solve_state(mesh, c2, prob.elas, prob.fp, prob.loads, u0=st.u, **newton)
        J2 = evaluate_objective(mesh, c2, prob.elas, prob.fp, st2.u, kind, prob.loads)
        fd = (J2 - J0) / (delta * area[e])
        if abs(fd - sens[e]) <= tol * abs(sens[e]):
            passed += 1
    frac = passed / len(picks)
    return [CheckResult("phase-field sensitivity", frac >= min_pass, f"{passed}/{len(picks)} triangles within {tol:g}")]


def gradient_checks(config):
    """All checks relevant to ``config.algorithm``."""
    results = friction_calculus(FrictionParams(config.a, config.b, config.alpha, config.eps))
    prob = build_problem(config)
    if config.algorithm == "shape":
        results += shape_derivative_check(prob)
    else:
        rng = np.random.default_rng(config.seed)
        phi = rng.uniform(0.3, 1.0, prob.mesh.n_vertices)
        results += phase_sensitivity_check(prob, phi, ErsatzInterp(config.p, config.k_min))
    return results
