"""Boundary-variation shape optimization on a moving triangular mesh.

Shape derivatives are assembled as nodal covectors ``g`` with
``dJ(V) = g . V`` for the interleaved nodal velocity ``V``. The volume form
used here is the exact derivative of the discrete P1 functional under vertex
motion, so finite-difference checks agree to discretization round-off.
"""
import logging
import time

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, InvertedElementError, SolverError
from .fem import (SparseSystem, assemble_laplacian, assemble_mass, displacement_gradients,
                  shape_gradients, solve_spd, strains)
from .hvi import Compliance, Energy, General, solve_adjoint, solve_state, evaluate_objective
from .material import stress
from .mesh import move_vertices, smooth_interior

log = logging.getLogger(__name__)


def _covector(mesh, A, grads, area):
    """Nodal covector of ``V -> sum_e area_e A_e : DV_e`` for per-triangle (M, 2, 2) ``A``."""
    # DV_e[i, j] = sum_a V[a, i] dlam_a/dx_j
    local = area[:, None, None] * np.einsum("mij,maj->mai", A, grads)  # (M, 3, 2)
    g = np.zeros((mesh.n_vertices, 2))
    for k in range(2):
        np.add.at(g[:, k], mesh.triangles.ravel(), local[:, :, k].ravel())
    return g.ravel()


def _divergence_covector(mesh, grads, area):
    eye = np.broadcast_to(np.eye(2), (mesh.n_triangles, 2, 2))
    return _covector(mesh, eye, grads, area)


def shape_derivative_distributed(mesh, elas, u, f=(0.0, 0.0), coeff=1.0):
    """Covector of the energy functional's volume-form shape derivative.

    ``V -> int [(1/2 s(u):e(u) - f.u) I - Du^T s(u)] : DV`` with the state
    ``u`` of the energy objective (zero adjoint) and constant body force ``f``.
    """
    grads, area = shape_gradients(mesh)
    coeff = np.broadcast_to(np.asarray(coeff, dtype=float), (mesh.n_triangles,))
    Du = displacement_gradients(mesh, u, grads)
    eps = 0.5 * (Du + np.swapaxes(Du, 1, 2))
    sig = coeff[:, None, None] * stress(elas, eps)
    fu = _mean_dot(mesh, np.asarray(f, dtype=float), u)
    dens = 0.5 * np.einsum("mij,mij->m", sig, eps) - fu
    A = dens[:, None, None] * np.eye(2) - np.einsum("mki,mkj->mij", Du, sig)
    return _covector(mesh, A, grads, area)


def _mean_dot(mesh, f, w):
    """Per-triangle mean of ``f . w`` for constant ``f`` and P1 field ``w``."""
    if not np.any(f):
        return np.zeros(mesh.n_triangles)
    we = np.asarray(w).reshape(-1, 2)[mesh.triangles].mean(axis=1)
    return we @ f


def lagrangian_shape_derivative(mesh, elas, u, p, kind, f=(0.0, 0.0), coeff=1.0, ell=0.0, gamma=0.0,
                                C=None):
    """Covector of the augmented objective's shape derivative with adjoint ``p``.

    Moving vertices are assumed to exclude Dirichlet, Neumann and contact
    boundaries, so only volume terms survive. The augmentation
    ``ell (Vol - C) + gamma/2 (Vol - C)^2`` is included when ``C`` is given.
    """
    grads, area = shape_gradients(mesh)
    coeff = np.broadcast_to(np.asarray(coeff, dtype=float), (mesh.n_triangles,))
    f = np.asarray(f, dtype=float)
    Du = displacement_gradients(mesh, u, grads)
    Dp = displacement_gradients(mesh, p, grads)
    eu = 0.5 * (Du + np.swapaxes(Du, 1, 2))
    ep = 0.5 * (Dp + np.swapaxes(Dp, 1, 2))
    su = coeff[:, None, None] * stress(elas, eu)
    sp_ = coeff[:, None, None] * stress(elas, ep)
    dens = np.einsum("mij,mij->m", su, ep) - _mean_dot(mesh, f, p)
    A = -np.einsum("mki,mkj->mij", Dp, su) - np.einsum("mki,mkj->mij", Du, sp_)
    if isinstance(kind, Energy):
        dens = dens + 0.5 * np.einsum("mij,mij->m", su, eu) - _mean_dot(mesh, f, u)
        A = A - np.einsum("mki,mkj->mij", Du, su)
    elif isinstance(kind, General):
        if kind.r is not None and "F" in kind.r_tags:
            raise ConfigurationError("boundary integrands on the moving boundary are not supported")
        if kind.m is not None:
            dens = dens + _triangle_mean(mesh, kind.m, u)
    elif not isinstance(kind, Compliance):
        raise ConfigurationError(f"unsupported objective kind {kind!r}")
    A = A + dens[:, None, None] * np.eye(2)
    g = _covector(mesh, A, grads, area)
    if C is not None:
        g = g + (ell + gamma * (mesh.volume - C)) * _divergence_covector(mesh, grads, area)
    return g


def _triangle_mean(mesh, func, u):
    # the same edge-midpoint rule used for objective evaluation
    ue = np.asarray(u).reshape(-1, 2)[mesh.triangles]
    pts = [0.5 * (ue[:, 0] + ue[:, 1]), 0.5 * (ue[:, 1] + ue[:, 2]), 0.5 * (ue[:, 0] + ue[:, 2])]
    return sum(np.asarray(func(q)) for q in pts) / 3.0


def shape_gradient_density_boundary(mesh, elas, u, p, f, ell, gamma, C, kind, coeff=1.0):
    """Normal-velocity density on vertices of the free boundary.

    Returns ``(vertex_ids, values)`` with
    ``m(u) + s(u):e(p) - f.p + ell + gamma (Vol - C)``, the triangle
    quantities averaged to vertices by area weights over adjacent triangles.
    """
    if isinstance(kind, Energy):
        raise ConfigurationError("the boundary density is provided for compliance-type objectives only")
    if isinstance(kind, General) and kind.r is not None and "F" in kind.r_tags:
        raise ConfigurationError("boundary integrands on the moving boundary are not supported")
    if not isinstance(kind, (Compliance, General)):
        raise ConfigurationError(f"unsupported objective kind {kind!r}")
    grads, area = shape_gradients(mesh)
    coeff = np.broadcast_to(np.asarray(coeff, dtype=float), (mesh.n_triangles,))
    su = coeff[:, None, None] * stress(elas, strains(mesh, u, grads))
    dens = np.einsum("mij,mij->m", su, strains(mesh, p, grads)) - _mean_dot(mesh, np.asarray(f, float), p)
    if isinstance(kind, General) and kind.m is not None:
        dens = dens + _triangle_mean(mesh, kind.m, u)
    num = np.zeros(mesh.n_vertices)
    den = np.zeros(mesh.n_vertices)
    np.add.at(num, mesh.triangles.ravel(), np.repeat(area * dens, 3))
    np.add.at(den, mesh.triangles.ravel(), np.repeat(area, 3))
    verts = np.setdiff1d(mesh.vertices_on("F"), mesh.vertices_on("D", "N", "C"))
    return verts, num[verts] / den[verts] + ell + gamma * (mesh.volume - C)


def boundary_density_covector(mesh, vertex_ids, density):
    """Covector of ``V -> int_free g V.n ds`` for a P1 density on free-boundary vertices."""
    g_full = np.zeros(mesh.n_vertices)
    g_full[vertex_ids] = density
    edges = mesh.edges_with("F")
    out = np.zeros((mesh.n_vertices, 2))
    if len(edges) == 0:
        return out.ravel()
    L = mesh.edge_lengths(edges)
    n = mesh.outward_normals(edges)
    ga, gb = g_full[edges[:, 0]], g_full[edges[:, 1]]
    wa = L * (2 * ga + gb) / 6.0
    wb = L * (ga + 2 * gb) / 6.0
    for k in range(2):
        np.add.at(out[:, k], edges[:, 0], wa * n[:, k])
        np.add.at(out[:, k], edges[:, 1], wb * n[:, k])
    return out.ravel()


def _h1_operator(mesh, omega):
    A = omega * assemble_laplacian(mesh) + assemble_mass(mesh)
    return sp.kron(A, sp.identity(2), format="csr")  # interleaved components


def solve_h1_flow(mesh, dJ, omega=0.01):
    """H1-regularized descent velocity (n_vertices, 2) for the covector ``dJ``.

    Solves ``int omega DV:DW + V.W = -dJ(W)`` for all ``W`` vanishing on the
    Dirichlet, Neumann and contact boundaries, where ``V`` also vanishes.
    """
    if not omega > 0:
        raise ConfigurationError(f"omega must be positive, got {omega}")
    A = _h1_operator(mesh, omega)
    fixed = mesh.fixed_vertex_mask()
    free = np.flatnonzero(np.repeat(~fixed, 2))
    V = np.zeros(2 * mesh.n_vertices)
    rhs = -np.asarray(dJ, dtype=float)[free]
    try:
        V[free] = solve_spd(SparseSystem(A[free][:, free], rhs), tol=1e-9)
    except SolverError as exc:
        raise SolverError(f"H1 velocity solve failed: {exc}") from exc
    return V.reshape(-1, 2)


def h1_norm_sq(mesh, V, omega):
    v = np.asarray(V).ravel()
    return float(v @ (_h1_operator(mesh, omega) @ v))


def uzawa_update(ell, gamma, vol, C, rho, gamma_max=np.inf):
    """Multiplier and penalty update; the penalty grows by ``rho`` up to ``gamma_max``."""
    if not gamma > 0:
        raise ConfigurationError(f"penalty must be positive, got {gamma}")
    if not rho > 1:
        raise ConfigurationError(f"penalty growth factor must exceed 1, got {rho}")
    return ell + gamma * (vol - C), min(rho * gamma, gamma_max)


def augmented(J, vol, C, ell, gamma):
    s = vol - C
    return J + ell * s + 0.5 * gamma * s * s


def run_shape_optimization(config, history=None, callback=None):
    """Boundary-variation loop on the configured domain; returns the History.

    ``callback(n, mesh, u)`` is invoked after each evaluated iterate.
    """
    from .config import build_problem
    from .history import History

    prob = build_problem(config)
    mesh = prob.mesh
    hist = history if history is not None else History(prob.domain_volume)
    ell, gamma = config.ell0, config.gamma0
    C = prob.C
    kind = prob.objective
    u_prev = None
    J_prev = None
    h = mesh.max_edge_length()
    for n in range(config.N_m + 1):
        t0 = time.perf_counter()
        state = solve_state(mesh, 1.0, prob.elas, prob.fp, prob.loads, u0=u_prev, **prob.newton)
        J = evaluate_objective(mesh, 1.0, prob.elas, prob.fp, state.u, kind, prob.loads)
        vol = mesh.volume
        if callback is not None:
            callback(n, mesh, state.u)
        stop = n == config.N_m
        if J_prev is not None and _converged(J, J_prev, vol, C, n, config):
            stop = True
        if stop:
            hist.append(n, J, vol, ell, gamma, state.newton_iters, _ms(t0, config))
            break
        p = solve_adjoint(mesh, 1.0, prob.elas, prob.fp, state, kind, prob.loads)
        projected = config.volume_control == "projection"
        dJ, dVol = _shape_covectors(mesh, prob, state.u, p, kind, config, 0.0 if projected else ell,
                                    0.0 if projected else gamma, C)
        V = solve_h1_flow(mesh, dJ, config.omega)
        if projected:
            V1 = solve_h1_flow(mesh, dVol, config.omega)
            ell = _projection_multiplier(V, V1, dVol, config.step_factor * h, -0.5 * (vol - C))
            V = V + ell * V1
        vmax = np.abs(V).max()
        hist.append(n, J, vol, ell, gamma, state.newton_iters, _ms(t0, config))
        if vmax == 0.0:
            log.info("zero velocity at iteration %d; stopping", n)
            break
        if not projected:
            ell, gamma = uzawa_update(ell, gamma, vol, C, config.rho_gamma, config.gamma_max)
        merit = augmented(J, vol, C, ell, 0.0 if projected else gamma)
        mesh, u_prev = _accepted_move(mesh, V, config.step_factor * h / vmax, merit, prob, kind,
                                      C, ell, 0.0 if projected else gamma, state.u)
        if config.smooth_every and (n + 1) % config.smooth_every == 0:
            mesh = smooth_interior(mesh)
        J_prev = J
    hist.mesh = mesh
    return hist


def _shape_covectors(mesh, prob, u, p, kind, config, ell, gamma, C):
    """Covector of the augmented shape derivative and of the volume derivative."""
    if config.shape_gradient == "boundary":
        ids, dens = shape_gradient_density_boundary(mesh, prob.elas, u, p, prob.loads.body_force,
                                                    ell, gamma, C, kind)
        return (boundary_density_covector(mesh, ids, dens),
                boundary_density_covector(mesh, ids, np.ones(len(ids))))
    grads, area = shape_gradients(mesh)
    dJ = lagrangian_shape_derivative(mesh, prob.elas, u, p, kind, prob.loads.body_force,
                                     ell=ell, gamma=gamma, C=C)
    return dJ, _divergence_covector(mesh, grads, area)


def _projection_multiplier(V0, V1, dVol, length, target, bisections=200):
    """Multiplier ``l`` such that the step of max length ``length`` along
    ``V0 + l V1`` changes the volume by ``target`` to first order.

    The reachable range is bounded by the pure volume motion; targets
    beyond 90% of it are clipped.
    """
    a = float(dVol @ V0.ravel())
    b = float(dVol @ V1.ravel())
    n1 = np.abs(V1).max()
    if b == 0.0 or n1 == 0.0:
        return 0.0
    reach = 0.9 * length * abs(b) / n1
    target = float(np.clip(target, -reach, reach))

    def change(ell):
        return length * (a + ell * b) / np.abs(V0 + ell * V1).max()

    big = 1e8 * (np.abs(V0).max() / n1 + 1.0)
    lo, hi = -big, big  # change(lo) > target > change(hi)
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        if change(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def _converged(J, J_prev, vol, C, n, config):
    if n < config.min_iter:
        return False
    rel = abs(J - J_prev) / abs(J_prev) if J_prev != 0 else abs(J - J_prev)
    return rel < config.tol and abs(vol - C) <= config.vol_tol * abs(C)


def _accepted_move(mesh, V, tau, merit, prob, kind, C, ell, gamma, u):
    """Move vertices, halving the step on inversion or a >1% merit increase."""
    for attempt in range(6):
        try:
            trial = move_vertices(mesh, V, tau)
        except InvertedElementError:
            tau *= 0.5
            continue
        st = solve_state(trial, 1.0, prob.elas, prob.fp, prob.loads, u0=u, **prob.newton)
        J = evaluate_objective(trial, 1.0, prob.elas, prob.fp, st.u, kind, prob.loads)
        m = augmented(J, trial.volume, C, ell, gamma)
        if m <= merit + 0.01 * abs(merit) or attempt == 5:
            return trial, st.u
        tau *= 0.5
    raise InvertedElementError("no admissible step found after 5 halvings", [])


def _ms(t0, config):
    return int(round(1000 * (time.perf_counter() - t0))) if config.timing else 0
