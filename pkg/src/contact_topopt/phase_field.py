"""Phase-field topology optimization on a fixed mesh of the design domain.

Method I keeps ``phi`` in ``[0, 1]`` and evolves it with a reaction-diffusion
equation whose reaction term is tilted by the normalized sensitivity. Method
II uses wells at ``-1`` and ``1`` and a fourth-order flow regularized by a
Willmore-type energy, written as a two-field mixed system.
"""
import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .fem import assemble_laplacian, cell_to_vertex, lumped_mass, shape_gradients, strains
from .hvi import solve_adjoint, solve_state, evaluate_objective
from .material import stress
from .shape_opt import uzawa_update

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ErsatzInterp:
    """Power-law stiffness interpolation with a floor, ``max(phi^p, k_min)``."""

    p: float = 3.0
    k_min: float = 1e-5

    def k(self, phi):
        return np.maximum(np.asarray(phi, dtype=float) ** self.p, self.k_min)

    def dk(self, phi):
        phi = np.asarray(phi, dtype=float)
        return np.where(phi ** self.p > self.k_min, self.p * phi ** (self.p - 1), 0.0)


@dataclass(frozen=True)
class WellInterp:
    """Interpolation for fields with wells at -1 (soft) and 1 (stiff)."""

    p: float = 3.0
    k_min: float = 1e-5

    def k(self, phi):
        chi = np.clip((np.asarray(phi, dtype=float) + 1) / 2, 0.0, 1.0)
        return self.k_min + (1 - self.k_min) * chi ** self.p

    def dk(self, phi):
        phi = np.asarray(phi, dtype=float)
        chi = np.clip((phi + 1) / 2, 0.0, 1.0)
        inside = (phi > -1) & (phi < 1)
        return np.where(inside, 0.5 * self.p * (1 - self.k_min) * chi ** (self.p - 1), 0.0)


def triangle_average(mesh, phi):
    return np.asarray(phi)[mesh.triangles].mean(axis=1)


def stiffness_coeff(interp, phi, mesh):
    """Per-triangle coefficient ``k(mean of phi over the triangle's vertices)``."""
    return interp.k(triangle_average(mesh, phi))


def material_volume(mesh, phi, wells=False):
    """``int phi`` (method I) or ``int clip((phi + 1) / 2)`` per triangle average (method II)."""
    _, area = shape_gradients(mesh)
    phibar = triangle_average(mesh, phi)
    if wells:
        phibar = np.clip((phibar + 1) / 2, 0.0, 1.0)
    return float(area @ phibar)


def elastic_density(mesh, elas, u, p):
    """Per-triangle ``C e(u) : e(p)`` (unit coefficient)."""
    return np.einsum("mij,mij->m", stress(elas, strains(mesh, u)), strains(mesh, p))


def sensitivity_field(mesh, interp, phi, elas, u, p_adj, ell, gamma, C, wells=False):
    """Per-triangle derivative of the augmented objective w.r.t. the triangle phase value.

    ``k'(phibar) C e(u):e(p) + (ell + gamma (Vol - C)) dVol/dphibar``.
    """
    phibar = triangle_average(mesh, phi)
    vol = material_volume(mesh, phi, wells)
    if wells:
        dvol = np.where((phibar > -1) & (phibar < 1), 0.5, 0.0)
    else:
        dvol = 1.0
    return interp.dk(phibar) * elastic_density(mesh, elas, u, p_adj) + (ell + gamma * (vol - C)) * dvol


def l2_norm_cells(mesh, values):
    _, area = shape_gradients(mesh)
    return float(np.sqrt(area @ (np.asarray(values) ** 2)))


class PhaseOperators:
    """Lumped mass and Laplacian stiffness on the fixed design mesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.M = lumped_mass(mesh)
        self.K = assemble_laplacian(mesh).tocsr()
        self.h = mesh.max_edge_length()


def normalized_drive(mesh, sens_cells):
    """Nodal ``sens / ||sens||_L2``, or ``None`` when ``sens`` vanishes."""
    norm = l2_norm_cells(mesh, sens_cells)
    if norm == 0.0 or not np.isfinite(norm):
        return None
    return cell_to_vertex(mesh, np.asarray(sens_cells) / norm)


def step_allen_cahn(mesh, phi, sens, dt, kappa1, eta, ops=None, normalized=None):
    """One semi-implicit reaction-diffusion step followed by projection onto [0, 1].

    ``sens`` is per triangle; it is normalized by its L2 norm over the domain
    (pass ``normalized`` to reuse a nodal field normalized once per outer
    iteration). Nodes with ``y <= 0`` treat the ``phi`` factor implicitly,
    the others the ``1 - phi`` factor.
    """
    ops = ops if ops is not None else PhaseOperators(mesh)
    G = normalized if normalized is not None else normalized_drive(mesh, sens)
    phi = np.asarray(phi, dtype=float)
    if G is None:
        return phi.copy()
    y = phi - 0.5 - 30.0 * eta * G * (1 - phi) * phi
    implicit = y <= 0
    c = np.where(implicit, -(1 - phi) * y, phi * y)
    d = np.where(implicit, 0.0, phi * y)
    A = sp.diags(ops.M * (1.0 / dt + c)) + kappa1 * ops.K
    rhs = ops.M * (phi / dt + d)
    new = spla.spsolve(A.tocsc(), rhs)
    if not np.all(np.isfinite(new)):
        raise SolverError("reaction-diffusion step produced non-finite values")
    return np.clip(new, 0.0, 1.0)


def double_well(phi):
    return 0.5 * (phi * phi - 1) ** 2


def double_well_d1(phi):
    return 2 * phi * (phi * phi - 1)


def double_well_d2(phi):
    return 6 * phi * phi - 2


def step_willmore(mesh, phi, driving, dt, gamma_w=1.0, weight=1.0, ops=None):
    """One mixed semi-implicit step of the Willmore-regularized flow.

    Unknowns ``(phi', beta')`` satisfy, with lumped mass ``M`` and Laplacian
    stiffness ``K``::

        M (phi' - phi) / dt = M driving - weight (K + M W''(phi) + gamma_w/2 M) beta'
        M beta' = M W'(phi) + K phi'

    which is the weak form with zero-flux boundaries for both fields.
    """
    ops = ops if ops is not None else PhaseOperators(mesh)
    phi = np.asarray(phi, dtype=float)
    M = sp.diags(ops.M)
    B = weight * (ops.K + sp.diags(ops.M * (double_well_d2(phi) + 0.5 * gamma_w)))
    A = sp.bmat([[M / dt, B], [-ops.K, M]], format="csc")
    rhs = np.concatenate([ops.M * (phi / dt + driving), ops.M * double_well_d1(phi)])
    sol = spla.spsolve(A, rhs)
    new = sol[:len(phi)]
    if not np.all(np.isfinite(new)):
        raise SolverError("fourth-order phase step produced non-finite values")
    if np.abs(new).max() > 2.0:
        raise SolverError(f"phase field left the sanity bound: max |phi| = {np.abs(new).max():.3f}")
    return new


def initial_phase(config, n_vertices):
    rng = np.random.default_rng(config.seed)
    if config.init == "random":
        phi = rng.uniform(0.0, 1.0, n_vertices)
    else:
        phi = np.full(n_vertices, float(config.init_value))
    return phi


def time_step(config, h, drive):
    """Explicit step if configured, otherwise ``dt_factor * h / max|drive|``."""
    if config.dt > 0:
        return config.dt
    dmax = float(np.abs(drive).max()) if drive is not None else 0.0
    return config.dt_factor * h / dmax if dmax > 0 else config.dt_factor * h


def run_pf1(config, history=None, callback=None):
    return _run_phase(config, wells=False, history=history, callback=callback)


def run_pf2(config, history=None, callback=None):
    return _run_phase(config, wells=True, history=history, callback=callback)


def _run_phase(config, wells, history=None, callback=None):
    from .config import build_problem
    from .history import History

    prob = build_problem(config)
    mesh = prob.mesh
    ops = PhaseOperators(mesh)
    hist = history if history is not None else History(prob.domain_volume)
    interp = (WellInterp if wells else ErsatzInterp)(config.p, config.k_min)
    phi = initial_phase(config, mesh.n_vertices)
    if wells:
        phi = 2 * phi - 1
    ell, gamma, C = config.ell0, config.gamma0, prob.C
    kind = prob.objective
    u_prev, J_prev = None, None
    for n in range(config.N_m + 1):
        t0 = time.perf_counter()
        coeff = stiffness_coeff(interp, phi, mesh)
        state = solve_state(mesh, coeff, prob.elas, prob.fp, prob.loads, u0=u_prev, **prob.newton)
        u_prev = state.u
        J = evaluate_objective(mesh, coeff, prob.elas, prob.fp, state.u, kind, prob.loads)
        vol = material_volume(mesh, phi, wells)
        if callback is not None:
            callback(n, phi, state.u)
        stop = n == config.N_m or (J_prev is not None and _converged(J, J_prev, vol, C, n, config))
        if stop:
            hist.append(n, J, vol, ell, gamma, state.newton_iters, _ms(t0, config))
            break
        p_adj = solve_adjoint(mesh, coeff, prob.elas, prob.fp, state, kind, prob.loads)
        sens = sensitivity_field(mesh, interp, phi, prob.elas, state.u, p_adj, ell, gamma, C, wells)
        G = normalized_drive(mesh, sens)
        hist.append(n, J, vol, ell, gamma, state.newton_iters, _ms(t0, config))
        if G is not None:
            dt = time_step(config, ops.h, G)
            for _ in range(config.T_inner):
                if wells:
                    phi = step_willmore(mesh, phi, -config.eta * G, dt, config.willmore_gamma,
                                        config.eta_tilde, ops)
                else:
                    phi = step_allen_cahn(mesh, phi, None, dt, config.kappa1, config.eta, ops, normalized=G)
        ell, gamma = uzawa_update(ell, gamma, material_volume(mesh, phi, wells), C, config.rho_gamma,
                                  config.gamma_max)
        J_prev = J
    hist.phi = phi
    hist.mesh = mesh
    return hist


def _converged(J, J_prev, vol, C, n, config):
    if n < config.min_iter:
        return False
    rel = abs(J - J_prev) / abs(J_prev) if J_prev != 0 else abs(J - J_prev)
    return rel < config.tol and abs(vol - C) <= config.vol_tol * abs(C)


def _ms(t0, config):
    return int(round(1000 * (time.perf_counter() - t0))) if config.timing else 0
