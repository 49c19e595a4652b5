"""Topological derivative of the contact energy and the phase-field loop it drives.

The derivative for nucleating a small circular inclusion of stiffness
contrast ``r`` is ``-1/2 P_r s(u) : e(u)`` with the isotropic polarization
tensor ``P_r``.
"""
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SolverError
from .fem import strains
from .hvi import Energy, evaluate_objective, solve_state
from .material import Elasticity, stress
from .phase_field import (ErsatzInterp, PhaseOperators, initial_phase, material_volume,
                          normalized_drive, step_allen_cahn, stiffness_coeff, time_step)
from .shape_opt import uzawa_update

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Polarization:
    r: float = 1e-3
    elas: Elasticity = field(default_factory=Elasticity)

    def __post_init__(self):
        if not 0.0 <= self.r < 1.0:
            raise ConfigurationError(f"contrast r must lie in [0, 1), got {self.r}")

    @property
    def a1(self):
        return (self.elas.lam + self.elas.mu) / self.elas.mu

    @property
    def a2(self):
        return (self.elas.lam + 3 * self.elas.mu) / (self.elas.lam + self.elas.mu)


def polarization_apply(pol, sigma):
    """``P_r sigma`` for (..., 2, 2) symmetric tensors."""
    sigma = np.asarray(sigma, dtype=float)
    r, a1, a2 = pol.r, pol.a1, pol.a2
    pre = math.pi * (1 - r) / (1 + r * a2)
    tr = np.trace(sigma, axis1=-2, axis2=-1)[..., None, None]
    return pre * ((1 + a2) * sigma + 0.5 * (a1 - a2) * (1 - r) / (1 + r * a1) * tr * np.eye(2))


def topological_derivative_field(mesh, elas, u, pol, coeff=1.0):
    """Per-triangle ``-1/2 P_r s(u) : e(u)`` with the stress scaled by ``coeff``."""
    coeff = np.broadcast_to(np.asarray(coeff, dtype=float), (mesh.n_triangles,))
    eps = strains(mesh, u)
    sig = coeff[:, None, None] * stress(elas, eps)
    return -0.5 * np.einsum("mij,mij->m", polarization_apply(pol, sig), eps)


def _inner_steps(mesh, phi, G, dt, config, eta, ops):
    for _ in range(config.T_inner):
        phi = step_allen_cahn(mesh, phi, None, dt, config.kappa1, eta, ops, normalized=G)
    return phi


def capped_evolution(mesh, phi, G, dt, config, ops, cap):
    """Run the inner steps, shrinking the drive amplitude so that the
    decrease of ``int phi`` stays within ``cap``.

    Bisection is on the effective ``eta``; if even ``eta = 0`` removes too
    much material, the time step is bisected instead.
    """
    vol0 = material_volume(mesh, phi)

    def drop(candidate):
        return vol0 - material_volume(mesh, candidate)

    full = _inner_steps(mesh, phi, G, dt, config, config.eta, ops)
    if drop(full) <= cap:
        return full, config.eta, dt
    lo, hi = 0.0, config.eta
    best = _inner_steps(mesh, phi, G, dt, config, 0.0, ops)
    if drop(best) > cap:
        lo_t, hi_t = 0.0, dt
        best = phi.copy()
        for _ in range(config.cap_bisections):
            mid = 0.5 * (lo_t + hi_t)
            trial = _inner_steps(mesh, phi, G, mid, config, 0.0, ops)
            if drop(trial) <= cap:
                lo_t, best = mid, trial
            else:
                hi_t = mid
        return best, 0.0, lo_t
    for _ in range(config.cap_bisections):
        mid = 0.5 * (lo + hi)
        trial = _inner_steps(mesh, phi, G, dt, config, mid, ops)
        if drop(trial) <= cap:
            lo, best = mid, trial
        else:
            hi = mid
    return best, lo, dt


def run_pf_td(config, history=None, callback=None):
    """Energy minimization driven by the topological derivative; returns the History.

    ``callback(n, phi, u, dT)`` is invoked after each evaluated iterate.
    """
    from .config import build_problem
    from .history import History

    prob = build_problem(config)
    mesh = prob.mesh
    ops = PhaseOperators(mesh)
    hist = history if history is not None else History(prob.domain_volume)
    interp = ErsatzInterp(config.p, config.k_min)
    pol = Polarization(config.r, prob.elas)
    phi = initial_phase(config, mesh.n_vertices)
    ell, gamma, C = config.ell0, config.gamma0, prob.C
    kind = Energy()
    cap = config.cap * prob.domain_volume
    u_prev, J_prev = None, None
    for n in range(config.N_m + 1):
        t0 = time.perf_counter()
        coeff = stiffness_coeff(interp, phi, mesh)
        state = solve_state(mesh, coeff, prob.elas, prob.fp, prob.loads, u0=u_prev, **prob.newton)
        u_prev = state.u
        J = evaluate_objective(mesh, coeff, prob.elas, prob.fp, state.u, kind, prob.loads)
        vol = material_volume(mesh, phi)
        dT = topological_derivative_field(mesh, prob.elas, state.u, pol, coeff)
        if dT.max() > 0:
            raise SolverError(f"topological derivative is positive on a triangle: {dT.max():.3e}")
        if callback is not None:
            callback(n, phi, state.u, dT)
        stop = n == config.N_m
        if J_prev is not None and n >= config.min_iter:
            rel = abs(J - J_prev) / abs(J_prev) if J_prev != 0 else abs(J - J_prev)
            stop = stop or (rel < config.tol and abs(vol - C) <= config.vol_tol * abs(C))
        hist.append(n, J, vol, ell, gamma, state.newton_iters, _ms(t0, config))
        if stop:
            break
        G = normalized_drive(mesh, dT + ell + gamma * (vol - C))
        capped = False
        if G is not None:
            dt = time_step(config, ops.h, G)
            phi, eta_eff, _ = capped_evolution(mesh, phi, G, dt, config, ops, cap)
            capped = eta_eff < config.eta
            if capped:
                log.info("iteration %d: drive scaled to eta=%.4g by the volume cap", n, eta_eff)
        if not capped:
            # freezing the multipliers while the cap binds avoids wind-up
            ell, gamma = uzawa_update(ell, gamma, material_volume(mesh, phi), C, config.rho_gamma,
                                      config.gamma_max)
        J_prev = J
    hist.phi = phi
    hist.mesh = mesh
    return hist


def _ms(t0, config):
    return int(round(1000 * (time.perf_counter() - t0))) if config.timing else 0
