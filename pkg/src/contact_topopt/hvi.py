"""Newton solver for the regularized frictional contact state, adjoint solves
and objective evaluation.

The state minimizes ``1/2 a(u, u) + int_C j_eps(u_t) - l(u)`` over
displacements with ``u = 0`` on D and ``u_n = 0`` on C; its Euler-Lagrange
residual is ``K u + r_c(u) - F``.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, SolverError
from .fem import (GAUSS2_W, GAUSS2_X, DofMap, SparseSystem, apply_constraints,
                  assemble_contact_terms, assemble_loads, assemble_stiffness,
                  contact_layout, contact_slip, shape_gradients, solve_spd)
from .material import j_eps

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Loads:
    """Constant surface traction on the N boundary and constant body force."""

    traction: tuple = (0.0, -0.3)
    body_force: tuple = (0.0, 0.0)

    def vector(self, mesh):
        return assemble_loads(mesh, self.body_force, self.traction)

    def traction_vector(self, mesh):
        return assemble_loads(mesh, (0.0, 0.0), self.traction)


class Objective:
    """Base class of the supported objective kinds."""


@dataclass(frozen=True)
class Compliance(Objective):
    """Work of the applied tractions, ``int_N g . u``."""


@dataclass(frozen=True)
class Energy(Objective):
    """Total potential energy including the friction potential."""


@dataclass(frozen=True)
class General(Objective):
    """``int_Omega m(u) + int_{edges tagged r_tags} r(u)``.

    Callbacks map (..., 2) displacement arrays to (...) values, derivatives
    to (..., 2) arrays.
    """

    m: Optional[Callable] = None
    m_prime: Optional[Callable] = None
    r: Optional[Callable] = None
    r_prime: Optional[Callable] = None
    r_tags: tuple = ("N",)

    def __post_init__(self):
        if (self.m is None) != (self.m_prime is None):
            raise ConfigurationError("General objective needs both m and m_prime")
        if (self.r is None) != (self.r_prime is None):
            raise ConfigurationError("General objective needs both r and r_prime")


@dataclass
class StateSolution:
    u: np.ndarray
    newton_iters: int
    final_residual: float
    converged: bool = True
    trace: list = field(default_factory=list)


# midpoint-of-edge rule on triangles, exact for quadratics
_TRI_QP = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


def solve_state(mesh, stiffness_coeff, elas, fp, loads, u0=None, *, rtol=1e-10, step_tol=1e-6,
                max_iter=50, max_halvings=8, K=None):
    """Damped Newton solve of the regularized state problem.

    Stops when ``|R| <= rtol |F|`` or when a full Newton step satisfies
    ``|du| / |u| < step_tol``. ``u0`` warm-starts the iteration.

    Steps are damped by an Armijo search on the potential energy, so every
    accepted step lowers it (up to roundoff, which lets the final quadratic
    steps through). When the slip-weakening friction makes the tangent
    indefinite, the Newton direction is replaced by one computed with the
    negative friction curvature dropped, which is always a descent direction.
    """
    dofmap = DofMap.from_mesh(mesh)
    free = dofmap.free
    if K is None:
        K = assemble_stiffness(mesh, stiffness_coeff, elas)
    F = loads.vector(mesh) if isinstance(loads, Loads) else np.asarray(loads, dtype=float)
    layout = contact_layout(mesh)
    u = np.zeros(2 * mesh.n_vertices) if u0 is None else np.array(u0, dtype=float)
    u[dofmap.constrained] = 0.0
    f_norm = np.linalg.norm(F[free])

    def residual(v):
        rc, Tc = assemble_contact_terms(mesh, v, fp, layout)
        return (K @ v + rc - F)[free], Tc

    def potential(v):
        return 0.5 * v @ (K @ v) + friction_energy(mesh, v, fp, layout) - F @ v

    R, Tc = residual(u)
    res = np.linalg.norm(R)
    trace = []
    if res <= rtol * f_norm:
        return StateSolution(u, 1, res / f_norm if f_norm > 0 else res, True, [(1, res, 1.0, 0.0)])
    for it in range(1, max_iter + 1):
        du = _newton_direction(sp.csc_matrix((K + Tc)[free][:, free]), R)
        newton = du is not None
        if not newton:
            _, Tp = assemble_contact_terms(mesh, u, fp, layout, convexify=True)
            du = _newton_direction(sp.csc_matrix((K + Tp)[free][:, free]), R)
            if du is None:
                raise SolverError("convexified tangent is not positive definite", trace)
        t, trial = _armijo(potential, u, free, du, R @ du, max_halvings if newton else 4 * max_halvings)
        R, Tc = residual(trial)
        res = np.linalg.norm(R)
        u = trial
        unorm = np.linalg.norm(u)
        step = t * np.linalg.norm(du)
        rel_step = step / unorm if unorm > 0 else (0.0 if step == 0 else np.inf)
        trace.append((it, res, t if newton else -t, rel_step))
        if res <= rtol * f_norm or (newton and t == 1.0 and rel_step < step_tol):
            rel_res = res / f_norm if f_norm > 0 else res
            return StateSolution(u, it, rel_res, True, trace)
    raise SolverError(f"Newton did not converge in {max_iter} iterations (|R| = {res:.3e})", trace)


def _newton_direction(A, R):
    """``-A^{-1} R``, or None when it fails to be a descent direction."""
    try:
        du = spla.splu(A).solve(-R)
    except RuntimeError:
        return None
    if not np.all(np.isfinite(du)) or R @ du >= 0:
        return None
    return du


def _armijo(potential, u, free, du, slope, max_halvings, c1=1e-4):
    p0 = potential(u)
    slack = 64 * np.finfo(float).eps * abs(p0)
    t = 1.0
    for _ in range(max_halvings + 1):
        trial = u.copy()
        trial[free] += t * du
        if potential(trial) <= p0 + c1 * t * slope + slack:
            return t, trial
        t *= 0.5
    return t * 2, trial


def tangent_matrix(mesh, stiffness_coeff, elas, fp, u, K=None):
    """Full (unconstrained) Jacobian ``K + T_c(u)`` of the state residual."""
    if K is None:
        K = assemble_stiffness(mesh, stiffness_coeff, elas)
    _, Tc = assemble_contact_terms(mesh, u, fp)
    return (K + Tc).tocsr()


def _domain_load(mesh, func, u):
    """Vector ``int func(u) . v`` with the edge-midpoint triangle rule."""
    _, area = shape_gradients(mesh)
    ue = u.reshape(-1, 2)[mesh.triangles]  # (M, 3, 2)
    out = np.zeros(2 * mesh.n_vertices)
    for w in _TRI_QP:
        uq = np.einsum("a,mak->mk", w, ue)
        val = np.asarray(func(uq)) * (area / 3.0)[:, None]
        for a in range(3):
            for k in range(2):
                np.add.at(out, 2 * mesh.triangles[:, a] + k, w[a] * val[:, k])
    return out


def _edge_load(mesh, func, u, tags):
    edges = mesh.edges_with(*tags)
    out = np.zeros(2 * mesh.n_vertices)
    if len(edges) == 0:
        return out
    L = mesh.edge_lengths(edges)
    uv = u.reshape(-1, 2)
    for x, w in zip(GAUSS2_X, GAUSS2_W):
        uq = (1 - x) * uv[edges[:, 0]] + x * uv[edges[:, 1]]
        val = np.asarray(func(uq)) * (w * L)[:, None]
        for a, na in ((0, 1 - x), (1, x)):
            for k in range(2):
                np.add.at(out, 2 * edges[:, a] + k, na * val[:, k])
    return out


def _domain_integral(mesh, func, u):
    _, area = shape_gradients(mesh)
    ue = u.reshape(-1, 2)[mesh.triangles]
    return float(sum(np.sum(np.asarray(func(np.einsum("a,mak->mk", w, ue))) * area / 3.0) for w in _TRI_QP))


def _edge_integral(mesh, func, u, tags):
    edges = mesh.edges_with(*tags)
    if len(edges) == 0:
        return 0.0
    L = mesh.edge_lengths(edges)
    uv = u.reshape(-1, 2)
    total = 0.0
    for x, w in zip(GAUSS2_X, GAUSS2_W):
        uq = (1 - x) * uv[edges[:, 0]] + x * uv[edges[:, 1]]
        total += float(np.sum(np.asarray(func(uq)) * w * L))
    return total


def adjoint_rhs(mesh, loads, u, kind):
    """Full-length right-hand side of the adjoint system for ``kind``."""
    if isinstance(kind, Energy):
        return np.zeros(2 * mesh.n_vertices)
    if isinstance(kind, Compliance):
        return -loads.traction_vector(mesh)
    if isinstance(kind, General):
        rhs = np.zeros(2 * mesh.n_vertices)
        if kind.m_prime is not None:
            rhs -= _domain_load(mesh, kind.m_prime, u)
        if kind.r_prime is not None:
            rhs -= _edge_load(mesh, kind.r_prime, u, kind.r_tags)
        return rhs
    raise ConfigurationError(f"unsupported objective kind {kind!r}")


def solve_adjoint(mesh, stiffness_coeff, elas, fp, state, kind, loads=Loads(), K=None):
    """Adjoint displacement for objective ``kind`` at the converged ``state``.

    The operator is the state Jacobian at ``state.u``. For the energy
    objective the right side vanishes and the zero field is returned
    without a solve.
    """
    u = state.u if isinstance(state, StateSolution) else np.asarray(state)
    n = 2 * mesh.n_vertices
    if isinstance(kind, Energy):
        return np.zeros(n)
    rhs = adjoint_rhs(mesh, loads, u, kind)
    dofmap = DofMap.from_mesh(mesh)
    A = tangent_matrix(mesh, stiffness_coeff, elas, fp, u, K=K)
    reduced = apply_constraints(SparseSystem(A, rhs), dofmap)
    diag = reduced.matrix.diagonal()
    if np.any(diag <= 0):
        raise SolverError(f"adjoint operator is indefinite: {np.sum(diag <= 0)} nonpositive diagonal "
                          "entries from the friction tangent")
    return dofmap.scatter(solve_spd(reduced, tol=1e-9))


def friction_energy(mesh, u, fp, layout=None):
    """``int_C j_eps(u_t)`` with 2-point Gauss per contact edge."""
    layout = contact_layout(mesh) if layout is None else layout
    if len(layout[0]) == 0:
        return 0.0
    s = contact_slip(mesh, u, layout)
    return float(np.sum(layout[2][:, None] * GAUSS2_W[None, :] * j_eps(fp, s)))


def evaluate_objective(mesh, stiffness_coeff, elas, fp, u, kind, loads=Loads(), K=None):
    u = np.asarray(u, dtype=float)
    if isinstance(kind, Compliance):
        return float(loads.traction_vector(mesh) @ u)
    if isinstance(kind, Energy):
        if K is None:
            K = assemble_stiffness(mesh, stiffness_coeff, elas)
        return float(0.5 * u @ (K @ u) + friction_energy(mesh, u, fp) - loads.vector(mesh) @ u)
    if isinstance(kind, General):
        total = 0.0
        if kind.m is not None:
            total += _domain_integral(mesh, kind.m, u)
        if kind.r is not None:
            total += _edge_integral(mesh, kind.r, u, kind.r_tags)
        return total
    raise ConfigurationError(f"unsupported objective kind {kind!r}")
