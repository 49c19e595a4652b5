"""P1 finite elements on triangles: assembly, constraints and linear solves.

Displacement DOFs are interleaved, ``2 * vertex + component``.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, SolverError
from .material import d2j_eps, dj_eps
from .mesh import contact_axis

# 2-point Gauss rule on [0, 1]
GAUSS2_X = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
GAUSS2_W = np.array([0.5, 0.5])


def shape_gradients(mesh):
    """Barycentric gradients (M, 3, 2) and triangle areas (M,)."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    grads = np.stack([b, c], axis=2) / (2.0 * area)[:, None, None]
    return grads, area


def element_dofs(mesh):
    t = mesh.triangles
    return np.stack([2 * t, 2 * t + 1], axis=2).reshape(-1, 6)


def strain_matrices(grads):
    """Voigt strain-displacement matrices (M, 3, 6) for (e_xx, e_yy, 2 e_xy)."""
    m = len(grads)
    B = np.zeros((m, 3, 6))
    B[:, 0, 0::2] = grads[:, :, 0]
    B[:, 1, 1::2] = grads[:, :, 1]
    B[:, 2, 0::2] = grads[:, :, 1]
    B[:, 2, 1::2] = grads[:, :, 0]
    return B


def element_stiffness(mesh, elas):
    """Unit-coefficient element stiffness matrices (M, 6, 6)."""
    grads, area = shape_gradients(mesh)
    B = strain_matrices(grads)
    return area[:, None, None] * np.einsum("mki,kl,mlj->mij", B, elas.voigt(), B)


def _scatter_matrix(dofs, blocks, n):
    rows = np.repeat(dofs, dofs.shape[1], axis=1).ravel()
    cols = np.tile(dofs, (1, dofs.shape[1])).ravel()
    return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))


def assemble_stiffness(mesh, coeff, elas, element_matrices=None):
    """Global matrix of ``int coeff C e(u) : e(v)`` with one coefficient per triangle."""
    coeff = np.broadcast_to(np.asarray(coeff, dtype=float), (mesh.n_triangles,))
    if np.any(coeff <= 0):
        raise ConfigurationError("stiffness coefficients must be positive")
    ke = element_stiffness(mesh, elas) if element_matrices is None else element_matrices
    return _scatter_matrix(element_dofs(mesh), coeff[:, None, None] * ke, 2 * mesh.n_vertices)


def assemble_loads(mesh, body_force=(0.0, 0.0), traction=(0.0, 0.0), tags=("N",)):
    """Consistent P1 load vector for constant body force and edge traction."""
    n = mesh.n_vertices
    F = np.zeros(2 * n)
    f = np.asarray(body_force, dtype=float)
    if np.any(f):
        _, area = shape_gradients(mesh)
        share = np.repeat(area / 3.0, 3)
        for k in range(2):
            np.add.at(F, 2 * mesh.triangles.ravel() + k, share * f[k])
    g = np.asarray(traction, dtype=float)
    if np.any(g):
        edges = mesh.edges_with(*tags)
        half = np.repeat(0.5 * mesh.edge_lengths(edges), 2)
        for k in range(2):
            np.add.at(F, 2 * edges.ravel() + k, half * g[k])
    return F


def contact_layout(mesh):
    """Contact edges, their tangential component index and lengths."""
    edges = mesh.edges_with("C")
    tangential = 1 - contact_axis(mesh)
    return edges, tangential, mesh.edge_lengths(edges)


def contact_slip(mesh, u, layout=None):
    """Tangential displacement at the 2 Gauss points of each contact edge (E, 2)."""
    edges, tang, _ = contact_layout(mesh) if layout is None else layout
    u = np.asarray(u).reshape(-1, 2)
    ua = u[edges[:, 0], tang]
    ub = u[edges[:, 1], tang]
    return ua[:, None] * (1 - GAUSS2_X) + ub[:, None] * GAUSS2_X


def assemble_contact_terms(mesh, u, fp, layout=None, convexify=False):
    """Friction residual ``int dj(u_t) v_t`` and tangent ``int d2j(u_t) du_t v_t``.

    Only tangential DOFs of contact vertices receive contributions. With
    ``convexify`` the tangent uses ``max(d2j, 0)`` at each quadrature point,
    which keeps it positive semidefinite.
    """
    edges, tang, length = contact_layout(mesh) if layout is None else layout
    n = 2 * mesh.n_vertices
    if len(edges) == 0:
        return np.zeros(n), sp.csr_matrix((n, n))
    s = contact_slip(mesh, u, (edges, tang, length))
    N = np.stack([1 - GAUSS2_X, GAUSS2_X], axis=1)  # (gauss, node)
    wl = length[:, None] * GAUSS2_W[None, :]
    r_local = np.einsum("eg,gi->ei", wl * dj_eps(fp, s), N)
    d2 = d2j_eps(fp, s)
    if convexify:
        d2 = np.maximum(d2, 0.0)
    k_local = np.einsum("eg,gi,gj->eij", wl * d2, N, N)
    dofs = 2 * edges + tang[:, None]
    residual = np.zeros(n)
    np.add.at(residual, dofs.ravel(), r_local.ravel())
    return residual, _scatter_matrix(dofs, k_local, n)


@dataclass
class DofMap:
    """Partition of displacement DOFs into constrained and free sets."""

    n_dofs: int
    constrained: np.ndarray

    @classmethod
    def from_mesh(cls, mesh):
        mask = np.zeros(2 * mesh.n_vertices, dtype=bool)
        clamped = mesh.vertices_on("D")
        mask[2 * clamped] = mask[2 * clamped + 1] = True
        edges = mesh.edges_with("C")
        if len(edges):
            normal = contact_axis(mesh)
            mask[(2 * edges + normal[:, None]).ravel()] = True
        return cls(len(mask), mask)

    @property
    def free(self):
        return np.flatnonzero(~self.constrained)

    def scatter(self, x_free):
        x = np.zeros(self.n_dofs)
        x[self.free] = x_free
        return x


@dataclass
class SparseSystem:
    matrix: sp.spmatrix
    rhs: np.ndarray


def apply_constraints(system, dofmap):
    """Eliminate constrained rows and columns (homogeneous prescribed values)."""
    free = dofmap.free
    A = sp.csr_matrix(system.matrix)[free][:, free]
    return SparseSystem(A.tocsc(), np.asarray(system.rhs)[free])


def _pcg(A, b, tol, maxiter):
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverError("matrix has a nonpositive diagonal entry; not SPD")
    inv_d = 1.0 / d
    x = np.zeros_like(b)
    r = b.copy()
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    bnorm = np.linalg.norm(b)
    for _ in range(maxiter):
        if np.linalg.norm(r) <= tol * bnorm:
            return x
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise SolverError("conjugate gradient breakdown: matrix not positive definite")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"conjugate gradient did not reach tol={tol:g} in {maxiter} iterations")


def solve_spd(system, tol=1e-10, method="direct"):
    """Solve a symmetric positive definite system.

    ``method="direct"`` uses a sparse LU factorization and checks the
    residual; ``method="cg"`` runs Jacobi-preconditioned conjugate gradients,
    which detects loss of positive definiteness.
    """
    A = sp.csc_matrix(system.matrix)
    b = np.asarray(system.rhs, dtype=float)
    if b.size == 0:
        return np.zeros(0)
    if not np.any(b):
        return np.zeros_like(b)
    if method == "cg":
        x = _pcg(A, b, tol, maxiter=10 * len(b))
    elif method == "direct":
        try:
            lu = spla.splu(A)
        except RuntimeError as exc:
            raise SolverError(f"sparse factorization failed: {exc}") from exc
        x = lu.solve(b)
        # iterative refinement recovers accuracy on high-contrast coefficients
        for _ in range(3):
            r = b - A @ x
            if np.linalg.norm(r) <= tol * np.linalg.norm(b):
                break
            x += lu.solve(r)
    else:
        raise ValueError(f"unknown solve method {method!r}")
    res = np.linalg.norm(A @ x - b)
    if not np.isfinite(res) or res > tol * np.linalg.norm(b):
        raise SolverError(f"linear solve residual {res:.3e} exceeds {tol:g} * |rhs|")
    return x


# ---------------------------------------------------------------------------
# Scalar P1 operators (phase fields, velocity extension)


def assemble_laplacian(mesh, coeff=1.0):
    grads, area = shape_gradients(mesh)
    coeff = np.broadcast_to(np.asarray(coeff, dtype=float), (mesh.n_triangles,))
    ke = (coeff * area)[:, None, None] * np.einsum("mik,mjk->mij", grads, grads)
    return _scatter_matrix(mesh.triangles, ke, mesh.n_vertices)


def assemble_mass(mesh, lumped=False):
    _, area = shape_gradients(mesh)
    if lumped:
        m = np.zeros(mesh.n_vertices)
        np.add.at(m, mesh.triangles.ravel(), np.repeat(area / 3.0, 3))
        return sp.diags(m).tocsr()
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return _scatter_matrix(mesh.triangles, area[:, None, None] * local, mesh.n_vertices)


def lumped_mass(mesh):
    return assemble_mass(mesh, lumped=True).diagonal()


def displacement_gradients(mesh, u, grads=None):
    """Per-triangle gradient (M, 2, 2) with entry [i, j] = d u_i / d x_j."""
    if grads is None:
        grads, _ = shape_gradients(mesh)
    ue = np.asarray(u).reshape(-1, 2)[mesh.triangles]  # (M, 3, 2)
    return np.einsum("mai,maj->mij", ue, grads)


def strains(mesh, u, grads=None):
    Du = displacement_gradients(mesh, u, grads)
    return 0.5 * (Du + np.swapaxes(Du, 1, 2))


def cell_to_vertex(mesh, values):
    """Area-weighted average of per-triangle values at the vertices."""
    _, area = shape_gradients(mesh)
    num = np.zeros(mesh.n_vertices)
    den = np.zeros(mesh.n_vertices)
    np.add.at(num, mesh.triangles.ravel(), np.repeat(area * values, 3))
    np.add.at(den, mesh.triangles.ravel(), np.repeat(area, 3))
    return num / den
