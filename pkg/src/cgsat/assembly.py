"""Assembly of the global sparse operators M, Q and the boundary form Bq.

All elements are affine (straight edges), so the mass matrix is a scaled
reference mass matrix and the stiffness reduces to reference tensors
contracted with the inverse element Jacobian.  The discrete integration by
parts identity

    Q + Q^T = Bq        (Bq the boundary quadratic form)

holds to machine precision whenever the volume rule integrates the stiffness
integrand exactly and the edge rule used for Bq matches the one used in any
split-form assembly.  ``check_sbp`` measures the defect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import BasisSpec, quad_rule, tabulate, tabulate_grad
from .mesh import DofMap, Mesh


def default_quad_degree(p: int) -> int:
    """Volume/edge exactness used unless overridden: max(2p, p+2), floor 6."""
    return max(2 * p, p + 2, 6)


def as_coefficient(coeff, dim: int):
    """Normalize a velocity coefficient to ``f(points) -> (n, dim)``.

    Accepts a constant scalar (1D), a constant vector, or a callable taking
    an (n, dim) array of positions.  Returns (func, constant_or_None).
    """
    if callable(coeff):
        return coeff, None
    const = np.atleast_1d(np.asarray(coeff, dtype=float))
    if const.shape != (dim,):
        raise ValueError(f"constant coefficient must have shape ({dim},)")

    def f(points):
        return np.broadcast_to(const, (points.shape[0], dim))

    return f, const


def _jacobians(mesh: Mesh):
    """Element Jacobians: returns (detJ, invJ) with invJ shape (ne, dim, dim)."""
    if mesh.dimension == 1:
        h = mesh.signed_areas()
        return h, (1.0 / h).reshape(-1, 1, 1)
    v = mesh.vertices[mesh.elements]
    J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv = np.empty_like(J)
    inv[:, 0, 0] = J[:, 1, 1]
    inv[:, 0, 1] = -J[:, 0, 1]
    inv[:, 1, 0] = -J[:, 1, 0]
    inv[:, 1, 1] = J[:, 0, 0]
    inv /= det[:, None, None]
    return det, inv


def _scatter(dofmap: DofMap, local: np.ndarray) -> sp.csr_matrix:
    """Scatter per-element dense blocks (ne, nloc, nloc) into a global CSR."""
    ed = dofmap.element_dofs
    nloc = ed.shape[1]
    rows = np.repeat(ed, nloc, axis=1).ravel()
    cols = np.tile(ed, (1, nloc)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)),
                        shape=(dofmap.n_dofs, dofmap.n_dofs))
    return mat.tocsr()


def assemble_mass(mesh: Mesh, dofmap: DofMap, basis: BasisSpec,
                  quad_degree: int) -> sp.csr_matrix:
    """Gram matrix of the basis, M_ij = integral phi_i phi_j."""
    rule = quad_rule(basis.domain, quad_degree)
    phi = tabulate(basis, rule.points)
    mref = np.einsum("q,qi,qj->ij", rule.weights, phi, phi)
    det, _ = _jacobians(mesh)
    local = det[:, None, None] * mref[None, :, :]
    return _scatter(dofmap, local)


def _advective_local(mesh, basis, coeff_fun, const, quad_degree):
    """Per-element blocks of integral phi_i (a . grad phi_j)."""
    rule = quad_rule(basis.domain, quad_degree)
    phi = tabulate(basis, rule.points)           # (nq, nloc)
    dphi = tabulate_grad(basis, rule.points)     # (nq, nloc, dim)
    det, inv = _jacobians(mesh)
    if const is not None:
        # c_e = J^-1 a, one vector per element; contract reference tensors
        T = np.einsum("q,qi,qjd->dij", rule.weights, phi, dphi)
        c = np.einsum("edk,k->ed", inv, const)
        return det[:, None, None] * np.einsum("ed,dij->eij", c, T)
    v = mesh.vertices[mesh.elements]             # (ne, dim+1, dim)
    if mesh.dimension == 1:
        x0 = v[:, 0, :]
        dx = v[:, 1, :] - v[:, 0, :]
        pts = x0[:, None, :] + rule.points[None, :, :] * dx[:, None, :]
    else:
        x0 = v[:, 0, :]
        J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
        pts = x0[:, None, :] + np.einsum("ekd,qd->eqk", J, rule.points)
    ne, nq = pts.shape[0], pts.shape[1]
    aval = coeff_fun(pts.reshape(-1, mesh.dimension)).reshape(ne, nq, -1)
    c = np.einsum("edk,eqk->eqd", inv, aval)
    local = np.einsum("q,qi,eqd,qjd->eij", rule.weights, phi, c, dphi)
    return det[:, None, None] * local


def assemble_stiffness(mesh: Mesh, dofmap: DofMap, basis: BasisSpec, coeff,
                       quad_degree: int, split_alpha: float | None = None,
                       edge_quad_degree: int | None = None,
                       div_coeff=None) -> sp.csr_matrix:
    """Stiffness Q_ij = integral phi_i (a . grad phi_j), optionally split.

    Parameters
    ----------
    coeff : constant vector or callable
        Velocity field a(x).  Constant coefficients are assembled in
        advective form; variable coefficients default to the split form.
    split_alpha : float or None
        Weight of the conservative form.  None selects advective form for
        constant coefficients and alpha = 0.5 for variable ones.
    edge_quad_degree : int or None
        Edge rule used by the conservative part of the split form; must
        match the rule used for Bq so the two cancel exactly.
    div_coeff : callable or None
        Divergence of the velocity field; None means divergence free.
    """
    coeff_fun, const = as_coefficient(coeff, mesh.dimension)
    if split_alpha is None:
        split_alpha = 0.0 if const is not None else 0.5
    adv_local = _advective_local(mesh, basis, coeff_fun, const, quad_degree)
    adv = _scatter(dofmap, adv_local)
    if split_alpha == 0.0:
        return adv
    edge_deg = edge_quad_degree if edge_quad_degree is not None else quad_degree
    bq = assemble_boundary_quadratic(mesh, dofmap, basis, coeff, edge_deg)
    q = split_alpha * (bq - adv.T) + (1.0 - split_alpha) * adv
    if div_coeff is not None:
        rule = quad_rule(basis.domain, quad_degree)
        phi = tabulate(basis, rule.points)
        det, _ = _jacobians(mesh)
        v = mesh.vertices[mesh.elements]
        if mesh.dimension == 1:
            pts = v[:, 0, :][:, None, :] + rule.points[None, :, :] \
                * (v[:, 1, :] - v[:, 0, :])[:, None, :]
        else:
            J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
            pts = v[:, 0, :][:, None, :] + np.einsum("ekd,qd->eqk", J, rule.points)
        dval = np.asarray(div_coeff(pts.reshape(-1, mesh.dimension)))
        dval = dval.reshape(pts.shape[0], -1)
        loc = np.einsum("q,eq,qi,qj->eij", rule.weights, dval, phi, phi)
        q = q + (1.0 - split_alpha) * _scatter(dofmap, det[:, None, None] * loc)
    return q.tocsr()


def assemble_boundary_quadratic(mesh: Mesh, dofmap: DofMap, basis: BasisSpec,
                                coeff, edge_quad_degree: int) -> sp.csr_matrix:
    """Boundary form Bq_ij = contour integral phi_i phi_j (a . n).

    Supported only on DoFs whose basis functions are nonzero on the physical
    boundary.  In 1D this degenerates to point values at the endpoints.
    """
    coeff_fun, _ = as_coefficient(coeff, mesh.dimension)
    n = dofmap.n_dofs
    rows, cols, vals = [], [], []
    if mesh.dimension == 1:
        for fd in dofmap.face_dofs:
            bf = fd.face
            x = bf.midpoint.reshape(1, 1)
            an = float(coeff_fun(x)[0, 0] * bf.normal[0])
            g = int(fd.dofs[0])
            rows.append(g)
            cols.append(g)
            vals.append(an)
        return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    rule = quad_rule("edge", edge_quad_degree)
    line = BasisSpec(dofmap.kind, dofmap.order, "interval")
    b = tabulate(line, rule.points)              # (nq, p+1)
    for fd in dofmap.face_dofs:
        bf = fd.face
        el = mesh.elements[bf.element]
        a = mesh.vertices[el[bf.local_face]]
        bpt = mesh.vertices[el[(bf.local_face + 1) % 3]]
        pts = a[None, :] + rule.points * (bpt - a)[None, :]
        an = coeff_fun(pts) @ bf.normal
        eloc = bf.length * np.einsum("q,q,qi,qj->ij", rule.weights, an, b, b)
        gi = fd.dofs
        rows.extend(np.repeat(gi, gi.size))
        cols.extend(np.tile(gi, gi.size))
        vals.extend(eloc.ravel())
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


@dataclass(frozen=True)
class GlobalOperators:
    """Assembled mass, stiffness and boundary quadratic form (scalar level)."""

    M: sp.csr_matrix
    Q: sp.csr_matrix
    Bq: sp.csr_matrix
    dofmap: DofMap
    volume_degree: int
    edge_degree: int
    split_alpha: float | None = None

    @property
    def norm_q(self) -> float:
        data = self.Q.data
        return float(np.max(np.abs(data))) if data.size else 0.0


def build_operators(mesh: Mesh, dofmap: DofMap, basis: BasisSpec, coeff,
                    volume_degree: int | None = None,
                    edge_degree: int | None = None,
                    split_alpha: float | None = None,
                    div_coeff=None) -> GlobalOperators:
    """Assemble M, Q and Bq with matched (or explicitly overridden) rules."""
    vol = volume_degree if volume_degree is not None else default_quad_degree(dofmap.order)
    edge = edge_degree if edge_degree is not None else vol
    M = assemble_mass(mesh, dofmap, basis, vol)
    Q = assemble_stiffness(mesh, dofmap, basis, coeff, vol,
                           split_alpha=split_alpha, edge_quad_degree=edge,
                           div_coeff=div_coeff)
    Bq = assemble_boundary_quadratic(mesh, dofmap, basis, coeff, edge)
    return GlobalOperators(M, Q, Bq, dofmap, vol, edge, split_alpha)


@dataclass(frozen=True)
class SbpReport:
    max_interior_residual: float
    max_boundary_residual: float
    tolerance: float
    passed: bool

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"SBP check: interior {self.max_interior_residual:.3e}, "
                f"boundary {self.max_boundary_residual:.3e}, "
                f"tol {self.tolerance:.3e} -> {status}")


def check_sbp(ops: GlobalOperators, rel_tol: float = 1e-12) -> SbpReport:
    """Measure the defect of Q + Q^T = Bq, split into interior/boundary parts.

    The defect is reported relative to the largest stiffness entry; entries
    in rows or columns of strictly interior DoFs count as interior residual.
    """
    resid = (ops.Q + ops.Q.T - ops.Bq).tocoo()
    on_boundary = np.zeros(ops.dofmap.n_dofs, dtype=bool)
    on_boundary[ops.dofmap.boundary_dofs] = True
    if resid.nnz:
        both = on_boundary[resid.row] & on_boundary[resid.col]
        a = np.abs(resid.data)
        max_bnd = float(a[both].max()) if both.any() else 0.0
        max_int = float(a[~both].max()) if (~both).any() else 0.0
    else:
        max_bnd = max_int = 0.0
    tol = rel_tol * max(ops.norm_q, 1e-300)
    return SbpReport(max_int, max_bnd, tol,
                     max_int <= tol and max_bnd <= tol)
