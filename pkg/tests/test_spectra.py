import numpy as np
import pytest

from cgsat.assembly import build_operators
from cgsat.mesh import build_dofmap, interval_mesh, unit_square_mesh
from cgsat.problems import advection_2d, discretize
from cgsat.sat import scalar_sat_1d, scalar_sat_2d
from cgsat.spectra import (build_spectrum_report, extreme_eigs,
                           jacobi_eigenvalues, spectrum_report,
                           stability_matrix, symmetric_eig,
                           write_spectrum_csv)


def test_eigensolver_against_jacobi_oracle():
    rng = np.random.default_rng(42)
    A = rng.standard_normal((50, 50))
    A = A + A.T
    w, V = symmetric_eig(A)
    wj = jacobi_eigenvalues(A)
    assert np.abs(w - wj).max() < 1e-10
    # eigenpair residuals
    assert np.abs(A @ V - V * w).max() < 1e-10 * np.abs(w).max()


def test_eigensolver_small_and_degenerate():
    w, _ = symmetric_eig(np.diag([-3.0, 0.0, -1.0]))
    assert np.allclose(w, [-3.0, -1.0, 0.0])
    w, _ = symmetric_eig(np.zeros((5, 5)))
    assert np.abs(w).max() == 0.0
    # repeated eigenvalues
    A = np.diag([2.0, 2.0, 2.0, -1.0])
    w, V = symmetric_eig(A)
    assert np.allclose(np.sort(w), [-1.0, 2.0, 2.0, 2.0])
    assert np.abs(V.T @ V - np.eye(4)).max() < 1e-12


def test_eigensolver_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        symmetric_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_extreme_eigs_diagonal():
    neg, pos = extreme_eigs(np.diag([-3.0, 0.0, -1.0]), 2)
    assert np.allclose(neg, [-3.0, -1.0])
    assert abs(pos[0]) < 1e-15          # most positive eigenvalue is zero


def test_stability_matrix_1d_no_sat():
    mesh = interval_mesh(2)
    dm = build_dofmap(mesh, 1, "lagrange")
    ops = build_operators(mesh, dm, dm.basis_spec(), [1.0])
    S = stability_matrix(ops).toarray()
    assert np.abs(S - np.diag([-1.0, 0.0, 1.0])).max() < 1e-14


def test_stability_matrix_1d_with_sat():
    mesh = interval_mesh(2)
    dm = build_dofmap(mesh, 1, "lagrange")
    ops = build_operators(mesh, dm, dm.basis_spec(), [1.0])
    pi = scalar_sat_1d(dm, a=1.0, tau=-1.0)
    S = stability_matrix(ops, pi).toarray()
    assert np.abs(S - np.diag([-3.0, 0.0, -1.0])).max() < 1e-14


def test_stability_matrix_zero():
    import scipy.sparse as sp
    Z = sp.csr_matrix((4, 4))
    S = stability_matrix(Z, Z)
    assert np.abs(S.toarray()).max() == 0.0


def test_stability_matrix_dimension_mismatch():
    import scipy.sparse as sp
    with pytest.raises(ValueError):
        stability_matrix(sp.identity(4).tocsr(), sp.identity(3).tocsr())


def test_spectrum_symmetric_explicitly():
    mesh = unit_square_mesh(3)
    dm = build_dofmap(mesh, 2, "lagrange")
    ops = build_operators(mesh, dm, dm.basis_spec(), [1.0, 0.0])
    S = stability_matrix(ops).toarray()
    assert np.abs(S - S.T).max() < 1e-14


def test_report_unit_square_pairing_and_verdict():
    mesh = unit_square_mesh(4)
    dm = build_dofmap(mesh, 1, "lagrange")
    ops = build_operators(mesh, dm, dm.basis_spec(), [1.0, 0.0])
    pi = scalar_sat_2d(mesh, dm, dm.basis_spec(), [1.0, 0.0],
                       edge_quad_degree=ops.edge_degree)
    rep = build_spectrum_report(ops.Q, pi, k=8,
                                interior_dofs=dm.interior_dofs(),
                                norm_q=ops.norm_q)
    assert rep.verdict == "stable"
    assert rep.pos_sat[0] <= rep.tolerance()
    # paired +-lambda structure without the penalty
    assert np.abs(rep.neg_no_sat + rep.pos_no_sat).max() < 1e-10
    # interior rows of Q + Q^T vanish
    assert rep.max_interior_residual <= 1e-12
    # the penalty deepens the negative end and adds negative modes
    s0 = stability_matrix(ops).toarray()
    s1 = stability_matrix(ops, pi).toarray()
    w0, _ = symmetric_eig(s0)
    w1, _ = symmetric_eig(s1)
    tol = 1e-12 * ops.norm_q
    assert (w1 < -tol).sum() >= (w0 < -tol).sum()
    assert w1.min() <= w0.min()


def test_report_degraded_edge_quadrature_unstable():
    prob = advection_2d(n=4, order=3, basis="bernstein")
    disc = discretize(prob, volume_degree=6, edge_degree=5)
    rep = build_spectrum_report(disc.ops_sys, disc.pi, k=5,
                                norm_q=disc.norm_q)
    assert rep.verdict == "unstable"
    assert rep.pos_sat[0] > 0.0


def test_spectrum_report_from_problem():
    rep = spectrum_report(advection_2d(n=3, order=1, basis="lagrange"), k=5)
    assert rep.verdict == "stable"
    assert rep.n_dofs == 16


def test_spectrum_csv(tmp_path):
    rep = spectrum_report(advection_2d(n=3, order=1, basis="lagrange"), k=4)
    path = tmp_path / "spec.csv"
    write_spectrum_csv(rep, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# dofs = 16")
    assert lines[1] == "# verdict = stable"
    assert lines[2] == "neg_noSAT,pos_noSAT,neg_SAT,pos_SAT"
    assert len(lines) == 3 + 4


def test_interior_supported_vectors_annihilated():
    mesh = unit_square_mesh(4)
    dm = build_dofmap(mesh, 2, "bernstein")
    ops = build_operators(mesh, dm, dm.basis_spec(), [1.0, 0.0])
    S = stability_matrix(ops)
    interior = dm.interior_dofs()
    rng = np.random.default_rng(0)
    for _ in range(10):
        v = np.zeros(dm.n_dofs)
        v[interior] = rng.standard_normal(interior.size)
        assert np.abs(S @ v).max() <= 1e-12 * np.abs(v).max()
