"""Stability test matrix, dense symmetric eigensolver and spectrum reports.

A discretization is certified stable when the symmetric test matrix built
from the stiffness Q and the boundary penalty Pi has no positive eigenvalue
beyond roundoff.  Without a penalty the test matrix is Q + Q^T, whose
nonzero spectrum pairs as +-lambda on boundary modes and vanishes on
interior modes; with a penalty the assembled operator is Q1 = Q - Pi and
the certificate matrix is

    S = (Pi - Q1) + (Pi - Q1)^T = 2 (Pi + Pi^T) - (Q + Q^T).

The verdict is ``stable`` iff max eig(S) <= 1e-12 * max|Q|.

The eigensolver is self-contained (Householder tridiagonalization followed
by implicit-shift QL with eigenvector accumulation); a plain cyclic Jacobi
sweep is included as an independent cross-check for the test suite.  The
dense path is intended for desk-scale operators (a few thousand DoFs).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

DENSE_EIG_CAP = 5000
STABILITY_RTOL = 1e-12


class EigenSolverError(RuntimeError):
    """Raised when the QL iteration fails to converge."""


# ---------------------------------------------------------------------------
# dense symmetric eigensolver
# ---------------------------------------------------------------------------

def _tridiagonalize(a: np.ndarray, vectors: bool = True):
    """Householder reduction A -> Q^T A Q = tridiag(d, e); returns d, e, Q."""
    A = np.array(a, dtype=float)
    n = A.shape[0]
    Q = np.eye(n) if vectors else None
    for k in range(n - 2):
        x = A[k + 1:, k].copy()
        nx = np.linalg.norm(x)
        if nx == 0.0:
            continue
        alpha = -np.copysign(nx, x[0] if x[0] != 0 else 1.0)
        v = x
        v[0] -= alpha
        nv = np.linalg.norm(v)
        if nv < 1e-300:
            continue
        v /= nv
        # two-sided Householder update restricted to the trailing block
        A[k + 1:, k:] -= 2.0 * np.outer(v, v @ A[k + 1:, k:])
        A[:, k + 1:] -= 2.0 * np.outer(A[:, k + 1:] @ v, v)
        if vectors:
            Q[:, k + 1:] -= 2.0 * np.outer(Q[:, k + 1:] @ v, v)
    d = np.diag(A).copy()
    e = np.zeros(n)
    if n > 1:
        e[:-1] = np.diag(A, 1)
    return d, e, Q


def _ql_implicit(d, e, Q, max_iter=60):
    """Implicit-shift QL on a symmetric tridiagonal; rotations folded into Q."""
    n = d.size
    d = d.copy()
    e = np.append(e[:n - 1].copy(), 0.0)
    eps = np.finfo(float).eps
    # absolute deflation floor: couplings at roundoff level relative to the
    # matrix scale are negligible even between (near-)zero diagonal entries
    anorm = float(np.max(np.abs(d)) + np.max(np.abs(e))) if n else 0.0
    floor = eps * anorm
    for l in range(n):
        for iteration in range(max_iter + 1):
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd or abs(e[m]) <= floor:
                    break
                m += 1
            if m == l:
                break
            if iteration == max_iter:
                raise EigenSolverError(
                    f"QL failed to converge at eigenvalue {l}")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + np.copysign(r, g))
            s, c = 1.0, 1.0
            p = 0.0
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if Q is not None:
                    # accumulate rotation into the eigenvector matrix
                    col_i1 = Q[:, i + 1].copy()
                    Q[:, i + 1] = s * Q[:, i] + c * col_i1
                    Q[:, i] = c * Q[:, i] - s * col_i1
            else:
                d[l] -= p
                e[l] = g
                e[m] = 0.0
                continue
            # inner break: restart the while loop for this l
            continue
    return d, Q


def symmetric_eig(S, vectors: bool = True):
    """All eigenvalues (ascending) of a symmetric matrix, with eigenvectors.

    Self-contained dense path; refuses matrices larger than DENSE_EIG_CAP.
    """
    A = S.toarray() if sp.issparse(S) else np.asarray(S, dtype=float)
    n = A.shape[0]
    if n > DENSE_EIG_CAP:
        raise ValueError(f"dense eigensolver capped at {DENSE_EIG_CAP} DoFs")
    if n == 0:
        return np.array([]), np.zeros((0, 0))
    asym = np.abs(A - A.T).max() if n else 0.0
    if asym > 1e-13 * max(np.abs(A).max(), 1e-300):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    d, e, Q = _tridiagonalize(A, vectors=vectors)
    w, Q = _ql_implicit(d, e, Q)
    order = np.argsort(w, kind="stable")
    w = w[order]
    if not vectors:
        return w, None
    return w, Q[:, order]


def jacobi_eigenvalues(S, sweeps: int = 50, tol: float = 1e-14) -> np.ndarray:
    """Cyclic Jacobi rotations; independent of the QL path. Ascending values."""
    A = S.toarray() if sp.issparse(S) else np.array(S, dtype=float)
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    scale = max(np.abs(A).max(), 1e-300)
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-20 * scale:
                    continue
                theta = 0.5 * (A[q, q] - A[p, p]) / apq
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
    return np.sort(np.diag(A))


# ---------------------------------------------------------------------------
# stability test matrix and reports
# ---------------------------------------------------------------------------

def stability_matrix(ops, pi=None):
    """Symmetric stability test matrix.

    Without a boundary operator: Q + Q^T.  With one, the penalty is folded
    into the operator (Q1 = Q - Pi) and tested against itself:
    S = (Pi - Q1) + (Pi - Q1)^T = 2 (Pi + Pi^T) - (Q + Q^T).
    """
    Q = ops.Q if hasattr(ops, "Q") else ops
    S = Q + Q.T
    if pi is not None:
        mat = pi.matrix if hasattr(pi, "matrix") else pi
        if mat.shape != S.shape:
            raise ValueError(
                f"dimension mismatch: Q is {S.shape}, Pi is {mat.shape}")
        S = 2.0 * (mat + mat.T) - S
    S = 0.5 * (S + S.T)
    return S.tocsr() if sp.issparse(S) else S


def extreme_eigs(S, k: int):
    """k most negative and k most positive eigenvalues of a symmetric matrix.

    Returns (neg, pos): ``neg`` ascending from the most negative, ``pos``
    descending from the most positive.  Residuals ||S v - w v|| of the
    returned pairs are verified against 1e-10 * ||S||.
    """
    w, V = symmetric_eig(S, vectors=True)
    n = w.size
    k = min(k, n)
    A = S.toarray() if sp.issparse(S) else np.asarray(S, dtype=float)
    norm = max(np.abs(w).max(initial=0.0), 1e-300)
    idx = list(range(k)) + list(range(n - k, n))
    for i in idx:
        res = np.linalg.norm(A @ V[:, i] - w[i] * V[:, i])
        if res > 1e-10 * norm:
            raise EigenSolverError(
                f"eigenpair residual {res:.2e} exceeds tolerance")
    neg = w[:k]
    pos = w[n - k:][::-1]
    return neg, pos


@dataclass(frozen=True)
class SpectrumReport:
    """Extreme eigenvalues with and without the boundary penalty."""

    n_dofs: int
    neg_no_sat: np.ndarray
    pos_no_sat: np.ndarray
    neg_sat: np.ndarray
    pos_sat: np.ndarray
    max_interior_residual: float
    norm_q: float
    verdict: str

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"

    def tolerance(self) -> float:
        return STABILITY_RTOL * max(self.norm_q, 1e-300)


def build_spectrum_report(Q, pi, k: int = 10, interior_dofs=None,
                          ncomp: int = 1,
                          norm_q: float | None = None) -> SpectrumReport:
    """Four-column eigenvalue report for an assembled stiffness/penalty pair."""
    s0 = stability_matrix(Q)
    s1 = stability_matrix(Q, pi)
    neg0, pos0 = extreme_eigs(s0, k)
    neg1, pos1 = extreme_eigs(s1, k)
    if norm_q is None:
        qmat = Q.Q if hasattr(Q, "Q") else Q
        data = qmat.data if sp.issparse(qmat) else np.asarray(qmat)
        norm_q = float(np.abs(data).max()) if np.size(data) else 0.0
    tol = STABILITY_RTOL * max(norm_q, 1e-300)
    verdict = "stable" if (pos1.size == 0 or pos1[0] <= tol) else "unstable"
    max_int = 0.0
    if interior_dofs is not None and len(interior_dofs):
        dense0 = s0.toarray() if sp.issparse(s0) else s0
        rows = np.asarray(interior_dofs)
        if ncomp > 1:
            rows = (rows[:, None] * ncomp + np.arange(ncomp)[None, :]).ravel()
        max_int = float(np.abs(dense0[rows, :]).max())
    return SpectrumReport(s0.shape[0], neg0, pos0, neg1, pos1,
                          max_int, norm_q, verdict)


def spectrum_report(problem, k: int = 10, **overrides) -> SpectrumReport:
    """Assemble a named problem and report its operator spectrum."""
    from .problems import discretize
    disc = discretize(problem, **overrides)
    if disc.ops_sys.shape[0] > DENSE_EIG_CAP:
        raise ValueError("problem too large for the dense eigensolver")
    return build_spectrum_report(disc.ops_sys, disc.pi, k,
                                 interior_dofs=disc.dofmap.interior_dofs(),
                                 ncomp=disc.ncomp, norm_q=disc.norm_q)


def write_spectrum_csv(report: SpectrumReport, path) -> None:
    """CSV table: one row per reported eigenvalue, four columns."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# dofs = {report.n_dofs}\n")
        fh.write(f"# verdict = {report.verdict}\n")
        writer = csv.writer(fh)
        writer.writerow(["neg_noSAT", "pos_noSAT", "neg_SAT", "pos_SAT"])
        for row in zip(report.neg_no_sat, report.pos_no_sat,
                       report.neg_sat, report.pos_sat):
            writer.writerow([repr(float(x)) for x in row])
