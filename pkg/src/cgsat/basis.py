"""Reference-element polynomial bases and quadrature rules.

Two basis families are supported on the unit interval [0, 1] and on the
unit triangle {(x, y) : x >= 0, y >= 0, x + y <= 1}:

* ``lagrange``  -- nodal basis on the equispaced lattice, phi_i(x_j) = delta_ij
* ``bernstein`` -- nonnegative Bezier basis with control points on the same
  lattice

Both families share one local numbering (vertices, then edge lattice points
in edge order, then interior points), so the continuous-Galerkin DoF
identification in :mod:`cgsat.mesh` is basis independent.

Quadrature rules are exposed for the interval, boundary edges (same thing)
and the triangle.  Triangle rules are symmetric rules tabulated to 20
significant digits; interval rules are Gauss-Legendre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

LAGRANGE = "lagrange"
BERNSTEIN = "bernstein"
_KINDS = (LAGRANGE, BERNSTEIN)

MAX_ORDER = 3


class UnsupportedOrderError(ValueError):
    """Raised for polynomial orders outside the supported range 1..3."""


class UnsupportedDegreeError(ValueError):
    """Raised for quadrature exactness degrees outside the tabulated range."""


class PointOutsideDomainError(ValueError):
    """Raised when a basis is evaluated outside its reference domain."""


# ---------------------------------------------------------------------------
# reference lattices and local numbering
# ---------------------------------------------------------------------------

def interval_lattice(p: int) -> np.ndarray:
    """Equispaced lattice 0, 1/p, ..., 1 (left-to-right local numbering)."""
    return np.linspace(0.0, 1.0, p + 1)


def triangle_multi_indices(p: int) -> list[tuple[int, int, int]]:
    """Barycentric exponent triples (i0, i1, i2), i0+i1+i2 = p, in local order.

    Order: vertices (p,0,0), (0,p,0), (0,0,p); then lattice points interior
    to edge 0 (v0->v1), edge 1 (v1->v2), edge 2 (v2->v0); then cell-interior
    points.
    """
    vertices = [(p, 0, 0), (0, p, 0), (0, 0, p)]
    edges = []
    for t in range(1, p):
        edges.append((p - t, t, 0))        # edge 0: v0 -> v1
    for t in range(1, p):
        edges.append((0, p - t, t))        # edge 1: v1 -> v2
    for t in range(1, p):
        edges.append((t, 0, p - t))        # edge 2: v2 -> v0
    interior = [(i, j, p - i - j)
                for i in range(1, p) for j in range(1, p - i)
                if p - i - j >= 1]
    return vertices + edges + interior


def triangle_lattice(p: int) -> np.ndarray:
    """Reference coordinates (x, y) = (i1, i2)/p of the local lattice."""
    idx = triangle_multi_indices(p)
    return np.array([(j / p, k / p) for (_, j, k) in idx], dtype=float)


def n_local_dofs(domain: str, p: int) -> int:
    if domain == "interval":
        return p + 1
    if domain == "triangle":
        return (p + 1) * (p + 2) // 2
    raise ValueError(f"unknown reference domain {domain!r}")


@dataclass(frozen=True)
class BasisSpec:
    """A reference basis: family, polynomial order and reference domain."""

    kind: str
    order: int
    domain: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if not 1 <= self.order <= MAX_ORDER:
            raise UnsupportedOrderError(
                f"order {self.order} not supported (must be 1..{MAX_ORDER})")
        if self.domain not in ("interval", "triangle"):
            raise ValueError(f"unknown reference domain {self.domain!r}")

    @property
    def n_dofs(self) -> int:
        return n_local_dofs(self.domain, self.order)

    @property
    def dim(self) -> int:
        return 1 if self.domain == "interval" else 2

    def lattice(self) -> np.ndarray:
        """Nodal points (Lagrange) / control points (Bernstein)."""
        if self.domain == "interval":
            return interval_lattice(self.order)
        return triangle_lattice(self.order)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

_DOMAIN_TOL = 1e-12


def _check_inside(spec: BasisSpec, pts: np.ndarray) -> None:
    if spec.domain == "interval":
        x = pts[:, 0]
        bad = (x < -_DOMAIN_TOL) | (x > 1.0 + _DOMAIN_TOL)
    else:
        x, y = pts[:, 0], pts[:, 1]
        bad = (x < -_DOMAIN_TOL) | (y < -_DOMAIN_TOL) | (x + y > 1.0 + _DOMAIN_TOL)
    if np.any(bad):
        raise PointOutsideDomainError(
            f"evaluation point outside the reference {spec.domain}")


def _as_points(spec: BasisSpec, point) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    if pts.shape[1] != spec.dim:
        pts = pts.reshape(-1, spec.dim)
    return pts


@lru_cache(maxsize=None)
def _lagrange_coeffs(domain: str, p: int) -> np.ndarray:
    """Monomial coefficients of the Lagrange basis, one column per function."""
    if domain == "interval":
        nodes = interval_lattice(p).reshape(-1, 1)
        powers = [(a,) for a in range(p + 1)]
    else:
        nodes = triangle_lattice(p)
        powers = [(a, b) for a in range(p + 1) for b in range(p + 1 - a)]
    V = np.ones((len(nodes), len(powers)))
    for c, pw in enumerate(powers):
        for d, e in enumerate(pw):
            V[:, c] *= nodes[:, d] ** e
    return np.linalg.inv(V)


def _monomials(domain: str, p: int, pts: np.ndarray, grad: bool):
    if domain == "interval":
        powers = [(a,) for a in range(p + 1)]
    else:
        powers = [(a, b) for a in range(p + 1) for b in range(p + 1 - a)]
    npts = pts.shape[0]
    vals = np.ones((npts, len(powers)))
    for c, pw in enumerate(powers):
        for d, e in enumerate(pw):
            vals[:, c] *= pts[:, d] ** e
    if not grad:
        return vals
    dim = pts.shape[1]
    out = np.zeros((npts, len(powers), dim))
    for c, pw in enumerate(powers):
        for gdim in range(dim):
            if pw[gdim] == 0:
                continue
            term = np.full(npts, float(pw[gdim]))
            for d, e in enumerate(pw):
                ee = e - 1 if d == gdim else e
                term = term * pts[:, d] ** ee
            out[:, c, gdim] = term
    return out


def _bary(pts: np.ndarray, domain: str) -> np.ndarray:
    if domain == "interval":
        x = pts[:, 0]
        return np.stack([1.0 - x, x], axis=1)
    x, y = pts[:, 0], pts[:, 1]
    return np.stack([1.0 - x - y, x, y], axis=1)


# gradients of the barycentric coordinates w.r.t. reference coordinates
_BARY_GRAD = {
    "interval": np.array([[-1.0], [1.0]]),
    "triangle": np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]),
}


def _bernstein_exponents(spec: BasisSpec) -> np.ndarray:
    p = spec.order
    if spec.domain == "interval":
        return np.array([(p - i, i) for i in range(p + 1)])
    return np.array(triangle_multi_indices(p))


def tabulate(spec: BasisSpec, points) -> np.ndarray:
    """Basis values at many points; shape (npts, n_dofs)."""
    pts = _as_points(spec, points)
    _check_inside(spec, pts)
    if spec.kind == LAGRANGE:
        mono = _monomials(spec.domain, spec.order, pts, grad=False)
        return mono @ _lagrange_coeffs(spec.domain, spec.order)
    lam = _bary(pts, spec.domain)
    exps = _bernstein_exponents(spec)
    p = spec.order
    out = np.empty((pts.shape[0], spec.n_dofs))
    for c, e in enumerate(exps):
        coef = math.factorial(p)
        for ei in e:
            coef //= math.factorial(int(ei))
        vals = float(coef) * np.ones(pts.shape[0])
        for d, ei in enumerate(e):
            if ei:
                vals = vals * lam[:, d] ** ei
        out[:, c] = vals
    return out


def tabulate_grad(spec: BasisSpec, points) -> np.ndarray:
    """Basis reference gradients at many points; shape (npts, n_dofs, dim)."""
    pts = _as_points(spec, points)
    _check_inside(spec, pts)
    if spec.kind == LAGRANGE:
        mono = _monomials(spec.domain, spec.order, pts, grad=True)
        C = _lagrange_coeffs(spec.domain, spec.order)
        return np.einsum("pmd,mj->pjd", mono, C)
    lam = _bary(pts, spec.domain)
    dlam = _BARY_GRAD[spec.domain]
    exps = _bernstein_exponents(spec)
    p = spec.order
    npts = pts.shape[0]
    out = np.zeros((npts, spec.n_dofs, spec.dim))
    for c, e in enumerate(exps):
        coef = math.factorial(p)
        for ei in e:
            coef //= math.factorial(int(ei))
        for d, ei in enumerate(e):
            if not ei:
                continue
            term = float(coef) * float(ei) * np.ones(npts)
            for d2, e2 in enumerate(e):
                ee = e2 - 1 if d2 == d else e2
                if ee:
                    term = term * lam[:, d2] ** ee
            out[:, c, :] += term[:, None] * dlam[d][None, :]
    return out


def eval_basis(spec: BasisSpec, point) -> np.ndarray:
    """Basis values at one reference point; length n_dofs."""
    return tabulate(spec, point)[0]


def eval_grad(spec: BasisSpec, point) -> np.ndarray:
    """Basis gradients at one reference point; shape (n_dofs, dim)."""
    return tabulate_grad(spec, point)[0]


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on a reference domain, exact to ``degree``."""

    domain: str
    points: np.ndarray     # (nq, dim)
    weights: np.ndarray    # sums to the reference measure
    degree: int


def _gauss_legendre_01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _orbit_c():
    t = 1.0 / 3.0
    return [(t, t)]


def _orbit_s(a: float):
    b = 1.0 - 2.0 * a
    return [(a, a), (b, a), (a, b)]


def _orbit_r(a: float, b: float):
    c = 1.0 - a - b
    return [(b, c), (c, b), (a, c), (c, a), (a, b), (b, a)]


# Symmetric triangle rules.  Orbit parameters/weights carry 20 significant
# digits; weights are normalized to sum to 1 and later scaled by the
# reference measure 1/2.  ("C" centroid, "S" 3-point orbit, "R" 6-point orbit)
_TRI_TABLES = {
    1: [("C", (), 1.0)],
    2: [("S", (1.0 / 6.0,), 1.0 / 3.0)],
    4: [
        ("S", (0.4459484909159648863,), 0.22338158967801146570),
        ("S", (0.091576213509770743460,), 0.10995174365532186764),
    ],
    5: [
        ("C", (), 0.225),
        ("S", (0.47014206410511508977,), 0.13239415278850618074),
        ("S", (0.10128650732345633880,), 0.12593918054482715260),
    ],
    6: [
        ("S", (0.24928674517091042129,), 0.11678627572637936603),
        ("S", (0.063089014491502228340,), 0.050844906370206816921),
        ("R", (0.31035245103378440542, 0.053145049844816947353),
         0.082851075618373575194),
    ],
    8: [
        ("C", (), 0.14431560767778716825),
        ("S", (0.45929258829272315603,), 0.095091634267284624794),
        ("S", (0.17056930775176020662,), 0.10321737053471825028),
        ("S", (0.050547228317030975458,), 0.032458497623198080310),
        ("R", (0.26311282963463811342, 0.72849239295540428124),
         0.027230314174434994265),
    ],
}
_TRI_DEGREE_MAP = {1: 1, 2: 2, 3: 4, 4: 4, 5: 5, 6: 6, 7: 8, 8: 8}


@lru_cache(maxsize=None)
def quad_rule(domain: str, degree: int) -> QuadratureRule:
    """Quadrature rule on 'interval', 'edge' or 'triangle', exact to ``degree``.

    Interval/edge rules are Gauss-Legendre on [0, 1].  Triangle rules are the
    standard symmetric rules (1, 3, 6, 7, 12 and 16 points); a request for a
    degree without a dedicated rule is served by the next stronger one.
    """
    if not 1 <= degree <= 8:
        raise UnsupportedDegreeError(
            f"quadrature degree {degree} outside the supported range 1..8")
    if domain in ("interval", "edge"):
        n = degree // 2 + 1
        x, w = _gauss_legendre_01(n)
        return QuadratureRule(domain, x.reshape(-1, 1), w, 2 * n - 1)
    if domain != "triangle":
        raise ValueError(f"unknown quadrature domain {domain!r}")
    table_deg = _TRI_DEGREE_MAP[degree]
    pts, wts = [], []
    for kind, params, w in _TRI_TABLES[table_deg]:
        orbit = {"C": _orbit_c, "S": _orbit_s, "R": _orbit_r}[kind](*params)
        pts.extend(orbit)
        wts.extend([w] * len(orbit))
    points = np.array(pts)
    weights = 0.5 * np.array(wts)   # reference triangle measure
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule("triangle", points, weights, table_deg)
