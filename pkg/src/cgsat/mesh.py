"""Grids, triangulations and the continuous-Galerkin DoF map.

Meshes are 1D interval grids or conforming 2D triangulations with tagged
boundary faces and outward unit normals.  Triangles are stored with positive
orientation.  A small ASCII format is used on disk::

    # comment lines allowed anywhere
    dim nv ne nb
    <nv coordinate lines>
    <ne element lines, 0-based vertex indices>
    <nb boundary lines:  elem local_face tag>

Local faces: in 1D, face 0/1 are the left/right endpoint of an element; on a
triangle, face k is the edge from local vertex k to local vertex (k+1) % 3.

Meshes and DoF maps are immutable after construction (arrays are marked
read-only) and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import (BasisSpec, interval_lattice, n_local_dofs,
                    triangle_multi_indices)


class MeshFormatError(ValueError):
    """Mesh file cannot be parsed; carries the offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class NonconformingMeshError(ValueError):
    """A face is shared by more than two elements, or tags are inconsistent."""


class DegenerateElementError(ValueError):
    """An element has (near-)zero measure."""


@dataclass(frozen=True)
class BoundaryFace:
    element: int
    local_face: int
    tag: str
    normal: np.ndarray      # outward unit normal, shape (dim,)
    length: float           # edge length (2D); 1.0 for 1D endpoints
    midpoint: np.ndarray


@dataclass(frozen=True)
class Mesh:
    dimension: int
    vertices: np.ndarray          # (nv, dim)
    elements: np.ndarray          # (ne, dim+1) vertex indices
    boundary_faces: tuple[BoundaryFace, ...]

    def __post_init__(self):
        self.vertices.setflags(write=False)
        self.elements.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def element_coords(self, e: int) -> np.ndarray:
        return self.vertices[self.elements[e]]

    def signed_areas(self) -> np.ndarray:
        """Signed areas (2D) or widths (1D) of all elements."""
        if self.dimension == 1:
            x = self.vertices[self.elements, 0]
            return x[:, 1] - x[:, 0]
        v = self.vertices[self.elements]
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def h_min(self) -> float:
        """Smallest cell width (1D) or incircle diameter (2D)."""
        if self.dimension == 1:
            return float(np.min(self.signed_areas()))
        v = self.vertices[self.elements]
        sides = np.stack([
            np.linalg.norm(v[:, 1] - v[:, 0], axis=1),
            np.linalg.norm(v[:, 2] - v[:, 1], axis=1),
            np.linalg.norm(v[:, 0] - v[:, 2], axis=1),
        ])
        area = self.signed_areas()
        return float(np.min(4.0 * area / sides.sum(axis=0)))

    def h_max(self) -> float:
        """Largest element diameter."""
        if self.dimension == 1:
            return float(np.max(self.signed_areas()))
        v = self.vertices[self.elements]
        sides = np.stack([
            np.linalg.norm(v[:, 1] - v[:, 0], axis=1),
            np.linalg.norm(v[:, 2] - v[:, 1], axis=1),
            np.linalg.norm(v[:, 0] - v[:, 2], axis=1),
        ])
        return float(np.max(sides))


# ---------------------------------------------------------------------------
# topology helpers
# ---------------------------------------------------------------------------

def _face_vertices(elements: np.ndarray, e: int, k: int, dim: int):
    if dim == 1:
        return (int(elements[e, k]),)
    return (int(elements[e, k]), int(elements[e, (k + 1) % 3]))


def _all_faces(dim: int, elements: np.ndarray):
    """Map sorted face-vertex tuple -> list of (element, local_face)."""
    faces: dict[tuple, list] = {}
    nfaces = 2 if dim == 1 else 3
    for e in range(elements.shape[0]):
        for k in range(nfaces):
            key = tuple(sorted(_face_vertices(elements, e, k, dim)))
            faces.setdefault(key, []).append((e, k))
    return faces


def _face_geometry(vertices, elements, e, k, dim):
    if dim == 1:
        x = vertices[elements[e], 0]
        normal = np.array([-1.0]) if k == 0 else np.array([1.0])
        mid = np.array([x[k]])
        return normal, 1.0, mid
    a = vertices[elements[e, k]]
    b = vertices[elements[e, (k + 1) % 3]]
    d = b - a
    length = float(np.hypot(d[0], d[1]))
    normal = np.array([d[1], -d[0]]) / length
    return normal, length, 0.5 * (a + b)


def _build_mesh(dim, vertices, elements, tagged_faces) -> Mesh:
    """Assemble a Mesh and enforce its invariants.

    tagged_faces: list of (element, local_face, tag), with local faces
    referring to the element ordering as passed in (tags are matched by
    vertex set, so a later orientation fix cannot misplace them).
    """
    vertices = np.ascontiguousarray(np.asarray(vertices, dtype=float))
    if vertices.ndim == 1:
        vertices = vertices.reshape(-1, 1)
    elements = np.ascontiguousarray(np.asarray(elements, dtype=np.int64))
    tag_keys = [(tuple(sorted(_face_vertices(elements, e, k, dim))), tag)
                for (e, k, tag) in tagged_faces]

    # positive orientation
    if dim == 2:
        v = vertices[elements]
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        flip = areas < 0
        if np.any(flip):
            elements = elements.copy()
            elements[flip, 1], elements[flip, 2] = (elements[flip, 2].copy(),
                                                    elements[flip, 1].copy())
            areas = np.abs(areas)
        hh = np.max(np.linalg.norm(v[:, 1] - v[:, 0], axis=1))
        if np.any(areas <= 1e-14 * hh ** 2):
            bad = int(np.argmin(areas))
            raise DegenerateElementError(
                f"element {bad} has signed area {areas[bad]:.3e}")
    else:
        widths = vertices[elements[:, 1], 0] - vertices[elements[:, 0], 0]
        flip = widths < 0
        if np.any(flip):
            elements = elements.copy()
            elements[flip] = elements[flip][:, ::-1]
            widths = np.abs(widths)
        if np.any(widths <= 1e-14):
            raise DegenerateElementError("zero-width interval element")

    faces = _all_faces(dim, elements)
    for key, owners in faces.items():
        if len(owners) > 2:
            raise NonconformingMeshError(
                f"face {key} shared by {len(owners)} elements")

    tag_map = {}
    for key, tag in tag_keys:
        if key not in faces or len(faces[key]) != 1:
            raise NonconformingMeshError(
                f"face {key} tagged as boundary but not a boundary face")
        tag_map[key] = tag
    bfaces = []
    for key, owners in sorted(faces.items()):
        if len(owners) == 1:
            if key not in tag_map:
                raise NonconformingMeshError(
                    f"boundary face {key} carries no tag")
            e, k = owners[0]
            normal, length, mid = _face_geometry(vertices, elements, e, k, dim)
            normal.setflags(write=False)
            mid.setflags(write=False)
            bfaces.append(BoundaryFace(e, k, tag_map[key], normal, length, mid))
    return Mesh(dim, vertices, elements, tuple(bfaces))


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------

def load_mesh(path) -> Mesh:
    """Read a mesh from the ASCII format described in the module docstring."""
    with open(path) as fh:
        raw = fh.readlines()
    lines = []
    for lineno, line in enumerate(raw, start=1):
        body = line.split("#", 1)[0].strip()
        if body:
            lines.append((lineno, body))
    if not lines:
        raise MeshFormatError(0, "empty mesh file")

    def parse(idx, n_tokens, conv, what):
        lineno, body = lines[idx]
        toks = body.split()
        if len(toks) < n_tokens:
            raise MeshFormatError(lineno, f"expected {n_tokens} fields for {what}")
        try:
            return [conv(t) for t in toks[:n_tokens]]
        except ValueError as exc:
            raise MeshFormatError(lineno, f"bad {what}: {exc}") from None

    dim, nv, ne, nb = parse(0, 4, int, "header 'dim nv ne nb'")
    if dim not in (1, 2):
        raise MeshFormatError(lines[0][0], f"dimension must be 1 or 2, got {dim}")
    needed = 1 + nv + ne + nb
    if len(lines) < needed:
        raise MeshFormatError(lines[-1][0],
                              f"file truncated: expected {needed} data lines")
    vertices = [parse(1 + i, dim, float, "vertex") for i in range(nv)]
    elements = [parse(1 + nv + i, dim + 1, int, "element") for i in range(ne)]
    tagged = []
    for i in range(nb):
        lineno, body = lines[1 + nv + ne + i]
        toks = body.split()
        if len(toks) < 3:
            raise MeshFormatError(lineno, "expected 'elem face tag'")
        try:
            e, k = int(toks[0]), int(toks[1])
        except ValueError as exc:
            raise MeshFormatError(lineno, f"bad boundary line: {exc}") from None
        tagged.append((e, k, toks[2]))
    for i, el in enumerate(elements):
        for v in el:
            if not 0 <= v < nv:
                raise MeshFormatError(lines[1 + nv + i][0],
                                      f"vertex index {v} out of range")
    return _build_mesh(dim, vertices, elements, tagged)


def save_mesh(mesh: Mesh, path) -> None:
    """Write a mesh in the ASCII format (round-trips through load_mesh)."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.dimension} {mesh.n_vertices} {mesh.n_elements} "
                 f"{len(mesh.boundary_faces)}\n")
        for v in mesh.vertices:
            fh.write(" ".join(repr(float(x)) for x in v) + "\n")
        for el in mesh.elements:
            fh.write(" ".join(str(int(i)) for i in el) + "\n")
        for bf in mesh.boundary_faces:
            fh.write(f"{bf.element} {bf.local_face} {bf.tag}\n")


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def interval_mesh(n: int, spacing: str = "regular", seed=None) -> Mesh:
    """n cells on [0, 1]; 'random' perturbs interior nodes by up to 0.4 h."""
    if n < 1:
        raise ValueError("need at least one cell")
    nodes = np.linspace(0.0, 1.0, n + 1)
    if spacing == "random":
        rng = np.random.default_rng(seed)
        h = 1.0 / n
        nodes[1:-1] += rng.uniform(-0.4 * h, 0.4 * h, size=n - 1)
    elif spacing != "regular":
        raise ValueError(f"unknown spacing {spacing!r}")
    elements = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    tagged = [(0, 0, "left"), (n - 1, 1, "right")]
    return _build_mesh(1, nodes, elements, tagged)


def _square_tags(vertices, elements):
    tagged = []
    faces = _all_faces(2, elements)
    for key, owners in faces.items():
        if len(owners) != 1:
            continue
        e, k = owners[0]
        _, _, mid = _face_geometry(vertices, elements, e, k, 2)
        if abs(mid[0]) < 1e-12:
            tag = "left"
        elif abs(mid[0] - 1.0) < 1e-12:
            tag = "right"
        elif abs(mid[1]) < 1e-12:
            tag = "bottom"
        else:
            tag = "top"
        tagged.append((e, k, tag))
    return tagged


def unit_square_mesh(n: int, perturb_seed=None) -> Mesh:
    """Structured 2 n^2-triangle mesh of [0,1]^2 (diagonal split).

    With ``perturb_seed`` set, interior vertices are jittered by up to 0.3/n
    in each coordinate, producing an unstructured mesh with the same uniform
    boundary discretization.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)
    if perturb_seed is not None:
        rng = np.random.default_rng(perturb_seed)
        interior = ((vertices[:, 0] > 1e-12) & (vertices[:, 0] < 1 - 1e-12) &
                    (vertices[:, 1] > 1e-12) & (vertices[:, 1] < 1 - 1e-12))
        jitter = rng.uniform(-0.3 / n, 0.3 / n, size=(vertices.shape[0], 2))
        vertices = vertices + jitter * interior[:, None]

    def vid(i, j):
        return j * (n + 1) + i

    elements = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            elements.append((v00, v10, v11))
            elements.append((v00, v11, v01))
    elements = np.array(elements)
    return _build_mesh(2, vertices, elements, _square_tags(vertices, elements))


def unit_disk_mesh(n: int) -> Mesh:
    """Hexagonal-ring triangulation of the unit disk: 6 n^2 triangles.

    Ring k carries 6k vertices at radius k/n; boundary vertices lie on the
    unit circle exactly.  The polygonal boundary length approaches 2*pi from
    below as n grows.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    vertices = [(0.0, 0.0)]
    ring_start = [0]
    for k in range(1, n + 1):
        ring_start.append(len(vertices))
        r = k / n
        for j in range(6 * k):
            th = 2.0 * np.pi * j / (6 * k)
            vertices.append((r * np.cos(th), r * np.sin(th)))
    elements = []
    # innermost fan
    for j in range(6):
        elements.append((0, 1 + j, 1 + (j + 1) % 6))
    # bands between ring k-1 and ring k
    for k in range(2, n + 1):
        ni, no = 6 * (k - 1), 6 * k
        si, so = ring_start[k - 1], ring_start[k]
        for s in range(6):
            for t in range(k):
                o0 = so + (s * k + t) % no
                o1 = so + (s * k + t + 1) % no
                i0 = si + (s * (k - 1) + t) % ni
                elements.append((o0, o1, i0))
                if t < k - 1:
                    i1 = si + (s * (k - 1) + t + 1) % ni
                    elements.append((o1, i1, i0))
    vertices = np.array(vertices)
    elements = np.array(elements)
    tagged = []
    faces = _all_faces(2, elements)
    for key, owners in faces.items():
        if len(owners) == 1:
            e, k = owners[0]
            tagged.append((e, k, "circle"))
    return _build_mesh(2, vertices, elements, tagged)


def annulus_mesh(r0: float, r1: float, n: int) -> Mesh:
    """Ring mesh between radii r0 < r1 with n radial layers.

    The angular resolution follows the radial spacing, so cells stay close
    to isotropic.  Tags: 'inner' and 'outer'.
    """
    if not 0 < r0 < r1:
        raise ValueError("need 0 < r0 < r1")
    if n < 1:
        raise ValueError("need n >= 1")
    m = max(8, int(round(np.pi * (r0 + r1) * n / (r1 - r0))))
    m += m % 2          # even count keeps the angular layout mirror-symmetric
    radii = np.linspace(r0, r1, n + 1)
    vertices = []
    for r in radii:
        for j in range(m):
            th = 2.0 * np.pi * j / m
            vertices.append((r * np.cos(th), r * np.sin(th)))
    elements = []
    for k in range(n):
        for j in range(m):
            a = k * m + j
            b = k * m + (j + 1) % m
            c = (k + 1) * m + j
            d = (k + 1) * m + (j + 1) % m
            elements.append((a, b, d))
            elements.append((a, d, c))
    vertices = np.array(vertices)
    elements = np.array(elements)
    tagged = []
    faces = _all_faces(2, elements)
    rmid = 0.5 * (r0 + r1)
    for key, owners in faces.items():
        if len(owners) == 1:
            e, k = owners[0]
            _, _, mid = _face_geometry(vertices, elements, e, k, 2)
            tag = "inner" if np.hypot(*mid) < rmid else "outer"
            tagged.append((e, k, tag))
    return _build_mesh(2, vertices, elements, tagged)


def generate_mesh(spec: str) -> Mesh:
    """Build a mesh from a recipe string.

    Recognized recipes::

        interval(n[,regular|random[,seed]])
        unit_square(n)
        perturbed_square(n,seed)
        unit_disk(n)
        annulus(r0,r1,n)
    """
    spec = spec.strip()
    if "(" not in spec or not spec.endswith(")"):
        raise ValueError(f"bad mesh recipe {spec!r}")
    name, argstr = spec[:-1].split("(", 1)
    args = [a.strip() for a in argstr.split(",")] if argstr.strip() else []
    name = name.strip()
    if name == "interval":
        n = int(args[0])
        spacing = args[1] if len(args) > 1 else "regular"
        seed = int(args[2]) if len(args) > 2 else None
        return interval_mesh(n, spacing, seed)
    if name == "unit_square":
        return unit_square_mesh(int(args[0]))
    if name == "perturbed_square":
        return unit_square_mesh(int(args[0]), perturb_seed=int(args[1]))
    if name == "unit_disk":
        return unit_disk_mesh(int(args[0]))
    if name == "annulus":
        return annulus_mesh(float(args[0]), float(args[1]), int(args[2]))
    raise ValueError(f"unknown mesh recipe {name!r}")


# ---------------------------------------------------------------------------
# DoF map
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FaceDofs:
    """Per boundary face: global DoFs in face-lattice order plus geometry."""

    face: BoundaryFace
    dofs: np.ndarray            # (p+1,) along the edge in 2D; (1,) in 1D


@dataclass(frozen=True)
class DofMap:
    order: int
    kind: str
    mesh: Mesh = field(repr=False)
    element_dofs: np.ndarray    # (ne, n_local)
    n_dofs: int
    dof_coords: np.ndarray      # (n_dofs, dim) lattice positions
    boundary_dofs: np.ndarray   # sorted global ids on the physical boundary
    face_dofs: tuple[FaceDofs, ...]

    def __post_init__(self):
        self.element_dofs.setflags(write=False)
        self.dof_coords.setflags(write=False)
        self.boundary_dofs.setflags(write=False)

    @property
    def n_local(self) -> int:
        return self.element_dofs.shape[1]

    def interior_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.nonzero(mask)[0]

    def basis_spec(self) -> BasisSpec:
        domain = "interval" if self.mesh.dimension == 1 else "triangle"
        return BasisSpec(self.kind, self.order, domain)


def build_dofmap(mesh: Mesh, p: int, kind: str) -> DofMap:
    """Continuous-Galerkin DoF numbering: vertices, then edges, then cells.

    Lattice points shared between neighboring elements receive a single
    global id; edge-interior DoFs follow the global edge orientation
    (low vertex id to high), so both neighbors agree on the ordering.
    """
    if not 1 <= p <= 3:
        raise ValueError(f"unsupported order {p}")
    dim = mesh.dimension
    nv = mesh.n_vertices
    ne = mesh.n_elements
    nloc = n_local_dofs("interval" if dim == 1 else "triangle", p)

    if dim == 1:
        n_int = p - 1
        element_dofs = np.zeros((ne, nloc), dtype=np.int64)
        for e in range(ne):
            a, b = mesh.elements[e]
            dofs = np.empty(nloc, dtype=np.int64)
            dofs[0], dofs[-1] = a, b
            for t in range(1, p):
                dofs[t] = nv + e * n_int + (t - 1)
            element_dofs[e] = dofs
        n_dofs = nv + ne * n_int
        coords = np.zeros((n_dofs, 1))
        lattice = interval_lattice(p)
        for e in range(ne):
            x = mesh.vertices[mesh.elements[e], 0]
            coords[element_dofs[e], 0] = x[0] + (x[1] - x[0]) * lattice
        face_dofs = []
        boundary = set()
        for bf in mesh.boundary_faces:
            g = int(element_dofs[bf.element, 0 if bf.local_face == 0 else nloc - 1])
            face_dofs.append(FaceDofs(bf, np.array([g])))
            boundary.add(g)
        return DofMap(p, kind, mesh, element_dofs, n_dofs, coords,
                      np.array(sorted(boundary), dtype=np.int64),
                      tuple(face_dofs))

    # 2D: number edges
    edge_ids: dict[tuple, int] = {}
    for e in range(ne):
        for k in range(3):
            key = tuple(sorted((int(mesh.elements[e, k]),
                                int(mesh.elements[e, (k + 1) % 3]))))
            if key not in edge_ids:
                edge_ids[key] = len(edge_ids)
    n_edges = len(edge_ids)
    n_edge_int = p - 1
    n_cell_int = (p - 1) * (p - 2) // 2
    n_dofs = nv + n_edges * n_edge_int + ne * n_cell_int

    element_dofs = np.zeros((ne, nloc), dtype=np.int64)
    for e in range(ne):
        verts = [int(v) for v in mesh.elements[e]]
        dofs = list(verts)
        for k in range(3):
            a, b = verts[k], verts[(k + 1) % 3]
            eid = edge_ids[tuple(sorted((a, b)))]
            base = nv + eid * n_edge_int
            local = list(range(base, base + n_edge_int))
            if a > b:                       # local direction opposes global
                local = local[::-1]
            dofs.extend(local)
        base = nv + n_edges * n_edge_int + e * n_cell_int
        dofs.extend(range(base, base + n_cell_int))
        element_dofs[e] = dofs

    coords = np.zeros((n_dofs, 2))
    bary = np.array(triangle_multi_indices(p), dtype=float) / p
    for e in range(ne):
        v = mesh.vertices[mesh.elements[e]]
        pts = bary @ v
        coords[element_dofs[e]] = pts

    face_dofs = []
    boundary = set()
    for bf in mesh.boundary_faces:
        k = bf.local_face
        loc = [k] + [3 + k * n_edge_int + t for t in range(n_edge_int)] \
            + [(k + 1) % 3]
        g = element_dofs[bf.element, loc]
        face_dofs.append(FaceDofs(bf, np.array(g, dtype=np.int64)))
        boundary.update(int(i) for i in g)

    return DofMap(p, kind, mesh, element_dofs, n_dofs, coords,
                  np.array(sorted(boundary), dtype=np.int64),
                  tuple(face_dofs))
