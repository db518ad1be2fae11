"""CSV and legacy-VTK writers for solver output.

2D fields are written as VTK legacy ASCII unstructured grids with one
POINT_DATA scalar per component sampled at mesh vertices; 1D fields as CSV
``x, u1..um``.  Float formatting uses ``repr`` so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import numpy as np

from .mesh import Mesh


def _fmt(x: float) -> str:
    return repr(float(x))


def write_energy_csv(path, traj) -> None:
    """Per-step history: step, t, energy, umax, umin."""
    with open(path, "w") as fh:
        fh.write("step,t,energy,umax,umin\n")
        for k in range(traj.times.size):
            fh.write(f"{k},{_fmt(traj.times[k])},{_fmt(traj.energies[k])},"
                     f"{_fmt(traj.umax[k])},{_fmt(traj.umin[k])}\n")


def write_solution_csv_1d(path, dofmap, values: np.ndarray) -> None:
    """1D solution sampled at DoF nodes, sorted by x."""
    x = dofmap.dof_coords[:, 0]
    order = np.argsort(x, kind="stable")
    vals = values.reshape(dofmap.n_dofs, -1)
    with open(path, "w") as fh:
        fh.write("x," + ",".join(f"u{c+1}" for c in range(vals.shape[1])) + "\n")
        for i in order:
            fh.write(_fmt(x[i]) + "," +
                     ",".join(_fmt(v) for v in vals[i]) + "\n")


def write_vtk(path, mesh: Mesh, point_data: dict, title: str = "cgsat output") -> None:
    """Legacy-ASCII VTK unstructured grid with vertex scalars.

    ``point_data`` maps field names to arrays over mesh vertices.
    """
    if mesh.dimension != 2:
        raise ValueError("VTK writer expects a 2D mesh")
    nv = mesh.n_vertices
    ne = mesh.n_elements
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title + "\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {nv} double\n")
        for v in mesh.vertices:
            fh.write(f"{_fmt(v[0])} {_fmt(v[1])} 0.0\n")
        fh.write(f"\nCELLS {ne} {4 * ne}\n")
        for el in mesh.elements:
            fh.write(f"3 {el[0]} {el[1]} {el[2]}\n")
        fh.write(f"\nCELL_TYPES {ne}\n")
        for _ in range(ne):
            fh.write("5\n")
        fh.write(f"\nPOINT_DATA {nv}\n")
        for name, arr in point_data.items():
            fh.write(f"SCALARS {name} double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            for x in np.asarray(arr).ravel():
                fh.write(_fmt(x) + "\n")


def vertex_values(disc, state: np.ndarray) -> np.ndarray:
    """Solution values at mesh vertices, shape (nv, ncomp).

    Vertex DoFs come first in the global numbering, and both basis families
    interpolate values at vertices (corner coefficients are corner values).
    """
    nodal = disc.value_op @ state.reshape(disc.dofmap.n_dofs, disc.ncomp)
    return nodal[:disc.mesh.n_vertices]
