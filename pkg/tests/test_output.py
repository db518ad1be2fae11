import numpy as np

from cgsat.output import (vertex_values, write_energy_csv,
                          write_solution_csv_1d, write_vtk)
from cgsat.problems import advection_2d, discretize, solve_problem, wave_1d


def test_energy_csv(tmp_path):
    prob = wave_1d(n=10, order=1)
    disc, traj = solve_problem(prob, t_end=0.2)
    path = tmp_path / "energy.csv"
    write_energy_csv(path, traj)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,t,energy,umax,umin"
    assert len(lines) == traj.steps + 2
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[1]) == 0.0


def test_solution_csv_sorted(tmp_path):
    prob = wave_1d(n=8, order=2, spacing="random", seed=4)
    disc, traj = solve_problem(prob, t_end=0.1)
    path = tmp_path / "sol.csv"
    vals = disc.value_op @ traj.state.reshape(disc.dofmap.n_dofs, 2)
    write_solution_csv_1d(path, disc.dofmap, vals)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,u1,u2"
    xs = [float(l.split(",")[0]) for l in lines[1:]]
    assert xs == sorted(xs)
    assert len(xs) == disc.dofmap.n_dofs


def test_vtk_structure(tmp_path):
    prob = advection_2d(n=3, order=2)
    disc = discretize(prob)
    vdata = vertex_values(disc, disc.u0)
    path = tmp_path / "out.vtk"
    write_vtk(path, disc.mesh, {"u": vdata[:, 0]})
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert "ASCII" in lines[:4]
    ip = lines.index(f"POINTS {disc.mesh.n_vertices} double")
    assert ip > 0
    ic = lines.index(f"CELLS {disc.mesh.n_elements} {4 * disc.mesh.n_elements}")
    cell0 = lines[ic + 1].split()
    assert cell0[0] == "3"
    it = lines.index(f"CELL_TYPES {disc.mesh.n_elements}")
    assert lines[it + 1] == "5"
    ipd = lines.index(f"POINT_DATA {disc.mesh.n_vertices}")
    assert lines[ipd + 1] == "SCALARS u double 1"


def test_vertex_values_match_initial_data(tmp_path):
    # corner coefficients are point values for both basis families
    for kind in ("lagrange", "bernstein"):
        prob = advection_2d(n=4, order=3, basis=kind)
        disc = discretize(prob)
        vv = vertex_values(disc, disc.u0)[:, 0]
        expected = prob.initial(disc.mesh.vertices)
        assert np.abs(vv - expected).max() < 1e-12
