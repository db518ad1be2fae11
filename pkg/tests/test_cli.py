import pytest

from cgsat.cli import RunConfig, main
from cgsat.mesh import load_mesh


def test_config_roundtrip():
    cfg = RunConfig(problem="rotation2d", mesh_n=13, order=3,
                    basis="bernstein", volume_quad=6, edge_quad=5,
                    split_alpha=0.5, sat_scale=1.25, scheme="SSPRK54",
                    cfl=0.2, t_end=2.0, steps=None, amplitude_limit=100.0,
                    init="project", dt_order_scaling=False,
                    skip_sbp_guard=True, outdir="results", seed=42)
    text = cfg.to_text()
    back = RunConfig.from_text(text)
    assert back == cfg
    assert RunConfig.from_text(back.to_text()) == back


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        RunConfig.from_text("problem = advection2d\nwibble = 3\n")


def test_mesh_gen_roundtrip(tmp_path):
    out = tmp_path / "mesh.txt"
    assert main(["mesh-gen", "--recipe", "unit_square(3)",
                 "--out", str(out)]) == 0
    mesh = load_mesh(out)
    assert mesh.n_elements == 18


def test_solve_writes_artifacts(tmp_path):
    outdir = tmp_path / "run"
    rc = main(["solve", "--problem", "advection2d", "--mesh-n", "5",
               "--order", "2", "--steps", "10", "--outdir", str(outdir)])
    assert rc == 0
    assert (outdir / "solution_final.vtk").exists()
    assert (outdir / "energy.csv").exists()
    summary = (outdir / "summary.txt").read_text()
    assert "status = completed" in summary
    vtk = (outdir / "solution_final.vtk").read_text().splitlines()
    assert vtk[0] == "# vtk DataFile Version 3.0"
    assert "DATASET UNSTRUCTURED_GRID" in vtk
    energy = (outdir / "energy.csv").read_text().splitlines()
    assert energy[0] == "step,t,energy,umax,umin"
    assert len(energy) == 12      # header + initial + 10 steps


def test_solve_1d_csv(tmp_path):
    outdir = tmp_path / "wv"
    rc = main(["solve", "--problem", "wave1d", "--cells", "20",
               "--order", "2", "--t-end", "0.5", "--outdir", str(outdir)])
    assert rc == 0
    lines = (outdir / "solution_final.csv").read_text().splitlines()
    assert lines[0] == "x,u1,u2"
    xs = [float(l.split(",")[0]) for l in lines[1:]]
    assert xs == sorted(xs)


def test_solve_determinism(tmp_path):
    args = ["solve", "--problem", "advection2d", "--mesh-n", "4",
            "--order", "1", "--steps", "5"]
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--outdir", str(out1)]) == 0
    assert main(args + ["--outdir", str(out2)]) == 0
    for name in ("energy.csv", "solution_final.vtk", "summary.txt"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_spectrum_command(tmp_path):
    outdir = tmp_path / "spec"
    rc = main(["spectrum", "--problem", "advection2d", "--mesh-n", "4",
               "--order", "1", "--outdir", str(outdir)])
    assert rc == 0
    lines = (outdir / "spectrum.csv").read_text().splitlines()
    assert lines[1] == "# verdict = stable"
    # paired +-lambda columns without the penalty
    rows = [l.split(",") for l in lines[3:]]
    for r in rows:
        assert abs(float(r[0]) + float(r[1])) < 1e-10


def test_spectrum_mismatch_unstable(tmp_path):
    outdir = tmp_path / "spec2"
    rc = main(["spectrum", "--problem", "advection2d", "--mesh-n", "4",
               "--order", "3", "--edge-quad", "5", "--outdir", str(outdir)])
    assert rc == 2
    assert "# verdict = unstable" in (outdir / "spectrum.csv").read_text()


def test_config_file_plus_override(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text(RunConfig(problem="advection2d", mesh_n=4, order=1,
                                 steps=3).to_text())
    outdir = tmp_path / "out"
    rc = main(["solve", "--config", str(cfgfile), "--steps", "4",
               "--outdir", str(outdir)])
    assert rc == 0
    assert "steps = 4" in (outdir / "summary.txt").read_text()


def test_convergence_command(tmp_path):
    outdir = tmp_path / "conv"
    rc = main(["convergence", "--problem", "sine_advection2d", "--order", "1",
               "--mesh-n", "4", "--levels", "3", "--t-end", "0.1",
               "--outdir", str(outdir)])
    assert rc == 0
    text = (outdir / "convergence.csv").read_text()
    assert text.startswith("h,L1,L2_M")
    assert "# slopes:" in text


def test_dump_operators(tmp_path):
    outdir = tmp_path / "ops"
    rc = main(["dump-operators", "--problem", "advection2d", "--mesh-n", "2",
               "--order", "1", "--outdir", str(outdir)])
    assert rc == 0
    for name in ("M.mtx", "Q.mtx", "Bq.mtx", "Pi.mtx"):
        head = (outdir / name).read_text().splitlines()[0]
        assert head.startswith("%%MatrixMarket matrix coordinate")


def test_unknown_problem_fails_cleanly(tmp_path):
    rc = main(["solve", "--problem", "nonexistent",
               "--outdir", str(tmp_path / "x")])
    assert rc == 1
