import numpy as np

from oseen_vvp.driver import solve_steady
from oseen_vvp.driver import test1_scenario as make_test1_scenario
from oseen_vvp.mesh import generate_structured
from oseen_vvp.output import write_solution_vtk


def test_vtk_structure(tmp_path):
    sc = make_test1_scenario()
    sol = solve_steady(sc, generate_structured(2, 2), 0, "dg")
    path = tmp_path / "s.vtk"
    write_solution_vtk(path, sol)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# vtk DataFile")
    assert "POINTS 24 double" in lines
    assert "CELLS 8 32" in lines
    assert "POINT_DATA 24" in lines
    i = lines.index("VECTORS velocity double")
    vel = np.array([[float(v) for v in ln.split()] for ln in lines[i + 1:i + 25]])
    assert vel.shape == (24, 3) and np.all(vel[:, 2] == 0)
    assert "SCALARS pressure double 1" in lines
