"""Legacy ASCII VTK output of discrete fields.

Each cell is written with its own three vertices so that discontinuous
fields are represented without averaging.
"""
import numpy as np

_REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
VTK_TRIANGLE = 5


def write_vtk(path, mesh, fields: dict, title="oseen_vvp"):
    """Write ``fields`` (name -> FEFunction, scalar or 2-vector) at cell vertices."""
    nc = mesh.n_cells
    pts = mesh.map_points(_REF_VERTICES).reshape(-1, 2)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {3 * nc} double"]
    lines += [f"{x:.12g} {y:.12g} 0" for x, y in pts]
    lines.append(f"CELLS {nc} {4 * nc}")
    lines += [f"3 {3 * c} {3 * c + 1} {3 * c + 2}" for c in range(nc)]
    lines.append(f"CELL_TYPES {nc}")
    lines += [str(VTK_TRIANGLE)] * nc
    if fields:
        lines.append(f"POINT_DATA {3 * nc}")
    for name, fn in fields.items():
        val = np.asarray(fn.evaluate(_REF_VERTICES))
        if val.ndim == 3:
            val = val.reshape(-1, 2)
            lines.append(f"VECTORS {name} double")
            lines += [f"{a:.12g} {b:.12g} 0" for a, b in val]
        else:
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines += [f"{v:.12g}" for v in val.ravel()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_solution_vtk(path, sol):
    write_vtk(path, sol.mesh, {"velocity": sol.u, "vorticity": sol.w, "pressure": sol.p})
