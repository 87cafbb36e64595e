import numpy as np
import pytest

from oseen_vvp.mesh import (BoundaryTag, UntaggedFacet, euler_characteristic, generate_structured,
                            mesh_size, read_mesh, tag_boundary, write_mesh)


def test_structured_counts():
    m = generate_structured(2, 2)
    assert (m.n_vertices, m.n_cells, m.n_facets) == (9, 8, 16)
    assert np.isclose(mesh_size(m), np.sqrt(2) / 2)
    assert euler_characteristic(m) == 1


@pytest.mark.parametrize("diag", ["right", "left"])
def test_cells_counter_clockwise_and_cover_domain(diag):
    m = generate_structured(5, 3, rect=((0, 0), (2, 1)), diagonal=diag)
    assert np.all(m.detJ > 0)
    assert np.isclose(m.cell_areas.sum(), 2.0)


def test_facet_normals_unit_and_outward_on_boundary():
    m = generate_structured(4, 4)
    n = m.facet_normals
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0)
    b = m.boundary_facets()
    c = m.cell_coords[m.facet_cells[b, 0]].mean(1)
    assert np.all(((m.facet_midpoints[b] - c) * n[b]).sum(1) > 0)


def test_default_tags_all_gamma():
    m = generate_structured(3, 3)
    assert np.all(m.facet_tags[m.boundary_facets()] == BoundaryTag.GAMMA)


def test_tag_boundary_sigma_and_gamma():
    m = tag_boundary(generate_structured(4, 4), gamma_pred=lambda x, y: x < 1 - 1e-9,
                     sigma_pred=lambda x, y: x > 1 - 1e-9)
    assert len(m.boundary_facets(BoundaryTag.SIGMA)) == 4
    assert len(m.boundary_facets(BoundaryTag.GAMMA)) == 12


def test_tag_boundary_untagged_raises():
    with pytest.raises(UntaggedFacet):
        tag_boundary(generate_structured(2, 2), gamma_pred=lambda x, y: y < 1e-9)


def test_periodic_merge_removes_boundary_and_pairs_facets():
    m = tag_boundary(generate_structured(4, 4), gamma_pred=lambda x, y: (y < 1e-9) | (y > 1 - 1e-9),
                     periodic=(1.0, 0.0))
    assert len(m.periodic_pairs) == 4
    assert len(m.boundary_facets()) == 8
    # periodic facets count as interior with a unit shift
    shifted = np.abs(m.facet_shift[:, 0]) > 0.5
    assert shifted.sum() == 4


def test_write_read_roundtrip(tmp_path):
    m = tag_boundary(generate_structured(3, 2), gamma_pred=lambda x, y: y < 1 - 1e-9,
                     sigma_pred=lambda x, y: y > 1 - 1e-9)
    path = tmp_path / "m.txt"
    write_mesh(m, path)
    r = read_mesh(path)
    assert np.allclose(r.vertices, m.vertices)
    assert np.array_equal(r.cells, m.cells)
    assert len(r.boundary_facets(BoundaryTag.SIGMA)) == 3


def test_locate_and_masked_mesh():
    m = generate_structured(4, 4, mask=lambda x, y: ~((x > 0.5) & (y > 0.5)))
    assert np.isclose(m.cell_areas.sum(), 0.75)
    cells, ref = m.locate(np.array([[0.1, 0.1], [0.9, 0.9]]))
    assert cells[0] >= 0 and cells[1] < 0
    assert np.allclose(m.map_points(ref[:1, None, :], cells[:1])[0, 0], [0.1, 0.1])
