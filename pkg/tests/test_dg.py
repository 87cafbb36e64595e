import numpy as np
import pytest

from oseen_vvp.checks import dof_count, flux_energy, ipp_equivalence
from oseen_vvp.dg import (InvalidStabilisation, assemble_dg_system, assemble_e, assemble_j, dg_spaces,
                          facet_groups, stabilisation)
from oseen_vvp.mesh import generate_structured, tag_boundary
from oseen_vvp.mixed import OseenParams


def test_facet_groups_partition():
    m = tag_boundary(generate_structured(3, 3), gamma_pred=lambda x, y: y < 1 - 1e-9,
                     sigma_pred=lambda x, y: y > 1 - 1e-9)
    g = facet_groups(m)
    total = sum(len(v) for v in g.values())
    assert total == m.n_facets
    assert len(g["sigma"]) == 3


@pytest.mark.parametrize("k", [0, 1, 2])
def test_ipp_forms_agree(k):
    r = ipp_equivalence(n=3, k=k)
    assert r.passed, r.line()


def test_ipp_forms_agree_with_sigma_and_periodic():
    from oseen_vvp.dg import assemble_b1_dg, assemble_b2_dg
    m = tag_boundary(generate_structured(4, 4), gamma_pred=lambda x, y: y < 1e-9,
                     sigma_pred=lambda x, y: y > 1 - 1e-9, periodic=(1.0, 0.0))
    H, Z, Q = dg_spaces(m, 1)
    assert abs(assemble_b1_dg(H, Z, 0.3, "primal") - assemble_b1_dg(H, Z, 0.3, "ipp")).max() < 1e-12
    assert abs(assemble_b2_dg(H, Q, "primal") - assemble_b2_dg(H, Q, "ipp")).max() < 1e-12


def test_dof_count_65():
    assert dof_count().passed


@pytest.mark.parametrize("k", [0, 1])
def test_energy_identity(k):
    r = flux_energy(n=3, k=k)
    assert r.passed, r.line()


def test_stabilisation_forms_are_psd():
    m = generate_structured(3, 3)
    H, _, Q = dg_spaces(m, 1)
    p = OseenParams(10.0, 0.1)
    for M in (assemble_j(H, p), assemble_e(Q, p)):
        assert abs(M - M.T).max() < 1e-13
        assert np.linalg.eigvalsh(M.toarray()).min() > -1e-12


def test_stabilisation_scaling():
    m = generate_structured(2, 2)
    f = m.interior_facets
    inv = stabilisation(m, f, 2.0, True, "inv")
    lin = stabilisation(m, f, 2.0, True, "lin")
    assert np.all(inv > 0) and np.all(lin > 0)
    assert np.all(inv > lin)  # h < 1


@pytest.mark.parametrize("bad", [dict(c11=-1.0), dict(a11=0.0), dict(d11=-0.5)])
def test_invalid_stabilisation(bad):
    m = generate_structured(2, 2)
    with pytest.raises(InvalidStabilisation):
        assemble_dg_system(OseenParams(1.0, 1.0, **bad), dg_spaces(m, 0), zero_mean=True)


def test_flux_check_fails_for_negative_constant():
    assert not flux_energy(n=2, k=0, c11=-1.0).passed
