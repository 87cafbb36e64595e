import numpy as np
import pytest
import scipy.sparse as sp

from oseen_vvp.checks import coercivity
from oseen_vvp.dg import dg_spaces
from oseen_vvp.mesh import generate_structured, tag_boundary
from oseen_vvp.mixed import (InconsistentSpaces, NoPressureGauge, OseenParams, SolvabilityWarning,
                             apply_constraints, assemble_a, assemble_b1, assemble_b2, assemble_c,
                             assemble_d, assemble_mixed_system, mean_row, mixed_spaces,
                             warn_solvability)


@pytest.fixture(scope="module")
def spaces():
    return mixed_spaces(generate_structured(3, 3), 1)


def test_params_validation():
    with pytest.raises(ValueError):
        OseenParams(sigma=0.0, nu=1.0)
    with pytest.raises(ValueError):
        OseenParams(sigma=1.0, nu=-1.0)
    p = OseenParams(sigma=3.0, nu=0.2)
    assert p.stab == (3.0, 3.0, 0.2)


def test_mass_blocks_symmetric_positive(spaces):
    H, Z, _ = spaces
    for M in (assemble_a(H, 2.0), assemble_d(Z)):
        assert abs(M - M.T).max() < 1e-14
        assert np.linalg.eigvalsh(M.toarray()).min() > 0


def test_b2_constant_pressure_sees_only_boundary_flux():
    # -int 1 div v is a boundary flux, so interior RT DoFs do not couple to q = 1
    H, _, Q = mixed_spaces(generate_structured(3, 3), 0)
    B2 = assemble_b2(H, Q)
    assert np.isclose(mean_row(Q).sum(), 1.0)
    interior = np.setdiff1d(np.arange(H.n_dofs), H.boundary_dofs(None))
    assert np.allclose((B2 @ np.ones(Q.n_dofs))[interior], 0, atol=1e-14)


def test_b1_is_curl_coupling(spaces):
    # sqrt(nu) (curl theta, v) with theta linear gives a constant curl
    H, Z, _ = spaces
    B1 = assemble_b1(H, Z, 0.25)
    assert B1.shape == (H.n_dofs, Z.n_dofs)
    ones = np.ones(Z.n_dofs)
    assert np.allclose(B1 @ ones, 0, atol=1e-13)


def test_convection_vanishes_for_zero_beta(spaces):
    H, Z, _ = spaces
    assert abs(assemble_c(Z, H, 0.1, (0.0, 0.0))).max() == 0


def test_apply_constraints_keeps_symmetry():
    A = sp.csr_matrix(np.array([[4.0, 1, 0], [1, 3, 1], [0, 1, 2]]))
    b = np.array([1.0, 2.0, 3.0])
    K, r = apply_constraints(A, b, np.array([1]), np.array([5.0]))
    x = np.linalg.solve(K.toarray(), r)
    assert abs(K - K.T).max() == 0
    assert np.isclose(x[1], 5.0)
    assert np.allclose((A @ x)[[0, 2]], b[[0, 2]])


def test_gauge_required_without_sigma(spaces):
    with pytest.raises(NoPressureGauge):
        assemble_mixed_system(OseenParams(1.0, 1.0), spaces, zero_mean=False)


def test_sigma_removes_need_for_gauge():
    m = tag_boundary(generate_structured(2, 2), gamma_pred=lambda x, y: x < 1 - 1e-9,
                     sigma_pred=lambda x, y: x > 1 - 1e-9)
    s = assemble_mixed_system(OseenParams(1.0, 1.0), mixed_spaces(m, 0))
    assert not s.has_multiplier and "lambda" not in s.offsets


def test_inconsistent_spaces():
    m = generate_structured(2, 2)
    with pytest.raises(InconsistentSpaces):
        assemble_mixed_system(OseenParams(1.0, 1.0), dg_spaces(m, 0), zero_mean=True)


def test_system_layout_and_export(spaces, tmp_path):
    H, Z, Q = spaces
    s = assemble_mixed_system(OseenParams(1.0, 1.0), spaces, zero_mean=True)
    assert s.size == H.n_dofs + Z.n_dofs + Q.n_dofs + 1
    parts = s.split(np.arange(s.size))
    assert len(parts["w"]) == Z.n_dofs and len(parts["lambda"]) == 1
    path = tmp_path / "k.coo"
    s.export_coo(path)
    assert open(path).readline().split()[:2] == [str(s.size)] * 2




def test_solvability_warning():
    m = generate_structured(2, 2)
    with pytest.warns(SolvabilityWarning):
        warn_solvability(OseenParams(1.0, 1.0, beta=(10.0, 0.0)), m)


@pytest.mark.parametrize("k", [0, 1])
def test_coercivity_bound(k):
    r = coercivity(n=4, pairs=40, k=k)
    assert r.passed, r.line()
