import numpy as np
import sympy as sym

from oseen_vvp.manufactured import ManufacturedSolution, X, Y
from oseen_vvp.manufactured import test1_solution as make_test1

PTS = np.random.default_rng(0).uniform(0.05, 0.95, (20, 2))


def test_test1_fields_divergence_free_and_vorticity_scaled():
    ex = make_test1(nu=0.1, sigma=10.0)
    x, y = PTS.T
    assert np.allclose(ex.divergence(x, y), 0, atol=1e-12)
    eps = 1e-6
    du2 = (ex.velocity(x + eps, y)[1] - ex.velocity(x - eps, y)[1]) / (2 * eps)
    du1 = (ex.velocity(x, y + eps)[0] - ex.velocity(x, y - eps)[0]) / (2 * eps)
    assert np.allclose(ex.vorticity(x, y), np.sqrt(0.1) * (du2 - du1), atol=1e-6)


def test_forcing_balances_momentum():
    u = (sym.sin(X) * sym.cos(Y), -sym.cos(X) * sym.sin(Y))
    ex = ManufacturedSolution(u, X * Y, nu=0.5, sigma=2.0, beta=(1 + 0 * X, 0 * X))
    x, y = PTS.T
    w = ex.vorticity(x, y)
    cw = np.stack(ex.curl_vorticity(x, y))
    u1, u2 = ex.velocity(x, y)
    # sigma u + sqrt(nu) curl w + nu^-1/2 w (-b2, b1) + grad p
    f1 = 2.0 * u1 + np.sqrt(0.5) * cw[0] + 0.0 + y
    f2 = 2.0 * u2 + np.sqrt(0.5) * cw[1] + w / np.sqrt(0.5) + x
    assert np.allclose(np.stack(ex.forcing(x, y)), np.stack([f1, f2]))


def test_boundary_traces():
    ex = make_test1()
    x, y = np.array([0.3]), np.array([0.0])
    u1, u2 = ex.velocity(x, y)
    assert np.allclose(ex.normal_velocity(x, y, 0.0, -1.0), -u2)
    # u x n = u1 n2 - u2 n1
    assert np.allclose(ex.tangential_velocity(x, y, 0.0, -1.0), -u1)
