"""Scenarios, steady solves and the backward-Euler time loop."""
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional
import warnings

import numpy as np
import scipy.sparse as sp

from .dg import assemble_dg_system, dg_spaces
from .diagnostics import enstrophy_palinstrophy
from .fespace import FEFunction, SpaceKind, divergence_projection, interpolate_rt, project_l2, vector_values
from .linalg import BorderedFactorization, block_permutation, is_null_vector, lu_factor, nested_dissection
from .manufactured import test1_solution
from .mesh import BoundaryTag, Mesh, generate_structured, tag_boundary
from .mixed import OseenParams, SolvabilityWarning, assemble_mixed_system, mixed_spaces

SCHEMES = ("mixed", "dg")


class NumericalFailure(RuntimeError):
    pass


@dataclass
class SolutionTriple:
    u: object
    w: object
    p: object
    scheme: str
    params: OseenParams
    system: object
    report: object
    multiplier: Optional[float] = None

    @property
    def mesh(self):
        return self.u.space.mesh


@dataclass
class Scenario:
    """A named problem: mesh recipe, parameters and optional exact solution."""
    name: str
    make_mesh: Callable  # n -> tagged Mesh
    params: OseenParams
    exact: object = None
    zero_mean: bool = True
    initial_velocity: Optional[Callable] = None
    rect: tuple = ((0.0, 0.0), (1.0, 1.0))


class InitialCondition(Enum):
    FROM_FIELD = "field"
    STOKES = "stokes"


@dataclass
class TimeLoopConfig:
    dt: float
    n_steps: int
    scheme: str = "mixed"
    k: int = 0
    initial_condition: InitialCondition = InitialCondition.FROM_FIELD
    update_beta: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 0:
            raise ValueError("n_steps must be non-negative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")


# ---------------------------------------------------------------- scenarios
def _on(v, t=1e-9):
    return lambda z: np.abs(z - v) < t


def test1_scenario(nu=0.1, sigma=10.0, **stab):
    """Manufactured smooth solution on the unit square, Gamma = whole boundary."""
    ex = test1_solution(nu, sigma)
    params = OseenParams(sigma=sigma, nu=nu, beta=ex.velocity, f=ex.forcing,
                         gamma_normal=ex.normal_velocity, gamma_vorticity=ex.vorticity, **stab)

    def make_mesh(n):
        return generate_structured(n, n)

    return Scenario("test1", make_mesh, params, exact=ex)


def sigma_scenario(nu=0.1, sigma=10.0, **stab):
    """Test-1 fields with Sigma on the right and top edges (exercises Sigma data)."""
    ex = test1_solution(nu, sigma)
    on_sigma = lambda x, y: (x > 1 - 1e-9) | (y > 1 - 1e-9)
    params = OseenParams(sigma=sigma, nu=nu, beta=ex.velocity, f=ex.forcing, p_sigma=ex.pressure,
                         u_sigma=_tangential(ex), gamma_normal=ex.normal_velocity,
                         gamma_vorticity=ex.vorticity, **stab)

    def make_mesh(n):
        return tag_boundary(generate_structured(n, n), gamma_pred=lambda x, y: ~on_sigma(x, y),
                            sigma_pred=on_sigma)

    return Scenario("sigma", make_mesh, params, exact=ex, zero_mean=False)


def _tangential(ex):
    # u x n on the right (n = (1, 0)) and top (n = (0, 1)) edges
    def f(x, y):
        u1, u2 = ex.velocity(x, y)
        return np.where(x > 1 - 1e-9, -u2, u1)
    return f


CAVITY_NU = 0.001
CAVITY_SIGMA = 10.0


def cavity_inflow(x, y, nx, ny):
    """u.n on the open-cavity boundary: parabolic inlet (bottom) and outlet (right)."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    out = np.zeros(x.shape)
    inlet = (np.abs(y + 0.1) < 1e-9) & (x > 0.25 - 1e-9) & (x < 0.45 + 1e-9)
    outlet = (np.abs(x - 1.3) < 1e-9) & (y > 0.7 - 1e-9) & (y < 0.9 + 1e-9)
    out = np.where(inlet, -75.0 * (x - 0.25) * (0.45 - x), out)
    out = np.where(outlet, 75.0 * (y - 0.7) * (0.9 - y), out)
    return out


def cavity_vorticity(nu):
    rn = np.sqrt(nu)

    def f(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        inlet = (np.abs(y + 0.1) < 1e-9) & (x > 0.25 - 1e-9) & (x < 0.45 + 1e-9)
        outlet = (np.abs(x - 1.3) < 1e-9) & (y > 0.7 - 1e-9) & (y < 0.9 + 1e-9)
        out = np.where(inlet, 75.0 * rn * (0.7 - 2.0 * x), 0.0)
        return np.where(outlet, -75.0 * rn * (1.6 - 2.0 * y), out)

    return f


def cavity_initial_velocity(x, y):
    a = np.pi / 1.3
    b = np.pi / 1.1
    s = np.sin(b * (y + 0.1))
    u1 = np.sin(a * x) ** 2 * s**2 * np.cos(b * (y + 0.1))
    u2 = -np.sin(2 * a * x) * s**3 / 3.0
    return u1, u2


def cavity_mesh(n=20):
    """Open cavity: (0, 1.2) x (0, 1) with an inlet below and an outlet on the right.

    ``n`` cells per unit length; n must be a multiple of 20 so that the port
    edges (x = 0.25, 0.45) fall on grid lines.
    """
    if n % 20:
        raise ValueError("open-cavity resolution must be a multiple of 20")
    h = 1.0 / n
    nx, ny = int(round(1.3 / h)), int(round(1.1 / h))

    def mask(xc, yc):
        box = (xc < 1.2) & (yc > 0.0)
        inlet = (xc > 0.25) & (xc < 0.45) & (yc < 0.0)
        outlet = (xc > 1.2) & (yc > 0.7) & (yc < 0.9)
        return box | inlet | outlet

    m = generate_structured(nx, ny, rect=((0.0, -0.1), (1.3, 1.0)), mask=mask)
    return m


def cavity_scenario(nu=CAVITY_NU, sigma=CAVITY_SIGMA, **stab):
    params = OseenParams(sigma=sigma, nu=nu, beta=cavity_initial_velocity, f=(0.0, 0.0),
                         gamma_normal=cavity_inflow, gamma_vorticity=cavity_vorticity(nu), **stab)
    return Scenario("open-cavity", cavity_mesh, params, initial_velocity=cavity_initial_velocity,
                    rect=((0.0, -0.1), (1.3, 1.0)))


KH = dict(cn=1e-3, u_inf=1.0, wa=8 * np.pi, wb=20 * np.pi, delta0=1.0 / 28.0, Re=1e4)


def kh_initial_velocity(x, y, cn=KH["cn"], u_inf=KH["u_inf"], wa=KH["wa"], wb=KH["wb"],
                        delta0=KH["delta0"]):
    """Perturbed tanh shear layer on the unit square."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    g = np.exp(-((y - 0.5) ** 2) / delta0**2)
    u1 = u_inf * np.tanh((2 * y - 1) / delta0) \
        - cn * u_inf * (np.cos(wa * x) + np.cos(wb * x)) * (2 * y - 1) / delta0**2 * g
    u2 = cn * u_inf * g * (wa * np.sin(wa * x) + wb * np.sin(wb * x))
    return u1, u2


def kh_initial_vorticity(x, y, cn=KH["cn"], u_inf=KH["u_inf"], wa=KH["wa"], wb=KH["wb"],
                         delta0=KH["delta0"]):
    """Analytic curl (d u2/dx - d u1/dy) of the initial velocity, unscaled."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    d = delta0
    s = (y - 0.5) / d
    g = np.exp(-s**2)
    du2dx = cn * u_inf * g * (wa**2 * np.cos(wa * x) + wb**2 * np.cos(wb * x))
    cosx = np.cos(wa * x) + np.cos(wb * x)
    z = (2 * y - 1) / d**2
    du1dy = u_inf * (2.0 / d) / np.cosh((2 * y - 1) / d) ** 2 \
        - cn * u_inf * cosx * (2.0 / d**2 * g + z * g * (-2.0 * (y - 0.5) / d**2))
    return du2dx - du1dy


def kh_params():
    nu = KH["delta0"] * KH["u_inf"] / KH["Re"]
    dt = KH["delta0"] / KH["u_inf"] / 20.0
    return nu, dt


def kh_mesh(n=64):
    m = generate_structured(n, n)
    wall = lambda x, y: (np.abs(y) < 1e-9) | (np.abs(y - 1) < 1e-9)
    return tag_boundary(m, gamma_pred=wall, periodic=(1.0, 0.0))


def kh_scenario(**stab):
    nu, dt = kh_params()
    params = OseenParams(sigma=1.0 / dt, nu=nu, beta=kh_initial_velocity, **stab)
    return Scenario("kh", kh_mesh, params, initial_velocity=kh_initial_velocity)


SCENARIOS = {"test1": test1_scenario, "sigma": sigma_scenario, "open-cavity": cavity_scenario,
             "kh": kh_scenario}


def get_scenario(name, **kw):
    try:
        return SCENARIOS[name](**kw)
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None


# ---------------------------------------------------------------- solves
def build_spaces(mesh: Mesh, k: int, scheme: str):
    if scheme == "mixed":
        return mixed_spaces(mesh, k)
    if scheme == "dg":
        return dg_spaces(mesh, k)
    raise ValueError(f"unknown scheme {scheme!r}")


def assemble(params, spaces, scheme, zero_mean):
    if scheme == "mixed":
        return assemble_mixed_system(params, spaces, zero_mean)
    return assemble_dg_system(params, spaces, zero_mean)


def _gauge_needed(mesh, zero_mean):
    return zero_mean or len(mesh.boundary_facets(BoundaryTag.SIGMA)) == 0


def solve_params(params, mesh, k, scheme, zero_mean=True, spaces=None, check=True):
    """Assemble and solve one Oseen problem; returns a SolutionTriple."""
    if spaces is None:
        spaces = build_spaces(mesh, k, scheme)
    if check:
        ind = params.solvability_indicator(mesh)
        if ind >= 1.0:
            warnings.warn(f"2|beta|^2/(nu sigma) = {ind:.3g} >= 1; well-posedness is not "
                          "guaranteed", SolvabilityWarning, stacklevel=2)
    system = assemble(params, spaces, scheme, _gauge_needed(mesh, zero_mean))
    x, rep = factor_system(system).solve(system.rhs)
    if not rep.success:
        raise NumericalFailure(f"linear solve failed (relative residual {rep.residual:.3e})")
    parts = system.split(x)
    H, Z, Q = spaces
    lam = float(parts["lambda"][0]) if "lambda" in parts else None
    return SolutionTriple(H.function(parts["u"]), Z.function(parts["w"]), Q.function(parts["p"]),
                          scheme, params, system, rep, lam)


def cell_adjacency(mesh: Mesh):
    fc = mesh.facet_cells
    inner = fc[:, 1] >= 0
    a = sp.coo_matrix((np.ones(inner.sum()), (fc[inner, 0], fc[inner, 1])),
                      shape=(mesh.n_cells, mesh.n_cells))
    return (a + a.T).tocsr()


def dg_ordering(system):
    """Nested-dissection DoF ordering for a DG system (all DoFs are cell-local)."""
    H, Z, Q = system.spaces
    m = H.mesh
    blocks = np.concatenate([H.cell_dofs + system.offsets["u"][0], Z.cell_dofs + system.offsets["w"][0],
                             Q.cell_dofs + system.offsets["p"][0]], axis=1)
    order = nested_dissection(cell_adjacency(m), m.cell_coords.mean(axis=1))
    return block_permutation(order, blocks)


def factor_system(system):
    """Factorisation suited to the scheme; the mean multiplier is handled by bordering."""
    dg = system.scheme == "dg"
    ordering = "symmetric" if dg else "colamd"
    perm = dg_ordering(system) if dg else None
    K = system.matrix
    if system.has_multiplier:
        z = np.zeros(K.shape[0] - 1)
        a, b = system.offsets["p"]
        z[a:b] = 1.0
        if is_null_vector(K, z):
            return BorderedFactorization(K, z, a, ordering, perm)
        if perm is not None:
            perm = np.append(perm, K.shape[0] - 1)
    return lu_factor(K, ordering, perm)


def solve_steady(scenario: Scenario, mesh: Mesh, k: int, scheme: str = "mixed") -> SolutionTriple:
    return solve_params(scenario.params, mesh, k, scheme, scenario.zero_mean)


# ------------------------------------------------------------ time stepping
def initial_fields(scenario, spaces, cfg: TimeLoopConfig, mesh):
    """Discrete initial velocity and vorticity."""
    H, Z, Q = spaces
    params = scenario.params
    if cfg.initial_condition is InitialCondition.STOKES:
        # sigma and beta set to zero: keep a vanishing reaction for solvability
        stokes = replace(params, sigma=1e-12, beta=(0.0, 0.0), f=params.f)
        s = solve_params(stokes, mesh, cfg.k, cfg.scheme, scenario.zero_mean, spaces, check=False)
        return s.u, s.w
    u0 = scenario.initial_velocity
    if u0 is None:
        raise ValueError(f"scenario {scenario.name!r} has no initial velocity")
    if H.kind is SpaceKind.RT:
        uh = H.function(interpolate_rt(H, u0))
    else:
        uh = H.function(project_l2(H, u0))
    w0 = _initial_vorticity(scenario, u0, params.nu)
    wh = Z.function(project_l2(Z, w0, quad_extra=8))
    return uh, wh


def _initial_vorticity(scenario, u0, nu):
    rn = np.sqrt(nu)
    if scenario.name == "kh":
        return lambda x, y: rn * kh_initial_vorticity(x, y)
    eps = 1e-6

    def w(x, y):
        # centred differences are adequate for smooth initial data
        dv = (u0(x + eps, y)[1] - u0(x - eps, y)[1]) / (2 * eps)
        du = (u0(x, y + eps)[0] - u0(x, y - eps)[0]) / (2 * eps)
        return rn * (dv - du)

    return w


def step_diagnostics(t, u, w, nu, scheme, p_space):
    e, p, ep, pp = enstrophy_palinstrophy(w, nu)
    row = {"t": t, "E": e, "P": p, "E_phys": ep, "P_phys": pp}
    if scheme == "mixed":
        row["div_linf"] = float(np.abs(divergence_projection(u, p_space)).max())
    return row


def run_transient(cfg: TimeLoopConfig, scenario: Scenario, mesh: Mesh = None, callback=None):
    """Backward Euler with one Picard update per step.

    At each step sigma = 1/dt, beta is the previous velocity (if
    ``update_beta``) and the forcing is sigma times the previous velocity.
    Returns the list of per-step diagnostics and the final SolutionTriple.
    """
    mesh = scenario.make_mesh() if mesh is None else mesh
    spaces = build_spaces(mesh, cfg.k, cfg.scheme)
    H, Z, Q = spaces
    sigma = 1.0 / cfg.dt
    base = replace(scenario.params, sigma=sigma)
    u, w = initial_fields(scenario, spaces, cfg, mesh)
    rows = [step_diagnostics(0.0, u, w, base.nu, cfg.scheme, Q)]
    beta0 = base.beta
    sol = None
    warned = False
    for n in range(1, cfg.n_steps + 1):
        beta = u if cfg.update_beta else beta0
        f = _sum_forcing(scenario.params.f, u, sigma)
        params = replace(base, beta=beta, f=f)
        if not warned and params.solvability_indicator(mesh) >= 1.0:
            warnings.warn("2|beta|^2/(nu sigma) >= 1 during time stepping", SolvabilityWarning,
                          stacklevel=2)
            warned = True
        sol = solve_params(params, mesh, cfg.k, cfg.scheme, scenario.zero_mean, spaces, check=False)
        u, w = sol.u, sol.w
        rows.append(step_diagnostics(n * cfg.dt, u, w, base.nu, cfg.scheme, Q))
        if callback is not None:
            callback(n, sol)
    return rows, sol


def _sum_forcing(static, u, sigma):
    """sigma * u_prev, plus the scenario forcing when it is not identically zero."""
    dyn = FEFunction(u.space, sigma * u.coeffs)
    if not callable(static) and not isinstance(static, FEFunction) and not np.any(static):
        return dyn
    return _CombinedField(static, dyn)


class _CombinedField(FEFunction):
    def __init__(self, static, dyn):
        super().__init__(dyn.space, dyn.coeffs)
        self.static = static

    def evaluate(self, ref_pts, cells=None, what="val"):
        m = self.space.mesh
        return super().evaluate(ref_pts, cells, what) + vector_values(self.static, m, ref_pts, cells)
