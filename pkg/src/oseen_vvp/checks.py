"""Invariant checks shared by the ``selftest`` command and the test suite.

Each check returns a :class:`CheckResult`; none of them raise on a failed
invariant, so a driver can report every outcome.
"""
from dataclasses import dataclass

import numpy as np

from .dg import InvalidStabilisation, assemble_b1_dg, assemble_b2_dg, assemble_dg_system, assemble_e, \
    assemble_j, dg_spaces
from .driver import solve_params, test1_scenario
from .fespace import divergence_projection, interpolate_rt, project_l2
from .mesh import generate_structured
from .mixed import OseenParams, assemble_a, assemble_c, assemble_d, mixed_spaces

TOL_COERCIVITY = 1e-10
TOL_IPP = 1e-12
TOL_COMMUTING = 1e-12
TOL_UNIQUENESS = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.value:.3e} (tol {self.tol:.1e}) {self.detail}".rstrip()


def _test1_params(**stab):
    return test1_scenario(**stab).params


def coercivity(n=8, pairs=200, k=0, seed=0, params=None):
    """a(v,v) + d(t,t) + c(t,v) >= sigma/2 |v|^2 + (1 - 2|beta|^2/(nu sigma)) |t|^2.

    Evaluated on ``pairs`` random discrete (v, t) from the mixed spaces.
    The value reported is the worst relative violation (negative = margin).
    """
    params = params or _test1_params()
    m = generate_structured(n, n)
    H, Z, _ = mixed_spaces(m, k)
    A = assemble_a(H, params.sigma)
    M = A / params.sigma
    D = assemble_d(Z)
    C = assemble_c(Z, H, params.nu, params.beta)
    kappa = 1.0 - params.solvability_indicator(m)
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(pairs):
        v = rng.standard_normal(H.n_dofs)
        t = rng.standard_normal(Z.n_dofs) * rng.uniform(0.1, 10.0)
        lhs = v @ (A @ v) + t @ (D @ t) + v @ (C @ t)
        rhs = 0.5 * params.sigma * (v @ (M @ v)) + kappa * (t @ (D @ t))
        worst = max(worst, (rhs - lhs) / max(abs(lhs), 1.0))
    return CheckResult(f"coercivity k={k}", worst <= TOL_COERCIVITY, worst, TOL_COERCIVITY,
                       f"{pairs} pairs on {n}x{n}")


def ipp_equivalence(n=4, k=0, nu=0.1):
    """Primal and integrated-by-parts DG coupling matrices coincide."""
    m = generate_structured(n, n)
    H, Z, Q = dg_spaces(m, k)
    d1 = abs(assemble_b1_dg(H, Z, nu, "primal") - assemble_b1_dg(H, Z, nu, "ipp")).max()
    d2 = abs(assemble_b2_dg(H, Q, "primal") - assemble_b2_dg(H, Q, "ipp")).max()
    val = float(max(d1, d2))
    return CheckResult(f"ipp-equivalence k={k}", val <= TOL_IPP, val, TOL_IPP, f"{n}x{n}")


def random_polynomial_field(rng, degree):
    """Vector field with random coefficients on the monomials of total degree <= ``degree``."""
    exps = [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]
    c = rng.standard_normal((2, len(exps)))

    def v(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        mono = [x**i * y**j for i, j in exps]
        return sum(a * t for a, t in zip(c[0], mono)), sum(a * t for a, t in zip(c[1], mono))

    def div(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        out = np.zeros(np.broadcast(x, y).shape)
        for (i, j), a, b in zip(exps, c[0], c[1]):
            if i:
                out = out + a * i * x ** (i - 1) * y**j
            if j:
                out = out + b * j * x**i * y ** (j - 1)
        return out

    return v, div


def commuting_diagram(k=0, fields=20, n=4, seed=0):
    """div(RT interpolant of v) equals the L2 projection of div v, coefficientwise."""
    m = generate_structured(n, n)
    H, _, Q = mixed_spaces(m, k)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(fields):
        v, div = random_polynomial_field(rng, int(rng.integers(0, k + 2)))
        lhs = divergence_projection(H.function(interpolate_rt(H, v)), Q)
        rhs = project_l2(Q, div)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return CheckResult(f"commuting-diagram k={k}", worst <= TOL_COMMUTING, worst, TOL_COMMUTING,
                       f"{fields} fields")


def uniqueness(scheme="mixed", k=0, n=4):
    """Zero data gives the zero solution."""
    base = _test1_params()
    params = OseenParams(sigma=base.sigma, nu=base.nu, beta=base.beta)
    m = generate_structured(n, n)
    if params.solvability_indicator(m) >= 1:
        return CheckResult(f"uniqueness {scheme} k={k}", False, np.inf, TOL_UNIQUENESS,
                           "beta assumption violated")
    sol = solve_params(params, m, k, scheme, zero_mean=True)
    val = max(_norm(sol.u), _norm(sol.w), _norm(sol.p))
    return CheckResult(f"uniqueness {scheme} k={k}", val < TOL_UNIQUENESS, val, TOL_UNIQUENESS)


def _norm(fn):
    return float(np.sqrt(np.sum(fn.coeffs**2)))


def dof_count(expected=65):
    """DG, k=0, mesh of diameter sqrt(2)/2 (2x2 squares), with the mean multiplier."""
    m = generate_structured(2, 2)
    sysm = assemble_dg_system(_test1_params(), dg_spaces(m, 0), zero_mean=True)
    return CheckResult("dg-dof-count k=0", sysm.size == expected, float(sysm.size), 0.0,
                       f"expected {expected}")


def flux_energy(n=4, k=1, samples=50, seed=0, **stab):
    """With beta = 0 the DG operator gives x^T K x = sigma|u|^2 + |u|_j^2 + |w|^2 + |p|_e^2 >= 0.

    Checks both the nonnegativity of the stabilisation forms and the energy
    identity. Invalid stabilisation constants fail the check.
    """
    name = f"dg-flux-energy k={k}"
    base = _test1_params()
    params = OseenParams(sigma=base.sigma, nu=base.nu, **stab)
    m = generate_structured(n, n)
    spaces = dg_spaces(m, k)
    H, Z, Q = spaces
    try:
        K = assemble_dg_system(params, spaces, zero_mean=True).matrix[:-1, :-1]
        J = assemble_j(H, params)
        E = assemble_e(Q, params)
    except InvalidStabilisation as exc:
        return CheckResult(name, False, np.nan, TOL_IPP, str(exc))
    A = assemble_a(H, params.sigma)
    D = assemble_d(Z)
    rng = np.random.default_rng(seed)
    worst = 0.0
    nu_, nw = H.n_dofs, Z.n_dofs
    for _ in range(samples):
        x = rng.standard_normal(K.shape[0])
        u, w, p = x[:nu_], x[nu_:nu_ + nw], x[nu_ + nw:]
        ju, ep = u @ (J @ u), p @ (E @ p)
        energy = u @ (A @ u) + ju + w @ (D @ w) + ep
        err = abs(x @ (K @ x) - energy) / energy
        if min(ju, ep) < 0:
            err = np.inf
        worst = max(worst, err)
    return CheckResult(name, worst <= TOL_IPP, worst, TOL_IPP, f"{samples} samples")


def run_all(**stab):
    """All quick invariant suites; ``stab`` overrides c11/a11/d11 for the flux check."""
    out = [coercivity()]
    for k in (0, 1):
        out.append(ipp_equivalence(k=k))
        out.append(commuting_diagram(k=k))
    for scheme in ("mixed", "dg"):
        out.append(uniqueness(scheme, 1))
    out.append(dof_count())
    out.append(flux_energy(**stab))
    return out
