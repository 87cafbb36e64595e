"""Error norms, convergence rates, divergence checks and flow diagnostics."""
import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fespace import FEFunction, divergence_projection, facet_quadrature
from .quadrature import triangle

ERROR_COLUMNS = ["h", "dofs", "err_u", "rate_u", "err_w", "rate_w", "err_p", "rate_p", "div_linf"]


class DegenerateError(ValueError):
    pass


@dataclass
class ErrorReport:
    h: float
    dofs: int
    err_u: float  # H(div) norm (broken divergence for DG)
    err_w: float  # Z norm (broken gradient for DG)
    err_p: float  # L2 norm
    err_A: Optional[float] = None  # DG energy seminorm
    div_linf: Optional[float] = None
    rates: dict = field(default_factory=dict)

    def as_row(self):
        r = self.rates
        return [self.h, self.dofs, self.err_u, r.get("err_u"), self.err_w, r.get("err_w"),
                self.err_p, r.get("err_p"), self.div_linf]


def _error_quad(space):
    # exact for the squared error of a degree-(k+1) field, plus three orders
    return triangle(2 * (space.k + 1) + 3)


def _l2(w, a):
    a2 = a**2 if a.ndim == 2 else (a**2).sum(-1)
    return float(np.sqrt((w * a2).sum()))


def error_norms(sol, exact) -> ErrorReport:
    """Errors of ``sol`` (u, w, p FEFunctions) against a ManufacturedSolution."""
    u, w, p = sol.u, sol.w, sol.p
    m = u.space.mesh
    nu = sol.params.nu
    q = _error_quad(u.space)
    wt = q.weights[None, :] * m.detJ[:, None]
    phys = m.map_points(q.points)
    X, Y = phys[..., 0], phys[..., 1]
    eu = np.stack(exact.velocity(X, Y), -1) - u.evaluate(q.points)
    ediv = exact.divergence(X, Y) - u.evaluate(q.points, what="div")
    ew = exact.vorticity(X, Y) - w.evaluate(q.points)
    ecurl = np.stack(exact.curl_vorticity(X, Y), -1) - w.evaluate(q.points, what="curl")
    ep = exact.pressure(X, Y) - p.evaluate(q.points)
    err_u = np.hypot(_l2(wt, eu), _l2(wt, ediv))
    err_w = np.sqrt(_l2(wt, ew) ** 2 + nu * _l2(wt, ecurl) ** 2)
    rep = ErrorReport(h=float(m.cell_diameters.max()), dofs=int(sol.system.size),
                      err_u=float(err_u), err_w=float(err_w), err_p=_l2(wt, ep))
    if sol.scheme == "mixed":
        rep.div_linf = divergence_linf(sol)
    else:
        rep.err_A = float(np.sqrt(sol.params.sigma * _l2(wt, eu) ** 2 + _l2(wt, ew) ** 2
                                  + dg_seminorm(sol, exact) ** 2))
    return rep


def divergence_linf(sol):
    """max |coefficient| of the L2 projection of div u_h onto the pressure space."""
    return float(np.abs(divergence_projection(sol.u, sol.p.space)).max())


def dg_seminorm(sol, exact=None):
    """sqrt(|e_u|_j^2 + |e_p|_e^2) for e = exact - discrete (or the discrete field alone)."""
    from .dg import facet_groups, stabilisation
    from .mixed import quad_degree

    u, p = sol.u, sol.p
    m = u.space.mesh
    c11, a11, d11 = sol.params.stab
    rn = np.sqrt(sol.params.nu)
    g = facet_groups(m)
    deg = quad_degree(u.space) + 3

    def traces(fn, fq, side, vec):
        ref, c = fq.ref[side], fq.cells[side]
        val = fn.evaluate(ref, c)
        if exact is None:
            return -val
        phys = m.map_points(ref, c)
        ex = np.stack(exact.velocity(phys[..., 0], phys[..., 1]), -1) if vec \
            else exact.pressure(phys[..., 0], phys[..., 1])
        return ex - val

    def jumps(facets, interior):
        fq = facet_quadrature(m, facets, deg)
        ju = traces(u, fq, 0, True)
        jp = traces(p, fq, 0, False)
        if interior:
            ju = ju - traces(u, fq, 1, True)
            jp = jp - traces(p, fq, 1, False)
        n = fq.normals[:, None, :]
        jt = ju[..., 0] * n[..., 1] - ju[..., 1] * n[..., 0]
        jn = (ju * n).sum(-1)
        return fq.weights, jt, jn, jp

    total = 0.0
    for name, interior in (("interior", True), ("sigma", False), ("gamma", False)):
        f = g[name]
        if len(f) == 0:
            continue
        w, jt, jn, jp = jumps(f, interior)
        if name != "gamma":
            C = stabilisation(m, f, c11, interior, "inv")[:, None]
            Dc = stabilisation(m, f, d11, interior, "lin")[:, None]
            total += rn * float((w * C * jt**2).sum()) + float((w * Dc * jp**2).sum())
        if name != "sigma":
            A = stabilisation(m, f, a11, interior, "inv")[:, None]
            total += float((w * A * jn**2).sum())
    return float(np.sqrt(total))


def fit_rates(reports, columns=("err_u", "err_w", "err_p", "err_A")):
    """log2 ratios of successive errors; fills ``report.rates`` in place."""
    if len(reports) < 2:
        raise DegenerateError("need at least two levels to fit rates")
    out = []
    for prev, cur in zip(reports[:-1], reports[1:]):
        rates = {}
        for c in columns:
            a, b = getattr(prev, c), getattr(cur, c)
            if a is None or b is None:
                continue
            if a <= 0 or b <= 0:
                raise DegenerateError(f"zero error in column {c}")
            rates[c] = float(np.log2(a / b))
        cur.rates = rates
        out.append(rates)
    return out


def enstrophy_palinstrophy(w: FEFunction, nu: float, degree_extra=3):
    """Enstrophy and palinstrophy of the stored (scaled) vorticity field.

    Returns ``(E, P, E_phys, P_phys)``. The first pair applies
    ``1/(2 nu) ||.||^2`` to the stored field; the second to the physical
    vorticity ``w / sqrt(nu)``. Gradients are cellwise.
    """
    m = w.space.mesh
    q = triangle(2 * w.space.degree + degree_extra)
    wt = q.weights[None, :] * m.detJ[:, None]
    val = w.evaluate(q.points)
    grad = w.evaluate(q.points, what="grad")
    e = float((wt * val**2).sum()) / (2 * nu)
    p = float((wt[..., None] * grad**2).sum()) / (2 * nu)
    return e, p, e / nu, p / nu


def midline_profiles(fn: FEFunction, start, stop, n):
    """Values of ``fn`` at ``n`` uniform points on the segment [start, stop]."""
    if n == 0:
        return np.zeros((0, 2)), np.zeros(0)
    t = np.linspace(0.0, 1.0, n)
    a, b = np.asarray(start, float), np.asarray(stop, float)
    pts = a[None] + t[:, None] * (b - a)[None]
    return pts, fn(pts)


def write_error_csv(path, reports):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(ERROR_COLUMNS + ["err_A", "rate_A"])
        for r in reports:
            wr.writerow([_fmt(v) for v in r.as_row() + [r.err_A, r.rates.get("err_A")]])


def write_diagnostics_csv(path, rows):
    cols = ["t", "E", "P", "E_phys", "P_phys", "div_linf"]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for r in rows:
            wr.writerow([_fmt(r.get(c)) for c in cols])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:.10e}"


def enstrophy_oracle(vorticity, nu, rect=((0.0, 0.0), (1.0, 1.0)), blocks=80, order=20):
    """E = (1/2nu) ||sqrt(nu) w||^2 of a physical vorticity callable, by tensor Gauss quadrature.

    Independent of any mesh; ``blocks`` x ``blocks`` panels of ``order``^2 points.
    """
    g, wg = np.polynomial.legendre.leggauss(order)
    (x0, y0), (x1, y1) = rect
    ex, ey = np.linspace(x0, x1, blocks + 1), np.linspace(y0, y1, blocks + 1)
    hx, hy = np.diff(ex)[0], np.diff(ey)[0]
    xs = (ex[:-1, None] + (g[None] + 1) / 2 * hx).ravel()
    ys = (ey[:-1, None] + (g[None] + 1) / 2 * hy).ravel()
    wx = np.tile(wg / 2 * hx, blocks)
    wy = np.tile(wg / 2 * hy, blocks)
    total = 0.0
    for y, w in zip(ys, wy):
        total += w * float((wx * np.asarray(vorticity(xs, np.full_like(xs, y))) ** 2).sum())
    # (1/2nu) * nu * ||w||^2
    return 0.5 * total
