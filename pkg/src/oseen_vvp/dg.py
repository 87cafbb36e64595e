"""Stabilised DG scheme: P_{k+1}^2 velocity, P_k vorticity, P_k pressure.

Block layout::

    [ A + J    B1 + C   B2 ] [u]   [F]
    [ -B1^T    D        0  ] [w] = [G]
    [ -B2^T    0        E  ] [p]   [L]

with B1[i, j] = b1(v_i, theta_j) and B2[i, j] = b2(v_i, q_j).

Facet conventions: the global normal n of a facet is the outward normal of
its side-0 cell; jumps are side 0 minus side 1, averages are the mean. On
boundary facets the jump and the average are the one-sided trace. For
vectors ``[v]_T = (v0 - v1) x n`` with ``v x n = v1 n2 - v2 n1``; for a
scalar ``[theta]_T = (theta0 - theta1) t`` with ``t = (-n2, n1)``.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fespace import FESpace, SpaceKind, build_space, facet_quadrature, scalar_values, scatter
from .mesh import BoundaryTag, Mesh
from .mixed import (
    SaddleSystem,
    _gauge,
    _volume,
    assemble_b1,
    assemble_b2,
    assemble_c,
    assemble_d,
    assemble_a,
    check_spaces,
    facet_load,
    quad_degree,
    volume_load,
)


class InvalidStabilisation(ValueError):
    pass


def dg_spaces(mesh: Mesh, k: int):
    return (build_space(mesh, SpaceKind.VECTOR_DISC, k), build_space(mesh, SpaceKind.DISC, k),
            build_space(mesh, SpaceKind.DISC, k))


# ------------------------------------------------------------ facet groups
@dataclass
class FacetTrace:
    """Basis traces of one space on a group of facets.

    For interior facets the side-0 and side-1 bases are concatenated along
    the basis axis; ``jump`` and ``avg`` hold the per-basis factors.
    """
    fq: object
    val: np.ndarray
    dofs: np.ndarray
    jump: np.ndarray
    avg: np.ndarray


def facet_groups(mesh: Mesh):
    return {
        "interior": mesh.interior_facets,
        "gamma": mesh.boundary_facets(BoundaryTag.GAMMA),
        "sigma": mesh.boundary_facets(BoundaryTag.SIGMA),
    }


def facet_trace(space: FESpace, facets, interior, fq=None):
    if fq is None:
        fq = facet_quadrature(space.mesh, facets, quad_degree(space))
    c0 = fq.cells[0]
    v0 = space.tabulate(fq.ref[0], c0, derivatives=False).val
    d0 = space.cell_dofs[c0]
    nb = d0.shape[1]
    if not interior:
        return FacetTrace(fq, v0, d0, np.ones(nb), np.ones(nb))
    c1 = fq.cells[1]
    v1 = space.tabulate(fq.ref[1], c1, derivatives=False).val
    val = np.concatenate([v0, v1], axis=2)
    dofs = np.concatenate([d0, space.cell_dofs[c1]], axis=1)
    jump = np.concatenate([np.ones(nb), -np.ones(nb)])
    return FacetTrace(fq, val, dofs, jump, 0.5 * np.ones(2 * nb))


def _normal(tr):
    return np.einsum("fqai,fi->fqa", tr.val, tr.fq.normals)


def _cross_n(tr):
    """v x n per basis function."""
    n = tr.fq.normals
    return tr.val[..., 0] * n[:, None, None, 1] - tr.val[..., 1] * n[:, None, None, 0]


def _facet_form(test, trial, qt, qs, coef=None):
    """sum_f int coef * qt * qs over a facet group -> sparse block."""
    w = test.fq.weights if coef is None else test.fq.weights * coef[:, None]
    loc = np.einsum("fq,fqa,fqb->fab", w, qt, qs)
    return loc, test.dofs, trial.dofs


def _assemble_facets(parts, n_rows, n_cols):
    out = sp.csr_matrix((n_rows, n_cols))
    for loc, r, c in parts:
        if len(loc):
            out = out + scatter(loc, r, c, n_rows, n_cols)
    return out


# ------------------------------------------------------ stabilisation
def stabilisation(mesh: Mesh, facets, scale, interior, kind):
    """Per-facet C11/A11 (``kind='inv'``) or D11 (``kind='lin'``) coefficients."""
    if not scale > 0:
        raise InvalidStabilisation(f"stabilisation constants must be positive, got {scale}")
    facets = np.asarray(facets, dtype=int)
    h = mesh.cell_diameters
    h0 = h[mesh.facet_cells[facets, 0]]
    if kind == "inv":
        if interior:
            h1 = h[mesh.facet_cells[facets, 1]]
            return scale * np.maximum(1.0 / h0, 1.0 / h1)
        return scale / h0
    if interior:
        h1 = h[mesh.facet_cells[facets, 1]]
        return scale * np.maximum(h0, h1)
    return scale * h0


# ------------------------------------------------------------ forms
def assemble_b1_dg(H: FESpace, Z: FESpace, nu: float, form="primal"):
    """Entry (i, j) = b1(v_i, theta_j).

    ``primal``: sqrt(nu) [sum_T int curl theta . v + sum_{E u Gamma} int {v}.[theta]_T]
    ``ipp``:    sqrt(nu) [sum_T int curl v theta + sum_{E u Sigma} int [v]_T {theta}]
    """
    m = H.mesh
    g = facet_groups(m)
    rn = np.sqrt(nu)
    parts = []
    if form == "primal":
        vol = assemble_b1(H, Z, nu)
        for name, interior in (("interior", True), ("gamma", False)):
            if len(g[name]) == 0:
                continue
            tv = facet_trace(H, g[name], interior)
            tz = facet_trace(Z, g[name], interior, tv.fq)
            vt = -_cross_n(tv) * tv.avg  # {v}.t with t = (-n2, n1)
            parts.append(_facet_form(tv, tz, vt, tz.val * tz.jump))
    elif form == "ipp":
        q, w = _volume(H)
        th = H.tabulate(q.points)
        tz = Z.tabulate(q.points, derivatives=False)
        loc = np.einsum("cq,cqa,cqb->cab", w, th.curl, tz.val)
        vol = scatter(loc, H.cell_dofs, Z.cell_dofs, H.n_dofs, Z.n_dofs) * rn
        for name, interior in (("interior", True), ("sigma", False)):
            if len(g[name]) == 0:
                continue
            tv = facet_trace(H, g[name], interior)
            tz = facet_trace(Z, g[name], interior, tv.fq)
            parts.append(_facet_form(tv, tz, _cross_n(tv) * tv.jump, tz.val * tz.avg))
    else:
        raise ValueError(f"unknown form {form!r}")
    parts = [(rn * loc, r, c) for loc, r, c in parts]
    return (vol + _assemble_facets(parts, H.n_dofs, Z.n_dofs)).tocsr()


def assemble_b2_dg(H: FESpace, Q: FESpace, form="primal"):
    """Entry (i, j) = b2(v_i, q_j).

    ``primal``: -sum_T int q div v + sum_{E u Gamma} int {q}[v]_N
    ``ipp``:    sum_T int v . grad q - sum_{E u Sigma} int {v}.[q]
    """
    m = H.mesh
    g = facet_groups(m)
    parts = []
    if form == "primal":
        vol = assemble_b2(H, Q)
        for name, interior in (("interior", True), ("gamma", False)):
            if len(g[name]) == 0:
                continue
            tv = facet_trace(H, g[name], interior)
            tq = facet_trace(Q, g[name], interior, tv.fq)
            parts.append(_facet_form(tv, tq, _normal(tv) * tv.jump, tq.val * tq.avg))
    elif form == "ipp":
        q, w = _volume(H)
        th = H.tabulate(q.points, derivatives=False)
        tq = Q.tabulate(q.points)
        loc = np.einsum("cq,cqai,cqbi->cab", w, th.val, tq.grad)
        vol = scatter(loc, H.cell_dofs, Q.cell_dofs, H.n_dofs, Q.n_dofs)
        for name, interior in (("interior", True), ("sigma", False)):
            if len(g[name]) == 0:
                continue
            tv = facet_trace(H, g[name], interior)
            tq = facet_trace(Q, g[name], interior, tv.fq)
            parts.append(_facet_form(tv, tq, -_normal(tv) * tv.avg, tq.val * tq.jump))
    else:
        raise ValueError(f"unknown form {form!r}")
    return (vol + _assemble_facets(parts, H.n_dofs, Q.n_dofs)).tocsr()


def assemble_j(H: FESpace, params):
    """sqrt(nu) sum_{E u Sigma} C11 [u]_T [v]_T + sum_{E u Gamma} A11 [u]_N [v]_N."""
    m = H.mesh
    g = facet_groups(m)
    c11, a11, _ = params.stab
    rn = np.sqrt(params.nu)
    parts = []
    for name, interior in (("interior", True), ("sigma", False)):
        if len(g[name]):
            tv = facet_trace(H, g[name], interior)
            jt = _cross_n(tv) * tv.jump
            coef = rn * stabilisation(m, g[name], c11, interior, "inv")
            parts.append(_facet_form(tv, tv, jt, jt, coef))
    for name, interior in (("interior", True), ("gamma", False)):
        if len(g[name]):
            tv = facet_trace(H, g[name], interior)
            jn = _normal(tv) * tv.jump
            coef = stabilisation(m, g[name], a11, interior, "inv")
            parts.append(_facet_form(tv, tv, jn, jn, coef))
    return _assemble_facets(parts, H.n_dofs, H.n_dofs).tocsr()


def assemble_e(Q: FESpace, params):
    """sum_{E u Sigma} D11 [p].[q]."""
    m = Q.mesh
    g = facet_groups(m)
    _, _, d11 = params.stab
    parts = []
    for name, interior in (("interior", True), ("sigma", False)):
        if len(g[name]):
            tq = facet_trace(Q, g[name], interior)
            jq = tq.val * tq.jump
            parts.append(_facet_form(tq, tq, jq, jq, stabilisation(m, g[name], d11, interior, "lin")))
    return _assemble_facets(parts, Q.n_dofs, Q.n_dofs).tocsr()


# ------------------------------------------------------------ loads
def assemble_dg_rhs(params, spaces):
    """Load vectors (F, G, L).

    Sigma data follow the stated functionals; Gamma data (u.n = g and a
    vorticity trace) enter through the boundary fluxes, which adds
    ``-sqrt(nu) int w_Gamma (v x n) + int A11 g (v.n)`` to F and
    ``-int g q`` to L.
    """
    H, Z, Q = spaces
    m = H.mesh
    g = facet_groups(m)
    c11, a11, d11 = params.stab
    rn = np.sqrt(params.nu)
    F = volume_load(H, params.f)
    sig, gam = g["sigma"], g["gamma"]

    def scal(data, fq):
        return scalar_values(data, m, fq.ref[0], fq.cells[0], phys=fq.phys)

    def n_of(fq):
        return fq.normals[:, None, 0], fq.normals[:, None, 1]

    if len(sig):
        C = stabilisation(m, sig, c11, False, "inv")[:, None]
        Dc = stabilisation(m, sig, d11, False, "lin")[:, None]

        def f_sigma(val, fq):
            n = fq.normals
            vn = np.einsum("fqai,fi->fqa", val, n)
            vx = val[..., 0] * n[:, None, None, 1] - val[..., 1] * n[:, None, None, 0]
            p = scal(params.p_sigma, fq)
            us = scal(params.u_sigma, fq)
            return -p[..., None] * vn + rn * (C * us)[..., None] * vx

        F += facet_load(H, sig, f_sigma)
        G = facet_load(Z, sig, lambda val, fq: -rn * scal(params.u_sigma, fq)[..., None] * val)
        L = facet_load(Q, sig, lambda val, fq: (Dc * scal(params.p_sigma, fq))[..., None] * val)
    else:
        G = np.zeros(Z.n_dofs)
        L = np.zeros(Q.n_dofs)
    if len(gam):
        A = stabilisation(m, gam, a11, False, "inv")[:, None]

        def gn(fq):
            if params.gamma_normal is None:
                return np.zeros(fq.phys.shape[:2])
            nx, ny = n_of(fq)
            return np.broadcast_to(params.gamma_normal(fq.phys[..., 0], fq.phys[..., 1], nx, ny),
                                   fq.phys.shape[:2])

        def f_gamma(val, fq):
            n = fq.normals
            vn = np.einsum("fqai,fi->fqa", val, n)
            vx = val[..., 0] * n[:, None, None, 1] - val[..., 1] * n[:, None, None, 0]
            out = (A * gn(fq))[..., None] * vn
            if params.gamma_vorticity is not None:
                out = out - rn * scal(params.gamma_vorticity, fq)[..., None] * vx
            return out

        F += facet_load(H, gam, f_gamma)
        if params.gamma_normal is not None:
            L += facet_load(Q, gam, lambda val, fq: -gn(fq)[..., None] * val)
    return F, G, L


def assemble_dg_system(params, spaces, zero_mean: bool = False) -> SaddleSystem:
    check_spaces(spaces, (SpaceKind.VECTOR_DISC, SpaceKind.DISC, SpaceKind.DISC))
    for c in params.stab:
        if not c > 0:
            raise InvalidStabilisation(f"stabilisation constants must be positive, got {params.stab}")
    H, Z, Q = spaces
    m = H.mesh
    A = assemble_a(H, params.sigma) + assemble_j(H, params)
    B1 = assemble_b1_dg(H, Z, params.nu)
    B2 = assemble_b2_dg(H, Q)
    C = assemble_c(Z, H, params.nu, params.beta)
    D = assemble_d(Z)
    E = assemble_e(Q, params)
    K = sp.bmat([[A, B1 + C, B2], [-B1.T, D, None], [-B2.T, None, E]], format="csr")
    F, G, L = assemble_dg_rhs(params, spaces)
    b = np.concatenate([F, G, L])
    has_sigma = len(m.boundary_facets(BoundaryTag.SIGMA)) > 0
    K, b = _gauge(K, b, Q, zero_mean, has_sigma)
    nu_, nw, npr = H.n_dofs, Z.n_dofs, Q.n_dofs
    offsets = {"u": (0, nu_), "w": (nu_, nu_ + nw), "p": (nu_ + nw, nu_ + nw + npr)}
    if zero_mean:
        offsets["lambda"] = (K.shape[0] - 1, K.shape[0])
    return SaddleSystem(K, b, offsets, zero_mean, tuple(spaces), "dg")
