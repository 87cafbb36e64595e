"""Conforming mixed scheme: RT_k velocity, continuous P_{k+1} vorticity, P_k pressure.

Block layout of the assembled system (unknowns u, w, p and an optional
pressure multiplier)::

    [ A      B1 + C   B2 ] [u]   [F]
    [ B1^T   -D       0  ] [w] = [G]
    [ B2^T   0        0  ] [p]   [0]

Matrix blocks are stored with the test space as rows. Cross products of
scalars and vectors use their z-component reductions, for example
``theta x beta = theta * (-beta2, beta1)`` and ``v x n = v1 n2 - v2 n1``.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional
import warnings

import numpy as np
import scipy.sparse as sp

from .fespace import (
    FESpace,
    SpaceKind,
    build_space,
    facet_quadrature,
    interpolate_rt,
    scalar_values,
    scatter,
    scatter_vector,
    vector_values,
)
from .mesh import BoundaryTag, Mesh
from .quadrature import triangle


class InconsistentSpaces(ValueError):
    pass


class NoPressureGauge(ValueError):
    """Raised when Sigma is empty and no zero-mean constraint was requested."""


class SolvabilityWarning(UserWarning):
    pass


@dataclass
class OseenParams:
    """Coefficients and data of the Oseen problem.

    Fields are callables ``(x, y)`` (vector fields return a pair), constants,
    or FEFunctions. ``gamma_normal`` and ``gamma_vorticity`` give u.n and the
    vorticity trace on Gamma (zero when None).
    """
    sigma: float
    nu: float
    beta: object = (0.0, 0.0)
    f: object = (0.0, 0.0)
    p_sigma: object = 0.0
    u_sigma: object = 0.0
    gamma_normal: Optional[Callable] = None
    gamma_vorticity: object = None
    c11: Optional[float] = None
    a11: Optional[float] = None
    d11: Optional[float] = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")

    @property
    def stab(self):
        c11 = self.sigma if self.c11 is None else self.c11
        a11 = self.sigma if self.a11 is None else self.a11
        d11 = self.nu if self.d11 is None else self.d11
        return c11, a11, d11

    def beta_sup(self, mesh, degree=6):
        """max |beta| over the quadrature points of ``mesh``."""
        q = triangle(degree)
        b = vector_values(self.beta, mesh, q.points)
        return float(np.sqrt((b**2).sum(-1)).max())

    def solvability_indicator(self, mesh):
        """2 |beta|_inf^2 / (nu sigma); the analysis assumes a value below 1."""
        return 2.0 * self.beta_sup(mesh) ** 2 / (self.nu * self.sigma)


@dataclass
class SaddleSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    offsets: dict  # name -> (start, stop)
    has_multiplier: bool
    spaces: tuple
    scheme: str = "mixed"
    fixed: dict = field(default_factory=dict)  # global index -> value

    @property
    def size(self):
        return self.matrix.shape[0]

    def split(self, x):
        return {k: x[a:b] for k, (a, b) in self.offsets.items()}

    def export_coo(self, path):
        """Write the matrix as ``i j value`` lines."""
        A = self.matrix.tocoo()
        with open(path, "w") as fh:
            fh.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
            for i, j, v in zip(A.row, A.col, A.data):
                fh.write(f"{i} {j} {v:.17g}\n")


# ------------------------------------------------------------------ helpers
def quad_degree(space):
    return 2 * (space.k + 1) + 2


def _volume(space):
    q = triangle(quad_degree(space))
    return q, q.weights[None, :] * space.mesh.detJ[:, None]


def _check_same_mesh(*spaces):
    m = spaces[0].mesh
    if any(s.mesh is not m for s in spaces[1:]):
        raise InconsistentSpaces("spaces live on different meshes")


def mixed_spaces(mesh: Mesh, k: int):
    return (build_space(mesh, SpaceKind.RT, k), build_space(mesh, SpaceKind.LAGRANGE, k),
            build_space(mesh, SpaceKind.DISC, k))


def check_spaces(spaces, kinds):
    if len(spaces) != 3:
        raise InconsistentSpaces("expected (velocity, vorticity, pressure) spaces")
    _check_same_mesh(*spaces)
    for s, kd in zip(spaces, kinds):
        if s.kind is not kd:
            raise InconsistentSpaces(f"expected {kd.value} space, got {s.kind.value}")
    if len({s.k for s in spaces}) != 1:
        raise InconsistentSpaces("spaces built with different orders k")


# ------------------------------------------------------------ bilinear forms
def assemble_a(H: FESpace, sigma: float):
    """sigma * (u, v)."""
    q, w = _volume(H)
    t = H.tabulate(q.points, derivatives=False)
    loc = sigma * np.einsum("cq,cqai,cqbi->cab", w, t.val, t.val)
    return scatter(loc, H.cell_dofs, H.cell_dofs, H.n_dofs, H.n_dofs)


def assemble_b1(H: FESpace, Z: FESpace, nu: float):
    """Entry (i, j) = sqrt(nu) * int curl(theta_j) . v_i."""
    _check_same_mesh(H, Z)
    q, w = _volume(H)
    tv = H.tabulate(q.points, derivatives=False)
    tz = Z.tabulate(q.points)
    loc = np.sqrt(nu) * np.einsum("cq,cqai,cqbi->cab", w, tv.val, tz.curl)
    return scatter(loc, H.cell_dofs, Z.cell_dofs, H.n_dofs, Z.n_dofs)


def assemble_b2(H: FESpace, Q: FESpace):
    """Entry (i, j) = -int q_j div v_i."""
    _check_same_mesh(H, Q)
    q, w = _volume(H)
    tv = H.tabulate(q.points)
    tq = Q.tabulate(q.points, derivatives=False)
    loc = -np.einsum("cq,cqa,cqb->cab", w, tv.div, tq.val)
    return scatter(loc, H.cell_dofs, Q.cell_dofs, H.n_dofs, Q.n_dofs)


def assemble_c(Z: FESpace, H: FESpace, nu: float, beta):
    """Convection block with rows indexed by v_i (H) and columns by theta_j (Z).

    Entry (i, j) = nu^{-1/2} int theta_j (-beta2 v_i1 + beta1 v_i2).
    """
    _check_same_mesh(H, Z)
    q, w = _volume(H)
    tv = H.tabulate(q.points, derivatives=False)
    tz = Z.tabulate(q.points, derivatives=False)
    b = vector_values(beta, H.mesh, q.points)
    rot = np.stack([-b[..., 1], b[..., 0]], axis=-1)  # theta x beta for theta = 1
    vb = np.einsum("cqai,cqi->cqa", tv.val, rot)
    loc = np.einsum("cq,cqa,cqb->cab", w, vb, tz.val) / np.sqrt(nu)
    return scatter(loc, H.cell_dofs, Z.cell_dofs, H.n_dofs, Z.n_dofs)


def assemble_d(Z: FESpace):
    """(w, theta)."""
    q, w = _volume(Z)
    t = Z.tabulate(q.points, derivatives=False)
    loc = np.einsum("cq,cqa,cqb->cab", w, t.val, t.val)
    return scatter(loc, Z.cell_dofs, Z.cell_dofs, Z.n_dofs, Z.n_dofs)


def mean_row(Q: FESpace):
    """Vector of int q_j, used for the zero-mean pressure constraint."""
    q, w = _volume(Q)
    t = Q.tabulate(q.points, derivatives=False)
    return scatter_vector(np.einsum("cq,cqb->cb", w, t.val), Q.cell_dofs, Q.n_dofs)


# ------------------------------------------------------------------ loads
def volume_load(H: FESpace, f):
    q, w = _volume(H)
    t = H.tabulate(q.points, derivatives=False)
    fv = vector_values(f, H.mesh, q.points)
    return scatter_vector(np.einsum("cq,cqai,cqi->ca", w, t.val, fv), H.cell_dofs, H.n_dofs)


def facet_load(space: FESpace, facets, integrand):
    """Sum over boundary facets of int integrand(trace values, fq) ds.

    ``integrand(val, fq)`` receives the side-0 basis trace (nF, nq, nb[, 2])
    and returns per-point weights with the same leading shape.
    """
    out = np.zeros(space.n_dofs)
    if len(facets) == 0:
        return out
    fq = facet_quadrature(space.mesh, facets, quad_degree(space))
    c = fq.cells[0]
    t = space.tabulate(fq.ref[0], c, derivatives=False)
    loc = np.einsum("fq,fqa->fa", fq.weights, integrand(t.val, fq))
    return scatter_vector(loc, space.cell_dofs[c], space.n_dofs)


def _facet_scalar(data, mesh, fq):
    return scalar_values(data, mesh, fq.ref[0], fq.cells[0], phys=fq.phys)


def assemble_rhs(params: OseenParams, spaces):
    """Load vectors (F, G) of the mixed scheme.

    ``u_sigma`` is the scalar tangential trace u x n = u1 n2 - u2 n1 on Sigma,
    which gives G(theta) = sqrt(nu) <u_sigma, theta>_Sigma.
    """
    H, Z, Q = spaces
    m = H.mesh
    F = volume_load(H, params.f)
    sig = m.boundary_facets(BoundaryTag.SIGMA)

    def pres(val, fq):
        p = _facet_scalar(params.p_sigma, m, fq)
        vn = np.einsum("fqai,fi->fqa", val, fq.normals)
        return -p[..., None] * vn

    def tang(val, fq):
        us = _facet_scalar(params.u_sigma, m, fq)
        return np.sqrt(params.nu) * us[..., None] * val

    F += facet_load(H, sig, pres)
    G = facet_load(Z, sig, tang)
    return F, G


# ----------------------------------------------------- essential constraints
def gamma_constraints(params: OseenParams, H: FESpace, Z: FESpace):
    """Constrained DoFs and their values on Gamma: RT normal moments, vorticity nodes."""
    m = H.mesh
    gam = m.boundary_facets(BoundaryTag.GAMMA)
    u_dofs = H.facet_dofs(gam)
    u_vals = np.zeros(len(u_dofs))
    if params.gamma_normal is not None and len(u_dofs):
        full = interpolate_rt(H, None, facet_data=params.gamma_normal)
        u_vals = full[u_dofs]
    w_dofs = Z.facet_dofs(gam)
    w_vals = np.zeros(len(w_dofs))
    if params.gamma_vorticity is not None and len(w_dofs):
        X = np.zeros((Z.n_dofs, 2))
        X[Z.cell_dofs.ravel()] = Z.node_coords.reshape(-1, 2)
        g = params.gamma_vorticity
        xs = X[w_dofs]
        w_vals = np.broadcast_to(np.asarray(g(xs[:, 0], xs[:, 1]) if callable(g) else g, dtype=float),
                                 (len(w_dofs),)).copy()
    return u_dofs, u_vals, w_dofs, w_vals


def apply_constraints(A, b, dofs, values):
    """Symmetric elimination: move known values to the rhs, unit diagonal."""
    A = A.tocsr()
    if len(dofs) == 0:
        return A, b
    x = np.zeros(A.shape[0])
    x[dofs] = values
    b = b - A @ x
    keep = np.ones(A.shape[0])
    keep[dofs] = 0.0
    K = sp.diags(keep)
    I = sp.diags(1.0 - keep)
    A = (K @ A @ K + I).tocsr()
    b[dofs] = values
    return A, b


def _gauge(blocks, rhs, Q, zero_mean, has_sigma):
    if not zero_mean and not has_sigma:
        raise NoPressureGauge("Sigma is empty: the pressure needs the zero-mean constraint")
    if not zero_mean:
        return blocks, rhs
    n = blocks.shape[0]
    r = mean_row(Q)
    col = np.zeros(n)
    col[n - Q.n_dofs:] = r
    c = sp.csr_matrix(col[:, None])
    blocks = sp.bmat([[blocks, c], [c.T, None]], format="csr")
    return blocks, np.append(rhs, 0.0)


def warn_solvability(params, mesh):
    ind = params.solvability_indicator(mesh)
    if ind >= 1.0:
        warnings.warn(f"2|beta|^2/(nu sigma) = {ind:.3g} >= 1; the scheme is not guaranteed "
                      "to be well posed", SolvabilityWarning, stacklevel=3)
    return ind


def assemble_mixed_system(params: OseenParams, spaces, zero_mean: bool = False) -> SaddleSystem:
    check_spaces(spaces, (SpaceKind.RT, SpaceKind.LAGRANGE, SpaceKind.DISC))
    H, Z, Q = spaces
    m = H.mesh
    A = assemble_a(H, params.sigma)
    B1 = assemble_b1(H, Z, params.nu)
    B2 = assemble_b2(H, Q)
    C = assemble_c(Z, H, params.nu, params.beta)
    D = assemble_d(Z)
    K = sp.bmat([[A, B1 + C, B2], [B1.T, -D, None], [B2.T, None, None]], format="csr")
    F, G = assemble_rhs(params, spaces)
    b = np.concatenate([F, G, np.zeros(Q.n_dofs)])
    nu_, nw = H.n_dofs, Z.n_dofs
    ud, uv, wd, wv = gamma_constraints(params, H, Z)
    dofs = np.concatenate([ud, nu_ + wd])
    vals = np.concatenate([uv, wv])
    K, b = apply_constraints(K, b, dofs, vals)
    has_sigma = len(m.boundary_facets(BoundaryTag.SIGMA)) > 0
    K, b = _gauge(K, b, Q, zero_mean, has_sigma)
    offsets = {"u": (0, nu_), "w": (nu_, nu_ + nw), "p": (nu_ + nw, nu_ + nw + Q.n_dofs)}
    if zero_mean:
        offsets["lambda"] = (K.shape[0] - 1, K.shape[0])
    return SaddleSystem(K, b, offsets, zero_mean, tuple(spaces), "mixed",
                        dict(zip(dofs.tolist(), vals.tolist())))
