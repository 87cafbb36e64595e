"""Finite element spaces on triangle meshes.

Four kinds are supported, indexed by the scheme order ``k``:

* ``RT``           Raviart-Thomas RT_k (H(div)-conforming velocity),
* ``LAGRANGE``     continuous P_{k+1} (2D vorticity of the mixed scheme),
* ``DISC``         discontinuous P_k (pressure, DG vorticity),
* ``VECTOR_DISC``  discontinuous P_{k+1}^2 (DG velocity).

Reference bases are built by inverting the degree-of-freedom functionals on a
monomial spanning set. RT functions are mapped with the contravariant Piola
transform; facet moments are signed against the global facet normal and
global facet parameter so that normal traces are single valued.
"""
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .mesh import Mesh
from .quadrature import gauss_line, triangle

CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
MAX_K = 2


class SpaceKind(Enum):
    RT = "RT"
    LAGRANGE = "Lagrange"
    DISC = "Disc"
    VECTOR_DISC = "VectorDisc"


class UnsupportedDegree(ValueError):
    pass


# ------------------------------------------------------------------ monomials
def exponents(n):
    return [(d - b, b) for d in range(n + 1) for b in range(d + 1)]


def monomials(pts, n):
    """Values and first derivatives of centred monomials, degree <= n, at ``pts``.

    Monomials are taken about the reference centroid, which keeps the
    coefficients of the higher-order bases small.
    """
    x, y = pts[..., 0] - 1.0 / 3.0, pts[..., 1] - 1.0 / 3.0
    ex = exponents(n)
    val = np.stack([x**a * y**b for a, b in ex], axis=-1)
    dx = np.stack([a * x ** max(a - 1, 0) * y**b for a, b in ex], axis=-1)
    dy = np.stack([b * x**a * y ** max(b - 1, 0) for a, b in ex], axis=-1)
    return val, dx, dy


def shifted_legendre(j, s):
    c = np.zeros(j + 1)
    c[j] = 1.0
    return np.polynomial.legendre.legval(2.0 * np.asarray(s) - 1.0, c)


# ---------------------------------------------------------- reference bases
class LagrangeRef:
    """Nodal P_n basis: vertices, edge nodes (local edge direction), interior."""

    def __init__(self, n):
        self.n = n
        if n == 0:
            nodes = [[1.0 / 3.0, 1.0 / 3.0]]
        else:
            nodes = [list(c) for c in CORNERS]
            for i in range(3):
                a, b = CORNERS[(i + 1) % 3], CORNERS[(i + 2) % 3]
                nodes += [list(a + (j / n) * (b - a)) for j in range(1, n)]
            nodes += [[a / n, b / n] for b in range(1, n) for a in range(1, n - b)]
        self.nodes = np.array(nodes)
        V, _, _ = monomials(self.nodes, n)
        self.coef = np.linalg.inv(V)  # column i holds basis i
        self.dim = len(nodes)
        self.n_edge = max(n - 1, 0)
        self.n_interior = self.dim - 3 - 3 * self.n_edge if n > 0 else 1

    def tabulate(self, pts):
        v, dx, dy = monomials(pts, self.n)
        val = v @ self.coef
        grad = np.stack([dx @ self.coef, dy @ self.coef], axis=-1)
        return val, grad


class RTRef:
    """RT_k basis dual to normal-flux moments on edges and vector moments inside."""

    def __init__(self, k):
        self.k = k
        n = k + 1
        ex = exponents(n)
        nm = len(ex)
        idx = {e: m for m, e in enumerate(ex)}
        span = []
        for a, b in exponents(k):
            for comp in (0, 1):
                c = np.zeros((2, nm))
                c[comp, idx[(a, b)]] = 1.0
                span.append(c)
        for a, b in [(k - b, b) for b in range(k + 1)]:
            c = np.zeros((2, nm))
            c[0, idx[(a + 1, b)]] = 1.0
            c[1, idx[(a, b + 1)]] = 1.0
            span.append(c)
        span = np.array(span)  # (dim, 2, nm)
        self.dim = len(span)
        self.n_facet = k + 1
        self.n_interior = k * (k + 1)
        dofs = self._dof_matrix(span, n)
        X = np.linalg.inv(dofs.T)
        self.coef = np.einsum("is,scm->icm", X, span)  # (nb, 2, nm)

    def _dof_matrix(self, span, n):
        k = self.k
        rows = []
        q = gauss_line(2 * n + 2)
        for i in range(3):
            a, b = CORNERS[(i + 1) % 3], CORNERS[(i + 2) % 3]
            t = b - a
            nrm = np.array([t[1], -t[0]])
            pts = a + q.points[:, None] * t
            mv, _, _ = monomials(pts, n)
            vals = np.einsum("scm,qm->sqc", span, mv) @ nrm  # (dim, nq)
            for j in range(k + 1):
                rows.append(vals @ (q.weights * shifted_legendre(j, q.points)))
        if k > 0:
            qt = triangle(2 * n + 2)
            mv, _, _ = monomials(qt.points, n)
            vals = np.einsum("scm,qm->sqc", span, mv)
            tv, _, _ = monomials(qt.points, k - 1)
            for m in range(tv.shape[1]):
                for comp in (0, 1):
                    rows.append(vals[:, :, comp] @ (qt.weights * tv[:, m]))
        return np.array(rows)

    def tabulate(self, pts):
        v, dx, dy = monomials(pts, self.k + 1)
        val = np.einsum("...m,icm->...ic", v, self.coef)
        div = dx @ self.coef[:, 0, :].T + dy @ self.coef[:, 1, :].T
        return val, div


@lru_cache(maxsize=None)
def lagrange_ref(n):
    return LagrangeRef(n)


@lru_cache(maxsize=None)
def rt_ref(k):
    return RTRef(k)


# ---------------------------------------------------------------- tabulation
@dataclass
class Tabulation:
    """Mapped basis data at quadrature points, indexed (cell, point, basis, ...)."""
    val: np.ndarray
    grad: np.ndarray = None  # scalar: (..., 2); vector: (..., comp, deriv)
    div: np.ndarray = None
    curl: np.ndarray = None  # scalar -> vector rot-gradient, vector -> scalar


# ---------------------------------------------------------------------- space
class FESpace:
    def __init__(self, mesh: Mesh, kind: SpaceKind, k: int):
        if not 0 <= k <= MAX_K:
            raise UnsupportedDegree(f"scheme order k={k} not in 0..{MAX_K}")
        self.mesh = mesh
        self.kind = kind
        self.k = k
        if kind is SpaceKind.RT:
            self.ref = rt_ref(k)
            self.degree = k + 1
        elif kind in (SpaceKind.LAGRANGE, SpaceKind.VECTOR_DISC):
            self.ref = lagrange_ref(k + 1)
            self.degree = k + 1
        else:
            self.ref = lagrange_ref(k)
            self.degree = k
        self.cell_dofs, self.cell_signs, self.n_dofs = self._number()

    def __repr__(self):
        return f"FESpace({self.kind.value}, k={self.k}, n_dofs={self.n_dofs})"

    @property
    def is_vector(self):
        return self.kind in (SpaceKind.RT, SpaceKind.VECTOR_DISC)

    @property
    def n_local(self):
        return self.cell_dofs.shape[1]

    # -------------------------------------------------------------- numbering
    def _number(self):
        m = self.mesh
        nc = m.n_cells
        if self.kind is SpaceKind.DISC:
            nb = self.ref.dim
            return np.arange(nc * nb).reshape(nc, nb), np.ones((nc, nb)), nc * nb
        if self.kind is SpaceKind.VECTOR_DISC:
            nb = 2 * self.ref.dim
            return np.arange(nc * nb).reshape(nc, nb), np.ones((nc, nb)), nc * nb
        if self.kind is SpaceKind.RT:
            ref = self.ref
            nfd = ref.n_facet
            dofs = np.zeros((nc, ref.dim), dtype=int)
            signs = np.ones((nc, ref.dim))
            for i in range(3):
                f = m.cell_facets[:, i]
                flip = m.cell_facet_flip[:, i]
                for j in range(nfd):
                    dofs[:, i * nfd + j] = f * nfd + j
                    par = np.where(flip & (j % 2 == 1), -1.0, 1.0)
                    signs[:, i * nfd + j] = m.cell_facet_sign[:, i] * par
            off = m.n_facets * nfd
            ni = ref.n_interior
            dofs[:, 3 * nfd:] = off + np.arange(nc * ni).reshape(nc, ni)
            return dofs, signs, off + nc * ni
        # continuous Lagrange
        ref = self.ref
        ne = ref.n_edge
        reps, vnum = np.unique(m.vertex_class, return_inverse=True)
        nvd = len(reps)
        dofs = np.zeros((nc, ref.dim), dtype=int)
        dofs[:, :3] = vnum.ravel()[m.cells]
        for i in range(3):
            f = m.cell_facets[:, i]
            flip = m.cell_facet_flip[:, i]
            for j in range(ne):
                jj = np.where(flip, ne - 1 - j, j)
                dofs[:, 3 + i * ne + j] = nvd + f * ne + jj
        off = nvd + m.n_facets * ne
        ni = ref.dim - 3 - 3 * ne
        dofs[:, 3 + 3 * ne:] = off + np.arange(nc * ni).reshape(nc, ni)
        return dofs, np.ones((nc, ref.dim)), off + nc * ni

    # ------------------------------------------------------------- evaluation
    def tabulate(self, ref_pts, cells=None, derivatives=True):
        """Mapped basis at reference points (nq, 2) or per-cell points (n, nq, 2)."""
        m = self.mesh
        cells = np.arange(m.n_cells) if cells is None else np.asarray(cells)
        ref_pts = np.asarray(ref_pts, dtype=float)
        J = m.jacobians[cells]
        iJ = m.invJ[cells]
        det = m.detJ[cells]
        shared = ref_pts.ndim == 2
        n = len(cells)
        if self.kind is SpaceKind.RT:
            v, d = self.ref.tabulate(ref_pts)
            s = self.cell_signs[cells]
            if shared:
                val = np.einsum("cij,qbj->cqbi", J, v)
                div = d[None] * np.ones((n, 1, 1))
            else:
                val = np.einsum("cij,cqbj->cqbi", J, v)
                div = d.copy()
            scale = (s / det[:, None])[:, None, :]
            val *= scale[..., None]
            div = div * scale
            return Tabulation(val=val, div=div)
        v, g = self.ref.tabulate(ref_pts)
        if shared:
            v = np.broadcast_to(v, (n,) + v.shape)
            grad = np.einsum("cji,qbj->cqbi", iJ, g) if derivatives else None
        else:
            grad = np.einsum("cji,cqbj->cqbi", iJ, g) if derivatives else None
        if self.kind is not SpaceKind.VECTOR_DISC:
            curl = None if grad is None else np.stack([grad[..., 1], -grad[..., 0]], axis=-1)
            return Tabulation(val=v, grad=grad, curl=curl)
        ns = self.ref.dim
        nq = v.shape[1]
        val = np.zeros((n, nq, 2 * ns, 2))
        val[:, :, :ns, 0] = v
        val[:, :, ns:, 1] = v
        if grad is None:
            return Tabulation(val=val)
        G = np.zeros((n, nq, 2 * ns, 2, 2))
        G[:, :, :ns, 0, :] = grad
        G[:, :, ns:, 1, :] = grad
        div = G[..., 0, 0] + G[..., 1, 1]
        curl = G[..., 1, 0] - G[..., 0, 1]
        return Tabulation(val=val, grad=G, div=div, curl=curl)

    # -------------------------------------------------------------- geometry
    @cached_property
    def node_coords(self):
        """Physical coordinates of the nodes of a Lagrange-type space, per cell."""
        if self.kind is SpaceKind.RT:
            raise TypeError("RT spaces have no nodal points")
        return self.mesh.map_points(self.ref.nodes)  # (nc, nb_scalar, 2)

    def facet_dofs(self, facets):
        """Global DoFs whose basis functions have nonzero trace on ``facets``."""
        m = self.mesh
        facets = np.asarray(facets, dtype=int)
        if len(facets) == 0:
            return np.zeros(0, dtype=int)
        if self.kind is SpaceKind.RT:
            nfd = self.ref.n_facet
            return np.unique((facets[:, None] * nfd + np.arange(nfd)).ravel())
        if self.kind is not SpaceKind.LAGRANGE:
            raise TypeError("discontinuous spaces have no facet DoFs")
        ne = self.ref.n_edge
        c = m.facet_cells[facets, 0]
        i = m.facet_local[facets, 0]
        local = [(i + 1) % 3, (i + 2) % 3] + [3 + i * ne + j for j in range(ne)]
        out = [self.cell_dofs[c, l] for l in local]
        return np.unique(np.concatenate(out))

    def boundary_dofs(self, tag):
        return self.facet_dofs(self.mesh.boundary_facets(tag))

    # ------------------------------------------------------------- operators
    def quadrature(self, extra=2):
        return triangle(2 * self.degree + extra)

    def mass_matrix(self):
        q = self.quadrature()
        t = self.tabulate(q.points, derivatives=False)
        w = q.weights[None, :] * self.mesh.detJ[:, None]
        if self.is_vector:
            local = np.einsum("cq,cqai,cqbi->cab", w, t.val, t.val)
        else:
            local = np.einsum("cq,cqa,cqb->cab", w, t.val, t.val)
        return scatter(local, self.cell_dofs, self.cell_dofs, self.n_dofs, self.n_dofs)

    def function(self, coeffs=None):
        c = np.zeros(self.n_dofs) if coeffs is None else np.asarray(coeffs, dtype=float)
        return FEFunction(self, c)


def build_space(mesh: Mesh, kind, k: int) -> FESpace:
    if isinstance(kind, str):
        kind = SpaceKind[kind.upper()] if kind.upper() in SpaceKind.__members__ else SpaceKind(kind)
    return FESpace(mesh, kind, k)


def eval_basis(space: FESpace, cell: int, point) -> Tabulation:
    """Mapped basis of one cell at one reference point; arrays indexed (basis, ...)."""
    t = space.tabulate(np.asarray(point, dtype=float).reshape(1, 2), [cell])
    pick = lambda a: None if a is None else a[0, 0]
    return Tabulation(val=pick(t.val), grad=pick(t.grad), div=pick(t.div), curl=pick(t.curl))


def scatter(local, rows, cols, n_rows, n_cols):
    """Sum cell matrices (nc, a, b) into a CSR matrix."""
    nc, a, b = local.shape
    I = np.broadcast_to(rows[:, :, None], (nc, a, b)).ravel()
    J = np.broadcast_to(cols[:, None, :], (nc, a, b)).ravel()
    A = sp.coo_matrix((local.ravel(), (I, J)), shape=(n_rows, n_cols)).tocsr()
    A.sum_duplicates()
    return A


def scatter_vector(local, rows, n):
    return np.bincount(rows.ravel(), weights=local.ravel(), minlength=n)


# ------------------------------------------------------------------ functions
@dataclass
class FEFunction:
    space: FESpace
    coeffs: np.ndarray

    def _combine(self, basis, cells):
        # basis (n, nq, nb, ...) with signs already applied
        c = self.coeffs[self.space.cell_dofs[cells]]
        return np.einsum("cqb...,cb->cq...", basis, c)

    def evaluate(self, ref_pts, cells=None, what="val"):
        cells = np.arange(self.space.mesh.n_cells) if cells is None else np.asarray(cells)
        t = self.space.tabulate(ref_pts, cells, derivatives=what != "val")
        return self._combine(getattr(t, what), cells)

    def __call__(self, points):
        """Point evaluation at physical points (slow path, for sampling)."""
        m = self.space.mesh
        pts = np.atleast_2d(points)
        cells, ref = m.locate(pts)
        if np.any(cells < 0):
            raise PointOutsideDomain(f"points outside the mesh: {pts[cells < 0]}")
        out = self.evaluate(ref[:, None, :], cells)
        return out[:, 0]


class PointOutsideDomain(ValueError):
    pass


def evaluate_field(field, mesh, ref_pts, cells=None, phys=None):
    """Values of a callable, constant, or FEFunction at mapped reference points."""
    if isinstance(field, FEFunction):
        return field.evaluate(ref_pts, cells)
    if phys is None:
        phys = mesh.map_points(np.asarray(ref_pts), cells)
    if callable(field):
        return np.asarray(field(phys[..., 0], phys[..., 1]), dtype=float)
    return np.broadcast_to(np.asarray(field, dtype=float), phys.shape[:-1] + np.shape(field))


# ------------------------------------------------------- interpolation/projection
def interpolate_rt(space: FESpace, v, facet_data=None):
    """Canonical RT interpolant of the vector field ``v(x, y) -> (vx, vy)``.

    Facet DoFs are moments of v.n against shifted Legendre polynomials in the
    global facet parameter; interior DoFs are reference-cell vector moments
    of the Piola pull-back. ``facet_data(x, y, nx, ny)`` may replace v.n.
    """
    if space.kind is not SpaceKind.RT:
        raise TypeError("interpolate_rt needs an RT space")
    m = space.mesh
    k = space.k
    coeffs = np.zeros(space.n_dofs)
    q = gauss_line(2 * k + 8)
    x = m.facet_points(q.points)  # (nf, nq, 2)
    nrm = m.facet_normals
    if facet_data is None:
        vx, vy = _vector_values(v, x)
        vn = vx * nrm[:, None, 0] + vy * nrm[:, None, 1]
    else:
        vn = np.asarray(facet_data(x[..., 0], x[..., 1], nrm[:, None, 0], nrm[:, None, 1]), dtype=float)
        vn = np.broadcast_to(vn, x.shape[:2])
    L = m.facet_lengths[:, None]
    for j in range(k + 1):
        coeffs[np.arange(m.n_facets) * (k + 1) + j] = (vn * (q.weights * shifted_legendre(j, q.points))).sum(1) * L[:, 0]
    if k > 0 and v is not None:
        qt = triangle(2 * k + 8)
        phys = m.map_points(qt.points)
        vx, vy = _vector_values(v, phys)
        vv = np.stack([vx, vy], axis=-1)  # (nc, nq, 2)
        pull = m.detJ[:, None, None] * np.einsum("cij,cqj->cqi", m.invJ, vv)
        tv, _, _ = monomials(qt.points, k - 1)
        cols = []
        for mm in range(tv.shape[1]):
            for comp in (0, 1):
                cols.append((pull[:, :, comp] * (qt.weights * tv[:, mm])).sum(1))
        nf = 3 * (k + 1)
        coeffs[space.cell_dofs[:, nf:]] = np.stack(cols, axis=1)
    return coeffs


def _vector_values(v, x):
    out = v(x[..., 0], x[..., 1])
    vx, vy = (np.broadcast_to(np.asarray(c, dtype=float), x.shape[:-1]) for c in out)
    return vx, vy


def interpolate_nodal(space: FESpace, f):
    """Nodal interpolant for Lagrange-type spaces; ``f`` may be vector valued."""
    if space.kind is SpaceKind.RT:
        return interpolate_rt(space, f)
    X = space.node_coords
    coeffs = np.zeros(space.n_dofs)
    if space.kind is SpaceKind.VECTOR_DISC:
        vx, vy = _vector_values(f, X)
        vals = np.concatenate([vx, vy], axis=1)
    else:
        vals = np.broadcast_to(np.asarray(f(X[..., 0], X[..., 1]), dtype=float), X.shape[:-1])
    coeffs[space.cell_dofs] = vals
    return coeffs


def project_l2(space: FESpace, f, quad_extra=4):
    """L2-orthogonal projection of a callable, constant, or FEFunction."""
    m = space.mesh
    q = triangle(2 * space.degree + quad_extra)
    t = space.tabulate(q.points, derivatives=False)
    w = q.weights[None, :] * m.detJ[:, None]
    fv = evaluate_field(f, m, q.points)
    if space.is_vector:
        if not isinstance(f, FEFunction) and callable(f):
            phys = m.map_points(q.points)
            vx, vy = _vector_values(f, phys)
            fv = np.stack([vx, vy], axis=-1)
        fv = np.broadcast_to(fv, t.val.shape[:2] + (2,))
        rhs_loc = np.einsum("cq,cqbi,cqi->cb", w, t.val, fv)
        mass_loc = np.einsum("cq,cqai,cqbi->cab", w, t.val, t.val)
    else:
        fv = np.broadcast_to(fv, t.val.shape[:2])
        rhs_loc = np.einsum("cq,cqb,cq->cb", w, t.val, fv)
        mass_loc = np.einsum("cq,cqa,cqb->cab", w, t.val, t.val)
    if space.kind in (SpaceKind.DISC, SpaceKind.VECTOR_DISC):
        loc = np.linalg.solve(mass_loc, rhs_loc[..., None])[..., 0]
        coeffs = np.zeros(space.n_dofs)
        coeffs[space.cell_dofs] = loc
        return coeffs
    M = scatter(mass_loc, space.cell_dofs, space.cell_dofs, space.n_dofs, space.n_dofs)
    b = scatter_vector(rhs_loc, space.cell_dofs, space.n_dofs)
    return spsolve(M.tocsc(), b)


def divergence_projection(u: FEFunction, Q: FESpace):
    """Coefficients of P_h(div u) in the discontinuous pressure space ``Q``."""
    return project_l2(Q, _DivField(u))


class _DivField(FEFunction):
    def __init__(self, u):
        super().__init__(u.space, u.coeffs)

    def evaluate(self, ref_pts, cells=None, what="val"):
        return super().evaluate(ref_pts, cells, what="div")


# ------------------------------------------------------------ field evaluation
def scalar_values(field, mesh, ref_pts, cells=None, phys=None):
    """Scalar field (callable, constant, FEFunction) at mapped points -> (n, nq)."""
    if isinstance(field, FEFunction):
        return field.evaluate(ref_pts, cells)
    if phys is None:
        phys = mesh.map_points(np.asarray(ref_pts), cells)
    if callable(field):
        out = field(phys[..., 0], phys[..., 1])
    else:
        out = field
    return np.broadcast_to(np.asarray(out, dtype=float), phys.shape[:-1])


def vector_values(field, mesh, ref_pts, cells=None, phys=None):
    """Vector field at mapped points -> (n, nq, 2).

    Callables return a pair ``(fx, fy)``; constants are length-2 sequences.
    """
    if isinstance(field, FEFunction):
        return field.evaluate(ref_pts, cells)
    if phys is None:
        phys = mesh.map_points(np.asarray(ref_pts), cells)
    out = field(phys[..., 0], phys[..., 1]) if callable(field) else field
    fx, fy = (np.broadcast_to(np.asarray(c, dtype=float), phys.shape[:-1]) for c in out)
    return np.stack([fx, fy], axis=-1)


@dataclass
class FacetQuadrature:
    """Gauss points on a subset of facets, with the data of both sides."""
    facets: np.ndarray
    s: np.ndarray  # (nq,) parameters on [0, 1]
    weights: np.ndarray  # (nF, nq), includes facet length
    phys: np.ndarray  # (nF, nq, 2) side-0 physical points
    normals: np.ndarray  # (nF, 2) global normal (outward for side 0)
    cells: tuple  # side-0 and side-1 cell indices
    ref: tuple  # side-0 and side-1 reference points (nF, nq, 2)

    @property
    def two_sided(self):
        return bool(len(self.facets)) and bool(np.all(self.cells[1] >= 0))


def facet_quadrature(mesh, facets, degree):
    facets = np.asarray(facets, dtype=int)
    q = gauss_line(degree)
    c0 = mesh.facet_cells[facets, 0]
    c1 = mesh.facet_cells[facets, 1]
    r0 = mesh.facet_reference_points(q.points, 0)[facets]
    r1 = mesh.facet_reference_points(q.points, 1)[facets]
    w = q.weights[None, :] * mesh.facet_lengths[facets, None]
    return FacetQuadrature(facets, q.points, w, mesh.facet_points(q.points)[facets],
                           mesh.facet_normals[facets], (c0, c1), (r0, r1))
