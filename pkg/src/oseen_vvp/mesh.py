"""Conforming triangle meshes with oriented facets and boundary tags.

Cells are stored counter-clockwise. Local edge ``i`` of a cell joins its
local vertices ``i+1`` and ``i+2`` (mod 3), i.e. it is the edge opposite
vertex ``i``.

Every facet has a "side 0" cell and, unless it lies on the boundary, a
"side 1" cell with the larger index. The global facet normal is the outward
normal of the side-0 cell and the global parameter runs from
``facets[f, 0]`` to ``facets[f, 1]`` (both side-0 vertices). Periodic facet
pairs are merged into a single facet whose side-1 geometry is the side-0
geometry translated by ``facet_shift[f]``.
"""
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property

import numpy as np


class BoundaryTag(IntEnum):
    INTERIOR = 0
    GAMMA = 1
    SIGMA = 2
    PERIODIC_MASTER = 3
    PERIODIC_SLAVE = 4


class MeshError(ValueError):
    pass


class UntaggedFacet(MeshError):
    pass


class PeriodicMismatch(MeshError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (nv, 2)
    cells: np.ndarray  # (nc, 3), counter-clockwise
    facets: np.ndarray  # (nf, 2) vertex indices, side-0 cell
    facet_cells: np.ndarray  # (nf, 2), -1 on the boundary
    facet_local: np.ndarray  # (nf, 2) local edge index per side, -1 if absent
    facet_tags: np.ndarray  # (nf,) BoundaryTag values
    facet_shift: np.ndarray = None  # (nf, 2) side-1 minus side-0 coordinates
    vertex_class: np.ndarray = None  # (nv,) representative under periodicity
    # (n_pairs, 4): master vertices a, b and matching slave vertices a', b'
    periodic_pairs: np.ndarray = field(default=None)

    def __post_init__(self):
        nf = len(self.facets)
        if self.facet_shift is None:
            object.__setattr__(self, "facet_shift", np.zeros((nf, 2)))
        if self.vertex_class is None:
            object.__setattr__(self, "vertex_class", np.arange(len(self.vertices)))
        if self.periodic_pairs is None:
            object.__setattr__(self, "periodic_pairs", np.zeros((0, 4), dtype=int))
        for name in ("vertices", "cells", "facets", "facet_cells", "facet_local",
                     "facet_tags", "facet_shift", "vertex_class", "periodic_pairs"):
            getattr(self, name).setflags(write=False)

    # ------------------------------------------------------------------ sizes
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_facets(self):
        return len(self.facets)

    @cached_property
    def is_boundary(self):
        return self.facet_cells[:, 1] < 0

    @cached_property
    def interior_facets(self):
        """Facets with two incident cells (periodic pairs included)."""
        return np.flatnonzero(~self.is_boundary)

    def boundary_facets(self, tag=None):
        b = self.is_boundary
        if tag is not None:
            b = b & (self.facet_tags == tag)
        return np.flatnonzero(b)

    # -------------------------------------------------------------- geometry
    @cached_property
    def cell_coords(self):
        return self.vertices[self.cells]  # (nc, 3, 2)

    @cached_property
    def jacobians(self):
        x = self.cell_coords
        return np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]], axis=2)  # (nc, 2, 2)

    @cached_property
    def detJ(self):
        J = self.jacobians
        return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]

    @cached_property
    def invJ(self):
        return np.linalg.inv(self.jacobians)

    @cached_property
    def cell_areas(self):
        return 0.5 * self.detJ

    @cached_property
    def edge_vectors(self):
        """(nc, 3, 2) counter-clockwise tangent of each local edge."""
        x = self.cell_coords
        return np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)

    @cached_property
    def cell_diameters(self):
        return np.linalg.norm(self.edge_vectors, axis=2).max(axis=1)

    @cached_property
    def cell_normals(self):
        """(nc, 3, 2) unit outward normal per local edge."""
        t = self.edge_vectors
        n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    @cached_property
    def facet_lengths(self):
        x = self.vertices[self.facets]
        return np.linalg.norm(x[:, 1] - x[:, 0], axis=1)

    @cached_property
    def facet_midpoints(self):
        return self.vertices[self.facets].mean(axis=1)

    @cached_property
    def facet_normals(self):
        """Global unit normal: outward for the side-0 cell."""
        return self.cell_normals[self.facet_cells[:, 0], self.facet_local[:, 0]]

    @cached_property
    def cell_facets(self):
        cf = np.full((self.n_cells, 3), -1, dtype=int)
        for side in (0, 1):
            ok = self.facet_cells[:, side] >= 0
            f = np.flatnonzero(ok)
            cf[self.facet_cells[f, side], self.facet_local[f, side]] = f
        return cf

    @cached_property
    def cell_facet_sign(self):
        """+1 where the cell outward normal equals the global facet normal."""
        s = np.ones((self.n_cells, 3))
        f = self.interior_facets
        s[self.facet_cells[f, 1], self.facet_local[f, 1]] = -1.0
        return s

    @cached_property
    def facet_flip(self):
        """(nf, 2) True where a side's local edge runs against the global parameter."""
        flip = np.zeros((self.n_facets, 2), dtype=bool)
        start_global = self.vertices[self.facets[:, 0]]
        for side in (0, 1):
            f = np.flatnonzero(self.facet_cells[:, side] >= 0)
            c = self.facet_cells[f, side]
            i = self.facet_local[f, side]
            start_local = self.vertices[self.cells[c, (i + 1) % 3]]
            target = start_global[f] + (self.facet_shift[f] if side else 0.0)
            flip[f, side] = np.linalg.norm(start_local - target, axis=1) > 1e-10 * max(
                1.0, float(np.abs(self.vertices).max()))
        return flip

    @cached_property
    def cell_facet_flip(self):
        cff = np.zeros((self.n_cells, 3), dtype=bool)
        for side in (0, 1):
            f = np.flatnonzero(self.facet_cells[:, side] >= 0)
            cff[self.facet_cells[f, side], self.facet_local[f, side]] = self.facet_flip[f, side]
        return cff

    def facet_points(self, s):
        """Physical points on each facet (side-0 geometry) at parameters ``s``."""
        x = self.vertices[self.facets]
        return x[:, None, 0, :] + np.asarray(s)[None, :, None] * (x[:, None, 1, :] - x[:, None, 0, :])

    def facet_reference_points(self, s, side):
        """Reference coordinates (nf, nq, 2) of facet parameters ``s`` in the side's cell.

        Rows for facets without a cell on ``side`` are left as NaN.
        """
        s = np.asarray(s, dtype=float)
        corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        out = np.full((self.n_facets, len(s), 2), np.nan)
        f = np.flatnonzero(self.facet_cells[:, side] >= 0)
        i = self.facet_local[f, side]
        a = corners[(i + 1) % 3]
        b = corners[(i + 2) % 3]
        t = np.where(self.facet_flip[f, side][:, None], 1.0 - s[None, :], s[None, :])
        out[f] = a[:, None, :] + t[:, :, None] * (b - a)[:, None, :]
        return out

    def map_points(self, ref, cells=None):
        """Map reference points to physical space.

        ``ref`` is (nq, 2) shared by all cells or (n, nq, 2) per cell.
        """
        x0 = self.cell_coords[:, 0] if cells is None else self.cell_coords[cells, 0]
        J = self.jacobians if cells is None else self.jacobians[cells]
        if ref.ndim == 2:
            return x0[:, None, :] + np.einsum("cij,qj->cqi", J, ref)
        return x0[:, None, :] + np.einsum("cij,cqj->cqi", J, ref)

    def locate(self, points):
        """Cell index and reference coordinates of each point (-1 if outside)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        cells = np.full(len(points), -1)
        ref = np.zeros((len(points), 2))
        x0 = self.cell_coords[:, 0]
        for k, p in enumerate(points):
            r = np.einsum("cij,cj->ci", self.invJ, p - x0)
            ok = (r[:, 0] >= -1e-12) & (r[:, 1] >= -1e-12) & (r.sum(axis=1) <= 1 + 1e-12)
            hit = np.flatnonzero(ok)
            if len(hit):
                cells[k] = hit[0]
                ref[k] = r[hit[0]]
        return cells, ref

    # -------------------------------------------------------------- builders
    @classmethod
    def from_cells(cls, vertices, cells):
        """Build facets and adjacency from vertex coordinates and cell triples.

        Clockwise cells are reoriented. All boundary facets start tagged GAMMA.
        """
        vertices = np.array(vertices, dtype=float)
        cells = np.array(cells, dtype=int).copy()
        x = vertices[cells]
        det = (x[:, 1, 0] - x[:, 0, 0]) * (x[:, 2, 1] - x[:, 0, 1]) - (
            x[:, 2, 0] - x[:, 0, 0]) * (x[:, 1, 1] - x[:, 0, 1])
        if np.any(det == 0):
            raise MeshError("degenerate cell")
        cw = det < 0
        cells[cw] = cells[cw][:, [0, 2, 1]]

        nc = len(cells)
        edges = np.stack([cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]], axis=1).reshape(-1, 2)
        key = np.sort(edges, axis=1)
        uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inv = inv.ravel()
        if np.any(counts > 2):
            raise MeshError("non-manifold facet")
        nf = len(uniq)
        owner = np.repeat(np.arange(nc), 3)
        local = np.tile(np.arange(3), nc)
        facet_cells = np.full((nf, 2), -1, dtype=int)
        facet_local = np.full((nf, 2), -1, dtype=int)
        # entries are visited in increasing cell order, so side 0 gets the lower index
        order = np.argsort(inv, kind="stable")
        first = np.ones(len(order), dtype=bool)
        first[1:] = inv[order][1:] != inv[order][:-1]
        f0 = inv[order][first]
        facet_cells[f0, 0] = owner[order][first]
        facet_local[f0, 0] = local[order][first]
        f1 = inv[order][~first]
        facet_cells[f1, 1] = owner[order][~first]
        facet_local[f1, 1] = local[order][~first]
        tags = np.where(facet_cells[:, 1] < 0, BoundaryTag.GAMMA, BoundaryTag.INTERIOR).astype(int)
        return cls(vertices, cells, uniq, facet_cells, facet_local, tags)

    def with_tags(self, tags):
        return Mesh(self.vertices, self.cells, self.facets, self.facet_cells, self.facet_local,
                    np.asarray(tags, dtype=int), self.facet_shift, self.vertex_class,
                    self.periodic_pairs)


# ---------------------------------------------------------------- operations
def generate_structured(nx, ny, rect=((0.0, 0.0), (1.0, 1.0)), diagonal="right", mask=None):
    """Uniform mesh of ``nx`` x ``ny`` rectangles, each split into two triangles.

    ``diagonal="right"`` splits every rectangle along its (x0, y0)-(x1, y1)
    diagonal, ``"left"`` along the other one. ``mask(xc, yc)`` may drop
    rectangles by their centre, which gives staircase polygonal domains.
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be positive")
    (xa, ya), (xb, yb) = rect
    xs = np.linspace(xa, xb, nx + 1)
    ys = np.linspace(ya, yb, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    i, j = i.ravel(), j.ravel()
    if mask is not None:
        keep = np.array([bool(mask(0.5 * (xs[a] + xs[a + 1]), 0.5 * (ys[b] + ys[b + 1])))
                         for a, b in zip(i, j)], dtype=bool)
        i, j = i[keep], j[keep]
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    if diagonal == "right":
        tri = np.stack([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])], axis=1)
    elif diagonal == "left":
        tri = np.stack([np.column_stack([v00, v10, v01]), np.column_stack([v10, v11, v01])], axis=1)
    else:
        raise ValueError(f"unknown diagonal {diagonal!r}")
    cells = tri.reshape(-1, 3)
    if mask is not None:
        used = np.unique(cells)
        remap = -np.ones(len(vertices), dtype=int)
        remap[used] = np.arange(len(used))
        vertices = vertices[used]
        cells = remap[cells]
    return Mesh.from_cells(vertices, cells)


def mesh_size(m: Mesh) -> float:
    return float(m.cell_diameters.max())


def _pred(p, xy):
    return p is not None and bool(p(xy[0], xy[1]))


def tag_boundary(m: Mesh, gamma_pred=None, sigma_pred=None, periodic=None, tol=1e-9):
    """Tag boundary facets by their midpoints and optionally merge periodic pairs.

    ``gamma_pred`` and ``sigma_pred`` are ``(x, y) -> bool``; a missing
    predicate never matches. ``periodic`` is a translation ``t``: a boundary
    facet whose midpoint plus ``t`` is another boundary facet's midpoint
    becomes a master and the other one its slave.
    """
    bnd = m.boundary_facets()
    mids = m.facet_midpoints
    tags = m.facet_tags.copy()
    tags[bnd] = -1

    pairs = []
    if periodic is not None:
        t = np.asarray(periodic, dtype=float)
        scale = max(1.0, float(np.abs(m.vertices).max()))
        keyed = {tuple(np.round(mids[f] / (tol * scale)).astype(np.int64)): f for f in bnd}
        for f in bnd:
            g = keyed.get(tuple(np.round((mids[f] + t) / (tol * scale)).astype(np.int64)))
            if g is not None:
                pairs.append((f, g))
        masters = {f for f, _ in pairs}
        slaves = {g for _, g in pairs}
        if masters & slaves:
            raise PeriodicMismatch("facet is both master and slave")
        if not pairs:
            raise PeriodicMismatch("no periodic facet pairs found")
        for f, g in pairs:
            if abs(m.facet_lengths[f] - m.facet_lengths[g]) > tol * scale:
                raise PeriodicMismatch(f"facets {f} and {g} are not congruent")

    paired = {f for p in pairs for f in p}
    for f in bnd:
        if f in paired:
            continue
        g_hit, s_hit = _pred(gamma_pred, mids[f]), _pred(sigma_pred, mids[f])
        if g_hit and s_hit:
            raise MeshError(f"facet {f} at {mids[f]} matches both Gamma and Sigma")
        if not (g_hit or s_hit):
            raise UntaggedFacet(f"boundary facet {f} at {mids[f]} matches no predicate")
        tags[f] = BoundaryTag.GAMMA if g_hit else BoundaryTag.SIGMA

    if not pairs:
        return m.with_tags(tags)
    return _merge_periodic(m, tags, pairs, np.asarray(periodic, dtype=float))


def _merge_periodic(m, tags, pairs, t):
    facets = m.facets.copy()
    fcells = m.facet_cells.copy()
    flocal = m.facet_local.copy()
    shift = m.facet_shift.copy()
    tags = tags.copy()
    parent = np.arange(m.n_vertices)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    drop = []
    pp = []
    scale = max(1.0, float(np.abs(m.vertices).max()))
    for f, g in pairs:
        cm, lm = fcells[f, 0], flocal[f, 0]
        cs, ls = fcells[g, 0], flocal[g, 0]
        a, b = m.facets[f]
        sa, sb = m.facets[g]
        if np.linalg.norm(m.vertices[sa] - m.vertices[a] - t) > 1e-9 * scale:
            sa, sb = sb, sa
        if np.linalg.norm(m.vertices[sa] - m.vertices[a] - t) > 1e-9 * scale or \
                np.linalg.norm(m.vertices[sb] - m.vertices[b] - t) > 1e-9 * scale:
            raise PeriodicMismatch(f"facets {f} and {g} do not match under {t}")
        for u, v in ((a, sa), (b, sb)):
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[max(ru, rv)] = min(ru, rv)
        pp.append((a, b, sa, sb))
        if cm < cs:
            fcells[f] = (cm, cs)
            flocal[f] = (lm, ls)
            shift[f] = t
        else:
            facets[f] = (min(sa, sb), max(sa, sb))
            fcells[f] = (cs, cm)
            flocal[f] = (ls, lm)
            shift[f] = -t
        tags[f] = BoundaryTag.PERIODIC_MASTER
        drop.append(g)
    keep = np.setdiff1d(np.arange(m.n_facets), drop)
    vclass = np.array([find(a) for a in range(m.n_vertices)])
    return Mesh(m.vertices, m.cells, facets[keep], fcells[keep], flocal[keep], tags[keep],
                shift[keep], vclass, np.array(pp, dtype=int).reshape(-1, 4))


def euler_characteristic(m: Mesh) -> int:
    return m.n_vertices - m.n_facets + m.n_cells


# ------------------------------------------------------------- text format
def write_mesh(m: Mesh, path):
    """Line-oriented text format: header, vertices, cells, boundary facets with tags.

    Periodic pairs are written as a master line (tag 3) followed by its slave (tag 4).
    """
    lines = []
    bnd = [(a, b, int(t)) for (a, b), t, c in zip(m.facets, m.facet_tags, m.facet_cells[:, 1])
           if c < 0]
    for a, b, sa, sb in m.periodic_pairs:
        bnd.append((a, b, int(BoundaryTag.PERIODIC_MASTER)))
        bnd.append((sa, sb, int(BoundaryTag.PERIODIC_SLAVE)))
    lines.append(f"vertices {m.n_vertices}")
    lines.append(f"cells {m.n_cells}")
    lines.append(f"facets {len(bnd)}")
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in m.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in m.cells]
    lines += [f"{a} {b} {t}" for a, b, t in bnd]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    counts = {}
    for r in rows[:3]:
        counts[r[0]] = int(r[1])
    nv, nc, nf = counts["vertices"], counts["cells"], counts["facets"]
    body = rows[3:]
    verts = np.array(body[:nv], dtype=float)
    cells = np.array(body[nv:nv + nc], dtype=int)
    ftab = np.array(body[nv + nc:nv + nc + nf], dtype=int).reshape(-1, 3)
    m = Mesh.from_cells(verts, cells)
    index = {tuple(sorted(f)): k for k, f in enumerate(m.facets.tolist())}
    tags = m.facet_tags.copy()
    tags[m.boundary_facets()] = -1
    masters, slaves = [], []
    for a, b, t in ftab:
        k = index.get((min(a, b), max(a, b)))
        if k is None:
            raise MeshError(f"facet ({a}, {b}) is not an edge of the mesh")
        if t == BoundaryTag.PERIODIC_MASTER:
            masters.append(k)
        elif t == BoundaryTag.PERIODIC_SLAVE:
            slaves.append(k)
        else:
            tags[k] = t
    untagged = np.flatnonzero(tags < 0)
    if len(np.setdiff1d(untagged, masters + slaves)):
        raise UntaggedFacet("boundary facet without tag in mesh file")
    if len(masters) != len(slaves):
        raise PeriodicMismatch("unequal numbers of master and slave facets")
    if not masters:
        return m.with_tags(tags)
    mids = m.facet_midpoints
    shifts = mids[slaves] - mids[masters]
    t = shifts[0]
    if not np.allclose(shifts, t, atol=1e-9):
        raise PeriodicMismatch("periodic pairs do not share one translation")
    return _merge_periodic(m, tags, list(zip(masters, slaves)), t)
