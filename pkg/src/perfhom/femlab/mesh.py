"""Conforming triangulations of the perforated unit square.

Every cell ``eps([0,1]^2 + i)`` is meshed from one template: an m-gon with
its vertices on the hole circle, geometrically graded rings along rays to a
square frame, then layers of trapezoids out to the cell boundary.  The trace
on each cell side is ``m/4`` equal segments, so neighbouring cells share
their boundary nodes exactly.  The filled variant keeps every node of the
perforated mesh and appends one center node and a fan per hole.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..corrector import Lattice
from ..regime import GeometryError, PerforationParams

__all__ = [
    "OUTER",
    "TilingError",
    "TriMesh",
    "PerforatedMesh",
    "template_size",
    "build_mesh",
    "build_mesh_radius",
    "cells_per_side",
    "polygon_sides",
    "structured_square",
    "mesh_audit",
    "MeshAudit",
    "write_mesh",
    "read_mesh",
]

OUTER = -1  # boundary tag of the Dirichlet boundary; holes are tagged by cell number


class TilingError(GeometryError):
    """The cell size does not tile the unit square."""


@dataclass
class TriMesh:
    """Plain triangulation with tagged boundary edges.

    ``kind`` is ``"perforated"``, ``"filled"`` or ``"plain"``.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    cell_of_triangle: Optional[np.ndarray] = None
    kind: str = "plain"
    eps: Optional[float] = None
    hole_radius: float = 0.0
    centers: Optional[np.ndarray] = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        a = p[:, 1] - p[:, 0]
        b = p[:, 2] - p[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def area(self) -> float:
        return float(np.sum(self.signed_areas()))

    def dirichlet_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges[self.boundary_tags == OUTER])

    def hole_edges(self) -> np.ndarray:
        return self.boundary_edges[self.boundary_tags >= 0]

    def hole_nodes(self) -> np.ndarray:
        return np.unique(self.hole_edges())


@dataclass
class PerforatedMesh(TriMesh):
    """Perforated triangulation plus the data of its hole-filled twin."""

    fill_nodes: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    fill_triangles: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=int))
    fill_cells: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    polygon_sides: int = 0

    def filled(self) -> TriMesh:
        """The hole-filled variant; its first ``n_nodes`` nodes are this mesh's nodes."""
        keep = self.boundary_tags == OUTER
        cells = None
        if self.cell_of_triangle is not None:
            cells = np.concatenate([self.cell_of_triangle, self.fill_cells])
        return TriMesh(
            nodes=np.vstack([self.nodes, self.fill_nodes]),
            triangles=np.vstack([self.triangles, self.fill_triangles]),
            boundary_edges=self.boundary_edges[keep],
            boundary_tags=self.boundary_tags[keep],
            cell_of_triangle=cells,
            kind="filled",
            eps=self.eps,
            hole_radius=self.hole_radius,
            centers=self.centers,
        )


def _frame_units(q: int) -> np.ndarray:
    """``4q`` points on the square of half-width one, counter-clockwise from (1, -1)."""
    t = -1.0 + 2.0 * np.arange(q) / q
    sides = [
        np.stack([np.ones(q), t], axis=1),
        np.stack([-t, np.ones(q)], axis=1),
        np.stack([-np.ones(q), -t], axis=1),
        np.stack([t, -np.ones(q)], axis=1),
    ]
    return np.vstack(sides)


def template_size(eps: float, d: float, m: int):
    """Frame half-width, inner ring count and outer layer count of the cell template."""
    # counts are fixed on the coarsest template and scaled with m, so every
    # refinement halves all element diameters
    scale = m // 16
    frame = 0.5 * (d + eps / 2)
    inner = max(1, math.ceil(math.log(frame / d) / math.log(1 + 2 * math.pi / 16)))
    spacing = (frame + eps / 2) / 4
    outer = max(1, math.ceil((eps / 2 - frame) / spacing))
    return frame, inner * scale, outer * scale


def _template(eps: float, d: float, m: int):
    """Local node offsets and triangles of one cell.

    Node ``j*m + k`` sits on ring ``j`` along ray ``k``; ring 0 is the hole
    polygon and the last ring is the cell boundary.
    """
    q = m // 4
    frame, inner, outer = template_size(eps, d, m)
    sigma = _frame_units(q)
    norm = np.linalg.norm(sigma, axis=1)
    rays = sigma / norm[:, None]
    rings = []
    for j in range(inner):
        r = d * (frame * norm / d) ** (j / inner)
        rings.append(rays * r[:, None])
    for j in range(outer + 1):
        rings.append(sigma * (frame + (eps / 2 - frame) * j / outer))
    pts = np.vstack(rings)
    n_rings = len(rings)
    tris = []
    k = np.arange(m)
    k1 = (k + 1) % m
    for j in range(n_rings - 1):
        a, b = j * m + k, j * m + k1
        c, e = (j + 1) * m + k1, (j + 1) * m + k
        # split every quad along its shorter diagonal
        ac = np.linalg.norm(pts[a] - pts[c], axis=1)
        be = np.linalg.norm(pts[b] - pts[e], axis=1)
        use_ac = ac <= be
        t1 = np.where(use_ac[:, None], np.stack([a, e, c], 1), np.stack([a, e, b], 1))
        t2 = np.where(use_ac[:, None], np.stack([a, c, b], 1), np.stack([b, e, c], 1))
        tris += [t1, t2]
    return pts, np.vstack(tris), n_rings, sigma


def _orient(nodes, tris):
    p = nodes[tris]
    a = p[:, 1] - p[:, 0]
    b = p[:, 2] - p[:, 0]
    area = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    flip = area < 0
    tris = tris.copy()
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _fill_holes(centers, rays, d, ring0, offset, m):
    """Nodes and triangles covering every hole disk.

    Rings at radii ``d (J - j)/J`` keep the radial size proportional to the
    tangential one on the hole polygon; the innermost ring is closed by a fan.
    Returns ``(nodes, triangles, triangles per hole)``.
    """
    J = 3 * (m // 16)
    n_cells = len(centers)
    radii = d * (J - np.arange(1, J)) / J
    ring_xy = centers[:, None, None, :] + radii[None, :, None, None] * rays[None, None, :, :]
    per_cell = (J - 1) * m + 1
    xy = np.concatenate([ring_xy.reshape(n_cells, -1, 2), centers[:, None, :]], axis=1)
    ids = offset + np.arange(n_cells)[:, None] * per_cell + np.arange(per_cell)[None, :]
    rings = [ring0] + [ids[:, j * m:(j + 1) * m] for j in range(J - 1)]
    k = np.arange(m)
    k1 = (k + 1) % m
    tris = []
    for outer, inner in zip(rings[:-1], rings[1:]):
        tris.append(np.stack([outer[:, k], inner[:, k], inner[:, k1]], axis=2))
        tris.append(np.stack([outer[:, k], inner[:, k1], outer[:, k1]], axis=2))
    center = ids[:, -1:]
    last = rings[-1]
    tris.append(np.stack([np.repeat(center, m, axis=1), last[:, k], last[:, k1]], axis=2))
    tris = np.concatenate(tris, axis=1)
    return xy.reshape(-1, 2), tris.reshape(-1, 3), tris.shape[1]


def cells_per_side(eps: float) -> int:
    k = round(1.0 / eps)
    if k < 1 or abs(k * eps - 1.0) > 1e-9:
        raise TilingError(f"1/eps = {1.0 / eps!r} is not an integer")
    return k


def polygon_sides(refinement: int) -> int:
    """Hole polygon sides; doubles with every refinement so the mesh size halves."""
    if refinement < 0 or int(refinement) != refinement:
        raise GeometryError("refinement must be a non-negative integer")
    return 16 * 2 ** int(refinement)


def build_mesh(params: PerforationParams, eps: float, refinement: int = 0) -> PerforatedMesh:
    """Perforated unit square with one hole of radius ``d(eps)`` per cell."""
    if params.n != 2:
        raise GeometryError("the finite element meshes are two-dimensional")
    return build_mesh_radius(params.d(eps), eps, refinement)


def build_mesh_radius(d: float, eps: float, refinement: int = 0) -> PerforatedMesh:
    """As :func:`build_mesh` with the hole radius given directly."""
    k = cells_per_side(eps)
    eps = 1.0 / k
    if not 0 < d < eps / 4:
        raise GeometryError(f"hole radius {d!r} must lie in (0, eps/4) = (0, {eps / 4!r})")
    m = polygon_sides(refinement)
    q = m // 4
    local, ltris, n_rings, sigma = _template(eps, d, m)
    lattice = Lattice.unit_square_tiling(eps)
    cell_idx = lattice.index_set  # (C, 2), row-major in (i0, i1)
    centers = lattice.center(cell_idx)
    n_cells = len(cell_idx)

    # shared trace nodes on the grid of spacing eps/q
    trace_int = np.rint(sigma * (q / 2)).astype(np.int64)  # local offset in units of eps/q
    base = (cell_idx * q + q // 2).astype(np.int64)  # cell center in the same units
    keys = base[:, None, :] + trace_int[None, :, :]  # (C, m, 2)
    width = k * q + 1
    flat = keys[..., 0] * width + keys[..., 1]
    uniq, inv = np.unique(flat.ravel(), return_inverse=True)
    inv = inv.reshape(n_cells, m)
    shared_xy = np.stack([uniq // width, uniq % width], axis=1) / (k * q)
    n_shared = len(uniq)

    # interior nodes of every cell (rings 0 .. n_rings-2)
    n_local = (n_rings - 1) * m
    interior = centers[:, None, :] + local[None, :n_local, :]
    # hole polygon: exactly on the circle
    rays = sigma / np.linalg.norm(sigma, axis=1)[:, None]
    interior[:, :m, :] = centers[:, None, :] + d * rays[None, :, :]
    nodes = np.vstack([shared_xy, interior.reshape(-1, 2)])

    gid = np.empty((n_cells, n_rings * m), dtype=np.int64)
    gid[:, :n_local] = n_shared + np.arange(n_cells)[:, None] * n_local + np.arange(n_local)[None, :]
    gid[:, n_local:] = inv
    triangles = gid[:, ltris].reshape(-1, 3)
    triangles = _orient(nodes, triangles)
    cell_of_triangle = np.repeat(np.arange(n_cells), len(ltris))

    # boundary: hole polygons, then the outer square
    kk = np.arange(m)
    hole_edges = np.stack([gid[:, (kk + 1) % m], gid[:, kk]], axis=2).reshape(-1, 2)
    hole_tags = np.repeat(np.arange(n_cells), m)
    # cell-boundary edges whose ends share a coordinate on the outer square
    ka, kb = keys, np.roll(keys, -1, axis=1)
    wall = (ka == kb) & ((ka == 0) | (ka == k * q))
    sel = np.any(wall, axis=2).ravel()
    last = gid[:, n_local:]
    outer_edges = np.stack([last.ravel()[sel], np.roll(last, -1, axis=1).ravel()[sel]], axis=1)
    boundary_edges = np.vstack([hole_edges, outer_edges])
    boundary_tags = np.concatenate([hole_tags, np.full(len(outer_edges), OUTER)])

    # filled twin: concentric rings inside each hole closed by a center fan
    fill_xy, fill_tris, n_fill = _fill_holes(centers, rays, d, gid[:, :m], len(nodes), m)
    fill_tris = _orient(np.vstack([nodes, fill_xy]), fill_tris)

    return PerforatedMesh(
        nodes=nodes,
        triangles=triangles,
        boundary_edges=boundary_edges,
        boundary_tags=boundary_tags,
        cell_of_triangle=cell_of_triangle,
        kind="perforated",
        eps=eps,
        hole_radius=d,
        centers=centers,
        fill_nodes=fill_xy,
        fill_triangles=fill_tris,
        fill_cells=np.repeat(np.arange(n_cells), n_fill),
        polygon_sides=m,
    )


def structured_square(side: float = 1.0, divisions: int = 16) -> TriMesh:
    """Uniform right-triangle mesh of ``[0, side]^2``; boundary tagged OUTER."""
    n = int(divisions)
    if n < 1:
        raise GeometryError("need at least one division")
    t = np.linspace(0.0, side, n + 1)
    X, Y = np.meshgrid(t, t, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, e = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    tris = np.vstack([np.stack([a, b, c], 1), np.stack([a, c, e], 1)])
    ring = np.concatenate([idx[:, 0], idx[-1, 1:], idx[-2::-1, -1], idx[0, -2:0:-1]])
    edges = np.stack([ring, np.roll(ring, -1)], axis=1)
    return TriMesh(nodes, tris, edges, np.full(len(edges), OUTER), kind="plain")


@dataclass
class MeshAudit:
    n_nodes: int
    n_edges: int
    n_triangles: int
    euler: int
    expected_euler: int
    min_area: float
    non_manifold_edges: int
    boundary_mismatch: int
    unused_nodes: int
    max_hole_radius_error: float

    @property
    def ok(self) -> bool:
        return (
            self.min_area > 0
            and self.euler == self.expected_euler
            and self.non_manifold_edges == 0
            and self.boundary_mismatch == 0
            and self.unused_nodes == 0
        )


def _edge_keys(edges, n):
    e = np.sort(edges, axis=1)
    return e[:, 0] * n + e[:, 1]


def mesh_audit(mesh: TriMesh) -> MeshAudit:
    """Combinatorial and geometric checks of a triangulation.

    Edges used by one triangle must be exactly the tagged boundary edges; no
    edge may be shared by three triangles; ``V - E + F = 1 - holes``.
    """
    n = mesh.n_nodes
    t = mesh.triangles
    all_edges = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    keys, counts = np.unique(_edge_keys(all_edges, n), return_counts=True)
    single = keys[counts == 1]
    bkeys = np.unique(_edge_keys(mesh.boundary_edges, n))
    mismatch = len(np.setxor1d(single, bkeys))
    n_holes = len(np.unique(mesh.boundary_tags[mesh.boundary_tags >= 0]))
    used = np.zeros(n, dtype=bool)
    used[t.ravel()] = True
    rad_err = 0.0
    if n_holes and mesh.centers is not None:
        he = mesh.boundary_edges[mesh.boundary_tags >= 0]
        tags = mesh.boundary_tags[mesh.boundary_tags >= 0]
        r = np.linalg.norm(mesh.nodes[he[:, 0]] - mesh.centers[tags], axis=1)
        rad_err = float(np.max(np.abs(r - mesh.hole_radius)))
    return MeshAudit(
        n_nodes=n,
        n_edges=len(keys),
        n_triangles=len(t),
        euler=n - len(keys) + len(t),
        expected_euler=1 - n_holes,
        min_area=float(np.min(mesh.signed_areas())),
        non_manifold_edges=int(np.sum(counts > 2)),
        boundary_mismatch=int(mismatch),
        unused_nodes=int(np.sum(~used)),
        max_hole_radius_error=rad_err,
    )


def write_mesh(mesh: TriMesh, path) -> None:
    """Plain-text export: counts, ``x y`` lines, ``i j k`` lines, ``i j tag`` lines."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_nodes} {mesh.n_triangles} {len(mesh.boundary_edges)}\n")
        for x, y in mesh.nodes:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            fh.write(f"{i} {j} {tag}\n")


def read_mesh(path) -> TriMesh:
    """Inverse of :func:`write_mesh` (returns a plain :class:`TriMesh`)."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise GeometryError("mesh header must hold three counts")
        nv, nt, nb = (int(v) for v in header)
        rows = fh.read().split("\n")
    rows = [r for r in rows if r.strip()]
    if len(rows) != nv + nt + nb:
        raise GeometryError("mesh file length does not match its header")
    nodes = np.array([[float(v) for v in r.split()] for r in rows[:nv]]).reshape(nv, 2)
    tris = np.array([[int(v) for v in r.split()] for r in rows[nv:nv + nt]], dtype=int).reshape(nt, 3)
    bnd = np.array([[int(v) for v in r.split()] for r in rows[nv + nt:]], dtype=int).reshape(nb, 3)
    holes = np.any(bnd[:, 2] >= 0)
    return TriMesh(nodes, tris, bnd[:, :2], bnd[:, 2], kind="perforated" if holes else "plain")
