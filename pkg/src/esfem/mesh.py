"""Interpolating degree-k surface meshes whose nodes ride the exact flow."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry
from .exceptions import DegenerateElementError, GeometryError
from .geometry import LevelSetSurface
from .kernels import DEGENERACY_TOL
from .refelem import lagrange_nodes, reference_element

NODE_ON_SURFACE_TOL = 1e-12


@dataclass(eq=False)
class HighOrderMesh:
    """Degree-k Lagrange surface mesh.

    ``elements`` lists global node indices per element, vertices first, then
    edge nodes, then interior nodes, matching :func:`lagrange_nodes`.
    ``nodes`` holds the positions at ``time``; ``nodes0`` those on Gamma(0).
    """

    surface: LevelSetSurface
    degree: int
    nodes0: np.ndarray
    elements: np.ndarray
    time: float = 0.0
    nodes: np.ndarray = field(default=None)

    def __post_init__(self):
        self.nodes0 = np.ascontiguousarray(self.nodes0, dtype=np.float64)
        self.elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        if self.nodes is None:
            self.nodes = geometry.flow_map(self.surface, self.nodes0, self.time) if self.time else self.nodes0.copy()

    @property
    def dim(self) -> int:
        return self.surface.dim

    @property
    def n_nodes(self) -> int:
        return len(self.nodes0)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def vertices(self) -> np.ndarray:
        """Element vertex indices, shape (n_elements, dim+1)."""
        return self.elements[:, : self.dim + 1]

    @property
    def element_coords(self) -> np.ndarray:
        return self.nodes[self.elements]

    def advance(self, t: float) -> np.ndarray:
        """Move every node along the exact flow to time t."""
        if t != self.time:
            self.nodes = geometry.flow_map(self.surface, self.nodes0, t)
            self.time = float(t)
        return self.nodes

    def mesh_width(self) -> float:
        """Maximum element diameter measured between vertices."""
        v = self.nodes[self.vertices]
        diam = 0.0
        n = v.shape[1]
        for i in range(n):
            for j in range(i + 1, n):
                diam = max(diam, float(np.linalg.norm(v[:, i] - v[:, j], axis=1).max()))
        return diam

    def copy(self) -> "HighOrderMesh":
        return HighOrderMesh(self.surface, self.degree, self.nodes0.copy(), self.elements.copy(), self.time, self.nodes.copy())


def _octahedron():
    verts = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    # outward orientation
    faces = np.array(
        [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    )
    return verts, faces


def base_mesh(surface: LevelSetSurface) -> HighOrderMesh:
    """Octahedron (surfaces) or inscribed square (curves) on Gamma(0), degree 1."""
    if surface.dim == 2:
        verts, cells = _octahedron()
    else:
        verts = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=float)
        cells = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    verts = geometry.closest_point(surface, verts, 0.0)
    return HighOrderMesh(surface, 1, verts, cells)


def _edges(cells: np.ndarray, dim: int):
    """Unique undirected edges (sorted pairs) and per-cell edge ids in local order."""
    if dim == 1:
        local = [(0, 1)]
    else:
        local = [(0, 1), (1, 2), (2, 0)]
    pairs = np.stack([cells[:, list(e)] for e in local], axis=1)  # (nc, ne_loc, 2)
    key = np.sort(pairs, axis=2).reshape(-1, 2)
    edges, inverse = np.unique(key, axis=0, return_inverse=True)
    return edges, inverse.reshape(len(cells), len(local)), pairs


def refine(mesh: HighOrderMesh) -> HighOrderMesh:
    """Uniform red refinement; new vertices are projected onto Gamma(0)."""
    if mesh.degree != 1:
        raise ValueError("refine expects a degree-1 mesh; refine first, then promote_order")
    surface = mesh.surface
    verts = mesh.nodes0
    cells = mesh.elements
    edges, cell_edges, _ = _edges(cells, mesh.dim)
    mids = 0.5 * (verts[edges[:, 0]] + verts[edges[:, 1]])
    mids = geometry.closest_point(surface, mids, 0.0)
    nv = len(verts)
    new_verts = np.vstack([verts, mids])
    m = nv + cell_edges
    if mesh.dim == 1:
        a, b = cells[:, 0], cells[:, 1]
        c = m[:, 0]
        new_cells = np.stack([np.stack([a, c], 1), np.stack([c, b], 1)], axis=1).reshape(-1, 2)
    else:
        v0, v1, v2 = cells.T
        m01, m12, m20 = m.T
        new_cells = np.stack(
            [
                np.stack([v0, m01, m20], 1),
                np.stack([m01, v1, m12], 1),
                np.stack([m20, m12, v2], 1),
                np.stack([m01, m12, m20], 1),
            ],
            axis=1,
        ).reshape(-1, 3)
    return HighOrderMesh(surface, 1, new_verts, new_cells)


def promote_order(mesh: HighOrderMesh, k: int, surface: LevelSetSurface | None = None) -> HighOrderMesh:
    """Degree-k interpolating mesh: Lagrange nodes of each flat cell lifted onto Gamma(0)."""
    surface = mesh.surface if surface is None else surface
    if mesh.degree != 1:
        raise ValueError("promote_order expects a degree-1 mesh")
    if k == 1:
        return HighOrderMesh(surface, 1, mesh.nodes0.copy(), mesh.elements.copy())
    dim = mesh.dim
    lattice = lagrange_nodes(dim, k)
    verts = mesh.nodes0
    cells = mesh.elements
    nc = len(cells)
    nv = len(verts)
    edges, cell_edges, pairs = _edges(cells, dim)
    ne = len(edges)
    per_edge = k - 1
    n_local_edges = cell_edges.shape[1]
    n_interior = len(lattice) - (dim + 1) - n_local_edges * per_edge
    if dim == 1:
        # Curve cells own their interior nodes: no shared edge nodes.
        n_local_edges, per_edge, n_interior = 0, 0, k - 1
        ne = 0

    # global numbering: vertices, edge nodes (edge-major, from lower to higher vertex), interior
    edge_base = nv
    interior_base = nv + ne * per_edge
    n_total = interior_base + nc * n_interior

    conn = np.empty((nc, len(lattice)), dtype=np.int64)
    conn[:, : dim + 1] = cells
    for le in range(n_local_edges):
        eid = cell_edges[:, le]
        forward = pairs[:, le, 0] < pairs[:, le, 1]
        for i in range(per_edge):
            pos = np.where(forward, i, per_edge - 1 - i)
            conn[:, dim + 1 + le * per_edge + i] = edge_base + eid * per_edge + pos
    start = dim + 1 + n_local_edges * per_edge
    for i in range(n_interior):
        conn[:, start + i] = interior_base + np.arange(nc) * n_interior + i

    # flat (affine) positions of every local node, then lift
    lam = np.concatenate([1.0 - lattice.sum(axis=1, keepdims=True), lattice], axis=1)
    flat = np.einsum("lv,cvd->cld", lam, verts[cells])
    positions = np.empty((n_total, verts.shape[1]))
    positions[conn.ravel()] = flat.reshape(-1, verts.shape[1])
    positions[:nv] = verts
    positions[nv:] = geometry.closest_point(surface, positions[nv:], 0.0)
    return HighOrderMesh(surface, k, positions, conn)


def build_mesh(surface: LevelSetSurface, refinements: int, degree: int) -> HighOrderMesh:
    mesh = base_mesh(surface)
    for _ in range(refinements):
        mesh = refine(mesh)
    return promote_order(mesh, degree)


def advance_nodes(mesh: HighOrderMesh, t: float) -> np.ndarray:
    return mesh.advance(t)


def element_map(mesh: HighOrderMesh, element: int, xi, t: float | None = None):
    """Point, Jacobian ((m+1) x m) and measure sqrt(det J^T J) at reference point xi."""
    if t is not None:
        mesh.advance(t)
    ref = reference_element(mesh.dim, mesh.degree)
    values, grads = ref.basis_eval(np.reshape(xi, (1, mesh.dim)))
    a = mesh.nodes[mesh.elements[element]]
    x = values[0] @ a
    J = a.T @ grads[0]
    G = J.T @ J
    measure = float(np.sqrt(max(np.linalg.det(G), 0.0)))
    if not measure > DEGENERACY_TOL * np.trace(G) ** (0.5 * mesh.dim):
        raise DegenerateElementError(f"degenerate element {element}")
    return x, J, measure


def check_nodes_on_surface(mesh: HighOrderMesh, tol: float = NODE_ON_SURFACE_TOL) -> float:
    value, _, _ = geometry.levelset_eval(mesh.surface, mesh.nodes, mesh.time)
    worst = float(np.abs(value).max())
    if worst > tol:
        raise GeometryError(f"node off surface by {worst:.2e}")
    return worst


def write_mesh(mesh: HighOrderMesh, path) -> None:
    """Plain-text dump: 'dim k N n_elems', node lines, connectivity lines (0-based)."""
    lines = [f"{mesh.dim} {mesh.degree} {mesh.n_nodes} {mesh.n_elements}"]
    lines += [" ".join(repr(float(c)) for c in row) for row in mesh.nodes]
    lines += [" ".join(str(int(i)) for i in row) for row in mesh.elements]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path, surface: LevelSetSurface) -> HighOrderMesh:
    rows = Path(path).read_text().split("\n")
    dim, degree, n, ne = (int(v) for v in rows[0].split())
    nodes = np.array([[float(v) for v in r.split()] for r in rows[1 : 1 + n]])
    elements = np.array([[int(v) for v in r.split()] for r in rows[1 + n : 1 + n + ne]])
    if dim != surface.dim:
        raise ValueError("mesh dimension does not match surface")
    return HighOrderMesh(surface, degree, nodes, elements)
