"""Assembly of the evolving mass and stiffness matrices and the load vector."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import geometry
from .exceptions import DegenerateElementError
from .geometry import ManufacturedProblem
from .kernels import element_geometry, local_matrices
from .mesh import HighOrderMesh
from .refelem import QuadratureRule, default_rule, reference_element


@dataclass(frozen=True, eq=False)
class Tabulation:
    """Basis values/gradients of a reference element at a rule's points."""

    rule: QuadratureRule
    values: np.ndarray  # (nq, nloc)
    grads: np.ndarray  # (nq, nloc, dim)


@lru_cache(maxsize=None)
def _tabulate(dim: int, degree: int, rule: QuadratureRule) -> Tabulation:
    values, grads = reference_element(dim, degree).basis_eval(rule.points)
    return Tabulation(rule, values, grads)


def tabulation(mesh: HighOrderMesh, rule: QuadratureRule | None = None) -> Tabulation:
    rule = default_rule(mesh.dim, mesh.degree) if rule is None else rule
    return _tabulate(mesh.dim, mesh.degree, rule)


@dataclass(eq=False)
class ElementGeometry:
    """Per-quadrature-point geometry of a mesh at one time."""

    tab: Tabulation
    x: np.ndarray  # (ne, nq, d)
    meas: np.ndarray  # (ne, nq)
    tgrad: np.ndarray  # (ne, nq, nloc, d)

    @property
    def weighted_measure(self) -> np.ndarray:
        return self.meas * self.tab.rule.weights[None, :]


def compute_geometry(mesh: HighOrderMesh, t: float | None = None, rule: QuadratureRule | None = None) -> ElementGeometry:
    if t is not None:
        mesh.advance(t)
    tab = tabulation(mesh, rule)
    x, meas, tgrad, bad = element_geometry(mesh.element_coords, tab.values, tab.grads)
    if bad:
        raise DegenerateElementError("degenerate element: rank-deficient Jacobian")
    return ElementGeometry(tab, x, meas, tgrad)


@dataclass
class _Pattern:
    """CSR structure of a mesh plus maps from element entries and transposes into the data array."""

    elements: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    slot: np.ndarray  # data position of each (e, i, j) local entry
    transpose: np.ndarray  # data position of the (j, i) partner of each stored entry


def _pattern(mesh: HighOrderMesh) -> _Pattern:
    cached = getattr(mesh, "_csr_pattern", None)
    if cached is not None and cached.elements is mesh.elements:
        return cached
    el = mesh.elements
    nloc = el.shape[1]
    n = mesh.n_nodes
    rows = np.repeat(el, nloc, axis=1).ravel()
    cols = np.tile(el, (1, nloc)).ravel()
    key = rows.astype(np.int64) * n + cols
    uniq, slot = np.unique(key, return_inverse=True)
    r, c = np.divmod(uniq, n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(r, minlength=n), out=indptr[1:])
    transpose = np.searchsorted(uniq, c * n + r)
    pattern = _Pattern(el, indptr, c.astype(np.int32), slot.ravel(), transpose)
    mesh._csr_pattern = pattern
    return pattern


def _scatter(mesh: HighOrderMesh, local: np.ndarray) -> sp.csr_matrix:
    """Sum element matrices into a CSR matrix; the result is made exactly symmetric."""
    pat = _pattern(mesh)
    data = np.bincount(pat.slot, weights=local.ravel(), minlength=pat.indices.size)
    data = 0.5 * (data + data[pat.transpose])
    n = mesh.n_nodes
    return sp.csr_matrix((data, pat.indices, pat.indptr), shape=(n, n))


def _scatter_vector(mesh: HighOrderMesh, local: np.ndarray) -> np.ndarray:
    return np.bincount(mesh.elements.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)


def assemble_matrices(mesh: HighOrderMesh, t: float | None = None, rule: QuadratureRule | None = None, geom: ElementGeometry | None = None):
    """Mass and stiffness matrices from a single geometry pass."""
    geom = compute_geometry(mesh, t, rule) if geom is None else geom
    Mloc, Aloc = local_matrices(geom.tab.values, geom.tab.rule.weights, geom.meas, geom.tgrad)
    return _scatter(mesh, Mloc), _scatter(mesh, Aloc)


def assemble_mass(mesh: HighOrderMesh, t: float | None = None, rule: QuadratureRule | None = None) -> sp.csr_matrix:
    return assemble_matrices(mesh, t, rule)[0]


def assemble_stiffness(mesh: HighOrderMesh, t: float | None = None, rule: QuadratureRule | None = None) -> sp.csr_matrix:
    return assemble_matrices(mesh, t, rule)[1]


def assemble_load_from_values(mesh: HighOrderMesh, geom: ElementGeometry, f_values: np.ndarray) -> np.ndarray:
    """b_k = sum over elements and points of w f phi_k meas, given f per point (ne, nq)."""
    local = np.einsum("eq,ql->el", geom.weighted_measure * f_values, geom.tab.values)
    return _scatter_vector(mesh, local)


def assemble_load(mesh: HighOrderMesh, problem: ManufacturedProblem, t: float | None = None, rule: QuadratureRule | None = None, geom: ElementGeometry | None = None) -> np.ndarray:
    """Load vector with f evaluated at the lifts of the quadrature points onto Gamma(t)."""
    geom = compute_geometry(mesh, t, rule) if geom is None else geom
    if problem.amplitude == 0.0:
        return np.zeros(mesh.n_nodes)
    p = geometry.closest_point(mesh.surface, geom.x, mesh.time)
    f = geometry.manufactured_forcing(problem, p, mesh.time)
    return assemble_load_from_values(mesh, geom, f)


def assemble_system(mesh: HighOrderMesh, problem: ManufacturedProblem, t: float, rule: QuadratureRule | None = None):
    """M(t), A(t), b(t) sharing one geometry evaluation."""
    geom = compute_geometry(mesh, t, rule)
    M, A = assemble_matrices(mesh, geom=geom)
    b = assemble_load(mesh, problem, geom=geom)
    return M, A, b


def interpolate_nodal(mesh: HighOrderMesh, g, t: float | None = None) -> np.ndarray:
    """Nodal interpolant: coefficient j is g(a_j(t), t)."""
    if t is not None:
        mesh.advance(t)
    return np.asarray(g(mesh.nodes, mesh.time), dtype=np.float64) * np.ones(mesh.n_nodes)
