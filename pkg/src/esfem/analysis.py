"""Lifted error norms, space-time norms, EOCs and geometric diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .assembly import assemble_matrices, compute_geometry, interpolate_nodal
from .exceptions import EocError
from .geometry import ManufacturedProblem
from .mesh import HighOrderMesh
from .refelem import QuadratureRule, dunavant_rule, gauss_rule


@dataclass(frozen=True)
class ErrorRecord:
    level: int
    dof: int
    h: float
    tau: float
    err_LinfL2: float
    err_L2H1: float


def error_norms(mesh: HighOrderMesh, alpha, problem: ManufacturedProblem, t: float | None = None, rule: QuadratureRule | None = None):
    """(L2 error, H1 seminorm error) of U_h against u at the lifted quadrature points.

    Integration uses the discrete surface measure; the exact values and
    tangential gradient are taken at closest points on Gamma(t).
    """
    geom = compute_geometry(mesh, t, rule)
    alpha = np.asarray(alpha, dtype=np.float64)
    local = alpha[mesh.elements]  # (ne, nloc)
    uh = local @ geom.tab.values.T  # (ne, nq)
    grad_uh = np.einsum("el,eqld->eqd", local, geom.tgrad)
    p = geometry.closest_point(mesh.surface, geom.x, mesh.time)
    u, grad_u = geometry.exact_solution_eval(problem, p, mesh.time)
    wm = geom.weighted_measure
    l2 = math.sqrt(float(np.sum(wm * (uh - u) ** 2)))
    h1 = math.sqrt(float(np.sum(wm * np.sum((grad_uh - grad_u) ** 2, axis=-1))))
    return l2, h1


def nodal_error_norms(mesh: HighOrderMesh, alpha, problem: ManufacturedProblem, t: float | None = None, rule: QuadratureRule | None = None, matrices=None):
    """(||e||_M, ||e||_A) for the nodal error e = alpha - (u(a_j(t), t))_j.

    Measures the distance to the interpolant of u rather than to u itself.
    ``matrices`` may pass pre-assembled (M, A) at time t.
    """
    if t is not None:
        mesh.advance(t)
    M, A = assemble_matrices(mesh, rule=rule) if matrices is None else matrices
    e = np.asarray(alpha, dtype=np.float64) - interpolate_nodal(mesh, problem.exact_u)
    return math.sqrt(max(float(e @ (M @ e)), 0.0)), math.sqrt(max(float(e @ (A @ e)), 0.0))


NORMS = {"lifted": error_norms, "nodal": nodal_error_norms}


class ErrorAccumulator:
    """Running max of L2 errors and tau-weighted sum of squared H1 errors over n >= 1."""

    def __init__(self, mesh: HighOrderMesh, problem: ManufacturedProblem, norm: str = "lifted", rule: QuadratureRule | None = None):
        if norm not in NORMS:
            raise ValueError(f"unknown norm {norm!r}; choose from {sorted(NORMS)}")
        self.mesh = mesh
        self.problem = problem
        self.norm = NORMS[norm]
        self.rule = rule
        self.times: list[float] = []
        self.linf_l2 = 0.0
        self.sum_h1_sq = 0.0
        self.final = (0.0, 0.0)

    def __call__(self, t: float, alpha) -> None:
        self.times.append(t)
        if len(self.times) == 1:
            return
        l2, h1 = self.norm(self.mesh, alpha, self.problem, t, self.rule)
        self.linf_l2 = max(self.linf_l2, l2)
        self.sum_h1_sq += h1 * h1
        self.final = (l2, h1)

    @property
    def tau(self) -> float:
        return self.times[1] - self.times[0] if len(self.times) > 1 else 0.0

    def result(self) -> tuple[float, float]:
        return self.linf_l2, math.sqrt(self.tau * self.sum_h1_sq)


def composite_norms(trajectory, mesh: HighOrderMesh, problem: ManufacturedProblem, rule: QuadratureRule | None = None, norm: str = "lifted"):
    """max_{n>=1} ||e_n||_L2 and (tau sum_{n>=1} ||grad e_n||^2)^(1/2); n = 0 is excluded."""
    acc = ErrorAccumulator(mesh, problem, norm, rule)
    for t, alpha in trajectory:
        acc(t, alpha)
    return acc.result()


def eoc(errors, widths=None) -> list[float]:
    """ln(e_{k-1} / e_k) / ln 2 for consecutive factor-2 refinements.

    With ``widths`` the denominator becomes ln(h_{k-1} / h_k) instead.
    """
    errors = [float(e) for e in errors]
    if any(not e > 0.0 for e in errors):
        raise EocError("EOC undefined for non-positive errors")
    if widths is None:
        ratios = [2.0] * (len(errors) - 1)
    else:
        ratios = [a / b for a, b in zip(widths, widths[1:])]
    return [math.log(prev / cur) / math.log(r) for prev, cur, r in zip(errors, errors[1:], ratios)]


def diagnostic_rule(dim: int) -> QuadratureRule:
    """Sampling rule for geometric diagnostics (contains the element barycentre)."""
    return dunavant_rule(5) if dim == 2 else gauss_rule(5)


def geometric_diagnostics(mesh: HighOrderMesh, t: float | None = None, rule: QuadratureRule | None = None):
    """(max |d| over sample points, |area(Gamma_h) - area(Gamma)| or None)."""
    rule = diagnostic_rule(mesh.dim) if rule is None else rule
    geom = compute_geometry(mesh, t, rule)
    d = geometry.signed_distance(mesh.surface, geom.x, mesh.time)
    exact = mesh.surface.exact_area
    area_error = None
    if exact is not None:
        area_error = abs(float(geom.weighted_measure.sum()) - exact)
    return float(np.abs(d).max()), area_error
