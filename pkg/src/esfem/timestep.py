"""BDF-p time stepping for d/dt(M(t) alpha) + A(t) alpha = b(t)."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from . import assembly
from .exceptions import SolverError
from .geometry import ManufacturedProblem
from .mesh import HighOrderMesh

MAX_ORDER = 5
DEFAULT_RTOL = 1e-10


def bdf_coefficients_exact(p: int) -> list[Fraction]:
    """delta_0..delta_p from delta(z) = sum_{l=1}^p (1 - z)^l / l, as fractions."""
    if not 1 <= p <= MAX_ORDER:
        raise ValueError(f"BDF order must be in 1..{MAX_ORDER}, got {p}")
    coeffs = [Fraction(0)] * (p + 1)
    for ell in range(1, p + 1):
        for j in range(ell + 1):
            coeffs[j] += Fraction((-1) ** j * math.comb(ell, j), ell)
    return coeffs


def bdf_coefficients(p: int) -> np.ndarray:
    return np.array([float(c) for c in bdf_coefficients_exact(p)])


def solve_spd(matrix, rhs, rel_tol: float = DEFAULT_RTOL, x0=None, max_iter: int | None = None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients.

    Stops once ||matrix x - rhs|| <= rel_tol ||rhs||; raises SolverError after
    10 N iterations or on a breakdown that signals an indefinite matrix.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    A = sp.csr_matrix(matrix) if not sp.issparse(matrix) else matrix.tocsr()
    b = np.asarray(rhs, dtype=np.float64)
    n = b.shape[0]
    max_iter = 10 * n if max_iter is None else max_iter
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise SolverError("matrix is not SPD (non-positive diagonal)", float("nan"), 0)
    inv_diag = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - A @ x
    rnorm = np.linalg.norm(r)
    if rnorm <= rel_tol * bnorm:
        return x
    z = inv_diag * r
    d = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ad = A @ d
        dAd = d @ Ad
        if not dAd > 0.0:
            raise SolverError("CG breakdown: matrix is not SPD", rnorm / bnorm, it)
        step = rz / dAd
        x += step * d
        r -= step * Ad
        rnorm = np.linalg.norm(r)
        if rnorm <= rel_tol * bnorm:
            # guard against drift of the recursive residual
            true = np.linalg.norm(b - A @ x)
            if true <= rel_tol * bnorm:
                return x
            r = b - A @ x
        z = inv_diag * r
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise SolverError("CG did not converge", rnorm / bnorm, max_iter)


@dataclass
class BdfState:
    """Step size, order and the last p triples (t_j, alpha_j, M(t_j) alpha_j).

    ``n`` is the index of the newest history entry; times are t0 + j tau.
    """

    order: int
    tau: float
    t0: float = 0.0
    history: deque = field(default_factory=deque)
    n: int = -1
    rel_tol: float = DEFAULT_RTOL

    def __post_init__(self):
        self.coefficients = bdf_coefficients(self.order)
        self.history = deque(self.history, maxlen=self.order)

    def time(self, j: int) -> float:
        return self.t0 + j * self.tau

    def push(self, alpha: np.ndarray, m_alpha: np.ndarray) -> None:
        self.n += 1
        self.history.append((self.time(self.n), alpha, m_alpha))

    @property
    def ready(self) -> bool:
        return len(self.history) == self.order

    @property
    def next_time(self) -> float:
        return self.time(self.n + 1)


def bdf_advance(state: BdfState, M, A, b=None) -> np.ndarray:
    """One BDF step given the matrices (and load) at t_n.

    Solves (delta_0 M_n + tau A_n) alpha_n = tau b_n - sum_j delta_j M_{n-j} alpha_{n-j}.
    """
    if not state.ready:
        raise ValueError(f"BDF{state.order} needs {state.order} starting values, have {len(state.history)}")
    delta = state.coefficients
    tau = state.tau
    rhs = np.zeros(M.shape[0])
    # history[-1] is n-1, history[0] is n-p
    for j in range(1, state.order + 1):
        rhs -= delta[j] * state.history[-j][2]
    if b is not None:
        rhs += tau * b
    system = delta[0] * M + tau * A
    alpha = solve_spd(system, rhs, state.rel_tol, x0=state.history[-1][1])
    state.push(alpha, M @ alpha)
    return alpha


def bdf_step(state: BdfState, mesh: HighOrderMesh, problem: ManufacturedProblem, rule=None) -> np.ndarray:
    """Advance the mesh to t_n, assemble M, A, b there and take one BDF step."""
    t_n = state.next_time
    M, A, b = assembly.assemble_system(mesh, problem, t_n, rule)
    return bdf_advance(state, M, A, b)


def step_count(tau: float, end_time: float) -> int:
    n = int(round(end_time / tau))
    if abs(n * tau - end_time) > 1e-9 * max(1.0, end_time):
        raise ValueError(f"end time {end_time} is not an integer multiple of tau={tau}")
    return n


def run_simulation(mesh: HighOrderMesh, problem: ManufacturedProblem, p: int, tau: float, end_time: float, rule=None, rel_tol: float = DEFAULT_RTOL, observer=None, keep: bool = True):
    """Trajectory [(t_n, alpha_n)] for n = 0..N.

    The first p values are nodal interpolants of the exact solution.
    ``observer(t_n, alpha_n)`` is called with the mesh sitting at t_n; with
    ``keep=False`` only the last entry is retained.
    """
    n_steps = step_count(tau, end_time)
    state = BdfState(p, tau, rel_tol=rel_tol)
    trajectory = []
    for n in range(min(p, n_steps + 1)):
        t = state.time(n)
        mesh.advance(t)
        alpha = assembly.interpolate_nodal(mesh, problem.exact_u)
        M = assembly.assemble_mass(mesh, rule=rule)
        state.push(alpha, M @ alpha)
        _record(trajectory, t, alpha, observer, keep)
    for n in range(p, n_steps + 1):
        alpha = bdf_step(state, mesh, problem, rule)
        _record(trajectory, state.time(n), alpha, observer, keep)
    return trajectory


def _record(trajectory, t, alpha, observer, keep):
    if observer is not None:
        observer(t, alpha)
    if not keep:
        trajectory.clear()
    trajectory.append((t, alpha))
