"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Every public function dispatches on :func:`esfem._accel.get_backend`. Both
paths compute the same quantities; they agree to rounding, not bitwise.

Array conventions
-----------------
``coords``  (ne, nloc, d)    element node coordinates
``B``       (nq, nloc)       reference basis values at quadrature points
``D``       (nq, nloc, m)    reference basis gradients
``w``       (nq,)            quadrature weights
"""
from __future__ import annotations

import numpy as np

from ._accel import get_backend, njit

# Relative threshold on sqrt(det(J^T J)) below which an element is degenerate.
DEGENERACY_TOL = 1e-12


# ---------------------------------------------------------------------------
# element geometry
# ---------------------------------------------------------------------------


def _geometry_numpy(coords, B, D):
    x = np.einsum("eld,ql->eqd", coords, B)
    J = np.einsum("eld,qlm->eqdm", coords, D)
    G = np.einsum("eqdm,eqdn->eqmn", J, J)
    m = D.shape[2]
    if m == 1:
        det = G[..., 0, 0]
        trace = det
    else:
        det = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
        trace = G[..., 0, 0] + G[..., 1, 1]
    meas = np.sqrt(np.maximum(det, 0.0))
    bad = ~(meas > DEGENERACY_TOL * trace ** (0.5 * m))
    # degenerate points get a zero inverse metric; callers raise on the flag
    inv_det = np.where(bad, 0.0, 1.0 / np.where(bad, 1.0, det))
    if m == 1:
        Ginv = inv_det[..., None, None] * np.ones((1, 1))
    else:
        Ginv = np.empty_like(G)
        Ginv[..., 0, 0] = G[..., 1, 1] * inv_det
        Ginv[..., 1, 1] = G[..., 0, 0] * inv_det
        Ginv[..., 0, 1] = -G[..., 0, 1] * inv_det
        Ginv[..., 1, 0] = -G[..., 1, 0] * inv_det
    # tangential gradient of basis l: J G^{-1} grad_ref phi_l
    tgrad = np.einsum("eqdm,eqmn,qln->eqld", J, Ginv, D)
    return x, meas, tgrad, bool(bad.any())


@njit(cache=True)
def _geometry_numba(coords, B, D):
    ne, nloc, d = coords.shape
    nq = B.shape[0]
    m = D.shape[2]
    x = np.zeros((ne, nq, d))
    meas = np.zeros((ne, nq))
    tgrad = np.zeros((ne, nq, nloc, d))
    J = np.zeros((d, m))
    bad = False
    for e in range(ne):
        for q in range(nq):
            J[:, :] = 0.0
            for l in range(nloc):
                for i in range(d):
                    c = coords[e, l, i]
                    x[e, q, i] += c * B[q, l]
                    for a in range(m):
                        J[i, a] += c * D[q, l, a]
            g00 = 0.0
            g01 = 0.0
            g11 = 0.0
            for i in range(d):
                g00 += J[i, 0] * J[i, 0]
                if m == 2:
                    g01 += J[i, 0] * J[i, 1]
                    g11 += J[i, 1] * J[i, 1]
            if m == 1:
                det = g00
                trace = g00
            else:
                det = g00 * g11 - g01 * g01
                trace = g00 + g11
            mu = np.sqrt(max(det, 0.0))
            i00 = 0.0
            i01 = 0.0
            i11 = 0.0
            if not (mu > DEGENERACY_TOL * trace ** (0.5 * m)):
                bad = True
            elif m == 1:
                i00 = 1.0 / det
            else:
                i00 = g11 / det
                i01 = -g01 / det
                i11 = g00 / det
            meas[e, q] = mu
            for l in range(nloc):
                if m == 1:
                    c0 = i00 * D[q, l, 0]
                    for i in range(d):
                        tgrad[e, q, l, i] = J[i, 0] * c0
                else:
                    c0 = i00 * D[q, l, 0] + i01 * D[q, l, 1]
                    c1 = i01 * D[q, l, 0] + i11 * D[q, l, 1]
                    for i in range(d):
                        tgrad[e, q, l, i] = J[i, 0] * c0 + J[i, 1] * c1
    return x, meas, tgrad, bad


def element_geometry(coords, B, D):
    """Points, surface measure and tangential basis gradients per quadrature point.

    Returns ``(x, meas, tgrad, degenerate)`` with shapes ``(ne, nq, d)``,
    ``(ne, nq)``, ``(ne, nq, nloc, d)`` and a flag that is set when any
    Jacobian is rank deficient.
    """
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    D = np.ascontiguousarray(D, dtype=np.float64)
    if get_backend() == "numba":
        return _geometry_numba(coords, B, D)
    return _geometry_numpy(coords, B, D)


# ---------------------------------------------------------------------------
# local mass and stiffness matrices
# ---------------------------------------------------------------------------


def _local_matrices_numpy(B, w, meas, tgrad):
    wm = meas * w[None, :]
    Mloc = np.einsum("eq,qi,qj->eij", wm, B, B)
    Aloc = np.einsum("eq,eqid,eqjd->eij", wm, tgrad, tgrad)
    return Mloc, Aloc


@njit(cache=True)
def _local_matrices_numba(B, w, meas, tgrad):
    ne, nq, nloc, d = tgrad.shape
    Mloc = np.zeros((ne, nloc, nloc))
    Aloc = np.zeros((ne, nloc, nloc))
    for e in range(ne):
        for q in range(nq):
            wm = w[q] * meas[e, q]
            for i in range(nloc):
                bi = wm * B[q, i]
                for j in range(i, nloc):
                    Mloc[e, i, j] += bi * B[q, j]
                    s = 0.0
                    for k in range(d):
                        s += tgrad[e, q, i, k] * tgrad[e, q, j, k]
                    Aloc[e, i, j] += wm * s
        for i in range(nloc):
            for j in range(i + 1, nloc):
                Mloc[e, j, i] = Mloc[e, i, j]
                Aloc[e, j, i] = Aloc[e, i, j]
    return Mloc, Aloc


def local_matrices(B, w, meas, tgrad):
    """Element mass and stiffness matrices, each of shape ``(ne, nloc, nloc)``."""
    if get_backend() == "numba":
        return _local_matrices_numba(
            np.ascontiguousarray(B), np.ascontiguousarray(w), meas, tgrad
        )
    return _local_matrices_numpy(B, w, meas, tgrad)


# ---------------------------------------------------------------------------
# closest point on a centred axis-aligned quadric  sum_i q_i x_i^2 = 1
# ---------------------------------------------------------------------------
#
# Stationarity of |x - p|^2 subject to phi(p) = 0 gives
#     p_i = x_i / (1 + 2 lam q_i),
# which reduces the Lagrange system to one secular equation in lam,
#     g(lam) = sum_i q_i x_i^2 / (1 + 2 lam q_i)^2 - 1 = 0,
# solved by safeguarded Newton. g is convex and decreasing right of its pole.

MAX_LIFT_ITER = 50
LIFT_TOL = 1e-15


def _quadric_projection_numpy(x, q, max_iter=MAX_LIFT_ITER, tol=LIFT_TOL):
    x2 = x * x
    phi = x2 @ q - 1.0
    grad2 = 4.0 * (x2 @ (q * q))
    lam = np.where(grad2 > 0.0, phi / np.where(grad2 > 0.0, grad2, 1.0), 0.0)
    pole = -0.5 / q.max()
    active = np.ones(lam.shape, dtype=bool)
    stuck = grad2 == 0.0  # x = 0 has no unique closest point
    active &= ~stuck
    for _ in range(max_iter):
        s = 1.0 + 2.0 * lam[active, None] * q[None, :]
        xa = x2[active]
        g = (xa * q / s**2).sum(axis=1) - 1.0
        dg = -4.0 * (xa * q * q / s**3).sum(axis=1)
        step = g / dg
        new = lam[active] - step
        over = new <= pole
        new[over] = 0.5 * (lam[active][over] + pole)
        done = (np.abs(new - lam[active]) <= tol * (1.0 + np.abs(new))) | (g == 0.0)
        lam[active] = new
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
    p = x / (1.0 + 2.0 * lam[:, None] * q[None, :])
    return p, not (active.any() or stuck.any())


@njit(cache=True)
def _quadric_projection_numba(x, q, max_iter=MAX_LIFT_ITER, tol=LIFT_TOL):
    n, d = x.shape
    p = np.empty_like(x)
    qmax = q.max()
    pole = -0.5 / qmax
    ok = True
    for r in range(n):
        phi = -1.0
        grad2 = 0.0
        for i in range(d):
            phi += q[i] * x[r, i] * x[r, i]
            grad2 += 4.0 * q[i] * q[i] * x[r, i] * x[r, i]
        lam = phi / grad2 if grad2 > 0.0 else 0.0
        converged = False
        for _ in range(max_iter):
            g = -1.0
            dg = 0.0
            for i in range(d):
                s = 1.0 + 2.0 * lam * q[i]
                xi2 = x[r, i] * x[r, i]
                g += q[i] * xi2 / (s * s)
                dg -= 4.0 * q[i] * q[i] * xi2 / (s * s * s)
            if dg == 0.0:
                # x = 0: every point of the quadric is equidistant
                break
            new = lam - g / dg
            if new <= pole:
                new = 0.5 * (lam + pole)
            if abs(new - lam) <= tol * (1.0 + abs(new)) or g == 0.0:
                lam = new
                converged = True
                break
            lam = new
        if not converged:
            ok = False
        for i in range(d):
            p[r, i] = x[r, i] / (1.0 + 2.0 * lam * q[i])
    return p, ok


def quadric_projection(x, q):
    """Closest points on ``{sum_i q_i x_i^2 = 1}`` for rows of ``x``.

    Returns ``(p, converged)``; ``converged`` is False if any point needed
    more than ``MAX_LIFT_ITER`` Newton steps.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    if get_backend() == "numba":
        return _quadric_projection_numba(x, q)
    return _quadric_projection_numpy(x, q)
