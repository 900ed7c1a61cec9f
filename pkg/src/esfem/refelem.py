"""Lagrange reference elements and quadrature on the unit interval and triangle."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import UnsupportedElementError

MAX_DEGREE = 4


def lagrange_nodes(dim: int, degree: int) -> np.ndarray:
    """Equispaced principal-lattice nodes: vertices, then edge nodes, then interior.

    Triangle edges are traversed 0->1, 1->2, 2->0 and their nodes listed in
    that direction; interval interior nodes are increasing.
    """
    if dim not in (1, 2) or not 1 <= degree <= MAX_DEGREE:
        raise UnsupportedElementError(f"unsupported element: dim={dim}, degree={degree}")
    k = degree
    if dim == 1:
        pts = [0.0, 1.0] + [i / k for i in range(1, k)]
        return np.array(pts).reshape(-1, 1)
    pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    pts += [(i / k, 0.0) for i in range(1, k)]
    pts += [((k - i) / k, i / k) for i in range(1, k)]
    pts += [(0.0, (k - i) / k) for i in range(1, k)]
    pts += [(i / k, j / k) for j in range(1, k) for i in range(1, k - j)]
    return np.array(pts)


def _barycentric(xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric coordinates (n, m+1) and their constant gradients (m+1, m)."""
    m = xi.shape[1]
    lam = np.concatenate([1.0 - xi.sum(axis=1, keepdims=True), xi], axis=1)
    dlam = np.vstack([-np.ones((1, m)), np.eye(m)])
    return lam, dlam


@dataclass(frozen=True, eq=False)
class ReferenceElement:
    dim: int
    degree: int

    def __post_init__(self):
        nodes = lagrange_nodes(self.dim, self.degree)
        lam, _ = _barycentric(nodes)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "_multi", np.rint(self.degree * lam).astype(int))

    @property
    def n_loc(self) -> int:
        return len(self.nodes)

    def basis_eval(self, xi):
        """Basis values (n, n_loc) and reference gradients (n, n_loc, dim).

        Each basis function is the product over barycentric coordinates
        lam_j of prod_{s < i_j} (k lam_j - s) / (i_j - s), where i is the
        node's integer barycentric index.
        """
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        lam, dlam = _barycentric(xi)
        k = self.degree
        n = xi.shape[0]
        values = np.ones((n, self.n_loc))
        grads = np.zeros((n, self.n_loc, self.dim))
        for a, index in enumerate(self._multi):
            factors = [
                ((k * lam[:, j] - s) / (i_j - s), k * dlam[j] / (i_j - s))
                for j, i_j in enumerate(index)
                for s in range(i_j)
            ]
            for val, _ in factors:
                values[:, a] *= val
            for f, (_, dval) in enumerate(factors):
                others = np.ones(n)
                for g, (val, _) in enumerate(factors):
                    if g != f:
                        others *= val
                grads[:, a, :] += others[:, None] * dval[None, :]
        return values, grads


@lru_cache(maxsize=None)
def reference_element(dim: int, degree: int) -> ReferenceElement:
    return ReferenceElement(dim, degree)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    dim: int
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    def __len__(self):
        return len(self.weights)


# Dunavant rules in barycentric orbit form, weights normalised to sum 1.
# Orbit kinds: "c" centroid; "3" (1-2b, b, b); "6" all permutations of (a, b, 1-a-b).
# Degrees 3 and 7 of the original family carry a negative weight and are
# served by the next rule up.
_DUNAVANT = {
    1: [("c", 1.0, ())],
    2: [("3", 0.3333333333333333, (0.16666666666666666,))],
    4: [
        ("3", 0.10995174365532187, (0.09157621350977074,)),
        ("3", 0.22338158967801147, (0.4459484909159649,)),
    ],
    5: [
        ("c", 0.225, ()),
        ("3", 0.12593918054482714, (0.10128650732345634,)),
        ("3", 0.1323941527885062, (0.4701420641051151,)),
    ],
    6: [
        ("3", 0.05084490637020682, (0.06308901449150223,)),
        ("3", 0.11678627572637937, (0.24928674517091043,)),
        ("6", 0.08285107561837357, (0.053145049844816945, 0.3103524510337844)),
    ],
    8: [
        ("c", 0.14431560767778717, ()),
        ("3", 0.09509163426728462, (0.4592925882927232,)),
        ("3", 0.10321737053471824, (0.1705693077517602,)),
        ("3", 0.03245849762319808, (0.05054722831703098,)),
        ("6", 0.027230314174434993, (0.008394777409957605, 0.2631128296346381)),
    ],
    9: [
        ("c", 0.09713579628279884, ()),
        ("3", 0.03133470022713907, (0.4896825191987376,)),
        ("3", 0.07782754100477428, (0.43708959149293664,)),
        ("3", 0.07964773892721025, (0.18820353561903272,)),
        ("3", 0.02557767565869803, (0.04472951339445271,)),
        ("6", 0.043283539377289376, (0.036838412054736286, 0.2219629891607657)),
    ],
    10: [
        ("c", 0.09081799038275358, ()),
        ("3", 0.036725957756466705, (0.4855776333836574,)),
        ("3", 0.04532105943552794, (0.10948157548503705,)),
        ("6", 0.07275791684542011, (0.14170721941487996, 0.30793983876412095)),
        ("6", 0.028327242531057485, (0.025003534762686387, 0.2466725606399027)),
        ("6", 0.009421666963732823, (0.009540815400299458, 0.06680325101220026)),
    ],
}


def _expand_orbits(orbits):
    points, weights = [], []
    for kind, w, params in orbits:
        if kind == "c":
            bary = [(1 / 3, 1 / 3, 1 / 3)]
        elif kind == "3":
            b = params[0]
            a = 1.0 - 2.0 * b
            bary = [(a, b, b), (b, a, b), (b, b, a)]
        else:
            a, b = params
            bary = list(itertools.permutations((a, b, 1.0 - a - b)))
        for lam in bary:
            points.append((lam[1], lam[2]))
            weights.append(0.5 * w)
    return np.array(points), np.array(weights)


@lru_cache(maxsize=None)
def dunavant_rule(target_degree: int) -> QuadratureRule:
    """Positive-weight symmetric Dunavant rule on the unit triangle."""
    if not 1 <= target_degree <= 10:
        raise UnsupportedElementError(f"no Dunavant rule for degree {target_degree}")
    degree = min(d for d in _DUNAVANT if d >= target_degree)
    points, weights = _expand_orbits(_DUNAVANT[degree])
    return QuadratureRule(2, points, weights, degree)


@lru_cache(maxsize=None)
def gauss_rule(target_degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] with exactness 2n-1 >= target_degree."""
    if not 1 <= target_degree <= 15:
        raise UnsupportedElementError(f"no Gauss rule for degree {target_degree}")
    n = (target_degree + 2) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(1, (0.5 * (x + 1.0)).reshape(-1, 1), 0.5 * w, 2 * n - 1)


def default_rule(dim: int, degree: int, exactness: int | None = None) -> QuadratureRule:
    """Assembly rule of exactness 2k+2 unless overridden (capped at the table maximum)."""
    target = 2 * degree + 2 if exactness is None else exactness
    if dim == 1:
        return gauss_rule(min(target, 15))
    return dunavant_rule(min(target, 10))
