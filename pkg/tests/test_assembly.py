import math

import numpy as np
import pytest
import scipy.linalg as sla

from esfem import HighOrderMesh, LevelSetSurface, ManufacturedProblem, build_mesh
from esfem.analysis import ErrorAccumulator, error_norms
from esfem.assembly import (
    assemble_load,
    assemble_load_from_values,
    assemble_mass,
    assemble_matrices,
    assemble_stiffness,
    compute_geometry,
    interpolate_nodal,
)
from esfem.geometry import material_velocity
from esfem.refelem import default_rule, dunavant_rule, gauss_rule, reference_element
from esfem.timestep import run_simulation


def flat_triangle(degree=1):
    s = LevelSetSurface.from_name("sphere")
    el = reference_element(2, degree)
    nodes = np.column_stack([el.nodes, np.zeros(el.n_loc)])
    return HighOrderMesh(s, degree, nodes, np.arange(el.n_loc)[None, :])


def test_flat_triangle_mass_and_stiffness():
    m = flat_triangle(1)
    M = assemble_mass(m).toarray()
    A = assemble_stiffness(m).toarray()
    np.testing.assert_allclose(M, np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24, atol=1e-16)
    np.testing.assert_allclose(A, 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]]), atol=1e-15)


def test_flat_triangle_rotated_in_space():
    m = flat_triangle(2)
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))
    ref = assemble_matrices(m)
    m.nodes = m.nodes @ q.T + np.array([0.3, -1.0, 2.0])
    rot = assemble_matrices(m)
    for a, b in zip(ref, rot):
        np.testing.assert_allclose(a.toarray(), b.toarray(), atol=1e-14)


MESHES = [("sphere", 2, 2), ("ellipsoid", 2, 2), ("ellipsoid", 1, 3), ("circle", 3, 2), ("ellipse", 2, 4), ("sphere", 1, 1)]


@pytest.mark.parametrize("name,refs,k", MESHES)
@pytest.mark.parametrize("t", [0.0, 0.3])
def test_matrix_properties(name, refs, k, t):
    mesh = build_mesh(LevelSetSurface.from_name(name), refs, k)
    M, A = assemble_matrices(mesh, t)
    assert abs(M - M.T).max() == 0.0
    assert abs(A - A.T).max() == 0.0
    ones = np.ones(mesh.n_nodes)
    assert np.max(np.abs(A @ ones)) <= 1e-10 * sla.norm(A.toarray(), 2)
    rng = np.random.default_rng(1)
    V = rng.standard_normal((mesh.n_nodes, 100))
    assert np.all(np.einsum("ij,ij->j", V, M @ V) > 0)
    assert np.all(np.einsum("ij,ij->j", V, A @ V) >= -1e-12)
    assert np.linalg.eigvalsh(M.toarray()).min() > 0


def test_pattern_only_from_shared_elements(sphere):
    mesh = build_mesh(sphere, 1, 2)
    M = assemble_mass(mesh).tocoo()
    share = set()
    for el in mesh.elements:
        share.update((int(i), int(j)) for i in el for j in el)
    assert set(zip(M.row.tolist(), M.col.tolist())) <= share


def test_sphere_area_level4(sphere):
    mesh = build_mesh(sphere, 3, 2)
    assert assemble_mass(mesh).sum() == pytest.approx(4 * math.pi, abs=1e-3)


def test_first_laplace_beltrami_eigenvalue(sphere):
    mesh = build_mesh(sphere, 2, 2)
    M, A = assemble_matrices(mesh)
    lam = sla.eigh(A.toarray(), M.toarray(), eigvals_only=True)
    assert abs(lam[0]) < 1e-10
    assert lam[1] == pytest.approx(2.0, rel=1e-3)
    # degree-1 spherical harmonics: threefold
    np.testing.assert_allclose(lam[1:4], 2.0, rtol=1e-3)


def test_load_examples(sphere, ellipsoid):
    mesh = build_mesh(ellipsoid, 1, 2)
    zero = ManufacturedProblem(ellipsoid, amplitude=0.0)
    assert np.all(assemble_load(mesh, zero, 0.4) == 0.0)
    geom = compute_geometry(mesh, 0.4)
    b1 = assemble_load_from_values(mesh, geom, np.ones(geom.meas.shape))
    assert b1.sum() == pytest.approx(assemble_mass(mesh).sum(), rel=1e-14)
    smesh = build_mesh(sphere, 2, 2)
    b = assemble_load(smesh, ManufacturedProblem(sphere), 0.3)
    assert np.max(np.abs(b)) <= 1e-12


def test_interpolate_examples(ellipsoid):
    mesh = build_mesh(ellipsoid, 1, 2)
    np.testing.assert_array_equal(interpolate_nodal(mesh, lambda x, t: 1.0, 0.2), np.ones(mesh.n_nodes))
    prob = ManufacturedProblem(ellipsoid)
    np.testing.assert_allclose(interpolate_nodal(mesh, prob.exact_u, 0.6), prob.exact_u(mesh.nodes, 0.6))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_linear_function_reproduced_on_flat_mesh(k):
    m = flat_triangle(k)
    g = lambda x, t: 0.5 + 2.0 * x[..., 0] - 3.0 * x[..., 1]
    alpha = interpolate_nodal(m, g)
    geom = compute_geometry(m)
    uh = alpha[m.elements] @ geom.tab.values.T
    np.testing.assert_allclose(uh, g(geom.x, 0.0), atol=1e-14)


def test_interpolation_error_order(sphere):
    prob = ManufacturedProblem(sphere)
    for k in (1, 2):
        errs = []
        for r in range(2, 5):
            mesh = build_mesh(sphere, r, k)
            errs.append(error_norms(mesh, interpolate_nodal(mesh, prob.exact_u), prob, 0.0)[0])
        assert math.log2(errs[-2] / errs[-1]) >= k + 1 - 0.2


def test_area_time_derivative(ellipsoid):
    mesh = build_mesh(ellipsoid, 2, 2)
    t = 0.4
    geom = compute_geometry(mesh, t)
    v = material_velocity(ellipsoid, mesh.nodes, t)
    div = np.einsum("eqld,eld->eq", geom.tgrad, v[mesh.elements])
    exact = float(np.sum(geom.weighted_measure * div))
    area = lambda s: assemble_mass(mesh, s).sum()
    errs = [abs((area(t + dt) - area(t - dt)) / (2 * dt) - exact) for dt in (1e-2, 1e-3)]
    assert errs[0] / errs[1] == pytest.approx(100, rel=0.1)


def test_matrices_continuous_in_time(ellipsoid):
    mesh = build_mesh(ellipsoid, 1, 2)
    M0 = assemble_mass(mesh, 0.3)
    M1 = assemble_mass(mesh, 0.3 + 1e-7)
    assert abs(M1 - M0).max() < 1e-6


@pytest.mark.parametrize("name", ["sphere", "ellipsoid"])
def test_quadrature_sufficiency(name):
    s = LevelSetSurface.from_name(name)
    prob = ManufacturedProblem(s)
    for level in (1, 2, 3):
        res = []
        for rule in (default_rule(2, 2), dunavant_rule(10)):
            mesh = build_mesh(s, level - 1, 2)
            acc = ErrorAccumulator(mesh, prob, "lifted", rule)
            run_simulation(mesh, prob, 3, 0.2 * 2.0 ** (1 - level), 1.0, rule=rule, observer=acc, keep=False)
            res.append(acc.result())
        for a, b in zip(*res):
            assert abs(a - b) / b < 0.01


def test_gauss_rule_for_curves(circle):
    mesh = build_mesh(circle, 4, 2)
    hi = assemble_mass(mesh, rule=gauss_rule(15)).sum()
    assert assemble_mass(mesh).sum() == pytest.approx(hi, rel=1e-12)
