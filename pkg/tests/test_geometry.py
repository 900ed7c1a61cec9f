import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esfem import GeometryError, LevelSetSurface, LiftError, ManufacturedProblem
from esfem.geometry import (
    closest_point,
    exact_solution_eval,
    flow_map,
    levelset_eval,
    manufactured_forcing,
    material_velocity,
    outward_normal,
    signed_distance,
)

from oracles import fd_forcing, random_surface_points

SQ125 = math.sqrt(1.25)


def test_levelset_sphere_unit_vector(sphere):
    value, grad, hess = levelset_eval(sphere, [1.0, 0.0, 0.0], 0.7)
    assert value == 0.0
    np.testing.assert_allclose(grad, [2, 0, 0])
    np.testing.assert_allclose(hess, 2 * np.eye(3))


def test_levelset_ellipsoid_values(ellipsoid):
    assert levelset_eval(ellipsoid, [1.0, 0.0, 0.0], 0.0)[0] == pytest.approx(0.0, abs=1e-15)
    assert levelset_eval(ellipsoid, [1.0, 0.0, 0.0], 0.25)[0] == pytest.approx(-0.2, abs=1e-15)


def test_levelset_gradient_matches_fd(ellipsoid):
    x = np.array([0.3, -0.7, 0.5])
    _, grad, hess = levelset_eval(ellipsoid, x, 0.4)
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (levelset_eval(ellipsoid, x + e, 0.4)[0] - levelset_eval(ellipsoid, x - e, 0.4)[0]) / (2 * h)
        assert fd == pytest.approx(grad[i], abs=1e-8)
        fdg = (levelset_eval(ellipsoid, x + e, 0.4)[1] - levelset_eval(ellipsoid, x - e, 0.4)[1]) / (2 * h)
        np.testing.assert_allclose(fdg, hess[:, i], atol=1e-7)


def test_outward_normal_examples(sphere, ellipsoid):
    x = np.array([0.6, 0.0, 0.8])
    np.testing.assert_allclose(outward_normal(sphere, x, 0.0), x, atol=1e-15)
    np.testing.assert_allclose(outward_normal(sphere, [0, 2, 0], 0.0), [0, 1, 0])
    np.testing.assert_allclose(outward_normal(ellipsoid, [SQ125, 0, 0], 0.25), [1, 0, 0], atol=1e-15)


def test_outward_normal_is_unit(ellipsoid):
    rng = np.random.default_rng(3)
    x = rng.standard_normal((50, 3))
    n = outward_normal(ellipsoid, x, 0.6)
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-14)


def test_outward_normal_degenerate(sphere):
    with pytest.raises(GeometryError, match="normal undefined"):
        outward_normal(sphere, [0.0, 0.0, 0.0], 0.0)


def test_closest_point_sphere_examples(sphere):
    np.testing.assert_allclose(closest_point(sphere, [2, 0, 0], 0.0), [1, 0, 0])
    s = 1 / math.sqrt(2)
    np.testing.assert_allclose(closest_point(sphere, [0.5, 0.5, 0], 0.0), [s, s, 0], atol=1e-15)


def test_closest_point_ellipsoid_axis(ellipsoid):
    p = closest_point(ellipsoid, [SQ125 + 0.01, 0, 0], 0.25)
    np.testing.assert_allclose(p, [SQ125, 0, 0], atol=1e-14)


@pytest.mark.parametrize("t", [0.0, 0.25, 0.6, 0.75])
def test_lift_consistency(surface, t):
    rng = np.random.default_rng(11)
    d = surface.ambient_dim
    base = random_surface_points(rng, 200, t, d, surface.is_moving)
    n = outward_normal(surface, base, t)
    x = base + rng.uniform(-0.15, 0.15, (200, 1)) * n
    p = closest_point(surface, x, t)
    assert np.max(np.abs(levelset_eval(surface, p, t)[0])) <= 1e-12
    nu = outward_normal(surface, p, t)
    dist = signed_distance(surface, x, t)
    np.testing.assert_allclose(x, p + nu * dist[:, None], atol=1e-10)
    # x - p parallel to nu
    r = x - p
    cross = r - np.sum(r * nu, axis=1, keepdims=True) * nu
    assert np.max(np.abs(cross)) <= 1e-10


def test_closest_point_off_axis_lagrange_residual(ellipsoid):
    x = np.array([0.9, 0.4, -0.3])
    p = closest_point(ellipsoid, x, 0.25)
    _, g, _ = levelset_eval(ellipsoid, p, 0.25)
    lam = np.dot(x - p, g) / np.dot(g, g)
    assert np.max(np.abs(x - p - lam * g)) < 1e-12


def test_closest_point_centre_fails(ellipsoid):
    with pytest.raises(LiftError, match="lift failed"):
        closest_point(ellipsoid, [0.0, 0.0, 0.0], 0.25)


def test_signed_distance_examples(sphere, ellipsoid):
    assert signed_distance(sphere, [2, 0, 0], 0.0) == pytest.approx(1.0)
    assert signed_distance(sphere, [0.5, 0, 0], 0.0) == pytest.approx(-0.5)
    assert signed_distance(ellipsoid, [SQ125, 0, 0], 0.25) == pytest.approx(0.0, abs=1e-15)


def test_material_velocity_examples(sphere, ellipsoid):
    np.testing.assert_array_equal(material_velocity(sphere, [0.3, 0.4, 0.5], 0.2), [0, 0, 0])
    np.testing.assert_allclose(material_velocity(ellipsoid, [1, 0, 0], 0.0), [math.pi / 4, 0, 0])
    np.testing.assert_array_equal(material_velocity(ellipsoid, [0, 0.6, 0.8], 0.37), [0, 0, 0])


def test_flow_map_examples(sphere, ellipsoid):
    np.testing.assert_allclose(flow_map(ellipsoid, [1, 0, 0], 0.25), [SQ125, 0, 0])
    np.testing.assert_allclose(flow_map(ellipsoid, [0, 1, 0], 0.8), [0, 1, 0])
    x0 = np.array([0.6, 0.0, 0.8])
    np.testing.assert_array_equal(flow_map(sphere, x0, 0.9), x0)


def test_flow_map_off_surface(ellipsoid):
    with pytest.raises(GeometryError, match="node off surface"):
        flow_map(ellipsoid, [1.1, 0, 0], 0.3)


@pytest.mark.parametrize("name", ["ellipsoid", "ellipse"])
def test_flow_stays_on_surface_and_matches_velocity(name):
    s = LevelSetSurface.from_name(name)
    rng = np.random.default_rng(5)
    x0 = random_surface_points(rng, 30, 0.0, s.ambient_dim, False)
    for t in np.linspace(0, 1, 9):
        assert np.max(np.abs(levelset_eval(s, flow_map(s, x0, t), t)[0])) <= 1e-13
    t = 0.3
    errs = []
    for dt in (1e-3, 1e-4):
        fd = (flow_map(s, x0, t + dt) - flow_map(s, x0, t - dt)) / (2 * dt)
        errs.append(np.max(np.abs(fd - material_velocity(s, flow_map(s, x0, t), t))))
    assert errs[0] / errs[1] == pytest.approx(100, rel=0.05)


def test_exact_solution_examples(sphere):
    prob = ManufacturedProblem(sphere)
    s = 1 / math.sqrt(2)
    assert exact_solution_eval(prob, [s, s, 0], 0.0)[0] == pytest.approx(0.5)
    assert exact_solution_eval(prob, [1, 0, 0], 0.4)[0] == 0.0
    assert exact_solution_eval(prob, [s, s, 0], 1.0)[0] == pytest.approx(1.2394e-3, rel=1e-4)


def test_surface_gradient_tangential(ellipsoid_problem):
    rng = np.random.default_rng(2)
    x = random_surface_points(rng, 100, 0.4, 3, True)
    _, g = exact_solution_eval(ellipsoid_problem, x, 0.4)
    nu = outward_normal(ellipsoid_problem.surface, x, 0.4)
    assert np.max(np.abs(np.sum(g * nu, axis=1))) <= 1e-12


def test_forcing_vanishes_on_stationary_sphere(sphere):
    rng = np.random.default_rng(4)
    prob = ManufacturedProblem(sphere)
    x = random_surface_points(rng, 500, 0.0, 3, False)
    for t in (0.0, 0.3, 1.0):
        assert np.max(np.abs(manufactured_forcing(prob, x, t))) <= 1e-12


def test_forcing_zero_solution(ellipsoid):
    prob = ManufacturedProblem(ellipsoid, amplitude=0.0)
    x = random_surface_points(np.random.default_rng(0), 20, 0.2, 3, True)
    assert np.all(manufactured_forcing(prob, x, 0.2) == 0.0)


def test_forcing_pole_matches_fd(ellipsoid_problem):
    x = np.array([0.0, 0.0, 1.0])
    f = float(manufactured_forcing(ellipsoid_problem, x, 0.0))
    fo = fd_forcing(x, 0.0, True)
    assert abs(f - fo) <= 1e-6 * max(abs(fo), 1e-300) or abs(f - fo) <= 1e-10


@pytest.mark.parametrize("name", ["ellipsoid", "ellipse"])
def test_forcing_matches_fd_oracle(name):
    s = LevelSetSurface.from_name(name)
    prob = ManufacturedProblem(s)
    rng = np.random.default_rng(17)
    for _ in range(100):
        t = rng.uniform(0, 1)
        x = random_surface_points(rng, 1, t, s.ambient_dim, True)[0]
        fo = fd_forcing(x, t, True)
        assert float(manufactured_forcing(prob, x, t)) == pytest.approx(fo, rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0.0, 1.0),
    st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1),
    st.floats(-0.2, 0.2),
)
def test_property_projection_idempotent(t, direction, offset):
    s = LevelSetSurface.from_name("ellipsoid")
    v = np.array(direction) / np.linalg.norm(direction)
    v[0] *= math.sqrt(s.stretch(t))
    x = v + offset * outward_normal(s, v, t)
    p = closest_point(s, x, t)
    np.testing.assert_allclose(closest_point(s, p, t), p, atol=1e-13)
    assert abs(signed_distance(s, x, t)) <= abs(offset) + 1e-12


def test_surface_from_name_rejects_unknown():
    with pytest.raises(ValueError):
        LevelSetSurface.from_name("torus")


def test_surface_properties(surface):
    assert surface.ambient_dim == surface.dim + 1
    assert 0.75 <= min(surface.stretch(t) for t in np.linspace(0, 1, 101))
    assert max(surface.stretch(t) for t in np.linspace(0, 1, 101)) <= 1.25
