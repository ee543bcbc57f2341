"""
Tests des ensembles convexes et de la projection sur une intersection de demi-espaces.
"""

import numpy as np
import pytest

from core.config import settings
from core.errors import DimensionMismatchError, EmptySetError, InconsistentCutsError, InvalidSetError
from services.convex_sets import (
    Ball,
    Box,
    Halfspace,
    Hyperplane,
    Polyhedron,
    WholeSpace,
    contains,
    is_polyhedral,
    project,
    project_halfspace_intersection,
    sample_members,
    to_halfspaces,
)
from services.cutting_planes import build_anchor_cut, build_cut


def _sets(dimension: int):
    return [
        WholeSpace(dimension),
        Box(-np.ones(dimension), 2.0 * np.ones(dimension)),
        Ball(np.full(dimension, 0.5), 1.5),
        Halfspace(np.arange(1.0, dimension + 1.0), 1.0),
        Hyperplane(np.ones(dimension), 0.5),
        Polyhedron(
            (Halfspace(np.eye(dimension)[0], 1.0), Halfspace(-np.ones(dimension), 2.0)),
            witness=np.zeros(dimension),
        ),
    ]


@pytest.mark.parametrize("index", range(6))
def test_projection_is_firmly_nonexpansive_and_variational(index, rng):
    dimension = 3
    K = _sets(dimension)[index]
    members = sample_members(K, rng, 50, dimension, scale=3.0)
    for k in range(10_000):
        x, y = rng.normal(scale=3.0, size=(2, dimension))
        px, py = K.project(x), K.project(y)
        # Non-expansivité ferme
        assert float(np.dot(px - py, px - py)) <= float(np.dot(px - py, x - y)) + 1e-10
        # Caractérisation variationnelle sur des points de K
        c = members[k % len(members)]
        assert float(np.dot(x - px, c - px)) <= 1e-10 * (1.0 + np.linalg.norm(x))
        # Inégalité des trois points
        assert (float(np.dot(c - px, c - px)) + float(np.dot(px - x, px - x))
                <= float(np.dot(c - x, c - x)) + 1e-10 * (1.0 + float(np.dot(x, x))))
        assert K.contains(px, 1e-9)


@pytest.mark.parametrize("K,x,expected", [
    (Halfspace([1.0, 0.0], 0.0), [1.0, 1.0], [0.0, 1.0]),
    (Ball([0.0, 0.0], 1.0), [2.0, 0.0], [1.0, 0.0]),
    (Polyhedron((Halfspace([1.0, 0.0], 0.0), Halfspace([0.0, 1.0], 0.0)), witness=[0.0, 0.0]), [1.0, 1.0], [0.0, 0.0]),
])
def test_project_reference_points(K, x, expected):
    np.testing.assert_allclose(project(K, np.array(x)), expected, atol=1e-12)


def test_contains_reference_points():
    assert contains(Box([0.0, 0.0], [1.0, 1.0]), np.array([0.5, 0.5]), tol=0.0)
    assert contains(Halfspace([1.0, 0.0], 0.0), np.array([1e-9, 0.0]), tol=1e-8)
    assert not contains(Ball([0.0, 0.0], 1.0), np.array([1.1, 0.0]), tol=1e-3)


def test_projection_is_idempotent(rng):
    for K in _sets(4):
        x = rng.normal(size=4)
        np.testing.assert_allclose(K.project(K.project(x)), K.project(x), atol=1e-12)


def test_box_with_inverted_bounds_rejected():
    with pytest.raises(InvalidSetError, match="inversées"):
        Box([1.0, 0.0], [0.0, 1.0])


def test_degenerate_sets_rejected():
    with pytest.raises(InvalidSetError):
        Halfspace([0.0, 0.0], 1.0)
    with pytest.raises(InvalidSetError):
        Ball([0.0], -1.0)
    with pytest.raises(InvalidSetError):
        Polyhedron((Halfspace([1.0], 0.0),), witness=[1.0])


def test_polyhedron_without_witness_cannot_project():
    P = Polyhedron((Halfspace([1.0, 0.0], 0.0),))
    assert P.contains(np.array([-1.0, 3.0]))
    with pytest.raises(EmptySetError):
        P.project(np.array([1.0, 0.0]))


def test_dimension_checked_on_projection():
    with pytest.raises(DimensionMismatchError):
        project(Box([0.0, 0.0], [1.0, 1.0]), np.zeros(3))


def test_contains_with_tolerance():
    H = Halfspace([1.0, 0.0], 0.0)
    assert not contains(H, np.array([1e-6, 0.0]))
    assert contains(H, np.array([1e-6, 0.0]), tol=1e-5)


def test_box_rewritten_as_halfspaces(rng):
    box = Box([-1.0, 0.0, 2.0], [1.0, 0.5, 3.0])
    cuts = to_halfspaces(box, 3)
    assert len(cuts) == 6
    assert is_polyhedral(box) and not is_polyhedral(Ball([0.0], 1.0))
    for _ in range(50):
        x = rng.normal(scale=3.0, size=3)
        np.testing.assert_allclose(project_halfspace_intersection(cuts, x), box.project(x), atol=1e-9)


def _random_feasible_cuts(rng, dimension: int, count: int):
    p = rng.normal(size=dimension)
    cuts = []
    for _ in range(count):
        a = rng.normal(size=dimension)
        cuts.append(Halfspace(a, float(np.dot(a, p)) + abs(rng.normal())))
    return cuts


@pytest.mark.parametrize("dimension,count", [(2, 3), (3, 4), (5, 6), (8, 6)])
def test_active_set_projection_matches_brute_force(dimension, count, rng, qp_oracle):
    for _ in range(250):
        cuts = _random_feasible_cuts(rng, dimension, count)
        x0 = rng.normal(scale=3.0, size=dimension)
        A = np.array([c.a for c in cuts])
        b = np.array([c.b for c in cuts])
        np.testing.assert_allclose(
            project_halfspace_intersection(cuts, x0, method="active_set"), qp_oracle(A, b, x0), atol=1e-8
        )


@pytest.mark.parametrize("cuts,x0,expected", [
    ([Halfspace([1.0, 0.0], 0.0)], [1.0, 1.0], [0.0, 1.0]),
    ([Halfspace([1.0, 0.0], 0.0), Halfspace([0.0, 1.0], 0.0)], [1.0, 1.0], [0.0, 0.0]),
    ([Halfspace([1.0, 0.0], 0.0), Halfspace([1.0, 0.0], 1.0)], [2.0, 0.0], [0.0, 0.0]),
])
def test_intersection_reference_points(cuts, x0, expected):
    np.testing.assert_allclose(project_halfspace_intersection(cuts, np.array(x0)), expected, atol=1e-12)


def test_short_cut_normals_are_not_absorbed_by_tolerance():
    # x_n viole chaque coupe de γ ||x_n - z_n||^2 ~ 5e-10 seulement: x_n n'est pas la projection
    x0 = np.array([1.0, 1.0])
    x_n = np.full(2, 2.0 ** -15)
    cuts = [
        build_cut(x_n, np.array([0.0, x_n[1]]), 0.5),
        build_cut(x_n, np.array([x_n[0], 0.0]), 0.5),
        build_anchor_cut(x0, x_n),
    ]
    z = project_halfspace_intersection(cuts, x0)
    np.testing.assert_allclose(z, np.full(2, 2.0 ** -16), rtol=1e-9, atol=0.0)
    np.testing.assert_allclose(project_halfspace_intersection(cuts, x0, method="dykstra"), z, atol=1e-10)


def test_dykstra_agrees_with_active_set(rng):
    for _ in range(20):
        cuts = _random_feasible_cuts(rng, 3, 5)
        x0 = rng.normal(scale=3.0, size=3)
        exact = project_halfspace_intersection(cuts, x0, method="active_set")
        approx = project_halfspace_intersection(cuts, x0, method="dykstra")
        np.testing.assert_allclose(approx, exact, atol=1e-6)


def test_feasible_point_returned_unchanged():
    cuts = [Halfspace([1.0, 0.0], 1.0), WholeSpace(2)]
    x0 = np.array([0.5, 7.0])
    np.testing.assert_array_equal(project_halfspace_intersection(cuts, x0), x0)
    np.testing.assert_array_equal(project_halfspace_intersection([], x0), x0)


def test_inconsistent_cuts_detected(monkeypatch):
    cuts = [Halfspace([1.0, 0.0], -1.0), Halfspace([-1.0, 0.0], -1.0)]
    with pytest.raises(InconsistentCutsError):
        project_halfspace_intersection(cuts, np.zeros(2), method="active_set")
    monkeypatch.setattr(settings, "DYKSTRA_MAX_SWEEPS", 500)
    with pytest.raises(InconsistentCutsError):
        project_halfspace_intersection(cuts, np.zeros(2), method="dykstra")


def test_many_cuts_use_dykstra():
    # au-delà de EXACT_CUT_LIMIT la projection passe par Dykstra
    angles = np.linspace(0.0, 2.0 * np.pi, settings.EXACT_CUT_LIMIT + 4, endpoint=False)
    cuts = [Halfspace([np.cos(t), np.sin(t)], 1.0) for t in angles]
    x0 = np.array([3.0, 0.4])
    A = np.array([c.a for c in cuts])
    b = np.array([c.b for c in cuts])
    z = project_halfspace_intersection(cuts, x0)
    assert np.all(A @ z - b <= 1e-8)
    np.testing.assert_allclose(z, project_halfspace_intersection(cuts, x0, method="active_set"), atol=1e-6)
