"""
Tests des générateurs d'instances.
"""

import numpy as np
import pytest
from scipy.linalg import svdvals

from core.config import settings
from core.errors import DimensionMismatchError, ExpansiveMapError, InstanceValidationError
from core.models import SolverParams, check_lipschitz_type, gaussian_triples, validate_params
from services.convex_sets import Ball, Box, Halfspace, WholeSpace, sample_members
from services.instances import (
    AffineMap,
    affine_map_bifunction,
    certify_subgradient,
    cfp_projection_oracle,
    conjugated_contraction,
    linear_operator_bifunction,
    make_cfp,
    make_fixed_point,
    make_linear_vi,
    make_nash_cournot,
    nash_cournot_bifunction,
    operator_norm,
)
from services.invariants import certify_known_solution
from services.solver_cyclic import run_cyclic
from services.solver_parallel import run_parallel


def _random_nash_cournot_data(rng, dimension):
    B = rng.normal(size=(dimension, dimension))
    D = rng.normal(size=(dimension, dimension))
    Q = B.T @ B
    P = Q + D.T @ D
    return P, Q, rng.normal(size=dimension)


def _default_params(instance, x0, **kwargs):
    bound = 1.0 / (2.0 * max(instance.c1, instance.c2)) if max(instance.c1, instance.c2) > 0 else 2.0
    return SolverParams.constant(0.5 * bound, 0.5, x0, **kwargs)


# --- Faisabilité convexe ---

def test_cfp_requires_witness():
    with pytest.raises(InstanceValidationError):
        make_cfp([Halfspace([1.0, 0.0], 0.0)])
    with pytest.raises(InstanceValidationError):
        make_cfp([Halfspace([1.0, 0.0], 0.0)], witness=[1.0, 0.0])


def test_cfp_orthogonal_halfspaces_oracle():
    instance = make_cfp([Halfspace([1.0, 0.0], 0.0), Halfspace([0.0, 1.0], 0.0)], witness=[-1.0, -1.0])
    assert instance.c1 == instance.c2 == 0.0
    assert instance.feasible_region_is_polyhedral
    np.testing.assert_allclose(cfp_projection_oracle(instance, [1.0, 1.0]), [0.0, 0.0], atol=1e-12)


def test_cfp_single_set_oracle_is_projection():
    K = Halfspace([1.0, 1.0], 1.0)
    instance = make_cfp([K], witness=[0.0, 0.0])
    x0 = np.array([3.0, 2.0])
    np.testing.assert_allclose(cfp_projection_oracle(instance, x0), K.project(x0))


def test_cfp_boxes_with_common_corner():
    boxes = [
        Box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]),
        Box([-1.0, 0.0, -1.0], [0.0, 2.0, 0.0]),
        Box([-2.0, -2.0, 0.0], [0.0, 0.0, 3.0]),
    ]
    instance = make_cfp(boxes, witness=np.zeros(3))
    assert all(K.contains(np.zeros(3)) for K in instance.sets)
    np.testing.assert_allclose(cfp_projection_oracle(instance, [1.0, -1.0, 2.0]), np.zeros(3), atol=1e-9)


def test_cfp_oracle_rejects_non_polyhedral_sets():
    instance = make_cfp([Ball(np.zeros(2), 1.0)], witness=[0.0, 0.0])
    with pytest.raises(InstanceValidationError):
        cfp_projection_oracle(instance, [2.0, 0.0])


# --- Inéquations variationnelles ---

def test_operator_norm_matches_singular_values(rng):
    for dimension in (2, 4, 6):
        M = rng.normal(size=(dimension, dimension))
        assert operator_norm(M) == pytest.approx(svdvals(M)[0], abs=1e-8)
    assert operator_norm(np.zeros((3, 3))) == 0.0


def test_linear_vi_identity_on_ball():
    instance = make_linear_vi([(np.eye(2), None, Ball(np.zeros(2), 1.0))])
    np.testing.assert_array_equal(instance.known_solution, np.zeros(2))
    assert instance.c1 == pytest.approx(0.5)
    assert instance.bifunctions[0].is_linearized


def test_linear_vi_rotation_plus_identity():
    M = np.array([[1.0, -1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    boxes = [Box(-np.ones(3), np.ones(3)), Box(-2.0 * np.ones(3), 0.5 * np.ones(3)), Box(-0.1 * np.ones(3), np.ones(3))]
    instance = make_linear_vi([(M, None, K) for K in boxes])
    np.testing.assert_array_equal(instance.known_solution, np.zeros(3))
    assert instance.c2 == pytest.approx(np.sqrt(2.0) / 2.0, abs=1e-8)


def test_linear_vi_without_homogeneous_operators_has_no_known_solution():
    instance = make_linear_vi([(np.eye(2), np.array([1.0, 0.0]), Box(-np.ones(2), np.ones(2)))])
    assert instance.known_solution is None


def test_linear_vi_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        make_linear_vi([(np.eye(2), None, Box(-np.ones(3), np.ones(3)))])
    with pytest.raises(DimensionMismatchError):
        make_linear_vi([(np.eye(2), None, WholeSpace(2)), (np.eye(3), None, WholeSpace(3))])


def test_linear_vi_declared_constant_checked(rng):
    K = Box(-np.ones(2), np.ones(2))
    instance = make_linear_vi([(4.0 * np.eye(2), None, K)], lipschitz=[4.0], rng=rng)
    assert instance.c1 == 2.0
    with pytest.raises(InstanceValidationError):
        make_linear_vi([(4.0 * np.eye(2), None, K)], lipschitz=[1.0], rng=rng)


# --- Points fixes ---

def test_identity_map_gives_zero_bifunction(rng):
    instance = make_fixed_point([AffineMap(np.eye(2), np.zeros(2))])
    f = instance.bifunctions[0]
    assert f.c1 == 0.0
    for _ in range(20):
        x, y = rng.normal(size=(2, 2))
        assert f(x, y) == 0.0


def test_halving_map_fixes_origin():
    instance = make_fixed_point([AffineMap(0.5 * np.eye(3), np.zeros(3))])
    np.testing.assert_allclose(instance.known_solution, np.zeros(3), atol=1e-15)
    assert instance.c1 == pytest.approx(0.25)


def test_conjugated_contractions_share_fixed_point(rng):
    p = np.array([1.0, -2.0])
    C1 = np.array([[0.5, 0.2], [-0.1, 0.3]])
    C2 = np.array([[0.0, -0.8], [0.8, 0.0]])
    maps = [conjugated_contraction(p, C1), conjugated_contraction(p, C2)]
    for S in maps:
        np.testing.assert_allclose(S(p), p, atol=1e-12)
    x0 = np.array([3.0, 4.0])
    instance = make_fixed_point(maps, x0=x0)
    np.testing.assert_allclose(instance.known_solution, p, atol=1e-12)
    box = instance.sets[0]
    assert box.contains(x0) and box.contains(p)
    assert box.upper[0] == pytest.approx(40.0)

    final, _ = run_parallel(instance, _default_params(instance, x0, max_iter=20_000, tol_stop=1e-10),
                            check_invariants=True)
    np.testing.assert_allclose(final, p, atol=1e-5)


def test_expansive_map_rejected():
    with pytest.raises(ExpansiveMapError):
        make_fixed_point([AffineMap(1.5 * np.eye(2), np.zeros(2))])


def test_maps_without_common_fixed_point_rejected():
    maps = [conjugated_contraction([0.0, 0.0], 0.5 * np.eye(2)), conjugated_contraction([1.0, 0.0], 0.5 * np.eye(2))]
    with pytest.raises(InstanceValidationError):
        make_fixed_point(maps)


# --- Nash-Cournot ---

def test_nash_cournot_equal_matrices_have_zero_constants():
    P = np.array([[2.0, 0.5], [0.5, 1.0]])
    instance = make_nash_cournot(P, P, [1.0, -1.0], Box([0.0, 0.0], [1.0, 1.0]))
    assert instance.c1 == instance.c2 == pytest.approx(0.0, abs=1e-12)


def test_nash_cournot_random_family_passes_sampling_certificate(rng):
    P, Q, q = _random_nash_cournot_data(rng, 4)
    instance = make_nash_cournot(P, Q, q, Box(np.zeros(4), 3.0 * np.ones(4)), copies=2, rng=rng)
    assert instance.size == 2
    assert instance.c1 == pytest.approx(0.5 * svdvals(P - Q)[0], rel=1e-8)
    assert check_lipschitz_type(instance.bifunctions[0], gaussian_triples(4, rng), 10_000) <= 1e-10


def test_shipped_bifunctions_have_consistent_subgradients(rng):
    P, Q, q = _random_nash_cournot_data(rng, 3)
    bifunctions = [
        nash_cournot_bifunction(P, Q, q),
        linear_operator_bifunction(rng.normal(size=(3, 3)), rng.normal(size=3)),
        affine_map_bifunction(conjugated_contraction([1.0, 0.0, -1.0], 0.5 * np.eye(3))),
    ]
    for f in bifunctions:
        assert certify_subgradient(f, 3, rng, scale=3.0) <= settings.SUBGRADIENT_TOL


def test_nash_cournot_rejects_invalid_data():
    box = Box([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(InstanceValidationError):
        make_nash_cournot(np.eye(2), -np.eye(2), [0.0, 0.0], box)  # Q non semi-définie positive
    with pytest.raises(InstanceValidationError):
        make_nash_cournot(np.zeros((2, 2)), np.eye(2), [0.0, 0.0], box)  # Q - P non semi-définie négative
    with pytest.raises(InstanceValidationError):
        make_nash_cournot(np.eye(2), np.eye(2), [0.0, 0.0], Ball(np.zeros(2), 1.0))


@pytest.mark.parametrize("solver", [run_parallel, run_cyclic])
def test_nash_cournot_final_iterate_is_equilibrium(solver, rng):
    P = np.array([[2.0, 0.5], [0.5, 2.0]])
    Q = np.eye(2)
    K = Box([0.0, 0.0], [5.0, 5.0])
    instance = make_nash_cournot(P, Q, [-1.0, -1.0], K, copies=2, rng=rng)
    x0 = np.array([4.0, 1.0])
    final, _ = solver(instance, _default_params(instance, x0, max_iter=5000, tol_stop=1e-8))
    samples = sample_members(K, rng, 1000, 2, scale=3.0, center=final)
    for f in instance.bifunctions:
        assert min(f(final, y) for y in samples) >= -1e-4


# --- Propriétés communes ---

def test_generated_instances_pass_validation_and_certification(rng):
    rotation = np.array([[1.0, 1.0], [-1.0, 1.0]])
    instances = [
        make_cfp([Halfspace([1.0, 0.0], 0.0), Ball(np.zeros(2), 1.0)], witness=[0.0, 0.0]),
        make_linear_vi([(rotation, None, Box(-np.ones(2), np.ones(2)))]),
        make_fixed_point([conjugated_contraction([0.5, 0.5], 0.9 * np.eye(2))]),
    ]
    for instance in instances:
        report = validate_params(_default_params(instance, np.ones(2), max_iter=50), instance)
        assert report.passed, report.violations
        assert certify_known_solution(instance, rng, count=500) >= -1e-8
