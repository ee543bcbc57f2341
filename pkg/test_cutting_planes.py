"""
Tests des coupes H_n, W_n et de la projection explicite sur deux demi-espaces.
"""

import numpy as np
import pytest

from core.errors import InconsistentCutsError
from core.models import SolverParams
from services.convex_sets import Halfspace, WholeSpace
from services.cutting_planes import build_anchor_cut, build_cut, build_cut_pair, project_two_halfspaces
from services.instances import make_cfp
from services.invariants import containment_slack
from services.solver_cyclic import CyclicState, step_cyclic
from services.solver_parallel import ParallelState, step_parallel


def test_build_cut_through_midpoint():
    cut = build_cut(np.array([2.0, 0.0]), np.array([1.0, 0.0]), 0.5)
    assert isinstance(cut, Halfspace)
    np.testing.assert_allclose(cut.a, [1.0, 0.0])
    assert cut.b == pytest.approx(1.5)
    assert cut.contains(np.array([1.5, 3.0]))
    assert not cut.contains(np.array([2.0, 0.0]))


def test_degenerate_cuts_are_whole_space():
    x = np.array([1.0, -2.0])
    assert isinstance(build_cut(x, x.copy(), 0.3), WholeSpace)
    assert isinstance(build_anchor_cut(x, x.copy()), WholeSpace)
    pair = build_cut_pair(x, x, x, 0.5)
    assert pair.degenerate_h and pair.degenerate_w
    np.testing.assert_array_equal(pair.v, x)


def test_anchor_cut_keeps_points_behind_current_iterate():
    x0, x_n = np.array([0.0, 0.0]), np.array([1.0, 1.0])
    w = build_anchor_cut(x0, x_n)
    assert w.contains(x_n)
    assert w.contains(np.array([2.0, 2.0]))
    assert not w.contains(x0)


def _random_pair(rng, dimension):
    p = rng.normal(size=dimension)
    cuts = []
    for _ in range(2):
        a = rng.normal(size=dimension)
        cuts.append(Halfspace(a, float(np.dot(a, p)) + abs(rng.normal())))
    return cuts


def test_explicit_projection_matches_exact_qp(rng, qp_oracle):
    for trial in range(1000):
        dimension = 2 + trial % 7
        h, w = _random_pair(rng, dimension)
        x0 = rng.normal(scale=3.0, size=dimension)
        expected = qp_oracle(np.array([h.a, w.a]), np.array([h.b, w.b]), x0)
        np.testing.assert_allclose(project_two_halfspaces(x0, h, w), expected, atol=1e-8)


def test_projection_with_one_vacuous_cut(rng):
    h = Halfspace([1.0, 2.0], 1.0)
    x0 = np.array([3.0, 3.0])
    np.testing.assert_allclose(project_two_halfspaces(x0, h, WholeSpace(2)), h.project(x0))
    np.testing.assert_allclose(project_two_halfspaces(x0, WholeSpace(2), h), h.project(x0))
    np.testing.assert_array_equal(project_two_halfspaces(x0, WholeSpace(2), WholeSpace(2)), x0)


def test_parallel_normals_use_generic_projection():
    h = Halfspace([1.0, 0.0], 1.0)
    w = Halfspace([2.0, 0.0], 1.0)
    np.testing.assert_allclose(project_two_halfspaces(np.array([3.0, 1.0]), h, w), [0.5, 1.0], atol=1e-12)


def test_empty_intersection_raises():
    h = Halfspace([1.0, 0.0], -1.0)
    w = Halfspace([-1.0, 0.0], -1.0)
    with pytest.raises(InconsistentCutsError):
        project_two_halfspaces(np.zeros(2), h, w)


def test_short_normal_cut_keeps_its_constraint():
    # h viole x0 de plus de 1e-6 mais sa normale est de norme 2^-20
    e = 2.0 ** -20
    x0 = np.array([1.0, 1.0])
    x_n = np.array([e, e])
    h = build_cut(x_n, np.array([0.0, e]), 0.5)
    w = build_anchor_cut(x0, x_n)
    np.testing.assert_allclose(project_two_halfspaces(x0, h, w), [0.5 * e, 1.5 * e], rtol=1e-8, atol=0.0)


@pytest.mark.parametrize("algo", ["parallel", "cyclic"])
def test_solution_set_stays_inside_every_cut(algo, rng):
    instance = make_cfp([Halfspace([1.0, 0.0], 0.0), Halfspace([1.0, -1.0], 0.5)], witness=[0.0, 0.0])
    x0 = np.array([2.0, 1.5])
    params = SolverParams.constant(1.0, 0.5, x0)
    solutions = [p for p in rng.uniform(-4.0, 0.5, size=(2000, 2))
                 if all(K.contains(p) for K in instance.sets)][:300]
    assert len(solutions) > 50
    if algo == "parallel":
        state = ParallelState.initial(params)
    else:
        state = CyclicState.initial(params, instance)
    for _ in range(40):
        if algo == "parallel":
            state = step_parallel(state, instance, params)
            cuts = [*state.cuts, state.anchor_cut]
        else:
            state = step_cyclic(state, instance, params)
            cuts = [state.cut_pair.h, state.cut_pair.w]
        for p in solutions:
            assert containment_slack(cuts, p) >= -1e-10
