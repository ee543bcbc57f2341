# Package services de ceqp
# Ensembles convexes, sous-problèmes prox, coupes, solveurs et générateurs d'instances

import logging

logger = logging.getLogger(__name__)

from .convex_sets import Ball, Box, Halfspace, Hyperplane, Polyhedron, WholeSpace, project_halfspace_intersection
from .cutting_planes import build_anchor_cut, build_cut, build_cut_pair, project_two_halfspaces
from .instances import make_cfp, make_fixed_point, make_linear_vi, make_nash_cournot
from .prox_solver import solve_prox
from .solver_cyclic import cyclic_index, run_cyclic, step_cyclic
from .solver_parallel import run_parallel, step_parallel

# Exporter les fonctions et classes principales
__all__ = [
    'Ball',
    'Box',
    'Halfspace',
    'Hyperplane',
    'Polyhedron',
    'WholeSpace',
    'project_halfspace_intersection',
    'build_cut',
    'build_anchor_cut',
    'build_cut_pair',
    'project_two_halfspaces',
    'solve_prox',
    'step_parallel',
    'run_parallel',
    'cyclic_index',
    'step_cyclic',
    'run_cyclic',
    'make_cfp',
    'make_linear_vi',
    'make_fixed_point',
    'make_nash_cournot',
]
