"""
Coupes H_n (séparation de x_n et de l'ensemble solution) et W_n (ancrage à
x0), et projection explicite de x0 sur l'intersection de deux demi-espaces.
"""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from core.config import settings
from core.latency_monitor import STEP_TWO_CUT_PROJECTION, measure_latency
from core.models import Point
from services.convex_sets import Halfspace, WholeSpace, project_halfspace_intersection

logger = logging.getLogger(__name__)

Cut = Union[Halfspace, WholeSpace]


@dataclass(frozen=True, eq=False)
class CutPair:
    h: Cut
    w: Cut
    v: Point
    degenerate_h: bool
    degenerate_w: bool


def build_cut(x_n: Point, z_n: Point, gamma_n: float) -> Cut:
    """
    H = {z : <x_n - z_n, z - v_n> <= 0} avec v_n = x_n + γ_n (z_n - x_n).
    WholeSpace quand z_n = x_n.
    """
    a = x_n - z_n
    if not np.any(a):
        return WholeSpace(x_n.shape[0])
    v = x_n + gamma_n * (z_n - x_n)
    return Halfspace(a, float(np.dot(a, v)))


def build_anchor_cut(x0: Point, x_n: Point) -> Cut:
    """W = {z : <x0 - x_n, x_n - z> >= 0} = {z : <x0 - x_n, z> <= <x0 - x_n, x_n>}."""
    a = x0 - x_n
    if not np.any(a):
        return WholeSpace(x_n.shape[0])
    return Halfspace(a, float(np.dot(a, x_n)))


def build_cut_pair(x0: Point, x_n: Point, z_n: Point, gamma_n: float) -> CutPair:
    h = build_cut(x_n, z_n, gamma_n)
    w = build_anchor_cut(x0, x_n)
    return CutPair(
        h=h,
        w=w,
        v=x_n + gamma_n * (z_n - x_n),
        degenerate_h=isinstance(h, WholeSpace),
        degenerate_w=isinstance(w, WholeSpace),
    )


def _inside(cut: Cut, x: Point, x0: Point) -> bool:
    """Distance signée à la frontière, tolérance relative à ||x0|| + ||x|| + |b| / ||a||."""
    if isinstance(cut, WholeSpace):
        return True
    norm_a = float(np.linalg.norm(cut.a))
    scale = float(np.linalg.norm(x0)) + float(np.linalg.norm(x)) + abs(cut.b) / norm_a
    return cut.violation(x) / norm_a <= settings.FEASIBILITY_TOL * scale


@measure_latency(STEP_TWO_CUT_PROJECTION)
def project_two_halfspaces(x0: Point, h: Cut, w: Cut) -> Point:
    """
    Projection exacte de x0 sur h ∩ w.

    1. x0 dans h ∩ w: x0.
    2. P_h(x0) (projection sur l'hyperplan quand x0 viole h), retenue si elle
       est dans w.
    3. Les deux contraintes actives: x0 + t1 a_h + t2 a_w avec (t1, t2) solution
       du système 2x2 de Gram. Système singulier ou solution non admissible:
       projection générique sur {h, w}.

    Raises:
        InconsistentCutsError: intersection vide
    """
    x0 = np.asarray(x0, dtype=float)
    if _inside(h, x0, x0) and _inside(w, x0, x0):
        return x0.copy()

    if isinstance(h, WholeSpace):
        return project_halfspace_intersection([w], x0)

    excess = float(np.dot(h.a, x0)) - h.b
    candidate = x0 - (excess / float(np.dot(h.a, h.a))) * h.a if excess > 0 else x0.copy()
    if _inside(w, candidate, x0):
        return candidate
    if isinstance(w, WholeSpace):
        return candidate

    gram = np.array([
        [np.dot(h.a, h.a), np.dot(h.a, w.a)],
        [np.dot(h.a, w.a), np.dot(w.a, w.a)],
    ])
    rhs = np.array([h.b - np.dot(h.a, x0), w.b - np.dot(w.a, x0)])
    determinant = gram[0, 0] * gram[1, 1] - gram[0, 1] ** 2
    if determinant > 1e-14 * gram[0, 0] * gram[1, 1]:
        t1, t2 = np.linalg.solve(gram, rhs)
        z = x0 + t1 * h.a + t2 * w.a
        # t <= 0: multiplicateurs de Lagrange positifs
        if t1 <= 0 and t2 <= 0 and _inside(h, z, x0) and _inside(w, z, x0):
            return z
        logger.debug(f"Système 2x2 non admissible (t1={t1:.3e}, t2={t2:.3e}), projection générique")
    else:
        logger.debug("Normales parallèles, projection générique sur {h, w}")
    return project_halfspace_intersection([h, w], x0)
