"""
Diagnostics de convergence évalués à chaque itération: inégalité de type
Fejér, inclusion de l'ensemble solution dans les coupes, monotonie de la
distance à x0 et borne par la distance d'une solution connue.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from core.config import settings
from core.errors import InvariantViolationError
from core.models import CsepInstance, IterationRecord, Point
from services.convex_sets import ConvexSet, WholeSpace, sample_members

logger = logging.getLogger(__name__)


def fejer_slack(x_n: Point, x_star: Point, y: Point, z: Point, lambda_: float, c1: float, c2: float) -> float:
    """
    ||x_n - x*||² - (1-2λc1)||y - x_n||² - (1-2λc2)||z - y||² - ||z - x*||²,
    positif ou nul pour des sous-problèmes résolus exactement.
    """
    return (
        float(np.dot(x_n - x_star, x_n - x_star))
        - (1.0 - 2.0 * lambda_ * c1) * float(np.dot(y - x_n, y - x_n))
        - (1.0 - 2.0 * lambda_ * c2) * float(np.dot(z - y, z - y))
        - float(np.dot(z - x_star, z - x_star))
    )


def containment_slack(cuts: Sequence[ConvexSet], point: Point) -> float:
    """min sur les coupes de b - <a, point>; +inf si toutes les coupes sont vides de contrainte."""
    slacks = [-cut.violation(point) for cut in cuts if not isinstance(cut, WholeSpace)]
    return min(slacks) if slacks else math.inf


@dataclass(frozen=True)
class IterationChecks:
    anchor_slack: float
    fejer_slack: Optional[float] = None
    containment_slack: Optional[float] = None
    bound_slack: Optional[float] = None

    @property
    def ok(self) -> bool:
        if self.anchor_slack < -settings.ANCHOR_MONOTONE_TOL:
            return False
        others = (self.fejer_slack, self.containment_slack, self.bound_slack)
        return all(s is None or s >= -settings.INVARIANT_TOL for s in others)


def evaluate_iteration(x0: Point, x_n: Point, x_next: Point, ys: Sequence[Point], zs: Sequence[Point],
                       lambdas: Sequence[float], cuts: Sequence[ConvexSet], c1: float, c2: float,
                       known_solution: Optional[Point]) -> IterationChecks:
    """
    Diagnostics d'une itération. `ys`, `zs`, `lambdas` sont alignés sur les
    indices traités à cette itération (tous en parallèle, un seul en cyclique);
    `cuts` contient H_n^i et W_n.
    """
    anchor = float(np.linalg.norm(x_next - x0)) - float(np.linalg.norm(x_n - x0))
    if known_solution is None:
        return IterationChecks(anchor_slack=anchor)

    fejer = min(
        fejer_slack(x_n, known_solution, y, z, lam, c1, c2) for y, z, lam in zip(ys, zs, lambdas)
    )
    bound = float(np.linalg.norm(known_solution - x0)) - float(np.linalg.norm(x_n - x0))
    return IterationChecks(
        anchor_slack=anchor,
        fejer_slack=fejer,
        containment_slack=containment_slack(cuts, known_solution),
        bound_slack=bound,
    )


def enforce(checks: IterationChecks, iteration: int) -> None:
    """Lève InvariantViolationError si un diagnostic dépasse sa tolérance."""
    if checks.ok:
        return
    message = (
        f"diagnostic violé à l'itération {iteration}: anchor={checks.anchor_slack:.3e}, "
        f"fejer={checks.fejer_slack}, containment={checks.containment_slack}, bound={checks.bound_slack}"
    )
    logger.warning(message)
    raise InvariantViolationError(message, iteration=iteration)


def certify_known_solution(instance: CsepInstance, rng: np.random.Generator, count: int = 1000,
                           scale: float = 1.0) -> float:
    """
    min sur i et sur y ∈ K_i échantillonnés de f_i(x*, y). Une valeur
    >= -KNOWN_SOLUTION_TOL certifie x* sur l'échantillon.
    """
    x_star = instance.known_solution
    if x_star is None:
        raise ValueError(f"{instance.name}: pas de solution connue à certifier")
    worst = math.inf
    for i, (f, K) in enumerate(instance.pairs, start=1):
        if not K.contains(x_star, 1e-9):
            logger.warning(f"{instance.name}: la solution connue n'est pas dans K_{i}")
            return -math.inf
        samples = sample_members(K, rng, count, instance.dimension, scale=scale, center=x_star)
        worst = min(worst, min(f(x_star, y) for y in samples))
    return worst


def record_iteration(n: int, active_index: Optional[int], x0: Point, x_n: Point, x_next: Point,
                     ys: Sequence[Point], zs: Sequence[Point], checks: IterationChecks,
                     wall_ms: float) -> IterationRecord:
    """Construit la ligne de trace de l'itération n (indices dans l'ordre de i)."""
    return IterationRecord(
        n=n,
        active_index=active_index,
        x=x_n,
        x_next=x_next,
        y_residuals=tuple(float(np.linalg.norm(y - x_n)) for y in ys),
        z_residuals=tuple(float(np.linalg.norm(z - x_n)) for z in zs),
        step_norm=float(np.linalg.norm(x_next - x_n)),
        anchor_dist=float(np.linalg.norm(x_n - x0)),
        anchor_slack=checks.anchor_slack,
        fejer_slack=checks.fejer_slack,
        containment_slack=checks.containment_slack,
        bound_slack=checks.bound_slack,
        checks_ok=checks.ok,
        wall_ms=wall_ms,
    )
