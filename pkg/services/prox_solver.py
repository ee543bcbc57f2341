"""
Sous-problèmes fortement convexes qui produisent y_n et z_n:
    argmin { λ f(x, y) + ½||anchor - y||² : y ∈ K }.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from core.config import settings
from core.errors import ParameterValidationError, ProxConvergenceError
from core.latency_monitor import STEP_PROX_SOLVE, measure_latency
from core.models import Bifunction, Point
from services.convex_sets import ConvexSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ProxResult:
    minimizer: Point
    residual: float
    inner_iters: int
    used_closed_form: bool


def _objective_gradient(f: Bifunction, x: Point, anchor: Point, lambda_: float, y: Point) -> Point:
    return lambda_ * np.asarray(f.subgradient(x, y), dtype=float) + (y - anchor)


def fixed_point_residual(f: Bifunction, x: Point, anchor: Point, lambda_: float, K: ConvexSet, y: Point) -> float:
    """||y - P_K(y - G(y))|| avec G(y) = λ ∂₂f(x, y) + (y - anchor)."""
    gradient = _objective_gradient(f, x, anchor, lambda_, y)
    return float(np.linalg.norm(y - K.project(y - gradient)))


@measure_latency(STEP_PROX_SOLVE)
def solve_prox(f: Bifunction, x: Point, anchor: Point, lambda_: float, K: ConvexSet,
               tol_inner: Optional[float] = None, *, method: str = "auto") -> ProxResult:
    """
    Minimise λ f(x, .) + ½||anchor - .||² sur K.

    y_n s'obtient avec x = anchor = x_n, z_n avec x = y_n^i et
    anchor = x_n. Pour une bifonction linéarisée f(x, y) = <A(x), y - x>, la
    solution est P_K(anchor - λ A(x)). Sinon, gradient projeté sur l'objectif
    1-fortement convexe jusqu'à résidu de point fixe <= tol_inner.

    Args:
        method: "auto" (forme close si disponible) ou "inner" (boucle interne forcée)

    Raises:
        ParameterValidationError: si lambda_ <= 0
        ProxConvergenceError: boucle interne non convergée
    """
    if not lambda_ > 0:
        raise ParameterValidationError(f"λ = {lambda_} doit être > 0 pour le sous-problème prox")
    tol = settings.TOL_INNER if tol_inner is None else tol_inner
    if not tol > 0:
        raise ParameterValidationError(f"tol_inner = {tol} doit être > 0")

    if method == "auto" and f.is_linearized:
        minimizer = K.project(anchor - lambda_ * np.asarray(f.operator(x), dtype=float))
        return ProxResult(minimizer=minimizer, residual=0.0, inner_iters=0, used_closed_form=True)
    return _solve_inner(f, x, anchor, lambda_, K, tol)


def _objective(f: Bifunction, x: Point, anchor: Point, lambda_: float, y: Point) -> float:
    return lambda_ * f(x, y) + 0.5 * float(np.dot(anchor - y, anchor - y))


def _backtracking_step(f: Bifunction, x: Point, anchor: Point, lambda_: float, K: ConvexSet, y: Point,
                       value: float, gradient: Point, step: float) -> Tuple[Point, float, float]:
    """
    Pas projeté avec recherche d'Armijo: step est divisé par deux jusqu'à
    φ(y+) <= φ(y) + <G, y+ - y> + ||y+ - y||² / (2 step). Renvoie
    (y+, φ(y+), pas accepté).
    """
    while True:
        candidate = K.project(y - step * gradient)
        d = candidate - y
        candidate_value = _objective(f, x, anchor, lambda_, candidate)
        bound = value + float(np.dot(gradient, d)) + float(np.dot(d, d)) / (2.0 * step)
        if candidate_value <= bound + 1e-15 * (1.0 + abs(value)) or step <= settings.INNER_MIN_STEP:
            return candidate, candidate_value, step
        step *= 0.5


def _solve_inner(f: Bifunction, x: Point, anchor: Point, lambda_: float, K: ConvexSet, tol: float) -> ProxResult:
    # Pas constant 1/(1 + λL) quand ∂₂f(x, .) est L-lipschitzien, sinon recherche linéaire.
    # L'objectif est 1-fortement convexe: convergence linéaire dans les deux cas.
    constant_step = None
    if f.smoothness is not None:
        constant_step = 1.0 / (1.0 + lambda_ * f.smoothness)

    y = K.project(anchor)
    value = _objective(f, x, anchor, lambda_, y) if constant_step is None else 0.0
    step = 1.0
    best_residual = np.inf
    for j in range(settings.INNER_MAX_ITER):
        gradient = _objective_gradient(f, x, anchor, lambda_, y)
        residual = float(np.linalg.norm(y - K.project(y - gradient)))
        best_residual = min(best_residual, residual)
        if residual <= tol:
            return ProxResult(minimizer=y, residual=residual, inner_iters=j, used_closed_form=False)
        if constant_step is not None:
            y = K.project(y - constant_step * gradient)
            continue
        y, value, accepted = _backtracking_step(f, x, anchor, lambda_, K, y, value, gradient, step)
        # L >= 1 à cause du terme quadratique: pas plafonné à 1
        step = min(1.0, 2.0 * accepted)

    logger.error(f"Sous-problème prox de {f.name} non convergé: meilleur résidu {best_residual:.3e}")
    raise ProxConvergenceError(
        f"prox de {f.name}: résidu {best_residual:.3e} > {tol:.1e} après {settings.INNER_MAX_ITER} itérations",
        best_residual=best_residual,
        inner_iters=settings.INNER_MAX_ITER,
    )


def prox_optimality_residual(f: Bifunction, x: Point, anchor: Point, lambda_: float, K: ConvexSet,
                             y: Point, samples: Iterable[Point]) -> float:
    """
    max sur y' ∈ K échantillonnés de <y - anchor, y - y'> - λ (f(x, y') - f(x, y)).
    Une valeur <= tol certifie la condition d'optimalité du premier ordre sur
    l'échantillon. Les échantillons sont projetés sur K.
    """
    f_y = f(x, y)
    worst = -np.inf
    for sample in samples:
        y_prime = K.project(np.asarray(sample, dtype=float))
        gap = float(np.dot(y - anchor, y - y_prime)) - lambda_ * (f(x, y_prime) - f_y)
        worst = max(worst, gap)
    return float(worst)
