"""
Algorithme hybride cyclique extragradient-coupes: un seul sous-problème par
itération, indice [n] = n mod N + 1, et projection explicite de x0 sur deux
demi-espaces.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from core.latency_monitor import STEP_OUTER_ITERATION, LatencyContext
from core.models import CsepInstance, IterateTrace, Point, SolverParams, StopReason, require_valid_params
from services.cutting_planes import CutPair, build_cut_pair, project_two_halfspaces
from services.invariants import enforce, evaluate_iteration, record_iteration
from services.prox_solver import solve_prox

logger = logging.getLogger(__name__)


def cyclic_index(n: int, N: int) -> int:
    """[n] = n mod N + 1, dans {1..N}."""
    if N <= 0:
        raise ValueError(f"N = {N} doit être >= 1")
    if n < 0:
        raise ValueError(f"n = {n} doit être >= 0")
    return n % N + 1


@dataclass(frozen=True, eq=False)
class CyclicState:
    """
    État avant l'itération n: `active_index` vaut [n]; `processed_index`, `y`,
    `z` et `cut_pair` sont ceux de l'itération qui a produit x_n.
    """
    n: int
    x: Point
    active_index: int
    processed_index: Optional[int] = None
    y: Optional[Point] = None
    z: Optional[Point] = None
    lambda_: Optional[float] = None
    cut_pair: Optional[CutPair] = None
    stopped: Optional[StopReason] = None

    @classmethod
    def initial(cls, params: SolverParams, instance: CsepInstance) -> "CyclicState":
        return cls(n=0, x=params.x0.copy(), active_index=cyclic_index(0, instance.size))


def step_cyclic(state: CyclicState, instance: CsepInstance, params: SolverParams) -> CyclicState:
    """
    Une itération pour l'indice i = [n]: y_n et z_n par deux sous-problèmes prox
    sur (f_i, K_i), puis x_{n+1} = P_{H_n ∩ W_n}(x0).

    Les schémas λ et γ sont évalués en (n, [n]).

    Raises:
        ProxConvergenceError, InconsistentCutsError
    """
    n, x_n, x0 = state.n, state.x, params.x0
    i = cyclic_index(n, instance.size)
    f, K = instance.pairs[i - 1]
    lam = params.lambda_at(n, i)

    y = solve_prox(f, x_n, x_n, lam, K, params.tol_inner).minimizer
    z = solve_prox(f, y, x_n, lam, K, params.tol_inner).minimizer
    cut_pair = build_cut_pair(x0, x_n, z, params.gamma_at(n, i))
    x_next = project_two_halfspaces(x0, cut_pair.h, cut_pair.w)

    # Avec N = 1, EP(f_[n]) = F et un point fixe de l'indice actif termine
    stopped = None
    if instance.size == 1 and cut_pair.degenerate_h:
        stopped = StopReason.FIXED_POINT

    return CyclicState(
        n=n + 1,
        x=x_next,
        active_index=cyclic_index(n + 1, instance.size),
        processed_index=i,
        y=y,
        z=z,
        lambda_=lam,
        cut_pair=cut_pair,
        stopped=stopped,
    )


def run_cyclic(instance: CsepInstance, params: SolverParams, *,
               check_invariants: bool = False) -> Tuple[Point, IterateTrace]:
    """
    Itère step_cyclic. Arrêt quand ||z_n - x_n|| <= tol_stop et
    ||x_{n+1} - x_n|| <= tol_stop sur N itérations consécutives (un balayage
    complet des indices), ou max_iter.

    Returns:
        Tuple[Point, IterateTrace]: dernier itéré et trace complète
    """
    require_valid_params(params, instance)
    logger.info(
        f"Résolution cyclique de {instance.name}: N={instance.size}, n={instance.dimension}, "
        f"max_iter={params.max_iter}"
    )

    trace = IterateTrace("cyclic")
    state = CyclicState.initial(params, instance)
    quiet_streak = 0
    for _ in range(params.max_iter):
        with LatencyContext(STEP_OUTER_ITERATION, f"cyclic n={state.n}") as ctx:
            new_state = step_cyclic(state, instance, params)
        pair = new_state.cut_pair
        checks = evaluate_iteration(
            params.x0, state.x, new_state.x, (new_state.y,), (new_state.z,), (new_state.lambda_,),
            (pair.h, pair.w), instance.c1, instance.c2, instance.known_solution,
        )
        record = record_iteration(
            state.n, new_state.processed_index, params.x0, state.x, new_state.x,
            (new_state.y,), (new_state.z,), checks, ctx.elapsed_ms,
        )
        trace.append(record)
        if check_invariants:
            enforce(checks, state.n)
        state = new_state
        if state.stopped is not None:
            break

        if record.step_norm <= params.tol_stop and record.max_z_residual <= params.tol_stop:
            quiet_streak += 1
        else:
            quiet_streak = 0
        if quiet_streak >= instance.size:
            state = replace(state, stopped=StopReason.CONVERGED)
            break
    else:
        state = replace(state, stopped=StopReason.MAX_ITER)

    trace.stop_reason = state.stopped
    trace.final = state.x
    logger.info(f"Fin de la résolution cyclique: {state.stopped.value} après {len(trace)} itérations")
    return state.x, trace


def vi_reference_step(x_n: Point, n: int, instance: CsepInstance, params: SolverParams) -> Point:
    """
    Récurrence explicite pour des bifonctions linéarisées, indice [n]:
    y = P_K(x_n - λ A(x_n)), z = P_K(x_n - λ A(y)).
    """
    i = cyclic_index(n, instance.size)
    f, K = instance.pairs[i - 1]
    if f.operator is None:
        raise ValueError(f"{f.name} n'est pas linéarisée")
    lam = params.lambda_at(n, i)
    y = K.project(x_n - lam * np.asarray(f.operator(x_n)))
    z = K.project(x_n - lam * np.asarray(f.operator(y)))
    pair = build_cut_pair(params.x0, x_n, z, params.gamma_at(n, i))
    return project_two_halfspaces(params.x0, pair.h, pair.w)
