"""
Algorithme hybride parallèle extragradient-coupes: N sous-problèmes prox en
parallèle, puis projection de x0 sur l'intersection des N+1 coupes.
"""

import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.config import settings
from core.latency_monitor import STEP_OUTER_ITERATION, LatencyContext
from core.models import CsepInstance, IterateTrace, Point, SolverParams, StopReason, require_valid_params
from services.convex_sets import WholeSpace, project_halfspace_intersection
from services.cutting_planes import Cut, build_anchor_cut, build_cut, project_two_halfspaces
from services.invariants import enforce, evaluate_iteration, record_iteration
from services.prox_solver import solve_prox

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ParallelState:
    """
    État après l'itération n - 1: `x` est x_n; `ys`, `zs`, `cuts` et
    `anchor_cut` sont ceux de l'itération qui a produit x_n.
    """
    n: int
    x: Point
    ys: Tuple[Point, ...] = ()
    zs: Tuple[Point, ...] = ()
    lambdas: Tuple[float, ...] = ()
    cuts: Tuple[Cut, ...] = ()
    anchor_cut: Optional[Cut] = None
    stopped: Optional[StopReason] = None

    @classmethod
    def initial(cls, params: SolverParams) -> "ParallelState":
        return cls(n=0, x=params.x0.copy())


def project_cuts(x0: Point, cuts: Sequence[Cut], anchor_cut: Cut) -> Point:
    """
    P_{H^1 ∩ ... ∩ H^N ∩ W}(x0). Les coupes WholeSpace sont écartées;
    avec une seule coupe H, la formule explicite à deux demi-espaces est
    utilisée, comme dans l'algorithme cyclique.
    """
    if len(cuts) == 1:
        return project_two_halfspaces(x0, cuts[0], anchor_cut)
    active = [c for c in (*cuts, anchor_cut) if not isinstance(c, WholeSpace)]
    return project_halfspace_intersection(active, x0)


def step_parallel(state: ParallelState, instance: CsepInstance, params: SolverParams,
                  executor: Optional[Executor] = None) -> ParallelState:
    """
    Une itération complète à partir de x_n. Les N couples (y_n^i, z_n^i) sont indépendants
    et peuvent être calculés par `executor`; le résultat est rangé par i.

    Raises:
        ProxConvergenceError, InconsistentCutsError
    """
    n, x_n, x0 = state.n, state.x, params.x0
    indices = range(1, instance.size + 1)
    lambdas = [params.lambda_at(n, i) for i in indices]
    gammas = [params.gamma_at(n, i) for i in indices]

    def solve_index(i: int) -> Tuple[Point, Point]:
        f, K = instance.pairs[i - 1]
        lam = lambdas[i - 1]
        y = solve_prox(f, x_n, x_n, lam, K, params.tol_inner).minimizer
        z = solve_prox(f, y, x_n, lam, K, params.tol_inner).minimizer
        return y, z

    if executor is None or instance.size == 1:
        pairs = [solve_index(i) for i in indices]
    else:
        pairs = list(executor.map(solve_index, indices))
    ys = tuple(y for y, _ in pairs)
    zs = tuple(z for _, z in pairs)

    cuts = tuple(build_cut(x_n, z, gamma) for z, gamma in zip(zs, gammas))
    anchor_cut = build_anchor_cut(x0, x_n)
    x_next = project_cuts(x0, cuts, anchor_cut)

    stopped = None
    if all(isinstance(c, WholeSpace) for c in cuts):
        logger.debug(f"Itération {n}: z_n^i = x_n pour tout i, point fixe")
        stopped = StopReason.FIXED_POINT

    return ParallelState(
        n=n + 1,
        x=x_next,
        ys=ys,
        zs=zs,
        lambdas=tuple(lambdas),
        cuts=cuts,
        anchor_cut=anchor_cut,
        stopped=stopped,
    )


def run_parallel(instance: CsepInstance, params: SolverParams, *, workers: Optional[int] = None,
                 check_invariants: bool = False) -> Tuple[Point, IterateTrace]:
    """
    Itère step_parallel jusqu'à ||x_{n+1} - x_n|| <= tol_stop et
    max_i ||z_n^i - x_n|| <= tol_stop, point fixe exact, ou max_iter.

    Args:
        workers: nombre de threads pour les sous-problèmes (défaut: settings)
        check_invariants: lever InvariantViolationError dès qu'un diagnostic
            dépasse sa tolérance (nécessite une solution connue)

    Returns:
        Tuple[Point, IterateTrace]: dernier itéré et trace complète
    """
    require_valid_params(params, instance)
    workers = settings.PARALLEL_WORKERS if workers is None else workers
    logger.info(
        f"Résolution parallèle de {instance.name}: N={instance.size}, n={instance.dimension}, "
        f"max_iter={params.max_iter}, workers={workers}"
    )

    trace = IterateTrace("parallel")
    state = ParallelState.initial(params)
    executor = ThreadPoolExecutor(max_workers=min(workers, instance.size)) if workers > 1 and instance.size > 1 else None
    try:
        for _ in range(params.max_iter):
            with LatencyContext(STEP_OUTER_ITERATION, f"parallel n={state.n}") as ctx:
                new_state = step_parallel(state, instance, params, executor)
            checks = evaluate_iteration(
                params.x0, state.x, new_state.x, new_state.ys, new_state.zs, new_state.lambdas,
                (*new_state.cuts, new_state.anchor_cut), instance.c1, instance.c2, instance.known_solution,
            )
            record = record_iteration(
                state.n, None, params.x0, state.x, new_state.x, new_state.ys, new_state.zs, checks, ctx.elapsed_ms
            )
            trace.append(record)
            if check_invariants:
                enforce(checks, state.n)
            state = new_state
            if state.stopped is not None:
                break
            if record.step_norm <= params.tol_stop and record.max_z_residual <= params.tol_stop:
                state = replace(state, stopped=StopReason.CONVERGED)
                break
        else:
            state = replace(state, stopped=StopReason.MAX_ITER)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    trace.stop_reason = state.stopped
    trace.final = state.x
    logger.info(f"Fin de la résolution parallèle: {state.stopped.value} après {len(trace)} itérations")
    return state.x, trace


def vi_reference_step(x_n: Point, n: int, instance: CsepInstance, params: SolverParams) -> Point:
    """
    Récurrence explicite pour des bifonctions linéarisées:
    y^i = P_Ki(x_n - λ A_i(x_n)), z^i = P_Ki(x_n - λ A_i(y^i)), puis la même
    projection de x0 sur les coupes.
    """
    cuts: List[Cut] = []
    for i, (f, K) in enumerate(instance.pairs, start=1):
        if f.operator is None:
            raise ValueError(f"{f.name} n'est pas linéarisée")
        lam = params.lambda_at(n, i)
        y = K.project(x_n - lam * np.asarray(f.operator(x_n)))
        z = K.project(x_n - lam * np.asarray(f.operator(y)))
        cuts.append(build_cut(x_n, z, params.gamma_at(n, i)))
    return project_cuts(params.x0, cuts, build_anchor_cut(params.x0, x_n))
