"""
Module pour surveiller et mesurer les latences des différentes étapes du solveur.
"""

import functools
import logging
import threading
import time
from typing import Any, Callable, Dict, Optional

logger = logging.getLogger(__name__)

# Constantes pour les étapes de traitement
STEP_PROX_SOLVE = "prox_solve"
STEP_CUT_PROJECTION = "cut_projection"
STEP_TWO_CUT_PROJECTION = "two_cut_projection"
STEP_OUTER_ITERATION = "outer_iteration"

_STEPS = (STEP_PROX_SOLVE, STEP_CUT_PROJECTION, STEP_TWO_CUT_PROJECTION, STEP_OUTER_ITERATION)

# Les sous-problèmes prox tournent dans plusieurs threads
_lock = threading.Lock()

# Dictionnaire global pour stocker les métriques de latence
latency_metrics: Dict[str, Dict[str, float]] = {
    step: {"count": 0, "total_time": 0.0, "max_time": 0.0} for step in _STEPS
}


def _record(step_name: str, elapsed_time: float) -> None:
    with _lock:
        if step_name in latency_metrics:
            data = latency_metrics[step_name]
            data["count"] += 1
            data["total_time"] += elapsed_time
            data["max_time"] = max(data["max_time"], elapsed_time)


def measure_latency(step_name: str):
    """
    Décorateur pour mesurer la latence d'une fonction synchrone.

    Args:
        step_name: Nom de l'étape de traitement

    Returns:
        Fonction décorée
    """
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            start_time = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                elapsed_time = time.perf_counter() - start_time
                _record(step_name, elapsed_time)

        return wrapper

    return decorator


class LatencyContext:
    """
    Contexte de mesure de latence pour un bloc de code.

    Exemple d'utilisation:
    ```
    with LatencyContext(STEP_OUTER_ITERATION, "n=12") as ctx:
        state = step_parallel(state, instance, params)
    wall_ms = ctx.elapsed_ms
    ```
    """

    def __init__(self, step_name: str, operation_id: Optional[str] = None):
        self.step_name = step_name
        self.operation_id = operation_id
        self.start_time = 0.0
        self.elapsed_ms = 0.0

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        elapsed_time = time.perf_counter() - self.start_time
        self.elapsed_ms = elapsed_time * 1000.0
        _record(self.step_name, elapsed_time)

        log_message = f"Latence {self.step_name}: {elapsed_time:.6f}s"
        if self.operation_id:
            log_message += f" (op: {self.operation_id})"
        logger.debug(log_message)


def get_latency_stats() -> Dict[str, Dict[str, float]]:
    """
    Récupère les statistiques de latence, en millisecondes.

    Returns:
        Dict[str, Dict[str, float]]: count, avg_ms et max_ms par étape
    """
    with _lock:
        snapshot = {step: dict(data) for step, data in latency_metrics.items()}

    stats = {}
    for step, data in snapshot.items():
        count = int(data["count"])
        avg_time = data["total_time"] / count if count > 0 else 0.0
        stats[step] = {
            "count": count,
            "avg_ms": avg_time * 1000.0,
            "max_ms": data["max_time"] * 1000.0,
        }
    return stats


def reset_latency_metrics() -> None:
    """
    Réinitialise les métriques de latence.
    """
    with _lock:
        for step in latency_metrics:
            latency_metrics[step] = {"count": 0, "total_time": 0.0, "max_time": 0.0}
