"""
Fixtures partagées des tests ceqp.
"""

import itertools
import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Ajouter le répertoire courant au PYTHONPATH
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

FIXTURES_DIR = Path(__file__).parent / "fixtures"


def brute_force_projection(A: np.ndarray, b: np.ndarray, x0: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """
    Projection de x0 sur {z : Az <= b} par énumération de tous les sous-ensembles
    de contraintes actives: parmi les candidats admissibles, le plus proche de x0.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    norms = np.linalg.norm(A, axis=1)

    candidates = [x0]
    for size in range(1, A.shape[0] + 1):
        for rows in itertools.combinations(range(A.shape[0]), size):
            A_s, b_s = A[list(rows)], b[list(rows)]
            multipliers = np.linalg.lstsq(A_s @ A_s.T, A_s @ x0 - b_s, rcond=None)[0]
            candidates.append(x0 - A_s.T @ multipliers)

    # distance signée à chaque frontière, pour que les normales courtes comptent autant
    feasible = [z for z in candidates if np.all((A @ z - b) / norms <= tol * (1.0 + np.linalg.norm(x0)))]
    assert feasible, "intersection vide"
    return min(feasible, key=lambda z: float(np.linalg.norm(z - x0)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def qp_oracle():
    return brute_force_projection


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES_DIR
