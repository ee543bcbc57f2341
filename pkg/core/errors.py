"""
Exceptions du solveur. Toutes dérivent de CeqpError pour que le front-end CLI
puisse les convertir en codes de sortie.
"""

from typing import Any, Optional


class CeqpError(Exception):
    """Erreur de base du projet."""


class DimensionMismatchError(CeqpError, ValueError):
    """Deux objets de l'espace ambiant n'ont pas la même dimension."""


class InvalidSetError(CeqpError, ValueError):
    """Construction d'un ensemble convexe invalide (bornes inversées, normale nulle...)."""


class EmptySetError(CeqpError):
    """Ensemble sans témoin de non-vacuité."""


class InconsistentCutsError(CeqpError):
    """L'intersection des demi-espaces est vide (ou détectée comme telle)."""


class ProxConvergenceError(CeqpError):
    """La boucle interne du sous-problème prox n'a pas convergé."""

    def __init__(self, message: str, best_residual: float, inner_iters: int):
        super().__init__(message)
        self.best_residual = best_residual
        self.inner_iters = inner_iters


class ParameterValidationError(CeqpError, ValueError):
    """Paramètres du solveur hors de l'enveloppe admissible."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class ConfigError(CeqpError, ValueError):
    """Arguments de ligne de commande ou configuration de résolution invalides."""


class InstanceParseError(CeqpError):
    """Fichier d'instance illisible (syntaxe ou schéma)."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        super().__init__(message)
        self.line = line
        self.field = field


class InstanceValidationError(CeqpError, ValueError):
    """Instance bien formée mais violant une hypothèse (continuité de type Lipschitz, témoin, dimensions...)."""


class ExpansiveMapError(InstanceValidationError):
    """Application affine non nonexpansive."""


class InvariantViolationError(CeqpError):
    """Un diagnostic de convergence est violé au-delà de la tolérance."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration
