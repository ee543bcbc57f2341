"""
Ensembles convexes fermés de R^n: oracles de projection et d'appartenance.
Contient aussi la projection sur une intersection finie de demi-espaces
(énumération exacte des ensembles actifs ou algorithme de Dykstra).
"""

import abc
import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.config import settings
from core.errors import DimensionMismatchError, EmptySetError, InconsistentCutsError, InvalidSetError
from core.latency_monitor import STEP_CUT_PROJECTION, measure_latency
from core.models import Point, as_point

logger = logging.getLogger(__name__)


class ConvexSet(abc.ABC):
    """Ensemble convexe fermé non vide de R^n."""

    kind: str = "abstract"

    @property
    @abc.abstractmethod
    def dimension(self) -> Optional[int]:
        """Dimension de l'espace ambiant, None si l'ensemble s'adapte à tout n."""

    @abc.abstractmethod
    def _project(self, x: Point) -> Point:
        ...

    @abc.abstractmethod
    def violation(self, x: Point) -> float:
        """Plus grande violation des contraintes définissantes (<= 0 dans l'ensemble)."""

    def project(self, x: Point) -> Point:
        return self._project(_checked(self, x))

    def contains(self, x: Point, tol: float = 0.0) -> bool:
        return self.violation(_checked(self, x)) <= tol


def _checked(convex_set: ConvexSet, x: Point) -> Point:
    x = np.asarray(x, dtype=float)
    dimension = convex_set.dimension
    if dimension is not None and x.shape != (dimension,):
        raise DimensionMismatchError(
            f"point de forme {x.shape} pour un ensemble {convex_set.kind} de dimension {dimension}"
        )
    return x


@dataclass(frozen=True, eq=False)
class WholeSpace(ConvexSet):
    ambient_dimension: Optional[int] = None
    kind = "whole_space"

    @property
    def dimension(self) -> Optional[int]:
        return self.ambient_dimension

    def _project(self, x: Point) -> Point:
        return x.copy()

    def violation(self, x: Point) -> float:
        return 0.0


@dataclass(frozen=True, eq=False)
class Box(ConvexSet):
    lower: Point
    upper: Point
    kind = "box"

    def __post_init__(self):
        lower = as_point(self.lower, name="box.lower")
        upper = as_point(self.upper, lower.shape[0], name="box.upper")
        if np.any(lower > upper):
            raise InvalidSetError(f"bornes de la boîte inversées: lower={lower}, upper={upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    def _project(self, x: Point) -> Point:
        return np.clip(x, self.lower, self.upper)

    def violation(self, x: Point) -> float:
        return float(max(np.max(self.lower - x), np.max(x - self.upper)))


@dataclass(frozen=True, eq=False)
class Ball(ConvexSet):
    center: Point
    radius: float
    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center, name="ball.center"))
        if not np.isfinite(self.radius) or self.radius < 0:
            raise InvalidSetError(f"rayon de boule invalide: {self.radius}")

    @property
    def dimension(self) -> int:
        return self.center.shape[0]

    def _project(self, x: Point) -> Point:
        offset = x - self.center
        distance = float(np.linalg.norm(offset))
        if distance <= self.radius:
            return x.copy()
        return self.center + offset * (self.radius / distance)

    def violation(self, x: Point) -> float:
        return float(np.linalg.norm(x - self.center)) - self.radius


@dataclass(frozen=True, eq=False)
class Halfspace(ConvexSet):
    """{z : <a, z> <= b}, normale non normalisée."""
    a: Point
    b: float
    kind = "halfspace"

    def __post_init__(self):
        a = as_point(self.a, name="halfspace.a")
        if not np.any(a):
            raise InvalidSetError("demi-espace de normale nulle")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dimension(self) -> int:
        return self.a.shape[0]

    def _project(self, x: Point) -> Point:
        excess = float(np.dot(self.a, x)) - self.b
        if excess <= 0:
            return x.copy()
        return x - (excess / float(np.dot(self.a, self.a))) * self.a

    def violation(self, x: Point) -> float:
        return float(np.dot(self.a, x)) - self.b


@dataclass(frozen=True, eq=False)
class Hyperplane(ConvexSet):
    """{z : <a, z> = b}."""
    a: Point
    b: float
    kind = "hyperplane"

    def __post_init__(self):
        a = as_point(self.a, name="hyperplane.a")
        if not np.any(a):
            raise InvalidSetError("hyperplan de normale nulle")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dimension(self) -> int:
        return self.a.shape[0]

    def _project(self, x: Point) -> Point:
        return x - ((float(np.dot(self.a, x)) - self.b) / float(np.dot(self.a, self.a))) * self.a

    def violation(self, x: Point) -> float:
        return abs(float(np.dot(self.a, x)) - self.b)


@dataclass(frozen=True, eq=False)
class Polyhedron(ConvexSet):
    """
    Intersection finie de demi-espaces. La non-vacuité est certifiée par un
    point témoin; sans témoin, la projection est refusée.
    """
    halfspaces: Tuple[Halfspace, ...]
    witness: Optional[Point] = None
    kind = "polyhedron"

    def __post_init__(self):
        halfspaces = tuple(self.halfspaces)
        if not halfspaces:
            raise InvalidSetError("polyèdre sans contrainte (utiliser WholeSpace)")
        dimensions = {h.dimension for h in halfspaces}
        if len(dimensions) != 1:
            raise DimensionMismatchError(f"demi-espaces de dimensions différentes: {sorted(dimensions)}")
        object.__setattr__(self, "halfspaces", halfspaces)
        if self.witness is not None:
            witness = as_point(self.witness, halfspaces[0].dimension, name="polyhedron.witness")
            worst = max(h.violation(witness) for h in halfspaces)
            if worst > 1e-9:
                raise InvalidSetError(f"le témoin viole le polyèdre de {worst:.3e}")
            object.__setattr__(self, "witness", witness)

    @property
    def dimension(self) -> int:
        return self.halfspaces[0].dimension

    def _project(self, x: Point) -> Point:
        if self.witness is None:
            raise EmptySetError("polyèdre sans témoin de non-vacuité")
        return project_halfspace_intersection(self.halfspaces, x)

    def violation(self, x: Point) -> float:
        return max(h.violation(x) for h in self.halfspaces)


def project(convex_set: ConvexSet, x: Point) -> Point:
    """Projection métrique P_C(x)."""
    return convex_set.project(x)


def contains(convex_set: ConvexSet, x: Point, tol: float = 0.0) -> bool:
    """Vrai si x viole chaque contrainte définissante d'au plus `tol`."""
    if tol < 0:
        raise ValueError(f"tolérance négative: {tol}")
    return convex_set.contains(x, tol)


def is_polyhedral(convex_set: ConvexSet) -> bool:
    return isinstance(convex_set, (WholeSpace, Box, Halfspace, Hyperplane, Polyhedron))


def to_halfspaces(convex_set: ConvexSet, dimension: int) -> List[Halfspace]:
    """Réécrit un ensemble polyédral comme liste de demi-espaces."""
    if isinstance(convex_set, WholeSpace):
        return []
    if isinstance(convex_set, Halfspace):
        return [convex_set]
    if isinstance(convex_set, Hyperplane):
        return [Halfspace(convex_set.a, convex_set.b), Halfspace(-convex_set.a, -convex_set.b)]
    if isinstance(convex_set, Polyhedron):
        return list(convex_set.halfspaces)
    if isinstance(convex_set, Box):
        cuts = []
        for j in range(dimension):
            e = np.zeros(dimension)
            e[j] = 1.0
            cuts.append(Halfspace(e, convex_set.upper[j]))
            cuts.append(Halfspace(-e, -convex_set.lower[j]))
        return cuts
    raise InvalidSetError(f"ensemble {convex_set.kind} non polyédral")


def sample_members(convex_set: ConvexSet, rng: np.random.Generator, count: int,
                   dimension: int, scale: float = 1.0, center: Optional[Point] = None) -> List[Point]:
    """Points de l'ensemble obtenus en projetant des tirages gaussiens."""
    origin = np.zeros(dimension) if center is None else center
    draws = origin + rng.normal(scale=scale, size=(count, dimension))
    return [convex_set.project(d) for d in draws]


def _stack(cuts: Sequence[ConvexSet], dimension: int) -> Tuple[np.ndarray, np.ndarray]:
    rows = [c for c in cuts if not isinstance(c, WholeSpace)]
    for c in rows:
        if not isinstance(c, Halfspace):
            raise InvalidSetError(f"coupe de type {c.kind} au lieu d'un demi-espace")
        if c.dimension != dimension:
            raise DimensionMismatchError(f"coupe de dimension {c.dimension} pour un point de dimension {dimension}")
    if not rows:
        return np.zeros((0, dimension)), np.zeros(0)
    return np.array([c.a for c in rows]), np.array([c.b for c in rows])


def _row_distances(A: np.ndarray, b: np.ndarray, z: Point, x0: Point) -> Tuple[np.ndarray, np.ndarray]:
    """
    Distances signées de z aux frontières {<a_r, z> = b_r} et échelle de chaque
    ligne, ||x0|| + ||z|| + |b_r| / ||a_r||, à multiplier par une tolérance
    relative. Aucun plancher absolu: une normale courte reste aussi exigeante
    qu'une longue.
    """
    norms = np.linalg.norm(A, axis=1)
    distances = (A @ z - b) / norms
    scale = np.linalg.norm(x0) + np.linalg.norm(z) + np.abs(b) / norms
    return distances, scale


@measure_latency(STEP_CUT_PROJECTION)
def project_halfspace_intersection(cuts: Sequence[ConvexSet], x0: Point, tol: Optional[float] = None,
                                   method: str = "auto") -> Point:
    """
    argmin ||z - x0|| sur l'intersection des demi-espaces `cuts` (les entrées
    WholeSpace sont ignorées).

    Args:
        cuts: demi-espaces {z : <a, z> <= b}
        x0: point à projeter
        tol: tolérance de l'incrément de Dykstra
        method: "auto", "active_set" ou "dykstra"

    Raises:
        InconsistentCutsError: intersection vide détectée
    """
    x0 = np.asarray(x0, dtype=float)
    A, b = _stack(cuts, x0.shape[0])
    if A.shape[0] == 0 or np.all(A @ x0 - b <= 0):
        return x0.copy()

    if method == "auto":
        method = "active_set" if A.shape[0] <= settings.EXACT_CUT_LIMIT else "dykstra"
    if method == "active_set":
        return _project_active_set(A, b, x0)
    if method == "dykstra":
        return _project_dykstra(A, b, x0, settings.DYKSTRA_TOL if tol is None else tol)
    raise ValueError(f"méthode de projection inconnue: {method}")


def _project_active_set(A: np.ndarray, b: np.ndarray, x0: Point) -> Point:
    """
    Énumère les sous-ensembles de contraintes par taille croissante. Pour
    chacun, projette x0 sur la variété affine {A_S z = b_S}; le premier
    candidat admissible à multiplicateurs positifs vérifie KKT et est la
    projection. À défaut, le candidat admissible le plus proche est retenu.
    """
    m = A.shape[0]
    best: Optional[Point] = None
    best_distance = np.inf
    for size in range(1, m + 1):
        for subset in itertools.combinations(range(m), size):
            rows = list(subset)
            A_s, b_s = A[rows], b[rows]
            gram = A_s @ A_s.T
            rhs = A_s @ x0 - b_s
            try:
                multipliers = np.linalg.solve(gram, rhs)
            except np.linalg.LinAlgError:
                multipliers = np.linalg.lstsq(gram, rhs, rcond=None)[0]
            z = x0 - A_s.T @ multipliers
            distances, scale = _row_distances(A, b, z, x0)
            if np.any(np.abs(distances[rows]) > settings.ACTIVE_SET_TOL * scale[rows]):
                continue
            # lignes hors du sous-ensemble: tolérance serrée, sinon x_n passe pour admissible
            if np.any(distances > settings.FEASIBILITY_TOL * scale):
                continue
            if np.all(multipliers >= -1e-12 * (1.0 + np.max(np.abs(multipliers)))):
                return z
            distance = float(np.linalg.norm(z - x0))
            if distance < best_distance:
                best, best_distance = z, distance
    if best is None:
        raise InconsistentCutsError(f"aucun candidat admissible parmi {m} coupes")
    logger.debug("Projection active-set: pas de point KKT exact, candidat admissible le plus proche retenu")
    return best


def _project_dykstra(A: np.ndarray, b: np.ndarray, x0: Point, tol: float) -> Point:
    """
    Projections alternées de Dykstra sur les demi-espaces. Arrêt quand la
    variation des incréments sur un balayage est <= tol.
    """
    m, n = A.shape
    norms_sq = np.einsum("ij,ij->i", A, A)
    z = x0.copy()
    increments = np.zeros((m, n))
    limit = settings.DYKSTRA_DIVERGENCE_FACTOR * (1.0 + float(np.linalg.norm(x0)))
    for sweep in range(settings.DYKSTRA_MAX_SWEEPS):
        change = 0.0
        for r in range(m):
            y = z + increments[r]
            excess = float(np.dot(A[r], y)) - b[r]
            p = y - (excess / norms_sq[r]) * A[r] if excess > 0 else y
            new_increment = y - p
            change += float(np.dot(new_increment - increments[r], new_increment - increments[r]))
            increments[r] = new_increment
            z = p
        if not np.all(np.isfinite(z)) or float(np.max(np.linalg.norm(increments, axis=1))) > limit:
            raise InconsistentCutsError(f"divergence de Dykstra au balayage {sweep}")
        if np.sqrt(change) <= tol:
            distances, scale = _row_distances(A, b, z, x0)
            if np.any(distances > settings.ACTIVE_SET_TOL * scale):
                raise InconsistentCutsError("Dykstra stationnaire sur un point non admissible")
            logger.debug(f"Dykstra convergé en {sweep + 1} balayages ({m} coupes)")
            return z
    raise InconsistentCutsError(
        f"Dykstra sans convergence après {settings.DYKSTRA_MAX_SWEEPS} balayages ({m} coupes)"
    )
