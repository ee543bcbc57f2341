"""
Types du modèle: points de R^n, bifonctions, instances CSEP, paramètres du
solveur et traces d'itérations. Contient aussi la validation des hypothèses
permanentes (enveloppe des pas, continuité de type Lipschitz).
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from core.config import settings
from core.errors import DimensionMismatchError, InstanceValidationError, ParameterValidationError

if TYPE_CHECKING:
    from services.convex_sets import ConvexSet

logger = logging.getLogger(__name__)

Point = np.ndarray
Schedule = Callable[[int, int], float]
TripleSampler = Callable[[], Tuple[Point, Point, Point]]


def as_point(values, dimension: Optional[int] = None, name: str = "point") -> Point:
    """
    Convertit une séquence de réels en point de R^n (tableau float64 1-D).

    Raises:
        DimensionMismatchError: si la dimension ne correspond pas
        ValueError: si une coordonnée est NaN ou infinie
    """
    point = np.array(values, dtype=float).reshape(-1)
    if dimension is not None and point.shape[0] != dimension:
        raise DimensionMismatchError(
            f"{name}: dimension {point.shape[0]} au lieu de {dimension}"
        )
    if not np.all(np.isfinite(point)):
        raise ValueError(f"{name}: coordonnées non finies {point}")
    return point


@dataclass(frozen=True, eq=False)
class Bifunction:
    """
    Bifonction f(x, y) donnée par deux oracles: la valeur et un sous-gradient
    de f(x, .) en y. Les constantes c1, c2 sont celles de la continuité de
    type Lipschitz. Quand `operator` est présent, f(x, y) = <A(x), y - x>.
    `smoothness` borne la constante de Lipschitz de y -> ∂₂f(x, y) quand
    elle est connue (sous-problèmes quadratiques).
    """
    value: Callable[[Point, Point], float]
    subgradient: Callable[[Point, Point], Point]
    c1: float
    c2: float
    operator: Optional[Callable[[Point], Point]] = None
    smoothness: Optional[float] = None
    name: str = "f"

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 0:
            raise InstanceValidationError(f"{self.name}: constantes c1={self.c1}, c2={self.c2} négatives")

    def __call__(self, x: Point, y: Point) -> float:
        return float(self.value(x, y))

    @property
    def is_linearized(self) -> bool:
        return self.operator is not None

    @classmethod
    def from_operator(cls, operator: Callable[[Point], Point], lipschitz: float, name: str = "A") -> "Bifunction":
        """f(x, y) = <A(x), y - x> avec c1 = c2 = L/2 pour A L-lipschitzien."""
        return cls(
            value=lambda x, y: float(np.dot(operator(x), y - x)),
            subgradient=lambda x, y: np.asarray(operator(x), dtype=float),
            c1=lipschitz / 2.0,
            c2=lipschitz / 2.0,
            operator=operator,
            smoothness=0.0,
            name=name,
        )

    @classmethod
    def zero(cls) -> "Bifunction":
        return cls.from_operator(lambda x: np.zeros_like(x, dtype=float), 0.0, name="zero")


@dataclass(frozen=True, eq=False)
class CsepInstance:
    """
    Problème des solutions communes: N couples (f_i, K_i) dans R^n.
    """
    dimension: int
    pairs: Tuple[Tuple[Bifunction, "ConvexSet"], ...]
    known_solution: Optional[Point] = None
    feasible_region_is_polyhedral: bool = False
    name: str = "instance"

    def __post_init__(self):
        if self.dimension < 1:
            raise InstanceValidationError(f"dimension {self.dimension} invalide")
        if len(self.pairs) < 1:
            raise InstanceValidationError("une instance CSEP demande au moins un couple (f_i, K_i)")
        object.__setattr__(self, "pairs", tuple(tuple(pair) for pair in self.pairs))
        for i, (_, convex_set) in enumerate(self.pairs, start=1):
            set_dimension = getattr(convex_set, "dimension", None)
            if set_dimension is not None and set_dimension != self.dimension:
                raise DimensionMismatchError(
                    f"K_{i} est de dimension {set_dimension}, l'instance de dimension {self.dimension}"
                )
        if self.known_solution is not None:
            object.__setattr__(
                self, "known_solution", as_point(self.known_solution, self.dimension, "known_solution")
            )

    @property
    def size(self) -> int:
        return len(self.pairs)

    @property
    def bifunctions(self) -> List[Bifunction]:
        return [f for f, _ in self.pairs]

    @property
    def sets(self) -> List["ConvexSet"]:
        return [k for _, k in self.pairs]

    @property
    def c1(self) -> float:
        return max(f.c1 for f in self.bifunctions)

    @property
    def c2(self) -> float:
        return max(f.c2 for f in self.bifunctions)


@dataclass(frozen=True, eq=False)
class SolverParams:
    """
    Paramètres communs aux deux algorithmes. Les schémas λ_k^i et γ_k^i sont
    des fonctions (k, i) -> réel, avec k >= 0 l'itération et i dans {1..N}.
    Par défaut λ_k^i = (λ + μ)/2 et γ_k^i = 1/2.
    """
    x0: Point
    lambda_lo: float
    lambda_hi: float
    epsilon: float = 0.5
    max_iter: int = field(default_factory=lambda: settings.MAX_ITER)
    tol_stop: float = field(default_factory=lambda: settings.TOL_STOP)
    tol_inner: float = field(default_factory=lambda: settings.TOL_INNER)
    lambda_schedule: Optional[Schedule] = None
    gamma_schedule: Optional[Schedule] = None

    def __post_init__(self):
        object.__setattr__(self, "x0", as_point(self.x0, name="x0"))

    @classmethod
    def constant(cls, lambda_: float, gamma: float, x0, epsilon: Optional[float] = None, **kwargs) -> "SolverParams":
        """Pas constants λ_k^i = lambda_, γ_k^i = gamma (ε vaut gamma par défaut)."""
        return cls(
            x0=x0,
            lambda_lo=lambda_,
            lambda_hi=lambda_,
            epsilon=gamma if epsilon is None else epsilon,
            lambda_schedule=lambda k, i: lambda_,
            gamma_schedule=lambda k, i: gamma,
            **kwargs,
        )

    def lambda_at(self, k: int, i: int) -> float:
        if self.lambda_schedule is None:
            return 0.5 * (self.lambda_lo + self.lambda_hi)
        return float(self.lambda_schedule(k, i))

    def gamma_at(self, k: int, i: int) -> float:
        if self.gamma_schedule is None:
            return 0.5
        return float(self.gamma_schedule(k, i))


class StopReason(str, Enum):
    MAX_ITER = "max_iter"
    FIXED_POINT = "fixed_point"
    CONVERGED = "converged"


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """
    Une ligne de trace: itération n, de x_n vers x_{n+1}. Les résidus par
    indice sont ordonnés par i, quel que soit l'ordre d'exécution.
    """
    n: int
    active_index: Optional[int]
    x: Point
    x_next: Point
    y_residuals: Tuple[float, ...]
    z_residuals: Tuple[float, ...]
    step_norm: float
    anchor_dist: float
    anchor_slack: float
    fejer_slack: Optional[float] = None
    containment_slack: Optional[float] = None
    bound_slack: Optional[float] = None
    checks_ok: bool = True
    wall_ms: float = 0.0

    @property
    def max_y_residual(self) -> float:
        return max(self.y_residuals)

    @property
    def max_z_residual(self) -> float:
        return max(self.z_residuals)

    @property
    def containment_ok(self) -> Optional[bool]:
        if self.containment_slack is None:
            return None
        return self.containment_slack >= -settings.INVARIANT_TOL

    @property
    def violation(self) -> float:
        """Plus grande violation (>= 0) parmi les diagnostics de l'itération."""
        slacks = [self.anchor_slack + settings.ANCHOR_MONOTONE_TOL]
        slacks += [s for s in (self.fejer_slack, self.containment_slack, self.bound_slack) if s is not None]
        return max(0.0, -min(slacks))


class IterateTrace:
    """Trace ordonnée des itérations d'une résolution."""

    def __init__(self, algorithm: str):
        self.algorithm = algorithm
        self.records: List[IterationRecord] = []
        self.stop_reason: Optional[StopReason] = None
        self.final: Optional[Point] = None

    def append(self, record: IterationRecord) -> None:
        if self.records and record.n <= self.records[-1].n:
            raise ValueError(f"itération {record.n} ajoutée après {self.records[-1].n}")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[IterationRecord]:
        return iter(self.records)

    def __getitem__(self, index: int) -> IterationRecord:
        return self.records[index]

    @property
    def last(self) -> Optional[IterationRecord]:
        return self.records[-1] if self.records else None

    def max_invariant_violation(self) -> float:
        return max((r.violation for r in self.records), default=0.0)


class ValidationReport(BaseModel):
    """Résultat de validate_params."""
    passed: bool
    violations: List[str] = Field(default_factory=list)
    c1: float
    c2: float
    lambda_bound: float
    checked_pairs: int = 0
    envelope_only: bool = False


def lambda_upper_bound(c1: float, c2: float) -> Tuple[float, str]:
    """
    Borne stricte min{1/(2c1), 1/(2c2)} sur μ et le libellé de la contrainte active.
    """
    if max(c1, c2) <= 0.0:
        return math.inf, "∞"
    if c2 >= c1:
        return 1.0 / (2.0 * c2), "1/(2c₂)"
    return 1.0 / (2.0 * c1), "1/(2c₁)"


_MAX_REPORTED = 20


def validate_params(params: SolverParams, instance: CsepInstance) -> ValidationReport:
    """
    Vérifie 0 < λ <= λ_k^i <= μ < min{1/(2c1), 1/(2c2)} et ε <= γ_k^i <= 1/2
    contre les maxima c1, c2 de la famille.

    Les schémas sont énumérés sur toutes les itérations que le solveur peut
    exécuter (k < max_iter, i dans {1..N}) tant que cela reste sous
    SCHEDULE_CHECK_LIMIT; au-delà, seul un préfixe est énuméré et l'enveloppe
    déclarée [λ, μ] fait foi.
    """
    c1, c2 = instance.c1, instance.c2
    bound, label = lambda_upper_bound(c1, c2)
    lam, mu, eps = params.lambda_lo, params.lambda_hi, params.epsilon
    violations: List[str] = []

    if params.x0.shape[0] != instance.dimension:
        violations.append(f"x0 de dimension {params.x0.shape[0]} au lieu de {instance.dimension}")
    if not lam > 0:
        violations.append(f"λ = {lam} doit être > 0")
    if lam > mu:
        violations.append(f"λ = {lam} > μ = {mu}")
    if not math.isfinite(mu):
        violations.append(f"μ = {mu} doit être fini")
    elif mu >= bound:
        violations.append(f"μ = {mu} ≥ {label} = {bound}")
    if not 0 < eps <= 0.5:
        violations.append(f"ε = {eps} hors de (0, 1/2]")
    if params.max_iter < 1:
        violations.append(f"max_iter = {params.max_iter} doit être >= 1")
    if not params.tol_stop > 0:
        violations.append(f"tol_stop = {params.tol_stop} doit être > 0")
    if not params.tol_inner > 0:
        violations.append(f"tol_inner = {params.tol_inner} doit être > 0")

    n_indices = instance.size
    horizon = params.max_iter
    envelope_only = False
    if horizon * n_indices > settings.SCHEDULE_CHECK_LIMIT:
        horizon = max(1, settings.SCHEDULE_CHECK_LIMIT // n_indices)
        envelope_only = True

    schedule_violations: List[str] = []
    checked = 0
    for k in range(max(horizon, 0)):
        for i in range(1, n_indices + 1):
            checked += 1
            lam_ki = params.lambda_at(k, i)
            gamma_ki = params.gamma_at(k, i)
            if not lam <= lam_ki <= mu:
                schedule_violations.append(f"λ_k^i = {lam_ki} hors de [{lam}, {mu}] en (k={k}, i={i})")
            if lam_ki >= bound:
                schedule_violations.append(f"λ_k^i = {lam_ki} ≥ {label} = {bound} en (k={k}, i={i})")
            if not eps <= gamma_ki <= 0.5:
                schedule_violations.append(f"γ_k^i = {gamma_ki} hors de [{eps}, 1/2] en (k={k}, i={i})")
            if len(schedule_violations) >= _MAX_REPORTED:
                break
        if len(schedule_violations) >= _MAX_REPORTED:
            break
    violations.extend(schedule_violations)

    report = ValidationReport(
        passed=not violations,
        violations=violations,
        c1=c1,
        c2=c2,
        lambda_bound=bound,
        checked_pairs=checked,
        envelope_only=envelope_only,
    )
    if violations:
        logger.warning(f"Paramètres invalides pour {instance.name}: {violations[:3]}")
    return report


def require_valid_params(params: SolverParams, instance: CsepInstance) -> ValidationReport:
    """validate_params, puis lève ParameterValidationError en cas d'échec."""
    report = validate_params(params, instance)
    if not report.passed:
        raise ParameterValidationError("; ".join(report.violations), report=report)
    return report


def gaussian_triples(dimension: int, rng: np.random.Generator, scale: float = 1.0) -> TripleSampler:
    """Source de triplets (x, y, z) gaussiens centrés d'écart-type `scale`."""
    def sample() -> Tuple[Point, Point, Point]:
        x, y, z = rng.normal(scale=scale, size=(3, dimension))
        return x, y, z
    return sample


def check_lipschitz_type(f: Bifunction, sampler: TripleSampler, count: int) -> float:
    """
    Pire violation de f(x,y) + f(y,z) >= f(x,z) - c1||x-y||² - c2||y-z||² sur
    `count` triplets. Un retour positif prouve que (c1, c2) est invalide.
    """
    if count <= 0:
        raise ValueError(f"count = {count}: au moins un triplet est nécessaire")
    worst = -math.inf
    for _ in range(count):
        x, y, z = sampler()
        gap = (
            f(x, z) - f(x, y) - f(y, z)
            - f.c1 * float(np.dot(x - y, x - y))
            - f.c2 * float(np.dot(y - z, y - z))
        )
        worst = max(worst, gap)
    logger.debug(f"Continuité de type Lipschitz de {f.name}: pire écart {worst:.3e} sur {count} triplets")
    return worst


def check_subgradient(f: Bifunction, sampler: TripleSampler, count: int) -> float:
    """
    Pire écart relatif, sur `count` triplets (x, y, y'), parmi:
      - l'inégalité du sous-gradient f(x, y') >= f(x, y) + <g(x, y), y' - y>;
      - f(x, x) = 0;
      - avec `operator`, l'accord de `value` avec <A(x), y - x>.
    Chaque écart est divisé par 1 + |f(x, y)| + |f(x, y')| + |<g, y' - y>|.
    Un retour positif au-delà des erreurs d'arrondi prouve que les oracles
    sont incohérents.
    """
    if count <= 0:
        raise ValueError(f"count = {count}: au moins un triplet est nécessaire")
    worst = -math.inf
    for _ in range(count):
        x, y, y_prime = sampler()
        f_y, f_y_prime = f(x, y), f(x, y_prime)
        g = np.asarray(f.subgradient(x, y), dtype=float)
        linear = float(np.dot(g, y_prime - y))
        scale = 1.0 + abs(f_y) + abs(f_y_prime) + abs(linear)
        gaps = [
            f_y + linear - f_y_prime,
            abs(f(x, x)),
        ]
        if f.operator is not None:
            gaps.append(abs(f_y - float(np.dot(np.asarray(f.operator(x), dtype=float), y - x))))
        worst = max(worst, max(gaps) / scale)
    logger.debug(f"Sous-gradient de {f.name}: pire écart relatif {worst:.3e} sur {count} triplets")
    return worst
