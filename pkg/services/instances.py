"""
Familles d'instances CSEP: faisabilité convexe, inéquations variationnelles
linéaires, points fixes communs d'applications affines et forme Nash-Cournot
pseudomonotone.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from core.config import settings
from core.errors import (
    DimensionMismatchError,
    ExpansiveMapError,
    InstanceValidationError,
)
from core.models import (
    Bifunction,
    CsepInstance,
    Point,
    as_point,
    check_lipschitz_type,
    check_subgradient,
    gaussian_triples,
)
from services.convex_sets import Box, ConvexSet, is_polyhedral, project_halfspace_intersection, to_halfspaces

logger = logging.getLogger(__name__)

LinearOperatorSpec = Tuple[np.ndarray, Optional[np.ndarray], ConvexSet]


def _matrix(values, name: str, dimension: Optional[int] = None) -> np.ndarray:
    matrix = np.array(values, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionMismatchError(f"{name}: matrice carrée attendue, forme {matrix.shape}")
    if dimension is not None and matrix.shape[0] != dimension:
        raise DimensionMismatchError(f"{name}: dimension {matrix.shape[0]} au lieu de {dimension}")
    if not np.all(np.isfinite(matrix)):
        raise InstanceValidationError(f"{name}: coefficients non finis")
    return matrix


def _set_dimension(convex_set: ConvexSet, dimension: int, name: str) -> None:
    if convex_set.dimension is not None and convex_set.dimension != dimension:
        raise DimensionMismatchError(f"{name} de dimension {convex_set.dimension} au lieu de {dimension}")


def operator_norm(M: np.ndarray, tol: float = 1e-15, max_iter: int = 10_000) -> float:
    """
    ||M||₂ par itération de la puissance sur MᵀM. Le vecteur initial est tiré
    avec la graine des settings, donc le résultat est reproductible.
    """
    M = np.asarray(M, dtype=float)
    gram = M.T @ M
    if not np.any(gram):
        return 0.0
    v = np.random.default_rng(settings.SEED).normal(size=gram.shape[1])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = gram @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            break
        rayleigh = float(np.dot(v, w))
        v = w / norm
        if abs(rayleigh - estimate) <= tol * max(rayleigh, 1.0):
            estimate = rayleigh
            break
        estimate = rayleigh
    return float(np.sqrt(max(estimate, 0.0)))


def certify_lipschitz_type(f: Bifunction, dimension: int, rng: Optional[np.random.Generator] = None,
                           count: Optional[int] = None) -> float:
    """
    Échantillonne la continuité de type Lipschitz de f avec ses constantes
    déclarées.

    Raises:
        InstanceValidationError: violation échantillonnée > LIPSCHITZ_TOL
    """
    rng = np.random.default_rng(settings.SEED) if rng is None else rng
    count = settings.LIPSCHITZ_SAMPLES if count is None else count
    worst = check_lipschitz_type(f, gaussian_triples(dimension, rng), count)
    if worst > settings.LIPSCHITZ_TOL:
        raise InstanceValidationError(
            f"{f.name}: continuité de type Lipschitz violée (écart {worst:.3e}) avec c1={f.c1}, c2={f.c2}"
        )
    return worst


def certify_subgradient(f: Bifunction, dimension: int, rng: Optional[np.random.Generator] = None,
                        count: Optional[int] = None, scale: float = 1.0) -> float:
    """
    Échantillonne la cohérence des oracles valeur / sous-gradient de f (et de
    la forme linéarisée quand elle existe).

    Raises:
        InstanceValidationError: écart relatif échantillonné > SUBGRADIENT_TOL
    """
    rng = np.random.default_rng(settings.SEED) if rng is None else rng
    count = settings.SUBGRADIENT_SAMPLES if count is None else count
    worst = check_subgradient(f, gaussian_triples(dimension, rng, scale), count)
    if worst > settings.SUBGRADIENT_TOL:
        raise InstanceValidationError(f"{f.name}: sous-gradient incohérent avec la valeur (écart relatif {worst:.3e})")
    return worst


# Bifonctions partagées avec le chargeur de fichiers d'instance


def linear_operator_bifunction(M, q=None, lipschitz: Optional[float] = None, name: str = "A") -> Bifunction:
    """f(x, y) = <Mx + q, y - x>, L = ||M|| sauf constante déclarée."""
    M = _matrix(M, name)
    q = np.zeros(M.shape[0]) if q is None else as_point(q, M.shape[0], f"{name}.q")
    L = operator_norm(M) if lipschitz is None else float(lipschitz)
    if L < 0:
        raise InstanceValidationError(f"{name}: constante de Lipschitz {L} négative")
    return Bifunction.from_operator(lambda x: M @ x + q, L, name=name)


@dataclass(frozen=True, eq=False)
class AffineMap:
    """S(x) = linear @ x + offset."""
    linear: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        linear = _matrix(self.linear, "S")
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "offset", as_point(self.offset, linear.shape[0], "S.offset"))

    @property
    def dimension(self) -> int:
        return self.linear.shape[0]

    def __call__(self, x: Point) -> Point:
        return self.linear @ x + self.offset


def conjugated_contraction(p, C) -> AffineMap:
    """S(x) = p + C(x - p), qui fixe p."""
    C = _matrix(C, "C")
    p = as_point(p, C.shape[0], "p")
    return AffineMap(C, p - C @ p)


def affine_map_bifunction(S: AffineMap, name: str = "S") -> Bifunction:
    """f(x, y) = <x - S x, y - x>, c1 = c2 = ||I - C|| / 2."""
    residual = np.eye(S.dimension) - S.linear
    return Bifunction.from_operator(lambda x: residual @ x - S.offset, operator_norm(residual), name=name)


def nash_cournot_bifunction(P, Q, q, name: str = "nash_cournot") -> Bifunction:
    """
    f(x, y) = <Px + Qy + q, y - x> pour Q symétrique semi-définie positive et
    Q - P semi-définie négative.

    ∂₂f(x, y) = Px + q + (Q + Qᵀ)y - Qᵀx; f(x,z) - f(x,y) - f(y,z) vaut
    <(P - Qᵀ)(x - y), z - y>, d'où c1 = c2 = ||P - Qᵀ|| / 2.
    """
    P = _matrix(P, f"{name}.P")
    Q = _matrix(Q, f"{name}.Q", P.shape[0])
    q = as_point(q, P.shape[0], f"{name}.q")
    if not np.allclose(Q, Q.T, atol=1e-12):
        raise InstanceValidationError(f"{name}: Q doit être symétrique")
    if np.min(np.linalg.eigvalsh(Q)) < -1e-12:
        raise InstanceValidationError(f"{name}: Q n'est pas semi-définie positive")
    gap = Q - P
    if np.max(np.linalg.eigvalsh(0.5 * (gap + gap.T))) > 1e-12:
        raise InstanceValidationError(f"{name}: Q - P n'est pas semi-définie négative")

    c = 0.5 * operator_norm(P - Q.T)
    return Bifunction(
        value=lambda x, y: float(np.dot(P @ x + Q @ y + q, y - x)),
        subgradient=lambda x, y: P @ x + q + (Q + Q.T) @ y - Q.T @ x,
        c1=c,
        c2=c,
        smoothness=operator_norm(Q + Q.T),
        name=name,
    )


# Familles


def make_cfp(sets: Sequence[ConvexSet], witness=None, name: str = "cfp") -> CsepInstance:
    """
    Faisabilité convexe: f_i ≡ 0 sur chaque K_i. Le témoin, point commun aux
    ensembles, sert de solution connue.

    Raises:
        InstanceValidationError: pas de témoin, ou témoin hors d'un ensemble
    """
    if not sets:
        raise InstanceValidationError("make_cfp demande au moins un ensemble")
    if witness is None:
        raise InstanceValidationError(f"{name}: un témoin de faisabilité est requis")
    witness = as_point(witness, name="witness")
    dimension = witness.shape[0]
    for i, K in enumerate(sets, start=1):
        _set_dimension(K, dimension, f"K_{i}")
        if not K.contains(witness, 1e-9):
            raise InstanceValidationError(f"{name}: le témoin n'appartient pas à K_{i} ({K.kind})")
    return CsepInstance(
        dimension=dimension,
        pairs=tuple((Bifunction.zero(), K) for K in sets),
        known_solution=witness,
        feasible_region_is_polyhedral=all(is_polyhedral(K) for K in sets),
        name=name,
    )


def make_linear_vi(ops: Sequence[LinearOperatorSpec], lipschitz: Optional[Sequence[Optional[float]]] = None,
                   rng: Optional[np.random.Generator] = None, name: str = "linear_vi") -> CsepInstance:
    """
    Inéquations variationnelles communes: A_i(x) = M_i x + q_i sur K_i, avec
    f_i(x, y) = <A_i(x), y - x> et c1 = c2 = L_i/2. La pseudomonotonie est à
    la charge de l'appelant (M_i semi-définie positive et q_i = 0 suffisent).

    Une constante L_i déclarée remplace la norme calculée et est vérifiée par
    échantillonnage.

    Raises:
        DimensionMismatchError
        InstanceValidationError: constante déclarée trop petite
    """
    if not ops:
        raise InstanceValidationError("make_linear_vi demande au moins un opérateur")
    dimension = np.asarray(ops[0][0]).shape[0]
    declared = list(lipschitz) if lipschitz is not None else [None] * len(ops)
    if len(declared) != len(ops):
        raise InstanceValidationError(f"{len(declared)} constantes déclarées pour {len(ops)} opérateurs")

    pairs = []
    all_homogeneous = True
    for i, ((M, q, K), L) in enumerate(zip(ops, declared), start=1):
        _matrix(M, f"M_{i}", dimension)
        _set_dimension(K, dimension, f"K_{i}")
        f = linear_operator_bifunction(M, q, lipschitz=L, name=f"A_{i}")
        if L is not None:
            certify_lipschitz_type(f, dimension, rng)
        all_homogeneous &= q is None or not np.any(np.asarray(q, dtype=float))
        pairs.append((f, K))

    origin = np.zeros(dimension)
    known = origin if all_homogeneous and all(K.contains(origin, 1e-12) for _, K in pairs) else None
    return CsepInstance(
        dimension=dimension,
        pairs=tuple(pairs),
        known_solution=known,
        feasible_region_is_polyhedral=all(is_polyhedral(K) for _, K in pairs),
        name=name,
    )


def make_fixed_point(maps: Sequence[AffineMap], x0=None, fixed_point=None,
                     name: str = "fixed_point") -> CsepInstance:
    """
    Points fixes communs: f_i(x, y) = <x - S_i x, y - x> sur une boîte
    centrée en 0 de rayon FIXED_POINT_BOX_MARGIN * max(|x0|∞, |p|∞, 1).
    Sans point fixe fourni, p est la solution aux moindres carrés des
    (I - C_i) p = d_i empilés.

    Raises:
        ExpansiveMapError: ||C_i|| > 1
        InstanceValidationError: pas de point fixe commun
    """
    if not maps:
        raise InstanceValidationError("make_fixed_point demande au moins une application")
    dimension = maps[0].dimension
    for i, S in enumerate(maps, start=1):
        if S.dimension != dimension:
            raise DimensionMismatchError(f"S_{i} de dimension {S.dimension} au lieu de {dimension}")
        norm = operator_norm(S.linear)
        if norm > 1.0 + 1e-12:
            raise ExpansiveMapError(f"S_{i} expansive: ||C|| = {norm:.6g} > 1")

    if fixed_point is None:
        stacked = np.vstack([np.eye(dimension) - S.linear for S in maps])
        offsets = np.concatenate([S.offset for S in maps])
        fixed_point = np.linalg.lstsq(stacked, offsets, rcond=None)[0]
    fixed_point = as_point(fixed_point, dimension, "fixed_point")
    for i, S in enumerate(maps, start=1):
        drift = float(np.linalg.norm(S(fixed_point) - fixed_point))
        if drift > 1e-9 * (1.0 + float(np.linalg.norm(fixed_point))):
            raise InstanceValidationError(f"{name}: p n'est pas un point fixe de S_{i} (écart {drift:.3e})")

    reach = max(float(np.max(np.abs(fixed_point))), 1.0)
    if x0 is not None:
        reach = max(reach, float(np.max(np.abs(as_point(x0, dimension, "x0")))))
    radius = settings.FIXED_POINT_BOX_MARGIN * reach
    box = Box(-radius * np.ones(dimension), radius * np.ones(dimension))
    logger.debug(f"{name}: boîte englobante de rayon {radius}")

    return CsepInstance(
        dimension=dimension,
        pairs=tuple((affine_map_bifunction(S, name=f"S_{i}"), box) for i, S in enumerate(maps, start=1)),
        known_solution=fixed_point,
        feasible_region_is_polyhedral=True,
        name=name,
    )


def make_nash_cournot(P, Q, q, K: ConvexSet, copies: int = 1, rng: Optional[np.random.Generator] = None,
                      name: str = "nash_cournot") -> CsepInstance:
    """
    Forme Nash-Cournot f(x, y) = <Px + Qy + q, y - x> sur une boîte,
    répliquée `copies` fois. La continuité de type Lipschitz est vérifiée par
    échantillonnage à la construction.

    Raises:
        InstanceValidationError
    """
    if copies < 1:
        raise InstanceValidationError(f"copies = {copies} doit être >= 1")
    if not isinstance(K, Box):
        raise InstanceValidationError(f"{name}: K doit être une boîte, reçu {K.kind}")
    f = nash_cournot_bifunction(P, Q, q, name=name)
    _set_dimension(K, np.asarray(P).shape[0], "K")
    certify_lipschitz_type(f, K.dimension, rng)
    return CsepInstance(
        dimension=K.dimension,
        pairs=tuple((f, K) for _ in range(copies)),
        feasible_region_is_polyhedral=True,
        name=name,
    )


def cfp_projection_oracle(instance: CsepInstance, x0) -> Point:
    """
    P_F(x0) pour une instance de faisabilité à ensembles polyédraux: tous les
    K_i réécrits en demi-espaces puis projection exacte.
    """
    if not instance.feasible_region_is_polyhedral:
        raise InstanceValidationError(f"{instance.name}: ensembles non polyédraux")
    if any(f.name != "zero" for f in instance.bifunctions):
        raise InstanceValidationError(f"{instance.name}: oracle réservé aux instances de faisabilité")
    x0 = as_point(x0, instance.dimension, "x0")
    cuts = [h for K in instance.sets for h in to_halfspaces(K, instance.dimension)]
    return project_halfspace_intersection(cuts, x0)
