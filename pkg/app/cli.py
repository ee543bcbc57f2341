"""
Front-end en ligne de commande: chargement d'un fichier d'instance (JSON ou
YAML), résolution parallèle ou cyclique, écriture de la trace et du résumé.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import yaml
from pydantic import ValidationError

from app.schemas import (
    AffineMapSpec,
    BallSpec,
    BoxSpec,
    HalfspaceSpec,
    HyperplaneSpec,
    InstanceFile,
    LinearOperatorSpec,
    NashCournotSpec,
    PolyhedronSpec,
    RunConfig,
    RunSummary,
    WholeSpaceSpec,
    ZeroSpec,
)
from app.trace_writer import write_summary, write_trace
from core.config import settings
from core.errors import (
    CeqpError,
    ConfigError,
    DimensionMismatchError,
    EmptySetError,
    ExpansiveMapError,
    InconsistentCutsError,
    InstanceParseError,
    InstanceValidationError,
    InvalidSetError,
    InvariantViolationError,
    ParameterValidationError,
    ProxConvergenceError,
)
from core.latency_monitor import get_latency_stats, reset_latency_metrics
from core.models import Bifunction, CsepInstance, IterateTrace, SolverParams, StopReason, as_point, lambda_upper_bound
from services.convex_sets import Ball, Box, ConvexSet, Halfspace, Hyperplane, Polyhedron, WholeSpace, is_polyhedral
from services.instances import (
    AffineMap,
    affine_map_bifunction,
    certify_lipschitz_type,
    certify_subgradient,
    linear_operator_bifunction,
    nash_cournot_bifunction,
    operator_norm,
)
from services.invariants import certify_known_solution
from services.solver_cyclic import run_cyclic
from services.solver_parallel import run_parallel

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID_INPUT = 1
EXIT_MAX_ITER = 2
EXIT_INCONSISTENT_CUTS = 3
EXIT_PROX_FAILURE = 4
EXIT_INVARIANT_VIOLATION = 5


# --- Chargement des instances ---

def read_instance_file(path) -> InstanceFile:
    """
    Lit et valide le document d'instance. L'extension .yaml/.yml choisit
    YAML, sinon JSON.

    Raises:
        InstanceParseError: syntaxe invalide (avec ligne) ou schéma invalide (avec champ)
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InstanceParseError(f"{path}: lecture impossible ({e})") from e

    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            document = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            raise InstanceParseError(f"{path}: YAML invalide ligne {line}: {e}", line=line) from e
    else:
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise InstanceParseError(f"{path}: JSON invalide ligne {e.lineno}: {e.msg}", line=e.lineno) from e

    try:
        return InstanceFile.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise InstanceParseError(f"{path}: champ {field}: {first['msg']}", field=field) from e


def build_set(spec, dimension: int) -> ConvexSet:
    if isinstance(spec, WholeSpaceSpec):
        return WholeSpace(dimension)
    if isinstance(spec, BoxSpec):
        return Box(spec.lower, spec.upper)
    if isinstance(spec, BallSpec):
        return Ball(spec.center, spec.radius)
    if isinstance(spec, HalfspaceSpec):
        return Halfspace(spec.a, spec.b)
    if isinstance(spec, HyperplaneSpec):
        return Hyperplane(spec.a, spec.b)
    if isinstance(spec, PolyhedronSpec):
        return Polyhedron(tuple(Halfspace(h.a, h.b) for h in spec.halfspaces), witness=spec.witness)
    raise InstanceValidationError(f"type d'ensemble inconnu: {spec}")


def build_bifunction(spec, dimension: int, name: str, rng: np.random.Generator) -> Bifunction:
    """
    Construit la bifonction; les familles qui l'exigent (constante de
    Lipschitz déclarée, Nash-Cournot) passent la vérification par
    échantillonnage.
    """
    if isinstance(spec, ZeroSpec):
        return Bifunction.zero()
    if isinstance(spec, LinearOperatorSpec):
        f = linear_operator_bifunction(spec.matrix, spec.offset, lipschitz=spec.lipschitz, name=name)
        if spec.lipschitz is not None:
            certify_lipschitz_type(f, dimension, rng)
        return f
    if isinstance(spec, AffineMapSpec):
        S = AffineMap(np.array(spec.linear, dtype=float), np.array(spec.offset, dtype=float))
        norm = operator_norm(S.linear)
        if norm > 1.0 + 1e-12:
            raise ExpansiveMapError(f"{name} expansive: ||C|| = {norm:.6g} > 1")
        return affine_map_bifunction(S, name=name)
    if isinstance(spec, NashCournotSpec):
        f = nash_cournot_bifunction(spec.P, spec.Q, spec.q, name=name)
        certify_lipschitz_type(f, dimension, rng)
        return f
    raise InstanceValidationError(f"type de bifonction inconnu: {spec}")


def instance_from_file(document: InstanceFile, rng: Optional[np.random.Generator] = None) -> CsepInstance:
    """
    Raises:
        InstanceValidationError: hypothèse violée, avec le champ concerné
    """
    rng = np.random.default_rng(settings.SEED) if rng is None else rng
    dimension = document.dimension
    pairs = []
    for i, pair in enumerate(document.pairs):
        try:
            K = build_set(pair.set, dimension)
            if K.dimension is not None and K.dimension != dimension:
                raise DimensionMismatchError(f"dimension {K.dimension} au lieu de {dimension}")
        except (InvalidSetError, DimensionMismatchError, ValueError) as e:
            raise InstanceValidationError(f"pairs.{i}.set: {e}") from e
        try:
            f = build_bifunction(pair.bifunction, dimension, f"f_{i + 1}", rng)
            origin = np.zeros(dimension)
            if np.shape(f.subgradient(origin, origin)) != (dimension,):
                raise DimensionMismatchError(f"sous-gradient de dimension incorrecte pour n = {dimension}")
            certify_subgradient(f, dimension, rng)
        except InstanceValidationError as e:
            raise type(e)(f"pairs.{i}.bifunction: {e}") from e
        except (DimensionMismatchError, ValueError) as e:
            raise InstanceValidationError(f"pairs.{i}.bifunction: {e}") from e
        pairs.append((f, K))

    try:
        instance = CsepInstance(
            dimension=dimension,
            pairs=tuple(pairs),
            known_solution=document.known_solution,
            feasible_region_is_polyhedral=all(is_polyhedral(K) for _, K in pairs),
            name=document.name,
        )
    except (DimensionMismatchError, ValueError) as e:
        raise InstanceValidationError(f"known_solution: {e}") from e

    if instance.known_solution is not None:
        worst = certify_known_solution(instance, rng)
        if worst < -settings.KNOWN_SOLUTION_TOL:
            raise InstanceValidationError(f"known_solution: min f_i(x*, y) = {worst:.3e} < 0 sur l'échantillon")
    return instance


def load_instance(path, rng: Optional[np.random.Generator] = None) -> CsepInstance:
    """Fichier d'instance -> CsepInstance entièrement construite et vérifiée."""
    return instance_from_file(read_instance_file(path), rng)


# --- Résolution ---

def default_lambda(instance: CsepInstance) -> float:
    """Moitié de la borne min{1/(2c1), 1/(2c2)}, ou 1 sans borne."""
    bound, _ = lambda_upper_bound(instance.c1, instance.c2)
    return 1.0 if not np.isfinite(bound) else 0.5 * bound


def _params(config: RunConfig, instance: CsepInstance, file_x0) -> SolverParams:
    x0 = config.x0 if config.x0 is not None else file_x0
    if x0 is None:
        x0 = np.zeros(instance.dimension)
    lam = config.lambda_step if config.lambda_step is not None else default_lambda(instance)
    return SolverParams.constant(
        lam,
        config.gamma,
        as_point(x0, instance.dimension, "x0"),
        epsilon=config.epsilon,
        max_iter=config.max_iter,
        tol_stop=config.tol,
    )


def _solve(config: RunConfig, instance: CsepInstance, params: SolverParams) -> IterateTrace:
    if config.algo == "parallel":
        _, trace = run_parallel(instance, params, workers=config.workers, check_invariants=config.check_invariants)
    else:
        _, trace = run_cyclic(instance, params, check_invariants=config.check_invariants)
    return trace


def run(config: RunConfig) -> int:
    """
    Charge l'instance, résout, écrit trace et résumé.

    Returns:
        int: code de sortie (0 convergé ou point fixe, 1 entrée invalide,
        2 max_iter, 3 coupes incohérentes, 4 échec prox, 5 diagnostic violé)
    """
    reset_latency_metrics()
    summary = RunSummary(algorithm=config.algo, instance=str(config.instance_path), exit_code=EXIT_OK)
    try:
        document = read_instance_file(config.instance_path)
        instance = instance_from_file(document, np.random.default_rng(config.seed))
        summary.instance = instance.name
        params = _params(config, instance, document.x0)
        trace = _solve(config, instance, params)
    except (InstanceParseError, InstanceValidationError, ParameterValidationError,
            EmptySetError, ValueError) as e:
        logger.error(f"Entrée invalide: {e}")
        return _fail(config, summary, EXIT_INVALID_INPUT, e)
    except InconsistentCutsError as e:
        logger.error(f"Coupes incohérentes: {e}")
        return _fail(config, summary, EXIT_INCONSISTENT_CUTS, e)
    except ProxConvergenceError as e:
        logger.error(f"Échec du sous-problème prox (meilleur résidu {e.best_residual:.3e}): {e}")
        return _fail(config, summary, EXIT_PROX_FAILURE, e)
    except InvariantViolationError as e:
        logger.error(f"Diagnostic violé à l'itération {e.iteration}: {e}")
        summary.failed_iteration = e.iteration
        return _fail(config, summary, EXIT_INVARIANT_VIOLATION, e)

    write_trace(trace, config.trace_path, config.trace_format, timing=config.timing)
    exit_code = EXIT_MAX_ITER if trace.stop_reason == StopReason.MAX_ITER else EXIT_OK
    summary.final = [float(v) for v in trace.final]
    summary.iterations = len(trace)
    summary.stop_reason = trace.stop_reason.value
    summary.max_invariant_violation = trace.max_invariant_violation()
    summary.exit_code = exit_code
    summary.latency = get_latency_stats()
    write_summary(summary, config.resolved_summary_path)
    logger.info(f"{config.algo}: {summary.stop_reason} en {summary.iterations} itérations, code {exit_code}")
    return exit_code


def _fail(config: RunConfig, summary: RunSummary, exit_code: int, error: CeqpError) -> int:
    summary.exit_code = exit_code
    summary.error = str(error)
    try:
        write_summary(summary, config.resolved_summary_path)
    except OSError as e:
        logger.error(f"Impossible d'écrire le résumé: {e}")
    return exit_code


# --- Arguments ---

def _vector(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"liste de réels attendue: {text}") from e


class _ArgumentParser(argparse.ArgumentParser):
    """Les erreurs d'arguments deviennent des ConfigError au lieu de SystemExit(2)."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="ceqp", description="Solutions communes de problèmes d'équilibre")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", help="résoudre une instance")
    solve.add_argument("--instance", required=True, type=Path, help="fichier d'instance JSON ou YAML")
    solve.add_argument("--algo", choices=["parallel", "cyclic"], default="parallel")
    solve.add_argument("--lambda", dest="lambda_step", type=float, default=None,
                       help="pas λ constant (défaut: moitié de la borne admissible)")
    solve.add_argument("--gamma", type=float, default=0.5)
    solve.add_argument("--epsilon", type=float, default=None)
    solve.add_argument("--max-iter", type=int, default=settings.MAX_ITER)
    solve.add_argument("--tol", type=float, default=settings.TOL_STOP)
    solve.add_argument("--x0", type=_vector, default=None, help="point initial, ex: 1,1")
    solve.add_argument("--trace", required=True, type=Path)
    solve.add_argument("--format", dest="trace_format", choices=["csv", "json"], default=settings.TRACE_FORMAT)
    solve.add_argument("--summary", type=Path, default=None)
    solve.add_argument("--no-invariant-checks", dest="check_invariants", action="store_false")
    solve.add_argument("--seed", type=int, default=settings.SEED)
    solve.add_argument("--workers", type=int, default=settings.PARALLEL_WORKERS)
    solve.add_argument("--timing", action="store_true", default=settings.TRACE_WALL_TIME,
                       help="écrire la colonne wall_ms")
    solve.add_argument("--log-level", default=settings.LOG_LEVEL)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        instance_path=args.instance,
        algo=args.algo,
        lambda_step=args.lambda_step,
        gamma=args.gamma,
        epsilon=args.epsilon,
        max_iter=args.max_iter,
        tol=args.tol,
        x0=args.x0,
        trace_path=args.trace,
        trace_format=args.trace_format,
        summary_path=args.summary,
        check_invariants=args.check_invariants,
        seed=args.seed,
        workers=args.workers,
        timing=args.timing,
    )


def parse_config(argv: Optional[List[str]] = None) -> Tuple[RunConfig, str]:
    """
    argv -> (RunConfig, niveau de log).

    Raises:
        ConfigError: argument inconnu, valeur mal typée ou configuration rejetée par RunConfig
    """
    args = build_parser().parse_args(argv)
    try:
        return config_from_args(args), args.log_level
    except ValidationError as e:
        raise ConfigError(str(e)) from e
