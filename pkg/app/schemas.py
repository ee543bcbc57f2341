from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.config import settings

# --- Schémas du fichier d'instance ---

Vector = List[float]
Matrix = List[List[float]]


class WholeSpaceSpec(BaseModel):
    kind: Literal["whole_space"]


class BoxSpec(BaseModel):
    kind: Literal["box"]
    lower: Vector
    upper: Vector


class BallSpec(BaseModel):
    kind: Literal["ball"]
    center: Vector
    radius: float


class HalfspaceSpec(BaseModel):
    """{z : <a, z> <= b}"""
    kind: Literal["halfspace"] = "halfspace"
    a: Vector
    b: float


class HyperplaneSpec(BaseModel):
    kind: Literal["hyperplane"]
    a: Vector
    b: float


class PolyhedronSpec(BaseModel):
    kind: Literal["polyhedron"]
    halfspaces: List[HalfspaceSpec] = Field(min_length=1)
    witness: Optional[Vector] = None  # point intérieur connu, requis pour projeter


SetSpec = Annotated[
    Union[WholeSpaceSpec, BoxSpec, BallSpec, HalfspaceSpec, HyperplaneSpec, PolyhedronSpec],
    Field(discriminator="kind"),
]


class ZeroSpec(BaseModel):
    kind: Literal["zero"]


class LinearOperatorSpec(BaseModel):
    """A(x) = matrix @ x + offset; `lipschitz` remplace ||matrix|| et est vérifiée par échantillonnage."""
    kind: Literal["linear_operator"]
    matrix: Matrix
    offset: Optional[Vector] = None
    lipschitz: Optional[float] = Field(default=None, ge=0)


class AffineMapSpec(BaseModel):
    """S(x) = linear @ x + offset, f(x, y) = <x - S x, y - x>."""
    kind: Literal["affine_map"]
    linear: Matrix
    offset: Vector


class NashCournotSpec(BaseModel):
    kind: Literal["nash_cournot"]
    P: Matrix
    Q: Matrix
    q: Vector


BifunctionSpec = Annotated[
    Union[ZeroSpec, LinearOperatorSpec, AffineMapSpec, NashCournotSpec],
    Field(discriminator="kind"),
]


class PairSpec(BaseModel):
    bifunction: BifunctionSpec
    set: SetSpec


class InstanceFile(BaseModel):
    """Document d'instance; matrices stockées ligne par ligne."""
    model_config = ConfigDict(extra="forbid")

    name: str = "instance"
    dimension: int = Field(gt=0)
    pairs: List[PairSpec] = Field(min_length=1)
    known_solution: Optional[Vector] = None
    x0: Optional[Vector] = None


# --- Configuration d'une résolution ---

class RunConfig(BaseModel):
    instance_path: Path
    algo: Literal["parallel", "cyclic"] = "parallel"
    lambda_step: Optional[float] = None  # défaut: moitié de la borne min{1/(2c1), 1/(2c2)}
    gamma: float = 0.5
    epsilon: Optional[float] = None
    max_iter: int = Field(default_factory=lambda: settings.MAX_ITER, ge=1)
    tol: float = Field(default_factory=lambda: settings.TOL_STOP, gt=0)
    x0: Optional[Vector] = None
    trace_path: Path
    trace_format: Literal["csv", "json"] = Field(default_factory=lambda: settings.TRACE_FORMAT)
    summary_path: Optional[Path] = None
    check_invariants: bool = True
    seed: int = Field(default_factory=lambda: settings.SEED)
    workers: int = Field(default_factory=lambda: settings.PARALLEL_WORKERS, ge=1)
    timing: bool = Field(default_factory=lambda: settings.TRACE_WALL_TIME)

    @field_validator("trace_format", mode="before")
    @classmethod
    def lower_format(cls, value):
        return value.lower() if isinstance(value, str) else value

    @property
    def resolved_summary_path(self) -> Path:
        if self.summary_path is not None:
            return self.summary_path
        return self.trace_path.with_name(self.trace_path.name + ".summary.json")


# --- Traces et résumé ---

class TraceRow(BaseModel):
    n: int
    active_index: Optional[int] = None  # vide en parallèle
    x_norm_change: float
    anchor_dist: float
    max_y_residual: float
    max_z_residual: float
    fejer_slack: Optional[float] = None
    containment_ok: Optional[bool] = None
    wall_ms: Optional[float] = None
    x: Optional[Vector] = None


class RunSummary(BaseModel):
    algorithm: str
    instance: str
    final: Optional[Vector] = None
    iterations: int = 0
    stop_reason: Optional[str] = None
    max_invariant_violation: Optional[float] = None
    exit_code: int
    error: Optional[str] = None
    failed_iteration: Optional[int] = None
    latency: Dict[str, Dict[str, float]] = Field(default_factory=dict)
