# epslens/contracts.py
from __future__ import annotations

from pathlib import Path
from typing import Annotated, Any, Literal, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)

from epslens._compat import Self, StrEnum

# ------------------------------------------------------------------------------
# Errors
# ------------------------------------------------------------------------------


class EpslensError(ValueError):
    """Base class for domain errors; the CLI maps these to exit code 1."""


class MetricTableError(EpslensError):
    """Raised when a finite metric table fails the metric axioms."""


class DimensionMismatchError(EpslensError):
    """Raised when values of different dimension or out-of-range indices are compared."""


class EnvelopeError(EpslensError):
    """Raised on connective arity/shape errors during envelope propagation."""


class FormulaSyntaxError(EpslensError):
    def __init__(self, message: str, *, position: int) -> None:
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownPredicateError(EpslensError):
    pass


class SortMismatchError(EpslensError):
    pass


class GuardViolationError(EpslensError):
    """Raised when a quantified subformula's envelope is not contained in the nonnegative reals."""


class UnassignedVariableError(EpslensError):
    pass


class ShapeMismatchError(EpslensError):
    pass


class SizeGuardExceeded(EpslensError):
    """Raised when an exact search would exceed a configured cap; the CLI exits with 2."""


class HypothesisViolationError(EpslensError):
    def __init__(self, message: str, *, pair: tuple[int, int]) -> None:
        super().__init__(f"{message}: points {pair[0]} and {pair[1]}")
        self.pair = pair


class DefinitionSearchError(EpslensError):
    """Raised when no certified definition can be produced."""


class InputFormatError(EpslensError):
    def __init__(self, message: str, *, path: str | Path, line: int | None = None) -> None:
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


# ------------------------------------------------------------------------------
# Shared BaseModel config helpers
# ------------------------------------------------------------------------------

_CONTRACT_CONFIG = ConfigDict(
    extra="forbid",
    validate_assignment=True,
    use_enum_values=False,  # keep enums as enums in Python
)

_IMMUTABLE_CONTRACT_CONFIG = ConfigDict(
    extra="forbid",
    use_enum_values=False,
    frozen=True,
)

# ------------------------------------------------------------------------------
# Enumerations
# ------------------------------------------------------------------------------


class ValueKind(StrEnum):
    REAL = "real"
    SUP_VECTOR = "sup_vector"
    FINITE_METRIC = "finite_metric"


class ChainKind(StrEnum):
    PLAIN = "plain"
    BI_CONSTANT = "bi_constant"


class SearchMode(StrEnum):
    EXACT = "exact"
    HEURISTIC = "heuristic"


class DefinitionStrategy(StrEnum):
    GLUE = "glue"
    MEDIAN = "median"


class CoverMethod(StrEnum):
    EXACT = "exact"
    GREEDY = "greedy"


class LawStatus(StrEnum):
    PASSED = "passed"
    FAILED = "failed"
    SKIPPED = "skipped"


class Command(StrEnum):
    DETECT = "detect"
    PROFILE = "profile"
    DEFINE = "define"
    AUDIT_SEMINORM = "audit-seminorm"
    SYMMETRY = "symmetry"
    FS_LEVEL = "fs-level"
    COVER = "cover"
    CB = "cb"
    EVAL = "eval"
    EMBED = "embed"
    VERIFY = "verify"


# ------------------------------------------------------------------------------
# Value encoding
# ------------------------------------------------------------------------------

# A value is encoded as a list of floats: [v] for reals, the coordinates for sup
# vectors, and [index] for points of a finite metric space.
EncodedValue = list[float]


class SpaceDocument(BaseModel):
    model_config = _IMMUTABLE_CONTRACT_CONFIG
    kind: ValueKind
    dim: int | None = None
    table: list[list[float]] | None = None

    @model_validator(mode="after")
    def _check_shape(self) -> Self:
        if self.kind is ValueKind.SUP_VECTOR and (self.dim is None or self.dim < 1):
            raise ValueError("sup_vector spaces require a positive dim")
        if self.kind is ValueKind.FINITE_METRIC and not self.table:
            raise ValueError("finite_metric spaces require a table")
        return self


# ------------------------------------------------------------------------------
# Certificates
# ------------------------------------------------------------------------------


class ChainCertificate(BaseModel):
    """A chain with its (k+1)x(k+1) value block f(a_i, b_j); enough to recheck every discrepancy."""

    model_config = _IMMUTABLE_CONTRACT_CONFIG
    kind: Literal["chain"] = "chain"
    space: SpaceDocument
    row_labels: list[str]
    col_labels: list[str]
    values: list[list[EncodedValue]]
    chain_kind: ChainKind = ChainKind.PLAIN
    epsilon: float
    strict: bool = False
    r: EncodedValue | None = None
    s: EncodedValue | None = None
    delta: float | None = None


class RamseyCertificate(BaseModel):
    model_config = _IMMUTABLE_CONTRACT_CONFIG
    kind: Literal["ramsey"] = "ramsey"
    s: int
    value: int
    verified: bool
    colorings_checked: int = 0
    lower_bound_vertices: int = 0
    lower_bound_red_edges: list[tuple[int, int]] = Field(default_factory=list)
    note: str = ""


class WitnessSetCertificate(BaseModel):
    model_config = _IMMUTABLE_CONTRACT_CONFIG
    kind: Literal["witness_set"] = "witness_set"
    space: SpaceDocument
    row_labels: list[str]
    col_labels: list[str]
    row_values: list[list[EncodedValue]]
    type_values: list[EncodedValue]
    epsilon: float
    gamma: float
    delta: float


class GlueCoordinateDocument(BaseModel):
    model_config = _IMMUTABLE_CONTRACT_CONFIG
    anchors: list[list[float]]
    anchor_values: list[float]
    offset: float
    lower: float
    upper: float
    lipschitz_bound: float


class GlueDefinitionDocument(BaseModel):
    """Exported glued definition; replayable by ``evaluate_definition`` and self-checking."""

    model_config = _IMMUTABLE_CONTRACT_CONFIG
    kind: Literal["glue_definition"] = "glue_definition"
    output_kind: ValueKind
    row_labels: list[str]
    input_space: SpaceDocument
    embedding: list[list[float]] | None = None
    delta: float
    coordinates: list[GlueCoordinateDocument]
    sup_error: float
    error_bound: float
    col_labels: list[str] = Field(default_factory=list)
    column_inputs: list[list[EncodedValue]] = Field(default_factory=list)
    type_values: list[list[float]] = Field(default_factory=list)


class MedianDefinitionDocument(BaseModel):
    model_config = _IMMUTABLE_CONTRACT_CONFIG
    kind: Literal["median_definition"] = "median_definition"
    row_labels: list[str]
    epsilon: float
    sup_error: float
    col_labels: list[str] = Field(default_factory=list)
    column_inputs: list[list[float]] = Field(default_factory=list)
    type_values: list[float] = Field(default_factory=list)


class CoverCertificate(BaseModel):
    model_config = _IMMUTABLE_CONTRACT_CONFIG
    kind: Literal["cover"] = "cover"
    space: SpaceDocument
    row_labels: list[str]
    row_values: list[list[EncodedValue]]
    parts: list[list[str]]
    epsilon: float


class CBCertificate(BaseModel):
    model_config = _IMMUTABLE_CONTRACT_CONFIG
    kind: Literal["cb"] = "cb"
    points: list[str]
    metric: list[list[float]]
    closed_generators: list[list[str]]
    epsilon: float
    levels: list[list[str]]
    ranks: dict[str, int | None]
    analyzable: bool


class EmbeddingCertificate(BaseModel):
    model_config = _IMMUTABLE_CONTRACT_CONFIG
    kind: Literal["embedding"] = "embedding"
    metric: list[list[float]]
    base: int
    images: list[list[float]]


class MeasurementCertificate(BaseModel):
    """Raw inputs and claimed outputs of a measured (not asserted) quantity."""

    model_config = _IMMUTABLE_CONTRACT_CONFIG
    kind: Literal["measurement"] = "measurement"
    name: Literal["fs_level", "extension", "symmetry", "diameter"]
    space: SpaceDocument
    inputs: dict[str, Any]
    claimed: dict[str, Any]


Certificate = Annotated[
    Union[
        ChainCertificate,
        RamseyCertificate,
        WitnessSetCertificate,
        GlueDefinitionDocument,
        MedianDefinitionDocument,
        CoverCertificate,
        CBCertificate,
        EmbeddingCertificate,
        MeasurementCertificate,
    ],
    Field(discriminator="kind"),
]

DefinitionDocument = Annotated[
    Union[GlueDefinitionDocument, MedianDefinitionDocument],
    Field(discriminator="kind"),
]


class DefinitionEnvelope(BaseModel):
    """File wrapper so a bare definition export round-trips through the discriminator."""

    model_config = _IMMUTABLE_CONTRACT_CONFIG
    definition: DefinitionDocument


# ------------------------------------------------------------------------------
# Run configuration and reports
# ------------------------------------------------------------------------------


class RunConfig(BaseModel):
    model_config = _CONTRACT_CONFIG
    command: Command
    matrix: Path | None = None
    matrix2: Path | None = None
    type_column: Path | None = None
    row: str | None = None
    structure: Path | None = None
    formula: str | None = None
    x_vars: list[str] = Field(default_factory=list)
    y_vars: list[str] = Field(default_factory=list)
    metric: Path | None = None
    space: Path | None = None
    fixture: Path | None = None
    report: Path | None = None
    p_row: str | None = None
    q_col: str | None = None
    epsilon: float | None = None
    k: int | None = None
    k_max: int | None = None
    gamma: float | None = None
    delta: float | None = None
    radius: float | None = None
    base: int = 0
    bi_constant: bool = False
    mode: SearchMode = SearchMode.EXACT
    strategy: DefinitionStrategy = DefinitionStrategy.GLUE
    cover_method: CoverMethod = CoverMethod.EXACT
    scalars: list[float] = Field(default_factory=lambda: [0.5, 2.0, -1.0])
    force: bool = False
    seed: int = 0
    output: Path | None = None
    profile_csv: Path | None = None
    definition_out: Path | None = None

    @field_validator("epsilon")
    @classmethod
    def _positive_epsilon(cls, value: float | None) -> float | None:
        if value is not None and value <= 0:
            raise ValueError("epsilon must be > 0")
        return value

    @field_validator("k", "k_max")
    @classmethod
    def _positive_k(cls, value: int | None) -> int | None:
        if value is not None and value < 1:
            raise ValueError("k must be >= 1")
        return value

    @model_validator(mode="after")
    def _check_gamma_delta(self) -> Self:
        if self.delta is not None and self.delta <= 0 and not self.bi_constant:
            raise ValueError("delta must be > 0")
        if self.gamma is not None and self.delta is not None and not self.gamma > self.delta:
            raise ValueError("gamma must be > delta")
        return self

    def require(self, *names: str) -> None:
        missing = [name for name in names if getattr(self, name) in (None, [])]
        if missing:
            raise EpslensError(f"{self.command.value}: missing required parameter(s): {', '.join(missing)}")


class Report(BaseModel):
    model_config = _CONTRACT_CONFIG
    command: Command
    config: dict[str, Any] = Field(default_factory=dict)
    results: dict[str, Any] = Field(default_factory=dict)
    certificates: list[Certificate] = Field(default_factory=list)
    timing_s: float = 0.0
    tool_version: str = "0+unknown"
    payload_digest: str = ""


# ------------------------------------------------------------------------------
# Input documents
# ------------------------------------------------------------------------------


class PredicateDocument(BaseModel):
    model_config = _IMMUTABLE_CONTRACT_CONFIG
    sorts: list[str]
    value_kind: ValueKind = ValueKind.REAL
    # one [lo, hi] per coordinate (a single box); reals use a single interval
    envelope: list[tuple[float, float]] | None = None
    # for finite-metric predicates: admissible point indices
    indices: list[int] | None = None
    table: dict[str, float | int | list[float]]
    modulus: str | None = None


class StructureDocument(BaseModel):
    model_config = _IMMUTABLE_CONTRACT_CONFIG
    sorts: dict[str, list[str]]
    predicates: dict[str, PredicateDocument]
    value_space: SpaceDocument | None = None


class TopometricDocument(BaseModel):
    model_config = _IMMUTABLE_CONTRACT_CONFIG
    points: list[str]
    metric: list[list[float]]
    closed_generators: list[list[str]] = Field(default_factory=list)
    force_discrete: bool = False


class FixtureDocument(BaseModel):
    model_config = _IMMUTABLE_CONTRACT_CONFIG
    table: str
    m_rows: list[str]
    m_cols: list[str]
