# epslens/definability.py
"""Approximate definitions of local types from finitely many rows.

A local type is a value p(b) for every column b. ``find_witness_rows`` runs the
witness-row construction and returns either rows A whose columns determine p up to
2*epsilon + gamma, or a chain showing the table is not epsilon-stable.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.typing import NDArray

from epslens.contracts import (
    DefinitionSearchError,
    DefinitionStrategy,
    DimensionMismatchError,
    EpslensError,
    GlueDefinitionDocument,
    MedianDefinitionDocument,
    ValueKind,
    WitnessSetCertificate,
)
from epslens.gluing import GluedFunction, lipschitz_glue
from epslens.settings import get_settings
from epslens.stability import WeightedBipartiteStructure, WitnessChain, bitsets, lex_least_clique
from epslens.value_space import (
    ValuePoint,
    ValueSpace,
    embed_finite_metric,
    encode_values,
    value_distance_array,
)

logger = logging.getLogger(__name__)

# (structure, type, demanded columns, zeta) -> row index, or None when no row is zeta-close
Oracle = Callable[[WeightedBipartiteStructure, "TypeFunction", Sequence[int], float], Union[int, None]]


@dataclass(frozen=True, eq=False)
class TypeFunction:
    """p: W -> values, dense over the columns of one structure."""

    values: np.ndarray
    space: ValueSpace
    realized_row: int | None = None
    oracle: Oracle | None = None

    @classmethod
    def realized(cls, f: WeightedBipartiteStructure, row: int) -> TypeFunction:
        return cls(values=np.array(f.data[row]), space=f.space, realized_row=row)

    @classmethod
    def external(
        cls,
        f: WeightedBipartiteStructure,
        values: Sequence[ValuePoint] | np.ndarray,
        *,
        oracle: Oracle | None = None,
    ) -> TypeFunction:
        if isinstance(values, np.ndarray):
            dense = values
        else:
            dense = encode_values(f.space, list(values))
        expected = f.data.shape[1:]
        if dense.shape != expected:
            raise DimensionMismatchError(f"type has shape {dense.shape}, structure columns need {expected}")
        return cls(values=dense, space=f.space, oracle=oracle)

    @property
    def is_realized(self) -> bool:
        return self.realized_row is not None

    def value(self, j: int) -> ValuePoint:
        raw = self.values[j]
        if self.space.kind is ValueKind.FINITE_METRIC:
            return ValuePoint.finite(int(raw))
        if self.space.kind is ValueKind.REAL:
            return ValuePoint.real(float(raw))
        return ValuePoint.vector(np.asarray(raw).tolist())

    def distances_to_rows(self, f: WeightedBipartiteStructure) -> NDArray[np.float64]:
        """(n, m) array of d(f(a, b), p(b))."""
        return value_distance_array(f.space, f.data, self.values[None, ...])

    def approximate(self, f: WeightedBipartiteStructure, columns: Sequence[int], zeta: float) -> int | None:
        oracle = self.oracle or nearest_row_oracle
        return oracle(f, self, columns, zeta)


def nearest_row_oracle(
    f: WeightedBipartiteStructure, p: TypeFunction, columns: Sequence[int], zeta: float
) -> int | None:
    """Row closest to p on the demanded columns; ties by distance on all columns, then index."""
    dist = p.distances_to_rows(f)
    local = dist[:, list(columns)].max(axis=1) if len(columns) else np.zeros(dist.shape[0])
    overall = dist.max(axis=1)
    order = np.lexsort((np.arange(dist.shape[0]), overall, local))
    best = int(order[0])
    return best if local[best] < zeta else None


@dataclass(frozen=True)
class WitnessSet:
    rows: tuple[int, ...]
    epsilon: float
    gamma: float
    delta: float
    zeta: float
    verified: bool
    rounds: int = 0

    @property
    def bound(self) -> float:
        return 2 * self.epsilon + self.gamma

    def to_certificate(self, f: WeightedBipartiteStructure, p: TypeFunction) -> WitnessSetCertificate:
        return WitnessSetCertificate(
            space=f.space.to_document(),
            row_labels=[f.rows[a] for a in self.rows],
            col_labels=list(f.cols),
            row_values=[[f.encoded(a, b) for b in range(len(f.cols))] for a in self.rows],
            type_values=[p.value(b).encode() for b in range(len(f.cols))],
            epsilon=self.epsilon,
            gamma=self.gamma,
            delta=self.delta,
        )


@dataclass(frozen=True)
class InstabilityEvidence:
    chain: WitnessChain
    epsilon: float
    rounds: int
    colour: str


@dataclass(frozen=True)
class OracleFailure:
    """The type is not finitely satisfiable at level zeta on the demanded columns."""

    columns: tuple[int, ...]
    zeta: float
    rounds: int

    @property
    def message(self) -> str:
        return f"not finitely satisfiable at level {self.zeta} on {len(self.columns)} demanded column(s)"


WitnessOutcome = Union[WitnessSet, InstabilityEvidence, OracleFailure]


def _column_agreement(f: WeightedBipartiteStructure, rows: Sequence[int]) -> NDArray[np.float64]:
    """D[b, c] = max over rows a of d(f(a, b), f(a, c)); zero for no rows."""
    m = len(f.cols)
    if not rows:
        return np.zeros((m, m))
    block = f.data[list(rows)]
    return value_distance_array(f.space, block[:, :, None, ...], block[:, None, :, ...]).max(axis=0)


def _type_spread(p: TypeFunction) -> NDArray[np.float64]:
    return value_distance_array(p.space, p.values[:, None, ...], p.values[None, :, ...])


def witness_violations(
    f: WeightedBipartiteStructure,
    p: TypeFunction,
    rows: Sequence[int],
    epsilon: float,
    gamma: float,
    delta: float,
) -> NDArray[np.int64]:
    """Column pairs b < c agreeing within delta on every row but with d(p(b), p(c)) >= 2eps+gamma."""
    premise = _column_agreement(f, rows) < delta
    bad = _type_spread(p) >= 2 * epsilon + gamma
    return np.argwhere(np.triu(premise & bad, k=1))


def verify_witness_set(
    f: WeightedBipartiteStructure,
    p: TypeFunction,
    rows: Sequence[int],
    epsilon: float,
    gamma: float,
    delta: float,
) -> bool:
    return witness_violations(f, p, rows, epsilon, gamma, delta).size == 0


def _extract_chain(
    f: WeightedBipartiteStructure,
    rows: Sequence[int],
    pairs: Sequence[tuple[int, int]],
    epsilon: float,
) -> tuple[WitnessChain, str]:
    """Colour index pairs j < i by which side keeps the swapped values more than epsilon apart."""
    count = len(pairs)
    b_side = np.zeros((count, count), dtype=bool)
    c_side = np.zeros((count, count), dtype=bool)
    for i, j in itertools.combinations(range(count), 2):
        ai, aj = rows[i], rows[j]
        (bi, ci), (bj, cj) = pairs[i], pairs[j]
        d_b = float(value_distance_array(f.space, f.data[ai, bj], f.data[aj, bi]))
        d_c = float(value_distance_array(f.space, f.data[ai, cj], f.data[aj, ci]))
        if d_b > epsilon:
            b_side[i, j] = b_side[j, i] = True
        elif d_c > epsilon:
            c_side[i, j] = c_side[j, i] = True
    best: tuple[list[int], str] = ([], "b")
    for colour, mask in (("b", b_side), ("c", c_side)):
        adjacency = bitsets(mask)
        size = len(best[0]) + 1
        while size <= count:
            clique = lex_least_clique(adjacency, size)
            if clique is None:
                break
            if size > len(best[0]):
                best = (clique, colour)
            size += 1
    indices, colour = best
    if len(indices) < 2:
        raise EpslensError("construction run too short to extract an instability chain")
    side = 0 if colour == "b" else 1
    chain = WitnessChain(
        structure=f,
        rows=tuple(rows[i] for i in indices),
        cols=tuple(pairs[i][side] for i in indices),
    )
    return chain, colour


def find_witness_rows(
    f: WeightedBipartiteStructure,
    p: TypeFunction,
    epsilon: float,
    gamma: float,
    delta: float,
    *,
    zeta: float | None = None,
    max_rounds: int | None = None,
) -> WitnessOutcome:
    if not gamma > delta > 0:
        raise EpslensError(f"need gamma > delta > 0, got gamma={gamma}, delta={delta}")
    if not epsilon > 0:
        raise EpslensError(f"epsilon must be > 0, got {epsilon}")
    zeta = (gamma - delta) / 2 if zeta is None else zeta
    m = len(f.cols)
    cap = m * m + 1 if max_rounds is None else max_rounds
    if cap < 2:
        raise EpslensError("max_rounds must be at least 2")

    rows: list[int] = []
    pairs: list[tuple[int, int]] = []
    if verify_witness_set(f, p, rows, epsilon, gamma, delta):
        return WitnessSet(rows=(), epsilon=epsilon, gamma=gamma, delta=delta, zeta=zeta, verified=True)

    while True:
        demanded = sorted({col for pair in pairs for col in pair})
        row = p.approximate(f, demanded, zeta)
        if row is None:
            logger.info("oracle failed on %d demanded columns at zeta=%s", len(demanded), zeta)
            return OracleFailure(columns=tuple(demanded), zeta=zeta, rounds=len(rows))
        rows.append(row)
        violations = witness_violations(f, p, rows, epsilon, gamma, delta)
        if violations.size == 0:
            logger.debug("witness set of %d rows after %d rounds", len(rows), len(rows))
            return WitnessSet(
                rows=tuple(rows),
                epsilon=epsilon,
                gamma=gamma,
                delta=delta,
                zeta=zeta,
                verified=True,
                rounds=len(rows),
            )
        b, c = (int(v) for v in violations[0])
        pairs.append((b, c))
        if len(pairs) >= cap:
            break

    chain, colour = _extract_chain(f, rows, pairs, epsilon)
    if not chain.verify(epsilon, strict=True):
        raise EpslensError("extracted chain failed re-verification")
    logger.info("construction hit the %d-round cap; extracted a %d-chain", cap, chain.k + 1)
    return InstabilityEvidence(chain=chain, epsilon=epsilon, rounds=len(rows), colour=colour)


# ------------------------------------------------------------------------------
# Definitions
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class GlueDefinition:
    """psi(b) = (h_i(t(b)))_i where t(b) concatenates the coordinates of f(a, b), a in A."""

    row_labels: tuple[str, ...]
    input_space: ValueSpace
    output_kind: ValueKind
    delta: float
    coordinates: tuple[GluedFunction, ...]
    sup_error: float
    error_bound: float
    embedding: NDArray[np.float64] | None = field(default=None, repr=False)

    @property
    def lipschitz_bound(self) -> float:
        return max((h.lipschitz_bound for h in self.coordinates), default=0.0)

    def encode_column(self, column: Sequence[ValuePoint]) -> NDArray[np.float64]:
        if len(column) != len(self.row_labels):
            raise DimensionMismatchError(
                f"definition uses {len(self.row_labels)} row(s), got {len(column)} value(s)"
            )
        return _flatten(self.input_space, self.embedding, encode_values(self.input_space, list(column)))

    def evaluate(self, column: Sequence[ValuePoint]) -> ValuePoint:
        t = self.encode_column(column).reshape(1, -1)
        coords = [float(h.evaluate_many(t)[0]) for h in self.coordinates]
        if self.output_kind is ValueKind.REAL:
            return ValuePoint.real(coords[0])
        return ValuePoint.vector(coords)

    def to_document(self, f: WeightedBipartiteStructure | None = None, p: TypeFunction | None = None) -> GlueDefinitionDocument:
        inputs: list[list[list[float]]] = []
        type_values: list[list[float]] = []
        col_labels: list[str] = []
        if f is not None and p is not None:
            rows = [f.row_index(label) for label in self.row_labels]
            col_labels = list(f.cols)
            inputs = [[f.encoded(a, b) for a in rows] for b in range(len(f.cols))]
            type_values = _output_coords(p, self.embedding).tolist()
        return GlueDefinitionDocument(
            output_kind=self.output_kind,
            row_labels=list(self.row_labels),
            input_space=self.input_space.to_document(),
            embedding=self.embedding.tolist() if self.embedding is not None else None,
            delta=self.delta,
            coordinates=[h.to_document() for h in self.coordinates],
            sup_error=self.sup_error,
            error_bound=self.error_bound,
            col_labels=col_labels,
            column_inputs=inputs,
            type_values=type_values,
        )

    @classmethod
    def from_document(cls, doc: GlueDefinitionDocument) -> GlueDefinition:
        coordinates = tuple(
            GluedFunction(
                anchors=np.asarray(c.anchors, dtype=np.float64).reshape(len(c.anchor_values), -1),
                anchor_values=np.asarray(c.anchor_values, dtype=np.float64),
                anchor_sources=(),
                offset=c.offset,
                lower=c.lower,
                upper=c.upper,
                delta=doc.delta,
                lipschitz_bound=c.lipschitz_bound,
                sup_error=doc.sup_error,
                epsilon=doc.error_bound,
            )
            for c in doc.coordinates
        )
        return cls(
            row_labels=tuple(doc.row_labels),
            input_space=ValueSpace.from_document(doc.input_space),
            output_kind=doc.output_kind,
            delta=doc.delta,
            coordinates=coordinates,
            sup_error=doc.sup_error,
            error_bound=doc.error_bound,
            embedding=np.asarray(doc.embedding, dtype=np.float64) if doc.embedding is not None else None,
        )


@dataclass(frozen=True)
class MedianDefinition:
    """psi(b) = median of f(a_n, b) over an odd multiset of rows."""

    row_labels: tuple[str, ...]
    epsilon: float
    sup_error: float

    def evaluate(self, column: Sequence[ValuePoint]) -> ValuePoint:
        if len(column) != len(self.row_labels):
            raise DimensionMismatchError(
                f"definition uses {len(self.row_labels)} row(s), got {len(column)} value(s)"
            )
        return ValuePoint.real(float(np.median([point.value for point in column])))

    def to_document(self, f: WeightedBipartiteStructure | None = None, p: TypeFunction | None = None) -> MedianDefinitionDocument:
        inputs: list[list[float]] = []
        type_values: list[float] = []
        col_labels: list[str] = []
        if f is not None and p is not None:
            rows = [f.row_index(label) for label in self.row_labels]
            col_labels = list(f.cols)
            inputs = [[float(f.data[a, b]) for a in rows] for b in range(len(f.cols))]
            type_values = [float(v) for v in p.values]
        return MedianDefinitionDocument(
            row_labels=list(self.row_labels),
            epsilon=self.epsilon,
            sup_error=self.sup_error,
            col_labels=col_labels,
            column_inputs=inputs,
            type_values=type_values,
        )

    @classmethod
    def from_document(cls, doc: MedianDefinitionDocument) -> MedianDefinition:
        return cls(row_labels=tuple(doc.row_labels), epsilon=doc.epsilon, sup_error=doc.sup_error)


Definition = Union[GlueDefinition, MedianDefinition]


def _embedding_table(space: ValueSpace) -> NDArray[np.float64] | None:
    if space.kind is not ValueKind.FINITE_METRIC:
        return None
    return np.asarray([p.coords for p in embed_finite_metric(space, 0)], dtype=np.float64)


def _flatten(space: ValueSpace, embedding: NDArray[np.float64] | None, dense: np.ndarray) -> NDArray[np.float64]:
    """Coordinates of a dense value array along its last value axis, flattened over the rest."""
    if space.kind is ValueKind.FINITE_METRIC:
        assert embedding is not None
        return embedding[np.asarray(dense, dtype=np.int64)].reshape(-1)
    return np.asarray(dense, dtype=np.float64).reshape(-1)


def _output_coords(p: TypeFunction, embedding: NDArray[np.float64] | None) -> NDArray[np.float64]:
    """(m, c) coordinates of p."""
    if p.space.kind is ValueKind.FINITE_METRIC:
        assert embedding is not None
        return embedding[np.asarray(p.values, dtype=np.int64)]
    values = np.asarray(p.values, dtype=np.float64)
    return values.reshape(values.shape[0], -1)


def definition_inputs(f: WeightedBipartiteStructure, rows: Sequence[int], embedding: NDArray[np.float64] | None) -> NDArray[np.float64]:
    """(m, |A| * c) matrix of flattened column data t(b)."""
    m = len(f.cols)
    if not rows:
        return np.zeros((m, 0))
    return np.stack([_flatten(f.space, embedding, f.data[list(rows), b]) for b in range(m)])


def glue_definition(
    f: WeightedBipartiteStructure, p: TypeFunction, witness: WitnessSet
) -> GlueDefinition:
    embedding = _embedding_table(f.space)
    inputs = definition_inputs(f, witness.rows, embedding)
    outputs = _output_coords(p, embedding)
    coordinates = tuple(
        lipschitz_glue(inputs, outputs[:, i], witness.delta, witness.bound)
        for i in range(outputs.shape[1])
    )
    approx = np.stack([h.evaluate_many(inputs) for h in coordinates], axis=1)
    sup_error = float(np.abs(approx - outputs).max())
    output_kind = ValueKind.REAL if f.space.kind is ValueKind.REAL else ValueKind.SUP_VECTOR
    return GlueDefinition(
        row_labels=tuple(f.rows[a] for a in witness.rows),
        input_space=f.space,
        output_kind=output_kind,
        delta=witness.delta,
        coordinates=coordinates,
        sup_error=sup_error,
        error_bound=witness.bound,
        embedding=embedding,
    )


def _median_errors(table: NDArray[np.float64], target: NDArray[np.float64], combos: np.ndarray) -> NDArray[np.float64]:
    medians = np.median(table[combos], axis=1)
    return np.abs(medians - target[None, :]).max(axis=1)


def _median_search(
    f: WeightedBipartiteStructure,
    p: TypeFunction,
    epsilon: float,
    n_max: int,
    tolerance: float,
    chunk: int = 20_000,
) -> tuple[tuple[int, ...], float]:
    table = np.asarray(f.data, dtype=np.float64)
    target = np.asarray(p.values, dtype=np.float64)
    n = table.shape[0]
    best: tuple[tuple[int, ...], float] = ((), float("inf"))
    for size in range(1, n_max + 1, 2):
        size_best: tuple[tuple[int, ...], float] = ((), float("inf"))
        combos_iter = itertools.combinations_with_replacement(range(n), size)
        while True:
            batch = list(itertools.islice(combos_iter, chunk))
            if not batch:
                break
            combos = np.asarray(batch, dtype=np.int64)
            errors = _median_errors(table, target, combos)
            idx = int(np.argmin(errors))
            if errors[idx] < size_best[1]:
                size_best = (tuple(int(v) for v in combos[idx]), float(errors[idx]))
        if size_best[1] < best[1]:
            best = size_best
        if size_best[1] <= epsilon + tolerance:
            return size_best
    logger.info("exact median search up to %d rows failed (best %.3g); trying greedy", n_max, best[1])
    chosen = list(best[0])
    current = best[1]
    limit = max(2 * n + 1, n_max + 2)
    while len(chosen) + 2 <= limit:
        pair_combos = np.asarray(
            [sorted(chosen + [a, b]) for a, b in itertools.combinations_with_replacement(range(n), 2)],
            dtype=np.int64,
        )
        errors = _median_errors(table, target, pair_combos)
        idx = int(np.argmin(errors))
        if errors[idx] >= current:
            break
        chosen, current = [int(v) for v in pair_combos[idx]], float(errors[idx])
        if current <= epsilon + tolerance:
            return tuple(chosen), current
    raise DefinitionSearchError(
        f"no median definition within {epsilon} (best error {current:.6g} with {len(chosen)} rows)"
    )


def build_definition(
    f: WeightedBipartiteStructure,
    p: TypeFunction,
    epsilon: float,
    gamma: float | None = None,
    delta: float | None = None,
    *,
    strategy: DefinitionStrategy = DefinitionStrategy.GLUE,
    zeta: float | None = None,
    max_rounds: int | None = None,
    n_max: int | None = None,
    tolerance: float | None = None,
) -> tuple[Definition, float]:
    """Certified definition of p and its measured sup error."""
    settings = get_settings()
    tol = settings.tolerance if tolerance is None else tolerance
    if strategy is DefinitionStrategy.MEDIAN:
        if f.space.kind is not ValueKind.REAL:
            raise EpslensError("median definitions need real values")
        rows, error = _median_search(f, p, epsilon, n_max or settings.median_max_rows, tol)
        definition = MedianDefinition(
            row_labels=tuple(f.rows[a] for a in rows), epsilon=epsilon, sup_error=error
        )
        return definition, error

    if gamma is None or delta is None:
        raise EpslensError("glue definitions need gamma and delta")
    outcome = find_witness_rows(f, p, epsilon, gamma, delta, zeta=zeta, max_rounds=max_rounds)
    if isinstance(outcome, OracleFailure):
        raise DefinitionSearchError(outcome.message)
    if isinstance(outcome, InstabilityEvidence):
        raise DefinitionSearchError(
            f"table is not {epsilon}-stable: chain of length {outcome.chain.k + 1} "
            f"with min discrepancy {outcome.chain.min_discrepancy}"
        )
    definition = glue_definition(f, p, outcome)
    if definition.sup_error > definition.error_bound + tol:
        raise DefinitionSearchError(
            f"glued definition error {definition.sup_error} exceeds {definition.error_bound}"
        )
    return definition, definition.sup_error


def evaluate_definition(definition: Definition, column: Sequence[ValuePoint]) -> ValuePoint:
    """Value of the definition at a column given by (f(a, b))_{a in A}, possibly a new b."""
    return definition.evaluate(column)


def definition_from_document(doc: GlueDefinitionDocument | MedianDefinitionDocument) -> Definition:
    if isinstance(doc, GlueDefinitionDocument):
        return GlueDefinition.from_document(doc)
    return MedianDefinition.from_document(doc)


def output_distance(definition: Definition, approx: ValuePoint, target: ValuePoint) -> float:
    """Sup distance between a definition output and a table value, in the output coordinates."""
    if isinstance(definition, MedianDefinition):
        return abs(approx.value - target.value)
    if target.kind is ValueKind.FINITE_METRIC:
        if definition.embedding is None or target.index is None:
            raise DimensionMismatchError("finite-metric value without an embedding table")
        coords = definition.embedding[target.index]
    else:
        coords = np.asarray(target.coords, dtype=np.float64)
    got = np.asarray(approx.coords, dtype=np.float64)
    if got.shape != coords.shape:
        raise DimensionMismatchError(f"output has {got.size} coordinate(s), value has {coords.size}")
    return float(np.abs(got - coords).max()) if got.size else 0.0


def column_data(f: WeightedBipartiteStructure, definition: Definition, column: int) -> list[ValuePoint]:
    """(f(a, b))_{a in A} for a column of f, matching rows by label."""
    rows = []
    for label in definition.row_labels:
        if label not in f.rows:
            raise EpslensError(f"definition row {label!r} is missing from the table")
        rows.append(f.rows.index(label))
    return [f.value(a, column) for a in rows]


__all__ = [
    "Definition",
    "GlueDefinition",
    "InstabilityEvidence",
    "MedianDefinition",
    "OracleFailure",
    "TypeFunction",
    "WitnessSet",
    "build_definition",
    "column_data",
    "definition_from_document",
    "evaluate_definition",
    "find_witness_rows",
    "glue_definition",
    "nearest_row_oracle",
    "output_distance",
    "verify_witness_set",
]
