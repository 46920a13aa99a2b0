# epslens/value_space.py
"""Finite-dimensional value spaces with the sup metric, and finite metric tables."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from epslens.contracts import (
    DimensionMismatchError,
    MetricTableError,
    SpaceDocument,
    ValueKind,
)

logger = logging.getLogger(__name__)

METRIC_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ValuePoint:
    """A point of a value space: a real, a sup-vector, or an index into a finite metric table."""

    kind: ValueKind
    coords: tuple[float, ...] = ()
    index: int | None = None

    @classmethod
    def real(cls, value: float) -> ValuePoint:
        return cls(kind=ValueKind.REAL, coords=(float(value),))

    @classmethod
    def vector(cls, coords: Sequence[float]) -> ValuePoint:
        return cls(kind=ValueKind.SUP_VECTOR, coords=tuple(float(c) for c in coords))

    @classmethod
    def finite(cls, index: int) -> ValuePoint:
        return cls(kind=ValueKind.FINITE_METRIC, index=int(index))

    @property
    def value(self) -> float:
        if self.kind is not ValueKind.REAL:
            raise DimensionMismatchError(f"{self.kind.value} point has no scalar value")
        return self.coords[0]

    def encode(self) -> list[float]:
        if self.kind is ValueKind.FINITE_METRIC:
            return [float(self.index if self.index is not None else 0)]
        return list(self.coords)


@dataclass(frozen=True)
class ValueSpace:
    kind: ValueKind
    dim: int = 1
    table: tuple[tuple[float, ...], ...] = field(default=(), repr=False)

    @classmethod
    def real(cls) -> ValueSpace:
        return cls(kind=ValueKind.REAL, dim=1)

    @classmethod
    def sup_vector(cls, dim: int) -> ValueSpace:
        if dim < 1:
            raise DimensionMismatchError(f"sup-vector dimension must be positive, got {dim}")
        return cls(kind=ValueKind.SUP_VECTOR, dim=dim)

    @classmethod
    def finite_metric(cls, table: Sequence[Sequence[float]]) -> ValueSpace:
        matrix = validate_metric_table(table)
        rows = tuple(tuple(float(v) for v in row) for row in matrix.tolist())
        return cls(kind=ValueKind.FINITE_METRIC, dim=1, table=rows)

    @cached_property
    def matrix(self) -> NDArray[np.float64]:
        return np.asarray(self.table, dtype=np.float64)

    @property
    def size(self) -> int:
        return len(self.table)

    @property
    def is_arithmetic(self) -> bool:
        return self.kind is not ValueKind.FINITE_METRIC

    def coordinate_count(self) -> int:
        """Number of float coordinates a value occupies in a dense array."""
        return self.dim if self.kind is ValueKind.SUP_VECTOR else 1

    def check(self, point: ValuePoint) -> None:
        if point.kind is not self.kind:
            raise DimensionMismatchError(
                f"point of kind {point.kind.value} does not belong to a {self.kind.value} space"
            )
        if self.kind is ValueKind.FINITE_METRIC:
            if point.index is None or not 0 <= point.index < self.size:
                raise DimensionMismatchError(
                    f"finite point index {point.index} out of range 0..{self.size - 1}"
                )
        elif len(point.coords) != self.dim:
            raise DimensionMismatchError(
                f"expected {self.dim} coordinate(s), got {len(point.coords)}"
            )

    def decode(self, encoded: Sequence[float]) -> ValuePoint:
        if len(encoded) == 0:
            raise DimensionMismatchError("empty encoded value")
        if self.kind is ValueKind.REAL:
            if len(encoded) != 1:
                raise DimensionMismatchError(f"real value expected, got {len(encoded)} coordinates")
            point = ValuePoint.real(encoded[0])
        elif self.kind is ValueKind.SUP_VECTOR:
            point = ValuePoint.vector(encoded)
        else:
            point = ValuePoint.finite(int(round(encoded[0])))
        self.check(point)
        return point

    def to_document(self) -> SpaceDocument:
        if self.kind is ValueKind.FINITE_METRIC:
            return SpaceDocument(kind=self.kind, table=[list(row) for row in self.table])
        if self.kind is ValueKind.SUP_VECTOR:
            return SpaceDocument(kind=self.kind, dim=self.dim)
        return SpaceDocument(kind=self.kind)

    @classmethod
    def from_document(cls, doc: SpaceDocument) -> ValueSpace:
        if doc.kind is ValueKind.FINITE_METRIC:
            return cls.finite_metric(doc.table or [])
        if doc.kind is ValueKind.SUP_VECTOR:
            return cls.sup_vector(doc.dim or 0)
        return cls.real()


def validate_metric_table(table: Sequence[Sequence[float]]) -> NDArray[np.float64]:
    """Check the metric axioms on a square table and return it as an array."""
    try:
        matrix = np.asarray(table, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise MetricTableError(f"metric table is not numeric: {exc}") from exc
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise MetricTableError(f"metric table must be a nonempty square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise MetricTableError("metric table contains non-finite entries")
    if np.any(matrix < -METRIC_TOLERANCE):
        raise MetricTableError("metric table has negative entries")
    if np.any(np.abs(np.diag(matrix)) > METRIC_TOLERANCE):
        raise MetricTableError("metric table diagonal must be zero")
    asym = np.abs(matrix - matrix.T)
    if np.any(asym > METRIC_TOLERANCE):
        i, j = np.unravel_index(int(np.argmax(asym)), asym.shape)
        raise MetricTableError(f"metric table is not symmetric at ({i}, {j})")
    off_diag = matrix + np.eye(matrix.shape[0])
    if np.any(off_diag <= METRIC_TOLERANCE):
        raise MetricTableError("distinct points at distance zero")
    # d(i,k) <= d(i,j) + d(j,k) for every j
    via = (matrix[:, :, None] + matrix[None, :, :]).min(axis=1)
    slack = matrix - via
    if np.any(slack > METRIC_TOLERANCE):
        i, k = np.unravel_index(int(np.argmax(slack)), slack.shape)
        raise MetricTableError(f"triangle inequality fails for pair ({i}, {k})")
    return matrix


def metric_distance(space: ValueSpace, p: ValuePoint, q: ValuePoint) -> float:
    space.check(p)
    space.check(q)
    if space.kind is ValueKind.FINITE_METRIC:
        assert p.index is not None and q.index is not None
        return space.table[p.index][q.index]
    return max(abs(a - b) for a, b in zip(p.coords, q.coords))


def encode_values(space: ValueSpace, points: Sequence[ValuePoint]) -> NDArray[np.float64] | NDArray[np.int64]:
    """Dense array of points: shape (n,) for reals and finite indices, (n, dim) for vectors."""
    for point in points:
        space.check(point)
    if space.kind is ValueKind.FINITE_METRIC:
        return np.asarray([p.index for p in points], dtype=np.int64)
    if space.kind is ValueKind.REAL:
        return np.asarray([p.coords[0] for p in points], dtype=np.float64)
    return np.asarray([p.coords for p in points], dtype=np.float64).reshape(len(points), space.dim)


def decode_value(space: ValueSpace, raw: object) -> ValuePoint:
    if space.kind is ValueKind.FINITE_METRIC:
        return ValuePoint.finite(int(raw))  # type: ignore[call-overload]
    if space.kind is ValueKind.REAL:
        return ValuePoint.real(float(raw))  # type: ignore[arg-type]
    return ValuePoint.vector(np.asarray(raw, dtype=np.float64).tolist())


def value_distance_array(space: ValueSpace, a: np.ndarray, b: np.ndarray) -> NDArray[np.float64]:
    """Broadcast distance between dense value arrays (trailing axis is the vector axis)."""
    if space.kind is ValueKind.REAL:
        return np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))
    if space.kind is ValueKind.SUP_VECTOR:
        diff = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))
        return diff.max(axis=-1)
    return space.matrix[np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)]


def embed_finite_metric(space: ValueSpace, base: int = 0) -> list[ValuePoint]:
    """Isometric image of a finite metric space in the sup-normed space of dimension |space|.

    Point x maps to (d(x, d_j) - d(d_j, x_0))_j with x_0 the base point.
    """
    if space.kind is not ValueKind.FINITE_METRIC:
        raise MetricTableError("embedding requires a finite metric space")
    matrix = validate_metric_table(space.table)
    if not 0 <= base < matrix.shape[0]:
        raise DimensionMismatchError(f"base index {base} out of range 0..{matrix.shape[0] - 1}")
    images = matrix - matrix[:, base][None, :]
    logger.debug("embedded %d-point metric with base %d", matrix.shape[0], base)
    return [ValuePoint.vector(row) for row in images.tolist()]


def embedding_distortion(space: ValueSpace, images: Sequence[ValuePoint]) -> float:
    """Max |sup-distance of images - input distance| over all pairs."""
    coords = np.asarray([p.coords for p in images], dtype=np.float64)
    sup = np.abs(coords[:, None, :] - coords[None, :, :]).max(axis=-1)
    return float(np.abs(sup - space.matrix).max()) if len(images) else 0.0
