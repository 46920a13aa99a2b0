# epslens/envelopes.py
"""Compact envelopes (finite unions of boxes) and interval propagation through connectives."""

from __future__ import annotations

import itertools
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from epslens._compat import StrEnum
from epslens.contracts import EnvelopeError, ValueKind
from epslens.value_space import ValuePoint, ValueSpace, metric_distance

logger = logging.getLogger(__name__)

Interval = tuple[float, float]
Box = tuple[Interval, ...]

# beyond this many boxes an envelope is replaced by its bounding box
MAX_BOXES = 64


class ConnectiveOp(StrEnum):
    ADD = "add"
    SUB = "sub"
    SCALE = "scale"
    MAX = "max"
    MIN = "min"
    MONUS = "monus"
    DIST = "dist"
    CONST = "const"
    PROJ = "proj"


_ARITY: dict[ConnectiveOp, int] = {
    ConnectiveOp.ADD: 2,
    ConnectiveOp.SUB: 2,
    ConnectiveOp.SCALE: 1,
    ConnectiveOp.MAX: 2,
    ConnectiveOp.MIN: 2,
    ConnectiveOp.MONUS: 2,
    ConnectiveOp.DIST: 2,
    ConnectiveOp.CONST: 0,
    ConnectiveOp.PROJ: 1,
}


@dataclass(frozen=True)
class Connective:
    op: ConnectiveOp
    param: float | None = None

    @property
    def arity(self) -> int:
        return _ARITY[self.op]

    @classmethod
    def const(cls, value: float) -> Connective:
        return cls(ConnectiveOp.CONST, float(value))

    @classmethod
    def scale(cls, factor: float) -> Connective:
        return cls(ConnectiveOp.SCALE, float(factor))

    @classmethod
    def proj(cls, index: int) -> Connective:
        return cls(ConnectiveOp.PROJ, float(index))


@dataclass(frozen=True)
class CompactEnvelope:
    """Outer approximation of a formula's range.

    Reals and sup-vectors carry boxes (one interval per coordinate); finite metric
    envelopes carry a set of admissible point indices.
    """

    kind: ValueKind
    boxes: tuple[Box, ...] = ()
    indices: frozenset[int] = frozenset()
    space: ValueSpace | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind is ValueKind.FINITE_METRIC:
            if not self.indices:
                raise EnvelopeError("finite envelope must be nonempty")
            if self.space is None:
                raise EnvelopeError("finite envelope requires its metric space")
            return
        if not self.boxes:
            raise EnvelopeError("envelope must contain at least one box")
        dims = {len(box) for box in self.boxes}
        if len(dims) != 1:
            raise EnvelopeError("envelope boxes have mixed dimensions")
        for box in self.boxes:
            for lo, hi in box:
                if lo > hi:
                    raise EnvelopeError(f"empty interval [{lo}, {hi}]")

    # -- constructors ---------------------------------------------------------

    @classmethod
    def interval(cls, lo: float, hi: float) -> CompactEnvelope:
        return cls.of_boxes(ValueKind.REAL, [((float(lo), float(hi)),)])

    @classmethod
    def intervals(cls, spans: Iterable[Interval]) -> CompactEnvelope:
        return cls.of_boxes(ValueKind.REAL, [((float(lo), float(hi)),) for lo, hi in spans])

    @classmethod
    def box(cls, spans: Sequence[Interval]) -> CompactEnvelope:
        return cls.of_boxes(ValueKind.SUP_VECTOR, [tuple((float(lo), float(hi)) for lo, hi in spans)])

    @classmethod
    def point(cls, value: ValuePoint, space: ValueSpace | None = None) -> CompactEnvelope:
        if value.kind is ValueKind.FINITE_METRIC:
            assert value.index is not None
            return cls.finite(space or _require_space(None), [value.index])
        return cls.of_boxes(value.kind, [tuple((c, c) for c in value.coords)])

    @classmethod
    def finite(cls, space: ValueSpace, indices: Iterable[int]) -> CompactEnvelope:
        chosen = frozenset(int(i) for i in indices)
        bad = [i for i in chosen if not 0 <= i < space.size]
        if bad:
            raise EnvelopeError(f"finite envelope indices out of range: {sorted(bad)}")
        return cls(kind=ValueKind.FINITE_METRIC, indices=chosen, space=space)

    @classmethod
    def of_boxes(cls, kind: ValueKind, boxes: Iterable[Box]) -> CompactEnvelope:
        return cls(kind=kind, boxes=_normalize(kind, list(boxes)))

    # -- queries --------------------------------------------------------------

    @property
    def dim(self) -> int:
        return 1 if self.kind is ValueKind.FINITE_METRIC else len(self.boxes[0])

    def hull(self) -> Box:
        return tuple(
            (min(box[i][0] for box in self.boxes), max(box[i][1] for box in self.boxes))
            for i in range(self.dim)
        )

    def contains(self, value: ValuePoint, tol: float = 1e-9) -> bool:
        if value.kind is not self.kind:
            return False
        if self.kind is ValueKind.FINITE_METRIC:
            return value.index in self.indices
        if len(value.coords) != self.dim:
            return False
        return any(
            all(lo - tol <= c <= hi + tol for c, (lo, hi) in zip(value.coords, box))
            for box in self.boxes
        )

    def contains_envelope(self, other: CompactEnvelope, tol: float = 1e-9) -> bool:
        if other.kind is not self.kind:
            return False
        if self.kind is ValueKind.FINITE_METRIC:
            return other.indices <= self.indices
        # each box of `other` must sit inside a single box of `self`
        return all(
            any(
                all(lo - tol <= olo and ohi <= hi + tol for (olo, ohi), (lo, hi) in zip(obox, box))
                for box in self.boxes
            )
            for obox in other.boxes
        )

    def is_nonnegative_real(self) -> bool:
        return self.kind is ValueKind.REAL and self.hull()[0][0] >= 0.0

    def diameter(self) -> float:
        """Exact sup-metric diameter of the union."""
        if self.kind is ValueKind.FINITE_METRIC:
            space = _require_space(self.space)
            idx = sorted(self.indices)
            return float(space.matrix[idx][:, idx].max())
        return max(hi - lo for lo, hi in self.hull())

    def union(self, other: CompactEnvelope) -> CompactEnvelope:
        if other.kind is not self.kind or other.dim != self.dim:
            raise EnvelopeError("cannot join envelopes of different kinds or dimensions")
        if self.kind is ValueKind.FINITE_METRIC:
            return CompactEnvelope.finite(_require_space(self.space), self.indices | other.indices)
        return CompactEnvelope.of_boxes(self.kind, list(self.boxes) + list(other.boxes))

    def to_spans(self) -> list[list[list[float]]]:
        if self.kind is ValueKind.FINITE_METRIC:
            return [[[float(i), float(i)]] for i in sorted(self.indices)]
        return [[[lo, hi] for lo, hi in box] for box in self.boxes]


def _require_space(space: ValueSpace | None) -> ValueSpace:
    if space is None:
        raise EnvelopeError("finite-metric envelope operations need the metric table")
    return space


def _normalize(kind: ValueKind, boxes: list[Box]) -> tuple[Box, ...]:
    if not boxes:
        raise EnvelopeError("envelope must contain at least one box")
    if kind is ValueKind.REAL and all(len(b) == 1 for b in boxes):
        spans = sorted(b[0] for b in boxes)
        merged: list[list[float]] = [list(spans[0])]
        for lo, hi in spans[1:]:
            if lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        result: list[Box] = [((lo, hi),) for lo, hi in merged]
    else:
        unique = sorted(set(boxes))
        result = [
            box
            for box in unique
            if not any(other != box and _box_inside(box, other) for other in unique)
        ]
    if len(result) > MAX_BOXES:
        logger.debug("envelope with %d boxes collapsed to its hull", len(result))
        dim = len(result[0])
        hull = tuple(
            (min(b[i][0] for b in result), max(b[i][1] for b in result)) for i in range(dim)
        )
        result = [hull]
    return tuple(result)


def _box_inside(inner: Box, outer: Box) -> bool:
    return all(olo <= ilo and ihi <= ohi for (ilo, ihi), (olo, ohi) in zip(inner, outer))


# ------------------------------------------------------------------------------
# Interval rules
# ------------------------------------------------------------------------------


def _binary_interval(op: ConnectiveOp, x: Interval, y: Interval) -> Interval:
    a, b = x
    c, d = y
    if op is ConnectiveOp.ADD:
        return a + c, b + d
    if op is ConnectiveOp.SUB:
        return a - d, b - c
    if op is ConnectiveOp.MAX:
        return max(a, c), max(b, d)
    if op is ConnectiveOp.MIN:
        return min(a, c), min(b, d)
    if op is ConnectiveOp.MONUS:
        return max(a - d, 0.0), max(b - c, 0.0)
    if op is ConnectiveOp.DIST:
        return max(0.0, a - d, c - b), max(b - c, d - a)
    raise EnvelopeError(f"{op.value} is not a binary coordinatewise connective")


def _propagate_boxes(connective: Connective, x: Box, y: Box | None) -> tuple[ValueKind | None, Box]:
    op = connective.op
    if op is ConnectiveOp.SCALE:
        r = float(connective.param or 0.0)
        return None, tuple((r * lo, r * hi) if r >= 0 else (r * hi, r * lo) for lo, hi in x)
    if op is ConnectiveOp.PROJ:
        i = int(connective.param or 0)
        if not 0 <= i < len(x):
            raise EnvelopeError(f"projection index {i} out of range for dimension {len(x)}")
        return ValueKind.REAL, (x[i],)
    assert y is not None
    if len(x) != len(y):
        raise EnvelopeError(f"{op.value}: operand dimensions differ ({len(x)} vs {len(y)})")
    spans = tuple(_binary_interval(op, xi, yi) for xi, yi in zip(x, y))
    if op is ConnectiveOp.DIST:
        return ValueKind.REAL, ((max(lo for lo, _ in spans), max(hi for _, hi in spans)),)
    return None, spans


def envelope_propagate(
    connective: Connective, inputs: Sequence[CompactEnvelope]
) -> CompactEnvelope:
    """Image envelope of a builtin connective; exact on each input box product."""
    if len(inputs) != connective.arity:
        raise EnvelopeError(
            f"{connective.op.value} expects {connective.arity} argument(s), got {len(inputs)}"
        )
    op = connective.op
    if op is ConnectiveOp.CONST:
        value = float(connective.param or 0.0)
        return CompactEnvelope.interval(value, value)

    kinds = {env.kind for env in inputs}
    if ValueKind.FINITE_METRIC in kinds:
        return _propagate_finite(connective, inputs)
    if len(kinds) != 1:
        raise EnvelopeError(f"{op.value}: operands mix real and vector values")

    kind = inputs[0].kind
    boxes: list[Box] = []
    out_kind = kind
    if connective.arity == 1:
        for box in inputs[0].boxes:
            new_kind, out = _propagate_boxes(connective, box, None)
            out_kind = new_kind or kind
            boxes.append(out)
    else:
        for x, y in itertools.product(inputs[0].boxes, inputs[1].boxes):
            new_kind, out = _propagate_boxes(connective, x, y)
            out_kind = new_kind or kind
            boxes.append(out)
    return CompactEnvelope.of_boxes(out_kind, boxes)


def _propagate_finite(
    connective: Connective, inputs: Sequence[CompactEnvelope]
) -> CompactEnvelope:
    if connective.op is not ConnectiveOp.DIST or any(
        env.kind is not ValueKind.FINITE_METRIC for env in inputs
    ):
        raise EnvelopeError(
            f"{connective.op.value} is not defined on finite-metric values (only dist is)"
        )
    space = _require_space(inputs[0].space)
    values = {
        space.table[i][j] for i in inputs[0].indices for j in inputs[1].indices
    }
    return CompactEnvelope.intervals((v, v) for v in values)


# ------------------------------------------------------------------------------
# Pointwise application
# ------------------------------------------------------------------------------


def _binary_scalar(op: ConnectiveOp, x: float, y: float) -> float:
    if op is ConnectiveOp.ADD:
        return x + y
    if op is ConnectiveOp.SUB:
        return x - y
    if op is ConnectiveOp.MAX:
        return max(x, y)
    if op is ConnectiveOp.MIN:
        return min(x, y)
    if op is ConnectiveOp.MONUS:
        return max(x - y, 0.0)
    raise EnvelopeError(f"{op.value} is not a coordinatewise connective")


def apply_connective(
    connective: Connective, args: Sequence[ValuePoint], space: ValueSpace | None = None
) -> ValuePoint:
    """Evaluate a connective on concrete values; ``space`` is needed for finite-metric dist."""
    if len(args) != connective.arity:
        raise EnvelopeError(
            f"{connective.op.value} expects {connective.arity} argument(s), got {len(args)}"
        )
    op = connective.op
    if op is ConnectiveOp.CONST:
        return ValuePoint.real(float(connective.param or 0.0))
    if op is ConnectiveOp.SCALE:
        r = float(connective.param or 0.0)
        (x,) = args
        if x.kind is ValueKind.FINITE_METRIC:
            raise EnvelopeError("scale is not defined on finite-metric values")
        return ValuePoint(kind=x.kind, coords=tuple(r * c for c in x.coords))
    if op is ConnectiveOp.PROJ:
        (x,) = args
        i = int(connective.param or 0)
        if x.kind is ValueKind.FINITE_METRIC or not 0 <= i < len(x.coords):
            raise EnvelopeError(f"projection index {i} not available")
        return ValuePoint.real(x.coords[i])

    x, y = args
    if x.kind is not y.kind:
        raise EnvelopeError(f"{op.value}: operands mix {x.kind.value} and {y.kind.value}")
    if op is ConnectiveOp.DIST:
        if x.kind is ValueKind.FINITE_METRIC:
            return ValuePoint.real(metric_distance(_require_space(space), x, y))
        return ValuePoint.real(max(abs(a - b) for a, b in zip(x.coords, y.coords)))
    if x.kind is ValueKind.FINITE_METRIC:
        raise EnvelopeError(f"{op.value} is not defined on finite-metric values")
    if len(x.coords) != len(y.coords):
        raise EnvelopeError(f"{op.value}: operand dimensions differ")
    return ValuePoint(
        kind=x.kind, coords=tuple(_binary_scalar(op, a, b) for a, b in zip(x.coords, y.coords))
    )
