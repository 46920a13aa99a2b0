# epslens/topometric.py
"""Finite topometric spaces and epsilon Cantor-Bendixson analysis.

Subsets are bitmasks over the point list. The closed family is the lattice generated
by the supplied closed sets together with the empty set and the whole space.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import NDArray

from epslens.contracts import CBCertificate, EpslensError, SizeGuardExceeded, TopometricDocument
from epslens.settings import get_settings
from epslens.stability import WeightedBipartiteStructure
from epslens.value_space import validate_metric_table, value_distance_array

logger = logging.getLogger(__name__)


def _members(mask: int, count: int) -> list[int]:
    return [i for i in range(count) if mask >> i & 1]


def lattice_closure(generators: Iterable[int], full: int, *, cap: int) -> frozenset[int]:
    """Close under finite intersections, then finite unions; distributivity keeps both."""
    meets = {full}
    for g in set(generators):
        meets |= {m & g for m in meets}
        if len(meets) > cap:
            raise SizeGuardExceeded(f"closed family exceeds the cap of {cap} sets")
    family = {0}
    for g in sorted(meets):
        family |= {s | g for s in family}
        if len(family) > cap:
            raise SizeGuardExceeded(f"closed family exceeds the cap of {cap} sets")
    return frozenset(family)


@dataclass(frozen=True, eq=False)
class TopometricSpace:
    points: tuple[str, ...]
    metric: NDArray[np.float64]
    generators: tuple[int, ...]
    closed: frozenset[int]

    @property
    def full(self) -> int:
        return (1 << len(self.points)) - 1

    @classmethod
    def build(
        cls,
        points: Sequence[str],
        metric: Sequence[Sequence[float]] | NDArray[np.float64],
        closed_generators: Sequence[int],
        *,
        force_discrete: bool = False,
        cap: int | None = None,
    ) -> TopometricSpace:
        matrix = validate_metric_table(metric)
        if matrix.shape[0] != len(points):
            raise EpslensError(f"{len(points)} points but a {matrix.shape[0]}-point metric")
        if len(set(points)) != len(points):
            raise EpslensError("point labels must be unique")
        full = (1 << len(points)) - 1
        generators = list(closed_generators)
        if not generators:
            if not force_discrete:
                logger.warning("no closed generators given; refusing the discrete default")
                raise EpslensError(
                    "no closed generators: the discrete topology makes the analysis trivial; "
                    "pass closed generators or force it"
                )
            generators = [1 << i for i in range(len(points))]
        if any(g & ~full for g in generators):
            raise EpslensError("closed generator mentions a point outside the space")
        closed = lattice_closure(generators, full, cap=cap or get_settings().closed_family_cap)
        logger.debug("topometric space: %d points, %d closed sets", len(points), len(closed))
        return cls(points=tuple(points), metric=matrix, generators=tuple(generators), closed=closed)

    @classmethod
    def from_document(cls, doc: TopometricDocument, *, force: bool = False) -> TopometricSpace:
        index = {label: i for i, label in enumerate(doc.points)}
        generators = []
        for labels in doc.closed_generators:
            mask = 0
            for label in labels:
                if label not in index:
                    raise EpslensError(f"closed generator names unknown point {label!r}")
                mask |= 1 << index[label]
            generators.append(mask)
        return cls.build(doc.points, doc.metric, generators, force_discrete=doc.force_discrete or force)

    def to_document(self) -> TopometricDocument:
        return TopometricDocument(
            points=list(self.points),
            metric=self.metric.tolist(),
            closed_generators=[self.labels(g) for g in self.generators],
        )

    @classmethod
    def from_rows(
        cls,
        f: WeightedBipartiteStructure,
        closed_generators: Callable[[WeightedBipartiteStructure, Sequence[int]], Sequence[int]] | None = None,
        *,
        radius: float | None = None,
        force_discrete: bool = False,
    ) -> TopometricSpace:
        """Row space of f with the sup metric; rows at distance zero are merged."""
        dist = f.row_distances
        reps: list[int] = []
        names: list[str] = []
        for a in range(f.shape[0]):
            for k, r in enumerate(reps):
                if dist[r, a] == 0:
                    names[k] += "=" + f.rows[a]
                    break
            else:
                reps.append(a)
                names.append(f.rows[a])
        if closed_generators is not None:
            generators = list(closed_generators(f, reps))
        elif radius is not None:
            generators = basic_open_generators(f, radius, reps)
        else:
            generators = []
        return cls.build(names, dist[np.ix_(reps, reps)], generators, force_discrete=force_discrete)

    def labels(self, mask: int) -> list[str]:
        return [self.points[i] for i in _members(mask, len(self.points))]

    def diameter(self, mask: int) -> float:
        idx = _members(mask, len(self.points))
        if len(idx) < 2:
            return 0.0
        return float(self.metric[np.ix_(idx, idx)].max())

    def is_closed(self, mask: int) -> bool:
        return mask in self.closed

    def open_sets(self) -> list[int]:
        return sorted(self.full ^ c for c in self.closed)


def basic_open_generators(
    f: WeightedBipartiteStructure, radius: float, rows: Sequence[int] | None = None
) -> list[int]:
    """Closed complements of the sets {a : d(f(a, b), r) < radius} over columns b and realized r."""
    if not radius > 0:
        raise EpslensError(f"radius must be > 0, got {radius}")
    rows = list(range(f.shape[0])) if rows is None else list(rows)
    full = (1 << len(rows)) - 1
    data = f.data[rows]
    generators: set[int] = set()
    for b in range(f.shape[1]):
        column = data[:, b]
        near = value_distance_array(f.space, column[:, None, ...], column[None, :, ...]) < radius
        for centre in range(len(rows)):
            mask = sum(1 << i for i in np.flatnonzero(near[centre]).tolist())
            generators.add(full ^ mask)
    return sorted(generators)


# ------------------------------------------------------------------------------
# Cantor-Bendixson
# ------------------------------------------------------------------------------


def derivative_open(space: TopometricSpace, current: int, epsilon: float) -> int:
    """current minus the union of relatively open subsets of diameter <= epsilon."""
    removed = 0
    for u in space.open_sets():
        piece = u & current
        if piece and space.diameter(piece) <= epsilon:
            removed |= piece
    return current & ~removed


def derivative_closed(space: TopometricSpace, current: int, epsilon: float) -> int:
    """Intersection of relatively closed F with diam(current minus F) <= epsilon."""
    result = current
    for c in space.closed:
        f = c & current
        if space.diameter(current & ~f) <= epsilon:
            result &= f
    return result


Derivative = Callable[[TopometricSpace, int, float], int]


@dataclass(frozen=True)
class CBReport:
    epsilon: float
    levels: tuple[int, ...]
    ranks: tuple[int | None, ...]
    kernel: int

    @property
    def analyzable(self) -> bool:
        return self.kernel == 0

    @property
    def max_rank(self) -> int | None:
        finite = [r for r in self.ranks if r is not None]
        return max(finite) if finite else None

    def to_dict(self, space: TopometricSpace) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "levels": [space.labels(level) for level in self.levels],
            "ranks": dict(zip(space.points, self.ranks)),
            "kernel": space.labels(self.kernel),
            "analyzable": self.analyzable,
        }

    def to_certificate(self, space: TopometricSpace) -> CBCertificate:
        return CBCertificate(
            points=list(space.points),
            metric=space.metric.tolist(),
            closed_generators=[space.labels(g) for g in space.generators],
            epsilon=self.epsilon,
            levels=[space.labels(level) for level in self.levels],
            ranks=dict(zip(space.points, self.ranks)),
            analyzable=self.analyzable,
        )


def cb_analyze(
    space: TopometricSpace, epsilon: float, *, derivative: Derivative = derivative_open
) -> CBReport:
    if epsilon < 0:
        raise EpslensError(f"epsilon must be >= 0, got {epsilon}")
    count = len(space.points)
    ranks: list[int | None] = [None] * count
    levels = [space.full]
    current = space.full
    for stage in range(count + 1):
        nxt = derivative(space, current, epsilon)
        if nxt == current:
            break
        for i in _members(current & ~nxt, count):
            ranks[i] = stage
        levels.append(nxt)
        current = nxt
    else:
        raise EpslensError("internal error: derivative sequence did not stabilise")
    logger.debug("cb at epsilon=%s: %d levels, kernel of %d points", epsilon, len(levels), bin(current).count("1"))
    return CBReport(epsilon=epsilon, levels=tuple(levels), ranks=tuple(ranks), kernel=current)


def row_space_cb(f: WeightedBipartiteStructure, epsilon: float, radius: float) -> tuple[TopometricSpace, CBReport]:
    space = TopometricSpace.from_rows(f, radius=radius)
    return space, cb_analyze(space, epsilon)


__all__ = [
    "CBReport",
    "TopometricSpace",
    "basic_open_generators",
    "cb_analyze",
    "derivative_closed",
    "derivative_open",
    "lattice_closure",
    "row_space_cb",
]
