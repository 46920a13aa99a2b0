# epslens/typespace.py
"""Row-space geometry over two-layer fixtures: fs levels, extension and symmetry audits, covers."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import NDArray

from epslens.contracts import (
    CoverCertificate,
    CoverMethod,
    EpslensError,
    FixtureDocument,
    MeasurementCertificate,
    ShapeMismatchError,
    SizeGuardExceeded,
)
from epslens.definability import Definition, column_data, output_distance
from epslens.settings import get_settings
from epslens.stability import WeightedBipartiteStructure

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TwoLayerFixture:
    """An N-table with marked M-rows and M-columns; M is the marked restriction."""

    table: WeightedBipartiteStructure
    m_rows: tuple[int, ...]
    m_cols: tuple[int, ...]

    def __post_init__(self) -> None:
        n, m = self.table.shape
        if not self.m_rows or not self.m_cols:
            raise ShapeMismatchError("fixture needs at least one marked row and column")
        if len(set(self.m_rows)) != len(self.m_rows) or len(set(self.m_cols)) != len(self.m_cols):
            raise ShapeMismatchError("marked rows and columns must be distinct")
        if any(not 0 <= a < n for a in self.m_rows) or any(not 0 <= b < m for b in self.m_cols):
            raise ShapeMismatchError("marked index out of range")

    @classmethod
    def from_labels(
        cls, table: WeightedBipartiteStructure, m_rows: Sequence[str], m_cols: Sequence[str]
    ) -> TwoLayerFixture:
        return cls(
            table=table,
            m_rows=tuple(table.row_index(label) for label in m_rows),
            m_cols=tuple(table.col_index(label) for label in m_cols),
        )

    def to_document(self, table_ref: str) -> FixtureDocument:
        return FixtureDocument(
            table=table_ref,
            m_rows=[self.table.rows[a] for a in self.m_rows],
            m_cols=[self.table.cols[b] for b in self.m_cols],
        )

    @property
    def m_structure(self) -> WeightedBipartiteStructure:
        t = self.table
        data = t.data[np.ix_(self.m_rows, self.m_cols)]
        return WeightedBipartiteStructure(
            rows=tuple(t.rows[a] for a in self.m_rows),
            cols=tuple(t.cols[b] for b in self.m_cols),
            space=t.space,
            data=data.copy(),
        )

    def is_m_row(self, row: int) -> bool:
        return row in self.m_rows

    def is_m_col(self, col: int) -> bool:
        return col in self.m_cols


def random_fixture(
    m_rows: int = 6,
    m_cols: int = 6,
    *,
    extra_rows: int = 2,
    extra_cols: int = 2,
    seed: int = 0,
    steps: int = 10,
) -> TwoLayerFixture:
    """Random grid-valued N-table whose first rows and columns form M."""
    rng = np.random.default_rng(seed)
    data = rng.integers(0, steps + 1, size=(m_rows + extra_rows, m_cols + extra_cols)) / steps
    table = WeightedBipartiteStructure.from_array(data)
    return TwoLayerFixture(table=table, m_rows=tuple(range(m_rows)), m_cols=tuple(range(m_cols)))


def _row_to_m_distances(fx: TwoLayerFixture, c: int) -> NDArray[np.float64]:
    t = fx.table
    dist = t.row_distances
    return dist[list(fx.m_rows), c]


def fs_level(fx: TwoLayerFixture, c: int) -> float:
    """min over M-rows a of max over N-columns b of d(f(a, b), f(c, b))."""
    n = fx.table.shape[0]
    if not 0 <= c < n:
        raise EpslensError(f"row index {c} out of range 0..{n - 1}")
    return float(_row_to_m_distances(fx, c).min())


# ------------------------------------------------------------------------------
# Audits
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtensionReport:
    row: str
    m_error: float
    n_error: float
    bound: float
    bound_holds: bool
    fs_level: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "row": self.row,
            "m_error": self.m_error,
            "n_error": self.n_error,
            "bound": self.bound,
            "bound_holds": self.bound_holds,
            "fs_level": self.fs_level,
        }


def _definition_errors(fx: TwoLayerFixture, definition: Definition, row: int) -> NDArray[np.float64]:
    t = fx.table
    errors = np.empty(t.shape[1])
    for b in range(t.shape[1]):
        approx = definition.evaluate(column_data(t, definition, b))
        errors[b] = output_distance(definition, approx, t.value(row, b))
    return errors


def extension_audit(
    fx: TwoLayerFixture,
    definition: Definition,
    q: int,
    delta: float,
    epsilon: float,
    *,
    tolerance: float | None = None,
) -> ExtensionReport:
    """Measure how well a definition built over M tracks row q on M- and N-columns.

    The delta + epsilon bound is reported, not asserted.
    """
    tol = get_settings().tolerance if tolerance is None else tolerance
    missing = [label for label in definition.row_labels if label not in fx.table.rows]
    if missing:
        raise EpslensError(f"definition rows missing from the fixture: {missing}")
    errors = _definition_errors(fx, definition, q)
    m_error = float(errors[list(fx.m_cols)].max())
    n_error = float(errors.max())
    bound = delta + epsilon
    report = ExtensionReport(
        row=fx.table.rows[q],
        m_error=m_error,
        n_error=n_error,
        bound=bound,
        bound_holds=n_error <= bound + tol,
        fs_level=fs_level(fx, q),
    )
    if not report.bound_holds:
        logger.info("extension error %.6g exceeds %.6g for row %s", n_error, bound, report.row)
    return report


@dataclass(frozen=True)
class SymmetryReport:
    p_row: str
    q_col: str
    psi_p_at_q: list[float]
    psi_q_at_p: list[float]
    distance: float
    delta_p: float
    delta_q: float
    epsilon: float
    realized_in_m: bool
    bound: float
    bound_holds: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "p_row": self.p_row,
            "q_col": self.q_col,
            "psi_p_at_q": self.psi_p_at_q,
            "psi_q_at_p": self.psi_q_at_p,
            "distance": self.distance,
            "delta_p": self.delta_p,
            "delta_q": self.delta_q,
            "epsilon": self.epsilon,
            "realized_in_m": self.realized_in_m,
            "bound": self.bound,
            "bound_holds": self.bound_holds,
        }


def symmetry_audit(
    fx: TwoLayerFixture,
    p_row: int,
    psi_p: Definition,
    delta_p: float,
    q_col: int,
    psi_q: Definition,
    delta_q: float,
    epsilon: float,
    *,
    tolerance: float | None = None,
) -> SymmetryReport:
    """Compare psi_p at q's column with psi_q at p's row.

    ``psi_p`` is defined from rows of the table, ``psi_q`` from rows of its transpose.
    With both types realized in M the bound delta_p + delta_q is asserted; otherwise
    delta_p + delta_q + epsilon is reported.
    """
    tol = get_settings().tolerance if tolerance is None else tolerance
    t = fx.table
    n, m = t.shape
    if not 0 <= p_row < n:
        raise EpslensError(f"type p is not realized: row {p_row} out of range")
    if not 0 <= q_col < m:
        raise EpslensError(f"type q is not realized: column {q_col} out of range")
    at_q = psi_p.evaluate(column_data(t, psi_p, q_col))
    at_p = psi_q.evaluate(column_data(t.transpose(), psi_q, p_row))
    a = np.asarray(at_q.coords, dtype=np.float64)
    b = np.asarray(at_p.coords, dtype=np.float64)
    if a.shape != b.shape:
        raise EpslensError("definitions produce values of different dimensions")
    distance = float(np.abs(a - b).max()) if a.size else 0.0
    realized = fx.is_m_row(p_row) and fx.is_m_col(q_col)
    bound = delta_p + delta_q if realized else delta_p + delta_q + epsilon
    holds = distance <= bound + tol
    if realized and not holds:
        raise EpslensError(
            f"symmetry bound failed for M-realized types: {distance} > {delta_p} + {delta_q}"
        )
    return SymmetryReport(
        p_row=t.rows[p_row],
        q_col=t.cols[q_col],
        psi_p_at_q=a.tolist(),
        psi_q_at_p=b.tolist(),
        distance=distance,
        delta_p=delta_p,
        delta_q=delta_q,
        epsilon=epsilon,
        realized_in_m=realized,
        bound=bound,
        bound_holds=holds,
    )


def measurement_certificate(
    name: str, fx: TwoLayerFixture, inputs: dict[str, Any], claimed: dict[str, Any]
) -> MeasurementCertificate:
    t = fx.table
    payload = {
        "rows": list(t.rows),
        "cols": list(t.cols),
        "values": [[t.encoded(a, b) for b in range(t.shape[1])] for a in range(t.shape[0])],
        "m_rows": [t.rows[a] for a in fx.m_rows],
        "m_cols": [t.cols[b] for b in fx.m_cols],
        **inputs,
    }
    return MeasurementCertificate(
        name=name,  # type: ignore[arg-type]
        space=t.space.to_document(),
        inputs=payload,
        claimed=claimed,
    )


# ------------------------------------------------------------------------------
# Covers
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class Cover:
    parts: tuple[tuple[int, ...], ...]
    epsilon: float
    method: CoverMethod
    diameters: tuple[float, ...]

    @property
    def size(self) -> int:
        return len(self.parts)

    def labels(self, f: WeightedBipartiteStructure) -> list[list[str]]:
        return [[f.rows[a] for a in part] for part in self.parts]

    def to_certificate(self, f: WeightedBipartiteStructure) -> CoverCertificate:
        return CoverCertificate(
            space=f.space.to_document(),
            row_labels=list(f.rows),
            row_values=[[f.encoded(a, b) for b in range(f.shape[1])] for a in range(f.shape[0])],
            parts=self.labels(f),
            epsilon=self.epsilon,
        )


def verify_cover(dist: NDArray[np.float64], parts: Sequence[Sequence[int]], epsilon: float, *, tolerance: float = 1e-9) -> bool:
    covered = sorted(a for part in parts for a in part)
    if covered != list(range(dist.shape[0])):
        return False
    return all(_diameter(dist, part) <= 2 * epsilon + tolerance for part in parts)


def _diameter(dist: NDArray[np.float64], part: Sequence[int]) -> float:
    idx = list(part)
    return float(dist[np.ix_(idx, idx)].max()) if idx else 0.0


def _distinct_rows(dist: NDArray[np.float64]) -> list[list[int]]:
    """Groups of rows at distance zero from each other, in first-occurrence order."""
    groups: list[list[int]] = []
    for a in range(dist.shape[0]):
        for group in groups:
            if dist[group[0], a] == 0:
                group.append(a)
                break
        else:
            groups.append([a])
    return groups


def _exact_partition(dist: NDArray[np.float64], limit: float) -> list[list[int]]:
    """Minimum partition of the points into sets of diameter <= limit, by subset DP."""
    count = dist.shape[0]
    full = (1 << count) - 1
    close = dist <= limit
    fits = [False] * (full + 1)
    fits[0] = True
    for mask in range(1, full + 1):
        low = (mask & -mask).bit_length() - 1
        rest = mask & (mask - 1)
        if not fits[rest]:
            continue
        ok = True
        r = rest
        while r:
            v = (r & -r).bit_length() - 1
            r &= r - 1
            if not close[low, v]:
                ok = False
                break
        fits[mask] = ok
    best = [count + 1] * (full + 1)
    choice = [0] * (full + 1)
    best[0] = 0
    for mask in range(1, full + 1):
        low = mask & -mask
        rest = mask ^ low
        # parts always contain the lowest remaining point
        sub = rest
        while True:
            part = sub | low
            if fits[part] and best[mask ^ part] + 1 < best[mask]:
                best[mask] = best[mask ^ part] + 1
                choice[mask] = part
            if sub == 0:
                break
            sub = (sub - 1) & rest
    parts: list[list[int]] = []
    mask = full
    while mask:
        part = choice[mask]
        parts.append([v for v in range(count) if part >> v & 1])
        mask ^= part
    return parts


def _greedy_balls(dist: NDArray[np.float64], radius: float) -> list[list[int]]:
    remaining = list(range(dist.shape[0]))
    parts: list[list[int]] = []
    while remaining:
        centre = remaining[0]
        part = [a for a in remaining if dist[centre, a] <= radius]
        parts.append(part)
        remaining = [a for a in remaining if a not in part]
    return parts


def cover_rows(
    f: WeightedBipartiteStructure,
    epsilon: float,
    method: CoverMethod = CoverMethod.EXACT,
    *,
    max_rows: int | None = None,
) -> Cover:
    """Partition the rows into parts of sup-metric diameter at most 2 * epsilon."""
    if not epsilon > 0:
        raise EpslensError(f"epsilon must be > 0, got {epsilon}")
    dist = f.row_distances
    groups = _distinct_rows(dist)
    reps = [g[0] for g in groups]
    rep_dist = dist[np.ix_(reps, reps)]
    if method is CoverMethod.EXACT:
        cap = get_settings().exact_cover_max_rows if max_rows is None else max_rows
        if len(reps) > cap:
            raise SizeGuardExceeded(
                f"{len(reps)} distinct rows exceed the exact cover limit of {cap}; use greedy"
            )
        rep_parts = _exact_partition(rep_dist, 2 * epsilon)
    else:
        rep_parts = _greedy_balls(rep_dist, epsilon)
    parts = tuple(
        tuple(sorted(a for i in part for a in groups[i])) for part in rep_parts
    )
    parts = tuple(sorted(parts))
    diameters = tuple(_diameter(dist, part) for part in parts)
    if not verify_cover(dist, parts, epsilon):
        raise EpslensError("internal error: cover failed re-verification")
    logger.debug("%s cover of %d rows: %d parts at epsilon=%s", method.value, f.shape[0], len(parts), epsilon)
    return Cover(parts=parts, epsilon=epsilon, method=method, diameters=diameters)


__all__ = [
    "Cover",
    "ExtensionReport",
    "SymmetryReport",
    "TwoLayerFixture",
    "cover_rows",
    "extension_audit",
    "fs_level",
    "measurement_certificate",
    "random_fixture",
    "symmetry_audit",
    "verify_cover",
]
