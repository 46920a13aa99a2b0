# epslens/gluing.py
"""Lipschitz gluing: a real function of the anchor coordinates reproducing f up to epsilon."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from epslens.contracts import (
    DimensionMismatchError,
    EpslensError,
    GlueCoordinateDocument,
    HypothesisViolationError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GluedFunction:
    """h(t) = offset + max_q (v(q) - offset) * max(0, 1 - |t - q|_inf / delta)."""

    anchors: NDArray[np.float64]
    anchor_values: NDArray[np.float64]
    # index of the first input point realizing each anchor
    anchor_sources: tuple[int, ...]
    offset: float
    lower: float
    upper: float
    delta: float
    lipschitz_bound: float
    sup_error: float
    epsilon: float

    @property
    def dim(self) -> int:
        return int(self.anchors.shape[1])

    def __call__(self, t: Sequence[float] | NDArray[np.float64]) -> float:
        return float(self.evaluate_many(np.asarray(t, dtype=np.float64).reshape(1, -1))[0])

    def evaluate_many(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"glued function takes {self.dim} coordinate(s), got shape {points.shape}"
            )
        return glue_evaluate(self.anchors, self.anchor_values, self.offset, self.delta, points)

    def to_document(self) -> GlueCoordinateDocument:
        return GlueCoordinateDocument(
            anchors=self.anchors.tolist(),
            anchor_values=self.anchor_values.tolist(),
            offset=self.offset,
            lower=self.lower,
            upper=self.upper,
            lipschitz_bound=self.lipschitz_bound,
        )


def glue_evaluate(
    anchors: NDArray[np.float64],
    values: NDArray[np.float64],
    offset: float,
    delta: float,
    points: NDArray[np.float64],
) -> NDArray[np.float64]:
    if anchors.shape[0] == 0:
        return np.full(points.shape[0], offset)
    if anchors.shape[1] == 0:
        dist = np.zeros((points.shape[0], anchors.shape[0]))
    else:
        dist = np.abs(points[:, None, :] - anchors[None, :, :]).max(axis=2)
    bumps = np.clip(1.0 - dist / delta, 0.0, None)
    return offset + (bumps * (values - offset)[None, :]).max(axis=1)


def hypothesis_violation(
    g: NDArray[np.float64], f: NDArray[np.float64], delta: float, epsilon: float
) -> tuple[int, int] | None:
    """First pair (x, y) with |g(x) - g(y)|_inf < delta but |f(x) - f(y)| >= epsilon."""
    if g.shape[1] == 0:
        close = np.ones((g.shape[0], g.shape[0]), dtype=bool)
    else:
        close = np.abs(g[:, None, :] - g[None, :, :]).max(axis=2) < delta
    apart = np.abs(f[:, None] - f[None, :]) >= epsilon
    bad = np.argwhere(np.triu(close & apart, k=1))
    if bad.size == 0:
        return None
    return int(bad[0][0]), int(bad[0][1])


def lipschitz_glue(
    g_values: Sequence[Sequence[float]] | NDArray[np.float64],
    f_values: Sequence[float] | NDArray[np.float64],
    delta: float,
    epsilon: float,
    *,
    tolerance: float = 1e-9,
) -> GluedFunction:
    """Glue h with sup |f - h(g)| <= epsilon and Lipschitz constant D / delta.

    Requires |g(x) - g(y)|_inf < delta  =>  |f(x) - f(y)| < epsilon on the inputs.
    Anchors are the distinct g-values in first-occurrence order; each anchor takes the
    f-value of its first point.
    """
    if not delta > 0:
        raise EpslensError(f"delta must be > 0, got {delta}")
    if not epsilon > 0:
        raise EpslensError(f"epsilon must be > 0, got {epsilon}")
    g = np.asarray(g_values, dtype=np.float64)
    f = np.asarray(f_values, dtype=np.float64)
    if g.ndim == 1:
        g = g.reshape(-1, 1)
    if g.shape[0] != f.shape[0] or f.ndim != 1:
        raise DimensionMismatchError(f"{g.shape[0]} g-values but {f.shape[0]} f-values")
    if f.shape[0] == 0:
        raise EpslensError("cannot glue over an empty point set")

    violation = hypothesis_violation(g, f, delta, epsilon)
    if violation is not None:
        raise HypothesisViolationError("gluing hypothesis fails", pair=violation)

    if g.shape[1] == 0:
        sources: tuple[int, ...] = (0,)
    else:
        _, first = np.unique(g, axis=0, return_index=True)
        sources = tuple(sorted(int(i) for i in first))
    anchors = g[list(sources)]
    values = f[list(sources)]
    lower, upper = float(f.min()), float(f.max())
    diameter = upper - lower
    h = glue_evaluate(anchors, values, lower, delta, g)
    sup_error = float(np.abs(h - f).max())
    glued = GluedFunction(
        anchors=anchors,
        anchor_values=values,
        anchor_sources=sources,
        offset=lower,
        lower=lower,
        upper=upper,
        delta=delta,
        lipschitz_bound=diameter / delta,
        sup_error=sup_error,
        epsilon=epsilon,
    )
    problems = glue_postconditions(glued, g, f, tolerance=tolerance)
    if problems:
        raise EpslensError("glued function failed its postconditions: " + "; ".join(problems))
    logger.debug("glued %d points onto %d anchors, error %.3g", f.shape[0], len(sources), sup_error)
    return glued


def glue_postconditions(
    h: GluedFunction,
    g: NDArray[np.float64],
    f: NDArray[np.float64],
    *,
    tolerance: float = 1e-9,
) -> list[str]:
    """Empty when error, Lipschitz bound on anchor pairs and range containment all hold."""
    problems = []
    error = float(np.abs(h.evaluate_many(g) - f).max())
    if error > h.epsilon + tolerance:
        problems.append(f"sup error {error} exceeds epsilon {h.epsilon}")
    at_anchors = h.evaluate_many(h.anchors)
    if h.anchors.shape[0] > 1 and h.dim > 0:
        gaps = np.abs(h.anchors[:, None, :] - h.anchors[None, :, :]).max(axis=2)
        rises = np.abs(at_anchors[:, None] - at_anchors[None, :])
        if np.any(rises > h.lipschitz_bound * gaps + tolerance):
            problems.append(f"Lipschitz bound {h.lipschitz_bound} fails on an anchor pair")
    if at_anchors.size and (at_anchors.min() < h.lower - tolerance or at_anchors.max() > h.upper + tolerance):
        problems.append("values leave the range of f")
    return problems


def lipschitz_ratio(h: GluedFunction, points: NDArray[np.float64]) -> float:
    """Largest |h(t) - h(t')| / |t - t'|_inf over distinct pairs of the given points."""
    values = h.evaluate_many(points)
    gaps = np.abs(points[:, None, :] - points[None, :, :]).max(axis=2) if h.dim else np.zeros((len(points), len(points)))
    rises = np.abs(values[:, None] - values[None, :])
    mask = gaps > 0
    return float((rises[mask] / gaps[mask]).max()) if mask.any() else 0.0
