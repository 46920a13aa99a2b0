# epslens/ramsey.py
"""Diagonal two-colour Ramsey numbers used by the subadditivity audit."""

from __future__ import annotations

import itertools
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from epslens.contracts import EpslensError, RamseyCertificate

logger = logging.getLogger(__name__)

# classical values not verified in-tool
_LOOKUP = {4: 18}


@dataclass(frozen=True)
class RamseyResult:
    s: int
    value: int
    verified: bool
    colorings_checked: int = 0
    lower_bound_vertices: int = 0
    lower_bound_red_edges: tuple[tuple[int, int], ...] = field(default_factory=tuple)
    note: str = ""

    def to_certificate(self) -> RamseyCertificate:
        return RamseyCertificate(
            s=self.s,
            value=self.value,
            verified=self.verified,
            colorings_checked=self.colorings_checked,
            lower_bound_vertices=self.lower_bound_vertices,
            lower_bound_red_edges=list(self.lower_bound_red_edges),
            note=self.note,
        )


def _edges(vertices: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(vertices), 2))


def every_coloring_has_monochromatic_triangle(vertices: int) -> tuple[bool, int]:
    """Exhaustively scan all 2-colourings of K_vertices; returns (all have one, count)."""
    edges = _edges(vertices)
    index = {e: i for i, e in enumerate(edges)}
    triangles = np.array(
        [
            (1 << index[(a, b)]) | (1 << index[(a, c)]) | (1 << index[(b, c)])
            for a, b, c in itertools.combinations(range(vertices), 3)
        ],
        dtype=np.int64,
    )
    colorings = np.arange(1 << len(edges), dtype=np.int64)
    hit = colorings[:, None] & triangles[None, :]
    mono = (hit == triangles[None, :]) | (hit == 0)
    return bool(mono.any(axis=1).all()), int(colorings.size)


def monochromatic_triangles(vertices: int, red_edges: Sequence[tuple[int, int]]) -> list[tuple[int, int, int]]:
    red = {tuple(sorted(e)) for e in red_edges}
    found = []
    for a, b, c in itertools.combinations(range(vertices), 3):
        colours = {(a, b) in red, (a, c) in red, (b, c) in red}
        if len(colours) == 1:
            found.append((a, b, c))
    return found


def pentagon_coloring() -> tuple[tuple[int, int], ...]:
    """Red pentagon on K_5; the complement is the blue pentagram."""
    edges: list[tuple[int, int]] = [(min(i, (i + 1) % 5), max(i, (i + 1) % 5)) for i in range(5)]
    return tuple(sorted(edges))


def verify_ramsey(s: int) -> RamseyResult:
    if s == 3:
        upper, checked = every_coloring_has_monochromatic_triangle(6)
        red = pentagon_coloring()
        lower = not monochromatic_triangles(5, red)
        logger.debug("R(3,3): %d colourings of K_6 scanned", checked)
        return RamseyResult(
            s=3,
            value=6,
            verified=upper and lower,
            colorings_checked=checked,
            lower_bound_vertices=5,
            lower_bound_red_edges=red,
            note="exhaustive over K_6; K_5 pentagon/pentagram colouring has no monochromatic triangle",
        )
    if s in _LOOKUP:
        return RamseyResult(s=s, value=_LOOKUP[s], verified=False, note="table lookup, not verified")
    raise EpslensError(f"Ramsey number R({s},{s}) is not supported (use 3 or 4)")
