# epslens/stability.py
"""Weighted bipartite structures, order-property chains and stability profiles.

A chain of length k+1 is a sequence of distinct (row, column) pairs
(a_0, b_0), ..., (a_k, b_k); its discrepancy at i, j is
d(f(a_i, b_j), f(a_j, b_i)). Pair p = (a, b) is indexed as a * m + b.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
from numpy.typing import NDArray

from epslens.contracts import (
    ChainCertificate,
    ChainKind,
    DimensionMismatchError,
    EpslensError,
    SearchMode,
    ShapeMismatchError,
    SizeGuardExceeded,
    ValueKind,
)
from epslens.settings import get_settings
from epslens.value_space import (
    ValuePoint,
    ValueSpace,
    encode_values,
    value_distance_array,
)

logger = logging.getLogger(__name__)


# ------------------------------------------------------------------------------
# Structures
# ------------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightedBipartiteStructure:
    """Table f: V x W -> values, stored densely.

    ``data`` has shape (n, m) for reals and finite-metric indices, (n, m, dim) for vectors.
    """

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    space: ValueSpace
    data: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        n, m = len(self.rows), len(self.cols)
        if n == 0 or m == 0:
            raise ShapeMismatchError("structure needs at least one row and one column")
        expected: tuple[int, ...] = (n, m, self.space.dim) if self.space.kind is ValueKind.SUP_VECTOR else (n, m)
        if tuple(self.data.shape) != expected:
            raise ShapeMismatchError(f"table shape {self.data.shape} does not match {expected}")
        if len(set(self.rows)) != n or len(set(self.cols)) != m:
            raise ShapeMismatchError("row and column labels must be unique")
        if self.space.kind is ValueKind.FINITE_METRIC:
            if self.data.size and (self.data.min() < 0 or self.data.max() >= self.space.size):
                raise DimensionMismatchError("finite-metric table index out of range")
        elif not np.all(np.isfinite(self.data)):
            raise ShapeMismatchError("table contains non-finite values")
        self.data.setflags(write=False)

    @classmethod
    def from_array(
        cls,
        values: Sequence[Sequence[float]] | np.ndarray,
        *,
        rows: Sequence[str] | None = None,
        cols: Sequence[str] | None = None,
        space: ValueSpace | None = None,
    ) -> WeightedBipartiteStructure:
        data = np.array(values)
        if space is None:
            space = ValueSpace.real() if data.ndim == 2 else ValueSpace.sup_vector(data.shape[-1])
        dtype = np.int64 if space.kind is ValueKind.FINITE_METRIC else np.float64
        data = data.astype(dtype)
        n, m = data.shape[0], data.shape[1]
        return cls(
            rows=tuple(rows) if rows is not None else tuple(f"a{i}" for i in range(n)),
            cols=tuple(cols) if cols is not None else tuple(f"b{j}" for j in range(m)),
            space=space,
            data=data,
        )

    @classmethod
    def from_points(
        cls,
        *,
        rows: Sequence[str],
        cols: Sequence[str],
        space: ValueSpace,
        grid: Sequence[Sequence[ValuePoint]],
    ) -> WeightedBipartiteStructure:
        if len(grid) != len(rows) or any(len(line) != len(cols) for line in grid):
            raise ShapeMismatchError("grid shape does not match labels")
        flat = encode_values(space, [p for line in grid for p in line])
        shape = (len(rows), len(cols)) + tuple(flat.shape[1:])
        return cls(rows=tuple(rows), cols=tuple(cols), space=space, data=flat.reshape(shape))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.cols)

    @property
    def pair_count(self) -> int:
        return len(self.rows) * len(self.cols)

    def value(self, i: int, j: int) -> ValuePoint:
        raw = self.data[i, j]
        if self.space.kind is ValueKind.FINITE_METRIC:
            return ValuePoint.finite(int(raw))
        if self.space.kind is ValueKind.REAL:
            return ValuePoint.real(float(raw))
        return ValuePoint.vector(np.asarray(raw).tolist())

    def encoded(self, i: int, j: int) -> list[float]:
        return self.value(i, j).encode()

    def row_index(self, label: str) -> int:
        try:
            return self.rows.index(label)
        except ValueError:
            raise EpslensError(f"unknown row label {label!r}") from None

    def col_index(self, label: str) -> int:
        try:
            return self.cols.index(label)
        except ValueError:
            raise EpslensError(f"unknown column label {label!r}") from None

    def flat_values(self) -> np.ndarray:
        if self.space.kind is ValueKind.SUP_VECTOR:
            return self.data.reshape(-1, self.space.dim)
        return self.data.reshape(-1)

    def unique_values(self) -> np.ndarray:
        flat = self.flat_values()
        return np.unique(flat, axis=0) if flat.ndim == 2 else np.unique(flat)

    @cached_property
    def diameter(self) -> float:
        values = self.unique_values()
        if self.space.kind is ValueKind.FINITE_METRIC:
            return float(self.space.matrix[np.ix_(values, values)].max())
        if self.space.kind is ValueKind.REAL:
            return float(values.max() - values.min())
        return float((values.max(axis=0) - values.min(axis=0)).max())

    def transpose(self) -> WeightedBipartiteStructure:
        axes = (1, 0, 2) if self.space.kind is ValueKind.SUP_VECTOR else (1, 0)
        return WeightedBipartiteStructure(
            rows=self.cols, cols=self.rows, space=self.space, data=self.data.transpose(axes).copy()
        )

    @cached_property
    def row_distances(self) -> NDArray[np.float64]:
        """Sup-metric distances between rows viewed as functions on the columns."""
        left = self.data[:, None, ...]
        right = self.data[None, :, ...]
        return value_distance_array(self.space, left, right).max(axis=2)

    @cached_property
    def pair_values(self) -> np.ndarray:
        """X[p, q] = f(a_p, b_q) for pair indices p, q."""
        n, m = self.shape
        a_idx = np.repeat(np.arange(n), m)
        b_idx = np.tile(np.arange(m), n)
        return self.data[a_idx[:, None], b_idx[None, :]]

    @cached_property
    def pair_discrepancy(self) -> NDArray[np.float64]:
        x = self.pair_values
        swapped = x.swapaxes(0, 1)
        return value_distance_array(self.space, x, swapped)

    def pair_slices(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        """f(a_p, b_q) and f(a_q, b_p) over all pairs q, without the pair matrices."""
        n, m = self.shape
        a, b = self.pair(p)
        return self.data[a][np.tile(np.arange(m), n)], self.data[:, b][np.repeat(np.arange(n), m)]

    def discrepancy_row(self, p: int) -> NDArray[np.float64]:
        """Row p of ``pair_discrepancy``, computed on its own."""
        left, right = self.pair_slices(p)
        return value_distance_array(self.space, left, right)

    def pair(self, p: int) -> tuple[int, int]:
        m = len(self.cols)
        return p // m, p % m


def random_grid_structure(
    n: int = 8, m: int = 8, *, seed: int = 0, steps: int = 10
) -> WeightedBipartiteStructure:
    """Random real table on the grid {0, 1/steps, ..., 1}."""
    rng = np.random.default_rng(seed)
    return WeightedBipartiteStructure.from_array(rng.integers(0, steps + 1, size=(n, m)) / steps)


def half_graph(n: int) -> WeightedBipartiteStructure:
    """H_n with f(i, j) = 1 if i <= j else 0."""
    idx = np.arange(n)
    return WeightedBipartiteStructure.from_array((idx[:, None] <= idx[None, :]).astype(np.float64))


# ------------------------------------------------------------------------------
# Chains
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class WitnessChain:
    structure: WeightedBipartiteStructure = field(repr=False, compare=False)
    rows: tuple[int, ...]
    cols: tuple[int, ...]
    kind: ChainKind = ChainKind.PLAIN
    r: ValuePoint | None = None
    s: ValuePoint | None = None
    delta: float | None = None

    @property
    def k(self) -> int:
        return len(self.rows) - 1

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(zip(self.rows, self.cols))

    def value_block(self) -> np.ndarray:
        """B[i, j] = f(a_i, b_j)."""
        return self.structure.data[np.ix_(self.rows, self.cols)]

    @cached_property
    def discrepancy(self) -> NDArray[np.float64]:
        block = self.value_block()
        return value_distance_array(self.structure.space, block, block.swapaxes(0, 1))

    @property
    def min_discrepancy(self) -> float:
        if self.k < 1:
            return 0.0
        upper = self.discrepancy[np.triu_indices(self.k + 1, k=1)]
        return float(upper.min())

    @property
    def witness_distance(self) -> float | None:
        if self.r is None or self.s is None:
            return None
        space = self.structure.space
        return float(
            value_distance_array(space, encode_values(space, [self.r]), encode_values(space, [self.s]))[0]
        )

    def verify(self, epsilon: float, *, strict: bool = False) -> bool:
        if len(self.rows) != len(self.cols) or len(set(self.pairs)) != len(self.pairs):
            return False
        if self.kind is ChainKind.PLAIN:
            return self.min_discrepancy > epsilon if strict else self.min_discrepancy >= epsilon
        if self.r is None or self.s is None or self.delta is None:
            return False
        witness = self.witness_distance
        if witness is None or witness < epsilon:
            return False
        space = self.structure.space
        block = self.value_block()
        r = encode_values(space, [self.r])[0]
        s = encode_values(space, [self.s])[0]
        to_r = value_distance_array(space, block, r)
        to_s = value_distance_array(space, block, s)
        upper = np.triu_indices(self.k + 1, k=1)
        return bool(np.all(to_r[upper] <= self.delta) and np.all(to_s.T[upper] <= self.delta))

    def to_certificate(self, epsilon: float, *, strict: bool = False) -> ChainCertificate:
        f = self.structure
        block = [[f.encoded(a, b) for b in self.cols] for a in self.rows]
        return ChainCertificate(
            space=f.space.to_document(),
            row_labels=[f.rows[a] for a in self.rows],
            col_labels=[f.cols[b] for b in self.cols],
            values=block,
            chain_kind=self.kind,
            epsilon=epsilon,
            strict=strict,
            r=self.r.encode() if self.r is not None else None,
            s=self.s.encode() if self.s is not None else None,
            delta=self.delta,
        )

    def as_bi_constant(self) -> WitnessChain:
        """A 2-chain read as a bi-constant chain with r = f(a_0, b_1), s = f(a_1, b_0), delta 0."""
        if self.k != 1:
            raise EpslensError("only chains of length 2 convert to bi-constant form")
        f = self.structure
        return WitnessChain(
            structure=f,
            rows=self.rows,
            cols=self.cols,
            kind=ChainKind.BI_CONSTANT,
            r=f.value(self.rows[0], self.cols[1]),
            s=f.value(self.rows[1], self.cols[0]),
            delta=0.0,
        )

    def to_dict(self) -> dict[str, object]:
        f = self.structure
        out: dict[str, object] = {
            "kind": self.kind.value,
            "rows": [f.rows[a] for a in self.rows],
            "cols": [f.cols[b] for b in self.cols],
            "min_discrepancy": self.min_discrepancy,
        }
        if self.kind is ChainKind.BI_CONSTANT:
            out.update(
                r=self.r.encode() if self.r else None,
                s=self.s.encode() if self.s else None,
                delta=self.delta,
            )
        return out


@dataclass(frozen=True)
class ChainDetection:
    chain: WitnessChain | None
    exhaustive: bool
    mode: SearchMode
    nodes: int = 0

    @property
    def found(self) -> bool:
        return self.chain is not None


class _Budget:
    def __init__(self, limit: int) -> None:
        self.limit = limit
        self.nodes = 0

    def tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.limit:
            raise SizeGuardExceeded(
                f"exact search exceeded the node budget of {self.limit}; "
                "raise EPSLENS_SEARCH_NODE_BUDGET or use heuristic mode"
            )


def bitsets(mask: NDArray[np.bool_]) -> list[int]:
    """Row i of a boolean matrix as a Python int with bit j set iff mask[i, j]."""
    packed = np.packbits(mask, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


def _bits(mask: NDArray[np.bool_]) -> int:
    return int.from_bytes(np.packbits(mask, bitorder="little").tobytes(), "little")


def discrepancy_bitsets(f: WeightedBipartiteStructure, epsilon: float) -> list[int]:
    """Bitset graph of pairs at discrepancy >= epsilon, built one pair at a time."""
    return [_bits(f.discrepancy_row(p) >= epsilon) for p in range(f.pair_count)]


def _bi_constant_successors(
    f: WeightedBipartiteStructure, r: np.ndarray, s: np.ndarray, delta: float
) -> list[int]:
    out: list[int] = []
    for p in range(f.pair_count):
        left, right = f.pair_slices(p)
        mask = (value_distance_array(f.space, left, r) <= delta) & (
            value_distance_array(f.space, right, s) <= delta
        )
        mask[p] = False
        out.append(_bits(mask))
    return out


@dataclass(frozen=True)
class _PairMasks:
    row_above: list[int]
    same_row: list[int]
    same_col: list[int]


def _pair_masks(f: WeightedBipartiteStructure) -> _PairMasks:
    n, m = f.shape
    pair_rows = np.repeat(np.arange(n), m)
    pair_cols = np.tile(np.arange(m), n)
    above = bitsets(pair_rows[None, :] > np.arange(n)[:, None])
    same_row = bitsets(pair_rows[None, :] == np.arange(n)[:, None])
    same_col = bitsets(pair_cols[None, :] == np.arange(m)[:, None])
    return _PairMasks(row_above=above, same_row=same_row, same_col=same_col)


def _clique_search(
    adjacency: list[int],
    size: int,
    budget: _Budget,
    restrict: Callable[[int], int] | None = None,
) -> list[int] | None:
    """Lexicographically least ascending clique of ``size`` vertices, or None."""
    full = (1 << len(adjacency)) - 1

    def extend(chain: list[int], cand: int) -> list[int] | None:
        if len(chain) == size:
            return chain
        need = size - len(chain)
        while cand:
            if cand.bit_count() < need:
                return None
            low = cand & -cand
            v = low.bit_length() - 1
            cand ^= low
            budget.tick()
            nxt = cand & adjacency[v]
            if restrict is not None:
                nxt &= restrict(v)
            found = extend(chain + [v], nxt)
            if found is not None:
                return found
        return None

    return extend([], full)


def _sequence_search(
    successors: list[int],
    size: int,
    budget: _Budget,
    restrict: Callable[[int], int] | None = None,
) -> list[int] | None:
    """Lexicographically least sequence with successors[p_i] containing p_j for all i < j."""
    full = (1 << len(successors)) - 1

    def extend(chain: list[int], cand: int) -> list[int] | None:
        if len(chain) == size:
            return chain
        need = size - len(chain)
        rest = cand
        while rest:
            if cand.bit_count() < need:
                return None
            low = rest & -rest
            v = low.bit_length() - 1
            rest ^= low
            budget.tick()
            nxt = cand & successors[v] & ~low
            if restrict is not None:
                nxt &= restrict(v)
            found = extend(chain + [v], nxt)
            if found is not None:
                return found
        return None

    return extend([], full)


def _greedy_search(
    neighbours: list[int], size: int, seeds: int = 64
) -> list[int] | None:
    """Greedy seeding by degree plus a one-step swap when an extension stalls."""
    count = len(neighbours)
    full = (1 << count) - 1
    order = sorted(range(count), key=lambda v: (-neighbours[v].bit_count(), v))[:seeds]

    def candidates(chain: list[int]) -> int:
        cand = full
        for v in chain:
            cand &= neighbours[v] & ~(1 << v)
        return cand

    def grow(chain: list[int]) -> list[int]:
        while len(chain) < size:
            cand = candidates(chain)
            if not cand:
                break
            best, best_score = -1, -1
            rest = cand
            while rest:
                low = rest & -rest
                v = low.bit_length() - 1
                rest ^= low
                score = (cand & neighbours[v]).bit_count()
                if score > best_score:
                    best, best_score = v, score
            chain = chain + [best]
        return chain

    for seed in order:
        chain = grow([seed])
        if len(chain) >= size:
            return chain[:size]
        # swap: drop each member in turn and regrow
        for drop in range(1, len(chain)):
            alt = grow(chain[:drop] + chain[drop + 1 :])
            if len(alt) >= size:
                return alt[:size]
    return None


def lex_least_clique(
    adjacency: list[int], size: int, *, node_budget: int | None = None
) -> list[int] | None:
    """Lexicographically least clique of the given size in a bitset graph."""
    budget = _Budget(node_budget if node_budget is not None else get_settings().search_node_budget)
    return _clique_search(adjacency, size, budget)


def _check_size(f: WeightedBipartiteStructure, size_guard: int | None) -> None:
    guard = size_guard if size_guard is not None else get_settings().size_guard
    if f.pair_count > guard:
        raise SizeGuardExceeded(
            f"{f.pair_count} (row, column) pairs exceed the exact-search size guard of {guard}; "
            "raise EPSLENS_SIZE_GUARD or use heuristic mode"
        )


def _plain_chain(
    f: WeightedBipartiteStructure,
    epsilon: float,
    size: int,
    budget: _Budget,
    *,
    distinct_first: bool = True,
) -> list[int] | None:
    adjacency = bitsets(f.pair_discrepancy >= epsilon)
    if distinct_first:
        masks = _pair_masks(f)
        m = len(f.cols)

        def restrict(v: int) -> int:
            return masks.row_above[v // m] & ~masks.same_col[v % m]

        found = _clique_search(adjacency, size, budget, restrict)
        if found is not None:
            return found
    return _clique_search(adjacency, size, budget)


def chain_exists(
    f: WeightedBipartiteStructure,
    epsilon: float,
    k: int,
    *,
    budget: _Budget | None = None,
) -> bool:
    """Exhaustive existence check for a plain (k+1)-chain at level epsilon."""
    if k + 1 > f.pair_count:
        return False
    budget = budget or _Budget(get_settings().search_node_budget)
    return _plain_chain(f, epsilon, k + 1, budget, distinct_first=False) is not None


def _realized_candidates(
    f: WeightedBipartiteStructure, epsilon: float
) -> list[tuple[np.ndarray, np.ndarray]]:
    values = f.unique_values()
    left = values[:, None, ...]
    right = values[None, :, ...]
    apart = value_distance_array(f.space, left, right) >= epsilon
    return [(values[i], values[j]) for i, j in zip(*np.nonzero(apart))]


def _bi_constant_chain(
    f: WeightedBipartiteStructure,
    epsilon: float,
    size: int,
    delta: float,
    budget: _Budget,
    greedy: bool,
) -> tuple[list[int], np.ndarray, np.ndarray] | None:
    if greedy:
        for r, s in _realized_candidates(f, epsilon):
            found = _greedy_search(_bi_constant_successors(f, r, s, delta), size)
            if found is not None:
                return found, r, s
        return None

    x = f.pair_values
    masks = _pair_masks(f)
    m = len(f.cols)

    def restrict(v: int) -> int:
        return ~(masks.same_row[v // m] | masks.same_col[v % m])

    best: tuple[int, list[int], np.ndarray, np.ndarray] | None = None
    for r, s in _realized_candidates(f, epsilon):
        near_r = value_distance_array(f.space, x, r) <= delta
        near_s = value_distance_array(f.space, x, s) <= delta
        relation = near_r & near_s.T
        np.fill_diagonal(relation, False)
        successors = bitsets(relation)
        for tier, restriction in enumerate((restrict, None)):
            if best is not None and best[0] < tier:
                break
            found = _sequence_search(successors, size, budget, restriction)
            if found is not None:
                if best is None or (tier, found) < (best[0], best[1]):
                    best = (tier, found, r, s)
                break
    if best is None:
        return None
    return best[1], best[2], best[3]


def detect_chain(
    f: WeightedBipartiteStructure,
    epsilon: float,
    k: int,
    *,
    bi_constant: bool = False,
    delta: float = 0.0,
    mode: SearchMode = SearchMode.EXACT,
    size_guard: int | None = None,
    node_budget: int | None = None,
) -> ChainDetection:
    """Find a (k+1)-chain witnessing epsilon-instability.

    Exact mode returns the lexicographically least chain (pairs with distinct rows and
    columns are preferred) or None with an exhaustive guarantee.
    """
    if not epsilon > 0:
        raise EpslensError(f"epsilon must be > 0, got {epsilon}")
    if k < 1:
        raise EpslensError(f"k must be >= 1, got {k}")
    if bi_constant and delta < 0:
        raise EpslensError(f"delta must be >= 0, got {delta}")
    exact = mode is SearchMode.EXACT
    if exact:
        _check_size(f, size_guard)
    budget = _Budget(node_budget if node_budget is not None else get_settings().search_node_budget)
    size = k + 1
    logger.debug(
        "detect_chain %dx%d epsilon=%s k=%d bi_constant=%s mode=%s",
        *f.shape, epsilon, k, bi_constant, mode.value,
    )
    if size > f.pair_count:
        return ChainDetection(chain=None, exhaustive=exact, mode=mode)

    chain: WitnessChain | None = None
    if bi_constant:
        found = _bi_constant_chain(f, epsilon, size, delta, budget, greedy=not exact)
        if found is not None:
            order, r, s = found
            pairs = [f.pair(p) for p in order]
            chain = WitnessChain(
                structure=f,
                rows=tuple(a for a, _ in pairs),
                cols=tuple(b for _, b in pairs),
                kind=ChainKind.BI_CONSTANT,
                r=_point(f.space, r),
                s=_point(f.space, s),
                delta=delta,
            )
    else:
        if exact:
            order_or_none = _plain_chain(f, epsilon, size, budget)
        else:
            order_or_none = _greedy_search(discrepancy_bitsets(f, epsilon), size)
            if order_or_none is not None:
                order_or_none = sorted(order_or_none)
        if order_or_none is not None:
            pairs = [f.pair(p) for p in order_or_none]
            chain = WitnessChain(
                structure=f, rows=tuple(a for a, _ in pairs), cols=tuple(b for _, b in pairs)
            )
    if chain is not None and not chain.verify(epsilon):
        raise EpslensError("internal error: detected chain failed re-verification")
    if not exact and chain is None:
        logger.warning("heuristic search found no chain at epsilon=%s, k=%d; not a certificate", epsilon, k)
    return ChainDetection(chain=chain, exhaustive=exact, mode=mode, nodes=budget.nodes)


def _point(space: ValueSpace, raw: np.ndarray) -> ValuePoint:
    if space.kind is ValueKind.FINITE_METRIC:
        return ValuePoint.finite(int(raw))
    if space.kind is ValueKind.REAL:
        return ValuePoint.real(float(raw))
    return ValuePoint.vector(np.asarray(raw).tolist())


# ------------------------------------------------------------------------------
# Profiles
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfileEntry:
    k: int
    epsilon: float
    chain: WitnessChain | None
    certified: bool
    # smallest realized discrepancy above epsilon; no chain exists there
    refuted_next: float | None = None


@dataclass(frozen=True)
class StabilityProfile:
    entries: tuple[ProfileEntry, ...]
    mode: SearchMode
    diameter: float

    def epsilon(self, k: int) -> float:
        for entry in self.entries:
            if entry.k == k:
                return entry.epsilon
        raise KeyError(k)

    def as_dict(self) -> dict[str, float]:
        return {str(e.k): e.epsilon for e in self.entries}

    def to_rows(self) -> list[tuple[int, float, bool]]:
        return [(e.k, e.epsilon, e.certified) for e in self.entries]


def realized_discrepancies(f: WeightedBipartiteStructure, *, streamed: bool = False) -> NDArray[np.float64]:
    """Sorted distinct positive values of d(f(a_p, b_q), f(a_q, b_p)).

    With ``streamed`` the pair matrix is never built; rows are scanned one at a time.
    """
    if not streamed:
        disc = f.pair_discrepancy
        upper = disc[np.triu_indices(disc.shape[0], k=1)]
        return np.unique(upper[upper > 0])
    found: NDArray[np.float64] = np.empty(0, dtype=np.float64)
    for p in range(f.pair_count - 1):
        row = f.discrepancy_row(p)[p + 1 :]
        found = np.union1d(found, row[row > 0])
    return found


def stability_profile(
    f: WeightedBipartiteStructure,
    k_max: int,
    *,
    mode: SearchMode = SearchMode.EXACT,
    size_guard: int | None = None,
    node_budget: int | None = None,
) -> StabilityProfile:
    """epsilon_k for k = 1..k_max: the largest min-discrepancy over all (k+1)-chains."""
    if k_max < 1:
        raise EpslensError(f"k_max must be >= 1, got {k_max}")
    exact = mode is SearchMode.EXACT
    if exact:
        _check_size(f, size_guard)
    limit = node_budget if node_budget is not None else get_settings().search_node_budget
    values = realized_discrepancies(f, streamed=not exact)
    logger.debug("profile over %d realized discrepancy values, k_max=%d", len(values), k_max)

    def exists(index: int, k: int) -> bool:
        epsilon = float(values[index])
        if exact:
            return chain_exists(f, epsilon, k, budget=_Budget(limit))
        return detect_chain(f, epsilon, k, mode=mode).found

    entries: list[ProfileEntry] = []
    hi = len(values) - 1
    for k in range(1, k_max + 1):
        # largest index with a chain; monotone in the threshold
        lo, best = 0, -1
        top = hi
        while lo <= top:
            mid = (lo + top) // 2
            if exists(mid, k):
                best, lo = mid, mid + 1
            else:
                top = mid - 1
        if best < 0:
            refuted = float(values[0]) if len(values) else None
            entries.append(ProfileEntry(k=k, epsilon=0.0, chain=None, certified=exact, refuted_next=refuted))
            hi = -1
            continue
        epsilon = float(values[best])
        detection = detect_chain(
            f, epsilon, k, mode=mode, size_guard=size_guard, node_budget=limit
        )
        refuted = float(values[best + 1]) if best + 1 < len(values) else None
        entries.append(
            ProfileEntry(k=k, epsilon=epsilon, chain=detection.chain, certified=exact, refuted_next=refuted)
        )
        hi = best
    return StabilityProfile(entries=tuple(entries), mode=mode, diameter=f.diameter)


# ------------------------------------------------------------------------------
# Transforms
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class Scale:
    factor: float


@dataclass(frozen=True)
class AddPointwise:
    other: WeightedBipartiteStructure


@dataclass(frozen=True)
class Transpose:
    pass


@dataclass(frozen=True)
class ShiftConstant:
    constant: float | tuple[float, ...]


TransformOp = Union[Scale, AddPointwise, Transpose, ShiftConstant]


def transform(f: WeightedBipartiteStructure, op: TransformOp) -> WeightedBipartiteStructure:
    if isinstance(op, Transpose):
        return f.transpose()
    if f.space.kind is ValueKind.FINITE_METRIC:
        raise DimensionMismatchError("arithmetic transforms need real or sup-vector values")
    if isinstance(op, Scale):
        data = f.data * float(op.factor)
    elif isinstance(op, ShiftConstant):
        shift = np.asarray(op.constant, dtype=np.float64)
        if shift.ndim and (f.space.kind is ValueKind.REAL or shift.shape[0] != f.space.dim):
            raise ShapeMismatchError(f"shift of shape {shift.shape} does not fit {f.space.kind.value} values")
        data = f.data + shift
    else:
        g = op.other
        if g.data.shape != f.data.shape or g.space.kind is not f.space.kind:
            raise ShapeMismatchError(f"cannot add tables of shapes {f.data.shape} and {g.data.shape}")
        data = f.data + g.data
    return WeightedBipartiteStructure(rows=f.rows, cols=f.cols, space=f.space, data=data)
