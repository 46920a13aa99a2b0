# epslens/laws.py
"""Seminorm laws of the stability profile, checked as registered law outcomes."""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from epslens._compat import StrEnum
from epslens.contracts import LawStatus, ShapeMismatchError, SizeGuardExceeded, ValueKind
from epslens.ramsey import verify_ramsey
from epslens.settings import get_settings
from epslens.stability import (
    AddPointwise,
    Scale,
    ShiftConstant,
    StabilityProfile,
    Transpose,
    WeightedBipartiteStructure,
    WitnessChain,
    detect_chain,
    realized_discrepancies,
    stability_profile,
    transform,
)

logger = logging.getLogger(__name__)


class LawId(StrEnum):
    CONSTANCY = "seminorm.constancy.v1"
    HOMOGENEITY = "seminorm.homogeneity.v1"
    SHIFT_INVARIANCE = "seminorm.shift_invariance.v1"
    TRANSPOSE_SYMMETRY = "seminorm.transpose_symmetry.v1"
    DIAMETER_BOUND = "seminorm.diameter_bound.v1"
    SUBADDITIVITY = "seminorm.subadditivity.v1"
    RAMSEY_SUBADDITIVITY = "seminorm.ramsey_subadditivity.v1"
    FINITE_STABILITY = "profile.pigeonhole.v1"


@dataclass(frozen=True)
class LawOutcome:
    law_id: LawId
    status: LawStatus
    code: str
    reason: str
    details: Mapping[str, Any] = field(default_factory=dict)
    witness: WitnessChain | None = None

    @property
    def passed(self) -> bool:
        return self.status is LawStatus.PASSED

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "law_id": self.law_id.value,
            "status": self.status.value,
            "code": self.code,
            "reason": self.reason,
            "details": dict(self.details),
        }
        if self.witness is not None:
            out["witness"] = self.witness.to_dict()
        return out


def _ok(law_id: LawId, code: str, details: Mapping[str, Any] | None = None) -> LawOutcome:
    detail_map = dict(details or {})
    reason = str(detail_map.get("message") or code)
    return LawOutcome(law_id=law_id, status=LawStatus.PASSED, code=code, reason=reason, details=detail_map)


def _failed(
    law_id: LawId,
    code: str,
    reason: str,
    details: Mapping[str, Any],
    witness: WitnessChain | None,
) -> LawOutcome:
    return LawOutcome(
        law_id=law_id, status=LawStatus.FAILED, code=code, reason=reason, details=dict(details), witness=witness
    )


@dataclass
class AuditContext:
    f: WeightedBipartiteStructure
    k: int
    g: WeightedBipartiteStructure | None = None
    scalars: Sequence[float] = (0.5, 2.0, -1.0)
    shifts: Sequence[float] = (1.0,)
    tolerance: float = 1e-9
    size_guard: int | None = None
    node_budget: int | None = None
    _profiles: dict[str, StabilityProfile] = field(default_factory=dict, repr=False)

    def profile(self, name: str, structure: WeightedBipartiteStructure, k_max: int) -> StabilityProfile:
        cached = self._profiles.get(name)
        if cached is not None and len(cached.entries) >= k_max:
            return cached
        computed = stability_profile(
            structure, k_max, size_guard=self.size_guard, node_budget=self.node_budget
        )
        self._profiles[name] = computed
        return computed

    def epsilon(self, name: str, structure: WeightedBipartiteStructure, k: int) -> tuple[float, WitnessChain | None]:
        entry = self.profile(name, structure, k).entries[k - 1]
        return entry.epsilon, entry.chain


Checker = Callable[[AuditContext], list[LawOutcome]]


def check_constancy(ctx: AuditContext) -> list[LawOutcome]:
    if ctx.f.diameter > 0:
        return [_ok(LawId.CONSTANCY, "constancy_not_applicable", {"message": "table is not constant"})]
    eps, chain = ctx.epsilon("f", ctx.f, ctx.k)
    if eps == 0:
        return [_ok(LawId.CONSTANCY, "constant_profile_zero", {"k": ctx.k})]
    return [
        _failed(LawId.CONSTANCY, "constant_profile_nonzero", "constant table has a positive profile", {"k": ctx.k, "epsilon_k": eps}, chain)
    ]


def check_homogeneity(ctx: AuditContext) -> list[LawOutcome]:
    base, _ = ctx.epsilon("f", ctx.f, ctx.k)
    outcomes = []
    for r in ctx.scalars:
        scaled = transform(ctx.f, Scale(r))
        eps, chain = ctx.epsilon(f"scale:{r!r}", scaled, ctx.k)
        expected = abs(r) * base
        details = {"k": ctx.k, "r": r, "epsilon_k": eps, "expected": expected}
        if math.isclose(eps, expected, rel_tol=0.0, abs_tol=ctx.tolerance):
            outcomes.append(_ok(LawId.HOMOGENEITY, "homogeneity_holds", details))
        else:
            witness = chain if eps > expected else ctx.epsilon("f", ctx.f, ctx.k)[1]
            outcomes.append(
                _failed(LawId.HOMOGENEITY, "homogeneity_violated", f"epsilon_k(r*f) != |r|*epsilon_k(f) for r={r}", details, witness)
            )
    return outcomes


def check_shift_invariance(ctx: AuditContext) -> list[LawOutcome]:
    base, base_chain = ctx.epsilon("f", ctx.f, ctx.k)
    outcomes = []
    for c in ctx.shifts:
        shifted = transform(ctx.f, ShiftConstant(c))
        eps, chain = ctx.epsilon(f"shift:{c!r}", shifted, ctx.k)
        details = {"k": ctx.k, "c": c, "epsilon_k": eps, "expected": base}
        if math.isclose(eps, base, rel_tol=0.0, abs_tol=ctx.tolerance):
            outcomes.append(_ok(LawId.SHIFT_INVARIANCE, "shift_invariance_holds", details))
        else:
            outcomes.append(
                _failed(LawId.SHIFT_INVARIANCE, "shift_invariance_violated", f"shift by {c} changed the profile", details, chain if eps > base else base_chain)
            )
    return outcomes


def check_transpose_symmetry(ctx: AuditContext) -> list[LawOutcome]:
    base, base_chain = ctx.epsilon("f", ctx.f, ctx.k)
    eps, chain = ctx.epsilon("transpose", transform(ctx.f, Transpose()), ctx.k)
    details = {"k": ctx.k, "epsilon_k": base, "epsilon_k_transpose": eps}
    if math.isclose(eps, base, rel_tol=0.0, abs_tol=ctx.tolerance):
        return [_ok(LawId.TRANSPOSE_SYMMETRY, "transpose_symmetry_holds", details)]
    return [
        _failed(LawId.TRANSPOSE_SYMMETRY, "transpose_symmetry_violated", "profile differs on the transpose", details, chain if eps > base else base_chain)
    ]


def check_diameter_bound(ctx: AuditContext) -> list[LawOutcome]:
    profile = ctx.profile("f", ctx.f, ctx.k)
    outcomes = []
    for entry in profile.entries[: ctx.k]:
        details = {"k": entry.k, "epsilon_k": entry.epsilon, "diameter": ctx.f.diameter}
        if entry.epsilon <= ctx.f.diameter + ctx.tolerance:
            outcomes.append(_ok(LawId.DIAMETER_BOUND, "diameter_bound_holds", details))
        else:
            outcomes.append(
                _failed(LawId.DIAMETER_BOUND, "diameter_bound_violated", "epsilon_k exceeds the diameter", details, entry.chain)
            )
    return outcomes


def _sum(ctx: AuditContext) -> WeightedBipartiteStructure:
    assert ctx.g is not None
    return transform(ctx.f, AddPointwise(ctx.g))


def check_subadditivity(ctx: AuditContext) -> list[LawOutcome]:
    if ctx.g is None:
        return [_ok(LawId.SUBADDITIVITY, "subadditivity_not_applicable", {"message": "no second table"})]
    eps_f, _ = ctx.epsilon("f", ctx.f, 1)
    eps_g, _ = ctx.epsilon("g", ctx.g, 1)
    eps_sum, chain = ctx.epsilon("f+g", _sum(ctx), 1)
    details = {"k": 1, "epsilon_f": eps_f, "epsilon_g": eps_g, "epsilon_sum": eps_sum}
    if eps_sum <= eps_f + eps_g + ctx.tolerance:
        return [_ok(LawId.SUBADDITIVITY, "subadditivity_holds", details)]
    return [
        _failed(LawId.SUBADDITIVITY, "subadditivity_violated", "epsilon_1(f+g) > epsilon_1(f) + epsilon_1(g)", details, chain)
    ]


def check_ramsey_subadditivity(ctx: AuditContext) -> list[LawOutcome]:
    """epsilon_5(f+g) <= epsilon_2(f) + epsilon_2(g), from R(3,3) = 6."""
    if ctx.g is None:
        return [_ok(LawId.RAMSEY_SUBADDITIVITY, "ramsey_subadditivity_not_applicable", {"message": "no second table"})]
    ramsey = verify_ramsey(3)
    if not ramsey.verified:
        return [
            LawOutcome(
                law_id=LawId.RAMSEY_SUBADDITIVITY,
                status=LawStatus.SKIPPED,
                code="ramsey_number_unverified",
                reason="R(3,3) could not be verified; the blow-up clause is not asserted",
            )
        ]
    k_sum = ramsey.value - 1
    try:
        eps_f, _ = ctx.epsilon("f", ctx.f, 2)
        eps_g, _ = ctx.epsilon("g", ctx.g, 2)
        bound = eps_f + eps_g
        total = _sum(ctx)
        above = [v for v in realized_discrepancies(total) if v > bound + ctx.tolerance]
        detection = (
            detect_chain(total, float(above[0]), k_sum, size_guard=ctx.size_guard, node_budget=ctx.node_budget)
            if above
            else None
        )
    except SizeGuardExceeded as exc:
        logger.warning("ramsey subadditivity skipped: %s", exc)
        return [
            LawOutcome(
                law_id=LawId.RAMSEY_SUBADDITIVITY,
                status=LawStatus.SKIPPED,
                code="size_guard_exceeded",
                reason=str(exc),
            )
        ]
    details: dict[str, Any] = {"k_sum": k_sum, "k_parts": 2, "epsilon_f": eps_f, "epsilon_g": eps_g, "bound": bound}
    if detection is None or detection.chain is None:
        details["refuted_at"] = float(above[0]) if above else None
        return [_ok(LawId.RAMSEY_SUBADDITIVITY, "ramsey_subadditivity_holds", details)]
    details["epsilon_sum_at_least"] = detection.chain.min_discrepancy
    return [
        _failed(LawId.RAMSEY_SUBADDITIVITY, "ramsey_subadditivity_violated", "epsilon_5(f+g) > epsilon_2(f) + epsilon_2(g)", details, detection.chain)
    ]


REGISTRY: dict[LawId, Checker] = {
    LawId.CONSTANCY: check_constancy,
    LawId.HOMOGENEITY: check_homogeneity,
    LawId.SHIFT_INVARIANCE: check_shift_invariance,
    LawId.TRANSPOSE_SYMMETRY: check_transpose_symmetry,
    LawId.DIAMETER_BOUND: check_diameter_bound,
    LawId.SUBADDITIVITY: check_subadditivity,
    LawId.RAMSEY_SUBADDITIVITY: check_ramsey_subadditivity,
}


@dataclass(frozen=True)
class SeminormReport:
    k: int
    outcomes: tuple[LawOutcome, ...]
    epsilon_k: float
    diameter: float
    stability_constant: float

    @property
    def passed(self) -> bool:
        return all(o.status is not LawStatus.FAILED for o in self.outcomes)

    @property
    def skipped(self) -> tuple[LawOutcome, ...]:
        return tuple(o for o in self.outcomes if o.status is LawStatus.SKIPPED)

    def failures(self) -> tuple[LawOutcome, ...]:
        return tuple(o for o in self.outcomes if o.status is LawStatus.FAILED)

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "passed": self.passed,
            "epsilon_k": self.epsilon_k,
            "diameter": self.diameter,
            "stability_constant": self.stability_constant,
            "laws": [o.to_dict() for o in self.outcomes],
        }


def structure_stability_constant(f: WeightedBipartiteStructure, k: int, *, epsilon_k: float | None = None) -> float:
    """epsilon_k(f) / diam(f), the smallest constant E with epsilon_k <= E * diam; 0 for constant tables."""
    if f.diameter == 0:
        return 0.0
    if epsilon_k is None:
        epsilon_k = stability_profile(f, k).epsilon(k)
    return epsilon_k / f.diameter


def seminorm_audit(
    f: WeightedBipartiteStructure,
    g: WeightedBipartiteStructure | None = None,
    *,
    k: int = 1,
    scalars: Sequence[float] = (0.5, 2.0, -1.0),
    shifts: Sequence[float] = (1.0,),
    tolerance: float | None = None,
    size_guard: int | None = None,
    node_budget: int | None = None,
) -> SeminormReport:
    if g is not None:
        if g.data.shape != f.data.shape:
            raise ShapeMismatchError(f"tables differ in shape: {f.data.shape} vs {g.data.shape}")
        if f.space.kind is not ValueKind.REAL or g.space.kind is not ValueKind.REAL:
            raise ShapeMismatchError("subadditivity audit needs real-valued tables")
    ctx = AuditContext(
        f=f,
        g=g,
        k=k,
        scalars=tuple(scalars),
        shifts=tuple(shifts),
        tolerance=get_settings().tolerance if tolerance is None else tolerance,
        size_guard=size_guard,
        node_budget=node_budget,
    )
    outcomes: list[LawOutcome] = []
    for law_id, checker in REGISTRY.items():
        logger.debug("checking %s", law_id.value)
        outcomes.extend(checker(ctx))
    eps, _ = ctx.epsilon("f", f, k)
    return SeminormReport(
        k=k,
        outcomes=tuple(outcomes),
        epsilon_k=eps,
        diameter=f.diameter,
        stability_constant=structure_stability_constant(f, k, epsilon_k=eps),
    )


def finite_stability_fact(
    f: WeightedBipartiteStructure, k: int, *, max_combinations: int = 250_000
) -> LawOutcome:
    """epsilon_k = 0 iff every (k+1)-chain of distinct pairs has a zero-discrepancy pair.

    The right-hand side is checked by brute force over pair combinations.
    """
    eps = stability_profile(f, k).epsilon(k)
    pairs = f.pair_count
    total = math.comb(pairs, k + 1)
    if total > max_combinations:
        return LawOutcome(
            law_id=LawId.FINITE_STABILITY,
            status=LawStatus.SKIPPED,
            code="too_many_combinations",
            reason=f"{total} combinations exceed the brute-force cap {max_combinations}",
        )
    positive = f.pair_discrepancy > 0
    witness: tuple[int, ...] | None = None
    for combo in itertools.combinations(range(pairs), k + 1):
        sub = positive[np.ix_(combo, combo)]
        if sub[np.triu_indices(k + 1, k=1)].all():
            witness = combo
            break
    all_have_zero = witness is None
    details = {"k": k, "epsilon_k": eps, "every_chain_has_zero_pair": all_have_zero, "combinations": total}
    if (eps == 0) == all_have_zero:
        return _ok(LawId.FINITE_STABILITY, "pigeonhole_consistent", details)
    chain = None
    if witness is not None:
        chain = WitnessChain(
            structure=f,
            rows=tuple(f.pair(p)[0] for p in witness),
            cols=tuple(f.pair(p)[1] for p in witness),
        )
    return _failed(LawId.FINITE_STABILITY, "pigeonhole_inconsistent", "profile disagrees with brute force", details, chain)
