# epslens/formula/syntax.py
"""Formula AST, predicate declarations and the canonical printer."""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from typing import Literal, Union

from epslens.contracts import UnknownPredicateError
from epslens.envelopes import CompactEnvelope, Connective, ConnectiveOp

BUILTINS = frozenset({"add", "sub", "max", "min", "monus", "dist", "scale", "proj"})
QUANTIFIERS = frozenset({"sup", "inf"})
RESERVED = BUILTINS | QUANTIFIERS


@dataclass(frozen=True)
class PredicateSymbol:
    name: str
    sorts: tuple[str, ...]
    envelope: CompactEnvelope
    # recorded for report metadata only
    modulus: str | None = None

    @property
    def arity(self) -> int:
        return len(self.sorts)


@dataclass(frozen=True)
class Language:
    predicates: Mapping[str, PredicateSymbol]

    def __post_init__(self) -> None:
        clash = sorted(set(self.predicates) & RESERVED)
        if clash:
            raise UnknownPredicateError(f"predicate names collide with builtins: {clash}")

    def lookup(self, name: str) -> PredicateSymbol:
        try:
            return self.predicates[name]
        except KeyError:
            raise UnknownPredicateError(f"unknown predicate {name!r}") from None


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    """A named element of a carrier used as a term."""

    label: str


Term = Union[Var, Const]


@dataclass(frozen=True)
class Atomic:
    predicate: str
    args: tuple[Term, ...]
    envelope: CompactEnvelope = field(compare=False, repr=False)


@dataclass(frozen=True)
class Apply:
    connective: Connective
    children: tuple[Node, ...]
    envelope: CompactEnvelope = field(compare=False, repr=False)


@dataclass(frozen=True)
class Quantifier:
    kind: Literal["sup", "inf"]
    variable: str
    # None when the variable does not occur in the body
    sort: str | None
    body: Node
    envelope: CompactEnvelope = field(compare=False, repr=False)


Node = Union[Atomic, Apply, Quantifier]


@dataclass(frozen=True)
class Formula:
    root: Node
    free_variables: tuple[str, ...]
    variable_sorts: Mapping[str, str]
    language: Language = field(compare=False, repr=False)

    @property
    def envelope(self) -> CompactEnvelope:
        return self.root.envelope

    def __str__(self) -> str:
        return print_formula(self.root)


def iter_nodes(node: Node) -> Iterator[Node]:
    yield node
    if isinstance(node, Apply):
        for child in node.children:
            yield from iter_nodes(child)
    elif isinstance(node, Quantifier):
        yield from iter_nodes(node.body)


def free_variables(node: Node) -> tuple[str, ...]:
    """Free variables in order of first occurrence."""
    seen: list[str] = []

    def walk(n: Node, bound: frozenset[str]) -> None:
        if isinstance(n, Atomic):
            for arg in n.args:
                if isinstance(arg, Var) and arg.name not in bound and arg.name not in seen:
                    seen.append(arg.name)
        elif isinstance(n, Apply):
            for child in n.children:
                walk(child, bound)
        else:
            walk(n.body, bound | {n.variable})

    walk(node, frozenset())
    return tuple(seen)


def _format_number(value: float) -> str:
    return repr(float(value))


def _format_term(term: Term) -> str:
    if isinstance(term, Var):
        return term.name
    return "'" + term.label + "'"


def print_formula(node: Node) -> str:
    if isinstance(node, Atomic):
        return f"{node.predicate}({', '.join(_format_term(a) for a in node.args)})"
    if isinstance(node, Quantifier):
        sort = f":{node.sort}" if node.sort else ""
        return f"{node.kind} {node.variable}{sort} . {print_formula(node.body)}"
    op = node.connective.op
    if op is ConnectiveOp.CONST:
        return _format_number(node.connective.param or 0.0)
    args = ", ".join(print_formula(child) for child in node.children)
    if op is ConnectiveOp.SCALE:
        return f"scale[{_format_number(node.connective.param or 0.0)}]({args})"
    if op is ConnectiveOp.PROJ:
        return f"proj[{int(node.connective.param or 0)}]({args})"
    return f"{op.value}({args})"
