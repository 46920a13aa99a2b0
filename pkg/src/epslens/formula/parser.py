# epslens/formula/parser.py
"""Recursive-descent parser for the formula grammar.

    formula    := quantifier | number | builtin | atomic
    quantifier := ("sup" | "inf") IDENT [":" IDENT] "." formula
    builtin    := ("add" | "sub" | "max" | "min" | "monus" | "dist") "(" formula {"," formula} ")"
                | "scale" "[" NUMBER "]" "(" formula ")"
                | "proj" "[" NUMBER "]" "(" formula ")"
    atomic     := IDENT "(" [term {"," term}] ")"
    term       := IDENT | "'" label "'"
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from epslens.contracts import (
    EnvelopeError,
    FormulaSyntaxError,
    GuardViolationError,
    SortMismatchError,
)
from epslens.envelopes import Connective, ConnectiveOp, envelope_propagate
from epslens.formula.syntax import (
    BUILTINS,
    QUANTIFIERS,
    Apply,
    Atomic,
    Const,
    Formula,
    Language,
    Node,
    Quantifier,
    Term,
    Var,
    free_variables,
)

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(
    r"""
    (?P<WS>\s+)
  | (?P<NUMBER>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<STRING>'[^']*')
  | (?P<PUNCT>[()\[\],.:])
    """,
    re.VERBOSE,
)

_BINARY_OPS = {
    "add": ConnectiveOp.ADD,
    "sub": ConnectiveOp.SUB,
    "max": ConnectiveOp.MAX,
    "min": ConnectiveOp.MIN,
    "monus": ConnectiveOp.MONUS,
    "dist": ConnectiveOp.DIST,
}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", position=pos)
        kind = match.lastgroup or ""
        if kind != "WS":
            tokens.append(Token(kind, match.group(), pos))
        pos = match.end()
    tokens.append(Token("EOF", "", len(text)))
    return tokens


SortUsage = dict[str, str]


class _Parser:
    def __init__(self, text: str, language: Language) -> None:
        self.tokens = tokenize(text)
        self.index = 0
        self.language = language

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.current
        self.index += 1
        return token

    def expect(self, text: str) -> Token:
        token = self.current
        if token.text != text or token.kind == "STRING":
            found = token.text or "end of input"
            raise FormulaSyntaxError(f"expected {text!r}, found {found!r}", position=token.position)
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        token = self.current
        if token.kind != kind:
            found = token.text or "end of input"
            raise FormulaSyntaxError(f"expected {what}, found {found!r}", position=token.position)
        return self.advance()

    def parse(self) -> tuple[Node, SortUsage]:
        node, usage = self.formula()
        if self.current.kind != "EOF":
            raise FormulaSyntaxError(
                f"unexpected trailing input {self.current.text!r}", position=self.current.position
            )
        return node, usage

    def formula(self) -> tuple[Node, SortUsage]:
        token = self.current
        if token.kind == "NUMBER":
            self.advance()
            connective = Connective.const(float(token.text))
            return Apply(connective, (), envelope_propagate(connective, [])), {}
        if token.kind != "IDENT":
            found = token.text or "end of input"
            raise FormulaSyntaxError(f"expected a formula, found {found!r}", position=token.position)
        if token.text in QUANTIFIERS:
            return self.quantifier()
        if token.text in BUILTINS:
            return self.builtin()
        return self.atomic()

    def quantifier(self) -> tuple[Node, SortUsage]:
        head = self.advance()
        variable = self.expect_kind("IDENT", "a variable").text
        declared: str | None = None
        if self.current.text == ":":
            self.advance()
            declared = self.expect_kind("IDENT", "a sort name").text
        self.expect(".")
        body, usage = self.formula()
        used = usage.pop(variable, None)
        if declared is not None and used is not None and declared != used:
            raise SortMismatchError(
                f"variable {variable!r} declared of sort {declared!r} but used as {used!r}"
            )
        if not body.envelope.is_nonnegative_real():
            raise GuardViolationError(
                f"{head.text} {variable}: body envelope {body.envelope.to_spans()} "
                f"is not contained in the nonnegative reals (at position {head.position})"
            )
        kind = "sup" if head.text == "sup" else "inf"
        node = Quantifier(kind, variable, declared or used, body, body.envelope)
        return node, usage

    def builtin(self) -> tuple[Node, SortUsage]:
        head = self.advance()
        if head.text in ("scale", "proj"):
            self.expect("[")
            number = self.expect_kind("NUMBER", "a numeric parameter")
            self.expect("]")
            if head.text == "scale":
                connective = Connective.scale(float(number.text))
            else:
                if not re.fullmatch(r"\d+", number.text):
                    raise FormulaSyntaxError(
                        "projection index must be a nonnegative integer", position=number.position
                    )
                connective = Connective.proj(int(number.text))
        else:
            connective = Connective(_BINARY_OPS[head.text])
        self.expect("(")
        children: list[Node] = []
        usage: SortUsage = {}
        while True:
            child, child_usage = self.formula()
            children.append(child)
            _merge_usage(usage, child_usage)
            if self.current.text == ",":
                self.advance()
                continue
            break
        self.expect(")")
        if len(children) != connective.arity:
            raise FormulaSyntaxError(
                f"{head.text} expects {connective.arity} argument(s), got {len(children)}",
                position=head.position,
            )
        try:
            envelope = envelope_propagate(connective, [c.envelope for c in children])
        except EnvelopeError as exc:
            raise EnvelopeError(f"{exc} (at position {head.position})") from exc
        return Apply(connective, tuple(children), envelope), usage

    def atomic(self) -> tuple[Node, SortUsage]:
        head = self.advance()
        symbol = self.language.lookup(head.text)
        self.expect("(")
        args: list[Term] = []
        if self.current.text != ")":
            while True:
                token = self.current
                if token.kind == "IDENT" and token.text not in QUANTIFIERS | BUILTINS:
                    args.append(Var(self.advance().text))
                elif token.kind == "STRING":
                    args.append(Const(self.advance().text[1:-1]))
                else:
                    found = token.text or "end of input"
                    raise FormulaSyntaxError(
                        f"expected a variable or quoted constant, found {found!r}",
                        position=token.position,
                    )
                if self.current.text == ",":
                    self.advance()
                    continue
                break
        self.expect(")")
        if len(args) != symbol.arity:
            raise SortMismatchError(
                f"predicate {symbol.name!r} takes {symbol.arity} argument(s), got {len(args)} "
                f"(at position {head.position})"
            )
        usage: SortUsage = {}
        for arg, sort in zip(args, symbol.sorts):
            if isinstance(arg, Var):
                _merge_usage(usage, {arg.name: sort})
        return Atomic(symbol.name, tuple(args), symbol.envelope), usage


def _merge_usage(into: SortUsage, other: SortUsage) -> None:
    for name, sort in other.items():
        previous = into.setdefault(name, sort)
        if previous != sort:
            raise SortMismatchError(f"variable {name!r} used with sorts {previous!r} and {sort!r}")


def parse_formula(text: str, language: Language) -> Formula:
    node, usage = _Parser(text, language).parse()
    free = free_variables(node)
    logger.debug("parsed formula with free variables %s", free)
    return Formula(root=node, free_variables=free, variable_sorts=dict(usage), language=language)
