"""Constraint language: AST, parser, printer and evaluation over finite domains.

Grammar, loosest binding first::

    formula  := iff
    iff      := implies ("iff" implies)*          left-assoc
    implies  := or ("implies" implies)?           right-assoc
    or       := and ("or" and)*
    and      := not ("and" not)*
    not      := "not" not | cmp
    cmp      := sum (CMPOP sum)?                  non-associative
    sum      := prod (("+" | "-") prod)*
    prod     := unary ("*" unary)*
    unary    := "-" unary | atom
    atom     := INT | NAME | "true" | "false" | "(" formula ")"

Terms are integer valued and formulas are boolean; mixing them (``x1 and 2``)
is a syntax error reported at the offending operand.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator

import numpy as np

from .errors import FormulaSyntaxError, IntegerOverflow, ParseDiagnostic, UnknownVariable

if TYPE_CHECKING:
    from .model import Model

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

KEYWORDS = frozenset({"true", "false", "and", "or", "not", "implies", "iff"})
COMPARISONS = ("=", "!=", "<", "<=", ">", ">=")
IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

# Parenthesis/prefix nesting accepted by the parser, and depth of the finished
# tree; both keep the recursive parser and evaluator clear of Python's stack limit.
MAX_NESTING = 48
MAX_TREE_DEPTH = 256


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


class Node:
    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)


class Term(Node):
    __slots__ = ()


class Formula(Node):
    __slots__ = ()


@dataclass(frozen=True)
class IntConst(Term):
    value: int

    def __post_init__(self):
        # negative constants are spelled Neg(IntConst(n)), which is what the parser builds
        if isinstance(self.value, bool) or not isinstance(self.value, int):
            raise TypeError(f"IntConst needs an int, got {self.value!r}")
        if not 0 <= self.value <= INT64_MAX:
            raise ValueError(f"IntConst out of range [0, 2**63 - 1]: {self.value}")


@dataclass(frozen=True)
class VarRef(Term):
    name: str

    def __post_init__(self):
        if not IDENTIFIER.match(self.name) or self.name in KEYWORDS:
            raise ValueError(f"invalid variable name {self.name!r}")


@dataclass(frozen=True)
class Add(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Sub(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Mul(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Neg(Term):
    operand: Term


@dataclass(frozen=True)
class BoolConst(Formula):
    value: bool


@dataclass(frozen=True)
class Compare(Formula):
    left: Term
    op: str
    right: Term

    def __post_init__(self):
        if self.op not in COMPARISONS:
            raise ValueError(f"unknown comparison {self.op!r}")


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


TRUE = BoolConst(True)
FALSE = BoolConst(False)


def children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, (IntConst, VarRef, BoolConst)):
        return ()
    if isinstance(node, (Neg, Not)):
        return (node.operand,)
    return (node.left, node.right)


def walk(node: Node) -> Iterator[Node]:
    """Pre-order traversal, iterative so arbitrarily deep trees are fine."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(children(current)))


def depth(node: Node) -> int:
    best = 0
    stack = [(node, 1)]
    while stack:
        current, d = stack.pop()
        best = max(best, d)
        stack.extend((child, d + 1) for child in children(current))
    return best


def variables(node: Node) -> tuple[str, ...]:
    """Names referenced by ``node``, in order of first appearance."""
    seen: dict[str, None] = {}
    for n in walk(node):
        if isinstance(n, VarRef):
            seen.setdefault(n.name)
    return tuple(seen)


# --------------------------------------------------------------------------
# printing
# --------------------------------------------------------------------------

_IFF, _IMPLIES, _OR, _AND, _NOT, _CMP, _SUM, _PROD, _UNARY, _ATOM = range(1, 11)

_BINARY = {
    Iff: ("iff", _IFF),
    Implies: ("implies", _IMPLIES),
    Or: ("or", _OR),
    And: ("and", _AND),
    Add: ("+", _SUM),
    Sub: ("-", _SUM),
    Mul: ("*", _PROD),
}


def _level(node: Node) -> int:
    if isinstance(node, (IntConst, VarRef, BoolConst)):
        return _ATOM
    if isinstance(node, Neg):
        return _UNARY
    if isinstance(node, Not):
        return _NOT
    if isinstance(node, Compare):
        return _CMP
    return _BINARY[type(node)][1]


def to_text(node: Node) -> str:
    """Render ``node`` with the fewest parentheses that reparse to the same tree."""
    if isinstance(node, IntConst):
        return str(node.value)
    if isinstance(node, VarRef):
        return node.name
    if isinstance(node, BoolConst):
        return "true" if node.value else "false"
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, _UNARY)
    if isinstance(node, Not):
        return "not " + _wrap(node.operand, _NOT)
    if isinstance(node, Compare):
        return f"{_wrap(node.left, _SUM)} {node.op} {_wrap(node.right, _SUM)}"
    symbol, level = _BINARY[type(node)]
    if isinstance(node, Implies):
        left, right = _wrap(node.left, level + 1), _wrap(node.right, level)
    else:
        left, right = _wrap(node.left, level), _wrap(node.right, level + 1)
    return f"{left} {symbol} {right}"


def _wrap(node: Node, minimum: int) -> str:
    text = to_text(node)
    return text if _level(node) >= minimum else f"({text})"


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # INT, NAME, KW, OP, EOF
    text: str
    offset: int


_TOKEN = re.compile(
    r"(?P<ws>\s+)|(?P<int>[0-9]+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|!=|[=<>+\-*()])"
)


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    byte = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(
                ParseDiagnostic(byte, f"unexpected character {text[pos]!r}", "a token")
            )
        lexeme = m.group()
        if m.lastgroup == "int":
            tokens.append(_Token("INT", lexeme, byte))
        elif m.lastgroup == "name":
            tokens.append(_Token("KW" if lexeme in KEYWORDS else "NAME", lexeme, byte))
        elif m.lastgroup == "op":
            tokens.append(_Token("OP", lexeme, byte))
        pos = m.end()
        byte += len(lexeme.encode("utf-8"))
    tokens.append(_Token("EOF", "", byte))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.nesting = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("KW", "OP") and self.tok.text in texts

    def fail(self, message: str, expected: str | None = None, tok: _Token | None = None):
        tok = tok or self.tok
        raise FormulaSyntaxError(ParseDiagnostic(tok.offset, message, expected))

    def unexpected(self, expected: str):
        tok = self.tok
        what = "end of input" if tok.kind == "EOF" else repr(tok.text)
        self.fail(f"unexpected {what}", expected)

    def enter(self):
        self.nesting += 1
        if self.nesting > MAX_NESTING:
            self.fail(f"nesting deeper than {MAX_NESTING}")

    def formula_operand(self, start: _Token, node: Node) -> Formula:
        if not isinstance(node, Formula):
            self.fail("expected a formula, found a term", "a formula", start)
        return node

    def term_operand(self, start: _Token, node: Node) -> Term:
        if not isinstance(node, Term):
            self.fail("expected a term, found a formula", "a term", start)
        return node

    # one method per grammar level

    def parse_iff(self) -> Node:
        start = self.tok
        node = self.parse_implies()
        while self.at("iff"):
            left = self.formula_operand(start, node)
            self.advance()
            rstart = self.tok
            right = self.formula_operand(rstart, self.parse_implies())
            node = Iff(left, right)
        return node

    def parse_implies(self) -> Node:
        start = self.tok
        node = self.parse_or()
        if self.at("implies"):
            left = self.formula_operand(start, node)
            self.advance()
            self.enter()
            rstart = self.tok
            right = self.formula_operand(rstart, self.parse_implies())
            self.nesting -= 1
            node = Implies(left, right)
        return node

    def parse_or(self) -> Node:
        start = self.tok
        node = self.parse_and()
        while self.at("or"):
            left = self.formula_operand(start, node)
            self.advance()
            rstart = self.tok
            node = Or(left, self.formula_operand(rstart, self.parse_and()))
        return node

    def parse_and(self) -> Node:
        start = self.tok
        node = self.parse_not()
        while self.at("and"):
            left = self.formula_operand(start, node)
            self.advance()
            rstart = self.tok
            node = And(left, self.formula_operand(rstart, self.parse_not()))
        return node

    def parse_not(self) -> Node:
        if self.at("not"):
            self.advance()
            self.enter()
            start = self.tok
            operand = self.formula_operand(start, self.parse_not())
            self.nesting -= 1
            return Not(operand)
        return self.parse_cmp()

    def parse_cmp(self) -> Node:
        start = self.tok
        node = self.parse_sum()
        if self.at(*COMPARISONS):
            left = self.term_operand(start, node)
            op = self.advance().text
            rstart = self.tok
            right = self.term_operand(rstart, self.parse_sum())
            if self.at(*COMPARISONS):
                self.fail("comparisons cannot be chained", "'and' to combine comparisons")
            node = Compare(left, op, right)
        return node

    def parse_sum(self) -> Node:
        start = self.tok
        node = self.parse_prod()
        while self.at("+", "-"):
            left = self.term_operand(start, node)
            cls = Add if self.advance().text == "+" else Sub
            rstart = self.tok
            node = cls(left, self.term_operand(rstart, self.parse_prod()))
        return node

    def parse_prod(self) -> Node:
        start = self.tok
        node = self.parse_unary()
        while self.at("*"):
            left = self.term_operand(start, node)
            self.advance()
            rstart = self.tok
            node = Mul(left, self.term_operand(rstart, self.parse_unary()))
        return node

    def parse_unary(self) -> Node:
        if self.at("-"):
            self.advance()
            self.enter()
            start = self.tok
            operand = self.term_operand(start, self.parse_unary())
            self.nesting -= 1
            return Neg(operand)
        return self.parse_atom()

    def parse_atom(self) -> Node:
        tok = self.tok
        if tok.kind == "INT":
            value = int(tok.text)
            if value > INT64_MAX:
                self.fail("integer literal exceeds the signed 64-bit range")
            self.advance()
            return IntConst(value)
        if tok.kind == "NAME":
            self.advance()
            return VarRef(tok.text)
        if self.at("true", "false"):
            self.advance()
            return BoolConst(tok.text == "true")
        if self.at("("):
            self.advance()
            self.enter()
            node = self.parse_iff()
            if not self.at(")"):
                self.unexpected("')'")
            self.advance()
            self.nesting -= 1
            return node
        self.unexpected("an integer, a variable, 'true', 'false', '-', 'not' or '('")


def parse(text: str) -> Formula:
    """Parse constraint text into a :class:`Formula`.

    Raises :class:`FormulaSyntaxError` carrying a :class:`ParseDiagnostic`.

    >>> parse("x1 + x2 = 5")
    Compare(left=Add(left=VarRef(name='x1'), right=VarRef(name='x2')), op='=', right=IntConst(value=5))
    """
    parser = _Parser(text)
    start = parser.tok
    node = parser.parse_iff()
    if parser.tok.kind != "EOF":
        parser.unexpected("end of input")
    formula = parser.formula_operand(start, node)
    if depth(formula) > MAX_TREE_DEPTH:
        raise FormulaSyntaxError(
            ParseDiagnostic(0, f"formula tree deeper than {MAX_TREE_DEPTH} levels")
        )
    return formula


def as_formula(constraint: Formula | str) -> Formula:
    if isinstance(constraint, Formula):
        return constraint
    if isinstance(constraint, str):
        return parse(constraint)
    raise TypeError(f"expected a Formula or constraint text, got {type(constraint).__name__}")


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

_COMPARE = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _checked(value: int) -> int:
    if not INT64_MIN <= value <= INT64_MAX:
        raise IntegerOverflow(f"term value {value} outside the signed 64-bit range")
    return value


def _term_value(t: Term, env: dict[str, int]) -> int:
    if isinstance(t, IntConst):
        return t.value
    if isinstance(t, VarRef):
        try:
            return env[t.name]
        except KeyError:
            raise UnknownVariable(f"constraint mentions undeclared variable {t.name!r}") from None
    if isinstance(t, Neg):
        return _checked(-_term_value(t.operand, env))
    a, b = _term_value(t.left, env), _term_value(t.right, env)
    if isinstance(t, Add):
        return _checked(a + b)
    if isinstance(t, Sub):
        return _checked(a - b)
    return _checked(a * b)


def _truth(f: Formula, env: dict[str, int]) -> bool:
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, Compare):
        return _COMPARE[f.op](_term_value(f.left, env), _term_value(f.right, env))
    if isinstance(f, Not):
        return not _truth(f.operand, env)
    a, b = _truth(f.left, env), _truth(f.right, env)
    if isinstance(f, And):
        return a and b
    if isinstance(f, Or):
        return a or b
    if isinstance(f, Implies):
        return (not a) or b
    return a == b


def evaluate(f: Formula, a, model: Model) -> bool:
    """Whether assignment ``a`` (values in model variable order) satisfies ``f``.

    Arithmetic is exact and raises :class:`IntegerOverflow` outside int64.
    Both sides of every connective are evaluated, so whether a formula
    overflows never depends on evaluation order.
    """
    model.check_assignment(a)
    return _truth(f, dict(zip(model.names, (int(v) for v in a))))


def _bounds(t: Term, ranges: dict[str, tuple[int, int]]) -> tuple[int, int]:
    if isinstance(t, IntConst):
        return t.value, t.value
    if isinstance(t, VarRef):
        return ranges[t.name]
    if isinstance(t, Neg):
        lo, hi = _bounds(t.operand, ranges)
        return -hi, -lo
    (alo, ahi), (blo, bhi) = _bounds(t.left, ranges), _bounds(t.right, ranges)
    if isinstance(t, Add):
        return alo + blo, ahi + bhi
    if isinstance(t, Sub):
        return alo - bhi, ahi - blo
    products = (alo * blo, alo * bhi, ahi * blo, ahi * bhi)
    return min(products), max(products)


def _fits_int64(f: Formula, ranges: dict[str, tuple[int, int]]) -> bool:
    """True when interval bounds prove no subterm can overflow on any assignment."""
    for node in walk(f):
        if isinstance(node, Term):
            lo, hi = _bounds(node, ranges)
            if lo < INT64_MIN or hi > INT64_MAX:
                return False
    return True


def _vec_term(t: Term, cols: dict[str, np.ndarray]):
    if isinstance(t, IntConst):
        return np.int64(t.value)
    if isinstance(t, VarRef):
        return cols[t.name]
    if isinstance(t, Neg):
        return -_vec_term(t.operand, cols)
    a, b = _vec_term(t.left, cols), _vec_term(t.right, cols)
    if isinstance(t, Add):
        return a + b
    if isinstance(t, Sub):
        return a - b
    return a * b


def _vec_truth(f: Formula, cols: dict[str, np.ndarray]):
    if isinstance(f, BoolConst):
        return np.bool_(f.value)
    if isinstance(f, Compare):
        return _COMPARE[f.op](_vec_term(f.left, cols), _vec_term(f.right, cols))
    if isinstance(f, Not):
        return ~_vec_truth(f.operand, cols)
    a, b = _vec_truth(f.left, cols), _vec_truth(f.right, cols)
    if isinstance(f, And):
        return a & b
    if isinstance(f, Or):
        return a | b
    if isinstance(f, Implies):
        return ~a | b
    return a == b


def satisfying_mask(f: Formula, model: Model) -> np.ndarray:
    """Boolean vector over all assignments (canonical order): which satisfy ``f``."""
    names = set(model.names)
    for name in variables(f):
        if name not in names:
            raise UnknownVariable(f"constraint mentions undeclared variable {name!r}")
    ranges = {v.name: (v.domain.values[0], v.domain.values[-1]) for v in model.variables}
    n = model.n_assignments
    if _fits_int64(f, ranges):
        grids = np.meshgrid(
            *(np.asarray(v.domain.values, dtype=np.int64) for v in model.variables),
            indexing="ij",
        )
        cols = {name: g.ravel() for name, g in zip(model.names, grids)}
        with np.errstate(over="raise"):
            mask = _vec_truth(f, cols)
        return np.broadcast_to(mask, (n,)).copy()
    from .model import assignments

    return np.fromiter(
        (_truth(f, dict(zip(model.names, a))) for a in assignments(model)), dtype=bool, count=n
    )


def enumerate_models(f: Formula, model: Model) -> list[tuple[int, ...]]:
    """All assignments satisfying ``f``, in canonical (lexicographic) order."""
    mask = satisfying_mask(f, model)
    return [model.assignment_at(i) for i in np.flatnonzero(mask)]
