"""
Recursive descent parser and vectorized evaluator for coefficient expressions.

Grammar (standard precedence, ^ right-associative):

    expression := term (('+' | '-') term)*
    term       := unary (('*' | '/') unary)*
    unary      := '-' unary | power
    power      := primary ('^' unary)?
    primary    := number | coordinate | parameter | call | '(' expression ')'
    call       := function '(' expression (',' expression)* ')'

Coordinates are written x1..xp (1-based). Parameters are named constants
bound when parsing. Evaluation works on a batch of points, an (n, p) array,
and returns an (n,) array; invalid operations give non-finite values instead
of raising.
"""
from dataclasses import dataclass
import re
import logging

import numpy as np

logger = logging.getLogger(__name__)


class ExpressionError(ValueError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, offset: int, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        hint = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{hint}")


class UnknownIdentifierError(ExpressionError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier '{name}' at offset {offset}")


class ArityError(ExpressionError):
    def __init__(self, name: str, expected: int, got: int, offset: int):
        self.offset = offset
        super().__init__(f"function '{name}' takes {expected} argument(s), got {got} at offset {offset}")


FUNCTIONS = {
    "sqrt": (1, np.sqrt),
    "exp": (1, np.exp),
    "log": (1, np.log),
    "abs": (1, np.abs),
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "pow": (2, np.power),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
}

BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}

_OPERAND_START = ("number", "identifier", "(", "-")


# --- syntax tree ---

@dataclass(frozen=True)
class Number:
    value: float

    def evaluate(self, x):
        return np.full(x.shape[0], self.value)

    def to_source(self):
        return repr(self.value)


@dataclass(frozen=True)
class Coordinate:
    index: int  # 0-based

    def evaluate(self, x):
        return x[:, self.index]

    def to_source(self):
        return f"x{self.index + 1}"


@dataclass(frozen=True)
class Parameter:
    name: str
    value: float

    def evaluate(self, x):
        return np.full(x.shape[0], self.value)

    def to_source(self):
        return self.name


@dataclass(frozen=True)
class Negate:
    operand: object

    def evaluate(self, x):
        return np.negative(self.operand.evaluate(x))

    def to_source(self):
        return f"(-{self.operand.to_source()})"


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: object
    right: object

    def evaluate(self, x):
        return BINARY[self.op](self.left.evaluate(x), self.right.evaluate(x))

    def to_source(self):
        return f"({self.left.to_source()} {self.op} {self.right.to_source()})"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple

    def evaluate(self, x):
        return FUNCTIONS[self.name][1](*(a.evaluate(x) for a in self.args))

    def to_source(self):
        return f"{self.name}({', '.join(a.to_source() for a in self.args)})"


def _coordinates(node) -> set:
    if isinstance(node, Coordinate):
        return {node.index}
    if isinstance(node, Negate):
        return _coordinates(node.operand)
    if isinstance(node, BinaryOp):
        return _coordinates(node.left) | _coordinates(node.right)
    if isinstance(node, Call):
        out = set()
        for arg in node.args:
            out |= _coordinates(arg)
        return out
    return set()


@dataclass(frozen=True)
class Expression:
    source: str
    root: object

    @property
    def coordinates(self) -> frozenset:
        """0-based indices of the coordinates the expression reads."""
        return frozenset(_coordinates(self.root))

    def evaluate(self, x) -> np.ndarray:
        """Evaluates on a batch (n, p) of points, or a single p-vector."""
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        batch = arr[None, :] if single else arr
        with np.errstate(all="ignore"):
            out = np.asarray(self.root.evaluate(batch), dtype=float)
        return out[0] if single else out

    def to_source(self) -> str:
        return self.root.to_source()

    def __str__(self):
        return self.source


# --- tokenizer ---

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<identifier>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # number, identifier, op, end
    text: str
    offset: int


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        match = _TOKEN.match(source, pos)
        if match is None:
            raise ExpressionSyntaxError(f"unexpected character '{source[pos]}'",
                                        _byte_offset(source, pos), _OPERAND_START)
        kind = match.lastgroup
        if kind != "ws":
            text = match.group()
            tokens.append(Token(text if kind == "op" else kind, text, _byte_offset(source, pos)))
        pos = match.end()
    tokens.append(Token("end", "", _byte_offset(source, len(source))))
    return tokens


# --- parser ---

class _Parser:
    def __init__(self, source: str, n_coords: int | None, constants: dict):
        self.tokens = tokenize(source)
        self.pos = 0
        self.n_coords = n_coords
        self.constants = constants

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        if self.current.kind != kind:
            self.fail({kind})
        return self.advance()

    def fail(self, expected):
        tok = self.current
        what = "end of input" if tok.kind == "end" else f"'{tok.text}'"
        raise ExpressionSyntaxError(f"unexpected {what}", tok.offset, expected)

    def parse(self):
        node = self.expression()
        if self.current.kind != "end":
            self.fail({"+", "-", "*", "/", "^", "end of input"})
        return node

    def expression(self):
        node = self.term()
        while self.current.kind in ("+", "-"):
            op = self.advance().kind
            node = BinaryOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.current.kind in ("*", "/"):
            op = self.advance().kind
            node = BinaryOp(op, node, self.unary())
        return node

    def unary(self):
        if self.current.kind == "-":
            self.advance()
            return Negate(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.current.kind == "^":
            self.advance()
            return BinaryOp("^", base, self.unary())
        return base

    def primary(self):
        tok = self.current
        if tok.kind == "number":
            self.advance()
            return Number(float(tok.text))
        if tok.kind == "(":
            self.advance()
            node = self.expression()
            self.expect(")")
            return node
        if tok.kind == "identifier":
            self.advance()
            return self.identifier(tok)
        self.fail(_OPERAND_START)

    def identifier(self, tok: Token):
        name = tok.text
        if name in FUNCTIONS:
            return self.call(tok)
        coord = re.fullmatch(r"x([1-9]\d*)", name)
        if coord:
            index = int(coord.group(1)) - 1
            if self.n_coords is not None and index >= self.n_coords:
                raise UnknownIdentifierError(name, tok.offset)
            return Coordinate(index)
        if name in self.constants:
            return Parameter(name, float(self.constants[name]))
        raise UnknownIdentifierError(name, tok.offset)

    def call(self, tok: Token):
        arity = FUNCTIONS[tok.text][0]
        self.expect("(")
        args = [self.expression()]
        while self.current.kind == ",":
            self.advance()
            args.append(self.expression())
        self.expect(")")
        if len(args) != arity:
            raise ArityError(tok.text, arity, len(args), tok.offset)
        return Call(tok.text, tuple(args))


def parse_expression(source: str, n_coords: int | None = None, constants: dict | None = None) -> Expression:
    """Parses `source`; coordinates beyond `n_coords` and unbound names are rejected."""
    root = _Parser(source, n_coords, dict(constants or {})).parse()
    return Expression(source, root)
