"""Formula parsing, rendering, R1C1 normalization and per-formula metrics."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Union

from .model import (
    MAX_COLUMN,
    MAX_ROW,
    Address,
    CellId,
    ErrorCode,
    Workbook,
    column_index,
    quote_sheet,
)

# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Text:
    value: str


@dataclass(frozen=True)
class Bool:
    value: bool


@dataclass(frozen=True)
class ErrorLit:
    code: str


@dataclass(frozen=True)
class Ref:
    address: Address
    workbook: str | None = None


@dataclass(frozen=True)
class RangeRef:
    start: Address
    end: Address
    workbook: str | None = None


@dataclass(frozen=True)
class NamedRef:
    name: str


@dataclass(frozen=True)
class FuncCall:
    name: str
    args: tuple = ()


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class UnaryOp:
    op: str
    operand: "Node"


Node = Union[Number, Text, Bool, ErrorLit, Ref, RangeRef, NamedRef, FuncCall, BinaryOp, UnaryOp]

COMPARISONS = ("=", "<>", "<", "<=", ">", ">=")
BINARY_PRECEDENCE = {
    **{op: 1 for op in COMPARISONS},
    "&": 2,
    "+": 3,
    "-": 3,
    "*": 4,
    "/": 4,
    "^": 5,
}
_PREFIX_PREC = 6
_POSTFIX_PREC = 7
_ATOM_PREC = 8


def walk(node: Node) -> Iterator[Node]:
    """Pre-order traversal, arguments left to right."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        if isinstance(n, FuncCall):
            stack.extend(reversed(n.args))
        elif isinstance(n, BinaryOp):
            stack.append(n.right)
            stack.append(n.left)
        elif isinstance(n, UnaryOp):
            stack.append(n.operand)


# --------------------------------------------------------------------------
# Lexer
# --------------------------------------------------------------------------


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, text: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.text = text
        self.position = position

    @property
    def context(self) -> str:
        """The formula text with a caret under the failing position."""
        return f"{self.text}\n{' ' * self.position}^"


_NUMBER = re.compile(r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_CELL = re.compile(r"(\$?)([A-Za-z]{1,3})(\$?)([0-9]+)")
_IDENT = re.compile(r"[A-Za-z_\\][A-Za-z0-9_.\\]*")
_ERRORS = sorted((e.value for e in ErrorCode), key=len, reverse=True)
_TWO_CHAR_OPS = ("<>", "<=", ">=")
_ONE_CHAR_OPS = "+-*/^&=<>%"


@dataclass(frozen=True)
class Token:
    kind: str
    value: object
    pos: int


def _ident_char(ch: str) -> bool:
    return ch.isalnum() or ch in "_.\\"


class _Lexer:
    def __init__(self, text: str, start: int):
        self.text = text
        self.i = start
        self.tokens: list[Token] = []

    def error(self, message: str, pos: int | None = None):
        raise FormulaSyntaxError(message, self.text, self.i if pos is None else pos)

    def run(self) -> list[Token]:
        text = self.text
        while True:
            while self.i < len(text) and text[self.i] in " \t\r\n":
                self.i += 1
            if self.i >= len(text):
                self.tokens.append(Token("EOF", None, self.i))
                return self.tokens
            ch = text[self.i]
            start = self.i
            if ch == '"':
                self.tokens.append(Token("STR", self._string(), start))
            elif ch.isdigit() or (ch == "." and text[self.i + 1 : self.i + 2].isdigit()):
                m = _NUMBER.match(text, self.i)
                self.i = m.end()
                self.tokens.append(Token("NUM", float(m.group()), start))
            elif ch == "#":
                for code in _ERRORS:
                    if text.startswith(code, self.i):
                        self.i += len(code)
                        self.tokens.append(Token("ERR", code, start))
                        break
                else:
                    self.error("unknown error literal")
            elif ch == "'":
                book, sheet = self._quoted_prefix()
                self.tokens.append(self._cell_after_prefix(book, sheet, start))
            elif ch == "[":
                book, sheet = self._bracket_prefix()
                self.tokens.append(self._cell_after_prefix(book, sheet, start))
            elif ch == "$" or ch.isalpha() or ch in "_\\":
                self.tokens.append(self._word())
            elif text.startswith(_TWO_CHAR_OPS, self.i):
                self.tokens.append(Token("OP", text[self.i : self.i + 2], start))
                self.i += 2
            elif ch in _ONE_CHAR_OPS:
                self.tokens.append(Token("OP", ch, start))
                self.i += 1
            elif ch in "(),:":
                kind = {"(": "LPAREN", ")": "RPAREN", ",": "COMMA", ":": "COLON"}[ch]
                self.tokens.append(Token(kind, ch, start))
                self.i += 1
            elif ch == "{":
                self.error("array constants are not supported")
            else:
                self.error(f"unexpected character {ch!r}")

    def _string(self) -> str:
        text = self.text
        self.i += 1
        out = []
        while True:
            if self.i >= len(text):
                self.error("unterminated string literal")
            ch = text[self.i]
            if ch == '"':
                if text[self.i + 1 : self.i + 2] == '"':
                    out.append('"')
                    self.i += 2
                    continue
                self.i += 1
                return "".join(out)
            out.append(ch)
            self.i += 1

    def _quoted_prefix(self) -> tuple[str | None, str]:
        text = self.text
        self.i += 1
        chars = []
        while True:
            if self.i >= len(text):
                self.error("unterminated quoted sheet name")
            ch = text[self.i]
            if ch == "'":
                if text[self.i + 1 : self.i + 2] == "'":
                    chars.append("'")
                    self.i += 2
                    continue
                self.i += 1
                break
            chars.append(ch)
            self.i += 1
        if text[self.i : self.i + 1] != "!":
            self.error("expected '!' after quoted sheet name")
        self.i += 1
        body = "".join(chars)
        book = None
        if "[" in body and "]" in body:
            lb, rb = body.index("["), body.index("]")
            book = body[:lb] + body[lb + 1 : rb]
            body = body[rb + 1 :]
        if not body:
            self.error("empty sheet name")
        return book, body

    def _bracket_prefix(self) -> tuple[str, str]:
        text = self.text
        end = text.find("]", self.i)
        if end < 0:
            self.error("unterminated external workbook name")
        book = text[self.i + 1 : end]
        if not book:
            self.error("empty external workbook name")
        self.i = end + 1
        m = _IDENT.match(text, self.i)
        if not m or text[m.end() : m.end() + 1] != "!":
            self.error("expected Sheet! after external workbook name")
        self.i = m.end() + 1
        return book, m.group()

    def _cell_match(self, pos: int):
        m = _CELL.match(self.text, pos)
        if not m:
            return None
        nxt = self.text[m.end() : m.end() + 1]
        if nxt and (_ident_char(nxt) or nxt in "(!$"):
            return None
        if m.group(4).startswith("0"):
            return None
        col = column_index(m.group(2))
        row = int(m.group(4))
        if col > MAX_COLUMN or row > MAX_ROW:
            return None
        return m, Address(col, row, bool(m.group(1)), bool(m.group(3)))

    def _cell_after_prefix(self, book: str | None, sheet: str, start: int) -> Token:
        hit = self._cell_match(self.i)
        if hit is None:
            self.error("expected a cell reference after sheet prefix")
        m, addr = hit
        self.i = m.end()
        return Token("REF", (Address(addr.col, addr.row, addr.col_absolute, addr.row_absolute, sheet), book), start)

    def _word(self) -> Token:
        start = self.i
        hit = self._cell_match(self.i)
        if hit is not None:
            m, addr = hit
            self.i = m.end()
            return Token("REF", (addr, None), start)
        m = _IDENT.match(self.text, self.i)
        if not m:
            self.error("unexpected character '$'")
        word = m.group()
        self.i = m.end()
        j = self.i
        while j < len(self.text) and self.text[j] in " \t":
            j += 1
        nxt = self.text[j : j + 1]
        if nxt == "(":
            self.i = j
            return Token("FUNC", word.upper(), start)
        if self.text[self.i : self.i + 1] == "!":
            self.i += 1
            return self._cell_after_prefix(None, word, start)
        if word.upper() in ("TRUE", "FALSE"):
            return Token("BOOL", word.upper() == "TRUE", start)
        return Token("NAME", word, start)


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, tokens: list[Token]):
        self.text = text
        self.tokens = tokens
        self.k = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.k]

    def advance(self) -> Token:
        t = self.tokens[self.k]
        self.k += 1
        return t

    def error(self, message: str, tok: Token | None = None):
        raise FormulaSyntaxError(message, self.text, (tok or self.tok).pos)

    def is_op(self, *ops: str) -> bool:
        return self.tok.kind == "OP" and self.tok.value in ops

    def binary(self, level: int) -> Node:
        if level > 5:
            return self.unary()
        ops = [op for op, p in BINARY_PRECEDENCE.items() if p == level]
        left = self.binary(level + 1)
        while self.is_op(*ops):
            op = self.advance().value
            left = BinaryOp(op, left, self.binary(level + 1))
        return left

    def unary(self) -> Node:
        if self.is_op("+", "-"):
            op = self.advance().value
            return UnaryOp(op, self.unary())
        node = self.primary()
        while self.is_op("%"):
            self.advance()
            node = UnaryOp("%", node)
        return node

    def primary(self) -> Node:
        tok = self.advance()
        kind = tok.kind
        if kind == "NUM":
            return Number(tok.value)
        if kind == "STR":
            return Text(tok.value)
        if kind == "BOOL":
            return Bool(tok.value)
        if kind == "ERR":
            return ErrorLit(tok.value)
        if kind == "NAME":
            if self.tok.kind == "COLON":
                self.error("ranges must join two cell references")
            return NamedRef(tok.value)
        if kind == "REF":
            addr, book = tok.value
            if self.tok.kind != "COLON":
                return Ref(addr, book)
            self.advance()
            end_tok = self.advance()
            if end_tok.kind != "REF":
                self.error("expected a cell reference after ':'", end_tok)
            end, end_book = end_tok.value
            if end_book not in (None, book) or end.sheet not in (None, addr.sheet):
                self.error("3-D and cross-sheet ranges are not supported", end_tok)
            end = Address(end.col, end.row, end.col_absolute, end.row_absolute, addr.sheet)
            return RangeRef(addr, end, book)
        if kind == "FUNC":
            return self.call(tok)
        if kind == "LPAREN":
            node = self.binary(1)
            if self.tok.kind != "RPAREN":
                self.error("unbalanced parenthesis: expected ')'")
            self.advance()
            return node
        if kind == "EOF":
            self.error("unexpected end of formula", tok)
        if kind == "RPAREN":
            self.error("unbalanced parenthesis", tok)
        self.error(f"unexpected token {tok.value!r}", tok)

    def call(self, name_tok: Token) -> Node:
        open_tok = self.advance()
        assert open_tok.kind == "LPAREN"
        args = []
        if self.tok.kind == "RPAREN":
            self.advance()
            return FuncCall(name_tok.value, ())
        while True:
            if self.tok.kind in ("COMMA", "RPAREN"):
                self.error("empty argument")
            args.append(self.binary(1))
            if self.tok.kind == "COMMA":
                self.advance()
                continue
            if self.tok.kind == "RPAREN":
                self.advance()
                return FuncCall(name_tok.value, tuple(args))
            if self.tok.kind == "EOF":
                self.error(f"unbalanced parenthesis: {name_tok.value}( is never closed")
            self.error(f"unexpected token {self.tok.value!r} in argument list")


def parse_formula(text: str) -> Node:
    """Parse formula text (leading ``=`` required) into an AST."""
    if not text.startswith("="):
        raise FormulaSyntaxError("formula must begin with '='", text, 0)
    tokens = _Lexer(text, 1).run()
    parser = _Parser(text, tokens)
    if parser.tok.kind == "EOF":
        raise FormulaSyntaxError("empty formula", text, 1)
    node = parser.binary(1)
    if parser.tok.kind != "EOF":
        if parser.tok.kind == "RPAREN":
            parser.error("unbalanced parenthesis")
        parser.error(f"unexpected token {parser.tok.value!r}")
    return node


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------


def format_number(value: float) -> str:
    """Shortest text that reads back to the same float."""
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value).upper()


def _prefix(sheet: str | None, book: str | None) -> str:
    if book is None:
        return "" if sheet is None else quote_sheet(sheet) + "!"
    cut = max(book.rfind("\\"), book.rfind("/"))
    folder, base = book[: cut + 1], book[cut + 1 :]
    inner = f"{folder}[{base}]{sheet}"
    if folder or quote_sheet(sheet) != sheet or not re.fullmatch(r"[\w.\-]+", base):
        return "'" + inner.replace("'", "''") + "'!"
    return inner + "!"


def _a1(addr: Address) -> str:
    return addr.render(with_sheet=False)


def _precedence(node: Node) -> int:
    if isinstance(node, BinaryOp):
        return BINARY_PRECEDENCE[node.op]
    if isinstance(node, UnaryOp):
        return _POSTFIX_PREC if node.op == "%" else _PREFIX_PREC
    return _ATOM_PREC


def _render(node: Node, cell) -> str:
    if isinstance(node, Number):
        return format_number(node.value)
    if isinstance(node, Text):
        return '"' + node.value.replace('"', '""') + '"'
    if isinstance(node, Bool):
        return "TRUE" if node.value else "FALSE"
    if isinstance(node, ErrorLit):
        return node.code
    if isinstance(node, Ref):
        return _prefix(node.address.sheet, node.workbook) + cell(node.address)
    if isinstance(node, RangeRef):
        return _prefix(node.start.sheet, node.workbook) + cell(node.start) + ":" + cell(node.end)
    if isinstance(node, NamedRef):
        return node.name
    if isinstance(node, FuncCall):
        return node.name + "(" + ",".join(_render(a, cell) for a in node.args) + ")"
    if isinstance(node, UnaryOp):
        inner = _render(node.operand, cell)
        if node.op == "%":
            if _precedence(node.operand) < _POSTFIX_PREC:
                inner = f"({inner})"
            return inner + "%"
        if isinstance(node.operand, BinaryOp):
            inner = f"({inner})"
        return node.op + inner
    if isinstance(node, BinaryOp):
        prec = BINARY_PRECEDENCE[node.op]
        left = _render(node.left, cell)
        right = _render(node.right, cell)
        if _precedence(node.left) < prec:
            left = f"({left})"
        if _precedence(node.right) <= prec:
            right = f"({right})"
        return left + node.op + right
    raise TypeError(f"not a formula node: {node!r}")


def render_formula(node: Node) -> str:
    """A1-style text, ``=`` included, minimal parentheses, no whitespace."""
    return "=" + _render(node, _a1)


# --------------------------------------------------------------------------
# R1C1 normalization
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizedFormula:
    r1c1: str
    origin: Address


def _r1c1_part(letter: str, absolute: bool, index: int, origin: int) -> str:
    if absolute:
        return f"{letter}{index}"
    delta = index - origin
    return letter if delta == 0 else f"{letter}[{delta}]"


def to_r1c1(ast: Node, origin: Address) -> NormalizedFormula:
    def cell(addr: Address) -> str:
        return _r1c1_part("R", addr.row_absolute, addr.row, origin.row) + _r1c1_part(
            "C", addr.col_absolute, addr.col, origin.col
        )

    return NormalizedFormula("=" + _render(ast, cell), origin)


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FormulaMetrics:
    length: int
    func_count: int
    operator_count: int
    max_nesting_depth: int
    max_if_depth: int
    numeric_literals: tuple[float, ...]
    function_names: frozenset[str]
    has_external_ref: bool
    ref_list: tuple[Node, ...]

    @property
    def complexity(self) -> int:
        return self.func_count + self.operator_count + self.max_nesting_depth


def _call_depth(node: Node, only: str | None = None) -> int:
    children: tuple = ()
    if isinstance(node, FuncCall):
        children = node.args
    elif isinstance(node, BinaryOp):
        children = (node.left, node.right)
    elif isinstance(node, UnaryOp):
        children = (node.operand,)
    below = max((_call_depth(c, only) for c in children), default=0)
    counts = isinstance(node, FuncCall) and (only is None or node.name == only)
    return below + 1 if counts else below


def max_if_depth(ast: Node) -> int:
    return _call_depth(ast, "IF")


def formula_metrics(ast: Node, text: str) -> FormulaMetrics:
    nodes = list(walk(ast))
    refs = tuple(n for n in nodes if isinstance(n, (Ref, RangeRef)))
    return FormulaMetrics(
        length=len(text) - 1,
        func_count=sum(isinstance(n, FuncCall) for n in nodes),
        operator_count=sum(isinstance(n, (BinaryOp, UnaryOp)) for n in nodes),
        max_nesting_depth=_call_depth(ast),
        max_if_depth=max_if_depth(ast),
        numeric_literals=tuple(n.value for n in nodes if isinstance(n, Number)),
        function_names=frozenset(n.name for n in nodes if isinstance(n, FuncCall)),
        has_external_ref=any(r.workbook is not None for r in refs),
        ref_list=refs,
    )


# --------------------------------------------------------------------------
# Workbook-wide analysis
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ParsedFormula:
    cell: CellId
    text: str
    ast: Node
    is_array: bool = False

    @cached_property
    def metrics(self) -> FormulaMetrics:
        return formula_metrics(self.ast, self.text)

    @cached_property
    def r1c1(self) -> str:
        return to_r1c1(self.ast, Address(self.cell.col, self.cell.row)).r1c1


@dataclass(frozen=True)
class ParseFailure:
    cell: CellId
    text: str
    message: str
    position: int


@dataclass(frozen=True)
class UniqueFormula:
    sheet: str
    first_found: Address
    r1c1: str
    count: int
    formula: str
    is_array: bool = False

    def to_dict(self) -> dict:
        return {
            "sheet": self.sheet,
            "first_found": self.first_found.render(with_sheet=False),
            "r1c1": self.r1c1,
            "count": self.count,
            "formula": self.formula,
            "array": self.is_array,
        }

    @classmethod
    def from_dict(cls, d: dict) -> UniqueFormula:
        from .model import parse_address

        return cls(d["sheet"], parse_address(d["first_found"]), d["r1c1"], d["count"],
                   d["formula"], d["array"])


@dataclass
class FormulaAnalysis:
    """Every formula in a workbook, parsed once."""

    parsed: dict[CellId, ParsedFormula] = field(default_factory=dict)
    failures: list[ParseFailure] = field(default_factory=list)
    workbook_wide: bool = False

    def unique(self) -> list[UniqueFormula]:
        groups: dict[tuple, list[ParsedFormula]] = {}
        for p in self.parsed.values():
            key = (p.r1c1,) if self.workbook_wide else (p.cell.sheet, p.r1c1)
            groups.setdefault(key, []).append(p)
        entries = []
        for members in groups.values():
            first = members[0]  # parsed is filled in sheet order, row-major
            entries.append(
                (
                    first.cell,
                    UniqueFormula(
                        sheet=first.cell.sheet,
                        first_found=Address(first.cell.col, first.cell.row, True, True),
                        r1c1=first.r1c1,
                        count=len(members),
                        formula=first.text,
                        is_array=first.is_array,
                    ),
                )
            )
        order = {}
        for cid in self.parsed:
            order.setdefault(cid.sheet, len(order))
        entries.sort(key=lambda e: (order[e[0].sheet], e[0].row, e[0].col))
        return [u for _, u in entries]


def analyze_formulas(wb: Workbook, workbook_wide: bool = False) -> FormulaAnalysis:
    """Parse every formula cell; failures are collected, never raised."""
    out = FormulaAnalysis(workbook_wide=workbook_wide)
    for cid, cell in wb.formula_cells():
        try:
            ast = parse_formula(cell.formula)
        except FormulaSyntaxError as exc:
            out.failures.append(ParseFailure(cid, cell.formula, str(exc), exc.position))
            continue
        out.parsed[cid] = ParsedFormula(cid, cell.formula, ast, cell.array_range is not None)
    return out


def unique_formulas(wb: Workbook, workbook_wide: bool = False) -> list[UniqueFormula]:
    return analyze_formulas(wb, workbook_wide).unique()
