"""Formula interpreter for a supported function subset, with dynamic-reference tracing.

Cells are computed in topological order over static edges.  Whenever a lookup,
OFFSET, INDIRECT, INDEX or MATCH resolves to a concrete cell, the read is
recorded as a dynamic edge so precedent trees can show the cell actually used.
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Union

from .formula import (
    Bool,
    BinaryOp,
    ErrorLit,
    FormulaAnalysis,
    FuncCall,
    NamedRef,
    Number,
    RangeRef,
    Ref,
    Text,
    UnaryOp,
    parse_formula,
    FormulaSyntaxError,
)
from .graph import (
    CellNotFoundError,
    DepGraph,
    TreeNode,
    find_cycles,
    merge_dynamic,
    precedents,
    resolve_name,
)
from .model import (
    MAX_COLUMN,
    MAX_ROW,
    AddressError,
    CellId,
    CellRange,
    ErrorCode,
    Workbook,
    looks_numeric,
    parse_range,
)

Value = Union[float, str, bool, None, ErrorCode]

SUPPORTED_FUNCTIONS = frozenset({
    "SUM", "MIN", "MAX", "COUNT", "COUNTA", "ABS", "ROUND", "IF", "AND", "OR", "NOT",
    "SUMIF", "VLOOKUP", "HLOOKUP", "INDEX", "MATCH", "OFFSET", "INDIRECT",
})
DYNAMIC_CONSTRUCTS = ("INDIRECT", "OFFSET", "VLOOKUP", "HLOOKUP", "INDEX", "MATCH")

_ARITY = {
    "SUM": (1, 255), "MIN": (1, 255), "MAX": (1, 255), "COUNT": (1, 255), "COUNTA": (1, 255),
    "ABS": (1, 1), "ROUND": (2, 2), "IF": (1, 3), "AND": (1, 255), "OR": (1, 255), "NOT": (1, 1),
    "SUMIF": (2, 3), "VLOOKUP": (3, 4), "HLOOKUP": (3, 4), "INDEX": (2, 3), "MATCH": (2, 3),
    "OFFSET": (3, 5), "INDIRECT": (1, 2),
}


class _Unsupported(Exception):
    pass


@dataclass(frozen=True)
class Reference:
    """A rectangular area produced during evaluation.  ``via`` tags dynamic origins."""

    sheet: str
    top: int
    left: int
    bottom: int
    right: int
    book: str | None = None
    via: str | None = None

    @property
    def height(self) -> int:
        return self.bottom - self.top + 1

    @property
    def width(self) -> int:
        return self.right - self.left + 1


def format_value(v: Value) -> str:
    """Text form of a value, the way concatenation sees it."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, float):
        if v == int(v) and abs(v) < 1e15:
            return str(int(v))
        text = "%.15g" % v
        return text.upper().replace("E+0", "E+").replace("E-0", "E-")
    if isinstance(v, ErrorCode):
        return v.value
    return v


def round_half_away(x: float, digits: int) -> float:
    """Spreadsheet ROUND: ties go away from zero, digits may be negative."""
    q = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


# --------------------------------------------------------------------------
# Scalar semantics
# --------------------------------------------------------------------------

def _to_number(v: Value) -> float | ErrorCode:
    if isinstance(v, ErrorCode):
        return v
    if v is None:
        return 0.0
    if isinstance(v, bool):
        return 1.0 if v else 0.0
    if isinstance(v, float):
        return v
    if looks_numeric(v):
        return float(v.strip())
    return ErrorCode.VALUE


def _to_bool(v: Value) -> bool | ErrorCode:
    if isinstance(v, ErrorCode):
        return v
    if v is None:
        return False
    if isinstance(v, bool):
        return v
    if isinstance(v, float):
        return v != 0
    if v.upper() in ("TRUE", "FALSE"):
        return v.upper() == "TRUE"
    return ErrorCode.VALUE


def _type_rank(v: Value) -> int:
    if isinstance(v, float):
        return 0
    if isinstance(v, str):
        return 1
    return 2  # bool


def compare(a: Value, b: Value) -> int:
    """Three-way comparison: numbers < text < booleans; text is case-insensitive."""
    if a is None:
        a = 0.0 if isinstance(b, float) or b is None else "" if isinstance(b, str) else False
    if b is None:
        b = 0.0 if isinstance(a, float) else "" if isinstance(a, str) else False
    ra, rb = _type_rank(a), _type_rank(b)
    if ra != rb:
        return -1 if ra < rb else 1
    if isinstance(a, str):
        a, b = a.lower(), b.lower()
    return (a > b) - (a < b)


def _finite(x: float) -> float | ErrorCode:
    return x if math.isfinite(x) else ErrorCode.NUM


def binary_op(op: str, a: Value, b: Value) -> Value:
    """One operator on two scalars; the left error wins when both are errors."""
    if isinstance(a, ErrorCode):
        return a
    if isinstance(b, ErrorCode):
        return b
    if op == "&":
        return format_value(a) + format_value(b)
    if op in ("=", "<>", "<", "<=", ">", ">="):
        c = compare(a, b)
        return {"=": c == 0, "<>": c != 0, "<": c < 0, "<=": c <= 0, ">": c > 0, ">=": c >= 0}[op]
    x, y = _to_number(a), _to_number(b)
    if isinstance(x, ErrorCode):
        return x
    if isinstance(y, ErrorCode):
        return y
    if op == "+":
        return _finite(x + y)
    if op == "-":
        return _finite(x - y)
    if op == "*":
        return _finite(x * y)
    if op == "/":
        return ErrorCode.DIV0 if y == 0 else _finite(x / y)
    if op == "^":
        if x == 0 and y == 0:
            return ErrorCode.NUM
        if x == 0 and y < 0:
            return ErrorCode.DIV0
        try:
            r = x ** y
        except OverflowError:
            return ErrorCode.NUM
        if isinstance(r, complex):
            return ErrorCode.NUM
        return _finite(r)
    raise ValueError(f"unknown operator {op!r}")


def unary_op(op: str, a: Value) -> Value:
    x = _to_number(a)
    if isinstance(x, ErrorCode):
        return x
    if op == "-":
        return -x
    if op == "%":
        return x / 100
    return x


_CRITERION = re.compile(r"(>=|<=|<>|>|<|=)?(.*)\Z", re.S)


def _criterion(crit: Value):
    """Predicate for SUMIF criteria: a bare value (equality) or an operator-prefixed string."""
    if isinstance(crit, str):
        op, rest = _CRITERION.match(crit).groups()
        op = op or "="
        operand: Value = float(rest.strip()) if looks_numeric(rest) else rest
        if rest == "" and op in ("=", "<>"):
            operand = None
    else:
        op, operand = "=", crit

    def test(v: Value) -> bool:
        if isinstance(v, ErrorCode):
            return False
        if operand is None:
            blank = v is None or v == ""
            return blank if op == "=" else not blank
        if v is None:
            return op == "<>"
        if isinstance(operand, float) and isinstance(v, str) and looks_numeric(v):
            v = float(v)
        if _type_rank(v) != _type_rank(operand):
            return op == "<>"
        c = compare(v, operand)
        return {"=": c == 0, "<>": c != 0, "<": c < 0, "<=": c <= 0, ">": c > 0, ">=": c >= 0}[op]

    return test


# --------------------------------------------------------------------------
# Results
# --------------------------------------------------------------------------

@dataclass
class EvalResult:
    values: dict[CellId, Value] = field(default_factory=dict)
    dynamic_edges: list[tuple[CellId, CellId, str]] = field(default_factory=list)
    unevaluated: dict[CellId, str] = field(default_factory=dict)
    passes: int = 1

    def value(self, cell: CellId) -> Value:
        if cell in self.unevaluated:
            return ErrorCode.NAME
        return self.values.get(cell)

    def errors(self) -> list[tuple[CellId, ErrorCode]]:
        return [(c, v) for c, v in self.values.items() if isinstance(v, ErrorCode)]


class _Evaluator:
    def __init__(self, wb: Workbook, analysis: FormulaAnalysis):
        self.wb = wb
        self.analysis = analysis
        self.values: dict[CellId, Value] = {}
        self.computed: set[CellId] = set()
        self.circ: set[CellId] = set()
        self.unevaluated: dict[CellId, str] = {}
        self.dynamic: dict[tuple[CellId, CellId], str] = {}
        self.pending: set[CellId] = set()
        self.current: CellId | None = None

    # -- cell access -------------------------------------------------------

    def read(self, sheet: str, row: int, col: int, via: str | None = None) -> Value:
        ws = self.wb.sheet(sheet)
        if ws is None:
            return ErrorCode.REF
        cid = CellId(ws.name, row, col)
        if via is not None and self.current is not None:
            self.dynamic.setdefault((cid, self.current), via)
        cell = ws.cells.get((row, col))
        if cell is None:
            return None
        if not cell.is_formula:
            return cell.value
        if cid in self.circ:
            return ErrorCode.CIRC
        if cid in self.unevaluated:
            return ErrorCode.NAME
        if cid not in self.computed and self.current is not None:
            self.pending.add(self.current)
        return self.values.get(cid)

    def read_ref(self, ref: Reference, r: int, c: int) -> Value:
        if ref.book is not None:
            return ErrorCode.REF
        return self.read(ref.sheet, r, c, ref.via)

    def grid(self, v) -> list[list[Value]]:
        if isinstance(v, Reference):
            return [[self.read_ref(v, r, c) for c in range(v.left, v.right + 1)]
                    for r in range(v.top, v.bottom + 1)]
        if isinstance(v, list):
            return v
        return [[v]]

    def scalar(self, v) -> Value:
        if isinstance(v, Reference):
            if v.height == 1 and v.width == 1:
                return self.read_ref(v, v.top, v.left)
            return ErrorCode.VALUE
        if isinstance(v, list):
            return v[0][0]
        return v

    def _flat(self, v):
        """(value, came_from_area) pairs for aggregate functions."""
        if isinstance(v, (Reference, list)):
            for row in self.grid(v):
                for x in row:
                    yield x, True
        else:
            yield v, False

    # -- node evaluation ---------------------------------------------------

    def make_ref(self, node, host: CellId, via: str | None = None):
        if isinstance(node, Ref):
            a, b = node.address, node.address
        else:
            a, b = node.start, node.end
        sheet = a.sheet or host.sheet
        if node.workbook is None:
            ws = self.wb.sheet(sheet)
            if ws is None:
                return ErrorCode.REF
            sheet = ws.name
        area = CellRange.from_corners(a, b)
        return Reference(sheet, area.top, area.left, area.bottom, area.right, node.workbook, via)

    def eval(self, node, host: CellId):
        if isinstance(node, Number):
            return node.value
        if isinstance(node, Text):
            return node.value
        if isinstance(node, Bool):
            return node.value
        if isinstance(node, ErrorLit):
            return ErrorCode(node.code)
        if isinstance(node, (Ref, RangeRef)):
            return self.make_ref(node, host)
        if isinstance(node, NamedRef):
            target = resolve_name(self.wb, node.name)
            if target is not None:
                return self.make_ref(target, host)
            text = self.wb.defined_name(node.name)
            if text is None:
                return ErrorCode.NAME
            try:
                expr = parse_formula(text if text.startswith("=") else "=" + text)
            except FormulaSyntaxError:
                return ErrorCode.NAME
            return self.eval(expr, host)
        if isinstance(node, UnaryOp):
            v = self.eval(node.operand, host)
            return self.lift1(lambda x: unary_op(node.op, x), v)
        if isinstance(node, BinaryOp):
            left = self.eval(node.left, host)
            right = self.eval(node.right, host)
            return self.lift2(lambda x, y: binary_op(node.op, x, y), left, right)
        if isinstance(node, FuncCall):
            return self.call(node, host)
        raise TypeError(node)

    def _is_area(self, v) -> bool:
        return isinstance(v, list) or (isinstance(v, Reference) and (v.height > 1 or v.width > 1))

    def lift1(self, fn, v):
        if self._is_area(v):
            return [[fn(x) for x in row] for row in self.grid(v)]
        return fn(self.scalar(v))

    def lift2(self, fn, a, b):
        if not (self._is_area(a) or self._is_area(b)):
            return fn(self.scalar(a), self.scalar(b))
        ga, gb = self.grid(a), self.grid(b)
        h = max(len(ga), len(gb))
        w = max(len(ga[0]), len(gb[0]))

        def at(g, r, c):
            rr = 0 if len(g) == 1 else r
            cc = 0 if len(g[0]) == 1 else c
            if rr >= len(g) or cc >= len(g[0]):
                return ErrorCode.NA
            return g[rr][cc]

        return [[fn(at(ga, r, c), at(gb, r, c)) for c in range(w)] for r in range(h)]

    # -- functions ---------------------------------------------------------

    def call(self, node: FuncCall, host: CellId):
        name = node.name
        if name not in SUPPORTED_FUNCTIONS:
            raise _Unsupported(name)
        lo, hi = _ARITY[name]
        if not lo <= len(node.args) <= hi:
            return ErrorCode.VALUE
        if name == "IF":
            cond = _to_bool(self.scalar(self.eval(node.args[0], host)))
            if isinstance(cond, ErrorCode):
                return cond
            if cond:
                return self.eval(node.args[1], host) if len(node.args) > 1 else True
            return self.eval(node.args[2], host) if len(node.args) > 2 else False
        args = [self.eval(a, host) for a in node.args]
        return getattr(self, "fn_" + name.lower())(args, host)

    def _numbers(self, args, *, errors_propagate=True):
        out = []
        for arg in args:
            for v, from_area in self._flat(arg):
                if isinstance(v, ErrorCode):
                    if errors_propagate:
                        return v
                    continue
                if from_area:
                    if isinstance(v, float):
                        out.append(v)
                    continue
                n = _to_number(v)
                if isinstance(n, ErrorCode):
                    return n
                out.append(n)
        return out

    def fn_sum(self, args, host):
        nums = self._numbers(args)
        return nums if isinstance(nums, ErrorCode) else _finite(math.fsum(nums))

    def fn_min(self, args, host):
        nums = self._numbers(args)
        return nums if isinstance(nums, ErrorCode) else (min(nums) if nums else 0.0)

    def fn_max(self, args, host):
        nums = self._numbers(args)
        return nums if isinstance(nums, ErrorCode) else (max(nums) if nums else 0.0)

    def fn_count(self, args, host):
        n = 0
        for arg in args:
            for v, from_area in self._flat(arg):
                if isinstance(v, float):
                    n += 1
                elif not from_area and (isinstance(v, bool) or (isinstance(v, str) and looks_numeric(v))):
                    n += 1
        return float(n)

    def fn_counta(self, args, host):
        return float(sum(1 for arg in args for v, _ in self._flat(arg) if v is not None))

    def fn_abs(self, args, host):
        def absolute(x):
            n = _to_number(x)
            return n if isinstance(n, ErrorCode) else abs(n)

        return self.lift1(absolute, args[0])

    def fn_round(self, args, host):
        x = _to_number(self.scalar(args[0]))
        d = _to_number(self.scalar(args[1]))
        if isinstance(x, ErrorCode):
            return x
        if isinstance(d, ErrorCode):
            return d
        return round_half_away(x, int(d))

    def _logical(self, args):
        seen = []
        for arg in args:
            for v, from_area in self._flat(arg):
                if isinstance(v, ErrorCode):
                    return v
                if from_area and not isinstance(v, (bool, float)):
                    continue
                b = _to_bool(v)
                if isinstance(b, ErrorCode):
                    return b
                seen.append(b)
        return seen if seen else ErrorCode.VALUE

    def fn_and(self, args, host):
        seen = self._logical(args)
        return seen if isinstance(seen, ErrorCode) else all(seen)

    def fn_or(self, args, host):
        seen = self._logical(args)
        return seen if isinstance(seen, ErrorCode) else any(seen)

    def fn_not(self, args, host):
        b = _to_bool(self.scalar(args[0]))
        return b if isinstance(b, ErrorCode) else not b

    def fn_sumif(self, args, host):
        area = args[0]
        if not isinstance(area, Reference):
            return ErrorCode.VALUE
        crit = self.scalar(args[1])
        if isinstance(crit, ErrorCode):
            return crit
        test = _criterion(crit)
        target = area
        if len(args) == 3:
            if not isinstance(args[2], Reference):
                return ErrorCode.VALUE
            s = args[2]
            target = Reference(s.sheet, s.top, s.left, s.top + area.height - 1,
                               s.left + area.width - 1, s.book, s.via)
        total = []
        for r in range(area.height):
            for c in range(area.width):
                if test(self.read_ref(area, area.top + r, area.left + c)):
                    v = self.read_ref(target, target.top + r, target.left + c)
                    if isinstance(v, ErrorCode):
                        return v
                    if isinstance(v, float):
                        total.append(v)
        return _finite(math.fsum(total))

    def _lookup_index(self, key: Value, vector: list[Value], approximate: bool) -> int | None:
        if approximate:
            best = None
            for i, v in enumerate(vector):
                if v is None or _type_rank(v) != _type_rank(key) or isinstance(v, ErrorCode):
                    continue
                if compare(v, key) > 0:
                    break
                best = i
            return best
        for i, v in enumerate(vector):
            if v is None or isinstance(v, ErrorCode):
                continue
            if _type_rank(v) == _type_rank(key) and compare(v, key) == 0:
                return i
        return None

    def _lookup(self, args, host, vertical: bool):
        name = "VLOOKUP" if vertical else "HLOOKUP"
        key = self.scalar(args[0])
        if isinstance(key, ErrorCode):
            return key
        if key is None:
            return ErrorCode.NA
        table = args[1]
        if not isinstance(table, Reference):
            return ErrorCode.VALUE
        idx = _to_number(self.scalar(args[2]))
        if isinstance(idx, ErrorCode):
            return idx
        idx = int(idx)
        approximate = True
        if len(args) == 4:
            approximate = _to_bool(self.scalar(args[3]))
            if isinstance(approximate, ErrorCode):
                return approximate
        if idx < 1:
            return ErrorCode.VALUE
        if idx > (table.width if vertical else table.height):
            return ErrorCode.REF
        if vertical:
            vector = [self.read_ref(table, r, table.left) for r in range(table.top, table.bottom + 1)]
        else:
            vector = [self.read_ref(table, table.top, c) for c in range(table.left, table.right + 1)]
        hit = self._lookup_index(key, vector, approximate)
        if hit is None:
            return ErrorCode.NA
        hit_ref = Reference(table.sheet, table.top, table.left, table.bottom, table.right,
                            table.book, name)
        if vertical:
            return self.read_ref(hit_ref, table.top + hit, table.left + idx - 1)
        return self.read_ref(hit_ref, table.top + idx - 1, table.left + hit)

    def fn_vlookup(self, args, host):
        return self._lookup(args, host, True)

    def fn_hlookup(self, args, host):
        return self._lookup(args, host, False)

    def fn_match(self, args, host):
        key = self.scalar(args[0])
        if isinstance(key, ErrorCode):
            return key
        area = args[1]
        if not isinstance(area, Reference):
            return ErrorCode.NA
        mode = 1.0
        if len(args) == 3:
            mode = _to_number(self.scalar(args[2]))
            if isinstance(mode, ErrorCode):
                return mode
        if mode not in (0, 1):
            return ErrorCode.VALUE
        if area.height != 1 and area.width != 1:
            return ErrorCode.NA
        cells = [(r, c) for r in range(area.top, area.bottom + 1)
                 for c in range(area.left, area.right + 1)]
        vector = [self.read_ref(area, r, c) for r, c in cells]
        hit = self._lookup_index(key, vector, mode == 1)
        if hit is None:
            return ErrorCode.NA
        if area.book is None:
            self.read(area.sheet, *cells[hit], via="MATCH")
        return float(hit + 1)

    def fn_index(self, args, host):
        area = args[0]
        nums = []
        for a in args[1:]:
            n = _to_number(self.scalar(a))
            if isinstance(n, ErrorCode):
                return n
            nums.append(int(n))
        if isinstance(area, list):
            r = nums[0] if len(nums) > 0 else 1
            c = nums[1] if len(nums) > 1 else 1
            if len(area) == 1 and len(nums) == 1:
                r, c = 1, nums[0]
            if not (1 <= r <= len(area) and 1 <= c <= len(area[0])):
                return ErrorCode.REF
            return area[r - 1][c - 1]
        if not isinstance(area, Reference):
            return ErrorCode.VALUE
        if len(nums) == 1:
            r, c = (nums[0], 0) if area.width == 1 else (1, nums[0]) if area.height == 1 else (nums[0], 0)
        else:
            r, c = nums
        if r < 0 or c < 0 or r > area.height or c > area.width:
            return ErrorCode.REF
        top, bottom = (area.top, area.bottom) if r == 0 else (area.top + r - 1,) * 2
        left, right = (area.left, area.right) if c == 0 else (area.left + c - 1,) * 2
        return Reference(area.sheet, top, left, bottom, right, area.book, "INDEX")

    def fn_offset(self, args, host):
        base = args[0]
        if not isinstance(base, Reference):
            return ErrorCode.VALUE
        nums = []
        for a in args[1:]:
            n = _to_number(self.scalar(a))
            if isinstance(n, ErrorCode):
                return n
            nums.append(int(n))
        dr, dc = nums[0], nums[1]
        h = nums[2] if len(nums) > 2 else base.height
        w = nums[3] if len(nums) > 3 else base.width
        if h <= 0 or w <= 0:
            return ErrorCode.REF
        top, left = base.top + dr, base.left + dc
        bottom, right = top + h - 1, left + w - 1
        if top < 1 or left < 1 or bottom > MAX_ROW or right > MAX_COLUMN:
            return ErrorCode.REF
        return Reference(base.sheet, top, left, bottom, right, base.book, "OFFSET")

    def fn_indirect(self, args, host):
        text = self.scalar(args[0])
        if isinstance(text, ErrorCode):
            return text
        if len(args) == 2:
            a1 = _to_bool(self.scalar(args[1]))
            if isinstance(a1, ErrorCode):
                return a1
            if not a1:
                return ErrorCode.REF
        if not isinstance(text, str):
            return ErrorCode.REF
        try:
            area = parse_range(text.strip())
        except (AddressError, ValueError):
            target = resolve_name(self.wb, text.strip())
            if target is None:
                return ErrorCode.REF
            ref = self.make_ref(target, host)
            if isinstance(ref, ErrorCode):
                return ref
            return Reference(ref.sheet, ref.top, ref.left, ref.bottom, ref.right, ref.book, "INDIRECT")
        ws = self.wb.sheet(area.sheet or host.sheet)
        if ws is None:
            return ErrorCode.REF
        return Reference(ws.name, area.top, area.left, area.bottom, area.right, None, "INDIRECT")

    # -- driver ------------------------------------------------------------

    def evaluate_cell(self, cid: CellId) -> None:
        parsed = self.analysis.parsed[cid]
        self.current = cid
        try:
            result = self.eval(parsed.ast, cid)
            if isinstance(result, Reference):
                if result.height == 1 and result.width == 1 or parsed.is_array:
                    result = self.read_ref(result, result.top, result.left)
                else:
                    result = ErrorCode.VALUE
            elif isinstance(result, list):
                result = result[0][0]
            if result is None:
                result = 0.0
            self.values[cid] = result
        except _Unsupported as exc:
            self.unevaluated[cid] = f"unsupported function {exc.args[0]}"
        except RecursionError:
            self.values[cid] = ErrorCode.NUM
        finally:
            self.current = None
        self.computed.add(cid)

    def run_pass(self, order: list[CellId]) -> None:
        self.computed = set()
        self.pending = set()
        for cid in order:
            if cid in self.circ or cid in self.unevaluated:
                self.computed.add(cid)
                continue
            self.evaluate_cell(cid)


def _static_unsupported(analysis: FormulaAnalysis) -> dict[CellId, str]:
    out = {}
    for cid, p in analysis.parsed.items():
        missing = sorted(p.metrics.function_names - SUPPORTED_FUNCTIONS)
        if missing:
            out[cid] = "unsupported function " + ", ".join(missing)
    for failure in analysis.failures:
        out[failure.cell] = "formula does not parse"
    return out


def _order(g: DepGraph, exclude: set) -> list[CellId]:
    """Kahn's algorithm with a heap so ties break in sheet/row-major order."""
    nodes = [n for n in g.nodes if n not in exclude]
    keep = set(nodes)
    indeg = {n: 0 for n in nodes}
    for n in nodes:
        for d in g.dependents_of(n):
            if d in keep:
                indeg[d] += 1
    heap = [(g.sort_key(n), n) for n in nodes if indeg[n] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        _, n = heapq.heappop(heap)
        out.append(n)
        for d in g.dependents_of(n):
            if d in keep:
                indeg[d] -= 1
                if indeg[d] == 0:
                    heapq.heappush(heap, (g.sort_key(d), d))
    return [n for n in out if n in g.formula_cells]


def _cycle_cells(g: DepGraph) -> set[CellId]:
    return {n for comp in find_cycles(g) for n in comp}


def evaluate_workbook(wb: Workbook, analysis: FormulaAnalysis, g: DepGraph) -> EvalResult:
    ev = _Evaluator(wb, analysis)
    ev.unevaluated = _static_unsupported(analysis)
    cyclic = _cycle_cells(g)
    ev.circ = {c for c in cyclic if c in g.formula_cells and c not in ev.unevaluated}
    for c in ev.circ:
        ev.values[c] = ErrorCode.CIRC
    ev.run_pass(_order(g, cyclic))
    passes = 1
    if ev.pending:
        merged = merge_dynamic(g, [(p, d, k) for (p, d), k in ev.dynamic.items()])
        cyclic2 = _cycle_cells(merged)
        for c in cyclic2 - ev.circ:
            if c in g.formula_cells and c not in ev.unevaluated:
                ev.circ.add(c)
                ev.values[c] = ErrorCode.CIRC
        order = _order(merged, cyclic2)
        ev.run_pass(order)
        passes = 2
        if ev.pending:
            before = dict(ev.values)
            ev.run_pass(order)
            passes = 3
            for c, v in ev.values.items():
                if before.get(c) != v or type(before.get(c)) is not type(v):
                    ev.circ.add(c)
            for c in ev.circ:
                ev.values[c] = ErrorCode.CIRC
    values = {c: v for c, v in ev.values.items() if c not in ev.unevaluated}
    dynamic = sorted(((p, d, k) for (p, d), k in ev.dynamic.items()),
                     key=lambda e: (g.sort_key(e[1]), g.sort_key(e[0]), e[2]))
    return EvalResult(values, dynamic, dict(ev.unevaluated), passes)


def evaluate_expression(wb: Workbook, analysis: FormulaAnalysis, result: EvalResult, ast,
                        host: CellId) -> Value:
    """Evaluate a sub-expression in the context of ``host`` against computed values."""
    ev = _Evaluator(wb, analysis)
    ev.values = dict(result.values)
    ev.computed = set(result.values)
    ev.unevaluated = dict(result.unevaluated)
    try:
        return ev.scalar(ev.eval(ast, host))
    except _Unsupported:
        return ErrorCode.NAME


def trace_precedents(wb: Workbook, result: EvalResult, g: DepGraph, cell, depth: int = 3) -> TreeNode:
    """Precedent tree over static and dynamic edges, each node annotated with its value."""
    merged = merge_dynamic(g, result.dynamic_edges)
    if isinstance(cell, str):
        cell = merged.resolve(cell)
    if cell not in merged:
        raise CellNotFoundError(f"{cell} is not in the workbook")
    tree = precedents(merged, cell, depth)

    def annotate(tn: TreeNode):
        node = tn.node
        if isinstance(node, CellId) and node.book is None:
            if node in result.values or node in result.unevaluated:
                tn.value = result.value(node)
            else:
                ws = wb.sheet(node.sheet)
                c = ws.cells.get((node.row, node.col)) if ws else None
                tn.value = c.value if c is not None else None
        for child in tn.children:
            annotate(child)

    annotate(tree)
    return tree
