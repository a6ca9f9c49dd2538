"""Workbook data model, the JSON interchange loader and workbook-level metrics.

Workbooks arrive as a JSON export (one document per workbook file).  Loading
never parses formulas; it keeps formula text verbatim so later stages can
report on it exactly as written.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator, NamedTuple

MAX_COLUMN = 18278  # ZZZ
MAX_ROW = 1048576

_UNQUOTED_SHEET = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*\Z")
_CELL_LIKE = re.compile(r"\$?[A-Za-z]{1,3}\$?[0-9]+\Z")
_NUMERIC_TEXT = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?\Z")


class ErrorCode(enum.Enum):
    """Spreadsheet error values.  CIRC marks members of a static cycle."""

    DIV0 = "#DIV/0!"
    NA = "#N/A"
    REF = "#REF!"
    VALUE = "#VALUE!"
    NAME = "#NAME?"
    NUM = "#NUM!"
    NULL = "#NULL!"
    CIRC = "#CIRC!"

    def __str__(self) -> str:
        return self.value


class Visibility(enum.Enum):
    VISIBLE = "visible"
    HIDDEN = "hidden"
    VERY_HIDDEN = "very_hidden"


class AddressError(ValueError):
    """Malformed cell address; ``position`` is the offending character index."""

    def __init__(self, message: str, text: str, position: int):
        super().__init__(f"{message} at position {position} in {text!r}")
        self.text = text
        self.position = position


class WorkbookFormatError(ValueError):
    """The interchange document is malformed or violates a model invariant."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


def looks_numeric(text: str) -> bool:
    """True when ``text``, trimmed, lexes as a decimal or scientific number."""
    return bool(_NUMERIC_TEXT.match(text.strip()))


def column_index(letters: str) -> int:
    """Bijective base-26: A -> 1, Z -> 26, AA -> 27."""
    n = 0
    for ch in letters.upper():
        if not "A" <= ch <= "Z":
            raise ValueError(f"invalid column letters {letters!r}")
        n = n * 26 + (ord(ch) - 64)
    if not 1 <= n <= MAX_COLUMN:
        raise ValueError(f"column {letters!r} out of range")
    return n


def column_letters(index: int) -> str:
    if not 1 <= index <= MAX_COLUMN:
        raise ValueError(f"column index {index} out of range")
    out = ""
    while index:
        index, rem = divmod(index - 1, 26)
        out = chr(65 + rem) + out
    return out


def quote_sheet(name: str) -> str:
    """Render a sheet name the way it must appear before ``!``."""
    if _UNQUOTED_SHEET.match(name) and not _CELL_LIKE.match(name):
        return name
    return "'" + name.replace("'", "''") + "'"


@dataclass(frozen=True)
class Address:
    col: int
    row: int
    col_absolute: bool = False
    row_absolute: bool = False
    sheet: str | None = None

    def __post_init__(self):
        if self.col < 1 or self.row < 1:
            raise ValueError(f"address indices must be >= 1, got col={self.col} row={self.row}")

    def render(self, with_sheet: bool = True) -> str:
        text = (
            ("$" if self.col_absolute else "")
            + column_letters(self.col)
            + ("$" if self.row_absolute else "")
            + str(self.row)
        )
        if with_sheet and self.sheet is not None:
            return quote_sheet(self.sheet) + "!" + text
        return text

    def __str__(self) -> str:
        return self.render()


def _parse_sheet_prefix(text: str) -> tuple[str | None, int]:
    if text.startswith("'"):
        i = 1
        chars = []
        while True:
            if i >= len(text):
                raise AddressError("unterminated quoted sheet name", text, i)
            ch = text[i]
            if ch == "'":
                if text[i + 1 : i + 2] == "'":
                    chars.append("'")
                    i += 2
                    continue
                break
            chars.append(ch)
            i += 1
        if text[i + 1 : i + 2] != "!":
            raise AddressError("expected '!' after quoted sheet name", text, i + 1)
        if not chars:
            raise AddressError("empty sheet name", text, 1)
        return "".join(chars), i + 2
    bang = text.find("!")
    if bang < 0:
        return None, 0
    if bang == 0:
        raise AddressError("empty sheet name", text, 0)
    name = text[:bang]
    for i, ch in enumerate(name):
        if not (ch.isalnum() or ch in "_."):
            raise AddressError(f"unexpected character {ch!r} in unquoted sheet name", text, i)
    return name, bang + 1


def _parse_cell_part(text: str, start: int) -> tuple[int, int, bool, bool, int]:
    i = start
    col_abs = text[i : i + 1] == "$"
    if col_abs:
        i += 1
    j = i
    while j < len(text) and text[j].isascii() and text[j].isalpha():
        j += 1
    if j == i:
        raise AddressError("expected column letters", text, i)
    if j - i > 3:
        raise AddressError("column out of range", text, i)
    col = column_index(text[i:j])
    i = j
    row_abs = text[i : i + 1] == "$"
    if row_abs:
        i += 1
    j = i
    while j < len(text) and text[j].isdigit():
        j += 1
    if j == i:
        raise AddressError("expected row number", text, i)
    row = int(text[i:j])
    if row < 1 or text[i] == "0":
        raise AddressError("row numbers start at 1", text, i)
    if row > MAX_ROW:
        raise AddressError("row out of range", text, i)
    return col, row, col_abs, row_abs, j


def parse_address(text: str) -> Address:
    """Parse ``[Sheet!][$]Col[$]Row``; sheet names may be single-quoted."""
    sheet, i = _parse_sheet_prefix(text)
    col, row, col_abs, row_abs, end = _parse_cell_part(text, i)
    if end != len(text):
        raise AddressError(f"unexpected character {text[end]!r}", text, end)
    return Address(col, row, col_abs, row_abs, sheet)


@dataclass(frozen=True)
class CellRange:
    """Rectangular block; ``top``/``left`` never exceed ``bottom``/``right``."""

    top: int
    left: int
    bottom: int
    right: int
    sheet: str | None = None

    @classmethod
    def from_corners(cls, a: Address, b: Address, sheet: str | None = None) -> CellRange:
        return cls(
            min(a.row, b.row), min(a.col, b.col), max(a.row, b.row), max(a.col, b.col), sheet
        )

    @property
    def height(self) -> int:
        return self.bottom - self.top + 1

    @property
    def width(self) -> int:
        return self.right - self.left + 1

    @property
    def size(self) -> int:
        return self.height * self.width

    def contains(self, row: int, col: int) -> bool:
        return self.top <= row <= self.bottom and self.left <= col <= self.right

    def within(self, other: CellRange) -> bool:
        return (
            other.top <= self.top
            and other.left <= self.left
            and self.bottom <= other.bottom
            and self.right <= other.right
        )

    def cells(self) -> Iterator[tuple[int, int]]:
        for r in range(self.top, self.bottom + 1):
            for c in range(self.left, self.right + 1):
                yield r, c

    def render(self) -> str:
        text = f"{column_letters(self.left)}{self.top}:{column_letters(self.right)}{self.bottom}"
        return (quote_sheet(self.sheet) + "!" + text) if self.sheet else text

    def __str__(self) -> str:
        return self.render()


def parse_range(text: str) -> CellRange:
    """Parse ``A1:B2`` (or a single cell) into a normalized CellRange."""
    sheet, i = _parse_sheet_prefix(text)
    body = text[i:]
    first, sep, second = body.partition(":")
    a = parse_address(first)
    b = parse_address(second) if sep else a
    return CellRange.from_corners(a, b, sheet)


class CellId(NamedTuple):
    """Global identity of a cell; ``book`` is set only for external references."""

    sheet: str
    row: int
    col: int
    book: str | None = None

    def render(self, absolute: bool = False) -> str:
        d = "$" if absolute else ""
        local = f"{d}{column_letters(self.col)}{d}{self.row}"
        prefix = quote_sheet(self.sheet)
        if self.book is not None:
            prefix = f"[{self.book}]{self.sheet}"
            if not _UNQUOTED_SHEET.match(self.sheet) or not _UNQUOTED_SHEET.match(self.book):
                prefix = "'" + prefix.replace("'", "''") + "'"
        return f"{prefix}!{local}"

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class Cell:
    """One stored cell: a literal (``stored_type`` n/s/b/e) or a formula."""

    value: Any = None
    stored_type: str | None = None
    formula: str | None = None
    array_range: CellRange | None = None

    @property
    def is_formula(self) -> bool:
        return self.formula is not None

    @property
    def is_blank(self) -> bool:
        return self.formula is None and self.value is None


@dataclass
class Sheet:
    name: str
    cells: dict[tuple[int, int], Cell] = field(default_factory=dict)
    visibility: Visibility = Visibility.VISIBLE
    hidden_rows: frozenset[int] = frozenset()
    hidden_cols: frozenset[int] = frozenset()
    conditional_formats: tuple[tuple[str, str], ...] = ()
    pivot_table_count: int = 0
    used_range: CellRange | None = None

    def cell(self, row: int, col: int) -> Cell | None:
        return self.cells.get((row, col))

    def populated(self) -> list[tuple[tuple[int, int], Cell]]:
        """Non-blank cells in row-major order."""
        return sorted((k, c) for k, c in self.cells.items() if not c.is_blank)

    def formula_cells(self) -> list[tuple[tuple[int, int], Cell]]:
        return sorted((k, c) for k, c in self.cells.items() if c.is_formula)


@dataclass(frozen=True)
class Protection:
    structure_locked: bool = False
    open_password_required: bool = False


@dataclass(frozen=True)
class VbaInfo:
    components: int = 0
    total_lines: int = 0


@dataclass
class Workbook:
    name: str
    sheets: list[Sheet]
    file_size_bytes: int = 0
    saved_at: datetime | None = None
    properties: dict[str, str] = field(default_factory=dict)
    protection: Protection = Protection()
    vba: VbaInfo = VbaInfo()
    defined_names: dict[str, str] = field(default_factory=dict)
    external_links: list[str] = field(default_factory=list)
    source_path: Path | None = None
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._by_name = {s.name.lower(): s for s in self.sheets}
        self._order = {s.name.lower(): i for i, s in enumerate(self.sheets)}

    def sheet(self, name: str) -> Sheet | None:
        """Case-insensitive sheet lookup."""
        return self._by_name.get(name.lower())

    def sheet_index(self, name: str) -> int | None:
        return self._order.get(name.lower())

    def defined_name(self, name: str) -> str | None:
        for key, value in self.defined_names.items():
            if key.lower() == name.lower():
                return value
        return None

    def formula_cells(self) -> Iterator[tuple[CellId, Cell]]:
        """All formula cells, sheet order then row-major."""
        for sheet in self.sheets:
            for (r, c), cell in sheet.formula_cells():
                yield CellId(sheet.name, r, c), cell


# --------------------------------------------------------------------------
# Interchange loader
# --------------------------------------------------------------------------

_WORKBOOK_KEYS = {
    "name", "file_size_bytes", "saved_at", "properties", "protection", "vba",
    "defined_names", "sheets", "external_links",
}
_SHEET_KEYS = {
    "name", "visibility", "used_range", "hidden_rows", "hidden_cols",
    "conditional_formats", "pivot_tables", "cells",
}
_CELL_KEYS = {"v", "t", "f", "af"}


class _DuplicateKeys(dict):
    pass


def _pairs_hook(pairs):
    out = _DuplicateKeys()
    dupes = []
    for k, v in pairs:
        if k in out:
            dupes.append(k)
        out[k] = v
    out.duplicates = dupes
    return out


def _parse_timestamp(text: Any) -> datetime:
    if not isinstance(text, str):
        raise WorkbookFormatError(f"saved_at must be an RFC3339 string, got {text!r}")
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise WorkbookFormatError(f"invalid saved_at timestamp {text!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _expect(obj: Any, kind: type | tuple, what: str):
    if not isinstance(obj, kind) or (kind is int and isinstance(obj, bool)):
        raise WorkbookFormatError(f"{what} has the wrong type ({type(obj).__name__})")
    return obj


def _warn_unknown(obj: dict, known: set[str], where: str, warnings: list[str]) -> None:
    for key in obj:
        if key not in known:
            warnings.append(f"{where}: unknown key {key!r} ignored")


def _load_cell(key: str, raw: Any, where: str, warnings: list[str]) -> tuple[tuple[int, int], Cell]:
    try:
        addr = parse_address(key)
    except AddressError as exc:
        raise WorkbookFormatError(f"{where}: bad cell key: {exc}") from exc
    if addr.sheet is not None:
        raise WorkbookFormatError(f"{where}: cell key {key!r} must not carry a sheet")
    if addr.col_absolute or addr.row_absolute:
        warnings.append(f"{where}: cell key {key!r} should not contain '$'")
    _expect(raw, dict, f"{where}!{key}")
    _warn_unknown(raw, _CELL_KEYS, f"{where}!{key}", warnings)
    has_f = "f" in raw
    if has_f and ("v" in raw or "t" in raw):
        raise WorkbookFormatError(f"{where}!{key}: cell is both literal and formula")
    if has_f:
        text = _expect(raw["f"], str, f"{where}!{key} formula")
        if not text.startswith("="):
            raise WorkbookFormatError(f"{where}!{key}: formula must begin with '='")
        array_range = None
        if raw.get("af") is not None:
            try:
                array_range = parse_range(_expect(raw["af"], str, f"{where}!{key} af"))
            except AddressError as exc:
                raise WorkbookFormatError(f"{where}!{key}: bad array range: {exc}") from exc
        return (addr.row, addr.col), Cell(formula=text, array_range=array_range)
    if "af" in raw:
        raise WorkbookFormatError(f"{where}!{key}: 'af' without a formula")
    value = raw.get("v")
    declared = raw.get("t")
    if value is None:
        return (addr.row, addr.col), Cell()
    if isinstance(value, bool):
        inferred = "b"
    elif isinstance(value, (int, float)):
        inferred = "n"
    elif isinstance(value, str):
        inferred = "s"
    else:
        raise WorkbookFormatError(f"{where}!{key}: unsupported literal {value!r}")
    stored = declared or inferred
    if stored == "e":
        try:
            return (addr.row, addr.col), Cell(ErrorCode(value), "e")
        except ValueError as exc:
            raise WorkbookFormatError(f"{where}!{key}: unknown error literal {value!r}") from exc
    if stored not in ("n", "s", "b"):
        raise WorkbookFormatError(f"{where}!{key}: unknown stored type {stored!r}")
    if stored != inferred:
        raise WorkbookFormatError(
            f"{where}!{key}: value {value!r} does not match declared type {stored!r}"
        )
    if stored == "n":
        value = float(value)
    return (addr.row, addr.col), Cell(value, stored)


def _column_list(items: Any, where: str) -> frozenset[int]:
    out = set()
    for item in _expect(items, list, where):
        if isinstance(item, str):
            try:
                out.add(column_index(item))
            except ValueError as exc:
                raise WorkbookFormatError(f"{where}: {exc}") from exc
        else:
            out.add(_expect(item, int, where))
    return frozenset(out)


def _load_sheet(raw: Any, index: int, warnings: list[str]) -> Sheet:
    where = f"sheets[{index}]"
    _expect(raw, dict, where)
    name = _expect(raw.get("name"), str, f"{where}.name")
    if not name:
        raise WorkbookFormatError(f"{where}: empty sheet name")
    _warn_unknown(raw, _SHEET_KEYS, f"sheet {name!r}", warnings)
    try:
        visibility = Visibility(raw.get("visibility", "visible"))
    except ValueError as exc:
        raise WorkbookFormatError(f"sheet {name!r}: bad visibility") from exc
    cells_raw = _expect(raw.get("cells", {}), dict, f"sheet {name!r} cells")
    for dupe in getattr(cells_raw, "duplicates", []):
        raise WorkbookFormatError(f"sheet {name!r}: duplicate cell address {dupe!r}")
    cells: dict[tuple[int, int], Cell] = {}
    for key, value in cells_raw.items():
        pos, cell = _load_cell(key, value, f"sheet {name!r}", warnings)
        if pos in cells:
            raise WorkbookFormatError(f"sheet {name!r}: duplicate cell address {key!r}")
        cells[pos] = cell
    used_range = None
    if raw.get("used_range") is not None:
        try:
            used_range = parse_range(_expect(raw["used_range"], str, f"sheet {name!r} used_range"))
        except AddressError as exc:
            raise WorkbookFormatError(f"sheet {name!r}: bad used_range: {exc}") from exc
    if used_range is not None:
        outside = [k for k, c in cells.items() if not c.is_blank and not used_range.contains(*k)]
        if outside:
            r, c = min(outside)
            warnings.append(
                f"sheet {name!r}: {len(outside)} cell(s) outside used range {used_range}, "
                f"first {column_letters(c)}{r}"
            )
    formats = []
    for i, cf in enumerate(_expect(raw.get("conditional_formats", []), list, f"sheet {name!r}")):
        _expect(cf, dict, f"sheet {name!r} conditional_formats[{i}]")
        formats.append((str(cf.get("range", "")), str(cf.get("rule", ""))))
    pivots = _expect(raw.get("pivot_tables", 0), int, f"sheet {name!r} pivot_tables")
    if pivots < 0:
        raise WorkbookFormatError(f"sheet {name!r}: negative pivot table count")
    return Sheet(
        name=name,
        cells=cells,
        visibility=visibility,
        hidden_rows=frozenset(_expect(r, int, f"sheet {name!r} hidden_rows")
                              for r in _expect(raw.get("hidden_rows", []), list, "hidden_rows")),
        hidden_cols=_column_list(raw.get("hidden_cols", []), f"sheet {name!r} hidden_cols"),
        conditional_formats=tuple(formats),
        pivot_table_count=pivots,
        used_range=used_range,
    )


def workbook_from_dict(doc: Any, source_path: Path | None = None) -> Workbook:
    """Build a Workbook from an already-decoded interchange document."""
    _expect(doc, dict, "document")
    warnings: list[str] = []
    _warn_unknown(doc, _WORKBOOK_KEYS, "workbook", warnings)
    sheets_raw = _expect(doc.get("sheets"), list, "sheets")
    if not sheets_raw:
        raise WorkbookFormatError("a workbook needs at least one sheet")
    sheets = [_load_sheet(s, i, warnings) for i, s in enumerate(sheets_raw)]
    seen: dict[str, str] = {}
    for s in sheets:
        if s.name.lower() in seen:
            raise WorkbookFormatError(
                f"duplicate sheet name {s.name!r} (clashes with {seen[s.name.lower()]!r})"
            )
        seen[s.name.lower()] = s.name

    names = dict(_expect(doc.get("defined_names", {}), dict, "defined_names"))
    for key, value in names.items():
        if not key or any(ch.isspace() for ch in key):
            raise WorkbookFormatError(f"defined name {key!r} is not a valid identifier")
        _expect(value, str, f"defined name {key!r}")

    prot = _expect(doc.get("protection", {}), dict, "protection")
    vba = _expect(doc.get("vba", {}), dict, "vba")
    size = _expect(doc.get("file_size_bytes", 0), int, "file_size_bytes")
    if size < 0:
        raise WorkbookFormatError("file_size_bytes must be non-negative")
    vba_info = VbaInfo(
        _expect(vba.get("components", 0), int, "vba.components"),
        _expect(vba.get("total_lines", 0), int, "vba.total_lines"),
    )
    if vba_info.components < 0 or vba_info.total_lines < 0:
        raise WorkbookFormatError("vba counts must be non-negative")
    name = doc.get("name")
    if name is None:
        name = source_path.name if source_path is not None else "workbook"
    return Workbook(
        name=_expect(name, str, "name"),
        sheets=sheets,
        file_size_bytes=size,
        saved_at=_parse_timestamp(doc["saved_at"]) if doc.get("saved_at") is not None else None,
        properties={str(k): str(v) for k, v in _expect(doc.get("properties", {}), dict, "properties").items()},
        protection=Protection(
            bool(prot.get("structure_locked", False)),
            bool(prot.get("open_password_required", False)),
        ),
        vba=vba_info,
        defined_names=names,
        external_links=[str(x) for x in _expect(doc.get("external_links", []), list, "external_links")],
        source_path=source_path,
        warnings=warnings,
    )


def loads_workbook(text: str, source_path: Path | None = None) -> Workbook:
    try:
        doc = json.loads(text, object_pairs_hook=_pairs_hook)
    except json.JSONDecodeError as exc:
        raise WorkbookFormatError(f"malformed JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    return workbook_from_dict(doc, source_path)


def load_workbook(path: str | Path) -> Workbook:
    """Load one interchange document.  Raises FileNotFoundError or WorkbookFormatError."""
    path = Path(path)
    data = path.read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise WorkbookFormatError(f"document is not UTF-8: {exc}") from exc
    return loads_workbook(text, path)


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class UsedRangeStats:
    declared_cells: int
    populated_cells: int
    blank_ratio: float
    trimmed_range: CellRange | None


def used_range_stats(sheet: Sheet) -> UsedRangeStats:
    keys = [k for k, c in sheet.cells.items() if not c.is_blank]
    trimmed = None
    if keys:
        rows = [r for r, _ in keys]
        cols = [c for _, c in keys]
        trimmed = CellRange(min(rows), min(cols), max(rows), max(cols))
    declared_range = sheet.used_range or trimmed
    declared = declared_range.size if declared_range else 0
    if declared == 0:
        return UsedRangeStats(0, len(keys), 0.0, trimmed)
    inside = sum(1 for k in keys if declared_range.contains(*k))
    return UsedRangeStats(declared, len(keys), 1.0 - inside / declared, trimmed)


@dataclass(frozen=True)
class WorkbookMetrics:
    sheet_count: int
    total_formulas: int
    total_unique_formulas: int
    total_cells: int
    max_formula_length: int
    max_formula_complexity: int
    largest_numeric_result: float | None
    vba_lines: int
    vba_components: int
    file_size_bytes: int


def workbook_metrics(wb: Workbook, parsed, evaluation=None) -> WorkbookMetrics:
    """Workbook-level measures.

    ``parsed`` is a :class:`sheetlens.formula.FormulaAnalysis`; ``evaluation``
    an optional :class:`sheetlens.evaluator.EvalResult`.
    """
    infos = list(parsed.parsed.values())
    largest = None
    if evaluation is not None:
        numbers = [
            abs(v) for v in evaluation.values.values()
            if isinstance(v, float)
        ]
        largest = max(numbers) if numbers else None
    return WorkbookMetrics(
        sheet_count=len(wb.sheets),
        total_formulas=len(infos),
        total_unique_formulas=len(parsed.unique()),
        total_cells=sum(1 for s in wb.sheets for c in s.cells.values() if not c.is_blank),
        max_formula_length=max((p.metrics.length for p in infos), default=0),
        max_formula_complexity=max((p.metrics.complexity for p in infos), default=0),
        largest_numeric_result=largest,
        vba_lines=wb.vba.total_lines,
        vba_components=wb.vba.components,
        file_size_bytes=wb.file_size_bytes,
    )


class ScaleAdvice(enum.Enum):
    NORMAL = "normal"
    REVIEW_DESIGN = "review_design"
    CONSIDER_MIGRATION = "consider_migration"


@dataclass(frozen=True)
class Thresholds:
    design_sheet_limit: int = 50
    design_formula_limit: int = 100_000
    migration_sheet_limit: int = 200
    migration_formula_limit: int = 500_000


def scale_advice(metrics: WorkbookMetrics, config: Thresholds = Thresholds()) -> ScaleAdvice:
    if (metrics.sheet_count > config.migration_sheet_limit
            or metrics.total_formulas > config.migration_formula_limit):
        return ScaleAdvice.CONSIDER_MIGRATION
    if (metrics.sheet_count > config.design_sheet_limit
            or metrics.total_formulas > config.design_formula_limit):
        return ScaleAdvice.REVIEW_DESIGN
    return ScaleAdvice.NORMAL
