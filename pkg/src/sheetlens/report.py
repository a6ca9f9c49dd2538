"""Reviewer-facing results and their text / JSON / Markdown renderings.

Every result type offers ``to_dict``/``from_dict`` (the JSON schema) and
``sections()`` (the tabular view shared by the text and Markdown renderers).
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .formula import FormulaAnalysis, ParseFailure, UniqueFormula
from .graph import FlowStats
from .model import (
    Address, CellId, CellRange, ErrorCode, Sheet, UsedRangeStats, Workbook,
    WorkbookMetrics, ScaleAdvice, looks_numeric, parse_address, parse_range,
)
from .risk import RiskReport

FORMATS = ("text", "json", "md")
REVIEW_STATUSES = ("unreviewed", "in_progress", "reviewed", "question")


class ReviewStateError(ValueError):
    pass


def anchor(sheet: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", sheet.lower()).strip("-")
    return f"sheet-{slug}"


@dataclass
class Section:
    title: str
    columns: list[str]
    rows: list[list[str]]
    anchor: str | None = None
    notes: list[str] = field(default_factory=list)


# --------------------------------------------------------------------------
# Review-state sidecar and the index report
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SheetReview:
    status: str = "unreviewed"
    groups: tuple[str, ...] = ()
    notes: str = ""
    description_cell: str | None = None


def sidecar_path(workbook_path: str | Path) -> Path:
    p = Path(workbook_path)
    return p.with_name(p.stem + ".review.json")


def load_review_state(path: str | Path | None) -> dict[str, SheetReview]:
    """Per-sheet review state; a missing file means every sheet is unreviewed."""
    if path is None or not Path(path).exists():
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ReviewStateError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    sheets = doc.get("sheets", {}) if isinstance(doc, dict) else None
    if not isinstance(sheets, dict):
        raise ReviewStateError(f"{path}: expected an object with a 'sheets' map")
    out = {}
    for name, entry in sheets.items():
        if not isinstance(entry, dict):
            raise ReviewStateError(f"{path}: entry for {name!r} must be an object")
        status = entry.get("status", "unreviewed")
        if status not in REVIEW_STATUSES:
            raise ReviewStateError(f"{path}: sheet {name!r} has unknown status {status!r}")
        out[name] = SheetReview(status, tuple(entry.get("groups", ())), str(entry.get("notes", "")),
                                entry.get("description_cell"))
    return out


@dataclass(frozen=True)
class IndexEntry:
    sheet: str
    description: str
    description_source: str
    visibility: str
    groups: tuple[str, ...]
    review_status: str
    formula_count: int
    unique_count: int
    notes: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["groups"] = list(self.groups)
        d["anchor"] = anchor(self.sheet)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> IndexEntry:
        d = {k: v for k, v in d.items() if k != "anchor"}
        d["groups"] = tuple(d["groups"])
        return cls(**d)


@dataclass
class IndexReport:
    workbook: str
    entries: list[IndexEntry]
    orphans: list[str] = field(default_factory=list)
    kind = "index"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "workbook": self.workbook,
                "entries": [e.to_dict() for e in self.entries], "orphans": list(self.orphans)}

    @classmethod
    def from_dict(cls, d: dict) -> IndexReport:
        return cls(d["workbook"], [IndexEntry.from_dict(e) for e in d["entries"]], list(d["orphans"]))

    def sections(self) -> list[Section]:
        rows = [[e.sheet, e.description, e.description_source, e.visibility, ",".join(e.groups),
                 e.review_status, str(e.formula_count), str(e.unique_count)] for e in self.entries]
        out = [Section(f"Index: {self.workbook}",
                       ["Sheet", "Description", "Source", "Visibility", "Groups", "Status",
                        "Formulas", "Unique"], rows)]
        for e in self.entries:
            notes = [f"description: {e.description or '(none)'}", f"status: {e.review_status}"]
            if e.notes:
                notes.append(f"notes: {e.notes}")
            out.append(Section(e.sheet, [], [], anchor(e.sheet), notes))
        out.append(Section("Orphaned review entries", ["Sheet"], [[o] for o in self.orphans]))
        return out


def _description(sheet: Sheet, where: str) -> tuple[str, str]:
    try:
        addr = parse_address(where)
    except ValueError:
        return "", where
    source = Address(addr.col, addr.row).render(with_sheet=False)
    cell = sheet.cell(addr.row, addr.col)
    if cell is None or cell.is_formula or cell.stored_type != "s":
        return "", source
    return cell.value.strip(), source


def index_report(wb: Workbook, analysis: FormulaAnalysis, review_state: dict[str, SheetReview] | None = None,
                 description_cell: str = "A1", group: str | None = None) -> IndexReport:
    """One entry per sheet in workbook order; sidecar entries for unknown sheets become orphans."""
    review_state = review_state or {}
    by_lower = {k.lower(): v for k, v in review_state.items()}
    formula_counts: dict[str, int] = {}
    for cid, _cell in wb.formula_cells():
        formula_counts[cid.sheet] = formula_counts.get(cid.sheet, 0) + 1
    unique_counts: dict[str, int] = {}
    for u in analysis.unique():
        unique_counts[u.sheet] = unique_counts.get(u.sheet, 0) + 1
    entries = []
    for sheet in wb.sheets:
        review = by_lower.get(sheet.name.lower(), SheetReview())
        desc, source = _description(sheet, review.description_cell or description_cell)
        if group is not None and group not in review.groups:
            continue
        entries.append(IndexEntry(sheet.name, desc, source, sheet.visibility.value, review.groups,
                                  review.status, formula_counts.get(sheet.name, 0),
                                  unique_counts.get(sheet.name, 0), review.notes))
    orphans = sorted(k for k in review_state if wb.sheet(k) is None)
    return IndexReport(wb.name, entries, orphans)


# --------------------------------------------------------------------------
# Sheet maps and layout findings
# --------------------------------------------------------------------------

@dataclass
class SheetMap:
    sheet: str
    bounds: CellRange | None
    grid: list[str]

    def code(self, row: int, col: int) -> str:
        """Code at absolute sheet coordinates."""
        return self.grid[row - self.bounds.top][col - self.bounds.left]

    def to_dict(self) -> dict:
        return {"sheet": self.sheet, "bounds": self.bounds.render() if self.bounds else None,
                "grid": list(self.grid)}

    @classmethod
    def from_dict(cls, d: dict) -> SheetMap:
        return cls(d["sheet"], parse_range(d["bounds"]) if d["bounds"] else None, list(d["grid"]))


def classify(cell, value=None) -> str:
    if cell is None or cell.is_blank:
        return "B"
    if cell.is_formula:
        if isinstance(value, ErrorCode):
            return "E"
        return "A" if cell.array_range is not None else "F"
    if cell.stored_type == "e":
        return "E"
    if cell.stored_type == "s":
        return "T" if looks_numeric(cell.value) else "L"
    return "N"


def sheet_map(sheet: Sheet, evaluation=None) -> SheetMap:
    populated = sheet.populated()
    if not populated:
        return SheetMap(sheet.name, None, [])
    rows = [r for (r, _), _ in populated]
    cols = [c for (_, c), _ in populated]
    bounds = CellRange(min(rows), min(cols), max(rows), max(cols))
    grid = []
    for r in range(bounds.top, bounds.bottom + 1):
        line = []
        for c in range(bounds.left, bounds.right + 1):
            cell = sheet.cell(r, c)
            value = evaluation.value(CellId(sheet.name, r, c)) if evaluation is not None and cell is not None else None
            line.append(classify(cell, value))
        grid.append("".join(line))
    return SheetMap(sheet.name, bounds, grid)


@dataclass(frozen=True)
class Interruption:
    address: str
    axis: str  # "row" or "column"
    formulas_before: int
    formulas_after: int


@dataclass
class LayoutFindings:
    sheet: str
    interruptions: list[Interruption]
    jumble_score: float

    def to_dict(self) -> dict:
        return {"sheet": self.sheet, "jumble_score": self.jumble_score,
                "interruptions": [asdict(i) for i in self.interruptions]}

    @classmethod
    def from_dict(cls, d: dict) -> LayoutFindings:
        return cls(d["sheet"], [Interruption(**i) for i in d["interruptions"]], d["jumble_score"])


def _run(line: str, i: int, step: int) -> int:
    n = 0
    j = i + step
    while 0 <= j < len(line) and line[j] == "F":
        n += 1
        j += step
    return n


def layout_findings(m: SheetMap, run_length: int = 3, neighbors: int = 2) -> LayoutFindings:
    """Constants interrupting formula runs, plus the share of cells unlike their neighbours."""
    if m.bounds is None:
        return LayoutFindings(m.sheet, [], 0.0)
    height, width = len(m.grid), len(m.grid[0])
    columns = ["".join(m.grid[r][c] for r in range(height)) for c in range(width)]
    found = []
    for r in range(height):
        for c in range(width):
            if m.grid[r][c] != "N":
                continue
            addr = CellId(m.sheet, m.bounds.top + r, m.bounds.left + c).render()
            for axis, line, i in (("row", m.grid[r], c), ("column", columns[c], r)):
                before, after = _run(line, i, -1), _run(line, i, 1)
                if before and after and before + after >= run_length:
                    found.append(Interruption(addr, axis, before, after))
    populated = jumbled = 0
    for r in range(height):
        for c in range(width):
            code = m.grid[r][c]
            if code == "B":
                continue
            populated += 1
            differ = 0
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < height and 0 <= cc < width and m.grid[rr][cc] not in ("B", code):
                    differ += 1
            if differ >= neighbors:
                jumbled += 1
    return LayoutFindings(m.sheet, found, jumbled / populated if populated else 0.0)


@dataclass
class SheetMapResult:
    map: SheetMap
    layout: LayoutFindings
    kind = "sheet_map"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "map": self.map.to_dict(), "layout": self.layout.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> SheetMapResult:
        return cls(SheetMap.from_dict(d["map"]), LayoutFindings.from_dict(d["layout"]))

    def sections(self) -> list[Section]:
        m = self.map
        if m.bounds is None:
            rows = []
        else:
            rows = [[str(m.bounds.top + i), line] for i, line in enumerate(m.grid)]
        notes = [f"bounds: {m.bounds.render() if m.bounds else '(empty)'}",
                 "codes: B blank, L label, N number, F formula, A array, E error, T number stored as text"]
        return [
            Section(f"Sheet map: {m.sheet}", ["Row", "Codes"], rows, anchor(m.sheet), notes),
            Section("Constants interrupting formula runs", ["Cell", "Axis", "Before", "After"],
                    [[i.address, i.axis, str(i.formulas_before), str(i.formulas_after)]
                     for i in self.layout.interruptions],
                    notes=[f"jumble score: {self.layout.jumble_score:.4f}"]),
        ]


# --------------------------------------------------------------------------
# Other result sets
# --------------------------------------------------------------------------

def fmt_number(v: float | None, scientific: bool = False) -> str:
    if v is None:
        return "-"
    if scientific:
        return f"{v:.1E}"
    if float(v).is_integer():
        return f"{int(v):,}"
    return f"{v:,.2f}"


def _metrics_rows(m: WorkbookMetrics) -> list[list[str]]:
    return [[k, "-" if v is None else fmt_number(v, k == "largest_numeric_result")]
            for k, v in asdict(m).items()]


def _used_range_dict(sheet: str, stats: UsedRangeStats) -> dict:
    return {"sheet": sheet, "declared_cells": stats.declared_cells, "populated_cells": stats.populated_cells,
            "blank_ratio": stats.blank_ratio,
            "trimmed_range": stats.trimmed_range.render() if stats.trimmed_range else None}


def _used_range_from(d: dict) -> UsedRangeStats:
    return UsedRangeStats(d["declared_cells"], d["populated_cells"], d["blank_ratio"],
                          parse_range(d["trimmed_range"]) if d["trimmed_range"] else None)


@dataclass
class MetricsResult:
    workbook: str
    metrics: WorkbookMetrics
    scale: ScaleAdvice
    used_ranges: dict[str, UsedRangeStats] = field(default_factory=dict)
    kind = "metrics"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "workbook": self.workbook, "metrics": asdict(self.metrics),
                "scale_advice": self.scale.value,
                "used_ranges": [_used_range_dict(k, v) for k, v in self.used_ranges.items()]}

    @classmethod
    def from_dict(cls, d: dict) -> MetricsResult:
        return cls(d["workbook"], WorkbookMetrics(**d["metrics"]), ScaleAdvice(d["scale_advice"]),
                   {u["sheet"]: _used_range_from(u) for u in d["used_ranges"]})

    def sections(self) -> list[Section]:
        used = [[name, str(s.declared_cells), str(s.populated_cells), f"{s.blank_ratio:.5f}",
                 s.trimmed_range.render() if s.trimmed_range else "-"]
                for name, s in self.used_ranges.items()]
        return [
            Section(f"Metrics: {self.workbook}", ["Measure", "Value"], _metrics_rows(self.metrics),
                    notes=[f"scale advice: {self.scale.value}"]),
            Section("Used range", ["Sheet", "Declared", "Populated", "Blank ratio", "Trimmed"], used),
        ]


@dataclass
class AnalysisResult:
    workbook: str
    risk: RiskReport
    metrics: MetricsResult
    evaluated: bool
    warnings: list[str] = field(default_factory=list)
    kind = "analysis"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "workbook": self.workbook, "risk": self.risk.to_dict(),
                "metrics": self.metrics.to_dict(), "evaluated": self.evaluated,
                "warnings": list(self.warnings)}

    @classmethod
    def from_dict(cls, d: dict) -> AnalysisResult:
        return cls(d["workbook"], RiskReport.from_dict(d["risk"]), MetricsResult.from_dict(d["metrics"]),
                   d["evaluated"], list(d["warnings"]))

    def sections(self) -> list[Section]:
        rows = [[f.title, f.status, fmt_number(f.measured_value, f.factor_id == "largest_result"),
                 f.example_address or "", f.example_formula or "", str(f.weight)]
                for f in self.risk.findings]
        summary = [
            f"Overall Risk Rating = {self.risk.overall_rating_percent}% "
            f"({self.risk.triggered_weight}/{self.risk.total_weight})",
            "Higher value means more chance of defects; a low rating is not the same as defect free.",
        ]
        if self.risk.skipped:
            summary.append("skipped (no evaluation): " + ", ".join(self.risk.skipped))
        supp = [[f.title, f.example_address or "", fmt_number(f.measured_value), f.detail or ""]
                for f in self.risk.supplementary]
        details = [[f.factor_id, f.detail] for f in self.risk.findings if f.detail]
        return [
            Section(f"Risk report: {self.workbook}",
                    ["Risk", "Status", "Value", "Example address", "Example formula", "Weight"],
                    rows, notes=summary),
            Section("Finding details", ["Factor", "Detail"], details),
            Section("Supplementary findings", ["Finding", "Where", "Value", "Detail"], supp),
            *self.metrics.sections(),
            Section("Load warnings", ["Warning"], [[w] for w in self.warnings]),
        ]


@dataclass
class UniqueResult:
    workbook: str
    entries: list[UniqueFormula]
    failures: list[ParseFailure] = field(default_factory=list)
    kind = "unique_formulas"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "workbook": self.workbook, "count": len(self.entries),
                "entries": [u.to_dict() for u in self.entries],
                "failures": [{"cell": f.cell.render(), "formula": f.text, "message": f.message,
                              "position": f.position} for f in self.failures]}

    @classmethod
    def from_dict(cls, d: dict) -> UniqueResult:
        failures = []
        for f in d["failures"]:
            a = parse_address(f["cell"])
            failures.append(ParseFailure(CellId(a.sheet, a.row, a.col), f["formula"], f["message"],
                                         f["position"]))
        return cls(d["workbook"], [UniqueFormula.from_dict(u) for u in d["entries"]], failures)

    def sections(self) -> list[Section]:
        rows = [[u.sheet, u.first_found.render(with_sheet=False), str(u.count), u.formula, u.r1c1]
                for u in self.entries]
        return [
            Section(f"Unique formulas: {self.workbook}",
                    ["Sheet", "First found", "Count", "Formula", "R1C1"], rows,
                    notes=[f"total unique: {len(self.entries)}"]),
            Section("Unparsed formulas", ["Cell", "Formula", "Error"],
                    [[f.cell.render(), f.text, f.message] for f in self.failures]),
        ]


@dataclass
class FlowResult:
    stats: FlowStats
    cross_sheet: dict[str, int] = field(default_factory=dict)  # "From -> To" -> count
    kind = "flow"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "stats": self.stats.to_dict(), "cross_sheet": dict(self.cross_sheet)}

    @classmethod
    def from_dict(cls, d: dict) -> FlowResult:
        return cls(FlowStats.from_dict(d["stats"]), dict(d["cross_sheet"]))

    def sections(self) -> list[Section]:
        s = self.stats
        rows = [[k, str(v) if isinstance(v, int) else f"{v:.4f}"]
                for k, v in s.to_dict().items() if k != "sheet"]
        return [
            Section(f"Flow: {s.sheet}", ["Measure", "Value"], rows, anchor(s.sheet)),
            Section("Cross-sheet edges", ["Direction", "Edges"],
                    [[k, str(v)] for k, v in self.cross_sheet.items()]),
        ]


@dataclass
class TraceResult:
    tree: dict
    direction: str = "precedents"
    depth: int = 3
    kind = "trace"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "direction": self.direction, "depth": self.depth, "tree": self.tree}

    @classmethod
    def from_dict(cls, d: dict) -> TraceResult:
        return cls(d["tree"], d["direction"], d["depth"])

    def sections(self) -> list[Section]:
        rows = []

        def visit(node: dict, level: int):
            marks = []
            if node.get("construct"):
                marks.append(f"via {node['construct']}")
            if node["cyclic"]:
                marks.append("cyclic")
            if node["truncated"]:
                marks.append("...")
            rows.append(["  " * level + node["cell"], node.get("value", ""), " ".join(marks)])
            for child in node["children"]:
                visit(child, level + 1)

        visit(self.tree, 0)
        return [Section(f"Trace ({self.direction}, depth {self.depth}): {self.tree['cell']}",
                        ["Cell", "Value", "Notes"], rows,
                        notes=[f"direct children: {len(self.tree['children'])}"])]


@dataclass
class EvalDump:
    workbook: str
    values: list[tuple[str, str]]
    errors: list[tuple[str, str]]
    unevaluated: list[tuple[str, str]]
    dynamic_edges: list[tuple[str, str, str]]
    passes: int = 1
    kind = "eval"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "workbook": self.workbook, "passes": self.passes,
                "values": [{"cell": c, "value": v} for c, v in self.values],
                "errors": [{"cell": c, "value": v} for c, v in self.errors],
                "unevaluated": [{"cell": c, "reason": r} for c, r in self.unevaluated],
                "dynamic_edges": [{"precedent": p, "dependent": d, "construct": k}
                                  for p, d, k in self.dynamic_edges]}

    @classmethod
    def from_dict(cls, d: dict) -> EvalDump:
        return cls(d["workbook"], [(x["cell"], x["value"]) for x in d["values"]],
                   [(x["cell"], x["value"]) for x in d["errors"]],
                   [(x["cell"], x["reason"]) for x in d["unevaluated"]],
                   [(x["precedent"], x["dependent"], x["construct"]) for x in d["dynamic_edges"]],
                   d["passes"])

    def sections(self) -> list[Section]:
        return [
            Section(f"Values: {self.workbook}", ["Cell", "Value"], [list(v) for v in self.values],
                    notes=[f"passes: {self.passes}"]),
            Section("Errors", ["Cell", "Value"], [list(v) for v in self.errors]),
            Section("Not evaluated", ["Cell", "Reason"], [list(v) for v in self.unevaluated]),
            Section("Dynamic edges", ["Precedent", "Dependent", "Construct"],
                    [list(e) for e in self.dynamic_edges]),
        ]


@dataclass
class LinksResult:
    nodes: list[dict]
    edges: list[dict]
    missing: list[str]
    cycles: list[list[str]]
    cell_cycles: list[dict]
    stale: list[dict]
    notes: list[str] = field(default_factory=list)
    kind = "links"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "nodes": self.nodes, "edges": self.edges, "missing": self.missing,
                "cycles": self.cycles, "cell_cycles": self.cell_cycles, "stale": self.stale,
                "notes": self.notes}

    @classmethod
    def from_dict(cls, d: dict) -> LinksResult:
        return cls(d["nodes"], d["edges"], d["missing"], d["cycles"], d["cell_cycles"], d["stale"],
                   d["notes"])

    def sections(self) -> list[Section]:
        confirmed = [c for c in self.cell_cycles if c["status"] == "confirmed"]
        unconfirmed = [c for c in self.cell_cycles if c["status"] != "confirmed"]
        return [
            Section("Files", ["Path", "Exists", "Saved", "Source", "Load error"],
                    [[n["path"], "yes" if n["exists"] else "no", n["saved_at"] or "-",
                      n["saved_at_source"] or "-", n["load_error"] or ""] for n in self.nodes]),
            Section("Links", ["Dependent", "Precedent", "References"],
                    [[e["dependent"], e["precedent"], str(e["count"])] for e in self.edges]),
            Section("Missing targets", ["Path"], [[m] for m in self.missing],
                    notes=[f"{len(self.missing)} missing of {len(self.nodes)} files"]),
            Section("File cycles", ["Files"], [[" -> ".join(c)] for c in self.cycles]),
            Section("Cell-level cross-file cycles", ["Cells"], [[" -> ".join(c["cells"])] for c in confirmed]),
            Section("Unconfirmed cycles", ["Status", "Files"],
                    [[c["status"], ", ".join(c["files"])] for c in unconfirmed]),
            Section("Stale links", ["Precedent", "Saved", "Dependent", "Saved"],
                    [[s["precedent"], s["precedent_saved_at"], s["dependent"], s["dependent_saved_at"]]
                     for s in self.stale], notes=list(self.notes)),
        ]


RESULT_TYPES = {cls.kind: cls for cls in (
    AnalysisResult, MetricsResult, UniqueResult, IndexReport, SheetMapResult, FlowResult,
    TraceResult, EvalDump, LinksResult,
)}


def from_json(text: str):
    """Rebuild a result object from its JSON rendering."""
    d = json.loads(text)
    return RESULT_TYPES[d["kind"]].from_dict(d)


# --------------------------------------------------------------------------
# Renderers
# --------------------------------------------------------------------------

def _text_table(columns: list[str], rows: list[list[str]]) -> list[str]:
    widths = [len(c) for c in columns]
    for row in rows:
        for i, v in enumerate(row):
            widths[i] = max(widths[i], len(v))

    def line(values):
        return "  ".join(v.ljust(w) for v, w in zip(values, widths)).rstrip()

    return [line(columns), line(["-" * w for w in widths]), *(line(r) for r in rows)]


def render_text(result) -> str:
    out = []
    for s in result.sections():
        out.append(s.title)
        out.append("=" * len(s.title))
        if s.columns:
            out.extend(_text_table(s.columns, s.rows) if s.rows else ["none"])
        out.extend(s.notes)
        out.append("")
    return "\n".join(out)


def _md_cell(v: str) -> str:
    return v.replace("|", "\\|") if v else " "


def render_md(result) -> str:
    out = []
    for i, s in enumerate(result.sections()):
        level = "#" if i == 0 else "##"
        heading = f'{level} <a id="{s.anchor}"></a>{s.title}' if s.anchor else f"{level} {s.title}"
        out.extend([heading, ""])
        if s.columns:
            if s.rows:
                out.append("| " + " | ".join(s.columns) + " |")
                out.append("|" + "|".join("---" for _ in s.columns) + "|")
                out.extend("| " + " | ".join(_md_cell(v) for v in r) + " |" for r in s.rows)
            else:
                out.append("none")
            out.append("")
        if s.notes:
            out.extend(f"- {n}" for n in s.notes)
            out.append("")
    if isinstance(result, IndexReport):
        # the navigation role of an index sheet
        links = [f"- [{e.sheet}](#{anchor(e.sheet)})" for e in result.entries]
        out[2:2] = ["Sheets:", "", *links, ""]
    return "\n".join(out).rstrip("\n") + "\n"


def render_json(result) -> str:
    return json.dumps(result.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def render(result, fmt: str = "text") -> str:
    if fmt == "json":
        return render_json(result)
    if fmt == "text":
        return render_text(result)
    if fmt == "md":
        return render_md(result)
    raise ValueError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")
