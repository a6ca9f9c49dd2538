"""Weighted risk-factor catalog and the overall risk rating.

The rating is the triggered share of total catalog weight, as a whole
percentage.  A low rating is not the same as a defect-free workbook.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator

from .config import Config, ConfigError
from .formula import Bool, FormulaAnalysis, FuncCall, NamedRef, Number, RangeRef, UnaryOp, walk
from .graph import DepGraph, find_cycles, resolve_name
from .model import CellId, ErrorCode, Sheet, Visibility, Workbook, WorkbookMetrics, column_letters, looks_numeric, parse_address, used_range_stats

FOUND = "found"
NOT_FOUND = "not_found"
ABOVE = "above_limit"
WITHIN = "within_limit"
TRIGGERED = (FOUND, ABOVE)

DATABASE_FUNCTIONS = frozenset({
    "DSUM", "DCOUNT", "DCOUNTA", "DAVERAGE", "DMAX", "DMIN", "DGET", "DPRODUCT", "DSTDEV", "DVAR",
})


@dataclass(frozen=True)
class RiskFactor:
    id: str
    title: str
    category: str
    weight: int
    kind: str = "presence"
    threshold: float | None = None


DEFAULT_CATALOG: tuple[RiskFactor, ...] = (
    RiskFactor("circular_refs", "Circular References", "high", 10),
    RiskFactor("text_stored_numbers", "Cells Displaying A Number But Storing Text", "high", 10),
    RiskFactor("mixed_formula_constants", "Mixed Formulas And Values", "high", 10),
    RiskFactor("formula_errors", "Formulas Evaluating To An Error", "high", 10),
    RiskFactor("vlookup_unordered", "Vlookups Expecting An Ordered List", "high", 8),
    RiskFactor("hlookup_unordered", "Hlookups Expecting An Ordered List", "high", 8),
    RiskFactor("external_links", "Links To External Workbooks", "significant", 5),
    RiskFactor("very_hidden_sheets", "Presence Of Very Hidden Sheets", "significant", 5),
    RiskFactor("hidden_rows_cols", "Hidden Rows Or Columns", "significant", 3),
    RiskFactor("plus_equals_construct", '"=*" Construct', "significant", 3),
    RiskFactor("conditional_formatting", "Conditional Formatting", "significant", 3),
    RiskFactor("pivot_tables", "Use Of Pivot Tables", "significant", 3),
    RiskFactor("array_formulas", "Array Formulas", "complex_logic", 8),
    RiskFactor("nested_ifs", "Nested If Statements", "complex_logic", 6),
    RiskFactor("sumif_use", "Use Of Sumif", "complex_logic", 5),
    RiskFactor("database_functions", "Use Of Database Functions (Dsum Etc)", "complex_logic", 5),
    RiskFactor("indirect_use", "Use Of Indirect", "complex_logic", 5),
    RiskFactor("longest_formula", "Longest Formula", "measure", 7, "measure", 100),
    RiskFactor("most_complex_formula", "Most Complex Formula", "measure", 7, "measure", 7),
    RiskFactor("total_formulas", "Total Number Of Formulas", "measure", 5, "measure", 1000),
    RiskFactor("unique_formulas", "Total Number Of Unique Formulas", "measure", 5, "measure", 10),
    RiskFactor("workbook_size", "Workbook Size", "measure", 5, "measure", 100),
    RiskFactor("sheet_count", "No Of Worksheets", "measure", 5, "measure", 5),
    RiskFactor("vba_lines", "Total All Lines of VBA Code", "measure", 8, "measure", 0),
    RiskFactor("largest_result", "Largest Formula Result", "measure", 0, "measure", 10000),
)

EVAL_DEPENDENT = ("formula_errors", "largest_result")


def build_catalog(config: Config | None = None) -> list[RiskFactor]:
    """Default catalog with weight/threshold overrides from ``config`` applied."""
    catalog = list(DEFAULT_CATALOG)
    if config is None:
        return catalog
    index = {f.id: i for i, f in enumerate(catalog)}
    for override in config.factors:
        if override.id not in index:
            raise ConfigError(f"unknown risk factor {override.id!r}")
        i = index[override.id]
        f = catalog[i]
        if override.weight is not None:
            if not 0 <= override.weight <= 10:
                raise ConfigError(f"weight for {override.id!r} must be within 0..10")
            f = replace(f, weight=override.weight)
        if override.threshold is not None:
            if f.kind != "measure":
                raise ConfigError(f"{override.id!r} is a presence factor and takes no threshold")
            f = replace(f, threshold=override.threshold)
        catalog[i] = f
    return catalog


@dataclass(frozen=True)
class Finding:
    factor_id: str
    title: str
    status: str
    weight: int
    measured_value: float | None = None
    example_address: str | None = None
    example_formula: str | None = None
    detail: str | None = None

    @property
    def triggered(self) -> bool:
        return self.status in TRIGGERED

    def to_dict(self) -> dict:
        return {
            "id": self.factor_id,
            "title": self.title,
            "status": self.status,
            "value": self.measured_value,
            "example_address": self.example_address,
            "example_formula": self.example_formula,
            "weight": self.weight,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Finding:
        return cls(d["id"], d["title"], d["status"], d["weight"], d["value"],
                   d["example_address"], d["example_formula"], d["detail"])


@dataclass
class RiskReport:
    findings: list[Finding]
    overall_rating_percent: int
    triggered_weight: int
    total_weight: int
    supplementary: list[Finding] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    def finding(self, factor_id: str) -> Finding:
        return next(f for f in self.findings if f.factor_id == factor_id)

    def to_dict(self) -> dict:
        return {
            "overall_rating_percent": self.overall_rating_percent,
            "triggered_weight": self.triggered_weight,
            "total_weight": self.total_weight,
            "findings": [f.to_dict() for f in self.findings],
            "supplementary": [f.to_dict() for f in self.supplementary],
            "skipped": list(self.skipped),
        }

    @classmethod
    def from_dict(cls, d: dict) -> RiskReport:
        return cls(
            [Finding.from_dict(f) for f in d["findings"]],
            d["overall_rating_percent"],
            d["triggered_weight"],
            d["total_weight"],
            [Finding.from_dict(f) for f in d["supplementary"]],
            list(d["skipped"]),
        )


def overall_rating(findings: list[Finding], catalog: list[RiskFactor]) -> int:
    """round(100 * triggered / total), halves rounding up."""
    total = sum(f.weight for f in catalog)
    if total <= 0:
        raise ConfigError("catalog total weight is zero; rating undefined")
    weights = {f.id: f.weight for f in catalog}
    triggered = sum(weights[f.factor_id] for f in findings if f.triggered)
    return (200 * triggered + total) // (2 * total)


# --------------------------------------------------------------------------
# Individual detectors
# --------------------------------------------------------------------------

def detect_text_stored_numbers(sheet: Sheet) -> list[CellId]:
    return [
        CellId(sheet.name, r, c)
        for (r, c), cell in sheet.populated()
        if cell.stored_type == "s" and looks_numeric(cell.value)
    ]


def embedded_constants(ast, config: Config = Config()) -> list[float]:
    """Numeric literals in a formula that are not on the exempt list."""
    exempt_nodes = set()
    for node in walk(ast):
        if isinstance(node, FuncCall) and node.name in config.exempt_digit_functions and len(node.args) > 1:
            digits = node.args[1]
            if isinstance(digits, UnaryOp) and digits.op in "+-":
                digits = digits.operand
            exempt_nodes.add(id(digits))
    return [
        n.value
        for n in walk(ast)
        if isinstance(n, Number) and id(n) not in exempt_nodes and n.value not in config.exempt_literals
    ]


def detect_mixed_formula_constants(ast, config: Config = Config()) -> float | None:
    """The first non-exempt literal, or None."""
    found = embedded_constants(ast, config)
    return found[0] if found else None


def _cell_value(wb: Workbook, evaluation, cid: CellId):
    ws = wb.sheet(cid.sheet)
    if ws is None:
        return None
    cell = ws.cells.get((cid.row, cid.col))
    if cell is None:
        return None
    if cell.is_formula:
        return evaluation.value(cid) if evaluation is not None else None
    return cell.value


def _ascending(values) -> bool:
    from .evaluator import compare

    prev = None
    for v in values:
        if v is None:
            break
        if isinstance(v, ErrorCode):
            return False
        if prev is not None and compare(prev, v) > 0:
            return False
        prev = v
    return True


def detect_unordered_lookup(ast, wb: Workbook, host: CellId, evaluation=None,
                            analysis: FormulaAnalysis | None = None) -> list[tuple[str, str]]:
    """(VLOOKUP|HLOOKUP, detail) for each approximate-match lookup in a formula.

    detail is ``sorted``, ``confirmed unordered`` or ``unverified`` (no values).
    """
    out = []
    for node in walk(ast):
        if not isinstance(node, FuncCall) or node.name not in ("VLOOKUP", "HLOOKUP"):
            continue
        if len(node.args) < 3:
            continue
        approximate = True
        if len(node.args) >= 4:
            flag = node.args[3]
            if isinstance(flag, Bool):
                approximate = flag.value
            elif isinstance(flag, Number):
                approximate = flag.value != 0
            elif evaluation is not None and analysis is not None:
                from .evaluator import _to_bool, evaluate_expression

                b = _to_bool(evaluate_expression(wb, analysis, evaluation, flag, host))
                approximate = b if isinstance(b, bool) else True
        if not approximate:
            continue
        detail = "unverified"
        table = node.args[1]
        if isinstance(table, NamedRef):
            table = resolve_name(wb, table.name)
        if evaluation is not None and isinstance(table, RangeRef) and table.workbook is None:
            sheet = wb.sheet(table.start.sheet or host.sheet)
            if sheet is not None:
                top, bottom = sorted((table.start.row, table.end.row))
                left, right = sorted((table.start.col, table.end.col))
                if node.name == "VLOOKUP":
                    cells = [CellId(sheet.name, r, left) for r in range(top, bottom + 1)]
                else:
                    cells = [CellId(sheet.name, top, c) for c in range(left, right + 1)]
                values = [_cell_value(wb, evaluation, c) for c in cells]
                detail = "sorted" if _ascending(values) else "confirmed unordered"
        out.append((node.name, detail))
    return out


# --------------------------------------------------------------------------
# Catalog run
# --------------------------------------------------------------------------

@dataclass
class _Hit:
    address: str | None = None
    formula: str | None = None
    detail: str | None = None


def _first(items: Iterator[_Hit]) -> _Hit | None:
    return next(iter(items), None)


def _formula_hits(analysis: FormulaAnalysis, predicate) -> Iterator[_Hit]:
    for cid, p in analysis.parsed.items():
        if predicate(p):
            yield _Hit(cid.render(absolute=True), p.text)


def run_catalog(wb: Workbook, analysis: FormulaAnalysis, metrics: WorkbookMetrics, g: DepGraph,
                evaluation=None, config: Config | None = None) -> RiskReport:
    config = config or Config()
    catalog = build_catalog(config)
    parsed = analysis.parsed
    hits: dict[str, _Hit | None] = {}
    measures: dict[str, tuple[float | None, _Hit | None]] = {}
    skipped = []

    cycles = find_cycles(g)
    hits["circular_refs"] = (
        _Hit(cycles[0][0].render(absolute=True),
             detail=f"{len(cycles)} cycle(s); first: " + ", ".join(str(n) for n in cycles[0]))
        if cycles else None
    )
    hits["text_stored_numbers"] = _first(
        _Hit(cid.render(absolute=True), detail=f"text {wb.sheet(cid.sheet).cell(cid.row, cid.col).value!r}")
        for s in wb.sheets for cid in detect_text_stored_numbers(s)
    )
    hits["mixed_formula_constants"] = _first(
        _Hit(cid.render(absolute=True), p.text, f"literal {embedded_constants(p.ast, config)[0]:g}")
        for cid, p in parsed.items() if embedded_constants(p.ast, config)
    )
    if evaluation is None:
        hits["formula_errors"] = None
        skipped.append("formula_errors")
    else:
        hits["formula_errors"] = _first(
            _Hit(cid.render(absolute=True), p.text, str(evaluation.values[cid]))
            for cid, p in parsed.items()
            if isinstance(evaluation.values.get(cid), ErrorCode)
            and evaluation.values[cid] is not ErrorCode.CIRC
        )

    lookups: dict[str, list[_Hit]] = {"VLOOKUP": [], "HLOOKUP": []}
    for cid, p in parsed.items():
        if not {"VLOOKUP", "HLOOKUP"} & p.metrics.function_names:
            continue
        for fname, detail in detect_unordered_lookup(p.ast, wb, cid, evaluation, analysis):
            lookups[fname].append(_Hit(cid.render(absolute=True), p.text, detail))
    for fname, fid in (("VLOOKUP", "vlookup_unordered"), ("HLOOKUP", "hlookup_unordered")):
        found = lookups[fname]
        if not found:
            hits[fid] = None
            continue
        details = {h.detail for h in found}
        summary = ("confirmed unordered" if "confirmed unordered" in details
                   else "unverified" if "unverified" in details else "sorted")
        hits[fid] = _Hit(found[0].address, found[0].formula,
                         f"{summary} ({len(found)} approximate-match lookup(s))")

    ext = _first(_formula_hits(analysis, lambda p: p.metrics.has_external_ref))
    if ext is None:
        for name, target in sorted(wb.defined_names.items()):
            if "[" in target:
                ext = _Hit(detail=f"defined name {name} -> {target}")
                break
    if ext is None and wb.external_links:
        ext = _Hit(detail="declared links: " + ", ".join(wb.external_links))
    hits["external_links"] = ext

    hits["very_hidden_sheets"] = _first(
        _Hit(s.name, detail="sheet is very hidden") for s in wb.sheets
        if s.visibility is Visibility.VERY_HIDDEN
    )

    def hidden(s: Sheet) -> Iterator[_Hit]:
        for r in sorted(s.hidden_rows):
            yield _Hit(f"{s.name}!Row {r}", detail="is hidden")
        for c in sorted(s.hidden_cols):
            yield _Hit(f"{s.name}!Column {column_letters(c)}", detail="is hidden")

    hits["hidden_rows_cols"] = _first(h for s in wb.sheets for h in hidden(s))
    hits["plus_equals_construct"] = _first(
        _Hit(cid.render(absolute=True), cell.formula)
        for cid, cell in wb.formula_cells() if cell.formula[1:2] in ("+", "-", "*")
    )

    def cf_hits() -> Iterator[_Hit]:
        for s in wb.sheets:
            for rng, rule in s.conditional_formats:
                first = rng.split(":")[0].replace("$", "")
                try:
                    a = parse_address(first)
                    addr = CellId(s.name, a.row, a.col).render(absolute=True)
                except ValueError:
                    addr = f"{s.name}!{rng}"
                yield _Hit(addr, rule)

    hits["conditional_formatting"] = _first(cf_hits())
    hits["pivot_tables"] = _first(
        _Hit(s.name, detail=f"{s.pivot_table_count} pivot table(s)") for s in wb.sheets
        if s.pivot_table_count > 0
    )
    hits["array_formulas"] = _first(
        _Hit(cid.render(absolute=True), cell.formula, f"array over {cell.array_range.render()}")
        for cid, cell in wb.formula_cells() if cell.array_range is not None
    )
    hits["nested_ifs"] = _first(
        _Hit(cid.render(absolute=True), p.text, f"IF depth {p.metrics.max_if_depth}")
        for cid, p in parsed.items() if p.metrics.max_if_depth >= config.nested_if_depth
    )
    hits["sumif_use"] = _first(_formula_hits(analysis, lambda p: "SUMIF" in p.metrics.function_names))
    hits["database_functions"] = _first(
        _formula_hits(analysis, lambda p: bool(DATABASE_FUNCTIONS & p.metrics.function_names)))
    hits["indirect_use"] = _first(_formula_hits(analysis, lambda p: "INDIRECT" in p.metrics.function_names))

    # ties go to the last cell in sheet order
    def witness_max(key) -> _Hit | None:
        best = None
        for cid, p in parsed.items():
            if best is None or key(p) >= key(best[1]):
                best = (cid, p)
        return _Hit(best[0].render(absolute=True), best[1].text) if best else None

    measures["longest_formula"] = (float(metrics.max_formula_length),
                                   witness_max(lambda p: p.metrics.length))
    measures["most_complex_formula"] = (float(metrics.max_formula_complexity),
                                        witness_max(lambda p: p.metrics.complexity))
    measures["total_formulas"] = (float(metrics.total_formulas), None)
    measures["unique_formulas"] = (float(metrics.total_unique_formulas), None)
    measures["workbook_size"] = (metrics.file_size_bytes / 1024, _Hit(detail=f"{metrics.file_size_bytes} bytes"))
    measures["sheet_count"] = (float(metrics.sheet_count), None)
    measures["vba_lines"] = (float(metrics.vba_lines), _Hit(
        f"{metrics.vba_lines} Lines", f"In {metrics.vba_components} Components",
        f"{metrics.vba_lines}/{metrics.vba_components}"))
    if evaluation is None:
        measures["largest_result"] = (None, _Hit(detail="skipped: no evaluation"))
        skipped.append("largest_result")
    else:
        best = None
        for cid in parsed:
            v = evaluation.values.get(cid)
            if isinstance(v, float) and (best is None or abs(v) >= abs(best[1])):
                best = (cid, v)
        if best is None:
            measures["largest_result"] = (None, None)
        else:
            cid, v = best
            measures["largest_result"] = (abs(v), _Hit(cid.render(absolute=True), parsed[cid].text
                                                        if cid in parsed else None))

    findings = []
    for factor in catalog:
        if factor.kind == "measure":
            value, hit = measures[factor.id]
            above = value is not None and value > factor.threshold
            status = ABOVE if above else WITHIN
        else:
            hit = hits[factor.id]
            value = None
            status = FOUND if hit is not None else NOT_FOUND
            if factor.id in skipped:
                hit = _Hit(detail="skipped: no evaluation")
        hit = hit or _Hit()
        findings.append(Finding(factor.id, factor.title, status, factor.weight, value,
                                hit.address, hit.formula, hit.detail))

    total = sum(f.weight for f in catalog)
    triggered = sum(f.weight for f in findings if f.triggered)
    rating = overall_rating(findings, catalog)
    return RiskReport(findings, rating, triggered, total,
                      supplementary_findings(wb, analysis, evaluation, config), skipped)


def supplementary_findings(wb: Workbook, analysis: FormulaAnalysis, evaluation,
                           config: Config) -> list[Finding]:
    """Unweighted findings outside the catalog: used-range bloat, parse failures, coverage gaps."""
    out = []
    for sheet in wb.sheets:
        stats = used_range_stats(sheet)
        if stats.blank_ratio > config.blank_ratio_threshold:
            trimmed = stats.trimmed_range.render() if stats.trimmed_range else "empty"
            out.append(Finding(
                "used_range_blank", "Blank Cells In Used Range", FOUND, 0, round(stats.blank_ratio, 6),
                f"{sheet.name}!{sheet.used_range.render()}" if sheet.used_range else sheet.name,
                None, f"{stats.populated_cells} of {stats.declared_cells} cells populated; trimmed {trimmed}",
            ))
    if analysis.failures:
        f = analysis.failures[0]
        out.append(Finding("parse_failures", "Formulas That Do Not Parse", FOUND, 0,
                           float(len(analysis.failures)), f.cell.render(absolute=True), f.text, f.message))
    if evaluation is not None and evaluation.unevaluated:
        cid, reason = next(iter(evaluation.unevaluated.items()))
        out.append(Finding("unevaluated", "Formulas Outside The Evaluated Subset", FOUND, 0,
                           float(len(evaluation.unevaluated)), cid.render(absolute=True), None, reason))
    return out


def save_catalog(catalog: list[RiskFactor], path: str | Path) -> None:
    doc = {"factors": [{"id": f.id, "weight": f.weight, **({"threshold": f.threshold}
                                                           if f.threshold is not None else {})}
                       for f in catalog]}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
