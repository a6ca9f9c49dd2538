from __future__ import annotations

import re
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from sheetlens.config import Config, ConfigError, FactorOverride, load_config
from sheetlens.formula import parse_formula
from sheetlens.model import CellId, load_workbook
from sheetlens.pipeline import run
from sheetlens.risk import (
    DEFAULT_CATALOG, FOUND, NOT_FOUND, build_catalog, detect_mixed_formula_constants,
    detect_text_stored_numbers, detect_unordered_lookup, overall_rating, save_catalog,
)

from conftest import FIXTURES, book, evaluate

PLDEMO_TRIGGERED = {
    "mixed_formula_constants", "hidden_rows_cols", "conditional_formatting", "most_complex_formula",
    "total_formulas", "unique_formulas", "workbook_size", "sheet_count", "vba_lines", "largest_result",
}


def test_catalog_weights_and_order():
    assert sum(f.weight for f in DEFAULT_CATALOG) == 149
    assert len({f.id for f in DEFAULT_CATALOG}) == len(DEFAULT_CATALOG)
    assert DEFAULT_CATALOG[0].id == "circular_refs" and DEFAULT_CATALOG[-1].id == "largest_result"
    weights = {f.id: f.weight for f in DEFAULT_CATALOG}
    assert weights["vlookup_unordered"] == weights["hlookup_unordered"] == 8
    assert weights["largest_result"] == 0


def test_pldemo_report(pldemo):
    report = pldemo.risk()
    assert {f.factor_id for f in report.findings if f.triggered} == PLDEMO_TRIGGERED
    assert (report.triggered_weight, report.total_weight, report.overall_rating_percent) == (51, 149, 34)
    assert [f.factor_id for f in report.findings] == [f.id for f in DEFAULT_CATALOG]


def test_pldemo_witnesses(pldemo):
    report = pldemo.risk()
    mixed = report.finding("mixed_formula_constants")
    assert mixed.example_address == "PhasingTable!$C$6"
    assert mixed.example_formula.startswith('=IF(MAX(C8:AP19)>2,"Warning some growths are more than d')
    assert report.finding("hidden_rows_cols").example_address == "PhasingTable!Column Q"
    cf = report.finding("conditional_formatting")
    assert (cf.example_address, cf.example_formula) == ("North!$E$4", "=D4+1")
    assert report.finding("longest_formula").measured_value == 66
    complex_ = report.finding("most_complex_formula")
    assert (complex_.measured_value, complex_.example_address) == (8, "Total!$P$13")
    assert report.finding("workbook_size").measured_value == 132
    largest = report.finding("largest_result")
    assert (largest.measured_value, largest.example_address, largest.example_formula) == (
        25000, "Total!$P$12", "=SUM(P8:P11)")
    vba = report.finding("vba_lines")
    assert (vba.example_address, vba.example_formula) == ("290 Lines", "In 9 Components")


def test_measure_ties_go_to_last_cell():
    report = evaluate({"S": {"A1": "=SUM(B1)", "A2": "=MAX(B2)", "B1": 5, "B2": -5}}).risk()
    assert report.finding("most_complex_formula").example_address == "S!$A$2"
    assert report.finding("largest_result").example_address == "S!$A$2"


def test_weight_zero_factor_is_neutral(pldemo):
    report = pldemo.risk()
    catalog = build_catalog()
    flipped = [replace(f, status="within_limit") if f.factor_id == "largest_result" else f
               for f in report.findings]
    assert overall_rating(report.findings, catalog) == overall_rating(flipped, catalog) == 34


def test_empty_workbook_rates_zero():
    report = run(load_workbook(FIXTURES / "empty.json")).risk()
    assert report.overall_rating_percent == 0
    assert all(f.status in ("not_found", "within_limit") for f in report.findings)


def test_every_factor_triggered_rates_100():
    measures = [f.id for f in DEFAULT_CATALOG if f.kind == "measure"]
    config = Config(factors=tuple(FactorOverride(m, threshold=-1) for m in measures))
    report = run(load_workbook(FIXTURES / "smells.json"), config).risk()
    assert [f.factor_id for f in report.findings if not f.triggered] == []
    assert report.overall_rating_percent == 100


def test_smells_presence_factors():
    report = run(load_workbook(FIXTURES / "smells.json")).risk()
    presence = [f for f in report.findings if f.factor_id in {c.id for c in DEFAULT_CATALOG if c.kind == "presence"}]
    assert all(f.status == FOUND for f in presence)
    assert "confirmed unordered" in report.finding("vlookup_unordered").detail
    assert "confirmed unordered" in report.finding("hlookup_unordered").detail


def test_text_stored_numbers():
    wb = book({"S": {"A1": "0042", "A2": 42, "A3": "42a", "A4": " 1e5 ", "A5": "-.5"}})
    assert [c.render() for c in detect_text_stored_numbers(wb.sheets[0])] == ["S!A1", "S!A4", "S!A5"]


@pytest.mark.parametrize("text,expected", [
    ('=IF(MAX(C8:AP19)>2,"Warning",0)', 2.0),
    ("=A1+B1", None),
    ("=ROUND(A1,0)+1", None),
    ("=ROUND(A1,2)", None),
    ("=A1*12", 12.0),
    ('=A1&"7"', None),
])
def test_mixed_formula_constants(text, expected):
    assert detect_mixed_formula_constants(parse_formula(text)) == expected


def test_mixed_constants_exemptions_are_configurable():
    config = Config(exempt_literals=(0.0, 1.0, 12.0))
    assert detect_mixed_formula_constants(parse_formula("=A1*12"), config) is None


def _lookup(cells, formula, with_eval=True):
    cells = dict(cells, Z1=formula)
    pipe = run(book({"S": cells}), evaluate=with_eval)
    host = CellId("S", 1, 26)
    return detect_unordered_lookup(parse_formula(formula), pipe.wb, host, pipe.evaluation, pipe.analysis)


def test_unordered_lookup_examples():
    data = {"D1": 1, "D2": 5, "D3": 3, "E1": 10, "E2": 50, "E3": 30}
    assert _lookup(data, "=VLOOKUP(A1,D1:E3,2)") == [("VLOOKUP", "confirmed unordered")]
    assert _lookup(data, "=VLOOKUP(A1,D1:E3,2,FALSE)") == []
    assert _lookup(data, "=VLOOKUP(A1,D1:E3,2)", with_eval=False) == [("VLOOKUP", "unverified")]
    ordered = {"D1": 1, "D2": 3, "D3": 5, "D5": 0}
    # blanks end the checked region, so the 0 after the gap is ignored
    assert _lookup(ordered, "=VLOOKUP(A1,D1:E5,2,TRUE)") == [("VLOOKUP", "sorted")]
    assert _lookup({"D1": 1, "E1": "a", "F1": 2}, "=HLOOKUP(A1,D1:F2,2,1)") == [("HLOOKUP", "confirmed unordered")]
    assert _lookup({"A1": 0}, "=VLOOKUP(1,D1:E3,2,A1)") == []


def test_eval_dependent_factors_degrade_without_evaluation():
    report = run(load_workbook(FIXTURES / "smells.json"), evaluate=False).risk()
    errors = report.finding("formula_errors")
    assert errors.status == NOT_FOUND and errors.detail == "skipped: no evaluation"
    assert report.finding("largest_result").measured_value is None
    assert set(report.skipped) == {"formula_errors", "largest_result"}
    assert "unverified" in report.finding("vlookup_unordered").detail


def test_used_range_supplementary_finding():
    report = run(load_workbook(FIXTURES / "bloated.json")).risk()
    blank = [f for f in report.supplementary if f.factor_id == "used_range_blank"]
    assert len(blank) == 1 and abs(blank[0].measured_value - 0.99962) < 1e-5
    assert "trimmed A1:C4" in blank[0].detail
    # supplementary findings carry no weight
    assert report.overall_rating_percent == 0


def test_rating_examples():
    catalog = build_catalog()
    report = run(load_workbook(FIXTURES / "empty.json")).risk()
    assert overall_rating(report.findings, catalog) == 0
    all_on = [replace(f, status=FOUND) for f in report.findings]
    assert overall_rating(all_on, catalog) == 100
    with pytest.raises(ConfigError):
        overall_rating(report.findings, [replace(f, weight=0) for f in catalog])


def test_rating_rounds_half_up():
    # 149 total: choose weights so the ratio lands exactly on .5 with a smaller catalog
    catalog = build_catalog(Config(factors=tuple(
        FactorOverride(f.id, weight=0) for f in DEFAULT_CATALOG[2:])))
    report = run(load_workbook(FIXTURES / "empty.json")).risk()
    findings = [replace(f, status=FOUND) if f.factor_id == "circular_refs" else f for f in report.findings]
    # 10 of 20 -> 50
    assert overall_rating(findings, catalog) == 50
    catalog = build_catalog(Config(factors=(FactorOverride("circular_refs", weight=1),) + tuple(
        FactorOverride(f.id, weight=0) for f in DEFAULT_CATALOG[2:]) + (FactorOverride("text_stored_numbers", weight=7),)))
    # 1 of 8 = 12.5 -> 13
    assert overall_rating(findings, catalog) == 13


@settings(max_examples=200, deadline=None)
@given(st.sets(st.sampled_from([f.id for f in DEFAULT_CATALOG])), st.sampled_from([f.id for f in DEFAULT_CATALOG]))
def test_rating_is_monotone(triggered, extra):
    catalog = build_catalog()
    base = run(load_workbook(FIXTURES / "empty.json"), evaluate=False).risk().findings

    def rating(ids):
        return overall_rating([replace(f, status=FOUND) if f.factor_id in ids else f for f in base], catalog)

    assert rating(triggered | {extra}) >= rating(triggered)


def test_config_overrides_and_validation(tmp_path):
    catalog = build_catalog(Config(factors=(FactorOverride("total_formulas", weight=2, threshold=5000),)))
    f = next(f for f in catalog if f.id == "total_formulas")
    assert (f.weight, f.threshold) == (2, 5000)
    with pytest.raises(ConfigError):
        build_catalog(Config(factors=(FactorOverride("nope", weight=1),)))
    with pytest.raises(ConfigError):
        build_catalog(Config(factors=(FactorOverride("circular_refs", weight=11),)))
    with pytest.raises(ConfigError):
        build_catalog(Config(factors=(FactorOverride("circular_refs", threshold=3),)))
    bad = tmp_path / "bad.json"
    bad.write_text('{"colour": 1}')
    with pytest.raises(ConfigError):
        load_config(bad)


@pytest.mark.parametrize("name", ["pldemo.json", "smells.json", "empty.json", "bloated.json", "cycles.json"])
def test_catalog_config_round_trip(tmp_path, name):
    catalog = build_catalog(Config(factors=(FactorOverride("sheet_count", weight=9, threshold=3),)))
    path = tmp_path / "catalog.json"
    save_catalog(catalog, path)
    reloaded = build_catalog(load_config(path))
    assert reloaded == catalog
    wb = load_workbook(FIXTURES / name)
    a = run(wb, Config(factors=(FactorOverride("sheet_count", weight=9, threshold=3),))).risk()
    b = run(wb, load_config(path)).risk()
    assert a.to_dict() == b.to_dict()


# -- presence detectors versus brute-force scans ------------------------------

FORMULA_POOL = [
    "=A1+B1", "=SUM(A1:B2)", "=A1*3", "=ROUND(A1,0)", '=SUMIF(A1:A4,">1")', "=DSUM(A1:B4,1,A1:A2)",
    '=INDIRECT("A1")', '=IF(A1,IF(B1,1,0),0)', "=IF(A1,1,0)", "=+A1", "=[X.xls]S!A1", "=VLOOKUP(1,A1:B4,2)",
    "=VLOOKUP(1,A1:B4,2,FALSE)", "=HLOOKUP(1,A1:D2,2)", "=1/0",
]
LITERAL_POOL = [1, 2.5, "label", "0042", " 7 ", "1e3", "x1", True]


def _brute_force(cells: dict) -> set[str]:
    found = set()
    for v in cells.values():
        if isinstance(v, str) and not v.startswith("="):
            s = v.strip()
            if re.fullmatch(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?", s):
                found.add("text_stored_numbers")
            continue
        if not isinstance(v, str):
            continue
        body = v[1:]
        if re.search(r"(?<![\w.])(?!0\b|1\b)\d+(\.\d+)?(?![\w.\"])", re.sub(r'"[^"]*"', "", body)) and \
                not re.fullmatch(r"ROUND\(A1,0\)", body):
            found.add("mixed_formula_constants")
        if "SUMIF(" in body:
            found.add("sumif_use")
        if "DSUM(" in body:
            found.add("database_functions")
        if "INDIRECT(" in body:
            found.add("indirect_use")
        if body.count("IF(") - body.count("SUMIF(") >= 2:
            found.add("nested_ifs")
        if body[:1] in "+-*":
            found.add("plus_equals_construct")
        if "[" in body:
            found.add("external_links")
        if re.search(r"VLOOKUP\([^)]*\d\)$", body) and "FALSE" not in body:
            found.add("vlookup_unordered")
        if "HLOOKUP(" in body:
            found.add("hlookup_unordered")
    return found


COMPARED = {"text_stored_numbers", "mixed_formula_constants", "sumif_use", "database_functions",
            "indirect_use", "nested_ifs", "plus_equals_construct", "external_links", "vlookup_unordered",
            "hlookup_unordered"}


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(
    st.tuples(st.integers(5, 14), st.integers(1, 6)).map(lambda rc: f"{'ABCDEF'[rc[1] - 1]}{rc[0]}"),
    st.sampled_from(FORMULA_POOL + LITERAL_POOL), max_size=100))
def test_presence_detectors_match_brute_force(cells):
    report = evaluate({"S": cells}).risk()
    got = {f.factor_id for f in report.findings if f.triggered and f.factor_id in COMPARED}
    assert got == _brute_force(cells)
