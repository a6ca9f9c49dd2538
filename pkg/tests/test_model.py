from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from sheetlens.evaluator import EvalResult
from sheetlens.formula import analyze_formulas
from sheetlens.model import (
    Address, AddressError, CellId, MAX_COLUMN, MAX_ROW, ScaleAdvice, Thresholds, WorkbookFormatError,
    WorkbookMetrics, column_index, column_letters, load_workbook, loads_workbook, parse_address,
    parse_range, scale_advice, used_range_stats, workbook_from_dict, workbook_metrics,
)

from conftest import FIXTURES, book


def _oracle_column(letters: str) -> int:
    n = 0
    for ch in letters:
        n = n * 26 + (ord(ch) - ord("A") + 1)
    return n


def test_column_letters_known_values():
    assert [column_index(x) for x in ("A", "Z", "AA", "AP", "ZZZ")] == [1, 26, 27, 42, 18278]
    assert column_letters(42) == "AP"


def test_column_bijection_exhaustive():
    seen = set()
    for n in range(1, MAX_COLUMN + 1):
        letters = column_letters(n)
        assert column_index(letters) == n
        assert _oracle_column(letters) == n
        seen.add(letters)
    assert len(seen) == MAX_COLUMN


@pytest.mark.parametrize("text,expected", [
    ("A1", Address(1, 1)),
    ("PhasingTable!$C8", Address(3, 8, True, False, "PhasingTable")),
    ("$AP$19", Address(42, 19, True, True)),
    ("'My Sheet'!B$2", Address(2, 2, False, True, "My Sheet")),
    ("'It''s'!A1", Address(1, 1, sheet="It's")),
])
def test_parse_address(text, expected):
    assert parse_address(text) == expected


@pytest.mark.parametrize("text,position", [("A0", 1), ("1A", 0), ("A1x", 2), ("'Open!A1", 8)])
def test_parse_address_reports_position(text, position):
    with pytest.raises(AddressError) as info:
        parse_address(text)
    assert info.value.position == position


sheet_names = st.one_of(
    st.none(),
    st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc"), blacklist_characters="![]*?/\\:"),
            min_size=1, max_size=12),
)


@given(col=st.integers(1, MAX_COLUMN), row=st.integers(1, MAX_ROW), ca=st.booleans(), ra=st.booleans(),
       sheet=sheet_names)
def test_address_round_trip(col, row, ca, ra, sheet):
    a = Address(col, row, ca, ra, sheet)
    assert parse_address(a.render()) == a


def test_minimal_document_loads():
    wb = loads_workbook(json.dumps({"sheets": [{"name": "S", "cells": {"A1": {"v": 1}}}]}))
    assert len(wb.sheets) == 1 and len(wb.sheets[0].cells) == 1
    assert (wb.vba.components, wb.vba.total_lines) == (0, 0)
    assert wb.sheets[0].cell(1, 1).value == 1.0


def test_text_is_never_coerced():
    wb = book({"S": {"A1": "0042", "A2": 42}})
    assert wb.sheets[0].cell(1, 1).stored_type == "s"
    assert wb.sheets[0].cell(1, 1).value == "0042"
    assert wb.sheets[0].cell(2, 1).stored_type == "n"


@pytest.mark.parametrize("doc,needle", [
    ({"sheets": [{"name": "North", "cells": {}}, {"name": "NORTH", "cells": {}}]}, "duplicate sheet"),
    ({"sheets": []}, "at least one sheet"),
    ({"sheets": [{"name": "S", "cells": {"A1": {"v": 1, "t": "s"}}}]}, "does not match"),
    ({"sheets": [{"name": "S", "cells": {"A1": {"f": "A1+1"}}}]}, "must begin"),
    ({"sheets": [{"name": "S", "cells": {"A1": {"f": "=1", "v": 1}}}]}, "both literal and formula"),
])
def test_load_errors(doc, needle):
    with pytest.raises(WorkbookFormatError, match=needle):
        workbook_from_dict(doc)


def test_duplicate_cell_key_and_malformed_json():
    with pytest.raises(WorkbookFormatError, match="duplicate cell"):
        loads_workbook('{"sheets": [{"name": "S", "cells": {"A1": {"v": 1}, "A1": {"v": 2}}}]}')
    with pytest.raises(WorkbookFormatError) as info:
        loads_workbook('{"sheets": [\n  {"name": }]}')
    assert info.value.line == 2


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_workbook(tmp_path / "nope.json")


def test_load_warnings_for_unknown_keys_and_out_of_range_cells():
    wb = workbook_from_dict({"colour": "red", "sheets": [
        {"name": "S", "used_range": "A1:B2", "cells": {"A1": {"v": 1}, "C5": {"v": 2}}}]})
    assert any("colour" in w for w in wb.warnings)
    assert any("outside used range" in w for w in wb.warnings)


def test_load_is_deterministic():
    text = (FIXTURES / "pldemo.json").read_text()
    a, b = loads_workbook(text), loads_workbook(text)
    assert [s.cells for s in a.sheets] == [s.cells for s in b.sheets]
    assert a.saved_at == b.saved_at and a.saved_at.tzinfo is not None


def _sheet(used: str | None, keys: list[str]):
    doc = {"sheets": [{"name": "S", "cells": {k: {"v": 1} for k in keys}}]}
    if used:
        doc["sheets"][0]["used_range"] = used
    return workbook_from_dict(doc).sheets[0]


def test_used_range_examples():
    s = used_range_stats(_sheet("A1:B2", ["A1", "B2"]))
    assert (s.declared_cells, s.populated_cells, s.blank_ratio) == (4, 2, 0.5)
    assert s.trimmed_range == parse_range("A1:B2")

    keys = ["A1", "B1", "C1", "A2", "B2", "C2", "A3", "C3", "A4", "C4"]
    s = used_range_stats(_sheet("A1:Z1000", keys))
    assert s.blank_ratio == pytest.approx(1 - 10 / 26000)
    assert abs(s.blank_ratio - 0.99962) < 1e-5
    assert s.trimmed_range.render() == "A1:C4"

    assert used_range_stats(_sheet("A1:A3", ["A1", "A2", "A3"])).blank_ratio == 0
    empty = used_range_stats(_sheet(None, []))
    assert empty.trimmed_range is None and empty.blank_ratio == 0


@given(st.sets(st.tuples(st.integers(1, 30), st.integers(1, 30)), max_size=40))
def test_used_range_properties(cells):
    keys = [f"{column_letters(c)}{r}" for r, c in cells]
    sheet = _sheet("A1:AD30", keys)
    s = used_range_stats(sheet)
    assert 0 <= s.blank_ratio <= 1
    assert s.populated_cells == sum(1 for c in sheet.cells.values() if not c.is_blank) == len(cells)
    if cells:
        assert s.trimmed_range.within(parse_range("A1:AD30"))


def test_workbook_metrics_largest_result():
    wb = book({"S": {"A1": "=-5", "A2": "=12", "A3": "=-30000"}})
    analysis = analyze_formulas(wb)
    ev = EvalResult({CellId("S", 1, 1): -5.0, CellId("S", 2, 1): 12.0, CellId("S", 3, 1): -30000.0})
    assert workbook_metrics(wb, analysis, ev).largest_numeric_result == 30000
    assert workbook_metrics(wb, analysis).largest_numeric_result is None


def test_workbook_metrics_zero_formulas():
    wb = book({"S": {"A1": 1}})
    m = workbook_metrics(wb, analyze_formulas(wb), EvalResult())
    assert (m.total_formulas, m.total_unique_formulas, m.max_formula_length, m.max_formula_complexity) == (0, 0, 0, 0)
    assert m.largest_numeric_result is None


def test_pldemo_metrics(pldemo):
    m = pldemo.metrics
    assert (m.sheet_count, m.total_formulas, m.total_unique_formulas) == (8, 2176, 13)
    assert (m.vba_components, m.vba_lines) == (9, 290)
    assert m.file_size_bytes / 1024 == 132
    assert m.total_unique_formulas <= m.total_formulas


def _metrics(sheets, formulas):
    return WorkbookMetrics(sheets, formulas, 0, 0, 0, 0, None, 0, 0, 0)


@pytest.mark.parametrize("sheets,formulas,advice", [
    (210, 950_000, ScaleAdvice.CONSIDER_MIGRATION),
    (8, 2176, ScaleAdvice.NORMAL),
    (60, 1000, ScaleAdvice.REVIEW_DESIGN),
    (50, 100_000, ScaleAdvice.NORMAL),
    (10, 500_001, ScaleAdvice.CONSIDER_MIGRATION),
])
def test_scale_advice(sheets, formulas, advice):
    assert scale_advice(_metrics(sheets, formulas), Thresholds()) is advice
