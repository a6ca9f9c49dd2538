from __future__ import annotations

from pathlib import Path

import pytest

from sheetlens.model import workbook_from_dict
from sheetlens.pipeline import run

FIXTURES = Path(__file__).parent / "fixtures"


def cell(v):
    """Interchange cell entry: strings starting with '=' are formulas."""
    if isinstance(v, dict):
        return v
    if isinstance(v, str) and v.startswith("="):
        return {"f": v}
    return {"v": v}


def book(sheets: dict[str, dict], **extra):
    """Workbook from {sheet: {addr: value-or-formula}}."""
    doc = {"name": extra.pop("name", "test.xls"), **extra,
           "sheets": [{"name": n, "cells": {a: cell(v) for a, v in cells.items()}}
                      for n, cells in sheets.items()]}
    return workbook_from_dict(doc)


def evaluate(sheets: dict[str, dict], **extra):
    return run(book(sheets, **extra))


@pytest.fixture(scope="session")
def pldemo_path() -> Path:
    return FIXTURES / "pldemo.json"


@pytest.fixture(scope="session")
def pldemo(pldemo_path):
    from sheetlens.model import load_workbook

    return run(load_workbook(pldemo_path))


def write_book(path: Path, sheets: dict[str, dict], saved_at: str | None = None, **extra) -> Path:
    """Write an interchange document to ``path`` and return it."""
    import json

    doc = {"name": extra.pop("name", path.stem + ".xls"), **extra,
           "sheets": [{"name": n, "cells": {a: cell(v) for a, v in cells.items()}}
                      for n, cells in sheets.items()]}
    if saved_at:
        doc["saved_at"] = saved_at
    path.write_text(json.dumps(doc))
    return path


def hub_farm(root: Path, total: int = 34, absent: int = 14) -> Path:
    """A hub workbook reading one cell from each of ``total`` sources; the last ``absent`` are never written."""
    refs = {f"A{i + 1}": f"=[Src{i:02d}.xls]Data!A1" for i in range(total)}
    write_book(root / "Hub.json", {"Links": refs})
    for i in range(total - absent):
        write_book(root / f"Src{i:02d}.json", {"Data": {"A1": i}})
    return root


# criterion number -> "PASS ..." / "FAIL ..." lines collected by the acceptance suite
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
