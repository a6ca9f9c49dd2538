"""sheetlens: static review of spreadsheet workbooks.

Load a workbook document, parse its formulas, build the dependency graph,
optionally evaluate it, and score it against a weighted risk catalog.
"""

from __future__ import annotations

from .config import Config, load_config
from .model import Workbook, load_workbook, loads_workbook
from .pipeline import Pipeline, run

__all__ = ["Config", "Pipeline", "Workbook", "load_config", "load_workbook", "loads_workbook", "run"]
__version__ = "0.1.0"
