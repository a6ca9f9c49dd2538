"""One-call analysis of a loaded workbook, shared by the CLI and library users."""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import Config
from .evaluator import EvalResult, evaluate_workbook
from .formula import FormulaAnalysis, analyze_formulas
from .graph import DepGraph, build_graph, merge_dynamic
from .model import Workbook, WorkbookMetrics, scale_advice, used_range_stats, workbook_metrics
from .report import AnalysisResult, MetricsResult
from .risk import RiskReport, run_catalog


@dataclass
class Pipeline:
    wb: Workbook
    config: Config
    analysis: FormulaAnalysis
    graph: DepGraph
    evaluation: EvalResult | None
    metrics: WorkbookMetrics
    warnings: list[str] = field(default_factory=list)

    @property
    def full_graph(self) -> DepGraph:
        """Static edges plus any dynamic edges the evaluator recorded."""
        if self.evaluation is None:
            return self.graph
        return merge_dynamic(self.graph, self.evaluation.dynamic_edges)

    def risk(self) -> RiskReport:
        return run_catalog(self.wb, self.analysis, self.metrics, self.full_graph, self.evaluation,
                           self.config)

    def metrics_result(self) -> MetricsResult:
        return MetricsResult(self.wb.name, self.metrics, scale_advice(self.metrics, self.config.scale),
                             {s.name: used_range_stats(s) for s in self.wb.sheets})

    def analysis_result(self) -> AnalysisResult:
        return AnalysisResult(self.wb.name, self.risk(), self.metrics_result(),
                              self.evaluation is not None, list(self.warnings))


def run(wb: Workbook, config: Config | None = None, evaluate: bool = True) -> Pipeline:
    config = config or Config()
    analysis = analyze_formulas(wb, config.workbook_wide_unique)
    g = build_graph(wb, analysis, config.range_cap)
    evaluation = evaluate_workbook(wb, analysis, g) if evaluate else None
    metrics = workbook_metrics(wb, analysis, evaluation)
    warnings = list(wb.warnings) + list(g.warnings)
    warnings += [f"{f.cell}: cannot parse {f.text!r}: {f.message}" for f in analysis.failures]
    return Pipeline(wb, config, analysis, g, evaluation, metrics, warnings)
