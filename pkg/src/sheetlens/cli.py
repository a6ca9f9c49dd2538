"""sheetlens command line.

Exit codes: 0 ok, 1 ``--fail-above`` exceeded, 2 usage or parse error,
3 input missing or unreadable, 4 malformed workbook document.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import links as linkmod
from .config import Config, ConfigError, load_config
from .evaluator import format_value, trace_precedents
from .graph import CellNotFoundError, dependents, flow_stats, precedents, sheet_matrix
from .model import ErrorCode, WorkbookFormatError, load_workbook
from .pipeline import run
from .report import (
    FORMATS, EvalDump, FlowResult, LinksResult, ReviewStateError, SheetMapResult, TraceResult,
    UniqueResult, index_report, layout_findings, load_review_state, render, sheet_map, sidecar_path,
)

EXIT_OK, EXIT_FAIL_ABOVE, EXIT_USAGE, EXIT_MISSING, EXIT_FORMAT = 0, 1, 2, 3, 4
DEFAULT_CONFIG = "sheetlens.config.json"


class UsageError(Exception):
    pass


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=FORMATS, default="text")
    parser.add_argument("--config", help=f"config file (default ./{DEFAULT_CONFIG} or $SHEETLENS_CONFIG)")
    parser.add_argument("--no-eval", action="store_true", help="skip formula evaluation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sheetlens", description="Spreadsheet review and risk analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="risk report, metrics and scale advice")
    p.add_argument("workbook")
    p.add_argument("--fail-above", type=int, metavar="PERCENT",
                   help="exit 1 when the overall rating is above PERCENT")
    _common(p)
    for name, help_text in (("metrics", "workbook metrics and used-range statistics"),
                            ("unique-formulas", "unique formula list"),
                            ("eval", "evaluated values and errors")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("workbook")
        _common(p)
    p = sub.add_parser("index", help="sheet index with descriptions and review status")
    p.add_argument("workbook")
    p.add_argument("--group", help="only sheets tagged with this group in the review sidecar")
    _common(p)
    for name, help_text in (("sheet-map", "cell classification grid and layout findings"),
                            ("flow", "direction of intra-sheet references")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("sheet")
        p.add_argument("workbook")
        _common(p)
    p = sub.add_parser("trace", help="precedent (or dependent) tree for one cell")
    p.add_argument("cell", help="Sheet!A1")
    p.add_argument("workbook")
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--dependents", action="store_true", help="trace dependents instead")
    _common(p)
    p = sub.add_parser("links", help="cross-workbook link graph")
    p.add_argument("roots", nargs="+", help="directories or globs")
    p.add_argument("--pattern", default="*.json")
    p.add_argument("--jobs", type=int, default=None)
    _common(p)
    return parser


def _config(args) -> Config:
    path = args.config or os.environ.get("SHEETLENS_CONFIG")
    if path is None:
        if not Path(DEFAULT_CONFIG).exists():
            return Config()
        path = DEFAULT_CONFIG
    if not Path(path).exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return load_config(path)


def _cmd_links(args) -> tuple[object, int]:
    g = linkmod.scan(args.roots, args.pattern, args.jobs)
    stale, notes = linkmod.stale_edges(g)
    result = LinksResult(
        nodes=[n.to_dict() for n in g.node_list()],
        edges=[{"dependent": d, "precedent": p, "count": n} for d, p, n in g.edge_list()],
        missing=[n.path for n in g.missing()],
        cycles=linkmod.file_cycles(g),
        cell_cycles=[c.to_dict() for c in linkmod.cell_level_cross_file_cycle(g)],
        stale=[s.to_dict() for s in stale],
        notes=notes,
    )
    return result, EXIT_OK


def _dispatch(args) -> tuple[object, int]:
    if args.command == "links":
        return _cmd_links(args)
    config = _config(args)
    if args.command == "analyze" and args.fail_above is not None and not 0 <= args.fail_above <= 100:
        raise UsageError("--fail-above must be between 0 and 100")
    if args.command == "trace" and args.depth < 1:
        raise UsageError("--depth must be at least 1")
    wb = load_workbook(args.workbook)
    evaluate = not args.no_eval and args.command not in ("unique-formulas", "index", "flow")
    pipe = run(wb, config, evaluate=evaluate or args.command == "eval")
    for w in pipe.warnings:
        print(f"warning: {w}", file=sys.stderr)

    if args.command == "analyze":
        result = pipe.analysis_result()
        code = EXIT_OK
        if args.fail_above is not None and result.risk.overall_rating_percent > args.fail_above:
            code = EXIT_FAIL_ABOVE
        return result, code
    if args.command == "metrics":
        return pipe.metrics_result(), EXIT_OK
    if args.command == "unique-formulas":
        return UniqueResult(wb.name, pipe.analysis.unique(), pipe.analysis.failures), EXIT_OK
    if args.command == "index":
        state = load_review_state(sidecar_path(args.workbook))
        return index_report(wb, pipe.analysis, state, config.description_cell, args.group), EXIT_OK
    if args.command in ("sheet-map", "flow"):
        sheet = wb.sheet(args.sheet)
        if sheet is None:
            raise UsageError(f"no sheet named {args.sheet!r}")
        if args.command == "flow":
            g = pipe.full_graph
            cross = {f"{a} -> {b}": n for (a, b), n in sheet_matrix(g).items()
                     if sheet.name in (a, b)}
            return FlowResult(flow_stats(g, sheet.name), cross), EXIT_OK
        m = sheet_map(sheet, pipe.evaluation)
        return SheetMapResult(m, layout_findings(m, config.interruption_run, config.jumble_neighbors)), EXIT_OK
    if args.command == "trace":
        g = pipe.full_graph
        cell = g.resolve(args.cell)
        if args.dependents:
            tree = dependents(g, cell, args.depth)
        elif pipe.evaluation is not None:
            tree = trace_precedents(wb, pipe.evaluation, pipe.graph, cell, args.depth)
        else:
            tree = precedents(g, cell, args.depth)
        fmt = format_value if pipe.evaluation is not None and not args.dependents else None
        return TraceResult(tree.to_dict(fmt), "dependents" if args.dependents else "precedents",
                           args.depth), EXIT_OK
    if args.command == "eval":
        ev = pipe.evaluation
        values = [(c.render(), format_value(ev.value(c))) for c in pipe.analysis.parsed
                  if c in ev.values or c in ev.unevaluated]
        errors = [(c.render(), format_value(ev.values[c])) for c in pipe.analysis.parsed
                  if isinstance(ev.values.get(c), ErrorCode)]
        return EvalDump(wb.name, values, errors,
                        sorted(((c.render(), r) for c, r in ev.unevaluated.items()),
                               key=lambda e: e[0]),
                        [(str(p), str(d), k) for p, d, k in ev.dynamic_edges], ev.passes), EXIT_OK
    raise UsageError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        result, code = _dispatch(args)
    except (UsageError, ConfigError, CellNotFoundError, ReviewStateError) as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_USAGE
    except WorkbookFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    out = render(result, args.format)
    sys.stdout.buffer.write(out.encode("utf-8"))
    sys.stdout.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
