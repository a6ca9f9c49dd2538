"""Cross-workbook link graph: missing sources, file cycles, stale links."""

from __future__ import annotations

import glob
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path, PurePosixPath, PureWindowsPath

from .formula import FormulaSyntaxError, RangeRef, Ref, analyze_formulas, parse_formula, walk
from .graph import RangeId, build_graph, strongly_connected_components
from .model import CellId, Workbook, WorkbookFormatError, column_letters, load_workbook, quote_sheet


def norm_key(path: str | Path) -> str:
    """Comparison key: absolute, forward slashes, lower case."""
    return os.path.abspath(str(path)).replace("\\", "/").lower()


def _display(path: str | Path) -> str:
    return os.path.abspath(str(path)).replace("\\", "/")


def _basename(ref: str) -> str:
    return PureWindowsPath(ref).name


@dataclass
class FileNode:
    path: str
    exists: bool
    saved_at: datetime | None = None
    saved_at_source: str | None = None  # "document" or "mtime"
    load_error: str | None = None

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "exists": self.exists,
            "saved_at": self.saved_at.isoformat() if self.saved_at else None,
            "saved_at_source": self.saved_at_source,
            "load_error": self.load_error,
        }


@dataclass
class LinkGraph:
    nodes: dict[str, FileNode] = field(default_factory=dict)
    edges: dict[tuple[str, str], int] = field(default_factory=dict)
    workbooks: dict[str, Workbook] = field(default_factory=dict)
    # (dependent key, referenced book name lower) -> precedent key
    book_targets: dict[tuple[str, str], str] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def node_list(self) -> list[FileNode]:
        return [self.nodes[k] for k in sorted(self.nodes)]

    def edge_list(self) -> list[tuple[str, str, int]]:
        return [(self.nodes[d].path, self.nodes[p].path, n) for (d, p), n in sorted(self.edges.items())]

    def missing(self) -> list[FileNode]:
        return [n for n in self.node_list() if not n.exists]

    def successors(self, key: str) -> list[str]:
        return sorted(p for (d, p) in self.edges if d == key)


def external_refs(wb: Workbook) -> list[str]:
    """Referenced workbook names, one entry per reference occurrence."""
    refs = []
    for _cid, cell in wb.formula_cells():
        try:
            ast = parse_formula(cell.formula)
        except FormulaSyntaxError:
            continue
        refs.extend(n.workbook for n in walk(ast) if isinstance(n, (Ref, RangeRef)) and n.workbook)
    for _name, target in sorted(wb.defined_names.items()):
        text = target if target.startswith("=") else "=" + target
        try:
            ast = parse_formula(text)
        except FormulaSyntaxError:
            continue
        refs.extend(n.workbook for n in walk(ast) if isinstance(n, (Ref, RangeRef)) and n.workbook)
    refs.extend(wb.external_links)
    return refs


def _collect(roots: list[str | Path], pattern: str) -> list[Path]:
    files = set()
    for root in roots:
        text = str(root)
        p = Path(text)
        if p.is_dir():
            files.update(q for q in p.rglob(pattern) if q.is_file())
        elif p.is_file():
            files.add(p)
        elif glob.has_magic(text):
            files.update(Path(q) for q in glob.glob(text, recursive=True) if Path(q).is_file())
    return sorted(files, key=norm_key)


def _load(path: Path) -> tuple[FileNode, Workbook | None]:
    mtime = datetime.fromtimestamp(path.stat().st_mtime, tz=timezone.utc)
    try:
        wb = load_workbook(path)
    except (OSError, WorkbookFormatError) as exc:
        return FileNode(_display(path), True, mtime, "mtime", str(exc)), None
    if wb.saved_at is not None:
        return FileNode(_display(path), True, wb.saved_at, "document"), wb
    return FileNode(_display(path), True, mtime, "mtime"), wb


def _candidates(base: Path, ref: str) -> list[Path]:
    rel = ref.replace("\\", "/")
    name = PurePosixPath(rel).name
    stem = PurePosixPath(name).stem
    out = [base / rel, base / (rel + ".json"), base / (stem + ".json")]
    if rel != name:
        out += [base / name, base / (name + ".json")]
    return out


def scan(roots: list[str | Path], pattern: str = "*.json", jobs: int | None = None) -> LinkGraph:
    """Load every matching workbook under ``roots`` and link them by their external references."""
    g = LinkGraph()
    files = _collect(roots, pattern)
    root_dirs = [Path(r) for r in roots if Path(r).is_dir()]
    with ThreadPoolExecutor(max_workers=jobs or os.cpu_count() or 1) as pool:
        loaded = list(pool.map(_load, files))
    for path, (node, wb) in zip(files, loaded):
        g.nodes[norm_key(path)] = node
        if wb is not None:
            g.workbooks[norm_key(path)] = wb

    by_doc_name: dict[str, str] = {}
    for key in sorted(g.workbooks):
        wb = g.workbooks[key]
        by_doc_name.setdefault(wb.name.lower(), key)
        by_doc_name.setdefault(PurePosixPath(wb.name).stem.lower(), key)

    def resolve(dep_path: Path, ref: str) -> str:
        for base in [dep_path.parent, *root_dirs]:
            for cand in _candidates(base, ref):
                key = norm_key(cand)
                if key in g.nodes:
                    return key
                if cand.is_file():
                    node, wb = _load(cand)
                    g.nodes[key] = node
                    if wb is not None:
                        g.workbooks[key] = wb
                    return key
        name = _basename(ref)
        for probe in (name.lower(), PurePosixPath(name).stem.lower()):
            if probe in by_doc_name:
                return by_doc_name[probe]
        missing = dep_path.parent / name
        key = norm_key(missing)
        g.nodes.setdefault(key, FileNode(_display(missing), False))
        return key

    for path in files:
        dep = norm_key(path)
        wb = g.workbooks.get(dep)
        if wb is None:
            continue
        for ref in external_refs(wb):
            prec = resolve(path, ref)
            g.book_targets[(dep, ref.lower())] = prec
            g.edges[(dep, prec)] = g.edges.get((dep, prec), 0) + 1
    g.nodes = dict(sorted(g.nodes.items()))
    g.edges = dict(sorted(g.edges.items()))
    return g


def file_cycles(g: LinkGraph) -> list[list[str]]:
    """File-level SCCs of size > 1 plus self-linking files, as display paths."""
    keys = sorted(g.nodes)
    comps = strongly_connected_components(keys, g.successors)
    out = []
    for comp in comps:
        if len(comp) > 1 or (comp[0], comp[0]) in g.edges:
            out.append(sorted(comp))
    out.sort()
    return [[g.nodes[k].path for k in comp] for comp in out]


@dataclass(frozen=True)
class CrossFileCycle:
    status: str  # "confirmed" or "unconfirmed (missing file)"
    files: tuple[str, ...]
    cells: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"status": self.status, "files": list(self.files), "cells": list(self.cells)}


def _cell_label(g: LinkGraph, node) -> str:
    key, sheet, row, col = node[:4]
    name = PurePosixPath(g.nodes[key].path).name
    if len(node) == 4:
        return f"[{name}]{quote_sheet(sheet)}!{column_letters(col)}{row}"
    bottom, right = node[4:]
    return f"[{name}]{quote_sheet(sheet)}!{column_letters(col)}{row}:{column_letters(right)}{bottom}"


def cell_level_cross_file_cycle(g: LinkGraph) -> list[CrossFileCycle]:
    """Cell cycles spanning two or more files, found on the union of per-file dependency graphs."""
    results = []
    for comp in file_cycles(g):
        keys = [norm_key(p) for p in comp]
        if not all(g.nodes[k].exists and k in g.workbooks for k in keys):
            results.append(CrossFileCycle("unconfirmed (missing file)", tuple(comp)))
            continue
        succ: dict[tuple, set] = {}

        def label(key: str, node) -> tuple | None:
            target_key = key
            if node.book is not None:
                target_key = g.book_targets.get((key, node.book.lower()))
                if target_key is None or target_key not in g.workbooks:
                    return None
            ws = g.workbooks[target_key].sheet(node.sheet)
            sheet = ws.name if ws is not None else node.sheet
            if isinstance(node, RangeId):
                return (target_key, sheet, node.top, node.left, node.bottom, node.right)
            return (target_key, sheet, node.row, node.col)

        def add(a, b):
            succ.setdefault(a, set()).add(b)
            succ.setdefault(b, set())

        for key in keys:
            wb = g.workbooks[key]
            dg = build_graph(wb, analyze_formulas(wb))
            for e in dg.edges():
                p, d = label(key, e.precedent), label(key, e.dependent)
                if p is None or d is None:
                    continue
                add(p, d)
                if len(p) == 6 and e.precedent.book is not None:
                    # external range: its populated member cells feed it
                    ws = g.workbooks[p[0]].sheet(p[1])
                    if ws is not None:
                        for (r, c), cell in ws.populated():
                            if p[2] <= r <= p[4] and p[3] <= c <= p[5]:
                                add((p[0], ws.name, r, c), p)
        nodes = sorted(succ)
        for cc in strongly_connected_components(nodes, lambda n: sorted(succ[n])):
            if len({n[0] for n in cc}) < 2:
                continue
            files = tuple(sorted({g.nodes[n[0]].path for n in cc}))
            cells = tuple(_cell_label(g, n) for n in sorted(cc, key=lambda n: (n[0], n[1].lower(), *n[2:])))
            results.append(CrossFileCycle("confirmed", files, cells))
    return results


@dataclass(frozen=True)
class StaleEdge:
    precedent: str
    dependent: str
    precedent_saved_at: datetime
    dependent_saved_at: datetime

    def to_dict(self) -> dict:
        return {
            "precedent": self.precedent,
            "dependent": self.dependent,
            "precedent_saved_at": self.precedent_saved_at.isoformat(),
            "dependent_saved_at": self.dependent_saved_at.isoformat(),
        }


def stale_edges(g: LinkGraph) -> tuple[list[StaleEdge], list[str]]:
    """Edges whose source was saved after the file that reads it, plus notes for skipped edges."""
    found, notes = [], []
    for (d, p) in sorted(g.edges):
        dep, prec = g.nodes[d], g.nodes[p]
        if dep.saved_at is None or prec.saved_at is None:
            notes.append(f"skipped {dep.path} -> {prec.path}: missing saved timestamp")
            continue
        if prec.saved_at > dep.saved_at:
            found.append(StaleEdge(prec.path, dep.path, prec.saved_at, dep.saved_at))
    return found, notes
