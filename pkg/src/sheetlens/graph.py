"""Cell-level dependency graph: construction, cycles, trees, flow statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, NamedTuple, Union

from .formula import FormulaAnalysis, FormulaSyntaxError, NamedRef, RangeRef, Ref, parse_formula, walk
from .model import CellId, CellRange, Workbook, column_letters, parse_address, quote_sheet

DEFAULT_RANGE_CAP = 4096
NAME_DEPTH_CAP = 16


class RangeId(NamedTuple):
    """Synthetic node standing for a range too large to expand (or an external range)."""

    sheet: str
    top: int
    left: int
    bottom: int
    right: int
    book: str | None = None

    def render(self, absolute: bool = False) -> str:
        d = "$" if absolute else ""
        body = (f"{d}{column_letters(self.left)}{d}{self.top}:"
                f"{d}{column_letters(self.right)}{d}{self.bottom}")
        prefix = quote_sheet(self.sheet) if self.book is None else f"[{self.book}]{self.sheet}"
        return f"{prefix}!{body}"

    def __str__(self) -> str:
        return self.render()


GraphNode = Union[CellId, RangeId]


class CellNotFoundError(KeyError):
    pass


@dataclass(frozen=True)
class Edge:
    precedent: GraphNode
    dependent: GraphNode
    kind: str = "static"  # or "dynamic"
    construct: str | None = None


def strongly_connected_components(
    nodes: Iterable[Hashable], successors: Callable[[Hashable], Iterable[Hashable]]
) -> list[list]:
    """Tarjan's algorithm, iterative so long reference chains don't hit the recursion limit."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    result: list[list] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(successors(root)))]
        while work:
            v, it = work[-1]
            descended = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    descended = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if descended:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                result.append(comp)
    return result


@dataclass
class DepGraph:
    sheet_order: dict[str, int] = field(default_factory=dict)
    formula_cells: set[CellId] = field(default_factory=set)
    coarse_ranges: set[RangeId] = field(default_factory=set)
    warnings: list[str] = field(default_factory=list)
    _nodes: set = field(default_factory=set)
    _edges: dict[tuple, Edge] = field(default_factory=dict)
    _succ: dict = field(default_factory=dict)
    _pred: dict = field(default_factory=dict)

    def sort_key(self, node: GraphNode) -> tuple:
        external = node.book is not None
        idx = self.sheet_order.get(node.sheet.lower(), len(self.sheet_order)) if not external else 0
        if isinstance(node, RangeId):
            return (external, node.book or "", idx, node.sheet.lower(), 1, node.top, node.left,
                    node.bottom, node.right)
        return (external, node.book or "", idx, node.sheet.lower(), 0, node.row, node.col, 0, 0)

    def add_node(self, node: GraphNode) -> None:
        if node not in self._nodes:
            self._nodes.add(node)
            self._succ[node] = set()
            self._pred[node] = set()

    def add_edge(self, precedent: GraphNode, dependent: GraphNode, kind: str = "static",
                 construct: str | None = None) -> None:
        key = (precedent, dependent, kind)
        if key in self._edges:
            return
        self.add_node(precedent)
        self.add_node(dependent)
        self._edges[key] = Edge(precedent, dependent, kind, construct)
        self._succ[precedent].add(dependent)
        self._pred[dependent].add(precedent)

    def __contains__(self, node) -> bool:
        return node in self._nodes

    @property
    def nodes(self) -> list[GraphNode]:
        return sorted(self._nodes, key=self.sort_key)

    def edges(self, kind: str | None = None) -> list[Edge]:
        out = [e for e in self._edges.values() if kind is None or e.kind == kind]
        out.sort(key=lambda e: (self.sort_key(e.dependent), self.sort_key(e.precedent), e.kind))
        return out

    def edge(self, precedent, dependent, kind="static") -> Edge | None:
        return self._edges.get((precedent, dependent, kind))

    def precedents_of(self, node: GraphNode, kinds: tuple[str, ...] = ("static", "dynamic")) -> list[GraphNode]:
        preds = [p for p in self._pred.get(node, ()) if any((p, node, k) in self._edges for k in kinds)]
        return sorted(preds, key=self.sort_key)

    def dependents_of(self, node: GraphNode, kinds: tuple[str, ...] = ("static", "dynamic")) -> list[GraphNode]:
        deps = [d for d in self._succ.get(node, ()) if any((node, d, k) in self._edges for k in kinds)]
        return sorted(deps, key=self.sort_key)

    def copy(self) -> DepGraph:
        g = DepGraph(dict(self.sheet_order), set(self.formula_cells), set(self.coarse_ranges),
                     list(self.warnings))
        g._nodes = set(self._nodes)
        g._edges = dict(self._edges)
        g._succ = {k: set(v) for k, v in self._succ.items()}
        g._pred = {k: set(v) for k, v in self._pred.items()}
        return g

    def resolve(self, text: str) -> CellId:
        """Find the node for ``Sheet!A1`` text; sheet names match case-insensitively."""
        try:
            addr = parse_address(text)
        except ValueError as exc:
            raise CellNotFoundError(f"not a cell address: {text!r}") from exc
        if addr.sheet is None:
            raise CellNotFoundError(f"cell address {text!r} needs a sheet name")
        for node in self._nodes:
            if (isinstance(node, CellId) and node.book is None and node.row == addr.row
                    and node.col == addr.col and node.sheet.lower() == addr.sheet.lower()):
                return node
        raise CellNotFoundError(f"cell {text!r} is not in the workbook")


def resolve_name(wb: Workbook, name: str, depth: int = 0):
    """Follow a defined name to a Ref/RangeRef node (or None)."""
    if depth >= NAME_DEPTH_CAP:
        return None
    target = wb.defined_name(name)
    if target is None:
        return None
    text = target if target.startswith("=") else "=" + target
    try:
        node = parse_formula(text)
    except FormulaSyntaxError:
        return None
    if isinstance(node, NamedRef):
        return resolve_name(wb, node.name, depth + 1)
    if isinstance(node, (Ref, RangeRef)):
        return node
    return None


def _canonical_sheet(wb: Workbook, name: str | None, default: str) -> tuple[str, bool]:
    if name is None:
        return default, True
    sheet = wb.sheet(name)
    return (sheet.name, True) if sheet is not None else (name, False)


def reference_targets(wb: Workbook, ref, host: CellId, range_cap: int = DEFAULT_RANGE_CAP,
                      warnings: list[str] | None = None):
    """Nodes a single Ref/RangeRef reads, plus (coarse range, member formula cells) when capped."""
    if isinstance(ref, Ref):
        a = ref.address
        if ref.workbook is not None:
            return [CellId(a.sheet or host.sheet, a.row, a.col, ref.workbook)], None
        sheet, known = _canonical_sheet(wb, a.sheet, host.sheet)
        if not known and warnings is not None:
            warnings.append(f"{host}: reference to unknown sheet {a.sheet!r}")
        return [CellId(sheet, a.row, a.col)], None
    area = CellRange.from_corners(ref.start, ref.end)
    if ref.workbook is not None:
        sheet = ref.start.sheet or host.sheet
        return [RangeId(sheet, area.top, area.left, area.bottom, area.right, ref.workbook)], None
    sheet_name, known = _canonical_sheet(wb, ref.start.sheet, host.sheet)
    ws = wb.sheet(sheet_name)
    if ws is None:
        if warnings is not None:
            warnings.append(f"{host}: range on unknown sheet {ref.start.sheet!r}")
        return [], None
    if area.size > range_cap:
        node = RangeId(sheet_name, area.top, area.left, area.bottom, area.right)
        members = [CellId(sheet_name, r, c) for (r, c), cell in ws.cells.items()
                   if cell.is_formula and area.contains(r, c)]
        return [node], (node, members)
    targets = []
    for r, c in area.cells():
        cell = ws.cells.get((r, c))
        if cell is not None and not cell.is_blank:
            targets.append(CellId(sheet_name, r, c))
    return targets, None


def formula_references(wb: Workbook, ast, host: CellId, warnings: list[str] | None = None) -> list:
    """Ref/RangeRef nodes of a formula with defined names resolved."""
    refs = []
    for node in walk(ast):
        if isinstance(node, (Ref, RangeRef)):
            refs.append(node)
        elif isinstance(node, NamedRef):
            target = resolve_name(wb, node.name)
            if target is None:
                if warnings is not None:
                    warnings.append(f"{host}: defined name {node.name!r} does not resolve to a reference")
            else:
                refs.append(target)
    return refs


def build_graph(wb: Workbook, analysis: FormulaAnalysis, range_cap: int = DEFAULT_RANGE_CAP) -> DepGraph:
    g = DepGraph(sheet_order={s.name.lower(): i for i, s in enumerate(wb.sheets)})
    for sheet in wb.sheets:
        for (r, c), cell in sheet.populated():
            g.add_node(CellId(sheet.name, r, c))
    for cid, _cell in wb.formula_cells():
        g.formula_cells.add(cid)
    for cid, parsed in analysis.parsed.items():
        for ref in formula_references(wb, parsed.ast, cid, g.warnings):
            targets, coarse = reference_targets(wb, ref, cid, range_cap, g.warnings)
            for t in targets:
                g.add_edge(t, cid)
            if coarse is not None:
                node, members = coarse
                g.coarse_ranges.add(node)
                for m in members:
                    g.add_edge(m, node)
    return g


def merge_dynamic(g: DepGraph, dynamic_edges: Iterable[tuple]) -> DepGraph:
    """A copy of ``g`` with (precedent, dependent, construct) edges tagged dynamic."""
    out = g.copy()
    for prec, dep, construct in dynamic_edges:
        out.add_edge(prec, dep, "dynamic", construct)
    return out


def find_cycles(g: DepGraph) -> list[list[GraphNode]]:
    """SCCs of size > 1 plus self-loops, members sorted, ordered by smallest member."""
    nodes = g.nodes
    comps = strongly_connected_components(nodes, lambda n: g.dependents_of(n))
    cycles = []
    for comp in comps:
        if len(comp) > 1 or comp[0] in g._succ[comp[0]]:
            cycles.append(sorted(comp, key=g.sort_key))
    cycles.sort(key=lambda comp: g.sort_key(comp[0]))
    return cycles


@dataclass
class TreeNode:
    node: GraphNode
    children: list["TreeNode"] = field(default_factory=list)
    cyclic: bool = False
    truncated: bool = False
    edge_kind: str | None = None
    construct: str | None = None
    value: object = None

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def to_dict(self, value_fmt=None) -> dict:
        d = {"cell": str(self.node), "cyclic": self.cyclic, "truncated": self.truncated,
             "edge": self.edge_kind, "construct": self.construct,
             "children": [c.to_dict(value_fmt) for c in self.children]}
        if value_fmt is not None:
            d["value"] = value_fmt(self.value)
        return d


def _tree(g: DepGraph, root: GraphNode, depth: int, step) -> TreeNode:
    if root not in g:
        raise CellNotFoundError(f"{root} is not in the graph")
    if depth < 1:
        raise ValueError("depth must be >= 1")

    def expand(tn: TreeNode, path: set, remaining: int):
        nxt = step(tn.node)
        if remaining == 0:
            tn.truncated = bool(nxt)
            return
        for other, kind, construct in nxt:
            child = TreeNode(other, edge_kind=kind, construct=construct)
            tn.children.append(child)
            if other in path:
                child.cyclic = True
                continue
            path.add(other)
            expand(child, path, remaining - 1)
            path.discard(other)

    top = TreeNode(root)
    expand(top, {root}, depth)
    return top


def _neighbours(g: DepGraph, node, upstream: bool):
    out = []
    others = g.precedents_of(node) if upstream else g.dependents_of(node)
    for other in others:
        pair = (other, node) if upstream else (node, other)
        e = g.edge(*pair, "static") or g.edge(*pair, "dynamic")
        out.append((other, e.kind, e.construct))
    return out


def precedents(g: DepGraph, cell: GraphNode, depth: int = 3) -> TreeNode:
    """Precedent tree; nodes already on the path are marked cyclic and not expanded."""
    return _tree(g, cell, depth, lambda n: _neighbours(g, n, True))


def dependents(g: DepGraph, cell: GraphNode, depth: int = 3) -> TreeNode:
    return _tree(g, cell, depth, lambda n: _neighbours(g, n, False))


def sheet_matrix(g: DepGraph) -> dict[tuple[str, str], int]:
    """Cross-sheet edge counts keyed (precedent sheet, dependent sheet)."""
    counts: dict[tuple[str, str], int] = {}

    def label(n: GraphNode) -> str:
        return n.sheet if n.book is None else f"[{n.book}]{n.sheet}"

    for e in g.edges():
        a, b = label(e.precedent), label(e.dependent)
        if a != b:
            counts[(a, b)] = counts.get((a, b), 0) + 1
    return dict(sorted(counts.items()))


@dataclass(frozen=True)
class FlowStats:
    sheet: str
    intra_sheet_edges: int
    rightward: int
    leftward: int
    same_column: int
    downward: int
    upward: int
    same_row: int
    backward_fraction: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> FlowStats:
        return cls(**d)


def flow_stats(g: DepGraph, sheet: str) -> FlowStats:
    """Direction of dependent relative to precedent over intra-sheet static edges."""
    if sheet.lower() not in g.sheet_order:
        raise CellNotFoundError(f"sheet {sheet!r} is not in the workbook")
    name = next((n.sheet for n in g._nodes if n.book is None and n.sheet.lower() == sheet.lower()),
                sheet)
    counts = dict.fromkeys(("right", "left", "col", "down", "up", "row"), 0)
    total = backward = 0
    for e in g.edges("static"):
        p, d = e.precedent, e.dependent
        if not (isinstance(p, CellId) and isinstance(d, CellId)):
            continue
        if p.book is not None or d.book is not None:
            continue
        if p.sheet.lower() != sheet.lower() or d.sheet.lower() != sheet.lower():
            continue
        total += 1
        dc, dr = d.col - p.col, d.row - p.row
        counts["right" if dc > 0 else "left" if dc < 0 else "col"] += 1
        counts["down" if dr > 0 else "up" if dr < 0 else "row"] += 1
        if dc < 0 or dr < 0:
            backward += 1
    return FlowStats(name, total, counts["right"], counts["left"], counts["col"], counts["down"],
                     counts["up"], counts["row"], backward / total if total else 0.0)
