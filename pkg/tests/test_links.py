from __future__ import annotations

import os
import random

from hypothesis import given, settings, strategies as st

from sheetlens.links import (
    cell_level_cross_file_cycle, external_refs, file_cycles, norm_key, scan, stale_edges,
)

from conftest import book, hub_farm, write_book


def test_hub_with_missing_sources(tmp_path):
    g = scan([hub_farm(tmp_path)])
    assert len(g.nodes) == 35
    missing = g.missing()
    assert len(missing) == 14
    assert [os.path.basename(n.path) for n in missing] == [f"Src{i}.xls" for i in range(20, 34)]
    assert all(g.nodes[d].exists for d, _ in g.edges)


def test_standalone_file(tmp_path):
    write_book(tmp_path / "Alone.json", {"S": {"A1": 1, "A2": "=A1*2"}})
    g = scan([tmp_path])
    assert len(g.nodes) == 1 and not g.edges


def test_reference_count_and_sources(tmp_path):
    wb = book({"S": {"A1": "=[B.xls]S!A1+[B.xls]S!A2"}}, defined_names={"Ext": "[C.xls]S!$A$1"},
              external_links=["D.xls"])
    assert external_refs(wb) == ["B.xls", "B.xls", "C.xls", "D.xls"]
    write_book(tmp_path / "A.json", {"S": {"A1": "=[B.xls]S!A1+[B.xls]S!A2"}})
    write_book(tmp_path / "B.json", {"S": {"A1": 1, "A2": 2}})
    g = scan([tmp_path])
    assert [(os.path.basename(d), os.path.basename(p), n) for d, p, n in g.edge_list()] == [
        ("A.json", "B.json", 2)]


def test_path_keys_ignore_case_and_separators():
    assert norm_key("/Data/Share/Book.JSON") == norm_key("/data/share/book.json")
    assert norm_key("/data\\share/x.json") == norm_key("/data/share/x.json")


def _ring(root, saved=None):
    saved = saved or {}
    write_book(root / "A.json", {"S": {"A1": "=[B.xls]S!A1+1"}}, saved.get("A"))
    write_book(root / "B.json", {"S": {"A1": "=[C.xls]S!A1+1"}}, saved.get("B"))
    write_book(root / "C.json", {"S": {"A1": "=[A.xls]S!A1+1"}}, saved.get("C"))


def test_three_file_cycle_file_and_cell_level(tmp_path):
    _ring(tmp_path)
    g = scan([tmp_path])
    assert [[os.path.basename(p) for p in c] for c in file_cycles(g)] == [["A.json", "B.json", "C.json"]]
    [cyc] = cell_level_cross_file_cycle(g)
    assert cyc.status == "confirmed"
    assert cyc.cells == ("[A.json]S!A1", "[B.json]S!A1", "[C.json]S!A1")


def test_disjoint_cells_give_file_cycle_only(tmp_path):
    write_book(tmp_path / "A.json", {"S": {"A1": "=[B.xls]S!A1", "A2": 5}})
    write_book(tmp_path / "B.json", {"S": {"A1": 3, "A2": "=[A.xls]S!A2"}})
    g = scan([tmp_path])
    assert len(file_cycles(g)) == 1
    assert cell_level_cross_file_cycle(g) == []


def test_extra_missing_link_does_not_break_confirmation(tmp_path):
    write_book(tmp_path / "A.json", {"S": {"A1": "=[B.xls]S!A1"}})
    write_book(tmp_path / "B.json", {"S": {"A1": "=[A.xls]S!A1"}}, external_links=["C.xls"])
    g = scan([tmp_path])
    assert [os.path.basename(n.path) for n in g.missing()] == ["C.xls"]
    assert [c.status for c in cell_level_cross_file_cycle(g)] == ["confirmed"]


def test_unconfirmed_when_member_fails_to_load(tmp_path):
    write_book(tmp_path / "A.json", {"S": {"A1": "=[B.xls]S!A1"}})
    write_book(tmp_path / "B.json", {"S": {"A1": "=[A.xls]S!A1"}})
    g = scan([tmp_path])
    # simulate the document becoming unavailable after the scan resolved it
    key = norm_key(tmp_path / "B.json")
    g.workbooks.pop(key)
    g.nodes[key].exists = False
    [cyc] = cell_level_cross_file_cycle(g)
    assert cyc.status == "unconfirmed (missing file)" and cyc.cells == ()


def test_stale_edges(tmp_path):
    write_book(tmp_path / "Dep.json", {"S": {"A1": "=[Src.xls]S!A1"}}, "2006-02-01T00:00:00Z")
    write_book(tmp_path / "Src.json", {"S": {"A1": 1}}, "2006-03-01T00:00:00Z")
    write_book(tmp_path / "Dep2.json", {"S": {"A1": "=[Same.xls]S!A1"}}, "2006-02-01T00:00:00Z")
    write_book(tmp_path / "Same.json", {"S": {"A1": 1}}, "2006-02-01T00:00:00Z")
    write_book(tmp_path / "Dep3.json", {"S": {"A1": "=[Old.xls]S!A1"}}, "2006-04-01T00:00:00Z")
    write_book(tmp_path / "Old.json", {"S": {"A1": 1}}, "2006-03-01T00:00:00Z")
    write_book(tmp_path / "Dep4.json", {"S": {"A1": "=[Nowhere.xls]S!A1"}}, "2006-04-01T00:00:00Z")
    g = scan([tmp_path])
    found, notes = stale_edges(g)
    assert [(os.path.basename(s.precedent), os.path.basename(s.dependent)) for s in found] == [
        ("Src.json", "Dep.json")]
    assert len(notes) == 1 and "Nowhere.xls" in notes[0]
    assert g.nodes[norm_key(tmp_path / "Src.json")].saved_at_source == "document"


def test_scan_is_deterministic_across_orders_and_jobs(tmp_path):
    (tmp_path / "farm").mkdir()
    hub_farm(tmp_path / "farm")
    (tmp_path / "ring").mkdir()
    _ring(tmp_path / "ring")
    a = scan([tmp_path / "farm", tmp_path / "ring"], jobs=1)
    b = scan([tmp_path / "ring", tmp_path / "farm"], jobs=8)
    assert [n.to_dict() for n in a.node_list()] == [n.to_dict() for n in b.node_list()]
    assert a.edge_list() == b.edge_list()


def _brute_file_cycles(n, edges):
    reach = {}
    for a in range(n):
        seen, stack = set(), [b for x, b in edges if x == a]
        while stack:
            m = stack.pop()
            if m not in seen:
                seen.add(m)
                stack.extend(b for x, b in edges if x == m)
        reach[a] = seen
    out = set()
    for a in range(n):
        comp = frozenset(b for b in range(n) if b in reach[a] and a in reach[b])
        if len(comp) > 1 or (a, a) in edges:
            out.add(comp or frozenset({a}))
    return out


def _write_graph(root, n, edges, rng):
    for a in range(n):
        refs = sorted({b for x, b in edges if x == a})
        cells = {f"A{i + 1}": f"=[F{b}.xls]S!A1" for i, b in enumerate(refs)}
        cells["Z1"] = rng.randint(0, 9)
        write_book(root / f"F{a}.json", {"S": cells})


def test_file_cycles_match_brute_force(tmp_path):
    rng = random.Random(34)
    for trial in range(40):
        n = rng.randint(1, 10)
        edges = {(a, b) for a in range(n) for b in range(n) if rng.random() < 0.2}
        root = tmp_path / f"t{trial}"
        root.mkdir()
        _write_graph(root, n, edges, rng)
        g = scan([root])
        got = {frozenset(int(os.path.basename(p)[1:-5]) for p in c) for c in file_cycles(g)}
        assert got == _brute_file_cycles(n, edges)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5).flatmap(lambda n: st.tuples(
    st.just(n), st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.integers(1, 2)), max_size=8))))
def test_cell_cycle_implies_file_cycle(tmp_path_factory, case):
    n, links = case
    root = tmp_path_factory.mktemp("cc")
    for a in range(n):
        cells = {"A1": 1, "A2": 2}
        for b, row in sorted((b, row) for x, b, row in links if x == a):
            cells[f"B{b + 1}{row}"] = f"=[F{b}.xls]S!A{row}+1"
        # each file's A cells read its own B cells so cell chains can close
        feeds = [k for k in cells if k.startswith("B")]
        for row in (1, 2):
            mine = [k for k in feeds if k.endswith(str(row))]
            if mine:
                cells[f"A{row}"] = "=" + "+".join(mine)
        write_book(root / f"F{a}.json", {"S": cells})
    g = scan([root])
    file_sets = [set(c) for c in file_cycles(g)]
    for cyc in cell_level_cross_file_cycle(g):
        assert any(set(cyc.files) <= fs for fs in file_sets)
