"""Diagram construction, path enumeration, duality."""

from __future__ import annotations

import pytest

from bratlap.diagram import (
    DiagramError,
    EMPTY_PATH,
    Path,
    SubstitutionRule,
    abelianize,
    build_diagram,
    composability_matrix,
    diagram_to_json,
    dual_diagram,
    enumerate_paths,
    ext_pairs,
    extensions,
    is_primitive,
    load_diagram_json,
    longest_common_prefix,
    n_extensions,
    predicted_path_count,
)

FIB = SubstitutionRule.from_strings({"a": "ab", "b": "a"})
TM = SubstitutionRule.from_strings({"0": "01", "1": "10"})
PENROSE_MATRIX = [[2, 1], [1, 1]]


def fib_diagram():
    return build_diagram(abelianize(FIB))


def tm_diagram():
    return build_diagram(abelianize(TM), letters=("0", "1"))


def test_abelianize_fibonacci():
    assert abelianize(FIB) == ((1, 1), (1, 0))


def test_abelianize_thue_morse():
    assert abelianize(TM) == ((1, 1), (1, 1))


def test_abelianize_single_letter():
    rule = SubstitutionRule.from_strings({"a": "a"})
    assert abelianize(rule) == ((1,),)
    with pytest.raises(DiagramError):
        build_diagram(abelianize(rule))


def test_rule_validation():
    with pytest.raises(DiagramError):
        SubstitutionRule(("a",), ((),))
    with pytest.raises(DiagramError):
        SubstitutionRule(("a",), (("b",),))


def test_build_fibonacci():
    d = fib_diagram()
    assert len(d.root_edges) == 2
    assert len(d.edges) == 3
    assert [(e.source, e.target) for e in d.edges] == [(0, 0), (0, 1), (1, 0)]


def test_build_penrose_matrix_g20():
    d = build_diagram(PENROSE_MATRIX, symmetry_order=20)
    assert len(d.root_edges) == 40
    assert len(d.edges) == 5


def test_build_thue_morse():
    d = tm_diagram()
    assert len(d.root_edges) == 2
    assert len(d.edges) == 4


def test_build_rejects_bad_matrices():
    with pytest.raises(DiagramError):
        build_diagram([[1, 0], [0, 1]])        # not primitive
    with pytest.raises(DiagramError):
        build_diagram([[1]])                   # the matrix (1)
    with pytest.raises(DiagramError):
        build_diagram([[1, 1], [1]])           # ragged
    with pytest.raises(DiagramError):
        build_diagram([[2]], symmetry_order=0)


def test_is_primitive():
    assert is_primitive([[1, 1], [1, 0]])
    assert is_primitive([[2]])
    assert not is_primitive([[0, 1], [1, 0]])  # period 2
    assert not is_primitive([[1, 1], [0, 1]])  # reducible


def test_enumerate_fibonacci_small():
    d = fib_diagram()
    t1 = enumerate_paths(d, 1)
    assert len(t1) == 2
    t2 = enumerate_paths(d, 2)
    assert len(t2) == 3
    assert [d.format_path(p) for p in t2.paths] == ["a.a", "a.b", "b.a"]


def test_enumerate_fibonacci_depth10():
    d = fib_diagram()
    assert len(enumerate_paths(d, 10)) == 144


def test_enumeration_cap():
    d = tm_diagram()
    with pytest.raises(DiagramError):
        enumerate_paths(d, 12, cap=100)


def test_predicted_count_matches():
    d = build_diagram(PENROSE_MATRIX, symmetry_order=4)
    for n in range(1, 7):
        assert predicted_path_count(d, n) == len(enumerate_paths(d, n))


def test_extensions_fibonacci():
    d = fib_diagram()
    pa = Path(d.root_edge_index(0))
    pb = Path(d.root_edge_index(1))
    assert n_extensions(d, pa) == 2
    assert n_extensions(d, pb) == 1
    assert extensions(d, EMPTY_PATH) == (0, 1)


def test_extensions_penrose_vertex_a():
    d = build_diagram(PENROSE_MATRIX, symmetry_order=20)
    p = Path(d.root_edge_index(0, slot=3))
    ext = extensions(d, p)
    assert len(ext) == 3
    kinds = [(d.edges[e].source, d.edges[e].target, d.edges[e].occurrence) for e in ext]
    assert kinds == [(0, 0, 1), (0, 0, 2), (0, 1, 1)]


def test_ext_pairs_counts():
    d = build_diagram(PENROSE_MATRIX, symmetry_order=1)
    pa = Path(d.root_edge_index(0))
    pb = Path(d.root_edge_index(1))
    assert len(ext_pairs(d, pa)) == 6
    assert len(ext_pairs(d, pb)) == 2
    fib = fib_diagram()
    assert len(ext_pairs(fib, Path(0))) == 2
    assert ext_pairs(fib, Path(1)) == ()


def test_extension_counting_identity():
    # |Pi_{n+1}| equals the sum of n_gamma over Pi_n
    for d in (fib_diagram(), tm_diagram(), build_diagram(PENROSE_MATRIX, symmetry_order=4)):
        for n in range(1, 8):
            table = enumerate_paths(d, n)
            total = sum(n_extensions(d, p) for p in table.paths)
            assert total == predicted_path_count(d, n + 1)


def test_enumeration_prefix_stability():
    d = fib_diagram()
    t4 = enumerate_paths(d, 4)
    t5 = enumerate_paths(d, 5)
    prefixes = []
    for p in t5.paths:
        q = p.prefix(4)
        if q not in prefixes:
            prefixes.append(q)
    assert prefixes == list(t4.paths)


def test_dual_fibonacci_composability():
    d = fib_diagram()
    # edges in order: a->a, a->b, b->a; composable iff target(e) == source(f)
    assert composability_matrix(d) == ((1, 1, 0), (0, 0, 1), (1, 1, 0))
    # brute force over all pairs
    for i, e in enumerate(d.edges):
        for j, f in enumerate(d.edges):
            expected = 1 if e.target == f.source else 0
            assert composability_matrix(d)[i][j] == expected


def test_dual_thue_morse_all_pattern():
    d = tm_diagram()
    m = composability_matrix(d)
    for i, e in enumerate(d.edges):
        for j, f in enumerate(d.edges):
            assert m[i][j] == (1 if e.target == f.source else 0)
    assert sum(sum(row) for row in m) == 8


def test_dual_penrose():
    d = build_diagram(PENROSE_MATRIX, symmetry_order=1)
    m = composability_matrix(d)
    assert len(m) == 5
    for i, e in enumerate(d.edges):
        for j, f in enumerate(d.edges):
            assert m[i][j] == (1 if e.target == f.source else 0)


def test_dual_of_dyadic_is_thue_morse_pattern():
    dyadic = build_diagram([[2]])
    assert composability_matrix(dyadic) == ((1, 1), (1, 1))


def test_dual_path_counts_shift_by_one():
    d = fib_diagram()
    dd = dual_diagram(d)
    for n in range(1, 8):
        assert predicted_path_count(dd, n) == predicted_path_count(d, n + 1)


def test_longest_common_prefix():
    d = fib_diagram()
    t2 = enumerate_paths(d, 2)
    aa, ab, ba = t2.paths
    assert longest_common_prefix(aa, ab) == Path(0)
    assert longest_common_prefix(aa, aa) == aa
    assert longest_common_prefix(aa, ba) == EMPTY_PATH


def test_path_validation():
    d = fib_diagram()
    d.validate_path(Path(0, (0, 1)))
    with pytest.raises(DiagramError):
        d.validate_path(Path(0, (2,)))  # b->a cannot follow the root edge at a


def test_json_roundtrip_and_ragged_rejection():
    d = build_diagram(PENROSE_MATRIX, symmetry_order=4)
    text = diagram_to_json(d, dimension=2)
    d2, dim = load_diagram_json(text)
    assert dim == 2
    assert d2.matrix == d.matrix and d2.symmetry_order == 4
    with pytest.raises(DiagramError):
        load_diagram_json('{"letters": ["a", "b"], "matrix": [[1, 1], [1]]}')
    with pytest.raises(DiagramError):
        load_diagram_json("not json")
