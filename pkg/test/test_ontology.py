import io

import numpy as np
import pytest

from cellscribe.ontology import (
    build_graph,
    component_coverage,
    connected_component,
    export_edges,
    export_terms,
    lookup_term,
    parse_obo,
    read_graph,
    read_obo,
    write_obo,
)
from cellscribe.scribe_exceptions import (
    AmbiguousTermException,
    GraphException,
    OboParseException,
    ScribeIOException,
)


def test_minimal_stanza():
    ontology = parse_obo("[Term]\nid: CL:0000000\nname: cell\n")
    assert len(ontology) == 1
    term = ontology["CL:0000000"]
    assert term.name == "cell"
    assert term.is_a_parents == ()


def test_is_a_comment_is_stripped():
    ontology = parse_obo("[Term]\nid: CL:1\nis_a: CL:0000000 ! cell\n")
    assert ontology["CL:1"].is_a_parents == ("CL:0000000",)


def test_small_fixture(small_ontology):
    assert len(small_ontology) == 5
    assert sum(t.obsolete for t in small_ontology.terms.values()) == 1
    assert small_ontology["CL:0000999"].obsolete
    assert small_ontology["CL:0000999"].is_a_parents == ()
    # duplicate is_a lines collapse
    assert small_ontology["CL:0000236"].is_a_parents == ("CL:0000542",)
    t_cell = small_ontology["CL:0000084"]
    assert t_cell.definition.startswith("A type of lymphocyte")
    assert "[" not in t_cell.definition
    assert t_cell.synonym_texts == ["T-lymphocyte", "T-cell"]
    assert ("format-version", "1.2") in small_ontology.header


def test_bytes_and_stream_input(small_obo_text):
    from_bytes = parse_obo(small_obo_text.encode("utf-8"))
    from_stream = parse_obo(io.BytesIO(small_obo_text.encode("utf-8")))
    assert set(from_bytes.terms) == set(from_stream.terms)


def test_escaped_quotes_in_definition():
    ontology = parse_obo('[Term]\nid: X:1\ndef: "A \\"quoted\\" word." []\n')
    assert ontology["X:1"].definition == 'A "quoted" word.'


def test_stanza_without_id_reports_line():
    with pytest.raises(OboParseException) as info:
        parse_obo("format-version: 1.2\n\n[Term]\nname: nameless\n")
    assert info.value.line_number == 3


def test_malformed_tag_line():
    with pytest.raises(OboParseException) as info:
        parse_obo("[Term]\nid: X:1\nthis line has no tag\n")
    assert info.value.line_number == 3


def test_duplicate_id():
    with pytest.raises(OboParseException):
        parse_obo("[Term]\nid: X:1\n\n[Term]\nid: X:1\n")


def test_relationship_without_target_reports_line():
    with pytest.raises(OboParseException) as info:
        parse_obo("[Term]\nid: X:1\nrelationship: part_of\n")
    assert info.value.line_number == 3


def test_stanzas_without_blank_lines_or_header():
    ontology = parse_obo("[Term]\nid: A\nname: a\nis_a: B\n[Term]\nid: B\nname: b\n[Typedef]\nid: part_of\n")
    assert set(ontology.terms) == {"A", "B"}
    assert ontology["A"].is_a_parents == ("B",)
    assert ontology["B"].name == "b"
    assert ontology.header == ()


def test_tag_values_and_scopes():
    ontology = parse_obo(
        '[Term]\nid: X:1\nname: alpha cell\n'
        'synonym: "A-cell" NARROW [PMID:1]\nsynonym: "alpha" []\n'
        'relationship: part_of UBERON:1 ! islet\nis_a: X:2 {source="x"} ! beta\n'
    )
    term = ontology["X:1"]
    assert term.synonyms[0].text == "A-cell" and term.synonyms[0].scope == "NARROW"
    assert term.synonyms[1].scope == "RELATED"
    assert term.is_a_parents == ("X:2",)


def test_exclamation_mark_survives_round_trip():
    ontology = parse_obo('[Term]\nid: X:1\ndef: "Loud \\! cell." []\n')
    assert ontology["X:1"].definition == "Loud ! cell."
    buffer = io.StringIO()
    write_obo(ontology, buffer)
    assert parse_obo(buffer.getvalue())["X:1"].definition == "Loud ! cell."


def test_serialize_round_trip(small_ontology):
    buffer = io.StringIO()
    write_obo(small_ontology, buffer)
    again = parse_obo(buffer.getvalue())
    assert set(again.terms) == set(small_ontology.terms)
    for tid, term in small_ontology.terms.items():
        assert again[tid].name == term.name
        assert again[tid].is_a_parents == term.is_a_parents
        assert again[tid].definition == term.definition
        assert again[tid].synonyms == term.synonyms


def test_read_obo_missing_file(tmp_path):
    with pytest.raises(ScribeIOException):
        read_obo(tmp_path / "absent.obo")


def test_chain_graph():
    ontology = parse_obo(
        "[Term]\nid: A\nis_a: B\n\n[Term]\nid: B\nis_a: C\n\n[Term]\nid: C\n"
    )
    graph = build_graph(ontology)
    assert graph.terms == ("A", "B", "C")
    assert len(graph.edges) == 2
    assert graph.neighbors("B") == ["A", "C"]


def test_graph_excludes_obsolete_by_default(small_ontology):
    graph = build_graph(small_ontology)
    assert "CL:0000999" not in graph
    assert graph.terms == ("CL:0000000", "CL:0000084", "CL:0000236", "CL:0000542")
    assert len(graph.edges) == 3
    assert graph.warnings == ()

    with_obsolete = build_graph(small_ontology, include_obsolete=True)
    assert "CL:0000999" in with_obsolete
    assert with_obsolete.degree("CL:0000999") == 0


def test_dangling_reference_is_warned():
    ontology = parse_obo("[Term]\nid: CL:1\nis_a: CL:404\nis_a: UBERON:1\n\n[Term]\nid: UBERON:1\n")
    graph = build_graph(ontology, prefixes=("CL",))
    assert graph.terms == ("CL:1",)
    assert len(graph.warnings) == 2
    assert any("unknown term" in w for w in graph.warnings)
    assert any("filtered term" in w for w in graph.warnings)


def test_graph_independent_of_stanza_order(small_obo_text):
    header, _, body = small_obo_text.partition("\n\n")
    stanzas = body.split("\n\n")
    reordered = header + "\n\n" + "\n\n".join(reversed(stanzas))
    first = build_graph(parse_obo(small_obo_text))
    second = build_graph(parse_obo(reordered))
    assert first.terms == second.terms
    assert first.edges == second.edges


def test_adjacency_is_symmetric(small_ontology):
    graph = build_graph(small_ontology)
    for u, v in graph.edges:
        assert v in graph.neighbors(u)
        assert u in graph.neighbors(v)
    W = graph.transition_matrix().toarray()
    assert np.allclose(W.sum(axis=0), 1.0)
    assert np.array_equal(W > 0, (W > 0).T)


def test_no_self_loops():
    ontology = parse_obo("[Term]\nid: A\nis_a: A\n")
    graph = build_graph(ontology)
    assert graph.edges == ()
    assert graph.dangling_mask().tolist() == [True]


def test_component_coverage(small_ontology):
    graph = build_graph(small_ontology)
    assert component_coverage(graph, "CL:0000000") == 1.0
    assert connected_component(graph, "CL:0000084") == set(graph.terms)
    with pytest.raises(GraphException):
        connected_component(graph, "CL:0000999")


def test_lookup_term(small_ontology):
    assert lookup_term(small_ontology, "CL:0000084").term_id == "CL:0000084"
    assert lookup_term(small_ontology, "T cell").term_id == "CL:0000084"
    assert lookup_term(small_ontology, "t CELL").term_id == "CL:0000084"
    assert lookup_term(small_ontology, "T-lymphocyte").term_id == "CL:0000084"
    missing = lookup_term(small_ontology, "no-such-cell")
    assert not missing.found
    close = lookup_term(small_ontology, "T cel")
    assert not close.found
    assert "CL:0000084" in close.candidates


def test_lookup_prefers_name_over_synonym():
    ontology = parse_obo(
        '[Term]\nid: X:1\nname: alpha\n\n[Term]\nid: X:2\nname: beta\nsynonym: "alpha" RELATED []\n'
    )
    assert lookup_term(ontology, "alpha").term_id == "X:1"


def test_lookup_ambiguous():
    ontology = parse_obo("[Term]\nid: X:1\nname: twin\n\n[Term]\nid: X:2\nname: twin\n")
    with pytest.raises(AmbiguousTermException) as info:
        lookup_term(ontology, "twin")
    assert info.value.term_ids == ("X:1", "X:2")


def test_edge_export_round_trip(small_ontology, tmp_path):
    graph = build_graph(small_ontology)
    edges = export_edges(graph, tmp_path / "edges.tsv")
    export_terms(graph, tmp_path / "terms.tsv")
    assert edges.read_text().splitlines()[0] == "child_id\tparent_id"
    again = read_graph(edges)
    assert again.terms == graph.terms
    assert again.edges == graph.edges
    assert again.names["CL:0000084"] == "T cell"
