import io

import numpy as np
import pytest

from cellscribe.ontology import OntologyGraph
from cellscribe.scribe_exceptions import SimilarityException
from cellscribe.similarity import (
    PprConfig,
    SimilarityMatrix,
    empirical_cdf,
    export_cdf,
    fit_heavy_tail,
    load_matrix,
    personalized_pagerank,
    ppr_direct,
    save_matrix,
    similarity_matrix,
    similarity_report,
    similarity_row,
    similarity_stats,
)


def random_connected_graph(rng, n_nodes):
    nodes = [f"n{i}" for i in range(n_nodes)]
    edges = [(nodes[i], nodes[int(rng.integers(i))]) for i in range(1, n_nodes)]
    for _ in range(int(rng.integers(0, n_nodes + 1)) if n_nodes > 1 else 0):
        u, v = rng.choice(n_nodes, size=2, replace=False)
        edges.append((nodes[u], nodes[v]))
    return OntologyGraph(nodes, edges)


def test_single_node():
    graph = OntologyGraph(["a"], [])
    vector = personalized_pagerank(graph, "a")
    assert vector.scores.tolist() == [1.0]
    assert vector.converged


def test_two_nodes_closed_form():
    graph = OntologyGraph(["a", "b"], [("a", "b")])
    d = 0.85
    vector = personalized_pagerank(graph, "a", PprConfig(damping=d))
    expected = np.array([1.0 / (1.0 + d), d / (1.0 + d)])
    assert np.abs(vector.scores - expected).sum() <= 1e-8
    assert np.abs(ppr_direct(graph, "a", d) - expected).sum() <= 1e-12


def test_power_iteration_matches_linear_solve():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        graph = random_connected_graph(rng, int(rng.integers(1, 9)))
        source = graph.terms[int(rng.integers(len(graph)))]
        damping = float(rng.uniform(0.5, 0.95))
        vector = personalized_pagerank(graph, source, PprConfig(damping=damping))
        oracle = ppr_direct(graph, source, damping)
        assert np.abs(vector.scores - oracle).sum() <= 1e-8
        assert vector.scores.sum() == pytest.approx(1.0, abs=1e-9)
        assert (vector.scores >= 0).all()


def test_isolated_source_keeps_all_mass():
    graph = OntologyGraph(["a", "b", "c"], [("b", "c")])
    vector = personalized_pagerank(graph, "a")
    assert vector.scores.tolist() == [1.0, 0.0, 0.0]


def test_unknown_source():
    with pytest.raises(SimilarityException):
        personalized_pagerank(OntologyGraph(["a"], []), "z")


@pytest.mark.parametrize("kwargs", [
    {"damping": 0.0}, {"damping": 1.0}, {"tau": 0.0}, {"max_iterations": 0}, {"tolerance": -1.0},
])
def test_invalid_config(kwargs):
    with pytest.raises(SimilarityException):
        PprConfig(**kwargs)


def test_path_scores_against_hand_solution():
    # a - b - c from a: b = d(a + c), c = d b / 2, a + b + c = 1
    d = 0.85
    graph = OntologyGraph(["a", "b", "c"], [("a", "b"), ("b", "c")])
    b_over_a = d / (1 - d * d / 2)
    c_over_a = d * b_over_a / 2
    a = 1 / (1 + b_over_a + c_over_a)
    scores = personalized_pagerank(graph, "a", PprConfig(damping=d)).scores
    assert scores == pytest.approx([a, a * b_over_a, a * c_over_a], abs=1e-9)
    assert scores[1] > scores[2]


def test_decay_along_chain(chain_graph):
    low = PprConfig(damping=0.5)
    scores = personalized_pagerank(chain_graph, "a", low).scores
    assert all(scores[i] > scores[i + 1] for i in range(len(scores) - 1))
    row = similarity_row(chain_graph, "a", low)
    assert row[0] == 1.0
    assert all(row[i] > row[i + 1] for i in range(len(row) - 1))

    # At the default damping the first neighbour of a leaf outscores the
    # leaf itself and is clipped to 1; decay is strict from there on
    row = similarity_row(chain_graph, "a")
    assert row[0] == row[1] == 1.0
    assert all(row[i] > row[i + 1] for i in range(1, len(row) - 1))


def test_diagonal_dominance_on_trees(chain_graph, star_graph):
    config = PprConfig(damping=0.5)
    for graph in (chain_graph, star_graph):
        for source in graph.terms:
            scores = personalized_pagerank(graph, source, config).scores
            assert scores[graph.index[source]] >= scores.max()


def test_rows_stay_in_unit_interval(chain_graph, star_graph):
    for graph in (chain_graph, star_graph):
        for source in graph.terms:
            row = similarity_row(graph, source)
            assert row[graph.index[source]] == 1.0
            assert row.min() >= 0.0 and row.max() <= 1.0


def test_row_order_follows_ppr_for_any_tau(chain_graph):
    for tau in (1e-3, 0.1, 1e3):
        config = PprConfig(damping=0.5, tau=tau)
        scores = personalized_pagerank(chain_graph, "a", config).scores
        row = similarity_row(chain_graph, "a", config)
        assert list(np.argsort(-row, kind="stable")) == list(np.argsort(-scores, kind="stable"))


def test_matrix_on_path():
    graph = OntologyGraph(["a", "b", "c"], [("a", "b"), ("b", "c")])
    matrix = similarity_matrix(graph)
    assert matrix.values.shape == (3, 3)
    assert np.all(np.diag(matrix.values) == 1.0)
    assert matrix.score("a", "b") > matrix.score("a", "c")
    assert matrix.values.min() >= 0.0 and matrix.values.max() <= 1.0


def test_disconnected_components_score_zero():
    matrix = similarity_matrix(OntologyGraph(["a", "b"], []))
    assert matrix.values.tolist() == [[1.0, 0.0], [0.0, 1.0]]


def test_symmetrize(star_graph):
    matrix = similarity_matrix(star_graph, symmetrize=True)
    assert matrix.symmetric
    assert np.array_equal(matrix.values, matrix.values.T)
    assert np.all(np.diag(matrix.values) == 1.0)


def test_parallel_rows_are_bit_identical(chain_graph):
    serial = similarity_matrix(chain_graph, workers=1)
    parallel = similarity_matrix(chain_graph, workers=4)
    assert np.array_equal(serial.values, parallel.values)


def test_stats_constant_off_diagonal():
    values = np.full((3, 3), 0.5)
    np.fill_diagonal(values, 1.0)
    stats = similarity_stats(SimilarityMatrix(("a", "b", "c"), values))
    assert stats.count == 6
    assert stats.mean == pytest.approx(0.5)
    assert stats.median == pytest.approx(0.5)
    assert stats.std_dev == pytest.approx(0.0)


def test_stats_on_path_enumerate_entries():
    graph = OntologyGraph(["a", "b", "c"], [("a", "b"), ("b", "c")])
    matrix = similarity_matrix(graph)
    entries = [matrix.values[i, j] for i in range(3) for j in range(3) if i != j]
    stats = similarity_stats(matrix)
    assert stats.mean == pytest.approx(np.mean(entries))
    assert stats.median == pytest.approx(np.median(entries))
    assert stats.median <= stats.percentile_95 <= stats.percentile_99 <= stats.maximum


def test_stats_need_two_terms():
    with pytest.raises(SimilarityException):
        similarity_stats(SimilarityMatrix(("a",), np.ones((1, 1))))


def test_power_law_recovery():
    rng = np.random.default_rng(7)
    alpha, lower = 0.67, 1e-3
    beta = 1.0 - alpha
    u = rng.uniform(size=200_000)
    samples = (lower ** beta + u * (1.0 - lower ** beta)) ** (1.0 / beta)
    fit = fit_heavy_tail(samples)
    assert fit.exponent_alpha == pytest.approx(alpha, abs=0.05)
    assert fit.loglog_r2 > 0.99
    assert 0.0 <= fit.rank_frequency_r2 <= 1.0


def test_power_law_rejects_constant_values():
    with pytest.raises(SimilarityException):
        fit_heavy_tail(np.full(100, 0.3))


def test_power_law_needs_positive_values():
    with pytest.raises(SimilarityException):
        fit_heavy_tail(np.zeros(100))


def test_empirical_cdf():
    assert empirical_cdf([0.0, 0.5, 1.0]) == [
        (0.0, pytest.approx(1 / 3)), (0.5, pytest.approx(2 / 3)), (1.0, 1.0)
    ]
    assert empirical_cdf([0.2, 0.2, 0.2]) == [(0.2, 1.0)]


def test_export_cdf_on_path():
    graph = OntologyGraph(["a", "b", "c"], [("a", "b"), ("b", "c")])
    matrix = similarity_matrix(graph)
    stream = io.StringIO()
    points = export_cdf(matrix, stream)
    lines = stream.getvalue().splitlines()
    assert lines[0] == "similarity\tcumulative_fraction"
    assert len(lines) == len(points) + 1
    fractions = [f for _, f in points]
    assert fractions == sorted(fractions)
    assert fractions[-1] == 1.0
    off = matrix.off_diagonal()
    for value, fraction in points:
        assert fraction == pytest.approx(np.mean(off <= value))


def test_report_has_both_variants(star_graph):
    report = similarity_report(similarity_matrix(star_graph))
    assert set(report) == {"directed", "symmetrized"}
    entry = report["directed"]
    assert set(entry["reference"]) == {"mean", "median", "std_dev", "percentile_95", "percentile_99"}
    assert "fit" in entry
    assert entry["heavy_tail"] in (True, False)


def test_matrix_file_round_trip(chain_graph, tmp_path):
    matrix = similarity_matrix(chain_graph)
    path, sidecar = save_matrix(matrix, tmp_path / "similarity.ppr")
    assert path.read_bytes()[:4] == b"PPRS"
    assert sidecar.name == "similarity.terms.tsv"
    loaded = load_matrix(path)
    assert loaded.terms == matrix.terms
    assert np.array_equal(loaded.values, matrix.values)

    again, _ = save_matrix(similarity_matrix(chain_graph), tmp_path / "again.ppr")
    assert again.read_bytes() == path.read_bytes()


def test_load_rejects_foreign_file(tmp_path):
    bogus = tmp_path / "bogus.ppr"
    bogus.write_bytes(b"NOPE" + bytes(12))
    (tmp_path / "bogus.terms.tsv").write_text("term_id\tname\n")
    with pytest.raises(SimilarityException):
        load_matrix(bogus)
