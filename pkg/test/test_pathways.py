import math

import numpy as np
import pytest
from scipy import io as sio
from scipy import sparse

from cellscribe.pathways import (
    ActivityMatrix,
    ExpressionMatrix,
    GeneSet,
    aucell_score,
    prevalence_filter,
    read_activity,
    read_expression,
    read_gmt,
    score_matrix,
    select_hvg,
    top_k_pathways,
    top_window,
    write_activity,
    write_top_pathways,
)
from cellscribe.scribe_exceptions import PathwayException, SchemaException, ScribeIOException

GENES = [f"G{i}" for i in range(10)]


def brute_force_auc(row, genes, members, top_fraction):
    ranked = sorted(range(len(genes)), key=lambda i: (-row[i], genes[i]))
    window = math.ceil(round(top_fraction * len(genes), 9))
    found, area, best = 0, 0, 0
    for position in range(window):
        found += genes[ranked[position]] in members
        area += found
        best += min(position + 1, len(members & set(genes)))
    return area / best if best else 0.0


def expression(cells, genes, values):
    return ExpressionMatrix(tuple(cells), tuple(genes), sparse.csr_matrix(np.asarray(values, dtype=float)))


def test_top_window():
    assert top_window(100, 0.05) == 5
    assert top_window(10, 0.5) == 5
    assert top_window(3, 0.05) == 1
    with pytest.raises(PathwayException):
        top_window(10, 0.0)


def test_members_at_the_top_score_one():
    row = np.arange(10, 0, -1)
    assert aucell_score(row, GENES, GeneSet("S", "s", {"G0", "G1"}), 0.5) == 1.0


def test_members_outside_window_score_zero():
    row = np.arange(10, 0, -1)
    assert aucell_score(row, GENES, GeneSet("S", "s", {"G8", "G9"}), 0.5) == 0.0


def test_worked_example():
    row = np.arange(10, 0, -1)
    # members at ranks 2 and 4
    gene_set = GeneSet("S", "s", {"G1", "G3"})
    score = aucell_score(row, GENES, gene_set, 0.5)
    assert score == pytest.approx(2 / 3, abs=1e-12)
    assert score == pytest.approx(brute_force_auc(row, GENES, gene_set.genes, 0.5), abs=1e-12)


def test_matches_brute_force_on_random_cells():
    rng = np.random.default_rng(21)
    genes = [f"g{i:02d}" for i in range(40)]
    for _ in range(50):
        row = rng.poisson(2.0, size=40).astype(float)
        members = set(rng.choice(genes, size=int(rng.integers(1, 8)), replace=False))
        fraction = float(rng.uniform(0.05, 1.0))
        expected = brute_force_auc(row, genes, members, fraction)
        assert aucell_score(row, genes, GeneSet("S", "s", members), fraction) == pytest.approx(expected, abs=1e-12)


def test_ties_break_by_symbol():
    genes = ["B", "A", "C"]
    assert aucell_score(np.zeros(3), genes, GeneSet("S", "s", {"A"}), 1 / 3) == 1.0
    assert aucell_score(np.zeros(3), genes, GeneSet("S", "s", {"C"}), 1 / 3) == 0.0


def test_monotone_transform_invariance():
    rng = np.random.default_rng(4)
    genes = [f"g{i}" for i in range(30)]
    gene_set = GeneSet("S", "s", set(genes[::6]))
    for _ in range(100):
        row = rng.uniform(0.0, 10.0, size=30)
        base = aucell_score(row, genes, gene_set, 0.3)
        assert aucell_score(np.log1p(row) * 2 + 7, genes, gene_set, 0.3) == pytest.approx(base)
        assert aucell_score(row ** 3, genes, gene_set, 0.3) == pytest.approx(base)


def test_superset_with_top_genes_scores_higher():
    row = np.arange(10, 0, -1)
    subset = GeneSet("S", "s", {"G4", "G6"})
    superset = GeneSet("T", "t", {"G0", "G4", "G6"})
    assert aucell_score(row, GENES, superset, 0.5) >= aucell_score(row, GENES, subset, 0.5)


def test_disjoint_gene_set():
    assert aucell_score(np.ones(10), GENES, GeneSet("S", "s", {"XYZ"}), 0.5) == 0.0


def test_row_length_must_match():
    with pytest.raises(PathwayException):
        aucell_score(np.ones(3), GENES, GeneSet("S", "s", {"G1"}), 0.5)


def test_score_matrix_matches_single_cells():
    rng = np.random.default_rng(8)
    values = rng.poisson(1.5, size=(12, 10))
    expr = expression([f"c{i}" for i in range(12)], GENES, values)
    gene_sets = [GeneSet("A", "a", {"G0", "G5"}), GeneSet("B", "b", {"G2", "G3", "G9"}),
                 GeneSet("C", "c", {"NOPE"})]
    activity = score_matrix(expr, gene_sets, 0.5, workers=3)
    assert activity.pathways == ("A", "B", "C")
    assert len(activity.warnings) == 1
    for i in range(12):
        for j, gene_set in enumerate(gene_sets):
            assert activity.values[i, j] == pytest.approx(aucell_score(values[i], GENES, gene_set, 0.5))

    order = rng.permutation(12)
    permuted = score_matrix(expr.subset_cells([f"c{i}" for i in order]), gene_sets, 0.5)
    assert np.array_equal(permuted.values, activity.values[order])


def test_score_matrix_rejects_duplicate_ids():
    expr = expression(["c0"], GENES, np.ones((1, 10)))
    with pytest.raises(PathwayException):
        score_matrix(expr, [GeneSet("A", "a", {"G0"}), GeneSet("A", "b", {"G1"})])
    with pytest.raises(PathwayException):
        score_matrix(expr, [])


def test_expression_rejects_negative_values():
    with pytest.raises(PathwayException):
        expression(["c0"], ["g"], [[-1.0]])
    with pytest.raises(PathwayException):
        expression(["c0"], ["g", "g"], [[1.0, 2.0]])


def dispersion_fixture(dispersions, means):
    # four cells at m - s, m - s, m + s, m + s: sample variance 4 s^2 / 3
    columns = []
    for d, m in zip(dispersions, means):
        s = math.sqrt(3.0 * m * d / 4.0)
        columns.append([m - s, m - s, m + s, m + s])
    return np.array(columns).T


def test_hvg_dominant_gene():
    rng = np.random.default_rng(13)
    n = 40
    dispersions = 1.0 + 0.05 * rng.standard_normal(n)
    dispersions[7] = 5.0
    values = dispersion_fixture(dispersions, 10.0 + np.arange(n))
    genes = [f"g{i:02d}" for i in range(n)] + ["CONST"]
    values = np.hstack([values, np.full((4, 1), 3.0)])
    selection = select_hvg(expression(["a", "b", "c", "d"], genes, values), n_top=1, n_bins=2)
    assert selection.genes == ("g07",)
    assert selection.n_informative == n


def test_hvg_never_selects_constant_genes():
    values = np.array([[1.0, 5.0, 2.0], [3.0, 5.0, 0.0], [2.0, 5.0, 4.0]])
    selection = select_hvg(expression(["a", "b", "c"], ["x", "const", "y"], values), n_top=5)
    assert set(selection.genes) == {"x", "y"}
    assert len(selection.warnings) == 1


def test_hvg_matches_reference_recipe():
    rng = np.random.default_rng(17)
    values = rng.negative_binomial(2, rng.uniform(0.05, 0.9, size=100), size=(60, 100)).astype(float)
    values[:, 0] = 0.0
    values[0, 0] = 1.0
    genes = [f"gene{i:03d}" for i in range(100)]
    selection = select_hvg(expression([f"c{i}" for i in range(60)], genes, values), n_top=10)

    mean = values.mean(axis=0)
    var = values.var(axis=0, ddof=1)
    keep = np.flatnonzero((mean > 0) & (var > 0))
    by_mean = keep[np.argsort(mean[keep], kind="stable")]
    z = {}
    for chunk in np.array_split(by_mean, 20):
        d = np.array([var[i] / mean[i] for i in chunk])
        spread = d.std(ddof=1) if len(d) > 1 else 0.0
        for i, value in zip(chunk, d):
            z[genes[i]] = (value - d.mean()) / spread if spread > 0 else 0.0
    expected = sorted(z, key=lambda g: (-z[g], g))[:10]
    assert list(selection.genes) == expected


def test_hvg_needs_two_cells():
    with pytest.raises(PathwayException):
        select_hvg(expression(["a"], ["x"], [[1.0]]), n_top=1)


def test_top_k_pathways():
    activity = ActivityMatrix(
        ("c1", "c2"), ("P3", "P1", "P2"),
        np.array([[0.0, 1.0, 0.0], [0.4, 0.4, 0.1]]),
    )
    top = top_k_pathways(activity, k=2)
    assert top["c1"][0] == ("P1", 1.0)
    assert [p for p, _ in top["c2"]] == ["P1", "P3"]
    assert top_k_pathways(activity, k=5)["c2"] == (("P1", 0.4), ("P3", 0.4), ("P2", 0.1))
    assert top_k_pathways(activity, k=2, min_score=0.0)["c1"] == (("P1", 1.0),)
    with pytest.raises(PathwayException):
        top_k_pathways(activity, k=0)


def test_top_k_matches_sort_oracle():
    rng = np.random.default_rng(6)
    ids = ("F", "A", "E", "B", "D", "C")
    values = rng.integers(0, 4, size=(5, 6)) / 4.0
    activity = ActivityMatrix(tuple(f"c{i}" for i in range(5)), ids, values)
    top = top_k_pathways(activity, k=2)
    for i in range(5):
        expected = sorted(range(6), key=lambda j: (-values[i, j], ids[j]))[:2]
        assert [p for p, _ in top[f"c{i}"]] == [ids[j] for j in expected]


def test_prevalence_boundary():
    universe = ["common", "rare", "never"]
    top_lists = {f"c{i}": ["common"] for i in range(250)}
    top_lists["c0"] = ["common", "rare"]
    result = prevalence_filter(top_lists, universe)
    # 1 / 250 = 0.4% < 0.5%
    assert result.removed == ("never", "rare")
    assert result.retained == ("common",)

    top_lists = {f"c{i}": [("common", 0.9)] for i in range(200)}
    top_lists["c0"] = [("common", 0.9), ("rare", 0.5)]
    result = prevalence_filter(top_lists, universe)
    assert result.prevalence["rare"] == pytest.approx(0.005)
    assert "rare" in result.retained


def test_prevalence_matches_recount():
    rng = np.random.default_rng(2)
    universe = [f"P{i}" for i in range(8)]
    top_lists = {f"c{i}": list(rng.choice(universe, size=2, replace=False)) for i in range(300)}
    result = prevalence_filter(top_lists, universe, threshold=0.1)
    for pathway in universe:
        share = sum(pathway in lst for lst in top_lists.values()) / 300
        assert (pathway in result.retained) == (share >= 0.1)
    with pytest.raises(PathwayException):
        prevalence_filter({}, universe)


def test_read_gmt(tmp_path):
    path = tmp_path / "hallmark.gmt"
    path.write_text("HALLMARK_A\thttp://x\tG1\tG2\t\nHALLMARK_B\tna\tG3\n")
    gene_sets = read_gmt(path)
    assert [g.id for g in gene_sets] == ["HALLMARK_A", "HALLMARK_B"]
    assert gene_sets[0].genes == frozenset({"G1", "G2"})

    path.write_text("HALLMARK_A\tdesc\n")
    with pytest.raises(SchemaException):
        read_gmt(path)


def test_read_dense_expression(tmp_path):
    path = tmp_path / "expr.csv"
    path.write_text("cell_id,G1,G2\nc1,1,0\nc2,0,3.5\n")
    expr = read_expression(path)
    assert expr.cells == ("c1", "c2")
    assert expr.genes == ("G1", "G2")
    assert expr.row(1).tolist() == [0.0, 3.5]


def test_read_mtx_in_either_orientation(tmp_path):
    dense = np.array([[1.0, 0.0, 2.0], [0.0, 4.0, 0.0]])
    sio.mmwrite(str(tmp_path / "matrix.mtx"), sparse.coo_matrix(dense.T))
    (tmp_path / "features.tsv").write_text("ENSG1\tG1\nENSG2\tG2\nENSG3\tG3\n")
    (tmp_path / "barcodes.tsv").write_text("c1\nc2\n")
    expr = read_expression(tmp_path / "matrix.mtx")
    assert expr.genes == ("G1", "G2", "G3")
    assert np.array_equal(expr.values.toarray(), dense)

    with pytest.raises(ScribeIOException):
        read_expression(tmp_path / "missing.mtx")


def test_activity_files(tmp_path):
    activity = ActivityMatrix(("c1", "c2"), ("P1", "P2"), np.array([[0.25, 0.5], [1.0, 0.0]]))
    path = write_activity(activity, tmp_path / "activity.csv")
    again = read_activity(path)
    assert again.pathways == ("P1", "P2")
    assert np.allclose(again.values, activity.values)

    top = top_k_pathways(activity, k=2, min_score=0.0)
    lines = write_top_pathways(top, tmp_path / "top.tsv").read_text().splitlines()
    assert lines[0] == "cell_id\tpathway_1\tscore_1\tpathway_2\tscore_2"
    assert lines[2] == "c2\tP1\t1.0\t\t"
