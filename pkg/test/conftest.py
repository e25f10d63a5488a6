import numpy as np
import pandas as pd
import pytest

from cellscribe.codec import PathwayCatalog, PathwayEntry
from cellscribe.ontology import OntologyGraph, parse_obo

SMALL_OBO = """format-version: 1.2
ontology: cl

[Term]
id: CL:0000000
name: cell
def: "A material entity of anatomical origin." [CARO:mah]

[Term]
id: CL:0000084
name: T cell
def: "A type of lymphocyte whose defining characteristic is the expression of a T cell receptor complex." [PMID:123]
synonym: "T-lymphocyte" EXACT []
synonym: "T-cell" EXACT []
is_a: CL:0000542 ! lymphocyte

[Term]
id: CL:0000542
name: lymphocyte
def: "A lymphocyte is a leukocyte commonly found in the blood and lymph." []
is_a: CL:0000000 ! cell

[Term]
id: CL:0000236
name: B cell
synonym: "B-lymphocyte" EXACT []
is_a: CL:0000542 ! lymphocyte
is_a: CL:0000542 ! lymphocyte

[Term]
id: CL:0000999
name: old cell
is_obsolete: true
is_a: CL:0000000

[Typedef]
id: part_of
name: part of
"""

HALLMARK_TEXT = (
    "This sample consists of a ciliated columnar cell of tracheobronchial tree, multi-ciliated "
    "epithelial cell located in the trachea and bronchi, characterized by a columnar shape and "
    "motile cilia on its apical surface. These cilia facilitate mucociliary clearance by moving "
    "mucus and trapped particles toward the pharynx. It originates from the lung parenchyma of a "
    "normal male during elderly stage. This cell is associated with Genes mediating programmed "
    "cell death (apoptosis) by activation of caspases. Additionally, it involves Genes "
    "down-regulated in response to ultraviolet (UV) radiation."
)


@pytest.fixture
def small_obo_text():
    return SMALL_OBO


@pytest.fixture
def small_ontology():
    return parse_obo(SMALL_OBO)


def make_graph(nodes, edges):
    return OntologyGraph(nodes, edges)


@pytest.fixture
def chain_graph():
    # a - b - c - d - e
    nodes = ["a", "b", "c", "d", "e"]
    return make_graph(nodes, list(zip(nodes[:-1], nodes[1:])))


@pytest.fixture
def star_graph():
    return make_graph(["hub", "s1", "s2", "s3"], [("s1", "hub"), ("s2", "hub"), ("s3", "hub")])


@pytest.fixture
def catalog():
    return PathwayCatalog({
        "HALLMARK_APOPTOSIS": PathwayEntry(
            "HALLMARK_APOPTOSIS", "apoptosis",
            "Genes mediating programmed cell death (apoptosis) by activation of caspases.",
        ),
        "HALLMARK_UV_RESPONSE_DN": PathwayEntry(
            "HALLMARK_UV_RESPONSE_DN", "UV response down",
            "Genes down-regulated in response to ultraviolet (UV) radiation.",
        ),
        "HALLMARK_HYPOXIA": PathwayEntry(
            "HALLMARK_HYPOXIA", "hypoxia",
            "Genes up-regulated in response to low oxygen levels (hypoxia).",
        ),
        "HALLMARK_MYC_TARGETS_V1": PathwayEntry(
            "HALLMARK_MYC_TARGETS_V1", "MYC targets",
            "A subgroup of genes regulated by MYC - version 1 (v1).",
        ),
    })


@pytest.fixture
def hallmark_text():
    return HALLMARK_TEXT


@pytest.fixture
def cohort():
    """40 cells, 10 donors of 4 cells each, skewed cell types."""
    rng = np.random.default_rng(11)
    rows = []
    for i in range(40):
        rows.append({
            "cell_id": f"cell{i:03d}",
            "cell_type_id": "CL:0000084" if i % 4 else "CL:0000236",
            "cell_type": "T cell" if i % 4 else "B cell",
            "tissue": ["blood", "lung", "spleen"][int(rng.integers(3))],
            "disease": "normal" if i % 5 else "COVID-19",
            "sex": ["male", "female"][i % 2],
            "development_stage": "adult stage",
            "donor_id": f"donor{i // 4}",
            "assay": "10x 3' v3" if i % 7 else "Smart-seq2",
        })
    return pd.DataFrame(rows)
