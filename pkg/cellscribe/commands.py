"""
Subcommand bodies. Each ``cmd_*`` validates its paths, does its work and
writes only into ``output``; the returned dict is the summary printed by
the CLI.
"""

import hashlib
import json
import shutil
import tempfile
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import __version__
from .codec import (
    PathwayCatalog,
    catalog_from_gene_sets,
    parse_description,
    read_catalog,
    records_from_table,
    render_description,
    split_labels,
)
from .cohort import (
    assay_filter,
    assign_cells,
    diversity_report,
    donor_split,
    split_report,
    stratified_sample,
    write_split,
)
from .formats import CLASSIFY_TASK_COLUMNS, EVALUATION_TASKS, ScribeFormats
from .generation_metrics import generation_report, read_embeddings
from .label_metrics import (
    LabelPair,
    LabelSetPair,
    classification_report,
    classification_reports,
    multilabel_report,
    pagerank_similarity_score,
    read_label_pairs,
    read_label_set_pairs,
)
from .ontology import (
    Ontology,
    OntologyGraph,
    build_graph,
    component_coverage,
    export_edges,
    export_terms,
    read_graph,
    read_obo,
)
from .pathways import (
    read_expression,
    read_gmt,
    prevalence_filter,
    score_matrix,
    select_hvg,
    top_k_pathways,
    write_activity,
    write_top_pathways,
)
from .readers import (
    file_digest,
    index_by_cell,
    read_jsonl,
    read_table,
    write_json,
    write_jsonl,
    write_table,
)
from .scribe_exceptions import (
    MetricException,
    SchemaException,
    ScribeArgumentException,
    ScribeException,
    ScribeIOException,
)
from .similarity import (
    PprConfig,
    export_cdf,
    load_matrix,
    save_matrix,
    similarity_matrix,
    similarity_report,
    similarity_stats,
)
from .validators import validate_input_path, validate_output_dir
from .utils.log.loger import get_logger

logger = get_logger()

CL_ROOT = "CL:0000000"


def _load_graph(path: Path, prefixes=None) -> OntologyGraph:
    if path.suffix == ".obo":
        return build_graph(read_obo(path), prefixes=prefixes)
    return read_graph(path)


def _load_ontology(path) -> Optional[Ontology]:
    return read_obo(validate_input_path(path)) if path else None


def _load_catalog(catalog=None, gene_sets=None) -> Optional[PathwayCatalog]:
    if catalog:
        return read_catalog(validate_input_path(catalog))
    if gene_sets:
        return catalog_from_gene_sets(read_gmt(validate_input_path(gene_sets)))
    return None


def cmd_ontology(obo, output, prefixes: Optional[Sequence[str]] = None,
                 include_obsolete: bool = False) -> dict:
    """OBO file -> ``edges.tsv`` + ``terms.tsv`` + ``ontology_summary.json``."""
    obo = validate_input_path(obo)
    output = validate_output_dir(output)
    ontology = read_obo(obo)
    graph = build_graph(ontology, include_obsolete=include_obsolete, prefixes=prefixes)
    export_edges(graph, output / "edges.tsv")
    export_terms(graph, output / "terms.tsv")

    summary = {
        "terms": len(ontology),
        "nodes": len(graph),
        "edges": len(graph.edges),
        "warning_count": len(graph.warnings),
        "warnings": list(graph.warnings),
    }
    if CL_ROOT in graph:
        summary["root_component_coverage"] = component_coverage(graph, CL_ROOT)
    write_json(summary, output / "ontology_summary.json")
    return summary


def cmd_similarity(graph, output, tau: float = 0.1, damping: float = 0.85,
                   tolerance: float = 1e-10, max_iterations: int = 10_000,
                   symmetrize: bool = False, workers: int = 1, cdf: bool = False,
                   report: bool = False, prefixes: Optional[Sequence[str]] = None) -> dict:
    """
    Graph (edge list or OBO) -> ``similarity.ppr`` with its term sidecar,
    ``similarity_stats.json`` and optionally the CDF and reference report.
    """
    graph_path = validate_input_path(graph)
    output = validate_output_dir(output)
    config = PprConfig(damping=damping, tolerance=tolerance,
                       max_iterations=max_iterations, tau=tau)
    graph = _load_graph(graph_path, prefixes)
    matrix = similarity_matrix(graph, config, symmetrize=symmetrize, workers=workers)
    save_matrix(matrix, output / "similarity.ppr")

    summary = {"terms": len(matrix.terms), "config": asdict(config), "symmetric": matrix.symmetric}
    if len(matrix.terms) > 1:
        summary["stats"] = asdict(similarity_stats(matrix))
    write_json(summary, output / "similarity_stats.json")
    if cdf and len(matrix.terms) > 1:
        with open(output / "similarity_cdf.tsv", "w", newline="") as handle:
            export_cdf(matrix, handle)
    if report and len(matrix.terms) > 1:
        write_json(similarity_report(matrix), output / "similarity_report.json")
    return summary


def _read_descriptions(path) -> Dict[str, dict]:
    path = validate_input_path(path)
    return index_by_cell(read_jsonl(path, ("cell_id", "text")), path)


def _read_references(path) -> Tuple[Dict[str, dict], bool]:
    """Reference descriptions (JSON-lines) or a metadata table keyed by cell_id."""
    path = validate_input_path(path)
    if ScribeFormats().is_table(path):
        table = read_table(path, required=("cell_id",))
        rows = {}
        for offset, row in enumerate(table.to_dict("records")):
            if row["cell_id"] in rows:
                raise SchemaException(f"duplicate cell_id {row['cell_id']}", offset + 2, path)
            rows[row["cell_id"]] = row
        return rows, True
    return _read_descriptions(path), False


def _aligned(predictions: Dict[str, dict], references: Dict[str, dict], path) -> List[str]:
    for cell_id, record in references.items():
        if cell_id not in predictions:
            raise SchemaException(f"no prediction for cell {cell_id}", record.get("_line"), path)
    return sorted(references)


def _cell_type_vocabulary(references: Dict[str, dict], is_table: bool,
                          ontology: Optional[Ontology], matrix=None) -> List[str]:
    names = set()
    if is_table:
        names |= {r.get("cell_type") for r in references.values() if r.get("cell_type")}
    if ontology is not None:
        names |= {t.name for t in ontology.terms.values() if t.name and not t.obsolete}
    if matrix is not None and matrix.names:
        names |= {n for n in matrix.names.values() if n}
    return sorted(names)


def _parsed(records: Dict[str, dict], catalog, cell_types, origins: Optional[dict] = None) -> Dict[str, object]:
    origins = origins or {}
    return {cid: parse_description(r["text"], catalog, cell_types, **origins) for cid, r in records.items()}


def _origin_vocabularies(references: Dict[str, dict]) -> dict:
    """Tissue, disease and stage values of a reference table, for anchored parsing."""
    return {
        key: sorted({str(r[column]) for r in references.values() if r.get(column)})
        for key, column in (("tissues", "tissue"), ("diseases", "disease"), ("stages", "development_stage"))
    }


def _evaluate_generation(predictions, references, pooled, embeddings) -> dict:
    preds = _read_descriptions(predictions)
    refs = _read_descriptions(references)
    cells = _aligned(preds, refs, references)
    pairs = [(c, preds[c]["text"], refs[c]["text"]) for c in cells]
    loaded = {label: read_embeddings(path) for label, path in embeddings}
    report = generation_report(pairs, pooled=pooled, embeddings=loaded or None)
    return {"generation": report.as_table(), "pooled_bleu": pooled}


def _evaluate_classify(predictions, references, ontology, canonicalize) -> dict:
    if Path(predictions).suffix == ".tsv" and references is None:
        report = classification_report(read_label_pairs(validate_input_path(predictions)))
        return {"labels": {"raw": {**report.as_table(), "per_class": report.per_class}}}

    preds = _read_descriptions(predictions)
    refs, is_table = _read_references(references)
    cells = _aligned(preds, refs, references)
    cell_types = _cell_type_vocabulary(refs, is_table, ontology)
    origins = _origin_vocabularies(refs) if is_table else None
    parsed = _parsed({c: preds[c] for c in cells}, None, cell_types, origins)
    if is_table:
        expected = {c: refs[c] for c in cells}
    else:
        truth = _parsed({c: refs[c] for c in cells}, None, cell_types)
        expected = {c: {col: truth[c].get(col) for col in CLASSIFY_TASK_COLUMNS} for c in cells}

    vocabularies = None
    if canonicalize:
        vocabularies = {
            col: sorted({e[col] for e in expected.values() if e.get(col)})
            for col in CLASSIFY_TASK_COLUMNS
        }
    reports = classification_reports(parsed, expected, vocabularies=vocabularies, ontology=ontology)
    return {
        column: {mode: report.as_table() for mode, report in modes.items()}
        for column, modes in reports.items()
    }


def _evaluate_pathways(predictions, references, catalog, universe) -> dict:
    if Path(predictions).suffix == ".tsv" and references is None:
        pairs = read_label_set_pairs(validate_input_path(predictions))
    else:
        preds = _read_descriptions(predictions)
        refs, is_table = _read_references(references)
        cells = _aligned(preds, refs, references)
        pairs = []
        for cell in cells:
            predicted = parse_description(preds[cell]["text"], catalog).pathways
            if is_table:
                reference = split_labels(refs[cell].get("pathways", ""))
            else:
                reference = parse_description(refs[cell]["text"], catalog).pathways
            pairs.append(LabelSetPair(cell, predicted, reference))
    if universe is None and catalog is not None:
        universe = catalog.ids()
    report = multilabel_report(pairs, universe)
    return {"pathways": report.as_table()}


def _evaluate_similarity(predictions, references, matrix_path, ontology, drop_unparsed) -> dict:
    if matrix_path is None:
        raise ScribeArgumentException("task ps requires --matrix")
    matrix = load_matrix(validate_input_path(matrix_path))
    if Path(predictions).suffix == ".tsv" and references is None:
        pairs = read_label_pairs(validate_input_path(predictions))
    else:
        preds = _read_descriptions(predictions)
        refs, is_table = _read_references(references)
        cells = _aligned(preds, refs, references)
        cell_types = _cell_type_vocabulary(refs, is_table, ontology, matrix)
        pairs = []
        for cell in cells:
            predicted = parse_description(preds[cell]["text"], None, cell_types).cell_type
            if is_table:
                reference = refs[cell].get("cell_type_id") or refs[cell].get("cell_type")
            else:
                reference = parse_description(refs[cell]["text"], None, cell_types).cell_type
            if not reference:
                raise MetricException(f"{cell}: reference has no cell type")
            pairs.append(LabelPair(cell, predicted, reference))

    zeroed = pagerank_similarity_score(pairs, matrix, ontology, drop_unparsed=False)
    dropped = pagerank_similarity_score(pairs, matrix, ontology, drop_unparsed=True)
    primary = dropped if drop_unparsed else zeroed
    table = primary.as_table()
    table["PS_unparsed_zero"] = zeroed.average
    table["PS_unparsed_dropped"] = dropped.average
    return {"cell_type": table, "drop_unparsed": drop_unparsed}


def cmd_evaluate(predictions, references, task: str, output, matrix=None, ontology=None,
                 catalog=None, gene_sets=None, canonicalize: bool = False,
                 drop_unparsed: bool = False, pooled: bool = False,
                 embeddings: Iterable[Tuple[str, Path]] = ()) -> dict:
    """
    Score predictions against references and write ``evaluation_<task>.json``.

    Descriptions are JSON-lines ``{cell_id, text}``. References may also be a
    metadata table; a TSV of label pairs can be passed as predictions alone.
    """
    if task not in EVALUATION_TASKS:
        raise ScribeArgumentException(f"Unknown task {task}; choose from {EVALUATION_TASKS}")
    if references is None and not (task != "generation" and Path(predictions).suffix == ".tsv"):
        raise ScribeArgumentException(f"task {task} needs --references")
    output = validate_output_dir(output)
    ontology = _load_ontology(ontology)

    if task == "generation":
        report = _evaluate_generation(predictions, references, pooled, list(embeddings))
    elif task == "classify":
        report = _evaluate_classify(predictions, references, ontology, canonicalize)
    elif task == "pathways":
        catalog_obj = _load_catalog(catalog, gene_sets)
        report = _evaluate_pathways(predictions, references, catalog_obj, None)
    else:
        report = _evaluate_similarity(predictions, references, matrix, ontology, drop_unparsed)

    report["task"] = task
    write_json(report, output / f"evaluation_{task}.json")
    return report


def _pathway_activity(expression, gene_sets, top_fraction, n_hvg, k, prevalence,
                      workers, cells: Optional[Sequence[str]] = None):
    expr = read_expression(validate_input_path(expression))
    if cells is not None:
        expr = expr.subset_cells(cells)
    sets = read_gmt(validate_input_path(gene_sets))
    hvg = None
    if n_hvg:
        hvg = select_hvg(expr, n_hvg)
        expr = expr.subset_genes(hvg.genes)
    activity = score_matrix(expr, sets, top_fraction=top_fraction, workers=workers)
    first_pass = top_k_pathways(activity, k=k, min_score=0.0)
    filtered = prevalence_filter(first_pass, activity.pathways, threshold=prevalence)
    retained = activity.select(filtered.retained)
    top = top_k_pathways(retained, k=k, min_score=0.0)
    return sets, hvg, activity, filtered, top


def cmd_pathways(expression, gene_sets, output, top_fraction: float = 0.05,
                 n_hvg: Optional[int] = None, k: int = 2, prevalence: float = 0.005,
                 workers: int = 1) -> dict:
    """Expression + GMT -> ``activity.csv``, ``top_pathways.tsv``, ``prevalence.json``."""
    output = validate_output_dir(output)
    sets, hvg, activity, filtered, top = _pathway_activity(
        expression, gene_sets, top_fraction, n_hvg, k, prevalence, workers
    )
    write_activity(activity, output / "activity.csv")
    write_top_pathways(top, output / "top_pathways.tsv", k=k)
    summary = {
        "cells": len(activity.cells),
        "gene_sets": len(sets),
        "hvg": len(hvg.genes) if hvg else None,
        "retained": list(filtered.retained),
        "removed": list(filtered.removed),
        "prevalence": filtered.prevalence,
        "threshold": filtered.threshold,
        "warnings": list(activity.warnings) + (list(hvg.warnings) if hvg else []),
    }
    write_json(summary, output / "prevalence.json")
    return summary


def _table_name(path: Path, stem: str) -> str:
    return f"{stem}{path.suffix if path.suffix in ('.csv', '.tsv') else '.tsv'}"


def cmd_sample(cohort, output, target_n: int, seed: int,
               columns: Sequence[str] = CLASSIFY_TASK_COLUMNS,
               exclude_assays: bool = True) -> dict:
    """Cohort table -> sampled table + ``diversity.json`` (before/after)."""
    cohort = validate_input_path(cohort)
    output = validate_output_dir(output)
    table = read_table(cohort, required=columns)
    before = diversity_report(table, columns)
    assays = None
    if exclude_assays:
        table, assays = assay_filter(table)
    sampled = stratified_sample(table, target_n, columns, seed)
    write_table(sampled, output / _table_name(cohort, "sampled"))
    summary = {
        "seed": seed,
        "target_n": target_n,
        "before": before,
        "after": diversity_report(sampled, columns),
        "assay_filter": asdict(assays) if assays else None,
    }
    write_json(summary, output / "diversity.json")
    return summary


def cmd_split(cohort, output, seed: int, ratios=(0.8, 0.1, 0.1)) -> dict:
    """Cohort table -> ``split.tsv`` (donor_id, split) + ``split_report.json``."""
    cohort = validate_input_path(cohort)
    output = validate_output_dir(output)
    table = read_table(cohort, required=("donor_id",))
    split = donor_split(table, ratios, seed)
    write_split(split, output / "split.tsv")
    report = split_report(split)
    write_json(report, output / "split_report.json")
    return report


def _read_top_pathways(path) -> Dict[str, Tuple[str, ...]]:
    table = read_table(validate_input_path(path), required=("cell_id",))
    columns = sorted(c for c in table.columns if c.startswith("pathway_"))
    return {
        row["cell_id"]: tuple(row[c] for c in columns if row[c])
        for row in table.to_dict("records")
    }


def _describe(table, ontology, catalog, top: Optional[Dict[str, Sequence]] = None,
              path=None) -> Tuple[List[dict], int]:
    if top is not None:
        table = table.copy()
        table["pathways"] = [
            ";".join(p[0] if isinstance(p, tuple) else p for p in top.get(cell, ()))
            for cell in table["cell_id"]
        ]
    records = records_from_table(table, ontology, path)
    cell_types = sorted({r.cell_type_name for r in records})
    origins = {
        "tissues": sorted({r.tissue for r in records}),
        "diseases": sorted({r.disease for r in records}),
        "stages": sorted({r.development_stage for r in records}),
    }
    rendered, round_trip = [], 0
    for record in records:
        text = render_description(record, ontology, catalog)
        parsed = parse_description(text, catalog, cell_types, **origins)
        if (parsed.cell_type, parsed.tissue, parsed.disease, parsed.sex,
                parsed.development_stage, parsed.pathways) == (
                record.cell_type_name, record.tissue, record.disease, record.sex,
                record.development_stage, record.pathways):
            round_trip += 1
        rendered.append({"cell_id": record.cell_id, "text": text})
    if round_trip < len(records):
        logger.warning(f"{len(records) - round_trip} descriptions do not parse back to their record")
    return rendered, round_trip


def cmd_describe(cohort, output, ontology=None, catalog=None, gene_sets=None,
                 top_pathways=None) -> dict:
    """Cohort table (+ optional ``top_pathways.tsv``) -> ``descriptions.jsonl``."""
    cohort = validate_input_path(cohort)
    output = validate_output_dir(output)
    ontology = _load_ontology(ontology)
    catalog_obj = _load_catalog(catalog, gene_sets) or PathwayCatalog()
    table = read_table(cohort)
    top = _read_top_pathways(top_pathways) if top_pathways else None
    rendered, round_trip = _describe(table, ontology, catalog_obj, top, cohort)
    write_jsonl(rendered, output / "descriptions.jsonl")
    return {"descriptions": len(rendered), "round_trip": round_trip}


def _content_digest(manifest: dict) -> str:
    payload = {k: v for k, v in manifest.items() if k not in ("created", "content_digest")}
    encoded = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(encoded).hexdigest()


def _publish(staging: Path, output: Path) -> None:
    """Move staged outputs into place; a failed move takes back the ones already moved."""
    published = []
    try:
        for item in sorted(staging.iterdir()):
            target = output / item.name
            shutil.move(str(item), str(target))
            published.append(target)
    except OSError:
        for target in published:
            if target.is_dir():
                shutil.rmtree(target, ignore_errors=True)
            else:
                target.unlink(missing_ok=True)
        raise


def cmd_pipeline(cohort, expression, gene_sets, output, seed: int, ontology=None,
                 catalog=None, target_n: Optional[int] = None, ratios=(0.8, 0.1, 0.1),
                 columns: Sequence[str] = CLASSIFY_TASK_COLUMNS, top_fraction: float = 0.05,
                 n_hvg: Optional[int] = None, k: int = 2, prevalence: float = 0.005,
                 workers: int = 1) -> dict:
    """
    assay filter -> sampling -> pathway scoring -> top-k -> prevalence
    filter -> descriptions -> donor split, plus ``manifest.json``.

    Outputs are staged in a hidden directory under ``output`` and moved in
    place only when every step succeeded.
    """
    cohort = validate_input_path(cohort)
    output = validate_output_dir(output)
    staging = Path(tempfile.mkdtemp(prefix=".partial-", dir=output))
    try:
        ontology_obj = _load_ontology(ontology)
        table = read_table(cohort, required=("cell_id", "donor_id", *columns))
        before = diversity_report(table, columns)
        table, assays = assay_filter(table)
        if target_n is not None and target_n < len(table):
            table = stratified_sample(table, target_n, columns, seed)
        after = diversity_report(table, columns)

        sets, hvg, activity, filtered, top = _pathway_activity(
            expression, gene_sets, top_fraction, n_hvg, k, prevalence, workers,
            cells=list(table["cell_id"]),
        )
        catalog_obj = _load_catalog(catalog) or catalog_from_gene_sets(sets)
        rendered, round_trip = _describe(table, ontology_obj, catalog_obj, top, cohort)

        split = donor_split(table, ratios, seed)
        table = table.copy()
        table["split"] = assign_cells(table, split).to_numpy()

        files = {
            "descriptions.jsonl": write_jsonl(rendered, staging / "descriptions.jsonl"),
            "split.tsv": write_split(split, staging / "split.tsv"),
            "activity.csv": write_activity(activity, staging / "activity.csv"),
            "top_pathways.tsv": write_top_pathways(top, staging / "top_pathways.tsv", k=k),
            "cohort.tsv": write_table(table, staging / "cohort.tsv"),
        }
        manifest = {
            "seed": seed,
            "version": __version__,
            "params": {
                "target_n": target_n,
                "ratios": list(ratios),
                "columns": list(columns),
                "top_fraction": top_fraction,
                "n_hvg": n_hvg,
                "k": k,
                "prevalence": prevalence,
            },
            "counts": {
                "cells_input": assays.n_before,
                "cells_after_assay_filter": assays.n_after,
                "cells_described": len(rendered),
                "round_trip": round_trip,
                "gene_sets": len(sets),
                "pathways_retained": len(filtered.retained),
                "hvg": len(hvg.genes) if hvg else None,
            },
            "assays_removed": assays.removed,
            "diversity": {"before": before, "after": after},
            "split": split_report(split),
            "outputs": {name: file_digest(path) for name, path in files.items()},
        }
        manifest["content_digest"] = _content_digest(manifest)
        manifest["created"] = datetime.now(timezone.utc).isoformat()
        write_json(manifest, staging / "manifest.json")

        _publish(staging, output)
    except ScribeException:
        logger.error("Pipeline failed; partial outputs removed")
        raise
    except OSError as e:
        logger.error("Pipeline failed; partial outputs removed")
        raise ScribeIOException(f"Pipeline failed: {e}")
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return manifest
