"""Single-label, multi-label and ontology-aware classification metrics."""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.metrics import (
    accuracy_score,
    f1_score,
    jaccard_score,
    precision_recall_fscore_support,
)
from sklearn.preprocessing import MultiLabelBinarizer

from .codec import ExtractedLabels, canonicalize_label, split_labels
from .formats import CLASSIFICATION_FIELDS, CLASSIFY_TASK_COLUMNS, MULTILABEL_FIELDS, SIMILARITY_FIELD
from .ontology import Ontology, lookup_term
from .scribe_exceptions import GraphException, MetricException, SchemaException, ScribeIOException
from .similarity import SimilarityMatrix
from .utils.log.loger import get_logger

logger = get_logger()

# Stands in for a prediction that could not be parsed; never equals a reference
ABSENT = "∅"


@dataclass(frozen=True)
class LabelPair:
    cell_id: str
    predicted: Optional[str]
    reference: str

    def __post_init__(self):
        if not self.reference or not self.reference.strip():
            raise MetricException(f"{self.cell_id}: empty reference label")


@dataclass(frozen=True)
class LabelSetPair:
    cell_id: str
    predicted: frozenset
    reference: frozenset

    def __post_init__(self):
        object.__setattr__(self, "predicted", frozenset(self.predicted))
        object.__setattr__(self, "reference", frozenset(self.reference))


@dataclass(frozen=True)
class ClassificationReport:
    n_pairs: int
    accuracy: float
    weighted_f1: float
    per_class: Dict[str, Dict[str, float]] = field(default_factory=dict)
    n_absent: int = 0

    def as_table(self, scale: float = 100.0) -> dict:
        row = {column: getattr(self, name) * scale for name, column in CLASSIFICATION_FIELDS.items()}
        row["n"] = self.n_pairs
        return row


@dataclass(frozen=True)
class MultiLabelReport:
    n_pairs: int
    subset_accuracy: float
    jaccard: float
    weighted_f1: float

    def as_table(self, scale: float = 100.0) -> dict:
        row = {column: getattr(self, name) * scale for name, column in MULTILABEL_FIELDS.items()}
        row["n"] = self.n_pairs
        return row


@dataclass(frozen=True)
class SimilarityScoreReport:
    n_pairs: int
    n_scored: int
    n_unresolved: int
    average: float
    scores: Tuple[Optional[float], ...]
    dropped_unparsed: bool = False

    def as_table(self) -> dict:
        return {
            SIMILARITY_FIELD: self.average,
            "n": self.n_pairs,
            "n_scored": self.n_scored,
            "n_unresolved": self.n_unresolved,
        }


def classification_report(pairs: Sequence[LabelPair]) -> ClassificationReport:
    """
    Accuracy and support-weighted F1 over single-label pairs.

    Missing predictions become the ``ABSENT`` class. Per-class precision,
    recall and F1 use 0 for empty denominators.
    """
    if not pairs:
        raise MetricException("Classification metrics over an empty corpus")
    y_true = [p.reference for p in pairs]
    y_pred = [p.predicted if p.predicted else ABSENT for p in pairs]

    labels = sorted(set(y_true) | set(y_pred))
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, zero_division=0
    )
    per_class = {
        label: {
            "precision": float(precision[i]),
            "recall": float(recall[i]),
            "f1": float(f1[i]),
            "support": int(support[i]),
        }
        for i, label in enumerate(labels)
    }
    return ClassificationReport(
        n_pairs=len(pairs),
        accuracy=float(accuracy_score(y_true, y_pred)),
        weighted_f1=float(f1_score(y_true, y_pred, labels=labels, average="weighted", zero_division=0)),
        per_class=per_class,
        n_absent=sum(1 for label in y_pred if label == ABSENT),
    )


def multilabel_report(pairs: Sequence[LabelSetPair],
                      universe: Optional[Iterable[str]] = None) -> MultiLabelReport:
    """
    Subset accuracy, mean per-cell Jaccard and weighted F1 over per-label
    binary indicators. Jaccard of two empty sets is 1.

    Args:
        pairs: predicted and reference label sets per cell
        universe: known labels, extended by every observed label
    Returns:
        MultiLabelReport
    """
    if not pairs:
        raise MetricException("Multi-label metrics over an empty corpus")
    classes = set(universe or ())
    for pair in pairs:
        classes |= pair.predicted | pair.reference
    binarizer = MultiLabelBinarizer(classes=sorted(classes))
    binarizer.fit([])
    y_true = binarizer.transform([sorted(p.reference) for p in pairs])
    y_pred = binarizer.transform([sorted(p.predicted) for p in pairs])

    if y_true.shape[1] == 0:
        # Every set is empty, so every prediction is exact
        return MultiLabelReport(len(pairs), 1.0, 1.0, 1.0)

    return MultiLabelReport(
        n_pairs=len(pairs),
        subset_accuracy=float(accuracy_score(y_true, y_pred)),
        jaccard=float(jaccard_score(y_true, y_pred, average="samples", zero_division=1)),
        weighted_f1=float(f1_score(y_true, y_pred, average="weighted", zero_division=0)),
    )


class _TermResolver:
    """Map labels (ids, names, synonyms) to the rows of a similarity matrix."""

    def __init__(self, matrix: SimilarityMatrix, ontology: Optional[Ontology] = None):
        self.matrix = matrix
        self.ontology = ontology
        self.by_name: Dict[str, str] = {}
        for tid in matrix.terms:
            name = (matrix.names or {}).get(tid) or (ontology.name_of(tid) if ontology else "")
            if name:
                self.by_name.setdefault(name, tid)
        self.vocabulary = sorted(self.by_name)

    def _from_ontology(self, label: str) -> Optional[str]:
        if self.ontology is None:
            return None
        try:
            match = lookup_term(self.ontology, label)
        except GraphException:
            return None
        return match.term_id if match.term_id in self.matrix.index else None

    def reference(self, cell_id: str, label: str) -> str:
        term_id = self.predicted(label)
        if term_id is None:
            raise MetricException(f"{cell_id}: reference label '{label}' is not an ontology term")
        return term_id

    def predicted(self, label: Optional[str]) -> Optional[str]:
        if not label or not label.strip():
            return None
        label = label.strip()
        if label in self.matrix.index:
            return label
        if self.vocabulary:
            name = canonicalize_label(label, self.vocabulary, self.ontology)
            if name is not None:
                return self.by_name[name]
        return self._from_ontology(label)


def pagerank_similarity_score(pairs: Sequence[LabelPair], matrix: SimilarityMatrix,
                              ontology: Optional[Ontology] = None,
                              drop_unparsed: bool = False) -> SimilarityScoreReport:
    """
    Average S(reference, prediction) scaled to 0-100.

    Unresolvable predictions score 0 and are counted; with ``drop_unparsed``
    they are left out of the average instead.
    """
    if not pairs:
        raise MetricException("PageRank similarity over an empty corpus")
    resolver = _TermResolver(matrix, ontology)

    scores: List[Optional[float]] = []
    unresolved = 0
    for pair in pairs:
        reference = resolver.reference(pair.cell_id, pair.reference)
        predicted = resolver.predicted(pair.predicted)
        if predicted is None:
            unresolved += 1
            scores.append(None)
        elif predicted == reference:
            scores.append(1.0)
        else:
            scores.append(matrix.score(reference, predicted))

    if drop_unparsed:
        counted = [s for s in scores if s is not None]
    else:
        counted = [0.0 if s is None else s for s in scores]
    if unresolved:
        logger.warning(f"{unresolved}/{len(pairs)} predictions did not resolve to a term")
    average = float(np.mean(counted)) * 100.0 if counted else 0.0
    return SimilarityScoreReport(
        n_pairs=len(pairs),
        n_scored=len(pairs) - unresolved,
        n_unresolved=unresolved,
        average=average,
        scores=tuple(scores),
        dropped_unparsed=drop_unparsed,
    )


def classification_reports(parsed: Dict[str, ExtractedLabels], references: Dict[str, dict],
                           columns: Sequence[str] = CLASSIFY_TASK_COLUMNS,
                           vocabularies: Optional[Dict[str, Sequence[str]]] = None,
                           ontology: Optional[Ontology] = None) -> Dict[str, dict]:
    """
    Score labels parsed from generated descriptions against reference
    metadata, one report per column.

    Args:
        parsed: cell_id -> labels extracted from the generated text
        references: cell_id -> reference record holding ``columns``
        vocabularies: column -> canonical labels; when given a ``canonical``
            report is added next to the ``raw`` one
    Returns:
        dict column -> {"raw": ClassificationReport, "canonical": ...}
    """
    missing = sorted(set(references) - set(parsed))
    if missing:
        raise MetricException(f"No prediction for {len(missing)} cells, eg {missing[0]}")
    results = {}
    for column in columns:
        raw_pairs, canonical_pairs = [], []
        vocabulary = (vocabularies or {}).get(column)
        for cell_id in sorted(references):
            reference = references[cell_id].get(column)
            predicted = parsed[cell_id].get(column)
            raw_pairs.append(LabelPair(cell_id, predicted, reference))
            if vocabulary:
                canonical_pairs.append(
                    LabelPair(cell_id, canonicalize_label(predicted, vocabulary, ontology), reference)
                )
        results[column] = {"raw": classification_report(raw_pairs)}
        if canonical_pairs:
            results[column]["canonical"] = classification_report(canonical_pairs)
    return results


def _read_rows(path: Union[str, Path]) -> List[Tuple[int, List[str]]]:
    path = Path(path)
    rows = []
    try:
        with open(path, newline="") as handle:
            for line_number, row in enumerate(csv.reader(handle, delimiter="\t"), 1):
                if not row or not any(cell.strip() for cell in row):
                    continue
                if line_number == 1 and row[0].strip() == "cell_id":
                    continue
                if len(row) != 3:
                    raise SchemaException(
                        f"expected cell_id, predicted, reference; got {len(row)} fields",
                        line_number, path,
                    )
                rows.append((line_number, row))
    except OSError as e:
        raise ScribeIOException(f"Failed to read {path}: {e}")
    return rows


def read_label_pairs(path: Union[str, Path]) -> List[LabelPair]:
    """``cell_id\\tpredicted\\treference`` rows; an empty prediction is absent."""
    pairs = []
    for line_number, (cell_id, predicted, reference) in _read_rows(path):
        try:
            pairs.append(LabelPair(cell_id.strip(), predicted.strip() or None, reference.strip()))
        except MetricException as e:
            raise SchemaException(str(e), line_number, path)
    return pairs


def read_label_set_pairs(path: Union[str, Path]) -> List[LabelSetPair]:
    """``cell_id\\tpred1;pred2\\tref1;ref2`` rows."""
    pairs = []
    for line_number, (cell_id, predicted, reference) in _read_rows(path):
        reference_set = split_labels(reference)
        if len(set(reference_set)) > 2:
            raise SchemaException("more than two reference labels", line_number, path)
        pairs.append(LabelSetPair(cell_id.strip(), split_labels(predicted), reference_set))
    return pairs
