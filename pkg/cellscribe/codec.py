"""
Structured cell descriptions.

Canonical grammar (sentences for missing pathways are left out)::

    This sample consists of a {cell type}, {definition}. It originates from
    the {tissue} of a {disease} {sex} during {development stage}. This cell
    is associated with {pathway 1 definition}. Additionally, it involves
    {pathway 2 definition}.
"""

import csv
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .formats import SEX_VALUES
from .ontology import Ontology
from .readers import read_table
from .scribe_exceptions import (
    CodecException,
    SchemaException,
    ScribeIOException,
)
from .utils.log.loger import get_logger

logger = get_logger()

CATALOG_COLUMNS = ("pathway_id", "display_name", "definition")
RECORD_COLUMNS = (
    "cell_id",
    "cell_type_id",
    "cell_type",
    "tissue",
    "disease",
    "sex",
    "development_stage",
    "donor_id",
    "assay",
)

CUES = ("cell_type", "origin", "pathway_1", "pathway_2")

_CELL_TYPE = re.compile(r"consists of an? (?P<name>.+?)(?:,\s|\.\s|\.$)", re.S)
_CELL_TYPE_START = re.compile(r"consists of an? ", re.S)
_ORIGIN = re.compile(
    r"originates from the (?P<tissue>.+?) of an? (?P<disease>.+?) "
    r"(?P<sex>male|female|unknown) during (?P<stage>.+?)\.(?=\s|$)",
    re.S,
)
_SENTENCE_END = r"\.(?=\s+(?:Additionally|This|It)\b|\s*$)"
_PATHWAY_1 = re.compile(r"This cell is associated with (?P<phrase>.+?)" + _SENTENCE_END, re.S)
_PATHWAY_1_LOOSE = re.compile(r"associated with (?P<phrase>.+?)" + _SENTENCE_END, re.S)
_PATHWAY_2 = re.compile(r"Additionally, it involves (?P<phrase>.+?)" + _SENTENCE_END, re.S)


@dataclass(frozen=True)
class CellRecord:
    cell_id: str
    cell_type_id: str
    cell_type_name: str
    tissue: str
    disease: str
    sex: str
    development_stage: str
    donor_id: str = ""
    assay: str = ""
    pathways: Tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.pathways) > 2:
            raise CodecException(f"{self.cell_id}: at most two pathways, got {len(self.pathways)}")
        if len(set(self.pathways)) != len(self.pathways):
            raise CodecException(f"{self.cell_id}: duplicate pathways {self.pathways}")
        if self.sex not in SEX_VALUES:
            raise CodecException(f"{self.cell_id}: sex must be one of {SEX_VALUES}, got {self.sex!r}")
        for name in ("cell_type_name", "tissue", "disease", "development_stage"):
            if not getattr(self, name).strip():
                raise CodecException(f"{self.cell_id}: empty {name}")


@dataclass(frozen=True)
class ExtractedLabels:
    cell_type: Optional[str] = None
    tissue: Optional[str] = None
    disease: Optional[str] = None
    sex: Optional[str] = None
    development_stage: Optional[str] = None
    pathways: Tuple[str, ...] = ()
    pathway_phrases: Tuple[str, ...] = ()
    diagnostics: Tuple[str, ...] = ()

    def get(self, column: str) -> Optional[str]:
        return getattr(self, column)


@dataclass(frozen=True)
class PathwayEntry:
    pathway_id: str
    display_name: str
    definition: str


@dataclass(frozen=True)
class PathwayCatalog:
    entries: Dict[str, PathwayEntry] = field(default_factory=dict)

    def __post_init__(self):
        for pid, entry in self.entries.items():
            if not entry.definition.strip():
                raise CodecException(f"Pathway {pid} has an empty definition")

    def __contains__(self, pathway_id):
        return pathway_id in self.entries

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, pathway_id) -> PathwayEntry:
        return self.entries[pathway_id]

    def ids(self) -> List[str]:
        return sorted(self.entries)

    def match_phrase(self, phrase: str) -> Optional[str]:
        """
        Longest catalog definition contained in ``phrase``; falls back to the
        longest contained display name, then to an exact id.
        """
        folded = _normalize(phrase)
        best, best_len = None, 0
        for pid in self.ids():
            definition = _normalize(self.entries[pid].definition)
            if definition and definition in folded and len(definition) > best_len:
                best, best_len = pid, len(definition)
        if best is not None:
            return best
        for pid in self.ids():
            name = _normalize(self.entries[pid].display_name)
            if name and name in folded and len(name) > best_len:
                best, best_len = pid, len(name)
        if best is None and phrase.strip() in self.entries:
            best = phrase.strip()
        return best


def _normalize(text: str) -> str:
    return " ".join(text.casefold().split()).rstrip(".")


def _clause(text: str) -> str:
    """Trim whitespace and a single trailing period."""
    text = " ".join(text.split())
    return text[:-1] if text.endswith(".") else text


def _definition_clause(definition: str) -> str:
    text = _clause(definition)
    for article in ("A ", "An "):
        if text.startswith(article):
            return text[len(article):]
    return text


def render_description(record: CellRecord, ontology: Optional[Ontology] = None,
                       catalog: Optional[PathwayCatalog] = None) -> str:
    """
    Render a record with the canonical template.

    Args:
        record: the cell metadata with at most two pathway ids
        ontology: source of the cell-type definition; without it only the name is used
        catalog: pathway id -> definition
    Returns:
        str
    """
    catalog = catalog or PathwayCatalog()
    for pid in record.pathways:
        if pid not in catalog:
            raise CodecException(f"{record.cell_id}: unknown pathway id {pid}")

    definition = None
    if ontology is not None:
        term = ontology.get(record.cell_type_id)
        if term is None or not term.definition:
            logger.warning(
                f"{record.cell_id}: no definition for {record.cell_type_id}; rendering the name only"
            )
        else:
            definition = _definition_clause(term.definition)

    if definition:
        sentences = [f"This sample consists of a {record.cell_type_name}, {definition}."]
    else:
        sentences = [f"This sample consists of a {record.cell_type_name}."]
    sentences.append(
        f"It originates from the {record.tissue} of a {record.disease} {record.sex} "
        f"during {_clause(record.development_stage)}."
    )
    if len(record.pathways) >= 1:
        sentences.append(
            f"This cell is associated with {_clause(catalog[record.pathways[0]].definition)}."
        )
    if len(record.pathways) == 2:
        sentences.append(
            f"Additionally, it involves {_clause(catalog[record.pathways[1]].definition)}."
        )
    return " ".join(sentences)


def _match_cell_type(text: str, cell_types: Optional[Sequence[str]]) -> Optional[str]:
    if cell_types:
        start = _CELL_TYPE_START.search(text)
        if start:
            rest = text[start.end():]
            folded = rest.casefold()
            best = None
            for name in cell_types:
                lowered = name.casefold()
                if folded.startswith(lowered):
                    tail = rest[len(name):len(name) + 1]
                    if tail in ("", ",", ".") and (best is None or len(name) > len(best)):
                        best = rest[:len(name)]
            if best is not None:
                return best
    match = _CELL_TYPE.search(text)
    return match.group("name").strip() if match else None


@lru_cache(maxsize=32)
def _anchored_origin_pattern(tissues: Tuple[str, ...], diseases: Tuple[str, ...],
                             stages: Tuple[str, ...]) -> "re.Pattern":
    def alternation(values: Tuple[str, ...]) -> str:
        if not values:
            return ".+?"
        longest_first = sorted(values, key=len, reverse=True)
        return "(?i:" + "|".join(re.escape(v) for v in longest_first) + ")"

    return re.compile(
        rf"originates from the (?P<tissue>{alternation(tissues)}) of an? "
        rf"(?P<disease>{alternation(diseases)}) (?P<sex>male|female|unknown) "
        rf"during (?P<stage>{alternation(stages)})\.(?=\s|$)",
        re.S,
    )


def _vocabulary(values: Optional[Iterable[str]], clause: bool = False) -> Tuple[str, ...]:
    cleaned = {(_clause(v) if clause else v.strip()) for v in values or () if v and v.strip()}
    return tuple(sorted(v for v in cleaned if v))


def _match_origin(text: str, tissues=None, diseases=None, stages=None):
    """
    The origin sentence, with tissue, disease and stage pinned to known
    values when given, so " of a " inside a tissue name splits correctly.
    Falls back to the lazy pattern when nothing anchors.
    """
    vocabularies = (_vocabulary(tissues), _vocabulary(diseases), _vocabulary(stages, clause=True))
    if any(vocabularies):
        match = _anchored_origin_pattern(*vocabularies).search(text)
        if match:
            return match
    return _ORIGIN.search(text)


def parse_description(text: str, catalog: Optional[PathwayCatalog] = None,
                      cell_types: Optional[Sequence[str]] = None,
                      tissues: Optional[Sequence[str]] = None,
                      diseases: Optional[Sequence[str]] = None,
                      stages: Optional[Sequence[str]] = None) -> ExtractedLabels:
    """
    Extract labels from a (possibly paraphrased) description.

    Never raises: a cue that does not match leaves its fields absent and is
    listed in ``diagnostics``. With a catalog, pathway phrases are mapped to
    pathway ids; unmapped phrases are kept verbatim. Known cell types,
    tissues, diseases and stages anchor their fields, longest value first;
    a stage is returned in its vocabulary spelling, trailing period included.
    """
    text = text if isinstance(text, str) else ""
    diagnostics = []

    cell_type = _match_cell_type(text, cell_types)
    if not cell_type:
        cell_type = None
        diagnostics.append("cell_type")

    tissue = disease = sex = stage = None
    origin = _match_origin(text, tissues, diseases, stages)
    if origin:
        tissue = origin.group("tissue").strip() or None
        disease = origin.group("disease").strip() or None
        sex = origin.group("sex")
        stage = origin.group("stage").strip() or None
        if stage and stages:
            spelled = {_clause(s).casefold(): s.strip() for s in stages if s and s.strip()}
            stage = spelled.get(stage.casefold(), stage)
    else:
        diagnostics.append("origin")

    phrases = []
    tail_start = origin.end() if origin else 0
    for cue, patterns in (("pathway_1", (_PATHWAY_1, _PATHWAY_1_LOOSE)), ("pathway_2", (_PATHWAY_2,))):
        match = None
        for pattern in patterns:
            match = pattern.search(text, tail_start) or pattern.search(text)
            if match:
                break
        if match and match.group("phrase").strip():
            phrases.append(" ".join(match.group("phrase").split()))
        else:
            diagnostics.append(cue)

    pathways = []
    for phrase in phrases:
        resolved = catalog.match_phrase(phrase) if catalog is not None else None
        label = resolved if resolved is not None else phrase
        if label not in pathways:
            pathways.append(label)

    return ExtractedLabels(
        cell_type=cell_type,
        tissue=tissue,
        disease=disease,
        sex=sex,
        development_stage=stage,
        pathways=tuple(pathways[:2]),
        pathway_phrases=tuple(phrases),
        diagnostics=tuple(diagnostics),
    )


def canonicalize_label(raw: Optional[str], vocabulary: Sequence[str],
                       ontology: Optional[Ontology] = None) -> Optional[str]:
    """
    Map ``raw`` onto a vocabulary entry: case-insensitive exact match first,
    then through ontology names and synonyms. Returns None when unmatched.
    """
    if not vocabulary:
        raise CodecException("canonicalize_label needs a nonempty vocabulary")
    if raw is None or not raw.strip():
        return None

    by_fold = {}
    for label in vocabulary:
        by_fold.setdefault(label.casefold(), label)
    folded = raw.strip().casefold()
    if folded in by_fold:
        return by_fold[folded]

    if ontology is None:
        return None
    index = ontology.label_index
    term_ids = set(index["name"].get(folded, ())) | set(index["synonym"].get(folded, ()))
    hits = set()
    for tid in term_ids:
        term = ontology[tid]
        for label in [term.name, *term.synonym_texts]:
            if label and label.casefold() in by_fold:
                hits.add(by_fold[label.casefold()])
    if len(hits) == 1:
        return hits.pop()
    if len(hits) > 1:
        logger.debug(f"'{raw}' maps to several vocabulary labels {sorted(hits)}; left unmatched")
    return None


def read_catalog(path: Union[str, Path]) -> PathwayCatalog:
    """Read ``pathway_id\\tdisplay_name\\tdefinition`` rows; a header row is optional."""
    path = Path(path)
    entries = {}
    try:
        with open(path, newline="") as handle:
            for line_number, row in enumerate(csv.reader(handle, delimiter="\t"), 1):
                if not row or not any(cell.strip() for cell in row):
                    continue
                if line_number == 1 and tuple(c.strip() for c in row[:3]) == CATALOG_COLUMNS:
                    continue
                if len(row) < 3:
                    raise SchemaException("expected pathway_id, display_name, definition", line_number, path)
                pid, name, definition = (cell.strip() for cell in row[:3])
                if pid in entries:
                    raise SchemaException(f"duplicate pathway id {pid}", line_number, path)
                if not definition:
                    raise SchemaException(f"empty definition for {pid}", line_number, path)
                entries[pid] = PathwayEntry(pid, name or pid, definition)
    except OSError as e:
        raise ScribeIOException(f"Failed to read catalog {path}: {e}")
    return PathwayCatalog(entries)


def catalog_from_gene_sets(gene_sets: Iterable) -> PathwayCatalog:
    """Use GMT descriptions as definitions when no catalog file is given."""
    entries = {}
    for gene_set in gene_sets:
        definition = gene_set.name if gene_set.name and gene_set.name != "na" else gene_set.id
        entries[gene_set.id] = PathwayEntry(gene_set.id, gene_set.id, definition)
    return PathwayCatalog(entries)


def split_labels(value: str) -> Tuple[str, ...]:
    return tuple(part.strip() for part in str(value or "").split(";") if part.strip())


def records_from_table(table, ontology: Optional[Ontology] = None, path=None) -> List[CellRecord]:
    """
    Build records from a cohort table. ``cell_type`` holds the name; when it
    is empty and an ontology is given the name of ``cell_type_id`` is used.
    """
    missing = [c for c in ("cell_id", "cell_type_id", "tissue", "disease", "sex",
                           "development_stage") if c not in table.columns]
    if missing:
        raise SchemaException(f"missing columns {missing}", 1, path)
    records = []
    for offset, row in enumerate(table.to_dict("records")):
        name = row.get("cell_type", "") or ""
        if not name and ontology is not None:
            name = ontology.name_of(row["cell_type_id"])
        try:
            records.append(
                CellRecord(
                    cell_id=str(row["cell_id"]),
                    cell_type_id=row["cell_type_id"],
                    cell_type_name=name,
                    tissue=row["tissue"],
                    disease=row["disease"],
                    sex=(row["sex"] or "unknown").strip().lower(),
                    development_stage=row["development_stage"],
                    donor_id=row.get("donor_id", "") or "",
                    assay=row.get("assay", "") or "",
                    pathways=split_labels(row.get("pathways", "")),
                )
            )
        except CodecException as e:
            # header is line 1
            raise SchemaException(str(e), offset + 2, path)
    return records
