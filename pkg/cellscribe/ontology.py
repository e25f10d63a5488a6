"""
Cell Ontology parsing and the undirected is_a graph.

Only the OBO subset needed for cell types is understood: the header
section, ``[Term]`` stanzas and the ``id``, ``name``, ``def``, ``synonym``,
``is_a`` and ``is_obsolete`` tags. Other stanzas (``[Typedef]`` ...) are
skipped. A first pass over the raw lines raises the line-numbered errors;
tag values are then read by obonet.
"""

import csv
import difflib
import io
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, IO, Iterable, List, Optional, Tuple, Union

import networkx as nx
import numpy as np
import obonet
import scipy.sparse as sp

from .scribe_exceptions import (
    AmbiguousTermException,
    GraphException,
    OboParseException,
    ScribeIOException,
)
from .utils.log.loger import get_logger

logger = get_logger()

_QUOTED = re.compile(r'"((?:[^"\\]|\\.)*)"')
_SYNONYM_SCOPE = re.compile(r'"\s+(EXACT|BROAD|NARROW|RELATED)\b')


@dataclass(frozen=True)
class Synonym:
    text: str
    scope: str = "EXACT"


@dataclass(frozen=True)
class OntologyTerm:
    id: str
    name: str = ""
    definition: Optional[str] = None
    synonyms: Tuple[Synonym, ...] = ()
    is_a_parents: Tuple[str, ...] = ()
    obsolete: bool = False

    @property
    def synonym_texts(self) -> List[str]:
        return [s.text for s in self.synonyms]


@dataclass(frozen=True)
class Ontology:
    """Term table keyed by id, plus the header lines of the source file."""

    terms: Dict[str, OntologyTerm]
    header: Tuple[Tuple[str, str], ...] = ()

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term_id):
        return term_id in self.terms

    def __getitem__(self, term_id) -> OntologyTerm:
        return self.terms[term_id]

    def get(self, term_id, default=None):
        return self.terms.get(term_id, default)

    def name_of(self, term_id: str) -> str:
        term = self.terms.get(term_id)
        return term.name if term else term_id

    @cached_property
    def label_index(self) -> dict:
        """Casefolded name and synonym -> term ids, non-obsolete terms only."""
        by_name: Dict[str, set] = {}
        by_synonym: Dict[str, set] = {}
        display: Dict[str, str] = {}
        for tid, term in self.terms.items():
            if term.obsolete:
                continue
            if term.name:
                by_name.setdefault(term.name.casefold(), set()).add(tid)
                display.setdefault(term.name, tid)
            for synonym in term.synonym_texts:
                by_synonym.setdefault(synonym.casefold(), set()).add(tid)
        return {"name": by_name, "synonym": by_synonym, "display": display}


@dataclass(frozen=True)
class TermMatch:
    query: str
    term_id: Optional[str]
    candidates: Tuple[str, ...] = ()

    @property
    def found(self) -> bool:
        return self.term_id is not None


def _unescape(text: str) -> str:
    return re.sub(r"\\(.)", r"\1", text)


def _quoted_payload(value: str) -> Optional[str]:
    match = _QUOTED.search(value)
    if not match:
        return None
    return _unescape(match.group(1))


def _strip_comment(value: str) -> str:
    # Trailing "! comment" and "{qualifiers}" are not part of the value
    value = value.split(" !", 1)[0]
    if value.startswith("!"):
        return ""
    value = value.split("{", 1)[0]
    return value.strip()


class _Stanza:
    """One ``[Term]`` stanza as found by the line-numbering pass."""

    def __init__(self, line_number: int):
        self.line_number = line_number
        self.id = None
        self.lines: List[str] = []

    def add(self, tag: str, value: str, line: str, line_number: int):
        if tag == "id":
            self.id = _strip_comment(value)
        elif tag == "synonym" and _quoted_payload(value) is None:
            raise OboParseException(f"synonym without quoted text: {value}", line_number)
        elif tag == "is_a" and not _strip_comment(value).split():
            raise OboParseException("empty is_a target", line_number)
        elif tag == "relationship" and len(_strip_comment(value).split()) != 2:
            raise OboParseException(f"relationship needs a type and a target: {value}", line_number)
        self.lines.append(line)


def _scan(lines: Iterable[str]) -> Tuple[List[Tuple[str, str]], List[_Stanza]]:
    """
    Walk the file once for the checks that carry a line number: tag syntax,
    stanza ids and duplicates. Returns the header pairs and the term stanzas.
    """
    header: List[Tuple[str, str]] = []
    stanzas: List[_Stanza] = []
    seen: Dict[str, int] = {}
    current: Optional[_Stanza] = None
    in_header = True

    def close():
        if current is None:
            return
        if not current.id:
            raise OboParseException("[Term] stanza without id", current.line_number)
        if current.id in seen:
            raise OboParseException(f"duplicate term id {current.id}", current.line_number)
        seen[current.id] = current.line_number
        stanzas.append(current)

    for line_number, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("!"):
            continue

        if line.startswith("[") and line.endswith("]"):
            close()
            in_header = False
            current = _Stanza(line_number) if line == "[Term]" else None
            continue

        if in_header:
            tag, sep, value = line.partition(":")
            if sep:
                header.append((tag.strip(), value.strip()))
            continue

        if current is None:
            continue

        tag, sep, value = line.partition(":")
        if not sep or not tag.strip():
            raise OboParseException(f"malformed tag line: {line}", line_number)
        current.add(tag.strip(), value.strip(), line, line_number)

    close()
    return header, stanzas


def _single(data: dict, tag: str) -> Optional[str]:
    value = data.get(tag)
    if isinstance(value, list):
        return value[-1] if value else None
    return value


def _many(data: dict, tag: str) -> List[str]:
    value = data.get(tag, [])
    return [value] if isinstance(value, str) else list(value)


def _term_from_node(term_id: str, data: dict) -> OntologyTerm:
    obsolete = (_single(data, "is_obsolete") or "").strip().lower() == "true"

    definition = _single(data, "def")
    if definition is not None:
        payload = _quoted_payload(definition)
        # Unquoted definitions are kept minus their [xref] suffix
        definition = payload if payload is not None else re.sub(r"\s*\[[^\]]*\]\s*$", "", definition).strip()

    synonyms = []
    for value in _many(data, "synonym"):
        text = _quoted_payload(value)
        if text is None:
            logger.warning(f"{term_id}: dropped unreadable synonym {value}")
            continue
        scope = _SYNONYM_SCOPE.search(value)
        synonyms.append(Synonym(text, scope.group(1) if scope else "RELATED"))

    parents = []
    for value in _many(data, "is_a"):
        target = value.split()[0]
        if target not in parents:
            parents.append(target)

    return OntologyTerm(
        id=term_id,
        name=(_single(data, "name") or "").strip(),
        definition=definition,
        synonyms=tuple(synonyms),
        # obsolete terms carry no outgoing is_a edges
        is_a_parents=() if obsolete else tuple(parents),
        obsolete=obsolete,
    )


def parse_obo(stream: Union[IO[bytes], IO[str], bytes, str]) -> Ontology:
    """
    Parse OBO 1.2/1.4 text into a term table.

    Args:
        stream: binary or text stream, raw bytes or a str holding the file content
    Returns:
        Ontology
    """
    content = stream if isinstance(stream, (bytes, str)) else stream.read()
    if isinstance(content, bytes):
        content = content.decode("utf-8")

    header, stanzas = _scan(content.splitlines())

    # obonet splits stanzas on blank lines; hand it one blank-separated [Term] block per id
    blocks = ["format-version: 1.2"]
    blocks.extend("[Term]\n" + "\n".join(stanza.lines) for stanza in stanzas)
    try:
        graph = obonet.read_obo(io.StringIO("\n\n".join(blocks) + "\n"), ignore_obsolete=False)
    except (KeyError, ValueError) as e:
        raise OboParseException(f"obonet could not read the term stanzas: {e}")

    terms = {stanza.id: _term_from_node(stanza.id, graph.nodes[stanza.id]) for stanza in stanzas}
    logger.debug(f"Parsed {len(terms)} terms")
    return Ontology(terms=terms, header=tuple(header))


def read_obo(path: Union[str, Path]) -> Ontology:
    path = Path(path)
    try:
        with open(path, "rb") as handle:
            return parse_obo(handle)
    except OSError as e:
        raise ScribeIOException(f"Failed to read ontology {path}: {e}")


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("!", "\\!")


def write_obo(ontology: Ontology, stream: IO[str]) -> None:
    """Serialize the term table back to OBO; terms are written sorted by id."""
    header = list(ontology.header) or [("format-version", "1.2")]
    for tag, value in header:
        stream.write(f"{tag}: {value}\n")
    for term_id in sorted(ontology.terms):
        term = ontology.terms[term_id]
        stream.write("\n[Term]\n")
        stream.write(f"id: {term.id}\n")
        if term.name:
            stream.write(f"name: {term.name}\n")
        if term.definition is not None:
            stream.write(f'def: "{_escape(term.definition)}" []\n')
        for synonym in term.synonyms:
            stream.write(f'synonym: "{_escape(synonym.text)}" {synonym.scope} []\n')
        for parent in term.is_a_parents:
            stream.write(f"is_a: {parent} ! {ontology.name_of(parent)}\n")
        if term.obsolete:
            stream.write("is_obsolete: true\n")


class OntologyGraph:
    """
    Undirected simple graph over term ids, nodes sorted by id.

    The graph is immutable after construction; ``edges`` keeps the
    child -> parent orientation of the first is_a that produced each edge
    so it can be exported as ``child_id\\tparent_id``.
    """

    def __init__(self, term_ids: Iterable[str], edges: Iterable[Tuple[str, str]],
                 names: Optional[Dict[str, str]] = None, warnings: Iterable[str] = ()):
        self.terms: Tuple[str, ...] = tuple(sorted(set(term_ids)))
        self.index: Dict[str, int] = {t: i for i, t in enumerate(self.terms)}
        self.names: Dict[str, str] = dict(names or {})
        self.warnings: Tuple[str, ...] = tuple(warnings)

        graph = nx.Graph()
        graph.add_nodes_from(self.terms)
        kept = []
        for child, parent in edges:
            if child not in self.index or parent not in self.index:
                raise GraphException(f"Edge {child} - {parent} references an unknown node")
            if child == parent or graph.has_edge(child, parent):
                continue
            graph.add_edge(child, parent)
            kept.append((child, parent))
        self._graph = nx.freeze(graph)
        self.edges: Tuple[Tuple[str, str], ...] = tuple(kept)
        self._transition = None

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term_id):
        return term_id in self.index

    @property
    def graph(self) -> nx.Graph:
        return self._graph

    def neighbors(self, term_id: str) -> List[str]:
        return sorted(self._graph.neighbors(term_id))

    def degree(self, term_id: str) -> int:
        return self._graph.degree(term_id)

    def transition_matrix(self) -> sp.csr_matrix:
        """Column-stochastic walk matrix W; columns of isolated nodes are zero."""
        if self._transition is None:
            n = len(self.terms)
            if not self.edges:
                self._transition = sp.csr_matrix((n, n))
                return self._transition
            rows, cols = [], []
            for u, v in self.edges:
                iu, iv = self.index[u], self.index[v]
                rows.extend((iu, iv))
                cols.extend((iv, iu))
            adjacency = sp.csr_matrix(
                (np.ones(len(rows)), (rows, cols)), shape=(n, n)
            )
            degree = np.asarray(adjacency.sum(axis=0)).ravel()
            inv = np.divide(1.0, degree, out=np.zeros_like(degree), where=degree > 0)
            self._transition = (adjacency @ sp.diags(inv)).tocsr()
        return self._transition

    def dangling_mask(self) -> np.ndarray:
        return np.array([self._graph.degree(t) == 0 for t in self.terms], dtype=bool)


def build_graph(ontology: Ontology, include_obsolete: bool = False,
                prefixes: Optional[Iterable[str]] = None) -> OntologyGraph:
    """
    Build the undirected is_a graph.

    Args:
        ontology: parsed term table
        include_obsolete: keep obsolete terms as (edge-less) nodes
        prefixes: keep only terms whose CURIE prefix is listed, eg ("CL",)
    Returns:
        OntologyGraph with ``warnings`` listing every dropped is_a reference
    """
    prefixes = tuple(prefixes) if prefixes else None

    def keep(term: OntologyTerm) -> bool:
        if term.obsolete and not include_obsolete:
            return False
        if prefixes and term.id.split(":", 1)[0] not in prefixes:
            return False
        return True

    kept = {tid for tid, term in ontology.terms.items() if keep(term)}
    edges, warnings = [], []
    for tid in sorted(kept):
        term = ontology.terms[tid]
        for parent in term.is_a_parents:
            if parent in kept:
                edges.append((tid, parent))
                continue
            target = ontology.terms.get(parent)
            if target is None:
                reason = "unknown term"
            elif target.obsolete:
                reason = "obsolete term"
            else:
                reason = "filtered term"
            warnings.append(f"{tid} is_a {parent}: {reason}")

    if warnings:
        logger.warning(f"{len(warnings)} is_a references were not added to the graph")
    names = {tid: ontology.terms[tid].name for tid in kept}
    return OntologyGraph(kept, edges, names=names, warnings=warnings)


def connected_component(graph: OntologyGraph, term_id: str) -> set:
    if term_id not in graph:
        raise GraphException(f"Term not in graph: {term_id}")
    return set(nx.node_connected_component(graph.graph, term_id))


def component_coverage(graph: OntologyGraph, root: str = "CL:0000000") -> float:
    """Fraction of graph nodes reachable from ``root``."""
    if not len(graph):
        return 0.0
    return len(connected_component(graph, root)) / len(graph)


def lookup_term(ontology: Ontology, query: str, n_candidates: int = 5) -> TermMatch:
    """
    Resolve an id, exact name or exact synonym to a term id.

    Names and synonyms are matched case-insensitively; a name match wins
    over a synonym match. Raises AmbiguousTermException when the winning
    level matches several terms.
    """
    query = (query or "").strip()
    if query in ontology.terms:
        return TermMatch(query, query)

    folded = query.casefold()
    index = ontology.label_index
    for level in ("name", "synonym"):
        hits = index[level].get(folded)
        if hits:
            if len(hits) > 1:
                raise AmbiguousTermException(query, sorted(hits))
            return TermMatch(query, next(iter(hits)))

    names = list(index["display"])
    close = difflib.get_close_matches(query, names, n=n_candidates, cutoff=0.6)
    candidates = tuple(index["display"][name] for name in close)
    return TermMatch(query, None, candidates)


def export_edges(graph: OntologyGraph, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(["child_id", "parent_id"])
        writer.writerows(graph.edges)
    return path


def export_terms(graph: OntologyGraph, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(["term_id", "name"])
        for tid in graph.terms:
            writer.writerow([tid, graph.names.get(tid, "")])
    return path


def read_graph(edges_path: Union[str, Path], terms_path: Union[str, Path] = None) -> OntologyGraph:
    """
    Load a graph written by ``export_edges``; ``terms.tsv`` next to the
    edge list (or ``terms_path``) supplies isolated nodes and names.
    """
    edges_path = Path(edges_path)
    terms_path = Path(terms_path) if terms_path else edges_path.with_name("terms.tsv")
    names: Dict[str, str] = {}
    edges = []
    try:
        if terms_path.exists():
            with open(terms_path, newline="") as handle:
                for row in csv.DictReader(handle, delimiter="\t"):
                    names[row["term_id"]] = row.get("name") or ""
        with open(edges_path, newline="") as handle:
            for row in csv.DictReader(handle, delimiter="\t"):
                edges.append((row["child_id"], row["parent_id"]))
    except OSError as e:
        raise ScribeIOException(f"Failed to read graph {edges_path}: {e}")
    except KeyError as e:
        raise GraphException(f"Missing column {e} in {edges_path}")
    nodes = set(names)
    for child, parent in edges:
        nodes.update((child, parent))
    return OntologyGraph(nodes, edges, names=names)
