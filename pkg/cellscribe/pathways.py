"""
AUCell-style pathway activity.

Genes of each cell are ranked by decreasing expression (ties by gene
symbol). The recovery curve counts gene-set members met while walking the
top ``ceil(top_fraction * n_genes)`` ranks, and its area is divided by the
area reached when every member sits at the top.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import io as sio
from scipy import sparse

from .decorators import threaded_map
from .readers import find_sidecar
from .scribe_exceptions import PathwayException, SchemaException, ScribeIOException
from .utils.log.loger import get_logger

logger = get_logger()

DEFAULT_TOP_FRACTION = 0.05
DEFAULT_PREVALENCE = 0.005
DEFAULT_HVG_BINS = 20
GENE_SIDECARS = ("genes.tsv", "features.tsv")
CELL_SIDECARS = ("cells.tsv", "barcodes.tsv")


@dataclass(frozen=True, eq=False)
class ExpressionMatrix:
    """Cells x genes, stored as CSR."""

    cells: Tuple[str, ...]
    genes: Tuple[str, ...]
    values: sparse.csr_matrix

    def __post_init__(self):
        object.__setattr__(self, "values", sparse.csr_matrix(self.values, dtype=float))
        if self.values.shape != (len(self.cells), len(self.genes)):
            raise PathwayException(
                f"expression shape {self.values.shape} does not match "
                f"{len(self.cells)} cells x {len(self.genes)} genes"
            )
        if len(set(self.genes)) != len(self.genes):
            raise PathwayException("duplicate gene symbols in expression matrix")
        if len(set(self.cells)) != len(self.cells):
            raise PathwayException("duplicate cell ids in expression matrix")
        if self.values.nnz and self.values.data.min() < 0:
            raise PathwayException("expression matrix has negative entries")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def row(self, i: int) -> np.ndarray:
        return self.values.getrow(i).toarray().ravel()

    def subset_genes(self, genes: Iterable[str]) -> "ExpressionMatrix":
        index = {g: i for i, g in enumerate(self.genes)}
        keep = [g for g in genes if g in index]
        columns = [index[g] for g in keep]
        return ExpressionMatrix(self.cells, tuple(keep), self.values[:, columns])

    def subset_cells(self, cells: Iterable[str]) -> "ExpressionMatrix":
        cells = list(cells)
        index = {c: i for i, c in enumerate(self.cells)}
        missing = [c for c in cells if c not in index]
        if missing:
            raise PathwayException(f"{len(missing)} cells have no expression, eg {missing[0]}")
        return ExpressionMatrix(tuple(cells), self.genes, self.values[[index[c] for c in cells], :])


@dataclass(frozen=True)
class GeneSet:
    id: str
    name: str
    genes: frozenset

    def __post_init__(self):
        object.__setattr__(self, "genes", frozenset(self.genes))
        if not self.genes:
            raise PathwayException(f"Gene set {self.id} is empty")


@dataclass(frozen=True, eq=False)
class ActivityMatrix:
    cells: Tuple[str, ...]
    pathways: Tuple[str, ...]
    values: np.ndarray
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.values.shape != (len(self.cells), len(self.pathways)):
            raise PathwayException(
                f"activity shape {self.values.shape} does not match "
                f"{len(self.cells)} cells x {len(self.pathways)} pathways"
            )
        if self.values.size and (self.values.min() < 0 or self.values.max() > 1):
            raise PathwayException("activity scores must lie in [0, 1]")

    def select(self, pathways: Iterable[str]) -> "ActivityMatrix":
        index = {p: i for i, p in enumerate(self.pathways)}
        keep = [p for p in pathways if p in index]
        return ActivityMatrix(self.cells, tuple(keep), self.values[:, [index[p] for p in keep]],
                              self.warnings)


@dataclass(frozen=True)
class HvgSelection:
    genes: Tuple[str, ...]
    n_informative: int
    warnings: Tuple[str, ...] = ()


@dataclass(frozen=True)
class PrevalenceResult:
    retained: Tuple[str, ...]
    removed: Tuple[str, ...]
    prevalence: Dict[str, float] = field(default_factory=dict)
    threshold: float = DEFAULT_PREVALENCE


def _gene_stats(expr: ExpressionMatrix) -> Tuple[np.ndarray, np.ndarray]:
    n_cells = expr.shape[0]
    mean = np.asarray(expr.values.mean(axis=0)).ravel()
    mean_sq = np.asarray(expr.values.multiply(expr.values).mean(axis=0)).ravel()
    var = np.clip(mean_sq - mean ** 2, 0.0, None)
    if n_cells > 1:
        var *= n_cells / (n_cells - 1)
    return mean, var


def select_hvg(expr: ExpressionMatrix, n_top: int, n_bins: int = DEFAULT_HVG_BINS) -> HvgSelection:
    """
    Seurat-style highly variable genes.

    Dispersion (variance / mean) is z-scored within equal-frequency bins of
    the mean; bins holding one gene or no spread give z = 0. Genes with zero
    dispersion are never selected.

    Args:
        expr: expression matrix
        n_top: number of genes to keep
        n_bins: mean bins
    Returns:
        HvgSelection, genes ordered by decreasing z-score then symbol
    """
    if n_top < 1:
        raise PathwayException(f"n_top must be positive, got {n_top}")
    if expr.shape[0] < 2:
        raise PathwayException("HVG selection needs at least two cells")
    mean, var = _gene_stats(expr)
    informative = (mean > 0) & (var > 0)
    frame = pd.DataFrame({
        "gene": np.asarray(expr.genes, dtype=object)[informative],
        "mean": mean[informative],
        "dispersion": var[informative] / mean[informative],
    })

    warnings = []
    if frame.empty:
        message = "no gene has nonzero dispersion"
        logger.warning(message)
        return HvgSelection((), 0, (message,))

    q = min(n_bins, len(frame))
    if q > 1:
        frame["bin"] = pd.qcut(frame["mean"].rank(method="first"), q=q, labels=False)
    else:
        frame["bin"] = 0
    grouped = frame.groupby("bin")["dispersion"]
    centre = grouped.transform("mean")
    spread = grouped.transform("std").fillna(0.0)
    z = (frame["dispersion"] - centre) / spread.where(spread > 0)
    frame["z"] = z.fillna(0.0)

    frame = frame.sort_values(["z", "gene"], ascending=[False, True], kind="mergesort")
    if len(frame) < n_top:
        message = f"only {len(frame)} informative genes for n_top={n_top}; returning all"
        logger.warning(message)
        warnings.append(message)
    return HvgSelection(tuple(frame["gene"].head(n_top)), int(informative.sum()), tuple(warnings))


def top_window(n_genes: int, top_fraction: float) -> int:
    if not 0.0 < top_fraction <= 1.0:
        raise PathwayException(f"top_fraction must lie in (0, 1], got {top_fraction}")
    # Rounding keeps 0.05 * 100 at 5
    return max(1, math.ceil(round(top_fraction * n_genes, 9)))


def _symbol_order(genes: Sequence[str]) -> np.ndarray:
    return np.argsort(np.asarray(genes, dtype=object).astype(str), kind="stable")


def _rank(row: np.ndarray, by_symbol: np.ndarray) -> np.ndarray:
    """Gene indices by descending expression, ties by symbol."""
    return by_symbol[np.argsort(-row[by_symbol], kind="stable")]


def _membership(genes: Sequence[str], gene_sets: Sequence[GeneSet]) -> np.ndarray:
    index = {g: i for i, g in enumerate(genes)}
    members = np.zeros((len(genes), len(gene_sets)), dtype=bool)
    for j, gene_set in enumerate(gene_sets):
        for gene in gene_set.genes:
            if gene in index:
                members[index[gene], j] = True
    return members


def _max_area(n_members: np.ndarray, window: int) -> np.ndarray:
    ranks = np.arange(1, window + 1)[:, None]
    return np.minimum(ranks, n_members[None, :]).sum(axis=0)


def _auc(order: np.ndarray, members: np.ndarray, window: int, max_area: np.ndarray) -> np.ndarray:
    recovery = np.cumsum(members[order[:window]], axis=0)
    area = recovery.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(max_area > 0, area / np.where(max_area > 0, max_area, 1), 0.0)


def aucell_score(row, genes: Sequence[str], gene_set: GeneSet,
                 top_fraction: float = DEFAULT_TOP_FRACTION) -> float:
    """
    Recovery-curve AUC of one gene set in one cell.

    Args:
        row: expression of the cell over ``genes``
        genes: gene symbols in column order
        gene_set: pathway signature
        top_fraction: share of top-ranked genes inspected
    Returns:
        float in [0, 1]
    """
    row = np.asarray(row.toarray() if sparse.issparse(row) else row, dtype=float).ravel()
    if row.shape[0] != len(genes):
        raise PathwayException(f"row has {row.shape[0]} values for {len(genes)} genes")
    window = top_window(len(genes), top_fraction)
    members = _membership(genes, [gene_set])
    n_members = members.sum(axis=0)
    if not n_members[0]:
        logger.warning(f"Gene set {gene_set.id} shares no gene with the expression matrix")
        return 0.0
    order = _rank(row, _symbol_order(genes))
    return float(_auc(order, members, window, _max_area(n_members, window))[0])


def score_matrix(expr: ExpressionMatrix, gene_sets: Sequence[GeneSet],
                 top_fraction: float = DEFAULT_TOP_FRACTION, workers: int = 1) -> ActivityMatrix:
    """AUC for every cell x gene set pair."""
    if not gene_sets:
        raise PathwayException("no gene sets to score")
    ids = [g.id for g in gene_sets]
    if len(set(ids)) != len(ids):
        raise PathwayException("duplicate gene set ids")

    window = top_window(len(expr.genes), top_fraction)
    members = _membership(expr.genes, gene_sets)
    n_members = members.sum(axis=0)
    max_area = _max_area(n_members, window)
    by_symbol = _symbol_order(expr.genes)

    warnings = []
    for gene_set, count in zip(gene_sets, n_members):
        if not count:
            message = f"Gene set {gene_set.id} shares no gene with the expression matrix"
            logger.warning(message)
            warnings.append(message)

    @threaded_map(range(expr.shape[0]), max_workers=workers)
    def score_cell(i):
        return _auc(_rank(expr.row(i), by_symbol), members, window, max_area)

    rows = score_cell()
    values = np.vstack(rows) if rows else np.zeros((0, len(gene_sets)))
    logger.debug(f"Scored {expr.shape[0]} cells against {len(gene_sets)} gene sets, window {window}")
    return ActivityMatrix(expr.cells, tuple(ids), np.clip(values, 0.0, 1.0), tuple(warnings))


def top_k_pathways(activity: ActivityMatrix, k: int = 2,
                   min_score: Optional[float] = None) -> Dict[str, Tuple[Tuple[str, float], ...]]:
    """
    Per cell, the ``k`` highest scoring pathways (ties by pathway id).

    Pathways scoring ``<= min_score`` are left out when ``min_score`` is set.
    """
    if k < 1:
        raise PathwayException(f"k must be positive, got {k}")
    by_id = _symbol_order(activity.pathways)
    top = {}
    for i, cell in enumerate(activity.cells):
        scores = activity.values[i]
        order = _rank(scores, by_id)
        picked = []
        for j in order:
            if min_score is not None and scores[j] <= min_score:
                break
            picked.append((activity.pathways[j], float(scores[j])))
            if len(picked) == k:
                break
        top[cell] = tuple(picked)
    return top


def prevalence_filter(top_lists: Dict[str, Sequence], universe: Iterable[str],
                      threshold: float = DEFAULT_PREVALENCE) -> PrevalenceResult:
    """
    Drop pathways present in fewer than ``threshold`` of the cells' top lists.

    Args:
        top_lists: cell -> ordered pathways (ids or (id, score) pairs)
        universe: every candidate pathway
        threshold: minimum active fraction, kept when ``>=``
    Returns:
        PrevalenceResult
    """
    if not top_lists:
        raise PathwayException("prevalence over an empty corpus")
    counts = {p: 0 for p in universe}
    for entries in top_lists.values():
        for pathway in {e[0] if isinstance(e, tuple) else e for e in entries}:
            counts[pathway] = counts.get(pathway, 0) + 1
    n_cells = len(top_lists)
    prevalence = {p: counts[p] / n_cells for p in sorted(counts)}
    retained = tuple(p for p, share in prevalence.items() if share >= threshold)
    removed = tuple(p for p, share in prevalence.items() if share < threshold)
    logger.info(f"Prevalence filter kept {len(retained)}/{len(prevalence)} pathways")
    return PrevalenceResult(retained, removed, prevalence, threshold)


def read_gmt(path: Union[str, Path]) -> List[GeneSet]:
    """``set_id\\tdescription\\tgene1\\tgene2...`` per line."""
    path = Path(path)
    gene_sets, seen = [], set()
    try:
        with open(path, newline="") as handle:
            for line_number, row in enumerate(csv.reader(handle, delimiter="\t"), 1):
                if not row or not row[0].strip() or row[0].startswith("#"):
                    continue
                if len(row) < 3:
                    raise SchemaException("gene set needs an id, a description and genes", line_number, path)
                set_id = row[0].strip()
                if set_id in seen:
                    raise SchemaException(f"duplicate gene set {set_id}", line_number, path)
                genes = {g.strip() for g in row[2:] if g.strip()}
                if not genes:
                    raise SchemaException(f"gene set {set_id} is empty", line_number, path)
                seen.add(set_id)
                gene_sets.append(GeneSet(set_id, row[1].strip(), genes))
    except OSError as e:
        raise ScribeIOException(f"Failed to read gene sets {path}: {e}")
    return gene_sets


def _read_ids(path: Path, column: int = 0) -> List[str]:
    with open(path, newline="") as handle:
        rows = [row for row in csv.reader(handle, delimiter="\t") if row]
    return [row[column] if len(row) > column else row[0] for row in rows]


def _read_mtx(path: Path, genes_path: Optional[Path], cells_path: Optional[Path]) -> ExpressionMatrix:
    stem = path.name.split(".")[0]
    genes_path = genes_path or find_sidecar(path, (f"{stem}.genes.tsv", *GENE_SIDECARS))
    cells_path = cells_path or find_sidecar(path, (f"{stem}.cells.tsv", *CELL_SIDECARS))
    if genes_path is None or cells_path is None:
        raise ScribeIOException(f"{path}: genes.tsv and cells.tsv sidecars are required")
    # 10x feature files carry the symbol in the second column
    genes = _read_ids(genes_path, column=1 if genes_path.name.startswith("features") else 0)
    cells = _read_ids(cells_path)
    try:
        values = sparse.csr_matrix(sio.mmread(str(path)))
    except ValueError as e:
        raise SchemaException(f"unreadable MatrixMarket file: {e}", path=path)
    if values.shape == (len(genes), len(cells)):
        values = values.T.tocsr()
    elif values.shape != (len(cells), len(genes)):
        raise SchemaException(
            f"matrix shape {values.shape} fits neither {len(cells)} cells nor {len(genes)} genes",
            path=path,
        )
    return ExpressionMatrix(tuple(cells), tuple(genes), values)


def _read_dense(path: Path) -> ExpressionMatrix:
    try:
        frame = pd.read_csv(path, index_col=0)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise SchemaException(f"unreadable expression table: {e}", path=path)
    try:
        values = frame.to_numpy(dtype=float)
    except ValueError:
        raise SchemaException("expression values must be numeric", path=path)
    if np.isnan(values).any():
        raise SchemaException("expression table has missing values", path=path)
    return ExpressionMatrix(
        tuple(str(c) for c in frame.index), tuple(str(g) for g in frame.columns),
        sparse.csr_matrix(values),
    )


def read_expression(path: Union[str, Path], genes_path=None, cells_path=None) -> ExpressionMatrix:
    """
    MatrixMarket (genes x cells or cells x genes, with id sidecars) or a
    dense CSV whose first column holds cell ids and whose header holds genes.
    """
    path = Path(path)
    if not path.exists():
        raise ScribeIOException(f"File not found: {path}")
    try:
        if ".mtx" in path.suffixes:
            expr = _read_mtx(path, Path(genes_path) if genes_path else None,
                             Path(cells_path) if cells_path else None)
        else:
            expr = _read_dense(path)
    except OSError as e:
        raise ScribeIOException(f"Failed to read expression {path}: {e}")
    logger.info(f"Loaded expression for {expr.shape[0]} cells x {expr.shape[1]} genes")
    return expr


def write_activity(activity: ActivityMatrix, path: Union[str, Path]) -> Path:
    path = Path(path)
    frame = pd.DataFrame(activity.values, index=list(activity.cells), columns=list(activity.pathways))
    frame.index.name = "cell_id"
    try:
        frame.to_csv(path, lineterminator="\n")
    except OSError as e:
        raise ScribeIOException(f"Failed to write {path}: {e}")
    return path


def read_activity(path: Union[str, Path]) -> ActivityMatrix:
    path = Path(path)
    try:
        frame = pd.read_csv(path, index_col=0)
    except FileNotFoundError:
        raise ScribeIOException(f"File not found: {path}")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise SchemaException(f"unreadable activity table: {e}", path=path)
    return ActivityMatrix(
        tuple(str(c) for c in frame.index), tuple(str(p) for p in frame.columns),
        frame.to_numpy(dtype=float),
    )


def write_top_pathways(top: Dict[str, Sequence[Tuple[str, float]]], path: Union[str, Path],
                       k: int = 2) -> Path:
    path = Path(path)
    header = ["cell_id"]
    for rank in range(1, k + 1):
        header += [f"pathway_{rank}", f"score_{rank}"]
    try:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
            writer.writerow(header)
            for cell, entries in top.items():
                row = [cell]
                for rank in range(k):
                    if rank < len(entries):
                        row += [entries[rank][0], repr(entries[rank][1])]
                    else:
                        row += ["", ""]
                writer.writerow(row)
    except OSError as e:
        raise ScribeIOException(f"Failed to write {path}: {e}")
    return path
