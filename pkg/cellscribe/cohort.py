"""Cohort diversity, assay exclusion, diversity-maximizing sampling and donor splits."""

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import xlogy
from scipy.stats import entropy

from .formats import CLASSIFY_TASK_COLUMNS, SPLIT_NAMES
from .scribe_exceptions import CohortException, ScribeIOException
from .utils.log.loger import get_logger

logger = get_logger()

# Full-length and targeted protocols that are not comparable to droplet 3'/5' data
DEFAULT_EXCLUDED_ASSAYS = {
    "Smart-seq": r"smart[\s-]?seq",
    "Quartz-seq": r"quartz[\s-]?seq",
    "GEXSCOPE": r"gexscope",
    "BD Rhapsody Targeted mRNA": r"bd\s+rhapsody\s+targeted\s+mrna",
    "10x Flex": r"10x.*\bflex\b",
}
DEFAULT_RATIOS = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class AssayFilterReport:
    n_before: int
    n_after: int
    removed: Dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class SplitAssignment:
    """donor_id -> split; every donor appears once."""

    assignment: Dict[str, str]
    targets: Tuple[float, float, float]
    cell_counts: Dict[str, int] = field(default_factory=dict)
    seed: Optional[int] = None

    def split_of(self, donor_id: str) -> str:
        return self.assignment[donor_id]

    def donors(self, split: str) -> Tuple[str, ...]:
        return tuple(sorted(d for d, s in self.assignment.items() if s == split))

    @property
    def achieved(self) -> Dict[str, float]:
        total = sum(self.cell_counts.values())
        cells = {name: 0 for name in SPLIT_NAMES}
        for donor, split in self.assignment.items():
            cells[split] += self.cell_counts.get(donor, 0)
        return {name: (cells[name] / total if total else 0.0) for name in SPLIT_NAMES}


def shannon_diversity(counts) -> float:
    """
    Normalized Shannon entropy over the observed (positive) categories.

    Args:
        counts: category counts (sequence, dict or Series)
    Returns:
        float in [0, 1]; a single category gives 0
    """
    if isinstance(counts, Mapping):
        counts = list(counts.values())
    values = np.asarray(counts, dtype=float)
    if values.size and values.min() < 0:
        raise CohortException("category counts must be nonnegative")
    observed = values[values > 0]
    if observed.size == 0:
        raise CohortException("Shannon diversity of all-zero counts")
    if observed.size == 1:
        return 0.0
    return float(entropy(observed) / np.log(observed.size))


def _require_columns(table: pd.DataFrame, columns: Iterable[str]):
    missing = [c for c in columns if c not in table.columns]
    if missing:
        raise CohortException(f"cohort table lacks columns {missing}")


def diversity_report(table: pd.DataFrame,
                     columns: Sequence[str] = CLASSIFY_TASK_COLUMNS) -> Dict[str, dict]:
    """Normalized diversity and category count per column."""
    _require_columns(table, columns)
    report = {}
    for column in columns:
        counts = table[column].value_counts()
        report[column] = {
            "diversity": shannon_diversity(counts) if len(counts) else 0.0,
            "categories": int(len(counts)),
            "n": int(len(table)),
        }
    return report


def assay_filter(table: pd.DataFrame,
                 patterns: Optional[Dict[str, str]] = None) -> Tuple[pd.DataFrame, AssayFilterReport]:
    """
    Remove rows whose assay matches an exclusion pattern (case-insensitive).

    Args:
        table: cohort rows
        patterns: label -> regular expression; defaults to DEFAULT_EXCLUDED_ASSAYS
    Returns:
        (retained rows, report with removed counts per label)
    """
    patterns = DEFAULT_EXCLUDED_ASSAYS if patterns is None else patterns
    if table.empty:
        return table.copy(), AssayFilterReport(0, 0, {})
    _require_columns(table, ["assay"])

    assays = table["assay"].astype(str)
    drop = pd.Series(False, index=table.index)
    removed = {}
    for label, pattern in patterns.items():
        hit = assays.str.contains(pattern, flags=re.IGNORECASE, regex=True) & ~drop
        if hit.any():
            removed[label] = int(hit.sum())
        drop |= hit
    kept = table.loc[~drop].copy()
    logger.info(f"Assay filter removed {int(drop.sum())} of {len(table)} cells")
    return kept, AssayFilterReport(len(table), len(kept), removed)


def _entropy_terms(counts: np.ndarray) -> float:
    return float(xlogy(counts, counts).sum())


def _rows_by_stratum(stratum_of_row: np.ndarray, n_strata: int) -> list:
    """Ascending row positions of each stratum, grouped in one pass."""
    groups = pd.Series(stratum_of_row).groupby(stratum_of_row).indices
    return [np.asarray(groups.get(s, ()), dtype=int) for s in range(n_strata)]


def stratified_sample(table: pd.DataFrame, target_n: int,
                      columns: Sequence[str] = CLASSIFY_TASK_COLUMNS,
                      seed: int = 0) -> pd.DataFrame:
    """
    Greedy diversity-maximizing subsample.

    Strata are the joint values of ``columns``. Each step draws the next
    shuffled row of the stratum whose addition most raises the summed
    Shannon entropy of the columns, each scaled by the log of its number of
    categories in ``table``. Ties go to a seeded random stratum priority.

    Args:
        table: cohort rows
        target_n: rows to keep
        columns: objective columns, a subset of cell_type/tissue/disease
        seed: random seed
    Returns:
        sampled rows in their original order
    """
    columns = list(columns)
    if not columns:
        raise CohortException("stratified sampling needs at least one objective column")
    _require_columns(table, columns)
    if target_n < 1:
        raise CohortException(f"target_n must be positive, got {target_n}")
    if target_n > len(table):
        raise CohortException(f"target_n {target_n} exceeds the {len(table)} available cells")
    if target_n == len(table):
        return table.copy()

    rng = np.random.default_rng(seed)
    codes = np.column_stack([pd.factorize(table[c].astype(str), sort=True)[0] for c in columns])
    strata, stratum_of_row = np.unique(codes, axis=0, return_inverse=True)
    stratum_of_row = np.asarray(stratum_of_row).ravel()
    n_strata = len(strata)

    # Rows of each stratum in a seeded random order
    queues = [rng.permutation(rows) for rows in _rows_by_stratum(stratum_of_row, n_strata)]
    heads = np.zeros(n_strata, dtype=int)
    sizes = np.array([len(q) for q in queues])
    priority = rng.permutation(n_strata)

    n_categories = [int(codes[:, j].max()) + 1 for j in range(len(columns))]
    scale = np.array([np.log(k) if k > 1 else 1.0 for k in n_categories])
    counts = [np.zeros(k) for k in n_categories]
    terms = np.zeros(len(columns))

    chosen = np.empty(target_n, dtype=int)
    for step in range(target_n):
        n_next = step + 1
        gain = np.zeros(n_strata)
        for j in range(len(columns)):
            current = counts[j][strata[:, j]]
            after = terms[j] - xlogy(current, current) + xlogy(current + 1, current + 1)
            h_after = np.log(n_next) - after / n_next
            h_now = (np.log(step) - terms[j] / step) if step else 0.0
            gain += (h_after - h_now) / scale[j]
        gain[heads >= sizes] = -np.inf
        best = np.flatnonzero(np.isclose(gain, gain.max(), rtol=0.0, atol=1e-12))
        s = best[np.argmin(priority[best])]

        chosen[step] = queues[s][heads[s]]
        heads[s] += 1
        for j in range(len(columns)):
            counts[j][strata[s, j]] += 1
            terms[j] = _entropy_terms(counts[j])

    logger.info(f"Sampled {target_n} of {len(table)} cells over {n_strata} strata")
    return table.iloc[np.sort(chosen)].copy()


def donor_split(table: pd.DataFrame, ratios: Sequence[float] = DEFAULT_RATIOS,
                seed: int = 0) -> SplitAssignment:
    """
    Assign whole donors to train/val/test.

    Donors are shuffled by ``seed`` and each goes to the split furthest below
    its target cell count; ties go to train, then val, then test.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != len(SPLIT_NAMES) or any(r < 0 for r in ratios):
        raise CohortException(f"ratios must be three nonnegative values, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CohortException(f"ratios {ratios} must sum to 1")
    _require_columns(table, ["donor_id"])
    donors = table["donor_id"].astype(str)
    if (donors.str.strip() == "").any():
        raise CohortException("every cell needs a donor_id")
    cell_counts = donors.value_counts().sort_index()
    if len(cell_counts) < 3:
        raise CohortException(f"donor split needs at least 3 donors, got {len(cell_counts)}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(cell_counts.index.to_numpy())
    total = float(cell_counts.sum())
    targets = np.asarray(ratios) * total
    assigned = np.zeros(len(SPLIT_NAMES))
    assignment = {}
    for donor in order:
        split = int(np.argmax(targets - assigned))
        assignment[str(donor)] = SPLIT_NAMES[split]
        assigned[split] += cell_counts[donor]

    result = SplitAssignment(
        assignment=dict(sorted(assignment.items())),
        targets=ratios,
        cell_counts={str(k): int(v) for k, v in cell_counts.items()},
        seed=seed,
    )
    for name, target in zip(SPLIT_NAMES, ratios):
        if target > 0 and not result.donors(name):
            logger.warning(f"Split {name} received no donor")
    return result


def assign_cells(table: pd.DataFrame, split: SplitAssignment) -> pd.Series:
    """Split name per cell row."""
    return table["donor_id"].astype(str).map(split.assignment)


def split_report(split: SplitAssignment) -> dict:
    """Donor and cell counts, achieved and target cell ratios, and leakage."""
    achieved = split.achieved
    report = {"splits": {}, "seed": split.seed}
    for name, target in zip(SPLIT_NAMES, split.targets):
        donors = split.donors(name)
        report["splits"][name] = {
            "donors": len(donors),
            "cells": int(sum(split.cell_counts.get(d, 0) for d in donors)),
            "target_ratio": target,
            "achieved_ratio": achieved[name],
            "deviation": achieved[name] - target,
        }
    members = [set(split.donors(name)) for name in SPLIT_NAMES]
    report["leakage"] = sum(
        len(members[i] & members[j]) for i in range(len(members)) for j in range(i + 1, len(members))
    )
    return report


def write_split(split: SplitAssignment, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
            writer.writerow(["donor_id", "split"])
            writer.writerows(sorted(split.assignment.items()))
    except OSError as e:
        raise ScribeIOException(f"Failed to write {path}: {e}")
    return path
