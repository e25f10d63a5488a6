"""Lexical and embedding-based text generation metrics."""

import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from nltk.translate.bleu_score import SmoothingFunction, brevity_penalty, sentence_bleu
from nltk.translate.bleu_score import corpus_bleu as nltk_corpus_bleu

from .formats import GENERATION_FIELDS
from .readers import iter_jsonl
from .scribe_exceptions import MetricException, SchemaException
from .utils.log.loger import get_logger

logger = get_logger()

_TOKEN = re.compile(r"[^\W_]+|_+|[^\w\s]", re.UNICODE)

DEFAULT_ROUGE_BETA = 1.2
EMBEDDING_FIELDS = ("cell_id", "pred_vectors", "ref_vectors")

# Zero k-gram matches count as half a match
_SMOOTHING = SmoothingFunction(epsilon=0.5)


@dataclass(frozen=True)
class TokenSequence:
    tokens: Tuple[str, ...]

    def __post_init__(self):
        if any(t == "" for t in self.tokens):
            raise MetricException("Token sequences cannot hold empty tokens")

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


@dataclass(frozen=True)
class GenerationReport:
    n_pairs: int
    exact_match: float
    bleu2: float
    bleu4: float
    rouge1: float
    rouge2: float
    rougeL: float
    embeddings: Optional[Dict[str, Tuple[float, float, float]]] = None

    def _first_embedding(self, position: int) -> Optional[float]:
        if not self.embeddings:
            return None
        return next(iter(self.embeddings.values()))[position]

    @property
    def embed_precision(self) -> Optional[float]:
        return self._first_embedding(0)

    @property
    def embed_recall(self) -> Optional[float]:
        return self._first_embedding(1)

    @property
    def embed_f1(self) -> Optional[float]:
        return self._first_embedding(2)

    def as_table(self, scale: float = 100.0) -> dict:
        """Keys follow the reported column names; values scaled by ``scale``."""
        row = {"n": self.n_pairs}
        for field_name, column in GENERATION_FIELDS.items():
            row[column] = getattr(self, field_name) * scale
        for label, (precision, recall, f1) in (self.embeddings or {}).items():
            row[f"{label}-p"] = precision * scale
            row[f"{label}-r"] = recall * scale
            row[f"{label}-f1"] = f1 * scale
        return row


def _as_tokens(value) -> Tuple[str, ...]:
    if isinstance(value, TokenSequence):
        return value.tokens
    if isinstance(value, str):
        return tokenize(value).tokens
    return tuple(value)


def tokenize(text: str) -> TokenSequence:
    """Lowercase; punctuation marks become standalone tokens; split on whitespace."""
    return TokenSequence(tuple(_TOKEN.findall((text or "").lower())))


def exact_match(pred: str, ref: str) -> int:
    return int(pred == ref)


def corpus_exact_match(pairs: Iterable[Tuple[str, str]]) -> float:
    pairs = list(pairs)
    if not pairs:
        raise MetricException("Exact match over an empty corpus")
    return sum(exact_match(p, r) for p, r in pairs) / len(pairs)


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _uniform_weights(max_n: int) -> Tuple[float, ...]:
    if max_n < 1:
        raise MetricException(f"max_n must be positive, got {max_n}")
    return (1.0 / max_n,) * max_n


def _disjoint_bleu(pairs: Sequence[Tuple[Sequence[str], Sequence[str]]], max_n: int) -> float:
    """
    nltk returns 0 outright when no unigram is shared; every order is then
    floored at half a count over its (at least one) candidate k-grams.
    """
    pred_len = sum(len(pred) for pred, _ in pairs)
    ref_len = sum(len(ref) for _, ref in pairs)
    log_sum = 0.0
    for k in range(1, max_n + 1):
        candidates = sum(max(1, len(pred) - k + 1) for pred, _ in pairs)
        log_sum += math.log(_SMOOTHING.epsilon / candidates)
    return brevity_penalty(ref_len, pred_len) * math.exp(log_sum / max_n)


def bleu(pred, ref, max_n: int = 4) -> float:
    """
    Sentence BLEU with uniform weights and clipped k-gram counts.

    Args:
        pred: candidate tokens (TokenSequence, list or raw text)
        ref: reference tokens
        max_n: highest k-gram order, 2 or 4
    Returns:
        float in [0, 1]
    """
    weights = _uniform_weights(max_n)
    pred, ref = _as_tokens(pred), _as_tokens(ref)
    if not pred:
        logger.warning("Empty prediction scores BLEU 0")
        return 0.0
    if not set(pred) & set(ref):
        return _disjoint_bleu([(pred, ref)], max_n)
    return float(sentence_bleu([ref], pred, weights=weights, smoothing_function=_SMOOTHING.method1))


def corpus_bleu(pairs: Iterable[Tuple[Sequence[str], Sequence[str]]], max_n: int = 4) -> float:
    """Pooled BLEU: k-gram counts and lengths are summed before combining."""
    weights = _uniform_weights(max_n)
    pairs = [(_as_tokens(pred), _as_tokens(ref)) for pred, ref in pairs]
    if not any(pred for pred, _ in pairs):
        logger.warning("Empty predictions score BLEU 0")
        return 0.0
    if not any(set(pred) & set(ref) for pred, ref in pairs):
        return _disjoint_bleu(pairs, max_n)
    return float(nltk_corpus_bleu([[ref] for _, ref in pairs], [pred for pred, _ in pairs],
                                  weights=weights, smoothing_function=_SMOOTHING.method1))


def rouge_n(pred, ref, n: int = 1) -> float:
    """Clipped n-gram recall against the reference."""
    pred, ref = _as_tokens(pred), _as_tokens(ref)
    if not ref:
        raise MetricException("ROUGE is undefined for an empty reference")
    reference = ngrams(ref, n)
    total = sum(reference.values())
    if total == 0:
        # Reference shorter than n
        return 1.0 if tuple(pred) == tuple(ref) else 0.0
    candidate = ngrams(pred, n)
    overlap = sum(min(count, candidate[gram]) for gram, count in reference.items())
    return overlap / total


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, 1):
            current.append(previous[j - 1] + 1 if x == y else max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(pred, ref, beta: float = DEFAULT_ROUGE_BETA) -> float:
    """LCS F-measure; ``beta`` weights recall over precision."""
    pred, ref = _as_tokens(pred), _as_tokens(ref)
    if not ref:
        raise MetricException("ROUGE is undefined for an empty reference")
    lcs = lcs_length(pred, ref)
    if lcs == 0:
        return 0.0
    recall = lcs / len(ref)
    precision = lcs / len(pred)
    b2 = beta * beta
    return (1 + b2) * precision * recall / (recall + b2 * precision)


def _unit_rows(matrix: np.ndarray, label: str) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise MetricException(f"{label} embeddings contain a zero-norm row")
    return matrix / norms


def embedding_score(pred_embeddings, ref_embeddings) -> Tuple[float, float, float]:
    """
    Greedy cosine matching: precision averages each predicted token's best
    reference match, recall each reference token's best predicted match.
    """
    pred = np.atleast_2d(np.asarray(pred_embeddings, dtype=float))
    ref = np.atleast_2d(np.asarray(ref_embeddings, dtype=float))
    if pred.size == 0 or ref.size == 0:
        raise MetricException("Embedding matrices must be nonempty")
    if pred.shape[1] != ref.shape[1]:
        raise MetricException(
            f"Embedding dimensionality mismatch: {pred.shape[1]} vs {ref.shape[1]}"
        )
    cosine = _unit_rows(pred, "predicted") @ _unit_rows(ref, "reference").T
    precision = float(np.clip(cosine.max(axis=1).mean(), 0.0, 1.0))
    recall = float(np.clip(cosine.max(axis=0).mean(), 0.0, 1.0))
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def read_embeddings(path: Union[str, Path]) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """JSON-lines ``{cell_id, pred_tokens, pred_vectors, ref_tokens, ref_vectors}``."""
    embeddings = {}
    for record in iter_jsonl(path, EMBEDDING_FIELDS):
        try:
            pred = np.asarray(record["pred_vectors"], dtype=float)
            ref = np.asarray(record["ref_vectors"], dtype=float)
        except (TypeError, ValueError):
            raise SchemaException("vectors must be numeric matrices", record["_line"], path)
        if pred.ndim != 2 or ref.ndim != 2:
            raise SchemaException("vectors must be 2-D (tokens x dim)", record["_line"], path)
        for side in ("pred", "ref"):
            tokens = record.get(f"{side}_tokens")
            rows = pred if side == "pred" else ref
            if tokens is not None and len(tokens) != rows.shape[0]:
                raise SchemaException(f"{side}_tokens and {side}_vectors differ in length",
                                      record["_line"], path)
        embeddings[str(record["cell_id"])] = (pred, ref)
    return embeddings


def generation_report(pairs: Sequence[Tuple[str, str, str]], pooled: bool = False,
                      rouge_beta: float = DEFAULT_ROUGE_BETA,
                      embeddings: Optional[Dict[str, Dict[str, tuple]]] = None) -> GenerationReport:
    """
    Aggregate lexical and embedding metrics over a corpus.

    Args:
        pairs: (cell_id, predicted text, reference text)
        pooled: corpus-level BLEU instead of the mean of sentence BLEU
        embeddings: label -> cell_id -> (pred vectors, ref vectors)
    Returns:
        GenerationReport
    """
    if not pairs:
        raise MetricException("Generation metrics over an empty corpus")
    tokenized = [(tokenize(p), tokenize(r)) for _, p, r in pairs]
    for (cell_id, _, _), (_, ref) in zip(pairs, tokenized):
        if not len(ref):
            raise MetricException(f"{cell_id}: empty reference")

    if pooled:
        bleu2 = corpus_bleu(tokenized, 2)
        bleu4 = corpus_bleu(tokenized, 4)
    else:
        bleu2 = float(np.mean([bleu(p, r, 2) for p, r in tokenized]))
        bleu4 = float(np.mean([bleu(p, r, 4) for p, r in tokenized]))

    scored = {}
    for label, by_cell in (embeddings or {}).items():
        triples = []
        for cell_id, _, _ in pairs:
            if cell_id not in by_cell:
                raise MetricException(f"{label}: no embeddings for {cell_id}")
            triples.append(embedding_score(*by_cell[cell_id]))
        scored[label] = tuple(float(v) for v in np.mean(triples, axis=0))

    return GenerationReport(
        n_pairs=len(pairs),
        exact_match=corpus_exact_match((p, r) for _, p, r in pairs),
        bleu2=bleu2,
        bleu4=bleu4,
        rouge1=float(np.mean([rouge_n(p, r, 1) for p, r in tokenized])),
        rouge2=float(np.mean([rouge_n(p, r, 2) for p, r in tokenized])),
        rougeL=float(np.mean([rouge_l(p, r, rouge_beta) for p, r in tokenized])),
        embeddings=scored or None,
    )
