"""Evaluation battery: subtopic diversity/cohesion/overall and NPMI diagnostic."""

from __future__ import annotations

import logging
import math

import numpy as np

from .corpus import Corpus
from .embeddings import EmbeddingTable, cosine

logger = logging.getLogger(__name__)

DIVERSITY_TOP_N = 25
EMBEDDING_TOP_N = 10
NPMI_TOP_N = 10


class MetricError(ValueError):
    pass


def topic_diversity(top_word_lists: list[list[str]]) -> float:
    """Fraction of unique words across the subtopics' top-word lists."""
    if not top_word_lists:
        raise MetricError("diversity undefined for empty subtopic list")
    total = sum(len(lst) for lst in top_word_lists)
    if total == 0:
        raise MetricError("diversity undefined for empty word lists")
    unique = len({w for lst in top_word_lists for w in lst})
    return unique / total


def topic_embedding(weighted_words: list[tuple[str, float]], table: EmbeddingTable,
                    vocab_index: dict[str, int]) -> np.ndarray | None:
    """Weighted sum of the top words' vectors, weights renormalized over the
    words that actually have an embedding. None when no word is covered."""
    pairs = []
    for word, weight in weighted_words[:EMBEDDING_TOP_N]:
        wid = vocab_index.get(word)
        if wid is None:
            continue
        vec = table.get(wid)
        if vec is not None:
            pairs.append((vec, weight))
    if not pairs:
        return None
    total = sum(w for _, w in pairs)
    if total <= 0:
        return None
    return sum(vec * (w / total) for vec, w in pairs)


def topic_cohesion(parent_vec: np.ndarray, sub_vec: np.ndarray) -> float:
    """Cosine similarity of parent and subtopic embeddings."""
    return cosine(parent_vec, sub_vec)


def overall_quality(diversity: float, cohesion: float) -> float:
    return diversity * cohesion


def npmi_coherence(top_words: list[str], corpus: Corpus) -> float:
    """Mean pairwise NPMI of the top words over document co-occurrence.

    Add-one smoothed document frequencies; pairs whose words never occur are
    skipped. This is an internal diagnostic, not comparable to external C_V
    coherence numbers.
    """
    words = top_words[:NPMI_TOP_N]
    ids = [corpus.vocab.id_of(w) for w in words]
    n_docs = len(corpus.documents)
    doc_sets = [set(d.counts) for d in corpus.documents]
    df = {wid: sum(1 for s in doc_sets if wid in s) for wid in ids}

    scores = []
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            wa, wb = ids[a], ids[b]
            joint = sum(1 for s in doc_sets if wa in s and wb in s)
            if df[wa] == 0 and df[wb] == 0 and joint == 0:
                continue
            p_a = (df[wa] + 1) / (n_docs + 1)
            p_b = (df[wb] + 1) / (n_docs + 1)
            p_ab = (joint + 1) / (n_docs + 1)
            pmi = math.log(p_ab / (p_a * p_b))
            scores.append(pmi / -math.log(p_ab))
    if not scores:
        return 0.0
    return sum(scores) / len(scores)


def subtopic_report(parent_top_words: list[tuple[str, float]],
                    subtopics: list[list[tuple[str, float]]],
                    table: EmbeddingTable | None,
                    vocab_index: dict[str, int],
                    top_n_diversity: int = DIVERSITY_TOP_N) -> dict:
    """Aggregate diversity, mean cohesion and their product for one parent.

    Diversity uses each subtopic's top `top_n_diversity` words (shorter lists
    allowed); cohesion averages over subtopics with a defined embedding.
    """
    lists = [[w for w, _ in st[:top_n_diversity]] for st in subtopics]
    diversity = topic_diversity(lists)

    cohesion = None
    if table is not None:
        parent_vec = topic_embedding(parent_top_words, table, vocab_index)
        sims = []
        if parent_vec is not None:
            for st in subtopics:
                sub_vec = topic_embedding(st, table, vocab_index)
                if sub_vec is None:
                    logger.warning("subtopic without embedded words; cohesion skipped")
                    continue
                sims.append(topic_cohesion(parent_vec, sub_vec))
        if sims:
            cohesion = sum(sims) / len(sims)

    return {
        "diversity": diversity,
        "cohesion": cohesion,
        "overall": overall_quality(diversity, cohesion) if cohesion is not None else None,
    }
