import numpy as np
import pytest

from qdtm.corpus import PreprocessOptions, ingest
from qdtm.embeddings import EmbeddingTable


@pytest.fixture
def tiny_corpus():
    docs = [
        ("d0", "cat sat mat cat"),
        ("d1", "dog sat log"),
        ("d2", "cat dog fish"),
        ("d3", "fish swim pond fish fish"),
    ]
    return ingest(docs)


@pytest.fixture
def random_corpus():
    """50 documents over a ~120-word vocabulary with a planted block."""
    rng = np.random.default_rng(7)
    words = [f"w{i:03d}" for i in range(120)]
    docs = []
    for j in range(50):
        if j < 10:
            # planted block: words 0..19 dominate
            ids = rng.integers(0, 20, size=30)
        else:
            ids = rng.integers(20, 120, size=30)
        docs.append((f"doc{j}", " ".join(words[i] for i in ids)))
    return ingest(docs)


def make_table(vectors: dict[int, list[float]], vocab_size: int) -> EmbeddingTable:
    dim = len(next(iter(vectors.values())))
    return EmbeddingTable(dim, {k: np.array(v, dtype=float) for k, v in vectors.items()},
                          vocab_size)


@pytest.fixture
def geometry_table():
    """2-D vectors with controlled angles over a 6-word vocabulary."""
    return make_table({
        0: [1.0, 0.0],
        1: [0.0, 1.0],
        2: [1.0, 1.0],
        3: [-1.0, 0.0],
        4: [0.8, 0.1],
    }, vocab_size=6)
