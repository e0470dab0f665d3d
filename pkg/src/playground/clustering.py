"""Native text clustering: Tf-Idf vectors, K-Means, and agglomerative
hierarchical clustering under cosine distance, plus the hook that delegates
embedding to an execution backend.

Tokenization is lowercase maximal alphanumeric runs; no stemming, no stopword
removal. Pre-clean the text upstream if you need anything fancier.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from playground.domain import ClusterAlgorithm, Linkage
from playground.errors import PlaygroundError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class EmptyCorpus(PlaygroundError):
    pass


class KOutOfRange(PlaygroundError):
    pass


class MalformedEmbeddingOutput(PlaygroundError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase maximal alphanumeric runs (underscore is a separator)."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class DocMatrix:
    """Row-per-document term matrix; non-empty rows are L2-normalized."""

    n_docs: int
    vocab: list[str]
    rows: np.ndarray  # shape (n_docs, len(vocab)), float64

    def __post_init__(self) -> None:
        if self.rows.shape != (self.n_docs, len(self.vocab)):
            raise ValueError("rows shape does not match n_docs x vocab")


@dataclass
class ClusterResult:
    algorithm: ClusterAlgorithm
    k: int
    assignments: list[int]
    inertia: float | None = None
    merge_heights: list[float] = field(default_factory=list)
    params: dict[str, Any] = field(default_factory=dict)


def tfidf(corpus: Sequence[str]) -> DocMatrix:
    """Tf-Idf with raw term counts and idf(t) = ln((1+N)/(1+df(t))) + 1,
    rows L2-normalized; all-empty documents yield zero rows."""
    if len(corpus) == 0:
        raise EmptyCorpus("corpus is empty")
    token_lists = [tokenize(text) for text in corpus]
    vocab = sorted({t for tokens in token_lists for t in tokens})
    index = {t: i for i, t in enumerate(vocab)}
    n = len(corpus)
    df = np.zeros(len(vocab), dtype=np.float64)
    for tokens in token_lists:
        for t in set(tokens):
            df[index[t]] += 1
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0

    rows = np.zeros((n, len(vocab)), dtype=np.float64)
    for i, tokens in enumerate(token_lists):
        for t in tokens:
            rows[i, index[t]] += 1.0
    rows *= idf[None, :]
    norms = np.linalg.norm(rows, axis=1)
    nonzero = norms > 0
    rows[nonzero] /= norms[nonzero, None]
    return DocMatrix(n_docs=n, vocab=vocab, rows=rows)


def _as_rows(matrix: DocMatrix | np.ndarray) -> np.ndarray:
    if isinstance(matrix, DocMatrix):
        return matrix.rows
    return np.asarray(matrix, dtype=np.float64)


def _kmeanspp_init(rows: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = rows.shape[0]
    centers = np.empty((k, rows.shape[1]), dtype=np.float64)
    first = int(rng.integers(0, n))
    centers[0] = rows[first]
    dist_sq = ((rows - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = dist_sq.sum()
        if total <= 0.0:
            choice = int(rng.integers(0, n))
        else:
            choice = int(rng.choice(n, p=dist_sq / total))
        centers[c] = rows[choice]
        dist_sq = np.minimum(dist_sq, ((rows - centers[c]) ** 2).sum(axis=1))
    return centers


def _assign(rows: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # squared Euclidean distance to every center
    d = ((rows[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assignments = d.argmin(axis=1)
    return assignments, d


def _repair_empty(
    rows: np.ndarray, centers: np.ndarray, assignments: np.ndarray, d: np.ndarray
) -> np.ndarray:
    """Give each empty cluster the point currently farthest from its centroid."""
    k = centers.shape[0]
    taken: set[int] = set()
    for c in range(k):
        if (assignments == c).any():
            continue
        point_dist = d[np.arange(len(assignments)), assignments].copy()
        for t in taken:
            point_dist[t] = -1.0
        worst = int(point_dist.argmax())
        assignments[worst] = c
        taken.add(worst)
    return assignments


def _lloyd(
    rows: np.ndarray,
    centers: np.ndarray,
    max_iter: int,
    tol: float,
) -> tuple[np.ndarray, float, list[float]]:
    """Lloyd iterations from the given centers; returns (assignments, inertia,
    per-iteration inertia history)."""
    k = centers.shape[0]
    history: list[float] = []
    assignments = np.zeros(len(rows), dtype=np.int64)
    inertia = math.inf
    for _ in range(max_iter):
        assignments, d = _assign(rows, centers)
        assignments = _repair_empty(rows, centers, assignments, d)
        for c in range(k):
            members = rows[assignments == c]
            centers[c] = members.mean(axis=0)
        new_inertia = float(((rows - centers[assignments]) ** 2).sum())
        history.append(new_inertia)
        if inertia - new_inertia <= tol:
            inertia = new_inertia
            break
        inertia = new_inertia
    return assignments, inertia, history


def kmeans(
    matrix: DocMatrix | np.ndarray,
    k: int,
    seed: int,
    restarts: int = 10,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusterResult:
    """K-Means via Lloyd's algorithm with k-means++ init per restart; the
    restart with minimal inertia wins (ties by restart index)."""
    rows = _as_rows(matrix)
    n = rows.shape[0]
    if not 1 <= k <= n:
        raise KOutOfRange(f"k={k} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    best: tuple[float, int, np.ndarray] | None = None
    for r in range(restarts):
        centers = _kmeanspp_init(rows, k, rng)
        assignments, inertia, _ = _lloyd(rows, centers, max_iter, tol)
        if best is None or inertia < best[0] - 1e-12:
            best = (inertia, r, assignments)
    assert best is not None
    inertia, _, assignments = best
    return ClusterResult(
        algorithm=ClusterAlgorithm.KMEANS,
        k=k,
        assignments=[int(a) for a in assignments],
        inertia=inertia,
        params={"seed": seed, "restarts": restarts, "max_iter": max_iter, "tol": tol},
    )


def cosine_distances(rows: np.ndarray) -> np.ndarray:
    """Pairwise 1 - cosine similarity; zero vectors are at distance 1 from
    everything (similarity defined as 0)."""
    norms = np.linalg.norm(rows, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = rows / safe[:, None]
    sim = unit @ unit.T
    zero = norms == 0
    sim[zero, :] = 0.0
    sim[:, zero] = 0.0
    d = 1.0 - sim
    np.fill_diagonal(d, 0.0)
    return np.clip(d, 0.0, 2.0)


def agglomerative(
    matrix: DocMatrix | np.ndarray,
    k: int,
    linkage: Linkage = Linkage.AVERAGE,
) -> ClusterResult:
    """Bottom-up merging under cosine distance, cut at exactly k clusters.

    Distance ties break on the smallest (i, j) cluster-id pair; a merged
    cluster keeps the smaller id. Merge heights are recorded in order.
    """
    rows = _as_rows(matrix)
    n = rows.shape[0]
    if not 1 <= k <= n:
        raise KOutOfRange(f"k={k} outside [1, {n}]")

    dist = cosine_distances(rows)
    active = list(range(n))
    sizes = {i: 1 for i in range(n)}
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    heights: list[float] = []

    while len(active) > k:
        best_pair: tuple[int, int] | None = None
        best_d = math.inf
        for ai in range(len(active)):
            for aj in range(ai + 1, len(active)):
                i, j = active[ai], active[aj]
                d = dist[i, j]
                if d < best_d or (d == best_d and best_pair is not None and (i, j) < best_pair):
                    best_d = d
                    best_pair = (i, j)
        assert best_pair is not None
        i, j = best_pair
        heights.append(float(best_d))

        ni, nj = sizes[i], sizes[j]
        for other in active:
            if other in (i, j):
                continue
            di, dj = dist[other, i], dist[other, j]
            if linkage is Linkage.SINGLE:
                d_new = min(di, dj)
            elif linkage is Linkage.COMPLETE:
                d_new = max(di, dj)
            else:
                d_new = (ni * di + nj * dj) / (ni + nj)
            dist[other, i] = d_new
            dist[i, other] = d_new
        members[i].extend(members[j])
        sizes[i] = ni + nj
        active.remove(j)
        del sizes[j], members[j]

    # label clusters 0..k-1 ordered by their smallest member index
    ordered = sorted(active, key=lambda c: min(members[c]))
    assignments = [0] * n
    for label, c in enumerate(ordered):
        for doc in members[c]:
            assignments[doc] = label
    return ClusterResult(
        algorithm=ClusterAlgorithm.HIERARCHICAL,
        k=k,
        assignments=assignments,
        merge_heights=heights,
        params={"linkage": linkage.value},
    )


def embed_external(corpus: Sequence[str], executor) -> DocMatrix:
    """Delegate embedding to an execution backend (see executor.EmbeddingDispatch)
    and normalize the returned dense vectors."""
    if len(corpus) == 0:
        raise EmptyCorpus("corpus is empty")
    text = executor.embed_text(list(corpus))
    return parse_embeddings(text, expected_rows=len(corpus))


def parse_embeddings(text: str, expected_rows: int) -> DocMatrix:
    """Parse the embedding exchange format (one comma-separated dense vector
    per line) into an L2-normalized DocMatrix."""
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) != expected_rows:
        raise MalformedEmbeddingOutput(
            f"expected {expected_rows} vectors, got {len(lines)}"
        )
    vectors = []
    width: int | None = None
    for lineno, line in enumerate(lines, start=1):
        try:
            values = [float(x) for x in line.split(",")]
        except ValueError:
            raise MalformedEmbeddingOutput(f"non-numeric value on line {lineno}")
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise MalformedEmbeddingOutput(f"ragged vector on line {lineno}")
        vectors.append(values)
    rows = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(rows, axis=1)
    nonzero = norms > 0
    rows[nonzero] /= norms[nonzero, None]
    return DocMatrix(n_docs=len(lines), vocab=[f"dim_{i}" for i in range(rows.shape[1])], rows=rows)
