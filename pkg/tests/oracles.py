"""Independent brute-force oracles; deliberately simple and separate from the
implementations they check."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np


def confusion_macro_f1(preds: Sequence[str], gold: Sequence[str], labels: Sequence[str]) -> float:
    """Macro-F1 straight from an explicit confusion matrix."""
    matrix = {g: {p: 0 for p in labels} for g in labels}
    for p, g in zip(preds, gold):
        if g in matrix and p in matrix[g]:
            matrix[g][p] += 1
    f1s = []
    for c in labels:
        tp = matrix[c][c]
        fn = sum(matrix[c][p] for p in labels if p != c) + sum(
            1 for p, g in zip(preds, gold) if g == c and p not in labels
        )
        fp = sum(matrix[g][c] for g in labels if g != c) + sum(
            1 for p, g in zip(preds, gold) if p == c and g not in labels
        )
        denom_p = tp + fp
        denom_r = tp + fn
        precision = tp / denom_p if denom_p else 0.0
        recall = tp / denom_r if denom_r else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return sum(f1s) / len(f1s)


def set_partitions(items: list[int], k: int) -> Iterable[list[list[int]]]:
    """All partitions of items into exactly k non-empty blocks."""
    if k == 1:
        yield [list(items)]
        return
    if len(items) == k:
        yield [[i] for i in items]
        return
    first, rest = items[0], items[1:]
    # first alone in a new block
    for partition in set_partitions(rest, k - 1):
        yield [[first]] + partition
    # first joins an existing block
    for partition in set_partitions(rest, k):
        for i in range(len(partition)):
            yield partition[:i] + [[first] + partition[i]] + partition[i + 1 :]


def partition_inertia(points: np.ndarray, blocks: list[list[int]]) -> float:
    total = 0.0
    for block in blocks:
        members = points[block]
        center = members.mean(axis=0)
        total += float(((members - center) ** 2).sum())
    return total


def optimal_kmeans_inertia(points: np.ndarray, k: int) -> float:
    best = math.inf
    for blocks in set_partitions(list(range(len(points))), k):
        best = min(best, partition_inertia(points, blocks))
    return best


def circle_points(coords: Sequence[float], alpha: float = 0.1) -> np.ndarray:
    """Embed 1-D coordinates on the unit circle so cosine distance is monotone
    in |xi - xj| (for alpha * span <= pi)."""
    out = np.zeros((len(coords), 2))
    for i, x in enumerate(coords):
        out[i] = (math.cos(alpha * x), math.sin(alpha * x))
    return out


def as_partition(assignments: Sequence[int]) -> set[frozenset[int]]:
    groups: dict[int, set[int]] = {}
    for i, a in enumerate(assignments):
        groups.setdefault(a, set()).add(i)
    return {frozenset(g) for g in groups.values()}
