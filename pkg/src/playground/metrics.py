"""Evaluation engine: accuracy, macro-F1, majority/random baselines, and the
paired bootstrap significance test.

All functions are pure and deterministic under a fixed seed. Macro-F1 averages
over the *full* label schema: a class with zero precision+recall contributes
F1 = 0, including classes absent from both predictions and gold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from playground.errors import PlaygroundError

_BOOTSTRAP_CHUNK = 1024
_RANDOM_BASELINE_DRAWS = 1000


class LengthMismatch(PlaygroundError):
    pass


class Empty(PlaygroundError):
    pass


class MetricName(str, Enum):
    ACCURACY = "accuracy"
    MACRO_F1 = "macro_f1"


@dataclass(frozen=True)
class PerClassStats:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class BaselinePair:
    accuracy: float
    macro_f1: float


@dataclass(frozen=True)
class BootstrapResult:
    """One-sided paired bootstrap outcome; p = (count(delta <= 0) + 1) / (B + 1)."""

    delta_observed: float
    p_value: float
    resamples: int
    seed: int
    significant: bool


@dataclass
class EvalReport:
    n: int
    accuracy: float | None = None
    macro_f1: float | None = None
    per_class: list[PerClassStats] = field(default_factory=list)
    majority_baseline: BaselinePair | None = None
    random_baseline: BaselinePair | None = None
    significance: BootstrapResult | None = None
    label_distribution: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"n": self.n, "label_distribution": self.label_distribution}
        if self.accuracy is not None:
            out["accuracy"] = self.accuracy
            out["macro_f1"] = self.macro_f1
            out["per_class"] = [
                {
                    "label": c.label,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "support": c.support,
                }
                for c in self.per_class
            ]
            out["majority_baseline"] = {
                "accuracy": self.majority_baseline.accuracy,
                "macro_f1": self.majority_baseline.macro_f1,
            }
            out["random_baseline"] = {
                "accuracy": self.random_baseline.accuracy,
                "macro_f1": self.random_baseline.macro_f1,
            }
        if self.significance is not None:
            out["significance"] = {
                "delta_observed": self.significance.delta_observed,
                "p_value": self.significance.p_value,
                "resamples": self.significance.resamples,
                "seed": self.significance.seed,
                "significant": self.significance.significant,
            }
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EvalReport":
        report = cls(n=data["n"], label_distribution=dict(data.get("label_distribution", {})))
        if "accuracy" in data:
            report.accuracy = data["accuracy"]
            report.macro_f1 = data["macro_f1"]
            report.per_class = [
                PerClassStats(
                    label=c["label"],
                    precision=c["precision"],
                    recall=c["recall"],
                    f1=c["f1"],
                    support=c["support"],
                )
                for c in data.get("per_class", [])
            ]
            mb = data["majority_baseline"]
            rb = data["random_baseline"]
            report.majority_baseline = BaselinePair(mb["accuracy"], mb["macro_f1"])
            report.random_baseline = BaselinePair(rb["accuracy"], rb["macro_f1"])
        if "significance" in data:
            s = data["significance"]
            report.significance = BootstrapResult(
                delta_observed=s["delta_observed"],
                p_value=s["p_value"],
                resamples=s["resamples"],
                seed=s["seed"],
                significant=s["significant"],
            )
        return report


def _check_pair(preds: Sequence[str], gold: Sequence[str]) -> None:
    if len(preds) != len(gold):
        raise LengthMismatch(f"preds has {len(preds)} items, gold has {len(gold)}")
    if len(gold) == 0:
        raise Empty("no items to score")


def accuracy(preds: Sequence[str], gold: Sequence[str]) -> float:
    """Fraction of exact matches."""
    _check_pair(preds, gold)
    hits = sum(1 for p, g in zip(preds, gold) if p == g)
    return hits / len(gold)


def _encode(values: Sequence[str], index: dict[str, int]) -> np.ndarray:
    # Out-of-schema values map to the sentinel bucket len(index).
    k = len(index)
    return np.fromiter((index.get(v, k) for v in values), dtype=np.int64, count=len(values))


def _macro_f1_from_counts(tp: np.ndarray, pred_c: np.ndarray, gold_c: np.ndarray) -> np.ndarray:
    """Macro-F1 for stacked confusion counts; trailing axis is the class axis."""
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(pred_c > 0, tp / pred_c, 0.0)
        recall = np.where(gold_c > 0, tp / gold_c, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2.0 * precision * recall / np.where(denom > 0, denom, 1.0), 0.0)
    return f1.mean(axis=-1)


def per_class_stats(
    preds: Sequence[str], gold: Sequence[str], labels: Sequence[str]
) -> list[PerClassStats]:
    """Precision/recall/F1/support for every schema label (zero-division -> 0)."""
    _check_pair(preds, gold)
    if not labels:
        raise Empty("label schema is empty")
    stats = []
    for label in labels:
        tp = sum(1 for p, g in zip(preds, gold) if p == label and g == label)
        pred_c = sum(1 for p in preds if p == label)
        gold_c = sum(1 for g in gold if g == label)
        precision = tp / pred_c if pred_c else 0.0
        recall = tp / gold_c if gold_c else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        stats.append(PerClassStats(label, precision, recall, f1, gold_c))
    return stats


def macro_f1(preds: Sequence[str], gold: Sequence[str], labels: Sequence[str]) -> float:
    """Unweighted mean of per-class F1 over the full schema."""
    stats = per_class_stats(preds, gold, labels)
    return sum(c.f1 for c in stats) / len(stats)


def _score_label_matrix(
    pred_matrix: np.ndarray, gold_enc: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """(accuracy, macro_f1) per row of an encoded prediction matrix."""
    rows = pred_matrix.shape[0]
    acc = (pred_matrix == gold_enc[None, :]).mean(axis=1)
    base = k + 1
    composite = gold_enc[None, :] * base + pred_matrix
    offsets = (np.arange(rows) * base * base)[:, None]
    counts = np.bincount((composite + offsets).ravel(), minlength=rows * base * base)
    counts = counts.reshape(rows, base, base)
    tp = counts[:, np.arange(k), np.arange(k)].astype(np.float64)
    gold_c = counts.sum(axis=2)[:, :k].astype(np.float64)
    pred_c = counts.sum(axis=1)[:, :k].astype(np.float64)
    return acc, _macro_f1_from_counts(tp, pred_c, gold_c)


def baselines(
    gold: Sequence[str],
    labels: Sequence[str],
    seed: int,
    draws: int = _RANDOM_BASELINE_DRAWS,
) -> tuple[BaselinePair, BaselinePair]:
    """Scores of the constant most-frequent-label predictor and the mean scores
    of `draws` uniform random prediction vectors (seeded)."""
    if len(gold) == 0:
        raise Empty("no gold labels")
    if not labels:
        raise Empty("label schema is empty")
    counts = {label: 0 for label in labels}
    for g in gold:
        if g in counts:
            counts[g] += 1
    # ties broken by schema order
    majority_label = max(labels, key=lambda l: counts[l])
    constant = [majority_label] * len(gold)
    majority = BaselinePair(accuracy(constant, gold), macro_f1(constant, gold, labels))

    rng = np.random.default_rng(seed)
    index = {label: i for i, label in enumerate(labels)}
    gold_enc = _encode(gold, index)
    k = len(labels)
    pred_matrix = rng.integers(0, k, size=(draws, len(gold)))
    acc, mf1 = _score_label_matrix(pred_matrix, gold_enc, k)
    random = BaselinePair(float(acc.mean()), float(mf1.mean()))
    return majority, random


def paired_bootstrap(
    preds_a: Sequence[str],
    preds_b: Sequence[str],
    gold: Sequence[str],
    metric: MetricName = MetricName.ACCURACY,
    B: int = 10_000,
    seed: int = 0,
    labels: Sequence[str] | None = None,
) -> BootstrapResult:
    """One-sided test that system A outperforms system B.

    Draws B index resamples of size n with replacement; for each, computes
    metric(A) - metric(B). p = (count(delta <= 0) + 1) / (B + 1).
    """
    _check_pair(preds_a, gold)
    _check_pair(preds_b, gold)
    n = len(gold)
    if n < 2:
        raise Empty("need at least 2 items for a paired bootstrap")

    if labels is None:
        labels = sorted(set(gold) | set(preds_a) | set(preds_b))
    index = {label: i for i, label in enumerate(labels)}
    k = len(labels)
    gold_enc = _encode(gold, index)
    a_enc = _encode(preds_a, index)
    b_enc = _encode(preds_b, index)

    if metric is MetricName.ACCURACY:
        delta_observed = accuracy(preds_a, gold) - accuracy(preds_b, gold)
    else:
        delta_observed = macro_f1(preds_a, gold, labels) - macro_f1(preds_b, gold, labels)

    rng = np.random.default_rng(seed)
    not_above = 0
    done = 0
    while done < B:
        rows = min(_BOOTSTRAP_CHUNK, B - done)
        idx = rng.integers(0, n, size=(rows, n))
        g = gold_enc[idx]
        if metric is MetricName.ACCURACY:
            delta = (a_enc[idx] == g).mean(axis=1) - (b_enc[idx] == g).mean(axis=1)
        else:
            delta = _resampled_macro_f1(a_enc[idx], g, k) - _resampled_macro_f1(b_enc[idx], g, k)
        not_above += int((delta <= 0).sum())
        done += rows

    p_value = (not_above + 1) / (B + 1)
    return BootstrapResult(
        delta_observed=float(delta_observed),
        p_value=p_value,
        resamples=B,
        seed=seed,
        significant=p_value < 0.05,
    )


def _resampled_macro_f1(pred_matrix: np.ndarray, gold_matrix: np.ndarray, k: int) -> np.ndarray:
    rows, n = pred_matrix.shape
    base = k + 1
    composite = gold_matrix * base + pred_matrix
    offsets = (np.arange(rows) * base * base)[:, None]
    counts = np.bincount((composite + offsets).ravel(), minlength=rows * base * base)
    counts = counts.reshape(rows, base, base)
    tp = counts[:, np.arange(k), np.arange(k)].astype(np.float64)
    gold_c = counts.sum(axis=2)[:, :k].astype(np.float64)
    pred_c = counts.sum(axis=1)[:, :k].astype(np.float64)
    return _macro_f1_from_counts(tp, pred_c, gold_c)


def build_report(
    preds: Sequence[str],
    gold: Sequence[str] | None,
    labels: Sequence[str],
    reference_preds: Sequence[str] | None = None,
    seed: int = 0,
    metric: MetricName = MetricName.ACCURACY,
    bootstrap_resamples: int = 10_000,
) -> EvalReport:
    """Full evaluation report; distribution-only when gold labels are absent."""
    if len(preds) == 0:
        raise Empty("no predictions")
    distribution: dict[str, int] = {}
    for p in preds:
        distribution[p] = distribution.get(p, 0) + 1
    report = EvalReport(n=len(preds), label_distribution=distribution)
    if gold is None:
        return report

    report.accuracy = accuracy(preds, gold)
    report.per_class = per_class_stats(preds, gold, labels)
    report.macro_f1 = sum(c.f1 for c in report.per_class) / len(report.per_class)
    report.majority_baseline, report.random_baseline = baselines(gold, labels, seed=seed)
    if reference_preds is not None:
        report.significance = paired_bootstrap(
            preds,
            reference_preds,
            gold,
            metric=metric,
            B=bootstrap_resamples,
            seed=seed,
            labels=labels,
        )
    return report
