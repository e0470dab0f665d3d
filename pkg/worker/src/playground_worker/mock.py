"""Mock classifier, trainer, and embedder for hermetic job execution.

This mirrors the backend's in-process mock exactly: same lexicon fixture,
same tokenization, same Tf-Idf centroid math in the same numpy operation
order, same fixed-decimal exchange formats. Outputs must stay byte-identical
to the backend's, so change nothing here without changing both sides.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re
from functools import lru_cache
from importlib import resources
from typing import Any, Mapping, Sequence

import numpy as np

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class WorkerError(Exception):
    pass


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@lru_cache(maxsize=1)
def load_lexicon() -> dict[str, Any]:
    text = (
        resources.files("playground_worker")
        .joinpath("resources/mock_lexicon.json")
        .read_text(encoding="utf-8")
    )
    return json.loads(text)


def _schema_value(labels: Sequence[Mapping[str, str]], preferred: str, fallback: int) -> str:
    values = [l["value"] for l in labels]
    if preferred in values:
        return preferred
    return values[fallback if fallback < len(values) else -1]


class MockModel:
    """Per-class token-centroid classifier over Tf-Idf vectors."""

    def __init__(self, classes: dict[str, dict[str, float]] | None = None,
                 idf: dict[str, float] | None = None, seed: int = 0):
        self.classes = classes or {}
        self.idf = idf or {}
        self.seed = seed

    @property
    def trained(self) -> bool:
        return bool(self.classes)

    def vectorize(self, text: str) -> dict[str, float]:
        counts: dict[str, int] = {}
        for token in tokenize(text):
            counts[token] = counts.get(token, 0) + 1
        vec = {term: tf * self.idf[term] for term, tf in counts.items() if term in self.idf}
        norm = math.sqrt(sum(w * w for w in vec.values()))
        if norm > 0:
            vec = {term: w / norm for term, w in vec.items()}
        return vec

    def classify_text(self, text: str) -> str:
        vec = self.vectorize(text)
        best_label = None
        best_score = -math.inf
        for label in sorted(self.classes):
            centroid = self.classes[label]
            score = sum(w * centroid.get(term, 0.0) for term, w in vec.items())
            if score > best_score:
                best_score = score
                best_label = label
        assert best_label is not None
        return best_label

    def to_dict(self) -> dict[str, Any]:
        return {
            "classes": {
                label: {term: w for term, w in sorted(centroid.items())}
                for label, centroid in sorted(self.classes.items())
            },
            "idf": {term: w for term, w in sorted(self.idf.items())},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MockModel":
        return cls(
            classes={str(k): dict(v) for k, v in data.get("classes", {}).items()},
            idf=dict(data.get("idf", {})),
            seed=int(data.get("seed", 0)),
        )


def _lexicon_label(text: str, labels, lexicon) -> str:
    tokens = tokenize(text)
    positive = set(lexicon["positive"])
    negative = set(lexicon["negative"])
    pos = sum(1 for t in tokens if t in positive)
    neg = sum(1 for t in tokens if t in negative)
    if pos > neg:
        return _schema_value(labels, "positive", 0)
    return _schema_value(labels, "negative", 1)


def _overlap_label(text: str, text2: str, labels, lexicon) -> str:
    a = set(tokenize(text))
    b = set(tokenize(text2))
    union = a | b
    overlap = 1.0 if not union else len(a & b) / len(union)
    if overlap >= float(lexicon.get("pair_overlap_threshold", 0.5)):
        return _schema_value(labels, "duplicate", 0)
    return _schema_value(labels, "not_duplicate", 1)


def mock_classify(
    items: Sequence[tuple[str, str | None]],
    labels: Sequence[Mapping[str, str]],
    pair_task: bool,
    model: MockModel | None = None,
) -> list[str]:
    model = model or MockModel()
    lexicon = load_lexicon()
    out = []
    for text, text2 in items:
        if model.trained:
            joined = text if text2 is None else f"{text} {text2}"
            out.append(model.classify_text(joined))
        elif pair_task:
            out.append(_overlap_label(text, text2 or "", labels, lexicon))
        else:
            out.append(_lexicon_label(text, labels, lexicon))
    return out


def _tfidf_rows(texts: Sequence[str]) -> tuple[list[str], np.ndarray, np.ndarray]:
    token_lists = [tokenize(t) for t in texts]
    vocab = sorted({t for tokens in token_lists for t in tokens})
    index = {t: i for i, t in enumerate(vocab)}
    n = len(texts)
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
    return vocab, rows, idf


def mock_train(examples: Sequence[tuple[str, str]], seed: int = 0) -> MockModel:
    if not examples:
        raise WorkerError("empty training set")
    texts = [text for text, _ in examples]
    vocab, rows, idf_values = _tfidf_rows(texts)

    by_label: dict[str, list[int]] = {}
    for i, (_, label) in enumerate(examples):
        by_label.setdefault(label, []).append(i)

    classes = {}
    for label, members in by_label.items():
        centroid = rows[members].mean(axis=0)
        classes[label] = {vocab[j]: float(centroid[j]) for j in np.nonzero(centroid)[0]}
    idf = {vocab[j]: float(idf_values[j]) for j in range(len(vocab))}
    return MockModel(classes=classes, idf=idf, seed=seed)


def embed_hashed(texts: Sequence[str], dim: int) -> np.ndarray:
    out = np.zeros((len(texts), dim), dtype=np.float64)
    for i, text in enumerate(texts):
        for token in tokenize(text):
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:8], "big") % dim
            sign = 1.0 if digest[8] % 2 == 0 else -1.0
            out[i, bucket] += sign
    norms = np.linalg.norm(out, axis=1)
    nonzero = norms > 0
    out[nonzero] /= norms[nonzero, None]
    return out


def format_predictions_csv(labels: Sequence[str]) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf)
    writer.writerow(["prediction"])
    for label in labels:
        writer.writerow([label])
    return buf.getvalue().encode("utf-8")


def format_embeddings(rows: np.ndarray) -> bytes:
    lines = [",".join(f"{v:.9f}" for v in row) for row in rows]
    return ("\n".join(lines) + "\n").encode("utf-8")


def build_adapter_zip(
    task_id: str,
    labels: Sequence[Mapping[str, str]],
    base_model_id: str,
    architecture: str,
    model: MockModel,
    learning_rate: float,
    epochs: int,
    seed: int,
) -> bytes:
    import zipfile

    manifest = {
        "task_id": task_id,
        "label_schema": [{"name": l["name"], "value": l["value"]} for l in labels],
        "base_model_id": base_model_id,
        "architecture": architecture,
        "hyperparams": {"learning_rate": learning_rate, "epochs": epochs, "seed": seed},
    }
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("adapter_manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
        zf.writestr("mock_model.json", json.dumps(model.to_dict(), indent=2, sort_keys=True))
    return buf.getvalue()
