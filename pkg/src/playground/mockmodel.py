"""Deterministic mock classifier, trainer, and embedder.

These stand in for real adapter inference so the whole pipeline can run
hermetically. The worker runtime ships the same semantics; the lexicon and the
serialized model format are the shared contract, so outputs must stay
bit-reproducible: no randomness, fixed tie-breaking, fixed decimal formatting
in exchange files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import zipfile
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Mapping, Sequence

import numpy as np

from playground import clustering
from playground.domain import HyperParams, InputArity, TaskDescriptor
from playground.errors import PlaygroundError

MODEL_FILE = "mock_model.json"
MANIFEST_FILE = "adapter_manifest.json"
DEFAULT_EMBEDDING_DIM = 64


class EmptyTrainingSet(PlaygroundError):
    pass


@lru_cache(maxsize=1)
def load_lexicon() -> dict[str, Any]:
    text = (
        resources.files("playground")
        .joinpath("resources/mock_lexicon.json")
        .read_text(encoding="utf-8")
    )
    return json.loads(text)


def _schema_value(task: TaskDescriptor, preferred: str, fallback: int) -> str:
    values = task.label_values
    if preferred in values:
        return preferred
    return values[fallback if fallback < len(values) else -1]


@dataclass
class MockModel:
    """Per-class token-centroid classifier over Tf-Idf vectors.

    An untrained model (no classes) falls back to the keyword lexicon for
    single-text tasks and to token overlap for pair tasks.
    """

    classes: dict[str, dict[str, float]] = field(default_factory=dict)
    idf: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    @property
    def trained(self) -> bool:
        return bool(self.classes)

    def vectorize(self, text: str) -> dict[str, float]:
        counts: dict[str, int] = {}
        for token in clustering.tokenize(text):
            counts[token] = counts.get(token, 0) + 1
        vec = {
            term: tf * self.idf[term] for term, tf in counts.items() if term in self.idf
        }
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


TextItem = "str | tuple[str, str | None]"


def _split_item(item) -> tuple[str, str | None]:
    if isinstance(item, str):
        return item, None
    if isinstance(item, (tuple, list)) and len(item) == 2:
        return item[0], item[1]
    text = getattr(item, "text", None)
    if text is not None:
        return text, getattr(item, "text2", None)
    raise TypeError(f"cannot interpret text item {item!r}")


def _lexicon_label(text: str, task: TaskDescriptor, lexicon: Mapping[str, Any]) -> str:
    tokens = clustering.tokenize(text)
    positive = set(lexicon["positive"])
    negative = set(lexicon["negative"])
    pos = sum(1 for t in tokens if t in positive)
    neg = sum(1 for t in tokens if t in negative)
    if pos > neg:
        return _schema_value(task, "positive", 0)
    return _schema_value(task, "negative", 1)


def _overlap_label(text: str, text2: str, task: TaskDescriptor, lexicon: Mapping[str, Any]) -> str:
    a = set(clustering.tokenize(text))
    b = set(clustering.tokenize(text2))
    union = a | b
    overlap = 1.0 if not union else len(a & b) / len(union)
    if overlap >= float(lexicon.get("pair_overlap_threshold", 0.5)):
        return _schema_value(task, "duplicate", 0)
    return _schema_value(task, "not_duplicate", 1)


def mock_classify(
    texts: Sequence, task: TaskDescriptor, model: MockModel | None = None
) -> list[str]:
    """Deterministic labels for a batch of texts (or text pairs)."""
    model = model or MockModel(seed=0)
    lexicon = load_lexicon()
    labels = []
    for item in texts:
        text, text2 = _split_item(item)
        if model.trained:
            joined = text if text2 is None else f"{text} {text2}"
            labels.append(model.classify_text(joined))
        elif task.input_arity is InputArity.PAIR:
            labels.append(_overlap_label(text, text2 or "", task, lexicon))
        else:
            labels.append(_lexicon_label(text, task, lexicon))
    return labels


def mock_train(
    examples: Sequence[tuple[str, str]],
    base: MockModel | None = None,
    hp: HyperParams = HyperParams(),
) -> MockModel:
    """Fit per-class Tf-Idf centroids; classes from the base model persist
    unless retrained, so growing the training set never forgets a class."""
    if not examples:
        raise EmptyTrainingSet("training requires at least one example")
    texts = [text for text, _ in examples]
    matrix = clustering.tfidf(texts)
    index = {term: i for i, term in enumerate(matrix.vocab)}

    df = np.zeros(len(matrix.vocab))
    for text in texts:
        for term in set(clustering.tokenize(text)):
            df[index[term]] += 1
    idf_values = np.log((1.0 + len(texts)) / (1.0 + df)) + 1.0

    by_label: dict[str, list[int]] = {}
    for i, (_, label) in enumerate(examples):
        by_label.setdefault(label, []).append(i)

    classes = dict(base.classes) if base else {}
    for label, members in by_label.items():
        centroid = matrix.rows[members].mean(axis=0)
        classes[label] = {
            matrix.vocab[j]: float(centroid[j]) for j in np.nonzero(centroid)[0]
        }
    idf = dict(base.idf) if base else {}
    idf.update({matrix.vocab[j]: float(idf_values[j]) for j in range(len(matrix.vocab))})
    return MockModel(classes=classes, idf=idf, seed=hp.seed)


# ---------------------------------------------------------------------------
# Hashed-token embeddings (mock stand-in for sentence embeddings)


def embed_hashed(texts: Sequence[str], dim: int = DEFAULT_EMBEDDING_DIM) -> np.ndarray:
    """Deterministic signed token-hash vectors, L2-normalized per row."""
    out = np.zeros((len(texts), dim), dtype=np.float64)
    for i, text in enumerate(texts):
        for token in clustering.tokenize(text):
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:8], "big") % dim
            sign = 1.0 if digest[8] % 2 == 0 else -1.0
            out[i, bucket] += sign
    norms = np.linalg.norm(out, axis=1)
    nonzero = norms > 0
    out[nonzero] /= norms[nonzero, None]
    return out


# ---------------------------------------------------------------------------
# Exchange formats shared with the worker runtime


def format_predictions_csv(labels: Sequence[str]) -> bytes:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf)
    writer.writerow(["prediction"])
    for label in labels:
        writer.writerow([label])
    return buf.getvalue().encode("utf-8")


def parse_predictions_csv(data: bytes) -> list[str]:
    rows = list(csv.reader(io.StringIO(data.decode("utf-8"), newline="")))
    if not rows or rows[0] != ["prediction"]:
        raise PlaygroundError("predictions file lacks the 'prediction' header")
    return [row[0] for row in rows[1:]]


def format_embeddings(rows: np.ndarray) -> bytes:
    # 9 fixed decimals keeps the file bit-stable across platforms
    lines = [",".join(f"{v:.9f}" for v in row) for row in rows]
    return ("\n".join(lines) + "\n").encode("utf-8")


def build_adapter_zip(
    task: TaskDescriptor,
    base_model_id: str,
    architecture: str,
    model: MockModel,
    hp: HyperParams,
) -> bytes:
    """Adapter archive layout shared with the worker: manifest + model."""
    manifest = {
        "task_id": task.task_id,
        "label_schema": [{"name": l.name, "value": l.value} for l in task.labels],
        "base_model_id": base_model_id,
        "architecture": architecture,
        "hyperparams": {
            "learning_rate": hp.learning_rate,
            "epochs": hp.epochs,
            "seed": hp.seed,
        },
    }
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr(MANIFEST_FILE, json.dumps(manifest, indent=2, sort_keys=True))
        zf.writestr(MODEL_FILE, json.dumps(model.to_dict(), indent=2, sort_keys=True))
    return buf.getvalue()


def load_model_from_zip(archive: bytes) -> MockModel | None:
    """The centroid model stored in an adapter archive, if any."""
    try:
        zf = zipfile.ZipFile(io.BytesIO(archive))
    except zipfile.BadZipFile:
        return None
    with zf:
        if MODEL_FILE not in zf.namelist():
            return None
        return MockModel.from_dict(json.loads(zf.read(MODEL_FILE).decode("utf-8")))
