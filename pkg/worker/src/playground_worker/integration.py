"""Real-model execution (feature-flagged; never part of the hermetic suite).

Loads a sequence-classification transformer from a *local* path given as the
adapter's base_model_id, freezes the encoder, and trains only the
classification head: a parameter-efficient stand-in when no adapter library
is installed. Requires the `integration` extra (torch + transformers) and
local model weights; there is no network download path here.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path
from typing import Any, Sequence

from playground_worker.mock import WorkerError


def _require_runtime():
    try:
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer
    except ImportError as exc:
        raise WorkerError(
            "integration mode needs the 'integration' extra (torch, transformers); "
            f"import failed: {exc}"
        )
    return torch, AutoModelForSequenceClassification, AutoTokenizer


def _load_local_model(spec: dict[str, Any], num_labels: int):
    torch, AutoModel, AutoTokenizer = _require_runtime()
    base = str((spec.get("adapter") or {}).get("base_model_id", ""))
    if not base or not Path(base).exists():
        raise WorkerError(
            f"integration mode needs a local model directory as base_model_id, got {base!r}"
        )
    tokenizer = AutoTokenizer.from_pretrained(base)
    model = AutoModel.from_pretrained(base, num_labels=num_labels)
    return torch, tokenizer, model


def _batches(items: Sequence, size: int = 16):
    for i in range(0, len(items), size):
        yield items[i : i + size]


def predict(spec: dict[str, Any], texts: Sequence[str]) -> list[str]:
    labels = [l["value"] for l in spec["labels"]]
    torch, tokenizer, model = _load_local_model(spec, num_labels=len(labels))
    model.eval()
    out: list[str] = []
    with torch.no_grad():
        for batch in _batches(list(texts)):
            encoded = tokenizer(list(batch), truncation=True, padding=True, return_tensors="pt")
            logits = model(**encoded).logits
            out.extend(labels[int(i)] for i in logits.argmax(dim=-1))
    return out


def train(
    spec: dict[str, Any],
    examples: Sequence[tuple[str, str]],
    learning_rate: float,
    epochs: int,
    seed: int,
) -> bytes:
    labels = [l["value"] for l in spec["labels"]]
    label_index = {v: i for i, v in enumerate(labels)}
    unknown = sorted({g for _, g in examples if g not in label_index})
    if unknown:
        raise WorkerError(f"gold labels outside the task schema: {unknown}")

    torch, tokenizer, model = _load_local_model(spec, num_labels=len(labels))
    torch.manual_seed(seed)

    # adapter-style parameter efficiency: only the classification head trains
    head_params = []
    for name, param in model.named_parameters():
        trainable = "classifier" in name or "score" in name
        param.requires_grad = trainable
        if trainable:
            head_params.append(param)
    if not head_params:
        raise WorkerError("model has no classification head parameters to train")

    optimizer = torch.optim.AdamW(head_params, lr=learning_rate)
    loss_fn = torch.nn.CrossEntropyLoss()
    model.train()
    for _ in range(epochs):
        for batch in _batches(list(examples)):
            texts = [t for t, _ in batch]
            targets = torch.tensor([label_index[g] for _, g in batch])
            encoded = tokenizer(texts, truncation=True, padding=True, return_tensors="pt")
            optimizer.zero_grad()
            logits = model(**encoded).logits
            loss = loss_fn(logits, targets)
            loss.backward()
            optimizer.step()

    adapter = spec.get("adapter") or {}
    manifest = {
        "task_id": str(spec["task_id"]),
        "label_schema": [{"name": l["name"], "value": l["value"]} for l in spec["labels"]],
        "base_model_id": str(adapter.get("base_model_id", "")),
        "architecture": str(adapter.get("architecture", "pfeiffer")),
        "hyperparams": {"learning_rate": learning_rate, "epochs": epochs, "seed": seed},
    }
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("adapter_manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            model.save_pretrained(tmp)
            tokenizer.save_pretrained(tmp)
            for path in sorted(Path(tmp).rglob("*")):
                if path.is_file():
                    zf.write(path, f"model/{path.relative_to(tmp)}")
    return buf.getvalue()


def embed(spec: dict[str, Any], texts: Sequence[str]):
    import numpy as np

    torch, tokenizer, model = _load_local_model(spec, num_labels=2)
    base = getattr(model, model.base_model_prefix)
    base.eval()
    rows = []
    with torch.no_grad():
        for batch in _batches(list(texts)):
            encoded = tokenizer(list(batch), truncation=True, padding=True, return_tensors="pt")
            hidden = base(**encoded).last_hidden_state
            mask = encoded["attention_mask"].unsqueeze(-1)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1)
            rows.append(pooled.numpy())
    return np.concatenate(rows, axis=0)
