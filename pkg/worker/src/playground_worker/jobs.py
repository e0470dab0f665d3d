"""Job entrypoints invoked by generated scripts.

Each entrypoint receives the scratch directory, reads job_spec.json and the
input attachment, writes the output files named by the spec, and returns a
process exit code (0 = done; anything else fails the job with stderr as the
error channel).
"""

from __future__ import annotations

import csv
import json
import sys
import traceback
from pathlib import Path
from typing import Any

from playground_worker.mock import (
    MockModel,
    WorkerError,
    build_adapter_zip,
    embed_hashed,
    format_embeddings,
    format_predictions_csv,
    mock_classify,
    mock_train,
)


def _load_spec(scratch: Path) -> dict[str, Any]:
    spec_path = scratch / "job_spec.json"
    if not spec_path.exists():
        raise WorkerError(f"missing job spec: {spec_path}")
    with open(spec_path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _load_input(scratch: Path, spec: dict[str, Any]):
    input_path = scratch / spec.get("input_file", "input.csv")
    if not input_path.exists():
        raise WorkerError(f"missing input file: {input_path}")
    with open(input_path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise WorkerError("input file is empty")
    header = rows[0]
    if "text" not in header:
        raise WorkerError("input file lacks a 'text' column")
    text_i = header.index("text")
    text2_i = header.index("text2") if "text2" in header else None
    gold_i = header.index("gold") if "gold" in header else None
    items: list[tuple[str, str | None]] = []
    gold: list[str] | None = [] if gold_i is not None else None
    for row in rows[1:]:
        items.append((row[text_i], row[text2_i] if text2_i is not None else None))
        if gold is not None:
            gold.append(row[gold_i])
    return items, gold


def _joined(items):
    return [t if t2 is None else f"{t} {t2}" for t, t2 in items]


def run_prediction(scratch_dir: str) -> int:
    """Write one label per input row; mock mode matches the backend's
    in-process classifier byte-for-byte."""
    try:
        scratch = Path(scratch_dir)
        spec = _load_spec(scratch)
        items, _ = _load_input(scratch, spec)
        out_name = spec["output_files"]["predictions"]
        if spec.get("mock", True):
            model = MockModel.from_dict(spec["model"]) if spec.get("model") else None
            labels = mock_classify(items, spec["labels"], bool(spec.get("pair_task")), model)
        else:
            from playground_worker import integration

            labels = integration.predict(spec, _joined(items))
        (scratch / out_name).write_bytes(format_predictions_csv(labels))
        return 0
    except WorkerError as exc:
        print(f"prediction job failed: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1


def run_training(scratch_dir: str) -> int:
    """Train on labeled rows and write a re-registerable adapter archive."""
    try:
        scratch = Path(scratch_dir)
        spec = _load_spec(scratch)
        items, gold = _load_input(scratch, spec)
        if gold is None:
            raise WorkerError("training input lacks a gold column")
        examples = [(j, g) for j, g in zip(_joined(items), gold) if g != ""]
        if not examples:
            raise WorkerError("empty training set")

        hp = spec.get("hyperparams") or {}
        learning_rate = float(hp.get("learning_rate", 1e-4))
        epochs = int(hp.get("epochs", 3))
        seed = int(hp.get("seed", 0))
        adapter = spec.get("adapter") or {}
        out_name = spec["output_files"]["adapter"]

        if spec.get("mock", True):
            model = mock_train(examples, seed=seed)
            archive = build_adapter_zip(
                task_id=str(spec["task_id"]),
                labels=spec["labels"],
                base_model_id=str(adapter.get("base_model_id", "mock-base")),
                architecture=str(adapter.get("architecture", "pfeiffer")),
                model=model,
                learning_rate=learning_rate,
                epochs=epochs,
                seed=seed,
            )
        else:
            from playground_worker import integration

            archive = integration.train(spec, examples, learning_rate, epochs, seed)
        (scratch / out_name).write_bytes(archive)
        return 0
    except WorkerError as exc:
        print(f"training job failed: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1


def run_embedding(scratch_dir: str) -> int:
    """Write one dense vector per input row in the exchange format."""
    try:
        scratch = Path(scratch_dir)
        spec = _load_spec(scratch)
        items, _ = _load_input(scratch, spec)
        out_name = spec["output_files"]["embeddings"]
        dim = int(spec.get("embedding_dim", 64))
        if spec.get("mock", True):
            vectors = embed_hashed(_joined(items), dim)
        else:
            from playground_worker import integration

            vectors = integration.embed(spec, _joined(items))
        (scratch / out_name).write_bytes(format_embeddings(vectors))
        return 0
    except WorkerError as exc:
        print(f"embedding job failed: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1
