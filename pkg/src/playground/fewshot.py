"""Few-shot evaluation protocol: train on sampled subsets of increasing size,
predict on a fixed test set, and compare each size against the zero-shot run.

For every size s > 0 and repeat r, a Training and a Prediction action pair is
executed through the regular pipeline; the training attachment carries only
the s sampled rows. Subset sampling is without replacement with a seed derived
per (size, repeat), so a fixed request reproduces identical runs. A zero-shot
prediction always runs once as the significance reference, whether or not 0 is
among the requested sizes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from playground import executor, metrics, sheets
from playground.domain import (
    Action,
    ActionKind,
    ActionStatus,
    HyperParams,
    InputArity,
    InvalidValue,
    PredictionParams,
    SheetRef,
    TrainingParams,
    new_id,
    validate_params,
)
from playground.errors import PlaygroundError
from playground.mockmodel import MockModel, load_model_from_zip
from playground.sheets import ColumnBinding, SheetTable

DEFAULT_SIZES = (0, 5, 10, 20, 50, 100, 1000)


@dataclass(frozen=True)
class FewShotDataSpec:
    """Where one side of the protocol reads its text and gold labels."""

    text_column: str
    gold_column: str
    text2_column: str | None = None
    sheet_ref: SheetRef | None = None  # None = the project's sheet


@dataclass
class FewShotRequest:
    task_id: str
    train: FewShotDataSpec
    test: FewShotDataSpec
    sizes: tuple[int, ...] = DEFAULT_SIZES
    repeats: int = 3
    seed: int = 0
    adapter: dict[str, Any] = field(default_factory=dict)
    target_prefix: str = "fewshot"
    bootstrap_resamples: int = 10_000
    metric: metrics.MetricName = metrics.MetricName.ACCURACY


@dataclass
class RunCell:
    size: int
    repeat: int
    report: metrics.EvalReport
    training_action_id: str | None
    prediction_action_id: str


@dataclass
class SizeSummary:
    size: int
    mean_accuracy: float
    std_accuracy: float
    mean_macro_f1: float
    std_macro_f1: float
    p_value: float | None  # first repeat vs zero-shot
    p_values_per_repeat: list[float] = field(default_factory=list)
    significant: bool = False


@dataclass
class FewShotRun:
    sizes: tuple[int, ...]
    repeats: int
    seed: int
    zero_shot: metrics.EvalReport
    cells: list[RunCell]
    summary: list[SizeSummary]

    def to_dict(self) -> dict[str, Any]:
        return {
            "sizes": list(self.sizes),
            "repeats": self.repeats,
            "seed": self.seed,
            "zero_shot": self.zero_shot.to_dict(),
            "cells": [
                {
                    "size": c.size,
                    "repeat": c.repeat,
                    "report": c.report.to_dict(),
                    "training_action_id": c.training_action_id,
                    "prediction_action_id": c.prediction_action_id,
                }
                for c in self.cells
            ],
            "summary": [
                {
                    "size": s.size,
                    "mean_accuracy": s.mean_accuracy,
                    "std_accuracy": s.std_accuracy,
                    "mean_macro_f1": s.mean_macro_f1,
                    "std_macro_f1": s.std_macro_f1,
                    "p_value": s.p_value,
                    "p_values_per_repeat": s.p_values_per_repeat,
                    "significant": s.significant,
                }
                for s in self.summary
            ],
        }


def derive_seed(seed: int, size: int, repeat: int) -> int:
    digest = hashlib.sha256(f"{seed}:{size}:{repeat}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & 0x7FFF_FFFF_FFFF_FFFF


def _validate_request(request: FewShotRequest) -> None:
    sizes = list(request.sizes)
    if any(s < 0 for s in sizes):
        raise InvalidValue("sizes", "sizes must be nonnegative")
    if sorted(set(sizes)) != sizes:
        raise InvalidValue("sizes", "sizes must be strictly increasing")
    if request.repeats < 1:
        raise InvalidValue("repeats", "repeats must be >= 1")


def run_protocol(service, user_id: str, project_id: str, request: FewShotRequest) -> FewShotRun:
    from playground.service import InsufficientTrainingData

    _validate_request(request)
    project = service.get_project(user_id, project_id)
    task = service.registry.task(request.task_id)

    # Resolve the adapter with the same defaulting as a prediction action.
    raw = dict(request.adapter)
    raw.update(
        {
            "task_id": request.task_id,
            "text_column": request.test.text_column,
            "text2_column": request.test.text2_column,
            "gold_column": request.test.gold_column,
        }
    )
    base_params = validate_params(
        ActionKind.PREDICTION, raw, service.registry.tasks(), service.registry.scoped(project_id)
    )
    assert isinstance(base_params, PredictionParams)
    adapter = base_params.adapter

    train_ref = request.train.sheet_ref or project.sheet_ref
    test_ref = request.test.sheet_ref or project.sheet_ref
    train_table = sheets.load_table(train_ref)
    test_table = sheets.load_table(test_ref)

    sheets.validate_labels(train_table, request.train.gold_column, task.labels)
    sheets.validate_labels(test_table, request.test.gold_column, task.labels)
    train_binding = ColumnBinding(
        text=request.train.text_column,
        text2=request.train.text2_column,
        gold=request.train.gold_column,
    )
    train_binding.validate(train_table, task.input_arity)
    test_binding = ColumnBinding(
        text=request.test.text_column,
        text2=request.test.text2_column,
        gold=request.test.gold_column,
    )
    test_binding.validate(test_table, task.input_arity)

    train_gold = train_table.column_values(request.train.gold_column)
    labeled_rows = [i for i, g in enumerate(train_gold) if g != ""]
    positive_sizes = [s for s in request.sizes if s > 0]
    for s in positive_sizes:
        if s > len(labeled_rows):
            raise InsufficientTrainingData(s, len(labeled_rows))

    test_gold = test_table.column_values(request.test.gold_column)
    scored_rows = [i for i, g in enumerate(test_gold) if g != ""]
    gold_scored = [test_gold[i] for i in scored_rows]

    # Zero-shot reference run (size 0, exactly once, no training job).
    zero_action, zero_preds = _run_prediction(
        service,
        project,
        task,
        base_params,
        test_table,
        test_ref,
        target_column=f"{request.target_prefix}_s0",
        name=f"{request.target_prefix} zero-shot",
        model=None,
    )
    zero_report = zero_action.result
    zero_scored = [zero_preds[i] for i in scored_rows]

    cells: list[RunCell] = []
    if 0 in request.sizes:
        cells.append(
            RunCell(
                size=0,
                repeat=1,
                report=zero_report,
                training_action_id=None,
                prediction_action_id=zero_action.id,
            )
        )

    preds_by_size: dict[int, list[list[str]]] = {}
    for size in positive_sizes:
        preds_by_size[size] = []
        for repeat in range(1, request.repeats + 1):
            run_seed = derive_seed(request.seed, size, repeat)
            rng = np.random.default_rng(run_seed)
            chosen = sorted(int(i) for i in rng.choice(labeled_rows, size=size, replace=False))
            subset = SheetTable(
                columns=list(train_table.columns),
                rows=[list(train_table.rows[i]) for i in chosen],
            )
            train_action, model = _run_training(
                service,
                project,
                task,
                adapter,
                request.train,
                subset,
                hp=HyperParams(seed=run_seed),
                name=f"{request.target_prefix} train s{size} r{repeat}",
            )
            predict_action, preds = _run_prediction(
                service,
                project,
                task,
                base_params,
                test_table,
                test_ref,
                target_column=f"{request.target_prefix}_s{size}_r{repeat}",
                name=f"{request.target_prefix} predict s{size} r{repeat}",
                model=model,
            )
            preds_by_size[size].append([preds[i] for i in scored_rows])
            cells.append(
                RunCell(
                    size=size,
                    repeat=repeat,
                    report=predict_action.result,
                    training_action_id=train_action.id,
                    prediction_action_id=predict_action.id,
                )
            )

    summary: list[SizeSummary] = []
    if 0 in request.sizes:
        summary.append(
            SizeSummary(
                size=0,
                mean_accuracy=zero_report.accuracy or 0.0,
                std_accuracy=0.0,
                mean_macro_f1=zero_report.macro_f1 or 0.0,
                std_macro_f1=0.0,
                p_value=None,
            )
        )
    for size in positive_sizes:
        reports = [c.report for c in cells if c.size == size]
        accs = [r.accuracy or 0.0 for r in reports]
        f1s = [r.macro_f1 or 0.0 for r in reports]
        p_values = [
            metrics.paired_bootstrap(
                run_preds,
                zero_scored,
                gold_scored,
                metric=request.metric,
                B=request.bootstrap_resamples,
                seed=derive_seed(request.seed, size, 0),
                labels=list(task.label_values),
            ).p_value
            for run_preds in preds_by_size[size]
        ]
        summary.append(
            SizeSummary(
                size=size,
                mean_accuracy=_mean(accs),
                std_accuracy=_std(accs),
                mean_macro_f1=_mean(f1s),
                std_macro_f1=_std(f1s),
                p_value=p_values[0],
                p_values_per_repeat=p_values,
                significant=p_values[0] < 0.05,
            )
        )

    return FewShotRun(
        sizes=tuple(request.sizes),
        repeats=request.repeats,
        seed=request.seed,
        zero_shot=zero_report,
        cells=cells,
        summary=summary,
    )


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def _std(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    m = _mean(values)
    return math.sqrt(sum((v - m) ** 2 for v in values) / (len(values) - 1))


def _run_prediction(
    service,
    project,
    task,
    base_params: PredictionParams,
    test_table: SheetTable,
    test_ref: SheetRef,
    target_column: str,
    name: str,
    model: MockModel | None,
) -> tuple[Action, list[str]]:
    action = Action(
        id=new_id(),
        project_id=project.id,
        name=name,
        kind=ActionKind.PREDICTION,
        params=base_params,
        target_column=target_column,
    )
    service.storage.save_action(action)
    service._submit_worker_job(
        action, project, override_model=model, table=test_table, sheet_ref=test_ref
    )
    final = executor.wait_until_terminal(service.manager, action.id, timeout=300.0, interval=0.01)
    service.storage.save_action(final)
    if final.status is not ActionStatus.COMPLETED:
        raise PlaygroundError(f"few-shot prediction failed: {final.error}")
    preds = sheets.load_table(test_ref).column_values(target_column)
    return final, preds


def _run_training(
    service,
    project,
    task,
    adapter,
    train_spec: FewShotDataSpec,
    subset: SheetTable,
    hp: HyperParams,
    name: str,
) -> tuple[Action, MockModel]:
    params = TrainingParams(
        task_id=task.task_id,
        adapter=adapter,
        text_column=train_spec.text_column,
        gold_column=train_spec.gold_column,
        text2_column=train_spec.text2_column,
        hyperparams=hp,
    )
    action = Action(
        id=new_id(),
        project_id=project.id,
        name=name,
        kind=ActionKind.TRAINING,
        params=params,
        target_column=None,
    )
    service.storage.save_action(action)
    service._submit_worker_job(action, project, override_model=None, table=subset)
    final = executor.wait_until_terminal(service.manager, action.id, timeout=300.0, interval=0.01)
    service.storage.save_action(final)
    if final.status is not ActionStatus.COMPLETED:
        raise PlaygroundError(f"few-shot training failed: {final.error}")
    artifact = executor.collect_artifact(final)
    model = load_model_from_zip(_read_bytes(artifact.path))
    if model is None:
        raise PlaygroundError("training artifact lacks a model")
    return final, model


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()
