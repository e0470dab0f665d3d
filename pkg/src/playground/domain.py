"""Core domain types, the action lifecycle state machine, and parameter validation.

Everything here is a plain value type or a pure function; no I/O, no shared
mutable state.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Iterable, Mapping, Protocol, Sequence

from playground.errors import PlaygroundError


def new_id() -> str:
    return uuid.uuid4().hex


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


# ---------------------------------------------------------------------------
# Enums


class InputArity(str, Enum):
    SINGLE = "single"
    PAIR = "pair"


class Architecture(str, Enum):
    PFEIFFER = "pfeiffer"
    HOULSBY = "houlsby"


class AdapterSource(str, Enum):
    HUB = "hub"
    USER_UPLOAD = "user_upload"


class ActionKind(str, Enum):
    PREDICTION = "Prediction"
    TRAINING = "Training"
    CLUSTERING = "Clustering"


class ActionStatus(str, Enum):
    QUEUED = "Queued"
    RUNNING = "Running"
    COMPLETED = "Completed"
    FAILED = "Failed"


TERMINAL_STATUSES = frozenset({ActionStatus.COMPLETED, ActionStatus.FAILED})


class EventKind(str, Enum):
    SUBMIT = "Submit"
    START = "Start"
    SUCCEED = "Succeed"
    FAIL = "Fail"


class ClusterAlgorithm(str, Enum):
    KMEANS = "kmeans"
    HIERARCHICAL = "hierarchical"


class Representation(str, Enum):
    TFIDF = "tfidf"
    SBERT = "sbert"


class Linkage(str, Enum):
    SINGLE = "single"
    COMPLETE = "complete"
    AVERAGE = "average"


# ---------------------------------------------------------------------------
# Value types


@dataclass(frozen=True)
class LabelSpec:
    """One entry of a task's label schema: display name plus the string stored in cells."""

    name: str
    value: str


@dataclass(frozen=True)
class TaskDescriptor:
    task_id: str
    display_name: str
    description: str
    input_arity: InputArity
    labels: tuple[LabelSpec, ...]

    def __post_init__(self) -> None:
        if len(self.labels) < 2:
            raise ValueError(f"task {self.task_id!r} needs at least 2 labels")
        names = [l.name for l in self.labels]
        if len(set(names)) != len(names):
            raise ValueError(f"task {self.task_id!r} has duplicate label names")

    @property
    def label_values(self) -> tuple[str, ...]:
        return tuple(l.value for l in self.labels)


@dataclass(frozen=True)
class AdapterDescriptor:
    """Identifies one pretrained classifier head in the registry."""

    task_id: str
    dataset_id: str
    architecture: Architecture
    base_model_id: str
    source: AdapterSource = AdapterSource.HUB
    locator: str = ""

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.task_id, self.dataset_id, self.architecture.value, self.base_model_id)

    @property
    def sort_key(self) -> tuple[str, str, str]:
        return (self.dataset_id, self.architecture.value, self.base_model_id)


@dataclass(frozen=True)
class SheetRef:
    """Pointer to a tabular data source; csv_file is the reference backend."""

    backend: str  # "csv_file" | "remote_sheet"
    locator: str
    worksheet: str | None = None


@dataclass(frozen=True)
class Project:
    id: str
    name: str
    sheet_ref: SheetRef
    owner_id: str
    created_at: datetime


@dataclass(frozen=True)
class HyperParams:
    learning_rate: float = 1e-4
    epochs: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.learning_rate < 1:
            raise ValueError("learning_rate must be in (0, 1)")
        if not 1 <= self.epochs <= 100:
            raise ValueError("epochs must be in [1, 100]")


@dataclass(frozen=True)
class ActionEvent:
    """A lifecycle event; Succeed carries a result, Fail carries a message."""

    kind: EventKind
    result: Any = None
    message: str | None = None

    @classmethod
    def submit(cls) -> "ActionEvent":
        return cls(EventKind.SUBMIT)

    @classmethod
    def start(cls) -> "ActionEvent":
        return cls(EventKind.START)

    @classmethod
    def succeed(cls, result: Any) -> "ActionEvent":
        return cls(EventKind.SUCCEED, result=result)

    @classmethod
    def fail(cls, message: str) -> "ActionEvent":
        return cls(EventKind.FAIL, message=message)


@dataclass
class Action:
    """One computational unit within a project."""

    id: str
    project_id: str
    name: str
    kind: ActionKind
    params: "ActionParams"
    target_column: str | None
    status: ActionStatus = ActionStatus.QUEUED
    result: Any = None
    error: str | None = None
    created_at: datetime = field(default_factory=utcnow)
    finished_at: datetime | None = None

    def apply(self, event: ActionEvent) -> None:
        """Advance the lifecycle in place; raises IllegalTransition on bad edges."""
        self.status = transition(self.status, event)
        if event.kind is EventKind.SUCCEED:
            self.result = event.result
            self.finished_at = utcnow()
        elif event.kind is EventKind.FAIL:
            self.error = event.message or "unknown error"
            self.finished_at = utcnow()


# ---------------------------------------------------------------------------
# State machine


class IllegalTransition(PlaygroundError):
    def __init__(self, status: ActionStatus, event: ActionEvent):
        super().__init__(f"event {event.kind.value} not allowed in status {status.value}")
        self.status = status
        self.event = event


_EDGES = {
    (ActionStatus.QUEUED, EventKind.START): ActionStatus.RUNNING,
    (ActionStatus.RUNNING, EventKind.SUCCEED): ActionStatus.COMPLETED,
    (ActionStatus.RUNNING, EventKind.FAIL): ActionStatus.FAILED,
}


def transition(status: ActionStatus, event: ActionEvent) -> ActionStatus:
    """Return the next status for a lifecycle event, rejecting every other edge."""
    nxt = _EDGES.get((status, event.kind))
    if nxt is None:
        raise IllegalTransition(status, event)
    return nxt


# ---------------------------------------------------------------------------
# Validated action parameters


class UnknownTask(PlaygroundError):
    pass


class UnknownAdapter(PlaygroundError):
    pass


class NoAdapterForTask(PlaygroundError):
    pass


class MissingField(PlaygroundError):
    def __init__(self, name: str):
        super().__init__(f"missing required field: {name}")
        self.name = name


class InvalidValue(PlaygroundError):
    def __init__(self, name: str, detail: str = ""):
        msg = f"invalid value for field: {name}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.name = name


@dataclass(frozen=True)
class PredictionParams:
    task_id: str
    adapter: AdapterDescriptor
    text_column: str
    text2_column: str | None = None
    gold_column: str | None = None
    metadata_columns: tuple[str, ...] = ()


@dataclass(frozen=True)
class TrainingParams:
    task_id: str
    adapter: AdapterDescriptor
    text_column: str
    gold_column: str
    text2_column: str | None = None
    hyperparams: HyperParams = HyperParams()


@dataclass(frozen=True)
class ClusteringParams:
    algorithm: ClusterAlgorithm
    representation: Representation
    k: int
    text_column: str
    linkage: Linkage = Linkage.AVERAGE
    seed: int = 0


ActionParams = PredictionParams | TrainingParams | ClusteringParams


class AdapterRegistry(Protocol):
    """What validate_params needs from a registry: adapters per task."""

    def adapters_for(self, task_id: str) -> Sequence[AdapterDescriptor]: ...


def resolve_default_adapter(task_id: str, registry: AdapterRegistry) -> AdapterDescriptor:
    """Pick the task's default adapter: lexicographic minimum over
    (dataset_id, architecture, base_model_id), independent of registry order."""
    candidates = list(registry.adapters_for(task_id))
    if not candidates:
        raise NoAdapterForTask(f"no adapter registered for task {task_id!r}")
    return min(candidates, key=lambda a: a.sort_key)


def _require_str(raw: Mapping[str, Any], name: str) -> str:
    if name not in raw or raw[name] in (None, ""):
        raise MissingField(name)
    value = raw[name]
    if not isinstance(value, str):
        raise InvalidValue(name, "expected string")
    return value


def _optional_str(raw: Mapping[str, Any], name: str) -> str | None:
    value = raw.get(name)
    if value in (None, ""):
        return None
    if not isinstance(value, str):
        raise InvalidValue(name, "expected string")
    return value


def _find_task(task_id: str, catalog: Iterable[TaskDescriptor]) -> TaskDescriptor:
    for task in catalog:
        if task.task_id == task_id:
            return task
    raise UnknownTask(f"task {task_id!r} not in catalog")


def _resolve_adapter(
    raw: Mapping[str, Any], task_id: str, registry: AdapterRegistry
) -> AdapterDescriptor:
    dataset_id = _optional_str(raw, "dataset_id")
    architecture = _optional_str(raw, "architecture")
    base_model_id = _optional_str(raw, "base_model_id")
    if architecture is not None and architecture not in {a.value for a in Architecture}:
        raise InvalidValue("architecture", f"unknown architecture {architecture!r}")
    if dataset_id is None and architecture is None and base_model_id is None:
        return resolve_default_adapter(task_id, registry)
    matches = [
        a
        for a in registry.adapters_for(task_id)
        if (dataset_id is None or a.dataset_id == dataset_id)
        and (architecture is None or a.architecture.value == architecture)
        and (base_model_id is None or a.base_model_id == base_model_id)
    ]
    if not matches:
        raise UnknownAdapter(
            f"no adapter for task {task_id!r} matching "
            f"dataset={dataset_id!r} architecture={architecture!r} base_model={base_model_id!r}"
        )
    return min(matches, key=lambda a: a.sort_key)


def _hyperparams_from(raw: Mapping[str, Any]) -> HyperParams:
    defaults = HyperParams()
    lr = raw.get("learning_rate", defaults.learning_rate)
    epochs = raw.get("epochs", defaults.epochs)
    seed = raw.get("seed", defaults.seed)
    try:
        lr = float(lr)
    except (TypeError, ValueError):
        raise InvalidValue("learning_rate", "not a number")
    if isinstance(epochs, bool) or not isinstance(epochs, int):
        try:
            as_float = float(epochs)
        except (TypeError, ValueError):
            raise InvalidValue("epochs", "not an integer")
        if as_float != int(as_float):
            raise InvalidValue("epochs", "not an integer")
        epochs = int(as_float)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise InvalidValue("seed", "not an integer")
    if not 0 < lr < 1:
        raise InvalidValue("learning_rate", "must be in (0, 1)")
    if not 1 <= epochs <= 100:
        raise InvalidValue("epochs", "must be in [1, 100]")
    return HyperParams(learning_rate=lr, epochs=epochs, seed=seed)


def params_to_raw(params: ActionParams) -> dict[str, Any]:
    """Flatten a validated record back into the raw key-value form accepted
    by validate_params (used for persistence and for idempotence checks)."""
    if isinstance(params, PredictionParams):
        raw: dict[str, Any] = {
            "task_id": params.task_id,
            "dataset_id": params.adapter.dataset_id,
            "architecture": params.adapter.architecture.value,
            "base_model_id": params.adapter.base_model_id,
            "text_column": params.text_column,
        }
        if params.text2_column:
            raw["text2_column"] = params.text2_column
        if params.gold_column:
            raw["gold_column"] = params.gold_column
        if params.metadata_columns:
            raw["metadata_columns"] = list(params.metadata_columns)
        return raw
    if isinstance(params, TrainingParams):
        raw = {
            "task_id": params.task_id,
            "dataset_id": params.adapter.dataset_id,
            "architecture": params.adapter.architecture.value,
            "base_model_id": params.adapter.base_model_id,
            "text_column": params.text_column,
            "gold_column": params.gold_column,
            "learning_rate": params.hyperparams.learning_rate,
            "epochs": params.hyperparams.epochs,
            "seed": params.hyperparams.seed,
        }
        if params.text2_column:
            raw["text2_column"] = params.text2_column
        return raw
    if isinstance(params, ClusteringParams):
        return {
            "algorithm": params.algorithm.value,
            "representation": params.representation.value,
            "k": params.k,
            "text_column": params.text_column,
            "linkage": params.linkage.value,
            "seed": params.seed,
        }
    raise TypeError(f"unsupported params type: {type(params)!r}")


def validate_params(
    kind: ActionKind,
    raw_params: Mapping[str, Any],
    catalog: Sequence[TaskDescriptor],
    registry: AdapterRegistry,
) -> ActionParams:
    """Turn a raw key-value map into a fully-defaulted, typed parameter record.

    Idempotent: feeding the output (via params_to_raw) back in yields an
    identical record.
    """
    if kind is ActionKind.CLUSTERING:
        algorithm = _require_str(raw_params, "algorithm")
        if algorithm not in {a.value for a in ClusterAlgorithm}:
            raise InvalidValue("algorithm", f"unknown algorithm {algorithm!r}")
        representation = _require_str(raw_params, "representation")
        if representation not in {r.value for r in Representation}:
            raise InvalidValue("representation", f"unknown representation {representation!r}")
        k = raw_params.get("k")
        if k is None:
            raise MissingField("k")
        if isinstance(k, bool) or not isinstance(k, int):
            raise InvalidValue("k", "expected integer")
        if k < 1:
            raise InvalidValue("k", "must be >= 1")
        linkage = raw_params.get("linkage", Linkage.AVERAGE.value)
        if linkage not in {l.value for l in Linkage}:
            raise InvalidValue("linkage", f"unknown linkage {linkage!r}")
        seed = raw_params.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise InvalidValue("seed", "expected integer")
        return ClusteringParams(
            algorithm=ClusterAlgorithm(algorithm),
            representation=Representation(representation),
            k=k,
            text_column=_require_str(raw_params, "text_column"),
            linkage=Linkage(linkage),
            seed=seed,
        )

    task_id = _require_str(raw_params, "task_id")
    task = _find_task(task_id, catalog)
    adapter = _resolve_adapter(raw_params, task_id, registry)
    text_column = _require_str(raw_params, "text_column")
    text2_column = _optional_str(raw_params, "text2_column")
    if task.input_arity is InputArity.PAIR and text2_column is None:
        raise MissingField("text2_column")
    if task.input_arity is InputArity.SINGLE and text2_column is not None:
        raise InvalidValue("text2_column", "task takes a single text column")

    metadata = raw_params.get("metadata_columns", ())
    if isinstance(metadata, str):
        raise InvalidValue("metadata_columns", "expected list of column names")
    metadata_columns = tuple(metadata)

    if kind is ActionKind.PREDICTION:
        return PredictionParams(
            task_id=task_id,
            adapter=adapter,
            text_column=text_column,
            text2_column=text2_column,
            gold_column=_optional_str(raw_params, "gold_column"),
            metadata_columns=metadata_columns,
        )
    if kind is ActionKind.TRAINING:
        return TrainingParams(
            task_id=task_id,
            adapter=adapter,
            text_column=text_column,
            gold_column=_require_str(raw_params, "gold_column"),
            text2_column=text2_column,
            hyperparams=_hyperparams_from(raw_params),
        )
    raise InvalidValue("kind", f"unsupported action kind {kind!r}")


def with_adapter(params: ActionParams, adapter: AdapterDescriptor) -> ActionParams:
    """Copy of params pointing at a different adapter (Prediction/Training only)."""
    if isinstance(params, (PredictionParams, TrainingParams)):
        return replace(params, adapter=adapter)
    raise TypeError("clustering params carry no adapter")


def adapter_to_dict(adapter: AdapterDescriptor) -> dict[str, str]:
    return {
        "task_id": adapter.task_id,
        "dataset_id": adapter.dataset_id,
        "architecture": adapter.architecture.value,
        "base_model_id": adapter.base_model_id,
        "source": adapter.source.value,
        "locator": adapter.locator,
    }


def adapter_from_dict(data: Mapping[str, Any]) -> AdapterDescriptor:
    return AdapterDescriptor(
        task_id=data["task_id"],
        dataset_id=data["dataset_id"],
        architecture=Architecture(data["architecture"]),
        base_model_id=data["base_model_id"],
        source=AdapterSource(data.get("source", "hub")),
        locator=data.get("locator", ""),
    )


def params_to_dict(params: ActionParams) -> dict[str, Any]:
    """Full-fidelity serialization (keeps adapter source/locator), unlike
    params_to_raw which is the validate_params input form."""
    if isinstance(params, PredictionParams):
        return {
            "task_id": params.task_id,
            "adapter": adapter_to_dict(params.adapter),
            "text_column": params.text_column,
            "text2_column": params.text2_column,
            "gold_column": params.gold_column,
            "metadata_columns": list(params.metadata_columns),
        }
    if isinstance(params, TrainingParams):
        return {
            "task_id": params.task_id,
            "adapter": adapter_to_dict(params.adapter),
            "text_column": params.text_column,
            "gold_column": params.gold_column,
            "text2_column": params.text2_column,
            "hyperparams": {
                "learning_rate": params.hyperparams.learning_rate,
                "epochs": params.hyperparams.epochs,
                "seed": params.hyperparams.seed,
            },
        }
    if isinstance(params, ClusteringParams):
        return {
            "algorithm": params.algorithm.value,
            "representation": params.representation.value,
            "k": params.k,
            "text_column": params.text_column,
            "linkage": params.linkage.value,
            "seed": params.seed,
        }
    raise TypeError(f"unsupported params type: {type(params)!r}")


def params_from_dict(kind: ActionKind, data: Mapping[str, Any]) -> ActionParams:
    if kind is ActionKind.PREDICTION:
        return PredictionParams(
            task_id=data["task_id"],
            adapter=adapter_from_dict(data["adapter"]),
            text_column=data["text_column"],
            text2_column=data.get("text2_column"),
            gold_column=data.get("gold_column"),
            metadata_columns=tuple(data.get("metadata_columns", ())),
        )
    if kind is ActionKind.TRAINING:
        hp = data.get("hyperparams", {})
        return TrainingParams(
            task_id=data["task_id"],
            adapter=adapter_from_dict(data["adapter"]),
            text_column=data["text_column"],
            gold_column=data["gold_column"],
            text2_column=data.get("text2_column"),
            hyperparams=HyperParams(
                learning_rate=hp.get("learning_rate", 1e-4),
                epochs=hp.get("epochs", 3),
                seed=hp.get("seed", 0),
            ),
        )
    if kind is ActionKind.CLUSTERING:
        return ClusteringParams(
            algorithm=ClusterAlgorithm(data["algorithm"]),
            representation=Representation(data["representation"]),
            k=data["k"],
            text_column=data["text_column"],
            linkage=Linkage(data.get("linkage", "average")),
            seed=data.get("seed", 0),
        )
    raise TypeError(f"unsupported action kind: {kind!r}")
