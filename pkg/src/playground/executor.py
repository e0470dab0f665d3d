"""Dispatch rendered scripts plus data attachments to an execution backend,
track job lifecycle, and turn worker outputs into action results.

Three backends share one interface: an in-process mock (hermetic, instant),
a local subprocess runner that executes the generated script with the worker
runtime, and a thin HTTP client for a remote compute service. Writeback to the
sheet happens server-side after outputs are fetched, so sheet credentials
never travel to compute nodes.
"""

from __future__ import annotations

import csv
import io
import json
import os
import subprocess
import sys
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from playground import metrics, sheets
from playground.codegen import RenderedScript, get_template, render
from playground.domain import (
    Action,
    ActionEvent,
    ActionKind,
    ActionStatus,
    AdapterDescriptor,
    HyperParams,
    InputArity,
    LabelSpec,
    TaskDescriptor,
    utcnow,
)
from playground.errors import PlaygroundError
from playground.mockmodel import (
    MockModel,
    build_adapter_zip,
    embed_hashed,
    format_embeddings,
    format_predictions_csv,
    mock_classify,
    mock_train,
    parse_predictions_csv,
)
from playground.sheets import InputRecord

LOG_TAIL_LIMIT = 64 * 1024
DEFAULT_JOB_TIMEOUT = 30 * 60.0
POLL_INTERVAL = 2.0
POLL_MAX_INTERVAL = 30.0

PREDICTIONS_FILE = "predictions.csv"
ADAPTER_FILE = "adapter.zip"
EMBEDDINGS_FILE = "embeddings.txt"
INPUT_FILE = "input.csv"
JOB_SPEC_FILE = "job_spec.json"

BACKEND_ENV = "BACKEND"
REMOTE_URL_ENV = "REMOTE_BACKEND_URL"
REMOTE_TOKEN_ENV = "REMOTE_BACKEND_TOKEN"


class BackendUnavailable(PlaygroundError):
    pass


class AlreadyRunning(PlaygroundError):
    pass


class OutputMissing(PlaygroundError):
    pass


class NotCompleted(PlaygroundError):
    pass


class WrongKind(PlaygroundError):
    pass


class JobState(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


@dataclass(frozen=True)
class PollResult:
    state: JobState
    message: str = ""


class ArtifactKind(str, Enum):
    TRAINED_ADAPTER_ZIP = "trained_adapter_zip"
    PREDICTIONS_FILE = "predictions_file"
    EMBEDDINGS_FILE = "embeddings_file"


@dataclass(frozen=True)
class ArtifactRef:
    kind: ArtifactKind
    path: str
    size_bytes: int


@dataclass
class JobRecord:
    job_id: str
    action_id: str
    backend: str
    submitted_at: datetime
    finished_at: datetime | None = None
    log_tail: str = ""

    def append_log(self, text: str) -> None:
        self.log_tail = (self.log_tail + text)[-LOG_TAIL_LIMIT:]


class ExecutionBackend(Protocol):
    def submit(self, script: RenderedScript, attachments: Mapping[str, bytes]) -> str: ...

    def poll(self, job_id: str) -> PollResult: ...

    def fetch_outputs(self, job_id: str) -> dict[str, bytes]: ...


# ---------------------------------------------------------------------------
# Wire helpers shared by all backends


def build_input_csv(records: Sequence[InputRecord], gold: Sequence[str] | None = None) -> bytes:
    """Serialize inputs for a worker: text[,text2][,gold] columns."""
    pair = any(r.text2 is not None for r in records)
    header = ["text"] + (["text2"] if pair else []) + (["gold"] if gold is not None else [])
    buf = io.StringIO(newline="")
    writer = csv.writer(buf)
    writer.writerow(header)
    for i, r in enumerate(records):
        row = [r.text] + ([r.text2 or ""] if pair else [])
        if gold is not None:
            row.append(gold[i])
        writer.writerow(row)
    return buf.getvalue().encode("utf-8")


def parse_input_csv(data: bytes) -> tuple[list[InputRecord], list[str] | None]:
    rows = list(csv.reader(io.StringIO(data.decode("utf-8"), newline="")))
    if not rows:
        raise PlaygroundError("input attachment is empty")
    header = rows[0]
    records = []
    gold: list[str] | None = [] if "gold" in header else None
    text_i = header.index("text")
    text2_i = header.index("text2") if "text2" in header else None
    gold_i = header.index("gold") if "gold" in header else None
    for n, row in enumerate(rows[1:], start=1):
        records.append(
            InputRecord(
                index=n,
                text=row[text_i],
                text2=row[text2_i] if text2_i is not None else None,
            )
        )
        if gold is not None and gold_i is not None:
            gold.append(row[gold_i])
    return records, gold


def encode_job_spec(spec: Mapping[str, object]) -> bytes:
    return (json.dumps(spec, sort_keys=True, indent=2) + "\n").encode("utf-8")


def build_job_spec(
    kind: str,
    task: TaskDescriptor | None = None,
    adapter: AdapterDescriptor | None = None,
    hyperparams: HyperParams | None = None,
    model: MockModel | None = None,
    mock: bool = True,
    embedding_dim: int | None = None,
) -> dict[str, object]:
    spec: dict[str, object] = {
        "kind": kind,
        "mock": mock,
        "input_file": INPUT_FILE,
        "output_files": {
            "predict": {"predictions": PREDICTIONS_FILE},
            "train": {"adapter": ADAPTER_FILE},
            "embed": {"embeddings": EMBEDDINGS_FILE},
        }[kind],
    }
    if task is not None:
        spec["task_id"] = task.task_id
        spec["pair_task"] = task.input_arity is InputArity.PAIR
        spec["labels"] = [{"name": l.name, "value": l.value} for l in task.labels]
    if adapter is not None:
        spec["adapter"] = {
            "task_id": adapter.task_id,
            "dataset_id": adapter.dataset_id,
            "architecture": adapter.architecture.value,
            "base_model_id": adapter.base_model_id,
            "source": adapter.source.value,
            "locator": adapter.locator,
        }
    if hyperparams is not None:
        spec["hyperparams"] = {
            "learning_rate": hyperparams.learning_rate,
            "epochs": hyperparams.epochs,
            "seed": hyperparams.seed,
        }
    if model is not None:
        spec["model"] = model.to_dict()
    if embedding_dim is not None:
        spec["embedding_dim"] = embedding_dim
    return spec


def _task_from_spec(spec: Mapping[str, object]) -> TaskDescriptor:
    labels = tuple(LabelSpec(l["name"], l["value"]) for l in spec["labels"])  # type: ignore[index]
    return TaskDescriptor(
        task_id=str(spec["task_id"]),
        display_name=str(spec["task_id"]),
        description="",
        input_arity=InputArity.PAIR if spec.get("pair_task") else InputArity.SINGLE,
        labels=labels,
    )


# ---------------------------------------------------------------------------
# Backends


class MockExecutionBackend:
    """In-process backend that runs jobs with the mock model at submit time."""

    name = "mock"

    def __init__(self) -> None:
        self._jobs: dict[str, tuple[PollResult, dict[str, bytes]]] = {}
        self._lock = threading.Lock()

    def submit(self, script: RenderedScript, attachments: Mapping[str, bytes]) -> str:
        job_id = uuid.uuid4().hex
        try:
            outputs = self._run(attachments)
            result = PollResult(JobState.DONE)
        except PlaygroundError as exc:
            outputs = {}
            result = PollResult(JobState.FAILED, str(exc))
        with self._lock:
            self._jobs[job_id] = (result, outputs)
        return job_id

    def _run(self, attachments: Mapping[str, bytes]) -> dict[str, bytes]:
        if JOB_SPEC_FILE not in attachments:
            raise PlaygroundError("job spec attachment missing")
        spec = json.loads(attachments[JOB_SPEC_FILE].decode("utf-8"))
        kind = spec["kind"]
        records, gold = parse_input_csv(attachments[INPUT_FILE])
        texts = [(r.text, r.text2) if r.text2 is not None else r.text for r in records]
        if kind == "predict":
            task = _task_from_spec(spec)
            model = MockModel.from_dict(spec["model"]) if spec.get("model") else None
            labels = mock_classify(texts, task, model)
            return {PREDICTIONS_FILE: format_predictions_csv(labels)}
        if kind == "train":
            task = _task_from_spec(spec)
            hp_spec = spec.get("hyperparams") or {}
            hp = HyperParams(
                learning_rate=float(hp_spec.get("learning_rate", 1e-4)),
                epochs=int(hp_spec.get("epochs", 3)),
                seed=int(hp_spec.get("seed", 0)),
            )
            if gold is None:
                raise PlaygroundError("training input lacks a gold column")
            examples = [
                (t if isinstance(t, str) else f"{t[0]} {t[1]}", g)
                for t, g in zip(texts, gold)
                if g != ""
            ]
            model = mock_train(examples, base=None, hp=hp) if examples else None
            if model is None:
                raise PlaygroundError("empty training set")
            adapter = spec.get("adapter") or {}
            archive = build_adapter_zip(
                task,
                base_model_id=str(adapter.get("base_model_id", "mock-base")),
                architecture=str(adapter.get("architecture", "pfeiffer")),
                model=model,
                hp=hp,
            )
            return {ADAPTER_FILE: archive}
        if kind == "embed":
            dim = int(spec.get("embedding_dim", 64))
            vectors = embed_hashed([t if isinstance(t, str) else f"{t[0]} {t[1]}" for t in texts], dim)
            return {EMBEDDINGS_FILE: format_embeddings(vectors)}
        raise PlaygroundError(f"unknown job kind {kind!r}")

    def poll(self, job_id: str) -> PollResult:
        with self._lock:
            if job_id not in self._jobs:
                raise PlaygroundError(f"unknown job {job_id!r}")
            return self._jobs[job_id][0]

    def fetch_outputs(self, job_id: str) -> dict[str, bytes]:
        with self._lock:
            result, outputs = self._jobs[job_id]
        if result.state is not JobState.DONE:
            raise PlaygroundError("outputs are only available for done jobs")
        return dict(outputs)


class LocalSubprocessBackend:
    """Runs the rendered script with the local interpreter in a scratch dir."""

    name = "local"

    def __init__(self, work_dir: str | Path, python: str | None = None):
        self.work_dir = Path(work_dir)
        self.python = python or sys.executable
        self._jobs: dict[str, dict] = {}
        self._lock = threading.Lock()

    def submit(self, script: RenderedScript, attachments: Mapping[str, bytes]) -> str:
        job_id = uuid.uuid4().hex
        scratch = self.work_dir / job_id
        scratch.mkdir(parents=True, exist_ok=True)
        script_path = scratch / "script.py"
        script_path.write_text(script.source, encoding="utf-8")
        for name, data in attachments.items():
            (scratch / name).write_bytes(data)
        stderr_path = scratch / "stderr.log"
        stdout_path = scratch / "stdout.log"
        try:
            proc = subprocess.Popen(
                [self.python, str(script_path), str(scratch)],
                stdout=open(stdout_path, "wb"),
                stderr=open(stderr_path, "wb"),
                cwd=scratch,
            )
        except OSError as exc:
            raise BackendUnavailable(f"cannot spawn worker process: {exc}")
        with self._lock:
            self._jobs[job_id] = {
                "proc": proc,
                "scratch": scratch,
                "inputs": set(attachments) | {"script.py", "stderr.log", "stdout.log"},
                "final": None,
            }
        return job_id

    def poll(self, job_id: str) -> PollResult:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise PlaygroundError(f"unknown job {job_id!r}")
        if job["final"] is not None:
            return job["final"]
        rc = job["proc"].poll()
        if rc is None:
            return PollResult(JobState.RUNNING)
        if rc == 0:
            result = PollResult(JobState.DONE)
        else:
            tail = (job["scratch"] / "stderr.log").read_text(encoding="utf-8", errors="replace")
            result = PollResult(JobState.FAILED, tail[-LOG_TAIL_LIMIT:] or f"exit code {rc}")
        job["final"] = result
        return result

    def fetch_outputs(self, job_id: str) -> dict[str, bytes]:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise PlaygroundError(f"unknown job {job_id!r}")
        outputs = {}
        for path in Path(job["scratch"]).iterdir():
            if path.is_file() and path.name not in job["inputs"]:
                outputs[path.name] = path.read_bytes()
        return outputs


class RemoteHttpBackend:
    """Client for the documented submit/poll/fetch wire contract."""

    name = "remote"

    def __init__(self, base_url: str | None = None, token: str | None = None, client=None):
        self.base_url = (base_url or os.environ.get(REMOTE_URL_ENV, "")).rstrip("/")
        self.token = token if token is not None else os.environ.get(REMOTE_TOKEN_ENV, "")
        if not self.base_url:
            raise BackendUnavailable(f"remote backend requires {REMOTE_URL_ENV}")
        if client is None:
            import httpx

            client = httpx.Client(base_url=self.base_url, timeout=60.0)
        self._client = client

    def _headers(self) -> dict[str, str]:
        return {"Authorization": f"Bearer {self.token}"} if self.token else {}

    def submit(self, script: RenderedScript, attachments: Mapping[str, bytes]) -> str:
        files = [("script", ("script.py", script.source.encode("utf-8")))]
        files += [("attachments", (name, data)) for name, data in attachments.items()]
        try:
            response = self._client.post("/jobs", files=files, headers=self._headers())
        except Exception as exc:
            raise BackendUnavailable(f"remote submit failed: {exc}")
        if response.status_code != 200:
            raise BackendUnavailable(f"remote submit failed: HTTP {response.status_code}")
        return response.json()["job_id"]

    def poll(self, job_id: str) -> PollResult:
        response = self._client.get(f"/jobs/{job_id}", headers=self._headers())
        if response.status_code != 200:
            raise BackendUnavailable(f"remote poll failed: HTTP {response.status_code}")
        payload = response.json()
        return PollResult(JobState(payload["status"]), payload.get("message", ""))

    def fetch_outputs(self, job_id: str) -> dict[str, bytes]:
        response = self._client.get(f"/jobs/{job_id}", headers=self._headers())
        names = response.json().get("outputs", [])
        outputs = {}
        for name in names:
            r = self._client.get(f"/jobs/{job_id}/outputs/{name}", headers=self._headers())
            if r.status_code != 200:
                raise BackendUnavailable(f"remote fetch of {name!r} failed")
            outputs[name] = r.content
        return outputs


def backend_from_env(work_dir: str | Path) -> ExecutionBackend:
    """Pick a backend via the BACKEND env var (local|remote|mock)."""
    choice = os.environ.get(BACKEND_ENV, "mock").lower()
    if choice == "mock":
        return MockExecutionBackend()
    if choice == "local":
        return LocalSubprocessBackend(Path(work_dir) / "jobs")
    if choice == "remote":
        return RemoteHttpBackend()
    raise BackendUnavailable(f"unknown BACKEND value {choice!r}")


# ---------------------------------------------------------------------------
# Job lifecycle around actions


@dataclass
class FinalizeContext:
    """Everything needed to turn worker outputs into an action result."""

    task: TaskDescriptor | None = None
    sheet_ref: object | None = None
    target_column: str | None = None
    gold: list[str] | None = None
    report_seed: int = 0
    write_back: bool = True
    artifact_dir: Path | None = None
    n_inputs: int = 0


@dataclass
class _TrackedJob:
    record: JobRecord
    action: Action
    context: FinalizeContext
    lock: threading.Lock = field(default_factory=threading.Lock)
    deadline: float = 0.0


class JobManager:
    """Tracks one active job per action and finalizes results exactly once."""

    def __init__(
        self,
        backend: ExecutionBackend,
        backend_name: str | None = None,
        job_timeout: float = DEFAULT_JOB_TIMEOUT,
    ):
        self.backend = backend
        self.backend_name = backend_name or getattr(backend, "name", "custom")
        self.job_timeout = job_timeout
        self._jobs: dict[str, _TrackedJob] = {}
        self._lock = threading.Lock()

    def submit_action(
        self,
        action: Action,
        script: RenderedScript,
        inputs: Mapping[str, bytes],
        context: FinalizeContext | None = None,
    ) -> JobRecord:
        if action.status is not ActionStatus.QUEUED:
            raise AlreadyRunning(f"action {action.id} is {action.status.value}, not Queued")
        with self._lock:
            if action.id in self._jobs:
                raise AlreadyRunning(f"action {action.id} already has a job")
            placeholder = _TrackedJob(
                record=JobRecord(
                    job_id="", action_id=action.id, backend=self.backend_name, submitted_at=utcnow()
                ),
                action=action,
                context=context or FinalizeContext(),
            )
            self._jobs[action.id] = placeholder
        try:
            job_id = self.backend.submit(script, inputs)
        except PlaygroundError:
            with self._lock:
                del self._jobs[action.id]
            raise
        placeholder.record.job_id = job_id
        placeholder.deadline = time.monotonic() + self.job_timeout
        action.apply(ActionEvent.start())
        return placeholder.record

    def job_for(self, action_id: str) -> JobRecord | None:
        with self._lock:
            tracked = self._jobs.get(action_id)
        return tracked.record if tracked else None

    def poll_and_finalize(self, job: JobRecord | str) -> Action:
        """Advance one job; terminal actions are returned unchanged."""
        action_id = job if isinstance(job, str) else job.action_id
        with self._lock:
            tracked = self._jobs.get(action_id)
        if tracked is None:
            raise PlaygroundError(f"no job tracked for action {action_id!r}")

        with tracked.lock:
            action = tracked.action
            if action.status in (ActionStatus.COMPLETED, ActionStatus.FAILED):
                return action
            result = self.backend.poll(tracked.record.job_id)
            if result.state in (JobState.PENDING, JobState.RUNNING):
                if tracked.deadline and time.monotonic() > tracked.deadline:
                    action.apply(ActionEvent.fail("job timed out"))
                    tracked.record.finished_at = utcnow()
                return action
            if result.state is JobState.FAILED:
                tracked.record.append_log(result.message)
                action.apply(ActionEvent.fail(result.message or "worker failed"))
                tracked.record.finished_at = utcnow()
                return action

            try:
                outputs = self.backend.fetch_outputs(tracked.record.job_id)
                self._finalize_done(action, tracked.context, outputs)
            except PlaygroundError as exc:
                action.apply(ActionEvent.fail(str(exc)))
            tracked.record.finished_at = utcnow()
            return action

    def _finalize_done(
        self, action: Action, context: FinalizeContext, outputs: Mapping[str, bytes]
    ) -> None:
        if action.kind is ActionKind.PREDICTION:
            if PREDICTIONS_FILE not in outputs:
                raise OutputMissing("malformed worker output")
            labels = parse_predictions_csv(outputs[PREDICTIONS_FILE])
            if context.n_inputs and len(labels) != context.n_inputs:
                raise OutputMissing("malformed worker output")
            if context.write_back and context.sheet_ref is not None and context.target_column:
                sheets.write_column(context.sheet_ref, context.target_column, labels)
            report = self._report_for(labels, context)
            action.apply(ActionEvent.succeed(report))
            return
        if action.kind is ActionKind.TRAINING:
            if ADAPTER_FILE not in outputs or not outputs[ADAPTER_FILE]:
                raise OutputMissing("malformed worker output")
            artifact_dir = context.artifact_dir or Path(".")
            dest = Path(artifact_dir) / action.id / ADAPTER_FILE
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_bytes(outputs[ADAPTER_FILE])
            ref = ArtifactRef(
                kind=ArtifactKind.TRAINED_ADAPTER_ZIP,
                path=str(dest),
                size_bytes=dest.stat().st_size,
            )
            action.apply(ActionEvent.succeed(ref))
            return
        raise PlaygroundError(f"cannot finalize action kind {action.kind.value}")

    def _report_for(self, labels: list[str], context: FinalizeContext) -> metrics.EvalReport:
        schema = list(context.task.label_values) if context.task else sorted(set(labels))
        gold = context.gold
        if gold is not None:
            # score only rows whose gold value belongs to the task schema;
            # empty or stray cells count as unlabeled
            allowed = set(schema)
            scored = [(p, g) for p, g in zip(labels, gold) if g in allowed]
            if scored:
                preds_scored, gold_scored = zip(*scored)
                return metrics.build_report(
                    list(preds_scored), list(gold_scored), schema, seed=context.report_seed
                )
        return metrics.build_report(labels, None, schema, seed=context.report_seed)


def collect_artifact(action: Action) -> ArtifactRef:
    """The downloadable adapter archive of a completed training action."""
    if action.kind is not ActionKind.TRAINING:
        raise WrongKind(f"action kind {action.kind.value} has no adapter artifact")
    if action.status is not ActionStatus.COMPLETED:
        raise NotCompleted(f"action is {action.status.value}")
    ref = action.result
    if not isinstance(ref, ArtifactRef):
        raise NotCompleted("completed training action lacks an artifact result")
    path = Path(ref.path)
    if not path.exists() or path.stat().st_size == 0:
        raise NotCompleted(f"artifact file missing or empty: {path}")
    return ref


def wait_until_terminal(
    manager: JobManager,
    action_id: str,
    timeout: float = DEFAULT_JOB_TIMEOUT,
    interval: float = POLL_INTERVAL,
    max_interval: float = POLL_MAX_INTERVAL,
) -> Action:
    """Poll with exponential backoff until the action reaches a terminal state."""
    deadline = time.monotonic() + timeout
    delay = interval
    while True:
        action = manager.poll_and_finalize(action_id)
        if action.status in (ActionStatus.COMPLETED, ActionStatus.FAILED):
            return action
        if time.monotonic() > deadline:
            return action
        time.sleep(delay)
        delay = min(delay * 2, max_interval)


# ---------------------------------------------------------------------------
# Embedding dispatch used by the clustering action


class EmbeddingDispatch:
    """Renders and runs the embedding script, returning the exchange text."""

    def __init__(
        self,
        backend: ExecutionBackend,
        mock: bool = True,
        dim: int = 64,
        poll_interval: float = 0.05,
        timeout: float = DEFAULT_JOB_TIMEOUT,
    ):
        self.backend = backend
        self.mock = mock
        self.dim = dim
        self.poll_interval = poll_interval
        self.timeout = timeout

    def embed_text(self, corpus: Sequence[str]) -> str:
        script = render(
            get_template("cluster_embed"), {"embedding_dim": self.dim, "mock": self.mock}
        )
        records = [InputRecord(index=i + 1, text=t) for i, t in enumerate(corpus)]
        spec = build_job_spec("embed", mock=self.mock, embedding_dim=self.dim)
        attachments = {
            INPUT_FILE: build_input_csv(records),
            JOB_SPEC_FILE: encode_job_spec(spec),
        }
        job_id = self.backend.submit(script, attachments)
        deadline = time.monotonic() + self.timeout
        while True:
            result = self.backend.poll(job_id)
            if result.state is JobState.DONE:
                break
            if result.state is JobState.FAILED:
                raise BackendUnavailable(f"embedding worker failed: {result.message}")
            if time.monotonic() > deadline:
                raise BackendUnavailable("embedding job timed out")
            time.sleep(self.poll_interval)
        outputs = self.backend.fetch_outputs(job_id)
        if EMBEDDINGS_FILE not in outputs:
            raise BackendUnavailable("embedding worker produced no embeddings file")
        return outputs[EMBEDDINGS_FILE].decode("utf-8")
