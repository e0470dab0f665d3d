"""Orchestration service: token auth, project/action persistence, and the
pipeline from action submission through worker dispatch to result writeback.

The HTTP layer (api.py) and the CLI are thin wrappers over this class.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Mapping

from playground import clustering, codegen, executor, hub, sheets
from playground.domain import (
    Action,
    ActionEvent,
    ActionKind,
    ActionStatus,
    AdapterDescriptor,
    AdapterSource,
    ClusteringParams,
    InputArity,
    MissingField,
    InvalidValue,
    PredictionParams,
    Project,
    Representation,
    SheetRef,
    TaskDescriptor,
    TrainingParams,
    new_id,
    utcnow,
    validate_params,
)
from playground.errors import PlaygroundError
from playground.executor import (
    AlreadyRunning,
    ArtifactRef,
    EmbeddingDispatch,
    FinalizeContext,
    JobManager,
    JobRecord,
    MockExecutionBackend,
)
from playground.mockmodel import MockModel, load_model_from_zip
from playground.storage import Storage


class InvalidToken(PlaygroundError):
    pass


class RegistrationClosed(PlaygroundError):
    pass


class DuplicateName(PlaygroundError):
    pass


class NotFound(PlaygroundError):
    pass


class Forbidden(PlaygroundError):
    pass


class InsufficientTrainingData(PlaygroundError):
    def __init__(self, size: int, available: int):
        super().__init__(f"requested {size} training rows, only {available} labeled rows available")
        self.size = size
        self.available = available


@dataclass(frozen=True)
class UserAccount:
    id: str
    token_hash: str
    created_at: datetime


@dataclass
class ServiceConfig:
    data_dir: Path
    db_path: Path | None = None
    index_path: Path | None = None
    backend: str = "mock"
    open_registration: bool = True
    worker_mock_mode: bool = True
    embedding_dim: int = 64
    job_timeout: float = executor.DEFAULT_JOB_TIMEOUT

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)

    @property
    def artifact_dir(self) -> Path:
        return self.data_dir / "artifacts"

    @property
    def upload_dir(self) -> Path:
        return self.data_dir / "uploads"


def hash_token(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


class PlaygroundService:
    def __init__(self, config: ServiceConfig, backend: executor.ExecutionBackend | None = None):
        self.config = config
        config.data_dir.mkdir(parents=True, exist_ok=True)
        self.storage = Storage(config.db_path or config.data_dir / "playground.db")
        index = (
            hub.load_index(config.index_path)
            if config.index_path and Path(config.index_path).exists()
            else hub.default_index()
        )
        self.registry = hub.HubRegistry(index, upload_dir=config.upload_dir)
        if backend is None:
            if config.backend == "mock":
                backend = MockExecutionBackend()
            elif config.backend == "local":
                backend = executor.LocalSubprocessBackend(config.data_dir / "jobs")
            elif config.backend == "remote":
                backend = executor.RemoteHttpBackend()
            else:
                raise executor.BackendUnavailable(f"unknown backend {config.backend!r}")
        self.manager = JobManager(backend, job_timeout=config.job_timeout)
        self._execute_lock = threading.Lock()

    # ------------------------------------------------------------------ auth

    def authenticate(self, token: str) -> UserAccount:
        """Match an account by token digest, provisioning on first use when
        registration is open. Raw tokens are never stored."""
        if not token:
            raise InvalidToken("empty token")
        digest = hash_token(token)
        user_id = self.storage.user_by_token_hash(digest)
        if user_id is not None:
            return UserAccount(id=user_id, token_hash=digest, created_at=utcnow())
        if not self.config.open_registration:
            raise RegistrationClosed("registration is closed on this deployment")
        user_id = new_id()
        created = utcnow()
        self.storage.create_user(user_id, digest, created)
        return UserAccount(id=user_id, token_hash=digest, created_at=created)

    # -------------------------------------------------------------- projects

    def create_project(self, user_id: str, name: str, sheet_ref: SheetRef) -> Project:
        if not name:
            raise MissingField("name")
        if self.storage.project_name_taken(user_id, name):
            raise DuplicateName(f"project name {name!r} already used")
        sheets.load_table(sheet_ref)  # probe: Unreachable/Malformed surface here
        project = Project(
            id=new_id(), name=name, sheet_ref=sheet_ref, owner_id=user_id, created_at=utcnow()
        )
        self.storage.save_project(project)
        return project

    def list_projects(self, user_id: str) -> list[Project]:
        return self.storage.projects_for(user_id)

    def get_project(self, user_id: str, project_id: str) -> Project:
        project = self.storage.project(project_id)
        if project is None:
            raise NotFound(f"project {project_id!r} not found")
        if project.owner_id != user_id:
            raise Forbidden("project belongs to another account")
        return project

    # ---------------------------------------------------------------- hub

    def tasks(self) -> list[TaskDescriptor]:
        return self.registry.tasks()

    def adapters(self, task_id: str, user_id: str | None = None, project_id: str | None = None) -> list[AdapterDescriptor]:
        if project_id is not None and user_id is not None:
            self.get_project(user_id, project_id)
            return self.registry.adapters_for_project(project_id, task_id)
        return hub.list_adapters(self.registry.index, task_id)

    def upload_adapter(
        self, user_id: str, project_id: str, archive: bytes, declared: Mapping[str, Any]
    ) -> AdapterDescriptor:
        self.get_project(user_id, project_id)
        return self.registry.register_uploaded_adapter(project_id, archive, declared)

    # ---------------------------------------------------------------- actions

    def create_action(self, user_id: str, project_id: str, spec: Mapping[str, Any]) -> Action:
        project = self.get_project(user_id, project_id)
        name = str(spec.get("name") or "")
        if not name:
            raise MissingField("name")
        kind_raw = spec.get("kind")
        try:
            kind = ActionKind(kind_raw)
        except ValueError:
            raise InvalidValue("kind", f"unknown action kind {kind_raw!r}")
        target_column = spec.get("target_column") or None
        if kind in (ActionKind.PREDICTION, ActionKind.CLUSTERING) and not target_column:
            raise MissingField("target_column")

        raw_params = spec.get("params") or {}
        params = validate_params(
            kind, raw_params, self.registry.tasks(), self.registry.scoped(project_id)
        )

        if isinstance(params, TrainingParams):
            table = sheets.load_table(project.sheet_ref)
            task = self.registry.task(params.task_id)
            sheets.validate_labels(table, params.gold_column, task.labels)

        action = Action(
            id=new_id(),
            project_id=project_id,
            name=name,
            kind=kind,
            params=params,
            target_column=target_column,
        )
        self.storage.save_action(action)
        return action

    def _owned_action(self, user_id: str, action_id: str) -> tuple[Action, Project]:
        action = self.storage.action(action_id)
        if action is None:
            raise NotFound(f"action {action_id!r} not found")
        project = self.storage.project(action.project_id)
        assert project is not None
        if project.owner_id != user_id:
            raise Forbidden("action belongs to another account")
        return action, project

    def execute_action(
        self, user_id: str, action_id: str, override_model: MockModel | None = None
    ) -> JobRecord:
        """Kick off the computation for a Queued action; returns immediately
        for worker-backed kinds, runs natively for Clustering."""
        with self._execute_lock:
            action, project = self._owned_action(user_id, action_id)
            if action.status is not ActionStatus.QUEUED:
                raise AlreadyRunning(f"action is {action.status.value}")
            if self.manager.job_for(action_id) is not None:
                raise AlreadyRunning("action already has a job")

            if action.kind is ActionKind.CLUSTERING:
                return self._run_clustering(action, project)
            return self._submit_worker_job(action, project, override_model)

    def _run_clustering(self, action: Action, project: Project) -> JobRecord:
        params = action.params
        assert isinstance(params, ClusteringParams)
        table = sheets.load_table(project.sheet_ref)
        binding = sheets.ColumnBinding(text=params.text_column)
        binding.validate(table, InputArity.SINGLE)
        corpus = table.column_values(params.text_column)

        record = JobRecord(
            job_id=new_id(), action_id=action.id, backend="native", submitted_at=utcnow()
        )
        action.apply(ActionEvent.start())
        self.storage.save_action(action)
        try:
            if params.representation is Representation.TFIDF:
                matrix = clustering.tfidf(corpus)
            else:
                dispatch = EmbeddingDispatch(
                    self.manager.backend,
                    mock=self.config.worker_mock_mode,
                    dim=self.config.embedding_dim,
                )
                matrix = clustering.embed_external(corpus, dispatch)
            if params.algorithm.value == "kmeans":
                result = clustering.kmeans(matrix, params.k, seed=params.seed)
            else:
                result = clustering.agglomerative(matrix, params.k, linkage=params.linkage)
            sheets.write_column(
                project.sheet_ref, action.target_column, [str(a) for a in result.assignments]
            )
            action.apply(ActionEvent.succeed(result))
        except PlaygroundError as exc:
            action.apply(ActionEvent.fail(str(exc)))
        record.finished_at = utcnow()
        self.storage.save_action(action)
        self.storage.save_job(record)
        return record

    def _submit_worker_job(
        self,
        action: Action,
        project: Project,
        override_model: MockModel | None,
        table: sheets.SheetTable | None = None,
        sheet_ref: SheetRef | None = None,
    ) -> JobRecord:
        params = action.params
        assert isinstance(params, (PredictionParams, TrainingParams))
        task = self.registry.task(params.task_id)
        sheet_ref = sheet_ref or project.sheet_ref
        if table is None:
            table = sheets.load_table(sheet_ref)
        gold_column = params.gold_column
        binding = sheets.ColumnBinding(
            text=params.text_column,
            text2=params.text2_column,
            gold=gold_column,
        )
        binding.validate(table, task.input_arity)
        records = sheets.extract_inputs(table, binding, task.input_arity)
        gold = table.column_values(gold_column) if gold_column else None

        mock = self.config.worker_mock_mode
        if isinstance(params, PredictionParams):
            model = override_model
            if model is None and params.adapter.source is AdapterSource.USER_UPLOAD:
                model = self._model_for_adapter(params.adapter)
            script = codegen.render(
                codegen.get_template("predict"),
                {
                    "task_id": params.task_id,
                    "dataset_id": params.adapter.dataset_id,
                    "architecture": params.adapter.architecture.value,
                    "base_model_id": params.adapter.base_model_id,
                    "labels": list(task.label_values),
                    "pair_task": task.input_arity is InputArity.PAIR,
                    "mock": mock,
                },
            )
            spec = executor.build_job_spec(
                "predict", task=task, adapter=params.adapter, model=model, mock=mock
            )
            attachments = {
                executor.INPUT_FILE: executor.build_input_csv(records),
                executor.JOB_SPEC_FILE: executor.encode_job_spec(spec),
            }
            context = FinalizeContext(
                task=task,
                sheet_ref=sheet_ref,
                target_column=action.target_column,
                gold=gold,
                artifact_dir=self.config.artifact_dir,
                n_inputs=len(records),
            )
        else:
            script = codegen.render(
                codegen.get_template("train"),
                {
                    "task_id": params.task_id,
                    "dataset_id": params.adapter.dataset_id,
                    "architecture": params.adapter.architecture.value,
                    "base_model_id": params.adapter.base_model_id,
                    "labels": list(task.label_values),
                    "learning_rate": params.hyperparams.learning_rate,
                    "epochs": params.hyperparams.epochs,
                    "seed": params.hyperparams.seed,
                    "mock": mock,
                },
            )
            spec = executor.build_job_spec(
                "train",
                task=task,
                adapter=params.adapter,
                hyperparams=params.hyperparams,
                mock=mock,
            )
            assert gold is not None
            attachments = {
                executor.INPUT_FILE: executor.build_input_csv(records, gold=gold),
                executor.JOB_SPEC_FILE: executor.encode_job_spec(spec),
            }
            context = FinalizeContext(task=task, artifact_dir=self.config.artifact_dir)

        record = self.manager.submit_action(action, script, attachments, context)
        self.storage.save_action(action)
        self.storage.save_job(record)
        return record

    def _model_for_adapter(self, adapter: AdapterDescriptor) -> MockModel | None:
        path = Path(adapter.locator)
        if not path.exists():
            raise NotFound(f"uploaded adapter archive missing: {path}")
        return load_model_from_zip(path.read_bytes())

    def get_action(self, user_id: str, action_id: str, poll: bool = True) -> Action:
        action, _ = self._owned_action(user_id, action_id)
        if poll and action.status is ActionStatus.RUNNING:
            if self.manager.job_for(action_id) is not None:
                live = self.manager.poll_and_finalize(action_id)
                if live.status is not action.status or live.status in (
                    ActionStatus.COMPLETED,
                    ActionStatus.FAILED,
                ):
                    self.storage.save_action(live)
                    job = self.manager.job_for(action_id)
                    if job is not None:
                        self.storage.save_job(job)
                    if live.status is ActionStatus.COMPLETED and isinstance(
                        live.result, ArtifactRef
                    ):
                        self.storage.save_artifact(new_id(), action_id, live.result)
                return live
        return action

    def list_actions(self, user_id: str, project_id: str) -> list[Action]:
        self.get_project(user_id, project_id)
        actions = self.storage.actions_for_project(project_id)
        return [self.get_action(user_id, a.id) if a.status is ActionStatus.RUNNING else a for a in actions]

    def wait_for_action(self, user_id: str, action_id: str, timeout: float = 60.0, interval: float = 0.05) -> Action:
        """Convenience poll loop for the CLI and tests."""
        import time

        deadline = time.monotonic() + timeout
        while True:
            action = self.get_action(user_id, action_id)
            if action.status in (ActionStatus.COMPLETED, ActionStatus.FAILED):
                return action
            if time.monotonic() > deadline:
                return action
            time.sleep(interval)

    def collect_artifact(self, user_id: str, action_id: str) -> ArtifactRef:
        action, _ = self._owned_action(user_id, action_id)
        return executor.collect_artifact(action)

    # ---------------------------------------------------------------- fewshot

    def run_fewshot(self, user_id: str, project_id: str, request: "fewshot.FewShotRequest"):
        from playground import fewshot

        return fewshot.run_protocol(self, user_id, project_id, request)
