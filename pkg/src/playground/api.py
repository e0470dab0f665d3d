"""HTTP surface over the orchestration service: bearer-token auth, flat JSON
resources, long-running work returned immediately with status via polling."""

from __future__ import annotations

from typing import Any

from fastapi import Depends, FastAPI, File, Form, Header, HTTPException, Request, UploadFile
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from playground import domain, executor, hub, sheets
from playground.clustering import ClusterResult
from playground.domain import Action, ActionStatus, Project, SheetRef
from playground.errors import PlaygroundError
from playground.executor import AlreadyRunning, ArtifactRef, BackendUnavailable
from playground.fewshot import DEFAULT_SIZES, FewShotDataSpec, FewShotRequest
from playground.metrics import EvalReport, MetricName
from playground.service import (
    DuplicateName,
    Forbidden,
    InsufficientTrainingData,
    InvalidToken,
    NotFound,
    PlaygroundService,
    RegistrationClosed,
    UserAccount,
)


class LoginBody(BaseModel):
    token: str


class SheetRefBody(BaseModel):
    backend: str = sheets.CSV_BACKEND
    locator: str
    worksheet: str | None = None


class ProjectBody(BaseModel):
    name: str
    sheet: SheetRefBody


class ActionBody(BaseModel):
    name: str
    kind: str
    target_column: str | None = None
    params: dict[str, Any] = {}


class DataSpecBody(BaseModel):
    text_column: str
    gold_column: str
    text2_column: str | None = None
    sheet: SheetRefBody | None = None


class FewShotBody(BaseModel):
    task_id: str
    train: DataSpecBody
    test: DataSpecBody
    sizes: list[int] | None = None
    repeats: int = 3
    seed: int = 0
    adapter: dict[str, Any] = {}
    target_prefix: str = "fewshot"
    bootstrap_resamples: int = 10_000
    metric: str = "accuracy"


def project_to_dict(project: Project) -> dict[str, Any]:
    return {
        "id": project.id,
        "name": project.name,
        "sheet": {
            "backend": project.sheet_ref.backend,
            "locator": project.sheet_ref.locator,
            "worksheet": project.sheet_ref.worksheet,
        },
        "created_at": project.created_at.isoformat(),
    }


def result_to_dict(result: Any) -> dict[str, Any] | None:
    if result is None:
        return None
    if isinstance(result, EvalReport):
        return {"type": "eval_report", **result.to_dict()}
    if isinstance(result, ClusterResult):
        return {
            "type": "cluster_result",
            "algorithm": result.algorithm.value,
            "k": result.k,
            "assignments": result.assignments,
            "inertia": result.inertia,
            "merge_heights": result.merge_heights,
            "params": result.params,
        }
    if isinstance(result, ArtifactRef):
        return {"type": "artifact", "kind": result.kind.value, "size_bytes": result.size_bytes}
    return None


def action_to_dict(action: Action) -> dict[str, Any]:
    return {
        "id": action.id,
        "project_id": action.project_id,
        "name": action.name,
        "kind": action.kind.value,
        "params": domain.params_to_dict(action.params),
        "target_column": action.target_column,
        "status": action.status.value,
        "result": result_to_dict(action.result),
        "error": action.error,
        "artifact_available": isinstance(action.result, ArtifactRef),
        "created_at": action.created_at.isoformat(),
        "finished_at": action.finished_at.isoformat() if action.finished_at else None,
    }


def task_to_dict(task: domain.TaskDescriptor) -> dict[str, Any]:
    return {
        "task_id": task.task_id,
        "display_name": task.display_name,
        "description": task.description,
        "input_arity": task.input_arity.value,
        "labels": [{"name": l.name, "value": l.value} for l in task.labels],
    }


_STATUS_FOR = [
    ((InvalidToken,), 401),
    ((RegistrationClosed,), 403),
    ((Forbidden,), 403),
    ((NotFound, domain.UnknownTask, domain.UnknownAdapter, domain.NoAdapterForTask), 404),
    ((DuplicateName, AlreadyRunning), 409),
    (
        (
            domain.MissingField,
            domain.InvalidValue,
            sheets.MismatchError,
            sheets.MissingColumn,
            sheets.EmptyTextRows,
            InsufficientTrainingData,
            hub.BadArchive,
            hub.ManifestMissing,
            hub.TaskMismatch,
        ),
        422,
    ),
    ((BackendUnavailable,), 503),
]


def _http_error(exc: PlaygroundError) -> HTTPException:
    status = 400
    for types, code in _STATUS_FOR:
        if isinstance(exc, types):
            status = code
            break
    detail: dict[str, Any] = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, sheets.MismatchError):
        detail["indices"] = exc.indices
    if isinstance(exc, sheets.EmptyTextRows):
        detail["indices"] = exc.indices
    return HTTPException(status_code=status, detail=detail)


def create_app(service: PlaygroundService) -> FastAPI:
    app = FastAPI(title="playground", version="0.1.0")

    @app.exception_handler(PlaygroundError)
    async def playground_error_handler(request: Request, exc: PlaygroundError):
        http = _http_error(exc)
        return JSONResponse(status_code=http.status_code, content={"detail": http.detail})

    def current_user(authorization: str = Header(default="")) -> UserAccount:
        if not authorization.startswith("Bearer "):
            raise _http_error(InvalidToken("missing bearer token"))
        return service.authenticate(authorization.removeprefix("Bearer ").strip())

    @app.post("/auth/login")
    def login(body: LoginBody):
        account = service.authenticate(body.token)
        return {"user_id": account.id}

    @app.get("/tasks")
    def get_tasks():
        return {"tasks": [task_to_dict(t) for t in service.tasks()]}

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str):
        return task_to_dict(service.registry.task(task_id))

    @app.get("/tasks/{task_id}/adapters")
    def get_adapters(
        task_id: str,
        project_id: str | None = None,
        user: UserAccount = Depends(current_user),
    ):
        adapters = service.adapters(task_id, user_id=user.id, project_id=project_id)
        return {"adapters": [domain.adapter_to_dict(a) for a in adapters]}

    @app.get("/projects")
    def get_projects(user: UserAccount = Depends(current_user)):
        return {"projects": [project_to_dict(p) for p in service.list_projects(user.id)]}

    @app.post("/projects", status_code=201)
    def post_project(body: ProjectBody, user: UserAccount = Depends(current_user)):
        ref = SheetRef(
            backend=body.sheet.backend, locator=body.sheet.locator, worksheet=body.sheet.worksheet
        )
        return project_to_dict(service.create_project(user.id, body.name, ref))

    @app.get("/projects/{project_id}")
    def get_project(project_id: str, user: UserAccount = Depends(current_user)):
        return project_to_dict(service.get_project(user.id, project_id))

    @app.get("/projects/{project_id}/actions")
    def get_actions(project_id: str, user: UserAccount = Depends(current_user)):
        return {"actions": [action_to_dict(a) for a in service.list_actions(user.id, project_id)]}

    @app.post("/projects/{project_id}/actions", status_code=201)
    def post_action(
        project_id: str, body: ActionBody, user: UserAccount = Depends(current_user)
    ):
        spec = {
            "name": body.name,
            "kind": body.kind,
            "target_column": body.target_column,
            "params": body.params,
        }
        return action_to_dict(service.create_action(user.id, project_id, spec))

    @app.post("/actions/{action_id}/execute")
    def execute_action(action_id: str, user: UserAccount = Depends(current_user)):
        record = service.execute_action(user.id, action_id)
        action = service.get_action(user.id, action_id)
        return {
            "job_id": record.job_id,
            "backend": record.backend,
            "action": action_to_dict(action),
        }

    @app.get("/actions/{action_id}")
    def get_action(action_id: str, user: UserAccount = Depends(current_user)):
        return action_to_dict(service.get_action(user.id, action_id))

    @app.get("/actions/{action_id}/artifact")
    def get_artifact(action_id: str, user: UserAccount = Depends(current_user)):
        ref = service.collect_artifact(user.id, action_id)
        with open(ref.path, "rb") as fh:
            payload = fh.read()
        return Response(
            content=payload,
            media_type="application/zip",
            headers={"Content-Disposition": f'attachment; filename="adapter_{action_id}.zip"'},
        )

    @app.post("/projects/{project_id}/adapters", status_code=201)
    def post_adapter(
        project_id: str,
        archive: UploadFile = File(...),
        task_id: str = Form(...),
        dataset_id: str = Form("upload"),
        user: UserAccount = Depends(current_user),
    ):
        descriptor = service.upload_adapter(
            user.id,
            project_id,
            archive.file.read(),
            {"task_id": task_id, "dataset_id": dataset_id},
        )
        return domain.adapter_to_dict(descriptor)

    @app.post("/projects/{project_id}/fewshot")
    def post_fewshot(
        project_id: str, body: FewShotBody, user: UserAccount = Depends(current_user)
    ):
        def data_spec(spec: DataSpecBody) -> FewShotDataSpec:
            ref = None
            if spec.sheet is not None:
                ref = SheetRef(
                    backend=spec.sheet.backend,
                    locator=spec.sheet.locator,
                    worksheet=spec.sheet.worksheet,
                )
            return FewShotDataSpec(
                text_column=spec.text_column,
                gold_column=spec.gold_column,
                text2_column=spec.text2_column,
                sheet_ref=ref,
            )

        request = FewShotRequest(
            task_id=body.task_id,
            train=data_spec(body.train),
            test=data_spec(body.test),
            sizes=tuple(body.sizes) if body.sizes is not None else DEFAULT_SIZES,
            repeats=body.repeats,
            seed=body.seed,
            adapter=body.adapter,
            target_prefix=body.target_prefix,
            bootstrap_resamples=body.bootstrap_resamples,
            metric=MetricName(body.metric),
        )
        run = service.run_fewshot(user.id, project_id, request)
        return run.to_dict()

    return app
