"""Relational persistence for users, projects, actions, jobs, and artifacts.

SQLite is the embedded reference store. Opening a database marks any action
left in Running as Failed("orphaned"): a restart mid-run loses the in-process
job registry, so those runs cannot be resumed.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from datetime import datetime
from pathlib import Path
from typing import Any

from playground import domain
from playground.clustering import ClusterResult
from playground.domain import (
    Action,
    ActionKind,
    ActionStatus,
    ClusterAlgorithm,
    Project,
    SheetRef,
)
from playground.errors import PlaygroundError
from playground.executor import ArtifactKind, ArtifactRef, JobRecord
from playground.metrics import EvalReport

_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    id TEXT PRIMARY KEY,
    token_hash TEXT NOT NULL UNIQUE,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS projects (
    id TEXT PRIMARY KEY,
    owner_id TEXT NOT NULL REFERENCES users(id),
    name TEXT NOT NULL,
    sheet_backend TEXT NOT NULL,
    sheet_locator TEXT NOT NULL,
    sheet_worksheet TEXT,
    created_at TEXT NOT NULL,
    UNIQUE (owner_id, name)
);
CREATE TABLE IF NOT EXISTS actions (
    id TEXT PRIMARY KEY,
    project_id TEXT NOT NULL REFERENCES projects(id),
    name TEXT NOT NULL,
    kind TEXT NOT NULL,
    params TEXT NOT NULL,
    target_column TEXT,
    status TEXT NOT NULL,
    result TEXT,
    error TEXT,
    created_at TEXT NOT NULL,
    finished_at TEXT
);
CREATE TABLE IF NOT EXISTS jobs (
    job_id TEXT PRIMARY KEY,
    action_id TEXT NOT NULL REFERENCES actions(id),
    backend TEXT NOT NULL,
    submitted_at TEXT NOT NULL,
    finished_at TEXT,
    log_tail TEXT NOT NULL DEFAULT ''
);
CREATE TABLE IF NOT EXISTS artifacts (
    id TEXT PRIMARY KEY,
    action_id TEXT NOT NULL REFERENCES actions(id),
    kind TEXT NOT NULL,
    path TEXT NOT NULL,
    size_bytes INTEGER NOT NULL
);
"""


def _iso(dt: datetime | None) -> str | None:
    return dt.isoformat() if dt else None


def _from_iso(text: str | None) -> datetime | None:
    return datetime.fromisoformat(text) if text else None


def result_to_json(result: Any) -> str | None:
    if result is None:
        return None
    if isinstance(result, EvalReport):
        return json.dumps({"type": "eval_report", **result.to_dict()}, sort_keys=True)
    if isinstance(result, ClusterResult):
        return json.dumps(
            {
                "type": "cluster_result",
                "algorithm": result.algorithm.value,
                "k": result.k,
                "assignments": result.assignments,
                "inertia": result.inertia,
                "merge_heights": result.merge_heights,
                "params": result.params,
            },
            sort_keys=True,
        )
    if isinstance(result, ArtifactRef):
        return json.dumps(
            {
                "type": "artifact",
                "kind": result.kind.value,
                "path": result.path,
                "size_bytes": result.size_bytes,
            },
            sort_keys=True,
        )
    raise PlaygroundError(f"cannot persist result of type {type(result)!r}")


def result_from_json(text: str | None) -> Any:
    if not text:
        return None
    data = json.loads(text)
    tag = data.pop("type")
    if tag == "eval_report":
        return EvalReport.from_dict(data)
    if tag == "cluster_result":
        return ClusterResult(
            algorithm=ClusterAlgorithm(data["algorithm"]),
            k=data["k"],
            assignments=data["assignments"],
            inertia=data["inertia"],
            merge_heights=data["merge_heights"],
            params=data["params"],
        )
    if tag == "artifact":
        return ArtifactRef(
            kind=ArtifactKind(data["kind"]), path=data["path"], size_bytes=data["size_bytes"]
        )
    raise PlaygroundError(f"unknown persisted result type {tag!r}")


class Storage:
    """SQLite-backed store; all mutations serialize on one lock."""

    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        if self.path != ":memory:":
            Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._lock = threading.Lock()
        with self._lock:
            self._conn.executescript(_SCHEMA)
            self._conn.commit()
        self.mark_orphans()

    def close(self) -> None:
        self._conn.close()

    def mark_orphans(self) -> int:
        """Fail any action left Running by a previous process."""
        with self._lock:
            cur = self._conn.execute(
                "UPDATE actions SET status = ?, error = ? WHERE status = ?",
                (ActionStatus.FAILED.value, "orphaned", ActionStatus.RUNNING.value),
            )
            self._conn.commit()
            return cur.rowcount

    # -- users

    def create_user(self, user_id: str, token_hash: str, created_at: datetime) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT INTO users (id, token_hash, created_at) VALUES (?, ?, ?)",
                (user_id, token_hash, created_at.isoformat()),
            )
            self._conn.commit()

    def user_by_token_hash(self, token_hash: str) -> str | None:
        row = self._conn.execute(
            "SELECT id FROM users WHERE token_hash = ?", (token_hash,)
        ).fetchone()
        return row["id"] if row else None

    # -- projects

    def save_project(self, project: Project) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT INTO projects (id, owner_id, name, sheet_backend, sheet_locator,"
                " sheet_worksheet, created_at) VALUES (?, ?, ?, ?, ?, ?, ?)",
                (
                    project.id,
                    project.owner_id,
                    project.name,
                    project.sheet_ref.backend,
                    project.sheet_ref.locator,
                    project.sheet_ref.worksheet,
                    project.created_at.isoformat(),
                ),
            )
            self._conn.commit()

    def _project_from_row(self, row: sqlite3.Row) -> Project:
        return Project(
            id=row["id"],
            name=row["name"],
            sheet_ref=SheetRef(
                backend=row["sheet_backend"],
                locator=row["sheet_locator"],
                worksheet=row["sheet_worksheet"],
            ),
            owner_id=row["owner_id"],
            created_at=datetime.fromisoformat(row["created_at"]),
        )

    def project(self, project_id: str) -> Project | None:
        row = self._conn.execute(
            "SELECT * FROM projects WHERE id = ?", (project_id,)
        ).fetchone()
        return self._project_from_row(row) if row else None

    def projects_for(self, owner_id: str) -> list[Project]:
        rows = self._conn.execute(
            "SELECT * FROM projects WHERE owner_id = ? ORDER BY created_at, id", (owner_id,)
        ).fetchall()
        return [self._project_from_row(r) for r in rows]

    def project_name_taken(self, owner_id: str, name: str) -> bool:
        row = self._conn.execute(
            "SELECT 1 FROM projects WHERE owner_id = ? AND name = ?", (owner_id, name)
        ).fetchone()
        return row is not None

    # -- actions

    def save_action(self, action: Action) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO actions (id, project_id, name, kind, params,"
                " target_column, status, result, error, created_at, finished_at)"
                " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    action.id,
                    action.project_id,
                    action.name,
                    action.kind.value,
                    json.dumps(domain.params_to_dict(action.params), sort_keys=True),
                    action.target_column,
                    action.status.value,
                    result_to_json(action.result),
                    action.error,
                    action.created_at.isoformat(),
                    _iso(action.finished_at),
                ),
            )
            self._conn.commit()

    def _action_from_row(self, row: sqlite3.Row) -> Action:
        kind = ActionKind(row["kind"])
        return Action(
            id=row["id"],
            project_id=row["project_id"],
            name=row["name"],
            kind=kind,
            params=domain.params_from_dict(kind, json.loads(row["params"])),
            target_column=row["target_column"],
            status=ActionStatus(row["status"]),
            result=result_from_json(row["result"]),
            error=row["error"],
            created_at=datetime.fromisoformat(row["created_at"]),
            finished_at=_from_iso(row["finished_at"]),
        )

    def action(self, action_id: str) -> Action | None:
        row = self._conn.execute(
            "SELECT * FROM actions WHERE id = ?", (action_id,)
        ).fetchone()
        return self._action_from_row(row) if row else None

    def actions_for_project(self, project_id: str) -> list[Action]:
        rows = self._conn.execute(
            "SELECT * FROM actions WHERE project_id = ? ORDER BY created_at, id",
            (project_id,),
        ).fetchall()
        return [self._action_from_row(r) for r in rows]

    # -- jobs and artifacts

    def save_job(self, job: JobRecord) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO jobs (job_id, action_id, backend, submitted_at,"
                " finished_at, log_tail) VALUES (?, ?, ?, ?, ?, ?)",
                (
                    job.job_id,
                    job.action_id,
                    job.backend,
                    job.submitted_at.isoformat(),
                    _iso(job.finished_at),
                    job.log_tail,
                ),
            )
            self._conn.commit()

    def save_artifact(self, artifact_id: str, action_id: str, ref: ArtifactRef) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO artifacts (id, action_id, kind, path, size_bytes)"
                " VALUES (?, ?, ?, ?, ?)",
                (artifact_id, action_id, ref.kind.value, ref.path, ref.size_bytes),
            )
            self._conn.commit()

    def artifact_for_action(self, action_id: str) -> ArtifactRef | None:
        row = self._conn.execute(
            "SELECT * FROM artifacts WHERE action_id = ?", (action_id,)
        ).fetchone()
        if row is None:
            return None
        return ArtifactRef(
            kind=ArtifactKind(row["kind"]), path=row["path"], size_bytes=row["size_bytes"]
        )
