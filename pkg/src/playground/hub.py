"""Index of available tasks and pretrained adapters, plus project-scoped
registration of user-uploaded adapter archives.

The index is a local JSON document refreshed by an explicit sync; it is
immutable once loaded and reloads swap the whole value.
"""

from __future__ import annotations

import io
import json
import threading
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Mapping

from playground.domain import (
    AdapterDescriptor,
    AdapterSource,
    Architecture,
    InputArity,
    LabelSpec,
    TaskDescriptor,
    UnknownTask,
)
from playground.errors import PlaygroundError

MANIFEST_NAME = "adapter_manifest.json"


class SchemaError(PlaygroundError):
    def __init__(self, path: str, detail: str = ""):
        msg = f"index schema violation at {path}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.path = path


class DanglingTaskReference(PlaygroundError):
    pass


class Unreachable(PlaygroundError):
    pass


class BadArchive(PlaygroundError):
    pass


class ManifestMissing(PlaygroundError):
    pass


class TaskMismatch(PlaygroundError):
    pass


@dataclass(frozen=True)
class HubIndex:
    version: str
    tasks: tuple[TaskDescriptor, ...]
    adapters: tuple[AdapterDescriptor, ...]
    supported_task_filter: tuple[str, ...]

    def task(self, task_id: str) -> TaskDescriptor:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise UnknownTask(f"task {task_id!r} not in index")

    def adapters_for(self, task_id: str) -> list[AdapterDescriptor]:
        return [a for a in self.adapters if a.task_id == task_id]


def _expect(condition: bool, path: str, detail: str) -> None:
    if not condition:
        raise SchemaError(path, detail)


def _parse_task(obj: Any, path: str) -> TaskDescriptor:
    _expect(isinstance(obj, dict), path, "expected object")
    for key in ("task_id", "display_name", "description", "input_arity", "labels"):
        _expect(key in obj, f"{path}.{key}", "missing")
    _expect(obj["input_arity"] in ("single", "pair"), f"{path}.input_arity", "single|pair")
    labels_obj = obj["labels"]
    _expect(isinstance(labels_obj, list) and len(labels_obj) >= 2, f"{path}.labels", "need >= 2")
    labels = []
    for i, entry in enumerate(labels_obj):
        lpath = f"{path}.labels[{i}]"
        _expect(isinstance(entry, dict) and "name" in entry and "value" in entry, lpath, "need name+value")
        labels.append(LabelSpec(name=str(entry["name"]), value=str(entry["value"])))
    try:
        return TaskDescriptor(
            task_id=str(obj["task_id"]),
            display_name=str(obj["display_name"]),
            description=str(obj["description"]),
            input_arity=InputArity(obj["input_arity"]),
            labels=tuple(labels),
        )
    except ValueError as exc:
        raise SchemaError(path, str(exc))


def _parse_adapter(obj: Any, path: str) -> AdapterDescriptor:
    _expect(isinstance(obj, dict), path, "expected object")
    for key in ("task_id", "dataset_id", "architecture", "base_model_id"):
        _expect(key in obj, f"{path}.{key}", "missing")
    arch = obj["architecture"]
    _expect(
        arch in {a.value for a in Architecture},
        f"{path}.architecture",
        f"unknown architecture {arch!r}",
    )
    source = obj.get("source", "hub")
    _expect(
        source in {s.value for s in AdapterSource},
        f"{path}.source",
        f"unknown source {source!r}",
    )
    return AdapterDescriptor(
        task_id=str(obj["task_id"]),
        dataset_id=str(obj["dataset_id"]),
        architecture=Architecture(arch),
        base_model_id=str(obj["base_model_id"]),
        source=AdapterSource(source),
        locator=str(obj.get("locator", "")),
    )


def parse_index(data: Any) -> HubIndex:
    _expect(isinstance(data, dict), "$", "expected top-level object")
    for key in ("version", "tasks", "adapters", "supported_task_filter"):
        _expect(key in data, f"$.{key}", "missing")
    _expect(isinstance(data["tasks"], list), "$.tasks", "expected array")
    _expect(isinstance(data["adapters"], list), "$.adapters", "expected array")
    _expect(isinstance(data["supported_task_filter"], list), "$.supported_task_filter", "expected array")

    tasks = tuple(_parse_task(t, f"$.tasks[{i}]") for i, t in enumerate(data["tasks"]))
    task_ids = {t.task_id for t in tasks}
    if len(task_ids) != len(tasks):
        raise SchemaError("$.tasks", "duplicate task ids")

    adapters = []
    seen_keys = set()
    for i, entry in enumerate(data["adapters"]):
        adapter = _parse_adapter(entry, f"$.adapters[{i}]")
        if adapter.key in seen_keys:
            raise SchemaError(f"$.adapters[{i}]", f"duplicate adapter tuple {adapter.key}")
        seen_keys.add(adapter.key)
        if adapter.task_id not in task_ids:
            raise DanglingTaskReference(
                f"adapter $.adapters[{i}] references unknown task {adapter.task_id!r}"
            )
        adapters.append(adapter)

    filter_ids = tuple(str(t) for t in data["supported_task_filter"])
    for t in filter_ids:
        if t not in task_ids:
            raise DanglingTaskReference(f"supported_task_filter entry {t!r} is not a task")
    return HubIndex(
        version=str(data["version"]),
        tasks=tasks,
        adapters=tuple(adapters),
        supported_task_filter=filter_ids,
    )


def load_index(source: str | Path) -> HubIndex:
    """Parse and invariant-check an index from a file path or http(s) URL."""
    text = _read_source(str(source))
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}")
    return parse_index(data)


def _read_source(source: str) -> str:
    if source.startswith(("http://", "https://")):
        import httpx

        try:
            response = httpx.get(source, timeout=30.0)
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise Unreachable(f"cannot fetch index from {source}: {exc}")
        return response.text
    path = Path(source)
    if not path.exists():
        raise Unreachable(f"index file not found: {path}")
    return path.read_text(encoding="utf-8")


def serialize_index(index: HubIndex) -> dict[str, Any]:
    return {
        "version": index.version,
        "tasks": [
            {
                "task_id": t.task_id,
                "display_name": t.display_name,
                "description": t.description,
                "input_arity": t.input_arity.value,
                "labels": [{"name": l.name, "value": l.value} for l in t.labels],
            }
            for t in index.tasks
        ],
        "adapters": [
            {
                "task_id": a.task_id,
                "dataset_id": a.dataset_id,
                "architecture": a.architecture.value,
                "base_model_id": a.base_model_id,
                "source": a.source.value,
                "locator": a.locator,
            }
            for a in index.adapters
        ],
        "supported_task_filter": list(index.supported_task_filter),
    }


def sync_index(source: str, dest: str | Path) -> HubIndex:
    """Fetch, validate, and write the local index file (CLI `hub sync`)."""
    index = load_index(source)
    dest_path = Path(dest)
    dest_path.parent.mkdir(parents=True, exist_ok=True)
    dest_path.write_text(json.dumps(serialize_index(index), indent=2) + "\n", encoding="utf-8")
    return index


def default_index() -> HubIndex:
    """The index bundled with the distribution."""
    from importlib import resources

    text = (
        resources.files("playground")
        .joinpath("resources/default_hub_index.json")
        .read_text(encoding="utf-8")
    )
    return parse_index(json.loads(text))


# ---------------------------------------------------------------------------
# Operations over a loaded index


def list_tasks(index: HubIndex) -> list[TaskDescriptor]:
    """Tasks whose ids pass the supported-task filter, sorted by task_id."""
    allowed = set(index.supported_task_filter)
    return sorted((t for t in index.tasks if t.task_id in allowed), key=lambda t: t.task_id)


def list_adapters(index: HubIndex, task_id: str) -> list[AdapterDescriptor]:
    """All adapters for a supported task, sorted by (dataset, architecture, base model)."""
    if task_id not in {t.task_id for t in list_tasks(index)}:
        raise UnknownTask(f"task {task_id!r} not in the supported set")
    return sorted(index.adapters_for(task_id), key=lambda a: a.sort_key)


# ---------------------------------------------------------------------------
# Registry with project-scoped uploads


@dataclass
class _ProjectScope:
    """Registry view used during param validation for one project."""

    index: HubIndex
    uploads: tuple[AdapterDescriptor, ...]

    def adapters_for(self, task_id: str) -> list[AdapterDescriptor]:
        hub = self.index.adapters_for(task_id)
        mine = [a for a in self.uploads if a.task_id == task_id]
        return hub + mine


class HubRegistry:
    """Holds the current index plus per-project uploaded adapters."""

    def __init__(self, index: HubIndex, upload_dir: str | Path):
        self._index = index
        self.upload_dir = Path(upload_dir)
        self._uploads: dict[str, list[AdapterDescriptor]] = {}
        self._lock = threading.Lock()

    @property
    def index(self) -> HubIndex:
        return self._index

    def reload(self, index: HubIndex) -> None:
        self._index = index

    def tasks(self) -> list[TaskDescriptor]:
        return list_tasks(self._index)

    def task(self, task_id: str) -> TaskDescriptor:
        for t in self.tasks():
            if t.task_id == task_id:
                return t
        raise UnknownTask(f"task {task_id!r} not in the supported set")

    def scoped(self, project_id: str) -> _ProjectScope:
        with self._lock:
            uploads = tuple(self._uploads.get(project_id, ()))
        return _ProjectScope(index=self._index, uploads=uploads)

    def adapters_for_project(self, project_id: str, task_id: str) -> list[AdapterDescriptor]:
        base = list_adapters(self._index, task_id)
        with self._lock:
            mine = [a for a in self._uploads.get(project_id, []) if a.task_id == task_id]
        return sorted(base + mine, key=lambda a: a.sort_key)

    def register_uploaded_adapter(
        self,
        project_id: str,
        archive: bytes | BinaryIO,
        declared: Mapping[str, Any],
    ) -> AdapterDescriptor:
        """Validate and store an uploaded adapter zip; the descriptor is only
        visible within the uploading project."""
        data = archive if isinstance(archive, bytes) else archive.read()
        manifest = read_manifest(data)

        declared_task = str(declared.get("task_id") or "")
        if not declared_task:
            raise TaskMismatch("upload declares no task_id")
        if manifest["task_id"] != declared_task:
            raise TaskMismatch(
                f"manifest task {manifest['task_id']!r} does not match declared {declared_task!r}"
            )
        try:
            catalog_task = self._index.task(declared_task)
        except UnknownTask:
            catalog_task = None
        if catalog_task is not None:
            manifest_values = [l["value"] for l in manifest["label_schema"]]
            if list(catalog_task.label_values) != manifest_values:
                raise TaskMismatch(
                    f"manifest labels {manifest_values} do not match task schema "
                    f"{list(catalog_task.label_values)}"
                )

        dataset_id = str(declared.get("dataset_id") or "upload")
        descriptor = AdapterDescriptor(
            task_id=declared_task,
            dataset_id=dataset_id,
            architecture=Architecture(manifest["architecture"]),
            base_model_id=str(manifest["base_model_id"]),
            source=AdapterSource.USER_UPLOAD,
            locator="",
        )
        dest = self.upload_dir / project_id / f"{dataset_id}.zip"
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(data)
        descriptor = AdapterDescriptor(
            task_id=descriptor.task_id,
            dataset_id=descriptor.dataset_id,
            architecture=descriptor.architecture,
            base_model_id=descriptor.base_model_id,
            source=AdapterSource.USER_UPLOAD,
            locator=str(dest),
        )
        with self._lock:
            existing = self._uploads.setdefault(project_id, [])
            existing[:] = [a for a in existing if a.key != descriptor.key]
            existing.append(descriptor)
        return descriptor


def read_manifest(archive: bytes) -> dict[str, Any]:
    """Extract and sanity-check adapter_manifest.json from an adapter zip."""
    try:
        zf = zipfile.ZipFile(io.BytesIO(archive))
    except zipfile.BadZipFile:
        raise BadArchive("upload is not a valid zip archive")
    with zf:
        if MANIFEST_NAME not in zf.namelist():
            raise ManifestMissing(f"archive lacks {MANIFEST_NAME}")
        try:
            manifest = json.loads(zf.read(MANIFEST_NAME).decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ManifestMissing(f"{MANIFEST_NAME} is unreadable: {exc}")
    for key in ("task_id", "label_schema", "base_model_id", "architecture"):
        if key not in manifest:
            raise ManifestMissing(f"{MANIFEST_NAME} lacks field {key!r}")
    if manifest["architecture"] not in {a.value for a in Architecture}:
        raise TaskMismatch(f"unknown architecture {manifest['architecture']!r}")
    if not isinstance(manifest["label_schema"], list):
        raise ManifestMissing("label_schema must be a list of {name, value}")
    return manifest
