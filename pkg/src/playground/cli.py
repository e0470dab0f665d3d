"""Command-line entrypoint: serve the HTTP API, sync the hub index, or run a
single action headlessly."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import yaml

from playground import api, hub
from playground.domain import ActionStatus, SheetRef
from playground.service import PlaygroundService, ServiceConfig


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise click.ClickException("config file must contain a mapping")
    return data


def service_from_config(config: dict) -> PlaygroundService:
    data_dir = Path(config.get("data_dir", "./playground-data"))
    service_config = ServiceConfig(
        data_dir=data_dir,
        db_path=Path(config["db_path"]) if config.get("db_path") else None,
        index_path=Path(config["index_path"]) if config.get("index_path") else None,
        backend=os.environ.get("BACKEND", config.get("backend", "mock")),
        open_registration=bool(config.get("open_registration", True)),
        worker_mock_mode=bool(config.get("worker_mock_mode", True)),
        embedding_dim=int(config.get("embedding_dim", 64)),
    )
    return PlaygroundService(service_config)


@click.group()
def main() -> None:
    """No-code text-classification workbench."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve(config_path: str | None, host: str | None, port: int | None) -> None:
    """Run the HTTP API server."""
    import uvicorn

    config = load_config(config_path)
    service = service_from_config(config)
    app = api.create_app(service)
    uvicorn.run(
        app,
        host=host or config.get("host", "127.0.0.1"),
        port=port or int(config.get("port", 8000)),
    )


@main.group(name="hub")
def hub_group() -> None:
    """Hub index maintenance."""


@hub_group.command(name="sync")
@click.argument("source")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--dest", type=click.Path(), default=None, help="Index file to write.")
def hub_sync(source: str, config_path: str | None, dest: str | None) -> None:
    """Fetch, validate, and store the hub index from a URL or file path."""
    config = load_config(config_path)
    target = dest or config.get("index_path")
    if not target:
        raise click.ClickException("give --dest or set index_path in the config")
    index = hub.sync_index(source, target)
    click.echo(
        f"synced index version {index.version}: "
        f"{len(index.tasks)} tasks, {len(index.adapters)} adapters -> {target}"
    )


@main.command(name="run-action")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--token", required=True, help="Login token (account auto-provisioned).")
@click.option("--project", "project_name", required=True, help="Project name or id.")
@click.option("--spec", "spec_path", type=click.Path(exists=True), required=True)
@click.option("--sheet", "sheet_path", type=click.Path(exists=True), default=None,
              help="CSV to link when the project does not exist yet.")
@click.option("--timeout", type=float, default=300.0)
def run_action(
    config_path: str,
    token: str,
    project_name: str,
    spec_path: str,
    sheet_path: str | None,
    timeout: float,
) -> None:
    """Create and execute one action headlessly, waiting for completion."""
    service = service_from_config(load_config(config_path))
    account = service.authenticate(token)

    project = None
    for candidate in service.list_projects(account.id):
        if candidate.id == project_name or candidate.name == project_name:
            project = candidate
            break
    if project is None:
        if sheet_path is None:
            raise click.ClickException(
                f"project {project_name!r} not found; pass --sheet to create it"
            )
        project = service.create_project(
            account.id, project_name, SheetRef(backend="csv_file", locator=sheet_path)
        )

    with open(spec_path, "r", encoding="utf-8") as fh:
        spec = json.load(fh)
    action = service.create_action(account.id, project.id, spec)
    service.execute_action(account.id, action.id)
    final = service.wait_for_action(account.id, action.id, timeout=timeout)
    click.echo(json.dumps(api.action_to_dict(final), indent=2))
    if final.status is not ActionStatus.COMPLETED:
        sys.exit(1)


@main.command(name="stub-server")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8800)
@click.option("--token", default=None, help="Require this bearer token when set.")
def stub_server(host: str, port: int, token: str | None) -> None:
    """Run the bundled remote-compute stub server."""
    import uvicorn

    from playground.remote_stub import create_stub_app

    uvicorn.run(create_stub_app(token=token), host=host, port=port)


if __name__ == "__main__":
    main()
