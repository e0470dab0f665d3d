"""Stub compute server implementing the remote backend wire contract:

    POST /jobs                      multipart: script, attachments -> {job_id}
    GET  /jobs/{id}                 -> {status, message, outputs: [names]}
    GET  /jobs/{id}/outputs/{name}  -> bytes

Jobs execute with the in-process mock semantics, so the stub needs no GPU,
network, or model downloads. Real third-party compute integration implements
the same three routes.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, File, Header, HTTPException, UploadFile

from playground.codegen import RenderedScript
from playground.executor import JobState, MockExecutionBackend


def create_stub_app(token: str | None = None) -> FastAPI:
    app = FastAPI(title="playground-compute-stub")
    backend = MockExecutionBackend()

    def check_auth(authorization: str) -> None:
        if token and authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="bad or missing token")

    @app.post("/jobs")
    async def submit_job(
        script: UploadFile = File(...),
        attachments: list[UploadFile] = File(default=[]),
        authorization: str = Header(default=""),
    ):
        check_auth(authorization)
        source = (await script.read()).decode("utf-8")
        attachment_map = {}
        for upload in attachments:
            attachment_map[upload.filename] = await upload.read()
        rendered = RenderedScript(
            template_id="remote", source=source, content_hash="", parameter_snapshot={}
        )
        job_id = backend.submit(rendered, attachment_map)
        return {"job_id": job_id}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str, authorization: str = Header(default="")):
        check_auth(authorization)
        try:
            result = backend.poll(job_id)
        except Exception:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        payload = {"status": result.state.value, "message": result.message, "outputs": []}
        if result.state is JobState.DONE:
            payload["outputs"] = sorted(backend.fetch_outputs(job_id))
        return payload

    @app.get("/jobs/{job_id}/outputs/{name}")
    def job_output(job_id: str, name: str, authorization: str = Header(default="")):
        check_auth(authorization)
        try:
            outputs = backend.fetch_outputs(job_id)
        except Exception:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        if name not in outputs:
            raise HTTPException(status_code=404, detail=f"no output named {name}")
        from fastapi.responses import Response

        return Response(content=outputs[name], media_type="application/octet-stream")

    return app
