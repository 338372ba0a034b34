"""HTTP/1.1 JSON API over a :class:`Platform`.

Actors authenticate with ``Authorization: Bearer <token>`` using the token
issued at verification. Operator endpoints require the configured operator
token.
"""

from __future__ import annotations

import hmac
from typing import Optional

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from pydantic import BaseModel, Field
from fastapi.concurrency import run_in_threadpool

from .. import errors
from .service import Actor, Platform

_STATUS = {
    errors.NotFound: 404,
    errors.Unauthorized: 401,
    errors.NotVerified: 403,
    errors.Forbidden: 403,
    errors.NotPanelMember: 403,
    errors.NotApproved: 409,
    errors.NotScored: 409,
    errors.IllegalTransition: 409,
    errors.ReviewLocked: 409,
    errors.DuplicateCondition: 409,
    errors.DuplicateRead: 409,
}


def _status_for(exc: errors.RadbenchError) -> int:
    for cls in type(exc).__mro__:
        if cls in _STATUS:
            return _STATUS[cls]
    return 422


class ActorIn(BaseModel):
    kind: str
    country: str
    display_name: str


class DatasetIn(BaseModel):
    condition_name: str
    label_vocabulary: list[str]
    single_gender_condition: bool = False


class ReviewIn(BaseModel):
    action: str


class SubmissionIn(BaseModel):
    csv: str
    origin: dict = Field(default_factory=dict)


def create_app(platform: Platform) -> FastAPI:
    app = FastAPI(title="radbench", version="0.1.0")
    app.state.platform = platform

    @app.exception_handler(errors.RadbenchError)
    async def _domain_error(request: Request, exc: errors.RadbenchError):
        return JSONResponse(status_code=_status_for(exc), content={"error": exc.to_dict()})

    def bearer(authorization: Optional[str] = Header(default=None)) -> Optional[str]:
        if authorization and authorization.lower().startswith("bearer "):
            return authorization[7:].strip()
        return None

    def current_actor(token: Optional[str] = Depends(bearer)) -> Actor:
        actor = platform.authenticate(token)
        if actor.verification.value != "Verified":
            raise errors.NotVerified(f"actor {actor.actor_id} is {actor.verification.value}")
        return actor

    def operator(token: Optional[str] = Depends(bearer)) -> None:
        expected = platform.config.operator_token
        if not expected or not token or not hmac.compare_digest(token, expected):
            raise errors.Unauthorized("operator token required")

    @app.post("/actors", status_code=201)
    def register_actor(body: ActorIn):
        actor_id = platform.register_actor(body.kind, body.country, body.display_name)
        return platform.get_actor(actor_id).to_dict()

    @app.post("/actors/{actor_id}/verify", dependencies=[Depends(operator)])
    def verify_actor(actor_id: str):
        token = platform.verify_actor(actor_id)
        return {"actor_id": actor_id, "token": token}

    @app.post("/actors/{actor_id}/revoke", dependencies=[Depends(operator)])
    def revoke_actor(actor_id: str):
        platform.revoke_actor(actor_id)
        return platform.get_actor(actor_id).to_dict()

    @app.post("/datasets", status_code=201, dependencies=[Depends(operator)])
    def register_dataset(body: DatasetIn):
        set_id = platform.register_dataset(body.condition_name, body.label_vocabulary, body.single_gender_condition)
        return platform.registry_entry(set_id)

    @app.get("/datasets/{set_id}")
    def dataset(set_id: str):
        return platform.registry_entry(set_id)

    @app.post("/datasets/{set_id}/panel")
    def join_panel(set_id: str, actor: Actor = Depends(current_actor)):
        platform.join_panel(set_id, actor.actor_id)
        return platform.registry_entry(set_id)

    @app.post("/datasets/{set_id}/cases")
    async def ingest(set_id: str, request: Request, actor: Actor = Depends(current_actor)):
        csv = (await request.body()).decode("utf-8")
        return await run_in_threadpool(platform.ingest, set_id, actor.actor_id, csv)

    @app.post("/datasets/{set_id}/review")
    def review(set_id: str, body: ReviewIn, actor: Actor = Depends(current_actor)):
        state = platform.review(set_id, actor.actor_id, body.action)
        return {"set_id": set_id, "review_state": state.value, "version": platform.get_set(set_id).version}

    @app.get("/datasets/{set_id}/package")
    def package(set_id: str, actor: Actor = Depends(current_actor)):
        pkg = platform.export_package(set_id, actor.actor_id)
        return {"metadata": pkg.metadata(), "manifest": pkg.manifest_csv(), "template": pkg.template}

    @app.get("/datasets/{set_id}/template")
    def template(set_id: str, actor: Actor = Depends(current_actor)):
        return PlainTextResponse(platform.template(set_id, actor.actor_id), media_type="text/csv")

    @app.post("/datasets/{set_id}/submissions", status_code=201)
    def submit(set_id: str, body: SubmissionIn, actor: Actor = Depends(current_actor)):
        submission_id = platform.score_submission(set_id, body.csv, body.origin, actor_id=actor.actor_id)
        return platform.get_submission(submission_id).to_dict()

    @app.get("/submissions/{submission_id}")
    def submission(submission_id: str):
        return platform.get_submission(submission_id).to_dict()

    @app.get("/submissions/{submission_id}/report")
    def report(submission_id: str):
        return Response(platform.get_report(submission_id).encode("utf-8"), media_type="application/json")

    @app.get("/datasets/{set_id}/leaderboard")
    def leaderboard(set_id: str, mine: bool = False, token: Optional[str] = Depends(bearer)):
        submitter = None
        if mine or not platform.config.public_leaderboard:
            actor = current_actor(token)
            submitter = actor.actor_id if mine else None
        return {"set_id": set_id, "entries": platform.leaderboard(set_id, submitter)}

    @app.get("/datasets/{set_id}/privacy-audit", dependencies=[Depends(operator)])
    def privacy_audit(set_id: str, k: Optional[int] = Query(default=None, ge=2)):
        k = k or platform.config.k
        violations = platform.privacy_audit(set_id, k)
        return {"set_id": set_id, "k": k, "passes": not violations, "violations": violations}

    return app
