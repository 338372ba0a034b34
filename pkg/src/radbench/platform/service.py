"""Platform service: actors, dataset registry, submission intake and scoring.

All state changes go through :meth:`Platform._commit`, which appends a record
to the log and then applies it to the in-memory state with the same
``_apply`` function used for replay. A restart therefore rebuilds exactly the
state that was durably committed.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import secrets
import threading
from collections import defaultdict
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from ..baseline import attach_baselines
from ..cohort import (
    EvaluationSet,
    ReviewAction,
    ReviewState,
    CaseRecord,
    export_test_package,
    ingest_facility_batch,
    k_anonymity_audit,
    review_transition,
    stage_cases,
    validate_vocabulary,
)
from ..errors import (
    BadOrigin,
    DuplicateCondition,
    DuplicateRead,
    Forbidden,
    NotApproved,
    NotFound,
    NotScored,
    NotVerified,
    RadbenchError,
    ReviewLocked,
    Unauthorized,
)
from ..strata import evaluate_stratified
from ..submission import OriginDeclaration, OriginKind, SubmissionFile, emit_template, parse_submission
from .config import PlatformConfig
from .store import RecordLog, canonical_json, killpoint

log = logging.getLogger(__name__)

# named crash-injection points on the scoring path, in execution order
SCORE_KILL_POINTS = (
    "score.before-received",
    "log.submission_received.mid-write",
    "log.submission_received.before-fsync",
    "score.after-received",
    "score.after-parse",
    "score.after-evaluate",
    "score.after-baselines",
    "score.after-serialize",
    "log.submission_scored.mid-write",
    "log.submission_scored.before-fsync",
    "score.after-scored",
)


class ActorKind(str, enum.Enum):
    Developer = "Developer"
    Facility = "Facility"
    PanelRadiologist = "PanelRadiologist"
    TestRadiologist = "TestRadiologist"


class Verification(str, enum.Enum):
    Pending = "Pending"
    Verified = "Verified"
    Revoked = "Revoked"


class SubmissionStatus(str, enum.Enum):
    Received = "Received"
    Scored = "Scored"
    Failed = "Failed"


@dataclass(frozen=True)
class Actor:
    actor_id: str
    kind: ActorKind
    country: str
    display_name: str
    verification: Verification = Verification.Pending

    def to_dict(self) -> dict:
        return {
            "actor_id": self.actor_id,
            "kind": self.kind.value,
            "country": self.country,
            "display_name": self.display_name,
            "verification": self.verification.value,
        }


@dataclass(frozen=True)
class StoredSubmission:
    submission_id: str
    set_id: str
    set_version: int
    origin: OriginDeclaration
    received_at: str
    seq: int
    csv: str
    status: SubmissionStatus = SubmissionStatus.Received
    error: Optional[dict] = None
    global_macro_auc: Optional[float] = None

    def to_dict(self, with_csv: bool = False) -> dict:
        out = {
            "submission_id": self.submission_id,
            "set_id": self.set_id,
            "set_version": self.set_version,
            "origin": self.origin.to_dict(),
            "received_at": self.received_at,
            "seq": self.seq,
            "status": self.status.value,
            "error": self.error,
            "global_macro_auc": self.global_macro_auc,
        }
        if with_csv:
            out["csv"] = self.csv
        return out


_SUBMITTER_KIND = {
    ActorKind.Developer: OriginKind.AiSystem,
    ActorKind.TestRadiologist: OriginKind.RadiologistRead,
}


def _new_id(prefix: str) -> str:
    return f"{prefix}-{secrets.token_hex(6)}"


def _hash_token(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


class Platform:
    def __init__(self, config: PlatformConfig | None = None, data_dir: str | Path | None = None):
        self.config = config or PlatformConfig()
        if data_dir is not None:
            self.config.data_dir = Path(data_dir)
        self.taxonomy = self.config.taxonomy()
        self.eval_config = self.config.eval_config()
        self.log = RecordLog(self.config.data_dir)
        self._lock = threading.RLock()
        self._set_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._reset_state()
        self._load()

    # ------------------------------------------------------------------ state

    def _reset_state(self) -> None:
        self.actors: dict[str, Actor] = {}
        self.tokens: dict[str, str] = {}
        self.sets: dict[str, list[EvaluationSet]] = {}
        self.panels: dict[str, list[str]] = {}
        self.submissions: dict[str, StoredSubmission] = {}
        self.reports: dict[str, str] = {}
        self.applied_seq = 0
        self.snapshot_seq = 0
        self._parsed_reads: dict[str, SubmissionFile] = {}

    def _state_dict(self) -> dict:
        return {
            "actors": [a.to_dict() for a in self.actors.values()],
            "tokens": dict(self.tokens),
            "sets": {sid: [v.to_dict() for v in versions] for sid, versions in self.sets.items()},
            "panels": {k: list(v) for k, v in self.panels.items()},
            "submissions": [s.to_dict(with_csv=True) for s in self.submissions.values()],
            "reports": dict(self.reports),
        }

    def _load_state_dict(self, state: dict) -> None:
        for a in state["actors"]:
            actor = Actor(a["actor_id"], ActorKind(a["kind"]), a["country"], a["display_name"], Verification(a["verification"]))
            self.actors[actor.actor_id] = actor
        self.tokens = dict(state["tokens"])
        self.sets = {sid: [EvaluationSet.from_dict(v) for v in vs] for sid, vs in state["sets"].items()}
        self.panels = {k: list(v) for k, v in state["panels"].items()}
        for s in state["submissions"]:
            self.submissions[s["submission_id"]] = StoredSubmission(
                submission_id=s["submission_id"],
                set_id=s["set_id"],
                set_version=s["set_version"],
                origin=OriginDeclaration.from_dict(s["origin"]),
                received_at=s["received_at"],
                seq=s["seq"],
                csv=s["csv"],
                status=SubmissionStatus(s["status"]),
                error=s["error"],
                global_macro_auc=s["global_macro_auc"],
            )
        self.reports = dict(state["reports"])

    def _load(self) -> None:
        seq, state = self.log.read_snapshot()
        if state is not None:
            self._load_state_dict(state)
            self.applied_seq = self.snapshot_seq = seq
        for rec in self.log.records(after_seq=self.applied_seq):
            self._apply(rec["type"], rec["data"])
            self.applied_seq = rec["seq"]

    def close(self) -> None:
        self.log.close()

    def _commit(self, rtype: str, data: dict) -> None:
        with self._lock:
            seq = self.log.append(rtype, data)
            self._apply(rtype, data)
            self.applied_seq = seq
            if self.config.snapshot_every and seq - self.snapshot_seq >= self.config.snapshot_every:
                self.snapshot()

    def snapshot(self) -> None:
        with self._lock:
            self.log.write_snapshot(self.applied_seq, self._state_dict())
            self.snapshot_seq = self.applied_seq

    def _apply(self, rtype: str, d: dict) -> None:
        if rtype == "actor_registered":
            self.actors[d["actor_id"]] = Actor(d["actor_id"], ActorKind(d["kind"]), d["country"], d["display_name"])
        elif rtype == "actor_verified":
            self.actors[d["actor_id"]] = replace(self.actors[d["actor_id"]], verification=Verification.Verified)
            self.tokens[d["token_sha256"]] = d["actor_id"]
        elif rtype == "actor_revoked":
            self.actors[d["actor_id"]] = replace(self.actors[d["actor_id"]], verification=Verification.Revoked)
        elif rtype == "dataset_registered":
            es = EvaluationSet.from_dict(d["set"])
            self.sets[es.set_id] = [es]
            self.panels[es.set_id] = []
        elif rtype == "panel_joined":
            if d["actor_id"] not in self.panels[d["set_id"]]:
                self.panels[d["set_id"]].append(d["actor_id"])
        elif rtype == "cases_staged":
            versions = self.sets[d["set_id"]]
            base = EvaluationSet.from_dict(d["base"]) if d.get("base") else versions[-1]
            records = [CaseRecord.from_dict(c) for c in d["cases"]]
            versions.append(stage_cases(base, records, d["facility_id"]))
        elif rtype == "review":
            versions = self.sets[d["set_id"]]
            current = versions[-1]
            target = replace(current, panel_members=frozenset(self.panels[d["set_id"]]))
            updated = review_transition(target, d["action"], d["reviewer"])
            versions[-1] = replace(updated, panel_members=frozenset())
        elif rtype == "submission_received":
            self.submissions[d["submission_id"]] = StoredSubmission(
                submission_id=d["submission_id"],
                set_id=d["set_id"],
                set_version=d["set_version"],
                origin=OriginDeclaration.from_dict(d["origin"]),
                received_at=d["received_at"],
                seq=d["seq_hint"],
                csv=d["csv"],
            )
        elif rtype == "submission_scored":
            sub = self.submissions[d["submission_id"]]
            self.submissions[sub.submission_id] = replace(
                sub, status=SubmissionStatus.Scored, global_macro_auc=d["global_macro_auc"]
            )
            self.reports[sub.submission_id] = d["report"]
        elif rtype == "submission_failed":
            sub = self.submissions[d["submission_id"]]
            self.submissions[sub.submission_id] = replace(sub, status=SubmissionStatus.Failed, error=d["error"])
        else:
            raise ValueError(f"unknown record type {rtype!r}")

    # ------------------------------------------------------------------ actors

    def register_actor(self, kind: ActorKind | str, country: str, display_name: str) -> str:
        kind = ActorKind(kind)
        country = country.strip().upper()
        self.taxonomy.resolve(country)
        actor_id = _new_id("act")
        self._commit(
            "actor_registered",
            {"actor_id": actor_id, "kind": kind.value, "country": country, "display_name": display_name},
        )
        return actor_id

    def get_actor(self, actor_id: str) -> Actor:
        try:
            return self.actors[actor_id]
        except KeyError:
            raise NotFound(f"actor {actor_id} not found") from None

    def verify_actor(self, actor_id: str) -> str:
        """Mark an actor Verified and return its freshly issued API token."""
        actor = self.get_actor(actor_id)
        if actor.verification is not Verification.Pending:
            raise Forbidden(f"actor {actor_id} is {actor.verification.value}")
        token = secrets.token_urlsafe(24)
        self._commit("actor_verified", {"actor_id": actor_id, "token_sha256": _hash_token(token)})
        return token

    def revoke_actor(self, actor_id: str) -> None:
        self.get_actor(actor_id)
        self._commit("actor_revoked", {"actor_id": actor_id})

    def authenticate(self, token: str | None) -> Actor:
        if not token:
            raise Unauthorized("missing token")
        actor_id = self.tokens.get(_hash_token(token))
        if actor_id is None:
            raise Unauthorized("unknown token")
        return self.actors[actor_id]

    def _require(self, actor_id: str, *kinds: ActorKind) -> Actor:
        actor = self.get_actor(actor_id)
        if actor.verification is not Verification.Verified:
            raise NotVerified(f"actor {actor_id} is {actor.verification.value}")
        if kinds and actor.kind not in kinds:
            raise Forbidden(f"{actor.kind.value} may not perform this action")
        return actor

    # ---------------------------------------------------------------- datasets

    def get_set(self, set_id: str) -> EvaluationSet:
        try:
            return self.sets[set_id][-1]
        except KeyError:
            raise NotFound(f"dataset {set_id} not found") from None

    def approved_set(self, set_id: str, version: int | None = None) -> EvaluationSet:
        versions = self.sets.get(set_id)
        if versions is None:
            raise NotFound(f"dataset {set_id} not found")
        for es in reversed(versions):
            if es.review_state is ReviewState.Approved and (version is None or es.version == version):
                return es
        raise NotApproved(f"dataset {set_id} has no approved version")

    def register_dataset(self, condition_name: str, label_vocabulary, single_gender_condition: bool = False) -> str:
        vocabulary = validate_vocabulary(label_vocabulary)
        with self._lock:
            for versions in self.sets.values():
                es = versions[0]
                if es.condition_name == condition_name and es.label_vocabulary == vocabulary:
                    raise DuplicateCondition(f"{condition_name} already registered as {es.set_id}")
            set_id = _new_id("set")
            es = EvaluationSet(
                set_id=set_id,
                condition_name=condition_name,
                label_vocabulary=vocabulary,
                single_gender_condition=bool(single_gender_condition),
            )
            self._commit("dataset_registered", {"set": es.to_dict()})
        return set_id

    def registry_entry(self, set_id: str) -> dict:
        es = self.get_set(set_id)
        versions = self.sets[set_id]
        return {
            "set_id": set_id,
            "condition_name": es.condition_name,
            "label_vocabulary": list(es.label_vocabulary),
            "single_gender_condition": es.single_gender_condition,
            "case_count": len(es.cases),
            "review_state": es.review_state.value,
            "version": es.version,
            "contributing_facilities": list(es.facility_credits),
            "panel_credits": list(es.panel_credits),
            "panel": list(self.panels[set_id]),
            "version_history": [{"version": v.version, "review_state": v.review_state.value, "case_count": len(v.cases)} for v in versions],
        }

    def join_panel(self, set_id: str, actor_id: str) -> None:
        self.get_set(set_id)
        self._require(actor_id, ActorKind.PanelRadiologist)
        self._commit("panel_joined", {"set_id": set_id, "actor_id": actor_id})

    def ingest(self, set_id: str, facility_id: str, metadata_csv: str) -> dict:
        self._require(facility_id, ActorKind.Facility)
        with self._set_locks[set_id]:
            current = self.get_set(set_id)
            base = None
            target = current
            if current.review_state is ReviewState.Rejected:
                try:
                    target = self.approved_set(set_id)
                except NotApproved:
                    target = self.sets[set_id][0]
                target = replace(target, version=current.version, review_state=ReviewState.Submitted, pending_facilities=())
                base = target
            elif current.review_state is ReviewState.UnderReview:
                raise ReviewLocked(f"set {set_id} is under review")
            staged, rejections = ingest_facility_batch(metadata_csv, facility_id, target, self.taxonomy)
            version = current.version
            if staged:
                version = current.version + 1
                self._commit(
                    "cases_staged",
                    {
                        "set_id": set_id,
                        "facility_id": facility_id,
                        "cases": [c.to_dict() for c in staged],
                        "version": version,
                        "base": base.to_dict() if base is not None else None,
                    },
                )
        return {"version": version, "staged": len(staged), "rejections": [r.to_dict() for r in rejections]}

    def review(self, set_id: str, reviewer_id: str, action: ReviewAction | str) -> ReviewState:
        self._require(reviewer_id, ActorKind.PanelRadiologist)
        action = ReviewAction(action)
        with self._set_locks[set_id]:
            current = self.get_set(set_id)
            # validate before committing
            target = replace(current, panel_members=frozenset(self.panels[set_id]))
            updated = review_transition(target, action, reviewer_id)
            self._commit(
                "review",
                {"set_id": set_id, "version": current.version, "action": action.value, "reviewer": reviewer_id},
            )
        return updated.review_state

    def export_package(self, set_id: str, actor_id: str | None = None):
        if actor_id is not None:
            self._require(actor_id, ActorKind.Developer, ActorKind.TestRadiologist)
        return export_test_package(self.approved_set(set_id))

    def template(self, set_id: str, actor_id: str | None = None) -> str:
        if actor_id is not None:
            self._require(actor_id, ActorKind.Developer, ActorKind.TestRadiologist)
        return emit_template(self.approved_set(set_id))

    def privacy_audit(self, set_id: str, k: int | None = None) -> list[dict]:
        es = self.get_set(set_id)
        k = k or self.config.k
        return [
            {"age_years": qi[0], "sex": qi[1].value, "country": qi[2], "group_size": n}
            for qi, n in k_anonymity_audit(es.cases, k)
        ]

    # ------------------------------------------------------------- submissions

    def _origin_for(self, actor: Actor, origin: OriginDeclaration | dict | None) -> OriginDeclaration:
        if isinstance(origin, dict) or origin is None:
            origin = dict(origin or {})
            origin.setdefault("kind", _SUBMITTER_KIND[actor.kind].value)
            origin = OriginDeclaration.from_dict(origin)
        expected_kind = _SUBMITTER_KIND[actor.kind]
        if origin.kind is not expected_kind:
            raise BadOrigin(f"{actor.kind.value} submissions must declare kind {expected_kind.value}")
        if expected_kind is OriginKind.RadiologistRead and not origin.radiologist_country:
            origin = replace(origin, radiologist_country=actor.country)
        origin = replace(origin, submitter_id=actor.actor_id)
        return origin.validated(self.taxonomy)

    def _reads_for(self, es: EvaluationSet) -> list[SubmissionFile]:
        reads = []
        for sub in sorted(self.submissions.values(), key=lambda s: s.seq):
            if (
                sub.set_id == es.set_id
                and sub.set_version == es.version
                and sub.status is SubmissionStatus.Scored
                and sub.origin.kind is OriginKind.RadiologistRead
            ):
                parsed = self._parsed_reads.get(sub.submission_id)
                if parsed is None:
                    parsed = parse_submission(sub.csv, es, sub.origin, self.taxonomy)
                    self._parsed_reads[sub.submission_id] = parsed
                reads.append(parsed)
        return reads

    def score_submission(self, set_id: str, csv_content: str, origin=None, actor_id: str | None = None) -> str:
        """Record, parse and score a submission; returns the submission id.

        Parse and scoring errors are persisted as ``Failed`` and re-raised.
        """
        if actor_id is None:
            raise Unauthorized("submissions require an authenticated actor")
        actor = self._require(actor_id, ActorKind.Developer, ActorKind.TestRadiologist)
        es = self.approved_set(set_id)
        origin = self._origin_for(actor, origin)

        submission_id = _new_id("sub")
        killpoint("score.before-received")
        with self._lock:
            seq_hint = self.log.last_seq + 1
            self._commit(
                "submission_received",
                {
                    "submission_id": submission_id,
                    "set_id": es.set_id,
                    "set_version": es.version,
                    "origin": origin.to_dict(),
                    "received_at": datetime.now(timezone.utc).isoformat(),
                    "seq_hint": seq_hint,
                    "csv": csv_content,
                },
            )
        killpoint("score.after-received")
        self._score(submission_id)
        return submission_id

    def _score(self, submission_id: str) -> None:
        stored = self.submissions[submission_id]
        es = self.approved_set(stored.set_id, stored.set_version)
        try:
            if stored.origin.kind is OriginKind.RadiologistRead:
                for other in self.submissions.values():
                    if (
                        other.submission_id != submission_id
                        and other.set_id == es.set_id
                        and other.set_version == es.version
                        and other.origin.kind is OriginKind.RadiologistRead
                        and other.origin.submitter_id == stored.origin.submitter_id
                        and other.status is SubmissionStatus.Scored
                    ):
                        raise DuplicateRead(f"radiologist {stored.origin.submitter_id} already has a read for v{es.version}")
            sub = parse_submission(stored.csv, es, stored.origin, self.taxonomy)
            killpoint("score.after-parse")
            report = evaluate_stratified(sub, es, self.eval_config, self.taxonomy, submission_id=submission_id)
            killpoint("score.after-evaluate")
            if stored.origin.kind is OriginKind.AiSystem:
                report = attach_baselines(report, self._reads_for(es), es, self.eval_config, self.taxonomy)
            killpoint("score.after-baselines")
            body = canonical_json(report.to_dict())
            killpoint("score.after-serialize")
        except RadbenchError as exc:
            self._commit("submission_failed", {"submission_id": submission_id, "error": exc.to_dict()})
            exc.submission_id = submission_id
            raise
        self._commit(
            "submission_scored",
            {"submission_id": submission_id, "report": body, "global_macro_auc": report.global_macro_auc()},
        )
        killpoint("score.after-scored")

    def resume_pending(self) -> list[str]:
        """Score submissions left in Received by an interrupted run."""
        done = []
        for sub in sorted(self.submissions.values(), key=lambda s: s.seq):
            if sub.status is SubmissionStatus.Received:
                try:
                    self._score(sub.submission_id)
                except RadbenchError:
                    pass
                done.append(sub.submission_id)
        return done

    def get_submission(self, submission_id: str) -> StoredSubmission:
        try:
            return self.submissions[submission_id]
        except KeyError:
            raise NotFound(f"submission {submission_id} not found") from None

    def get_report(self, submission_id: str) -> str:
        sub = self.get_submission(submission_id)
        if sub.status is not SubmissionStatus.Scored:
            raise NotScored(f"submission {submission_id} is {sub.status.value}")
        return self.reports[submission_id]

    def leaderboard(self, set_id: str, submitter_id: str | None = None) -> list[dict]:
        """Scored AI submissions by Global macro-AUC (desc), earliest first on ties.

        With ``submitter_id`` only that submitter's entries are returned, still
        carrying their rank on the full board.
        """
        self.get_set(set_id)
        scored = [
            s
            for s in self.submissions.values()
            if s.set_id == set_id and s.status is SubmissionStatus.Scored and s.origin.kind is OriginKind.AiSystem
        ]
        if not scored:
            raise NotScored(f"dataset {set_id} has no scored submissions")
        scored.sort(key=lambda s: (s.global_macro_auc is None, -(s.global_macro_auc or 0.0), s.received_at, s.seq))
        board = [
            {
                "rank": i + 1,
                "submission_id": s.submission_id,
                "submitter_id": s.origin.submitter_id,
                "set_version": s.set_version,
                "global_macro_auc": s.global_macro_auc,
                "received_at": s.received_at,
            }
            for i, s in enumerate(scored)
        ]
        if submitter_id is not None:
            board = [e for e in board if e["submitter_id"] == submitter_id]
        return board
