"""Evaluation sets: facility ingestion, panel review, anonymisation and export."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import re
from collections import Counter
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadAge,
    BadSex,
    BadVocabulary,
    DuplicateCaseId,
    EmptySet,
    IllegalTransition,
    MalformedRow,
    MissingColumn,
    NegativeAge,
    NotApproved,
    NotPanelMember,
    RadbenchError,
    ReviewLocked,
    UnknownLabel,
)
from .taxonomy import MAX_AGE, LocationTaxonomy, default_taxonomy, normalize_country

FACILITY_COLUMNS = ("case_id", "image_ref", "label", "sex", "age", "country")
TOKEN_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")
DEFAULT_K = 5


class Sex(str, enum.Enum):
    Male = "Male"
    Female = "Female"
    Unknown = "Unknown"

    @classmethod
    def from_wire(cls, code: str) -> "Sex":
        try:
            return _SEX_WIRE[code.strip().upper()]
        except KeyError:
            raise BadSex(f"sex must be one of M, F, U, got {code!r}") from None

    @property
    def wire(self) -> str:
        return self.value[0]


_SEX_WIRE = {"M": Sex.Male, "F": Sex.Female, "U": Sex.Unknown}


class ReviewState(str, enum.Enum):
    Submitted = "Submitted"
    UnderReview = "UnderReview"
    Approved = "Approved"
    Rejected = "Rejected"


class ReviewAction(str, enum.Enum):
    StartReview = "StartReview"
    Approve = "Approve"
    Reject = "Reject"


_TRANSITIONS = {
    (ReviewState.Submitted, ReviewAction.StartReview): ReviewState.UnderReview,
    (ReviewState.UnderReview, ReviewAction.Approve): ReviewState.Approved,
    (ReviewState.UnderReview, ReviewAction.Reject): ReviewState.Rejected,
}


@dataclass(frozen=True)
class CaseRecord:
    case_id: str
    image_ref: str
    true_label: str
    sex: Sex
    age_years: int
    facility_id: str
    country: str

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "image_ref": self.image_ref,
            "true_label": self.true_label,
            "sex": self.sex.value,
            "age_years": self.age_years,
            "facility_id": self.facility_id,
            "country": self.country,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CaseRecord":
        return cls(
            case_id=d["case_id"],
            image_ref=d["image_ref"],
            true_label=d["true_label"],
            sex=Sex(d["sex"]),
            age_years=int(d["age_years"]),
            facility_id=d["facility_id"],
            country=d["country"],
        )


def validate_vocabulary(labels: Sequence[str]) -> tuple[str, ...]:
    labels = tuple(labels)
    if len(labels) < 2:
        raise BadVocabulary("a label vocabulary needs at least 2 labels")
    if len(set(labels)) != len(labels):
        raise BadVocabulary("duplicate labels in vocabulary")
    for label in labels:
        if not TOKEN_RE.match(label):
            raise BadVocabulary(f"label {label!r} must match [A-Za-z0-9_.-]+")
    return labels


@dataclass(frozen=True)
class EvaluationSet:
    """One immutable version of an evaluation set."""

    set_id: str
    condition_name: str
    label_vocabulary: tuple[str, ...]
    single_gender_condition: bool = False
    cases: tuple[CaseRecord, ...] = ()
    review_state: ReviewState = ReviewState.Submitted
    panel_credits: tuple[str, ...] = ()
    panel_members: frozenset[str] = frozenset()
    facility_credits: tuple[str, ...] = ()
    pending_facilities: tuple[str, ...] = ()
    version: int = 1

    def __post_init__(self):
        validate_vocabulary(self.label_vocabulary)
        ids = [c.case_id for c in self.cases]
        if len(set(ids)) != len(ids):
            raise DuplicateCaseId("case ids must be unique within a set")
        if self.single_gender_condition and len({c.sex for c in self.cases}) > 1:
            raise BadSex("single-gender condition with mixed sexes")

    @property
    def case_ids(self) -> tuple[str, ...]:
        return tuple(c.case_id for c in self.cases)

    def case_index(self) -> dict[str, int]:
        return {c.case_id: i for i, c in enumerate(self.cases)}

    def require_approved(self) -> None:
        if self.review_state is not ReviewState.Approved:
            raise NotApproved(f"set {self.set_id} v{self.version} is {self.review_state.value}")

    def to_dict(self) -> dict:
        return {
            "set_id": self.set_id,
            "condition_name": self.condition_name,
            "label_vocabulary": list(self.label_vocabulary),
            "single_gender_condition": self.single_gender_condition,
            "cases": [c.to_dict() for c in self.cases],
            "review_state": self.review_state.value,
            "panel_credits": list(self.panel_credits),
            "panel_members": sorted(self.panel_members),
            "facility_credits": list(self.facility_credits),
            "pending_facilities": list(self.pending_facilities),
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationSet":
        return cls(
            set_id=d["set_id"],
            condition_name=d["condition_name"],
            label_vocabulary=tuple(d["label_vocabulary"]),
            single_gender_condition=d["single_gender_condition"],
            cases=tuple(CaseRecord.from_dict(c) for c in d["cases"]),
            review_state=ReviewState(d["review_state"]),
            panel_credits=tuple(d["panel_credits"]),
            panel_members=frozenset(d["panel_members"]),
            facility_credits=tuple(d["facility_credits"]),
            pending_facilities=tuple(d["pending_facilities"]),
            version=d["version"],
        )


@dataclass(frozen=True)
class Rejection:
    row: int
    code: str
    message: str

    def to_dict(self) -> dict:
        return {"row": self.row, "code": self.code, "message": self.message}


def _parse_age(raw: str) -> int:
    try:
        age = int(raw.strip())
    except ValueError:
        raise BadAge(f"age {raw!r} is not an integer") from None
    if not 0 <= age < MAX_AGE:
        raise BadAge(f"age {age} outside 0..{MAX_AGE - 1}")
    return age


def ingest_facility_batch(
    metadata_csv: str,
    facility_id: str,
    target_set: EvaluationSet,
    taxonomy: LocationTaxonomy | None = None,
) -> tuple[list[CaseRecord], list[Rejection]]:
    """Parse a facility metadata CSV into staged cases plus per-row rejections.

    Only a missing header column aborts the batch; every other problem
    rejects its own row and the rest carry on.
    """
    taxonomy = taxonomy or default_taxonomy()
    reader = csv.reader(io.StringIO(metadata_csv.lstrip("﻿")))
    header = [h.strip() for h in next(reader, [])]
    missing = [c for c in FACILITY_COLUMNS if c not in header]
    if missing:
        raise MissingColumn(f"missing column(s): {', '.join(missing)}", row=1)
    col = {name: header.index(name) for name in FACILITY_COLUMNS}
    vocabulary = set(target_set.label_vocabulary)
    seen = set(target_set.case_ids)
    sexes = {c.sex for c in target_set.cases}

    staged: list[CaseRecord] = []
    rejections: list[Rejection] = []
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            if len(row) != len(header):
                raise MalformedRow(f"expected {len(header)} fields, got {len(row)}")
            values = {name: row[i].strip() for name, i in col.items()}
            case_id = values["case_id"]
            if not TOKEN_RE.match(case_id):
                raise MalformedRow(f"case_id {case_id!r} must match [A-Za-z0-9_.-]+")
            if case_id in seen:
                raise DuplicateCaseId(f"case_id {case_id!r} already present")
            if not values["image_ref"]:
                raise MalformedRow("image_ref is empty")
            label = values["label"]
            if label not in vocabulary:
                raise UnknownLabel(f"label {label!r} not in vocabulary")
            sex = Sex.from_wire(values["sex"])
            if target_set.single_gender_condition and sexes and sex not in sexes:
                raise BadSex(f"single-gender condition expects {next(iter(sexes)).wire}")
            age = _parse_age(values["age"])
            country = normalize_country(values["country"])
            taxonomy.resolve(country)
        except RadbenchError as exc:
            rejections.append(Rejection(row=row_no, code=exc.code, message=str(exc)))
            continue
        seen.add(case_id)
        sexes.add(sex)
        staged.append(
            CaseRecord(
                case_id=case_id,
                image_ref=values["image_ref"],
                true_label=label,
                sex=sex,
                age_years=age,
                facility_id=facility_id,
                country=country,
            )
        )
    return staged, rejections


def stage_cases(
    current: EvaluationSet,
    records: Sequence[CaseRecord],
    facility_id: str,
) -> EvaluationSet:
    """Next version of ``current`` with ``records`` appended, back in Submitted.

    Sets under review are locked. For a Rejected version the caller passes the
    version to build on (the last approved one, or an empty one).
    """
    if current.review_state is ReviewState.UnderReview:
        raise ReviewLocked(f"set {current.set_id} is under review")
    if not records:
        return current
    pending = current.pending_facilities
    if current.review_state is not ReviewState.Submitted:
        pending = ()
    if facility_id not in pending:
        pending = pending + (facility_id,)
    return replace(
        current,
        cases=current.cases + tuple(records),
        review_state=ReviewState.Submitted,
        pending_facilities=pending,
        version=current.version + 1,
    )


def review_transition(target: EvaluationSet, action: ReviewAction | str, reviewer: str) -> EvaluationSet:
    action = ReviewAction(action)
    if reviewer not in target.panel_members:
        raise NotPanelMember(f"{reviewer} is not on the panel for {target.set_id}")
    new_state = _TRANSITIONS.get((target.review_state, action))
    if new_state is None:
        raise IllegalTransition(f"{action.value} not allowed from {target.review_state.value}")
    if new_state is ReviewState.Approved:
        if not target.cases:
            raise EmptySet(f"set {target.set_id} has no cases")
        credits = target.panel_credits + (() if reviewer in target.panel_credits else (reviewer,))
        facilities = target.facility_credits + tuple(
            f for f in target.pending_facilities if f not in target.facility_credits
        )
        return replace(
            target,
            review_state=new_state,
            panel_credits=credits,
            facility_credits=facilities,
            pending_facilities=(),
        )
    return replace(target, review_state=new_state)


def abstract_dob(date_of_birth: date, imaging_date: date) -> int:
    """Completed years between birth and imaging (birthday counting)."""
    if imaging_date < date_of_birth:
        raise NegativeAge(f"imaging date {imaging_date} precedes birth {date_of_birth}")
    years = imaging_date.year - date_of_birth.year
    if (imaging_date.month, imaging_date.day) < (date_of_birth.month, date_of_birth.day):
        years -= 1
    return years


def _export_seed(set_id: str, version: int) -> int:
    digest = hashlib.sha256(f"{set_id}:{version}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def export_order(es: EvaluationSet) -> list[CaseRecord]:
    """Deterministic shuffle of the cases, fixed by (set_id, version)."""
    rng = np.random.default_rng(_export_seed(es.set_id, es.version))
    perm = rng.permutation(len(es.cases))
    return [es.cases[i] for i in perm]


@dataclass(frozen=True)
class TestPackage:
    __test__ = False  # not a pytest class

    set_id: str
    version: int
    label_vocabulary: tuple[str, ...]
    images: tuple[tuple[str, str], ...]
    template: str

    def manifest_csv(self) -> str:
        lines = ["case_id,image_ref"] + [f"{cid},{ref}" for cid, ref in self.images]
        return "\n".join(lines) + "\n"

    def metadata(self) -> dict:
        return {
            "set_id": self.set_id,
            "version": self.version,
            "label_vocabulary": list(self.label_vocabulary),
        }

    def files(self) -> dict[str, bytes]:
        return {
            "manifest.csv": self.manifest_csv().encode("utf-8"),
            "template.csv": self.template.encode("utf-8"),
            "package.json": (json.dumps(self.metadata(), sort_keys=True, indent=2) + "\n").encode("utf-8"),
        }

    def write(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for name, content in self.files().items():
            (directory / name).write_bytes(content)
        return directory


def export_test_package(es: EvaluationSet) -> TestPackage:
    from .submission import emit_template

    es.require_approved()
    ordered = export_order(es)
    return TestPackage(
        set_id=es.set_id,
        version=es.version,
        label_vocabulary=es.label_vocabulary,
        images=tuple((c.case_id, c.image_ref) for c in ordered),
        template=emit_template(es),
    )


QuasiIdentifier = tuple[int, Sex, str]


def k_anonymity_audit(cases: Iterable[CaseRecord], k: int = DEFAULT_K) -> list[tuple[QuasiIdentifier, int]]:
    """Quasi-identifier groups of (age, sex, country) smaller than ``k``."""
    if k < 2:
        raise ValueError("k must be >= 2")
    groups = Counter((c.age_years, c.sex, c.country) for c in cases)
    violations = [(qi, n) for qi, n in groups.items() if n < k]
    violations.sort(key=lambda item: (item[1], item[0][0], item[0][1].value, item[0][2]))
    return violations
