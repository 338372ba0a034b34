"""The ID/Class CSV exchange format.

A blank template has exactly the header ``ID,Class`` and one empty-class row
per case. A populated submission may optionally append one ``prob_<label>``
column per vocabulary label; these are all-or-none.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .cohort import EvaluationSet, export_order
from .errors import (
    ArgmaxMismatch,
    BadHeader,
    BadOrigin,
    BadProbability,
    BlankClass,
    DuplicateCase,
    MalformedRow,
    MissingCase,
    PartialProbabilityColumns,
    ProbabilitySumViolation,
    UnknownCase,
    UnknownLabel,
)
from .taxonomy import LocationTaxonomy, default_taxonomy, normalize_country

PROB_PREFIX = "prob_"
SUM_TOLERANCE = 1e-3


class OriginKind(str, enum.Enum):
    AiSystem = "AiSystem"
    RadiologistRead = "RadiologistRead"


@dataclass(frozen=True)
class OriginDeclaration:
    submitter_id: str
    kind: OriginKind
    development_country: Optional[str] = None
    radiologist_country: Optional[str] = None

    @property
    def country(self) -> str:
        value = self.development_country if self.kind is OriginKind.AiSystem else self.radiologist_country
        assert value is not None
        return value

    def validated(self, taxonomy: LocationTaxonomy | None = None) -> "OriginDeclaration":
        """Normalised copy; raises BadOrigin / UnknownCountry."""
        taxonomy = taxonomy or default_taxonomy()
        kind = OriginKind(self.kind)
        if kind is OriginKind.AiSystem:
            own, other = self.development_country, self.radiologist_country
        else:
            own, other = self.radiologist_country, self.development_country
        if not own or other:
            field_name = "development_country" if kind is OriginKind.AiSystem else "radiologist_country"
            raise BadOrigin(f"{kind.value} origin must set exactly {field_name}")
        own = normalize_country(own)
        taxonomy.resolve(own)
        if kind is OriginKind.AiSystem:
            return OriginDeclaration(self.submitter_id, kind, development_country=own)
        return OriginDeclaration(self.submitter_id, kind, radiologist_country=own)

    def to_dict(self) -> dict:
        return {
            "submitter_id": self.submitter_id,
            "kind": OriginKind(self.kind).value,
            "development_country": self.development_country,
            "radiologist_country": self.radiologist_country,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "OriginDeclaration":
        kind = d.get("kind")
        try:
            kind = OriginKind(kind)
        except ValueError:
            raise BadOrigin(f"unknown origin kind {kind!r}") from None
        country = d.get("country")
        dev = d.get("development_country")
        rad = d.get("radiologist_country")
        if country and not (dev or rad):
            dev, rad = (country, None) if kind is OriginKind.AiSystem else (None, country)
        return cls(submitter_id=str(d.get("submitter_id", "")), kind=kind, development_country=dev, radiologist_country=rad)


@dataclass(frozen=True)
class SubmissionRow:
    predicted_class: str
    probabilities: Optional[tuple[float, ...]] = None  # vocabulary order


@dataclass(frozen=True)
class SubmissionFile:
    set_id: str
    set_version: int
    label_vocabulary: tuple[str, ...]
    case_order: tuple[str, ...]
    rows: Mapping[str, SubmissionRow]
    origin: OriginDeclaration

    @property
    def has_probabilities(self) -> bool:
        return any(r.probabilities is not None for r in self.rows.values())

    def predictions(self, case_ids: Sequence[str] | None = None) -> list[str]:
        ids = self.case_order if case_ids is None else case_ids
        return [self.rows[cid].predicted_class for cid in ids]


def template_csv(case_ids: Sequence[str]) -> str:
    return "ID,Class\n" + "".join(f"{cid},\n" for cid in case_ids)


def emit_template(es: EvaluationSet) -> str:
    es.require_approved()
    return template_csv([c.case_id for c in export_order(es)])


def _split_lines(content: str) -> list[tuple[int, str]]:
    if content.startswith("﻿"):
        content = content[1:]
    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [(i, line.rstrip("\r")) for i, line in enumerate(lines, start=1)]


def _parse_header(line: str, vocabulary: tuple[str, ...]) -> bool:
    """Validate the header; returns whether probability columns are present."""
    cols = line.split(",")
    if cols[:2] != ["ID", "Class"]:
        raise BadHeader(f"header must start with ID,Class, got {line!r}", row=1)
    extra = cols[2:]
    if not extra:
        return False
    if any(not c.startswith(PROB_PREFIX) for c in extra):
        raise BadHeader(f"unexpected column(s) in header {line!r}", row=1)
    expected = [PROB_PREFIX + label for label in vocabulary]
    if extra != expected:
        if sorted(extra) == sorted(expected):
            raise BadHeader("probability columns must follow vocabulary order", row=1)
        raise PartialProbabilityColumns(
            f"probability columns must cover the vocabulary exactly: expected {','.join(expected)}", row=1
        )
    return True


def _parse_probabilities(fields: Sequence[str], row: int) -> tuple[float, ...]:
    probs = []
    for raw in fields:
        try:
            value = float(raw)
        except ValueError:
            raise BadProbability(f"probability {raw!r} is not numeric", row=row) from None
        if not math.isfinite(value) or not 0.0 <= value <= 1.0:
            raise BadProbability(f"probability {raw!r} outside [0, 1]", row=row)
        probs.append(value)
    total = math.fsum(probs)
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise ProbabilitySumViolation(f"probabilities sum to {total:.6g}", row=row)
    return tuple(probs)


def parse_submission(
    content: str,
    es: EvaluationSet,
    origin: OriginDeclaration,
    taxonomy: LocationTaxonomy | None = None,
) -> SubmissionFile:
    """Validate a populated submission against an approved evaluation set.

    Raises on the first problem, in file order; row numbers count the
    header as row 1.
    """
    es.require_approved()
    origin = origin.validated(taxonomy)
    vocabulary = es.label_vocabulary
    label_pos = {label: i for i, label in enumerate(vocabulary)}
    lines = _split_lines(content)
    if not lines:
        raise BadHeader("empty submission", row=1)
    with_probs = _parse_header(lines[0][1], vocabulary)
    width = 2 + (len(vocabulary) if with_probs else 0)
    known = set(es.case_ids)

    rows: dict[str, SubmissionRow] = {}
    for row_no, line in lines[1:]:
        fields = line.split(",")
        if len(fields) != width:
            if with_probs and len(fields) == 2:
                raise PartialProbabilityColumns("row lacks probability values", row=row_no)
            raise MalformedRow(f"expected {width} fields, got {len(fields)}", row=row_no)
        case_id, cls = fields[0].strip(), fields[1].strip()
        if case_id not in known:
            raise UnknownCase(f"case {case_id!r} is not in set {es.set_id} v{es.version}", row=row_no)
        if case_id in rows:
            raise DuplicateCase(f"case {case_id!r} appears more than once", row=row_no)
        if not cls:
            raise BlankClass(f"case {case_id!r} has an empty Class", row=row_no)
        if cls not in label_pos:
            raise UnknownLabel(f"class {cls!r} not in vocabulary", row=row_no)
        probs = None
        if with_probs:
            probs = _parse_probabilities([f.strip() for f in fields[2:]], row_no)
            top = max(range(len(probs)), key=lambda i: (probs[i], -i))
            if top != label_pos[cls]:
                raise ArgmaxMismatch(
                    f"class {cls!r} but highest probability is {vocabulary[top]!r}", row=row_no
                )
        rows[case_id] = SubmissionRow(predicted_class=cls, probabilities=probs)

    for cid in es.case_ids:
        if cid not in rows:
            raise MissingCase(f"case {cid!r} missing from submission", detail=cid)

    return SubmissionFile(
        set_id=es.set_id,
        set_version=es.version,
        label_vocabulary=vocabulary,
        case_order=es.case_ids,
        rows=rows,
        origin=origin,
    )


def scores_for_label(
    sub: SubmissionFile, label: str, case_ids: Sequence[str] | None = None
) -> tuple[np.ndarray, bool]:
    """Per-case scores for ``label`` in set order, and whether they are 0/1 indicators."""
    try:
        i = sub.label_vocabulary.index(label)
    except ValueError:
        raise UnknownLabel(f"label {label!r} not in vocabulary") from None
    ids = sub.case_order if case_ids is None else case_ids
    if sub.has_probabilities:
        return np.array([sub.rows[c].probabilities[i] for c in ids], dtype=np.float64), False
    return np.array([1.0 if sub.rows[c].predicted_class == label else 0.0 for c in ids]), True


def score_table(sub: SubmissionFile, case_ids: Sequence[str] | None = None) -> tuple[dict[str, np.ndarray], bool]:
    """Scores for every label at once."""
    ids = sub.case_order if case_ids is None else case_ids
    degenerate = not sub.has_probabilities
    if degenerate:
        preds = sub.predictions(ids)
        return {
            label: np.fromiter((p == label for p in preds), dtype=np.float64, count=len(preds))
            for label in sub.label_vocabulary
        }, True
    matrix = np.array([sub.rows[c].probabilities for c in ids], dtype=np.float64).reshape(len(ids), -1)
    return {label: np.ascontiguousarray(matrix[:, i]) for i, label in enumerate(sub.label_vocabulary)}, False
