"""Precision Evaluation: demographic strata, feasibility collapse and the report tree."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .cohort import EvaluationSet, Sex
from .errors import VersionMismatch
from .metrics import Flag, MetricReport, metric_report
from .submission import OriginDeclaration, SubmissionFile, score_table
from .taxonomy import DEFAULT_AGE_BINNING, AgeBinning, LocationScope, LocationTaxonomy, default_taxonomy

ALL = "All"
GENDERS = (Sex.Male.value, Sex.Female.value)
DEFAULT_N_MIN = 30


@dataclass(frozen=True, order=True)
class StratumKey:
    location: str = ALL
    gender: str = ALL
    age_group: str = ALL

    @property
    def kind(self) -> str:
        parts = [
            name
            for name, value in (("location", self.location), ("gender", self.gender), ("age", self.age_group))
            if value != ALL
        ]
        return "_".join(parts)

    @property
    def is_intersection(self) -> bool:
        return "_" in self.kind

    def to_dict(self) -> dict:
        return {"location": self.location, "gender": self.gender, "age_group": self.age_group}


GLOBAL_KEY = StratumKey(location=LocationScope.Global.name)


@dataclass(frozen=True)
class StratumCell:
    key: StratumKey
    case_ids: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.case_ids)


@dataclass(frozen=True)
class CollapseEntry:
    key: StratumKey
    reason: str
    n: int

    def to_dict(self) -> dict:
        return {"key": self.key.to_dict(), "reason": self.reason, "n": self.n}


@dataclass(frozen=True)
class EvalConfig:
    n_min: int = DEFAULT_N_MIN
    age_binning: AgeBinning = DEFAULT_AGE_BINNING
    intersection_metric: str = "auc"  # "auc" or "all"
    min_radiologists: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.n_min < 1:
            raise ValueError("n_min must be >= 1")
        if self.intersection_metric not in ("auc", "all"):
            raise ValueError("intersection_metric must be 'auc' or 'all'")
        if self.min_radiologists < 1:
            raise ValueError("min_radiologists must be >= 1")


def build_strata(
    es: EvaluationSet,
    origin_country: str,
    config: EvalConfig = EvalConfig(),
    taxonomy: LocationTaxonomy | None = None,
) -> list[StratumCell]:
    """All primary and pairwise-intersection cells for ``es`` relative to an origin."""
    es.require_approved()
    taxonomy = taxonomy or default_taxonomy()
    taxonomy.resolve(origin_country)
    binning = config.age_binning

    scopes_of = {c.case_id: taxonomy.location_scopes(c.country, origin_country) for c in es.cases}
    age_of = {c.case_id: binning.group_of(c.age_years) for c in es.cases}
    loc_sets = {
        scope.name: [c.case_id for c in es.cases if scope in scopes_of[c.case_id]] for scope in LocationScope
    }
    present_ages = {age_of[c.case_id] for c in es.cases}
    ages = [label for label in binning.labels if label in present_ages]
    genders = [] if es.single_gender_condition else list(GENDERS)
    sex_of = {c.case_id: c.sex.value for c in es.cases}

    cells: list[StratumCell] = []
    for loc, ids in loc_sets.items():
        cells.append(StratumCell(StratumKey(location=loc), tuple(ids)))
    for g in genders:
        cells.append(StratumCell(StratumKey(gender=g), tuple(c.case_id for c in es.cases if sex_of[c.case_id] == g)))
    for a in ages:
        cells.append(StratumCell(StratumKey(age_group=a), tuple(c.case_id for c in es.cases if age_of[c.case_id] == a)))
    for loc, ids in loc_sets.items():
        for g in genders:
            cells.append(StratumCell(StratumKey(location=loc, gender=g), tuple(i for i in ids if sex_of[i] == g)))
    for loc, ids in loc_sets.items():
        for a in ages:
            cells.append(StratumCell(StratumKey(location=loc, age_group=a), tuple(i for i in ids if age_of[i] == a)))
    for g in genders:
        for a in ages:
            cells.append(
                StratumCell(
                    StratumKey(gender=g, age_group=a),
                    tuple(c.case_id for c in es.cases if sex_of[c.case_id] == g and age_of[c.case_id] == a),
                )
            )
    return cells


def apply_feasibility_collapse(
    cells: Sequence[StratumCell], config: EvalConfig = EvalConfig()
) -> tuple[list[StratumCell], list[CollapseEntry]]:
    """Drop cells below ``n_min``; the Global cell is always kept."""
    retained, log = [], []
    for cell in cells:
        if cell.n >= config.n_min or cell.key == GLOBAL_KEY:
            retained.append(cell)
        else:
            log.append(CollapseEntry(cell.key, Flag.BelowMinN.value, cell.n))
    return retained, log


@dataclass(frozen=True)
class LocationEntry:
    metrics: MetricReport
    by_gender: Optional[dict[str, MetricReport]]
    by_age: dict[str, MetricReport]

    def to_dict(self) -> dict:
        out = {"metrics": self.metrics.to_dict(), "by_age": {k: v.to_dict() for k, v in self.by_age.items()}}
        if self.by_gender is not None:
            out["by_gender"] = {k: v.to_dict() for k, v in self.by_gender.items()}
        return out


@dataclass(frozen=True)
class GenderEntry:
    metrics: MetricReport
    by_age: dict[str, MetricReport]

    def to_dict(self) -> dict:
        return {"metrics": self.metrics.to_dict(), "by_age": {k: v.to_dict() for k, v in self.by_age.items()}}


@dataclass(frozen=True)
class AgeEntry:
    metrics: MetricReport
    by_gender: Optional[dict[str, MetricReport]]

    def to_dict(self) -> dict:
        out = {"metrics": self.metrics.to_dict()}
        if self.by_gender is not None:
            out["by_gender"] = {k: v.to_dict() for k, v in self.by_gender.items()}
        return out


@dataclass(frozen=True)
class PrecisionReport:
    set_id: str
    set_version: int
    submission_id: Optional[str]
    origin: OriginDeclaration
    condition_name: str
    label_vocabulary: tuple[str, ...]
    n_min: int
    age_bins: tuple
    taxonomy_version: str
    location_section: dict[str, LocationEntry]
    gender_section: Optional[dict[str, GenderEntry]]
    age_section: dict[str, AgeEntry]
    collapse_log: tuple[CollapseEntry, ...]
    baselines: Optional[dict] = None
    baseline_deltas: Optional[dict] = None
    baseline_flags: tuple[str, ...] = ()
    # case ids of retained location cells; used by the baseline module, not serialised
    location_case_ids: dict[str, tuple[str, ...]] = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> dict:
        out = {
            "engine_version": __version__,
            "set_id": self.set_id,
            "set_version": self.set_version,
            "submission_id": self.submission_id,
            "origin": self.origin.to_dict(),
            "condition_name": self.condition_name,
            "label_vocabulary": list(self.label_vocabulary),
            "config": {"n_min": self.n_min, "age_bins": [list(r) for r in self.age_bins]},
            "taxonomy_version": self.taxonomy_version,
            "location_section": {k: v.to_dict() for k, v in self.location_section.items()},
            "age_section": {k: v.to_dict() for k, v in self.age_section.items()},
            "collapse_log": [e.to_dict() for e in self.collapse_log],
            "baselines": self.baselines,
            "baseline_deltas": self.baseline_deltas,
            "baseline_flags": list(self.baseline_flags),
        }
        if self.gender_section is not None:
            out["gender_section"] = {k: v.to_dict() for k, v in self.gender_section.items()}
        return out

    def global_macro_auc(self) -> Optional[float]:
        return self.location_section[LocationScope.Global.name].metrics.macro_auc


class _CellEvaluator:
    """Precomputed per-case arrays so each cell is a cheap index + metric call."""

    def __init__(self, sub: SubmissionFile, es: EvaluationSet):
        self.vocabulary = es.label_vocabulary
        self.pos = es.case_index()
        self.truths = np.array([c.true_label for c in es.cases], dtype=object)
        self.preds = np.array(sub.predictions(es.case_ids), dtype=object)
        self.scores, self.degenerate = score_table(sub, es.case_ids)

    def __call__(self, case_ids: Sequence[str], full: bool) -> MetricReport:
        idx = np.fromiter((self.pos[c] for c in case_ids), dtype=np.int64, count=len(case_ids))
        return metric_report(
            self.truths[idx].tolist(),
            self.preds[idx].tolist(),
            {label: np.ascontiguousarray(s[idx]) for label, s in self.scores.items()},
            self.vocabulary,
            degenerate=self.degenerate,
            full=full,
        )


def cell_metrics(sub: SubmissionFile, es: EvaluationSet, case_ids: Sequence[str], full: bool = True) -> MetricReport:
    """Metrics for ``sub`` restricted to ``case_ids``; the single path every score goes through."""
    return _CellEvaluator(sub, es)(case_ids, full)


def evaluate_stratified(
    sub: SubmissionFile,
    es: EvaluationSet,
    config: EvalConfig = EvalConfig(),
    taxonomy: LocationTaxonomy | None = None,
    submission_id: Optional[str] = None,
) -> PrecisionReport:
    taxonomy = taxonomy or default_taxonomy()
    if sub.set_id != es.set_id or sub.set_version != es.version:
        raise VersionMismatch(
            f"submission pinned to {sub.set_id} v{sub.set_version}, set is {es.set_id} v{es.version}"
        )
    cells = build_strata(es, sub.origin.country, config, taxonomy)
    retained, log = apply_feasibility_collapse(cells, config)
    evaluator = _CellEvaluator(sub, es)

    def run(cell: StratumCell) -> MetricReport:
        full = not cell.key.is_intersection or config.intersection_metric == "all"
        report = evaluator(cell.case_ids, full)
        if cell.n < config.n_min:
            report = report.with_flags(Flag.BelowMinN)
        return report

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run, retained))
    else:
        results = [run(c) for c in retained]
    by_key = {cell.key: r for cell, r in zip(retained, results)}

    gendered = not es.single_gender_condition
    ages = config.age_binning.labels

    location_section = {}
    for scope in LocationScope:
        key = StratumKey(location=scope.name)
        if key not in by_key:
            continue
        location_section[scope.name] = LocationEntry(
            metrics=by_key[key],
            by_gender={
                g: by_key[StratumKey(location=scope.name, gender=g)]
                for g in GENDERS
                if StratumKey(location=scope.name, gender=g) in by_key
            }
            if gendered
            else None,
            by_age={
                a: by_key[StratumKey(location=scope.name, age_group=a)]
                for a in ages
                if StratumKey(location=scope.name, age_group=a) in by_key
            },
        )

    gender_section = None
    if gendered:
        gender_section = {
            g: GenderEntry(
                metrics=by_key[StratumKey(gender=g)],
                by_age={
                    a: by_key[StratumKey(gender=g, age_group=a)]
                    for a in ages
                    if StratumKey(gender=g, age_group=a) in by_key
                },
            )
            for g in GENDERS
            if StratumKey(gender=g) in by_key
        }

    age_section = {
        a: AgeEntry(
            metrics=by_key[StratumKey(age_group=a)],
            by_gender={
                g: by_key[StratumKey(gender=g, age_group=a)]
                for g in GENDERS
                if StratumKey(gender=g, age_group=a) in by_key
            }
            if gendered
            else None,
        )
        for a in ages
        if StratumKey(age_group=a) in by_key
    }

    return PrecisionReport(
        set_id=es.set_id,
        set_version=es.version,
        submission_id=submission_id,
        origin=sub.origin,
        condition_name=es.condition_name,
        label_vocabulary=es.label_vocabulary,
        n_min=config.n_min,
        age_bins=tuple(tuple(r) for r in config.age_binning.to_rows()),
        taxonomy_version=taxonomy.version,
        location_section=location_section,
        gender_section=gender_section,
        age_section=age_section,
        collapse_log=tuple(log),
        location_case_ids={
            c.key.location: c.case_ids for c in retained if c.key.kind == "location"
        },
    )


def with_submission_id(report: PrecisionReport, submission_id: str) -> PrecisionReport:
    return replace(report, submission_id=submission_id)
