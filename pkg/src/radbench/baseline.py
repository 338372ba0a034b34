"""Radiologist baselines per location scope and AI-vs-radiologist deltas."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .cohort import EvaluationSet
from .errors import BadOrigin, DuplicateRead, NoRadiologistsAnywhere, VersionMismatch
from .metrics import LabelMetrics, MetricReport
from .strata import EvalConfig, PrecisionReport, _CellEvaluator
from .submission import OriginKind, SubmissionFile
from .taxonomy import LocationScope, LocationTaxonomy, default_taxonomy

DIRECT = "Direct"


def radiologist_id(read: SubmissionFile) -> str:
    return read.origin.submitter_id


def _check_reads(reads: Sequence[SubmissionFile], es: EvaluationSet) -> None:
    seen = set()
    for read in reads:
        if read.origin.kind is not OriginKind.RadiologistRead:
            raise BadOrigin(f"submission from {read.origin.submitter_id} is not a radiologist read")
        if read.set_id != es.set_id or read.set_version != es.version:
            raise VersionMismatch(
                f"read by {radiologist_id(read)} pinned to {read.set_id} v{read.set_version}, "
                f"set is {es.set_id} v{es.version}"
            )
        rid = radiologist_id(read)
        if rid in seen:
            raise DuplicateRead(f"radiologist {rid} has more than one read for v{es.version}")
        seen.add(rid)


def radiologists_in_scope(
    scope: LocationScope,
    origin_country: str,
    reads: Sequence[SubmissionFile],
    taxonomy: LocationTaxonomy | None = None,
) -> list[SubmissionFile]:
    taxonomy = taxonomy or default_taxonomy()
    return [
        r for r in reads if scope in taxonomy.location_scopes(r.origin.radiologist_country, origin_country)
    ]


def _mean(values: list[Optional[float]]) -> Optional[float]:
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def mean_report(reports: Sequence[MetricReport]) -> MetricReport:
    """Unweighted per-metric mean over radiologists, ignoring undefined values."""
    labels = list(reports[0].per_label)
    per_label = {}
    for label in labels:
        items = [r.per_label[label] for r in reports]
        auc = _mean([m.auc for m in items])
        sens = _mean([m.sensitivity for m in items])
        spec = _mean([m.specificity for m in items])
        flags = frozenset(f for m in items for f in m.flags) if None in (auc, sens, spec) else frozenset()
        per_label[label] = LabelMetrics(auc=auc, sensitivity=sens, specificity=spec, flags=flags)
    flags = frozenset(f for r in reports for f in r.flags)
    return MetricReport(
        n=reports[0].n,
        per_label=per_label,
        macro_auc=_mean([r.macro_auc for r in reports]),
        accuracy=_mean([r.accuracy for r in reports]),
        flags=flags,
        full=True,
    )


@dataclass(frozen=True)
class BaselineEntry:
    scope: LocationScope
    source_scope: LocationScope
    radiologist_ids: tuple[str, ...]
    per_radiologist: dict[str, MetricReport]
    mean: MetricReport

    @property
    def provenance(self) -> str:
        if self.source_scope == self.scope:
            return DIRECT
        return f"FallbackFrom({self.source_scope.name})"

    def to_dict(self) -> dict:
        return {
            "scope": self.scope.name,
            "provenance": self.provenance,
            "source_scope": self.source_scope.name,
            "radiologist_ids": list(self.radiologist_ids),
            "per_radiologist": {k: v.to_dict() for k, v in self.per_radiologist.items()},
            "mean": self.mean.to_dict(),
        }


@dataclass(frozen=True)
class BaselineTable:
    set_id: str
    set_version: int
    entries: dict[str, BaselineEntry]

    def to_dict(self) -> dict:
        return {
            "set_id": self.set_id,
            "set_version": self.set_version,
            "entries": {k: v.to_dict() for k, v in self.entries.items()},
        }


def baseline_for_scope(
    scope: LocationScope,
    origin_country: str,
    reads: Sequence[SubmissionFile],
    es: EvaluationSet,
    case_ids: Sequence[str],
    config: EvalConfig = EvalConfig(),
    taxonomy: LocationTaxonomy | None = None,
) -> BaselineEntry:
    """Baseline for one scope, walking Country -> Region -> Continent -> Global.

    Whichever radiologists are used, they are scored on ``case_ids`` (the
    cases of the scope being compared), not on their own region's cases.
    """
    es.require_approved()
    _check_reads(reads, es)
    taxonomy = taxonomy or default_taxonomy()
    chosen, source = [], None
    for candidate in LocationScope:
        if candidate < scope:
            continue
        found = radiologists_in_scope(candidate, origin_country, reads, taxonomy)
        if len(found) >= config.min_radiologists or (candidate is LocationScope.Global and found):
            chosen, source = found, candidate
            break
    if not chosen:
        raise NoRadiologistsAnywhere(f"no radiologist reads for {es.set_id} v{es.version}")
    per_rad = {}
    for read in sorted(chosen, key=radiologist_id):
        per_rad[radiologist_id(read)] = _CellEvaluator(read, es)(case_ids, True)
    return BaselineEntry(
        scope=scope,
        source_scope=source,
        radiologist_ids=tuple(per_rad),
        per_radiologist=per_rad,
        mean=mean_report(list(per_rad.values())),
    )


def build_baselines(
    report: PrecisionReport,
    reads: Sequence[SubmissionFile],
    es: EvaluationSet,
    config: EvalConfig = EvalConfig(),
    taxonomy: LocationTaxonomy | None = None,
) -> BaselineTable:
    if report.set_id != es.set_id or report.set_version != es.version:
        raise VersionMismatch("report and set differ in version")
    origin_country = report.origin.country
    entries = {}
    for scope_name, ids in report.location_case_ids.items():
        scope = LocationScope[scope_name]
        entries[scope_name] = baseline_for_scope(scope, origin_country, reads, es, ids, config, taxonomy)
    return BaselineTable(set_id=es.set_id, set_version=es.version, entries=entries)


def _delta(ai: Optional[float], base: Optional[float], path: str, undefined: list[str]) -> Optional[float]:
    if ai is None or base is None:
        undefined.append(path)
        return None
    return ai - base


def metric_deltas(ai: MetricReport, base: MetricReport) -> dict:
    undefined: list[str] = []
    out = {
        "accuracy": _delta(ai.accuracy, base.accuracy, "accuracy", undefined),
        "macro_auc": _delta(ai.macro_auc, base.macro_auc, "macro_auc", undefined),
        "per_label": {},
    }
    for label, m in ai.per_label.items():
        b = base.per_label[label]
        out["per_label"][label] = {
            "auc": _delta(m.auc, b.auc, f"{label}.auc", undefined),
            "sensitivity": _delta(m.sensitivity, b.sensitivity, f"{label}.sensitivity", undefined),
            "specificity": _delta(m.specificity, b.specificity, f"{label}.specificity", undefined),
        }
    out["undefined"] = undefined
    out["flags"] = ["Undefined"] if undefined else []
    return out


def compare(ai_report: PrecisionReport, baselines: BaselineTable) -> dict:
    """Per retained location scope: AI value minus baseline mean, metric by metric."""
    if (ai_report.set_id, ai_report.set_version) != (baselines.set_id, baselines.set_version):
        raise VersionMismatch(
            f"report v{ai_report.set_version} vs baselines v{baselines.set_version}"
        )
    deltas = {}
    for scope_name, entry in ai_report.location_section.items():
        if scope_name in baselines.entries:
            deltas[scope_name] = metric_deltas(entry.metrics, baselines.entries[scope_name].mean)
    return deltas


def attach_baselines(
    report: PrecisionReport,
    reads: Sequence[SubmissionFile],
    es: EvaluationSet,
    config: EvalConfig = EvalConfig(),
    taxonomy: LocationTaxonomy | None = None,
) -> PrecisionReport:
    """Report with ``baselines`` and ``baseline_deltas`` filled in.

    With no reads anywhere the baseline sections stay empty and the report
    carries a ``NoRadiologistsAnywhere`` flag instead.
    """
    try:
        table = build_baselines(report, reads, es, config, taxonomy)
    except NoRadiologistsAnywhere:
        return replace(report, baselines=None, baseline_deltas=None, baseline_flags=("NoRadiologistsAnywhere",))
    return replace(report, baselines=table.to_dict(), baseline_deltas=compare(report, table), baseline_flags=())
