import json
from collections import Counter

import pytest

from cohorts import check_partitions, random_cohort, random_submission
from conftest import VOCAB, ai_origin, approved, case, class_csv, prob_csv
from oracles import pairwise_auc
from radbench.cohort import Sex
from radbench.errors import VersionMismatch
from radbench.metrics import Flag
from radbench.strata import (
    ALL,
    GLOBAL_KEY,
    EvalConfig,
    apply_feasibility_collapse,
    build_strata,
    cell_metrics,
    evaluate_stratified,
)
from radbench.submission import parse_submission
from radbench.taxonomy import DEFAULT_AGE_BINNING, LocationScope

SCOPES = [s.name for s in LocationScope]


def test_partitions_hold_on_random_cohorts(rng):
    for _ in range(150):
        es = random_cohort(rng, int(rng.integers(1, 300)), single_gender=bool(rng.random() < 0.2))
        assert check_partitions(es, config=EvalConfig(n_min=int(rng.integers(1, 60)))) == []


def test_strata_cell_kinds(rng):
    es = random_cohort(rng, 200)
    kinds = Counter(c.key.kind for c in build_strata(es, "GH"))
    ages = len({DEFAULT_AGE_BINNING.group_of(c.age_years) for c in es.cases})
    assert kinds == {
        "location": 4, "gender": 2, "age": ages,
        "location_gender": 8, "location_age": 4 * ages, "gender_age": 2 * ages,
    }


def test_single_gender_has_no_gender_cells(rng):
    es = random_cohort(rng, 120, single_gender=True)
    assert not any(c.key.gender != ALL for c in build_strata(es, "GH"))
    sub = random_submission(rng, es)
    report = evaluate_stratified(sub, es, EvalConfig(n_min=5))
    doc = report.to_dict()
    assert "gender_section" not in doc
    assert all("by_gender" not in v for v in doc["location_section"].values())


def test_location_is_relative_to_origin():
    es = approved([case("a", country="GH"), case("b", country="NG"), case("c", country="KE"), case("d", country="FR")])
    sizes = {c.key.location: c.n for c in build_strata(es, "GH") if c.key.kind == "location"}
    assert sizes == {"Country": 1, "Region": 2, "Continent": 3, "Global": 4}
    sizes = {c.key.location: c.n for c in build_strata(es, "FR") if c.key.kind == "location"}
    assert sizes == {"Country": 1, "Region": 1, "Continent": 1, "Global": 4}


def test_feasibility_collapse_keeps_thin_global():
    es = approved([case(f"c{i}", VOCAB[i % 2]) for i in range(10)])
    sub = parse_submission(class_csv(es, {c.case_id: c.true_label for c in es.cases}), es, ai_origin())
    report = evaluate_stratified(sub, es, EvalConfig(n_min=30))
    assert list(report.location_section) == ["Global"]
    assert Flag.BelowMinN in report.location_section["Global"].metrics.flags
    assert report.age_section == {}
    assert all(e.reason == "BelowMinN" for e in report.collapse_log)


def test_cell_metrics_equal_subset_evaluation(rng):
    es = random_cohort(rng, 250)
    sub = random_submission(rng, es, coarse=True)
    report = evaluate_stratified(sub, es, EvalConfig(n_min=10))
    for cell in apply_feasibility_collapse(build_strata(es, "GH"), EvalConfig(n_min=10))[0]:
        if cell.key.kind != "location":
            continue
        got = report.location_section[cell.key.location].metrics
        truths = [c.true_label for c in es.cases if c.case_id in set(cell.case_ids)]
        for i, label in enumerate(VOCAB):
            scores = [sub.rows[cid].probabilities[i] for cid in cell.case_ids]
            expected = pairwise_auc(scores, [t == label for t in truths])
            assert got.per_label[label].auc == pytest.approx(expected, abs=1e-12)
        assert got == cell_metrics(sub, es, cell.case_ids)


def test_intersections_report_auc_only_by_default(rng):
    es = random_cohort(rng, 400)
    sub = random_submission(rng, es)
    doc = evaluate_stratified(sub, es, EvalConfig(n_min=5)).to_dict()
    inter = doc["location_section"]["Global"]["by_gender"]["Female"]
    assert "accuracy" not in inter
    assert "accuracy" in doc["location_section"]["Global"]["metrics"]
    doc_all = evaluate_stratified(sub, es, EvalConfig(n_min=5, intersection_metric="all")).to_dict()
    assert "accuracy" in doc_all["location_section"]["Global"]["by_gender"]["Female"]


def test_report_is_deterministic_and_worker_independent(rng):
    es = random_cohort(rng, 300)
    sub = random_submission(rng, es)
    one = json.dumps(evaluate_stratified(sub, es, EvalConfig(n_min=5)).to_dict(), sort_keys=True)
    two = json.dumps(evaluate_stratified(sub, es, EvalConfig(n_min=5)).to_dict(), sort_keys=True)
    four = json.dumps(evaluate_stratified(sub, es, EvalConfig(n_min=5, workers=4)).to_dict(), sort_keys=True)
    assert one == two == four


def test_version_mismatch(rng):
    es = random_cohort(rng, 20)
    sub = random_submission(rng, es)
    from dataclasses import replace

    with pytest.raises(VersionMismatch):
        evaluate_stratified(sub, replace(es, version=2))


def test_unknown_sex_only_in_non_gender_cells():
    es = approved([case("a", sex=Sex.Unknown), case("b", "NoFinding", sex=Sex.Male), case("c", sex=Sex.Female)])
    cells = {c.key: c.case_ids for c in build_strata(es, "GH")}
    assert "a" in cells[GLOBAL_KEY]
    assert all("a" not in ids for k, ids in cells.items() if k.gender != ALL)


def test_single_class_stratum_is_flagged_not_zero():
    es = approved([case(f"p{i}", "Pneumonia", sex=Sex.Male) for i in range(5)] + [case(f"n{i}", "NoFinding", sex=Sex.Female) for i in range(5)])
    probs = {c.case_id: ([0.8, 0.2] if c.true_label == "Pneumonia" else [0.3, 0.7]) for c in es.cases}
    report = evaluate_stratified(parse_submission(prob_csv(es, probs), es, ai_origin()), es, EvalConfig(n_min=1))
    male = report.gender_section["Male"].metrics
    assert male.macro_auc is None
    assert Flag.SingleClass in male.flags
    assert report.global_macro_auc() == 1.0
