from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from radbench.cohort import CaseRecord, EvaluationSet, ReviewState, Sex  # noqa: E402
from radbench.submission import OriginDeclaration, OriginKind  # noqa: E402

VOCAB = ("Pneumonia", "NoFinding")


def case(cid, label="Pneumonia", sex=Sex.Female, age=40, country="GH", facility="fac-1"):
    return CaseRecord(cid, f"uri://{cid}", label, sex, age, facility, country)


def approved(cases, vocab=VOCAB, set_id="set-test", version=1, single_gender=False, **kw) -> EvaluationSet:
    return EvaluationSet(
        set_id=set_id,
        condition_name=kw.pop("condition_name", "Test condition"),
        label_vocabulary=tuple(vocab),
        single_gender_condition=single_gender,
        cases=tuple(cases),
        review_state=ReviewState.Approved,
        version=version,
        **kw,
    )


def ai_origin(country="GH", submitter="dev-1"):
    return OriginDeclaration(submitter, OriginKind.AiSystem, development_country=country)


def rad_origin(country="GH", submitter="rad-1"):
    return OriginDeclaration(submitter, OriginKind.RadiologistRead, radiologist_country=country)


def prob_csv(es, probs: dict[str, list[float]]) -> str:
    """Submission CSV with probability columns; probs maps case_id -> vocab-ordered values."""
    header = "ID,Class," + ",".join(f"prob_{l}" for l in es.label_vocabulary)
    lines = [header]
    for c in es.cases:
        p = probs[c.case_id]
        top = max(range(len(p)), key=lambda i: (p[i], -i))
        lines.append(f"{c.case_id},{es.label_vocabulary[top]}," + ",".join(repr(v) for v in p))
    return "\n".join(lines) + "\n"


def class_csv(es, classes: dict[str, str]) -> str:
    return "ID,Class\n" + "".join(f"{c.case_id},{classes[c.case_id]}\n" for c in es.cases)


def perfect_probs(es):
    out = {}
    for c in es.cases:
        out[c.case_id] = [1.0 if l == c.true_label else 0.0 for l in es.label_vocabulary]
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20191111)


@pytest.fixture
def three_cases():
    return approved([
        case("x1", "Pneumonia", Sex.Female, 62, "GH"),
        case("x2", "NoFinding", Sex.Male, 40, "NG"),
        case("x3", "Pneumonia", Sex.Male, 45, "KE"),
    ])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
