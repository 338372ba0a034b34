import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import count_confusion, pairwise_auc, pairwise_auc_loops, roc_by_enumeration
from radbench.errors import AllUndefined, EmptyInput, LengthMismatch, SingleClass, UnknownLabel
from radbench.metrics import (
    ConfusionMatrix,
    Flag,
    accuracy,
    auc,
    confusion,
    macro_ovr_auc,
    metric_report,
    roc_points,
    sensitivity_specificity,
)

PN = ("P", "N")


# --- confusion / accuracy / sensitivity ---------------------------------

def test_confusion_example():
    cm = confusion(["P", "P", "N"], ["P", "N", "N"], PN)
    assert cm.counts.tolist() == count_confusion(["P", "P", "N"], ["P", "N", "N"], list(PN)) == [[1, 1], [0, 1]]


def test_confusion_identity_is_diagonal(rng):
    vocab = ("a", "b", "c", "d")
    truths = list(rng.choice(vocab, 40))
    cm = confusion(truths, truths, vocab)
    assert np.count_nonzero(cm.counts - np.diag(np.diag(cm.counts))) == 0
    assert cm.total == 40


def test_confusion_errors():
    with pytest.raises(UnknownLabel):
        confusion(["P"], ["Q"], PN)
    with pytest.raises(LengthMismatch):
        confusion(["P", "N"], ["P"], PN)


def test_accuracy_examples():
    assert accuracy(confusion(["P", "N"], ["P", "N"], PN)) == 1.0
    assert accuracy(confusion(["P", "P", "N"], ["P", "N", "N"], PN)) == pytest.approx(2 / 3)
    assert accuracy(confusion(["P", "N"], ["N", "P"], PN)) == 0.0
    with pytest.raises(EmptyInput):
        accuracy(confusion([], [], PN))


def test_sensitivity_specificity_examples():
    cm = confusion(["P", "P", "N"], ["P", "N", "N"], PN)
    assert sensitivity_specificity(cm, "P") == (0.5, 1.0)
    no_pos = confusion(["N", "N"], ["P", "N"], PN)
    sens, spec = sensitivity_specificity(no_pos, "P")
    assert sens is None and spec == 0.5
    perfect = confusion(["P", "N", "N"], ["P", "N", "N"], PN)
    assert sensitivity_specificity(perfect, "P") == (1.0, 1.0)
    with pytest.raises(UnknownLabel):
        sensitivity_specificity(cm, "X")


def test_specificity_is_one_minus_fpr(rng):
    vocab = ("a", "b", "c")
    for _ in range(50):
        t = list(rng.choice(vocab, 30))
        p = list(rng.choice(vocab, 30))
        cm = confusion(t, p, vocab)
        for label in vocab:
            _, spec = sensitivity_specificity(cm, label)
            fp = sum(1 for a, b in zip(t, p) if a != label and b == label)
            tn = sum(1 for a, b in zip(t, p) if a != label and b != label)
            if fp + tn:
                assert spec == pytest.approx(1 - fp / (fp + tn))


# --- ROC / AUC -------------------------------------------------------------

def test_hand_computed_roc():
    curve = roc_points([0.9, 0.4, 0.8, 0.3], [1, 1, 0, 0])
    assert curve.points == [(0, 0), (0, 0.5), (0.5, 0.5), (0.5, 1), (1, 1)]
    assert curve.thresholds.tolist() == [0.9, 0.8, 0.4, 0.3]
    assert auc(curve) == 0.75
    assert pairwise_auc([0.9, 0.4, 0.8, 0.3], [1, 1, 0, 0]) == 0.75


def test_perfect_separation():
    curve = roc_points([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
    assert (0.0, 1.0) in curve.points
    assert auc(curve) == 1.0


def test_all_ties_half():
    curve = roc_points([0.3] * 6, [1, 0, 1, 0, 0, 1])
    assert curve.points == [(0, 0), (1, 1)]
    assert auc(curve) == 0.5


def test_single_class():
    with pytest.raises(SingleClass):
        roc_points([0.1, 0.2], [1, 1])
    with pytest.raises(SingleClass):
        roc_points([0.1, 0.2], [0, 0])


def test_roc_matches_threshold_enumeration(rng):
    for _ in range(100):
        n = int(rng.integers(2, 40))
        scores = (rng.integers(0, 6, n) / 5.0).tolist()
        truths = (rng.random(n) < 0.5).tolist()
        if all(truths) or not any(truths):
            continue
        assert roc_points(scores, truths).points == pytest.approx(roc_by_enumeration(scores, truths))


def test_oracles_agree_with_each_other(rng):
    for _ in range(50):
        n = int(rng.integers(2, 30))
        s = rng.integers(0, 4, n).tolist()
        t = [bool(x) for x in rng.integers(0, 2, n)]
        if all(t) or not any(t):
            continue
        assert pairwise_auc(s, t) == pytest.approx(pairwise_auc_loops(s, t), abs=1e-12)


@st.composite
def binary_instances(draw, max_n=200):
    n = draw(st.integers(2, max_n))
    truths = draw(st.lists(st.booleans(), min_size=n, max_size=n).filter(lambda t: any(t) and not all(t)))
    grid = draw(st.sampled_from([3, 10, 1000]))
    scores = draw(st.lists(st.integers(0, grid), min_size=n, max_size=n))
    return [s / grid for s in scores], truths


@given(binary_instances())
@settings(max_examples=200, deadline=None)
def test_auc_equals_pairwise_statistic(inst):
    scores, truths = inst
    assert abs(auc(roc_points(scores, truths)) - pairwise_auc(scores, truths)) <= 1e-9


@given(binary_instances())
@settings(max_examples=150, deadline=None)
def test_curve_invariants(inst):
    curve = roc_points(*inst)
    pts = curve.points
    assert pts[0] == (0.0, 0.0) and pts[-1] == (1.0, 1.0)
    assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)
    assert np.all((curve.fpr >= 0) & (curve.fpr <= 1) & (curve.tpr >= 0) & (curve.tpr <= 1))
    assert len(curve.thresholds) == len(pts) - 1
    assert len(set(curve.thresholds.tolist())) == len(curve.thresholds)


@given(binary_instances())
@settings(max_examples=150, deadline=None)
def test_complement_symmetry(inst):
    scores, truths = inst
    a = auc(roc_points(scores, truths))
    b = auc(roc_points([-s for s in scores], truths))
    assert abs(a + b - 1.0) <= 1e-9


@given(binary_instances(max_n=80), st.randoms(use_true_random=False))
@settings(max_examples=100, deadline=None)
def test_permutation_invariance(inst, rnd):
    scores, truths = inst
    order = list(range(len(scores)))
    rnd.shuffle(order)
    a = roc_points(scores, truths)
    b = roc_points([scores[i] for i in order], [truths[i] for i in order])
    assert a.points == b.points
    assert auc(a) == pytest.approx(auc(b), abs=1e-12)


@given(binary_instances(max_n=80), st.sampled_from(["exp", "cube", "affine", "logit"]))
@settings(max_examples=100, deadline=None)
def test_monotone_transform_invariance(inst, kind):
    scores, truths = inst
    f = {
        "exp": np.exp,
        "cube": lambda x: (x - 0.3) ** 3,
        "affine": lambda x: 7.0 * x - 2.0,
        "logit": lambda x: np.log((x + 0.01) / (1.02 - x)),
    }[kind]
    transformed = [float(f(np.float64(s))) for s in scores]
    a, b = roc_points(scores, truths), roc_points(transformed, truths)
    assert a.points == b.points
    assert auc(a) == auc(b)


# --- multi-class ----------------------------------------------------------

def test_macro_binary_symmetry(rng):
    vocab = ("A", "B")
    truths = list(rng.choice(vocab, 40))
    p = rng.random(40)
    per, macro = macro_ovr_auc({"A": p, "B": 1 - p}, truths, vocab)
    assert per["A"] == pytest.approx(per["B"], abs=1e-12)
    assert macro == pytest.approx((per["A"] + per["B"]) / 2)


def test_macro_excludes_absent_label(rng):
    vocab = ("A", "B", "C")
    truths = list(rng.choice(["A", "B"], 30))
    scores = {l: rng.random(30) for l in vocab}
    per, macro = macro_ovr_auc(scores, truths, vocab)
    assert per["C"] is None
    assert macro == pytest.approx((per["A"] + per["B"]) / 2)
    report = metric_report(truths, truths, scores, vocab)
    assert Flag.SingleClass in report.per_label["C"].flags
    assert report.per_label["C"].auc is None
    assert report.macro_auc == pytest.approx(macro)


def test_macro_random_four_label_matches_oracle(rng):
    vocab = ("A", "B", "C", "D")
    truths = list(rng.choice(vocab, 50))
    raw = rng.integers(0, 10, size=(50, 4)).astype(float) + 0.1
    probs = raw / raw.sum(axis=1, keepdims=True)
    scores = {l: probs[:, i] for i, l in enumerate(vocab)}
    per, macro = macro_ovr_auc(scores, truths, vocab)
    expected = {l: pairwise_auc(scores[l], [t == l for t in truths]) for l in vocab}
    for l in vocab:
        assert abs(per[l] - expected[l]) <= 1e-9
    assert abs(macro - np.mean(list(expected.values()))) <= 1e-9


def test_macro_all_undefined():
    with pytest.raises(AllUndefined):
        macro_ovr_auc({"A": [0.1, 0.3], "B": [0.9, 0.7]}, ["A", "A"], ("A", "B"))


# --- report ---------------------------------------------------------------

def test_metric_report_values_and_bounds(rng):
    vocab = ("A", "B", "C")
    for _ in range(30):
        n = int(rng.integers(5, 60))
        t = list(rng.choice(vocab, n))
        p = list(rng.choice(vocab, n))
        scores = {l: rng.random(n) for l in vocab}
        r = metric_report(t, p, scores, vocab)
        assert r.n == n
        values = [r.accuracy, r.macro_auc] + [
            v for m in r.per_label.values() for v in (m.auc, m.sensitivity, m.specificity)
        ]
        for v in values:
            assert v is None or 0.0 <= v <= 1.0
        for m in r.per_label.values():
            if None in (m.auc, m.sensitivity, m.specificity):
                assert m.flags


def test_metric_report_empty_cell_is_flagged():
    r = metric_report([], [], {"A": [], "B": []}, ("A", "B"))
    assert r.n == 0 and r.accuracy is None and r.macro_auc is None
    assert Flag.EmptyInput in r.flags


def test_metric_report_degenerate_flag():
    r = metric_report(["A", "B"], ["A", "B"], {"A": [1.0, 0.0], "B": [0.0, 1.0]}, ("A", "B"), degenerate=True)
    assert Flag.DegenerateScores in r.flags
    assert r.macro_auc == 1.0


def test_auc_only_report_omits_threshold_metrics():
    r = metric_report(["A", "B"], ["A", "A"], {"A": [0.9, 0.2], "B": [0.1, 0.8]}, ("A", "B"), full=False)
    d = r.to_dict()
    assert "accuracy" not in d
    assert "sensitivity" not in d["per_label"]["A"]
    assert d["macro_auc"] == 1.0


def test_confusion_matrix_serialisation():
    cm = confusion(["P", "N"], ["P", "P"], PN)
    assert cm.to_dict() == {"labels": ["P", "N"], "counts": [[1, 0], [1, 0]]}
    assert cm == ConfusionMatrix(PN, np.array([[1, 0], [1, 0]]))
