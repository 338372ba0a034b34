"""Synthetic cohort with a planted in-country vs external performance gap.

Scores come from a fixed simulated model: for a case with true label y the
latent vector is ``mu_g * onehot(y) + N(0, I)`` and the submitted
probabilities are its softmax. ``mu_g`` depends only on whether the case is
from the development country. Each ``mu`` is calibrated by bisection on a
large, fixed-seed simulation so that the population macro one-vs-rest AUC
hits the target. The planted Global value is the population macro AUC of the
same mixture, estimated on an independent large simulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from conftest import approved, case
from radbench.cohort import Sex

THORACIC_LABELS = (
    "Atelectasis",
    "Cardiomegaly",
    "Enlarged_Cardiomegaly",
    "Consolidation",
    "Edema",
    "Lung_Lesion",
    "Lung_Opacity",
    "Pneumonia",
    "Pneumothorax",
    "Fracture",
    "Pleural_Effusion",
    "Pleural_Other",
)
ORIGIN = "GH"
EXTERNAL = ("NG", "SN", "CI", "KE", "ET", "EG", "ZA", "FR", "GB", "US", "BR", "IN", "CN", "JP")
IN_TARGET = 0.93
EX_TARGET = 0.80


def mann_whitney_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    ranks = rankdata(scores)
    n_pos = int(positive.sum())
    n_neg = len(scores) - n_pos
    return (ranks[positive].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def macro_auc(probs: np.ndarray, labels: np.ndarray) -> float:
    k = probs.shape[1]
    return float(np.mean([mann_whitney_auc(probs[:, j], labels == j) for j in range(k)]))


def simulate(mu: np.ndarray, labels: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Softmax probabilities; ``mu`` is per case, ``noise`` has shape (n, k)."""
    k = noise.shape[1]
    z = noise + mu[:, None] * np.eye(k)[labels]
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def calibrate(target: float, k: int, n: int = 40_000, seed: int = 11) -> float:
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, k, n)
    noise = rng.normal(size=(n, k))
    lo, hi = 0.0, 8.0
    for _ in range(40):
        mid = (lo + hi) / 2
        value = macro_auc(simulate(np.full(n, mid), labels, noise), labels)
        lo, hi = (mid, hi) if value < target else (lo, mid)
    return (lo + hi) / 2


@dataclass(frozen=True)
class PlantedCohort:
    es: object
    probs: dict
    mu_in: float
    mu_ex: float
    planted_country: float
    planted_external: float
    planted_global: float


def planted_cohort(n: int = 5000, in_share: float = 0.12, seed: int = 2019) -> PlantedCohort:
    k = len(THORACIC_LABELS)
    mu_in, mu_ex = calibrate(IN_TARGET, k), calibrate(EX_TARGET, k)

    # independent population estimate of the mixture's macro AUC
    big = np.random.default_rng(seed + 1)
    m = 200_000
    labels = big.integers(0, k, m)
    home = big.random(m) < in_share
    probs = simulate(np.where(home, mu_in, mu_ex), labels, big.normal(size=(m, k)))
    planted_global = macro_auc(probs, labels)
    planted_country = macro_auc(probs[home], labels[home])
    planted_external = macro_auc(probs[~home], labels[~home])

    rng = np.random.default_rng(seed)
    n_home = int(round(n * in_share))
    home = np.zeros(n, dtype=bool)
    home[:n_home] = True
    labels = rng.integers(0, k, n)
    probs = simulate(np.where(home, mu_in, mu_ex), labels, rng.normal(size=(n, k)))
    probs = np.round(probs, 9)
    probs[:, -1] = 1.0 - probs[:, :-1].sum(axis=1)
    sexes = (Sex.Male, Sex.Female)
    cases, table = [], {}
    for i in range(n):
        country = ORIGIN if home[i] else EXTERNAL[int(rng.integers(len(EXTERNAL)))]
        cid = f"cxr{i:05d}"
        cases.append(case(cid, THORACIC_LABELS[labels[i]], sexes[int(rng.integers(2))], int(rng.integers(18, 95)), country))
        table[cid] = [float(v) for v in probs[i]]
    es = approved(cases, vocab=THORACIC_LABELS, condition_name="Thoracic findings")
    return PlantedCohort(es, table, mu_in, mu_ex, planted_country, planted_external, planted_global)
