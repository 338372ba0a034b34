"""Hot inner loops for ROC sweeps, trapezoidal area and confusion counting.

Each kernel has a vectorised numpy implementation and an explicit-loop
implementation intended for ``numba.njit``. The exported names point to the
jitted loops when numba is active and to the numpy versions otherwise; both
are kept importable so they can be cross-checked and benchmarked.
"""

from __future__ import annotations

import numpy as np

from ._accel import BACKEND, HAS_NUMBA, njit


def roc_counts_numpy(scores: np.ndarray, truths: np.ndarray):
    """Cumulative (fp, tp) counts at each distinct score, highest score first.

    Returns ``(fps, tps, thresholds)``; ties share a single threshold.
    """
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    t = truths[order].astype(np.int64)
    idx = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tps = np.cumsum(t)[idx]
    fps = idx + 1 - tps
    return fps, tps, s[idx]


def _roc_counts_loop(scores, truths):
    n = scores.shape[0]
    order = np.argsort(-scores, kind="mergesort")
    fps = np.empty(n, dtype=np.int64)
    tps = np.empty(n, dtype=np.int64)
    thr = np.empty(n, dtype=np.float64)
    m = 0
    tp = 0
    fp = 0
    for j in range(n):
        i = order[j]
        if truths[i]:
            tp += 1
        else:
            fp += 1
        if j == n - 1 or scores[order[j + 1]] != scores[i]:
            fps[m] = fp
            tps[m] = tp
            thr[m] = scores[i]
            m += 1
    return fps[:m], tps[:m], thr[:m]


def trapezoid_numpy(x: np.ndarray, y: np.ndarray) -> float:
    # cumsum accumulates left to right, matching the loop bit for bit
    terms = np.diff(x) * (y[1:] + y[:-1])
    return float(np.cumsum(terms)[-1]) / 2.0 if terms.size else 0.0


def _trapezoid_loop(x, y):
    area = 0.0
    for i in range(1, x.shape[0]):
        area += (x[i] - x[i - 1]) * (y[i] + y[i - 1])
    return area / 2.0


def confusion_counts_numpy(true_idx: np.ndarray, pred_idx: np.ndarray, k: int) -> np.ndarray:
    flat = np.bincount(true_idx * k + pred_idx, minlength=k * k)
    return flat.reshape(k, k).astype(np.int64)


def _confusion_counts_loop(true_idx, pred_idx, k):
    out = np.zeros((k, k), dtype=np.int64)
    for i in range(true_idx.shape[0]):
        out[true_idx[i], pred_idx[i]] += 1
    return out


roc_counts_loop = njit(cache=True)(_roc_counts_loop)
trapezoid_loop = njit(cache=True)(_trapezoid_loop)
confusion_counts_loop = njit(cache=True)(_confusion_counts_loop)

if HAS_NUMBA:
    roc_counts = roc_counts_loop
    confusion_counts = confusion_counts_loop

    def trapezoid(x, y):
        return float(trapezoid_loop(x, y))
else:
    roc_counts = roc_counts_numpy
    trapezoid = trapezoid_numpy
    confusion_counts = confusion_counts_numpy

__all__ = [
    "BACKEND",
    "roc_counts",
    "trapezoid",
    "confusion_counts",
    "roc_counts_numpy",
    "roc_counts_loop",
    "trapezoid_numpy",
    "trapezoid_loop",
    "confusion_counts_numpy",
    "confusion_counts_loop",
]
