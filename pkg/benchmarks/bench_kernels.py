"""Compare the numba and pure-numpy metric kernels.

    python benchmarks/bench_kernels.py [--sizes 100 1000 100000] [--repeat 20]

The kernel table times both implementations in this process. The end-to-end
row scores one stratified report per backend in a subprocess, since the
backend is fixed at import time by RADBENCH_DISABLE_NUMBA.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from radbench import _kernels as k
from radbench._accel import HAS_NUMBA

E2E = r"""
import time, numpy as np
from radbench.cohort import CaseRecord, EvaluationSet, ReviewState, Sex
from radbench.strata import EvalConfig, evaluate_stratified
from radbench.submission import OriginDeclaration, OriginKind, SubmissionFile, SubmissionRow
from radbench._accel import BACKEND
rng = np.random.default_rng(0)
vocab = tuple(f"L{i}" for i in range(12))
countries = ("GH", "NG", "KE", "FR", "US", "IN")
cases = tuple(
    CaseRecord(f"c{i}", "x", vocab[i % 12], (Sex.Male, Sex.Female)[i % 2], int(rng.integers(0, 100)), "f", countries[i % 6])
    for i in range(__N__)
)
es = EvaluationSet("s", "c", vocab, cases=cases, review_state=ReviewState.Approved)
p = rng.dirichlet(np.ones(12), len(cases))
rows = {c.case_id: SubmissionRow(vocab[int(np.argmax(p[i]))], tuple(p[i])) for i, c in enumerate(cases)}
sub = SubmissionFile("s", 1, vocab, es.case_ids, rows, OriginDeclaration("d", OriginKind.AiSystem, "GH"))
evaluate_stratified(sub, es, EvalConfig())  # warm up / compile
t = time.perf_counter()
for _ in range(3):
    evaluate_stratified(sub, es, EvalConfig())
print(BACKEND, (time.perf_counter() - t) / 3)
"""


def bench(fn, repeat):
    fn()  # warm up (and compile)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 1_000, 10_000, 100_000])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--e2e-cases", type=int, default=5_000)
    args = ap.parse_args()
    if not HAS_NUMBA:
        print("numba unavailable (or disabled); loop timings are pure Python")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<12}{'n':>9}{'numpy ms':>12}{'loop ms':>12}{'speedup':>10}")
    for n in args.sizes:
        scores = np.round(rng.random(n), 3)
        truths = rng.random(n) < 0.3
        fps, tps, _ = k.roc_counts_numpy(scores, truths)
        x = np.r_[0, fps] / fps[-1]
        y = np.r_[0, tps] / tps[-1]
        ti = rng.integers(0, 12, n)
        pi = rng.integers(0, 12, n)
        cases = (
            ("roc_counts", lambda: k.roc_counts_numpy(scores, truths), lambda: k.roc_counts_loop(scores, truths)),
            ("trapezoid", lambda: k.trapezoid_numpy(x, y), lambda: k.trapezoid_loop(x, y)),
            ("confusion", lambda: k.confusion_counts_numpy(ti, pi, 12), lambda: k.confusion_counts_loop(ti, pi, 12)),
        )
        for name, a, b in cases:
            ta, tb = bench(a, args.repeat), bench(b, args.repeat)
            print(f"{name:<12}{n:>9}{ta * 1e3:>12.3f}{tb * 1e3:>12.3f}{ta / tb:>10.2f}")

    print(f"\nend-to-end stratified report, {args.e2e_cases} cases x 12 labels")
    for disable in ("0", "1"):
        env = {**os.environ, "RADBENCH_DISABLE_NUMBA": disable}
        out = subprocess.run([sys.executable, "-c", E2E.replace("__N__", str(args.e2e_cases))], env=env, capture_output=True, text=True)
        if out.returncode:
            print(out.stderr)
            continue
        backend, secs = out.stdout.split()
        print(f"  {backend:<6} {float(secs) * 1e3:9.1f} ms")


if __name__ == "__main__":
    main()
