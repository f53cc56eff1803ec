"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line. Criteria 4, 5
and 8 run through the command-line entry point with ``--threads 1``; criterion
9 reruns them with ``--threads 8`` and compares the written report bodies.
"""

import json
import math
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from baiyin.chebpoly import (
    ShiftedChebParams, bound_ch1, cheb_u, shifted_p, shifted_p_via_cheb, t_sequence,
)
from baiyin.cli import main, report_body
from baiyin.comboracle import compare_comb_identity, in_budget_pairs, l2_gap
from baiyin.l1section import SignSystem, khinchine_full_average, khinchine_value, random_unit_vectors
from baiyin.randmat import derive_seed, gen_sign_matrix, t_matrix
from baiyin.spectral import mp_edges, symmetric_eigenvalues

pytestmark = pytest.mark.slow

CONFIGS = {
    4: ("mp-convergence", {"p": 512, "n": 1024, "seeds": 20, "seed": 0}),
    5: ("lambda-min-tail", {"n": 4096, "delta": 0.5, "trials": 100, "seed": 7}),
    8: ("l1-embed", {"n": 128, "delta": 0.5, "seeds": 20, "restarts": 64, "seed": 0}),
}
_REPORTS = {}
_OUTDIR = Path(tempfile.mkdtemp(prefix="baiyin-acceptance-"))


def cached_report(criterion, threads=1):
    key = (criterion, threads)
    if key not in _REPORTS:
        name, prm = CONFIGS[criterion]
        # same path for both thread counts: the output path is part of the config
        out = _OUTDIR / f"criterion{criterion}.json"
        argv = [name, "--threads", str(threads), "--out", str(out)]
        for k, v in prm.items():
            argv += ["--set", f"{k}={json.dumps(v)}"]
        t0 = time.perf_counter()
        status = main(argv)
        elapsed = time.perf_counter() - t0
        assert status == 0, f"{name} exited with {status}"
        _REPORTS[key] = (json.loads(out.read_text()), elapsed)
    return _REPORTS[key]


@pytest.fixture
def verdict(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"criterion {criterion}: {detail}"
    return emit


def test_criterion_1_exact_oracle(verdict):
    t0 = time.perf_counter()
    bad = []
    cells = 0
    for p, n in in_budget_pairs(16):
        for l in range(5):
            r = compare_comb_identity(p, n, l)
            cells += 1
            if l in (0, 1) and r.discrepancy != 0:
                bad.append((p, n, l, str(r.discrepancy)))
            if l == 2 and r.discrepancy != l2_gap(p, n):
                bad.append((p, n, l, str(r.discrepancy)))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60
    verdict(1, ok, f"{cells} cells, mismatches={bad}, {elapsed:.1f}s")


def test_criterion_2_functional_calculus(verdict):
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(2))
    worst = 0.0
    for k in range(100):
        n = int(rng.integers(4, 65))
        p = int(rng.integers(4, n + 1))
        x = gen_sign_matrix(p, n, derive_seed(2, k))
        par = ShiftedChebParams.from_dims(p, n)
        mu = symmetric_eigenvalues(t_matrix(x))
        dense = t_sequence(x, 20).traces()
        for l in range(21):
            vals = shifted_p(par, mu, l)
            gap = abs(dense[l] - vals.sum()) / (1 + np.abs(vals).sum())
            worst = max(worst, gap)
    elapsed = time.perf_counter() - t0
    verdict(2, worst <= 1e-8 and elapsed < 120, f"worst scaled gap {worst:.2e}, {elapsed:.1f}s")


def test_criterion_3_chebyshev_identities(verdict):
    theta = np.linspace(0, np.pi, 1002)[1:-1]
    trig = max(
        float(np.abs(cheb_u(l, np.cos(theta)) * np.sin(theta) - np.sin((l + 1) * theta)).max())
        for l in range(31)
    )
    rng = np.random.Generator(np.random.PCG64(3))
    rel = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 101))
        p = int(rng.integers(2, n + 1))
        l = int(rng.integers(0, 31))
        mu = float(rng.uniform(-10, 10))
        par = ShiftedChebParams.from_dims(p, n)
        a, b = shifted_p(par, mu, l), shifted_p_via_cheb(par, mu, l)
        rel = max(rel, abs(a - b) / max(abs(a), abs(b), np.finfo(float).tiny))
    verdict(3, trig <= 1e-9 and rel <= 1e-8, f"trig {trig:.2e}, closed form relative {rel:.2e}")


def test_criterion_4_mp_convergence(verdict):
    report, elapsed = cached_report(4)
    s = report["results"]["summary"]
    a, b = mp_edges(0.5)
    ok = (
        abs(a - 0.08579) < 5e-6 and abs(b - 2.91421) < 5e-6
        and s["mean_ks_distance"] < 0.06 and s["seeds_with_both_edges_in_window"] >= 18 and elapsed < 120
    )
    verdict(4, ok, f"mean KS {s['mean_ks_distance']:.4f}, edges in window "
                   f"{s['seeds_with_both_edges_in_window']}/20, {elapsed:.1f}s")


def test_criterion_5_lambda_min_tail(verdict):
    report, elapsed = cached_report(5)
    s = report["results"]["summary"]
    bound = s["tail_bound_fitted_C"]
    ok = (
        s["p"] == 2048 and s["trials"] == 100 and s["hits"] == 0 and s["threshold"] == 0.03125
        and bound is not None and 0 < bound <= 1 and elapsed < 600
    )
    verdict(5, ok, f"hits {s['hits']}/100, fitted C {s['fitted_C']}, "
                   f"bound at fitted C {bound}, {elapsed:.1f}s")


def test_criterion_6_lower_bound_grid(verdict):
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(6))
    violations = 0
    n = 100
    for tenth in range(1, 11):
        par = ShiftedChebParams.from_dims(10 * tenth, n)
        r = 2 * math.sqrt(par.y2)
        for l in range(2, 21, 2):
            mu = np.concatenate([rng.uniform(-10, 10, 5000), rng.uniform(par.y1 - r, par.y1 + r, 5000)])
            violations += int(np.count_nonzero(shifted_p(par, mu, l) < bound_ch1(l, par.y)))
    elapsed = time.perf_counter() - t0
    verdict(6, violations == 0 and elapsed < 60, f"{violations} violations over 100 cells, {elapsed:.1f}s")


def test_criterion_7_classical_khinchine(verdict):
    t0 = time.perf_counter()
    lo, hi = np.inf, -np.inf
    for n in range(2, 13):
        for x in random_unit_vectors(n, 1000, seed=n):
            v = khinchine_full_average(x)
            lo, hi = min(lo, v), max(hi, v)
    elapsed = time.perf_counter() - t0
    ok = lo >= 1 / math.sqrt(2) - 1e-12 and hi <= 1 + 1e-12 and elapsed < 60
    verdict(7, ok, f"range [{lo:.6f}, {hi:.6f}], {elapsed:.1f}s")


def test_criterion_8_embedding_certificate(verdict):
    report, elapsed = cached_report(8)
    rows = report["results"]["rows"]
    worst_gap = 0.0
    certified = True
    for row in rows:
        sys = SignSystem.generate(128, 0.5, row["seed"])
        worst_gap = max(worst_gap, abs(khinchine_value(np.array(row["minimizer"]), sys) - row["min_estimate"]))
        certified &= row["min_estimate"] >= row["sigma_min_lower"] > 0
    ratio = report["results"]["summary"]["c0_fit_ratio"]
    ok = len(rows) == 20 and certified and worst_gap <= 1e-12 and ratio < 2 and elapsed < 300
    verdict(8, ok, f"certified={certified}, consistency {worst_gap:.1e}, c0 ratio {ratio:.3f}, {elapsed:.1f}s")


def test_criterion_9_determinism(verdict):
    same = {}
    for c in (4, 5, 8):
        same[c] = report_body(cached_report(c, 1)[0]) == report_body(cached_report(c, 8)[0])
    verdict(9, all(same.values()), f"identical bodies per criterion {same}")
