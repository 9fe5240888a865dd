"""Acceptance criteria. Run with ``pytest tests/test_acceptance.py -s`` to see the summary lines."""
import time

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import norm as sparse_norm

from kronprec.assembly import (UnivariateMatrices, assemble_collocation, assemble_galerkin_exact,
                               assemble_wq, kronecker_form, parametric_matrices)
from kronprec.bench import BenchConfig, run_benchmark
from kronprec.diagnostics import e_h_value, eigenvalue_matching_distance, spectra_study
from kronprec.fastdiag import build_preconditioner
from kronprec.geometry import get_geometry, identity_map, quarter_ring
from kronprec.splines import SplineSpace1D

pytestmark = pytest.mark.slow


def report(num, name, ok, detail):
    print("\ncriterion %2d %-32s %s  %s" % (num, name, "PASS" if ok else "FAIL", detail))
    assert ok, detail


def _rel_fro(A, B):
    A = sp.csr_matrix(A)
    B = sp.csr_matrix(B)
    return sparse_norm(A - B) / sparse_norm(B)


def _iterations(method, domain, h_list, p_list, precond=("fd",)):
    cfg = BenchConfig(domain=domain, method=method, p_list=list(p_list), h_list=list(h_list),
                      precond=list(precond), tol=1e-8, memory_limit_mb=4000)
    rows = run_benchmark(cfg)
    assert all(r["converged"] for r in rows), [(r["p"], r["h"], r["status"]) for r in rows]
    return rows


def test_kronecker_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    cases = [(2, n) for n in range(4, 17)] + [(3, n) for n in (4, 7, 10, 13, 16)]
    for d, n in cases:
        G = identity_map(d)
        for p in range(1, 6):
            spaces = [SplineSpace1D.uniform(n, p)] * d
            A = assemble_wq(G, None, spaces).operator
            worst = max(worst, _rel_fro(A, kronecker_form(spaces, "wq").tosparse()))
            if p >= 2:
                A = assemble_collocation(G, None, spaces, fast_path=False).operator
                worst = max(worst, _rel_fro(A, kronecker_form(spaces, "collocation").tosparse()))
    elapsed = time.perf_counter() - t0
    report(1, "Kronecker-form equivalence", worst <= 1e-12 and elapsed < 60,
           "max rel err %.2e, %.1f s" % (worst, elapsed))


def test_wq_exactness():
    worst = 0.0
    for d in (2, 3):
        G = identity_map(d)
        for p in range(2, 6):
            for n in ((4, 8, 16, 32) if d == 2 else (4, 8, 12)):
                spaces = [SplineSpace1D.uniform(n, p)] * d
                A_wq = assemble_wq(G, None, spaces).operator
                A_G = assemble_galerkin_exact(G, None, spaces).operator
                worst = max(worst, _rel_fro(A_wq, A_G))
    report(2, "WQ exactness on identity", worst <= 1e-12, "max rel err %.2e" % worst)


def test_fd_bs_exactness():
    rng = np.random.default_rng(2024)
    worst = {"fd": 0.0, "bs": 0.0}
    for trial in range(200):
        d = int(rng.integers(2, 4))
        method = "wq" if trial % 2 == 0 else "collocation"
        mats = []
        for _ in range(d):
            p = int(rng.integers(2, 6))
            n = int(rng.integers(max(1, 4 - p + 2), 13 - p))
            space = SplineSpace1D.uniform(n, p)
            mats.append(parametric_matrices([space], method)[0])
            assert mats[-1].M.shape[0] <= 10
        b = rng.standard_normal(int(np.prod([m.M.shape[0] for m in mats])))
        for backend in ("fd", "bs"):
            P = build_preconditioner(mats, backend=backend, fallback=False)
            Pd = P.operator.dense()
            s = P.apply(b)
            s_ref = np.linalg.solve(Pd, b)
            res = np.linalg.norm(Pd @ s - b) / np.linalg.norm(b)
            res_ref = np.linalg.norm(Pd @ s_ref - b) / np.linalg.norm(b)
            worst[backend] = max(worst[backend], res)
            assert res_ref <= 1e-12
    ok = max(worst.values()) <= 1e-10
    report(3, "FD/BS exactness (200 trials)", ok,
           "max rel residual fd %.2e, bs %.2e" % (worst["fd"], worst["bs"]))


def _grid_summary(rows):
    its = np.array([r["iterations"] for r in rows])
    return its, "iterations %.1f..%.1f, ratio %.2f" % (its.min(), its.max(), its.max() / its.min())


def test_collocation_quarter_ring_fd():
    rows = _iterations("collocation", "quarter_ring", (32, 64, 128), (2, 3, 4, 5))
    its, detail = _grid_summary(rows)
    ok = its.min() >= 8 and its.max() <= 20 and its.max() / its.min() <= 1.5
    report(4, "collocation, quarter ring, FD", ok, detail)


def test_wq_quarter_ring_fd():
    rows = _iterations("wq", "quarter_ring", (32, 64, 128), (2, 3, 4, 5))
    its, detail = _grid_summary(rows)
    ok = its.min() >= 10 and its.max() <= 24 and its.max() / its.min() <= 1.5
    report(5, "WQ, quarter ring, FD", ok, detail)


def test_3d_revolved_ring_fd():
    col, _ = _grid_summary(_iterations("collocation", "revolved_ring", (16, 32), (2, 3, 4)))
    wq, _ = _grid_summary(_iterations("wq", "revolved_ring", (16, 32), (2, 3, 4)))
    ok = col.min() >= 10 and col.max() <= 30 and wq.min() >= 15 and wq.max() <= 40
    report(6, "3D revolved ring, FD", ok,
           "collocation %.1f..%.1f, WQ %.1f..%.1f" % (col.min(), col.max(), wq.min(), wq.max()))


def test_e_h_decay():
    G = quarter_ring()
    ratios, values = {}, {}
    for p in (2, 3, 4):
        e = [e_h_value(G, p, ne) for ne in (8, 16, 32)]
        values[p] = e
        ratios[p] = [e[0] / e[1], e[1] / e[2]]
    all_r = np.concatenate(list(ratios.values()))
    hard = bool(np.all((all_r >= 1.6) & (all_r <= 2.4)))
    soft = abs(values[2][0] / 2.66e-2 - 1.0) <= 0.3
    report(7, "e_h = O(h)", hard and soft,
           "halving ratios %.2f..%.2f, e_h(p=2, h=1/8) = %.3e" % (all_r.min(), all_r.max(),
                                                                 values[2][0]))


def test_spectral_bound():
    G = quarter_ring()
    ok, details = True, []
    for p in (2, 3):
        for ne in (8, 16):
            sG, _ = spectra_study(G, p, ne)
            ok &= sG.contained(1e-8)
            details.append("[%.4f, %.4f]" % (sG.eigenvalues.real.min(), sG.eigenvalues.real.max()))
    lo, hi = sG.bound
    report(8, "spectrum inside Q bounds", ok,
           "bound [%.4f, %.4f], spectra %s" % (lo, hi, " ".join(details)))


def test_matching_distance_decreases():
    G = quarter_ring()
    dist = []
    for ne in (8, 16, 32):
        sG, sW = spectra_study(G, 2, ne)
        dist.append(eigenvalue_matching_distance(sG.eigenvalues, sW.eigenvalues))
    ok = dist[1] <= 1.1 * dist[0] and dist[2] <= 1.1 * dist[1] and dist[2] < dist[0]
    report(9, "matching distance decreases", ok, " -> ".join("%.4f" % v for v in dist))


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def test_scaling():
    rng = np.random.default_rng(0)
    apply_times = {}
    for n in (40, 80):
        A = rng.standard_normal((n, n))
        mats = [UnivariateMatrices(np.eye(n) + 0.01 * (A + A.T), np.diag(np.arange(1.0, n + 1)))] * 3
        P = build_preconditioner(mats)
        b = rng.standard_normal(n ** 3)
        P.apply(b)
        apply_times[n] = _median_time(lambda: P.apply(b), 11 if n == 40 else 5)
    ratio = apply_times[80] / apply_times[40]

    d, ne = 3, 16
    G = get_geometry("revolved_ring")
    per_dof = {}
    for p in (2, 3, 4, 5):
        spaces = [SplineSpace1D.uniform(ne, p)] * d
        per_dof[p] = _median_time(lambda: assemble_wq(G, None, spaces), 3) / (ne + p - 2) ** d
    growth = [per_dof[p] / per_dof[2] / (p / 2.0) ** (d + 1) for p in (3, 4, 5)]
    ok = 8 <= ratio <= 32 and max(growth) <= 2.0
    report(10, "FD apply and WQ assembly scaling", ok,
           "FD apply ratio n 40->80 %.1f, WQ per-dof growth / p^4 %s"
           % (ratio, ", ".join("%.2f" % g for g in growth)))


def test_ilu0_contrast():
    rows = _iterations("collocation", "quarter_ring", (16, 32, 64, 128), (2,), ("ilu0", "fd"))
    ilu = [r["iterations"] for r in rows if r["precond"] == "ilu0"]
    fd = [r["iterations"] for r in rows if r["precond"] == "fd"]
    growth = [b / a for a, b in zip(ilu, ilu[1:])]
    ok = min(growth) >= 1.5 and max(fd) / min(fd) <= 1.2
    report(11, "ILU(0) grows, FD flat", ok,
           "ILU(0) %s, FD %s" % ("/".join("%.1f" % v for v in ilu), "/".join("%.1f" % v for v in fd)))
