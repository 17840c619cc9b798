"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``)."""

from __future__ import annotations

import itertools
import time

import numpy as np
import pytest
from scipy.linalg import svd as dense_svd

import fraudsift as fs
from fraudsift import DetectorConfig, InjectionConfig
from fraudsift.cli import main as cli_main
from fraudsift.contrast import ContrastState, SignalConfig, SignalContext
from fraudsift.evalkit import roc_auc_from_arrays


def report(name: str, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# -- 1. hyperbolic-trap benchmark ------------------------------------------------


def test_criterion_1_hyperbolic_trap():
    t_start = time.perf_counter()
    base, ann = fs.gen_hyperbolic(
        5000, 5000, power_exponent=0.4, density_target=0.84,
        rng_seed=11, block_shape=(1200, 1200), noise_avg_degree=2.0)
    assert ann["block_density"] == pytest.approx(0.84, rel=0.10)
    cfg = InjectionConfig(n_fraudsters=200, n_objects=150, ratings_per_object=120,
                          max_target_indegree=100, camouflage_ratio=0.2, rng_seed=4)
    assert cfg.density == pytest.approx(0.60)
    g, truth = fs.inject(base, cfg)

    res = fs.fast_greedy(g, DetectorConfig(signals=("alpha",)))
    f1 = fs.f_measure(res.users, truth.fraud_users)[2]
    baseline_f1 = fs.f_measure(fs.avg_degree_baseline(g), truth.fraud_users)[2]
    elapsed = time.perf_counter() - t_start

    ok = f1 >= 0.9 and baseline_f1 < f1 and elapsed < 120
    report("criterion 1 (hyperbolic trap)", ok,
           f"topology-only F1={f1:.3f} (need >=0.9), "
           f"avg-degree baseline F1={baseline_f1:.3f} (need strictly lower), "
           f"runtime {elapsed:.1f}s (need <120s)")


# -- 2. density sweep with full signals --------------------------------------------


def test_criterion_2_density_sweep():
    # background volume comparable to the review datasets this substitutes
    # for; starving the organic traffic also starves the rating-deviation
    # signal (targets keep no balanced comparison group)
    base, _ = fs.gen_hyperbolic(
        10_000, 5000, power_exponent=0.5, density_target=0.6,
        rng_seed=21, block_shape=(2000, 1200), noise_avg_degree=6.0,
        timestamps=True, ratings=True)
    densities = [1.0, 0.5, 0.2, 0.1, 0.05]
    proto = InjectionConfig(n_fraudsters=200, n_objects=200, ratings_per_object=200,
                            camouflage_ratio=0.2)
    # low densities need thousands of hijacked accounts in the block; the seed
    # size cap would make that recall unreachable, so the sweep disables it
    config = DetectorConfig(cap_exponent=None)
    res = fs.density_sweep(base, densities, config, inject_proto=proto, seed=33)

    failures = [p.error for p in res.points if p.error]
    f1_at = {p.density: p.user_f1 for p in res.points}
    auc_at = {p.density: p.sink_auc for p in res.points}
    f1_ok = all(f1_at[d] >= 0.8 for d in densities if d >= 0.1)
    auc_ok = all(auc_at[d] >= 0.95 for d in densities)

    ok = not failures and f1_ok and auc_ok
    report("criterion 2 (density sweep)", ok,
           "user F1 " + " ".join(f"{d}:{f1_at.get(d, float('nan')):.3f}" for d in densities)
           + " (need >=0.8 down to 0.1); sink AUC "
           + " ".join(f"{d}:{auc_at.get(d, float('nan')):.3f}" for d in densities)
           + " (need >=0.95 everywhere)")


# -- 3. time-obstruction property ---------------------------------------------------


def test_criterion_3_time_obstruction_bound():
    rng = np.random.default_rng(1234)
    checked = 0
    height_checked = 0
    violations = []
    while checked < 100:
        n = float(rng.integers(100, 5000))
        dt = float(rng.choice([1, 10, 60, 600, 3600]))
        s1 = float(rng.uniform(0.5, 40)) / dt
        s2 = float(rng.uniform(0.5, 40)) / dt
        tau_min, cm_min = fs.time_obstruction_bound(n, dt, s1, s2)
        duration = float(rng.uniform(0.3, 0.98)) * tau_min
        if duration < 2 * dt:
            continue
        counts = fs.simulate_triangle_attack(
            n, duration, dt, rise_fraction=float(rng.uniform(0.15, 0.85)))
        rise, fall = fs.extreme_slopes(counts, dt)
        if not (rise > s1 or fall > s2):
            violations.append((n, dt, s1, s2, duration))
        checked += 1

        # at the bound with the optimal split, the peak reaches the height
        # floor up to one bin of discretization
        if tau_min >= 2 * dt:
            at_bound = fs.simulate_triangle_attack(
                n, tau_min, dt, rise_fraction=s2 / (s1 + s2))
            peak = float(at_bound.max())
            if peak < cm_min - dt * max(s1, s2):
                violations.append(("height", n, dt, s1, s2))
            height_checked += 1

    ok = not violations and height_checked > 50
    report("criterion 3 (time obstruction)", ok,
           f"{checked} fast attacks all show rise>S1 or fall>S2 and "
           f"{height_checked} at-bound attacks reach the height floor; "
           f"violations={violations[:3]}")


# -- 4. incremental consistency ------------------------------------------------------


def test_criterion_4_incremental_consistency():
    rng = np.random.default_rng(7)
    worst = 0.0
    scale = fs.RatingScale.from_range(1, 5, 1)
    for trial in range(50):
        n_u, n_v, n_e = 50, 40, 400
        us = rng.integers(0, n_u, n_e)
        vs = rng.integers(0, n_v, n_e)
        ts = rng.integers(0, 100_000, n_e)
        rats = rng.choice(np.asarray(scale.values), n_e)
        g = fs.BipartiteGraph([f"u{i}" for i in range(n_u)],
                              [f"o{j}" for j in range(n_v)],
                              us, vs, ts, rats, scale=scale)
        ctx = SignalContext(g, SignalConfig())
        seed = np.arange(n_u)
        st = ContrastState.build(g, seed, ctx)
        removed: list[int] = []
        for u in rng.permutation(n_u)[: n_u - 1]:
            st._remove_local(int(u))
            removed.append(int(u))
            keep = np.ones(n_u, dtype=bool)
            keep[removed] = False
            ref = ContrastState(g, ctx, seed, active=keep)
            for name in ("cnt_set", "P", "kw", "kappa", "phi", "alpha"):
                a, b = getattr(st, name), getattr(ref, name)
                scale_ref = max(float(np.abs(b).max()), 1.0)
                worst = max(worst, float(np.abs(a - b).max()) / scale_ref)
            sa = np.where(st.active, st.S, 0.0)
            sb = np.where(ref.active, ref.S, 0.0)
            worst = max(worst, float(np.abs(sa - sb).max())
                        / max(float(np.abs(sb).max()), 1.0))
            worst = max(worst, abs(st.objective() - ref.objective())
                        / abs(ref.objective()))
    ok = worst <= 1e-9
    report("criterion 4 (incremental consistency)", ok,
           f"worst relative deviation across 50 graphs x 49 removals = {worst:.3e} "
           f"(need <=1e-9)")


# -- 5. small-instance oracle equivalence ----------------------------------------------


def brute_force_hs(graph, base=32.0):
    counts = graph.counts_matrix().toarray()
    f_u = counts.sum(axis=0)
    best, best_set = -1.0, None
    n_u = graph.n_users
    for r in range(1, n_u + 1):
        for subset in itertools.combinations(range(n_u), r):
            f_a = counts[list(subset)].sum(axis=0)
            p = base ** (f_a / f_u - 1.0)
            hs = (f_a * p).sum() / (len(subset) + p.sum())
            if hs > best + 1e-12:
                best, best_set = hs, frozenset(subset)
    return best, best_set


def test_criterion_5_small_instance_oracles():
    # trajectory maximum equals a from-scratch recompute of every prefix
    rng = np.random.default_rng(5)
    traj_ok = True
    for trial in range(5):
        us = rng.integers(0, 12, 70)
        vs = rng.integers(0, 8, 70)
        g = fs.BipartiteGraph([f"u{i}" for i in range(12)],
                              [f"o{j}" for j in range(8)], us, vs, None, None)
        ctx = SignalContext(g, SignalConfig())
        res = fs.greedy_shaving(g, np.arange(12), context=ctx)
        st = ContrastState.build(g, np.arange(12), ctx)
        objs = [st.objective()]
        removed = []
        while st.n_active > 1:
            r = st.argmin_active_score()
            removed.append(r)
            st._remove_local(r)
            keep = np.ones(12, dtype=bool)
            keep[removed] = False
            objs.append(ContrastState(g, ctx, np.arange(12), active=keep).objective())
        traj_ok &= abs(res.objective - max(objs)) <= 1e-9 * max(objs)

    # planted 3x2 block: exhaustive subset maximization agrees
    events = [(f"b{i}", f"x{j}") for i in range(3) for j in range(2)]
    events += [("s0", "w0"), ("s1", "w1")]
    g = fs.ingest(events)
    res = fs.greedy_shaving(g, g.user_ids)
    oracle_hs, oracle_set = brute_force_hs(g)
    block_ok = (set(res.users) == {g.user_ids[i] for i in oracle_set}
                and abs(res.objective - oracle_hs) <= 1e-9 * oracle_hs)

    ok = traj_ok and block_ok
    report("criterion 5 (small-instance oracles)", ok,
           f"trajectory max matches recompute on 5 random 12-user graphs: {traj_ok}; "
           f"greedy equals 2^5 brute force on the planted block: {block_ok}")


# -- 6. spectral correctness -------------------------------------------------------------


def test_criterion_6_spectral_against_dense_oracle():
    rng = np.random.default_rng(6)
    worst_sigma = 0.0
    worst_ortho = 0.0
    for trial in range(20):
        nnz = 900
        rows = rng.integers(0, 200, nnz)
        cols = rng.integers(0, 150, nnz)
        vals = rng.uniform(0.5, 2.0, nnz)
        m = fs.SparseMatrix.from_triplets(rows, cols, vals, (200, 150))
        U, s, V = fs.truncated_svd(m, 5, tol=1e-8, max_iter=2000, oversample=15,
                                   seed=trial)
        ref = dense_svd(m.toarray(), compute_uv=False)[:5]
        worst_sigma = max(worst_sigma, float(np.abs(s - ref).max() / ref[0]))
        worst_ortho = max(
            worst_ortho,
            float(np.abs(U.T @ U - np.eye(5)).max()),
            float(np.abs(V.T @ V - np.eye(5)).max()))
    ok = worst_sigma <= 1e-6 and worst_ortho <= 1e-6
    report("criterion 6 (spectral correctness)", ok,
           f"20 random 200x150 matrices: worst top-5 sigma error {worst_sigma:.2e} "
           f"(need <=1e-6), worst orthonormality defect {worst_ortho:.2e}")


# -- 7. scalability -----------------------------------------------------------------------


def test_criterion_7_scalability(tmp_path):
    t_start = time.perf_counter()
    out = tmp_path / "bench"
    rc = cli_main(["bench", "--sizes", "10000,100000,500000,1000000",
                   "--output-dir", str(out), "--seed", "3"])
    assert rc == 0
    import json

    payload = json.loads((out / "bench.json").read_text())
    slope = payload["loglog_slope"]
    caps_ok = all(r["max_seed_size"] <= int(r["n_users"] ** (1 / 1.6))
                  for r in payload["rows"])
    elapsed = time.perf_counter() - t_start
    ok = slope is not None and slope <= 1.3 and caps_ok and elapsed < 1800
    report("criterion 7 (scalability)", ok,
           f"log-log slope {slope:.3f} (need <=1.3), seed sizes within |U|^(1/1.6): "
           f"{caps_ok}, total runtime {elapsed:.0f}s (need <1800s)")


# -- 8. metric correctness -------------------------------------------------------------------


def test_criterion_8_metric_correctness():
    rng = np.random.default_rng(8)
    mism = 0
    for _ in range(1000):
        n = int(rng.integers(4, 14))
        scores = {i: float(rng.integers(0, 6)) for i in range(n)}
        k = int(rng.integers(1, n))
        truth = set(rng.choice(n, k, replace=False).tolist())
        pos = [scores[i] for i in truth]
        neg = [scores[i] for i in scores if i not in truth]
        oracle = sum(1.0 if p > q else (0.5 if p == q else 0.0)
                     for p in pos for q in neg) / (len(pos) * len(neg))
        if abs(fs.roc_auc(scores, truth) - oracle) > 1e-12:
            mism += 1

    curve = fs.AccuracyCurve(tuple((d, 1.0) for d in (0.01, 0.1, 0.3, 1.0)))
    area_err = abs(curve.area - 0.995)

    ok = mism == 0 and area_err <= 1e-9
    report("criterion 8 (metric correctness)", ok,
           f"AUC matches the pair-count oracle on 1000 fixtures ({mism} mismatches); "
           f"perfect-detector curve area off ideal by {area_err:.2e} (need <=1e-9)")
