"""Acceptance gate: one PASS/FAIL line per criterion, at the stated tolerances.

Every random draw descends from master seed 0.  Lines are printed as each
check finishes and repeated in the terminal summary.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from helpers import grid_metric, minimax_reference
from ratsplan import (
    EvalConfig,
    Policy,
    StateMetric,
    brute_force_worst_nsmdp,
    build_bridge,
    dp_snapshot_action,
    finite_horizon_values,
    generate_lc_nsmdp,
    lp_oracle_worst_transition,
    policy_value_snapshot,
    rats_plan,
    snapshot,
    sweep,
    tv_distance,
    w1,
    w1_to_dirac,
    worst_case_transition,
)
from ratsplan.domains import LEFT, RIGHT, START, BridgeSpec
from ratsplan.worstcase import AdmissibleSet

SEED = 0


def report(tag, passed, detail):
    line = f"{tag}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert passed, line


def rng_for(criterion):
    return np.random.default_rng([SEED, criterion])


def test_ac01_oracle_equivalence():
    rng = rng_for(1)
    start = time.perf_counter()
    discrete_bad = manhattan_below = infeasible = 0
    worst_discrete = 0.0
    for k in range(2000):
        n = int(rng.integers(2, 9))
        discrete = k < 1000
        metric = StateMetric.discrete(n) if discrete else grid_metric(rng, n)
        p0 = rng.dirichlet(np.ones(n))
        vals = rng.uniform(-1, 1, n)
        adm = AdmissibleSet(p0, 0.0, float(rng.uniform(0, 1.5 * metric.diameter)), 0.0, metric)
        sol = worst_case_transition(adm, vals)
        exact = lp_oracle_worst_transition(adm, vals)[1]
        infeasible += w1(sol.p_hat, p0, metric)[0] > adm.radius_p + 1e-9
        if discrete:
            gap = abs(sol.value - exact)
            worst_discrete = max(worst_discrete, gap)
            discrete_bad += gap > 1e-9
        else:
            manhattan_below += sol.value < exact - 1e-9
    elapsed = time.perf_counter() - start
    ok = discrete_bad == 0 and manhattan_below == 0 and infeasible == 0 and elapsed < 30
    report(
        "AC1 oracle equivalence",
        ok,
        f"discrete mismatches {discrete_bad}/1000 (max gap {worst_discrete:.3g}), "
        f"manhattan closed form below oracle {manhattan_below}/1000, infeasible {infeasible}, {elapsed:.1f}s",
    )


def test_ac02_heuristic_error_propagation():
    rng = rng_for(2)
    start = time.perf_counter()
    violations = checks = 0
    worst = -np.inf
    for _ in range(200):
        n_s, n_a, dmax = int(rng.integers(2, 7)), int(rng.integers(2, 4)), int(rng.integers(1, 5))
        lp, lr = rng.uniform(0, 0.3, 2)
        snap = snapshot(generate_lc_nsmdp(n_s, n_a, 1, lp, lr, rng=rng), 0)
        # exact values come from a much deeper recursion of the same backup
        ref = minimax_reference(snap, lp, lr, dmax + 60)
        for delta in (0.1, 1.0):
            noise = rng.uniform(-delta, delta, n_s)
            res = rats_plan(snap, 0, 0, dmax, heuristic=lambda s, t: ref[dmax][s] + noise[s], lp=lp, lr=lr)
            for (s, d), v in res.values.items():
                excess = abs(v - ref[d][s]) - snap.gamma ** (dmax - d) * delta
                worst = max(worst, excess)
                violations += excess > 1e-9
                checks += 1
    elapsed = time.perf_counter() - start
    report(
        "AC2 heuristic error propagation",
        violations == 0 and elapsed < 60,
        f"{violations}/{checks} node errors above bound (max excess {worst:.3g}), {elapsed:.1f}s",
    )


def test_ac03_snapshot_value_bound():
    rng = rng_for(3)
    start = time.perf_counter()
    violations = checks = 0
    worst = -np.inf
    for _ in range(200):
        n_s, n_a, horizon = int(rng.integers(2, 7)), int(rng.integers(1, 4)), int(rng.integers(2, 8))
        lp, lr = float(rng.uniform(0, 1)), float(rng.uniform(0, 0.5))
        m = generate_lc_nsmdp(n_s, n_a, horizon, lp, lr, rng=rng)
        pi = Policy.stochastic(rng.dirichlet(np.ones(n_a), size=n_s))
        values = [policy_value_snapshot(snapshot(m, t), pi) for t in range(horizon)]
        for t0 in range(horizon):
            for t in range(horizon):
                bound = abs(t - t0) * (lp + lr) / (1 - m.gamma)
                excess = float(np.max(np.abs(values[t0] - values[t])) - bound)
                worst = max(worst, excess)
                violations += excess > 1e-6
                checks += 1
    elapsed = time.perf_counter() - start
    report(
        "AC3 snapshot value bound",
        violations == 0 and elapsed < 60,
        f"{violations}/{checks} (s-max) comparisons above bound (max excess {worst:.3g}), {elapsed:.1f}s",
    )


def test_ac04_expected_reward_lipschitz():
    rng = rng_for(4)
    violations = checks = 0
    worst = -np.inf
    for _ in range(200):
        n_s = int(rng.integers(2, 7))
        metric = grid_metric(rng, n_s) if rng.random() < 0.5 else StateMetric.discrete(n_s)
        lp, lr = float(rng.uniform(0, 0.5)), float(rng.uniform(0, 0.3))
        horizon = 6
        m = generate_lc_nsmdp(n_s, 2, horizon, lp, lr, metric, rng, lipschitz_rewards=True)
        expected = (m.transitions * m.rewards).sum(axis=-1)
        for t in range(horizon):
            for u in range(horizon):
                excess = float(np.max(np.abs(expected[t] - expected[u]))) - (lp + lr) * abs(t - u)
                worst = max(worst, excess)
                violations += excess > 1e-9
                checks += 1
    report(
        "AC4 expected-reward Lipschitz bound",
        violations == 0,
        f"{violations}/{checks} epoch pairs above bound (max excess {worst:.3g})",
    )


def test_ac05_degenerate_radius():
    rng = rng_for(5)
    value_bad = decision_bad = 0
    worst = 0.0
    for _ in range(100):
        n_s, n_a = int(rng.integers(2, 7)), int(rng.integers(2, 4))
        m = generate_lc_nsmdp(n_s, n_a, 3, 0.0, 0.0, rng=rng)
        snap = snapshot(m, 0)
        s0 = int(rng.integers(n_s))
        dmax = int(rng.integers(1, 7))
        v, _ = finite_horizon_values(snap, dmax)
        gap = abs(rats_plan(snap, s0, 0, dmax).root_value - v[s0])
        worst = max(worst, gap)
        value_bad += gap > 1e-9
        # deep enough that the truncated tail (gamma^d / (1 - gamma) < 1e-8) cannot flip a decision
        deep = rats_plan(snap, s0, 0, 200)
        decision_bad += deep.action != dp_snapshot_action(snap, s0, tol=1e-12)
    report(
        "AC5 degenerate-radius reduction",
        value_bad == 0 and decision_bad == 0,
        f"root value mismatches {value_bad}/100 (max {worst:.2g}), decision mismatches {decision_bad}/100",
    )


@pytest.fixture(scope="module")
def bridge_sweep():
    start = time.perf_counter()
    res = sweep(EvalConfig(episodes=1000, seed=SEED, dmax=6), [0.0, 0.5, 1.0])
    return res, time.perf_counter() - start


def test_ac06a_first_actions():
    firsts = {}
    for eps in (0.0, 0.5, 1.0):
        m = build_bridge(BridgeSpec(epsilon=eps))
        snap = snapshot(m, 0)
        rats = rats_plan(snap, START, 0, 6, lp=m.lipschitz_p, lr=m.lipschitz_r)
        firsts[eps] = (rats.action, dp_snapshot_action(snap, START), rats.q_values.round(4).tolist())
    ok = all(r == LEFT and d == RIGHT for r, d, _ in firsts.values())
    names = {LEFT: "Left", RIGHT: "Right"}
    detail = "; ".join(
        f"eps={e}: RATS {names.get(r, r)} (q={q}), DP-snapshot {names.get(d, d)}" for e, (r, d, q) in firsts.items()
    )
    report("AC6a bridge first actions", ok, detail)


def test_ac06b_cvar(bridge_sweep):
    res, _ = bridge_sweep
    rows = [(e, res.reports[e, "rats"].cvar05, res.reports[e, "dp-snapshot"].cvar05) for e in (0.0, 0.5, 1.0)]
    ok = all(r >= d for _, r, d in rows)
    report("AC6b bridge CVaR@5% RATS >= DP-snapshot", ok,
           "; ".join(f"eps={e}: {r:.3f} vs {d:.3f}" for e, r, d in rows))


def test_ac06c_means(bridge_sweep):
    res, _ = bridge_sweep
    r0, d0 = res.reports[0.0, "rats"], res.reports[0.0, "dp-snapshot"]
    r1, d1, n1 = res.reports[1.0, "rats"], res.reports[1.0, "dp-snapshot"], res.reports[1.0, "dp-nsmdp"]
    se = math.hypot(r1.std, n1.std) / math.sqrt(r1.episodes)
    ok = d0.mean > r0.mean and r1.mean > d1.mean and abs(r1.mean - n1.mean) <= 2 * se
    report(
        "AC6c bridge mean returns",
        ok,
        f"eps=0 DP-snapshot {d0.mean:.3f} vs RATS {r0.mean:.3f}; eps=1 RATS {r1.mean:.3f} vs DP-snapshot "
        f"{d1.mean:.3f}, DP-NSMDP {n1.mean:.3f} (2 SE = {2 * se:.3f})",
    )


def test_ac06d_spread(bridge_sweep):
    res, elapsed = bridge_sweep
    _, algos, means = res.matrix("mean")
    spread = dict(zip(algos, means.max(axis=1) - means.min(axis=1)))
    ok = spread["rats"] < spread["dp-snapshot"] and elapsed < 600
    report(
        "AC6d bridge spread across eps",
        ok,
        f"RATS {spread['rats']:.3f} vs DP-snapshot {spread['dp-snapshot']:.3f}; full sweep {elapsed:.1f}s",
    )


def test_ac07_memoisation_transparency():
    rng = rng_for(7)
    bridges = {e: build_bridge(BridgeSpec(epsilon=e)) for e in (0.0, 0.5, 1.0)}
    differ = 0
    on_total = off_total = bound_total = 0
    for _ in range(50):
        eps = float(rng.choice([0.0, 0.5, 1.0]))
        m = bridges[eps]
        live = np.flatnonzero(~m.states.terminal)
        s0, t0 = int(rng.choice(live)), int(rng.integers(0, 20))
        snap = snapshot(m, t0)
        on = rats_plan(snap, s0, t0, 6, lp=m.lipschitz_p)
        off = rats_plan(snap, s0, t0, 6, lp=m.lipschitz_p, memoize=False)
        differ += on.action != off.action or on.root_value != off.root_value
        on_total += on.stats.decision_nodes
        off_total += off.stats.decision_nodes
        k = int((snap.transitions > 0).sum(axis=-1).max())
        bound_total += sum(m.n_actions * (k * m.n_actions) ** d for d in range(6))
    report(
        "AC7 memoisation transparency",
        differ == 0,
        f"{differ}/50 roots differ; decision-node evaluations {on_total} with memo vs {off_total} without "
        f"({off_total / on_total:.1f}x); full-support growth bound on chance nodes {bound_total}",
    )


def test_ac08_wasserstein():
    rng = rng_for(8)
    start = time.perf_counter()
    axioms = dirac = tv = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        metric = grid_metric(rng, n)
        mu, nu, xi = rng.dirichlet(np.ones(n), size=3)
        d_mn = w1(mu, nu, metric)[0]
        axioms = max(
            axioms,
            abs(d_mn - w1(nu, mu, metric)[0]),
            abs(w1(mu, mu, metric)[0]),
            -d_mn,
            d_mn - w1(mu, xi, metric)[0] - w1(xi, nu, metric)[0],
        )
        k = int(rng.integers(n))
        dirac = max(dirac, abs(w1_to_dirac(mu, k, metric) - w1(mu, np.eye(n)[k], metric)[0]))
        m = int(rng.integers(2, 33))
        a, b = rng.dirichlet(np.ones(m), size=2)
        tv = max(tv, abs(w1(a, b, StateMetric.discrete(m))[0] - tv_distance(a, b)))
    elapsed = time.perf_counter() - start
    ok = max(axioms, dirac, tv) <= 1e-9 and elapsed < 30
    report(
        "AC8 wasserstein",
        ok,
        f"axioms {axioms:.2g}, Dirac vs solver {dirac:.2g}, W1 vs TV {tv:.2g} over 1000 pairs each, {elapsed:.1f}s",
    )


def test_ac09_relaxation_gap_probe():
    rng = rng_for(9)
    gaps = []
    for _ in range(10):
        m = generate_lc_nsmdp(2, 2, 4, float(rng.uniform(0.05, 0.3)), float(rng.uniform(0, 0.2)), rng=rng)
        pi = Policy.deterministic(rng.integers(0, 2, 2))
        leaf = rng.uniform(-1, 1, 2)
        gaps.extend(g.gap for g in brute_force_worst_nsmdp(m, pi, horizon=2, leaf_values=leaf))
    gaps = np.array(gaps)
    report(
        "AC9 relaxation-gap probe",
        len(gaps) == 20 and np.all(np.isfinite(gaps)),
        f"20 gaps (chained minus relaxed): min {gaps.min():.4f}, median {np.median(gaps):.4f}, max {gaps.max():.4f}",
    )


def test_ac10_cli_determinism(tmp_path):
    commands = {
        "run-json": ["run", "--episodes", "200", "--epsilon", "0.5", "--format", "json"],
        "run-csv": ["run", "--episodes", "200", "--epsilon", "1", "--algo", "dp-nsmdp", "--format", "csv"],
        "run-mc": ["run", "--episodes", "20", "--heuristic", "mc", "--dmax", "3", "--format", "csv"],
        "export": ["export-domain", "--epsilon", "0.5"],
        "validate": ["validate"],
    }
    differing = []
    for name, args in commands.items():
        outputs = []
        for rep in range(2):
            out = tmp_path / f"{name}-{rep}"
            subprocess.run([sys.executable, "-m", "ratsplan", *args, "--out", str(out)], check=True, capture_output=True)
            outputs.append(out.read_bytes())
        if outputs[0] != outputs[1]:
            differing.append(name)
    sweeps = []
    for rep in range(2):
        out = tmp_path / f"sweep-{rep}"
        subprocess.run([sys.executable, "-m", "ratsplan", "sweep", "--episodes", "50", "--out", str(out)],
                       check=True, capture_output=True)
        sweeps.append((out / "returns.csv").read_bytes() + (out / "summary.csv").read_bytes())
    if sweeps[0] != sweeps[1]:
        differing.append("sweep")
    report("AC10 determinism", not differing,
           f"{len(commands) + 1} commands run twice; differing outputs: {differing or 'none'}")
