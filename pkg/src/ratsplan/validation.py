"""Quick property and oracle checks behind the ``validate`` command."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .baselines import finite_horizon_values
from .domains import START, BridgeSpec, build_bridge, generate_lc_nsmdp
from .nsmdp import Policy, StateMetric, expected_reward, policy_value_snapshot, snapshot, verify_lipschitz
from .planner import rats_plan
from .wasserstein import tv_distance, w1, w1_to_dirac
from .worstcase import AdmissibleSet, lp_oracle_worst_transition, worst_case_transition


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _random_metric(rng, n):
    cells = rng.choice(25, size=n, replace=False)
    coords = np.stack([cells // 5, cells % 5], axis=1)
    return StateMetric.manhattan(coords)


def check_wasserstein(rng, n_pairs):
    worst = 0.0
    for _ in range(n_pairs):
        n = int(rng.integers(2, 7))
        metric = _random_metric(rng, n) if rng.random() < 0.5 else StateMetric.discrete(n)
        mu, nu, xi = rng.dirichlet(np.ones(n), size=3)
        d_mn = w1(mu, nu, metric)[0]
        triangle = d_mn - w1(mu, xi, metric)[0] - w1(xi, nu, metric)[0]
        worst = max(worst, abs(d_mn - w1(nu, mu, metric)[0]), abs(w1(mu, mu, metric)[0]), triangle)
        k = int(rng.integers(n))
        dirac = np.zeros(n)
        dirac[k] = 1.0
        worst = max(worst, abs(w1(mu, dirac, metric)[0] - w1_to_dirac(mu, k, metric)))
        if metric.kind == "discrete":
            worst = max(worst, abs(d_mn - tv_distance(mu, nu)))
    return worst <= 1e-9, f"max deviation {worst:.2e}"


def check_closed_form(rng, n_instances):
    """Closed form is feasible, upper-bounds the exact minimum, and is exact on two-state supports."""
    bad = 0
    for _ in range(n_instances):
        n = int(rng.integers(2, 8))
        metric = _random_metric(rng, n) if rng.random() < 0.5 else StateMetric.discrete(n)
        two = rng.random() < 0.3 and metric.kind == "discrete"
        p0 = np.zeros(n)
        if two:
            idx = rng.choice(n, 2, replace=False)
            p0[idx] = rng.dirichlet(np.ones(2))
            vals = {int(i): float(rng.uniform(-1, 1)) for i in idx}
        else:
            p0 = rng.dirichlet(np.ones(n))
            vals = rng.uniform(-1, 1, n)
        adm = AdmissibleSet(p0, 0.0, float(rng.uniform(0, 1.5)), 0.0, metric)
        sol = worst_case_transition(adm, vals)
        exact = lp_oracle_worst_transition(adm, vals)[1]
        feasible = w1(sol.p_hat, p0, metric)[0] <= adm.radius_p + 1e-9
        above = sol.value >= exact - 1e-9
        tight = not two or abs(sol.value - exact) <= 1e-9
        bad += not (feasible and above and tight)
    return bad == 0, f"{bad} failing instances"


def check_lipschitz_generator(rng, n_instances):
    bad = 0
    worst = 0.0
    for _ in range(n_instances):
        metric = _random_metric(rng, 4)
        lp, lr = float(rng.uniform(0, 0.5)), float(rng.uniform(0, 0.3))
        m = generate_lc_nsmdp(4, 2, 5, lp, lr, metric, rng, lipschitz_rewards=True)
        bad += not verify_lipschitz(m).passed
        l_tot = lp + lr
        for t in range(4):
            for s in range(4):
                for a in range(2):
                    step = abs(expected_reward(m, t + 1, s, a) - expected_reward(m, t, s, a))
                    worst = max(worst, step - l_tot)
    ok = bad == 0 and worst <= 1e-9
    return ok, f"{bad} non-Lipschitz models, max reward excess {worst:.2e}"


def check_snapshot_bound(rng, n_instances):
    worst = -np.inf
    for _ in range(n_instances):
        lp, lr = float(rng.uniform(0, 0.1)), float(rng.uniform(0, 0.1))
        m = generate_lc_nsmdp(4, 2, 6, lp, lr, rng=rng)
        pi = Policy.deterministic(rng.integers(0, 2, 4))
        t0, t = rng.choice(6, 2, replace=False)
        v0 = policy_value_snapshot(snapshot(m, int(t0)), pi)
        vt = policy_value_snapshot(snapshot(m, int(t)), pi)
        bound = abs(int(t) - int(t0)) * (lp + lr) / (1 - m.gamma)
        worst = max(worst, float(np.max(np.abs(v0 - vt)) - bound))
    return worst <= 1e-6, f"max excess over bound {worst:.2e}"


def check_degenerate(rng, n_instances):
    bad = 0
    for _ in range(n_instances):
        m = generate_lc_nsmdp(4, 2, 1, 0.0, 0.0, rng=rng)
        snap = snapshot(m, 0)
        dmax = int(rng.integers(1, 4))
        res = rats_plan(snap, 0, 0, dmax)
        v, _ = finite_horizon_values(snap, dmax)
        bad += abs(res.root_value - v[0]) > 1e-9
    return bad == 0, f"{bad} mismatching roots"


def check_memoization(rng, n_roots):
    m = build_bridge(BridgeSpec(epsilon=0.5))
    bad = 0
    for _ in range(n_roots):
        t0 = int(rng.integers(0, 20))
        snap = snapshot(m, t0)
        on = rats_plan(snap, START, t0, 3, lp=m.lipschitz_p, memoize=True)
        off = rats_plan(snap, START, t0, 3, lp=m.lipschitz_p, memoize=False)
        bad += on.action != off.action or on.root_value != off.root_value
    return bad == 0, f"{bad} roots differ"


def run_validation(seed: int = 0, quick: bool = True) -> list:
    scale = 1 if quick else 10
    checks: list[tuple[str, Callable, int]] = [
        ("wasserstein: metric axioms, Dirac closed form, TV equivalence", check_wasserstein, 100 * scale),
        ("worst case: closed form feasible, bounds exact minimum, tight on two-state supports", check_closed_form, 100 * scale),
        ("generator: Lipschitz transitions and expected rewards", check_lipschitz_generator, 10 * scale),
        ("snapshot value bound", check_snapshot_bound, 20 * scale),
        ("planner: zero radii reduce to finite-horizon value iteration", check_degenerate, 10 * scale),
        ("planner: memoisation does not change the plan", check_memoization, 5 * scale),
    ]
    results = []
    for i, (name, fn, n) in enumerate(checks):
        rng = np.random.default_rng([seed, i])
        start = time.perf_counter()
        try:
            ok, detail = fn(rng, n)
        except Exception as exc:  # a crash is a failed check, not a crashed command
            ok, detail = False, f"error: {exc!r}"
        results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - start))
    return results
