"""Worst-case snapshot models inside Wasserstein/absolute-value balls around MDP_t0.

The chance-node problem is

    min  R + gamma * sum_s' p(s') V(s')
    s.t. W1(p, p0) <= radius_p,  |R - R0| <= radius_r

and is solved either by the mixture-with-a-Dirac closed form or exactly by
:func:`lp_oracle_worst_transition`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .nsmdp import NSMDP, MisuseError, Policy, Snapshot, StateMetric, snapshot
from .wasserstein import w1_distance

ChildValues = Union[Mapping[int, float], np.ndarray]


class ScaleError(RuntimeError):
    """A brute-force routine was asked to run beyond desk scale."""


@dataclass(frozen=True, eq=False)
class AdmissibleSet:
    center_p: np.ndarray
    center_r: float
    radius_p: float
    radius_r: float
    metric: StateMetric

    def __post_init__(self):
        if self.radius_p < 0 or self.radius_r < 0:
            raise ValueError("admissible radii must be nonnegative")

    @classmethod
    def around(cls, snap: Snapshot, s: int, a: int, elapsed: int, lp: float, lr: float) -> "AdmissibleSet":
        """Ball of models reachable ``elapsed`` epochs after the snapshot, L_R = L_p + L_r."""
        elapsed = abs(elapsed)
        return cls(
            snap.transitions[s, a],
            float(snap.expected_rewards()[s, a]),
            lp * elapsed,
            (lp + lr) * elapsed,
            snap.metric,
        )


@dataclass(frozen=True, eq=False)
class WorstCaseSolution:
    p_hat: np.ndarray
    r_hat: float
    lam: float
    s_dagger: int
    value: float


def _as_indexed(child_values: ChildValues):
    if isinstance(child_values, Mapping):
        if not child_values:
            raise MisuseError("child values are empty")
        idx = np.array(sorted(child_values), dtype=int)
        vals = np.array([child_values[i] for i in idx], dtype=float)
    else:
        vals = np.asarray(child_values, dtype=float)
        if vals.size == 0:
            raise MisuseError("child values are empty")
        idx = np.arange(vals.size)
    return idx, vals


def _full(p: np.ndarray, idx: np.ndarray, vals: np.ndarray):
    """Expected child value under p; p must not put mass outside ``idx``."""
    outside = np.ones(p.size, dtype=bool)
    outside[idx] = False
    if np.any(p[outside] > 0):
        raise MisuseError("child values missing for states in the support of p0")
    return float(p[idx] @ vals)


def worst_case_reward(center_r: float, radius_r: float, clip: bool = True) -> float:
    if radius_r < 0:
        raise ValueError("reward radius must be nonnegative")
    r = center_r - radius_r
    return max(r, -1.0) if clip else r


def worst_case_transition(adm: AdmissibleSet, child_values: ChildValues) -> WorstCaseSolution:
    """Closed-form mixture (1 - lam) p0 + lam * delta_{argmin V}.

    ``value`` holds the expected child value under ``p_hat`` (no reward term).
    """
    idx, vals = _as_indexed(child_values)
    p0 = np.asarray(adm.center_p, dtype=float)
    base = _full(p0, idx, vals)
    k = int(vals.argmin())  # first minimum: lowest state index wins ties
    s_dag = int(idx[k])
    dist = float(p0 @ adm.metric.values[:, s_dag])
    if adm.radius_p <= 0.0 or dist == 0.0:
        lam = 0.0 if dist > 0.0 or adm.radius_p <= 0.0 else 1.0
    elif dist <= adm.radius_p:
        lam = 1.0
    else:
        lam = adm.radius_p / dist
    p_hat = (1.0 - lam) * p0
    p_hat[s_dag] += lam
    value = (1.0 - lam) * base + lam * float(vals[k])
    return WorstCaseSolution(p_hat, adm.center_r, lam, s_dag, value)


def lp_oracle_worst_transition(adm: AdmissibleSet, child_values: ChildValues):
    """Exact minimiser of E_p[V] over the W1 ball, restricted to the given states.

    The problem is an LP over transport plans out of p0 with a single budget
    row.  Its Lagrangian dual max_{mu >= 0} sum_i p0_i min_j (V_j + mu d_ij) - mu r
    is concave and piecewise linear, so it peaks at mu = 0 or at a crossing
    of two lines of one source row.  Every candidate is evaluated; the primal
    plan is rebuilt from the minimiser sets at the optimal multiplier.
    Returns ``(p_star, value)``.
    """
    if adm.radius_p < 0:
        raise ValueError("radius must be nonnegative")
    idx, vals = _as_indexed(child_values)
    p0 = np.asarray(adm.center_p, dtype=float)
    base = _full(p0, idx, vals)
    if adm.radius_p == 0.0:
        return p0.copy(), base
    src = np.flatnonzero(p0 > 0)
    w = p0[src]
    d = adm.metric.values[np.ix_(src, idx)]  # (sources, targets)
    r = adm.radius_p

    # crossings of lines vals[j] + mu d[i, j] within each source row
    dv = vals[None, :, None] - vals[None, None, :]
    dd = d[:, None, :] - d[:, :, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        mus = dv / dd
    mus = mus[np.isfinite(mus) & (mus > 0)]
    mus = np.unique(np.concatenate([[0.0], mus]))
    lines = vals[None, None, :] + mus[:, None, None] * d[None, :, :]
    dual = (w[None, :] * lines.min(axis=2)).sum(axis=1) - mus * r
    mu = float(mus[int(dual.argmax())])

    row = vals[None, :] + mu * d
    best = row.min(axis=1, keepdims=True)
    tol = 1e-12 * max(1.0, float(np.abs(row).max()))
    opt = row <= best + tol
    d_opt = np.where(opt, d, np.nan)
    hi = np.nanargmax(d_opt, axis=1)
    lo = np.nanargmin(d_opt, axis=1)
    if mu == 0.0:
        # budget may be slack: cheapest minimiser per source, cheapest of those
        lo = np.array([np.flatnonzero(opt[i])[np.argmin(d[i, opt[i]])] for i in range(len(src))])
        hi = lo
    rows = np.arange(len(src))
    b_hi = float(w @ d[rows, hi])
    b_lo = float(w @ d[rows, lo])
    theta = 1.0 if b_hi <= r else (r - b_lo) / (b_hi - b_lo)
    theta = min(max(theta, 0.0), 1.0)
    p_star = np.zeros_like(p0)
    np.add.at(p_star, idx[hi], theta * w)
    np.add.at(p_star, idx[lo], (1.0 - theta) * w)
    return p_star, float(p_star[idx] @ vals)


def chance_node_value(
    adm: AdmissibleSet,
    child_values: ChildValues,
    gamma: float,
    clip: bool = True,
    exact: bool = False,
) -> float:
    """Worst-case reward plus discounted worst-case expected child value."""
    r_hat = worst_case_reward(adm.center_r, adm.radius_r, clip)
    if exact:
        expected = lp_oracle_worst_transition(adm, child_values)[1]
    else:
        expected = worst_case_transition(adm, child_values).value
    return r_hat + gamma * expected


@dataclass(frozen=True)
class RelaxationGap:
    """Values for one start state: chained worst case (grid) vs relaxed worst case (exact)."""

    state: int
    chained: float
    relaxed: float

    @property
    def gap(self) -> float:
        return self.chained - self.relaxed


def _simplex_grid(n: int, resolution: float) -> np.ndarray:
    steps = int(round(1.0 / resolution))
    if abs(steps * resolution - 1.0) > 1e-9:
        raise ValueError("resolution must divide 1")
    pts = [c for c in itertools.product(range(steps + 1), repeat=n - 1) if sum(c) <= steps]
    grid = np.array([list(c) + [steps - sum(c)] for c in pts], dtype=float) / steps
    return grid


def brute_force_worst_nsmdp(
    nsmdp: NSMDP,
    pi: Policy,
    t0: int = 0,
    horizon: int = 2,
    resolution: float = 0.01,
    leaf_values=None,
    clip: bool = True,
    max_configs: int = 2_000_000,
) -> list:
    """Worst case of a fixed policy over chained versus t0-anchored model balls.

    Epoch t0 uses MDP_t0 exactly.  Epochs t0+1 .. t0+horizon are chosen by the
    adversary, each transition row within L_p of the previous epoch's row
    (chained) or within L_p * k of the t0 row (relaxed).  Rewards are collected
    at epochs t0 .. t0+horizon and ``leaf_values`` (default 0) is paid after.
    Expected rewards are minimised in closed form, R0 - L_R k, because the
    value is increasing in each of them.  The chained problem is enumerated
    over a simplex grid of step ``resolution`` (an upper estimate of its
    minimum); the relaxed one is solved exactly per epoch.
    """
    s_n, a_n = nsmdp.n_states, nsmdp.n_actions
    if s_n > 4 or a_n > 2 or horizon > 3:
        raise ScaleError("brute force is limited to |S| <= 4, |A| <= 2, horizon <= 3")
    if pi.kind != "stationary-deterministic":
        raise MisuseError("brute force evaluates a stationary deterministic policy")
    snap = snapshot(nsmdp, t0)
    gamma = nsmdp.gamma
    lp, l_tot = nsmdp.lipschitz_p, nsmdp.lipschitz_reward_total
    act = np.asarray(pi.table)
    states = np.arange(s_n)
    p0 = snap.transitions[states, act]  # (S, S)
    r0 = snap.expected_rewards()[states, act]
    leaf = np.zeros(s_n) if leaf_values is None else np.asarray(leaf_values, dtype=float)
    rewards = [np.array([worst_case_reward(r, l_tot * k, clip) for r in r0]) for k in range(horizon + 1)]

    # relaxed: independent exact minimisation per (state, epoch)
    v = leaf.copy()
    for k in range(horizon, 0, -1):
        nxt = np.empty(s_n)
        for s in range(s_n):
            adm = AdmissibleSet(p0[s], r0[s], lp * k, l_tot * k, nsmdp.metric)
            nxt[s] = rewards[k][s] + gamma * lp_oracle_worst_transition(adm, v)[1]
        v = nxt
    relaxed = rewards[0] + gamma * p0 @ v

    # the t0 rows join the grid so the centre of every ball is a candidate
    grid = np.vstack([_simplex_grid(s_n, resolution), p0])
    g_n = len(grid)
    if s_n ** 2 * g_n ** 2 > 5e8:
        raise ScaleError("grid too fine for pairwise distance tables")
    tiny = 1e-12
    to_grid = np.array([[w1_distance(p0[s], g, nsmdp.metric) for g in grid] for s in range(s_n)])
    if nsmdp.metric.kind == "discrete":
        pair = 0.5 * np.abs(grid[:, None, :] - grid[None, :, :]).sum(axis=-1)
    else:
        pair = np.array([[w1_distance(g, h, nsmdp.metric) for h in grid] for g in grid])
    first = [np.flatnonzero(to_grid[s] <= lp + tiny) for s in range(s_n)]
    neighbours = [np.flatnonzero(pair[g] <= lp + tiny) for g in range(g_n)]

    count = 1
    for f in first:
        count *= f.size
    widest = max(n.size for n in neighbours)
    count *= widest ** (s_n * max(horizon - 2, 0))
    if count > max_configs:
        raise ScaleError(f"{count} configurations exceed the limit of {max_configs}")

    def values_at(k, choices):
        # yields V_k for every admissible choice of rows at epochs k .. horizon
        if k == horizon:
            # the last adversarial epoch decouples per state
            yield np.array([
                rewards[k][s] + gamma * float(np.min(grid[choices[s]] @ leaf)) for s in range(s_n)
            ])
            return
        for rows in itertools.product(*choices):
            rows = np.asarray(rows)
            for v_next in values_at(k + 1, [neighbours[g] for g in rows]):
                yield rewards[k] + gamma * grid[rows] @ v_next

    best = np.full(s_n, np.inf)
    for v1 in values_at(1, first):
        best = np.minimum(best, rewards[0] + gamma * p0 @ v1)
    return [RelaxationGap(s, float(best[s]), float(relaxed[s])) for s in range(s_n)]
