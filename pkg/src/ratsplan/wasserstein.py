"""Exact 1-Wasserstein distances between categorical distributions on a finite metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nsmdp import StateMetric

# residual mass below this is treated as transported
_MASS_EPS = 1e-15
# Bellman-Ford only accepts strict improvements larger than this
_IMPROVE_EPS = 1e-14


class DimensionError(ValueError):
    """Distributions and metric disagree on the number of states."""


@dataclass(frozen=True, eq=False)
class TransportPlan:
    plan: np.ndarray
    cost: float


def _check(mu, nu, metric: StateMetric):
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != nu.shape or mu.ndim != 1 or mu.size != metric.size:
        raise DimensionError(
            f"shapes {mu.shape} and {nu.shape} do not match a {metric.size}-state metric"
        )
    return mu, nu


def tv_distance(mu, nu) -> float:
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != nu.shape:
        raise DimensionError(f"shapes {mu.shape} and {nu.shape} differ")
    return float(0.5 * np.abs(mu - nu).sum())


def w1_to_dirac(p, s_dagger: int, metric: StateMetric) -> float:
    """W1(p, delta_s): every unit of mass travels straight to ``s_dagger``."""
    p = np.asarray(p, dtype=float)
    if p.size != metric.size:
        raise DimensionError(f"{p.size} probabilities for a {metric.size}-state metric")
    if not 0 <= s_dagger < metric.size:
        raise IndexError(f"state {s_dagger} out of range")
    return float(p @ metric.values[:, s_dagger])


def w1(mu, nu, metric: StateMetric) -> tuple[float, TransportPlan]:
    """Exact W1 and an optimal transport plan.

    Mass common to both distributions stays put (optimal for any metric ground
    cost); the remainder is routed by successive shortest augmenting paths on
    the bipartite transport graph restricted to surplus and deficit states.
    """
    mu, nu = _check(mu, nu, metric)
    n = mu.size
    plan = np.zeros((n, n))
    common = np.minimum(mu, nu)
    plan[np.arange(n), np.arange(n)] = common
    supply = mu - common
    demand = nu - common
    src = np.flatnonzero(supply > _MASS_EPS)
    dst = np.flatnonzero(demand > _MASS_EPS)
    if src.size and dst.size:
        sub = _min_cost_transport(supply[src], demand[dst], metric.values[np.ix_(src, dst)])
        plan[np.ix_(src, dst)] += sub
    cost = float((plan * metric.values).sum())
    return cost, TransportPlan(plan, cost)


def w1_distance(mu, nu, metric: StateMetric) -> float:
    if metric.kind == "discrete":
        _check(mu, nu, metric)
        return tv_distance(mu, nu)
    return w1(mu, nu, metric)[0]


def _min_cost_transport(supply: np.ndarray, demand: np.ndarray, cost: np.ndarray) -> np.ndarray:
    """Successive shortest paths for an uncapacitated transportation problem.

    Residual graph: source i -> sink j at cost c[i, j] (unbounded), and
    sink j -> source i at cost -c[i, j] while flow[i, j] > 0.
    """
    supply = supply.copy()
    demand = demand.copy()
    m, k = cost.shape
    flow = np.zeros((m, k))
    for _ in range(4 * (m + k) * (m + k) + 10):
        live_src = supply > _MASS_EPS
        live_dst = demand > _MASS_EPS
        if not live_src.any() or not live_dst.any():
            break
        d_src = np.where(live_src, 0.0, np.inf)
        pred_src = np.full(m, -1)
        d_dst = np.full(k, np.inf)
        pred_dst = np.full(k, -1)
        for _ in range(m + k + 1):
            via = d_src[:, None] + cost
            best = via.argmin(axis=0)
            cand = via[best, np.arange(k)]
            better = cand < d_dst - _IMPROVE_EPS
            d_dst = np.where(better, cand, d_dst)
            pred_dst = np.where(better, best, pred_dst)
            back = np.where(flow > _MASS_EPS, d_dst[None, :] - cost, np.inf)
            bbest = back.argmin(axis=1)
            bcand = back[np.arange(m), bbest]
            bbetter = bcand < d_src - _IMPROVE_EPS
            if not better.any() and not bbetter.any():
                break
            d_src = np.where(bbetter, bcand, d_src)
            pred_src = np.where(bbetter, bbest, pred_src)
        reach = np.where(live_dst, d_dst, np.inf)
        j = int(reach.argmin())
        if not np.isfinite(reach[j]):
            break
        # walk back: sink j <- source i (forward) <- sink j' (backward) ...
        path = []
        amount = demand[j]
        node = j
        for _ in range(m + k + 1):
            i = int(pred_dst[node])
            path.append((i, node, +1))
            back_j = int(pred_src[i])
            if back_j < 0:
                amount = min(amount, supply[i])
                start = i
                break
            path.append((i, back_j, -1))
            amount = min(amount, flow[i, back_j])
            node = back_j
        else:
            raise RuntimeError("transport solver found a cyclic predecessor chain")
        for i, jj, sign in path:
            flow[i, jj] += sign * amount
        supply[start] -= amount
        demand[j] -= amount
    return np.clip(flow, 0.0, None)
