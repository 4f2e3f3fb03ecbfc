"""Small builders and independent reference computations shared by the tests."""

import numpy as np

from ratsplan import NSMDP, ActionSpace, Snapshot, StateMetric, StateSpace
from ratsplan.worstcase import AdmissibleSet, lp_oracle_worst_transition, worst_case_reward, worst_case_transition


def make_nsmdp(p, r=None, gamma=0.9, lp=0.0, lr=0.0, terminal=None, metric=None):
    p = np.asarray(p, dtype=float)
    if p.ndim == 3:
        p = p[None]
    r = np.zeros_like(p) if r is None else np.broadcast_to(np.asarray(r, dtype=float), p.shape)
    n_states, n_actions = p.shape[1], p.shape[2]
    terminal = np.zeros(n_states, dtype=bool) if terminal is None else np.asarray(terminal)
    metric = StateMetric.discrete(n_states) if metric is None else metric
    space = StateSpace(tuple(f"s{i}" for i in range(n_states)), terminal)
    return NSMDP(space, ActionSpace.plain(n_actions), p, r, gamma, lp, lr, metric)


def make_snapshot(p, r=None, gamma=0.9, metric=None, terminal=None):
    p = np.asarray(p, dtype=float)
    r = np.zeros_like(p) if r is None else np.broadcast_to(np.asarray(r, dtype=float), p.shape)
    n = p.shape[0]
    metric = StateMetric.discrete(n) if metric is None else metric
    terminal = np.zeros(n, dtype=bool) if terminal is None else np.asarray(terminal)
    space = StateSpace(tuple(f"s{i}" for i in range(n)), terminal)
    return Snapshot(space, ActionSpace.plain(p.shape[1]), p, r, gamma, metric)


def grid_metric(rng, n, side=5):
    cells = rng.choice(side * side, size=n, replace=False)
    return StateMetric.manhattan(np.stack([cells // side, cells % side], axis=1))


def minimax_reference(snap, lp, lr, depth, leaf=None, exact=False, clip=True):
    """Backward recursion over depths with the worst-case backup; returns {depth: values}.

    Written against the public chance-node pieces rather than the planner, and
    ignoring terminal flags (tests that use it build models without terminals).
    """
    n_s, n_a = snap.n_states, snap.n_actions
    v = np.zeros(n_s) if leaf is None else np.asarray(leaf, dtype=float)
    out = {depth: v}
    for d in range(depth - 1, -1, -1):
        q = np.empty((n_s, n_a))
        for s in range(n_s):
            for a in range(n_a):
                adm = AdmissibleSet.around(snap, s, a, d, lp, lr)
                support = np.flatnonzero(snap.transitions[s, a] > 0)
                child = {int(i): v[i] for i in support}
                if exact:
                    ev = lp_oracle_worst_transition(adm, child)[1]
                else:
                    ev = worst_case_transition(adm, child).value
                q[s, a] = worst_case_reward(adm.center_r, adm.radius_r, clip) + snap.gamma * ev
        v = q.max(axis=1)
        out[d] = v
    return out
