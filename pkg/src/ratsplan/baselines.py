"""Dynamic-programming baselines: plan on the current snapshot, or on the true NSMDP."""

from __future__ import annotations

import numpy as np

from .nsmdp import NSMDP, HorizonError, MisuseError, Policy, Snapshot, snapshot


def value_iteration(snap: Snapshot, tol: float = 1e-6, max_iter: int = 100_000):
    """Discounted value iteration until the sup-norm update drops below ``tol``.

    Returns ``(V, Q)`` with Q of shape (S, A).
    """
    p, r = snap.transitions, snap.expected_rewards()
    v = np.zeros(snap.n_states)
    for _ in range(max_iter):
        q = r + snap.gamma * p @ v
        new = q.max(axis=1)
        if np.max(np.abs(new - v)) < tol:
            return new, r + snap.gamma * p @ new
        v = new
    raise RuntimeError("value iteration did not converge")


def finite_horizon_values(snap: Snapshot, steps: int, leaf=None):
    """Optimal ``steps``-step values on a snapshot, starting from ``leaf`` (default 0)."""
    p, r = snap.transitions, snap.expected_rewards()
    v = np.zeros(snap.n_states) if leaf is None else np.asarray(leaf, dtype=float)
    q = r + snap.gamma * p @ v
    for _ in range(steps):
        q = r + snap.gamma * p @ v
        v = q.max(axis=1)
    return v, q


def dp_snapshot_action(snap: Snapshot, s0: int, tol: float = 1e-6) -> int:
    if snap.states.terminal[s0]:
        raise MisuseError("cannot plan from a terminal state")
    _, q = value_iteration(snap, tol)
    return int(np.argmax(q[s0]))


def dp_snapshot_policy(snap: Snapshot, tol: float = 1e-6) -> np.ndarray:
    """Greedy action per state; same decisions as :func:`dp_snapshot_action`."""
    _, q = value_iteration(snap, tol)
    return q.argmax(axis=1)


def dp_nsmdp_policy(nsmdp: NSMDP, horizon: int, tol: float = 1e-6) -> Policy:
    """Backward induction over epochs ``horizon-1 .. 0`` on the true model.

    The tail value at ``horizon`` comes from value iteration on the last
    snapshot available there.
    """
    if horizon > nsmdp.horizon:
        raise HorizonError(f"horizon {horizon} exceeds the model's {nsmdp.horizon} epochs")
    if horizon < 1:
        raise ValueError("horizon must be positive")
    tail = snapshot(nsmdp, min(horizon, nsmdp.horizon - 1))
    v, _ = value_iteration(tail, tol)
    actions = np.empty((horizon, nsmdp.n_states), dtype=int)
    for t in range(horizon - 1, -1, -1):
        p, r = nsmdp.transitions[t], nsmdp.rewards[t]
        q = (p * (r + nsmdp.gamma * v[None, None, :])).sum(axis=-1)
        actions[t] = q.argmax(axis=1)
        v = q.max(axis=1)
    return Policy("nonstationary", actions)
