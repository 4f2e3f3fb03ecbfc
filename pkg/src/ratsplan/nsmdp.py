"""Finite non-stationary MDPs, their snapshots, and the state metrics they live on."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

STOCHASTIC_TOL = 1e-9
EXHAUSTIVE_METRIC_CHECK = 64


class HorizonError(IndexError):
    """An epoch index lies outside the decision horizon."""


class MisuseError(ValueError):
    """An operation was called on an input it does not accept."""


def _frozen(array, dtype=float):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def categorical(probs, tol: float = STOCHASTIC_TOL) -> np.ndarray:
    """Validate a probability vector and return a read-only, renormalised copy.

    Rows that sum to one within ``tol`` are rescaled to sum exactly; anything
    further off, or with entries outside [0, 1], is rejected.
    """
    p = np.array(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("a categorical distribution is a non-empty vector")
    if np.any(p < -tol) or np.any(p > 1 + tol):
        raise ValueError("probabilities must lie in [0, 1]")
    total = p.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    p = np.clip(p, 0.0, None) / np.clip(p, 0.0, None).sum()
    p.setflags(write=False)
    return p


def _normalise_rows(table: np.ndarray, tol: float) -> np.ndarray:
    if np.any(table < -tol) or np.any(table > 1 + tol):
        raise ValueError("transition probabilities must lie in [0, 1]")
    sums = table.sum(axis=-1)
    bad = np.abs(sums - 1.0) > tol
    if np.any(bad):
        where = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"transition row {where} sums to {sums[where]!r}")
    table = np.clip(table, 0.0, None)
    sums = table.sum(axis=-1, keepdims=True)
    # rows already normalised to round-off are kept bit-for-bit, so this is idempotent
    return table / np.where(np.abs(sums - 1.0) > 1e-12, sums, 1.0)


@dataclass(frozen=True, eq=False)
class StateSpace:
    names: tuple
    terminal: np.ndarray
    coordinates: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        terminal = _frozen(self.terminal, dtype=bool)
        if terminal.shape != (len(self.names),):
            raise ValueError("one terminal flag per state is required")
        object.__setattr__(self, "terminal", terminal)
        if self.coordinates is not None:
            coords = _frozen(self.coordinates, dtype=int)
            if coords.shape[0] != len(self.names):
                raise ValueError("one coordinate row per state is required")
            object.__setattr__(self, "coordinates", coords)

    @classmethod
    def plain(cls, n: int) -> "StateSpace":
        return cls(tuple(f"s{i}" for i in range(n)), np.zeros(n, dtype=bool))

    def __len__(self):
        return len(self.names)


@dataclass(frozen=True, eq=False)
class ActionSpace:
    names: tuple

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) < 1:
            raise ValueError("at least one action is required")

    @classmethod
    def plain(cls, n: int) -> "ActionSpace":
        return cls(tuple(f"a{i}" for i in range(n)))

    def __len__(self):
        return len(self.names)


@dataclass(frozen=True, eq=False)
class StateMetric:
    """Finite metric over state indices, stored as a dense distance matrix."""

    kind: str
    values: np.ndarray

    def __post_init__(self):
        d = _frozen(self.values)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("metric must be a square matrix")
        object.__setattr__(self, "values", d)
        check_metric_axioms(d)

    @classmethod
    def discrete(cls, n: int) -> "StateMetric":
        return cls("discrete", 1.0 - np.eye(n))

    @classmethod
    def manhattan(cls, coordinates) -> "StateMetric":
        c = np.asarray(coordinates, dtype=float)
        return cls("manhattan-grid", np.abs(c[:, None, :] - c[None, :, :]).sum(axis=-1))

    @classmethod
    def explicit(cls, matrix) -> "StateMetric":
        return cls("explicit-matrix", matrix)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.values.max())


def check_metric_axioms(d: np.ndarray, tol: float = 1e-12, rng=None) -> None:
    n = d.shape[0]
    if np.any(np.abs(np.diag(d)) > tol):
        raise ValueError("metric must vanish on the diagonal")
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] <= 0):
        raise ValueError("metric must be positive between distinct states")
    if np.any(np.abs(d - d.T) > tol):
        raise ValueError("metric must be symmetric")
    if n <= EXHAUSTIVE_METRIC_CHECK:
        # d[i,k] <= d[i,j] + d[j,k] for every triple
        via = (d[:, :, None] + d[None, :, :]).min(axis=1)
        if np.any(d > via + tol):
            raise ValueError("metric violates the triangle inequality")
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        i, j, k = rng.integers(0, n, size=(3, 20000))
        if np.any(d[i, k] > d[i, j] + d[j, k] + tol):
            raise ValueError("metric violates the triangle inequality")


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Stationary slice of an NSMDP frozen at one decision epoch."""

    states: StateSpace
    actions: ActionSpace
    transitions: np.ndarray  # (S, A, S)
    rewards: np.ndarray  # (S, A, S)
    gamma: float
    metric: StateMetric
    _expected: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s, a = len(self.states), len(self.actions)
        p = _normalise_rows(np.asarray(self.transitions, dtype=float), STOCHASTIC_TOL)
        r = np.asarray(self.rewards, dtype=float)
        if p.shape != (s, a, s) or r.shape != (s, a, s):
            raise ValueError(f"snapshot tables must have shape {(s, a, s)}")
        _check_rewards(r)
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        object.__setattr__(self, "transitions", _frozen(p))
        object.__setattr__(self, "rewards", _frozen(r))
        object.__setattr__(self, "_expected", _frozen((p * r).sum(axis=-1)))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def expected_rewards(self) -> np.ndarray:
        """R(s, a) = sum_s' p(s'|s,a) r(s,a,s'), shape (S, A)."""
        return self._expected


def _check_rewards(r: np.ndarray) -> None:
    if np.any(r < -1.0 - 1e-12) or np.any(r > 1.0 + 1e-12):
        raise ValueError("rewards must lie in [-1, 1]")


@dataclass(frozen=True, eq=False)
class NSMDP:
    """Finite-horizon non-stationary MDP with declared Lipschitz constants.

    ``transitions[t, s, a]`` is the distribution over next states at epoch ``t``
    (0-indexed) and ``rewards[t, s, a, s']`` the matching transition reward.
    The declared constants are not enforced here; use :func:`verify_lipschitz`.
    """

    states: StateSpace
    actions: ActionSpace
    transitions: np.ndarray  # (N, S, A, S)
    rewards: np.ndarray  # (N, S, A, S)
    gamma: float
    lipschitz_p: float
    lipschitz_r: float
    metric: StateMetric

    def __post_init__(self):
        s, a = len(self.states), len(self.actions)
        p = np.asarray(self.transitions, dtype=float)
        r = np.asarray(self.rewards, dtype=float)
        if p.ndim != 4 or p.shape[1:] != (s, a, s) or r.shape != p.shape:
            raise ValueError(f"tables must have shape (N, {s}, {a}, {s})")
        if p.shape[0] < 1:
            raise ValueError("horizon must be positive")
        p = _normalise_rows(p, STOCHASTIC_TOL)
        _check_rewards(r)
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if self.lipschitz_p < 0 or self.lipschitz_r < 0:
            raise ValueError("Lipschitz constants must be nonnegative")
        if self.metric.size != s:
            raise ValueError("metric size does not match the state space")
        for i in np.flatnonzero(self.states.terminal):
            if not np.allclose(p[:, i, :, i], 1.0) or np.any(r[:, i, :, i] != 0.0):
                raise ValueError(f"terminal state {i} must be a zero-reward self-loop")
        object.__setattr__(self, "transitions", _frozen(p))
        object.__setattr__(self, "rewards", _frozen(r))

    @property
    def horizon(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def lipschitz_reward_total(self) -> float:
        """Lipschitz constant of the expected reward, L_p + L_r."""
        return self.lipschitz_p + self.lipschitz_r

    def _check_epoch(self, t: int) -> None:
        if not 0 <= t < self.horizon:
            raise HorizonError(f"epoch {t} outside [0, {self.horizon})")

    def _check_pair(self, s: int, a: int) -> None:
        if not 0 <= s < self.n_states:
            raise IndexError(f"state {s} out of range")
        if not 0 <= a < self.n_actions:
            raise IndexError(f"action {a} out of range")


def expected_reward(nsmdp: NSMDP, t: int, s: int, a: int) -> float:
    nsmdp._check_epoch(t)
    nsmdp._check_pair(s, a)
    return float(nsmdp.transitions[t, s, a] @ nsmdp.rewards[t, s, a])


def snapshot(nsmdp: NSMDP, t0: int) -> Snapshot:
    nsmdp._check_epoch(t0)
    return Snapshot(
        nsmdp.states,
        nsmdp.actions,
        nsmdp.transitions[t0],
        nsmdp.rewards[t0],
        nsmdp.gamma,
        nsmdp.metric,
    )


@dataclass(frozen=True)
class LipschitzReport:
    max_p_rate: float
    max_r_rate: float
    passed: bool


def verify_lipschitz(nsmdp: NSMDP, metric: Optional[StateMetric] = None, tol: float = 1e-9) -> LipschitzReport:
    """Largest per-epoch W1 and reward change, compared with the declared constants.

    Checking consecutive epochs suffices: W1 and |.| obey the triangle
    inequality, so per-step bounds add up to L|t - t'|.
    """
    from .wasserstein import w1_distance

    metric = nsmdp.metric if metric is None else metric
    p, r = nsmdp.transitions, nsmdp.rewards
    max_p = 0.0
    max_r = 0.0
    if nsmdp.horizon > 1:
        max_r = float(np.abs(np.diff(r, axis=0)).max())
        if metric.kind == "discrete":
            max_p = float(0.5 * np.abs(np.diff(p, axis=0)).sum(axis=-1).max())
        else:
            for t in range(nsmdp.horizon - 1):
                changed = np.any(p[t] != p[t + 1], axis=-1)
                for s, a in np.argwhere(changed):
                    max_p = max(max_p, w1_distance(p[t, s, a], p[t + 1, s, a], metric))
    passed = max_p <= nsmdp.lipschitz_p + tol and max_r <= nsmdp.lipschitz_r + tol
    return LipschitzReport(max_p, max_r, passed)


def sample_transition(nsmdp: NSMDP, t: int, s: int, a: int, rng: np.random.Generator):
    """Draw s' ~ p_t(.|s,a) by inverse CDF on a single uniform; returns (s', r)."""
    nsmdp._check_epoch(t)
    nsmdp._check_pair(s, a)
    if nsmdp.states.terminal[s]:
        raise MisuseError(f"cannot sample a transition from terminal state {s}")
    cdf = np.cumsum(nsmdp.transitions[t, s, a])
    nxt = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    nxt = min(nxt, nsmdp.n_states - 1)
    while nsmdp.transitions[t, s, a, nxt] == 0.0:
        # float round-off can land on a zero-mass trailing entry
        nxt -= 1
    return nxt, float(nsmdp.rewards[t, s, a, nxt])


@dataclass(frozen=True, eq=False)
class Policy:
    """Decision rules over a finite MDP.

    ``table`` is (S,) ints for stationary-deterministic, (S, A) for
    stationary-stochastic, and (T, S) or (T, S, A) for nonstationary policies.
    """

    kind: str
    table: np.ndarray

    KINDS = ("stationary-deterministic", "stationary-stochastic", "nonstationary")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        table = np.asarray(self.table)
        if self.kind == "stationary-deterministic":
            table = table.astype(int)
            if table.ndim != 1:
                raise ValueError("deterministic policy table must be (S,)")
        elif self.kind == "stationary-stochastic":
            table = _normalise_rows(table.astype(float), STOCHASTIC_TOL)
            if table.ndim != 2:
                raise ValueError("stochastic policy table must be (S, A)")
        else:
            if table.ndim == 2:
                table = table.astype(int)
            elif table.ndim == 3:
                table = _normalise_rows(table.astype(float), STOCHASTIC_TOL)
            else:
                raise ValueError("nonstationary policy table must be (T, S) or (T, S, A)")
        object.__setattr__(self, "table", _frozen(table, dtype=table.dtype))

    @classmethod
    def deterministic(cls, actions: Sequence[int]) -> "Policy":
        return cls("stationary-deterministic", np.asarray(actions, dtype=int))

    @classmethod
    def stochastic(cls, probs) -> "Policy":
        return cls("stationary-stochastic", np.asarray(probs, dtype=float))

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "Policy":
        return cls.stochastic(np.full((n_states, n_actions), 1.0 / n_actions))

    @property
    def stationary(self) -> bool:
        return self.kind != "nonstationary"

    def matrix(self, n_actions: int, t: Optional[int] = None) -> np.ndarray:
        """Action probabilities as an (S, A) matrix, for epoch ``t`` if nonstationary."""
        table = self.table
        if not self.stationary:
            if t is None:
                raise MisuseError("a nonstationary policy needs an epoch")
            table = table[t]
        if table.ndim == 1:
            return np.eye(n_actions)[table]
        return np.asarray(table, dtype=float)

    def act(self, s: int, t: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> int:
        table = self.table if self.stationary else self.table[t]
        row = table[s]
        if np.ndim(row) == 0:
            return int(row)
        if rng is None:
            raise MisuseError("a stochastic policy needs a random generator")
        cdf = np.cumsum(row)
        return min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), len(row) - 1)


def policy_value_snapshot(snap: Snapshot, pi: Policy, tol: float = 1e-10) -> np.ndarray:
    """Iterative policy evaluation on a stationary snapshot.

    Stops once the sup-norm update falls below ``tol * (1 - gamma) / gamma`` so
    the returned table lies within ``tol`` of the fixed point.
    """
    if not pi.stationary:
        raise MisuseError("snapshot evaluation needs a stationary policy")
    if tol <= 0:
        raise ValueError("tol must be positive")
    weights = pi.matrix(snap.n_actions)
    p_pi = np.einsum("sa,sat->st", weights, snap.transitions)
    r_pi = (weights * snap.expected_rewards()).sum(axis=1)
    g = snap.gamma
    v = np.zeros(snap.n_states)
    if g == 0.0:
        return r_pi.copy()
    stop = tol * (1.0 - g) / g
    while True:
        new = r_pi + g * p_pi @ v
        if np.max(np.abs(new - v)) < stop:
            return new
        v = new


def finite_horizon_policy_value(snap: Snapshot, pi: Policy, steps: int, leaf=None) -> np.ndarray:
    """Expected discounted return of ``steps`` steps of ``pi`` followed by ``leaf`` values."""
    weights = pi.matrix(snap.n_actions)
    p_pi = np.einsum("sa,sat->st", weights, snap.transitions)
    r_pi = (weights * snap.expected_rewards()).sum(axis=1)
    v = np.zeros(snap.n_states) if leaf is None else np.asarray(leaf, dtype=float)
    for _ in range(steps):
        v = r_pi + snap.gamma * p_pi @ v
    return v
