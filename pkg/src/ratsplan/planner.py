"""Risk-averse minimax tree search over a single snapshot.

Decision nodes take the max over actions; chance nodes take the worst model in
the admissible ball that widens with the depth below the root.  The tree is
fully developed to ``dmax`` and leaves are scored by a heuristic.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .nsmdp import MisuseError, Policy, Snapshot
from .worstcase import AdmissibleSet, WorstCaseSolution, lp_oracle_worst_transition, worst_case_reward, worst_case_transition

SUPPORTS = ("snapshot", "all")
INNER_SOLVERS = ("closed-form", "exact")


@dataclass
class DecisionNode:
    state: int
    epoch: int
    depth: int
    value: float = 0.0
    children: list = field(default_factory=list)


@dataclass
class ChanceNode:
    state: int
    epoch: int
    action: int
    value: float = 0.0
    worst_model: Optional[WorstCaseSolution] = None
    children: list = field(default_factory=list)


@dataclass(frozen=True)
class Heuristic:
    """Leaf evaluator.

    ``zero`` scores every leaf 0.  ``mc-lower-bound`` averages ``n_rollouts``
    discounted rollouts of ``rollout_policy`` in MDP_t0 and subtracts
    |t - t0| L_R / (1 - gamma).  Rollouts are seeded from (seed, s, t) so a
    leaf gets the same score whatever order the tree visits it in.
    """

    kind: str = "zero"
    rollout_policy: Optional[Policy] = None
    n_rollouts: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("zero", "mc-lower-bound"):
            raise ValueError(f"unknown heuristic {self.kind!r}")
        if self.n_rollouts < 1:
            raise ValueError("n_rollouts must be at least 1")


def rollout_horizon(gamma: float, bias: float = 1e-3) -> int:
    """Steps after which the discounted tail is at most bias / (1 - gamma)."""
    if gamma == 0.0:
        return 1
    return max(1, math.ceil(math.log(bias) / math.log(gamma)))


def heuristic_mc(
    s: int,
    t: int,
    snap: Snapshot,
    t0: int,
    rollout_policy: Policy,
    n_rollouts: int,
    rng: np.random.Generator,
    lp: float,
    lr: float,
) -> float:
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be at least 1")
    g = snap.gamma
    steps = rollout_horizon(g)
    cdf_p = np.cumsum(snap.transitions, axis=-1)
    reward = snap.rewards
    terminal = snap.states.terminal
    total = 0.0
    for _ in range(n_rollouts):
        state, ret, disc = s, 0.0, 1.0
        for _ in range(steps):
            if terminal[state]:
                break
            a = rollout_policy.act(state, rng=rng)
            row = cdf_p[state, a]
            nxt = min(int(np.searchsorted(row, rng.random() * row[-1], side="right")), len(row) - 1)
            ret += disc * reward[state, a, nxt]
            disc *= g
            state = nxt
        total += ret
    return total / n_rollouts - abs(t - t0) * (lp + lr) / (1.0 - g)


@dataclass
class TreeStatistics:
    decision_nodes: int = 0
    chance_nodes: int = 0
    expansions: int = 0
    depth_profile: Counter = field(default_factory=Counter)


@dataclass
class PlanResult:
    action: int
    root_value: float
    q_values: np.ndarray
    stats: TreeStatistics
    values: dict  # (s, t) -> decision-node value, only when memoised
    tree: Optional[DecisionNode] = None


LeafFunction = Callable[[int, int], float]


class _Search:
    def __init__(self, snap, t0, dmax, heuristic, lp, lr, memoize, support, inner, clip, build_tree):
        self.snap = snap
        self.t0 = t0
        self.dmax = dmax
        self.lp = lp
        self.lr = lr
        self.memoize = memoize
        self.support = support
        self.exact = inner == "exact"
        self.clip = clip
        self.build_tree = build_tree
        self.p = snap.transitions
        self.r0 = snap.expected_rewards()
        self.terminal = snap.states.terminal
        self.gamma = snap.gamma
        self.stats = TreeStatistics()
        self.cache = {}
        self.leaf = self._make_leaf(heuristic)
        n = snap.n_states
        self.every_state = np.arange(n)
        self.supports = [[np.flatnonzero(self.p[s, a] > 0) for a in range(snap.n_actions)] for s in range(n)]

    def _make_leaf(self, heuristic) -> LeafFunction:
        if callable(heuristic) and not isinstance(heuristic, Heuristic):
            return heuristic
        if heuristic is None or heuristic.kind == "zero":
            return lambda s, t: 0.0
        policy = heuristic.rollout_policy
        if policy is None:
            policy = Policy.uniform(self.snap.n_states, self.snap.n_actions)

        def leaf(s, t):
            rng = np.random.default_rng([heuristic.seed, s, t])
            return heuristic_mc(s, t, self.snap, self.t0, policy, heuristic.n_rollouts, rng, self.lp, self.lr)

        return leaf

    def decision(self, s: int, depth: int):
        key = (s, depth)
        if self.memoize and key in self.cache:
            return self.cache[key], None
        self.stats.decision_nodes += 1
        self.stats.depth_profile[depth] += 1
        t = self.t0 + depth
        node = DecisionNode(s, t, depth) if self.build_tree else None
        if self.terminal[s]:
            value = 0.0
        elif depth == self.dmax:
            value = float(self.leaf(s, t))
        else:
            self.stats.expansions += 1
            value = -math.inf
            for a in range(self.snap.n_actions):
                q, child = self.chance(s, a, depth)
                if node is not None:
                    node.children.append(child)
                if q > value:
                    value = q
        if node is not None:
            node.value = value
        if self.memoize:
            self.cache[key] = value
        return value, node

    def chance(self, s: int, a: int, depth: int):
        self.stats.chance_nodes += 1
        cand = self.every_state if self.support == "all" else self.supports[s][a]
        vals = np.empty(cand.size)
        kids = {}
        for k, s2 in enumerate(cand):
            vals[k], kids[int(s2)] = self.decision(int(s2), depth + 1)
        adm = AdmissibleSet(self.p[s, a], float(self.r0[s, a]), self.lp * depth, (self.lp + self.lr) * depth, self.snap.metric)
        child_values = dict(zip(cand.tolist(), vals.tolist()))
        r_hat = worst_case_reward(adm.center_r, adm.radius_r, self.clip)
        worst = None
        if self.exact:
            expected = lp_oracle_worst_transition(adm, child_values)[1]
        else:
            worst = worst_case_transition(adm, child_values)
            expected = worst.value
        value = r_hat + self.gamma * expected
        node = None
        if self.build_tree:
            node = ChanceNode(s, self.t0 + depth, a, value, worst, list(kids.values()))
        return value, node


def rats_plan(
    snapshot_t0: Snapshot,
    s0: int,
    t0: int,
    dmax: int,
    heuristic: Union[Heuristic, LeafFunction, None] = None,
    lp: float = 0.0,
    lr: float = 0.0,
    memoize: bool = True,
    support: str = "snapshot",
    inner: str = "closed-form",
    clip: bool = True,
    build_tree: bool = False,
) -> PlanResult:
    """Minimax search from (s0, t0) using only MDP_t0; returns the root-optimal action.

    ``heuristic`` is a :class:`Heuristic` or any callable ``(s, t) -> value``.
    ``support="snapshot"`` expands the states reachable under MDP_t0;
    ``support="all"`` expands every state so the worst-case mass may move
    anywhere.  ``inner`` picks the closed-form mixture or the exact ball
    minimisation for chance nodes.  ``build_tree`` keeps node objects (and
    is only sensible for small trees).
    """
    if dmax < 1:
        raise ValueError("dmax must be at least 1")
    if snapshot_t0.states.terminal[s0]:
        raise MisuseError("cannot plan from a terminal state")
    if support not in SUPPORTS:
        raise ValueError(f"support must be one of {SUPPORTS}")
    if inner not in INNER_SOLVERS:
        raise ValueError(f"inner must be one of {INNER_SOLVERS}")
    if build_tree and memoize:
        raise ValueError("an explicit tree is only built without memoisation")
    search = _Search(snapshot_t0, t0, dmax, heuristic, lp, lr, memoize, support, inner, clip, build_tree)
    search.stats.decision_nodes += 1
    search.stats.depth_profile[0] += 1
    search.stats.expansions += 1
    q = np.empty(snapshot_t0.n_actions)
    root = DecisionNode(s0, t0, 0) if build_tree else None
    for a in range(snapshot_t0.n_actions):
        q[a], child = search.chance(s0, a, 0)
        if root is not None:
            root.children.append(child)
    action = int(np.argmax(q))  # first maximum: lowest action index wins ties
    if root is not None:
        root.value = float(q[action])
    values = {(s, t0 + d): v for (s, d), v in search.cache.items()}
    values[(s0, t0)] = float(q[action])
    return PlanResult(action, float(q[action]), q, search.stats, values, root)


def minimax(node, dmax: int, context: dict) -> float:
    """Evaluate a node of an explicit tree in place.

    ``context`` carries ``snapshot``, ``t0``, ``lp``, ``lr`` and optionally
    ``heuristic`` (callable (s, t)), ``clip`` and ``support``.  Decision nodes
    are expanded lazily, so this works from a bare root.
    """
    snap: Snapshot = context["snapshot"]
    t0 = context["t0"]
    leaf = context.get("heuristic") or (lambda s, t: 0.0)
    if isinstance(node, DecisionNode):
        if snap.states.terminal[node.state]:
            node.value = 0.0
        elif node.depth >= dmax:
            node.value = float(leaf(node.state, node.epoch))
        else:
            if not node.children:
                node.children = [ChanceNode(node.state, node.epoch, a) for a in range(snap.n_actions)]
            node.value = max(minimax(c, dmax, context) for c in node.children)
        return node.value
    depth = node.epoch - t0
    p0 = snap.transitions[node.state, node.action]
    if context.get("support", "snapshot") == "all":
        cand = np.arange(snap.n_states)
    else:
        cand = np.flatnonzero(p0 > 0)
    if not node.children:
        node.children = [DecisionNode(int(s2), node.epoch + 1, depth + 1) for s2 in cand]
    vals = {c.state: minimax(c, dmax, context) for c in node.children}
    adm = AdmissibleSet.around(snap, node.state, node.action, depth, context["lp"], context["lr"])
    node.worst_model = worst_case_transition(adm, vals)
    r_hat = worst_case_reward(adm.center_r, adm.radius_r, context.get("clip", True))
    node.value = r_hat + snap.gamma * node.worst_model.value
    return node.value


def tree_statistics(tree) -> TreeStatistics:
    """Node counts of an explicit tree (see ``rats_plan(build_tree=True)``)."""
    if isinstance(tree, PlanResult):
        if tree.tree is None:
            return tree.stats
        tree = tree.tree
    stats = TreeStatistics()
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, DecisionNode):
            stats.decision_nodes += 1
            stats.depth_profile[node.depth] += 1
            if node.children:
                stats.expansions += 1
        else:
            stats.chance_nodes += 1
        stack.extend(node.children)
    return stats
