"""Built-in domains: the non-stationary bridge and a random LC-NSMDP generator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .nsmdp import NSMDP, ActionSpace, StateMetric, StateSpace

UP, RIGHT, DOWN, LEFT = range(4)
ACTION_NAMES = ("Up", "Right", "Down", "Left")
_MOVES = {UP: (-1, 0), RIGHT: (0, 1), DOWN: (1, 0), LEFT: (0, -1)}

ROWS, COLS = 3, 9
MIDDLE = 1
START_COL = 5
LEFT_GOAL_COL, RIGHT_GOAL_COL = 0, COLS - 1
# columns 0..4 are the left half, 5..8 the right half (start included)
SPLIT_COL = 5


@dataclass(frozen=True)
class BridgeSpec:
    epsilon: float
    lp: float = 1.0
    gamma: float = 0.9
    misstep_max: float = 0.45
    kappa: float = 0.05
    horizon: int = 30
    metric: str = "discrete"

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon!r}")
        if not 0.0 <= self.misstep_max <= 0.5:
            raise ValueError("misstep_max must lie in [0, 0.5]")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.metric not in ("discrete", "manhattan"):
            raise ValueError(f"unknown bridge metric {self.metric!r}")


def bridge_cell(row: int, col: int) -> int:
    return row * COLS + col


START = bridge_cell(MIDDLE, START_COL)
LEFT_GOAL = bridge_cell(MIDDLE, LEFT_GOAL_COL)
RIGHT_GOAL = bridge_cell(MIDDLE, RIGHT_GOAL_COL)


def _layout():
    kind = {}
    for r in range(ROWS):
        for c in range(COLS):
            if r == MIDDLE:
                kind[r, c] = "goal" if c in (LEFT_GOAL_COL, RIGHT_GOAL_COL) else "bridge"
            else:
                kind[r, c] = "ground" if c in (LEFT_GOAL_COL, RIGHT_GOAL_COL) else "hole"
    return kind


def misstep(t: int, col: int, spec: BridgeSpec) -> float:
    """Probability of each sideways outcome when moving Left/Right from column ``col``."""
    side = (1.0 - spec.epsilon) if col < SPLIT_COL else spec.epsilon
    return side * min(spec.misstep_max, spec.kappa * t)


def build_bridge(spec: BridgeSpec) -> NSMDP:
    """3 x 9 grid: bridge along the middle row, goals at both ends, holes above and below.

    Moves off the grid leave the agent in place.  Left/Right on a non-terminal
    cell slip to the Up and Down outcomes with probability m(t) each.
    """
    kind = _layout()
    n = ROWS * COLS
    coords = np.array([(r, c) for r in range(ROWS) for c in range(COLS)])
    names = tuple(f"{kind[r, c]}({r},{c})" for r, c in coords)
    terminal = np.array([kind[r, c] in ("goal", "hole") for r, c in coords])
    states = StateSpace(names, terminal, coords)
    entry = np.array([{"goal": 1.0, "hole": -1.0}.get(kind[r, c], 0.0) for r, c in coords])

    def move(r, c, a):
        dr, dc = _MOVES[a]
        nr, nc = r + dr, c + dc
        if 0 <= nr < ROWS and 0 <= nc < COLS:
            return bridge_cell(nr, nc)
        return bridge_cell(r, c)

    p = np.zeros((spec.horizon, n, 4, n))
    rew = np.zeros((spec.horizon, n, 4, n))
    for s, (r, c) in enumerate(coords):
        if terminal[s]:
            p[:, s, :, s] = 1.0
            continue
        rew[:, s, :, :] = entry[None, None, :]
        for a in range(4):
            target = move(r, c, a)
            if a in (LEFT, RIGHT):
                up, down = move(r, c, UP), move(r, c, DOWN)
                for t in range(spec.horizon):
                    m = misstep(t, c, spec)
                    p[t, s, a, target] += 1.0 - 2.0 * m
                    p[t, s, a, up] += m
                    p[t, s, a, down] += m
            else:
                p[:, s, a, target] = 1.0
    metric = StateMetric.discrete(n) if spec.metric == "discrete" else StateMetric.manhattan(coords)
    return NSMDP(states, ActionSpace(ACTION_NAMES), p, rew, spec.gamma, spec.lp, 0.0, metric)


def generate_lc_nsmdp(
    n_states: int,
    n_actions: int,
    horizon: int,
    lp: float,
    lr: float,
    metric: Optional[StateMetric] = None,
    rng: Optional[np.random.Generator] = None,
    gamma: float = 0.9,
    lipschitz_rewards: bool = False,
    concentration: float = 1.0,
) -> NSMDP:
    """Random (lp, lr)-LC-NSMDP.

    Transitions drift as p_{t+1} = (1 - b) p_t + b q with b = lp / diameter,
    so W1(p_t, p_{t+1}) <= b * diameter <= lp by convexity.  Rewards drift by
    a per-(s, a) offset in [-lr, lr] and are clipped to [-1, 1]; with
    ``lipschitz_rewards`` every r_t(s, a, .) is also 1-Lipschitz in the
    arrival state (clipping and constant offsets preserve that).
    """
    if lp < 0 or lr < 0:
        raise ValueError("Lipschitz constants must be nonnegative")
    rng = np.random.default_rng() if rng is None else rng
    metric = StateMetric.discrete(n_states) if metric is None else metric
    s, a = n_states, n_actions
    beta = min(1.0, lp / metric.diameter)
    p = np.empty((horizon, s, a, s))
    p[0] = rng.dirichlet(np.full(s, concentration), size=(s, a))
    for t in range(1, horizon):
        target = rng.dirichlet(np.full(s, concentration), size=(s, a))
        mix = rng.uniform(0.0, beta, size=(s, a, 1))
        p[t] = (1.0 - mix) * p[t - 1] + mix * target

    r = np.empty((horizon, s, a, s))
    if lipschitz_rewards:
        # McShane extension of random anchor values: min_k (h_k + d(k, s'))
        anchors = rng.uniform(-1.0, 1.0, size=(s, a, s))
        r[0] = np.clip((anchors[:, :, :, None] + metric.values[None, None, :, :]).min(axis=2), -1.0, 1.0)
    else:
        r[0] = rng.uniform(-1.0, 1.0, size=(s, a, s))
    for t in range(1, horizon):
        if lipschitz_rewards:
            step = rng.uniform(-lr, lr, size=(s, a, 1))
        else:
            step = rng.uniform(-lr, lr, size=(s, a, s))
        r[t] = np.clip(r[t - 1] + step, -1.0, 1.0)
    return NSMDP(StateSpace.plain(s), ActionSpace.plain(a), p, r, gamma, lp, lr, metric)
