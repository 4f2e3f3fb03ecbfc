"""Episode runner, CVaR and evaluation sweeps over the true NSMDP.

Snapshot-based agents only ever receive ``snapshot(nsmdp, t)``; the
omniscient DP-NSMDP agent is built from the full model.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baselines import dp_nsmdp_policy, dp_snapshot_policy
from .domains import START
from .io import ConfigError, load_nsmdp
from .nsmdp import NSMDP, MisuseError, Snapshot, sample_transition, snapshot
from .planner import INNER_SOLVERS, SUPPORTS, Heuristic, rats_plan

ALGORITHMS = ("rats", "dp-snapshot", "dp-nsmdp")
HEURISTICS = ("zero", "mc")
METRICS = ("discrete", "manhattan")


@dataclass(frozen=True)
class EpisodeRecord:
    seed: int
    episode: int
    epsilon: Optional[float]
    algo: str
    steps: tuple  # (t, s, a, r, s')
    discounted_return: float

    @staticmethod
    def discounted(steps, gamma: float) -> float:
        total, disc = 0.0, 1.0
        for _, _, _, r, _ in steps:
            total += disc * r
            disc *= gamma
        return total


def cvar(returns: Sequence[float], q: float) -> float:
    """Mean of the ceil(q n) smallest returns."""
    if len(returns) == 0:
        raise ValueError("cvar needs at least one return")
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    x = np.sort(np.asarray(returns, dtype=float))
    # guard against q * n landing a hair above an integer
    k = max(1, math.ceil(q * len(x) - 1e-9))
    return float(x[:k].mean())


class SnapshotAgent:
    """Base for agents that plan on the snapshot of the current epoch only."""

    def act(self, snap: Snapshot, s: int, t: int) -> int:
        raise NotImplementedError


class RatsAgent(SnapshotAgent):
    def __init__(self, dmax=6, heuristic=None, lp=0.0, lr=0.0, memoize=True, support="snapshot", inner="closed-form"):
        self.kwargs = dict(dmax=dmax, heuristic=heuristic, lp=lp, lr=lr, memoize=memoize, support=support, inner=inner)
        # a plan depends only on (s, t) for a fixed model, so repeated visits reuse it
        self._cache = {}

    def act(self, snap, s, t):
        key = (s, t)
        if key not in self._cache:
            self._cache[key] = rats_plan(snap, s, t, **self.kwargs).action
        return self._cache[key]


class DPSnapshotAgent(SnapshotAgent):
    def __init__(self, tol=1e-6):
        self.tol = tol
        self._policies = {}

    def act(self, snap, s, t):
        if t not in self._policies:
            self._policies[t] = dp_snapshot_policy(snap, self.tol)
        return int(self._policies[t][s])


class DPNSMDPAgent:
    """Omniscient baseline: backward induction on the true model over the episode horizon."""

    def __init__(self, nsmdp: NSMDP, horizon: int, tol=1e-6):
        self.policy = dp_nsmdp_policy(nsmdp, horizon, tol)

    def act(self, s, t):
        return self.policy.act(s, t)


def make_agent(algo: str, nsmdp: NSMDP, horizon: int, dmax=6, heuristic=None, memoize=True, support="snapshot", inner="closed-form"):
    if algo == "rats":
        return RatsAgent(dmax, heuristic, nsmdp.lipschitz_p, nsmdp.lipschitz_r, memoize, support, inner)
    if algo == "dp-snapshot":
        return DPSnapshotAgent()
    if algo == "dp-nsmdp":
        return DPNSMDPAgent(nsmdp, horizon)
    raise ValueError(f"unknown algorithm {algo!r}")


def run_episode(
    nsmdp: NSMDP,
    algo: str,
    s0: int,
    horizon: int,
    rng: np.random.Generator,
    agent=None,
    seed: int = 0,
    episode: int = 0,
    epsilon: Optional[float] = None,
    **agent_options,
) -> EpisodeRecord:
    """Roll out one episode on the true model, stopping at a terminal state or after ``horizon`` steps."""
    if horizon > nsmdp.horizon:
        raise ValueError(f"episode horizon {horizon} exceeds the model's {nsmdp.horizon} epochs")
    if nsmdp.states.terminal[s0]:
        raise MisuseError("episode cannot start in a terminal state")
    if agent is None:
        agent = make_agent(algo, nsmdp, horizon, **agent_options)
    steps = []
    s = s0
    for t in range(horizon):
        if nsmdp.states.terminal[s]:
            break
        if isinstance(agent, SnapshotAgent):
            a = agent.act(snapshot(nsmdp, t), s, t)
        else:
            a = agent.act(s, t)
        s2, r = sample_transition(nsmdp, t, s, a, rng)
        steps.append((t, s, a, float(r), int(s2)))
        s = s2
    steps = tuple(steps)
    return EpisodeRecord(seed, episode, epsilon, algo, steps, EpisodeRecord.discounted(steps, nsmdp.gamma))


def episode_rng(seed: int, episode: int) -> np.random.Generator:
    """Independent stream per episode, derived from the master seed by counter."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(episode,)))


@dataclass(frozen=True)
class EvalConfig:
    domain: object = "bridge"
    epsilon: float = 0.0
    algo: str = "rats"
    episodes: int = 1000
    seed: int = 0
    dmax: int = 6
    heuristic: str = "zero"
    horizon: int = 20
    memoize: bool = True
    metric: str = "discrete"
    support: str = "snapshot"
    inner: str = "closed-form"
    n_rollouts: int = 20
    start: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        checks = [
            ("algo", self.algo in ALGORITHMS, f"must be one of {ALGORITHMS}"),
            ("heuristic", self.heuristic in HEURISTICS, f"must be one of {HEURISTICS}"),
            ("metric", self.metric in METRICS, f"must be one of {METRICS}"),
            ("support", self.support in SUPPORTS, f"must be one of {SUPPORTS}"),
            ("inner", self.inner in INNER_SOLVERS, f"must be one of {INNER_SOLVERS}"),
            ("episodes", _is_int(self.episodes) and self.episodes >= 1, "must be a positive integer"),
            ("seed", _is_int(self.seed) and self.seed >= 0, "must be a nonnegative integer"),
            ("dmax", _is_int(self.dmax) and self.dmax >= 1, "must be a positive integer"),
            ("horizon", _is_int(self.horizon) and self.horizon >= 1, "must be a positive integer"),
            ("n_rollouts", _is_int(self.n_rollouts) and self.n_rollouts >= 1, "must be a positive integer"),
            ("workers", _is_int(self.workers) and self.workers >= 1, "must be a positive integer"),
            ("memoize", isinstance(self.memoize, bool), "must be a boolean"),
            ("epsilon", _is_real(self.epsilon) and 0.0 <= self.epsilon <= 1.0, "must lie in [0, 1]"),
            ("start", self.start is None or (_is_int(self.start) and self.start >= 0), "must be a state index"),
        ]
        for name, ok, message in checks:
            if not ok:
                raise ConfigError(f"config.{name}", f"{message}, got {getattr(self, name)!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config", "must be an object")
        known = {f.name for f in fields(cls)}
        for key in doc:
            if key not in known:
                raise ConfigError(f"config.{key}", "unknown field")
        return cls(**doc)

    def echo(self) -> dict:
        out = asdict(self)
        if isinstance(out["domain"], Path):
            out["domain"] = str(out["domain"])
        return out


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return isinstance(x, (int, float, np.floating)) and not isinstance(x, bool)


def resolve_domain(config: EvalConfig) -> NSMDP:
    try:
        return _resolve_domain(config)
    except ConfigError as exc:
        raise ConfigError(f"config.domain.{exc.path}", str(exc).split(": ", 1)[1]) from None


def _resolve_domain(config: EvalConfig) -> NSMDP:
    domain = config.domain
    if domain == "bridge":
        domain = {"builtin": "bridge"}
    if isinstance(domain, dict) and "builtin" in domain:
        # the bridge must outlive the episode horizon
        return load_nsmdp(
            domain,
            epsilon=domain.get("epsilon", config.epsilon),
            metric=domain.get("metric", config.metric),
            horizon=max(domain.get("horizon", 30), config.horizon),
        )
    return load_nsmdp(domain)


def _start_state(config: EvalConfig, nsmdp: NSMDP) -> int:
    if config.start is not None:
        s0 = config.start
    elif config.domain == "bridge" or (isinstance(config.domain, dict) and "builtin" in config.domain):
        s0 = START
    else:
        s0 = 0
    if s0 >= nsmdp.n_states:
        raise ConfigError("config.start", f"state {s0} out of range")
    if nsmdp.states.terminal[s0]:
        raise ConfigError("config.start", f"state {s0} is terminal")
    return s0


@dataclass
class EvaluationReport:
    config: dict
    returns: list
    mean: float
    std: float
    cvar05: float
    episodes: int
    records: list = field(default_factory=list, repr=False)

    @classmethod
    def from_returns(cls, config: dict, returns: Sequence[float], records=()) -> "EvaluationReport":
        ordered = np.sort(np.asarray(returns, dtype=float))  # order-independent aggregation
        return cls(
            config,
            [float(x) for x in returns],
            float(ordered.mean()),
            float(ordered.std()),
            cvar(ordered, 0.05),
            len(ordered),
            list(records),
        )

    def to_json(self) -> str:
        doc = {
            "config": self.config,
            "episodes": self.episodes,
            "mean": self.mean,
            "std": self.std,
            "cvar05": self.cvar05,
            "returns": self.returns,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["episode", "steps", "return"])
        for i, ret in enumerate(self.returns):
            n_steps = len(self.records[i].steps) if self.records else ""
            w.writerow([i, n_steps, repr(ret)])
        return buf.getvalue()

    def write(self, path, fmt: str = "json") -> None:
        text = self.to_json() if fmt == "json" else self.to_csv()
        Path(path).write_text(text)


def _episode_chunk(args):
    config, indices = args
    nsmdp = resolve_domain(config)
    s0 = _start_state(config, nsmdp)
    agent = _agent_for(config, nsmdp)
    return [
        run_episode(nsmdp, config.algo, s0, config.horizon, episode_rng(config.seed, i), agent=agent,
                    seed=config.seed, episode=i, epsilon=config.epsilon)
        for i in indices
    ]


def _agent_for(config: EvalConfig, nsmdp: NSMDP):
    heuristic = None
    if config.heuristic == "mc":
        heuristic = Heuristic("mc-lower-bound", n_rollouts=config.n_rollouts, seed=config.seed)
    return make_agent(
        config.algo, nsmdp, config.horizon, config.dmax, heuristic, config.memoize, config.support, config.inner
    )


def evaluate(config) -> EvaluationReport:
    """Run ``config.episodes`` independent episodes and aggregate their returns."""
    if isinstance(config, dict):
        config = EvalConfig.from_dict(config)
    nsmdp = resolve_domain(config)
    if config.horizon > nsmdp.horizon:
        raise ConfigError("config.horizon", f"exceeds the domain's {nsmdp.horizon} epochs")
    _start_state(config, nsmdp)
    indices = list(range(config.episodes))
    if config.workers == 1:
        records = _episode_chunk((config, indices))
    else:
        chunks = [indices[w::config.workers] for w in range(config.workers)]
        with ProcessPoolExecutor(config.workers) as pool:
            records = [r for part in pool.map(_episode_chunk, [(config, c) for c in chunks]) for r in part]
        records.sort(key=lambda r: r.episode)
    return EvaluationReport.from_returns(config.echo(), [r.discounted_return for r in records], records)


@dataclass
class SweepResult:
    reports: dict  # (epsilon, algo) -> EvaluationReport

    def long_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epsilon", "algo", "episode", "return"])
        for (eps, algo), rep in self.reports.items():
            for i, ret in enumerate(rep.returns):
                w.writerow([repr(eps), algo, i, repr(ret)])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epsilon", "algo", "mean", "std", "cvar05"])
        for (eps, algo), rep in self.reports.items():
            w.writerow([repr(eps), algo, repr(rep.mean), repr(rep.std), repr(rep.cvar05)])
        return buf.getvalue()

    def matrix(self, stat: str = "mean"):
        """Rows are algorithms, columns are epsilon values."""
        eps = sorted({e for e, _ in self.reports})
        algos = list(dict.fromkeys(a for _, a in self.reports))
        table = np.array([[getattr(self.reports[e, a], stat) for e in eps] for a in algos])
        return eps, algos, table

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "returns.csv").write_text(self.long_csv())
        (out / "summary.csv").write_text(self.summary_csv())


def sweep(config, eps_values: Sequence[float], algos: Sequence[str] = ALGORITHMS) -> SweepResult:
    if len(eps_values) == 0:
        raise ConfigError("epsilon", "at least one value is required")
    base = EvalConfig.from_dict(config) if isinstance(config, dict) else config
    reports = {}
    for eps in eps_values:
        for algo in algos:
            cfg = EvalConfig(**{**asdict(base), "epsilon": float(eps), "algo": algo})
            reports[float(eps), algo] = evaluate(cfg)
    return SweepResult(reports)
