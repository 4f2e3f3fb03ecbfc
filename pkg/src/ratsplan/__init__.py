"""Risk-averse tree search for Lipschitz-continuous non-stationary MDPs."""

from .baselines import dp_nsmdp_policy, dp_snapshot_action, dp_snapshot_policy, finite_horizon_values, value_iteration
from .domains import BridgeSpec, build_bridge, generate_lc_nsmdp, misstep
from .harness import EvalConfig, EpisodeRecord, EvaluationReport, cvar, evaluate, run_episode, sweep
from .io import ConfigError, dump_nsmdp, load_nsmdp
from .nsmdp import (
    NSMDP,
    ActionSpace,
    HorizonError,
    LipschitzReport,
    MisuseError,
    Policy,
    Snapshot,
    StateMetric,
    StateSpace,
    categorical,
    expected_reward,
    finite_horizon_policy_value,
    policy_value_snapshot,
    sample_transition,
    snapshot,
    verify_lipschitz,
)
from .planner import ChanceNode, DecisionNode, Heuristic, PlanResult, heuristic_mc, minimax, rats_plan, tree_statistics
from .wasserstein import DimensionError, TransportPlan, tv_distance, w1, w1_distance, w1_to_dirac
from .worstcase import (
    AdmissibleSet,
    RelaxationGap,
    ScaleError,
    WorstCaseSolution,
    brute_force_worst_nsmdp,
    chance_node_value,
    lp_oracle_worst_transition,
    worst_case_reward,
    worst_case_transition,
)

__all__ = [
    "NSMDP",
    "ActionSpace",
    "AdmissibleSet",
    "BridgeSpec",
    "ChanceNode",
    "ConfigError",
    "DecisionNode",
    "DimensionError",
    "EpisodeRecord",
    "EvalConfig",
    "EvaluationReport",
    "Heuristic",
    "HorizonError",
    "LipschitzReport",
    "MisuseError",
    "PlanResult",
    "Policy",
    "RelaxationGap",
    "ScaleError",
    "Snapshot",
    "StateMetric",
    "StateSpace",
    "TransportPlan",
    "WorstCaseSolution",
    "brute_force_worst_nsmdp",
    "build_bridge",
    "categorical",
    "chance_node_value",
    "cvar",
    "dp_nsmdp_policy",
    "dp_snapshot_action",
    "dp_snapshot_policy",
    "dump_nsmdp",
    "evaluate",
    "expected_reward",
    "finite_horizon_policy_value",
    "finite_horizon_values",
    "generate_lc_nsmdp",
    "heuristic_mc",
    "load_nsmdp",
    "lp_oracle_worst_transition",
    "minimax",
    "misstep",
    "policy_value_snapshot",
    "rats_plan",
    "run_episode",
    "sample_transition",
    "snapshot",
    "sweep",
    "tree_statistics",
    "tv_distance",
    "value_iteration",
    "verify_lipschitz",
    "w1",
    "w1_distance",
    "w1_to_dirac",
    "worst_case_reward",
    "worst_case_transition",
]
