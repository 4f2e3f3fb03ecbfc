"""JSON domain documents (schema ``nsmdp-v1``)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from .nsmdp import NSMDP, ActionSpace, StateMetric, StateSpace

SCHEMA = "nsmdp-v1"


class ConfigError(ValueError):
    """Invalid configuration or domain document; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def dump_nsmdp(m: NSMDP) -> dict:
    doc = {
        "schema": SCHEMA,
        "states": list(m.states.names),
        "terminal": [bool(x) for x in m.states.terminal],
        "actions": list(m.actions.names),
        "gamma": m.gamma,
        "horizon": m.horizon,
        "lipschitz_p": m.lipschitz_p,
        "lipschitz_r": m.lipschitz_r,
        "transitions": m.transitions.tolist(),
        "rewards": m.rewards.tolist(),
    }
    if m.states.coordinates is not None:
        doc["coordinates"] = m.states.coordinates.tolist()
    if m.metric.kind == "discrete":
        doc["metric"] = "discrete"
    elif m.metric.kind == "manhattan-grid" and m.states.coordinates is not None:
        doc["metric"] = "manhattan"
    else:
        doc["metric"] = {"matrix": m.metric.values.tolist()}
    return doc


def _field(doc: dict, name: str, prefix: str = ""):
    if name not in doc:
        raise ConfigError(prefix + name, "missing field")
    return doc[name]


def load_nsmdp(doc: Union[dict, str, Path], **builtin_overrides) -> NSMDP:
    """Build an NSMDP from a document, a path to one, or a builtin reference."""
    if isinstance(doc, (str, Path)):
        try:
            doc = json.loads(Path(doc).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("domain", f"cannot read domain file: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("domain", "domain document must be an object")
    schema = doc.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ConfigError("schema", f"expected {SCHEMA!r}, got {schema!r}")
    if "builtin" in doc:
        return _load_builtin(doc, builtin_overrides)
    try:
        states = _field(doc, "states")
        coords = doc.get("coordinates")
        space = StateSpace(states, _field(doc, "terminal"), None if coords is None else np.asarray(coords))
        actions = ActionSpace(_field(doc, "actions"))
        metric_doc = doc.get("metric", "discrete")
        if metric_doc == "discrete":
            metric = StateMetric.discrete(len(space))
        elif metric_doc == "manhattan":
            if coords is None:
                raise ConfigError("metric", "manhattan metric needs coordinates")
            metric = StateMetric.manhattan(coords)
        elif isinstance(metric_doc, dict) and "matrix" in metric_doc:
            metric = StateMetric.explicit(np.asarray(metric_doc["matrix"], dtype=float))
        else:
            raise ConfigError("metric", f"unsupported metric {metric_doc!r}")
        p = np.asarray(_field(doc, "transitions"), dtype=float)
        r = np.asarray(_field(doc, "rewards"), dtype=float)
        horizon = doc.get("horizon", p.shape[0])
        if p.shape[0] != horizon:
            raise ConfigError("transitions", f"{p.shape[0]} epochs, horizon says {horizon}")
        return NSMDP(
            space,
            actions,
            p,
            r,
            float(_field(doc, "gamma")),
            float(_field(doc, "lipschitz_p")),
            float(_field(doc, "lipschitz_r")),
            metric,
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError("domain", str(exc)) from None


def _load_builtin(doc: dict, overrides: dict) -> NSMDP:
    from .domains import BridgeSpec, build_bridge

    name = doc["builtin"]
    if name != "bridge":
        raise ConfigError("builtin", f"unknown builtin domain {name!r}")
    params = {
        "epsilon": doc.get("epsilon", 0.0),
        "lp": doc.get("lp", 1.0),
        "metric": doc.get("metric", "discrete"),
    }
    for key in ("gamma", "kappa", "horizon", "misstep_max"):
        if key in doc:
            params[key] = doc[key]
    params.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return build_bridge(BridgeSpec(**params))
    except (ValueError, TypeError) as exc:
        raise ConfigError("builtin", str(exc)) from None


def write_json(obj, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
