"""Command-line entry point: run, sweep, validate, export-domain."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import ALGORITHMS, EvalConfig, evaluate, sweep
from .io import ConfigError, dump_nsmdp, load_nsmdp

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION = 0, 2, 3


def _domain(value: str):
    return "bridge" if value == "bridge" else Path(value)


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--domain", default="bridge", help="'bridge' or a path to an nsmdp-v1 JSON file")
    p.add_argument("--dmax", type=int, default=6)
    p.add_argument("--heuristic", choices=("zero", "mc"), default="zero")
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=20, help="episode length B")
    p.add_argument("--memoize", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--metric", choices=("discrete", "manhattan"), default="discrete")
    p.add_argument("--support", choices=("snapshot", "all"), default="snapshot")
    p.add_argument("--inner", choices=("closed-form", "exact"), default="closed-form")
    p.add_argument("--start", type=int, default=None, help="start state (bridge default: middle of the bridge)")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ratsplan", description="Risk-averse tree search on non-stationary MDPs.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate one algorithm on one domain")
    _add_eval_flags(run)
    run.add_argument("--epsilon", type=float, default=0.0)
    run.add_argument("--algo", choices=ALGORITHMS, default="rats")
    run.add_argument("--out", type=Path, default=None, help="output file (stdout if omitted)")
    run.add_argument("--format", choices=("json", "csv"), default="json")

    sw = sub.add_parser("sweep", help="evaluate several algorithms over a grid of epsilon values")
    _add_eval_flags(sw)
    sw.add_argument("--epsilon", type=float, nargs="+", default=[0.0, 0.5, 1.0])
    sw.add_argument("--algo", choices=ALGORITHMS, nargs="+", default=list(ALGORITHMS))
    sw.add_argument("--out", type=Path, required=True, help="directory for returns.csv and summary.csv")

    val = sub.add_parser("validate", help="run the quick property and oracle checks")
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--full", action="store_true", help="ten times more random instances")
    val.add_argument("--out", type=Path, default=None)

    exp = sub.add_parser("export-domain", help="dump a domain as nsmdp-v1 JSON")
    exp.add_argument("--domain", default="bridge")
    exp.add_argument("--epsilon", type=float, default=0.0)
    exp.add_argument("--metric", choices=("discrete", "manhattan"), default="discrete")
    exp.add_argument("--horizon", type=int, default=None, help="number of epochs of the exported bridge")
    exp.add_argument("--out", type=Path, default=None)
    return parser


def _config(args, **overrides) -> EvalConfig:
    fields = dict(
        domain=_domain(args.domain),
        dmax=args.dmax,
        heuristic=args.heuristic,
        episodes=args.episodes,
        seed=args.seed,
        horizon=args.horizon,
        memoize=args.memoize,
        metric=args.metric,
        support=args.support,
        inner=args.inner,
        start=args.start,
        workers=args.workers,
    )
    fields.update(overrides)
    return EvalConfig(**fields)


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _run(args) -> int:
    report = evaluate(_config(args, epsilon=args.epsilon, algo=args.algo))
    _emit(report.to_json() if args.format == "json" else report.to_csv(), args.out)
    return EXIT_OK


def _sweep(args) -> int:
    result = sweep(_config(args), args.epsilon, args.algo)
    result.write(args.out)
    sys.stdout.write(result.summary_csv())
    return EXIT_OK


def _validate(args) -> int:
    from .validation import run_validation

    results = run_validation(args.seed, quick=not args.full)
    lines = [f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}\n" for r in results]
    _emit("".join(lines), args.out)
    if args.out is not None:
        sys.stdout.write("".join(lines))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def _export(args) -> int:
    if args.domain == "bridge":
        m = load_nsmdp({"builtin": "bridge"}, epsilon=args.epsilon, metric=args.metric, horizon=args.horizon)
    else:
        m = load_nsmdp(Path(args.domain))
    _emit(json.dumps(dump_nsmdp(m), sort_keys=True) + "\n", args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _run, "sweep": _sweep, "validate": _validate, "export-domain": _export}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
