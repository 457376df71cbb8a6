"""Command-line interface.

Subcommands:

* ``rollout``: evaluate a scripted agent over seeded episodes, print stats.
* ``gen``: write replayable episode logs as JSON lines.
* ``stats``: environment-level numbers for a preset (splits, spaces, vocab).
* ``count``: closed-form size of the rule-set and document spaces.
* ``gradcheck``: run the model-core finite-difference suite.
* ``serve``: run the play service (line-delimited JSON, WebSocket, static).

All output is JSON on standard output, keys sorted, so identical invocations
are byte-identical.  Usage errors exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import sys

from .agents import BASELINES, baseline_policy, evaluate_agent, run_episode
from .logs import encode_log
from .rps import make_rps_splits, redundancy_percent, redundancy_probability
from .templates import load_template_pack
from .worldgen import PRESETS, count_space, preset, split_assignments

_FLAGS = ("dyna", "group", "nl")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), default="base6")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", choices=("train", "eval"), default=None)
    for flag in _FLAGS:
        p.add_argument(f"--{flag}", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--max-frames", type=int, default=None)


def _config_from(args: argparse.Namespace):
    overrides = {}
    for flag in _FLAGS:
        value = getattr(args, flag)
        if value is not None:
            overrides[flag] = value
    if args.split is not None:
        overrides["split"] = args.split
    if args.max_frames is not None:
        overrides["max_frames"] = args.max_frames
    return preset(args.preset, **overrides)


def _emit(doc: dict) -> None:
    json.dump(doc, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")


def _cmd_rollout(args: argparse.Namespace) -> int:
    config = _config_from(args)
    agent = baseline_policy(args.agent)
    stats = evaluate_agent(agent, config, args.episodes, seed=args.seed)
    _emit(
        {
            "agent": agent.tag,
            "config": config.to_dict(),
            "episodes": args.episodes,
            "first_seed": args.seed,
            **stats.to_dict(),
        }
    )
    return 0


def _cmd_gen(args: argparse.Namespace) -> int:
    config = _config_from(args)
    agent = baseline_policy(args.agent)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for i in range(args.episodes):
            log = run_episode(agent, config, args.seed + i)
            out.write(encode_log(log) + "\n")
    finally:
        if args.out:
            out.close()
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    config = _config_from(args)
    doc: dict = {"config": config.to_dict()}
    if config.task == "rps":
        split = make_rps_splits(config.rps_kind, config.split_seed)
        doc["graphs"] = {
            "kind": split.kind,
            "train": len(split.train_graphs),
            "eval": len(split.dev_graphs),
            "train_alphabet": "".join(split.train_alphabet),
            "eval_alphabet": "".join(split.dev_alphabet),
        }
    else:
        train, ev = split_assignments(
            eval_fraction=config.eval_fraction, seed=config.split_seed
        )
        rule_sets, documents = count_space(config)
        pack = load_template_pack()
        doc["splits"] = {"train_tuples": len(set(train.tuples())), "eval_tuples": len(set(ev.tuples()))}
        doc["spaces"] = {"rule_sets": rule_sets, "documents": documents}
        doc["templates"] = {
            "goal": len(pack.goal),
            "team": len(pack.team),
            "modifier": len(pack.modifier),
        }
    _emit(doc)
    return 0


def _cmd_count(args: argparse.Namespace) -> int:
    config = _config_from(args)
    if config.task == "rps":
        split = make_rps_splits(config.rps_kind, config.split_seed)
        p = redundancy_probability(5e7, 10, 24360, len(split.train_graphs))
        _emit(
            {
                "task": "rps",
                "kind": split.kind,
                "train_graphs": len(split.train_graphs),
                "eval_graphs": len(split.dev_graphs),
                "reference_redundancy": p,
                "reference_redundancy_percent": redundancy_percent(p),
            }
        )
        return 0
    rule_sets, documents = count_space(config)
    _emit({"task": "quest", "rule_sets": rule_sets, "documents": documents})
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    from .network import standard_grad_checks

    results = standard_grad_checks(eps=args.eps)
    worst = max(results.values())
    _emit(
        {
            "checks": {k: v for k, v in sorted(results.items())},
            "max_relative_error": worst,
            "tolerance": args.tolerance,
            "passed": worst < args.tolerance,
        }
    )
    return 0 if worst < args.tolerance else 1


def _cmd_serve(args: argparse.Namespace) -> int:
    from .server import serve_play

    serve_play(host=args.host, port=args.port, log_path=args.log, static_dir=args.static)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridlore",
        description="Grounded-policy grid games: generate, play, evaluate, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rollout", help="evaluate a scripted agent")
    _add_config_args(p)
    p.add_argument("--agent", choices=sorted(BASELINES), default="oracle")
    p.add_argument("--episodes", type=int, default=100)
    p.set_defaults(fn=_cmd_rollout)

    p = sub.add_parser("gen", help="write episode logs as JSON lines")
    _add_config_args(p)
    p.add_argument("--agent", choices=sorted(BASELINES), default="oracle")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("stats", help="environment statistics for a preset")
    _add_config_args(p)
    p.set_defaults(fn=_cmd_stats)

    p = sub.add_parser("count", help="closed-form space sizes")
    _add_config_args(p)
    p.set_defaults(fn=_cmd_count)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(fn=_cmd_gradcheck)

    p = sub.add_parser("serve", help="run the play service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--log", default=None, help="human-baseline episode log path")
    p.add_argument("--static", default=None, help="directory of browser client files")
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
