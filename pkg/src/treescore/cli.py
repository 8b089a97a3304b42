"""Command-line entry points.

Every data-producing subcommand takes --config (a declarative JSON file)
plus a few overrides; format-check works directly on a document.  Exit
code 0 means the run completed with no hard errors; per-sample soft
failures land in <out>/failures.jsonl without failing the run.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import load_config
from .errors import TreescoreError
from .format_rules import check_formatting, parse_headings


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to the run config JSON")
    parser.add_argument("--out", help="override the output directory")
    cache = parser.add_mutually_exclusive_group()
    cache.add_argument(
        "--replay", action="store_true", help="serve judge calls from the cache only"
    )
    cache.add_argument(
        "--record", action="store_true", help="run live and record the cache"
    )
    parser.add_argument("--seed", type=int, help="override the perturbation seed")
    parser.add_argument("--concurrency", type=int, help="worker pool size")
    parser.add_argument(
        "--force", action="store_true", help="re-score samples already present"
    )


def _config_from(args) -> "pipeline.RunConfig":
    cache_mode = "replay" if args.replay else ("record" if args.record else None)
    return load_config(
        args.config,
        out_dir=args.out,
        cache_mode=cache_mode,
        seed=args.seed,
        concurrency=args.concurrency,
        force=args.force,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treescore",
        description="Batch evaluation engine for long-form machine writing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("evaluate", "score every (task, system) sample and write scorecards"),
        ("meta-eval", "correlate scorecards with human ratings"),
        ("robustness", "perturb, re-score and report score deltas"),
        ("stats", "dataset statistics (and length correlations when available)"),
        ("weights", "per-genre weight distribution summaries"),
        ("baseline", "reference-overlap baseline metrics"),
        ("cost", "render the cost report of a previous run"),
    ):
        command = sub.add_parser(name, help=help_text)
        _add_common(command)

    perturb_cmd = sub.add_parser("perturb", help="write a perturbed generations file")
    _add_common(perturb_cmd)
    perturb_cmd.add_argument(
        "--kind", required=True, choices=["drop", "repeat", "transfer"]
    )
    perturb_cmd.add_argument("--target-genre", help="genre for transfer rewrites")

    check_cmd = sub.add_parser(
        "format-check", help="parse a document outline and score its formatting"
    )
    check_cmd.add_argument("path", help="document to check")

    return parser


def _cmd_format_check(args) -> int:
    text = Path(args.path).read_text(encoding="utf-8")
    record = {
        "path": str(args.path),
        "tree": parse_headings(text).to_dict(),
        "verdict": check_formatting(text).to_dict(),
    }
    print(json.dumps(record, ensure_ascii=False, sort_keys=True, indent=1))
    return 0


def _cmd_cost(args) -> int:
    config = _config_from(args)
    cost_path = Path(config.out_dir) / "cost.txt"
    if not cost_path.exists():
        raise TreescoreError(f"no cost report at {cost_path}; run evaluate first")
    print(cost_path.read_text(encoding="utf-8").rstrip("\n"))
    return 0


def _cmd_perturb(args) -> int:
    from .data import dump_jsonl, load_generations, load_tasks
    from .perturb import PerturbationKind

    config = _config_from(args)
    tasks = load_tasks(config.tasks)
    generations = load_generations(config.generations, {t.id for t in tasks})
    kind = PerturbationKind(args.kind)
    runtime = (
        pipeline.Runtime(config) if kind is PerturbationKind.TRANSFER else None
    )
    seed = config.seeds[0]
    perturbed = pipeline.perturb_generations(
        config, generations, kind, seed, args.target_genre, runtime
    )
    label = args.kind if not args.target_genre else f"{args.kind}_{args.target_genre}"
    out_path = Path(config.out_dir) / f"perturbed_{label}_seed{seed}.jsonl"
    dump_jsonl(perturbed, out_path)
    print(f"wrote {len(perturbed)} perturbed generations to {out_path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "format-check":
            return _cmd_format_check(args)
        if args.command == "cost":
            return _cmd_cost(args)
        if args.command == "perturb":
            return _cmd_perturb(args)

        config = _config_from(args)
        if args.command == "evaluate":
            outcome = pipeline.run_evaluate(config)
            print(
                f"scored {len(outcome.cards)} samples, "
                f"{len(outcome.failures)} soft failures -> {config.out_dir}"
            )
            if outcome.failures:
                print(
                    f"soft failures listed in {Path(config.out_dir) / 'failures.jsonl'}"
                )
        elif args.command == "meta-eval":
            pipeline.run_meta_eval(config)
            print(
                (Path(config.out_dir) / "correlations.txt").read_text(encoding="utf-8")
            )
        elif args.command == "robustness":
            pipeline.run_robustness(config)
            print(
                (Path(config.out_dir) / "robustness.txt").read_text(encoding="utf-8")
            )
        elif args.command == "stats":
            pipeline.run_stats(config)
            print((Path(config.out_dir) / "stats.txt").read_text(encoding="utf-8"))
        elif args.command == "weights":
            pipeline.run_weights(config)
            print((Path(config.out_dir) / "weights.txt").read_text(encoding="utf-8"))
        elif args.command == "baseline":
            rows = pipeline.run_baseline(config)
            print(f"scored {len(rows)} samples -> {config.out_dir}")
        return 0
    except TreescoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
