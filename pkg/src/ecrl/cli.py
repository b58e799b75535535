"""Command-line front end: compile task files, run training matrices, verify.

Exit codes: 0 on success, 1 on configuration problems, 2 when verification
finds a failing check.  Output lands under --out or $ECRL_OUTPUT_ROOT
(default ./runs).
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from ecrl.tasks import (build_dfa, build_rank_table, load_task,
                        run_alpha_sweep, run_matrix)
from ecrl.training import ConfigError

OUTPUT_ROOT_VAR = "ECRL_OUTPUT_ROOT"


def output_root(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUTPUT_ROOT_VAR, "runs"))


def cmd_compile(args) -> int:
    task = load_task(args.task_file)
    dfa = build_dfa(task)
    table = build_rank_table(task, dfa)
    out_dir = output_root(args) / task.name
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "automaton.json").write_text(dfa.to_json())
    (out_dir / "automaton.dot").write_text(dfa.export_dot())
    (out_dir / "automaton.rddl").write_text(dfa.export_rddl(task.reward))
    (out_dir / "ranks.json").write_text(table.to_json())
    print(f"task: {task.name}")
    print(f"states: {dfa.n_states}  accepting: {len(dfa.accepting)}"
          f"  error: {len(dfa.errors)}")
    ranks = " ".join(f"{q}:{table.rank[q]}" for q in sorted(table.rank))
    print(f"ranks: {ranks}")
    print(f"wrote 4 artifacts to {out_dir}")
    return 0


def cmd_train(args) -> int:
    task = load_task(args.task_file)
    total = args.total_steps
    if total is None and args.full_budget:
        if task.full_total_steps is None:
            raise ConfigError(f"{task.name} declares no fullTotalSteps")
        total = task.full_total_steps
    root = output_root(args)
    if args.alphas:
        rows = run_alpha_sweep(task, root, args.alphas, seeds=args.seeds,
                               jobs=args.jobs, delayed=args.delayed_automaton_step,
                               total_steps=total)
    else:
        rows = run_matrix(task, root, strategies=args.strategies,
                          seeds=args.seeds, jobs=args.jobs,
                          delayed=args.delayed_automaton_step,
                          total_steps=total)
    for row in rows:
        label = (f"alpha={row['alpha']} " if "alpha" in row else "")
        first = row["steps_to_first_success"]
        print(f"{label}{row['strategy']} seed {row['seed']}: "
              f"{row['episodes']} episodes, "
              f"first success at {first if first is not None else 'never'}, "
              f"{row['rewards_per_step']:.4f} reward/step")
    print(f"wrote {len(rows)} run CSVs and summaries under {root / task.name}")
    return 0


def cmd_verify(args) -> int:
    from ecrl.verification import run_checks
    results = run_checks(full=args.full)
    failed = 0
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{r.name}: {mark} ({r.detail})")
        failed += not r.passed
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 2 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecrl",
        description="Temporal-task RL: automaton compilation and training runs")
    parser.add_argument("--out", help=f"output root (default ${OUTPUT_ROOT_VAR} or ./runs)")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a task file to automaton artifacts")
    c.add_argument("task_file")
    c.set_defaults(func=cmd_compile)

    t = sub.add_parser("train", help="run the seeded strategy matrix of a task file")
    t.add_argument("task_file")
    t.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    t.add_argument("--strategies", nargs="+", help="subset of BASE RS PER EC")
    t.add_argument("--seeds", nargs="+", type=int)
    t.add_argument("--total-steps", type=int, help="override the task budget")
    t.add_argument("--full-budget", action="store_true",
                   help="use the task's fullTotalSteps budget")
    t.add_argument("--alphas", nargs="+", type=float,
                   help="run a classified-replay exponent sweep instead")
    t.add_argument("--delayed-automaton-step", action="store_true",
                   help="advance the automaton on the pre-step label")
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("verify", help="run the oracle checks behind the acceptance gate")
    v.add_argument("--full", action="store_true",
                   help="include the long training-benchmark checks")
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
