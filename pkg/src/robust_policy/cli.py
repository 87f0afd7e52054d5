"""Command-line entry point: ``robust-policy <subcommand>``.

Subcommands
-----------
run              train and evaluate every (gamma, seed) cell of an experiment
reproduce-table  render a results table with a diff against reference values
eval-policy      evaluate a saved checkpoint on a potential-outcome CSV
gen-data         write a synthetic potential-outcome dataset as CSV

The output directory defaults to ``./results`` and can be overridden with
``--out`` or the ``ROBUST_POLICY_OUT`` environment variable (``--out`` wins).
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get("ROBUST_POLICY_OUT") or "results")


def _err(msg: str) -> None:
    print(f"robust-policy: {msg}", file=sys.stderr)


def _csv_floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _csv_ints(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _cmd_run(args) -> int:
    from .experiments import ConfigError, load_config, run_experiment

    try:
        cfg = load_config(
            args.config,
            experiment=args.experiment,
            objective=args.objective,
            baseline=args.baseline,
            gammas=args.gamma,
            seeds=args.seeds,
            data=args.data,
        )
    except ConfigError as exc:
        _err(f"invalid configuration: {exc}")
        return EXIT_CONFIG
    out = _out_dir(args)
    print(f"running {cfg.tag}: gammas={list(cfg.gammas)} seeds={list(cfg.seeds)} -> {out}")
    failures = run_experiment(cfg, out, jobs=args.jobs, log=_err)
    if failures:
        _err(f"{len(failures)} cell(s) failed; completed cells are kept under {out}")
        return EXIT_FAILED
    print((out / "tables" / f"{cfg.tag}.txt").read_text(), end="")
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    from .experiments import MissingRunsError, reproduce_table

    out = _out_dir(args)
    seeds = args.seeds or (0, 1, 2, 3, 4, 5)
    try:
        text, rows = reproduce_table(args.table, out, seeds)
    except MissingRunsError as exc:
        _err(str(exc))
        return EXIT_FAILED
    print(text, end="")
    dest = out / "tables" / f"reproduced-{args.table}.csv"
    dest.parent.mkdir(parents=True, exist_ok=True)
    fields = list(rows[0]) if rows else []
    with open(dest, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    (out / "tables" / f"reproduced-{args.table}.txt").write_text(text)
    return EXIT_OK


def _cmd_eval(args) -> int:
    from .evaluation import target_policy_value
    from .ru import load_checkpoint, policy_from_model
    from .synthetic import read_potential_outcomes

    if not args.data:
        _err("eval-policy needs --data with a potential-outcome CSV")
        return EXIT_CONFIG
    model = load_checkpoint(args.checkpoint)
    data = read_potential_outcomes(args.data)
    rep = target_policy_value(policy_from_model(model), data)
    print("policy,gamma,n,value,treated_fraction")
    print(f"{args.checkpoint},{model.meta.get('gamma', '')},{rep.n},{rep.value!r},{rep.treated_fraction!r}")
    return EXIT_OK


def _cmd_gen(args) -> int:
    from .synthetic import HighDimModel, ToyModel, write_potential_outcomes

    try:
        model = ToyModel(args.p) if args.experiment == "toy" else HighDimModel(args.p)
    except ValueError as exc:
        _err(f"invalid configuration: p: {exc}")
        return EXIT_CONFIG
    seed = args.seeds[0] if args.seeds else 0
    data = model.sample(args.n, seed, args.stream)
    dest = Path(args.data) if args.data else _out_dir(args) / "data" / f"{args.experiment}-p{args.p:g}-s{seed}.csv"
    dest.parent.mkdir(parents=True, exist_ok=True)
    write_potential_outcomes(dest, data)
    print(dest)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-policy",
                                     description="Γ-robust policy learning experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (default: $ROBUST_POLICY_OUT or ./results)")
        p.add_argument("--seeds", type=_csv_ints, help="comma-separated seeds, e.g. 0,1,2")

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("experiment", nargs="?", choices=("toy", "highdim", "voting"))
    run.add_argument("--config", help="INI experiment config")
    run.add_argument("--objective", choices=("maxmin", "gain"))
    run.add_argument("--baseline", choices=("always_control", "always_treat", "x1_rule"))
    run.add_argument("--gamma", type=_csv_floats, help="comma-separated gamma values")
    run.add_argument("--data", help="voting CSV path")
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    common(run)
    run.set_defaults(func=_cmd_run)

    rep = sub.add_parser("reproduce-table", help="render a results table")
    rep.add_argument("table", choices=("toy-maxmin", "toy-gain-control", "toy-gain-treat",
                                       "highdim-maxmin", "highdim-gain", "voting"))
    common(rep)
    rep.set_defaults(func=_cmd_reproduce)

    ev = sub.add_parser("eval-policy", help="evaluate a checkpoint on a dataset")
    ev.add_argument("checkpoint")
    ev.add_argument("--data", help="potential-outcome CSV (x_0.., y0, y1, u)")
    common(ev)
    ev.set_defaults(func=_cmd_eval)

    gen = sub.add_parser("gen-data", help="write a synthetic dataset")
    gen.add_argument("experiment", choices=("toy", "highdim"))
    gen.add_argument("--p", type=float, default=0.2, help="Bernoulli parameter of u")
    gen.add_argument("--n", type=int, default=10000)
    gen.add_argument("--stream", default="data", help="RNG stream name")
    gen.add_argument("--data", help="destination CSV (default under --out)")
    common(gen)
    gen.set_defaults(func=_cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        _err("invalid configuration: jobs: must be >= 1")
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
