"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import THREADS_ENV, RunConfig, load_config, resolve
from .errors import ConfigError, DataError, NumericalError
from .experiment import (RUN_LAYOUT, compare_dropout, diagnose_checkpoint, evaluate_checkpoint,
                         train_run, write_metrics)
from .ingest import (chronological_split, dataset_stats, k_core_filter, load_interactions,
                     read_splits, write_splits)
from .study import directional_study
from .synthetic import two_community_log

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

# flag -> config key
OVERRIDES = {
    "seed": "seed", "threads": "threads", "variant": "variant", "layers": "layers",
    "epsilon": "epsilon", "lambda_": "lambda", "dropout_ratio": "dropout_ratio",
    "dropout_strategy": "dropout_strategy", "lr": "lr", "batch_size": "batch_size",
    "embedding_dim": "embedding_dim", "max_epochs": "max_epochs", "patience": "patience",
    "topk": "topk", "data": "data",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _str_list(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _add_run_flags(p, with_out=True):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--data", help="directory written by `prepare`")
    if with_out:
        p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="evaluation workers (fallback: $LAYERGCN_THREADS)")
    p.add_argument("--variant", choices=("layergcn", "lightgcn", "bpr_mf"))
    p.add_argument("--layers", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--lambda", dest="lambda_", type=float, help="L2 coefficient")
    p.add_argument("--dropout-ratio", type=float)
    p.add_argument("--dropout-strategy", choices=("none", "degree", "uniform", "mixed"))
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--embedding-dim", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--topk", type=_int_list, help="comma-separated K values, e.g. 10,20,50")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="layergcn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="k-core filter and split a raw interaction log")
    p.add_argument("input", help="delimited file with user, item and timestamp columns")
    p.add_argument("--out", required=True)
    p.add_argument("--k-core", type=int, default=10, help="minimum interactions per user")
    p.add_argument("--k-item", type=int, help="minimum interactions per item (default: --k-core)")
    p.add_argument("--ratios", type=_float_list, default=(0.7, 0.1, 0.2))
    p.add_argument("--delimiter", default="\t")
    p.add_argument("--columns", type=_int_list, default=(0, 1, 2),
                   help="0-based user,item,timestamp column positions")

    p = sub.add_parser("synth", help="write a synthetic two-community dataset, already split")
    p.add_argument("--out", required=True)
    p.add_argument("--users", type=int, default=200)
    p.add_argument("--items", type=int, default=100)
    p.add_argument("--per-user", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a model; writes a run directory")
    _add_run_flags(p)
    p.add_argument("--diagnose", action="store_true",
                   help="also record per-epoch layer similarity and divergence")

    p = sub.add_parser("evaluate", help="all-ranking metrics for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="metrics CSV path")
    p.add_argument("--split", choices=("valid", "test"), default="test")
    p.add_argument("--topk", type=_int_list, default=(10, 20, 50))
    p.add_argument("--threads", type=int)
    p.add_argument("--embedding-dim", type=int, help="expected embedding size, checked if given")
    p.add_argument("--per-user", help="optional per-user metrics CSV path")

    p = sub.add_parser("diagnose", help="layer similarity and divergence of a LayerGCN checkpoint")
    p.add_argument("--checkpoint", required=True, help="checkpoint file or run directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare-dropout", help="DegreeDrop versus DropEdge convergence study")
    _add_run_flags(p)
    p.add_argument("--ratios", type=_float_list, default=(0.1, 0.3, 0.5, 0.7))
    p.add_argument("--strategies", type=_str_list, default=("degree", "uniform"))
    p.add_argument("--seeds", type=_int_list, help="defaults to the single --seed")

    p = sub.add_parser("study", help="multi-seed directional comparisons on a prepared dataset")
    _add_run_flags(p)
    p.add_argument("--seeds", type=_int_list, default=(0, 1, 2))
    return parser


def run_config(args) -> RunConfig:
    file_values = load_config(args.config) if getattr(args, "config", None) else {}
    overrides = {key: getattr(args, flag) for flag, key in OVERRIDES.items() if hasattr(args, flag)}
    cfg = resolve(file_values, overrides)
    if not cfg.data:
        raise ConfigError(["no dataset: pass --data or set `data` in the config"])
    return cfg


def cmd_prepare(args) -> int:
    log = load_interactions(args.input, delimiter=args.delimiter, columns=args.columns)
    raw = dataset_stats(log)
    core = k_core_filter(log, args.k_core, args.k_item)
    splits = chronological_split(core, tuple(args.ratios))
    write_splits(splits, args.out)
    write_stats(os.path.join(args.out, "stats.tsv"),
                [("raw", raw), (f"{args.k_core}-core", dataset_stats(core)),
                 ("train", dataset_stats(splits.train))])
    print(f"{len(splits.train)} train / {len(splits.valid)} valid / {len(splits.test)} test "
          f"interactions, {splits.n_dropped} cold-start dropped -> {args.out}")
    return EXIT_OK


def write_stats(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("stage\tn_users\tn_items\tn_interactions\tsparsity\n")
        for stage, s in rows:
            fh.write(f"{stage}\t{s['n_users']}\t{s['n_items']}\t{s['n_interactions']}\t"
                     f"{s['sparsity']:.2f}%\n")


def cmd_synth(args) -> int:
    log = two_community_log(args.users, args.items, args.per_user, args.noise, seed=args.seed)
    splits = chronological_split(log)
    write_splits(splits, args.out)
    write_stats(os.path.join(args.out, "stats.tsv"),
                [("raw", dataset_stats(log)), ("train", dataset_stats(splits.train))])
    print(f"synthetic dataset -> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = run_config(args)
    splits = read_splits(cfg.data)
    result = train_run(cfg, splits, args.out, diagnose=args.diagnose)
    print(f"best epoch {result.best_epoch} (valid recall@{cfg.train.valid_k} "
          f"{result.best_score:.4f}), stopped at {result.stopped_epoch} -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    threads = args.threads or int(os.environ.get(THREADS_ENV) or 1)
    if threads < 1:
        raise ConfigError([f"threads must be >= 1, got {threads}"])
    splits = read_splits(args.data)
    result = evaluate_checkpoint(args.checkpoint, splits, ks=args.topk, split=args.split,
                                 threads=threads, dim=args.embedding_dim)
    write_metrics(result, args.out, args.per_user)
    for k in sorted({int(n.split("@")[1]) for n in result.summary}):
        print(f"recall@{k} {result.summary[f'recall@{k}']:.4f}  ndcg@{k} {result.summary[f'ndcg@{k}']:.4f}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    ckpt = args.checkpoint
    if os.path.isdir(ckpt):
        ckpt = os.path.join(ckpt, RUN_LAYOUT["checkpoint"])
    sims, _ = diagnose_checkpoint(ckpt, read_splits(args.data), args.out)
    print(f"{len(sims)} layers diagnosed -> {args.out}")
    return EXIT_OK


def cmd_compare_dropout(args) -> int:
    cfg = run_config(args)
    seeds = args.seeds or (cfg.seed,)
    problems = [f"unknown strategy {s!r}" for s in args.strategies
                if s not in ("degree", "uniform", "mixed")]
    if not args.ratios or any(not 0 <= r < 1 for r in args.ratios):
        problems.append(f"ratios must lie in [0, 1), got {args.ratios}")
    if problems:
        raise ConfigError(problems)
    runs = compare_dropout(read_splits(cfg.data), cfg.train, args.ratios, args.strategies, seeds,
                           args.out, threads=cfg.threads)
    print(f"{len(runs)} runs -> {args.out}")
    return EXIT_OK


def cmd_study(args) -> int:
    cfg = run_config(args)
    report = directional_study(read_splits(cfg.data), seeds=args.seeds, base=cfg.train,
                               dropout_ratio=cfg.train.prune.ratio, out_dir=args.out)
    for c in report.claims:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.lhs:.4f} vs {c.rhs:.4f} ({c.detail})")
    return EXIT_OK


COMMANDS = {
    "prepare": cmd_prepare, "synth": cmd_synth, "train": cmd_train, "evaluate": cmd_evaluate,
    "diagnose": cmd_diagnose, "compare-dropout": cmd_compare_dropout, "study": cmd_study,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
