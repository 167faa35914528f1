"""Command-line entry point: ``qcoreset <subcommand> --config exp.json [--set k=v ...]``.

Exit codes: 0 success, 1 pipeline/runtime failure, 2 usage or config error.

Examples::

    qcoreset run --config configs/synthetic.json --output out/report.json
    qcoreset run --config configs/synthetic.json --set qubo.lambda=2.0 --output r.json
    qcoreset train-qsvm --config configs/synthetic.json --output out/qsvm.json
    qcoreset solve-qubo --input out/qsvm.qubo.json --output out/solution.json
    qcoreset evaluate --input out/qsvm.json --data out/qsvm.test.csv
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ._io import dumps, read_json, write_json_atomic, write_text_atomic
from .config import ConfigError, ExperimentConfig, load_config
from .dataset import BinaryDataset, load_csv, write_csv
from .evalrep import (
    accuracy,
    load_dataset,
    prepare_pair,
    report_csv,
    report_json,
    report_table,
    run_experiment,
    train_classical,
    train_quantum,
)
from .exceptions import QcoresetError
from .qubo import AnnealSchedule, QuboProblem, solve_anneal, solve_exhaustive
from .svm import SvmModel

log = logging.getLogger("qcoreset")

SUBCOMMANDS = ("coreset", "train-csvm", "train-qsvm", "solve-qubo", "evaluate", "run")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _default_threads():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def build_parser():
    parser = _Parser(
        prog="qcoreset",
        description="Coreset-reduced weighted SVMs trained classically and through a QUBO.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("Examples::", 1)[1],
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug-level logging")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", required=True,
                                parser_class=_Parser)

    def common(p, needs_config=True, output_required=True):
        if needs_config:
            p.add_argument("--config", type=Path, help="experiment config (JSON)")
            p.add_argument("--set", dest="overrides", action="append", default=[],
                           metavar="SECTION.KEY=VALUE",
                           help="override a config entry after loading; repeatable")
        p.add_argument("--output", "-o", type=Path, required=output_required,
                       help="output file (written atomically)")
        p.add_argument("--threads", type=int, default=_default_threads(),
                       help="worker cap (default: available cores)")
        return p

    common(sub.add_parser("coreset", help="build a coreset for the first configured pair"))
    common(sub.add_parser("train-csvm", help="train the classical weighted SVM on the coreset"))
    common(sub.add_parser("train-qsvm", help="train the weighted SVM through its QUBO"))
    p = common(sub.add_parser("solve-qubo", help="solve an exported QUBO problem"))
    p.add_argument("--input", type=Path, required=True, help="QUBO problem JSON")
    p = common(sub.add_parser("evaluate", help="score a model JSON against a CSV"),
               needs_config=False, output_required=False)
    p.add_argument("--input", type=Path, required=True, help="SvmModel JSON")
    p.add_argument("--data", type=Path, required=True, help="CSV with labels in {-1, +1}")
    common(sub.add_parser("run", help="run every pair and write the report"))
    return parser


def parse_args(argv=None):
    """Parse ``argv``; usage errors exit with code 2."""
    return build_parser().parse_args(argv)


def _experiment(args):
    return ExperimentConfig.from_dict(load_config(args.config, args.overrides))


def _first_pair(cfg):
    raw = load_dataset(cfg)
    return prepare_pair(raw, cfg.pairs[0], cfg)


def _sibling(path, suffix):
    return path.with_name(path.stem + suffix)


def cmd_coreset(args):
    cfg = _experiment(args)
    prep = _first_pair(cfg)
    write_json_atomic(args.output, prep.selection.to_json())
    log.info("wrote coreset (M=%d, kl=%.6g) to %s", prep.selection.size,
             prep.selection.achieved_kl, args.output)


def _write_test_split(path, prep):
    write_csv(path, prep.test.features, prep.test.labels.astype(int))
    log.info("wrote held-out split to %s", path)


def cmd_train_csvm(args):
    cfg = _experiment(args)
    prep = _first_pair(cfg)
    model = train_classical(prep, cfg)
    write_json_atomic(args.output, model.to_json())
    log.info("wrote classical model to %s", args.output)
    _write_test_split(_sibling(args.output, ".test.csv"), prep)


def cmd_train_qsvm(args):
    cfg = _experiment(args)
    prep = _first_pair(cfg)
    q, sol, model = train_quantum(prep, cfg, args.threads)
    write_json_atomic(args.output, model.to_json())
    log.info("wrote QUBO-trained model to %s (energy %.6g, residual %.3g)", args.output,
             sol.energy, model.equality_residual)
    write_json_atomic(_sibling(args.output, ".qubo.json"), q.to_json())
    _write_test_split(_sibling(args.output, ".test.csv"), prep)


def cmd_solve_qubo(args):
    doc = load_config(args.config, args.overrides)
    cfg_solver = doc["qubo"]["solver"]
    an = doc["anneal"]
    q = QuboProblem.from_json(read_json(args.input))
    if cfg_solver == "exhaustive":
        sol = solve_exhaustive(q)
    elif cfg_solver == "anneal":
        sched = AnnealSchedule(an["sweeps"], an["restarts"], an["t_start"], an["t_end"],
                               doc["seed"])
        sol = solve_anneal(q, sched, args.threads)
    else:
        raise ConfigError(f"qubo.solver must be 'anneal' or 'exhaustive', got {cfg_solver!r}")
    write_json_atomic(args.output, sol.to_json())
    log.info("solved %d-bit problem with %s: energy %.12g", q.dim, cfg_solver, sol.energy)


def cmd_evaluate(args):
    model = SvmModel.from_json(read_json(args.input))
    raw = load_csv(args.data)
    if not np.all(np.isin(raw.labels, (-1, 1))):
        raise QcoresetError("evaluation labels must be -1 or +1")
    test = BinaryDataset(raw.features, raw.labels, (1, -1))
    acc = accuracy(model, test)
    text = dumps({"accuracy": acc, "n_samples": test.n_samples})
    if args.output:
        write_text_atomic(args.output, text)
    else:
        sys.stdout.write(text)
    log.info("accuracy %.4f on %d points", acc, test.n_samples)


def cmd_run(args):
    cfg = _experiment(args)
    results = run_experiment(cfg, threads=args.threads)
    write_text_atomic(args.output, report_json(results))
    write_text_atomic(_sibling(args.output, ".txt"), report_table(results))
    write_text_atomic(_sibling(args.output, ".csv"), report_csv(results))
    log.info("wrote report for %d pairs to %s", len(results), args.output)
    sys.stderr.write(report_table(results))


DISPATCH = {
    "coreset": cmd_coreset,
    "train-csvm": cmd_train_csvm,
    "train-qsvm": cmd_train_qsvm,
    "solve-qubo": cmd_solve_qubo,
    "evaluate": cmd_evaluate,
    "run": cmd_run,
}


def dispatch(args):
    """Run a parsed invocation and map failures onto exit codes."""
    try:
        if getattr(args, "threads", 1) is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        DISPATCH[args.command](args)
    except ConfigError as exc:
        print(f"qcoreset {args.command}: config error: {exc}", file=sys.stderr)
        return 2
    except (QcoresetError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"qcoreset {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
