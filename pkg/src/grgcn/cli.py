"""Command-line entry point: ``grgcn <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import TrainConfig, load_config
from .dataset import load_dataset
from .evaluation import evaluate, flat_form, format_answers, predict
from .kb import load_triples
from .query_graph import GenLimits, generate_candidates, load_limits, to_logical_form


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grgcn", description="Query-graph ranking for KB question answering.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--kb", type=_existing, required=True)
    p.add_argument("--dataset", type=_existing, required=True)
    p.add_argument("--config", type=_existing, help="key=value config file (defaults if omitted)")
    p.add_argument("--out", required=True, help="checkpoint path; the loss log goes to <out>.loss.tsv")

    p = sub.add_parser("eval", help="macro precision/recall/F1 of a checkpoint")
    p.add_argument("--kb", type=_existing, required=True)
    p.add_argument("--dataset", type=_existing, required=True)
    p.add_argument("--checkpoint", type=_existing, required=True)
    p.add_argument("--report", help="per-question report path (default <checkpoint>.report.tsv)")

    p = sub.add_parser("predict", help="write chosen logical forms and answers")
    p.add_argument("--kb", type=_existing, required=True)
    p.add_argument("--dataset", type=_existing, required=True)
    p.add_argument("--checkpoint", type=_existing, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-graphs", help="print candidate logical forms, one per line")
    p.add_argument("--kb", type=_existing, required=True)
    p.add_argument("--dataset", type=_existing, required=True)
    p.add_argument("--limits", type=_existing, help="key=value generation limits")

    p = sub.add_parser("grad-check", help="finite-difference check of the full scoring path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    return parser


def _load_checkpoint(path, kb):
    from .trainer import Checkpoint, limits_of

    ckpt = Checkpoint.load(path)
    return ckpt.build_model(kb), limits_of(ckpt.config), ckpt.triggers


def cmd_train(args) -> int:
    from .trainer import train

    cfg = load_config(args.config) if args.config else TrainConfig()
    kb = load_triples(args.kb)
    result = train(load_dataset(args.dataset), kb, cfg, checkpoint_path=args.out, log_path=f"{args.out}.loss.tsv")
    last = result.loss_log[-1] if result.loss_log else (0, 0.0, 0)
    print(f"epochs={last[0]} final_loss={last[1]:.6f} skipped={len(result.skipped)}")
    return 0


def cmd_eval(args) -> int:
    kb = load_triples(args.kb)
    model, limits, triggers = _load_checkpoint(args.checkpoint, kb)
    report = args.report or f"{args.checkpoint}.report.tsv"
    metrics = evaluate(load_dataset(args.dataset), kb, model, limits, triggers, report)
    print(metrics)
    return 0


def cmd_predict(args) -> int:
    kb = load_triples(args.kb)
    model, limits, triggers = _load_checkpoint(args.checkpoint, kb)
    lines = []
    for rec in load_dataset(args.dataset):
        pred = predict(rec, kb, model, limits, triggers)
        lines.append(f"{rec.id}\t{format_answers(pred.answers)}\t{flat_form(pred.chosen_form)}\n")
    Path(args.out).write_text("".join(lines), encoding="utf-8")
    return 0


def cmd_gen_graphs(args) -> int:
    kb = load_triples(args.kb)
    limits = load_limits(args.limits) if args.limits else GenLimits()
    for rec in load_dataset(args.dataset):
        for g in generate_candidates(rec, kb, limits):
            print(f"{rec.id}\t{flat_form(to_logical_form(g))}")
    return 0


def cmd_grad_check(args) -> int:
    from .gradcheck import run

    report = run(args.seed, args.tol)
    for name, err in report.per_param.items():
        print(f"{name}\t{err:.3e}")
    print(f"max_rel_error={report.max_rel_error:.3e} {'PASS' if report.passed else 'FAIL'} (tol {args.tol:g})")
    return 0 if report.passed else 1


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "gen-graphs": cmd_gen_graphs,
    "grad-check": cmd_grad_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"grgcn {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
