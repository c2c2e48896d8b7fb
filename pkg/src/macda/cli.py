"""Command-line entry point: ``macda run|eval|actions|oracle``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from macda.actions import DEFAULT_ADMISSIBLE, enumerate_drug_actions, enumerate_protein_actions
from macda.errors import ConfigError, MacdaError
from macda.fixtures import planted_fixture
from macda.harness import EXIT_CONFIG, EXIT_OK, RunConfig, exit_code, run
from macda.marl import read_records
from macda.metrics import GROUP_GLOBAL, GROUP_PAIR, evaluate, format_table, mutation_histogram
from macda.oracle import FORM_AND, FORM_OR, SurrogateSpec, load_oracle, serve
from macda.protein import ProteinSeq
from macda.smiles import parse_smiles

LOG_ENV = "MACDA_LOG_LEVEL"


def _cmd_run(args) -> int:
    config = RunConfig.load(args.config) if args.config else None
    if config is None:
        raise ConfigError("run needs --config")
    config = config.with_overrides(args.method, args.seed, args.episodes, args.top_k, args.out)
    return run(config)


def _cmd_eval(args) -> int:
    with open(args.records, encoding="utf-8") as fh:
        records = read_records(fh)
    oracle = load_oracle(args.oracle) if args.oracle else None
    report = evaluate(records, oracle, grouping=args.grouping)
    print(format_table([report]).rstrip("\n"))
    hist = mutation_histogram(records)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json() + "\n")
        (out / "mutations.csv").write_text(hist.to_csv())
    return EXIT_OK


def _cmd_actions(args) -> int:
    if args.protein:
        actions = enumerate_protein_actions(ProteinSeq(args.target))
    else:
        admissible = tuple(args.admissible.split(",")) if args.admissible else DEFAULT_ADMISSIBLE
        actions = enumerate_drug_actions(parse_smiles(args.target), admissible)
    print(json.dumps([act.to_dict() for act in actions], indent=2))
    return EXIT_OK


def _cmd_make_surrogate(args) -> int:
    if args.planted:
        kwargs = {}
        if args.drug:
            kwargs["drug"] = args.drug
        if args.sequence:
            kwargs["protein"] = args.sequence
        fx = planted_fixture(args.seed, width=args.width, strength=args.strength, form=args.form, **kwargs)
        spec = fx.spec
        logging.getLogger(__name__).info("planted bit %d on atom %d, window %d-%d",
                                         fx.bit, fx.atom, fx.start, fx.start + fx.width - 1)
    else:
        spec = SurrogateSpec(seed=args.seed)
    text = spec.to_json() + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_query(args) -> int:
    serve(load_oracle(args.oracle), sys.stdin, sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="macda", description="Joint drug/target counterfactual search.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="search counterfactuals for the configured pairs")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--method", choices=["macda", "mameg", "jointlist"])
    p.add_argument("--seed", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--top-k", type=int, dest="top_k")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="summarise a records.jsonl file")
    p.add_argument("records")
    p.add_argument("--oracle", help="re-check stored predictions against this oracle")
    p.add_argument("--grouping", choices=[GROUP_PAIR, GROUP_GLOBAL], default=GROUP_PAIR)
    p.add_argument("--out", help="directory for report.json and mutations.csv")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("actions", help="print the one-step edits of a drug or protein as JSON")
    p.add_argument("target", help="SMILES, or a sequence with --protein")
    p.add_argument("--protein", action="store_true")
    p.add_argument("--admissible", help="comma-separated elements for added atoms")
    p.set_defaults(func=_cmd_actions)

    p = sub.add_parser("oracle", help="surrogate predictors")
    osub = p.add_subparsers(dest="oracle_command", required=True)
    q = osub.add_parser("make-surrogate", help="write a surrogate definition as JSON")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--planted", action="store_true", help="plant one drug-bit / residue-window interaction")
    q.add_argument("--drug", help="SMILES carrying the planted bit")
    q.add_argument("--sequence", help="protein carrying the planted window")
    q.add_argument("--width", type=int, default=3)
    q.add_argument("--strength", type=float, default=2.0)
    q.add_argument("--form", choices=[FORM_OR, FORM_AND], default=FORM_OR,
                   help="planted term: active while either side is intact (or) or only while both are (and)")
    q.add_argument("--out")
    q.set_defaults(func=_cmd_make_surrogate)
    q = osub.add_parser("query", help="answer SMILES<TAB>SEQUENCE lines on stdin")
    q.add_argument("--oracle", default="surrogate:0")
    q.set_defaults(func=_cmd_query)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (MacdaError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, (MacdaError, OSError)):
            return exit_code(exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
