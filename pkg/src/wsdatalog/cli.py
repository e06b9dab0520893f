"""Command-line front end.

Exit codes: 0 ok, 2 parse error, 3 semantic error, 4 class precondition
violated, 5 safety cap exceeded, 6 I/O error, 7 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import List, Optional

from .analysis import classify
from .chase import (GroundingConfig, answer_over_ground, ground_ws, resumptions_for, restricted_chase)
from .errors import (CapExceeded, ParseError, PreconditionViolated, SemanticError, UnknownPredicate,
                     WsDatalogError)
from .model import Program, answers, schema_of
from .rewrite import emit_sql, hybrid_answer, rewrite_sticky
from .syntax import CsvBinding, load_csv, parse_source, serialize_program
from .transform import partial_grounding, reduce_rank

COMMANDS = ("classify", "ground", "answer", "reduce-rank", "partial-ground", "rewrite", "emit-sql")

EXIT_OK, EXIT_PARSE, EXIT_SEMANTIC, EXIT_PRECONDITION, EXIT_CAP, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4, 5, 6, 7


class UsageError(WsDatalogError):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wsdatalog", description="Weakly-sticky Datalog+/- query answering.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("program", help="program file (.dl); may contain one inline query")
    ap.add_argument("--query", help="query file (.dl)")
    ap.add_argument("--csv", action="append", default=[], metavar="PRED=PATH",
                    help="load facts for PRED from a CSV file (repeatable)")
    ap.add_argument("--resumptions", type=int, help="number of freeze-and-resume rounds")
    ap.add_argument("--mode", choices=("groundws", "hybrid", "oracle"), default="groundws")
    ap.add_argument("--depth", type=int, help="chase depth bound (required with --mode oracle)")
    ap.add_argument("--format", choices=("json", "tsv", "dl"), help="output format")
    ap.add_argument("--out", help="write output here instead of standard output")
    return ap


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _csv_arity(path: str) -> int:
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if row:
                return len(row)
    return 0


def load_inputs(args):
    src = parse_source(_read(args.program), allow_generated=True)
    query = src.query
    if args.query:
        qsrc = parse_source(_read(args.query), allow_generated=True)
        if qsrc.query is None or qsrc.rules or qsrc.facts:
            raise ParseError(f"{args.query}: expected exactly one query")
        query = qsrc.query
    facts = set(src.facts)
    schema = schema_of(src.rules, facts, [query] if query else [])
    for item in args.csv:
        pred, sep, path = item.partition("=")
        if not sep or not pred or not path:
            raise UsageError(f"--csv expects PRED=PATH, got {item!r}")
        arity = schema.get(pred)
        if arity is None:
            arity = _csv_arity(path)
        facts |= load_csv(CsvBinding(pred, arity, path))
    program = Program(tuple(src.rules), frozenset(facts))
    schema_of(program.rules, program.database, [query] if query else [])
    return program, query


def _require_query(query, command):
    if query is None:
        raise UsageError(f"{command} needs a query (--query or an inline 'q(...) :- ...' statement)")
    return query


def _sorted_answers(rows):
    return sorted(rows, key=lambda row: tuple(t.sort_key for t in row))


def format_answers(rows, is_boolean: bool, fmt: str) -> str:
    rows = _sorted_answers(rows)
    if fmt == "json":
        return json.dumps({"answers": [[str(t) for t in row] for row in rows]}) + "\n"
    if is_boolean:
        return ("true" if rows else "false") + "\n"
    return "".join("\t".join(str(t) for t in row) + "\n" for row in rows)


def cmd_classify(program: Program, query) -> str:
    schema = schema_of(program.rules, program.database, [query] if query else [])
    report = classify(program.rules, schema)
    body = {
        "sticky": report.sticky,
        "weakly_acyclic": report.weakly_acyclic,
        "weakly_sticky": report.weakly_sticky,
        "zero_infinity": report.zero_infinity,
        "pi_f": [str(p) for p in sorted(report.ranks.pi_f)],
        "pi_inf": [str(p) for p in sorted(report.ranks.pi_inf)],
        "marked": [[i, v] for i, v in sorted(report.marking.marked)],
    }
    return json.dumps(body, indent=2) + "\n"


def run(args) -> str:
    program, query = load_inputs(args)
    if args.command == "classify":
        return cmd_classify(program, query)
    if args.command == "ground":
        if args.resumptions is not None:
            k = args.resumptions
        elif query is not None:
            k = resumptions_for(query)
        else:
            raise UsageError("ground needs --resumptions or a query")
        gp = ground_ws(program, GroundingConfig(k))
        return serialize_program(gp.program)
    if args.command == "answer":
        query = _require_query(query, "answer")
        fmt = args.format or "tsv"
        if fmt == "dl":
            raise UsageError("answer supports --format json or tsv")
        if args.mode == "oracle":
            if args.depth is None:
                raise UsageError("--mode oracle requires --depth")
            result = restricted_chase(program, args.depth)
            if not result.saturated:
                print(f"warning: chase not saturated within depth {args.depth}", file=sys.stderr)
            rows = answers(query, result.atoms)
        elif args.mode == "hybrid":
            rows = hybrid_answer(program, query)
        else:
            k = args.resumptions if args.resumptions is not None else resumptions_for(query)
            rows = answer_over_ground(query, ground_ws(program, GroundingConfig(k)))
        return format_answers(rows, query.is_boolean, fmt)
    if args.command == "reduce-rank":
        reduced, q2 = reduce_rank(program, query)
        return serialize_program(reduced, q2)
    if args.command == "partial-ground":
        return serialize_program(partial_grounding(program), query)
    if args.command in ("rewrite", "emit-sql"):
        query = _require_query(query, args.command)
        u = rewrite_sticky(query, program.rules)
        if args.command == "rewrite":
            return str(u)
        return emit_sql(u) + "\n"
    raise UsageError(f"unknown command {args.command}")


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, (SemanticError, UsageError, UnknownPredicate)):
        return EXIT_SEMANTIC
    if isinstance(exc, PreconditionViolated):
        return EXIT_PRECONDITION
    if isinstance(exc, CapExceeded):
        return EXIT_CAP
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_INTERNAL


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = run(args)
    except Exception as exc:  # mapped to documented exit codes
        code = _exit_code(exc)
        kind = "error" if code != EXIT_INTERNAL else "internal error"
        print(f"wsdatalog: {kind}: {exc}", file=sys.stderr)
        return code
    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"wsdatalog: error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
