"""Command-line entry point.

One executable, eight subcommands: parse, measure, transform, eval, sat, mc,
encode, ltl.  Exit codes are a stable contract: 0 for SAT / holds / true /
parsed, 1 for UNSAT or UNSAT_WITHIN_BOUND / fails / false, 2 for UNKNOWN
(budget or cap hit), 3 for any structured error.  Every subcommand accepts
--json to emit one machine-readable record instead of the plain lines.
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

import click

from . import formula as F
from .automata import DEFAULT_COMPLEMENT_CAP, ltl_sat
from .decide import (
    DEFAULT_CANDIDATE_BUDGET,
    DEFAULT_EVAL_BUDGET,
    DEFAULT_TUPLE_CAP,
    SAT,
    UNKNOWN,
    UNSAT,
    UNSAT_WITHIN_BOUND,
    decide_complete,
    fragment_witness_chain,
    sat_bounded_kripke,
    sat_bounded_periodic,
    sat_bounded_traces,
    sat_fragment,
)
from .encode import encode_minsky, encode_pcp, encode_starfree, pcp_solution_model
from .errors import HyperLtlError, ShapeError
from .modelcheck import modelcheck
from .semantics import DEFAULT_PERIOD_CAP, LassoTrace, eval_sentence
from .syntax import (
    parse_formula,
    parse_kripke,
    parse_minsky,
    parse_pcp,
    parse_sentence,
    parse_starfree,
    parse_trace_model,
    print_formula,
    print_kripke,
    print_trace_model,
)
from .transform import (
    DEFAULT_NODE_CAP,
    eliminate_x,
    merge_universals,
    normalize_forall2_exists,
    reduce_depth2,
    to_forall_exists,
)

_EXITS = {SAT: 0, UNSAT: 1, UNSAT_WITHIN_BOUND: 1, UNKNOWN: 2}

_PASSES = {
    "prenex": lambda s: s,
    "depth2": reduce_depth2,
    "forall-exists": to_forall_exists,
    "forall2": merge_universals,
    "xelim": eliminate_x,
    "normalize": normalize_forall2_exists,
}


def _read(path: str) -> str:
    return Path(path).read_text()


def _emit(as_json: bool, record: dict, lines):
    if as_json:
        click.echo(json.dumps(record, sort_keys=True))
    else:
        for line in lines:
            click.echo(line)


@click.group()
def cli():
    """HyperLTL workbench: parsing, measures, transforms, deciders, encoders."""


@cli.command("parse")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON record.")
def cmd_parse(file, as_json):
    """Check a formula file and print its canonical rendering."""
    text = print_formula(parse_formula(_read(file)))
    _emit(as_json, {"command": "parse", "formula": text, "exit": 0}, [text])
    return 0


@cli.command("measure")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON record.")
def cmd_measure(file, as_json):
    """Print temporal depth, alternation depth, prefix class, fragment flags."""
    s = parse_sentence(_read(file))
    td = F.temporal_depth(s)
    ad = F.alternation_depth(s)
    prefix = F.classify_prefix(s)
    fg1 = F.in_fragment(s, "FG1")
    fgx1 = F.in_fragment(s, "FGX1")
    record = {
        "command": "measure",
        "td": td,
        "ad": ad,
        "prefix": prefix,
        "FG1": fg1,
        "FGX1": fgx1,
        "exit": 0,
    }
    lines = [
        f"td={td}",
        f"ad={ad}",
        f"prefix={prefix}",
        f"FG1={'yes' if fg1 else 'no'}",
        f"FGX1={'yes' if fgx1 else 'no'}",
    ]
    _emit(as_json, record, lines)
    return 0


@cli.command("transform")
@click.option(
    "--pass",
    "pass_name",
    required=True,
    type=click.Choice(sorted(_PASSES)),
    help="Which shape transformation to apply.",
)
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON record.")
def cmd_transform(pass_name, file, as_json):
    """Apply one equisatisfiability pass and print the result."""
    s = parse_sentence(_read(file))
    out = print_formula(_PASSES[pass_name](s))
    record = {"command": "transform", "pass": pass_name, "sentence": out, "exit": 0}
    _emit(as_json, record, [out])
    return 0


@cli.command("eval")
@click.option(
    "--model",
    "model_file",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Trace model file (.trc).",
)
@click.option("--period-cap", default=DEFAULT_PERIOD_CAP, show_default=True)
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON record.")
def cmd_eval(model_file, period_cap, file, as_json):
    """Evaluate a sentence on a finite trace model; true is exit 0."""
    s = parse_sentence(_read(file))
    model = parse_trace_model(_read(model_file))
    holds = eval_sentence(s, model, cap=period_cap)
    word = "true" if holds else "false"
    code = 0 if holds else 1
    _emit(as_json, {"command": "eval", "outcome": word, "exit": code}, [word])
    return code


@cli.command("mc")
@click.option(
    "--kripke",
    "kripke_file",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Structure file (.kst).",
)
@click.option("--nba-cap", default=DEFAULT_COMPLEMENT_CAP, show_default=True)
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON record.")
def cmd_mc(kripke_file, nba_cap, file, as_json):
    """Model-check a sentence on a structure; holds is exit 0."""
    s = parse_sentence(_read(file))
    k = parse_kripke(_read(kripke_file))
    holds = modelcheck(k, s, cap=nba_cap)
    word = "holds" if holds else "fails"
    code = 0 if holds else 1
    _emit(as_json, {"command": "mc", "outcome": word, "exit": code}, [word])
    return code


def _auto_verdict(s, node_cap, tuple_cap):
    kinds = F.prefix_kinds(s)
    if re.fullmatch("E*A*", kinds):
        return "complete", decide_complete(s, node_cap)
    if re.fullmatch("E*A?E*", kinds) and F.in_fragment(s, "FGX1"):
        return "fragment", sat_fragment(s, tuple_cap)
    raise click.UsageError(
        "prefix and matrix fit no decision procedure; "
        "pick --mode traces, periodic, or kripke with a --bound"
    )


def _certificate_payload(verdict, engine, chain_depth):
    """Text, suffix, and extra record fields for a SAT certificate."""
    cert = verdict.certificate
    if engine == "kripke":
        return print_kripke(cert), ".cert.kst", {}
    if engine == "fragment":
        chain = fragment_witness_chain(cert, chain_depth)
        return (
            print_trace_model(chain.traces()),
            ".cert.trc",
            {"chain_depth": chain_depth},
        )
    return print_trace_model(cert), ".cert.trc", {}


@cli.command("sat")
@click.option(
    "--mode",
    default="auto",
    show_default=True,
    type=click.Choice(["auto", "traces", "periodic", "kripke", "fragment"]),
)
@click.option("--bound", type=int, help="Trace / lasso / state bound for the bounded modes.")
@click.option("--chain-depth", default=3, show_default=True, help="Witness chain rounds for fragment certificates.")
@click.option("--certificate", "cert_file", type=click.Path(dir_okay=False), help="Certificate path (default: derived from the input name).")
@click.option("--tuple-cap", default=DEFAULT_TUPLE_CAP, show_default=True)
@click.option("--max-model", type=int, help="Cardinality cap for periodic models.")
@click.option("--eval-budget", default=DEFAULT_EVAL_BUDGET, show_default=True)
@click.option("--candidate-budget", default=DEFAULT_CANDIDATE_BUDGET, show_default=True)
@click.option("--nba-cap", default=DEFAULT_COMPLEMENT_CAP, show_default=True)
@click.option("--node-cap", default=DEFAULT_NODE_CAP, show_default=True)
@click.option("--jobs", default=1, show_default=True, help="Worker processes; verdicts are independent of this.")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON record.")
def cmd_sat(
    mode,
    bound,
    chain_depth,
    cert_file,
    tuple_cap,
    max_model,
    eval_budget,
    candidate_budget,
    nba_cap,
    node_cap,
    jobs,
    file,
    as_json,
):
    """Decide satisfiability; SAT exit 0, UNSAT(-within-bound) 1, UNKNOWN 2."""
    if jobs < 1:
        raise click.UsageError("--jobs must be at least 1")
    s = parse_sentence(_read(file))
    engine = mode
    if mode == "auto":
        engine, verdict = _auto_verdict(s, node_cap, tuple_cap)
    elif mode == "fragment":
        verdict = sat_fragment(s, tuple_cap)
    else:
        if bound is None:
            raise click.UsageError(f"--mode {mode} needs a --bound")
        if mode == "traces":
            verdict = sat_bounded_traces(s, bound, node_cap)
        elif mode == "periodic":
            verdict = sat_bounded_periodic(s, bound, max_model, eval_budget, jobs)
        else:
            verdict = sat_bounded_kripke(s, bound, candidate_budget, nba_cap, jobs)

    written = None
    extra = {}
    if verdict.outcome == SAT:
        text, suffix, extra = _certificate_payload(verdict, engine, chain_depth)
        written = cert_file or str(Path(file).with_suffix(suffix))
        Path(written).write_text(text)

    stats = dict(verdict.statistics)
    record = {
        "command": "sat",
        "mode": mode,
        "engine": engine,
        "outcome": verdict.outcome,
        "statistics": stats,
        "certificate": written,
        "exit": _EXITS[verdict.outcome],
        **extra,
    }
    shown = {k: v for k, v in stats.items() if k != "seconds"}
    lines = [f"{verdict.outcome} engine={engine} {shown}"]
    if written:
        lines.append(f"certificate: {written}")
    _emit(as_json, record, lines)
    return _EXITS[verdict.outcome]


@cli.command("encode")
@click.argument("kind", type=click.Choice(["pcp", "minsky", "starfree"]))
@click.argument("infile", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "outfile", required=True, type=click.Path(dir_okay=False))
@click.option("--ref-model", "ref_file", type=click.Path(dir_okay=False), help="Also write a reference trace model.")
@click.option("--solution", help="Pair indices (e.g. 212) for the pcp reference model.")
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON record.")
def cmd_encode(kind, infile, outfile, ref_file, solution, as_json):
    """Encode an instance file into a sentence, optionally with a witness model."""
    text = _read(infile)
    record = {"command": "encode", "kind": kind, "output": outfile, "exit": 0}
    lines = []
    ref = None
    if kind == "pcp":
        instance = parse_pcp(text)
        sentence, bound = encode_pcp(instance)
        record["bound"] = bound
        lines.append(f"bound={bound}")
        if ref_file:
            if not solution:
                raise click.UsageError("--ref-model for pcp needs a --solution index sequence")
            ref = pcp_solution_model(instance, solution)
    elif kind == "minsky":
        machine = parse_minsky(text)
        sentence = encode_minsky(machine)
        if ref_file:
            # proof trace of the initial configuration: state at position 0,
            # both counters zero
            ref = frozenset((LassoTrace.make([{machine.initial}], [set()]),))
    else:
        sentence = encode_starfree(parse_starfree(text))
        if ref_file:
            raise click.UsageError("star-free encodings have no reference model")
    Path(outfile).write_text(print_formula(sentence) + "\n")
    lines.insert(0, f"wrote {outfile}")
    if ref is not None:
        Path(ref_file).write_text(print_trace_model(ref))
        record["ref_model"] = ref_file
        lines.append(f"reference model: {ref_file}")
    _emit(as_json, record, lines)
    return 0


@cli.group("ltl")
def cmd_ltl():
    """Single-trace backend."""


@cmd_ltl.command("sat")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON record.")
def cmd_ltl_sat(file, as_json):
    """Satisfiability of a quantifier-free single-variable formula."""
    f = parse_formula(_read(file))
    if F.has_quantifier(f):
        raise ShapeError("the single-trace backend takes a quantifier-free formula")
    if len(F.free_vars(f)) > 1:
        raise ShapeError("the single-trace backend allows one trace variable")
    witness = ltl_sat(f)
    if witness is None:
        _emit(as_json, {"command": "ltl", "outcome": UNSAT, "exit": 1}, [UNSAT])
        return 1
    rendered = print_trace_model([witness]).strip()
    record = {"command": "ltl", "outcome": SAT, "witness": rendered, "exit": 0}
    _emit(as_json, record, [SAT, rendered])
    return 0


def run(argv) -> int:
    """Dispatch one invocation and map errors onto the exit-code contract."""
    try:
        code = cli.main(args=list(argv), standalone_mode=False)
        return int(code or 0)
    except click.exceptions.Exit as e:  # --help and friends
        return int(e.exit_code)
    except click.ClickException as e:
        if "--json" in argv:
            click.echo(json.dumps({"error": e.format_message(), "exit": 3}, sort_keys=True))
        else:
            click.echo(f"error: {e.format_message()}", err=True)
        return 3
    except HyperLtlError as e:
        if "--json" in argv:
            click.echo(json.dumps({"error": str(e), "exit": 3}, sort_keys=True))
        else:
            click.echo(f"error: {e}", err=True)
        return 3


def main():
    sys.exit(run(sys.argv[1:]))
