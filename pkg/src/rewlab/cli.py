"""Command-line front end.

Subcommands: parse, transform, eval, check, dist, gadget. Identical
invocations produce byte-identical output: arithmetic is exact, histogram
keys are sorted, and JSON field order is fixed. Exit codes: 0 success or
verified, 1 violated, 2 usage or parse error, 3 node budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .extreal import ExtReal, ExtRealError, parse_extreal
from .lang import ParseError, Program, State, parse, parse_expr, pretty_print
from . import lang
from .expectation import EvalError, parse_bindings, parse_grid
from .lang import UnboundVariableError
from .opsem import (
    BudgetExceededError, DEFAULT_BUDGET, MarkovChain, expected_reward,
    runtime_distribution,
)
from .transform import TransformError
from .transform import parse_spec as parse_transform_spec
from .transform import simplify_program
from .transform import transform as transform_program
from . import wpcalc
from . import gadgets

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _render(v) -> object:
    """JSON rendering: exact values as strings ('11/2', '2', 'inf'),
    floats as numbers."""
    if isinstance(v, ExtReal):
        return str(v) if v.is_exact else float(v)
    if isinstance(v, tuple):
        return [_render(x) for x in v]
    return v


def _load_program(path: str) -> Program:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse(fh.read())
    except FileNotFoundError:
        raise CliError("no such file: %s" % path)
    except ParseError as exc:
        raise CliError("%s: %s" % (path, exc))


def _initial_state(program: Program, args) -> State:
    bindings = {}
    for spec in args.param or []:
        bindings.update(parse_bindings(spec))
    unbound = {d.name for d in program.params} - set(bindings)
    if unbound:
        raise CliError(
            "unbound parameter(s): %s (use --param NAME=VALUE)" % ", ".join(sorted(unbound))
        )
    state = {name: ExtReal(0) for name in lang.free_vars(program)}
    state.update(bindings)
    for spec in args.state or []:
        state.update(parse_bindings(spec))
    return State(state)


def _param_names(program: Program) -> set[str]:
    return {d.name for d in program.params}


def _write_out(text: str, args):
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(payload: dict, args):
    _write_out(json.dumps(payload, indent=2) + "\n", args)


def _config_payload(args, program_path: str) -> dict:
    keep = (
        "f", "param", "state", "grid", "depth", "budget", "post", "bound",
        "simplify", "cap", "kind", "cond", "gamma", "mode", "step_param",
    )
    config = {"file": program_path}
    for key in keep:
        if hasattr(args, key) and getattr(args, key) not in (None, [], False):
            config[key] = getattr(args, key)
    return config


# -- subcommands -------------------------------------------------------------


def cmd_parse(args) -> int:
    program = _load_program(args.file)
    if args.json:
        _emit_json(
            {
                "schema_version": SCHEMA_VERSION,
                "command": "parse",
                "config": _config_payload(args, args.file),
                "ast": _ast_json(program),
            },
            args,
        )
    else:
        _write_out(pretty_print(program), args)
    return EXIT_OK


def _ast_json(node) -> object:
    from dataclasses import fields, is_dataclass

    if isinstance(node, ExtReal):
        return _render(node)
    if is_dataclass(node):
        out = {"node": type(node).__name__}
        for f in fields(node):
            out[f.name] = _ast_json(getattr(node, f.name))
        return out
    if isinstance(node, tuple):
        return [_ast_json(x) for x in node]
    return node


def cmd_transform(args) -> int:
    program = _load_program(args.file)
    spec = parse_transform_spec(args.f, params=_param_names(program))
    out = transform_program(program, spec)
    if args.simplify:
        out = simplify_program(out)
    _write_out(pretty_print(out), args)
    return EXIT_OK


def cmd_eval(args) -> int:
    program = _load_program(args.file)
    state = _initial_state(program, args)
    spec = parse_transform_spec(args.f, params=_param_names(program)) if args.f else None
    if spec is not None:
        bindings = {}
        for chunk in args.param or []:
            bindings.update(parse_bindings(chunk))
        spec = spec.bound(bindings)
    post = parse_expr(args.post, params=_param_names(program)) if args.post else None
    cap = parse_extreal(args.cap) if args.cap else None
    mc = MarkovChain.of_program(program, state)
    bracket = expected_reward(
        mc, args.depth, f=spec, post=post, budget=args.budget, step_reward_cap=cap
    )
    _emit_json(
        {
            "schema_version": SCHEMA_VERSION,
            "command": "eval",
            "config": _config_payload(args, args.file),
            "lower_bound": _render(bracket.lower),
            "upper_bound": _render(bracket.upper) if bracket.upper is not None else None,
            "unabsorbed_mass": _render(bracket.unabsorbed_mass),
            "depth": bracket.depth,
            "paths_enumerated": bracket.paths_enumerated,
        },
        args,
    )
    return EXIT_OK


def cmd_check(args) -> int:
    program = _load_program(args.file)
    params = {}
    for spec in args.param or []:
        params.update(parse_bindings(spec))
    grid = parse_grid(args.grid, params=params)
    names = _param_names(program)
    post = parse_expr(args.post, params=names) if args.post else parse_expr("0")
    if args.bound:
        report = wpcalc.check_bound(program, parse_expr(args.bound, params=names), post, grid)
    else:
        report = wpcalc.check_program(program, post, grid)
    locations = [
        "%d:%d" % ob.loop.invariant_loc
        for ob in report.obligations
        if ob.loop.invariant_loc is not None
    ]
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "check",
        "config": _config_payload(args, args.file),
        "verdict": report.verdict,
        "verdict_note": "%s (on grid)" % report.verdict,
        "grid": report.grid,
        "fixed_point": report.fixed_point,
        "invariant_source_location": locations[0] if len(locations) == 1 else (locations or None),
        "counterexamples": [
            {
                "state": {k: _render(v) for k, v in sorted(st.as_dict().items())},
                "phi_of_I": _render(a),
                "I": _render(b),
            }
            for st, a, b in report.counterexamples
        ],
    }
    if report.derived_bound is not None:
        payload["derived_bound"] = lang.format_expr(report.derived_bound)
    _emit_json(payload, args)
    return EXIT_OK if report.verified else EXIT_VIOLATED


def cmd_dist(args) -> int:
    program = _load_program(args.file)
    state = _initial_state(program, args)
    mc = MarkovChain.of_program(program, state)
    hist, unabsorbed = runtime_distribution(mc, args.depth, budget=args.budget)
    rows = sorted(hist.items())
    lines = ["reward,probability"]
    for reward, prob in rows:
        key = reward if not isinstance(reward, tuple) else ";".join(str(r) for r in reward)
        lines.append("%s,%s" % (key, prob))
    _write_out("\n".join(lines) + "\n", args)
    if not unabsorbed.is_zero:
        print("unabsorbed mass: %s" % unabsorbed, file=sys.stderr)
    if args.plot:
        if mc.arity != 1:
            raise CliError("--plot needs a single-reward program")
        _plot_histogram(rows, args.plot)
        print("figure written to %s" % args.plot, file=sys.stderr)
    return EXIT_OK


def _plot_histogram(rows, path: str):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [float(r) for r, _ in rows]
    ys = [float(p) for _, p in rows]
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.bar(xs, ys, width=0.4, color="#4878a8")
    ax.set_xlabel("cumulative reward")
    ax.set_ylabel("probability")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_gadget(args) -> int:
    program = _load_program(args.file)
    names = _param_names(program)
    spec = gadgets.GadgetSpec(
        kind=args.kind,
        post=parse_expr(args.post, params=names) if args.post else None,
        gamma=parse_extreal(args.gamma) if args.gamma else None,
        step_param=args.step_param,
        mode=args.mode,
        cond=lang.parse_bexpr(args.cond, params=names) if args.cond else None,
    )
    try:
        out = gadgets.apply_gadget(program, spec)
    except gadgets.GadgetError as exc:
        raise CliError(str(exc))
    _write_out(pretty_print(out), args)
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------


def _add_common(sub, state=False, grid=False):
    sub.add_argument("file", help="program file")
    sub.add_argument("--param", action="append", metavar="K=V", help="parameter bindings, e.g. N=10,p=1/10")
    if state:
        sub.add_argument("--state", action="append", metavar="K=V", help="initial variable bindings (default 0)")
        sub.add_argument("--depth", type=int, default=64, help="exploration depth in chain transitions (default 64)")
        sub.add_argument(
            "--budget",
            type=int,
            default=int(os.environ.get("REWLAB_BUDGET", DEFAULT_BUDGET)),
            help="node budget (default 10^6, env REWLAB_BUDGET)",
        )
    if grid:
        sub.add_argument("--grid", required=True, metavar="SPEC", help="state grid, e.g. x=0..10,done=0..1,tau={0,1/2,1}")
    sub.add_argument("--out", metavar="PATH", help="write output to PATH instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rewlab",
        description="Quantitative analysis of probabilistic programs with reward statements",
    )
    subs = ap.add_subparsers(dest="command", required=True)

    p = subs.add_parser("parse", help="parse and pretty-print a program")
    _add_common(p)
    p.add_argument("--json", action="store_true", help="dump the AST as JSON")
    p.set_defaults(fn=cmd_parse)

    p = subs.add_parser("transform", help="apply a reward transformation")
    _add_common(p)
    p.add_argument("--f", required=True, metavar="SPEC",
                   help="moment:K | cdf:N | excess:N | mgf:T | linear:A,B | product | identity")
    p.add_argument("--simplify", action="store_true", help="fold constants and simplify rewards")
    p.set_defaults(fn=cmd_transform)

    p = subs.add_parser("eval", help="depth-bounded expected reward")
    _add_common(p, state=True)
    p.add_argument("--f", metavar="SPEC", help="transform applied to the cumulative reward")
    p.add_argument("--post", metavar="EXPR", help="post-expectation collected on termination")
    p.add_argument("--cap", metavar="C", help="per-step reward cap enabling an upper bound")
    p.set_defaults(fn=cmd_eval)

    p = subs.add_parser("check", help="Park-induction invariant check on a grid")
    _add_common(p, grid=True)
    p.add_argument("--post", metavar="EXPR", help="post-expectation (default 0)")
    p.add_argument("--bound", metavar="EXPR", help="also verify the derived pre-expectation against this bound")
    p.set_defaults(fn=cmd_check)

    p = subs.add_parser("dist", help="distribution of cumulative rewards (CSV)")
    _add_common(p, state=True)
    p.add_argument("--plot", metavar="PNG", help="also render a bar chart to this file")
    p.set_defaults(fn=cmd_dist)

    p = subs.add_parser("gadget", help="apply a ghost-variable reward gadget")
    _add_common(p)
    p.add_argument("--kind", required=True,
                   choices=["on-termination", "discount", "step-indexed", "evt", "first-visit", "first-return"])
    p.add_argument("--post", metavar="EXPR", help="post expectation (on-termination)")
    p.add_argument("--gamma", metavar="G", help="discount factor in [0,1]")
    p.add_argument("--step-param", dest="step_param", default="N", help="step-index parameter name (default N)")
    p.add_argument("--mode", choices=["at", "upto"], default="at", help="step-indexed mode")
    p.add_argument("--cond", metavar="BEXPR", help="condition for evt/first-visit/first-return")
    p.set_defaults(fn=cmd_gadget)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if getattr(args, "depth", 1) < 1:
            raise CliError("depth must be >= 1")
        if getattr(args, "budget", None) is not None and args.budget < getattr(args, "depth", 1):
            raise CliError("budget must be at least the depth")
        return args.fn(args)
    except CliError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return exc.code
    except ParseError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceededError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_BUDGET
    except (EvalError, ExtRealError, UnboundVariableError, TransformError, wpcalc.MultiRewardError,
            wpcalc.LoopWithoutInvariantError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
