"""Batch front end: simulate, check, synthesize, unroll, hunt witnesses,
and emit library components.

Every command prints a deterministic key-value report (or the produced
artifact itself) and signals its outcome through the exit code: 0 pass,
1 semantic failure with a counterexample, 2 malformed input, 3 budget
exceeded. Configuration is flags only.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import analysis, components, executor
from .netlist import emit_netlist, parse_netlist
from .ternary_core import (
    DEFAULT_MAX_META_BITS,
    DEFAULT_MAX_STATES,
    BudgetError,
    InputError,
    word,
)


def _read_text(path):
    try:
        with open(path, "r") as fh:
            return fh.read()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror or e}")


def _write_text(path, text):
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as e:
        raise InputError(f"cannot write {path}: {e.strerror or e}")


def _cubes(cs):
    return ", ".join(str(c) for c in cs)


def _load_circuit(path):
    return parse_netlist(_read_text(path))


def _spec_shape(f):
    form = "natural" if analysis.is_natural(f) else "general"
    return f"{form} m={f.m} n={f.n}"


# ---------------------------------------------------------------------------
# Commands: each returns (exit code, report text)

def cmd_sim(args):
    c = _load_circuit(args.netlist)
    iota = word(args.input)
    if args.rounds < 0:
        raise InputError("round count must be nonnegative")
    lines = ["command: sim",
             f"circuit: {c.name}",
             f"input: {iota}",
             f"rounds: {args.rounds}",
             f"max states: {args.max_states}"]
    peak = 0
    for t in range(args.rounds + 1):
        states = executor.reach(c, iota, t, args.max_states)
        peak = max(peak, len(states))
        lines.append(f"states[{t}]: {_cubes(states)}")
    for t in range(1, args.rounds + 1):
        outs = executor.outputs(c, iota, t, args.max_states)
        lines.append(f"outputs[{t}]: {_cubes(outs)}")
    lines.append(f"peak state cubes: {peak}")
    if args.trace is not None:
        if args.rounds < 1:
            raise InputError("a trace needs at least one round")
        t = executor.run_trace(c, iota, args.rounds)
        _write_text(args.trace, executor.emit_trace(t))
        lines.append(f"trace written: {args.trace}")
    return 0, "\n".join(lines)


def cmd_check(args):
    c = _load_circuit(args.netlist)
    f = analysis.parse_spec_table(_read_text(args.spec))
    v = executor.implements(c, args.rounds, f,
                            max_states=args.max_states,
                            max_meta_bits=args.max_meta_bits)
    lines = ["command: check",
             f"circuit: {c.name}",
             f"spec: {_spec_shape(f)}",
             f"rounds: {args.rounds}",
             f"verdict: {'yes' if v.ok else 'no'}"]
    if v.ok:
        return 0, "\n".join(lines)
    lines.append(f"witness input: {v.witness_input}")
    lines.append(f"witness output: {v.witness_output}")
    return 1, "\n".join(lines)


def cmd_closure(args):
    table = analysis.parse_truth_table(_read_text(args.table))
    f = analysis.closure_bool(table)
    text = analysis.emit_spec_table(f)
    if args.out is None:
        return 0, text.rstrip("\n")
    _write_text(args.out, text)
    return 0, "\n".join(["command: closure",
                         f"spec: {_spec_shape(f)}",
                         f"written: {args.out}"])


def cmd_synth(args):
    f = analysis.parse_spec_table(_read_text(args.spec))
    lines = ["command: synth", f"spec: {_spec_shape(f)}"]
    if analysis.is_natural(f):
        target = f
    else:
        target = analysis.find_natural_subfunction(f,
                                                   max_nodes=args.max_states)
        if target is None:
            lines.append("verdict: no natural subfunction")
            return 1, "\n".join(lines)
    c = analysis.synthesize(target)
    v = executor.implements(c, 1, f, max_states=args.max_states,
                            max_meta_bits=args.max_meta_bits)
    if not v.ok:
        lines.append("verdict: synthesized circuit failed its own check")
        lines.append(f"witness input: {v.witness_input}")
        lines.append(f"witness output: {v.witness_output}")
        return 1, "\n".join(lines)
    text = emit_netlist(c)
    if args.out is None:
        return 0, text.rstrip("\n")
    _write_text(args.out, text)
    lines.append(f"circuit: {c.name}")
    lines.append(f"gates: {len(c.dag.gates)}")
    lines.append("verdict: yes")
    lines.append(f"written: {args.out}")
    return 0, "\n".join(lines)


def cmd_unroll(args):
    c = _load_circuit(args.netlist)
    u = analysis.unroll(c, args.rounds)
    text = emit_netlist(u)
    if args.out is None:
        return 0, text.rstrip("\n")
    _write_text(args.out, text)
    return 0, "\n".join(["command: unroll",
                         f"circuit: {u.name}",
                         f"rounds: {args.rounds}",
                         f"written: {args.out}"])


def cmd_witness(args):
    c = _load_circuit(args.netlist)
    iota, iota2 = word(args.input), word(args.input2)
    t = analysis.metastable_witness(c, args.rounds, iota, iota2,
                                    max_states=args.max_states)
    if t is None:
        return 1, "\n".join(["command: witness",
                             f"circuit: {c.name}",
                             "verdict: none (output sets overlap)"])
    text = executor.emit_trace(t)
    if args.out is None:
        return 0, text.rstrip("\n")
    _write_text(args.out, text)
    return 0, "\n".join(["command: witness",
                         f"circuit: {c.name}",
                         f"from: {iota}",
                         f"to: {iota2}",
                         f"rounds: {args.rounds}",
                         "verdict: witness",
                         f"written: {args.out}"])


def _component_entry(name, params):
    simple = {"mux": components.build_mux,
              "cmux1": components.build_cmux_combinational,
              "cmux-clocked": components.build_cmux_clocked}
    unary = {"fanout-buffer": components.build_fanout_buffer,
             "counter": components.build_counter,
             "selector": components.build_selector,
             "tc-to-brgc": components.build_tc_to_brgc,
             "two-sort": components.build_two_sort,
             "brgc-to-tc": components.build_brgc_to_tc}
    try:
        nums = [int(p) for p in params]
    except ValueError:
        raise InputError(f"component parameters must be integers: {params}")
    if name in simple:
        if nums:
            raise InputError(f"{name} takes no parameters")
        return simple[name](), None
    if name in unary:
        if len(nums) != 1:
            raise InputError(f"{name} takes one parameter")
        return unary[name](nums[0]), None
    if name == "sorting-network":
        if len(nums) != 2:
            raise InputError("sorting-network takes channels and word width")
        net, c = components.build_sorting_network(nums[0], nums[1])
        return c, net
    known = sorted(list(simple) + list(unary) + ["sorting-network"])
    raise InputError(f"unknown component {name!r}; known: {', '.join(known)}")


def _component_checks(name, params, c):
    """Verification lines for components with an executable contract."""
    if name == "mux":
        a = executor.implements(c, 1, components.mux_spec())
        b = executor.implements(c, 1, components.cmux_spec())
        return [f"check: plain mux spec at round 1: {'yes' if a.ok else 'no'}",
                f"check: containing mux spec at round 1: "
                f"{'yes' if b.ok else 'no'}",
                f"witness input: {b.witness_input}"]
    if name == "cmux1":
        v = executor.implements(c, 1, components.cmux_spec())
        return [f"check: containing mux spec at round 1: "
                f"{'yes' if v.ok else 'no'}"]
    if name == "cmux-clocked":
        v = executor.implements(c, 2, components.cmux_spec())
        return [f"check: containing mux spec at round 2: "
                f"{'yes' if v.ok else 'no'}"]
    if name == "fanout-buffer":
        r = int(params[0])
        v = executor.implements(c, r, components.masking_fanout_spec(r))
        return [f"check: masking fan-out spec at round {r}: "
                f"{'yes' if v.ok else 'no'}"]
    return []


def cmd_component(args):
    c, net = _component_entry(args.name, args.params)
    if args.emit == "netlist":
        return 0, emit_netlist(c).rstrip("\n")
    lines = ["command: component",
             f"component: {args.name}",
             f"circuit: {c.name}",
             f"inputs: {c.m}",
             f"locals: {c.k}",
             f"outputs: {c.n}",
             f"gates: {len(c.dag.gates)}"]
    if net is not None:
        lines.append(f"layers: {len(net.layers)}")
        for i, layer in enumerate(net.layers):
            pairs = " ".join(f"({lo},{hi})" for lo, hi in layer)
            lines.append(f"layer[{i}]: {pairs}")
    lines.extend(_component_checks(args.name, args.params, c))
    return 0, "\n".join(lines)


def cmd_pipeline(args):
    readings = [word(t) for t in args.readings]
    n = args.nodes if args.nodes is not None else len(readings)
    low, high = components.clock_sync_select(n, args.faults, readings)
    if args.emit == "netlist":
        width = len(readings[0])
        k = (width + 1).bit_length() - 1
        c = components.build_pipeline(n, k, args.faults)
        return 0, emit_netlist(c).rstrip("\n")
    return 0, "\n".join(["command: pipeline",
                         f"nodes: {n}",
                         f"faults: {args.faults}",
                         f"readings: {_cubes(readings)}",
                         f"low: {low}",
                         f"high: {high}"])


# ---------------------------------------------------------------------------

def _add_budget_flags(p, states=True, meta=False):
    if states:
        p.add_argument("--max-states", type=int, default=DEFAULT_MAX_STATES,
                       help="state-enumeration budget")
    if meta:
        p.add_argument("--max-meta-bits", type=int,
                       default=DEFAULT_MAX_META_BITS,
                       help="cap on metastable input bits per word")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mc",
        description="Worst-case metastability propagation in clocked "
                    "circuits: simulate, check, synthesize.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim", help="enumerate reachable states and outputs")
    p.add_argument("netlist")
    p.add_argument("input", help="input word over {0,1,M}")
    p.add_argument("rounds", type=int)
    p.add_argument("--trace", help="also write one concrete execution here")
    _add_budget_flags(p)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("check", help="does the circuit implement the spec")
    p.add_argument("netlist")
    p.add_argument("spec")
    p.add_argument("rounds", type=int)
    _add_budget_flags(p, meta=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("closure",
                       help="metastable closure of a Boolean truth table")
    p.add_argument("table")
    p.add_argument("-o", "--out", help="write the spec here "
                                       "(default: stdout)")
    p.set_defaults(func=cmd_closure)

    p = sub.add_parser("synth", help="netlist realizing a specification")
    p.add_argument("spec")
    p.add_argument("-o", "--out", help="write the netlist here "
                                       "(default: stdout)")
    _add_budget_flags(p, meta=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("unroll",
                       help="combinational r-round copy of a circuit")
    p.add_argument("netlist")
    p.add_argument("rounds", type=int)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_unroll)

    p = sub.add_parser("witness",
                       help="execution forced metastable between two inputs")
    p.add_argument("netlist")
    p.add_argument("input")
    p.add_argument("input2")
    p.add_argument("rounds", type=int)
    p.add_argument("-o", "--out")
    _add_budget_flags(p)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("component", help="emit a library component")
    p.add_argument("name")
    p.add_argument("params", nargs="*")
    p.add_argument("--emit", choices=("netlist", "report"),
                   default="report")
    p.set_defaults(func=cmd_component)

    p = sub.add_parser("pipeline",
                       help="select fault-tolerant clock bounds from "
                            "TDC readings")
    p.add_argument("readings", nargs="+", help="ones-first TC words")
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--faults", type=int, required=True)
    p.add_argument("--emit", choices=("netlist", "report"),
                   default="report")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code, text = args.func(args)
    except BudgetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if text:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
