"""Circuit structure: registers, gates, the combinational DAG, file format.

A circuit has input, local, and output registers; its combinational DAG
reads one node per non-output register and drives one sink node per
non-input register. Gates of indegree 0 are constants; parallel arcs are
allowed. Evaluation is deterministic: gates fire in one fixed topological
order and each applies the worst-case ternary extension of its Boolean
function.
"""

from __future__ import annotations

import functools
import heapq
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .ternary_core import (
    META,
    ONE,
    ZERO,
    InputError,
    Ternary,
    TernaryWord,
    kleene_extend,
)


class Role(Enum):
    INPUT = "input"
    LOCAL = "local"
    OUTPUT = "output"


class RegType(Enum):
    SIMPLE = "simple"
    MASK0 = "mask0"
    MASK1 = "mask1"


@dataclass(frozen=True)
class RegisterDecl:
    """One register: unique name, exactly one role, one type.

    Input registers are never written and carry no init value.
    """

    name: str
    role: Role
    rtype: RegType
    init: Ternary | None = None


# fan-in bounds per kind: (min, max); None = unbounded
GATE_KINDS = {
    "AND": (2, None),
    "OR": (2, None),
    "NAND": (2, None),
    "NOR": (2, None),
    "XOR": (2, 2),
    "NOT": (1, 1),
    "BUF": (1, 1),
    "CONST0": (0, 0),
    "CONST1": (0, 0),
}


@dataclass(frozen=True)
class Gate:
    """Single-output gate; args name input nodes or earlier gates."""

    gid: str
    kind: str
    args: tuple[str, ...]
    table: str | None = None  # TABLE gates only: 2^arity output bits

    def __str__(self) -> str:
        kind = f"TABLE:{self.table}" if self.kind == "TABLE" else self.kind
        return " ".join(["gate", self.gid, kind, *self.args])


@dataclass(frozen=True)
class Dag:
    """Combinational DAG: named input nodes, gates, fan-in-1 output nodes.

    outputs lists (node name, source ref) pairs; a source ref is an input
    node name or a gate id. Gates must appear in topological order (see
    dag_toposort); validate() reports violations instead of raising.
    """

    inputs: tuple[str, ...]
    gates: tuple[Gate, ...]
    outputs: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Circuit:
    """Register declarations plus the DAG that rewrites them every round."""

    name: str
    registers: tuple[RegisterDecl, ...]
    dag: Dag

    def regs(self, role: Role) -> tuple[RegisterDecl, ...]:
        return tuple(r for r in self.registers if r.role is role)

    @property
    def input_regs(self) -> tuple[RegisterDecl, ...]:
        return self.regs(Role.INPUT)

    @property
    def local_regs(self) -> tuple[RegisterDecl, ...]:
        return self.regs(Role.LOCAL)

    @property
    def output_regs(self) -> tuple[RegisterDecl, ...]:
        return self.regs(Role.OUTPUT)

    @property
    def m(self) -> int:
        return len(self.input_regs)

    @property
    def k(self) -> int:
        return len(self.local_regs)

    @property
    def n(self) -> int:
        return len(self.output_regs)

    def init_word(self) -> TernaryWord:
        """Initial values of the non-input registers, locals then outputs."""
        return TernaryWord.from_digits(
            r.init for r in self.local_regs + self.output_regs)

    def state_order(self) -> tuple[RegisterDecl, ...]:
        return self.input_regs + self.local_regs + self.output_regs


def eval_gate(kind: str, table: str | None, vals: list[Ternary]) -> Ternary:
    if kind == "AND":
        out = ONE
        for v in vals:
            if v is ZERO:
                return ZERO
            if v is META:
                out = META
        return out
    if kind == "OR":
        out = ZERO
        for v in vals:
            if v is ONE:
                return ONE
            if v is META:
                out = META
        return out
    if kind == "NOT":
        v = vals[0]
        return META if v is META else (ZERO if v is ONE else ONE)
    if kind == "BUF":
        return vals[0]
    if kind == "XOR":
        a, b = vals
        if a is META or b is META:
            return META
        return ONE if a is not b else ZERO
    if kind == "NAND":
        out = ZERO
        for v in vals:
            if v is ZERO:
                return ONE
            if v is META:
                out = META
        return out
    if kind == "NOR":
        out = ONE
        for v in vals:
            if v is ONE:
                return ZERO
            if v is META:
                out = META
        return out
    if kind == "CONST0":
        return ZERO
    if kind == "CONST1":
        return ONE
    if kind == "TABLE":
        return kleene_extend(table, TernaryWord.from_digits(vals))
    raise InputError(f"unknown gate kind {kind!r}")


@functools.lru_cache(maxsize=1024)
def _compile_dag(dag: Dag):
    """Index-based evaluation plan; rejects undefined or misordered refs."""
    index = {name: i for i, name in enumerate(dag.inputs)}
    if len(index) != len(dag.inputs):
        raise InputError("duplicate input node name")
    ops = []
    for g in dag.gates:
        try:
            arg_idx = tuple(index[a] for a in g.args)
        except KeyError as e:
            raise InputError(
                f"gate {g.gid} references undefined or later node {e.args[0]!r}") from e
        if g.gid in index:
            raise InputError(f"duplicate node name {g.gid!r}")
        index[g.gid] = len(dag.inputs) + len(ops)
        ops.append((g.kind, g.table, arg_idx))
    try:
        out_idx = tuple(index[src] for _, src in dag.outputs)
    except KeyError as e:
        raise InputError(f"output driven by undefined node {e.args[0]!r}") from e
    return ops, out_idx


def eval_dag(dag: Dag, x: TernaryWord) -> TernaryWord:
    """Evaluate the DAG on one ternary input word, one digit per input node."""
    if x.width != len(dag.inputs):
        raise InputError(
            f"input width {x.width} does not match {len(dag.inputs)} input nodes")
    ops, out_idx = _compile_dag(dag)
    vals = list(x.digits())
    for kind, table, arg_idx in ops:
        vals.append(eval_gate(kind, table, [vals[i] for i in arg_idx]))
    return TernaryWord.from_digits(vals[i] for i in out_idx)


_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


def validate(c: Circuit) -> list[str]:
    """All structural violations, as human-readable strings; [] iff valid."""
    out: list[str] = []
    seen: dict[str, RegisterDecl] = {}
    for r in c.registers:
        if not _NAME_RE.match(r.name):
            out.append(f"bad register name {r.name!r}")
        if r.name in seen:
            other = seen[r.name]
            if other.role is not r.role:
                out.append(f"register {r.name} declared with two roles "
                           f"({other.role.value} and {r.role.value})")
            else:
                out.append(f"register {r.name} declared twice")
        seen[r.name] = r
        if r.role is Role.INPUT and r.init is not None:
            out.append(f"input register {r.name} must not have an init value")
        if r.role is not Role.INPUT and r.init is None:
            out.append(f"{r.role.value} register {r.name} needs an init value")

    want_inputs = tuple(r.name for r in c.input_regs + c.local_regs)
    if c.dag.inputs != want_inputs:
        out.append(
            f"dag input nodes {list(c.dag.inputs)} must be the non-output "
            f"registers in declaration order {list(want_inputs)}")
    want_outputs = tuple(r.name for r in c.local_regs + c.output_regs)
    if tuple(n for n, _ in c.dag.outputs) != want_outputs:
        out.append(
            f"dag output nodes {[n for n, _ in c.dag.outputs]} must be the "
            f"non-input registers in declaration order {list(want_outputs)}")

    defined = set(c.dag.inputs)
    for g in c.dag.gates:
        if not _NAME_RE.match(g.gid):
            out.append(f"bad gate id {g.gid!r}")
        if g.gid in seen or g.gid in defined:
            out.append(f"gate id {g.gid} collides with an earlier name")
        if g.kind == "TABLE":
            if g.table is None or len(g.table) != 1 << len(g.args) \
                    or any(ch not in "01" for ch in g.table):
                out.append(f"gate {g.gid}: TABLE bits must be 2^{len(g.args)} "
                           f"characters over 0/1")
        elif g.kind in GATE_KINDS:
            lo, hi = GATE_KINDS[g.kind]
            if len(g.args) < lo or (hi is not None and len(g.args) > hi):
                out.append(f"gate {g.gid}: {g.kind} takes "
                           + (f"at least {lo}" if hi is None else
                              f"exactly {lo}" if lo == hi else f"{lo}..{hi}")
                           + f" inputs, got {len(g.args)}")
        else:
            out.append(f"gate {g.gid}: unknown kind {g.kind!r}")
        for a in g.args:
            if a not in defined:
                out.append(f"gate {g.gid} uses {a!r} before it is defined "
                           f"(undeclared, a cycle, or out of order)")
        defined.add(g.gid)
    for name, src in c.dag.outputs:
        if src not in defined:
            out.append(f"register {name} is driven by {src!r} which is not "
                       f"an input node or gate")
    return out


def dag_toposort(dag: Dag) -> Dag:
    """Reorder gates into the fixed topological order used everywhere:
    among ready gates, earliest declaration first. Raises on cycles."""
    by_id = {g.gid: i for i, g in enumerate(dag.gates)}
    known = set(dag.inputs)
    waits: dict[int, int] = {}
    users: dict[str, list[int]] = {}
    ready: list[int] = []
    for i, g in enumerate(dag.gates):
        pending = 0
        for a in g.args:
            if a in by_id:
                pending += 1
                users.setdefault(a, []).append(i)
            elif a not in known:
                raise InputError(f"gate {g.gid} references undefined node {a!r}")
        waits[i] = pending
        if pending == 0:
            heapq.heappush(ready, i)
    order = []
    while ready:
        i = heapq.heappop(ready)
        g = dag.gates[i]
        order.append(g)
        for j in users.get(g.gid, ()):
            waits[j] -= 1
            if waits[j] == 0:
                heapq.heappush(ready, j)
    if len(order) != len(dag.gates):
        stuck = sorted(set(range(len(dag.gates))) - {by_id[g.gid] for g in order})
        raise InputError(
            f"cycle through gate {dag.gates[stuck[0]].gid}")
    return Dag(dag.inputs, tuple(order), dag.outputs)


class ParseError(InputError):
    """Netlist/spec file error with a line number."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


_INIT = {"0": ZERO, "1": ONE, "M": META}


def parse_netlist(text: str) -> Circuit:
    """Parse the line-oriented netlist format; see emit_netlist for shape."""
    name = None
    regs: list[RegisterDecl] = []
    gates: list[Gate] = []
    drives: dict[str, tuple[int, str]] = {}
    reg_lines: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kw = tok[0]
        if kw == "circuit":
            if name is not None:
                raise ParseError(lineno, "duplicate circuit line")
            if len(tok) != 2:
                raise ParseError(lineno, "expected: circuit <name>")
            name = tok[1]
        elif kw == "input":
            if len(tok) != 3:
                raise ParseError(lineno, "expected: input <reg> <type>")
            regs.append(RegisterDecl(tok[1], Role.INPUT, _rtype(lineno, tok[2])))
            reg_lines[tok[1]] = lineno
        elif kw in ("local", "output"):
            if len(tok) != 5 or tok[3] != "init":
                raise ParseError(
                    lineno, f"expected: {kw} <reg> <type> init <0|1|M>")
            if tok[4] not in _INIT:
                raise ParseError(lineno, f"bad init value {tok[4]!r}")
            regs.append(RegisterDecl(tok[1], Role(kw), _rtype(lineno, tok[2]),
                                     _INIT[tok[4]]))
            reg_lines[tok[1]] = lineno
        elif kw == "gate":
            if len(tok) < 3:
                raise ParseError(lineno, "expected: gate <id> <KIND> <src> ...")
            kind, table = tok[2], None
            if kind.startswith("TABLE:"):
                kind, table = "TABLE", kind[len("TABLE:"):]
            elif kind == "TABLE":
                raise ParseError(lineno, "TABLE gates are written TABLE:<bits>")
            gates.append(Gate(tok[1], kind, tuple(tok[3:]), table))
        elif kw == "drive":
            if len(tok) != 3:
                raise ParseError(lineno, "expected: drive <reg> <src>")
            if tok[1] in drives:
                raise ParseError(lineno, f"register {tok[1]} driven twice")
            drives[tok[1]] = (lineno, tok[2])
        else:
            raise ParseError(lineno, f"unknown directive {kw!r}")

    if name is None:
        raise ParseError(1, "missing circuit line")
    by_name = {r.name: r for r in regs}
    for reg, (lineno, _) in drives.items():
        if reg not in by_name:
            raise ParseError(lineno, f"drive names undeclared register {reg!r}")
        if by_name[reg].role is Role.INPUT:
            raise ParseError(lineno, f"input register {reg} cannot be driven")
    non_inputs = [r for r in regs if r.role is not Role.INPUT]
    for r in non_inputs:
        if r.name not in drives:
            raise ParseError(reg_lines[r.name],
                             f"register {r.name} is never driven")

    circuit = Circuit(
        name=name,
        registers=tuple(regs),
        dag=Dag(
            inputs=tuple(r.name for r in regs if r.role is not Role.OUTPUT),
            gates=tuple(gates),
            outputs=tuple((r.name, drives[r.name][1]) for r in non_inputs),
        ),
    )
    circuit = Circuit(circuit.name, circuit.registers,
                      dag_toposort(circuit.dag))
    problems = validate(circuit)
    if problems:
        raise InputError("; ".join(problems))
    return circuit


def _rtype(lineno: int, token: str) -> RegType:
    try:
        return RegType(token)
    except ValueError:
        raise ParseError(lineno, f"bad register type {token!r}") from None


def emit_netlist(c: Circuit) -> str:
    """Textual form of a circuit; parse_netlist(emit_netlist(c)) equals c."""
    lines = [f"circuit {c.name}"]
    for r in c.registers:
        if r.role is Role.INPUT:
            lines.append(f"input {r.name} {r.rtype.value}")
        else:
            lines.append(f"{r.role.value} {r.name} {r.rtype.value} init {r.init}")
    for g in c.dag.gates:
        lines.append(str(g))
    for reg, src in c.dag.outputs:
        lines.append(f"drive {reg} {src}")
    return "\n".join(lines) + "\n"


def make_circuit(name: str,
                 registers: Iterable[RegisterDecl],
                 gates: Iterable[Gate],
                 drives: dict[str, str]) -> Circuit:
    """Programmatic constructor: sorts gates, wires drives, validates."""
    regs = tuple(registers)
    non_inputs = [r for r in regs if r.role is not Role.INPUT]
    missing = [r.name for r in non_inputs if r.name not in drives]
    if missing:
        raise InputError(f"undriven registers: {', '.join(missing)}")
    extra = set(drives) - {r.name for r in non_inputs}
    if extra:
        raise InputError(f"drives for unknown registers: {', '.join(sorted(extra))}")
    dag = dag_toposort(Dag(
        inputs=tuple(r.name for r in regs if r.role is not Role.OUTPUT),
        gates=tuple(gates),
        outputs=tuple((r.name, drives[r.name]) for r in non_inputs),
    ))
    c = Circuit(name, regs, dag)
    problems = validate(c)
    if problems:
        raise InputError("; ".join(problems))
    return c
