"""Shared fixtures: the worked-example circuit, random corpora, oracles."""

import itertools
import random

import pytest

from mcsim.netlist import (
    Circuit,
    Dag,
    Gate,
    RegisterDecl,
    RegType,
    Role,
    make_circuit,
    parse_netlist,
)
from mcsim.ternary_core import META, ONE, ZERO, TernaryWord

ALL_DIGITS = (ZERO, ONE, META)

# One mask-0 input and one simple input feed an OR; a simple local latches
# the OR, and the output takes AND(local, OR). Small enough to replay a
# whole multi-round execution by hand.
FEEDBACK_TEXT = """\
circuit or_and_feedback
input I1 mask0
input I2 simple
local L1 simple init 1
output O1 simple init 1
gate g_or OR I1 I2
gate g_and AND L1 g_or
drive L1 g_or
drive O1 g_and
"""


@pytest.fixture(scope="session")
def feedback_circuit() -> Circuit:
    return parse_netlist(FEEDBACK_TEXT)


def all_words(width):
    return [TernaryWord.from_digits(ds)
            for ds in itertools.product(ALL_DIGITS, repeat=width)]


def stable_words(width):
    return [TernaryWord.from_digits(ds)
            for ds in itertools.product((ZERO, ONE), repeat=width)]


# independent Boolean evaluator, used as the stable-input oracle
def bool_eval_dag(dag: Dag, bits):
    vals = dict(zip(dag.inputs, bits))
    for g in dag.gates:
        a = [vals[x] for x in g.args]
        if g.kind == "AND":
            v = int(all(a))
        elif g.kind == "OR":
            v = int(any(a))
        elif g.kind == "NOT":
            v = 1 - a[0]
        elif g.kind == "BUF":
            v = a[0]
        elif g.kind == "XOR":
            v = a[0] ^ a[1]
        elif g.kind == "NAND":
            v = 1 - int(all(a))
        elif g.kind == "NOR":
            v = 1 - int(any(a))
        elif g.kind == "CONST0":
            v = 0
        elif g.kind == "CONST1":
            v = 1
        elif g.kind == "TABLE":
            idx = 0
            for bit in a:
                idx = (idx << 1) | bit
            v = int(g.table[idx])
        else:
            raise AssertionError(g.kind)
        vals[g.gid] = v
    return [vals[src] for _, src in dag.outputs]


def random_gates(rng: random.Random, sources: list[str], count: int,
                 prefix: str = "g"):
    """Random gate list; each gate may use input nodes or earlier gates."""
    gates = []
    avail = list(sources)
    for i in range(count):
        kind = rng.choice(["AND", "OR", "NOT", "XOR", "NAND", "NOR",
                           "BUF", "CONST0", "CONST1", "TABLE"])
        table = None
        if kind in ("AND", "OR", "NAND", "NOR"):
            arity = rng.randint(2, 3)
        elif kind == "XOR":
            arity = 2
        elif kind in ("NOT", "BUF"):
            arity = 1
        elif kind == "TABLE":
            arity = rng.randint(1, 3)
            table = "".join(rng.choice("01") for _ in range(1 << arity))
        else:
            arity = 0
        if arity > 0 and not avail:
            kind, table, arity = "CONST0", None, 0
        args = tuple(rng.choice(avail) for _ in range(arity))
        gid = f"{prefix}{i}"
        gates.append(Gate(gid, kind, args, table))
        avail.append(gid)
    return gates, avail


def random_circuit(rng: random.Random, max_regs: int = 6,
                   all_simple: bool = False, max_inputs: int = 4,
                   name: str = "rnd") -> Circuit:
    m = rng.randint(1, min(max_inputs, max_regs - 1))
    n = rng.randint(1, max_regs - m)
    k = rng.randint(0, max_regs - m - n)
    types = [RegType.SIMPLE] if all_simple else list(RegType)
    regs = []
    for i in range(m):
        regs.append(RegisterDecl(f"i{i}", Role.INPUT, rng.choice(types)))
    for i in range(k):
        regs.append(RegisterDecl(f"l{i}", Role.LOCAL, rng.choice(types),
                                 rng.choice(ALL_DIGITS)))
    for i in range(n):
        regs.append(RegisterDecl(f"o{i}", Role.OUTPUT, rng.choice(types),
                                 rng.choice(ALL_DIGITS)))
    sources = [r.name for r in regs if r.role is not Role.OUTPUT]
    gates, avail = random_gates(rng, sources, rng.randint(0, 6))
    drives = {r.name: rng.choice(avail)
              for r in regs if r.role is not Role.INPUT}
    return make_circuit(name, regs, gates, drives)


def simple_copy(c: Circuit) -> Circuit:
    """Same circuit with every register type replaced by simple."""
    regs = tuple(RegisterDecl(r.name, r.role, RegType.SIMPLE, r.init)
                 for r in c.registers)
    return Circuit(c.name, regs, c.dag)


def flatten_states(cubes, m: int):
    """Every concrete state a state-cube set denotes (small widths only)."""
    from mcsim.ternary_core import res_members
    out = set()
    for cube in cubes:
        head = cube.subword(0, m)
        for tail in res_members(cube.subword(m, len(cube))):
            out.add(head.concat(tail))
    return out


def detector_spec():
    """Flags metastability: M maps to {1}, stable inputs map to {0}."""
    from mcsim.analysis import general_spec
    from mcsim.ternary_core import CubeSet, word
    return general_spec(1, 1, {
        word("0"): CubeSet.of(1, [word("0")]),
        word("1"): CubeSet.of(1, [word("0")]),
        word("M"): CubeSet.of(1, [word("1")]),
    })


def resolver_spec():
    """Forces a stable value: M maps to {0, 1}, stable inputs stay put."""
    from mcsim.analysis import general_spec
    from mcsim.ternary_core import CubeSet, word
    return general_spec(1, 1, {
        word("0"): CubeSet.of(1, [word("0")]),
        word("1"): CubeSet.of(1, [word("1")]),
        word("M"): CubeSet.of(1, [word("0"), word("1")]),
    })


def mm_example_spec():
    """f(x) = Res_M(x) minus the all-M word; not bit-wise at MM."""
    from mcsim.analysis import general_spec
    from mcsim.ternary_core import CubeSet, word
    values = {}
    for x in all_words(2):
        if x == word("MM"):
            values[x] = CubeSet.of(2, [word("0M"), word("1M"),
                                       word("M0"), word("M1")])
        else:
            values[x] = CubeSet.of(2, [x])
    return general_spec(2, 2, values)


def circuit_corpus(seed: int, count: int, **kw) -> list[Circuit]:
    rng = random.Random(seed)
    return [random_circuit(rng, name=f"rnd{i}", **kw) for i in range(count)]


@pytest.fixture(scope="session")
def corpus_mixed():
    """At least 100 random circuits, every register type, <= 6 registers."""
    return circuit_corpus(seed=20240817, count=110)


@pytest.fixture(scope="session")
def corpus_simple():
    """At least 50 random all-simple circuits, <= 5 registers."""
    return circuit_corpus(seed=9157, count=55, max_regs=5, all_simple=True)
