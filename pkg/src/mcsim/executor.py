"""Round semantics: registers are read, the DAG evaluates, registers are
written, and the adversary chooses how metastable bits behave at each step.

A circuit state is one word over all registers (inputs, locals, outputs).
Sets of states are kept as cubes: the input digits of a cube are exact
register contents, while the local/output digits denote every partial
resolution (they were just written, and the writer may resolve any Meta
bit however it likes). Iterating one round on a cube's own word is exact,
so reachable-state sets never get expanded flat.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

from .netlist import Circuit, RegType, eval_dag
from .ternary_core import (
    DEFAULT_MAX_META_BITS,
    DEFAULT_MAX_STATES,
    META,
    ONE,
    ZERO,
    BudgetError,
    CubeSet,
    InputError,
    Ternary,
    TernaryWord,
    cubeset_canonicalize,
    res_contains,
)


def register_transitions(rtype: RegType, v: Ternary) -> tuple[tuple[Ternary, Ternary], ...]:
    """Solid arcs of the register automaton: (value read, next content).

    A stable register always reads and keeps its value. A metastable
    mask-0 register may read 0 and stay metastable, or read M and
    thereby resolve to 1; mask-1 mirrors this. The order is fixed so
    that every caller sees the same first outcome.
    """
    if v is not META or rtype is RegType.SIMPLE:
        return ((v, v),)
    if rtype is RegType.MASK0:
        return ((ZERO, META), (META, ONE))
    return ((ONE, META), (META, ZERO))


class _Budget:
    __slots__ = ("left",)

    def __init__(self, left: Optional[int]):
        self.left = left

    def spend(self, n: int) -> None:
        if self.left is None:
            return
        self.left -= n
        if self.left < 0:
            raise BudgetError("state budget exceeded; raise the max-states cap")


def _check_state(c: Circuit, s: TernaryWord) -> None:
    width = c.m + c.k + c.n
    if len(s) != width:
        raise InputError(f"state width {len(s)} does not match {width} registers")


def read_outcomes(c: Circuit, s: TernaryWord,
                  max_outcomes: Optional[int] = None,
                  ) -> list[tuple[TernaryWord, TernaryWord]]:
    """All (read word, next input-register contents) pairs for state s.

    The read word covers the non-output registers in state order; the
    second component records where the input registers end up, since
    every other register is overwritten before it is read again.
    """
    _check_state(c, s)
    budget = _Budget(max_outcomes)
    return sorted(_read_outcomes(c, s, budget))


def _read_outcomes(c: Circuit, s: TernaryWord, budget: _Budget):
    m = c.m
    per = [register_transitions(r.rtype, s.digit(i))
           for i, r in enumerate(c.input_regs + c.local_regs)]
    total = 1
    for p in per:
        total *= len(p)
    budget.spend(total)
    out = []
    for combo in itertools.product(*per):
        read = TernaryWord.from_digits(t[0] for t in combo)
        nxt = TernaryWord.from_digits(combo[j][1] for j in range(m))
        out.append((read, nxt))
    return out


def canonicalize_state_cubes(m: int, width: int,
                             cubes: Iterable[TernaryWord]) -> CubeSet:
    """Canonical form for state-cube sets.

    Cubes agree as sets only when their exact input digits agree, so
    subsumption runs within groups of equal input parts.
    """
    groups: dict[TernaryWord, list[TernaryWord]] = {}
    for w in cubes:
        if len(w) != width:
            raise InputError(f"state cube width {len(w)}, expected {width}")
        groups.setdefault(w.subword(0, m), []).append(w.subword(m, width))
    kept = []
    for head in sorted(groups):
        for tail in cubeset_canonicalize(CubeSet.of(width - m, groups[head])):
            kept.append(head.concat(tail))
    return CubeSet.of(width, kept)


def state_cube_contains(m: int, cube: TernaryWord, s: TernaryWord) -> bool:
    """Membership of a concrete state in one state cube."""
    if len(cube) != len(s):
        raise InputError("state width mismatch")
    return (cube.subword(0, m) == s.subword(0, m)
            and res_contains(cube.subword(m, len(cube)), s.subword(m, len(s))))


def _successor_cubes(c: Circuit, s: TernaryWord, budget: _Budget) -> list[TernaryWord]:
    return [nxt.concat(eval_dag(c.dag, read))
            for read, nxt in _read_outcomes(c, s, budget)]


def successors(c: Circuit, s: TernaryWord,
               max_outcomes: Optional[int] = None) -> CubeSet:
    """Canonical cube set of all states one round after state s."""
    _check_state(c, s)
    width = c.m + c.k + c.n
    cubes = _successor_cubes(c, s, _Budget(max_outcomes))
    return canonicalize_state_cubes(c.m, width, cubes)


def reach(c: Circuit, iota: TernaryWord, r: int,
          max_states: Optional[int] = DEFAULT_MAX_STATES) -> CubeSet:
    """States reachable in exactly r rounds from inputs iota, as cubes.

    Round 0 is the literal initial state. Each later round expands the
    previous round's cube words only; the budget counts base states
    visited plus successor cubes produced.
    """
    if len(iota) != c.m:
        raise InputError(f"input width {len(iota)}, circuit has {c.m} inputs")
    if r < 0:
        raise InputError("round count must be nonnegative")
    width = c.m + c.k + c.n
    frontier = CubeSet.of(width, [iota.concat(c.init_word())])
    budget = _Budget(max_states)
    memo: dict[TernaryWord, list[TernaryWord]] = {}
    seen: dict[CubeSet, int] = {}
    t = 0
    jumped = False
    while t < r:
        if not jumped:
            prev = seen.get(frontier)
            if prev is not None:
                # frontier sets repeat; skip whole periods, walk the rest
                period = t - prev
                t += ((r - t) // period) * period
                jumped = True
                if t >= r:
                    break
            else:
                seen[frontier] = t
        nxt: list[TernaryWord] = []
        for cube in frontier:
            cs = memo.get(cube)
            if cs is None:
                budget.spend(1)
                cs = _successor_cubes(c, cube, budget)
                memo[cube] = cs
            nxt.extend(cs)
        frontier = canonicalize_state_cubes(c.m, width, nxt)
        t += 1
    return frontier


def outputs(c: Circuit, iota: TernaryWord, r: int,
            max_states: Optional[int] = DEFAULT_MAX_STATES) -> CubeSet:
    """All output-register words the circuit can show after r >= 1 rounds."""
    if r < 1:
        raise InputError("outputs are defined from round 1 on")
    width = c.m + c.k + c.n
    tails = [cube.subword(width - c.n, width)
             for cube in reach(c, iota, r, max_states)]
    return cubeset_canonicalize(CubeSet.of(c.n, tails))


@dataclass(frozen=True)
class Verdict:
    """Result of an implements check; falsy iff a counterexample exists."""
    ok: bool
    witness_input: Optional[TernaryWord] = None
    witness_output: Optional[TernaryWord] = None

    def __bool__(self) -> bool:
        return self.ok


def implements(c: Circuit, r: int, f,
               max_states: Optional[int] = DEFAULT_MAX_STATES,
               max_meta_bits: int = DEFAULT_MAX_META_BITS) -> Verdict:
    """Does every output after r rounds land inside f, for every input word?

    f is a function specification: value_cubeset(iota) gives the allowed
    outputs. A reachable output cube lies inside the allowed set exactly
    when its own word is an allowed member, so the witness reported for
    a failure is the cube word itself (the most metastable offender).
    """
    if f.m != c.m or f.n != c.n:
        raise InputError(
            f"specification is {f.m}->{f.n} bits, circuit is {c.m}->{c.n}")
    for digits in itertools.product((ZERO, ONE, META), repeat=c.m):
        iota = TernaryWord.from_digits(digits)
        allowed = f.value_cubeset(iota)
        for cube in outputs(c, iota, r, max_states):
            if not any(res_contains(a, cube) for a in allowed):
                return Verdict(False, iota, cube)
    return Verdict(True)


# ---------------------------------------------------------------------------
# Execution traces

@dataclass(frozen=True)
class TraceRound:
    """One table row: the state, then what was read, evaluated, written.

    The closing row of a trace records only the state it reached.
    """
    state: TernaryWord
    read: Optional[TernaryWord] = None
    evaluation: Optional[TernaryWord] = None
    written: Optional[TernaryWord] = None

    @property
    def is_full(self) -> bool:
        return self.read is not None


@dataclass(frozen=True)
class ExecutionTrace:
    rounds: tuple[TraceRound, ...]

    def __len__(self) -> int:
        return len(self.rounds)


def trace_check(c: Circuit, t: ExecutionTrace) -> bool:
    """True iff every recorded round obeys the circuit's semantics.

    Reads must be possible register outputs, evaluation is the DAG value
    of the read, the written word resolves the evaluation, and each next
    state is the read-determined input contents alongside the write.
    """
    if not t.rounds:
        raise InputError("empty trace")
    m, width = c.m, c.m + c.k + c.n
    non_out = c.input_regs + c.local_regs
    for i, row in enumerate(t.rounds):
        if len(row.state) != width:
            raise InputError(f"round {i}: state width {len(row.state)}")
        if not row.is_full:
            if i != len(t.rounds) - 1:
                raise InputError(f"round {i}: only the last round may omit "
                                 "the read/evaluation/write columns")
            continue
        if row.evaluation is None or row.written is None:
            raise InputError(f"round {i}: partial round record")
        if len(row.read) != c.m + c.k:
            raise InputError(f"round {i}: read width {len(row.read)}")
        if len(row.evaluation) != c.k + c.n or len(row.written) != c.k + c.n:
            raise InputError(f"round {i}: evaluation/write width")

        nxt_inputs = []
        ok = True
        for j, reg in enumerate(non_out):
            arcs = register_transitions(reg.rtype, row.state.digit(j))
            step = [nv for rv, nv in arcs if rv is row.read.digit(j)]
            if not step:
                ok = False
                break
            if j < m:
                nxt_inputs.append(step[0])
        if not ok:
            return False
        if eval_dag(c.dag, row.read) != row.evaluation:
            return False
        if not res_contains(row.evaluation, row.written):
            return False
        if i + 1 < len(t.rounds):
            want = TernaryWord.from_digits(nxt_inputs).concat(row.written)
            if t.rounds[i + 1].state != want:
                return False
    return True


def run_trace(c: Circuit, iota: TernaryWord, r: int) -> ExecutionTrace:
    """One deterministic execution: first read outcome, write = evaluation."""
    if len(iota) != c.m:
        raise InputError(f"input width {len(iota)}, circuit has {c.m} inputs")
    if r < 0:
        raise InputError("round count must be nonnegative")
    state = iota.concat(c.init_word())
    rows = []
    for _ in range(r):
        per = [register_transitions(reg.rtype, state.digit(i))[0]
               for i, reg in enumerate(c.input_regs + c.local_regs)]
        read = TernaryWord.from_digits(rv for rv, _ in per)
        evaluation = eval_dag(c.dag, read)
        rows.append(TraceRound(state, read, evaluation, evaluation))
        nxt = TernaryWord.from_digits(per[j][1] for j in range(c.m))
        state = nxt.concat(evaluation)
    rows.append(TraceRound(state))
    return ExecutionTrace(tuple(rows))


def emit_trace(t: ExecutionTrace) -> str:
    lines = []
    for i, row in enumerate(t.rounds):
        if row.is_full:
            lines.append(f"{i} | {row.state} | {row.read} | "
                         f"{row.evaluation} | {row.written}")
        else:
            lines.append(f"{i} | {row.state}")
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> ExecutionTrace:
    """Inverse of emit_trace; one `r | state | read | eval | write` per line."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) not in (2, 5):
            raise InputError(
                f"line {lineno}: expected `r | state` or "
                "`r | state | read | eval | write`")
        try:
            idx = int(parts[0])
        except ValueError:
            raise InputError(f"line {lineno}: bad round number {parts[0]!r}") \
                from None
        if idx != len(rows):
            raise InputError(f"line {lineno}: rounds must count up from 0")
        try:
            words = [TernaryWord.parse(p) for p in parts[1:]]
        except InputError as e:
            raise InputError(f"line {lineno}: {e}") from None
        if len(parts) == 2:
            rows.append(TraceRound(words[0]))
        else:
            rows.append(TraceRound(words[0], words[1], words[2], words[3]))
    if not rows:
        raise InputError("empty trace")
    return ExecutionTrace(tuple(rows))
