"""Which specifications survive metastable inputs, and how to build them.

A function specification maps every ternary input word to a set of allowed
output words. Natural specifications (bit-wise, closed, specific) are the
ones simple-register circuits can realize in one round; the metastable
closure produces the tightest natural extension of a Boolean function, and
the prime-implicant construction turns any natural specification into a
circuit. Pivotal sequences and the witness search demonstrate the converse:
between inputs with disjoint output sets, metastability must appear.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Optional

from .executor import ExecutionTrace, TraceRound, outputs, read_outcomes
from .netlist import (
    Circuit,
    Gate,
    ParseError,
    RegisterDecl,
    RegType,
    Role,
    eval_dag,
    make_circuit,
)
from .ternary_core import (
    DEFAULT_MAX_META_BITS,
    DEFAULT_MAX_STATES,
    META,
    ONE,
    ZERO,
    BudgetError,
    CubeSet,
    InputError,
    TernaryWord,
    res_contains,
    res_full,
    res_members,
    words_compatible,
)


def _words(m: int):
    for digits in itertools.product((ZERO, ONE, META), repeat=m):
        yield TernaryWord.from_digits(digits)


def _stable(m: int):
    for digits in itertools.product((ZERO, ONE), repeat=m):
        yield TernaryWord.from_digits(digits)


@dataclass(frozen=True)
class FunctionSpec:
    """A specification: every m-digit input word gets a set of allowed outputs.

    Natural form keeps one entry word per input; digit 0 or 1 pins that
    output bit, digit M leaves it completely unconstrained (printed as *
    in table files). General form keeps an arbitrary nonempty cube set
    per input. Build instances with natural_spec/general_spec.
    """
    m: int
    n: int
    entries: Optional[dict] = None
    values: Optional[dict] = None

    @property
    def is_natural_form(self) -> bool:
        return self.entries is not None

    def entry(self, x: TernaryWord) -> TernaryWord:
        if self.entries is None:
            raise InputError("not a natural-form specification")
        return self.entries[x]

    def value_cubeset(self, x: TernaryWord) -> CubeSet:
        if self.entries is not None:
            return CubeSet.of(self.n, [self.entries[x]])
        return self.values[x]


def natural_spec(m: int, n: int,
                 entries: Mapping[TernaryWord, TernaryWord]) -> FunctionSpec:
    table = {}
    for x in _words(m):
        e = entries.get(x)
        if e is None:
            raise InputError(f"specification misses input {x}")
        if len(e) != n:
            raise InputError(f"entry for {x} has width {len(e)}, expected {n}")
        table[x] = e
    if len(entries) != len(table):
        raise InputError("specification has inputs of the wrong width")
    return FunctionSpec(m, n, entries=table)


def general_spec(m: int, n: int,
                 values: Mapping[TernaryWord, CubeSet]) -> FunctionSpec:
    table = {}
    for x in _words(m):
        v = values.get(x)
        if v is None:
            raise InputError(f"specification misses input {x}")
        if v.width != n or len(v) == 0:
            raise InputError(f"value for {x} must be a nonempty set of "
                             f"{n}-digit cubes")
        table[x] = v
    if len(values) != len(table):
        raise InputError("specification has inputs of the wrong width")
    return FunctionSpec(m, n, values=table)


# ---------------------------------------------------------------------------
# Metastable closure and the natural-function tests

def _check_bool_table(table: Mapping[TernaryWord, TernaryWord]):
    if not table:
        raise InputError("empty truth table")
    m = len(next(iter(table)))
    n = None
    for x, y in table.items():
        if not x.is_stable or len(x) != m:
            raise InputError(f"truth-table input {x} must be stable, width {m}")
        if not y.is_stable or (n is not None and len(y) != n):
            raise InputError(f"truth-table output {y} must be stable")
        n = len(y)
    if len(table) != 1 << m:
        raise InputError(f"truth table needs all {1 << m} input rows")
    return m, n


def closure_bool(table: Mapping[TernaryWord, TernaryWord]) -> FunctionSpec:
    """Tightest natural extension of a Boolean function.

    Output bit i is pinned wherever all full resolutions of the input
    agree on it, and unconstrained otherwise.
    """
    m, n = _check_bool_table(table)
    entries = {}
    for x in _words(m):
        resolved = [table[y] for y in res_full(x)]
        digits = []
        for i in range(n):
            seen = {w.digit(i) for w in resolved}
            digits.append(seen.pop() if len(seen) == 1 else META)
        entries[x] = TernaryWord.from_digits(digits)
    return FunctionSpec(m, n, entries=entries)


def closure_general(f: FunctionSpec,
                    max_meta_bits: int = DEFAULT_MAX_META_BITS) -> FunctionSpec:
    """Closure of an arbitrary specification, quantified over all partial
    resolutions: a bit stays pinned to b only if every partial resolution
    allows exactly b there."""
    entries = {}
    for x in _words(f.m):
        digits = []
        for i in range(f.n):
            seen = set()
            for x2 in res_members(x, max_meta_bits):
                for cube in f.value_cubeset(x2):
                    seen.add(cube.digit(i))
                    if len(seen) > 1 or META in seen:
                        break
                else:
                    continue
                break
            digits.append(seen.pop() if len(seen) == 1 else META)
        entries[x] = TernaryWord.from_digits(digits)
    return FunctionSpec(f.m, f.n, entries=entries)


def _cube_form(v: CubeSet) -> Optional[TernaryWord]:
    """The single cube a value set equals, or None if it is not a cube."""
    digits = []
    for i in range(v.width):
        seen = {c.digit(i) for c in v}
        digits.append(seen.pop() if len(seen) == 1 and META not in seen
                      else META)
    e = TernaryWord.from_digits(digits)
    # every member cube sits inside e by construction; equality holds
    # exactly when e itself is an allowed member
    return e if any(res_contains(c, e) for c in v) else None


def _entry_view(f: FunctionSpec) -> Optional[dict]:
    """Entry words for f if every value set is a cube, else None."""
    if f.entries is not None:
        return f.entries
    view = {}
    for x, v in f.values.items():
        e = _cube_form(v)
        if e is None:
            return None
        view[x] = e
    return view


def is_natural(f: FunctionSpec) -> bool:
    """Bit-wise, closed, and specific: every value set is a single cube,
    and stabilizing any input only shrinks the value set."""
    view = _entry_view(f)
    if view is None:
        return False
    for x, e in view.items():
        if x.is_stable:
            continue
        if any(not res_contains(e, view[y]) for y in res_full(x)):
            return False
    return True


# ---------------------------------------------------------------------------
# Natural subfunctions (the implementability test)

def find_natural_subfunction(g: FunctionSpec,
                             max_nodes: int = DEFAULT_MAX_STATES,
                             ) -> Optional[FunctionSpec]:
    """A natural specification inside g, or None if no such thing exists.

    Searches one Boolean output word per stable input (larger entries at
    stable inputs never help); each metastable input is then forced to
    the bit-wise join of its resolutions' choices, which must still fit
    inside g. Backtracks over the stable choices, tightest first.
    """
    if g.m > 8:
        raise InputError("natural-subfunction search is capped at 8 inputs")
    m, n = g.m, g.n
    ys = list(_stable(m))
    candidates = {}
    for y in ys:
        val = g.value_cubeset(y)
        cands = [e for e in _stable(n)
                 if any(res_contains(c, e) for c in val)]
        if not cands:
            return None
        candidates[y] = cands

    # per metastable input: allowed cubes, join-so-far bit masks, count left
    class Req:
        __slots__ = ("cubes", "zeros", "ones", "left")

        def __init__(self, x):
            self.cubes = [tuple(c.digits()) for c in g.value_cubeset(x)]
            self.zeros = 0
            self.ones = 0
            self.left = 0

        def feasible(self):
            for cube in self.cubes:
                for i, d in enumerate(cube):
                    if d is META:
                        continue
                    if (d is ZERO and self.ones >> i & 1) or \
                       (d is ONE and self.zeros >> i & 1):
                        break
                else:
                    return True
            return False

    reqs = {}
    touched = {y: [] for y in ys}
    for x in _words(m):
        if x.is_stable:
            continue
        req = Req(x)
        for y in res_full(x):
            touched[y].append(req)
            req.left += 1
        reqs[x] = req

    chosen = {}
    nodes = 0

    def assign(idx: int) -> bool:
        nonlocal nodes
        if idx == len(ys):
            return True
        y = ys[idx]
        for e in candidates[y]:
            nodes += 1
            if nodes > max_nodes:
                raise BudgetError("subfunction search budget exceeded; "
                                  "raise the max-states cap")
            undo = []
            ok = True
            for req in touched[y]:
                undo.append((req, req.zeros, req.ones))
                for i, d in enumerate(e.digits()):
                    if d is ONE:
                        req.ones |= 1 << i
                    else:
                        req.zeros |= 1 << i
                req.left -= 1
                if not req.feasible():
                    ok = False
                    break
            if ok:
                chosen[y] = e
                if assign(idx + 1):
                    return True
                del chosen[y]
            for req, zeros, ones in undo:
                req.zeros, req.ones = zeros, ones
                req.left += 1
        return False

    if not assign(0):
        return None
    entries = dict(chosen)
    for x, req in reqs.items():
        digits = [META if (req.zeros >> i & 1) and (req.ones >> i & 1)
                  else (ONE if req.ones >> i & 1 else ZERO)
                  for i in range(n)]
        entries[x] = TernaryWord.from_digits(digits)
    return FunctionSpec(m, n, entries=entries)


# ---------------------------------------------------------------------------
# Prime implicants and circuit synthesis

# Synthesis hits the same single-bit tables over and over; prime
# implicants are a pure function of the minterm set, so memoize.
_PI_MEMO: dict = {}


def prime_implicants(table: Mapping[TernaryWord, object]) -> tuple[TernaryWord, ...]:
    """All prime implicants of a single-output Boolean table.

    Implicants are cube words: M digits are unconstrained. Iteratively
    merges cubes differing in one pinned digit; whatever never merges is
    prime.
    """
    if not table:
        raise InputError("empty truth table")
    m = len(next(iter(table)))
    if m > 10:
        raise InputError("prime implicants are capped at 10 inputs")
    minterms = set()
    for x, bit in table.items():
        if not x.is_stable or len(x) != m:
            raise InputError(f"truth-table input {x} must be stable, width {m}")
        if bit not in (0, 1, ZERO, ONE):
            raise InputError(f"truth-table value for {x} must be 0 or 1")
        if bit in (1, ONE):
            minterms.add(x)
    if len(table) != 1 << m:
        raise InputError(f"truth table needs all {1 << m} input rows")

    key = (m, frozenset(minterms))
    hit = _PI_MEMO.get(key)
    if hit is not None:
        return hit

    prime = set()
    current = minterms
    while current:
        groups: dict[tuple, dict[int, set]] = {}
        for c in current:
            ones = sum(1 for d in c.digits() if d is ONE)
            groups.setdefault(c.meta_positions(), {}).setdefault(ones, set()).add(c)
        merged_away = set()
        nxt = set()
        for by_ones in groups.values():
            for ones, cubes in by_ones.items():
                uppers = by_ones.get(ones + 1, ())
                for c in cubes:
                    for i in range(m):
                        if c.digit(i) is ZERO:
                            up = c.with_digit(i, ONE)
                            if up in uppers:
                                nxt.add(c.with_digit(i, META))
                                merged_away.add(c)
                                merged_away.add(up)
        prime |= current - merged_away
        current = nxt
    result = tuple(sorted(prime))
    _PI_MEMO[key] = result
    return result


def synthesize(h: FunctionSpec) -> Circuit:
    """A circuit whose single round realizes the natural specification h.

    Per output bit: take the Boolean restriction (entry 1 means 1, entry
    0 or unconstrained means 0) and build one AND gate per prime
    implicant, all feeding one OR. Keeping every prime implicant is what
    contains metastability: any input whose stable resolutions agree is
    covered by some all-stable implicant term.
    """
    if not is_natural(h):
        raise InputError("specification is not natural")
    entries = _entry_view(h)
    m, n = h.m, h.n
    regs = [RegisterDecl(f"x{j}", Role.INPUT, RegType.SIMPLE)
            for j in range(m)]
    regs += [RegisterDecl(f"y{i}", Role.OUTPUT, RegType.SIMPLE, ZERO)
             for i in range(n)]
    gates: list[Gate] = []
    drives: dict[str, str] = {}
    nots: dict[int, str] = {}

    def negated(j: int) -> str:
        gid = nots.get(j)
        if gid is None:
            gid = f"not_x{j}"
            nots[j] = gid
            gates.append(Gate(gid, "NOT", (f"x{j}",)))
        return gid

    for i in range(n):
        table = {y: 1 if entries[y].digit(i) is ONE else 0 for y in _stable(m)}
        pis = prime_implicants(table)
        if not pis:
            gates.append(Gate(f"y{i}_zero", "CONST0", ()))
            drives[f"y{i}"] = f"y{i}_zero"
            continue
        if len(pis) == 1 and pis[0].meta_count() == m:
            gates.append(Gate(f"y{i}_one", "CONST1", ()))
            drives[f"y{i}"] = f"y{i}_one"
            continue
        terms = []
        for p, pi in enumerate(pis):
            lits = [f"x{j}" if pi.digit(j) is ONE else negated(j)
                    for j in range(m) if pi.digit(j) is not META]
            if len(lits) == 1:
                terms.append(lits[0])
            else:
                gid = f"y{i}_t{p}"
                gates.append(Gate(gid, "AND", tuple(lits)))
                terms.append(gid)
        if len(terms) == 1:
            drives[f"y{i}"] = terms[0]
        else:
            gid = f"y{i}_or"
            gates.append(Gate(gid, "OR", tuple(terms)))
            drives[f"y{i}"] = gid
    return make_circuit(f"synth_{m}x{n}", regs, gates, drives)


# ---------------------------------------------------------------------------
# Unrolling

def unroll(c: Circuit, r: int) -> Circuit:
    """One circuit whose single round behaves like r rounds of c.

    Chains r copies of the DAG: input registers feed every copy, local
    register seams become BUF gates, and each copy's early output values
    end in BUF sinks that nothing reads. Only simple registers allowed;
    a masked read could change between the rounds being collapsed.
    """
    if r < 1:
        raise InputError("unroll needs at least one round")
    if any(reg.rtype is not RegType.SIMPLE for reg in c.registers):
        raise InputError("unrolling requires simple registers only")
    drive = dict(c.dag.outputs)
    input_names = {reg.name for reg in c.input_regs}
    local_names = {reg.name for reg in c.local_regs}

    def resolve(t: int, src: str) -> str:
        if src in input_names:
            return src
        if src in local_names:
            return src if t == 1 else f"{src}__u{t}"
        return f"{src}__u{t}"

    gates: list[Gate] = []
    for t in range(1, r + 1):
        if t > 1:
            for name in local_names:
                gates.append(Gate(f"{name}__u{t}", "BUF",
                                  (resolve(t - 1, drive[name]),)))
        for g in c.dag.gates:
            gates.append(Gate(f"{g.gid}__u{t}", g.kind,
                              tuple(resolve(t, a) for a in g.args), g.table))
        if t < r:
            for reg in c.output_regs:
                gates.append(Gate(f"{reg.name}__sink__u{t}", "BUF",
                                  (resolve(t, drive[reg.name]),)))
    drives = {reg.name: resolve(r, drive[reg.name])
              for reg in c.local_regs + c.output_regs}
    return make_circuit(f"{c.name}__x{r}", c.registers, gates, drives)


# ---------------------------------------------------------------------------
# Pivotal sequences and metastability witnesses

@dataclass(frozen=True)
class PivotalSequence:
    """Words stepping between two inputs one bit at a time, through M."""
    words: tuple[TernaryWord, ...]

    def __post_init__(self):
        if not self.words:
            raise InputError("empty pivotal sequence")
        for a, b in zip(self.words, self.words[1:]):
            diff = [i for i in range(len(a)) if a.digit(i) is not b.digit(i)]
            if len(diff) != 1:
                raise InputError(f"{a} -> {b}: must differ in exactly one bit")
            i = diff[0]
            if a.digit(i) is not META and b.digit(i) is not META:
                raise InputError(f"{a} -> {b}: the changing bit must pass "
                                 "through M")

    def __iter__(self):
        return iter(self.words)

    def __len__(self):
        return len(self.words)


def pivotal_sequence(x: TernaryWord, x2: TernaryWord) -> PivotalSequence:
    """A pivotal sequence from x to x2, least significant bits first."""
    if len(x) != len(x2):
        raise InputError("pivotal endpoints must have equal width")
    words = [x]
    cur = x
    for i in range(len(x) - 1, -1, -1):
        a, b = cur.digit(i), x2.digit(i)
        if a is b:
            continue
        if a is not META and b is not META:
            cur = cur.with_digit(i, META)
            words.append(cur)
        cur = cur.with_digit(i, b)
        words.append(cur)
    return PivotalSequence(tuple(words))


def metastable_witness(c: Circuit, r: int,
                       iota: TernaryWord, iota2: TernaryWord,
                       max_states: Optional[int] = DEFAULT_MAX_STATES,
                       ) -> Optional[ExecutionTrace]:
    """An r-round execution ending with a metastable output bit, reached
    from some input between iota and iota2 on a pivotal sequence.

    Returns None when the two output sets overlap (then no input between
    them is forced into metastability). Otherwise walks the pivotal
    sequence until some input's round-r output set shows a metastable
    bit, then extracts a trace for it. Writing back the evaluation
    unchanged dominates every other write choice, so the trace search
    branches over read outcomes only.
    """
    a = outputs(c, iota, r, max_states)
    b = outputs(c, iota2, r, max_states)
    if any(words_compatible(u, v) for u in a for v in b):
        return None

    width = c.m + c.k + c.n
    out_lo = width - c.n
    left = [max_states if max_states is not None else 0]
    failed: set[tuple[TernaryWord, int]] = set()

    def spend(k: int):
        if max_states is None:
            return
        left[0] -= k
        if left[0] < 0:
            raise BudgetError("witness search budget exceeded; "
                              "raise the max-states cap")

    def dfs(state: TernaryWord, remaining: int):
        if remaining == 0:
            if any(state.digit(i) is META for i in range(out_lo, width)):
                return [TraceRound(state)]
            return None
        if (state, remaining) in failed:
            return None
        outcomes = read_outcomes(c, state)
        spend(len(outcomes))
        for read, nxt in outcomes:
            ev = eval_dag(c.dag, read)
            tail = dfs(nxt.concat(ev), remaining - 1)
            if tail is not None:
                return [TraceRound(state, read, ev, ev)] + tail
        failed.add((state, remaining))
        return None

    for p in pivotal_sequence(iota, iota2):
        outs = outputs(c, p, r, max_states)
        if not any(cube.meta_count() for cube in outs):
            continue
        rows = dfs(p.concat(c.init_word()), r)
        if rows is None:
            raise RuntimeError("reach set shows a metastable output but no "
                               "execution realizes it; this cannot happen")
        return ExecutionTrace(tuple(rows))
    raise RuntimeError("disjoint outputs but no pivotal metastability; "
                       "this cannot happen for exact reach sets")


# ---------------------------------------------------------------------------
# Table files

def parse_spec_table(text: str) -> FunctionSpec:
    """Read a specification table.

    Header `spec m=<m> n=<n>`, then one `<input> -> <rhs>` line per input
    word. A rhs with * digits is a natural entry; cubes separated by
    commas (or containing M) form a general value; the two styles cannot
    be mixed in one file.
    """
    header = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            tok = line.split()
            if len(tok) != 3 or tok[0] != "spec" \
                    or not tok[1].startswith("m=") or not tok[2].startswith("n="):
                raise ParseError(lineno, "expected header: spec m=<m> n=<n>")
            try:
                header = (int(tok[1][2:]), int(tok[2][2:]))
            except ValueError:
                raise ParseError(lineno, "bad arity in header") from None
            continue
        if "->" not in line:
            raise ParseError(lineno, "expected: <input> -> <outputs>")
        lhs, rhs = (s.strip() for s in line.split("->", 1))
        rows.append((lineno, lhs, rhs))
    if header is None:
        raise ParseError(1, "missing spec header")
    m, n = header

    natural = any("*" in rhs for _, _, rhs in rows)
    general = any("M" in rhs or "," in rhs for _, _, rhs in rows)
    if natural and general:
        raise InputError("table mixes natural (*) and general (M or ,) rows")

    entries: dict = {}
    values: dict = {}
    for lineno, lhs, rhs in rows:
        try:
            x = TernaryWord.parse(lhs)
        except InputError as e:
            raise ParseError(lineno, str(e)) from None
        if x in entries or x in values:
            raise ParseError(lineno, f"input {x} listed twice")
        try:
            if general:
                cubes = [TernaryWord.parse(tok.strip())
                         for tok in rhs.split(",")]
                values[x] = CubeSet.of(n, cubes)
            else:
                entries[x] = TernaryWord.parse(rhs.replace("*", "M"))
        except InputError as e:
            raise ParseError(lineno, str(e)) from None
    if general:
        return general_spec(m, n, values)
    return natural_spec(m, n, entries)


def emit_spec_table(f: FunctionSpec) -> str:
    lines = [f"spec m={f.m} n={f.n}"]
    for x in _words(f.m):
        if f.is_natural_form:
            rhs = str(f.entries[x]).replace("M", "*")
        else:
            rhs = ", ".join(str(c) for c in f.values[x])
        lines.append(f"{x} -> {rhs}")
    return "\n".join(lines) + "\n"


def parse_truth_table(text: str) -> dict[TernaryWord, TernaryWord]:
    """Read a Boolean truth table: header `table m=<m> n=<n>`, then all
    2^m lines `<input> -> <output>` over stable words."""
    header = None
    table: dict[TernaryWord, TernaryWord] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            tok = line.split()
            if len(tok) != 3 or tok[0] != "table" \
                    or not tok[1].startswith("m=") or not tok[2].startswith("n="):
                raise ParseError(lineno, "expected header: table m=<m> n=<n>")
            try:
                header = (int(tok[1][2:]), int(tok[2][2:]))
            except ValueError:
                raise ParseError(lineno, "bad arity in header") from None
            continue
        if "->" not in line:
            raise ParseError(lineno, "expected: <input> -> <output>")
        lhs, rhs = (s.strip() for s in line.split("->", 1))
        try:
            x, y = TernaryWord.parse(lhs), TernaryWord.parse(rhs)
        except InputError as e:
            raise ParseError(lineno, str(e)) from None
        if not x.is_stable or not y.is_stable:
            raise ParseError(lineno, "truth tables are stable words only")
        if len(x) != header[0] or len(y) != header[1]:
            raise ParseError(lineno, "row width disagrees with header")
        if x in table:
            raise ParseError(lineno, f"input {x} listed twice")
        table[x] = y
    if header is None:
        raise ParseError(1, "missing table header")
    if len(table) != 1 << header[0]:
        raise InputError(f"truth table needs all {1 << header[0]} input rows")
    return table


def emit_truth_table(table: Mapping[TernaryWord, TernaryWord]) -> str:
    m, n = _check_bool_table(table)
    lines = [f"table m={m} n={n}"]
    for x in _stable(m):
        lines.append(f"{x} -> {table[x]}")
    return "\n".join(lines) + "\n"
