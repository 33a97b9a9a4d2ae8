"""Command-line front end: reports, artifacts, exit codes."""

import pytest

from conftest import FEEDBACK_TEXT
from mcsim.analysis import emit_spec_table, unroll
from mcsim.cli import main
from mcsim.components import (
    build_counter,
    build_mux,
    build_cmux_combinational,
    cmux_spec,
)
from mcsim.executor import outputs, parse_trace, state_cube_contains, trace_check
from mcsim.netlist import emit_netlist, parse_netlist, validate
from mcsim.ternary_core import word

AND_TABLE = "table m=2 n=1\n00 -> 0\n01 -> 0\n10 -> 0\n11 -> 1\n"

AND_CLOSURE_SPEC = """\
spec m=2 n=1
00 -> 0
01 -> 0
0M -> 0
10 -> 0
11 -> 1
1M -> *
M0 -> 0
M1 -> *
MM -> *
"""

BUF_NET = """\
circuit buf
input I simple
output O simple init 0
gate g BUF I
drive O g
"""

CONST_NET = """\
circuit always_zero
input I simple
output O simple init 0
gate g CONST0
drive O g
"""


def run(capsys, argv):
    rc = main(argv)
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


@pytest.fixture
def workspace(tmp_path):
    def save(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return save


@pytest.fixture
def fig4_path(workspace):
    return workspace("fig4.net", FEEDBACK_TEXT)


class TestSim:
    def test_frozen_report(self, capsys, fig4_path):
        rc, out, _ = run(capsys, ["sim", fig4_path, "MM", "2"])
        assert rc == 0
        assert out == ("command: sim\n"
                       "circuit: or_and_feedback\n"
                       "input: MM\n"
                       "rounds: 2\n"
                       "max states: 1000000\n"
                       "states[0]: MM11\n"
                       "states[1]: 1MMM, MMMM\n"
                       "states[2]: 1MMM, MMMM\n"
                       "outputs[1]: M\n"
                       "outputs[2]: M\n"
                       "peak state cubes: 2\n")

    def test_round_four_states_cover_the_replayed_state(self, capsys,
                                                        fig4_path):
        rc, out, _ = run(capsys, ["sim", fig4_path, "MM", "4"])
        assert rc == 0
        line = next(l for l in out.splitlines()
                    if l.startswith("states[4]:"))
        cubes = [word(t.strip())
                 for t in line.split(":", 1)[1].split(",")]
        assert any(state_cube_contains(2, c, word("1M11")) for c in cubes)

    def test_stable_input_gives_singleton_outputs(self, capsys, fig4_path):
        rc, out, _ = run(capsys, ["sim", fig4_path, "00", "3"])
        assert rc == 0
        for line in out.splitlines():
            if line.startswith("outputs["):
                assert "," not in line
                assert len(line.split(":", 1)[1].split()) == 1

    def test_trace_file_is_replayable(self, capsys, fig4_path, tmp_path):
        tp = tmp_path / "run.trace"
        rc, out, _ = run(capsys, ["sim", fig4_path, "MM", "4",
                                  "--trace", str(tp)])
        assert rc == 0
        assert f"trace written: {tp}" in out
        t = parse_trace(tp.read_text())
        assert len(t.rounds) == 5
        assert trace_check(parse_netlist(FEEDBACK_TEXT), t)

    def test_deterministic_bytes(self, capsys, fig4_path):
        _, first, _ = run(capsys, ["sim", fig4_path, "M0", "3"])
        _, again, _ = run(capsys, ["sim", fig4_path, "M0", "3"])
        assert first == again

    def test_twenty_meta_bits_exhaust_the_budget(self, capsys, workspace):
        lines = ["circuit wide"]
        lines += [f"input I{i} mask0" for i in range(20)]
        lines += ["output O simple init 0", "gate g OR I0 I1", "drive O g"]
        path = workspace("wide.net", "\n".join(lines) + "\n")
        rc, _, err = run(capsys, ["sim", path, "M" * 20, "1"])
        assert rc == 3
        assert "budget" in err

    def test_bad_word_is_an_input_error(self, capsys, fig4_path):
        rc, _, err = run(capsys, ["sim", fig4_path, "2M", "1"])
        assert rc == 2
        assert "error:" in err

    def test_missing_file_is_an_input_error(self, capsys, tmp_path):
        rc, _, err = run(capsys, ["sim", str(tmp_path / "nope.net"),
                                  "0", "1"])
        assert rc == 2
        assert "cannot read" in err

    def test_negative_rounds_rejected(self, capsys, fig4_path):
        rc, _, _ = run(capsys, ["sim", fig4_path, "MM", "-1"])
        assert rc == 2


class TestCheck:
    def test_containing_mux_passes(self, capsys, workspace):
        net = workspace("cmux.net", emit_netlist(build_cmux_combinational()))
        spec = workspace("cmux.spec", emit_spec_table(cmux_spec()))
        rc, out, _ = run(capsys, ["check", net, spec, "1"])
        assert rc == 0
        assert "verdict: yes" in out

    def test_plain_mux_fails_with_the_known_witness(self, capsys, workspace):
        net = workspace("mux.net", emit_netlist(build_mux()))
        spec = workspace("cmux.spec", emit_spec_table(cmux_spec()))
        rc, out, _ = run(capsys, ["check", net, spec, "1"])
        assert rc == 1
        assert "verdict: no" in out
        assert "witness input: 11M" in out
        assert "witness output: M" in out

    def test_arity_mismatch_is_an_input_error(self, capsys, workspace):
        net = workspace("mux.net", emit_netlist(build_mux()))
        one_bit = workspace("one.spec",
                            "spec m=1 n=1\n0 -> 0\n1 -> 1\nM -> M\n")
        rc, _, err = run(capsys, ["check", net, one_bit, "1"])
        assert rc == 2
        assert "error:" in err


class TestClosure:
    def test_and_table_closure_is_frozen(self, capsys, workspace):
        table = workspace("and.tab", AND_TABLE)
        rc, out, _ = run(capsys, ["closure", table])
        assert rc == 0
        assert out == AND_CLOSURE_SPEC

    def test_written_file_round_trips(self, capsys, workspace, tmp_path):
        table = workspace("and.tab", AND_TABLE)
        dest = tmp_path / "and.spec"
        rc, out, _ = run(capsys, ["closure", table, "-o", str(dest)])
        assert rc == 0
        assert f"written: {dest}" in out
        assert dest.read_text() == AND_CLOSURE_SPEC

    def test_malformed_table(self, capsys, workspace):
        table = workspace("bad.tab", "table m=2 n=1\n00 -> 0\n")
        rc, _, err = run(capsys, ["closure", table])
        assert rc == 2
        assert "error:" in err


class TestSynth:
    def test_round_trip_passes_check(self, capsys, workspace, tmp_path):
        table = workspace("and.tab", AND_TABLE)
        spec = str(tmp_path / "and.spec")
        net = str(tmp_path / "and.net")
        assert run(capsys, ["closure", table, "-o", spec])[0] == 0
        rc, out, _ = run(capsys, ["synth", spec, "-o", net])
        assert rc == 0
        assert "verdict: yes" in out
        rc, out, _ = run(capsys, ["check", net, spec, "1"])
        assert rc == 0

    def test_stdout_netlist_computes_the_table(self, capsys, workspace,
                                               tmp_path):
        table = workspace("and.tab", AND_TABLE)
        spec = str(tmp_path / "and.spec")
        run(capsys, ["closure", table, "-o", spec])
        rc, out, _ = run(capsys, ["synth", spec])
        assert rc == 0
        c = parse_netlist(out)
        assert validate(c) == []
        for text, want in (("00", "0"), ("01", "0"), ("10", "0"),
                           ("11", "1"), ("1M", "M"), ("0M", "0")):
            got = next(iter(outputs(c, word(text), 1)))
            assert got == word(want)

    def test_detector_has_no_natural_subfunction(self, capsys, workspace):
        from conftest import detector_spec
        spec = workspace("det.spec", emit_spec_table(detector_spec()))
        rc, out, _ = run(capsys, ["synth", spec])
        assert rc == 1
        assert "no natural subfunction" in out

    def test_general_spec_goes_through_the_subfunction_search(self, capsys,
                                                              workspace):
        spec = workspace("cmux.spec", emit_spec_table(cmux_spec()))
        rc, out, _ = run(capsys, ["synth", spec])
        assert rc == 0
        c = parse_netlist(out)
        from mcsim.executor import implements
        assert implements(c, 1, cmux_spec()).ok


class TestUnroll:
    def test_matches_the_library_construction(self, capsys, workspace):
        net = workspace("mux.net", emit_netlist(build_mux()))
        rc, out, _ = run(capsys, ["unroll", net, "2"])
        assert rc == 0
        assert parse_netlist(out) == unroll(build_mux(), 2)

    def test_masked_registers_are_rejected(self, capsys, fig4_path):
        rc, _, err = run(capsys, ["unroll", fig4_path, "2"])
        assert rc == 2
        assert "simple registers" in err


class TestWitness:
    def test_buffer_witness_is_a_valid_execution(self, capsys, workspace):
        net = workspace("buf.net", BUF_NET)
        rc, out, _ = run(capsys, ["witness", net, "0", "1", "1"])
        assert rc == 0
        t = parse_trace(out)
        assert trace_check(parse_netlist(BUF_NET), t)
        final = t.rounds[-1].state
        assert str(final)[-1] == "M"

    def test_written_file_and_report(self, capsys, workspace, tmp_path):
        net = workspace("buf.net", BUF_NET)
        dest = tmp_path / "buf.trace"
        rc, out, _ = run(capsys, ["witness", net, "0", "1", "1",
                                  "-o", str(dest)])
        assert rc == 0
        assert "verdict: witness" in out
        assert trace_check(parse_netlist(BUF_NET), parse_trace(
            dest.read_text()))

    def test_overlapping_outputs_mean_no_witness(self, capsys, workspace):
        net = workspace("c0.net", CONST_NET)
        rc, out, _ = run(capsys, ["witness", net, "0", "1", "1"])
        assert rc == 1
        assert "verdict: none" in out


ALL_COMPONENTS = [
    ("mux", []),
    ("cmux1", []),
    ("cmux-clocked", []),
    ("fanout-buffer", ["3"]),
    ("counter", ["3"]),
    ("selector", ["2"]),
    ("tc-to-brgc", ["2"]),
    ("two-sort", ["2"]),
    ("brgc-to-tc", ["2"]),
    ("sorting-network", ["4", "1"]),
]


class TestComponent:
    @pytest.mark.parametrize("name,params", ALL_COMPONENTS)
    def test_report_and_netlist_both_work(self, capsys, name, params):
        rc, out, _ = run(capsys, ["component", name, *params])
        assert rc == 0
        assert f"component: {name}" in out
        rc, out, _ = run(capsys, ["component", name, *params,
                                  "--emit", "netlist"])
        assert rc == 0
        assert validate(parse_netlist(out)) == []

    def test_netlist_matches_the_builder(self, capsys):
        rc, out, _ = run(capsys, ["component", "counter", "3",
                                  "--emit", "netlist"])
        assert rc == 0
        assert parse_netlist(out) == build_counter(3)

    def test_mux_report_carries_the_counterexample(self, capsys):
        rc, out, _ = run(capsys, ["component", "mux"])
        assert rc == 0
        assert "plain mux spec at round 1: yes" in out
        assert "containing mux spec at round 1: no" in out
        assert "witness input: 11M" in out

    def test_cmux_reports_pass(self, capsys):
        for name, rounds in (("cmux1", 1), ("cmux-clocked", 2)):
            rc, out, _ = run(capsys, ["component", name])
            assert rc == 0
            assert f"containing mux spec at round {rounds}: yes" in out

    def test_sorting_network_report_lists_layers(self, capsys):
        rc, out, _ = run(capsys, ["component", "sorting-network", "4", "1"])
        assert rc == 0
        assert "layers: 3" in out
        assert "layer[0]: (0,1) (2,3)" in out

    def test_unknown_name(self, capsys):
        rc, _, err = run(capsys, ["component", "frobnicator"])
        assert rc == 2
        assert "unknown component" in err

    def test_wrong_parameter_shapes(self, capsys):
        assert run(capsys, ["component", "mux", "3"])[0] == 2
        assert run(capsys, ["component", "two-sort"])[0] == 2
        assert run(capsys, ["component", "counter", "three"])[0] == 2
        assert run(capsys, ["component", "two-sort", "9"])[0] == 2


class TestPipeline:
    READINGS = ["1110000", "111M000", "1100000", "1111100"]

    def test_frozen_report(self, capsys):
        rc, out, _ = run(capsys, ["pipeline", *self.READINGS,
                                  "--faults", "1"])
        assert rc == 0
        assert out == ("command: pipeline\n"
                       "nodes: 4\n"
                       "faults: 1\n"
                       "readings: 1110000, 111M000, 1100000, 1111100\n"
                       "low: 0000111\n"
                       "high: 000M111\n")

    def test_netlist_emission(self, capsys):
        rc, out, _ = run(capsys, ["pipeline", *self.READINGS,
                                  "--faults", "1", "--emit", "netlist"])
        assert rc == 0
        c = parse_netlist(out)
        assert validate(c) == []
        assert c.m == 28 and c.n == 14

    def test_deterministic_bytes(self, capsys):
        _, first, _ = run(capsys, ["pipeline", *self.READINGS,
                                   "--faults", "1"])
        _, again, _ = run(capsys, ["pipeline", *self.READINGS,
                                   "--faults", "1"])
        assert first == again

    def test_too_many_faults(self, capsys):
        rc, _, err = run(capsys, ["pipeline", "100", "110", "000",
                                  "--faults", "1"])
        assert rc == 2
        assert "error:" in err

    def test_imprecise_reading_rejected(self, capsys):
        rc, _, err = run(capsys, ["pipeline", "MMM", "110", "000", "100",
                                  "--faults", "1"])
        assert rc == 2
        assert "error:" in err
