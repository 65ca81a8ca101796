"""DFA translation, minimization, text format, and run decomposition."""

import itertools

import pytest

from stoverify.automaton import (
    AcceptingRun,
    Dfa,
    ReachTriple,
    accepting_runs,
    build_decomposition,
    format_dfa_text,
    minimize,
    parse_dfa_text,
    run_triples,
    runs_by_proposition,
    translate,
)
from stoverify.errors import (
    AlphabetTooLargeError,
    DfaFormatError,
    RunTooShortError,
    UnknownPropositionError,
)
from stoverify.ltl import evaluate_word, negate_to_pnf, parse_formula

from conftest import fixture_path

PLANAR_NEGATION = "!((p0 & (G !p1 | G !p2)) | (p2 & G !p1))"


def _all_words(alphabet, max_len):
    for n in range(1, max_len + 1):
        yield from itertools.product(alphabet, repeat=n)


class TestTranslate:
    @pytest.mark.parametrize(
        "text,alphabet",
        [
            ("G !a", ["a", "b"]),
            ("F b", ["a", "b"]),
            ("a U b", ["a", "b", "c"]),
            ("!(a U b)", ["a", "b"]),
            ("(p0 & (G !p1 | G !p2)) | (p2 & G !p1)", ["p0", "p1", "p2", "p3"]),
            (PLANAR_NEGATION, ["p0", "p1", "p2", "p3"]),
            ("true", ["a"]),
            ("!true", ["a"]),
        ],
    )
    def test_language_equivalence(self, text, alphabet):
        f = parse_formula(text)
        dfa = translate(f, alphabet)
        for w in _all_words(alphabet, 4):
            assert dfa.accepts(w) == evaluate_word(f, w, alphabet=alphabet), w

    def test_states_renumbered_from_q0(self):
        dfa = translate(parse_formula("a U b"), ["a", "b"])
        assert dfa.states[0] == "q0"
        assert dfa.initial == frozenset({"q0"})
        assert list(dfa.states) == [f"q{i}" for i in range(len(dfa.states))]

    def test_minimal_size_for_until(self):
        # a U b over {a,b,c}: waiting / accepted / dead.
        dfa = translate(parse_formula("a U b"), ["a", "b", "c"])
        assert len(dfa.states) == 3

    def test_alphabet_cap(self):
        with pytest.raises(AlphabetTooLargeError):
            translate(parse_formula("a"), [f"p{i}" for i in range(17)])

    def test_empty_alphabet_rejected(self):
        with pytest.raises(UnknownPropositionError):
            translate(parse_formula("true"))

    def test_letter_outside_alphabet_rejected_at_accepts(self):
        dfa = translate(parse_formula("G a"), ["a", "b"])
        with pytest.raises(UnknownPropositionError):
            dfa.accepts(["a", "z"])


class TestMinimize:
    def test_merges_equivalent_states(self):
        # Two redundant accepting states that behave identically.
        dfa = Dfa(
            states=("s", "t", "u"),
            alphabet=("a",),
            initial=frozenset({"s"}),
            accepting=frozenset({"t", "u"}),
            delta={("s", "a"): "t", ("t", "a"): "u", ("u", "a"): "t"},
        )
        m = minimize(dfa)
        assert len(m.states) == 2
        for w in _all_words(["a"], 5):
            assert m.accepts(w) == dfa.accepts(w)

    def test_drops_unreachable(self):
        dfa = Dfa(
            states=("s", "dead", "x"),
            alphabet=("a",),
            initial=frozenset({"s"}),
            accepting=frozenset({"x"}),
            delta={("s", "a"): "s", ("dead", "a"): "x", ("x", "a"): "x"},
        )
        m = minimize(dfa)
        assert len(m.states) == 1


class TestTextFormat:
    def test_fixture_round_trip(self):
        text = open(fixture_path("negation_dfa.txt")).read()
        dfa = parse_dfa_text(text)
        again = parse_dfa_text(format_dfa_text(dfa))
        assert again.states == dfa.states
        assert again.delta == dfa.delta
        assert again.accepting == dfa.accepting

    def test_fixture_matches_translated_negation(self):
        dfa = parse_dfa_text(open(fixture_path("negation_dfa.txt")).read())
        f = parse_formula(PLANAR_NEGATION)
        alphabet = ["p0", "p1", "p2", "p3"]
        built = translate(f, alphabet)
        assert len(built.states) == len(dfa.states) == 5
        for w in _all_words(alphabet, 4):
            assert dfa.accepts(w) == built.accepts(w), w

    def test_totalization_adds_sink(self):
        dfa = parse_dfa_text(
            "states: a b\nalphabet: x y\ninitial: a\naccepting: b\ntrans: a x b\n"
        )
        assert len(dfa.states) == 3
        sink = dfa.delta[("a", "y")]
        assert sink not in dfa.accepting
        assert dfa.delta[(sink, "x")] == sink

    def test_nondeterminism_rejected(self):
        with pytest.raises(DfaFormatError, match="nondeterministic"):
            parse_dfa_text(
                "states: a b\ninitial: a\naccepting: b\n"
                "trans: a x a\ntrans: a x b\n"
            )

    def test_format_errors(self):
        for text in [
            "",  # no states
            "states: a\ninitial: a\naccepting: a\nbogus: 1\n",
            "states: a\ninitial: b\naccepting: a\ntrans: a x a\n",
            "states: a\ninitial: a\naccepting: a\ntrans: a x\n",
            "states: a\nnot a key-value line\n",
        ]:
            with pytest.raises(DfaFormatError):
                parse_dfa_text(text)

    def test_comments_and_blanks_ignored(self):
        dfa = parse_dfa_text(
            "# leading comment\n\nstates: a\nalphabet: x\n"
            "initial: a  # trailing\naccepting: a\ntrans: a x a\n"
        )
        assert dfa.accepts(["x"])


class TestRuns:
    def _planar(self):
        return parse_dfa_text(open(fixture_path("negation_dfa.txt")).read())

    def test_accepting_runs_planar(self):
        runs = accepting_runs(self._planar())
        assert [r.states for r in runs] == [
            ("q0", "q2"),
            ("q0", "q3", "q2"),
            ("q0", "q1", "q3", "q2"),
            ("q0", "q1", "q4", "q2"),
        ]
        by_states = {r.states: r for r in runs}
        assert by_states[("q0", "q2")].labels == (frozenset({"p1", "p3"}),)
        assert by_states[("q0", "q1", "q3", "q2")].labels == (
            frozenset({"p0"}),
            frozenset({"p2"}),
            frozenset({"p1"}),
        )

    def test_allow_revisits_grows_run_set(self):
        # Acyclic case: extra visit budget changes nothing.
        planar = self._planar()
        assert {r.states for r in accepting_runs(planar)} == {
            r.states for r in accepting_runs(planar, allow_revisits=2)
        }
        # Cyclic case: s0 <-> s1 with an exit to the accepting sink.
        cyclic = Dfa(
            states=("s0", "s1", "s2"),
            alphabet=("a", "b"),
            initial=frozenset({"s0"}),
            accepting=frozenset({"s2"}),
            delta={
                ("s0", "a"): "s1",
                ("s0", "b"): "s2",
                ("s1", "a"): "s0",
                ("s1", "b"): "s2",
                ("s2", "a"): "s2",
                ("s2", "b"): "s2",
            },
        )
        base = {r.states for r in accepting_runs(cyclic)}
        more = {r.states for r in accepting_runs(cyclic, allow_revisits=1)}
        assert base == {("s0", "s2"), ("s0", "s1", "s2")}
        assert more - base == {
            ("s0", "s1", "s0", "s2"),
            ("s0", "s1", "s0", "s1", "s2"),
        }
        for r in accepting_runs(cyclic, allow_revisits=1):
            assert all(a != b for a, b in zip(r.states, r.states[1:]))
            assert r.states[-1] == "s2"

    def test_run_triples_windows(self):
        run = AcceptingRun(
            ("q0", "q1", "q3", "q2"),
            (frozenset({"p0"}), frozenset({"p2"}), frozenset({"p1"})),
        )
        triples = run_triples(run)
        assert [t.states for t in triples] == [("q0", "q1", "q3"), ("q1", "q3", "q2")]
        assert triples[0].key() == (frozenset({"p0"}), frozenset({"p2"}))
        assert triples[1].key() == (frozenset({"p2"}), frozenset({"p1"}))

    def test_two_state_run_has_no_triples(self):
        run = AcceptingRun(("q0", "q2"), (frozenset({"p1"}),))
        assert run_triples(run) == ()

    def test_run_validation(self):
        with pytest.raises(RunTooShortError):
            AcceptingRun(("q0",), ())
        with pytest.raises(ValueError):
            AcceptingRun(("q0", "q0"), (frozenset({"a"}),))
        with pytest.raises(ValueError):
            AcceptingRun(("q0", "q1"), (frozenset(),))
        with pytest.raises(ValueError):
            ReachTriple(("a", "b", "c"), frozenset(), frozenset({"x"}))


class TestDecomposition:
    def test_planar_by_prop(self):
        dfa = parse_dfa_text(open(fixture_path("negation_dfa.txt")).read())
        dec = build_decomposition(dfa)
        starts = {
            p: sorted(c.run.states for c in dec.by_prop[p].chains)
            for p in dfa.alphabet
        }
        assert starts == {
            "p0": [("q0", "q1", "q3", "q2"), ("q0", "q1", "q4", "q2")],
            "p1": [("q0", "q2")],
            "p2": [("q0", "q3", "q2")],
            "p3": [("q0", "q2")],
        }
        assert not any(pd.immediate_violation for pd in dec.by_prop.values())
        # No initial self-loops here, so no entry triples.
        assert all(c.entry is None for pd in dec.by_prop.values() for c in pd.chains)
        # Five distinct reach tasks across the decomposition.
        keys = {(t.states, t.key()) for t in dec.all_triples()}
        assert len(keys) == 5
        assert {t.states for t in dec.all_triples()} == {
            ("q0", "q1", "q3"),
            ("q0", "q1", "q4"),
            ("q0", "q3", "q2"),
            ("q1", "q3", "q2"),
            ("q1", "q4", "q2"),
        }

    def test_entry_triple_when_initial_self_loops(self):
        dfa = translate(parse_formula("F b"), ["a", "b"])
        dec = build_decomposition(dfa)
        # Staying on a means waiting in the start region; entering run (q0,qacc)
        # needs the extra entry window (q0, q0, qacc) from region a to region b.
        pa = dec.by_prop["a"]
        assert len(pa.chains) == 1
        entry = pa.chains[0].entry
        assert entry is not None and entry.entry
        assert entry.states[0] == entry.states[1] == dfa.states[0] == "q0"
        assert entry.source_labels == frozenset({"a"})
        assert entry.target_labels == frozenset({"b"})
        assert pa.chains[0].all_triples() == (entry,)
        # Reading b immediately moves: plain chain, no entry triple.
        pb = dec.by_prop["b"]
        assert len(pb.chains) == 1 and pb.chains[0].entry is None

    def test_immediate_violation_flag(self):
        dfa = translate(parse_formula("G a"), ["a", "b"])
        dec = build_decomposition(dfa)
        assert dec.by_prop["a"].immediate_violation
        assert not dec.by_prop["b"].immediate_violation

    def test_decomposition_deterministic(self):
        dfa = parse_dfa_text(open(fixture_path("negation_dfa.txt")).read())
        a = build_decomposition(dfa)
        b = build_decomposition(dfa)
        assert [str(t) for t in a.all_triples()] == [str(t) for t in b.all_triples()]
        assert [r.states for r in a.runs] == [r.states for r in b.runs]
