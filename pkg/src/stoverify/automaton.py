"""Deterministic finite automata over proposition alphabets.

Formulas are translated by progression: a state is the canonical DNF of the
obligation left after the consumed prefix, a state is accepting when its
obligation is vacuously true at end of word (every unit in some clause is an
Always), and the result is Hopcroft-minimized and renamed q0.. in BFS order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import (
    AlphabetTooLargeError,
    DfaFormatError,
    RunTooShortError,
    UnknownPropositionError,
)
from .ltl import (
    FALSE,
    TRUE,
    Always,
    And,
    Atom,
    Eventually,
    Formula,
    Not,
    Or,
    TrueF,
    Until,
    atoms,
    nnf,
)

SINK = "qsink"


@dataclass
class Dfa:
    """Total deterministic automaton; transitions keyed by (state, letter)."""

    states: Tuple[str, ...]
    alphabet: Tuple[str, ...]
    initial: FrozenSet[str]
    accepting: FrozenSet[str]
    delta: Dict[Tuple[str, str], str]

    def __post_init__(self):
        states = set(self.states)
        if not self.initial or not self.initial <= states:
            raise DfaFormatError("initial states must be a nonempty subset of states")
        if not self.accepting <= states:
            raise DfaFormatError("accepting states must be a subset of states")
        for (q, a), q2 in self.delta.items():
            if q not in states or q2 not in states:
                raise DfaFormatError(f"transition {q} -{a}-> {q2} uses unknown state")
            if a not in self.alphabet:
                raise DfaFormatError(f"transition letter {a!r} outside alphabet")
        for q in self.states:
            for a in self.alphabet:
                if (q, a) not in self.delta:
                    raise DfaFormatError(f"missing transition from {q} on {a}")

    def accepts(self, word: Sequence[str]) -> bool:
        for letter in word:
            if letter not in self.alphabet:
                raise UnknownPropositionError(f"letter {letter!r} outside alphabet")
        for q0 in self.initial:
            q = q0
            for letter in word:
                q = self.delta[(q, letter)]
            if q in self.accepting:
                return True
        return False

    def edge_labels(self, q: str, q2: str) -> FrozenSet[str]:
        return frozenset(a for a in self.alphabet if self.delta[(q, a)] == q2)

    def successors(self, q: str) -> List[str]:
        return sorted({self.delta[(q, a)] for a in self.alphabet})


# -- formula translation -------------------------------------------------------

def _mk_and(a: Formula, b: Formula) -> Formula:
    if a == FALSE or b == FALSE:
        return FALSE
    if a == TRUE:
        return b
    if b == TRUE:
        return a
    return And(a, b)


def _mk_or(a: Formula, b: Formula) -> Formula:
    if a == TRUE or b == TRUE:
        return TRUE
    if a == FALSE:
        return b
    if b == FALSE:
        return a
    return Or(a, b)


def _prog(f: Formula, letter: str) -> Formula:
    """Obligation on the rest of the word after consuming one letter."""
    if isinstance(f, TrueF):
        return TRUE
    if isinstance(f, Atom):
        return TRUE if letter == f.name else FALSE
    if isinstance(f, Not):
        inner = _prog(f.child, letter)
        if inner == TRUE:
            return FALSE
        if inner == FALSE:
            return TRUE
        raise ValueError("progression requires negation normal form")
    if isinstance(f, And):
        return _mk_and(_prog(f.left, letter), _prog(f.right, letter))
    if isinstance(f, Or):
        return _mk_or(_prog(f.left, letter), _prog(f.right, letter))
    if isinstance(f, Always):
        return _mk_and(_prog(f.child, letter), f)
    if isinstance(f, Eventually):
        return _mk_or(_prog(f.child, letter), f)
    return _mk_or(_prog(f.right, letter), _mk_and(_prog(f.left, letter), f))


def _dnf(f: Formula) -> FrozenSet[FrozenSet[Formula]]:
    if f == TRUE:
        return frozenset({frozenset()})
    if f == FALSE:
        return frozenset()
    if isinstance(f, And):
        left, right = _dnf(f.left), _dnf(f.right)
        return frozenset(c1 | c2 for c1 in left for c2 in right)
    if isinstance(f, Or):
        return _dnf(f.left) | _dnf(f.right)
    return frozenset({frozenset({f})})


def _absorb(clauses: Iterable[FrozenSet[Formula]]) -> FrozenSet[FrozenSet[Formula]]:
    kept: List[FrozenSet[Formula]] = []
    for c in sorted(set(clauses), key=lambda c: (len(c), sorted(map(str, c)))):
        if not any(k <= c for k in kept):
            kept.append(c)
    return frozenset(kept)


def _progress_state(state, letter: str):
    out = set()
    for clause in state:
        acc = {frozenset()}
        for unit in clause:
            d = _dnf(_prog(unit, letter))
            acc = {c1 | c2 for c1 in acc for c2 in d}
            if not acc:
                break
        out |= acc
    return _absorb(out)


def _state_accepting(state) -> bool:
    return any(all(isinstance(u, Always) for u in clause) for clause in state)


def translate(
    f: Formula, alphabet: Optional[Iterable[str]] = None, max_alphabet: int = 16
) -> Dfa:
    """DFA accepting exactly the nonempty finite words satisfying f."""
    letters = tuple(sorted(set(alphabet))) if alphabet is not None else tuple(
        sorted(atoms(f))
    )
    if not letters:
        raise UnknownPropositionError("alphabet must contain at least one proposition")
    if len(letters) > max_alphabet:
        raise AlphabetTooLargeError(
            f"alphabet of size {len(letters)} exceeds cap {max_alphabet}"
        )
    start = _absorb(_dnf(nnf(f)))
    names = {start: "q0"}
    order = [start]
    delta: Dict[Tuple[str, str], str] = {}
    frontier = [start]
    while frontier:
        state = frontier.pop(0)
        for a in letters:
            nxt = _progress_state(state, a)
            if nxt not in names:
                names[nxt] = f"q{len(names)}"
                order.append(nxt)
                frontier.append(nxt)
            delta[(names[state], a)] = names[nxt]
    dfa = Dfa(
        states=tuple(names[s] for s in order),
        alphabet=letters,
        initial=frozenset({"q0"}),
        accepting=frozenset(names[s] for s in order if _state_accepting(s)),
        delta=delta,
    )
    return renumber(minimize(dfa))


# -- minimization ----------------------------------------------------------------

def _reachable(dfa: Dfa) -> List[str]:
    seen = []
    seen_set = set()
    frontier = sorted(dfa.initial)
    while frontier:
        q = frontier.pop(0)
        if q in seen_set:
            continue
        seen.append(q)
        seen_set.add(q)
        for a in dfa.alphabet:
            q2 = dfa.delta[(q, a)]
            if q2 not in seen_set:
                frontier.append(q2)
    return seen


def minimize(dfa: Dfa) -> Dfa:
    """Hopcroft partition refinement on the reachable part."""
    states = _reachable(dfa)
    state_set = set(states)
    acc = frozenset(q for q in states if q in dfa.accepting)
    rej = frozenset(q for q in states if q not in dfa.accepting)
    partition = [p for p in (acc, rej) if p]
    work = list(partition)
    inverse: Dict[Tuple[str, str], set] = {}
    for q in states:
        for a in dfa.alphabet:
            q2 = dfa.delta[(q, a)]
            if q2 in state_set:
                inverse.setdefault((q2, a), set()).add(q)
    while work:
        splitter = work.pop()
        for a in dfa.alphabet:
            x = set()
            for q in splitter:
                x |= inverse.get((q, a), set())
            if not x:
                continue
            next_partition = []
            for block in partition:
                inter = block & x
                rest = block - x
                if inter and rest:
                    next_partition.extend([frozenset(inter), frozenset(rest)])
                    if block in work:
                        work.remove(block)
                        work.extend([frozenset(inter), frozenset(rest)])
                    else:
                        work.append(
                            frozenset(inter) if len(inter) <= len(rest) else frozenset(rest)
                        )
                else:
                    next_partition.append(block)
            partition = next_partition
    cls = {}
    for block in partition:
        rep = min(block)
        for q in block:
            cls[q] = rep
    reps = sorted({cls[q] for q in states})
    delta = {}
    for rep in reps:
        for a in dfa.alphabet:
            delta[(rep, a)] = cls[dfa.delta[(rep, a)]]
    return Dfa(
        states=tuple(reps),
        alphabet=dfa.alphabet,
        initial=frozenset(cls[q] for q in dfa.initial),
        accepting=frozenset(cls[q] for q in states if q in dfa.accepting),
        delta=delta,
    )


def renumber(dfa: Dfa) -> Dfa:
    """Rename states q0, q1, ... in BFS order from the initial states."""
    order = _reachable(dfa)
    names = {q: f"q{i}" for i, q in enumerate(order)}
    return Dfa(
        states=tuple(names[q] for q in order),
        alphabet=dfa.alphabet,
        initial=frozenset(names[q] for q in dfa.initial),
        accepting=frozenset(names[q] for q in order if q in dfa.accepting),
        delta={(names[q], a): names[dfa.delta[(q, a)]] for q in order for a in dfa.alphabet},
    )


# -- text format ------------------------------------------------------------------

def parse_dfa_text(text: str) -> Dfa:
    """Parse the line format: states/alphabet/initial/accepting/trans lines.

    Missing transitions are totalized with a fresh absorbing non-accepting sink.
    """
    states: List[str] = []
    alphabet: List[str] = []
    initial: List[str] = []
    accepting: List[str] = []
    trans: Dict[Tuple[str, str], str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise DfaFormatError(f"line {lineno}: expected 'key: values'")
        key, rest = line.split(":", 1)
        fields = rest.split()
        key = key.strip()
        if key == "states":
            states.extend(fields)
        elif key == "alphabet":
            alphabet.extend(fields)
        elif key == "initial":
            initial.extend(fields)
        elif key == "accepting":
            accepting.extend(fields)
        elif key == "trans":
            if len(fields) != 3:
                raise DfaFormatError(f"line {lineno}: trans needs 'source letter target'")
            q, a, q2 = fields
            if (q, a) in trans and trans[(q, a)] != q2:
                raise DfaFormatError(f"line {lineno}: nondeterministic on ({q}, {a})")
            trans[(q, a)] = q2
        else:
            raise DfaFormatError(f"line {lineno}: unknown key {key!r}")
    if not states:
        raise DfaFormatError("no states declared")
    if not alphabet:
        alphabet = sorted({a for (_, a) in trans})
    if not alphabet:
        raise DfaFormatError("no alphabet letters declared or used")
    known = set(states)
    for q in initial + accepting:
        if q not in known:
            raise DfaFormatError(f"state {q!r} not declared")
    for (q, a), q2 in trans.items():
        if q not in known or q2 not in known:
            raise DfaFormatError(f"transition uses undeclared state: {q} -{a}-> {q2}")
        if a not in alphabet:
            raise DfaFormatError(f"transition letter {a!r} not in alphabet")
    needs_sink = any((q, a) not in trans for q in states for a in alphabet)
    if needs_sink:
        sink = SINK
        while sink in known:
            sink = "_" + sink
        states = states + [sink]
        for q in states:
            for a in alphabet:
                trans.setdefault((q, a), sink)
    return Dfa(
        states=tuple(states),
        alphabet=tuple(alphabet),
        initial=frozenset(initial),
        accepting=frozenset(accepting),
        delta=trans,
    )


def format_dfa_text(dfa: Dfa) -> str:
    lines = [
        "states: " + " ".join(dfa.states),
        "alphabet: " + " ".join(dfa.alphabet),
        "initial: " + " ".join(sorted(dfa.initial)),
        "accepting: " + " ".join(sorted(dfa.accepting)),
    ]
    for q in dfa.states:
        for a in dfa.alphabet:
            lines.append(f"trans: {q} {a} {dfa.delta[(q, a)]}")
    return "\n".join(lines) + "\n"


# -- accepting runs and reachability triples ----------------------------------------

@dataclass(frozen=True)
class AcceptingRun:
    """A self-loop-free state path from an initial to an accepting state."""

    states: Tuple[str, ...]
    labels: Tuple[FrozenSet[str], ...]

    def __post_init__(self):
        if len(self.states) < 2:
            raise RunTooShortError("a run needs at least one transition")
        if len(self.labels) != len(self.states) - 1:
            raise ValueError("one label set per transition required")
        for a, b in zip(self.states, self.states[1:]):
            if a == b:
                raise ValueError("self-loop steps are excluded from runs")
        if any(not l for l in self.labels):
            raise ValueError("transition label sets must be nonempty")

    def __str__(self):
        return "(" + ",".join(self.states) + ")"


@dataclass(frozen=True)
class ReachTriple:
    """A (q, q', q'') window: reach the target edge's regions from the source edge's."""

    states: Tuple[str, str, str]
    source_labels: FrozenSet[str]
    target_labels: FrozenSet[str]
    entry: bool = False

    def __post_init__(self):
        if not self.source_labels or not self.target_labels:
            raise ValueError("triple label sets must be nonempty")

    def key(self):
        """Synthesis cache key: the reach task is defined by its region sets."""
        return (self.source_labels, self.target_labels)

    def __str__(self):
        return "(" + ",".join(self.states) + ")"


def accepting_runs(dfa: Dfa, allow_revisits: int = 0) -> List[AcceptingRun]:
    """All accepting state runs without self-loop steps.

    By default paths are simple; allow_revisits=k permits up to k extra visits
    per state (still never staying in place).
    """
    max_visits = 1 + max(0, allow_revisits)
    runs: List[AcceptingRun] = []

    def walk(path: List[str], visits: Dict[str, int]):
        q = path[-1]
        if q in dfa.accepting and len(path) >= 2:
            labels = tuple(
                dfa.edge_labels(a, b) for a, b in zip(path, path[1:])
            )
            runs.append(AcceptingRun(tuple(path), labels))
        for q2 in dfa.successors(q):
            if q2 == q or visits.get(q2, 0) >= max_visits:
                continue
            if not dfa.edge_labels(q, q2):
                continue
            visits[q2] = visits.get(q2, 0) + 1
            path.append(q2)
            walk(path, visits)
            path.pop()
            visits[q2] -= 1

    for q0 in sorted(dfa.initial):
        walk([q0], {q0: 1})
    runs.sort(key=lambda r: (len(r.states), r.states))
    return runs


def runs_by_proposition(runs: Iterable[AcceptingRun], prop: str) -> List[AcceptingRun]:
    """Runs whose first transition can be taken on the given proposition."""
    return [r for r in runs if prop in r.labels[0]]


def run_triples(run: AcceptingRun) -> Tuple[ReachTriple, ...]:
    """Consecutive (q, q', q'') windows of a run; empty for two-state runs."""
    out = []
    for i in range(len(run.states) - 2):
        out.append(
            ReachTriple(
                states=(run.states[i], run.states[i + 1], run.states[i + 2]),
                source_labels=run.labels[i],
                target_labels=run.labels[i + 1],
            )
        )
    return tuple(out)


@dataclass(frozen=True)
class RunChain:
    """One run's contribution for a start proposition.

    When the initial state self-loops on the start proposition, the automaton
    only moves once the trace leaves the start region; `entry` records that
    first region change as an extra reach triple (source = the start
    proposition itself, which is sound since reach certificates only constrain
    the entry point of each leg).
    """

    run: AcceptingRun
    entry: Optional[ReachTriple]
    triples: Tuple[ReachTriple, ...]

    def all_triples(self) -> Tuple[ReachTriple, ...]:
        return ((self.entry,) if self.entry else ()) + self.triples


@dataclass(frozen=True)
class PropDecomposition:
    prop: str
    immediate_violation: bool
    chains: Tuple[RunChain, ...]


@dataclass(frozen=True)
class Decomposition:
    dfa: Dfa
    runs: Tuple[AcceptingRun, ...]
    by_prop: Mapping[str, PropDecomposition]

    def all_triples(self) -> List[ReachTriple]:
        seen = {}
        for pd in self.by_prop.values():
            for chain in pd.chains:
                for t in chain.all_triples():
                    seen.setdefault((t.states, t.key()), t)
        return [seen[k] for k in sorted(seen, key=str)]


def build_decomposition(dfa: Dfa, allow_revisits: int = 0) -> Decomposition:
    """Per-proposition run sets with their reach-triple windows."""
    runs = accepting_runs(dfa, allow_revisits)
    by_prop = {}
    for p in dfa.alphabet:
        chains: List[RunChain] = []
        for r in runs_by_proposition(runs, p):
            chains.append(RunChain(r, None, run_triples(r)))
        immediate = False
        for q0 in sorted(dfa.initial):
            if dfa.delta[(q0, p)] != q0:
                continue
            if q0 in dfa.accepting:
                # the one-letter word (p) is already accepted
                immediate = True
                continue
            for r in runs:
                if r.states[0] != q0:
                    continue
                entry = ReachTriple(
                    states=(q0, q0, r.states[1]),
                    source_labels=frozenset({p}),
                    target_labels=r.labels[0],
                    entry=True,
                )
                chains.append(RunChain(r, entry, run_triples(r)))
        chains.sort(key=lambda c: (len(c.run.states), c.run.states, c.entry is not None))
        by_prop[p] = PropDecomposition(p, immediate, tuple(chains))
    return Decomposition(dfa=dfa, runs=tuple(runs), by_prop=by_prop)
