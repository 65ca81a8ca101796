"""Temporal formulas over finite traces.

Grammar: atoms are identifiers, `!` negation, `&` conjunction, `|` disjunction,
`G` always, `F` eventually, `U` until, `true`, parentheses. Precedence:
unary > U > & > |. The next operator `X` is rejected. Words are nonempty
sequences of single propositions; Always/Eventually/Until quantify over the
remaining positions including the current one, and Until is strong.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import LtlSyntaxError, UnknownPropositionError, UnsupportedOperatorError


@dataclass(frozen=True)
class Formula:
    """Base class for formula nodes."""

    def __str__(self) -> str:
        return _render(self, 0)


@dataclass(frozen=True)
class TrueF(Formula):
    """The constant true."""


@dataclass(frozen=True)
class Atom(Formula):
    """An atomic proposition."""

    name: str


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Always(Formula):
    child: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    child: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


TRUE = TrueF()
FALSE = Not(TRUE)

_PREC = {Or: 1, And: 2, Until: 3, Not: 4, Always: 4, Eventually: 4, Atom: 5, TrueF: 5}


def _render(f: Formula, ctx: int) -> str:
    prec = _PREC[type(f)]
    if isinstance(f, TrueF):
        s = "true"
    elif isinstance(f, Atom):
        s = f.name
    elif isinstance(f, Not):
        s = "!" + _render(f.child, prec)
    elif isinstance(f, Always):
        s = "G " + _render(f.child, prec)
    elif isinstance(f, Eventually):
        s = "F " + _render(f.child, prec)
    elif isinstance(f, Until):
        # right-associative: parenthesize a left operand of equal precedence
        s = _render(f.left, prec + 1) + " U " + _render(f.right, prec)
    elif isinstance(f, And):
        s = _render(f.left, prec) + " & " + _render(f.right, prec + 1)
    else:
        s = _render(f.left, prec) + " | " + _render(f.right, prec + 1)
    return f"({s})" if prec < ctx else s


def atoms(f: Formula) -> frozenset:
    """The set of proposition names occurring in f."""
    if isinstance(f, Atom):
        return frozenset({f.name})
    if isinstance(f, (Not, Always, Eventually)):
        return atoms(f.child)
    if isinstance(f, (And, Or, Until)):
        return atoms(f.left) | atoms(f.right)
    return frozenset()


# -- parsing -------------------------------------------------------------------

_LEX = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_]*)|([!&|()])|(\S))")
_RESERVED = {"G", "F", "U", "X", "true"}


def _lex(text: str):
    tokens = []
    for m in _LEX.finditer(text):
        if m.group(3):
            raise LtlSyntaxError(f"unexpected character {m.group(3)!r}", m.start(3))
        if m.group(1):
            word = m.group(1)
            kind = word if word in _RESERVED else "ident"
            tokens.append((kind, word, m.start(1)))
        else:
            tokens.append((m.group(2), m.group(2), m.start(2)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _lex(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise LtlSyntaxError("unexpected end of formula", len(self.text))
        self.pos += 1
        return tok

    def parse(self) -> Formula:
        f = self.disjunction()
        tok = self.peek()
        if tok is not None:
            raise LtlSyntaxError(f"unexpected token {tok[1]!r}", tok[2])
        return f

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while (tok := self.peek()) and tok[0] == "|":
            self.take()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.until()
        while (tok := self.peek()) and tok[0] == "&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        f = self.unary()
        if (tok := self.peek()) and tok[0] == "U":
            self.take()
            f = Until(f, self.until())
        return f

    def unary(self) -> Formula:
        tok = self.peek()
        if tok is None:
            raise LtlSyntaxError("unexpected end of formula", len(self.text))
        if tok[0] == "X":
            raise UnsupportedOperatorError(
                f"next operator is outside the finite-trace fragment (position {tok[2]})"
            )
        if tok[0] == "!":
            self.take()
            return Not(self.unary())
        if tok[0] == "G":
            self.take()
            return Always(self.unary())
        if tok[0] == "F":
            self.take()
            return Eventually(self.unary())
        return self.primary()

    def primary(self) -> Formula:
        tok = self.take()
        if tok[0] == "true":
            return TRUE
        if tok[0] == "ident":
            return Atom(tok[1])
        if tok[0] == "(":
            f = self.disjunction()
            closing = self.peek()
            if closing is None or closing[0] != ")":
                raise LtlSyntaxError("missing closing parenthesis", tok[2])
            self.take()
            return f
        if tok[0] == "X":
            raise UnsupportedOperatorError(
                f"next operator is outside the finite-trace fragment (position {tok[2]})"
            )
        raise LtlSyntaxError(f"unexpected token {tok[1]!r}", tok[2])


def parse_formula(text: str) -> Formula:
    """Parse formula text; raises LtlSyntaxError / UnsupportedOperatorError."""
    if not text.strip():
        raise LtlSyntaxError("empty formula", 0)
    return _Parser(text).parse()


# -- normal forms ---------------------------------------------------------------

def nnf(f: Formula) -> Formula:
    """Negation normal form: negations pushed down to atoms (and bare true)."""
    if isinstance(f, (TrueF, Atom)):
        return f
    if isinstance(f, And):
        return And(nnf(f.left), nnf(f.right))
    if isinstance(f, Or):
        return Or(nnf(f.left), nnf(f.right))
    if isinstance(f, Always):
        return Always(nnf(f.child))
    if isinstance(f, Eventually):
        return Eventually(nnf(f.child))
    if isinstance(f, Until):
        return Until(nnf(f.left), nnf(f.right))
    g = f.child
    if isinstance(g, (TrueF, Atom)):
        return f
    if isinstance(g, Not):
        return nnf(g.child)
    if isinstance(g, And):
        return Or(nnf(Not(g.left)), nnf(Not(g.right)))
    if isinstance(g, Or):
        return And(nnf(Not(g.left)), nnf(Not(g.right)))
    if isinstance(g, Always):
        return Eventually(nnf(Not(g.child)))
    if isinstance(g, Eventually):
        return Always(nnf(Not(g.child)))
    # finite-trace dual of strong until, expressed without a release operator:
    # !(a U b) == G !b | (!b U (!a & !b))
    na, nb = nnf(Not(g.left)), nnf(Not(g.right))
    return Or(Always(nb), Until(nb, And(na, nb)))


def negate_to_pnf(f: Formula) -> Formula:
    """Negation of f in positive normal form."""
    return nnf(Not(f))


def is_safe_fragment(f: Formula) -> bool:
    """True iff negations sit only on atoms/true and the only temporal operator is G."""
    if isinstance(f, (TrueF, Atom)):
        return True
    if isinstance(f, Not):
        return isinstance(f.child, (Atom, TrueF))
    if isinstance(f, (And, Or)):
        return is_safe_fragment(f.left) and is_safe_fragment(f.right)
    if isinstance(f, Always):
        return is_safe_fragment(f.child)
    return False


# -- finite-trace semantics ------------------------------------------------------

def evaluate_word(
    f: Formula, word: Sequence[str], alphabet: Optional[Iterable[str]] = None
) -> bool:
    """Evaluate f on a nonempty finite word of propositions.

    With an explicit alphabet, letters outside it raise UnknownProposition;
    otherwise any identifier letter is allowed (atoms absent from a letter are
    simply false there).
    """
    word = tuple(word)
    if not word:
        raise ValueError("finite traces are nonempty")
    if alphabet is not None:
        allowed = frozenset(alphabet)
        for letter in word:
            if letter not in allowed:
                raise UnknownPropositionError(
                    f"letter {letter!r} outside alphabet {sorted(allowed)}"
                )
    n = len(word)

    def ev(g: Formula, i: int) -> bool:
        if isinstance(g, TrueF):
            return True
        if isinstance(g, Atom):
            return word[i] == g.name
        if isinstance(g, Not):
            return not ev(g.child, i)
        if isinstance(g, And):
            return ev(g.left, i) and ev(g.right, i)
        if isinstance(g, Or):
            return ev(g.left, i) or ev(g.right, i)
        if isinstance(g, Always):
            return all(ev(g.child, j) for j in range(i, n))
        if isinstance(g, Eventually):
            return any(ev(g.child, j) for j in range(i, n))
        return any(
            ev(g.right, j) and all(ev(g.left, k) for k in range(i, j))
            for j in range(i, n)
        )

    return ev(f, 0)
