"""Linear temporal logic over finite, non-empty traces.

A trace is a non-empty list of states, each state a frozenset of the
proposition names that hold there.  ``evaluate`` is the brute-force
reference semantics; ``progress`` rewrites a formula after consuming one
state and is the basis of automaton construction.
"""
from __future__ import annotations

import re
from typing import Iterable, Sequence

TraceState = frozenset
Trace = Sequence  # of TraceState

RESERVED = {"U", "X", "N", "F", "G", "true", "false", "last"}

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class ParseError(Exception):
    """Raised on malformed formula text; ``position`` is a character offset."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UnknownPropositionError(ParseError):
    """Raised when an identifier is not in the declared proposition set."""

    def __init__(self, name, position):
        super().__init__(f"unknown proposition {name!r}", position)
        self.name = name


def check_propositions(names: Iterable[str]) -> tuple:
    """Validate a proposition set: unique identifier-shaped names, none reserved."""
    out = []
    for name in names:
        if not _NAME_RE.match(name):
            raise ValueError(f"invalid proposition name {name!r}")
        if name in RESERVED:
            raise ValueError(f"proposition name {name!r} is reserved")
        if name in out:
            raise ValueError(f"duplicate proposition name {name!r}")
        out.append(name)
    return tuple(out)


class Formula:
    """Base class; identity is the canonical fully parenthesized text."""

    __slots__ = ("key",)

    def __eq__(self, other):
        return isinstance(other, Formula) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return self.key

    def to_text(self):
        """Canonical text form; ``parse`` maps it back to an equal formula."""
        return self.key


class Atom(Formula):
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name
        self.key = name


class TrueFormula(Formula):
    __slots__ = ()

    def __init__(self):
        self.key = "true"


class FalseFormula(Formula):
    __slots__ = ()

    def __init__(self):
        self.key = "false"


class Last(Formula):
    """Holds exactly at the final position of a trace."""

    __slots__ = ()

    def __init__(self):
        self.key = "last"


TRUE = TrueFormula()
FALSE = FalseFormula()
LAST = Last()


class Not(Formula):
    __slots__ = ("child",)

    def __init__(self, child):
        self.child = child
        self.key = "!" + child.key


class _Unary(Formula):
    __slots__ = ("child",)
    op = ""

    def __init__(self, child):
        self.child = child
        self.key = f"{self.op} {child.key}"


class Next(_Unary):
    __slots__ = ()
    op = "X"


class WeakNext(_Unary):
    """Like Next but satisfied at the last position (no successor required)."""

    __slots__ = ()
    op = "N"


class Eventually(_Unary):
    __slots__ = ()
    op = "F"


class Always(_Unary):
    __slots__ = ()
    op = "G"


class _Binary(Formula):
    __slots__ = ("left", "right")
    op = ""

    def __init__(self, left, right):
        self.left = left
        self.right = right
        self.key = f"({left.key} {self.op} {right.key})"


class And(_Binary):
    __slots__ = ()
    op = "&"


class Or(_Binary):
    __slots__ = ()
    op = "|"


class Implies(_Binary):
    __slots__ = ()
    op = "->"


class Iff(_Binary):
    __slots__ = ()
    op = "<->"


class Until(_Binary):
    __slots__ = ()
    op = "U"


# --- parsing ---------------------------------------------------------------

_TOKEN_RE = re.compile(r"\s*(?:(<->|->|[!&|()])|([A-Za-z_][A-Za-z0-9_]*))")

_UNARY_OPS = {"X": Next, "N": WeakNext, "F": Eventually, "G": Always}
_CONSTANTS = {"true": TRUE, "false": FALSE, "last": LAST}


class _Parser:
    """Recursive descent over the precedence chain.

    Binding strength, tightest first: ! > X N F G > U > & > | > -> > <->.
    U and -> associate to the right, & | <-> to the left.
    """

    def __init__(self, text, atoms):
        self.text = text
        self.atoms = atoms
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == m.start():
                stripped = text[pos:].lstrip()
                if not stripped:
                    break
                at = len(text) - len(stripped)
                raise ParseError(f"unexpected character {stripped[0]!r}", at)
            sym = m.group(1) or m.group(2)
            self.tokens.append((sym, m.start(2) if m.group(2) else m.start(1)))
            pos = m.end()
        self.index = 0

    def peek(self):
        if self.index < len(self.tokens):
            return self.tokens[self.index][0]
        return None

    def advance(self):
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def here(self):
        if self.index < len(self.tokens):
            return self.tokens[self.index][1]
        return len(self.text)

    def parse(self):
        f = self.iff()
        if self.peek() is not None:
            raise ParseError(f"unexpected token {self.peek()!r}", self.here())
        return f

    def iff(self):
        f = self.implies()
        while self.peek() == "<->":
            self.advance()
            f = Iff(f, self.implies())
        return f

    def implies(self):
        f = self.disjunction()
        if self.peek() == "->":
            self.advance()
            return Implies(f, self.implies())
        return f

    def disjunction(self):
        f = self.conjunction()
        while self.peek() == "|":
            self.advance()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self):
        f = self.until()
        while self.peek() == "&":
            self.advance()
            f = And(f, self.until())
        return f

    def until(self):
        f = self.unary()
        if self.peek() == "U":
            self.advance()
            return Until(f, self.until())
        return f

    def unary(self):
        tok = self.peek()
        if tok == "!":
            self.advance()
            return Not(self.unary())
        if tok in _UNARY_OPS:
            self.advance()
            return _UNARY_OPS[tok](self.unary())
        return self.primary()

    def primary(self):
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self.here())
        if tok == "(":
            self.advance()
            f = self.iff()
            if self.peek() != ")":
                raise ParseError("expected ')'", self.here())
            self.advance()
            return f
        if tok in _CONSTANTS:
            self.advance()
            return _CONSTANTS[tok]
        if tok in RESERVED or not _NAME_RE.match(tok):
            raise ParseError(f"unexpected token {tok!r}", self.here())
        sym, pos = self.advance()
        if sym not in self.atoms:
            raise UnknownPropositionError(sym, pos)
        return Atom(sym)


def parse(text: str, atoms: Iterable[str]) -> Formula:
    """Parse ASCII formula text over the given proposition set."""
    return _Parser(text, frozenset(check_propositions(atoms))).parse()


# --- reference semantics ---------------------------------------------------


def evaluate(trace: Trace, i: int, f: Formula) -> bool:
    """Truth of f at position i of a non-empty trace, by the defining clauses."""
    if len(trace) == 0:
        raise ValueError("trace must be non-empty")
    if not 0 <= i < len(trace):
        raise ValueError(f"position {i} outside trace of length {len(trace)}")
    return _eval(trace, i, f)


def _eval(trace, i, f):
    last = len(trace) - 1
    if isinstance(f, Atom):
        return f.name in trace[i]
    if isinstance(f, TrueFormula):
        return True
    if isinstance(f, FalseFormula):
        return False
    if isinstance(f, Last):
        return i == last
    if isinstance(f, Not):
        return not _eval(trace, i, f.child)
    if isinstance(f, And):
        return _eval(trace, i, f.left) and _eval(trace, i, f.right)
    if isinstance(f, Or):
        return _eval(trace, i, f.left) or _eval(trace, i, f.right)
    if isinstance(f, Implies):
        return (not _eval(trace, i, f.left)) or _eval(trace, i, f.right)
    if isinstance(f, Iff):
        return _eval(trace, i, f.left) == _eval(trace, i, f.right)
    if isinstance(f, Next):
        return i < last and _eval(trace, i + 1, f.child)
    if isinstance(f, WeakNext):
        return i == last or _eval(trace, i + 1, f.child)
    if isinstance(f, Until):
        for j in range(i, last + 1):
            if _eval(trace, j, f.right):
                if all(_eval(trace, k, f.left) for k in range(i, j)):
                    return True
        return False
    if isinstance(f, Eventually):
        return any(_eval(trace, j, f.child) for j in range(i, last + 1))
    if isinstance(f, Always):
        return all(_eval(trace, j, f.child) for j in range(i, last + 1))
    raise TypeError(f"not a formula node: {f!r}")


# --- core form and progression ---------------------------------------------


def expand_derived(f: Formula) -> Formula:
    """Rewrite to the core connectives: atoms, constants, last, !, &, |, X, U."""
    if isinstance(f, (Atom, TrueFormula, FalseFormula, Last)):
        return f
    if isinstance(f, Not):
        return Not(expand_derived(f.child))
    if isinstance(f, And):
        return And(expand_derived(f.left), expand_derived(f.right))
    if isinstance(f, Or):
        return Or(expand_derived(f.left), expand_derived(f.right))
    if isinstance(f, Implies):
        return Or(Not(expand_derived(f.left)), expand_derived(f.right))
    if isinstance(f, Iff):
        a = expand_derived(f.left)
        b = expand_derived(f.right)
        return And(Or(Not(a), b), Or(Not(b), a))
    if isinstance(f, Next):
        return Next(expand_derived(f.child))
    if isinstance(f, WeakNext):
        return Or(LAST, Next(expand_derived(f.child)))
    if isinstance(f, Until):
        return Until(expand_derived(f.left), expand_derived(f.right))
    if isinstance(f, Eventually):
        return Until(TRUE, expand_derived(f.child))
    if isinstance(f, Always):
        return Not(Until(TRUE, Not(expand_derived(f.child))))
    raise TypeError(f"not a formula node: {f!r}")


def is_core(f: Formula) -> bool:
    if isinstance(f, (Atom, TrueFormula, FalseFormula, Last)):
        return True
    if isinstance(f, Not):
        return is_core(f.child)
    if isinstance(f, (And, Or, Until)):
        return is_core(f.left) and is_core(f.right)
    if isinstance(f, Next):
        return is_core(f.child)
    return False


def _flatten(cls, f, out):
    if isinstance(f, cls):
        _flatten(cls, f.left, out)
        _flatten(cls, f.right, out)
    else:
        out.append(f)


def _assoc(cls, a, b):
    """Normalize an And/Or pair: flatten, dedup, sort, fold constants and
    complementary literal pairs.  Keeps closures finite under progression."""
    dominant, neutral = (FALSE, TRUE) if cls is And else (TRUE, FALSE)
    leaves = []
    _flatten(cls, a, leaves)
    _flatten(cls, b, leaves)
    unique = {}
    for leaf in leaves:
        if leaf is dominant:
            return dominant
        if leaf is neutral:
            continue
        unique[leaf.key] = leaf
    for leaf in unique.values():
        if isinstance(leaf, Not) and leaf.child.key in unique:
            return dominant
    if not unique:
        return neutral
    parts = [unique[k] for k in sorted(unique)]
    out = parts[0]
    for part in parts[1:]:
        out = cls(out, part)
    return out


def simplify(f: Formula) -> Formula:
    """Constant folding, idempotence, and a commutativity/associativity-normal
    child order.

    Purely syntactic: enough to keep progression closures small and give
    equal formulas equal keys.  Semantic collapse is left to automaton
    minimization.
    """
    if isinstance(f, Not):
        c = simplify(f.child)
        if c is TRUE:
            return FALSE
        if c is FALSE:
            return TRUE
        if isinstance(c, Not):
            return c.child
        return Not(c)
    if isinstance(f, (And, Or)):
        return _assoc(type(f), simplify(f.left), simplify(f.right))
    if isinstance(f, Next):
        c = simplify(f.child)
        if c is FALSE:
            # X false never holds: it needs a successor position satisfying false.
            return FALSE
        return Next(c)
    if isinstance(f, Until):
        a = simplify(f.left)
        b = simplify(f.right)
        if b is TRUE:
            return TRUE
        if b is FALSE:
            return FALSE
        if a is FALSE or a == b:
            return b
        return Until(a, b)
    if isinstance(f, _Unary):
        return type(f)(simplify(f.child))
    if isinstance(f, _Binary):
        return type(f)(simplify(f.left), simplify(f.right))
    return f


def progress(f: Formula, state: TraceState) -> Formula:
    """Residual obligation after consuming one state, for core-form f.

    For every non-empty continuation t:  state+t satisfies f  iff  t
    satisfies progress(f, state).  The result is simplified.
    """
    return simplify(_progress(f, state))


def _progress(f, state):
    if isinstance(f, Atom):
        return TRUE if f.name in state else FALSE
    if isinstance(f, (TrueFormula, FalseFormula)):
        return f
    if isinstance(f, Last):
        # a non-empty continuation exists, so this was not the last position
        return FALSE
    if isinstance(f, Not):
        return Not(_progress(f.child, state))
    if isinstance(f, And):
        return And(_progress(f.left, state), _progress(f.right, state))
    if isinstance(f, Or):
        return Or(_progress(f.left, state), _progress(f.right, state))
    if isinstance(f, Next):
        return f.child
    if isinstance(f, Until):
        return Or(_progress(f.right, state), And(_progress(f.left, state), f))
    raise ValueError(f"progress requires core form, got {f!r}")


def accepts_empty_continuation(f: Formula, state: TraceState) -> bool:
    """Truth of core-form f on the one-state trace [state].

    This is what decides acceptance when a trace ends on the state just
    consumed: equal to evaluate([state], 0, f), computed directly.
    """
    if isinstance(f, Atom):
        return f.name in state
    if isinstance(f, TrueFormula):
        return True
    if isinstance(f, FalseFormula):
        return False
    if isinstance(f, Last):
        return True
    if isinstance(f, Not):
        return not accepts_empty_continuation(f.child, state)
    if isinstance(f, And):
        return accepts_empty_continuation(f.left, state) and accepts_empty_continuation(f.right, state)
    if isinstance(f, Or):
        return accepts_empty_continuation(f.left, state) or accepts_empty_continuation(f.right, state)
    if isinstance(f, Next):
        return False
    if isinstance(f, Until):
        return accepts_empty_continuation(f.right, state)
    raise ValueError(f"accepts_empty_continuation requires core form, got {f!r}")


def atoms_of(f: Formula) -> frozenset:
    """Proposition names occurring in f."""
    if isinstance(f, Atom):
        return frozenset((f.name,))
    if isinstance(f, Not) or isinstance(f, _Unary):
        return atoms_of(f.child)
    if isinstance(f, _Binary):
        return atoms_of(f.left) | atoms_of(f.right)
    return frozenset()
