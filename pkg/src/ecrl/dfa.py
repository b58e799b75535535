"""Compile formulas to minimal deterministic finite automata over valuations.

The alphabet is the powerset of the declared propositions.  Construction is
by formula progression: automaton states are pairs (residual obligation,
accepted flag), where the flag records whether the trace consumed so far
satisfies the original formula if it ends here.  The result is minimized,
total, and validated elsewhere against the brute-force trace semantics.
"""
from __future__ import annotations

import json
from collections import deque

from .ltlf import (
    FALSE,
    TRUE,
    And,
    Atom,
    Formula,
    Not,
    Or,
    accepts_empty_continuation,
    atoms_of,
    check_propositions,
    evaluate,
    expand_derived,
    parse,
    progress,
    simplify,
)

MAX_CLOSURE_STATES = 4096
MAX_ALPHABET_ATOMS = 16


class ClosureOverflowError(RuntimeError):
    """Progression closure exceeded the configured state cap."""


class UnsatisfiableTaskError(ValueError):
    """The formula admits no satisfying trace: the automaton has no accepting state."""


class Guard:
    """Propositional edge label plus the set of valuation masks it covers."""

    def __init__(self, expr: Formula, masks: frozenset):
        self.expr = expr
        self.masks = masks

    def holds(self, mask: int) -> bool:
        return mask in self.masks

    def text(self, style: str = "ascii") -> str:
        if style == "ascii":
            return self.expr.to_text()
        if style == "rddl":
            return _rddl_text(self.expr)
        raise ValueError(f"unknown guard style {style!r}")

    def __repr__(self):
        return f"Guard({self.expr!r})"


def _rddl_text(f: Formula) -> str:
    if isinstance(f, Atom):
        return f.name
    if f is TRUE:
        return "true"
    if f is FALSE:
        return "false"
    if isinstance(f, Not):
        return "~" + _rddl_text(f.child)
    if isinstance(f, And):
        return f"({_rddl_text(f.left)} ^ {_rddl_text(f.right)})"
    if isinstance(f, Or):
        return f"({_rddl_text(f.left)} | {_rddl_text(f.right)})"
    raise ValueError(f"guard is not propositional: {f!r}")


def _implicant_formula(care: int, bits: int, atoms) -> Formula:
    literals = []
    for i, name in enumerate(atoms):
        if care >> i & 1:
            literals.append(Atom(name) if bits >> i & 1 else Not(Atom(name)))
    if not literals:
        return TRUE
    out = literals[0]
    for lit in literals[1:]:
        out = And(out, lit)
    return out


def _prime_implicants(masks, width):
    """Merge adjacent minterms until fixpoint; classic first phase of two-level
    minimization.  An implicant is (care, bits): it covers m iff m & care == bits."""
    full = (1 << width) - 1
    level = {(full, m) for m in masks}
    primes = set()
    while level:
        merged = set()
        nxt = set()
        for care, bits in level:
            i = 0
            probe = care
            while probe:
                bit = probe & -probe
                probe ^= bit
                partner = (care, bits ^ bit)
                if partner in level:
                    nxt.add((care ^ bit, bits & ~bit))
                    merged.add((care, bits))
                    merged.add(partner)
                i += 1
        primes |= level - merged
        level = nxt
    return primes


def _popcount(x):
    return bin(x).count("1")


def guard_for_masks(masks, atoms) -> Guard:
    """Smallest-cover disjunction of implicants for a non-empty valuation set."""
    masks = frozenset(masks)
    if not masks:
        raise ValueError("empty guard")
    width = len(atoms)
    if masks == frozenset(range(1 << width)):
        return Guard(TRUE, masks)
    primes = _prime_implicants(masks, width)
    uncovered = set(masks)
    chosen = []
    while uncovered:
        best = None
        best_key = None
        for care, bits in sorted(primes):
            cover = sum(1 for m in uncovered if m & care == bits)
            key = (cover, -_popcount(care), -care, -bits)
            if cover and (best_key is None or key > best_key):
                best_key = key
                best = (care, bits)
        care, bits = best
        chosen.append(best)
        uncovered -= {m for m in masks if m & care == bits}
        primes.discard(best)
    chosen.sort(key=lambda cb: (cb[1], cb[0]))
    expr = _implicant_formula(*chosen[0], atoms)
    for cb in chosen[1:]:
        expr = Or(expr, _implicant_formula(*cb, atoms))
    return Guard(expr, masks)


class Dfa:
    """Total deterministic automaton over valuations of a fixed proposition list.

    delta is a dense table: delta[q][mask] is the successor of q on the
    valuation encoded by mask (bit i set iff atoms[i] holds).  Error states
    are the states from which no accepting state is reachable; they are
    recomputed from the table, never trusted from input.
    """

    def __init__(self, atoms, delta, accepting, initial=0):
        self.atoms = check_propositions(atoms)
        self.delta = [list(row) for row in delta]
        self.accepting = frozenset(accepting)
        self.initial = initial
        n = len(self.delta)
        width = 1 << len(self.atoms)
        for row in self.delta:
            if len(row) != width or any(not 0 <= t < n for t in row):
                raise ValueError("malformed transition table")
        if not 0 <= initial < n:
            raise ValueError("initial state out of range")
        if any(not 0 <= q < n for q in self.accepting):
            raise ValueError("accepting state out of range")
        self.errors = self._find_errors()

    @property
    def n_states(self):
        return len(self.delta)

    def _find_errors(self):
        reverse = [[] for _ in range(self.n_states)]
        for q, row in enumerate(self.delta):
            for t in row:
                reverse[t].append(q)
        can_reach = set(self.accepting)
        queue = deque(can_reach)
        while queue:
            q = queue.popleft()
            for p in reverse[q]:
                if p not in can_reach:
                    can_reach.add(p)
                    queue.append(p)
        return frozenset(range(self.n_states)) - can_reach

    def valuation_mask(self, state) -> int:
        mask = 0
        for i, name in enumerate(self.atoms):
            if name in state:
                mask |= 1 << i
        return mask

    def step(self, q, state) -> int:
        """Successor of q on a trace state; propositions outside the alphabet are ignored."""
        return self.delta[q][self.valuation_mask(state)]

    def accepts(self, trace) -> bool:
        """Run the automaton over a non-empty trace and check final-state acceptance."""
        if len(trace) == 0:
            raise ValueError("trace must be non-empty")
        q = self.initial
        for s in trace:
            q = self.delta[q][self.valuation_mask(s)]
        return q in self.accepting

    def state_name(self, q) -> str:
        return f"q{q + 1}"

    def edges(self):
        """Transitions merged by (source, target), with synthesized guards."""
        out = []
        for q, row in enumerate(self.delta):
            by_target = {}
            for mask, t in enumerate(row):
                by_target.setdefault(t, []).append(mask)
            for t in sorted(by_target):
                out.append((q, guard_for_masks(by_target[t], self.atoms), t))
        return out

    # --- serialization -----------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "atoms": list(self.atoms),
            "states": self.n_states,
            "initial": self.initial,
            "accepting": sorted(self.accepting),
            "errors": sorted(self.errors),
            "edges": [
                {"from": q, "guard": g.text("ascii"), "to": t} for q, g, t in self.edges()
            ],
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        atoms = tuple(doc["atoms"])
        n = doc["states"]
        width = 1 << len(atoms)
        delta = [[None] * width for _ in range(n)]
        vals = [frozenset(a for i, a in enumerate(atoms) if mask >> i & 1) for mask in range(width)]
        for edge in doc["edges"]:
            expr = parse(edge["guard"], atoms)
            q, t = edge["from"], edge["to"]
            for mask, val in enumerate(vals):
                if evaluate([val], 0, expr):
                    if delta[q][mask] is not None:
                        raise ValueError(f"overlapping guards out of state {q}")
                    delta[q][mask] = t
        for q, row in enumerate(delta):
            if any(t is None for t in row):
                raise ValueError(f"incomplete guards out of state {q}")
        d = cls(atoms, delta, doc["accepting"], doc["initial"])
        if sorted(d.errors) != sorted(doc["errors"]):
            raise ValueError("declared error states disagree with the transition table")
        return d

    # --- exports -----------------------------------------------------------

    def export_dot(self) -> str:
        lines = ["digraph automaton {", "  rankdir=LR;", "  node [shape=circle];"]
        lines.append('  start [shape=point, label=""];')
        for q in range(self.n_states):
            attrs = []
            if q in self.accepting:
                attrs.append("shape=doublecircle")
            if q in self.errors:
                attrs.append("style=dashed")
            suffix = f" [{', '.join(attrs)}]" if attrs else ""
            lines.append(f"  {self.state_name(q)}{suffix};")
        lines.append(f"  start -> {self.state_name(self.initial)};")
        for q, guard, t in self.edges():
            lines.append(
                f'  {self.state_name(q)} -> {self.state_name(t)} [label="{guard.text("ascii")}"];'
            )
        lines.append("}")
        return "\n".join(lines) + "\n"

    def export_rddl(self, reward: float = 100.0) -> str:
        """Automaton as RDDL-style fluent blocks: one enumerated state variable,
        an if-else transition chain, reward on accepting states, termination
        on accepting and error states."""
        names = ", ".join("@" + self.state_name(q) for q in range(self.n_states))
        lines = ["pvariables {"]
        lines.append(
            f"    fQ : {{state-fluent,{{{names}}},default=@{self.state_name(self.initial)}}};"
        )
        lines.append("};")
        lines.append("cpfs{")
        first = True
        for q, guard, t in self.edges():
            cond = f"fQ == @{self.state_name(q)} ^ {guard.text('rddl')}"
            head = "    fQ' = if" if first else "          else if"
            lines.append(f"{head}({cond}) then @{self.state_name(t)}")
            first = False
        lines.append("          else fQ;")
        lines.append("};")
        amount = int(reward) if float(reward).is_integer() else reward
        terms = " + ".join(f"{amount}*(fQ == @{self.state_name(q)})" for q in sorted(self.accepting))
        lines.append(f"reward = {terms};")
        stops = " ".join(
            f"fQ == @{self.state_name(q)};" for q in sorted(self.accepting | self.errors)
        )
        lines.append(f"termination {{{stops}}};")
        return "\n".join(lines) + "\n"


def find_error_states(d: Dfa) -> frozenset:
    """States from which no accepting state is reachable."""
    return d.errors


def compile_formula(f: Formula, atoms, max_states: int = MAX_CLOSURE_STATES) -> Dfa:
    """Build the minimal total automaton whose language is the formula's traces.

    Raises UnsatisfiableTaskError when no trace satisfies the formula and
    ClosureOverflowError if the progression closure exceeds max_states.
    """
    atoms = check_propositions(atoms)
    if len(atoms) > MAX_ALPHABET_ATOMS:
        raise ValueError(f"alphabet too large: {len(atoms)} > {MAX_ALPHABET_ATOMS}")
    missing = atoms_of(f) - set(atoms)
    if missing:
        raise ValueError(f"formula uses undeclared propositions: {sorted(missing)}")
    width = 1 << len(atoms)
    vals = [frozenset(a for i, a in enumerate(atoms) if mask >> i & 1) for mask in range(width)]

    core = simplify(expand_derived(f))
    start = (core, False)
    index = {start: 0}
    order = [start]
    delta = []
    queue = deque([0])
    while queue:
        qi = queue.popleft()
        residual, _ = order[qi]
        row = []
        for mask in range(width):
            succ = (progress(residual, vals[mask]), accepts_empty_continuation(residual, vals[mask]))
            if succ not in index:
                if len(order) >= max_states:
                    raise ClosureOverflowError(f"closure exceeded {max_states} states")
                index[succ] = len(order)
                order.append(succ)
                queue.append(index[succ])
            row.append(index[succ])
        delta.append(row)

    accepting = [i for i, (_, flag) in enumerate(order) if flag]
    d = minimize(Dfa(atoms, delta, accepting))
    if not d.accepting:
        raise UnsatisfiableTaskError(f"no satisfying trace for {f!r}")
    return d


def compile_text(text: str, atoms, max_states: int = MAX_CLOSURE_STATES) -> Dfa:
    atoms = check_propositions(atoms)
    return compile_formula(parse(text, atoms), atoms, max_states)


def minimize(d: Dfa) -> Dfa:
    """Partition-refinement minimization; also drops unreachable states.

    States are renamed by breadth-first discovery order from the initial
    state (valuations in mask order), so equal automata come out identical.
    """
    width = 1 << len(d.atoms)
    reachable = [d.initial]
    seen = {d.initial}
    for q in reachable:
        for t in d.delta[q]:
            if t not in seen:
                seen.add(t)
                reachable.append(t)

    block = {q: (1 if q in d.accepting else 0) for q in reachable}
    n_blocks = len(set(block.values()))
    while True:
        signature = {
            q: (block[q], tuple(block[d.delta[q][m]] for m in range(width))) for q in reachable
        }
        renumber = {}
        for q in reachable:
            renumber.setdefault(signature[q], len(renumber))
        block = {q: renumber[signature[q]] for q in reachable}
        if len(renumber) == n_blocks:
            break
        n_blocks = len(renumber)

    representative = {}
    for q in reachable:
        representative.setdefault(block[q], q)
    new_id = {block[d.initial]: 0}
    bfs = [block[d.initial]]
    for b in bfs:
        rep = representative[b]
        for m in range(width):
            tb = block[d.delta[rep][m]]
            if tb not in new_id:
                new_id[tb] = len(new_id)
                bfs.append(tb)
    delta = [[0] * width for _ in range(len(new_id))]
    for b, i in new_id.items():
        rep = representative[b]
        for m in range(width):
            delta[i][m] = new_id[block[d.delta[rep][m]]]
    accepting = {new_id[block[q]] for q in reachable if q in d.accepting}
    return Dfa(d.atoms, delta, accepting, 0)


def distinguishing_suffix(d: Dfa, q1: int, q2: int):
    """Shortest valuation word accepted from exactly one of q1, q2, or None.

    Breadth-first over state pairs; None means the states are language
    equivalent.  Used to witness minimality.
    """
    width = 1 << len(d.atoms)
    vals = [frozenset(a for i, a in enumerate(d.atoms) if m >> i & 1) for m in range(width)]
    start = (q1, q2)
    parents = {start: None}
    queue = deque([start])
    while queue:
        a, b = queue.popleft()
        if (a in d.accepting) != (b in d.accepting):
            word = []
            node = (a, b)
            while parents[node] is not None:
                node, mask = parents[node]
                word.append(vals[mask])
            word.reverse()
            return word
        for m in range(width):
            nxt = (d.delta[a][m], d.delta[b][m])
            if nxt not in parents:
                parents[nxt] = ((a, b), m)
                queue.append(nxt)
    return None
