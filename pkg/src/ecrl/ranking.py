"""Rank automaton states by expected distance to acceptance.

Non-accepting, non-error states are scored by the mean length of their
simple paths to an accepting state and binned into ranks 0..N-3 (closer to
acceptance means a higher rank).  Error states take rank N-2 and accepting
states rank N-1.  Ranks induce sampling priorities p_i = C/(N-i) and the
shaping potentials: the priority of a state's rank, except that error
states are pinned to the lowest value C/N.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .dfa import Dfa

MAX_SIMPLE_PATHS = 10 ** 6


class NoPathToAcceptingError(ValueError):
    """The queried state cannot reach acceptance (it is an error state)."""


class EnumerationOverflowError(RuntimeError):
    """More simple paths than the enumeration cap allows."""


class CategoryCountError(ValueError):
    """The number of rank categories must satisfy 3 <= N <= |Q|."""


def simple_path_lengths(d: Dfa, q: int, max_paths: int = MAX_SIMPLE_PATHS) -> list:
    """Lengths of all simple (no repeated state) paths from q to acceptance.

    Paths end at the first accepting state they touch.  Error states are
    pruned: no path through them can reach acceptance.
    """
    if q in d.accepting:
        raise ValueError(f"state {q} is accepting")
    if q in d.errors:
        raise NoPathToAcceptingError(f"state {q} cannot reach acceptance")
    successors = [sorted(set(row) - d.errors) for row in d.delta]
    lengths = []
    visited = {q}

    def walk(state, depth):
        for t in successors[state]:
            if t in d.accepting:
                if len(lengths) >= max_paths:
                    raise EnumerationOverflowError(f"more than {max_paths} simple paths")
                lengths.append(depth + 1)
            elif t not in visited:
                visited.add(t)
                walk(t, depth + 1)
                visited.remove(t)

    walk(q, 0)
    return lengths


def expected_length(lengths) -> float:
    """Mean simple-path length."""
    if not lengths:
        raise ValueError("no paths to average")
    return sum(lengths) / len(lengths)


@dataclass
class RankTable:
    """Ranks, priorities, and shaping potentials for one automaton.

    priorities[i] is the sampling priority of rank i; potential maps every
    state to its shaping value.  path_length holds the expected simple-path
    length of each non-accepting, non-error state.
    """

    n_categories: int
    priority_constant: float
    rank: dict = field(default_factory=dict)
    priorities: list = field(default_factory=list)
    potential: dict = field(default_factory=dict)
    path_length: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "n_categories": self.n_categories,
            "priority_constant": self.priority_constant,
            "rank": {str(q): r for q, r in sorted(self.rank.items())},
            "priorities": self.priorities,
            "potential": {str(q): p for q, p in sorted(self.potential.items())},
            "path_length": {str(q): l for q, l in sorted(self.path_length.items())},
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(
            n_categories=doc["n_categories"],
            priority_constant=doc["priority_constant"],
            rank={int(q): r for q, r in doc["rank"].items()},
            priorities=list(doc["priorities"]),
            potential={int(q): p for q, p in doc["potential"].items()},
            path_length={int(q): l for q, l in doc["path_length"].items()},
        )


def rank_states(d: Dfa, n_categories: int | None = None, priority_constant: float = 1.0,
                max_paths: int = MAX_SIMPLE_PATHS) -> RankTable:
    """Assign every automaton state a rank in 0..N-1 and derive priorities.

    Intermediate states are spread over ranks 0..N-3 by linear interpolation
    of their expected path length between the extremes (rounded to nearest);
    when all expected lengths coincide they all take rank N-3.
    """
    if n_categories is None:
        n_categories = min(4, d.n_states)
    if not 3 <= n_categories <= d.n_states:
        raise CategoryCountError(
            f"need 3 <= N <= {d.n_states} rank categories, got {n_categories}"
        )
    N = n_categories
    C = priority_constant
    intermediate = [
        q for q in range(d.n_states) if q not in d.accepting and q not in d.errors
    ]
    path_length = {q: expected_length(simple_path_lengths(d, q, max_paths)) for q in intermediate}
    rank = {}
    if path_length:
        lmin = min(path_length.values())
        lmax = max(path_length.values())
        for q, l in path_length.items():
            if lmax == lmin:
                rank[q] = N - 3
            else:
                rank[q] = math.floor(N - 3 - (l - lmin) * (N - 3) / (lmax - lmin) + 0.5)
    for q in d.errors:
        rank[q] = N - 2
    for q in d.accepting:
        rank[q] = N - 1
    priorities = [C / (N - i) for i in range(N)]
    potential = {
        q: (C / N if q in d.errors else priorities[rank[q]]) for q in range(d.n_states)
    }
    return RankTable(
        n_categories=N,
        priority_constant=C,
        rank=rank,
        priorities=priorities,
        potential=potential,
        path_length=path_length,
    )
