"""State ranking, priorities, and shaping potentials."""
import math

import pytest

from ecrl.dfa import Dfa, compile_text
from ecrl.ranking import (
    CategoryCountError,
    EnumerationOverflowError,
    NoPathToAcceptingError,
    RankTable,
    expected_length,
    rank_states,
    simple_path_lengths,
)
from helpers import sequence_formula

SEQ_RG = "(!r & !g) U ((r & !g) & X ((!r & !g) U (g & !r)))"
RG = ("r", "g")


def branching_dfa():
    """One atom; paths 0->3 (length 1) and 0->1->3 (length 2), 3 accepting."""
    delta = [[1, 3], [3, 3], [2, 2], [3, 3]]
    return Dfa(("a",), delta, {3})


def test_simple_paths_of_sequence_automaton():
    d = compile_text(SEQ_RG, RG)
    assert simple_path_lengths(d, 0) == [2]
    assert simple_path_lengths(d, 1) == [1]


def test_simple_paths_branch_and_stop_at_first_acceptance():
    d = branching_dfa()
    assert sorted(simple_path_lengths(d, 0)) == [1, 2]
    assert expected_length(simple_path_lengths(d, 0)) == 1.5


def test_simple_paths_reject_accepting_and_error_queries():
    d = compile_text(SEQ_RG, RG)
    with pytest.raises(ValueError):
        simple_path_lengths(d, 3)
    with pytest.raises(NoPathToAcceptingError):
        simple_path_lengths(d, 2)


def test_enumeration_cap():
    d = branching_dfa()
    with pytest.raises(EnumerationOverflowError):
        simple_path_lengths(d, 0, max_paths=1)


def test_expected_length_requires_paths():
    with pytest.raises(ValueError):
        expected_length([])


def test_sequence_automaton_ranks_exactly():
    """Worked example, N=4 C=1: start 0, waiting 1, error 2, accepting 3."""
    d = compile_text(SEQ_RG, RG)
    t = rank_states(d, 4, 1.0)
    assert t.rank == {0: 0, 1: 1, 2: 2, 3: 3}
    assert t.priorities == [0.25, 1.0 / 3.0, 0.5, 1.0]
    assert t.potential[0] == 0.25
    assert t.potential[1] == 1.0 / 3.0
    assert t.potential[3] == 1.0
    # the error state gets the lowest potential, not its rank's priority
    assert t.potential[2] == 0.25
    assert t.path_length == {0: 2.0, 1: 1.0}


def test_priorities_are_increasing_and_end_at_constant():
    d = compile_text(sequence_formula(("r", "b", "g"), ("r", "b", "g")), ("r", "b", "g"))
    t = rank_states(d, 5, 2.0)
    assert t.priorities == [2.0 / 5, 2.0 / 4, 2.0 / 3, 2.0 / 2, 2.0]
    assert all(a < b for a, b in zip(t.priorities, t.priorities[1:]))
    assert t.priorities[-1] == t.priority_constant
    for q in d.errors:
        assert t.potential[q] == 2.0 / 5


def test_rank_extremes_hit_bounds():
    """Shortest expected path gets rank N-3, longest gets rank 0."""
    d = compile_text(sequence_formula(("r", "b", "g"), ("r", "b", "g")), ("r", "b", "g"))
    t = rank_states(d, 4, 1.0)
    lmin_state = min(t.path_length, key=t.path_length.get)
    lmax_state = max(t.path_length, key=t.path_length.get)
    assert t.rank[lmin_state] == 1
    assert t.rank[lmax_state] == 0


def test_rank_is_monotone_in_path_length():
    for colors in [("r", "b", "g"), ("r", "b", "g", "r", "g", "b")]:
        d = compile_text(sequence_formula(colors, ("r", "b", "g")), ("r", "b", "g"))
        for n in range(3, d.n_states + 1):
            t = rank_states(d, n)
            pairs = sorted(t.path_length.items(), key=lambda kv: kv[1])
            ranks = [t.rank[q] for q, _ in pairs]
            assert all(a >= b for a, b in zip(ranks, ranks[1:]))
            assert all(0 <= t.rank[q] <= n - 3 for q, _ in pairs)


def test_single_intermediate_state_is_degenerate():
    d = compile_text("a U b", ("a", "b"))
    t = rank_states(d)
    assert t.n_categories == 3
    assert t.rank[0] == 0  # N-3
    assert [t.rank[q] for q in sorted(d.errors)] == [1]
    assert [t.rank[q] for q in sorted(d.accepting)] == [2]


def test_default_category_count_is_four_capped_by_size():
    d = compile_text(SEQ_RG, RG)
    assert rank_states(d).n_categories == 4
    d3 = compile_text("a U b", ("a", "b"))
    assert rank_states(d3).n_categories == 3


def test_category_count_validation():
    d = compile_text(SEQ_RG, RG)
    with pytest.raises(CategoryCountError):
        rank_states(d, 2)
    with pytest.raises(CategoryCountError):
        rank_states(d, 5)
    tiny = compile_text("F a", ("a",))
    assert tiny.n_states == 2
    with pytest.raises(CategoryCountError):
        rank_states(tiny)


def test_rank_table_round_trips_through_json():
    d = compile_text(SEQ_RG, RG)
    t = rank_states(d, 4, 1.0)
    t2 = RankTable.from_json(t.to_json())
    assert t2 == t


def test_rank_formula_rounds_to_nearest():
    # three intermediates with expected lengths 1, 2, 3 and N=4 must give
    # ranks 1, 1, 0: floor(1 - (l-1)/2 + 0.5)
    for l, want in [(1.0, 1), (2.0, 1), (3.0, 0)]:
        assert math.floor(4 - 3 - (l - 1.0) * (4 - 3) / (3.0 - 1.0) + 0.5) == want
