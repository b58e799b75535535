"""Formula parsing, reference semantics, and progression."""
import itertools

import pytest
from hypothesis import given, settings, strategies as st

from ecrl.ltlf import (
    FALSE,
    LAST,
    TRUE,
    Always,
    And,
    Atom,
    Eventually,
    Iff,
    Implies,
    Next,
    Not,
    Or,
    ParseError,
    Until,
    UnknownPropositionError,
    WeakNext,
    accepts_empty_continuation,
    atoms_of,
    check_propositions,
    evaluate,
    expand_derived,
    is_core,
    parse,
    progress,
    simplify,
)

RG = ("r", "g")

# strict "touch r then touch g" task; used across the whole test suite
SEQ_RG = "(!r & !g) U ((r & !g) & X ((!r & !g) U (g & !r)))"


def S(*names):
    return frozenset(names)


def all_traces(atoms, max_len):
    """Every non-empty trace over 2^atoms up to max_len, deterministic order."""
    vals = [frozenset(c) for n in range(len(atoms) + 1) for c in itertools.combinations(atoms, n)]
    for length in range(1, max_len + 1):
        for combo in itertools.product(vals, repeat=length):
            yield list(combo)


# --- parsing ---------------------------------------------------------------


def test_parse_until_of_conjunctions():
    f = parse("(!r & !g) U (g & !r)", RG)
    assert f == Until(And(Not(Atom("r")), Not(Atom("g"))), And(Atom("g"), Not(Atom("r"))))


def test_parse_unary_chain_binds_tighter_than_and():
    f = parse("F (g1 & X F g2)", ("g1", "g2"))
    assert f == Eventually(And(Atom("g1"), Next(Eventually(Atom("g2")))))


def test_parse_until_binds_tighter_than_and():
    f = parse("a & b U c", ("a", "b", "c"))
    assert f == And(Atom("a"), Until(Atom("b"), Atom("c")))


def test_parse_until_right_associative():
    f = parse("a U b U c", ("a", "b", "c"))
    assert f == Until(Atom("a"), Until(Atom("b"), Atom("c")))


def test_parse_implies_right_associative_and_loosest_but_for_iff():
    f = parse("a -> b -> c", ("a", "b", "c"))
    assert f == Implies(Atom("a"), Implies(Atom("b"), Atom("c")))
    g = parse("a | b <-> c", ("a", "b", "c"))
    assert g == Iff(Or(Atom("a"), Atom("b")), Atom("c"))


def test_parse_constants_and_weak_next():
    assert parse("true", ()) == TRUE
    assert parse("false", ()) == FALSE
    assert parse("N a | last", ("a",)) == Or(WeakNext(Atom("a")), LAST)


def test_parse_reports_position_of_missing_operand():
    with pytest.raises(ParseError) as err:
        parse("r U", RG)
    assert err.value.position == 3


def test_parse_rejects_unknown_proposition_with_name():
    with pytest.raises(UnknownPropositionError) as err:
        parse("r & q", RG)
    assert err.value.name == "q"
    assert err.value.position == 4


def test_parse_rejects_stray_characters():
    with pytest.raises(ParseError):
        parse("r # g", RG)
    with pytest.raises(ParseError):
        parse("(r & g", RG)
    with pytest.raises(ParseError):
        parse("r g", RG)


def test_reserved_words_cannot_be_propositions():
    with pytest.raises(ValueError):
        check_propositions(["U"])
    with pytest.raises(ValueError):
        check_propositions(["r", "r"])
    with pytest.raises(ValueError):
        check_propositions(["not a name"])


def test_round_trip_through_canonical_text():
    for text in [SEQ_RG, "F (a & X F b)", "G (a -> X b)", "!a U (b <-> !c)", "N (a | last)"]:
        f = parse(text, ("a", "b", "c", "r", "g"))
        assert parse(f.to_text(), ("a", "b", "c", "r", "g")) == f


# --- reference semantics ---------------------------------------------------


def test_sequence_task_accepts_r_then_g():
    f = parse(SEQ_RG, RG)
    assert evaluate([S("r"), S("g")], 0, f) is True


def test_sequence_task_rejects_g_alone_and_rg_start():
    f = parse(SEQ_RG, RG)
    assert evaluate([S("g")], 0, f) is False
    assert evaluate([S("r", "g"), S("g")], 0, f) is False


def test_next_requires_a_successor_position():
    f = Next(Atom("r"))
    assert evaluate([S("r")], 0, f) is False
    assert evaluate([S(), S("r")], 0, f) is True


def test_weak_next_holds_at_last_position():
    f = WeakNext(Atom("r"))
    assert evaluate([S()], 0, f) is True
    assert evaluate([S(), S()], 0, f) is False


def test_last_holds_only_at_final_position():
    assert evaluate([S(), S()], 1, LAST) is True
    assert evaluate([S(), S()], 0, LAST) is False


def test_until_needs_witness_within_trace():
    f = Until(Atom("a"), Atom("b"))
    ab = ("a", "b")
    assert evaluate([S("a"), S("a"), S("b")], 0, f) is True
    assert evaluate([S("a"), S("a"), S("a")], 0, f) is False
    assert evaluate([S("b")], 0, f) is True
    # lhs must hold strictly before the witness, not at it
    assert evaluate([S("a"), S(), S("b")], 0, f) is False
    del ab


def test_globally_and_eventually_over_suffixes():
    g = parse("G a", ("a",))
    f = parse("F a", ("a",))
    assert evaluate([S("a"), S("a")], 0, g) is True
    assert evaluate([S("a"), S()], 0, g) is False
    assert evaluate([S(), S("a")], 0, f) is True
    assert evaluate([S(), S()], 0, f) is False


def test_evaluate_validates_inputs():
    with pytest.raises(ValueError):
        evaluate([], 0, TRUE)
    with pytest.raises(ValueError):
        evaluate([S()], 1, TRUE)


# --- core form -------------------------------------------------------------


def test_expand_derived_identities():
    a = Atom("a")
    assert expand_derived(Eventually(a)) == Until(TRUE, a)
    assert expand_derived(WeakNext(a)) == Or(LAST, Next(a))
    assert expand_derived(Implies(a, Atom("b"))) == Or(Not(a), Atom("b"))
    assert is_core(expand_derived(parse("G (a -> X b) <-> F c", ("a", "b", "c"))))


def test_simplify_folds_constants_and_orders_children():
    a = Atom("a")
    assert simplify(And(TRUE, a)) == a
    assert simplify(And(FALSE, a)) == FALSE
    assert simplify(Or(a, a)) == a
    assert simplify(Not(Not(a))) == a
    assert simplify(And(Atom("b"), a)) == simplify(And(a, Atom("b")))
    assert simplify(Until(a, TRUE)) == TRUE
    assert simplify(Until(FALSE, a)) == a
    assert simplify(Next(FALSE)) == FALSE


def test_progress_base_cases():
    assert progress(Atom("g"), S("g")) == TRUE
    assert progress(Atom("g"), S("r")) == FALSE
    assert progress(Next(Atom("g")), S()) == Atom("g")
    assert progress(LAST, S("g")) == FALSE


def test_progress_of_sequence_task_drops_to_inner_until():
    f = expand_derived(parse(SEQ_RG, RG))
    inner = expand_derived(parse("(!r & !g) U (g & !r)", RG))
    assert progress(f, S("r")) == simplify(inner)
    assert progress(f, S("r", "g")) == FALSE
    assert progress(f, S()) == simplify(f)


def test_accepts_empty_continuation_cases():
    assert accepts_empty_continuation(Until(TRUE, Atom("g")), S("g")) is True
    assert accepts_empty_continuation(Until(TRUE, Atom("g")), S()) is False
    assert accepts_empty_continuation(LAST, S()) is True
    assert accepts_empty_continuation(Next(TRUE), S()) is False


def test_progress_rejects_derived_operators():
    with pytest.raises(ValueError):
        progress(Eventually(Atom("a")), S())
    with pytest.raises(ValueError):
        accepts_empty_continuation(Eventually(Atom("a")), S())


def test_atoms_of_collects_names():
    assert atoms_of(parse(SEQ_RG, RG)) == frozenset(RG)


# --- property tests --------------------------------------------------------


def formulas(atom_names, max_depth=4):
    """Hypothesis strategy for formulas over the given atoms."""
    leaves = st.sampled_from([Atom(a) for a in atom_names] + [TRUE, FALSE, LAST])
    return st.recursive(
        leaves,
        lambda sub: st.one_of(
            st.builds(Not, sub),
            st.builds(Next, sub),
            st.builds(WeakNext, sub),
            st.builds(Eventually, sub),
            st.builds(Always, sub),
            st.builds(And, sub, sub),
            st.builds(Or, sub, sub),
            st.builds(Implies, sub, sub),
            st.builds(Iff, sub, sub),
            st.builds(Until, sub, sub),
        ),
        max_leaves=2 ** (max_depth - 1),
    )


@settings(deadline=None, max_examples=150)
@given(formulas(("a", "b")))
def test_expand_derived_preserves_semantics(f):
    """Core form and original agree on every position of every short trace."""
    core = expand_derived(f)
    assert is_core(core)
    for trace in all_traces(("a", "b"), 3):
        for i in range(len(trace)):
            assert evaluate(trace, i, core) == evaluate(trace, i, f)


@settings(deadline=None, max_examples=150)
@given(formulas(("a", "b")))
def test_simplify_preserves_semantics(f):
    core = simplify(expand_derived(f))
    for trace in all_traces(("a", "b"), 3):
        assert evaluate(trace, 0, core) == evaluate(trace, 0, f)


@settings(deadline=None, max_examples=100)
@given(formulas(("a", "b")))
def test_progress_matches_semantics_on_all_continuations(f):
    """state+t satisfies f  iff  t satisfies progress(f, state)."""
    core = simplify(expand_derived(f))
    states = [frozenset(), S("a"), S("b"), S("a", "b")]
    for s in states:
        residual = progress(core, s)
        for cont in all_traces(("a", "b"), 2):
            assert evaluate([s] + cont, 0, core) == evaluate(cont, 0, residual)


@settings(deadline=None, max_examples=150)
@given(formulas(("a", "b")))
def test_accepts_empty_continuation_equals_single_state_evaluate(f):
    core = simplify(expand_derived(f))
    for s in [frozenset(), S("a"), S("b"), S("a", "b")]:
        assert accepts_empty_continuation(core, s) == evaluate([s], 0, core)


@settings(deadline=None, max_examples=150)
@given(formulas(("a", "b")))
def test_canonical_text_round_trips(f):
    assert parse(f.to_text(), ("a", "b")) == f


@settings(deadline=None, max_examples=150)
@given(formulas(("a", "b")))
def test_simplify_is_idempotent(f):
    s = simplify(expand_derived(f))
    assert simplify(s) == s
