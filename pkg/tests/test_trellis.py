import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdmr import trellis
from tdmr.grains import A, B, C, D, E, F, G, H, I, solve_grain_distribution
from tdmr.trellis import FeedbackProbs, label_of, state_index

STATES = trellis.enumerate_states()


def S(name):
    return (label_of(name[0]), label_of(name[1]))


def test_allowed_below_examples():
    assert trellis.allowed_below(A) == {A, B, D, E, F, H}
    assert trellis.allowed_below(B) == {C}
    assert trellis.allowed_below(F) == {G}
    assert trellis.allowed_below(H) == {I}


def test_allowed_right_examples():
    assert trellis.allowed_right(D) == {E}
    assert trellis.allowed_right(G) == {I}
    assert trellis.allowed_right(A) == {A, B, C, D, F, G}
    assert trellis.allowed_right(F) == {H}


def test_state_enumeration():
    assert len(STATES) == 39
    names = [trellis.state_name(s) for s in STATES]
    assert names == sorted(names)
    for n in ("AA", "BC", "FG", "DD"):
        assert n in names
    for n in ("AC", "FH"):
        assert n not in names
    with pytest.raises(ValueError):
        state_index("AC")


AA_ROW = {
    "AA": ((2, 0, 0, 0), "N"), "AB": ((1, 1, 0, 0), "N"), "AD": ((1, 0, 1, 0), "N"),
    "AF": ((1, 0, 0, 1), "N"), "BC": ((0, 1, 0, 0), "N"), "CA": ((1, 0, 0, 0), "B"),
    "CB": ((0, 1, 0, 0), "B"), "CD": ((0, 0, 1, 0), "B"), "CF": ((0, 0, 0, 1), "B"),
    "DA": ((1, 0, 1, 0), "N"), "DB": ((0, 1, 1, 0), "N"), "DD": ((0, 0, 2, 0), "N"),
    "DF": ((0, 0, 1, 1), "N"), "FG": ((0, 0, 0, 1), "N"), "GA": ((1, 0, 0, 0), "F"),
    "GB": ((0, 1, 0, 0), "F"), "GD": ((0, 0, 1, 0), "F"), "GF": ((0, 0, 0, 1), "F"),
}


def test_row_aa_matches_reference_row():
    row = trellis.symbolic_transition_table()[state_index("AA")]
    nonzero = {trellis.state_name(s): f for s, f in zip(STATES, row) if f is not None}
    assert len(nonzero) == 18
    assert {k: (f.exponents, f.feedback) for k, f in nonzero.items()} == AA_ROW
    assert not any(f.one_row for f in nonzero.values())


def test_transition_examples():
    dist = solve_grain_distribution(0.2)
    fb = FeedbackProbs(0.3, 0.1)
    p1, p2, p3, p4 = dist.as_array()
    assert trellis.transition_probability(S("AA"), S("DF"), dist, fb) == pytest.approx(p4 * p3 * 0.6)
    assert trellis.transition_probability(S("AA"), S("CA"), dist, fb) == pytest.approx(p1 * 0.3)
    assert trellis.transition_probability(S("AA"), S("EA"), dist, fb) == 0.0
    assert trellis.transition_probability(S("AA"), S("AA"), dist, fb) == pytest.approx(p1 * p1 * 0.6)
    assert trellis.transition_probability(S("DD"), S("EE"), dist, fb) == 1.0
    with pytest.raises(ValueError):
        trellis.transition_probability(S("AC"), S("AA"), dist, fb)


def test_one_row_starts_are_renormalized():
    # bottom continues (D -> E) while the top starts fresh: only A or D fit on top
    f = trellis.transition_factor(S("AD"), S("AE"))
    assert f.one_row and str(f) == "P1*P(~B,~F)/(P1+P3)"
    assert str(trellis.transition_factor(S("AD"), S("DE"))) == "P3*P(~B,~F)/(P1+P3)"
    # a vertical grain arriving from above is unaffected
    assert str(trellis.transition_factor(S("AD"), S("CE"))) == "P(B)"


CORNERS = [FeedbackProbs(0, 0), FeedbackProbs(1, 0), FeedbackProbs(0, 1), FeedbackProbs(0.5, 0.5)]


@pytest.mark.parametrize("p2", [0.0, 0.17, 0.36, 0.5])
@pytest.mark.parametrize("fb", CORNERS, ids=str)
def test_rows_sum_to_one_at_corners(p2, fb):
    dist = solve_grain_distribution(p2)
    for prev in STATES:
        total = sum(trellis.transition_probability(prev, nxt, dist, fb) for nxt in STATES)
        assert abs(total - 1) < 1e-12, trellis.state_name(prev)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.5), st.floats(0, 1), st.floats(0, 1))
def test_rows_sum_to_one_random(p2, a, b):
    pb, pf = a * (1 - b), (1 - a) * b * 0.999
    dist = solve_grain_distribution(p2)
    mats = trellis.transition_matrices(dist)
    T = (1 - pb - pf) * mats["N"] + pb * mats["B"] + pf * mats["F"] + mats["1"]
    np.testing.assert_allclose(T.sum(axis=1), 1.0, atol=1e-12)


def test_zero_consistency():
    for prev, nxt in itertools.product(STATES, STATES):
        if trellis.transition_factor(prev, nxt) is not None:
            assert nxt[0] in trellis.allowed_right(prev[0])
            assert nxt[1] in trellis.allowed_right(prev[1])
            assert nxt[1] in trellis.allowed_below(nxt[0])


def test_feedback_probs_validation():
    assert FeedbackProbs(0.2, 0.3).pNeither == pytest.approx(0.5)
    with pytest.raises(ValueError):
        FeedbackProbs(0.7, 0.4)
    with pytest.raises(ValueError):
        FeedbackProbs(-0.1, 0.0)


def test_output_table_shape_values_and_normalization():
    t = trellis.output_table()
    assert t.shape == (16, 4, 39) and t.size == 2496
    assert set(np.unique(t)) <= {0.0, 0.125, 0.25, 0.5}
    np.testing.assert_allclose(t.sum(axis=0), 1.0, atol=1e-15)


def ys():
    return list(itertools.product((-1, 1), repeat=4))


def us():
    return list(itertools.product((-1, 1), repeat=2))


def test_output_fg_block():
    for u in us():
        for y in ys():
            expect = 0.5 if len(set(y)) == 1 else 0.0
            assert trellis.output_probability(y, u, S("FG")) == expect


def test_output_aa_writes_inputs():
    for u in us():
        for y in ys():
            expect = 0.25 if (y[0], y[1]) == u else 0.0
            assert trellis.output_probability(y, u, S("AA")) == expect


def test_output_dd_rows():
    for u in us():
        for y in ys():
            expect = 0.25 if (y[0] == y[2] and y[1] == y[3]) else 0.0
            assert trellis.output_probability(y, u, S("DD")) == expect


def test_output_db_top_row():
    for u in us():
        for y in ys():
            expect = 0.125 if y[0] == y[2] else 0.0
            assert trellis.output_probability(y, u, S("DB")) == expect


def test_stage_weights_only_touch_square_state():
    w = trellis.stage_weights()
    assert w[state_index("FG")] == 0.5
    assert np.count_nonzero(w != 1) == 1


def test_boundary_masks():
    exit_ok = trellis.boundary_exit()
    assert exit_ok[state_index("AA")] == 1 and exit_ok[state_index("DD")] == 0
    assert exit_ok[state_index("FG")] == 0 and exit_ok[state_index("HI")] == 1
    cross = trellis.crosses_bottom()
    assert cross[state_index("AB")] and cross[state_index("AF")] and cross[state_index("AH")]
    assert not cross[state_index("FG")]


def test_dump_contains_reference_factor():
    text = trellis.dump_tables(solve_grain_distribution(0.25))
    assert "AA -> DF : P3*P4*P(~B,~F)" in text
    assert "FG ++ ++++ : 0.5" in text
