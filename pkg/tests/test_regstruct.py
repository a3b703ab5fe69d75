from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdelab.regstruct import (
    AC2,
    AC3,
    MAC_LINES,
    REFERENCE_SYMBOLS,
    REFERENCE_COPRODUCTS,
    GroupElement,
    PlusSymbol,
    Structure,
    jet_index_report,
    mac_expected,
    parse_plus,
    parse_symbol,
    reference_symbols,
    reference_coproduct,
)

S = AC3
GENERATED = S.generate(F(3, 2))
REFERENCE_SET = {sym for _, sym, _ in reference_symbols()}
REFERENCE_COPRODUCT_SYMBOLS = [sym for row in REFERENCE_COPRODUCTS for sym, _ in reference_coproduct(row)]


def g_from(seed: int) -> GroupElement:
    """A group-like functional with rational values fixed by ``seed``."""

    def jet(k, tau):
        return F((seed * 7 + 3 * sum(i * e for i, e in enumerate(k, 1)) + len(str(tau))) % 11 - 5, 3)

    return GroupElement(tuple(F(seed + i, 2) - 1 for i in range(4)), jet)


# parsing and degrees ------------------------------------------------------------


@pytest.mark.parametrize(
    "text,degree",
    [
        ("I(Xi)^3", (F(-3, 2), F(-3))),
        ("X1", (F(1), F(0))),
        ("X0", (F(2), F(0))),
        ("I(I(Xi)^3)*I(Xi)^2", (F(-1, 2), F(-5))),
        ("Xi", (F(-5, 2), F(-1))),
    ],
)
def test_degree_examples(text, degree):
    assert S.degree(S.parse(text)) == degree


def test_integration_of_polynomials_vanishes():
    assert S.I(S.X((0, 1, 0, 0))) is None
    assert S.I(S.unit) is None
    with pytest.raises(ValueError):
        parse_symbol("I(X1)")


@pytest.mark.parametrize("sym", GENERATED, ids=str)
def test_format_parse_round_trip(sym):
    assert S.parse(str(sym)) == sym


def test_products_are_canonical():
    assert S.parse("I(Xi)*I(I(Xi))") == S.parse("I(I(Xi))*I(Xi)")
    assert S.parse("X1*I(Xi)^2") == S.parse("I(Xi)*X1*I(Xi)")


def test_two_dimensional_noise_degree():
    assert AC2.degree(AC2.xi) == (F(-2), F(-1))
    with pytest.raises(ValueError):
        Structure(0)


# generation ----------------------------------------------------------------------


def test_reference_rows_are_generated_with_listed_degrees():
    rows = reference_symbols()
    assert len(REFERENCE_SYMBOLS) == 16 and len(rows) == 20
    for row, sym, deg in rows:
        assert sym in GENERATED, row
        assert S.degree(sym) == deg, row


def test_generated_set_is_exactly_the_reference_list():
    # the reference list has 16 rows, 20 symbols with X_i counted per axis
    assert set(GENERATED) == REFERENCE_SET


def test_generated_set_is_closed_and_capped():
    assert len(GENERATED) == len(set(GENERATED))
    assert all(S.degree(s) <= (F(3, 2), F(0)) for s in GENERATED)
    # integrands of planted subtrees are themselves generated
    gen = set(GENERATED)
    assert all(c in gen for s in GENERATED for c in s.children)


def test_negative_cap():
    names = {str(s) for s in S.generate(F(-1, 2))}
    assert names == {"Xi", "I(Xi)^3", "I(Xi)^2", "I(I(Xi)^3)*I(Xi)^2", "I(Xi)"}


def test_minimum_degree_is_the_noise():
    assert min(S.degree(s) for s in GENERATED) == S.degree(S.xi)


# coproduct ---------------------------------------------------------------------------


@pytest.mark.parametrize("row", list(REFERENCE_COPRODUCTS))
def test_reference_coproducts(row):
    for sym, expected in reference_coproduct(row):
        assert dict(S.coproduct(sym)) == dict(expected)


def test_cherry_coproduct_is_primitive():
    assert dict(S.coproduct(S.parse("I(Xi)^2"))) == {(S.parse("I(Xi)^2"), S.plus_unit): 1}
    assert dict(S.coproduct(S.xi)) == {(S.xi, S.plus_unit): 1}


@pytest.mark.parametrize("sym", GENERATED, ids=str)
def test_coassociativity(sym):
    assert S.coassociativity_defect(sym) == {}


@pytest.mark.parametrize("sym", GENERATED, ids=str)
def test_degree_bookkeeping(sym):
    d = S.degree(sym)
    for (left, right), c in S.coproduct(sym).items():
        dl, dr = S.degree(left), S.plus_degree(right)
        assert (dl[0] + dr[0], dl[1] + dr[1]) == d
        for k, tau in right.jets:
            assert S.jet_allowed(k, tau)


def test_positive_symbols_reject_nonpositive_jets():
    assert parse_plus("X1*J1(I(Xi))") == PlusSymbol((0, 1, 0, 0), (((0, 1, 0, 0), S.parse("I(Xi)")),))
    with pytest.raises(ValueError):
        parse_plus("J0(Xi)")
    with pytest.raises(ValueError):
        parse_plus("J1(I(Xi)^2)")


def test_jet_indices_of_table_symbols_are_first_order():
    assert jet_index_report(S, REFERENCE_SET) == {}
    # higher jets appear only on generated symbols outside the reference list
    report = jet_index_report(S, GENERATED)
    assert report and not set(report) & REFERENCE_SET


# structure group ---------------------------------------------------------------------


def test_noise_is_invariant():
    for seed in range(5):
        assert S.gamma_action(g_from(seed), S.xi) == {S.xi: 1}


def test_gamma_on_RSIW():
    g = g_from(2)
    sym = S.parse("I(I(Xi)^3)")
    expected = {sym: 1, S.unit: g.jet(S.zero_k, S.parse("I(Xi)^3"))}
    assert S.gamma_action(g, sym) == {k: v for k, v in expected.items() if v}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50))
def test_group_property(a, b):
    g, h = g_from(a), g_from(b)
    gh = S.convolve(g, h)
    for sym in REFERENCE_COPRODUCT_SYMBOLS:
        assert S.apply_gamma(g, S.gamma_action(h, sym)) == S.gamma_action(gh, sym)


@pytest.mark.parametrize("sym", REFERENCE_COPRODUCT_SYMBOLS, ids=str)
def test_gamma_moves_to_lower_degree(sym):
    out = S.gamma_action(g_from(4), sym)
    assert out.get(sym) == 1
    assert all(S.degree(t) < S.degree(sym) for t in out if t != sym)


# renormalisation ---------------------------------------------------------------------


@pytest.mark.parametrize("row", list(MAC_LINES))
def test_renormalisation_lines(row):
    assert S.renormalize(S.parse(row)) == mac_expected(row)


def test_wick_extraction_count():
    assert S.L1(S.parse("I(Xi)^3")) == {S.parse("I(Xi)"): 3}
    assert S.L2(S.parse("I(I(Xi)^2)*I(Xi)^2")) == {S.unit: 1}


@pytest.mark.parametrize("sym", GENERATED, ids=str)
def test_renormalisation_raises_degree(sym):
    d = S.degree(sym)
    for t in S.renormalize(sym):
        if t != sym:
            assert S.degree(t) > d
