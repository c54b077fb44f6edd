import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rigor.kempe import DegreeError, TrigPoly, angle_expand, form_from_terms, grid_check, parse_trig


def terms_of(form):
    return sorted((t.r, t.s, round(t.A, 12), round(t.t, 12)) for t in form.terms)


def test_product_to_sum():
    form = angle_expand("cos(theta)*cos(phi)")
    assert form.constant == 0
    assert terms_of(form) == [(1, -1, 0.5, 0.0), (1, 1, 0.5, 0.0)]


def test_sine_is_phase_shift():
    form = angle_expand("sin(theta)")
    (t,) = form.terms
    assert (t.A, t.r, t.s) == (1, 1, 0) and t.t == pytest.approx(-math.pi / 2)


def test_double_angle():
    form = angle_expand("cos(theta)^2")
    assert form.constant == pytest.approx(0.5)
    assert terms_of(form) == [(2, 0, 0.5, 0.0)]


def test_like_terms_merge_and_cancel():
    # cos^2 + sin^2 = 1 leaves only the constant
    form = angle_expand("cos(t)^2 + sin(t)^2")
    assert form.terms == () or len(form.terms) == 0
    assert form.constant == pytest.approx(1.0)


def test_parser_accepts_aliases_and_fractions():
    p = parse_trig("1/2*cos(x)*sin(y) - 3")
    assert p(0.3, 0.4) == pytest.approx(0.5 * math.cos(0.3) * math.sin(0.4) - 3)
    assert parse_trig("cos(θ)**2")(0.2) == pytest.approx(math.cos(0.2) ** 2)


@pytest.mark.parametrize("bad", ["cos(2*theta)", "tan(theta)", "cos(theta)/sin(theta)", "import os", "cos(z)"])
def test_parser_rejects(bad):
    with pytest.raises(ValueError):
        parse_trig(bad)


def test_degree_guard():
    with pytest.raises(DegreeError):
        angle_expand("cos(theta)^13")
    angle_expand("cos(theta)^12")


def test_exact_coefficients_are_rational():
    form = angle_expand(TrigPoly({(3, 0, 0, 0): Fraction(1)}))
    amps = sorted(t.A for t in form.terms)
    assert amps == pytest.approx([0.25, 0.75])


def test_form_from_terms_round_trip():
    form = form_from_terms([(2.0, 1, 0, 0.3), (-1.0, 2, 1, 0.0)], constant=0.5)
    th, ph = 0.7, -0.2
    want = 0.5 + 2 * math.cos(th + 0.3) - math.cos(2 * th + ph)
    assert form(th, ph) == pytest.approx(want)
    assert form.abs_sum == pytest.approx(3.0)


monomial = st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4), st.integers(0, 4))
coeff = st.integers(-10, 10)


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(monomial, coeff, min_size=1, max_size=6))
def test_expansion_matches_polynomial_on_grid(coeffs):
    poly = TrigPoly({k: Fraction(v) for k, v in coeffs.items()})
    form = angle_expand(poly)
    assert grid_check(poly, form) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(st.dictionaries(monomial, coeff, min_size=1, max_size=4))
def test_abs_sum_bounds_values(coeffs):
    poly = TrigPoly({k: Fraction(v) for k, v in coeffs.items()})
    form = angle_expand(poly)
    grid = np.linspace(-math.pi, math.pi, 9)
    top = max(abs(form(a, b)) for a in grid for b in grid)
    assert top <= form.abs_sum + abs(form.constant) + 1e-9
