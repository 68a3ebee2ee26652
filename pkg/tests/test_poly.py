"""Root classification and the reciprocal-coefficient involution."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnv.errors import InvalidSpec
from qnv.poly import (
    LinearKind,
    PolynomialSpec,
    RootKind,
    RootPosition,
    classify,
    dual_polynomial,
    eval_poly,
    has_root_at_or_above,
    roots_of,
)


def test_pure_brownian_motion_case():
    constants, profile = classify(PolynomialSpec(0.0, 0.0, 1.0, 1.0))
    assert constants.C == 0.0
    assert profile.kind is RootKind.LINEAR
    assert profile.linear_kind is LinearKind.ARITHMETIC_BM
    assert roots_of(profile) == []


def test_inverse_bessel_case():
    constants, profile = classify(PolynomialSpec(1.0, 0.0, 0.0, 1.0))
    assert constants.C == 0.0
    assert constants.mu0 == 1.0
    assert profile.kind is RootKind.DOUBLE_ROOT
    assert profile.r == 0.0
    assert not math.copysign(1.0, profile.r) < 0  # no negative zero leaking out


def test_two_real_roots_case():
    constants, profile = classify(PolynomialSpec(1.0, -3.0, 2.0, 1.5))
    assert constants.C == pytest.approx(-0.25, rel=1e-15)
    assert profile.kind is RootKind.TWO_REAL_ROOTS
    assert (profile.r1, profile.r2) == (pytest.approx(1.0), pytest.approx(2.0))
    assert profile.position is RootPosition.INSIDE


def test_complex_roots_case():
    constants, profile = classify(PolynomialSpec(1.0, 0.0, 1.0, 1.0))
    assert constants.C == 1.0
    assert profile.kind is RootKind.COMPLEX_ROOTS
    assert roots_of(profile) == []


def test_started_at_root_flag():
    _, profile = classify(PolynomialSpec(1.0, -3.0, 2.0, 2.0))
    assert profile.at_root
    _, profile = classify(PolynomialSpec(1.0, -3.0, 2.0, 2.5))
    assert not profile.at_root


def test_eval_poly():
    assert eval_poly(PolynomialSpec(1.0, -3.0, 2.0, 1.5), 1.0) == 0.0
    assert eval_poly(PolynomialSpec(0.0, 0.0, 1.0, 1.0), 7.0) == 1.0
    assert eval_poly(PolynomialSpec(1.0, 0.0, 1.0, 1.0), 2.0) == 5.0


def test_has_root_at_or_above():
    _, profile = classify(PolynomialSpec(1.0, -3.0, 2.0, 1.5))
    assert has_root_at_or_above(profile, 1.5)
    assert has_root_at_or_above(profile, 2.0)
    assert not has_root_at_or_above(profile, 2.5)


def test_dual_polynomial_examples():
    dual = dual_polynomial(PolynomialSpec(1.0, 0.0, 0.0, 1.0))
    assert dual.coefficients() == (0.0, 0.0, -1.0)
    assert dual.y0 == 1.0
    dual = dual_polynomial(PolynomialSpec(0.0, 1.0, 0.0, 2.0))
    assert dual.coefficients() == (0.0, -1.0, 0.0)
    assert dual.y0 == 0.5
    dual = dual_polynomial(PolynomialSpec(1.0, -3.0, 2.0, 1.0))
    assert dual.coefficients() == (-2.0, 3.0, -1.0)
    _, profile = classify(dual)
    assert sorted(roots_of(profile)) == [pytest.approx(0.5), pytest.approx(1.0)]


def test_invalid_specs_rejected():
    with pytest.raises(InvalidSpec):
        PolynomialSpec(float("nan"), 0.0, 1.0, 1.0)
    with pytest.raises(InvalidSpec):
        PolynomialSpec(0.0, 0.0, float("inf"), 1.0)
    with pytest.raises(InvalidSpec):
        PolynomialSpec(0.0, 0.0, 1.0, 0.0)
    with pytest.raises(InvalidSpec):
        PolynomialSpec(0.0, 0.0, 1.0, -1.0)


coeff = st.one_of(
    st.just(0.0),
    st.floats(0.01, 4.0, allow_nan=False),
    st.floats(-4.0, -0.01, allow_nan=False),
)
start = st.floats(0.05, 4.0, allow_nan=False)


@given(e1=coeff, e2=coeff, e3=coeff, y0=start)
@settings(max_examples=300, deadline=None)
def test_dual_is_an_involution(e1, e2, e3, y0):
    spec = PolynomialSpec(e1, e2, e3, y0)
    back = dual_polynomial(dual_polynomial(spec))
    assert back.coefficients() == spec.coefficients()
    assert back.y0 == pytest.approx(y0, rel=1e-15)


@given(e1=coeff, e2=coeff, e3=coeff, y0=start)
@settings(max_examples=300, deadline=None)
def test_dual_preserves_discriminant_constant(e1, e2, e3, y0):
    spec = PolynomialSpec(e1, e2, e3, y0)
    dual = dual_polynomial(spec)
    # both reduce to e1*e3 - e2^2/4 with the same products, so bit equality
    assert classify(dual)[0].C == classify(spec)[0].C


@given(e1=st.floats(0.2, 3.0), r1=st.floats(-2.0, 2.0), gap=st.floats(0.05, 3.0), y0=start, flip=st.booleans())
@settings(max_examples=300, deadline=None)
def test_two_root_specs_have_vanishing_poly_at_roots(e1, r1, gap, y0, flip):
    e1 = -e1 if flip else e1
    r2 = r1 + gap
    spec = PolynomialSpec(e1, -e1 * (r1 + r2), e1 * r1 * r2, y0)
    _, profile = classify(spec)
    if profile.kind is not RootKind.TWO_REAL_ROOTS:
        return  # tiny gap may collapse to a double root within tolerance
    scale = max(1.0, abs(spec.e1), abs(spec.e2), abs(spec.e3))
    assert abs(eval_poly(spec, profile.r1)) <= 1e-12 * scale * max(1.0, profile.r1**2)
    assert abs(eval_poly(spec, profile.r2)) <= 1e-12 * scale * max(1.0, profile.r2**2)


@given(e1=coeff, e2=coeff, e3=coeff, y0=start)
@settings(max_examples=300, deadline=None)
def test_root_layout_duality(e1, e2, e3, y0):
    # complex roots pair with complex roots; a zero double root pairs with a
    # constant dual; a single zero root pairs with a non-constant linear dual
    spec = PolynomialSpec(e1, e2, e3, y0)
    _, profile = classify(spec)
    _, dual_profile = classify(dual_polynomial(spec))
    if profile.kind is RootKind.COMPLEX_ROOTS:
        assert dual_profile.kind is RootKind.COMPLEX_ROOTS
    if profile.kind is RootKind.DOUBLE_ROOT and profile.r == 0.0:
        # dual polynomial is the nonzero constant -e1: arithmetic BM
        assert dual_profile.kind is RootKind.LINEAR
        assert dual_profile.linear_kind is LinearKind.ARITHMETIC_BM
    nonzero_roots = [r for r in roots_of(profile) if r != 0.0]
    for r in nonzero_roots:
        dual_roots = roots_of(dual_profile)
        assert any(abs(dr - 1.0 / r) <= 1e-9 * max(1.0, abs(1.0 / r)) for dr in dual_roots)
