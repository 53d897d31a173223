"""Greedy rational interpolation, double-double refinement, certified refit.

The error-free transform primitives are checked in exact arithmetic with
hypothesis; the interpolation pipeline is checked end to end on the
rectangle whose certified degree is part of the package's golden values.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expmrect.aaa import (
    _DDAccumulator,
    _symmetrize_poles,
    _two_prod,
    _two_sum,
    aaa_poles,
    refit_partial_fractions,
)
from expmrect.bounds import BoundingRectangle
from expmrect.errors import DegreeExhausted, PoleInsideRegion, RefitFailed
from expmrect.rational import (
    boundary_samples,
    classify_conjugate_poles,
    eval_rational,
    sup_error_on_rectangle,
)

GOLDEN_RECT = BoundingRectangle(mu_min=-1.0, mu_max=0.0, nu_min=-0.5, nu_max=0.5)

finite_floats = st.floats(
    min_value=-1e150, max_value=1e150, allow_nan=False, allow_infinity=False
)

# Dekker's product transform is exact only while a*b neither overflows nor
# falls into the subnormal range where the error term is unrepresentable.
normal_range_floats = st.floats(
    min_value=1e-120, max_value=1e120, allow_nan=False, allow_infinity=False
) | st.floats(
    min_value=-1e120, max_value=-1e-120, allow_nan=False, allow_infinity=False
)


@given(finite_floats, finite_floats)
def test_two_sum_is_exact(a, b):
    s, e = _two_sum(a, b)
    assert Fraction(a) + Fraction(b) == Fraction(s) + Fraction(e)


@given(normal_range_floats, normal_range_floats)
@settings(max_examples=200)
def test_two_prod_is_exact(a, b):
    p, e = _two_prod(a, b)
    assert Fraction(a) * Fraction(b) == Fraction(p) + Fraction(e)


def test_dd_accumulator_beats_naive_summation():
    # alternating huge/tiny/-huge terms whose exact sum is 11; plain float64
    # accumulation swallows every one of the tiny contributions
    acc = _DDAccumulator(np.zeros(1))
    naive = 0.0
    for _ in range(11):
        for term in (1e16, 1.0, -1e16):
            acc.add_product(np.array([term]), 1.0)
            naive += term
    assert float(acc.value()[0]) == 11.0
    assert naive == 0.0


def test_dd_accumulator_product_terms():
    acc = _DDAccumulator(np.array([-1e16]))
    acc.add_product(np.array([1e8 + 1.0]), 1e8 - 1.0)  # exact: 1e16 - 1
    assert float(acc.value()[0]) == -1.0


# --------------------------------------------------------------------------
# pole symmetrization
# --------------------------------------------------------------------------

def test_symmetrize_pairs_drifted_conjugates():
    drift = 1e-5
    poles = np.array([2.0 + 1.0j, 2.0 + drift - (1.0 + drift) * 1j])
    out = _symmetrize_poles(poles, GOLDEN_RECT)
    assert classify_conjugate_poles(out) is not None
    assert out[0] == np.conj(out[1])


def test_symmetrize_snaps_lone_near_real_pole():
    poles = np.array([3.0 + 1e-9j])
    out = _symmetrize_poles(poles, GOLDEN_RECT)
    assert out[0].imag == 0.0


def test_symmetrize_leaves_asymmetric_rectangles_alone():
    rect = BoundingRectangle(mu_min=-1.0, mu_max=0.0, nu_min=-0.2, nu_max=0.5)
    poles = np.array([3.0 + 1e-9j])
    out = _symmetrize_poles(poles, rect)
    assert out[0].imag == 1e-9


# --------------------------------------------------------------------------
# greedy interpolation + certified refit
# --------------------------------------------------------------------------

def test_aaa_poles_golden_rectangle():
    boundary = boundary_samples(GOLDEN_RECT, 120)
    target = 1e-8 / (1.0 + np.sqrt(2.0))
    poles = aaa_poles(boundary, target)
    assert poles.size <= 8
    assert classify_conjugate_poles(poles) is not None
    for p in poles:
        assert not GOLDEN_RECT.contains(p)


def test_refit_certifies_golden_rectangle():
    boundary = boundary_samples(GOLDEN_RECT, 120)
    target = 1e-8 / (1.0 + np.sqrt(2.0))
    poles = aaa_poles(boundary, target)
    cert = refit_partial_fractions(poles, boundary_samples(GOLDEN_RECT, 500), target)
    assert cert.sup_error_estimate <= target
    assert cert.method == "rat-interp"
    assert cert.degree == poles.size
    # weight conjugate closure is exact, not approximate
    real_idx, pairs = classify_conjugate_poles(cert.form.poles)
    for i, j in pairs:
        assert cert.form.weights[i] == np.conj(cert.form.weights[j])
    for i in real_idx:
        assert cert.form.weights[i].imag == 0.0
    assert cert.form.gamma.imag == 0.0


def test_refit_evaluates_close_to_exp_inside():
    boundary = boundary_samples(GOLDEN_RECT, 200)
    target = 1e-8
    poles = aaa_poles(boundary, target)
    cert = refit_partial_fractions(poles, boundary, target)
    # maximum principle: interior error of the analytic difference is
    # bounded by the boundary sup
    zs = np.array([-0.5 + 0.25j, -0.1 - 0.4j, -0.9 + 0.0j])
    err = np.abs(eval_rational(cert.form, zs) - np.exp(zs))
    assert float(err.max()) <= cert.sup_error_estimate


def test_refit_fails_honestly_at_impossible_target():
    boundary = boundary_samples(GOLDEN_RECT, 120)
    poles = aaa_poles(boundary, 1e-8)
    with pytest.raises(RefitFailed) as ei:
        refit_partial_fractions(poles, boundary_samples(GOLDEN_RECT, 400), 1e-30)
    assert ei.value.context["target"] == 1e-30


def test_refit_rejects_pole_inside_rectangle():
    with pytest.raises(PoleInsideRegion):
        refit_partial_fractions(
            np.array([-0.5 + 0.0j]), boundary_samples(GOLDEN_RECT, 100), 1e-6
        )


def test_refit_requires_enough_samples():
    poles = np.array([3.0 + 1j, 3.0 - 1j, 2.0 + 0j] * 20)
    with pytest.raises(ValueError):
        refit_partial_fractions(poles, boundary_samples(GOLDEN_RECT, 10), 1e-6)


def test_aaa_degree_exhausts_on_tiny_cap():
    rect = BoundingRectangle(mu_min=-40.0, mu_max=-0.1, nu_min=-6.0, nu_max=6.0)
    boundary = boundary_samples(rect, 150)
    with pytest.raises(DegreeExhausted):
        aaa_poles(boundary, 1e-12, m_max=3)


def test_aaa_wide_rectangle_still_certifies():
    # a rectangle shaped like the tau = h_bar pencil rectangles
    rect = BoundingRectangle(mu_min=-35.0, mu_max=-0.2, nu_min=-2.5, nu_max=2.5)
    target = 1e-6 / ((1.0 + np.sqrt(2.0)) * 2.0)
    poles = aaa_poles(boundary_samples(rect, 300), target)
    cert = refit_partial_fractions(poles, boundary_samples(rect, 500), target)
    assert cert.sup_error_estimate <= target
    assert sup_error_on_rectangle(cert.form, rect) <= 1.21 * target
