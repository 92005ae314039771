import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from cachecast.errors import ParameterError
from cachecast.numerics import (
    QuadratureRule,
    exp_int_ei,
    exp_scaled_e1,
    gauss_hermite_rule,
    log_char_moment,
    q_function,
    regularized_upper_gamma,
    second_moment_log1p,
)


def ei_oracle(x: float) -> float:
    """Adaptive quadrature of the defining integral -int_{-x}^inf e^-u/u du."""
    value, err = integrate.quad(lambda u: math.exp(-u) / u, -x, np.inf, limit=300)
    assert err < 1e-9  # QUADPACK's estimate is conservative
    return -value


# ---------------------------------------------------------------- Ei

def test_ei_at_minus_one_matches_integral_oracle():
    oracle = ei_oracle(-1.0)
    assert oracle == pytest.approx(-0.21938393439552027, abs=1e-11)
    assert exp_int_ei(-1.0) == pytest.approx(oracle, abs=1e-11)
    assert exp_int_ei(-1.0) == pytest.approx(-0.21938393439552027, abs=1e-13)


@pytest.mark.parametrize("a", [0.1, 1.0, 10.0])
def test_ei_sandwich_spot_values(a):
    value = exp_int_ei(-a)
    assert -math.exp(-a) * math.log1p(1.0 / a) < value
    assert value < -0.5 * math.exp(-a) * math.log1p(2.0 / a)


@given(st.floats(min_value=1e-3, max_value=1e3))
def test_ei_sandwich_property(a):
    # scaled by exp(a) so the comparison stays meaningful where exp(-a)
    # underflows to subnormals: ln(1+2/a)/2 < -exp(a) Ei(-a) < ln(1+1/a)
    scaled = exp_scaled_e1(a)
    assert 0.5 * math.log1p(2.0 / a) < scaled < math.log1p(1.0 / a)
    if a < 500:
        value = exp_int_ei(-a)
        assert -math.exp(-a) * math.log1p(1.0 / a) < value < 0.0
        assert value < -0.5 * math.exp(-a) * math.log1p(2.0 / a)


def test_ei_vanishes_in_the_far_tail():
    assert abs(exp_int_ei(-100.0)) < 1e-40


@pytest.mark.parametrize("x", [0.0, 1.0, float("inf"), float("nan")])
def test_ei_rejects_nonnegative_arguments(x):
    with pytest.raises(ParameterError):
        exp_int_ei(x)


@pytest.mark.parametrize("a", [1e-3, 0.05, 0.5, 2.0, 7.0, 9.999, 10.001, 30.0, 300.0])
def test_ei_against_scipy(a):
    assert exp_int_ei(-a) == pytest.approx(float(special.expi(-a)), rel=5e-8, abs=1e-13)


@pytest.mark.parametrize("a", [0.01, 1.0, 9.0, 11.0, 100.0, 1e4])
def test_exp_scaled_e1_against_scipy(a):
    expected = float(np.exp(a) * special.exp1(a)) if a < 500 else None
    if expected is not None:
        assert exp_scaled_e1(a) == pytest.approx(expected, rel=5e-8)


def test_exp_scaled_e1_never_overflows():
    # e^a E1(a) -> 1/a; the unscaled factors would overflow past a ~ 710
    value = exp_scaled_e1(1e6)
    assert value == pytest.approx(1e-6, rel=1e-4)


# ---------------------------------------------------------------- Q function

def test_q_at_zero_is_half():
    assert q_function(0.0) == 0.5


@pytest.mark.parametrize("y", [-3.0, 0.7, 5.0])
def test_q_complementarity(y):
    assert q_function(y) + q_function(-y) == pytest.approx(1.0, abs=1e-15)


@given(st.floats(min_value=-8, max_value=8))
def test_q_symmetry_and_range(y):
    q = q_function(y)
    assert 0.0 <= q <= 1.0
    assert q + q_function(-y) == pytest.approx(1.0, abs=1e-14)


def test_q_tail_decile_matches_density_integration():
    oracle, err = integrate.quad(
        lambda u: math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi), 1.2816, np.inf)
    assert err < 1e-9
    assert q_function(1.2816) == pytest.approx(oracle, abs=1e-10)
    assert q_function(1.2816) == pytest.approx(0.1000, abs=1e-4)


def test_q_strictly_decreasing_on_grid():
    grid = np.linspace(-6, 6, 200)
    values = [q_function(y) for y in grid]
    assert all(a > b for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------- Gauss-Hermite

def test_rule_of_order_one_is_the_zeroth_moment_rule():
    rule = gauss_hermite_rule(1)
    assert rule.nodes[0] == pytest.approx(0.0, abs=1e-15)
    assert rule.weights[0] == pytest.approx(math.sqrt(math.pi), rel=1e-14)


@pytest.mark.parametrize("order", [1, 2, 5, 7, 16, 33, 64])
def test_weights_sum_to_zeroth_gaussian_moment(order):
    rule = gauss_hermite_rule(order)
    assert rule.weights.sum() == pytest.approx(math.sqrt(math.pi), rel=1e-13)


def test_second_moment_with_seven_nodes():
    rule = gauss_hermite_rule(7)
    assert rule.integrate(lambda x: x * x) == pytest.approx(
        math.sqrt(math.pi) / 2.0, rel=1e-10)


@pytest.mark.parametrize("order", [2, 5, 8, 16, 32, 64])
def test_even_gaussian_moments_up_to_exactness_degree(order):
    rule = gauss_hermite_rule(order)
    for m in range(order):  # degree 2m <= 2*order - 1
        exact = math.gamma(m + 0.5)
        assert rule.integrate(lambda x, m=m: x ** (2 * m)) == pytest.approx(
            exact, rel=1e-9), f"moment 2m={2 * m} at order {order}"


@pytest.mark.parametrize("order", [0, -3, 65, 7.5])
def test_rule_order_bounds(order):
    with pytest.raises(ParameterError):
        gauss_hermite_rule(order)


def test_rule_arrays_are_read_only():
    rule = gauss_hermite_rule(5)
    with pytest.raises(ValueError):
        rule.nodes[0] = 1.0
    with pytest.raises(ValueError):
        rule.weights[0] = 1.0


def test_rule_validation_rejects_asymmetric_nodes():
    with pytest.raises(ParameterError):
        QuadratureRule(order=2, nodes=np.array([0.0, 1.0]),
                       weights=np.array([1.0, math.sqrt(math.pi) - 1.0]))


# ---------------------------------------------------------------- CF of ln(1+SNR)

def test_cf_at_zero_is_exactly_one():
    assert log_char_moment(0.0, 3.7) == complex(1.0, 0.0)


@pytest.mark.parametrize("t", [0.5, 3.0, 20.0])
def test_cf_modulus_bounded_by_one(t):
    assert abs(log_char_moment(t, 1.0)) <= 1.0 + 1e-9


@given(st.floats(min_value=0.05, max_value=40.0),
       st.floats(min_value=0.05, max_value=50.0))
def test_cf_conjugate_symmetry(t, rho):
    forward = log_char_moment(t, rho)
    backward = log_char_moment(-t, rho)
    assert backward.real == pytest.approx(forward.real, abs=1e-12)
    assert backward.imag == pytest.approx(-forward.imag, abs=1e-12)


def test_cf_matches_monte_carlo_oracle():
    rng = np.random.Generator(np.random.Philox(20240117))
    draws = rng.exponential(1.0, size=10_000_000)
    y = np.log1p(draws)
    mc_re, mc_im = float(np.cos(y).mean()), float(np.sin(y).mean())
    se_re = float(np.cos(y).std(ddof=1)) / math.sqrt(y.size)
    se_im = float(np.sin(y).std(ddof=1)) / math.sqrt(y.size)
    value = log_char_moment(1.0, 1.0)
    assert abs(value.real - mc_re) < 3 * se_re
    assert abs(value.imag - mc_im) < 3 * se_im


def test_cf_matches_complex_order_exponential_integral():
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 30
    for t, rho in [(0.5, 1.0), (4.0, 1.0), (2.0, 0.1), (7.0, 10.0)]:
        reference = complex(
            mpmath.exp(1 / mpmath.mpf(rho)) / rho * mpmath.expint(-1j * t, 1 / mpmath.mpf(rho)))
        assert log_char_moment(t, rho) == pytest.approx(reference, abs=1e-10)


def test_cf_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        log_char_moment(1.0, 0.0)
    with pytest.raises(ParameterError):
        log_char_moment(float("nan"), 1.0)


# ---------------------------------------------------------------- second moment

def test_second_moment_small_rho_asymptote():
    rho = 1e-4
    # ln(1+x) ~ x there, so the moment approaches E[x^2] = 2 rho^2
    assert second_moment_log1p(rho) / (2 * rho * rho) == pytest.approx(1.0, abs=5e-3)


def test_second_moment_dual_quadrature_oracles_agree():
    direct, err1 = integrate.quad(
        lambda x: math.log1p(x) ** 2 * math.exp(-x), 0, np.inf, limit=200)
    substituted, err2 = integrate.quad(
        lambda s: math.log1p(1.0 * s) ** 2 * math.exp(-s), 0, np.inf, limit=200)
    assert abs(direct - substituted) < 1e-8
    assert second_moment_log1p(1.0) == pytest.approx(direct, abs=1e-8)


@pytest.mark.parametrize("rho", [0.01, 1.0, 100.0])
def test_variance_is_strictly_positive(rho):
    mean = exp_scaled_e1(1.0 / rho)
    assert second_moment_log1p(rho) - mean * mean > 0.0


def test_second_moment_monotone_in_rho():
    grid = [1e-3, 1e-2, 0.1, 1.0, 10.0, 1e3, 1e5]
    values = [second_moment_log1p(r) for r in grid]
    assert all(a < b for a, b in zip(values, values[1:]))


@given(st.floats(min_value=1e-3, max_value=1e4),
       st.floats(min_value=1.01, max_value=10.0))
def test_second_moment_monotone_property(rho, factor):
    assert second_moment_log1p(rho) < second_moment_log1p(rho * factor)


def test_second_moment_domain():
    with pytest.raises(ParameterError):
        second_moment_log1p(0.0)
    with pytest.raises(ParameterError):
        second_moment_log1p(1e7)


# ---------------------------------------------------------------- incomplete gamma

@given(st.floats(min_value=0.0, max_value=50.0))
def test_shape_one_is_the_exponential_survival(x):
    assert regularized_upper_gamma(1, x) == pytest.approx(math.exp(-x), rel=1e-12)


@pytest.mark.parametrize("shape", [1, 2, 5, 40])
def test_full_mass_at_zero(shape):
    assert regularized_upper_gamma(shape, 0.0) == 1.0


def test_two_term_finite_sum_value():
    assert regularized_upper_gamma(2, 1.0) == pytest.approx(2.0 / math.e, rel=1e-14)
    assert regularized_upper_gamma(2, 1.0) == pytest.approx(0.7357588823428847, rel=1e-12)


@pytest.mark.parametrize("shape", [1, 2, 3, 8, 25, 64])
@pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 7.5, 40.0, 200.0])
def test_matches_scipy_survival(shape, x):
    assert regularized_upper_gamma(shape, x) == pytest.approx(
        float(special.gammaincc(shape, x)), rel=1e-10, abs=1e-300)


@given(st.integers(min_value=1, max_value=30),
       st.floats(min_value=0.0, max_value=80.0),
       st.floats(min_value=0.01, max_value=10.0))
def test_survival_is_decreasing_in_x(shape, x, dx):
    hi = regularized_upper_gamma(shape, x + dx)
    lo = regularized_upper_gamma(shape, x)
    assert hi <= lo + 1e-12
    assert 0.0 <= hi <= 1.0


def test_gamma_parameter_errors():
    with pytest.raises(ParameterError):
        regularized_upper_gamma(0, 1.0)
    with pytest.raises(ParameterError):
        regularized_upper_gamma(2, -0.1)
