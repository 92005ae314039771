"""Special functions and quadrature rules used by the closed-form rate
expressions.

Everything here is pure and reentrant: no shared mutable state, safe for
concurrent use. All adaptive quadratures carry an absolute tolerance budget
(default ``QUAD_ABS_TOL``) and raise :class:`~cachecast.errors.NumericsError`
with the achieved residual when the budget cannot be met; they never fail
silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import NumericsError, ParameterError

EULER_GAMMA = 0.57721566490153286061

#: Default absolute-tolerance budget for adaptive quadratures.
QUAD_ABS_TOL = 1e-10

#: |x| below which Ei(x) uses the power series; beyond it a continued
#: fraction takes over. At the crossover both branches agree to better
#: than 1e-12 absolute.
_SERIES_CF_CROSSOVER = 10.0

_MAX_GH_ORDER = 64


def _checked_quad(func, a, b, *, weight=None, wvar=None, abs_tol=QUAD_ABS_TOL,
                  rel_tol=1e-11, limit=300, what="integral"):
    """scipy.integrate.quad with an explicit error budget.

    Returns the value; raises NumericsError when QUADPACK reports trouble
    and the achieved residual exceeds the budget by a wide margin.
    """
    out = integrate.quad(func, a, b, weight=weight, wvar=wvar, epsabs=abs_tol,
                         epsrel=rel_tol, limit=limit, full_output=1)
    value, abserr = out[0], out[1]
    if len(out) > 3 and abserr > 100.0 * max(abs_tol, rel_tol * abs(value)):
        raise NumericsError(
            f"{what} did not converge within budget: achieved residual "
            f"{abserr:.3e}, budget {abs_tol:.1e} (limit={limit})")
    if not math.isfinite(value):
        raise NumericsError(f"{what} evaluated to a non-finite value")
    return value


# ---------------------------------------------------------------------------
# exponential integral
# ---------------------------------------------------------------------------

def _e1_series(a: float) -> float:
    """E1(a) by the alternating power series, a in (0, ~10]."""
    total = 0.0
    term = 1.0
    for k in range(1, 400):
        term *= a / k
        contrib = term / k
        total += contrib if k % 2 == 1 else -contrib
        if contrib < 1e-18 * max(1.0, abs(total)):
            break
    return -EULER_GAMMA - math.log(a) + total

def _e1_cf_scaled(a: float) -> float:
    """exp(a)*E1(a) by a modified-Lentz continued fraction, a >= ~10.

    The scaled form never under- or overflows, which matters for the
    rate formulas that multiply E1 by large exponentials.
    """
    tiny = 1e-300
    b = a + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        coeff = -float(i * i)
        b += 2.0
        d = coeff * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + coeff / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise NumericsError(f"continued fraction for exp(a)E1(a) stalled at a={a}")

def exp_scaled_e1(a: float) -> float:
    """exp(a) * E1(a) for a > 0, evaluated without overflow.

    This is the building block of every closed-form average rate: for
    Z ~ Exp(mean theta) one has E[ln(1+Z)] = exp(1/theta) E1(1/theta).
    """
    if not (a > 0) or not math.isfinite(a):
        raise ParameterError(f"exp_scaled_e1 requires a > 0, got {a}")
    if a < _SERIES_CF_CROSSOVER:
        return math.exp(a) * _e1_series(a)
    return _e1_cf_scaled(a)

def exp_int_ei(x: float) -> float:
    """Exponential integral Ei(x) for strictly negative x.

    Ei(-a) = -E1(a) = -integral_a^inf exp(-u)/u du; the result is always
    negative and satisfies the sandwich
    ``-exp(-a) ln(1+1/a) < Ei(-a) < -(exp(-a)/2) ln(1+2/a)``.
    """
    if not (x < 0) or not math.isfinite(x):
        raise ParameterError(f"exp_int_ei is defined for x < 0 only, got {x}")
    a = -x
    if a < _SERIES_CF_CROSSOVER:
        return -_e1_series(a)
    return -_e1_cf_scaled(a) * math.exp(-a)


# ---------------------------------------------------------------------------
# Gaussian tail
# ---------------------------------------------------------------------------

def q_function(y: float) -> float:
    """Tail probability Q(y) = P(N(0,1) > y) = erfc(y/sqrt(2))/2."""
    return 0.5 * math.erfc(float(y) / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# Gauss-Hermite quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights integrating against the weight exp(-x^2).

    Immutable after construction and safe to share across workers.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if len(nodes) != self.order or len(weights) != self.order:
            raise ParameterError("rule arrays must both have length `order`")
        if np.any(weights <= 0):
            raise ParameterError("quadrature weights must be positive")
        if not np.allclose(nodes, -nodes[::-1], atol=1e-12):
            raise ParameterError("nodes must be symmetric about zero")
        zeroth = math.sqrt(math.pi)
        if abs(weights.sum() - zeroth) > 1e-12 * zeroth:
            raise ParameterError("weights must sum to the zeroth Gaussian moment")

    def integrate(self, func) -> float:
        """Approximate integral of func(x) * exp(-x^2) over the real line."""
        return float(np.sum(self.weights * func(self.nodes)))

def gauss_hermite_rule(order: int) -> QuadratureRule:
    """Gauss-Hermite rule of the given order (1 <= order <= 64).

    Nodes are the roots of the degree-``order`` (physicists') Hermite
    polynomial; the rule is exact for polynomials of degree 2*order-1
    against exp(-x^2).
    """
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= _MAX_GH_ORDER:
        raise ParameterError(
            f"Gauss-Hermite order must be an integer in [1, {_MAX_GH_ORDER}], got {order}")
    nodes, weights = np.polynomial.hermite.hermgauss(int(order))
    return QuadratureRule(order=int(order), nodes=nodes, weights=weights)


# ---------------------------------------------------------------------------
# log-SNR characteristic moments
# ---------------------------------------------------------------------------

def log_char_moment(t: float, rho: float, *, abs_tol=QUAD_ABS_TOL) -> complex:
    """E[(1+SNR)^{jt}] for SNR ~ Exp(mean rho), i.e. the characteristic
    function of ln(1+SNR) at frequency t.

    Evaluated as the oscillatory integral of exp(jty) against the density
    of Y = ln(1+SNR), which avoids a complex-order exponential integral.
    Satisfies |value| <= 1, value(0) = 1 exactly, and conjugate symmetry
    in t.
    """
    if not (rho > 0) or not math.isfinite(rho):
        raise ParameterError(f"rho must be positive and finite, got {rho}")
    if not math.isfinite(t):
        raise ParameterError(f"t must be finite, got {t}")
    if t == 0.0:
        return complex(1.0, 0.0)
    s = abs(float(t))
    # density of Y dies like exp(-(e^y-1)/rho); beyond this point it underflows
    ymax = math.log1p(760.0 * rho)

    def density(y):
        return math.exp(y - math.expm1(y) / rho) / rho

    re = _checked_quad(density, 0.0, ymax, weight="cos", wvar=s,
                       abs_tol=abs_tol, what=f"Re CF(t={t}, rho={rho})")
    im = _checked_quad(density, 0.0, ymax, weight="sin", wvar=s,
                       abs_tol=abs_tol, what=f"Im CF(t={t}, rho={rho})")
    value = complex(re, im if t > 0 else -im)
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise NumericsError(f"CF evaluation produced non-finite value at t={t}, rho={rho}")
    return value

def second_moment_log1p(rho: float) -> float:
    """E[(ln(1+SNR))^2] for SNR ~ Exp(mean rho).

    Direct numerical evaluation of the moment integral; strictly positive
    and at least the square of the mean.
    """
    if not (0 < rho <= 1e6) or not math.isfinite(rho):
        raise ParameterError(f"rho must lie in (0, 1e6], got {rho}")

    def integrand(s):
        return math.log1p(rho * s) ** 2 * math.exp(-s)

    return _checked_quad(integrand, 0.0, np.inf,
                         what=f"second moment of ln(1+SNR) at rho={rho}")


# ---------------------------------------------------------------------------
# regularized incomplete gamma (integer shape)
# ---------------------------------------------------------------------------

def regularized_upper_gamma(shape: int, x: float) -> float:
    """Gamma(shape, x)/Gamma(shape) for integer shape >= 1 and x >= 0.

    Equals exp(-x) * sum_{t<shape} x^t/t!, the survival function of a
    Gamma(shape, 1) variable at x. Terms are summed as Poisson pmf values
    in the log domain, so no intermediate overflows for large x.
    """
    if not isinstance(shape, (int, np.integer)) or shape < 1:
        raise ParameterError(f"shape must be an integer >= 1, got {shape}")
    if not (x >= 0) or not math.isfinite(x):
        raise ParameterError(f"x must be nonnegative and finite, got {x}")
    if x == 0.0:
        return 1.0
    log_x = math.log(x)
    total = 0.0
    for t in range(int(shape)):
        total += math.exp(t * log_x - x - math.lgamma(t + 1))
    return min(1.0, total)
