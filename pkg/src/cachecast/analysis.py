"""Closed-form average rates, approximations, and limits.

Covers the exact XOR-multicast (MN) rate, its low-SNR second-order form and
exact gain, the exact aggregated (ACC) rate by characteristic-function
inversion, the low-SNR multinomial constant and rate, the large-group-size
normal approximation with the expected-extreme constant H, and the
documented nominal-gain limits.

Conventions: rates are bits/s/Hz; `gain` is the nominal multicast size
(number of simultaneously served groups); `users_per_group` is the number
of users sharing one cache state. All functions are pure; the inversion
caches its characteristic-function table per average SNR, keyed read-only
after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import integrate, interpolate

from .errors import NumericsError, ParameterError
from .numerics import (
    _checked_quad,
    exp_scaled_e1,
    gauss_hermite_rule,
    log_char_moment,
    q_function,
    second_moment_log1p,
)

LN2 = math.log(2.0)

# closed-form / approximation identifiers (ApproxResult.method)
EXACT_MN = "exact-mn"
EXACT_ACC_INTEGRAL = "exact-acc-integral"
LOW_SNR_MN = "low-snr-mn"
LOW_SNR_ACC_MULTINOMIAL = "low-snr-acc-multinomial"
LARGE_B_NORMAL = "large-b-normal"
LARGE_B_RATIO_LIMIT = "large-b-ratio-limit"
LOW_SNR_RATIO_LIMIT = "low-snr-ratio-limit"

APPROX_METHODS = (
    EXACT_MN,
    EXACT_ACC_INTEGRAL,
    LOW_SNR_MN,
    LOW_SNR_ACC_MULTINOMIAL,
    LARGE_B_NORMAL,
    LARGE_B_RATIO_LIMIT,
    LOW_SNR_RATIO_LIMIT,
)

# evaluation methods for the expected-extreme constant H
H_TABLE = "table"
H_INTEGRAL = "integral"
H_GHQ = "ghq"
H_ASYMPTOTIC = "asymptotic"
H_AUTO = "auto"
H_METHODS = (H_TABLE, H_INTEGRAL, H_GHQ, H_ASYMPTOTIC, H_AUTO)

#: Largest composition count psi() will enumerate before deferring to
#: a Monte Carlo oracle.
MAX_PSI_TERMS = 10_000_000


@dataclass(frozen=True)
class ApproxResult:
    """Value of one named closed form, with the parameters it was
    evaluated at for provenance."""

    value: float
    method: str
    rho: float | None = None
    users_per_group: int | None = None
    gain: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise NumericsError(f"{self.method} evaluated to a non-finite value")
        if self.method not in APPROX_METHODS:
            raise ParameterError(f"unknown method {self.method!r}")


def _check_rho(rho):
    if not (rho > 0) or not math.isfinite(rho):
        raise ParameterError(f"rho must be positive and finite, got {rho}")
    return float(rho)


def _check_positive_int(value, name, minimum=1):
    if not isinstance(value, (int, np.integer)) or value < minimum:
        raise ParameterError(f"{name} must be an integer >= {minimum}, got {value}")
    return int(value)


# ---------------------------------------------------------------------------
# single-link moments of ln(1+SNR)
# ---------------------------------------------------------------------------

def mean_log1p_snr(rho: float) -> float:
    """E[ln(1+SNR)] = exp(1/rho) E1(1/rho) for SNR ~ Exp(mean rho)."""
    return exp_scaled_e1(1.0 / _check_rho(rho))


def std_log1p_snr(rho: float) -> float:
    """Standard deviation of ln(1+SNR); strictly positive for rho > 0."""
    rho = _check_rho(rho)
    mu = mean_log1p_snr(rho)
    var = second_moment_log1p(rho) - mu * mu
    if var <= 0:
        raise NumericsError(f"non-positive variance {var} at rho={rho}")
    return math.sqrt(var)


# ---------------------------------------------------------------------------
# XOR multicast (MN) closed forms
# ---------------------------------------------------------------------------

def exact_mn_rate(rho: float, gain: int) -> ApproxResult:
    """Exact average sum rate of the XOR scheme.

    The worst of `gain` i.i.d. Exp(rho) SNRs is Exp(rho/gain), giving
    (gain/ln 2) exp(gain/rho) E1(gain/rho). Setting gain=1 yields the TDM
    rate. Evaluated in scaled form, so extreme gain/rho never overflows.
    """
    rho = _check_rho(rho)
    gain = _check_positive_int(gain, "gain")
    value = gain / LN2 * exp_scaled_e1(gain / rho)
    return ApproxResult(value=value, method=EXACT_MN, rho=rho, gain=gain)


def mn_gain_exact(rho: float, gain: int) -> float:
    """Exact speed-up of the XOR scheme over TDM.

    Lies in (1, gain) for finite rho, approaches gain only as rho grows
    (logarithmically slowly) and collapses to 1 as rho -> 0.
    """
    rho = _check_rho(rho)
    gain = _check_positive_int(gain, "gain")
    return gain * exp_scaled_e1(gain / rho) / exp_scaled_e1(1.0 / rho)


def mn_rate_low_snr(rho: float, gain: int) -> ApproxResult:
    """Second-order low-SNR expansion of the XOR rate, free of special
    functions; reliable well into the medium-SNR region."""
    rho = _check_rho(rho)
    gain = _check_positive_int(gain, "gain")
    x = rho / gain
    value = gain / LN2 * (math.log1p(x) - x * x / (2.0 * (1.0 + x) ** 2))
    return ApproxResult(value=value, method=LOW_SNR_MN, rho=rho, gain=gain)


# ---------------------------------------------------------------------------
# low-SNR multinomial constant and aggregated rate
# ---------------------------------------------------------------------------

def compositions(total: int, parts: int):
    """Yield every vector of `parts` nonnegative integers summing to `total`
    (stars-and-bars order). There are C(total+parts-1, parts-1) of them."""
    total = _check_positive_int(total, "total")
    parts = _check_positive_int(parts, "parts")
    for bars in combinations(range(total + parts - 1), parts - 1):
        prev = -1
        vector = []
        for bar in bars + (total + parts - 1,):
            vector.append(bar - prev - 1)
            prev = bar
        yield tuple(vector)


def psi(gain: int, users_per_group: int) -> float:
    """Multinomial constant: the expected minimum of `gain` i.i.d.
    Gamma(users_per_group, 1) variables.

    Evaluated as the exact composition sum with log-domain multinomial
    coefficients. Equals 1/gain for a single user per group and
    users_per_group when only one group is served.
    """
    g = _check_positive_int(gain, "gain")
    b = _check_positive_int(users_per_group, "users_per_group")
    n_terms = math.comb(g + b - 1, b - 1)
    if n_terms > MAX_PSI_TERMS:
        raise ParameterError(
            f"psi(gain={g}, users_per_group={b}) needs {n_terms} composition terms "
            f"(> {MAX_PSI_TERMS}); estimate the expected minimum by Monte Carlo instead")

    max_k = (b - 1) * g
    lgam = [math.lgamma(i + 1) for i in range(max(g, max_k) + 1)]
    log_g = math.log(g)

    # online logsumexp over the composition sum; slot t (0-based) carrying
    # `part` draws contributes (t!)^part to the factorial-power weight
    shift = -math.inf
    total = 0.0
    for vector in compositions(g, b):
        k = 0
        log_term = lgam[g]
        for t, part in enumerate(vector):
            if part:
                log_term -= lgam[part]      # multinomial denominator
                log_term -= part * lgam[t]  # factorial-power weight
                k += t * part
        log_term += lgam[k] - (1 + k) * log_g
        if log_term <= shift:
            total += math.exp(log_term - shift)
        else:
            total = total * math.exp(shift - log_term) + 1.0
            shift = log_term
    return math.exp(shift) * total


def acc_rate_low_snr(rho: float, users_per_group: int, gain: int) -> ApproxResult:
    """First-order low-SNR aggregated rate:
    rho * gain / (users_per_group ln 2) * psi."""
    rho = _check_rho(rho)
    value = rho * gain / (users_per_group * LN2) * psi(gain, users_per_group)
    return ApproxResult(value=value, method=LOW_SNR_ACC_MULTINOMIAL, rho=rho,
                        users_per_group=int(users_per_group), gain=int(gain))


def acc_over_mn_low_snr(gain: int, users_per_group: int) -> float:
    """Low-SNR limit of the aggregated-to-XOR rate ratio:
    (gain/users_per_group) * psi. Equals 1 for a single user per group and
    climbs toward `gain` as the group size grows."""
    return gain / users_per_group * psi(gain, users_per_group)


# ---------------------------------------------------------------------------
# large-group-size forms
# ---------------------------------------------------------------------------

def acc_over_mn_large_b(rho: float, gain: int) -> float:
    """Many-users-per-group limit of the aggregated-to-XOR rate ratio,
    exp((1-gain)/rho) Ei(-1/rho)/Ei(-gain/rho), evaluated in scaled form.

    Equals the TDM-to-single-served-user ratio gain * R_tdm / R_mn; lies in
    [1, gain], approaching gain as rho -> 0."""
    rho = _check_rho(rho)
    gain = _check_positive_int(gain, "gain")
    return exp_scaled_e1(1.0 / rho) / exp_scaled_e1(gain / rho)


def acc_gain_limit(gain: int) -> float:
    """Nominal gain recovered in the many-users limit at any SNR; the
    reference line for gain plots."""
    return float(_check_positive_int(gain, "gain"))


_H_TABLE_VALUES = {
    1: 0.0,
    2: math.pi ** -0.5,
    3: 1.5 * math.pi ** -0.5,
    4: 3.0 * math.pi ** -1.5 * math.acos(-1.0 / 3.0),
    5: 2.5 * math.pi ** -1.5 * math.acos(-23.0 / 27.0),
}


def _h_integral(gain: int) -> float:
    peak = -math.sqrt(2.0 * math.log(max(gain, 2)))

    def integrand(y):
        q = q_function(y)
        if q <= 0.0:
            return 0.0
        return y * math.exp((gain - 1) * math.log(q) - 0.5 * y * y)

    out = integrate.quad(integrand, -40.0, 40.0, points=[peak, 0.0],
                         epsabs=1e-13, epsrel=1e-12, limit=500, full_output=1)
    value, abserr = out[0], out[1]
    if len(out) > 3 and abserr > 1e-10:
        raise NumericsError(
            f"expected-extreme integral (gain={gain}) residual {abserr:.2e}")
    return -gain / math.sqrt(2.0 * math.pi) * value


def _h_ghq(gain: int, order: int) -> float:
    rule = gauss_hermite_rule(order)
    sqrt2 = math.sqrt(2.0)
    q = np.array([q_function(sqrt2 * x) for x in rule.nodes])
    total = float(np.sum(rule.weights * rule.nodes * q ** (gain - 1)))
    return -sqrt2 * gain / math.sqrt(math.pi) * total


def h_order_stat(gain: int, method: str = H_AUTO, ghq_order: int = 7) -> float:
    """Expected maximum of `gain` i.i.d. standard normals.

    Methods: exact `table` constants (gain <= 5), the defining `integral`
    (reference oracle), `ghq` Gauss-Hermite summation of that integral, or
    the `asymptotic` sqrt(2 ln gain). `auto` picks the table when available
    and otherwise order-7 GHQ; note the low-order GHQ drifts from the
    integral by more than 1e-3 once gain exceeds 3, and the asymptote is
    loose until gain is very large.
    """
    gain = _check_positive_int(gain, "gain")
    if method not in H_METHODS:
        raise ParameterError(f"unknown H method {method!r}; expected one of {H_METHODS}")
    if method == H_AUTO:
        method = H_TABLE if gain <= 5 else H_GHQ
    if method == H_TABLE:
        if gain > 5:
            raise ParameterError("the closed-form table covers gain <= 5 only")
        return _H_TABLE_VALUES[gain]
    if method == H_INTEGRAL:
        return _h_integral(gain)
    if method == H_GHQ:
        return _h_ghq(gain, ghq_order)
    return math.sqrt(2.0 * math.log(gain))


def acc_rate_large_b(rho: float, users_per_group: int, gain: int,
                     h_method: str = H_AUTO, ghq_order: int = 7) -> ApproxResult:
    """Normal approximation of the aggregated rate for many users per group:
    (gain/ln 2) (mu - sigma * H_gain / sqrt(users_per_group)),
    with mu and sigma the mean and standard deviation of ln(1+SNR).

    Converges to (gain/ln 2) mu as the group size grows; accurate to a few
    percent already around ten users per group.
    """
    rho = _check_rho(rho)
    b = _check_positive_int(users_per_group, "users_per_group", minimum=2)
    gain = _check_positive_int(gain, "gain")
    mu = mean_log1p_snr(rho)
    sigma = std_log1p_snr(rho)
    h = h_order_stat(gain, h_method, ghq_order)
    value = gain / LN2 * (mu - sigma * h / math.sqrt(b))
    return ApproxResult(value=value, method=LARGE_B_NORMAL, rho=rho,
                        users_per_group=b, gain=gain)


def large_b_ratio(rho: float, gain: int) -> ApproxResult:
    """acc_over_mn_large_b packaged with provenance metadata."""
    return ApproxResult(value=acc_over_mn_large_b(rho, gain),
                        method=LARGE_B_RATIO_LIMIT, rho=float(rho), gain=int(gain))


def low_snr_ratio(gain: int, users_per_group: int) -> ApproxResult:
    """acc_over_mn_low_snr packaged with provenance metadata."""
    return ApproxResult(value=acc_over_mn_low_snr(gain, users_per_group),
                        method=LOW_SNR_RATIO_LIMIT,
                        users_per_group=int(users_per_group), gain=int(gain))


# ---------------------------------------------------------------------------
# exact aggregated rate by characteristic-function inversion
# ---------------------------------------------------------------------------

#: Absolute CDF error allotted to truncating the inversion integral.
_CDF_TAIL_TOL = 1e-8

#: Outer integration stops once survival^gain drops below this.
_SURVIVAL_CUTOFF = 1e-12


class _CharFnTable:
    """Dense tabulation of the single-user characteristic function
    phi(t) = E exp(jt ln(1+SNR)) on [0, tmax] for one rho.

    Sparse nodes are evaluated by adaptive quadrature, splined, and
    resampled onto dense grids so later lookups are cheap linear
    interpolation. Integration by parts bounds |phi(t)| by
    (f(0) + TV(f))/t with f the density of ln(1+SNR), whose total
    variation is 2/rho below unit SNR and ~2/e above it; that envelope
    fixes the truncation point tmax needed for a CDF error of
    _CDF_TAIL_TOL even in the slowest-decaying two-user case.
    """

    SPARSE_LINEAR = 420
    SPARSE_LOG = 900
    DENSE_LINEAR = 6000
    DENSE_LOG = 60000

    def __init__(self, rho: float):
        self.rho = rho
        # below the boundary the integrand is treated as smooth; above it the
        # oscillatory weight rule takes over. The CF varies on scale ~rho
        # in t below unit SNR and on an O(1) scale above it.
        self.boundary = 2.0 / min(rho, 1.0)
        peak_density = 1.0 / rho if rho <= 1.0 else math.exp(1.0 / rho - 1.0)
        envelope = 1.0 / rho + 2.0 * peak_density
        self.tmax = envelope / math.sqrt(2.0 * math.pi * _CDF_TAIL_TOL)
        sparse = np.concatenate([
            np.linspace(0.0, self.boundary, self.SPARSE_LINEAR),
            np.geomspace(self.boundary, self.tmax, self.SPARSE_LOG)[1:],
        ])
        values = np.empty(sparse.size, dtype=complex)
        values[0] = 1.0
        for i in range(1, sparse.size):
            values[i] = log_char_moment(sparse[i], rho, abs_tol=1e-11)
        spline_re = interpolate.CubicSpline(sparse, values.real)
        spline_im = interpolate.CubicSpline(sparse, values.imag)
        self.t_grid = np.concatenate([
            np.linspace(0.0, self.boundary, self.DENSE_LINEAR),
            np.geomspace(self.boundary, self.tmax, self.DENSE_LOG)[1:],
        ])
        self.re = spline_re(self.t_grid)
        self.im = spline_im(self.t_grid)
        for arr in (self.t_grid, self.re, self.im):
            arr.setflags(write=False)

    def phi(self, t: np.ndarray) -> np.ndarray:
        return np.interp(t, self.t_grid, self.re) + 1j * np.interp(t, self.t_grid, self.im)


_CF_TABLES: dict = {}


def _cf_table(rho: float) -> _CharFnTable:
    table = _CF_TABLES.get(rho)
    if table is None:
        table = _CharFnTable(rho)
        _CF_TABLES[rho] = table
    return table


_GL_CACHE: dict = {}


def _gauss_legendre(n: int):
    rule = _GL_CACHE.get(n)
    if rule is None:
        rule = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = rule
    return rule


class _MinSumInversion:
    """Survival function of S = sum over the group of ln(1+SNR), recovered
    from phi^users_per_group by inversion of the characteristic function,
    plus the expected minimum across `gain` groups."""

    def __init__(self, rho: float, users_per_group: int):
        self.rho = rho
        self.b = users_per_group
        self.table = _cf_table(rho)
        power = self.table.phi(self.table.t_grid) ** users_per_group
        with np.errstate(divide="ignore", invalid="ignore"):
            safe_t = np.where(self.table.t_grid > 0.0, self.table.t_grid, 1.0)
            self._im_over_t = power.imag / safe_t
            self._re_over_t = power.real / safe_t
        self.mean_sum = users_per_group * mean_log1p_snr(rho)
        self.std_sum = math.sqrt(users_per_group) * std_log1p_snr(rho)
        # residual of dropping |t| > tmax, assuming the ~1/t envelope decay
        tail_phi = abs(complex(self.table.phi(np.array([self.table.tmax]))[0]))
        self.tail_residual = tail_phi ** users_per_group / (users_per_group * math.pi)

    def survival(self, y: float) -> float:
        """P(S > y) = 1/2 + (1/pi) * integral of Im{e^{-jty} phi^B}/t dt."""
        if y <= 0:
            return 1.0
        table = self.table
        a = table.boundary
        # smooth region [0, a]: vectorized Gauss-Legendre sized to the
        # oscillation count of exp(-jty)
        cycles = y * a / (2.0 * math.pi)
        n_nodes = min(4096, 64 + 14 * int(cycles + 1))
        nodes, weights = _gauss_legendre(n_nodes)
        t = 0.5 * a * (nodes + 1.0)
        phi_b = table.phi(t) ** self.b
        integrand = (phi_b.imag * np.cos(y * t) - phi_b.real * np.sin(y * t)) / t
        low = 0.5 * a * float(np.sum(weights * integrand))
        # oscillatory tail [a, tmax]: smooth 1/t-weighted factors against
        # cos/sin(y t), handled by QUADPACK's oscillatory rule
        im_part = _checked_quad(
            lambda tt: float(np.interp(tt, table.t_grid, self._im_over_t)),
            a, table.tmax, weight="cos", wvar=y, abs_tol=1e-9, rel_tol=1e-9,
            limit=500, what=f"CDF inversion cos-part (rho={self.rho}, y={y:.4g})")
        re_part = _checked_quad(
            lambda tt: float(np.interp(tt, table.t_grid, self._re_over_t)),
            a, table.tmax, weight="sin", wvar=y, abs_tol=1e-9, rel_tol=1e-9,
            limit=500, what=f"CDF inversion sin-part (rho={self.rho}, y={y:.4g})")
        return 0.5 + (low + im_part - re_part) / math.pi

    def survival_clipped(self, y: float) -> float:
        return min(1.0, max(0.0, self.survival(y)))

    def expected_min(self, gain: int) -> float:
        """E[min over `gain` groups of S] = integral of survival^gain."""
        y_hi = self.mean_sum + 12.0 * self.std_sum + 1.0
        for _ in range(25):
            tail = self.survival_clipped(y_hi) ** gain
            if tail < _SURVIVAL_CUTOFF:
                break
            y_hi *= 1.3
        else:
            if self.survival_clipped(y_hi) > 1e-6:
                raise NumericsError(
                    f"survival tail would not drop below cutoff by y={y_hi:.3g} "
                    f"(rho={self.rho}, users_per_group={self.b})")
        return _checked_quad(
            lambda y: self.survival_clipped(y) ** gain, 0.0, y_hi,
            abs_tol=1e-9, rel_tol=1e-7, limit=500,
            what=f"expected minimum (rho={self.rho}, b={self.b}, gain={gain})")


_INVERSIONS: dict = {}


def _inversion(rho: float, users_per_group: int) -> _MinSumInversion:
    key = (rho, users_per_group)
    inv = _INVERSIONS.get(key)
    if inv is None:
        inv = _MinSumInversion(rho, users_per_group)
        _INVERSIONS[key] = inv
    return inv


def capacity_sum_cdf(y: float, rho: float, users_per_group: int) -> float:
    """CDF of the per-group sum of ln(1+SNR) over `users_per_group` i.i.d.
    Rayleigh-faded links, by characteristic-function inversion."""
    rho = _check_rho(rho)
    b = _check_positive_int(users_per_group, "users_per_group", minimum=2)
    if y <= 0:
        return 0.0
    return 1.0 - _inversion(rho, b).survival_clipped(float(y))


def acc_rate_exact_integral(rho: float, users_per_group: int, gain: int) -> ApproxResult:
    """Exact aggregated average rate as a double integral: the survival
    function of each group's capacity sum is recovered from its
    characteristic function, raised to the number of served groups, and
    integrated to give the expected worst-group sum.

    Requires at least two users per group: with one, the closed form
    exact_mn_rate applies and the inversion integrand would decay too
    slowly to be worth inverting.
    """
    rho = _check_rho(rho)
    b = _check_positive_int(users_per_group, "users_per_group", minimum=2)
    gain = _check_positive_int(gain, "gain")
    expected_min = _inversion(rho, b).expected_min(gain)
    value = gain / (b * LN2) * expected_min
    return ApproxResult(value=value, method=EXACT_ACC_INTEGRAL, rho=rho,
                        users_per_group=b, gain=gain)
