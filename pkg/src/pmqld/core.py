"""The Poisson mixture of the modified quasi-Lindley distribution.

A PMQLD(theta, alpha, delta) variate is Poisson with a random rate drawn from
the two-component mixture of exponential(theta) and gamma(delta, theta) with
weight ``alpha**3 / (alpha**3 + 1)`` on the exponential. Marginally it is a
mixture of a geometric and a negative binomial law with the same weights, so
every probability here is assembled as a signed two-term sum in log space:

    f(x) = theta / (a3 + 1) * [a3 (1+theta)^-(x+1)
                               + theta^(delta-1) Gamma(x+delta) / (Gamma(delta) x!) (1+theta)^-(x+delta)]

with ``a3 = alpha**3``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError, NumericError, ParameterError
from .specfun import AccuracyBudget, log_gauss_2f1_1, reg_gamma_lower, stirling2
from .table import FrequencyTable

__all__ = [
    "PmqldParams",
    "new_params",
    "log_pmf",
    "pmf",
    "pmf_ratio",
    "cdf",
    "survival",
    "hazard",
    "ShapeKind",
    "ShapeReport",
    "classify_shape",
    "factorial_moment",
    "raw_moment",
    "MomentSummary",
    "moments",
    "pgf",
    "mgf",
    "quantile",
    "cdf_table",
    "search_table",
    "mqld_pdf",
    "mqld_cdf",
    "PosteriorMixture",
    "posterior_mixture",
]

# survival switches from 1 - cdf to an explicit tail sum above this cdf value;
# below it 1 - cdf keeps a relative error under 1e-14
_TAIL_SWITCH = 0.9
# the cdf series is run to double precision so that exact boundaries such as
# cdf = 0.375 compare correctly in quantile searches
CDF_BUDGET = AccuracyBudget(rel_tol=1e-16, max_terms=100_000)
# quantile searches accept cdf(x) >= u - QUANTILE_SLACK to absorb rounding
QUANTILE_SLACK = 1e-14


@dataclass(frozen=True)
class PmqldParams:
    """Validated parameter triple.

    ``theta > 0`` is the scale, ``alpha`` and ``delta > 0`` are shapes with
    ``alpha**3 > -1``. Negative ``alpha**3`` additionally needs the mixture
    to stay nonnegative at every count: ``delta == 1``, or ``delta > 1`` with
    ``alpha**3 > -(theta/(1+theta))**(delta-1)``.
    """

    theta: float
    alpha: float
    delta: float
    alpha3: float = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("theta", "alpha", "delta"):
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError) as exc:
                raise ParameterError(f"{name} must be a real number, got {value!r}") from exc
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        theta, alpha, delta = self.theta, self.alpha, self.delta
        if theta <= 0:
            raise ParameterError(f"theta > 0 violated (theta={theta})")
        if delta <= 0:
            raise ParameterError(f"delta > 0 violated (delta={delta})")
        a3 = alpha**3
        if a3 <= -1:
            raise ParameterError(f"alpha**3 > -1 violated (alpha**3={a3:.6g})")
        if a3 < 0 and delta != 1:
            if delta < 1:
                raise ParameterError(
                    f"alpha**3 < 0 requires delta >= 1 for a nonnegative pmf "
                    f"(alpha**3={a3:.6g}, delta={delta})"
                )
            floor = -((theta / (1 + theta)) ** (delta - 1))
            if a3 <= floor:
                raise ParameterError(
                    f"alpha**3 > -(theta/(1+theta))**(delta-1) = {floor:.6g} violated "
                    f"(alpha**3={a3:.6g}); the pmf would be negative at 0"
                )
        object.__setattr__(self, "alpha3", a3)

    @property
    def mix_weight(self):
        """Weight ``alpha**3/(alpha**3+1)`` of the geometric (exponential) component."""
        return self.alpha3 / (self.alpha3 + 1)

    def as_tuple(self):
        return (self.theta, self.alpha, self.delta)


def new_params(theta, alpha, delta):
    """Validate and build a :class:`PmqldParams`."""
    return PmqldParams(theta, alpha, delta)


def _check_counts(x):
    arr = np.asarray(x)
    if arr.dtype.kind not in "iu":
        if not np.all(np.isfinite(arr)) or np.any(np.mod(arr, 1) != 0):
            raise DomainError(f"x must be a nonnegative integer, got {x!r}")
    if np.any(arr < 0):
        raise DomainError(f"x must be a nonnegative integer, got {x!r}")
    return arr.astype(np.float64)


def _scalar_or_array(value, like):
    return float(value) if np.ndim(like) == 0 else value


def _log_signed_sum(log_a, sign_a, log_b):
    """log(sign_a * exp(log_a) + exp(log_b)) for scalar ``sign_a``."""
    if sign_a > 0:
        return np.logaddexp(log_a, log_b)
    if sign_a == 0:
        return log_b
    with np.errstate(invalid="ignore", divide="ignore"):
        out = log_b + np.log1p(-np.exp(log_a - log_b))
    return out


def _log_pmf_raw(theta, a3, delta, x):
    """Vectorized log pmf for float parameters; no validation."""
    l1t = math.log1p(theta)
    log_nb = (
        (delta - 1) * math.log(theta)
        + special.gammaln(x + delta)
        - special.gammaln(delta)
        - special.gammaln(x + 1)
        - (x + delta) * l1t
    )
    if a3 == 0:
        log_mix = log_nb
    else:
        log_geo = math.log(abs(a3)) - (x + 1) * l1t
        log_mix = _log_signed_sum(log_geo, np.sign(a3), log_nb)
    return math.log(theta) - math.log1p(a3) + log_mix


def log_pmf(params, x):
    """Log probability of ``x`` (scalar or array of nonnegative integers)."""
    xa = _check_counts(x)
    out = _log_pmf_raw(params.theta, params.alpha3, params.delta, xa)
    if np.any(np.isnan(out)):
        raise NumericError(f"log pmf not finite for {params} at x={x!r}")
    return _scalar_or_array(out, x)


def pmf(params, x):
    """Probability mass at ``x``."""
    return _scalar_or_array(np.exp(log_pmf(params, x)), x)


def pmf_ratio(params, x):
    """Successive ratio ``f(x+1)/f(x)`` from the closed-form recurrence.

    With ``c = alpha^3 Gamma(delta) ((1+theta)/theta)^(delta-1)`` and
    ``r(x) = Gamma(x+delta)/x!`` the ratio is
    ``[c (x+1) + (x+delta) r(x)] / [(x+1)(1+theta)(c + r(x))]``.
    """
    xa = _check_counts(x)
    theta, a3, delta = params.theta, params.alpha3, params.delta
    log_r = special.gammaln(xa + delta) - special.gammaln(xa + 1)
    if a3 == 0:
        log_num = np.log(xa + delta) + log_r
        log_den = log_r
    else:
        log_c = math.log(abs(a3)) + special.gammaln(delta) + (delta - 1) * (
            math.log1p(theta) - math.log(theta)
        )
        sign = np.sign(a3)
        log_num = _log_signed_sum(log_c + np.log(xa + 1), sign, np.log(xa + delta) + log_r)
        log_den = _log_signed_sum(log_c, sign, log_r)
    out = np.exp(log_num - log_den - np.log(xa + 1) - math.log1p(theta))
    return _scalar_or_array(out, x)


def _cdf_closed(params, x, budget):
    theta, a3, delta = params.theta, params.alpha3, params.delta
    l1t = math.log1p(theta)
    geo_part = a3 * -math.expm1(-(x + 1) * l1t)
    w = theta / (1 + theta)
    log_nb = (
        delta * math.log(theta)
        + math.lgamma(x + delta + 1)
        - math.lgamma(delta + 1)
        - math.lgamma(x + 1)
        - (x + delta + 1) * l1t
        + log_gauss_2f1_1(x + delta + 1, delta + 1, w, budget)
    )
    value = (geo_part + math.exp(log_nb)) / (a3 + 1)
    return min(max(value, 0.0), 1.0)


def _cdf_summed(params, x):
    return float(np.sum(np.exp(_log_pmf_raw(params.theta, params.alpha3, params.delta,
                                            np.arange(x + 1, dtype=float)))))


def cdf(params, x, budget=CDF_BUDGET):
    """Distribution function P(X <= x).

    Evaluated in closed form as the weighted sum of the geometric cdf and a
    negative binomial cdf written through 2F1(1, x+delta+1; delta+1;
    theta/(1+theta)). If the series exceeds its term budget the value falls
    back to direct summation of the pmf.
    """
    xa = _check_counts(x)
    flat = []
    for xi in np.atleast_1d(xa).astype(np.int64):
        try:
            flat.append(_cdf_closed(params, int(xi), budget))
        except NumericError:
            flat.append(min(_cdf_summed(params, int(xi)), 1.0))
    if np.ndim(x) == 0:
        return flat[0]
    return np.array(flat).reshape(np.shape(x))


def _tail_sum(params, x):
    """sum_{t > x} f(t) by chunked summation with a geometric remainder bound."""
    theta, a3, delta = params.theta, params.alpha3, params.delta
    total = 0.0
    start = x + 1
    chunk = 256
    while True:
        t = np.arange(start, start + chunk, dtype=float)
        terms = np.exp(_log_pmf_raw(theta, a3, delta, t))
        total += float(terms.sum())
        last_t = start + chunk - 1
        rho = max(1 / (1 + theta), (last_t + delta) / ((last_t + 1) * (1 + theta)))
        if rho < 1:
            remainder = terms[-1] * rho / (1 - rho)
            if remainder <= 1e-17 * total or total == 0.0 and terms[-1] == 0.0:
                return total
        start += chunk
        chunk *= 2
        if start > 1e9:
            raise NumericError(f"tail sum beyond x={x} did not converge for {params}")


def survival(params, x, budget=CDF_BUDGET):
    """Survival function P(X > x), switching to a tail sum near cdf = 1."""
    xa = _check_counts(x)
    out = []
    for xi in np.atleast_1d(xa).astype(np.int64):
        F = cdf(params, int(xi), budget)
        out.append(_tail_sum(params, int(xi)) if F > _TAIL_SWITCH else 1.0 - F)
    if np.ndim(x) == 0:
        return out[0]
    return np.array(out).reshape(np.shape(x))


def hazard(params, x, budget=CDF_BUDGET):
    """Hazard rate f(x) / S(x)."""
    s = np.asarray(survival(params, x, budget))
    if np.any(s <= 0):
        raise NumericError(f"survival underflows to 0 at x={x!r}; hazard undefined")
    return _scalar_or_array(np.asarray(pmf(params, x)) / s, x)


class ShapeKind(str, enum.Enum):
    UNIMODAL_AT_ZERO = "UnimodalAtZero"
    UNIMODAL_AT_X0 = "UnimodalAtX0"
    BIMODAL_AT_X0_AND_X0_PLUS_1 = "BimodalAtX0AndX0Plus1"
    LOG_CONVEX = "LogConvex"
    MULTIMODAL = "Multimodal"


@dataclass(frozen=True)
class ShapeReport:
    """Result of :func:`classify_shape`.

    ``zero_mode_condition`` is the closed-form test for ``f(1) < f(0)``;
    ``log_concave`` reports whether ``f(x+1)/f(x)`` is strictly decreasing
    over the scanned range. ``global_mode`` is the smallest highest-mass
    location, which is informative when several local maxima exist.
    """

    kind: ShapeKind
    mode_locations: list
    scanned_up_to: int
    global_mode: int
    zero_mode_condition: bool
    log_concave: bool


def zero_mode_condition(params):
    """Closed-form inequality for a mode at zero.

    ``(1+t)^(d-1) a3 + t^(d-1) d < (1+t) ((1+t)^(d-1) a3 + t^(d-1))``, divided
    through by ``t^(d-1)`` so that large ``delta`` cannot overflow.
    """
    theta, a3, delta = params.theta, params.alpha3, params.delta
    expo = min((delta - 1) * (math.log1p(theta) - math.log(theta)), 700.0)
    scaled = a3 * math.exp(expo)
    return delta - 1 - theta < theta * scaled


def classify_shape(params, scan_limit=None, tol=1e-12):
    """Locate the modes of the pmf by scanning successive ratios.

    ``scan_limit`` defaults to ``10 * (mean + 10 * sd)``. A ratio within
    ``tol`` of one marks a tied pair of modes; two or more separated local
    maxima give :attr:`ShapeKind.MULTIMODAL`.
    """
    if scan_limit is None:
        m = moments(params)
        scan_limit = int(math.ceil(10 * (m.mean + 10 * math.sqrt(m.variance))))
    scan_limit = int(scan_limit)
    if scan_limit < 2:
        raise DomainError(f"scan_limit must be >= 2, got {scan_limit}")
    r = np.asarray(pmf_ratio(params, np.arange(scan_limit + 1)))
    up = r > 1 + tol
    down = r < 1 - tol
    flat = ~up & ~down
    rising = np.concatenate(([True], up[:-1]))
    peaks = []
    for x in np.flatnonzero(rising & (down | flat)):
        x = int(x)
        if down[x]:
            peaks.append((x,))
        elif x + 1 <= scan_limit and down[x + 1]:
            peaks.append((x, x + 1))
    diffs = r[:-1] - r[1:]
    log_concave = bool(np.all(diffs > tol * r[:-1]))
    log_convex = bool(np.all(diffs <= tol * r[:-1]))
    cond = zero_mode_condition(params)
    locations = sorted({loc for peak in peaks for loc in peak})
    if not peaks:
        raise NumericError(f"no mode found within scan_limit={scan_limit}; increase it")
    if len(peaks) >= 2:
        kind = ShapeKind.MULTIMODAL
    elif len(peaks[0]) == 2:
        kind = ShapeKind.BIMODAL_AT_X0_AND_X0_PLUS_1
    elif peaks[0] == (0,):
        kind = ShapeKind.LOG_CONVEX if log_convex else ShapeKind.UNIMODAL_AT_ZERO
    else:
        kind = ShapeKind.UNIMODAL_AT_X0
    log_f = np.concatenate(([0.0], np.cumsum(np.log(r[:-1]))))
    global_mode = int(np.argmax(log_f[locations] >= log_f[locations].max() - 1e-12))
    return ShapeReport(kind, locations, scan_limit, locations[global_mode], cond, log_concave)


def _rising_factorial(a, r):
    return math.prod(a + k for k in range(r))


def factorial_moment(params, r):
    """E[X (X-1) ... (X-r+1)] = (r! a3 + (delta)_r) / ((a3+1) theta^r)."""
    if int(r) != r or not 1 <= r <= 8:
        raise DomainError(f"factorial moment order must be an integer in [1, 8], got {r}")
    r = int(r)
    a3 = params.alpha3
    return (math.factorial(r) * a3 + _rising_factorial(params.delta, r)) / (
        (a3 + 1) * params.theta**r
    )


def raw_moment(params, r):
    """E[X^r] from factorial moments and Stirling numbers of the second kind."""
    if int(r) != r or not 1 <= r <= 8:
        raise DomainError(f"raw moment order must be an integer in [1, 8], got {r}")
    return sum(stirling2(int(r), i) * factorial_moment(params, i) for i in range(1, int(r) + 1))


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    dispersion_index: float
    skewness: float
    kurtosis: float
    raw_moments: tuple


def moments(params):
    """Mean, variance, dispersion index, skewness and (non-excess) kurtosis."""
    theta, a3, delta = params.theta, params.alpha3, params.delta
    k1 = a3 + delta
    k2 = 2 * a3 + delta * (delta + 1)
    k3 = 6 * a3 + delta * (delta + 1) * (delta + 2)
    k4 = 24 * a3 + delta * (delta + 1) * (delta + 2) * (delta + 3)
    scale = a3 + 1
    m1 = k1 / (scale * theta)
    m2 = (theta * k1 + k2) / (scale * theta**2)
    m3 = (theta**2 * k1 + 3 * theta * k2 + k3) / (scale * theta**3)
    m4 = (theta**3 * k1 + 7 * theta**2 * k2 + 6 * theta * k3 + k4) / (scale * theta**4)
    mu2 = m2 - m1**2
    mu3 = m3 - 3 * m1 * m2 + 2 * m1**3
    mu4 = m4 - 4 * m1 * m3 + 6 * m1**2 * m2 - 3 * m1**4
    return MomentSummary(
        mean=m1,
        variance=mu2,
        dispersion_index=mu2 / m1,
        skewness=mu3 / mu2**1.5,
        kurtosis=mu4 / mu2**2,
        raw_moments=(m1, m2, m3, m4),
    )


def pgf(params, t):
    """Probability generating function E[t^X], defined for ``1 - t + theta > 0``."""
    s = 1.0 - t + params.theta
    if not s > 0:
        raise DomainError(f"pgf requires 1 - t + theta > 0, got t={t}")
    theta, a3, delta = params.theta, params.alpha3, params.delta
    return theta / (a3 + 1) * (a3 / s + math.exp((delta - 1) * math.log(theta) - delta * math.log(s)))


def mgf(params, t):
    """Moment generating function E[e^{tX}] = pgf(e^t)."""
    if not 1.0 - math.exp(t) + params.theta > 0:
        raise DomainError(f"mgf requires 1 - e^t + theta > 0, got t={t}")
    return pgf(params, math.exp(t))


def quantile(params, u, budget=CDF_BUDGET):
    """Smallest nonnegative integer ``x`` with ``cdf(x) >= u``.

    The comparison allows ``QUANTILE_SLACK`` of rounding, so a level equal to
    an attained cdf value maps to that point rather than the next one.
    """
    u = float(u)
    if not 0.0 < u < 1.0:
        raise DomainError(f"quantile level must lie in (0, 1), got {u}")
    target = u - QUANTILE_SLACK
    if cdf(params, 0, budget) >= target:
        return 0
    lo, hi = 0, 1
    for _ in range(200):
        if cdf(params, hi, budget) >= target:
            break
        lo, hi = hi, hi * 2
    else:
        raise NumericError(f"quantile bracket failed for u={u}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cdf(params, mid, budget) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def cdf_table(params, u_max, budget=CDF_BUDGET):
    """Array ``[cdf(0), cdf(1), ..., cdf(K)]`` with ``cdf(K) >= u_max``.

    Uses the same cdf evaluations as :func:`quantile`, so a sorted search over
    the table reproduces it exactly (see :func:`search_table`).
    """
    values = []
    x = 0
    while True:
        values.append(cdf(params, x, budget))
        if values[-1] >= u_max - QUANTILE_SLACK:
            return np.array(values)
        x += 1
        if x > 10_000_000:
            raise NumericError(f"cdf never reaches {u_max} within 1e7 terms")


def search_table(table, u):
    """Vectorized quantile lookup in a cdf table from :func:`cdf_table`."""
    return np.searchsorted(np.asarray(table), np.asarray(u) - QUANTILE_SLACK, side="left")


def _check_rate(lam):
    arr = np.asarray(lam, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"lambda must be positive and finite, got {lam!r}")
    return arr


def mqld_pdf(params, lam):
    """Density of the mixing distribution on the Poisson rate."""
    lam_a = _check_rate(lam)
    theta, a3, delta = params.theta, params.alpha3, params.delta
    tl = theta * lam_a
    gamma_part = np.exp((delta - 1) * np.log(tl) - special.gammaln(delta))
    out = theta * np.exp(-tl) / (a3 + 1) * (a3 + gamma_part)
    return _scalar_or_array(out, lam)


def mqld_cdf(params, lam):
    """Mixing distribution function ``[a3 (1 - e^{-theta lam}) + P(delta, theta lam)] / (a3+1)``."""
    lam_a = _check_rate(lam)
    theta, a3, delta = params.theta, params.alpha3, params.delta
    tl = theta * lam_a
    out = (a3 * -np.expm1(-tl) + np.asarray(reg_gamma_lower(delta, tl))) / (a3 + 1)
    return _scalar_or_array(out, lam)


@dataclass(frozen=True)
class PosteriorMixture:
    """Two-component gamma mixture; components are ``(shape, rate)`` pairs."""

    weight: float
    first: tuple
    second: tuple

    def pdf(self, lam):
        lam = np.asarray(lam, dtype=float)

        def gamma_pdf(shape, rate):
            return np.exp(shape * math.log(rate) + (shape - 1) * np.log(lam) - rate * lam
                          - math.lgamma(shape))

        return self.weight * gamma_pdf(*self.first) + (1 - self.weight) * gamma_pdf(*self.second)


def posterior_mixture(params, data):
    """Posterior of the Poisson rate given i.i.d. counts ``data``.

    ``data`` may be a :class:`FrequencyTable` or a sequence of observations.
    """
    if not isinstance(data, FrequencyTable):
        data = FrequencyTable.from_observations(data)
    n = data.n
    total = data.sum_x
    theta, a3, delta = params.theta, params.alpha3, params.delta
    rate = n + theta
    first = (total + 1, rate)
    second = (total + delta, rate)
    if a3 == 0:
        return PosteriorMixture(0.0, first, second)
    log_first = (
        math.log(abs(a3)) + math.lgamma(delta) + (delta - 1) * math.log(rate) + math.lgamma(total + 1)
    )
    log_second = (delta - 1) * math.log(theta) + math.lgamma(total + delta)
    ratio = math.copysign(math.exp(min(log_first - log_second, 700.0)), a3)
    weight = 1.0 if math.isinf(ratio) else ratio / (1 + ratio)
    return PosteriorMixture(weight, first, second)
