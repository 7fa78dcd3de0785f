"""Real-valued special functions used throughout the package.

Gamma-family functions delegate to :mod:`scipy.special` behind argument
validation; the Gaussian hypergeometric series with unit first parameter and
the Stirling numbers are evaluated here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import DomainError, NumericError

__all__ = [
    "AccuracyBudget",
    "DEFAULT_BUDGET",
    "log_gamma",
    "digamma",
    "trigamma",
    "reg_gamma_lower",
    "reg_gamma_upper",
    "gauss_2f1_1",
    "log_gauss_2f1_1",
    "stirling2",
    "chi_square_sf",
]


@dataclass(frozen=True)
class AccuracyBudget:
    """Relative tolerance and term cap for series evaluations."""

    rel_tol: float = 1e-12
    max_terms: int = 10_000

    def __post_init__(self):
        if not math.isfinite(self.rel_tol) or self.rel_tol <= 0:
            raise DomainError(f"rel_tol must be positive, got {self.rel_tol}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise DomainError(f"max_terms must be a positive integer, got {self.max_terms}")


DEFAULT_BUDGET = AccuracyBudget()


def _as_checked(x, name, *, strict=True):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {x!r}")
    if strict and np.any(arr <= 0):
        raise DomainError(f"{name} must be > 0, got {x!r}")
    if not strict and np.any(arr < 0):
        raise DomainError(f"{name} must be >= 0, got {x!r}")
    return arr


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def log_gamma(x):
    """Natural log of the gamma function for ``x > 0`` (scalar or array)."""
    arr = _as_checked(x, "x")
    return _out(special.gammaln(arr))


def digamma(x):
    """Digamma function psi(x) = d/dx log Gamma(x), ``x > 0``."""
    arr = _as_checked(x, "x")
    return _out(special.psi(arr))


def trigamma(x):
    """Trigamma function psi_1(x) = sum_{k>=0} 1/(x+k)^2, ``x > 0``."""
    arr = _as_checked(x, "x")
    return _out(special.polygamma(1, arr))


def reg_gamma_lower(s, x):
    """Regularized lower incomplete gamma P(s, x)."""
    s_arr = _as_checked(s, "s")
    x_arr = _as_checked(x, "x", strict=False)
    return _out(special.gammainc(s_arr, x_arr))


def reg_gamma_upper(s, x):
    """Regularized upper incomplete gamma Q(s, x) = 1 - P(s, x)."""
    s_arr = _as_checked(s, "s")
    x_arr = _as_checked(x, "x", strict=False)
    return _out(special.gammaincc(s_arr, x_arr))


def log_gauss_2f1_1(d, r, w, budget=DEFAULT_BUDGET):
    """Log of 2F1(1, d; r; w) for ``d, r > 0`` and ``0 <= w < 1``.

    Terms ``(d)_i w^i / (r)_i`` are accumulated in log space with a running
    rescale, so large ``d`` does not overflow. Summation stops once the
    geometric bound on the remaining tail falls below ``budget.rel_tol``
    of the partial sum.

    Raises
    ------
    DomainError
        If ``w`` is outside ``[0, 1)`` or a shape parameter is not positive.
    NumericError
        If the tail bound is not met within ``budget.max_terms`` terms.
    """
    d = float(d)
    r = float(r)
    w = float(w)
    if not (d > 0 and r > 0 and math.isfinite(d) and math.isfinite(r)):
        raise DomainError(f"2F1 shape parameters must be positive, got d={d}, r={r}")
    if not (0.0 <= w < 1.0):
        raise DomainError(f"2F1 argument must lie in [0, 1), got w={w}")
    if w == 0.0:
        return 0.0

    log_term = 0.0
    peak = 0.0  # running scale: total = exp(peak) * acc
    acc = 1.0
    for i in range(1, budget.max_terms + 1):
        ratio = (d + i - 1) / (r + i - 1) * w
        log_term += math.log(ratio)
        if log_term > peak:
            acc = acc * math.exp(peak - log_term) + 1.0
            peak = log_term
        else:
            acc += math.exp(log_term - peak)
        if ratio < 1.0:
            # later ratios move monotonically toward w, so max(ratio, w) bounds them
            rho = max(ratio, w)
            tail = math.exp(log_term - peak) * rho / (1.0 - rho)
            if tail <= budget.rel_tol * acc:
                return peak + math.log(acc)
    raise NumericError(
        f"2F1(1, {d}; {r}; {w}) did not converge within {budget.max_terms} terms"
    )


def gauss_2f1_1(d, r, w, budget=DEFAULT_BUDGET):
    """Gaussian hypergeometric 2F1(1, d; r; w) on ``0 <= w < 1``."""
    log_value = log_gauss_2f1_1(d, r, w, budget)
    try:
        return math.exp(log_value)
    except OverflowError as exc:
        raise NumericError(f"2F1(1, {d}; {r}; {w}) overflows a double") from exc


@lru_cache(maxsize=None)
def _stirling2(r, i):
    if r == i:
        return 1
    if i == 0 or i > r:
        return 0
    return i * _stirling2(r - 1, i) + _stirling2(r - 1, i - 1)


def stirling2(r, i):
    """Stirling number of the second kind S(r, i) as an exact integer."""
    if int(r) != r or int(i) != i or r < 0 or i < 0:
        raise DomainError(f"stirling2 needs nonnegative integers, got ({r}, {i})")
    r, i = int(r), int(i)
    if i > r:
        raise DomainError(f"stirling2 requires i <= r, got ({r}, {i})")
    if r > 20:
        raise DomainError(f"stirling2 is tabulated for r <= 20, got r={r}")
    return _stirling2(r, i)


def chi_square_sf(x, df):
    """Upper-tail probability of a chi-square variate with ``df`` degrees of freedom."""
    if int(df) != df or df < 1:
        raise DomainError(f"df must be a positive integer, got {df}")
    x = float(x)
    if not math.isfinite(x) or x < 0:
        raise DomainError(f"chi-square statistic must be finite and >= 0, got {x}")
    return float(special.gammaincc(df / 2.0, x / 2.0))
