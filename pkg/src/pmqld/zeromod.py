"""Zero modification of a discrete base distribution.

The zero-modified law puts mass ``phi + (1 - phi) f(0)`` at zero and
``(1 - phi) f(x)`` elsewhere. ``phi`` may be negative down to
``-f(0) / (1 - f(0))``, where the zero class vanishes (zero truncation), so
this is not a finite mixture in general.

Any base object works as long as :func:`base_log_pmf` can dispatch on it;
PMQLD parameters and the baseline models of :mod:`pmqld.gof` are supported.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import core
from .errors import DomainError, ParameterError

__all__ = [
    "ZmParams",
    "ZmRegime",
    "base_log_pmf",
    "base_cdf",
    "phi_lower_bound",
    "new_zm_params",
    "zm_pmf",
    "zm_log_pmf",
    "zm_cdf",
    "classify_regime",
    "REGIME_TOL",
]

REGIME_TOL = 1e-12


def base_log_pmf(base, x):
    """Log pmf of a base parameter object at ``x``."""
    if isinstance(base, core.PmqldParams):
        return core.log_pmf(base, x)
    log_pmf = getattr(base, "log_pmf", None)
    if log_pmf is None:
        raise DomainError(f"unsupported base distribution {base!r}")
    return log_pmf(x)


def base_cdf(base, x):
    if isinstance(base, core.PmqldParams):
        return core.cdf(base, x)
    return base.cdf(x)


def phi_lower_bound(base):
    """Smallest admissible ``phi``: ``-f(0) / (1 - f(0))``."""
    f0 = math.exp(base_log_pmf(base, 0))
    if f0 >= 1.0:
        raise DomainError(f"base puts all mass at zero (f0={f0}); phi bound undefined")
    return -f0 / (1.0 - f0)


def phi_lower_bound_closed_form(params):
    """The PMQLD bound written directly in the parameters.

    ``theta ((1+theta)^(delta-1) a3 + theta^(delta-1))
    / (theta^delta - (1+theta)^(delta-1) (1+theta+a3))``; equal to
    :func:`phi_lower_bound` for a PMQLD base.
    """
    t, a3, d = params.theta, params.alpha3, params.delta
    num = t * ((1 + t) ** (d - 1) * a3 + t ** (d - 1))
    den = t**d - (1 + t) ** (d - 1) * (1 + t + a3)
    return num / den


@dataclass(frozen=True)
class ZmParams:
    """Zero-modification parameter ``phi`` over a base distribution."""

    phi: float
    base: object

    def __post_init__(self):
        phi = float(self.phi)
        if not math.isfinite(phi):
            raise ParameterError(f"phi must be finite, got {self.phi!r}")
        lower = phi_lower_bound(self.base)
        if phi > 1.0 or phi < lower - REGIME_TOL:
            raise ParameterError(f"phi must lie in [{lower:.6g}, 1], got {phi}")
        object.__setattr__(self, "phi", phi)

    @property
    def lower_bound(self):
        return phi_lower_bound(self.base)


def new_zm_params(phi, base):
    return ZmParams(phi, base)


def zm_log_pmf(zm, x):
    """Log probability under the zero-modified law (``-inf`` at a truncated zero)."""
    phi = zm.phi
    log_f = np.asarray(base_log_pmf(zm.base, x), dtype=float)
    xa = np.asarray(x)
    with np.errstate(divide="ignore"):
        if phi == 1.0:
            out = np.where(xa == 0, 0.0, -np.inf)
        else:
            log_rest = math.log1p(-phi) + log_f
            p0 = phi + (1.0 - phi) * np.exp(log_f)
            out = np.where(xa == 0, np.log(np.maximum(p0, 0.0)), log_rest)
    return float(out) if np.ndim(x) == 0 else out


def zm_pmf(zm, x):
    """Probability mass under the zero-modified law."""
    out = np.exp(zm_log_pmf(zm, x))
    return float(out) if np.ndim(x) == 0 else out


def zm_cdf(zm, x):
    """``phi + (1 - phi) F(x)`` clipped to ``[0, 1]``."""
    F = np.asarray(base_cdf(zm.base, x), dtype=float)
    out = np.clip(zm.phi + (1.0 - zm.phi) * F, 0.0, 1.0)
    return float(out) if np.ndim(x) == 0 else out


class ZmRegime(str, enum.Enum):
    ZERO_TRUNCATED = "ZeroTruncated"
    ZERO_DEFLATED = "ZeroDeflated"
    UNMODIFIED = "Unmodified"
    ZERO_INFLATED = "ZeroInflated"
    DEGENERATE = "Degenerate"


def classify_regime(zm):
    """Name the regime of ``phi`` relative to its admissible interval."""
    phi = zm.phi
    if abs(phi - zm.lower_bound) <= REGIME_TOL:
        return ZmRegime.ZERO_TRUNCATED
    if phi == 0.0:
        return ZmRegime.UNMODIFIED
    if phi == 1.0:
        return ZmRegime.DEGENERATE
    return ZmRegime.ZERO_DEFLATED if phi < 0 else ZmRegime.ZERO_INFLATED
