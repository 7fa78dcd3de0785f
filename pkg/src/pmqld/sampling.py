"""Random variate generation.

Two exact routes are provided for PMQLD draws: the mixture route draws a rate
from the mixing distribution by numerical inversion and then a Poisson count
by sequential search; the direct route inverts the discrete cdf. Both consume
uniforms from a :class:`RandomSource`.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from . import core
from .errors import DomainError, NumericError, ParameterError
from .zeromod import zm_cdf

__all__ = [
    "RandomSource",
    "sample_mqld",
    "mqld_ppf",
    "poisson_inverse",
    "sample_pmqld_alg1",
    "sample_pmqld_alg2",
    "sample_zmpmqld",
    "sample",
]

_INV_2_53 = 2.0**-53
_MAX_DOUBLINGS = 200


class RandomSource:
    """Seeded stream of uniforms in the open interval (0, 1).

    Backed by numpy's PCG64 seeded through ``SeedSequence(seed, spawn_key)``.
    The uniform is ``(k + 0.5) / 2**53`` for a 53-bit integer ``k``, so 0 and 1
    never occur. :meth:`child` derives an independent stream from extra keys,
    which is how parallel workers and study replicates get their seeds.
    """

    def __init__(self, seed=0, spawn_key=()):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.spawn_key = tuple(int(k) for k in spawn_key)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(seed, spawn_key=self.spawn_key))
        )

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, spawn_key={self.spawn_key})"

    def child(self, *keys):
        return RandomSource(self.seed, self.spawn_key + tuple(keys))

    def uniform(self, size=None):
        k = self._gen.integers(0, 2**53, size=size, dtype=np.int64)
        out = (k.astype(np.float64) + 0.5) * _INV_2_53
        return float(out) if size is None else out


def _as_source(rng):
    if isinstance(rng, RandomSource):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return RandomSource(0 if rng is None else int(rng))
    raise ParameterError(f"rng must be a RandomSource or integer seed, got {rng!r}")


def _check_n(n):
    if int(n) != n or n < 1:
        raise ParameterError(f"sample size must be a positive integer, got {n!r}")
    return int(n)


def _mqld_cdf_raw(theta, a3, delta, lam):
    tl = theta * lam
    return (a3 * -np.expm1(-tl) + special.gammainc(delta, tl)) / (a3 + 1)


def mqld_ppf(params, u, cdf_tol=1e-12, interval_tol=1e-13):
    """Rate ``lam`` with ``mqld_cdf(lam) = u``, vectorized over ``u``.

    The bracket starts at ``[0, 1/theta]`` and doubles until it covers ``u``;
    bisection then runs until the cdf residual is below ``cdf_tol`` or the
    interval is narrower than ``interval_tol`` relative to its upper end.
    """
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise DomainError("uniforms must lie in (0, 1)")
    theta, a3, delta = params.theta, params.alpha3, params.delta
    flat = u.ravel()
    lo = np.zeros_like(flat)
    hi = np.full_like(flat, 1.0 / theta)
    for _ in range(_MAX_DOUBLINGS):
        short = _mqld_cdf_raw(theta, a3, delta, hi) < flat
        if not short.any():
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, 2 * hi, hi)
    else:
        raise NumericError("mixing-rate bracket did not close within 200 doublings")
    active = np.ones(flat.shape, dtype=bool)
    mid = 0.5 * (lo + hi)
    for _ in range(400):
        mid = np.where(active, 0.5 * (lo + hi), mid)
        F = _mqld_cdf_raw(theta, a3, delta, mid)
        resid = F - flat
        done = (np.abs(resid) < cdf_tol) | (hi - lo <= interval_tol * hi)
        active &= ~done
        if not active.any():
            break
        below = resid < 0
        lo = np.where(active & below, mid, lo)
        hi = np.where(active & ~below, mid, hi)
    out = mid.reshape(u.shape)
    return float(out) if out.ndim == 0 else out


def sample_mqld(params, rng, size=None):
    """Draw mixing rates by inversion of the mixing cdf."""
    src = _as_source(rng)
    return mqld_ppf(params, src.uniform(size))


def poisson_inverse(lam, u):
    """Poisson(``lam``) quantile of ``u`` by sequential search on the pmf recursion.

    Below ``lam = 30`` the search starts at 0. Above it starts at the mode
    ``floor(lam)`` with the exact cdf there (``Q(m+1, lam)``) and walks up or
    down, which keeps the walk length of order ``sqrt(lam)`` and avoids the
    underflow of ``exp(-lam)``.
    """
    lam = np.asarray(lam, dtype=float)
    u = np.asarray(u, dtype=float)
    lam, u = np.broadcast_arrays(lam, u)
    out = np.empty(lam.shape, dtype=np.int64)
    for idx in np.ndindex(lam.shape):
        out[idx] = _poisson_one(float(lam[idx]), float(u[idx]))
    return int(out) if out.ndim == 0 else out


def _poisson_one(lam, u):
    if lam < 30.0:
        k = 0
        p = math.exp(-lam)
        F = p
        while F < u:
            k += 1
            p *= lam / k
            F += p
            if p == 0.0 and F < u:
                # u beyond what double precision can resolve; F has saturated
                return k
        return k
    m = int(math.floor(lam))
    F = float(special.gammaincc(m + 1, lam))
    p = math.exp(m * math.log(lam) - lam - math.lgamma(m + 1))
    k = m
    if F >= u:
        # walk down: smallest k with F(k) >= u
        while k > 0 and F - p >= u:
            F -= p
            p *= k / lam
            k -= 1
        return k
    while F < u:
        k += 1
        p *= lam / k
        F += p
        if p == 0.0:
            return k
    return k


def sample_pmqld_alg1(params, n, rng):
    """PMQLD draws through the mixture: rate by inversion, then Poisson."""
    n = _check_n(n)
    src = _as_source(rng)
    lam = mqld_ppf(params, src.uniform(n))
    return poisson_inverse(lam, src.uniform(n))


def sample_pmqld_alg2(params, n, rng):
    """PMQLD draws by discrete inversion: smallest ``x`` with ``cdf(x) >= u``."""
    n = _check_n(n)
    src = _as_source(rng)
    u = src.uniform(n)
    table = core.cdf_table(params, float(u.max()))
    return core.search_table(table, u).astype(np.int64)


def sample_zmpmqld(zm, n, rng):
    """Zero-modified draws by inversion of ``phi + (1 - phi) F(x)``."""
    n = _check_n(n)
    src = _as_source(rng)
    u = src.uniform(n)
    if zm.phi == 1.0:
        return np.zeros(n, dtype=np.int64)
    u_max = float(u.max())
    values = []
    x = 0
    while True:
        values.append(zm_cdf(zm, x))
        if values[-1] >= u_max - core.QUANTILE_SLACK:
            break
        x += 1
        if x > 10_000_000:
            raise NumericError("zero-modified cdf table did not reach the largest uniform")
    return core.search_table(np.array(values), u).astype(np.int64)


def sample(params, n, rng, algorithm="alg2"):
    """Dispatch to one of the two PMQLD sampling routes."""
    key = str(algorithm).lower().replace("_", "").replace("-", "")
    if key in ("alg1", "algi", "mixture"):
        return sample_pmqld_alg1(params, n, rng)
    if key in ("alg2", "algii", "inversion"):
        return sample_pmqld_alg2(params, n, rng)
    raise ParameterError(f"unknown sampling algorithm {algorithm!r}")
