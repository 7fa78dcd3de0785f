"""Moment and maximum-likelihood estimation.

Likelihood maximization runs in an unconstrained coordinate system
``u = (log theta, log(1 + alpha**3), log delta)`` with analytic gradients,
from several deterministic starting points. Every candidate optimum is
checked for stationarity in the natural parameters and for a positive
definite observed information; the best such interior optimum is reported.

Zero-modified fits reparameterize ``phi`` through the zero probability
``pi0 = expit(v)``, which maps the real line onto ``(phi_lower_bound, 1)``
and makes the likelihood separate into a binomial part for ``pi0`` and a
zero-truncated part for the base parameters.

Families (a base distribution together with its coordinate maps and
per-count score terms) are small objects; :data:`PMQLD` is defined here and
the baselines live in :mod:`pmqld.gof`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special
from scipy.stats import norm

from . import core
from .errors import ConvergenceError, DataError, EstimationError, ParameterError
from .specfun import chi_square_sf
from .table import FrequencyTable
from .zeromod import ZmParams

__all__ = [
    "FrequencyTable",
    "FitResult",
    "FitOptions",
    "Family",
    "PMQLD",
    "log_likelihood",
    "score",
    "observed_information",
    "fit_mle",
    "fit_mme",
    "moment_residuals",
    "zm_log_likelihood",
    "zm_score",
    "zm_observed_information",
    "fit_zm",
    "fit_zm_mle",
    "lr_test",
    "LrTest",
    "confidence_intervals",
]

# objective value used in the infeasible region
_INFEASIBLE = 1e100


def as_table(data):
    """Coerce a table or a sequence of observations to :class:`FrequencyTable`."""
    if isinstance(data, FrequencyTable):
        return data
    return FrequencyTable.from_observations(data)


@dataclass
class FitResult:
    """Outcome of a fit.

    ``estimates`` are in natural parameters in the order of ``names``.
    ``std_errors`` and ``covariance`` are ``None`` when the observed
    information is not positive definite or the method provides none.
    """

    model: str
    names: tuple
    estimates: np.ndarray
    std_errors: np.ndarray | None
    covariance: np.ndarray | None
    neg2_loglik: float
    aic: float
    converged: bool
    iterations: int
    method: str
    params: object = None
    n_obs: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def k(self):
        return len(self.estimates)

    def estimate(self, name):
        return float(self.estimates[self.names.index(name)])

    def as_dict(self):
        def arr(a):
            return None if a is None else np.asarray(a, dtype=float).tolist()

        return {
            "model": self.model,
            "method": self.method,
            "names": list(self.names),
            "estimates": arr(self.estimates),
            "std_errors": arr(self.std_errors),
            "covariance": arr(self.covariance),
            "neg2_loglik": float(self.neg2_loglik),
            "aic": float(self.aic),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "n_obs": int(self.n_obs),
        }


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings.

    ``gtol`` applies to the gradient of the mean log-likelihood in the
    unconstrained coordinates. A candidate is accepted as an interior optimum
    when the natural-parameter score is below ``stationarity * n`` and the
    observed information is positive definite.
    """

    gtol: float = 1e-8
    max_iter: int = 500
    polish_steps: int = 25
    stationarity: float = 1e-4
    max_starts: int | None = None


DEFAULT_OPTIONS = FitOptions()


class Family:
    """Base distribution interface used by the generic fitting driver.

    Subclasses implement the coordinate maps, per-count log pmf and score
    terms, and a list of starting points. Scores are with respect to the
    natural parameters (``natural_score_terms``) and to ``u``
    (``u_score_terms``), one row per count value.
    """

    name = "family"
    names = ()

    def to_params(self, u):
        raise NotImplementedError

    def to_u(self, params):
        raise NotImplementedError

    def natural(self, params):
        raise NotImplementedError

    def from_natural(self, values):
        raise NotImplementedError

    def log_pmf_terms(self, params, x):
        raise NotImplementedError

    def u_score_terms(self, params, x):
        raise NotImplementedError

    def natural_score_terms(self, params, x):
        raise NotImplementedError

    def u_hessian_sum(self, params, x, w):
        """Analytic u-space Hessian of ``sum w * log f``; ``None`` if unavailable."""
        return None

    def natural_hessian_sum(self, params, x, w):
        return None

    def starts(self, table):
        raise NotImplementedError

    def at_boundary(self, params):
        """True when ``params`` sits on the edge of the parameter space."""
        return False

    @property
    def k(self):
        return len(self.names)


def _pmqld_terms(params, x, order=1):
    """Per-count log pmf with derivatives in ``(theta, s = alpha**3, delta)``.

    Returns ``(log_f, grad)`` or ``(log_f, grad, hess)`` with shapes
    ``(m,)``, ``(m, 3)``, ``(m, 3, 3)``.

    Writing ``f = theta / ((1+s) Gamma(delta) x!) (1+theta)^-(x+delta) T`` with
    ``T = g + h``, ``g = s Gamma(delta) x! (1+theta)^(delta-1)`` and
    ``h = theta^(delta-1) Gamma(x+delta)``, every derivative of ``log T`` is a
    combination of the weights ``g/T`` and ``h/T``.
    """
    theta, s, delta = params.theta, params.alpha3, params.delta
    x = np.asarray(x, dtype=float)
    L1 = math.log1p(theta)
    lt = math.log(theta)
    log_G = special.gammaln(delta) + special.gammaln(x + 1) + (delta - 1) * L1
    log_H = (delta - 1) * lt + special.gammaln(x + delta)
    if s == 0:
        log_T = log_H
        wh = np.ones_like(x)
        wg = np.zeros_like(x)
        q = np.exp(log_G - log_H)
    else:
        log_T = core._log_signed_sum(math.log(abs(s)) + log_G, np.sign(s), log_H)
        q = np.exp(log_G - log_T)
        wg = s * q
        wh = np.exp(log_H - log_T)
    log_f = lt - math.log1p(s) - special.gammaln(delta) - special.gammaln(x + 1) - (x + delta) * L1 + log_T

    psi = special.psi(delta)
    psi_x = special.psi(x + delta)
    a_g = psi + L1
    a_h = lt + psi_x
    A = (delta - 1) * (wg / (1 + theta) + wh / theta)
    D = wg * a_g + wh * a_h
    grad = np.empty(x.shape + (3,))
    grad[..., 0] = 1 / theta - (x + delta) / (1 + theta) + A
    grad[..., 1] = q - 1 / (1 + s)
    grad[..., 2] = -psi - L1 + D
    if order == 1:
        return log_f, grad

    psi1 = special.polygamma(1, delta)
    psi1_x = special.polygamma(1, x + delta)
    hess = np.empty(x.shape + (3, 3))
    hess[..., 0, 0] = (
        -1 / theta**2
        + (x + delta) / (1 + theta) ** 2
        + (delta - 1) * (delta - 2) * (wg / (1 + theta) ** 2 + wh / theta**2)
        - A**2
    )
    hess[..., 1, 1] = 1 / (1 + s) ** 2 - q**2
    hess[..., 2, 2] = -psi1 + wg * (a_g**2 + psi1) + wh * (a_h**2 + psi1_x) - D**2
    h01 = q * (delta - 1) / (1 + theta) - q * A
    h02 = (
        -1 / (1 + theta)
        + wg * (1 + (delta - 1) * a_g) / (1 + theta)
        + wh * (1 + (delta - 1) * a_h) / theta
        - A * D
    )
    h12 = q * a_g - q * D
    hess[..., 0, 1] = hess[..., 1, 0] = h01
    hess[..., 0, 2] = hess[..., 2, 0] = h02
    hess[..., 1, 2] = hess[..., 2, 1] = h12
    return log_f, grad, hess


def _cube_root(s):
    return float(np.cbrt(s))


class PmqldFamily(Family):
    """PMQLD in coordinates ``u = (log theta, log(1 + alpha**3), log delta)``."""

    name = "PMQLD"
    names = ("theta", "alpha", "delta")

    def to_params(self, u):
        a, b, c = (float(v) for v in u)
        return core.PmqldParams(math.exp(a), _cube_root(math.expm1(b)), math.exp(c))

    def to_u(self, params):
        return np.array([math.log(params.theta), math.log1p(params.alpha3), math.log(params.delta)])

    def natural(self, params):
        return np.array(params.as_tuple())

    def from_natural(self, values):
        return core.PmqldParams(*(float(v) for v in values))

    def log_pmf_terms(self, params, x):
        return _pmqld_terms(params, x)[0]

    def _jac(self, params):
        return np.array([params.theta, 1 + params.alpha3, params.delta])

    def u_score_terms(self, params, x):
        return _pmqld_terms(params, x)[1] * self._jac(params)

    def natural_score_terms(self, params, x):
        g = _pmqld_terms(params, x)[1].copy()
        g[..., 1] *= 3 * params.alpha**2
        return g

    def _sums(self, params, x, w):
        _, g, h = _pmqld_terms(params, x, order=2)
        return w @ g, np.tensordot(w, h, axes=1)

    def u_hessian_sum(self, params, x, w):
        g, h = self._sums(params, x, w)
        J = self._jac(params)
        return h * np.outer(J, J) + np.diag(J * g)

    def natural_hessian_sum(self, params, x, w):
        g, h = self._sums(params, x, w)
        alpha = params.alpha
        J = np.array([1.0, 3 * alpha**2, 1.0])
        out = h * np.outer(J, J)
        out[1, 1] += 6 * alpha * g[1]
        return out

    def starts(self, table):
        return [self.to_u(p) for p in pmqld_starts(table)]

    def at_boundary(self, params, rel=1e-3):
        theta, s, delta = params.theta, params.alpha3, params.delta
        if delta < 1e-6 or theta < 1e-8 or theta > 1e8 or s > 1e8 or s < -1 + 1e-8:
            return True
        if s < 0 and delta > 1:
            floor = -((theta / (1 + theta)) ** (delta - 1))
            return s - floor <= rel * abs(floor)
        return False


PMQLD = PmqldFamily()


def _mean_matched(mean, s, delta):
    theta = (s + delta) / ((s + 1) * mean)
    return core.PmqldParams(theta, _cube_root(s), delta)


def pmqld_starts(table):
    """Deterministic start list: moments, geometric, NBD, PLD matches and a delta ladder."""
    mean = max(table.mean, 1e-3)
    var = table.variance
    out = []
    try:
        out.append(fit_mme(table).params)
    except EstimationError:
        pass
    # mostly geometric
    out.append(_mean_matched(mean, 8.0, 2.0))
    # negative binomial by moments, tiny geometric weight
    if var > mean:
        theta_nb = mean / (var - mean)
        out.append(core.PmqldParams(theta_nb, _cube_root(0.01), max(mean * theta_nb, 1e-3)))
    else:
        out.append(_mean_matched(mean, 0.01, 1.5))
    # Poisson-Lindley match: exponential + gamma(2) with equal weights
    theta_pl = (-(mean - 1) + math.sqrt((mean - 1) ** 2 + 8 * mean)) / (2 * mean)
    out.append(core.PmqldParams(theta_pl, 1.0, 2.0))
    for delta in (0.5, 4.0, 12.0, 40.0):
        out.append(_mean_matched(mean, 1.0, delta))
    return out


def _eval(family, table, params):
    x = table.values
    w = table.counts.astype(float)
    return float(w @ family.log_pmf_terms(params, x))


def log_likelihood(params, data, family=PMQLD):
    """Sum of ``frequency * log pmf`` over the table."""
    table = as_table(data)
    ll = _eval(family, table, params)
    if not math.isfinite(ll):
        raise core.NumericError(f"log-likelihood is not finite at {params}")
    return ll


def score(params, data, family=PMQLD):
    """Gradient of the log-likelihood in the natural parameters."""
    table = as_table(data)
    return table.counts.astype(float) @ family.natural_score_terms(params, table.values)


def _fd_jacobian(fun, z, rel=1e-5):
    z = np.asarray(z, dtype=float)
    cols = []
    for i in range(z.size):
        h = rel * max(1.0, abs(z[i]))
        e = np.zeros_like(z)
        e[i] = h
        cols.append((np.asarray(fun(z + e)) - np.asarray(fun(z - e))) / (2 * h))
    jac = np.array(cols).T
    return 0.5 * (jac + jac.T)


def observed_information(params, data, family=PMQLD):
    """Negative Hessian of the log-likelihood in natural parameters.

    Uses the family's analytic second derivatives when it has them, otherwise
    central differences of the analytic score.
    """
    table = as_table(data)
    w = table.counts.astype(float)
    hess = family.natural_hessian_sum(params, table.values, w)
    if hess is None:

        def grad(z):
            return score(family.from_natural(z), table, family)

        hess = _fd_jacobian(grad, family.natural(params))
    return -hess


# ---------------------------------------------------------------------------
# generic driver


class _Objective:
    """Mean negative log-likelihood in u-space for a plain family."""

    def __init__(self, family, table):
        self.family = family
        self.table = table
        self.x = table.values
        self.w = table.counts.astype(float)
        self.n = table.n
        self.k = family.k

    def params(self, u):
        return self.family.to_params(u)

    def value(self, u):
        try:
            p = self.params(u)
        except (ParameterError, OverflowError, ValueError):
            return _INFEASIBLE
        with np.errstate(all="ignore"):
            ll = float(self.w @ self.family.log_pmf_terms(p, self.x))
        return -ll / self.n if math.isfinite(ll) else _INFEASIBLE

    def grad(self, u):
        try:
            p = self.params(u)
        except (ParameterError, OverflowError, ValueError):
            return np.zeros(self.k)
        with np.errstate(all="ignore"):
            g = self.w @ self.family.u_score_terms(p, self.x)
        return -g / self.n if np.all(np.isfinite(g)) else np.zeros(self.k)

    def hess(self, u):
        p = self.params(u)
        h = self.family.u_hessian_sum(p, self.x, self.w)
        if h is None:
            return _fd_jacobian(self.grad, u)
        return -h / self.n

    # natural-parameter quantities at the candidate
    def natural_estimates(self, u):
        return self.family.natural(self.params(u))

    def natural_score(self, u):
        return score(self.params(u), self.table, self.family)

    def natural_information(self, u):
        return observed_information(self.params(u), self.table, self.family)

    def result_params(self, u):
        return self.params(u)

    def at_boundary(self, u):
        return self.family.at_boundary(self.params(u))


def _newton_polish(obj, u, steps, gtol):
    """Newton steps on the u-space objective after the quasi-Newton phase.

    Near the optimum the objective changes by less than its rounding error,
    so a step is also accepted when the value stays within rounding noise
    and the gradient shrinks.
    """
    f = obj.value(u)
    g = obj.grad(u)
    gmax = float(np.max(np.abs(g)))
    noise = 1e-13 * max(1.0, abs(f))
    used = 0
    for _ in range(steps):
        if gmax < gtol * 1e-2:
            break
        try:
            H = obj.hess(u)
            L = np.linalg.cholesky(H)
        except (np.linalg.LinAlgError, ParameterError, ValueError):
            break
        step = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        t = 1.0
        accepted = False
        while t > 1e-6:
            u_new = u + t * step
            f_new = obj.value(u_new)
            if f_new < f - noise:
                accepted = True
            elif f_new <= f + noise:
                g_new = obj.grad(u_new)
                accepted = float(np.max(np.abs(g_new))) < gmax
            if accepted:
                break
            t *= 0.5
        if not accepted:
            break
        u, f = u_new, f_new
        g = obj.grad(u)
        gmax = float(np.max(np.abs(g)))
        used += 1
    return u, f, g, used


@dataclass
class _Candidate:
    index: int
    u: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    interior: bool
    note: str = ""


def _is_pd(mat):
    if mat is None or not np.all(np.isfinite(mat)):
        return False
    try:
        np.linalg.cholesky(0.5 * (mat + mat.T))
    except np.linalg.LinAlgError:
        return False
    return True


def _run_starts(obj, starts, options):
    candidates = []
    for idx, u0 in enumerate(starts):
        u0 = np.asarray(u0, dtype=float)
        if obj.value(u0) >= _INFEASIBLE:
            candidates.append(_Candidate(idx, u0, math.inf, math.inf, 0, False, "infeasible start"))
            continue
        with np.errstate(all="ignore"):
            res = optimize.minimize(
                obj.value,
                u0,
                jac=obj.grad,
                method="BFGS",
                options={"gtol": options.gtol, "maxiter": options.max_iter},
            )
        u, f, g, used = _newton_polish(obj, np.asarray(res.x), options.polish_steps, options.gtol)
        if not math.isfinite(f) or f >= _INFEASIBLE:
            candidates.append(_Candidate(idx, u, math.inf, math.inf, res.nit, False, "diverged"))
            continue
        gnorm = float(np.max(np.abs(g)))
        interior = False
        note = ""
        try:
            nat_score = obj.natural_score(u)
            info = obj.natural_information(u)
            stationary = float(np.max(np.abs(nat_score))) < options.stationarity * obj.n
            interior = bool(stationary and gnorm < options.gtol and _is_pd(info))
            if not interior:
                note = "boundary or saddle" if gnorm < options.gtol else "gradient tolerance not met"
        except (ParameterError, core.NumericError, ValueError, OverflowError) as exc:
            note = f"post-check failed: {exc}"
        candidates.append(_Candidate(idx, u, f, gnorm, int(res.nit) + used, interior, note))
    return candidates


def _fit(obj, starts, options, model, method="MLE"):
    if options.max_starts is not None:
        starts = starts[: options.max_starts]
    candidates = _run_starts(obj, starts, options)
    finite = [c for c in candidates if math.isfinite(c.value)]
    if not finite:
        raise ConvergenceError(
            f"{model}: every start failed",
            diagnostics={"starts": [(c.index, c.note) for c in candidates]},
        )
    interior = [c for c in finite if c.interior]
    pool = interior if interior else finite
    best = min(pool, key=lambda c: (c.value, c.index))
    at_boundary = (not best.interior) and obj.at_boundary(best.u)
    n = obj.n
    neg2 = 2.0 * n * best.value
    est = obj.natural_estimates(best.u)
    cov = se = None
    if best.interior:
        info = obj.natural_information(best.u)
        cov = np.linalg.inv(0.5 * (info + info.T))
        cov = 0.5 * (cov + cov.T)
        se = np.sqrt(np.diag(cov))
    diagnostics = {
        "start_index": best.index,
        "gradient_norm": best.grad_norm,
        "candidates": [
            {"index": c.index, "neg2_loglik": 2.0 * n * c.value, "interior": c.interior, "note": c.note}
            for c in candidates
        ],
        "best_overall_neg2_loglik": 2.0 * n * min(c.value for c in finite),
        "at_boundary": at_boundary,
    }
    return FitResult(
        model=model,
        names=tuple(obj_names(obj)),
        estimates=np.asarray(est, dtype=float),
        std_errors=se,
        covariance=cov,
        neg2_loglik=neg2,
        aic=neg2 + 2 * len(est),
        converged=best.interior,
        iterations=best.iterations,
        method=method,
        params=obj.result_params(best.u),
        n_obs=n,
        diagnostics=diagnostics,
    )


def obj_names(obj):
    return obj.names if hasattr(obj, "names") else obj.family.names


def _check_fit_data(table):
    if table.n_distinct < 2:
        raise DataError("fitting needs at least two distinct observed values")


def fit_family(family, data, init=None, options=DEFAULT_OPTIONS):
    """Maximum-likelihood fit of any :class:`Family`."""
    table = as_table(data)
    _check_fit_data(table)
    obj = _Objective(family, table)
    starts = [] if init is None else [family.to_u(init)]
    starts += family.starts(table)
    return _fit(obj, starts, options, family.name)


def fit_mle(data, init=None, options=DEFAULT_OPTIONS):
    """Maximum-likelihood PMQLD fit.

    Parameters
    ----------
    data : FrequencyTable or sequence of int
    init : PmqldParams, optional
        Extra starting point tried before the default recipes.
    options : FitOptions

    Returns
    -------
    FitResult
        ``converged`` is False, and no standard errors are given, when no
        start reached an interior optimum with positive definite information.
        ``diagnostics["at_boundary"]`` then tells whether the best point lies
        on the edge of the parameter space (a constrained maximum).

    Raises
    ------
    ConvergenceError
        If every start fails.
    """
    return fit_family(PMQLD, data, init, options)


# ---------------------------------------------------------------------------
# method of moments


def _model_raw_moments(theta, s, delta):
    k1 = s + delta
    k2 = 2 * s + delta * (delta + 1)
    k3 = 6 * s + delta * (delta + 1) * (delta + 2)
    c = s + 1
    return np.array(
        [
            k1 / (c * theta),
            (theta * k1 + k2) / (c * theta**2),
            (theta**2 * k1 + 3 * theta * k2 + k3) / (c * theta**3),
        ]
    )


def moment_residuals(params, sample_moments):
    """Relative residuals of the first three raw moments."""
    m = _model_raw_moments(params.theta, params.alpha3, params.delta)
    return m / np.asarray(sample_moments, dtype=float) - 1.0


def _solve_moments(target, u0, tol=1e-10, max_iter=200):
    def resid(u):
        theta, s, delta = math.exp(u[0]), math.expm1(u[1]), math.exp(u[2])
        return _model_raw_moments(theta, s, delta) / target - 1.0

    u = np.asarray(u0, dtype=float)
    r = resid(u)
    for _ in range(max_iter):
        norm_r = float(np.linalg.norm(r))
        if norm_r < tol:
            return u, norm_r
        J = np.empty((3, 3))
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-6
            J[:, i] = (resid(u + e) - resid(u - e)) / 2e-6
        try:
            step = -np.linalg.lstsq(J, r, rcond=None)[0]
        except np.linalg.LinAlgError:
            return u, norm_r
        step_len = float(np.max(np.abs(step)))
        if step_len > 2.0:
            step *= 2.0 / step_len
        t = 1.0
        while t > 1e-8:
            u_new = u + t * step
            with np.errstate(all="ignore"):
                r_new = resid(u_new)
            if np.all(np.isfinite(r_new)) and np.linalg.norm(r_new) < norm_r:
                break
            t *= 0.5
        else:
            return u, norm_r
        u, r = u_new, r_new
    return u, float(np.linalg.norm(r))


def fit_mme(data, tol=1e-10):
    """Method-of-moments PMQLD fit from the first three raw sample moments.

    Accepts a :class:`FrequencyTable`, raw observations, or a length-3
    sequence of raw moments passed as ``data=("moments", (m1, m2, m3))``.

    Raises
    ------
    EstimationError
        If the sample is not over-dispersed or no admissible root is found.
    """
    if isinstance(data, tuple) and len(data) == 2 and data[0] == "moments":
        target = np.asarray(data[1], dtype=float)
        table = None
    else:
        table = as_table(data)
        target = np.array(table.sample_moments())
    m1, m2, _ = target
    if not np.all(target > 0):
        raise EstimationError("moment equations need positive sample moments")
    var = m2 - m1**2
    if var <= m1:
        raise EstimationError(
            f"sample variance {var:.6g} does not exceed the mean {m1:.6g}; moment equations have no root"
        )
    theta_nb = m1 / (var - m1)
    starts = []
    for s in (0.125, 1.0, 0.01, 8.0):
        for scale in (1.0, 0.5, 2.0):
            delta = max(m1 * theta_nb * scale, 1e-2)
            theta = (s + delta) / ((s + 1) * m1)
            starts.append(np.array([math.log(theta), math.log1p(s), math.log(delta)]))
    best = None
    for u0 in starts:
        with np.errstate(all="ignore"):
            u, rn = _solve_moments(target, u0, tol)
        if rn < tol:
            try:
                params = PMQLD.to_params(u)
            except ParameterError:
                continue
            best = (params, u, rn)
            break
        if best is None or rn < best[2]:
            best = (None, u, rn)
    if best is None or best[0] is None:
        raise EstimationError(
            f"moment equations: no admissible root (best residual {best[2]:.3g})" if best else
            "moment equations: no admissible root"
        )
    params = best[0]
    neg2 = -2.0 * log_likelihood(params, table) if table is not None else math.nan
    return FitResult(
        model="PMQLD",
        names=PMQLD.names,
        estimates=PMQLD.natural(params),
        std_errors=None,
        covariance=None,
        neg2_loglik=neg2,
        aic=neg2 + 6,
        converged=True,
        iterations=0,
        method="MME",
        params=params,
        n_obs=0 if table is None else table.n,
        diagnostics={"residual_norm": best[2]},
    )


# ---------------------------------------------------------------------------
# zero-modified models


def _zm_split(table):
    x = table.values
    w = table.counts.astype(float)
    pos = x > 0
    return x[pos], w[pos], table.zeros


def zm_log_likelihood(zm, data, family=PMQLD):
    """Log-likelihood of a zero-modified model with base ``zm.base``."""
    table = as_table(data)
    x_pos, w_pos, n0 = _zm_split(table)
    phi = zm.phi
    log_f0 = float(family.log_pmf_terms(zm.base, np.array([0]))[0])
    f0 = math.exp(log_f0)
    ll = 0.0
    if n0:
        p0 = phi + (1 - phi) * f0
        if p0 <= 0:
            return -math.inf
        ll += n0 * math.log(p0)
    if w_pos.size:
        if phi >= 1:
            return -math.inf
        ll += float(w_pos @ (math.log1p(-phi) + family.log_pmf_terms(zm.base, x_pos)))
    return ll


def zm_score(zm, data, family=PMQLD):
    """Natural-parameter gradient ordered as ``(*base names, phi)``."""
    table = as_table(data)
    x_pos, w_pos, n0 = _zm_split(table)
    phi = zm.phi
    base = zm.base
    f0 = math.exp(float(family.log_pmf_terms(base, np.array([0]))[0]))
    s0 = family.natural_score_terms(base, np.array([0]))[0]
    p0 = phi + (1 - phi) * f0
    n_pos = float(w_pos.sum())
    g_base = w_pos @ family.natural_score_terms(base, x_pos) if w_pos.size else np.zeros(family.k)
    if n0:
        g_base = g_base + n0 * (1 - phi) * f0 * s0 / p0
    g_phi = (n0 * (1 - f0) / p0 if n0 else 0.0) - n_pos / (1 - phi)
    return np.append(g_base, g_phi)


class _ZmObjective:
    """Mean negative log-likelihood over ``(u_base, v)`` with ``pi0 = expit(v)``."""

    def __init__(self, family, table):
        self.family = family
        self.table = table
        self.n = table.n
        self.x_pos, self.w_pos, self.n0 = _zm_split(table)
        self.n_pos = float(self.w_pos.sum())
        self.k = family.k + 1
        self.names = tuple(family.names) + ("phi",)

    def _split(self, z):
        return z[:-1], float(z[-1])

    def value(self, z):
        ub, v = self._split(z)
        try:
            base = self.family.to_params(ub)
        except (ParameterError, OverflowError, ValueError):
            return _INFEASIBLE
        with np.errstate(all="ignore"):
            log_f0 = float(self.family.log_pmf_terms(base, np.array([0]))[0])
            log_pos = self.family.log_pmf_terms(base, self.x_pos)
        log_pi0 = -np.logaddexp(0.0, -v)
        log_pi1 = -np.logaddexp(0.0, v)
        ll = self.n0 * log_pi0 + self.n_pos * log_pi1
        if self.w_pos.size:
            log_trunc = math.log(-math.expm1(log_f0)) if log_f0 < 0 else -math.inf
            ll += float(self.w_pos @ log_pos) - self.n_pos * log_trunc
        return -ll / self.n if math.isfinite(ll) else _INFEASIBLE

    def grad(self, z):
        ub, v = self._split(z)
        try:
            base = self.family.to_params(ub)
        except (ParameterError, OverflowError, ValueError):
            return np.zeros(self.k)
        with np.errstate(all="ignore"):
            f0 = math.exp(float(self.family.log_pmf_terms(base, np.array([0]))[0]))
            s0 = self.family.u_score_terms(base, np.array([0]))[0]
            g_base = (
                self.w_pos @ self.family.u_score_terms(base, self.x_pos)
                if self.w_pos.size
                else np.zeros(self.family.k)
            )
            g_base = g_base + self.n_pos * f0 / (1 - f0) * s0
        pi0 = special.expit(v)
        g_v = self.n0 * (1 - pi0) - self.n_pos * pi0
        g = np.append(g_base, g_v)
        return -g / self.n if np.all(np.isfinite(g)) else np.zeros(self.k)

    def hess(self, z):
        return _fd_jacobian(self.grad, z)

    def zm_params(self, z):
        ub, v = self._split(z)
        base = self.family.to_params(ub)
        f0 = math.exp(float(self.family.log_pmf_terms(base, np.array([0]))[0]))
        pi0 = float(special.expit(v))
        phi = (pi0 - f0) / (1 - f0)
        return ZmParams(max(phi, -f0 / (1 - f0)), base)

    def natural_estimates(self, z):
        zm = self.zm_params(z)
        return np.append(self.family.natural(zm.base), zm.phi)

    def natural_score(self, z):
        return zm_score(self.zm_params(z), self.table, self.family)

    def natural_information(self, z):
        return zm_observed_information(self.zm_params(z), self.table, self.family)

    def result_params(self, z):
        return self.zm_params(z)

    def at_boundary(self, z):
        zm = self.zm_params(z)
        return self.family.at_boundary(zm.base) or abs(zm.phi - zm.lower_bound) < 1e-9 or zm.phi > 1 - 1e-9


def zm_observed_information(zm, data, family=PMQLD):
    """Negative Hessian in ``(*base names, phi)`` by central differences of :func:`zm_score`."""
    table = as_table(data)
    z0 = np.append(family.natural(zm.base), zm.phi)

    def grad(z):
        return zm_score(ZmParams(z[-1], family.from_natural(z[:-1])), table, family)

    return -_fd_jacobian(grad, z0)


def _logit(p):
    p = min(max(p, 1e-12), 1 - 1e-12)
    return math.log(p / (1 - p))


def fit_zm(family, data, options=DEFAULT_OPTIONS, base_fit=None):
    """Maximum-likelihood fit of the zero-modified version of ``family``.

    Starts include the plain base optimum at ``phi = 0`` so the reported
    optimum can never be worse than the unmodified fit.
    """
    table = as_table(data)
    _check_fit_data(table)
    obj = _ZmObjective(family, table)
    v_obs = _logit(table.zeros / table.n)
    starts = []
    if base_fit is None:
        try:
            base_fit = fit_family(family, table, options=options)
        except ConvergenceError:
            base_fit = None
    if base_fit is not None and base_fit.params is not None:
        ub = family.to_u(base_fit.params)
        f0 = math.exp(float(family.log_pmf_terms(base_fit.params, np.array([0]))[0]))
        starts.append(np.append(ub, _logit(f0)))
        starts.append(np.append(ub, v_obs))
    for ub in family.starts(table):
        starts.append(np.append(ub, v_obs))
    return _fit(obj, starts, options, "ZM" + family.name)


def fit_zm_mle(data, options=DEFAULT_OPTIONS, base_fit=None):
    """Maximum-likelihood zero-modified PMQLD fit; estimates ``(theta, alpha, delta, phi)``."""
    return fit_zm(PMQLD, data, options, base_fit)


# ---------------------------------------------------------------------------
# inference


@dataclass(frozen=True)
class LrTest:
    statistic: float
    df: int
    p_value: float


def lr_test(fit_null, fit_alt, tol=1e-6):
    """Likelihood-ratio test of a nested null fit against an alternative.

    Raises
    ------
    EstimationError
        If the null has at least as many parameters, or the statistic is
        negative beyond ``tol`` (the fits are not nested or not optimal).
    """
    df = fit_alt.k - fit_null.k
    if df < 1:
        raise EstimationError(
            f"null model must have fewer parameters ({fit_null.k} vs {fit_alt.k})"
        )
    stat = fit_null.neg2_loglik - fit_alt.neg2_loglik
    if stat < -tol:
        raise EstimationError(
            f"negative likelihood-ratio statistic {stat:.6g}: fits are not nested or not optimal"
        )
    stat = max(stat, 0.0)
    return LrTest(stat, df, chi_square_sf(stat, df))


def confidence_intervals(fit, level=0.95):
    """Wald intervals ``estimate -/+ z * se`` keyed by parameter name."""
    if fit.std_errors is None or fit.covariance is None:
        raise EstimationError("fit has no covariance; Wald intervals unavailable")
    if not 0.0 <= level < 1.0:
        raise ParameterError(f"level must lie in [0, 1), got {level}")
    z = float(norm.ppf(0.5 + level / 2.0))
    return {
        name: (float(est - z * se), float(est + z * se))
        for name, est, se in zip(fit.names, fit.estimates, fit.std_errors)
    }
