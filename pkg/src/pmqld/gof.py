"""Baseline count models, chi-square goodness of fit and model comparison.

The baselines are the geometric (GD), negative binomial (NBD) and
Poisson-Lindley (PLD) laws, each fitted with the same driver as PMQLD. Their
zero-modified versions reuse :mod:`pmqld.zeromod`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import core
from .errors import ConvergenceError, DomainError, EstimationError, GofError, ParameterError
from .estimation import (
    PMQLD,
    Family,
    FitOptions,
    FitResult,
    as_table,
    fit_family,
    fit_zm,
)
from .specfun import chi_square_sf
from .zeromod import ZmParams, zm_cdf, zm_pmf

__all__ = [
    "BaselineKind",
    "BaselineModel",
    "baseline_pmf",
    "fit_baseline",
    "GEOMETRIC",
    "NEG_BINOMIAL",
    "POISSON_LINDLEY",
    "Cell",
    "table_cells",
    "expected_counts",
    "observed_counts",
    "GofReport",
    "chi_square_gof",
    "MODEL_NAMES",
    "fit_model",
    "ModelRow",
    "Comparison",
    "compare_models",
    "pld_moment_theta",
]


class BaselineKind(str, enum.Enum):
    GEOMETRIC = "Geometric"
    NEG_BINOMIAL = "NegBinomial"
    POISSON_LINDLEY = "PoissonLindley"


@dataclass(frozen=True)
class BaselineModel:
    """A fitted or specified baseline law.

    ``params`` holds ``(theta,)`` for the geometric and Poisson-Lindley laws
    and ``(size, prob)`` for the negative binomial, with pmf
    ``Gamma(x+size) / (x! Gamma(size)) prob^size (1-prob)^x``.
    """

    kind: BaselineKind
    params: tuple

    def __post_init__(self):
        kind = BaselineKind(self.kind)
        params = tuple(float(p) for p in self.params)
        if not all(math.isfinite(p) for p in params):
            raise ParameterError(f"{kind.value} parameters must be finite, got {params}")
        if kind is BaselineKind.NEG_BINOMIAL:
            if len(params) != 2:
                raise ParameterError("negative binomial needs (size, prob)")
            size, prob = params
            if size <= 0:
                raise ParameterError(f"size > 0 violated (size={size})")
            if not 0 < prob < 1:
                raise ParameterError(f"prob in (0, 1) violated (prob={prob})")
        else:
            if len(params) != 1:
                raise ParameterError(f"{kind.value} needs a single theta")
            if params[0] <= 0:
                raise ParameterError(f"theta > 0 violated (theta={params[0]})")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)

    def log_pmf(self, x):
        xa = core._check_counts(x)
        if self.kind is BaselineKind.GEOMETRIC:
            (theta,) = self.params
            out = math.log(theta) - (xa + 1) * math.log1p(theta)
        elif self.kind is BaselineKind.NEG_BINOMIAL:
            size, prob = self.params
            out = (
                special.gammaln(xa + size)
                - special.gammaln(size)
                - special.gammaln(xa + 1)
                + size * math.log(prob)
                + xa * math.log1p(-prob)
            )
        else:
            (theta,) = self.params
            out = 2 * math.log(theta) + np.log(xa + theta + 2) - (xa + 3) * math.log1p(theta)
        return float(out) if np.ndim(x) == 0 else out

    def pmf(self, x):
        out = np.exp(self.log_pmf(x))
        return float(out) if np.ndim(x) == 0 else out

    def cdf(self, x):
        xa = core._check_counts(x)
        if self.kind is BaselineKind.GEOMETRIC:
            (theta,) = self.params
            out = -np.expm1(-(xa + 1) * math.log1p(theta))
        elif self.kind is BaselineKind.NEG_BINOMIAL:
            size, prob = self.params
            out = special.betainc(size, xa + 1, prob)
        else:
            out = 1.0 - _pld_survival(self.params[0], xa)
        return float(out) if np.ndim(x) == 0 else out

    def survival(self, x):
        xa = core._check_counts(x)
        if self.kind is BaselineKind.POISSON_LINDLEY:
            out = _pld_survival(self.params[0], xa)
        elif self.kind is BaselineKind.GEOMETRIC:
            out = np.exp(-(xa + 1) * math.log1p(self.params[0]))
        else:
            size, prob = self.params
            out = special.betaincc(size, xa + 1, prob)
        return float(out) if np.ndim(x) == 0 else out


def _pld_survival(theta, x):
    """P(X > x) for the Poisson-Lindley law, summed in closed form."""
    # sum_{t>x} theta^2 (t+theta+2) / (1+theta)^(t+3)
    r = 1.0 / (1 + theta)
    k = x + 1
    head = theta**2 * r**3 * r**k / (1 - r)
    # sum_{t>=k} (t + theta + 2) r^t / r^k = (k + theta + 2)/(1-r) + r/(1-r)^2
    return head * ((k + theta + 2) + r / (1 - r))


def baseline_pmf(model, x):
    return model.pmf(x)


class _GeometricFamily(Family):
    name = "GD"
    names = ("theta",)

    def to_params(self, u):
        return BaselineModel(BaselineKind.GEOMETRIC, (math.exp(float(u[0])),))

    def to_u(self, params):
        return np.array([math.log(params.params[0])])

    def natural(self, params):
        return np.array(params.params)

    def from_natural(self, values):
        return BaselineModel(BaselineKind.GEOMETRIC, tuple(values))

    def log_pmf_terms(self, params, x):
        return params.log_pmf(np.asarray(x))

    def natural_score_terms(self, params, x):
        (theta,) = params.params
        x = np.asarray(x, dtype=float)
        return (1 / theta - (x + 1) / (1 + theta))[:, None]

    def u_score_terms(self, params, x):
        return self.natural_score_terms(params, x) * params.params[0]

    def starts(self, table):
        theta = 1.0 / max(table.mean, 1e-3)
        return [np.array([math.log(theta * f)]) for f in (1.0, 0.5, 2.0)]


class _NegBinomialFamily(Family):
    name = "NBD"
    names = ("size", "prob")

    def to_params(self, u):
        return BaselineModel(
            BaselineKind.NEG_BINOMIAL, (math.exp(float(u[0])), float(special.expit(u[1])))
        )

    def to_u(self, params):
        size, prob = params.params
        return np.array([math.log(size), math.log(prob / (1 - prob))])

    def natural(self, params):
        return np.array(params.params)

    def from_natural(self, values):
        return BaselineModel(BaselineKind.NEG_BINOMIAL, tuple(values))

    def log_pmf_terms(self, params, x):
        return params.log_pmf(np.asarray(x))

    def natural_score_terms(self, params, x):
        size, prob = params.params
        x = np.asarray(x, dtype=float)
        d_size = special.psi(x + size) - special.psi(size) + math.log(prob)
        d_prob = size / prob - x / (1 - prob)
        return np.stack([d_size, d_prob], axis=-1)

    def u_score_terms(self, params, x):
        size, prob = params.params
        return self.natural_score_terms(params, x) * np.array([size, prob * (1 - prob)])

    def starts(self, table):
        mean = max(table.mean, 1e-3)
        var = table.variance
        out = []
        if var > mean:
            prob = mean / var
            size = mean * prob / (1 - prob)
            out.append(np.array([math.log(size), math.log(prob / (1 - prob))]))
        for size in (0.5, 2.0, 10.0):
            prob = size / (size + mean)
            out.append(np.array([math.log(size), math.log(prob / (1 - prob))]))
        return out


def pld_moment_theta(mean):
    """Moment estimator of the Poisson-Lindley theta for a given sample mean."""
    return (-(mean - 1) + math.sqrt((mean - 1) ** 2 + 8 * mean)) / (2 * mean)


class _PoissonLindleyFamily(Family):
    name = "PLD"
    names = ("theta",)

    def to_params(self, u):
        return BaselineModel(BaselineKind.POISSON_LINDLEY, (math.exp(float(u[0])),))

    def to_u(self, params):
        return np.array([math.log(params.params[0])])

    def natural(self, params):
        return np.array(params.params)

    def from_natural(self, values):
        return BaselineModel(BaselineKind.POISSON_LINDLEY, tuple(values))

    def log_pmf_terms(self, params, x):
        return params.log_pmf(np.asarray(x))

    def natural_score_terms(self, params, x):
        (theta,) = params.params
        x = np.asarray(x, dtype=float)
        return (2 / theta + 1 / (x + theta + 2) - (x + 3) / (1 + theta))[:, None]

    def u_score_terms(self, params, x):
        return self.natural_score_terms(params, x) * params.params[0]

    def starts(self, table):
        theta = pld_moment_theta(max(table.mean, 1e-3))
        return [np.array([math.log(theta * f)]) for f in (1.0, 0.5, 2.0)]


GEOMETRIC = _GeometricFamily()
NEG_BINOMIAL = _NegBinomialFamily()
POISSON_LINDLEY = _PoissonLindleyFamily()

_BASELINE_FAMILIES = {
    BaselineKind.GEOMETRIC: GEOMETRIC,
    BaselineKind.NEG_BINOMIAL: NEG_BINOMIAL,
    BaselineKind.POISSON_LINDLEY: POISSON_LINDLEY,
}


def fit_baseline(kind, data, options=FitOptions()):
    """Maximum-likelihood fit of a baseline law."""
    return fit_family(_BASELINE_FAMILIES[BaselineKind(kind)], data, options=options)


# ---------------------------------------------------------------------------
# cells and expected counts


@dataclass(frozen=True)
class Cell:
    """Count range ``[lo, hi]``; ``hi is None`` marks an open ``>= lo`` cell."""

    lo: int
    hi: int | None

    @property
    def label(self):
        if self.hi is None:
            return f">={self.lo}"
        return str(self.lo) if self.lo == self.hi else f"{self.lo}-{self.hi}"

    def contains(self, x):
        return (x >= self.lo) & (True if self.hi is None else x <= self.hi)


def table_cells(table):
    """One cell per count ``0..max - 1`` plus an open cell ``>= max``."""
    top = int(table.values.max())
    if top == 0:
        return [Cell(0, None)]
    return [Cell(k, k) for k in range(top)] + [Cell(top, None)]


def _check_partition(cells):
    if not cells:
        raise GofError("empty cell specification")
    expect = 0
    for i, c in enumerate(cells):
        if c.lo != expect:
            raise GofError(f"cells do not partition the support: expected a cell starting at {expect}")
        if c.hi is None:
            if i != len(cells) - 1:
                raise GofError("only the last cell may be open-ended")
            return
        if c.hi < c.lo:
            raise GofError(f"cell [{c.lo}, {c.hi}] is empty")
        expect = c.hi + 1
    raise GofError("the last cell must be open-ended to cover the whole support")


def _model_pmf(model, x):
    if isinstance(model, core.PmqldParams):
        return np.asarray(core.pmf(model, x))
    if isinstance(model, ZmParams):
        return np.asarray(zm_pmf(model, x))
    if isinstance(model, BaselineModel):
        return np.asarray(model.pmf(x))
    raise DomainError(f"unsupported model {model!r}")


def _model_survival(model, x):
    if isinstance(model, core.PmqldParams):
        return float(core.survival(model, x))
    if isinstance(model, ZmParams):
        base = model.base
        s = core.survival(base, x) if isinstance(base, core.PmqldParams) else base.survival(x)
        return (1 - model.phi) * float(s)
    if isinstance(model, BaselineModel):
        return float(model.survival(x))
    raise DomainError(f"unsupported model {model!r}")


def expected_counts(model, n, cells):
    """``n`` times the model probability of each cell of a partition.

    The open last cell uses the survival function so the total is ``n``.
    """
    _check_partition(cells)
    out = []
    for c in cells:
        if c.hi is None:
            prob = 1.0 if c.lo == 0 else _model_survival(model, c.lo - 1)
        else:
            prob = float(np.sum(_model_pmf(model, np.arange(c.lo, c.hi + 1))))
        out.append(n * prob)
    return np.array(out)


def observed_counts(table, cells):
    _check_partition(cells)
    return np.array([int(table.counts[c.contains(table.values)].sum()) for c in cells])


@dataclass(frozen=True)
class GofReport:
    cells: list
    statistic: float
    df: int
    p_value: float
    pooled_from: int

    def as_dict(self):
        return {
            "cells": [
                {"label": lab, "observed": float(o), "expected": float(e)} for lab, o, e in self.cells
            ],
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "pooled_from": self.pooled_from,
        }


def _merge(labels, obs, exp, i):
    """Merge cell ``i`` with cell ``i + 1``."""
    left, right = labels[i], labels[i + 1]
    lo = left.split("-")[0].lstrip(">=")
    if right.startswith(">="):
        label = f">={lo}"
    else:
        label = f"{lo}-{right.split('-')[-1]}"
    labels[i : i + 2] = [label]
    obs[i : i + 2] = [obs[i] + obs[i + 1]]
    exp[i : i + 2] = [exp[i] + exp[i + 1]]


def chi_square_gof(observed, expected, fitted_params, labels=None, threshold=1.0):
    """Pearson chi-square test with pooling of small expected cells.

    Cells are pooled from the tail: the last cell is merged into its
    neighbour while its expected count is below ``threshold``, then any
    remaining small interior cell is merged into the next one.
    ``df = cells - 1 - fitted_params``.

    Raises
    ------
    GofError
        If fewer than ``fitted_params + 2`` cells remain.
    """
    obs = [float(o) for o in observed]
    exp = [float(e) for e in expected]
    if len(obs) != len(exp) or not obs:
        raise GofError("observed and expected must be nonempty and of equal length")
    if any(e < 0 or not math.isfinite(e) for e in exp):
        raise GofError("expected counts must be finite and nonnegative")
    labels = [str(i) for i in range(len(obs))] if labels is None else [str(lab) for lab in labels]
    pooled_from = len(obs)
    while len(exp) > 1 and exp[-1] < threshold:
        _merge(labels, obs, exp, len(exp) - 2)
    i = len(exp) - 2
    while i >= 0:
        if exp[i] < threshold and len(exp) > 1:
            _merge(labels, obs, exp, i)
        i -= 1
    df = len(exp) - 1 - int(fitted_params)
    if df < 1:
        raise GofError(
            f"{len(exp)} cells after pooling leave no degrees of freedom for {fitted_params} parameters"
        )
    if any(e <= 0 for e in exp):
        raise GofError("a pooled cell has zero expected count")
    stat = float(sum((o - e) ** 2 / e for o, e in zip(obs, exp)))
    return GofReport(list(zip(labels, obs, exp)), stat, df, chi_square_sf(stat, df), pooled_from)


# ---------------------------------------------------------------------------
# model registry and comparison

MODEL_NAMES = ("GD", "NBD", "PLD", "PMQLD", "ZMNBD", "ZMPLD", "ZMPMQLD")

_ALIASES = {
    "gd": "GD",
    "geometric": "GD",
    "nbd": "NBD",
    "negbin": "NBD",
    "negative-binomial": "NBD",
    "pld": "PLD",
    "poisson-lindley": "PLD",
    "pmqld": "PMQLD",
    "zmnbd": "ZMNBD",
    "zmpld": "ZMPLD",
    "zmpmqld": "ZMPMQLD",
}

_FAMILY_OF = {"GD": GEOMETRIC, "NBD": NEG_BINOMIAL, "PLD": POISSON_LINDLEY, "PMQLD": PMQLD}


def canonical_model_name(name):
    key = str(name).strip().lower()
    if key not in _ALIASES:
        raise ParameterError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    return _ALIASES[key]


def fit_model(name, data, options=FitOptions(), cache=None):
    """Fit a model by registry name; ``cache`` shares base fits with ZM variants."""
    name = canonical_model_name(name)
    table = as_table(data)
    cache = {} if cache is None else cache
    if name in cache:
        return cache[name]
    if name.startswith("ZM"):
        base_name = name[2:]
        base_fit = cache.get(base_name)
        fit = fit_zm(_FAMILY_OF[base_name], table, options, base_fit=base_fit)
    else:
        fit = fit_family(_FAMILY_OF[name], table, options=options)
    cache[name] = fit
    return fit


@dataclass
class ModelRow:
    model: str
    fit: FitResult | None
    gof: GofReport | None
    expected: np.ndarray | None
    error: str | None = None
    best: bool = False

    def as_dict(self):
        return {
            "model": self.model,
            "fit": None if self.fit is None else self.fit.as_dict(),
            "gof": None if self.gof is None else self.gof.as_dict(),
            "expected": None if self.expected is None else [float(e) for e in self.expected],
            "error": self.error,
            "best": self.best,
        }


@dataclass
class Comparison:
    cells: list
    observed: np.ndarray
    rows: list = field(default_factory=list)

    @property
    def best(self):
        for row in self.rows:
            if row.best:
                return row
        return None

    def row(self, model):
        model = canonical_model_name(model)
        for r in self.rows:
            if r.model == model:
                return r
        raise KeyError(model)

    def as_dict(self):
        return {
            "cells": [c.label for c in self.cells],
            "observed": [int(o) for o in self.observed],
            "rows": [r.as_dict() for r in self.rows],
            "best": None if self.best is None else self.best.model,
        }


def compare_models(data, models, cells=None, options=FitOptions(), threshold=1.0):
    """Fit each model, test its fit, and rank by AIC.

    Per-model failures are recorded on the row instead of aborting. Rows are
    sorted by AIC (failed rows last, in declared order) and the minimum-AIC
    row is flagged ``best``.
    """
    models = [canonical_model_name(m) for m in models]
    if len(models) < 2:
        raise GofError("model comparison needs at least two models")
    table = as_table(data)
    cells = table_cells(table) if cells is None else list(cells)
    observed = observed_counts(table, cells)
    labels = [c.label for c in cells]
    cache = {}
    # fit bases first so zero-modified variants can start from them
    order = sorted(range(len(models)), key=lambda i: models[i].startswith("ZM"))
    rows = [None] * len(models)
    for i in order:
        name = models[i]
        try:
            fit = fit_model(name, table, options, cache)
            expected = expected_counts(fit.params, table.n, cells)
            try:
                gof = chi_square_gof(observed, expected, fit.k, labels, threshold)
                err = None
            except GofError as exc:
                gof, err = None, f"gof: {exc}"
            rows[i] = ModelRow(name, fit, gof, expected, err)
        except (ConvergenceError, EstimationError, core.NumericError, ParameterError, ValueError) as exc:
            rows[i] = ModelRow(name, None, None, None, f"{type(exc).__name__}: {exc}")
    ok = [r for r in rows if r.fit is not None]
    failed = [r for r in rows if r.fit is None]
    ok.sort(key=lambda r: r.fit.aic)
    if ok:
        ok[0].best = True
    return Comparison(cells, observed, ok + failed)
