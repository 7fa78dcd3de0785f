"""Monte Carlo study of the maximum-likelihood estimator.

For each sample size, ``replications`` samples are drawn from the true
parameters and fitted; the table reports the average estimate, its bias and
its mean squared error per parameter. Fits that end at a maximum on the
edge of the parameter space (typically the positivity limit of ``alpha**3``
in samples without zeros) are kept. Fits with no optimum at all are
excluded and counted.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import core
from .errors import ConvergenceError, DataError, ParameterError, StudyError
from .estimation import FitOptions, fit_mle
from .sampling import RandomSource, sample
from .table import FrequencyTable

__all__ = ["StudyConfig", "StudyRow", "StudyTable", "run_study", "MAX_FAILURE_RATE"]

MAX_FAILURE_RATE = 0.20
_PARAMS = ("theta", "alpha", "delta")


@dataclass(frozen=True)
class StudyConfig:
    true_params: core.PmqldParams
    sample_sizes: tuple = (60, 100, 200, 300)
    replications: int = 1000
    seed: int = 0
    algorithm: str = "alg2"
    options: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        if int(self.replications) != self.replications or self.replications < 1:
            raise ParameterError(f"replications must be a positive integer, got {self.replications}")
        sizes = tuple(int(n) for n in self.sample_sizes)
        if not sizes or any(n < 10 for n in sizes):
            raise ParameterError(f"sample sizes must be >= 10, got {self.sample_sizes}")
        object.__setattr__(self, "sample_sizes", sizes)
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class StudyRow:
    n: int
    param: str
    avg: float
    bias: float
    mse: float
    failures: int


@dataclass
class StudyTable:
    config: StudyConfig
    rows: list

    def row(self, n, param):
        for r in self.rows:
            if r.n == n and r.param == param:
                return r
        raise KeyError((n, param))

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "param", "avg", "bias", "mse", "failures"])
        for r in self.rows:
            writer.writerow([r.n, r.param, repr(r.avg), repr(r.bias), repr(r.mse), r.failures])
        return buf.getvalue()

    def as_dicts(self):
        return [r.__dict__.copy() for r in self.rows]


def _one_replicate(config, n, rep):
    rng = RandomSource(config.seed).child(n, rep)
    draws = sample(config.true_params, n, rng, config.algorithm)
    try:
        fit = fit_mle(FrequencyTable.from_observations(draws), options=config.options)
    except (ConvergenceError, DataError):
        return None
    if fit.converged or fit.diagnostics.get("at_boundary"):
        return fit.estimates
    return None


def run_study(config, progress=None):
    """Run the study; ``progress(n, rep)`` is called after each replicate if given.

    Raises
    ------
    StudyError
        If more than 20% of the fits fail at some sample size.
    """
    truth = np.array(config.true_params.as_tuple())
    rows = []
    for n in config.sample_sizes:
        estimates = []
        failures = 0
        for rep in range(config.replications):
            est = _one_replicate(config, n, rep)
            if est is None:
                failures += 1
            else:
                estimates.append(est)
            if progress is not None:
                progress(n, rep)
        if failures > MAX_FAILURE_RATE * config.replications:
            raise StudyError(
                f"{failures} of {config.replications} fits failed at n={n}; "
                f"the estimator is unreliable for {config.true_params}"
            )
        est = np.array(estimates)
        avg = est.mean(axis=0)
        bias = avg - truth
        mse = np.mean((est - truth) ** 2, axis=0)
        for j, name in enumerate(_PARAMS):
            rows.append(StudyRow(n, name, float(avg[j]), float(bias[j]), float(mse[j]), failures))
    return StudyTable(config, rows)
