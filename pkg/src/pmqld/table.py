"""Frequency-table container for observed count data."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class FrequencyTable:
    """Observed counts as ``(value, frequency)`` rows.

    Parameters
    ----------
    values : array-like of int
        Distinct nonnegative count values, strictly increasing.
    counts : array-like of int
        Frequency of each value; zero frequencies are kept as rows.
    open_tail : bool
        True when the last row was reported as an open ``>= k`` class. The
        likelihood still treats those observations as equal to ``k``; only the
        goodness-of-fit layout is affected.
    """

    values: np.ndarray
    counts: np.ndarray
    open_tail: bool = False
    _sums: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        counts = np.asarray(self.counts)
        if values.ndim != 1 or values.shape != counts.shape or values.size == 0:
            raise DataError("values and counts must be nonempty 1-d arrays of equal length")
        if not (np.all(np.mod(values, 1) == 0) and np.all(np.mod(counts, 1) == 0)):
            raise DataError("values and counts must be integers")
        values = values.astype(np.int64)
        counts = counts.astype(np.int64)
        if np.any(values < 0):
            raise DataError("count values must be nonnegative")
        if np.any(counts < 0):
            raise DataError("frequencies must be nonnegative")
        if np.any(np.diff(values) <= 0):
            raise DataError("values must be strictly increasing")
        if counts.sum() < 1:
            raise DataError("frequency table is empty (total count is zero)")
        values.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "counts", counts)
        xf = values.astype(float)
        w = counts.astype(float)
        sums = (float(np.sum(w * xf)), float(np.sum(w * xf**2)), float(np.sum(w * xf**3)))
        object.__setattr__(self, "_sums", sums)

    @classmethod
    def from_pairs(cls, pairs, open_tail=False):
        """Build from ``(value, frequency)`` pairs; duplicate values are merged."""
        merged = Counter()
        for value, freq in pairs:
            merged[int(value)] += int(freq)
        keys = sorted(merged)
        return cls(np.array(keys), np.array([merged[k] for k in keys]), open_tail)

    @classmethod
    def from_observations(cls, observations):
        """Aggregate raw observations into a table."""
        obs = np.asarray(observations)
        if obs.size == 0:
            raise DataError("no observations")
        if np.any(np.mod(obs, 1) != 0):
            raise DataError("observations must be integers")
        values, counts = np.unique(obs.astype(np.int64), return_counts=True)
        return cls(values, counts)

    @property
    def rows(self):
        return [(int(v), int(c)) for v, c in zip(self.values, self.counts)]

    @property
    def n(self):
        return int(self.counts.sum())

    @property
    def sum_x(self):
        return self._sums[0]

    @property
    def sum_x2(self):
        return self._sums[1]

    @property
    def sum_x3(self):
        return self._sums[2]

    @property
    def zeros(self):
        """Number of observations equal to zero."""
        hit = self.values == 0
        return int(self.counts[hit].sum())

    @property
    def n_distinct(self):
        return int(np.count_nonzero(self.counts))

    def sample_moments(self):
        """First three raw sample moments ``sum(x^r)/n``."""
        n = self.n
        return self.sum_x / n, self.sum_x2 / n, self.sum_x3 / n

    @cached_property
    def mean(self):
        return self.sum_x / self.n

    @cached_property
    def variance(self):
        """Unbiased sample variance (divisor ``n - 1``)."""
        n = self.n
        if n < 2:
            return 0.0
        return float(np.sum(self.counts * (self.values - self.mean) ** 2) / (n - 1))

    @property
    def dispersion_index(self):
        """Sample variance-to-mean ratio."""
        if self.mean == 0:
            raise DataError("dispersion index undefined for all-zero data")
        return self.variance / self.mean

    def _central(self, r):
        return float(np.sum(self.counts * (self.values - self.mean) ** r) / self.n)

    @property
    def skewness(self):
        return self._central(3) / self._central(2) ** 1.5

    @property
    def excess_kurtosis(self):
        return self._central(4) / self._central(2) ** 2 - 3.0

    def scaled(self, factor):
        """Table with every frequency multiplied by an integer ``factor``."""
        return FrequencyTable(self.values, self.counts * int(factor), self.open_tail)

    def expand(self):
        """Raw observations in ascending order."""
        return np.repeat(self.values, self.counts)
