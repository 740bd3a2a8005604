"""Additional statistics functionality.

This module is part of zoomstab --
Adaptive zoom quantized control over noisy channels

Copyright 2026 The zoomstab developers

Confidence intervals for frequencies and means, and accumulators that can be
merged across replicas in any order.
"""
# zoomstab is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# zoomstab is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with zoomstab. If not, see <https://www.gnu.org/licenses/>.
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.stats


def wilson_interval(successes, trials, confidence=0.95):
    r"""Wilson score interval of a binomial proportion.

    Parameters
    ----------
    successes : int or array_like
        Number of observed events.
    trials : int or array_like
        Number of trials (must be positive).
    confidence : float, optional
        Two-sided confidence level (default 0.95).

    Returns
    -------
    lower, upper : float or ndarray
        Interval limits, clipped to [0, 1].

    Examples
    --------
    >>> lo, hi = wilson_interval(0, 100)
    >>> round(lo, 6)
    0.0
    >>> round(hi, 4)
    0.037
    """
    successes = np.asarray(successes, dtype=float)
    trials = np.asarray(trials, dtype=float)
    if np.any(trials <= 0):
        raise ValueError('Parameter `trials` needs to be positive.')
    z = scipy.stats.norm.ppf(0.5 + confidence/2)
    p = successes/trials
    denom = 1 + z**2/trials
    center = (p + z**2/(2*trials))/denom
    half = z*np.sqrt(p*(1-p)/trials + z**2/(4*trials**2))/denom
    lower = np.clip(center - half, 0., 1.)
    upper = np.clip(center + half, 0., 1.)
    if lower.ndim == 0:
        return float(lower), float(upper)
    return lower, upper


def clopper_pearson_upper(successes, trials, confidence=0.95):
    """One-sided Clopper-Pearson upper limit of a binomial proportion.

    Examples
    --------
    >>> clopper_pearson_upper(10, 10)
    1.0
    >>> round(clopper_pearson_upper(0, 100), 4)
    0.0295
    """
    successes = np.asarray(successes, dtype=float)
    trials = np.asarray(trials, dtype=float)
    with np.errstate(invalid='ignore'):
        upper = scipy.stats.beta.ppf(confidence, successes + 1,
                                     trials - successes)
    upper = np.where(successes >= trials, 1., upper)
    if upper.ndim == 0:
        return float(upper)
    return upper


def one_sided_mean_bounds(values, confidence=0.95):
    """Student-t one-sided lower and upper confidence bounds of a mean.

    Each bound holds with the given confidence on its own. With a single
    sample, or zero spread, both bounds collapse onto the sample mean.

    Returns
    -------
    mean, lower, upper : float
    """
    values = np.asarray(values, dtype=float)
    m = values.size
    assert m > 0
    mean = float(np.mean(values))
    if m == 1:
        return mean, mean, mean
    sem = float(np.std(values, ddof=1))/np.sqrt(m)
    t = scipy.stats.t.ppf(confidence, m - 1)
    return mean, mean - t*sem, mean + t*sem


def mean_confidence_interval(values, confidence=0.95):
    """Two-sided Student-t interval of a mean (degenerate for one sample)."""
    values = np.asarray(values, dtype=float)
    m = values.size
    mean = float(np.mean(values))
    if m < 2:
        return mean, mean
    sem = float(np.std(values, ddof=1))/np.sqrt(m)
    t = scipy.stats.t.ppf(0.5 + confidence/2, m - 1)
    return mean - t*sem, mean + t*sem


@dataclass
class RunningMoments:
    """Count, sum and sum of squares, mergeable in any order.

    Examples
    --------
    >>> a = RunningMoments.from_values([1., 2.])
    >>> b = RunningMoments.from_values([3.])
    >>> a.merge(b).mean
    2.0
    """
    count: int = 0
    total: float = 0.
    total_sq: float = 0.

    @classmethod
    def from_values(cls, values):
        values = np.asarray(values, dtype=float)
        return cls(int(values.size), float(np.sum(values)),
                   float(np.sum(values**2)))

    def merge(self, other):
        return RunningMoments(self.count + other.count,
                              self.total + other.total,
                              self.total_sq + other.total_sq)

    @property
    def mean(self):
        if self.count == 0:
            return np.nan
        return self.total/self.count

    @property
    def variance(self):
        if self.count < 2:
            return 0.
        return max(self.total_sq - self.count*self.mean**2, 0.)/(
            self.count - 1)


@dataclass
class GapHistogram:
    """Histogram of integer stopping-time gaps (in blocks).

    Merging two histograms gives the histogram of the concatenated samples.

    Examples
    --------
    >>> h = GapHistogram.from_gaps([1, 1, 3])
    >>> h = h.merge(GapHistogram.from_gaps([3]))
    >>> h.to_dict()
    {1: 2, 3: 2}
    """
    counts: Counter = field(default_factory=Counter)

    @classmethod
    def from_gaps(cls, gaps):
        return cls(Counter(int(g) for g in gaps))

    @classmethod
    def from_dict(cls, d):
        return cls(Counter({int(k): int(v) for k, v in d.items()}))

    def merge(self, other):
        return GapHistogram(self.counts + other.counts)

    @property
    def total(self):
        return sum(self.counts.values())

    def to_dict(self):
        return {k: self.counts[k] for k in sorted(self.counts)}

    def tail(self):
        """Return (k, number of gaps >= k) for k = 1..max gap."""
        if not self.counts:
            return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        kmax = max(self.counts)
        ks = np.arange(1, kmax + 1)
        hist = np.array([self.counts.get(k, 0) for k in ks])
        return ks, np.cumsum(hist[::-1])[::-1]
