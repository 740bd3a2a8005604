"""Trajectory-level stochastic stability diagnostics.

This module is part of zoomstab --
Adaptive zoom quantized control over noisy channels

Copyright 2026 The zoomstab developers

Stopping times at which the state returns to the perfectly zoomed set, the
tail of their gaps, empirical drift inequalities evaluated between stops, and
Cesaro averages and recurrence counts along a trajectory. Finite runs cannot
certify asymptotic statements: verdicts here are consistent or inconsistent
with stability, not proofs of it.
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
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import pandas as pd
import scipy.stats

from zoomstab.channel import ErrorClass
from zoomstab.misc import UndersampledWarning
from zoomstab.plant import DIVERGENCE_THRESHOLD, is_diverged
from zoomstab.stats import (GapHistogram, clopper_pearson_upper,
                            one_sided_mean_bounds)

_INTERVAL_COLUMNS = ['start', 'gap', 'delta', 'first_error', 'n_type_ia',
                     'n_type_ib', 'n_type_ii']


@dataclass
class StoppingTimeLog:
    """Stopping times (in plant steps) and the intervals between them.

    `intervals` has one row per completed excursion with the start block,
    the gap in blocks, the bin size at the start, the error class of the
    first block and the number of errors of each type in the excursion.
    """
    n: int
    tau: np.ndarray
    intervals: pd.DataFrame = field(repr=False)
    censored_blocks: int = 0

    @property
    def gaps(self):
        """Gaps between consecutive stops in blocks."""
        return self.intervals['gap'].to_numpy(dtype=int)

    @property
    def gap_steps(self):
        return self.gaps*self.n

    def histogram(self, delta_min=None):
        gaps = self.intervals['gap']
        if delta_min is not None:
            gaps = gaps[self.intervals['delta'] >= delta_min]
        return GapHistogram.from_gaps(gaps)


def track_stopping_times(x, delta, K, n, error_classes=None):
    r"""Stopping times of the block-sampled closed loop.

    With :math:`h = x/(\Delta K/2)` sampled at block boundaries, ``tau_0 = 0``
    and :math:`\tau_{z+1} = \inf\{kn > \tau_z : |h_{kn}| \le 1\}`. For the
    vector scheme a stop needs every axis to be perfectly zoomed.

    Parameters
    ----------
    x, delta : array_like
        State and bin size at the block boundaries, shape (B,) or (B, N).
    K : int or sequence of int
        Granular levels (per axis for the vector scheme).
    n : int
        Block length.
    error_classes : sequence of ErrorClass, optional
        Decoding outcome of the block starting at each sample.

    Returns
    -------
    StoppingTimeLog

    Examples
    --------
    >>> log = track_stopping_times([0., 5., 5., 5., 0.], [1.]*5, 4, 2)
    >>> log.tau.tolist(), log.gap_steps.tolist()
    ([0, 8], [8])
    """
    x = np.asarray(x, dtype=float)
    delta = np.asarray(delta, dtype=float)
    B = x.shape[0] if x.ndim else 0
    if B == 0:
        return StoppingTimeLog(int(n), np.array([0]),
                               pd.DataFrame(columns=_INTERVAL_COLUMNS))
    h = x/(delta*np.asarray(K, dtype=float)/2)
    zoomed = np.abs(h) <= 1
    if zoomed.ndim > 1:
        zoomed = zoomed.all(axis=1)
    dscalar = delta if delta.ndim == 1 else delta.min(axis=1)
    if error_classes is None:
        errors = np.array([ErrorClass.NONE.value]*B)
    else:
        errors = np.array([e.value if isinstance(e, ErrorClass) else str(e)
                           for e in error_classes][:B])
        if errors.size < B:
            errors = np.concatenate(
                [errors, [ErrorClass.NONE.value]*(B - errors.size)])

    stops = np.concatenate([[0], np.flatnonzero(zoomed[1:]) + 1])
    starts, ends = stops[:-1], stops[1:]
    rows = []
    for k0, k1 in zip(starts, ends):
        seg = errors[k0:k1]
        rows.append([int(k0), int(k1 - k0), float(dscalar[k0]), errors[k0],
                     int(np.sum(seg == ErrorClass.TYPE_IA.value)),
                     int(np.sum(seg == ErrorClass.TYPE_IB.value)),
                     int(np.sum(seg == ErrorClass.TYPE_II.value))])
    intervals = pd.DataFrame(rows, columns=_INTERVAL_COLUMNS)
    return StoppingTimeLog(int(n), stops*int(n), intervals,
                           int(B - 1 - stops[-1]))


def geometric_bound_curve(ks, pe, kappa):
    """``(e Pe**kappa)**(k-2)``, the single-term tail bound.

    Examples
    --------
    >>> bool(np.isclose(geometric_bound_curve(4, 0.01, 1/3),
    ...                 (math.e*0.01**(1/3))**2))
    True
    """
    return lemma_bound_curve(ks, pe, kappa)


def lemma_bound_curve(ks, pe, kappa, pgg=0., pzg=0.):
    r"""Tail bound weighted by the error class of the first block.

    .. math::

        (1-P_{gg}-P_{Zg}) (e P_e^{\kappa})^{k-2}
        + P_{gg} (e P_e^{\kappa - (1-\kappa)/(k-2)})^{k-2}
        + P_{Zg} (e P_e^{\kappa + \kappa/(k-2)})^{k-2}
    """
    m = np.asarray(ks, dtype=float) - 2
    with np.errstate(divide='ignore', invalid='ignore'):
        base = (math.e*pe**kappa)**m
        after_ia = (math.e*pe**(kappa - (1 - kappa)/m))**m
        after_ib = (math.e*pe**(kappa + kappa/m))**m
    out = (1 - pgg - pzg)*base
    if pgg:
        out = out + pgg*after_ia
    if pzg:
        out = out + pzg*after_ib
    return out


def first_bounded_gap(kappa):
    """Smallest gap ``ceil(1/kappa) + 1`` for which the tail bound applies."""
    return int(math.ceil(1./kappa - 1e-12)) + 1


def fit_geometric_tail(log, pe, kappa, delta_min=None, min_samples=100,
                       confidence=0.95, pgg=0., pzg=0.):
    """Empirical gap tail against the geometric bound.

    Parameters
    ----------
    log : StoppingTimeLog or GapHistogram
    pe : float
        Error probability entering the bound.
    kappa : float
    delta_min : float, optional
        Only excursions starting at a bin size of at least `delta_min` are
        used; the bound holds for large bin sizes.
    min_samples : int
        Fewer gaps give the verdict 'undersampled'.
    confidence : float
        Level of the one-sided Clopper-Pearson upper limits.
    pgg, pzg : float
        Weights of the excursions that start with a granular or overflow
        decoding error; zero gives the single-term bound.

    Returns
    -------
    dict
        ``tail`` (pandas.DataFrame with columns k, count, empirical, upper,
        bound), ``slope`` and ``slope_ci`` of the fitted log tail,
        ``violations`` (list of k) and ``verdict`` in 'consistent',
        'violated', 'no_mass' and 'undersampled'.
    """
    hist = log if isinstance(log, GapHistogram) else log.histogram(delta_min)
    N = hist.total
    k0 = first_bounded_gap(kappa)
    result = {'samples': N, 'k_min': k0, 'delta_min': delta_min,
              'asymptotic_in_delta': True}
    if N < min_samples:
        warnings.warn('{} gap samples are fewer than the {} required for a '
                      'tail fit.'.format(N, min_samples), UndersampledWarning)
        result.update(verdict='undersampled', violations=[], slope=np.nan,
                      slope_ci=(np.nan, np.nan), tail=pd.DataFrame())
        return result

    ks, count = hist.tail()
    empirical = count/N
    upper = clopper_pearson_upper(count, N, confidence)
    bound = np.where(ks >= k0, lemma_bound_curve(ks, pe, kappa, pgg, pzg),
                     np.nan)
    tail = pd.DataFrame({'k': ks, 'count': count, 'empirical': empirical,
                         'upper': upper, 'bound': bound})

    mean_gap = sum(k*c for k, c in hist.counts.items())/N
    p_hat = 1./mean_gap
    se = math.sqrt(p_hat**2*(1 - p_hat)/N)
    z = scipy.stats.norm.ppf(0.5 + confidence/2)
    with np.errstate(divide='ignore'):
        slope = float(np.log1p(-p_hat))
        slope_ci = (float(np.log1p(-min(p_hat + z*se, 1.))),
                    float(np.log1p(-max(p_hat - z*se, 0.))))

    compared = tail[(tail['k'] >= k0) & (tail['count'] > 0)]
    violations = compared.loc[compared['upper'] > compared['bound'],
                              'k'].tolist()
    if compared.empty:
        verdict = 'no_mass'
    elif violations:
        verdict = 'violated'
    else:
        verdict = 'consistent'
    result.update(tail=tail, slope=slope, slope_ci=slope_ci,
                  violations=violations, verdict=verdict)
    return result


def dyadic_bin(state):
    """Bin label ``floor(log2 |s|)`` of the last coordinate of a state."""
    last = state[-1] if isinstance(state, (tuple, list, np.ndarray)) \
        else state
    last = abs(float(last))
    if last == 0:
        return -np.inf
    return int(math.floor(math.log2(last)))


@dataclass
class DriftCheckSpec:
    """Drift inequality ``E[V(next)] <= V - delta_fn + b 1_C`` between stops.

    Parameters
    ----------
    V : callable
        Nonnegative Lyapunov function of a state.
    delta_fn : callable
        Required decrease, at least 1.
    set_C : callable
        Predicate of the exceptional set C.
    b : float
        Allowed increase inside C.
    f : callable, optional
        Cost whose sum between stops must stay below `delta_fn`; the sums are
        supplied with the samples.
    partition : callable
        Bin label of a state (default `dyadic_bin`).
    min_count : int
        Samples needed to evaluate a bin.
    confidence : float
        One-sided confidence of the per-bin bounds.
    """
    V: Callable
    delta_fn: Callable
    set_C: Callable
    b: float = 0.
    f: Optional[Callable] = None
    partition: Callable = dyadic_bin
    min_count: int = 30
    confidence: float = 0.95


def _bin_verdict(values, confidence):
    mean, lower, upper = one_sided_mean_bounds(values, confidence)
    if upper <= 0:
        verdict = 'PASS'
    elif lower > 0:
        verdict = 'FAIL'
    else:
        verdict = 'INCONCLUSIVE'
    return mean, lower, upper, verdict


def verify_drift(samples, check):
    """Check a drift inequality on consecutive stop states.

    Parameters
    ----------
    samples : sequence of tuple
        ``(state, next_state)`` or ``(state, next_state, sum_f)`` where
        ``sum_f`` is the sum of ``f`` between the two stops.
    check : DriftCheckSpec

    Returns
    -------
    dict
        ``bins`` (pandas.DataFrame with per-bin means, one-sided bounds and
        verdicts), ``pass_rate`` (fraction of samples outside C for which the
        inequality holds pathwise), ``inside_c`` and the overall ``verdict``:
        PASS if every bin outside C passes, FAIL if any bin fails and
        INCONCLUSIVE otherwise.

    Examples
    --------
    >>> check = DriftCheckSpec(V=lambda s: s, delta_fn=lambda s: 1.,
    ...                        set_C=lambda s: s <= 40, min_count=5)
    >>> samples = [(float(v), float(v - 1)) for v in range(100, 0, -1)]
    >>> verify_drift(samples, check)['verdict']
    'PASS'
    """
    rows = {}
    inside = []
    passed = []
    for sample in samples:
        state, nxt = sample[0], sample[1]
        sum_f = sample[2] if len(sample) > 2 else None
        d = check.delta_fn(state)
        drift = check.V(nxt) - check.V(state) + d
        if check.set_C(state):
            inside.append(drift - check.b)
            continue
        passed.append(drift <= 0 and (sum_f is None or sum_f <= d))
        entry = rows.setdefault(check.partition(state), ([], []))
        entry[0].append(drift)
        if sum_f is not None:
            entry[1].append(sum_f - d)

    records = []
    for label in sorted(rows):
        drifts, fs = rows[label]
        rec = {'bin': label, 'count': len(drifts)}
        if len(drifts) < check.min_count:
            rec.update(drift_mean=float(np.mean(drifts)), drift_lower=np.nan,
                       drift_upper=np.nan, verdict='undersampled')
        else:
            mean, lower, upper, verdict = _bin_verdict(drifts,
                                                       check.confidence)
            rec.update(drift_mean=mean, drift_lower=lower, drift_upper=upper)
            if fs:
                f_mean, f_lower, f_upper, f_verdict = _bin_verdict(
                    fs, check.confidence)
                rec.update(f_mean=f_mean, f_upper=f_upper)
                if 'FAIL' in (verdict, f_verdict):
                    verdict = 'FAIL'
                elif verdict == f_verdict == 'PASS':
                    verdict = 'PASS'
                else:
                    verdict = 'INCONCLUSIVE'
            rec['verdict'] = verdict
        records.append(rec)
    bins = pd.DataFrame(records)

    verdicts = [r['verdict'] for r in records]
    if 'FAIL' in verdicts:
        overall = 'FAIL'
    elif verdicts and all(v == 'PASS' for v in verdicts):
        overall = 'PASS'
    else:
        overall = 'INCONCLUSIVE'
        if 'undersampled' in verdicts:
            warnings.warn('Drift bins with fewer than {} samples left the '
                          'verdict inconclusive.'.format(check.min_count),
                          UndersampledWarning)
    inside_c = None
    if inside:
        mean, lower, upper, verdict = _bin_verdict(inside, check.confidence)
        inside_c = {'count': len(inside), 'drift_mean': mean,
                    'drift_upper': upper, 'verdict': verdict}
    return {'bins': bins,
            'pass_rate': float(np.mean(passed)) if passed else np.nan,
            'inside_c': inside_c, 'verdict': overall}


def stop_state_pairs(log, x, delta):
    """``((x, Delta), (x', Delta'), gap)`` for consecutive stops of `log`.

    `x` and `delta` are the block samples the log was built from.
    """
    x = np.asarray(x, dtype=float)
    delta = np.asarray(delta, dtype=float)
    starts = log.intervals['start'].to_numpy(dtype=int)
    gaps = log.intervals['gap'].to_numpy(dtype=int)
    pairs = []
    for k0, g in zip(starts, gaps):
        k1 = k0 + g
        pairs.append(((_as_state(x[k0]), _as_state(delta[k0], True)),
                      (_as_state(x[k1]), _as_state(delta[k1], True)), g))
    return pairs


def _as_state(v, smallest=False):
    if np.ndim(v) == 0:
        return float(v)
    return float(np.min(v)) if smallest else tuple(float(c) for c in v)


def cesaro_average(values, t=None):
    """Average of the first `t` values (all when omitted)."""
    values = np.asarray(values, dtype=float)
    t = values.size if t is None else int(t)
    return float(np.sum(values[:t]))/t


def cesaro_drift(values):
    """Relative change of the running average between ``T/2`` and ``T``.

    Examples
    --------
    >>> cesaro_drift([1., 1., 1., 1.])
    0.0
    """
    values = np.asarray(values, dtype=float)
    T = values.size
    full = cesaro_average(values, T)
    half = cesaro_average(values, max(T//2, 1))
    if full == 0:
        return 0. if half == 0 else np.inf
    return abs(full - half)/abs(full)


@dataclass
class ErgodicDiagnostics:
    """Running averages, recurrence and zoom statistics of one trajectory."""
    horizon: int
    checkpoints: np.ndarray
    cesaro_x2: np.ndarray
    cesaro_logx: np.ndarray
    recurrence_count: int
    diverged: bool
    perfect_zoom_fraction: float
    cesaro_relative_drift: float

    @property
    def final_cesaro_x2(self):
        return float(self.cesaro_x2[-1]) if self.cesaro_x2.size else np.nan

    def verdict(self, tolerance=0.05):
        """'consistent with AMS' if the average settles without divergence."""
        if self.diverged or not self.cesaro_relative_drift < tolerance:
            return 'not consistent with AMS'
        return 'consistent with AMS'


def ergodic_diagnostics(trajectory, set_A=(-10., 10.), sample_period=1,
                        delta=None, K=None, threshold=DIVERGENCE_THRESHOLD,
                        num_checkpoints=50):
    """Cesaro averages, recurrence counts and the perfect-zoom fraction.

    Parameters
    ----------
    trajectory : array_like
        States ``x_0 .. x_{T-1}``, shape (T,) or (T, N).
    set_A : (float, float)
        Interval (per coordinate) whose visits are counted.
    sample_period : int
        Block length; zoom statistics use every `sample_period`-th state.
    delta : array_like, optional
        Bin size at each block boundary.
    K : int or sequence of int, optional
        Granular levels.
    threshold : float
        Divergence guard.
    num_checkpoints : int
        Number of logarithmically spaced checkpoints.

    Returns
    -------
    ErgodicDiagnostics

    Examples
    --------
    >>> diag = ergodic_diagnostics(np.zeros(100))
    >>> diag.recurrence_count, float(diag.cesaro_x2.max())
    (100, 0.0)
    """
    x = np.asarray(trajectory, dtype=float)
    T = x.shape[0]
    if x.ndim > 1:
        sq = np.sum(x**2, axis=1)
        mag = np.sqrt(sq)
        in_A = np.all((x >= set_A[0]) & (x <= set_A[1]), axis=1)
    else:
        sq = x**2
        mag = np.abs(x)
        in_A = (x >= set_A[0]) & (x <= set_A[1])
    if T > 0:
        checkpoints = np.unique(np.round(np.logspace(
            0, np.log10(T), num_checkpoints)).astype(int))
        with np.errstate(over='ignore', invalid='ignore'):
            cesaro_x2 = np.cumsum(sq)[checkpoints - 1]/checkpoints
            cesaro_logx = np.cumsum(np.log1p(mag))[checkpoints - 1]/checkpoints
            drift = cesaro_drift(sq)
    else:
        checkpoints = np.zeros(0, dtype=int)
        cesaro_x2 = cesaro_logx = np.zeros(0)
        drift = np.nan

    zoom_fraction = np.nan
    if delta is not None and K is not None:
        delta = np.asarray(delta, dtype=float)
        samples = x[::sample_period][:len(delta)]
        h = samples/(delta[:len(samples)]*np.asarray(K, dtype=float)/2)
        zoomed = np.abs(h) <= 1
        if zoomed.ndim > 1:
            zoomed = zoomed.all(axis=1)
        if zoomed.size:
            zoom_fraction = float(np.mean(zoomed))
    return ErgodicDiagnostics(int(T), checkpoints, cesaro_x2, cesaro_logx,
                              int(np.sum(in_A)), is_diverged(x, threshold),
                              zoom_fraction, float(drift))
