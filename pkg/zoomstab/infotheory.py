"""Capacity, error exponents and stabilization conditions.

This module is part of zoomstab --
Adaptive zoom quantized control over noisy channels

Copyright 2026 The zoomstab developers

Rates, capacities and exponents are returned in bits. The Kullback-Leibler
divergence inside the Chernoff-Sanov bound is computed in nats, the unit in
which it is exponentiated; the returned record says so in its keys.
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
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.optimize
import scipy.special
import scipy.stats

from zoomstab.channel import DmcModel
from zoomstab.misc import AccuracyWarning, ConfigError, DomainError

LN2 = math.log(2)


def _as_dmc(P):
    if isinstance(P, DmcModel):
        return P
    return DmcModel.from_matrix(P)


@dataclass
class CapacityResult:
    """Capacity estimate with the bracket of the last iteration."""
    capacity_bits: float
    optimal_input_dist: np.ndarray
    iterations: int
    tolerance: float
    lower_bounds: np.ndarray = field(repr=False, default=None)
    upper_bounds: np.ndarray = field(repr=False, default=None)

    @property
    def bracket(self):
        return self.lower_bounds[-1], self.upper_bounds[-1]


def dmc_capacity(P, tol=1e-9, max_iter=100000):
    r"""Capacity of a discrete memoryless channel (Blahut-Arimoto).

    Each iteration yields the lower bound :math:`I(Q;W)` and the upper bound
    :math:`\max_x D(W(\cdot|x) \| QW)`; iteration stops once they are at
    most `tol` bits apart and the lower bound is reported.

    Parameters
    ----------
    P : DmcModel or array_like
        Channel or its row-stochastic transition matrix.
    tol : float
        Target bracket width in bits.
    max_iter : int
        Iteration cap; an AccuracyWarning is raised when it is reached.

    Returns
    -------
    CapacityResult

    Examples
    --------
    >>> round(dmc_capacity(DmcModel.bsc(0.1)).capacity_bits, 6)
    0.531004
    >>> dmc_capacity(DmcModel.noiseless(2)).capacity_bits
    1.0
    """
    W = _as_dmc(P).transition
    nx = W.shape[0]
    Q = np.full(nx, 1./nx)
    lower, upper = [], []
    for it in range(1, max_iter + 1):
        qy = Q @ W
        D = scipy.special.rel_entr(W, qy[None, :]).sum(axis=1)/LN2
        lower.append(float(Q @ D))
        upper.append(float(np.max(D)))
        if upper[-1] - lower[-1] <= tol:
            break
        Q = Q*np.exp2(D - np.max(D))
        Q /= Q.sum()
    else:
        warnings.warn('Capacity bracket {:.3g} bits did not reach tolerance '
                      '{:.3g} after {} iterations.'.format(
                          upper[-1] - lower[-1], tol, max_iter),
                      AccuracyWarning)
    return CapacityResult(max(lower[-1], 0.), Q, it, tol,
                          np.array(lower), np.array(upper))


def min_stabilization_rate(eigenvalues):
    """Smallest rate in bits that can stabilize the given modes.

    Examples
    --------
    >>> min_stabilization_rate([2.])
    1.0
    >>> min_stabilization_rate([0.5])
    0.0
    """
    lam = np.abs(np.atleast_1d(np.asarray(eigenvalues, dtype=float)))
    return float(np.sum(np.maximum(0., np.log2(lam))))


def capacity_threshold(capacity_bits, eigenvalues, tol=1e-9):
    """Compare a capacity with the stabilization threshold.

    Returns
    -------
    dict
        ``verdict`` is 'insufficient' below the threshold, 'sufficient' above
        it and 'boundary' within `tol`.
    """
    need = min_stabilization_rate(eigenvalues)
    margin = capacity_bits - need
    if abs(margin) <= tol:
        verdict = 'boundary'
    elif margin < 0:
        verdict = 'insufficient'
    else:
        verdict = 'sufficient'
    return {'capacity_bits': float(capacity_bits), 'required_bits': need,
            'margin_bits': float(margin), 'verdict': verdict}


def kappa_bound(a, delta, alpha, slack=0.):
    r"""Upper limit on the fraction of tolerated under-zoom decoding errors.

    .. math::

        \kappa < 1\Big/\left(\log_{(|a|+\delta)/|a|}
                 \frac{|a|+\delta}{\alpha} + \text{slack}\right)

    Examples
    --------
    >>> kappa_bound(2., 2., 1.)
    0.5
    >>> round(kappa_bound(2., 2., 0.5), 12)
    0.333333333333
    """
    violations = []
    if abs(a) == 0:
        violations.append('|a| must be positive')
    if not delta > 0:
        violations.append('delta must be positive')
    if not 0 < alpha <= 1:
        violations.append('alpha must lie in (0, 1]')
    if slack < 0:
        violations.append('slack must be nonnegative')
    if violations:
        raise ConfigError(violations)
    base = (abs(a) + delta)/abs(a)
    arg = (abs(a) + delta)/alpha
    return 1./(math.log(arg)/math.log(base) + slack)


def gallager_e0(P, rho, Q):
    r"""Gallager's function :math:`E_0(\rho, Q)` in bits.

    Examples
    --------
    >>> round(gallager_e0(DmcModel.bsc(0.1), 1., [0.5, 0.5]), 4)
    0.3219
    """
    W = _as_dmc(P).transition
    Q = np.asarray(Q, dtype=float)
    alpha = Q @ W**(1./(1. + rho))
    return float(-np.log2(np.sum(alpha**(1. + rho))))


def _e0_grid(W, rhos, Q):
    A = W[None, :, :]**(1./(1. + rhos))[:, None, None]
    alpha = np.einsum('x,gxy->gy', Q, A)
    return -np.log2(np.sum(alpha**(1. + rhos)[:, None], axis=1))


def _optimal_e0(W, rho, Q0):
    """Maximize E0 over the input distribution at fixed `rho`."""
    nx = W.shape[0]
    if nx == 1 or rho == 0:
        return gallager_e0(W, rho, Q0), Q0
    Wr = W**(1./(1. + rho))

    def F(Q):
        return np.sum(np.maximum(Q @ Wr, 0.)**(1. + rho))

    res = scipy.optimize.minimize(
        F, Q0, method='SLSQP', bounds=[(0., 1.)]*nx,
        constraints=({'type': 'eq', 'fun': lambda Q: np.sum(Q) - 1.},),
        options={'ftol': 1e-14, 'maxiter': 500})
    Q = np.clip(res.x, 0., None)
    Q /= Q.sum()
    if not res.success:
        warnings.warn('E0 input optimization did not converge at rho={:.4g}: '
                      '{}'.format(rho, res.message), AccuracyWarning)
    if F(Q) > F(Q0):
        Q = np.asarray(Q0, dtype=float)
    return float(-np.log2(F(Q))), Q


def random_coding_exponent(P, R, grid_step=1e-3, full_output=False):
    r"""Random-coding exponent :math:`E_r(R)` in bits per channel use.

    .. math::

        E_r(R) = \max_{0 \le \rho \le 1} \max_Q \left[E_0(\rho, Q) -
                 \rho R\right]

    The maximum over rho is located on a grid with the capacity-achieving
    input distribution and refined with a bounded scalar search in the
    neighbouring grid cells, optimizing the input distribution at each
    evaluation.

    Parameters
    ----------
    P : DmcModel or array_like
    R : float
        Rate in bits per channel use, ``R >= 0``.
    grid_step : float
        Spacing of the rho grid.
    full_output : bool
        If True, also return the maximizing rho and input distribution.

    Examples
    --------
    >>> round(random_coding_exponent(DmcModel.bsc(0.1), 0.), 4)
    0.3219
    """
    if R < 0:
        raise ConfigError('rate must be nonnegative')
    W = _as_dmc(P).transition
    Q_cap = dmc_capacity(W).optimal_input_dist
    rhos = np.linspace(0., 1., int(round(1./grid_step)) + 1)
    values = _e0_grid(W, rhos, Q_cap) - rhos*R
    i = int(np.argmax(values))
    best = (float(values[i]), float(rhos[i]), Q_cap)

    e0, Q = _optimal_e0(W, rhos[i], Q_cap)
    if e0 - rhos[i]*R > best[0]:
        best = (e0 - rhos[i]*R, float(rhos[i]), Q)

    lo, hi = rhos[max(i - 1, 0)], rhos[min(i + 1, len(rhos) - 1)]
    if hi > lo:
        res = scipy.optimize.minimize_scalar(
            lambda r: -(_optimal_e0(W, r, best[2])[0] - r*R),
            bounds=(lo, hi), method='bounded', options={'xatol': 1e-7})
        if -res.fun > best[0]:
            best = (float(-res.fun), float(res.x),
                    _optimal_e0(W, res.x, best[2])[1])

    E = max(best[0], 0.)
    if full_output:
        return E, best[1], best[2]
    return E


def cutoff_rate(P):
    """Cutoff rate ``max_Q E0(1, Q)`` in bits."""
    W = _as_dmc(P).transition
    Q_cap = dmc_capacity(W).optimal_input_dist
    return _optimal_e0(W, 1., Q_cap)[0]


def required_exponent(a, delta, kappa):
    """Exponent in bits random codes need: ``2 log2(|a|+delta)/kappa``.

    Examples
    --------
    >>> required_exponent(2., 2., 0.5)
    8.0
    """
    if not kappa > 0:
        raise ConfigError('kappa must be positive')
    return 2*math.log2(abs(a) + delta)/kappa


def binomial_tail(m, p, threshold):
    """Exact ``P(Binomial(m, p) >= threshold)`` by summing the pmf.

    Examples
    --------
    >>> round(binomial_tail(4, 0.1, 1.5), 6)
    0.0523
    """
    j = np.arange(int(math.ceil(threshold)), m + 1)
    if j.size == 0:
        return 0.
    return float(np.sum(scipy.special.comb(m, j, exact=False)
                        * p**j*(1 - p)**(m - j)))


def chernoff_sanov_bound(k, kappa, pe):
    r"""Chernoff-Sanov bound on ``kappa (k-2)`` errors within ``k-2`` blocks.

    With :math:`\zeta = \kappa - (1-\kappa)/(k-2)` the bound is
    :math:`e^{-(k-2) D(\zeta \| P_e)}`, weakened to
    :math:`(e P_e^{\zeta})^{k-2}`.

    Returns
    -------
    dict
        ``zeta``, ``divergence_nats``, ``chernoff`` and ``weakened``.

    Raises
    ------
    DomainError
        If ``zeta`` is not in ``(pe, 1)``.

    Examples
    --------
    >>> res = chernoff_sanov_bound(6, 0.5, 0.1)
    >>> res['zeta']
    0.375
    >>> res['chernoff'] <= res['weakened']
    True
    """
    if int(k) != k or k < 3:
        raise DomainError('k must be an integer >= 3')
    if not 0 < pe < 1:
        raise DomainError('Pe must lie in (0, 1)')
    m = k - 2
    zeta = kappa - (1. - kappa)/m
    if not pe < zeta < 1:
        raise DomainError('zeta = {:.6g} is outside ({:.6g}, 1); the bound '
                          'does not apply'.format(zeta, pe))
    D = float(scipy.special.rel_entr(zeta, pe)
              + scipy.special.rel_entr(1 - zeta, 1 - pe))
    return {'zeta': zeta, 'divergence_nats': D,
            'chernoff': math.exp(-m*D),
            'weakened': (math.e*pe**zeta)**m}


@dataclass
class ConditionRecord:
    name: str
    lhs: float
    rhs: float
    satisfied: bool
    note: str = ''


@dataclass
class MomentConditionReport:
    """Finite-n evaluation of the second-moment stability conditions.

    The conditions are limits in the block length; evaluated at a finite
    ``n`` the verdict is only indicative at that ``n``.
    """
    mode: str
    n: int
    kappa: float
    kappa_bound: float
    conditions: list
    rate_satisfied: object = None

    @property
    def satisfied(self):
        return all(c.satisfied for c in self.conditions)

    @property
    def label(self):
        return 'indicative at n={}'.format(self.n)

    def to_dict(self):
        d = asdict(self)
        d.update(satisfied=self.satisfied, label=self.label)
        return d


def _log2(p):
    with np.errstate(divide='ignore'):
        return float(np.log2(p))


def check_second_moment_conditions(a, delta, alpha, kappa, n, probs,
                                   mode='general', K=None, slack=0.,
                                   exponent=None):
    """Evaluate the sufficient conditions for second-moment stability.

    Parameters
    ----------
    a, delta, alpha : float
        Plant pole and zoom coefficients.
    kappa : float
        Tolerated fraction of under-zoom errors.
    n : int
        Block length.
    probs : dict
        ``Pgg``, ``PZg``, ``PgZ`` and ``Pbar``.
    mode : {'general', 'uniform', 'a0'}
        'general' checks the three per-error-type conditions, 'uniform' the
        single condition on ``Pbar`` and 'a0' the product condition for a
        noiselessly protected overflow symbol.
    K : int, optional
        Granular levels; enables the rate condition.
    slack : float
        Added to the denominator of the kappa bound.
    exponent : float, optional
        Random-coding exponent in bits to compare against
        `required_exponent`.

    Returns
    -------
    MomentConditionReport

    Examples
    --------
    >>> rep = check_second_moment_conditions(
    ...     9., 1., 0.9, 0.3, 2, {'Pgg': 1e-6, 'PZg': 0., 'PgZ': 0.,
    ...                           'Pbar': 1e-6}, mode='a0')
    >>> round(rep.conditions[0].lhs, 12)
    0.01
    """
    bound = kappa_bound(a, delta, alpha, slack)
    g = 2*math.log2(abs(a) + delta)
    conditions = []

    if mode in ('general', 'uniform'):
        if not 0 < kappa < bound:
            raise ConfigError('kappa = {:.6g} must lie in (0, {:.6g}), the '
                              'kappa bound for these zoom '
                              'coefficients'.format(kappa, bound))
    if mode == 'general':
        lhs = _log2(probs['PZg'])/n + g
        conditions.append(ConditionRecord(
            'granular_to_overflow', lhs, 0., lhs < 0))
        lhs = kappa*_log2(probs['PgZ'])/n + g
        conditions.append(ConditionRecord(
            'overflow_to_granular', lhs, 0., lhs < 0))
        lhs = kappa*_log2(probs['Pgg'])/n + g + kappa*2*math.log2(alpha)
        conditions.append(ConditionRecord(
            'granular_to_granular', lhs, 0., lhs < 0))
    elif mode == 'uniform':
        lhs = kappa*_log2(probs['Pbar'])/n + g
        conditions.append(ConditionRecord('uniform_error', lhs, 0., lhs < 0))
    elif mode == 'a0':
        if probs.get('PZg', 0.) != 0 or probs.get('PgZ', 0.) != 0:
            raise ConfigError('a0 mode requires a protected overflow symbol '
                              '(PZg = PgZ = 0)')
        lhs = probs['Pbar']*(abs(a) + delta)**(2*n)
        conditions.append(ConditionRecord(
            'protected_overflow_product', lhs, 1., lhs < 1))
        conditions.append(ConditionRecord(
            'kappa_window', kappa, bound, 0.5 < kappa < bound,
            'requires 1/2 < kappa < kappa bound'))
    else:
        raise ConfigError('unknown mode {!r}; use "general", "uniform" or '
                          '"a0"'.format(mode))

    rate_ok = None
    if K is not None:
        lhs, rhs = math.log2(K), n*math.log2(abs(a)/alpha)
        rate_ok = lhs > rhs
        conditions.append(ConditionRecord('rate', lhs, rhs, rate_ok,
                                          "R' > n log2(|a|/alpha)"))
    if exponent is not None:
        rhs = required_exponent(a, delta, kappa)
        conditions.append(ConditionRecord('random_coding_exponent', exponent,
                                          rhs, exponent > rhs))
    return MomentConditionReport(mode, int(n), float(kappa), bound,
                                 conditions, rate_ok)
