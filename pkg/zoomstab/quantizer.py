"""Adaptive zoom quantizer, estimator and block-end controller.

This module is part of zoomstab --
Adaptive zoom quantized control over noisy channels

Copyright 2026 The zoomstab developers

The quantizer has ``K`` uniform cells of width ``Delta`` covering
``[-K Delta/2, K Delta/2]`` and one overflow symbol ``Z`` for everything
outside. The bin size lives on the lattice ``Delta = 2**(e*s)`` with integer
index ``e``; zooming adds fixed integers to ``e`` so the bin size never drifts
off the lattice.
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
from dataclasses import dataclass, field

import numpy as np

from zoomstab.misc import ConfigError

LATTICE_TOL = 1e-6
DEFAULT_RATE_MARGIN = 0.1


@dataclass(frozen=True)
class QuantizerSymbol:
    """Quantizer output: a granular cell index or the overflow symbol Z.

    `index` is an integer in 1..K for the scalar quantizer, a tuple of such
    integers for the vector quantizer, and None for Z.
    """
    index: object = None

    @classmethod
    def granular(cls, index):
        return cls(index)

    @property
    def is_overflow(self):
        return self.index is None

    def __repr__(self):
        if self.is_overflow:
            return 'Overflow'
        return 'Granular({})'.format(self.index)


OVERFLOW = QuantizerSymbol(None)


def symbol_to_message(sym, K):
    """Message of a scalar symbol: ``k-1`` for Granular(k), ``K`` for Z.

    Examples
    --------
    >>> symbol_to_message(OVERFLOW, 4)
    4
    >>> symbol_to_message(QuantizerSymbol(1), 4)
    0
    """
    if sym.is_overflow:
        return K
    return sym.index - 1


def message_to_symbol(m, K):
    if m == K:
        return OVERFLOW
    return QuantizerSymbol(int(m) + 1)


def encode_vector_message(sym, Ks):
    """Mixed-radix message of a vector symbol; Z is ``prod(Ks)``.

    Examples
    --------
    >>> encode_vector_message(QuantizerSymbol((3, 2)), (4, 4))
    9
    >>> encode_vector_message(OVERFLOW, (4, 4))
    16
    """
    if sym.is_overflow:
        return int(np.prod(Ks))
    return int(np.ravel_multi_index(tuple(k - 1 for k in sym.index),
                                    tuple(Ks)))


def decode_vector_message(m, Ks):
    if m == int(np.prod(Ks)):
        return OVERFLOW
    idx = np.unravel_index(int(m), tuple(Ks))
    return QuantizerSymbol(tuple(int(i) + 1 for i in idx))


def lattice_steps(a, n, s, alpha, delta):
    """Real-valued zoom-out and zoom-in lattice steps (before rounding)."""
    return n*math.log2(abs(a) + delta)/s, n*math.log2(alpha)/s


def validate_policy(a, n, alpha, delta, L, s):
    """Collect violated conditions of a zoom policy.

    Returns
    -------
    violations : list of str
        Empty if the policy is valid.

    Examples
    --------
    >>> validate_policy(2., 1, 0.5, 2., 1., 1.)
    []
    >>> validate_policy(2., 2, 0.5, 2., 1., 1.)[0][:40]
    'zoom lattice steps 4 and -2 share the co'
    """
    violations = []
    if int(n) != n or n < 1:
        violations.append('block length n must be a positive integer')
    if not 0 < alpha < 1:
        violations.append('zoom-in base alpha must lie in (0, 1)')
    if not delta > 0:
        violations.append('zoom-out slack delta must be positive')
    if not L > 0:
        violations.append('zoom-in floor L must be positive')
    if not s > 0:
        violations.append('lattice granule s must be positive')
    if violations:
        return violations

    out_real, in_real = lattice_steps(a, n, s, alpha, delta)
    out_steps, in_steps = round(out_real), round(in_real)
    if abs(out_real - out_steps) > LATTICE_TOL:
        violations.append(
            'zoom-out step n*log2(|a|+delta)/s = {:.6g} is not an integer; '
            'bin sizes must stay on the lattice 2**(e*s)'.format(out_real))
    if abs(in_real - in_steps) > LATTICE_TOL:
        violations.append(
            'zoom-in step n*log2(alpha)/s = {:.6g} is not an integer; '
            'bin sizes must stay on the lattice 2**(e*s)'.format(in_real))
    if not violations and math.gcd(int(out_steps), int(in_steps)) != 1:
        violations.append(
            'zoom lattice steps {} and {} share the common factor {}; the '
            'countable bin-size lattice requires relatively prime zoom '
            'steps'.format(out_steps, in_steps,
                           math.gcd(int(out_steps), int(in_steps))))
    if violations:
        hint = suggest_lattice(a, n, s, alpha, delta)
        if hint is not None:
            violations[-1] += (' (nearest valid choice: alpha={:.6g}, '
                               'delta={:.6g})'.format(hint['alpha'],
                                                      hint['delta']))
    return violations


def suggest_lattice(a, n, s, alpha, delta, search=4):
    """Nearest zoom coefficients whose lattice steps are coprime integers.

    Returns
    -------
    dict or None
        Keys ``alpha``, ``delta``, ``out_steps``, ``in_steps``.

    Examples
    --------
    >>> hint = suggest_lattice(2., 1, 1., 0.45, 2.3)
    >>> hint['out_steps'], hint['in_steps']
    (2, -1)
    """
    out_real, in_real = lattice_steps(a, n, s, alpha, delta)
    # zoom-out must beat |a|**n
    out_min = math.floor(n*math.log2(abs(a))/s + LATTICE_TOL) + 1
    best, best_cost = None, np.inf
    for o in range(max(out_min, round(out_real) - search),
                   max(out_min, round(out_real) + search) + 1):
        for i in range(min(-1, round(in_real) - search),
                       min(-1, round(in_real) + search) + 1):
            if math.gcd(o, i) != 1:
                continue
            cost = abs(o - out_real) + abs(i - in_real)
            if cost < best_cost:
                best, best_cost = (o, i), cost
    if best is None:
        return None
    o, i = best
    return {'alpha': 2**(i*s/n), 'delta': 2**(o*s/n) - abs(a),
            'out_steps': o, 'in_steps': i}


@dataclass(frozen=True)
class ZoomPolicy:
    """Zoom coefficients of the adaptive quantizer.

    Parameters
    ----------
    a : float
        Plant pole (only ``|a|`` enters).
    n : int
        Block length, i.e., channel uses per quantizer update.
    alpha : float
        Zoom-in base in (0, 1); the bin size shrinks by ``alpha**n``.
    delta : float
        Zoom-out slack; the bin size grows by ``(|a|+delta)**n``.
    L : float
        Zoom-in floor; rounded up to the nearest lattice point.
    s : float
        Lattice granule, ``Delta = 2**(e*s)``.

    Raises
    ------
    ConfigError
        If the lattice steps are not integers or not relatively prime.

    Notes
    -----
    After validation the integer steps drive all updates, so the effective
    coefficients are those of the lattice (``zoom_in_factor`` and
    ``zoom_out_factor``), not the rounded-off real inputs.

    Examples
    --------
    >>> p = ZoomPolicy(a=2., n=1, alpha=0.5, delta=2., L=1., s=1.)
    >>> p.out_steps, p.in_steps, p.floor_exp, p.min_exp
    (2, -1, 0, -1)
    """
    a: float
    n: int
    alpha: float
    delta: float
    L: float
    s: float = 1.
    out_steps: int = field(init=False)
    in_steps: int = field(init=False)
    floor_exp: int = field(init=False)

    def __post_init__(self):
        violations = validate_policy(self.a, self.n, self.alpha, self.delta,
                                     self.L, self.s)
        if violations:
            raise ConfigError(violations)
        out_real, in_real = lattice_steps(self.a, self.n, self.s, self.alpha,
                                          self.delta)
        object.__setattr__(self, 'n', int(self.n))
        object.__setattr__(self, 'out_steps', int(round(out_real)))
        object.__setattr__(self, 'in_steps', int(round(in_real)))
        object.__setattr__(self, 'floor_exp', int(math.ceil(
            math.log2(self.L)/self.s - LATTICE_TOL)))

    @classmethod
    def from_steps(cls, a, n, s, out_steps, in_steps, L):
        """Build a policy directly from the integer lattice steps."""
        alpha = 2**(in_steps*s/n)
        delta = 2**(out_steps*s/n) - abs(a)
        return cls(a=a, n=n, alpha=alpha, delta=delta, L=L, s=s)

    @property
    def zoom_out_factor(self):
        return 2**(self.out_steps*self.s)

    @property
    def zoom_in_factor(self):
        return 2**(self.in_steps*self.s)

    @property
    def min_exp(self):
        """Lattice index of the smallest reachable bin size L' = L alpha**n."""
        return self.floor_exp + self.in_steps

    @property
    def min_delta(self):
        return 2**(self.min_exp*self.s)

    def required_rate(self):
        """``n log2(|a|/alpha)`` with the lattice value of alpha."""
        return self.n*math.log2(abs(self.a)) - self.in_steps*self.s

    def rate_violations(self, K):
        if math.log2(K) > self.required_rate() + 1e-12:
            return []
        return ["rate condition R' > n log2(|a|/alpha) violated: "
                "log2(K) = {:.4f} <= {:.4f}".format(math.log2(K),
                                                    self.required_rate())]


def auto_levels(a, alpha, n, margin=DEFAULT_RATE_MARGIN):
    """Smallest even K with ``log2(K) > n log2(|a|/alpha) + margin``.

    Examples
    --------
    >>> auto_levels(2., 0.5, 1)
    6
    >>> auto_levels(4., 0.5, 1)
    10
    """
    need = n*math.log2(abs(a)/alpha) + margin
    K = int(math.floor(2**need)) + 1
    K += K % 2
    return max(K, 2)


@dataclass(frozen=True)
class QuantizerState:
    """Granular level count and lattice index of the bin size.

    Examples
    --------
    >>> q = QuantizerState(K=4, delta_exp=3)
    >>> q.Delta, q.R_prime
    (8.0, 2.0)
    """
    K: int
    delta_exp: int
    s: float = 1.

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 2 or self.K % 2:
            raise ConfigError('the number of granular levels must be an even '
                              'number K(n) >= 2, got {}'.format(self.K))
        if int(self.delta_exp) != self.delta_exp:
            raise ConfigError('bin-size lattice index must be an integer')
        object.__setattr__(self, 'delta_exp', int(self.delta_exp))

    @property
    def Delta(self):
        return 2.**(self.delta_exp*self.s)

    @property
    def R_prime(self):
        return math.log2(self.K)

    def replace_exp(self, delta_exp):
        return QuantizerState(self.K, delta_exp, self.s)


def initial_quantizer(policy, K, x0_std=1., delta0=None):
    """Initial quantizer state.

    Without `delta0`, the bin size is the smallest lattice point strictly
    above ``max(L, 2 x0_std 2**(1-R'))``, so the granular range covers two
    standard deviations of the initial state. A given `delta0` is rounded up
    to the lattice.
    """
    if delta0 is None:
        target = max(policy.L, 2*x0_std*2**(1 - math.log2(K)))
        e = int(math.floor(math.log2(target)/policy.s + LATTICE_TOL)) + 1
    else:
        if delta0 <= 0:
            raise ConfigError('initial bin size must be positive')
        e = int(math.ceil(math.log2(delta0)/policy.s - LATTICE_TOL))
    return QuantizerState(K, max(e, policy.min_exp), policy.s)


def quantize(x, q):
    """Map a state to a granular cell index or to the overflow symbol.

    Cell ``k`` is ``[(k-1-K/2) Delta, (k-K/2) Delta)``; the top edge
    ``x = K Delta/2`` belongs to cell ``K``.

    Examples
    --------
    >>> q = QuantizerState(K=4, delta_exp=0)
    >>> quantize(0.3, q), quantize(2.0, q), quantize(3.0, q)
    (Granular(3), Granular(4), Overflow)
    """
    K, D = q.K, q.Delta
    half = K*D/2
    if not abs(x) <= half:
        return OVERFLOW
    if x == half:
        return QuantizerSymbol(K)
    k = min(max(int(math.floor(x/D)) + K//2 + 1, 1), K)
    # division rounding may misplace points on a boundary
    while k > 1 and x < (k - 1 - K/2)*D:
        k -= 1
    while k < K and x >= (k - K/2)*D:
        k += 1
    return QuantizerSymbol(k)


def reconstruct(sym, q):
    """Decoder estimate: the cell midpoint, or 0 for the overflow symbol.

    Examples
    --------
    >>> reconstruct(QuantizerSymbol(1), QuantizerState(K=4, delta_exp=1))
    -3.0
    """
    if sym.is_overflow:
        return 0.
    return (sym.index - (q.K + 1)/2)*q.Delta


def zoom_update(q, decoded, policy):
    """Bin-size update after a decoded message.

    Z zooms out, a granular message zooms in while ``Delta >= L`` and leaves
    the bin size unchanged below the floor.

    Examples
    --------
    >>> p = ZoomPolicy(a=2., n=1, alpha=0.5, delta=2., L=1.)
    >>> zoom_update(QuantizerState(4, 3), OVERFLOW, p).Delta
    32.0
    >>> zoom_update(QuantizerState(4, 3), QuantizerSymbol(2), p).Delta
    4.0
    """
    if decoded.is_overflow:
        return q.replace_exp(q.delta_exp + policy.out_steps)
    if q.delta_exp >= policy.floor_exp:
        return q.replace_exp(q.delta_exp + policy.in_steps)
    return q


def control_signal(decoded, q, params, policy, t):
    """Control input at time `t`: ``-(a**n/b) x_hat`` at block ends only.

    Examples
    --------
    >>> from zoomstab.plant import SystemParams
    >>> p = ZoomPolicy(a=2., n=1, alpha=0.5, delta=2., L=1.)
    >>> control_signal(QuantizerSymbol(3), QuantizerState(4, 0),
    ...                SystemParams(a=2., b=1.), p, 0)
    -1.0
    """
    n = policy.n
    if t % n != n - 1:
        return 0.
    return -(params.a**n/params.b)*reconstruct(decoded, q)


def zoom_ratio(x, q):
    """``h = x/(Delta 2**(R'-1))``; the state is perfectly zoomed iff |h| <= 1.

    Examples
    --------
    >>> zoom_ratio(5., QuantizerState(4, 0))
    2.5
    """
    return x/(q.Delta*q.K/2)


def is_perfectly_zoomed(x, q):
    return abs(zoom_ratio(x, q)) <= 1


@dataclass(frozen=True)
class VectorQuantizerState:
    """Per-axis quantizer states and zoom policies with joint overflow."""
    axes: tuple
    policies: tuple

    def __post_init__(self):
        object.__setattr__(self, 'axes', tuple(self.axes))
        object.__setattr__(self, 'policies', tuple(self.policies))
        if len(self.axes) != len(self.policies):
            raise ConfigError('dimension mismatch: {} quantizer axes and {} '
                              'zoom policies'.format(len(self.axes),
                                                     len(self.policies)))
        if len({p.n for p in self.policies}) > 1:
            raise ConfigError('all axes must share the block length n')

    @property
    def Ks(self):
        return tuple(q.K for q in self.axes)

    @property
    def n(self):
        return self.policies[0].n

    @property
    def message_count(self):
        return int(np.prod(self.Ks)) + 1

    @property
    def delta_exps(self):
        return np.array([q.delta_exp for q in self.axes])

    @property
    def Deltas(self):
        return np.array([q.Delta for q in self.axes])


def quantize_vector(x, vq):
    """Joint quantization: Z if any coordinate overflows.

    Examples
    --------
    >>> vq = VectorQuantizerState(
    ...     (QuantizerState(4, 0), QuantizerState(4, 0)),
    ...     (ZoomPolicy(2., 1, 0.5, 2., 1.), ZoomPolicy(2., 1, 0.5, 2., 1.)))
    >>> quantize_vector([0.3, -0.3], vq)
    Granular((3, 2))
    >>> quantize_vector([0.3, 2.5], vq)
    Overflow
    """
    syms = [quantize(float(xi), q) for xi, q in zip(x, vq.axes)]
    if any(sym.is_overflow for sym in syms):
        return OVERFLOW
    return QuantizerSymbol(tuple(sym.index for sym in syms))


def reconstruct_vector(sym, vq):
    if sym.is_overflow:
        return np.zeros(len(vq.axes))
    return np.array([reconstruct(QuantizerSymbol(k), q)
                     for k, q in zip(sym.index, vq.axes)])


def zoom_update_vector(vq, decoded):
    """Per-axis zoom driven by the one shared decoded message."""
    axes = []
    for i, (q, policy) in enumerate(zip(vq.axes, vq.policies)):
        sym = decoded if decoded.is_overflow else QuantizerSymbol(
            decoded.index[i])
        axes.append(zoom_update(q, sym, policy))
    return VectorQuantizerState(tuple(axes), vq.policies)


def control_signal_vector(decoded, vq, params, t):
    """``-B^-1 Lambda**n x_hat`` at block ends, zero otherwise."""
    n = vq.n
    if t % n != n - 1:
        return np.zeros(params.dim)
    x_hat = reconstruct_vector(decoded, vq)
    return -np.linalg.solve(params.control_matrix,
                            params.eigenvalues**n*x_hat)


def zoom_ratio_vector(x, vq):
    return np.asarray(x, dtype=float)/(vq.Deltas*np.array(vq.Ks)/2)
