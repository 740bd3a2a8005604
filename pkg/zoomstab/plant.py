"""Linear plants driven by Gaussian noise.

This module is part of zoomstab --
Adaptive zoom quantized control over noisy channels

Copyright 2026 The zoomstab developers

The scalar plant evolves as ``x' = a x + b u + d`` and the vector plant, in
diagonal (modal) coordinates, as ``x' = Lambda x + B u + G d``.
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
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from zoomstab.misc import ConfigError

DIVERGENCE_THRESHOLD = 1e100

_UNIFORM_BITS = 2**53


@dataclass(frozen=True)
class SystemParams:
    """Parameters of the scalar plant.

    Parameters
    ----------
    a : float
        Open-loop pole, ``|a| >= 1``.
    b : float
        Control gain, nonzero.
    noise_std : float
        Standard deviation of the i.i.d. Gaussian disturbance. Zero gives the
        noise-free plant used in deterministic tests.
    x0_mean, x0_std : float
        Mean and standard deviation of the Gaussian initial state.
    """
    a: float
    b: float = 1.
    noise_std: float = 1.
    x0_mean: float = 0.
    x0_std: float = 1.

    def __post_init__(self):
        violations = []
        if not np.all(np.isfinite([self.a, self.b, self.noise_std,
                                   self.x0_mean, self.x0_std])):
            violations.append('plant parameters must be finite')
        if abs(self.a) < 1:
            violations.append('|a| = {} < 1: the plant must be open-loop '
                              'unstable'.format(abs(self.a)))
        if self.b == 0:
            violations.append('control gain b must be nonzero')
        if self.noise_std < 0 or self.x0_std < 0:
            violations.append('standard deviations must be nonnegative')
        if violations:
            raise ConfigError(violations)


@dataclass(frozen=True)
class VectorSystemParams:
    """Parameters of the vector plant in modal coordinates.

    Parameters
    ----------
    eigenvalues : array_like
        Diagonal of Lambda, each ``|lambda_i| >= 1``.
    control_matrix : array_like
        Invertible N x N matrix B (already transformed to modal coordinates).
    noise_matrix : array_like
        N x N matrix G.
    noise_std : float
        Standard deviation of each component of the disturbance.
    x0_mean : float or array_like
        Mean of the initial state in modal coordinates, broadcast to all
        modes when scalar.
    x0_std : float
        Standard deviation of each component of the initial state.
    """
    eigenvalues: np.ndarray
    control_matrix: np.ndarray = None
    noise_matrix: np.ndarray = None
    noise_std: float = 1.
    x0_mean: np.ndarray = 0.
    x0_std: float = 1.

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.eigenvalues, dtype=float))
        N = lam.size
        B = (np.identity(N) if self.control_matrix is None
             else np.atleast_2d(np.asarray(self.control_matrix, dtype=float)))
        G = (np.identity(N) if self.noise_matrix is None
             else np.atleast_2d(np.asarray(self.noise_matrix, dtype=float)))
        object.__setattr__(self, 'eigenvalues', lam)
        object.__setattr__(self, 'control_matrix', B)
        object.__setattr__(self, 'noise_matrix', G)

        violations = []
        if np.any(np.abs(lam) < 1):
            violations.append('all modes must be unstable, got |lambda| = '
                              '{}'.format(np.abs(lam).tolist()))
        if B.shape != (N, N) or G.shape != (N, N):
            violations.append('dimension mismatch: {} eigenvalues but B is {} '
                              'and G is {}'.format(N, B.shape, G.shape))
        elif abs(np.linalg.det(B)) < 1e-12:
            violations.append('control matrix B must be invertible')
        mean = np.atleast_1d(np.asarray(self.x0_mean, dtype=float))
        if mean.size == 1:
            mean = np.full(N, mean[0])
        if mean.shape != (N,):
            violations.append('dimension mismatch: {} eigenvalues but x0_mean '
                              'has {} entries'.format(N, mean.size))
        elif not np.all(np.isfinite(mean)):
            violations.append('x0_mean must be finite')
        object.__setattr__(self, 'x0_mean', mean)
        if self.noise_std < 0 or self.x0_std < 0:
            violations.append('standard deviations must be nonnegative')
        if violations:
            raise ConfigError(violations)

    @property
    def dim(self):
        return self.eigenvalues.size


@dataclass(frozen=True)
class PlantState:
    """State of the plant at time ``t``."""
    x: object
    t: int = 0


def step_scalar(state, u, d, params):
    """Advance the scalar plant by one step.

    Examples
    --------
    >>> p = SystemParams(a=2., b=1.)
    >>> step_scalar(PlantState(0.7), -1.4, 0.05, p).x
    0.05
    """
    return PlantState(params.a*state.x + params.b*u + d, state.t + 1)


def step_vector(state, u, d, params):
    """Advance the modal vector plant by one step.

    Raises
    ------
    ConfigError
        If the dimensions of ``x``, ``u`` or ``d`` disagree with the plant.
    """
    x = np.asarray(state.x, dtype=float)
    u = np.broadcast_to(np.asarray(u, dtype=float), x.shape) if np.ndim(u) \
        == 0 else np.asarray(u, dtype=float)
    d = np.broadcast_to(np.asarray(d, dtype=float), x.shape) if np.ndim(d) \
        == 0 else np.asarray(d, dtype=float)
    N = params.dim
    if x.shape != (N,) or u.shape != (N,) or d.shape != (N,):
        raise ConfigError('dimension mismatch: plant has {} modes, got x {}, '
                          'u {}, d {}'.format(N, x.shape, u.shape, d.shape))
    x_next = (params.eigenvalues*x + params.control_matrix @ u
              + params.noise_matrix @ d)
    return PlantState(x_next, state.t + 1)


def standard_normal(rng, size=None):
    """Standard normal variates by inverse CDF of 53-bit uniforms.

    The uniforms lie strictly inside (0, 1) so the transform never returns
    an infinite value.
    """
    k = rng.integers(0, _UNIFORM_BITS, size=size, dtype=np.int64)
    return scipy.special.ndtri((k + 0.5)/_UNIFORM_BITS)


def sample_noise(rng, std, size=None):
    """Draw Gaussian disturbances with standard deviation `std`.

    Parameters
    ----------
    rng : numpy.random.Generator
        Source of randomness.
    std : float
        Standard deviation; ``std == 0`` returns zeros without consuming
        randomness.
    size : int or tuple, optional
        Output shape; a scalar is returned when omitted.

    Examples
    --------
    >>> sample_noise(np.random.default_rng(1), 0.)
    0.0
    """
    if std == 0:
        return 0. if size is None else np.zeros(size)
    z = standard_normal(rng, size)
    if size is None:
        return float(std*z)
    return std*z


def initial_state(params, rng):
    """Draw the initial plant state."""
    if isinstance(params, VectorSystemParams):
        x0 = params.x0_mean.copy()
        if params.x0_std > 0:
            x0 = x0 + params.x0_std*standard_normal(rng, params.dim)
        return PlantState(x0, 0)
    x0 = params.x0_mean
    if params.x0_std > 0:
        x0 = x0 + params.x0_std*float(standard_normal(rng))
    return PlantState(float(x0), 0)


def is_diverged(x, threshold=DIVERGENCE_THRESHOLD):
    """True if any component is non-finite or exceeds `threshold` in size.

    Examples
    --------
    >>> is_diverged(2.**400)
    True
    >>> is_diverged([1., -3.])
    False
    """
    x = np.asarray(x, dtype=float)
    return bool(np.any(~np.isfinite(x)) or np.any(np.abs(x) > threshold))


def diagonalize_symmetric(A, B=None, G=None, noise_std=1., x0_std=1.,
                          x0_mean=0.):
    """Modal form of a plant with a symmetric system matrix.

    For symmetric ``A = U Lambda U^T`` with orthogonal ``U`` the modal
    coordinates are ``U^T x``, so ``B~ = U^T B``, ``G~ = U^T G`` and the
    initial mean (given in the original coordinates) becomes
    ``U^T x0_mean``.

    Returns
    -------
    params : VectorSystemParams
    U : ndarray
        Orthogonal change of basis.

    Raises
    ------
    ConfigError
        If `A` is not square and symmetric.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
        raise ConfigError('system matrix must be square and symmetric to be '
                          'diagonalized; Jordan forms are not supported')
    N = A.shape[0]
    B = np.identity(N) if B is None else np.atleast_2d(np.asarray(B, float))
    G = np.identity(N) if G is None else np.atleast_2d(np.asarray(G, float))
    lam, U = np.linalg.eigh(A)
    mean = np.broadcast_to(np.asarray(x0_mean, dtype=float), (N,))
    params = VectorSystemParams(lam, U.T @ B, U.T @ G, noise_std=noise_std,
                                x0_mean=U.T @ mean, x0_std=x0_std)
    return params, U
