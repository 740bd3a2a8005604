"""Test cases for the zoomstab.plant module.

   This module is part of zoomstab -- \
        Adaptive zoom quantized control over noisy channels

Copyright 2026 The zoomstab developers

zoomstab is free software: you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation, either version 3 of the License, or
(at your option) any later version.

zoomstab is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
GNU General Public License for more details.

You should have received a copy of the GNU General Public License
along with zoomstab. If not, see <https://www.gnu.org/licenses/>.
"""
import numpy as np

import pytest

from zoomstab.misc import ConfigError
from zoomstab.plant import (PlantState, SystemParams, VectorSystemParams,
                            diagonalize_symmetric, initial_state, is_diverged,
                            sample_noise, standard_normal, step_scalar,
                            step_vector)


def test_scalar_params_validation():
    with pytest.raises(ConfigError) as err:
        SystemParams(a=0.5, b=0.)
    assert len(err.value.violations) == 2
    SystemParams(a=-1.)


def test_step_scalar_noise_free():
    p = SystemParams(a=2., b=0.5, noise_std=0.)
    state = PlantState(1., 0)
    for t in range(3):
        state = step_scalar(state, 0., 0., p)
    assert state.x == 8.
    assert state.t == 3
    # deadbeat input cancels the state exactly
    assert step_scalar(PlantState(3.), -12., 0., p).x == 0.


def test_vector_params_defaults():
    p = VectorSystemParams([2., 1.25])
    assert p.dim == 2
    assert np.all(p.control_matrix == np.identity(2))
    assert np.all(p.noise_matrix == np.identity(2))


def test_vector_params_validation():
    with pytest.raises(ConfigError, match='invertible'):
        VectorSystemParams([2., 3.], control_matrix=[[1., 2.], [2., 4.]])
    with pytest.raises(ConfigError, match='dimension mismatch'):
        VectorSystemParams([2., 3.], noise_matrix=np.identity(3))
    with pytest.raises(ConfigError, match='unstable'):
        VectorSystemParams([2., 0.5])


def test_step_vector():
    p = VectorSystemParams([2., 1.25], control_matrix=[[1., 0.], [1., 1.]])
    state = step_vector(PlantState(np.array([1., 2.])), [1., -1.], 0., p)
    assert np.allclose(state.x, [3., 2.5])
    with pytest.raises(ConfigError, match='dimension mismatch'):
        step_vector(PlantState(np.array([1., 2., 3.])), 0., 0., p)


@pytest.mark.parametrize('d', [0.25, -3., 1e3])
def test_disturbance_enters_additively_scalar(d):
    p = SystemParams(a=-1.5, b=0.7)
    state = PlantState(2.3, 4)
    for u in (0., 1.1, -40.):
        diff = step_scalar(state, u, d, p).x - step_scalar(state, u, 0., p).x
        assert diff == pytest.approx(d, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize('d', [[0.25, -1.], [-3., 2.], [1e3, 0.]])
def test_disturbance_enters_additively_vector(d):
    G = np.array([[1., 0.5], [0., 2.]])
    p = VectorSystemParams([2., 1.25], control_matrix=[[1., 0.], [1., 1.]],
                           noise_matrix=G)
    state = PlantState(np.array([1., -2.]))
    u = np.array([0.3, -0.6])
    diff = (step_vector(state, u, d, p).x - step_vector(state, u, 0., p).x)
    assert np.allclose(diff, G @ np.asarray(d), rtol=1e-12, atol=1e-12)
    # identity noise matrix: the difference is the disturbance itself
    q = VectorSystemParams([2., 1.25])
    diff = step_vector(state, u, d, q).x - step_vector(state, u, 0., q).x
    assert np.allclose(diff, d, rtol=1e-12, atol=1e-12)


def test_standard_normal_moments():
    rng = np.random.default_rng(3)
    z = standard_normal(rng, 200000)
    assert np.all(np.isfinite(z))
    assert abs(np.mean(z)) < 0.01
    assert abs(np.std(z) - 1.) < 0.01


def test_sample_noise_reproducible():
    a = sample_noise(np.random.default_rng(11), 2., 10)
    b = sample_noise(np.random.default_rng(11), 2., 10)
    assert np.array_equal(a, b)
    assert np.all(sample_noise(np.random.default_rng(11), 0., (4, 2)) == 0.)


def test_initial_state():
    p = SystemParams(a=2., x0_mean=3., x0_std=0.)
    assert initial_state(p, np.random.default_rng(0)).x == 3.
    vp = VectorSystemParams([2., 2.], x0_std=1.)
    x0 = initial_state(vp, np.random.default_rng(0)).x
    assert x0.shape == (2,)
    vp = VectorSystemParams([2., 2.], x0_mean=[3., -1.], x0_std=0.)
    assert initial_state(vp, np.random.default_rng(0)).x.tolist() == [3., -1.]
    vp = VectorSystemParams([2., 2.], x0_mean=5., x0_std=0.5)
    x0 = np.array([initial_state(vp, np.random.default_rng(i)).x
                   for i in range(2000)])
    assert np.allclose(x0.mean(axis=0), 5., atol=0.05)
    with pytest.raises(ConfigError, match='x0_mean'):
        VectorSystemParams([2., 2.], x0_mean=[1., 2., 3.])


def test_is_diverged():
    assert is_diverged(np.inf)
    assert is_diverged(np.nan)
    assert is_diverged([1., 2e100])
    assert not is_diverged([1., -1e99])
    assert is_diverged(50., threshold=10.)


def test_diagonalize_symmetric():
    A = np.array([[2., 0.5], [0.5, 2.]])
    params, U = diagonalize_symmetric(A)
    assert np.allclose(np.sort(params.eigenvalues), [1.5, 2.5])
    assert np.allclose(U @ np.diag(params.eigenvalues) @ U.T, A)
    # trajectories agree in both coordinate systems
    x = np.array([1., -2.])
    u = np.array([0.3, 0.1])
    x_next = A @ x + u
    z = step_vector(PlantState(U.T @ x), u, 0., params).x
    assert np.allclose(U @ z, x_next)
    params, U = diagonalize_symmetric(A, x0_mean=x)
    assert np.allclose(U @ params.x0_mean, x)
    with pytest.raises(ConfigError, match='symmetric'):
        diagonalize_symmetric([[2., 1.], [0., 2.]])
