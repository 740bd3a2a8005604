"""Experiment configuration.

This module is part of zoomstab --
Adaptive zoom quantized control over noisy channels

Copyright 2026 The zoomstab developers

Experiments are described by a YAML file (``schema_version: 1``). Loading
validates every section and reports all violations at once. A minimal scalar
configuration reads::

    schema_version: 1
    system: {a: 2.0, b: 1.0, noise_std: 1.0}
    quantizer: {n: 1, alpha: 0.5, delta: 2.0, L: 4.0, s: 1.0, K: auto}
    channel: {kind: noiseless, size: 8}
    codebook: {kind: uncoded}
    horizon: 100000
    replicas: 20
    master_seed: 1

The master seed is taken from the command line if given, else from the
environment variable ``ZOOMSTAB_SEED``, else from the file.
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
import copy
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from zoomstab.channel import DmcModel, MemoryChannelModel
from zoomstab.infotheory import kappa_bound
from zoomstab.misc import ConfigError
from zoomstab.plant import (DIVERGENCE_THRESHOLD, SystemParams,
                            VectorSystemParams, diagonalize_symmetric)
from zoomstab.quantizer import (DEFAULT_RATE_MARGIN, ZoomPolicy, auto_levels,
                                initial_quantizer)

SCHEMA_VERSION = 1
SEED_ENV = 'ZOOMSTAB_SEED'

# excluded from the configuration hash
_RUN_KEYS = ('master_seed', 'replicas', 'workers', 'output')

_CODEBOOK_KINDS = ('uncoded', 'random', 'repetition', 'explicit')
_DECODERS = ('ml', 'min_distance')
_DRIFT_KINDS = ('log', 'quadratic', 'none')


@dataclass(frozen=True)
class DiagnosticsConfig:
    """Settings of the per-replica stability diagnostics."""
    set_A: tuple = (-10., 10.)
    drift: str = 'log'
    drift_c_threshold: float = None
    delta_min: float = None
    kappa: float = None
    divergence_threshold: float = DIVERGENCE_THRESHOLD
    min_gap_samples: int = 100
    min_bin_count: int = 30
    num_checkpoints: int = 50
    cesaro_tolerance: float = 0.05
    error_trials: int = 20000


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment definition.

    `system` is a SystemParams for the scalar scheme and a
    VectorSystemParams for the vector scheme; `policies`, `K` and
    `initial_exps` hold one entry per axis (one for the scalar scheme).
    """
    kind: str
    system: object
    policies: tuple
    K: tuple
    initial_exps: tuple
    channel: object
    codebook: dict
    horizon: int
    replicas: int
    master_seed: int
    workers: int = 1
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    acceptance: dict = field(default_factory=dict)
    output: str = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.policies[0].n

    @property
    def message_count(self):
        return int(np.prod(self.K)) + 1

    @property
    def config_hash(self):
        """SHA-256 of the canonical configuration without run settings."""
        content = {k: v for k, v in self.raw.items() if k not in _RUN_KEYS}
        text = json.dumps(content, sort_keys=True, default=str)
        return hashlib.sha256(text.encode('utf-8')).hexdigest()

    @property
    def floor_delta(self):
        """Smallest reachable bin size L' (first axis)."""
        return self.policies[0].min_delta

    @property
    def delta_min(self):
        if self.diagnostics.delta_min is not None:
            return self.diagnostics.delta_min
        return 2.**10*self.floor_delta

    @property
    def drift_c_threshold(self):
        if self.diagnostics.drift_c_threshold is not None:
            return self.diagnostics.drift_c_threshold
        return 2.**10*self.floor_delta

    @property
    def kappa(self):
        """Kappa of the tail diagnostics (default 0.9 of the bound)."""
        if self.diagnostics.kappa is not None:
            return self.diagnostics.kappa
        p = self.policies[0]
        return 0.9*kappa_bound(p.a, p.delta, p.alpha)

    def with_overrides(self, master_seed=None, replicas=None, output=None,
                       workers=None):
        raw = copy.deepcopy(self.raw)
        for key, value in (('master_seed', master_seed),
                           ('replicas', replicas), ('output', output),
                           ('workers', workers)):
            if value is not None:
                raw[key] = value
        return config_from_dict(raw, environ={})


def resolve_seed(file_seed, flag_seed=None, environ=None):
    """Master seed by precedence: flag, then environment, then file.

    Examples
    --------
    >>> resolve_seed(1, None, {'ZOOMSTAB_SEED': '7'})
    7
    >>> resolve_seed(1, 3, {'ZOOMSTAB_SEED': '7'})
    3
    """
    environ = os.environ if environ is None else environ
    if flag_seed is not None:
        return int(flag_seed)
    if environ.get(SEED_ENV, '') != '':
        try:
            return int(environ[SEED_ENV])
        except ValueError:
            raise ConfigError('{} must be an integer, got {!r}'.format(
                SEED_ENV, environ[SEED_ENV]))
    return file_seed


def integer_value(value):
    """`value` as an int; non-integral numbers raise ValueError.

    Examples
    --------
    >>> integer_value(6.0)
    6
    >>> integer_value(4.5)
    Traceback (most recent call last):
    ...
    ValueError: expected an integer, got 4.5
    """
    try:
        number = float(value)
    except (TypeError, ValueError):
        number = None
    if isinstance(value, bool) or number is None or not number.is_integer():
        raise ValueError('expected an integer, got {!r}'.format(value))
    return int(number)


def _per_axis(value, N, name, violations, cast=float):
    if value is None:
        return [None]*N
    if isinstance(value, (list, tuple)):
        if len(value) != N:
            violations.append('dimension mismatch: quantizer.{} has {} '
                              'entries for {} axes'.format(name, len(value),
                                                           N))
            return [None]*N
    else:
        value = [value]*N
    try:
        return [cast(v) for v in value]
    except (TypeError, ValueError) as err:
        violations.append('quantizer.{}: {}'.format(name, err))
        return [None]*N


def _build_system(section, violations):
    kind = section.get('kind', 'scalar')
    try:
        if kind == 'scalar':
            return kind, SystemParams(
                a=float(section['a']), b=float(section.get('b', 1.)),
                noise_std=float(section.get('noise_std', 1.)),
                x0_mean=float(section.get('x0_mean', 0.)),
                x0_std=float(section.get('x0_std', 1.)))
        elif kind == 'vector':
            if 'system_matrix' in section:
                params, _ = diagonalize_symmetric(
                    section['system_matrix'], section.get('input_matrix'),
                    section.get('noise_input_matrix'),
                    noise_std=float(section.get('noise_std', 1.)),
                    x0_std=float(section.get('x0_std', 1.)),
                    x0_mean=section.get('x0_mean', 0.))
                return kind, params
            return kind, VectorSystemParams(
                section['eigenvalues'], section.get('control_matrix'),
                section.get('noise_matrix'),
                noise_std=float(section.get('noise_std', 1.)),
                x0_mean=section.get('x0_mean', 0.),
                x0_std=float(section.get('x0_std', 1.)))
        violations.append('system.kind must be "scalar" or "vector"')
    except KeyError as err:
        violations.append('system.{} is required'.format(err.args[0]))
    except ConfigError as err:
        violations.extend(err.violations)
    except (TypeError, ValueError) as err:
        violations.append('system: {}'.format(err))
    return kind, None


def _build_quantizer(section, poles, x0_std, violations):
    N = len(poles)
    try:
        n = integer_value(section['n'])
    except KeyError:
        violations.append('quantizer.n is required')
        return None, None, None
    except (TypeError, ValueError) as err:
        violations.append('quantizer.n: {}'.format(err))
        return None, None, None
    s = _per_axis(section.get('s', 1.), N, 's', violations)
    L = _per_axis(section.get('L', 1.), N, 'L', violations)
    if 'zoom_out_steps' in section or 'zoom_in_steps' in section:
        outs = _per_axis(section.get('zoom_out_steps'), N, 'zoom_out_steps',
                         violations, integer_value)
        ins = _per_axis(section.get('zoom_in_steps'), N, 'zoom_in_steps',
                        violations, integer_value)
    else:
        alphas = _per_axis(section.get('alpha'), N, 'alpha', violations)
        deltas = _per_axis(section.get('delta'), N, 'delta', violations)
    policies = []
    for i, a in enumerate(poles):
        try:
            if 'zoom_out_steps' in section or 'zoom_in_steps' in section:
                policies.append(ZoomPolicy.from_steps(a, n, s[i], outs[i],
                                                      ins[i], L[i]))
            else:
                policies.append(ZoomPolicy(a, n, alphas[i], deltas[i], L[i],
                                           s[i]))
        except ConfigError as err:
            violations.extend(['axis {}: {}'.format(i, v) if N > 1 else v
                               for v in err.violations])
        except TypeError:
            violations.append('quantizer needs alpha and delta (or the '
                              'integer zoom steps) for every axis')
    if len(policies) != N:
        return None, None, None

    margin = float(section.get('rate_margin', DEFAULT_RATE_MARGIN))
    K_spec = section.get('K', 'auto')
    if K_spec == 'auto':
        Ks = [auto_levels(p.a, p.zoom_in_factor**(1./n), n, margin)
              for p in policies]
    else:
        Ks = _per_axis(K_spec, N, 'K', violations, integer_value)
    Ks = [K for K in Ks if K is not None]
    if len(Ks) != N:
        return None, None, None
    for i, (K, p) in enumerate(zip(Ks, policies)):
        if K < 2 or K % 2:
            violations.append('the number of granular levels must be an even '
                              'number K(n) >= 2, got K = {}'.format(K))
            continue
        violations.extend(p.rate_violations(K))

    delta0 = section.get('delta0', 'auto')
    delta0 = [None]*N if delta0 in ('auto', None) else _per_axis(
        delta0, N, 'delta0', violations)
    exps = []
    for K, p, d0 in zip(Ks, policies, delta0):
        if K < 2 or K % 2:
            continue
        try:
            exps.append(initial_quantizer(p, K, x0_std, d0).delta_exp)
        except ConfigError as err:
            violations.extend(err.violations)
    return tuple(policies), tuple(Ks), tuple(exps)


def build_channel(section):
    """Channel model from its configuration section.

    Examples
    --------
    >>> build_channel({'kind': 'bsc', 'eps': 0.1}).transition.tolist()
    [[0.9, 0.1], [0.1, 0.9]]
    """
    kind = section.get('kind')
    try:
        if kind == 'noiseless':
            return DmcModel.noiseless(int(section.get('size', 2)))
        elif kind == 'bsc':
            return DmcModel.bsc(float(section['eps']))
        elif kind == 'erasure':
            return DmcModel.erasure(float(section['eps']))
        elif kind == 'symmetric':
            return DmcModel.symmetric(int(section['size']),
                                      float(section['eps']))
        elif kind == 'matrix':
            return DmcModel.from_matrix(section['matrix'])
        elif kind == 'gilbert_elliott':
            return MemoryChannelModel.gilbert_elliott(
                float(section['p_gb']), float(section['p_bg']),
                float(section.get('eps_good', 0.)),
                float(section['eps_bad']))
    except KeyError as err:
        raise ConfigError('channel.{} is required for channel kind '
                          '{!r}'.format(err.args[0], kind))
    raise ConfigError('unknown channel kind {!r}; use noiseless, bsc, '
                      'erasure, symmetric, matrix or gilbert_elliott'.format(
                          kind))


def _check_codebook(section, message_count, channel, violations):
    kind = section.get('kind', 'uncoded')
    if kind not in _CODEBOOK_KINDS:
        violations.append('codebook.kind must be one of {}'.format(
            ', '.join(_CODEBOOK_KINDS)))
        return
    if section.get('decoder', 'ml') not in _DECODERS:
        violations.append('codebook.decoder must be "ml" or "min_distance"')
    n = int(section.get('n', 1))
    if n < 1:
        violations.append('codebook.n must be a positive integer')
        return
    coded = message_count - 1 if section.get('protected_z') else \
        message_count
    if channel is None:
        return
    q = channel.input_size
    if kind == 'uncoded' and coded > q**n:
        violations.append('{} messages do not fit into {} input words of '
                          'length {}'.format(coded, q**n, n))
    elif kind == 'repetition' and coded > q:
        violations.append('a repetition code carries at most {} messages, '
                          'need {}'.format(q, coded))
    elif kind == 'explicit':
        words = section.get('words') or []
        if len(words) != coded:
            violations.append('codebook.words needs {} words, got '
                              '{}'.format(coded, len(words)))
    elif kind == 'random':
        dist = section.get('input_dist', 'uniform')
        if dist != 'uniform' and len(dist) != q:
            violations.append('codebook.input_dist needs {} entries'.format(
                q))


def config_from_dict(raw, flag_seed=None, environ=None):
    """Validate a configuration mapping.

    Raises
    ------
    ConfigError
        With one entry in `violations` per violated condition.
    """
    raw = copy.deepcopy(raw)
    violations = []
    version = raw.get('schema_version')
    if version != SCHEMA_VERSION:
        violations.append('schema_version must be {}, got {!r}'.format(
            SCHEMA_VERSION, version))
    for key in ('system', 'quantizer', 'channel'):
        if not isinstance(raw.get(key), dict):
            violations.append('section {!r} is required'.format(key))
    if violations:
        raise ConfigError(violations)

    kind, system = _build_system(raw['system'], violations)
    policies = Ks = exps = None
    if system is not None:
        poles = ([system.a] if kind == 'scalar'
                 else system.eigenvalues.tolist())
        policies, Ks, exps = _build_quantizer(raw['quantizer'], poles,
                                              system.x0_std, violations)

    channel = None
    try:
        channel = build_channel(raw['channel'])
    except ConfigError as err:
        violations.extend(err.violations)

    codebook = dict(raw.get('codebook') or {})
    codebook.setdefault('kind', 'uncoded')
    codebook.setdefault('protected_z', False)
    codebook.setdefault('decoder', 'ml')
    codebook.setdefault('n', policies[0].n if policies else 1)
    if policies and int(codebook['n']) != policies[0].n:
        violations.append('codebook.n must equal the block length '
                          'quantizer.n = {}'.format(policies[0].n))
    if Ks is not None:
        _check_codebook(codebook, int(np.prod(Ks)) + 1, channel, violations)

    diag = dict(raw.get('diagnostics') or {})
    try:
        if 'set_A' in diag:
            diag['set_A'] = tuple(float(v) for v in diag['set_A'])
        for key in ('drift_c_threshold', 'delta_min', 'kappa',
                    'divergence_threshold', 'cesaro_tolerance'):
            if diag.get(key) is not None:
                diag[key] = float(diag[key])
        for key in ('min_gap_samples', 'min_bin_count', 'num_checkpoints',
                    'error_trials'):
            if key in diag:
                diag[key] = int(diag[key])
        diagnostics = DiagnosticsConfig(**diag)
    except (TypeError, ValueError) as err:
        violations.append('diagnostics: {}'.format(err))
        diagnostics = DiagnosticsConfig()
    if diagnostics.drift not in _DRIFT_KINDS:
        violations.append('diagnostics.drift must be log, quadratic or none')
    if diagnostics.kappa is not None and policies:
        p = policies[0]
        bound = kappa_bound(p.a, p.delta, p.alpha)
        if not 0 < diagnostics.kappa < bound:
            violations.append('diagnostics.kappa = {:.6g} must lie in (0, '
                              '{:.6g})'.format(diagnostics.kappa, bound))

    horizon = int(raw.get('horizon', 10000))
    replicas = int(raw.get('replicas', 1))
    workers = int(raw.get('workers', 1))
    if horizon < 1 or replicas < 1 or workers < 1:
        violations.append('horizon, replicas and workers must be positive')
    seed = resolve_seed(raw.get('master_seed'), flag_seed, environ)
    if seed is None:
        violations.append('master_seed is required')
    else:
        raw['master_seed'] = int(seed)
    if violations:
        raise ConfigError(violations)

    return ExperimentConfig(
        kind=kind, system=system, policies=policies, K=Ks,
        initial_exps=exps, channel=channel, codebook=codebook,
        horizon=horizon, replicas=replicas, master_seed=int(seed),
        workers=workers, diagnostics=diagnostics,
        acceptance=dict(raw.get('acceptance') or {}),
        output=raw.get('output'), raw=raw)


def load_config(path, flag_seed=None, environ=None):
    """Load and validate a YAML experiment configuration.

    Parameters
    ----------
    path : str or path-like
    flag_seed : int, optional
        Seed given on the command line; takes precedence over everything.
    environ : mapping, optional
        Environment to read ``ZOOMSTAB_SEED`` from (default ``os.environ``).

    Returns
    -------
    ExperimentConfig

    Raises
    ------
    ConfigError
        If the file cannot be read or parsed, or any condition is violated.
    """
    try:
        with open(path, encoding='utf-8') as fh:
            raw = yaml.safe_load(fh)
    except OSError as err:
        raise ConfigError('cannot read configuration {}: {}'.format(path,
                                                                     err))
    except yaml.YAMLError as err:
        raise ConfigError('cannot parse configuration {}: {}'.format(path,
                                                                      err))
    if not isinstance(raw, dict):
        raise ConfigError('configuration {} must be a mapping'.format(path))
    return config_from_dict(raw, flag_seed, environ)
