"""Closed-loop simulation, replication and result records.

This module is part of zoomstab --
Adaptive zoom quantized control over noisy channels

Copyright 2026 The zoomstab developers

Each replica runs the plant, quantizer, channel and decoder in closed loop
for the configured horizon and condenses the trajectory into an
ExperimentRecord. Records are appended to a JSON-lines file as they complete,
followed by one summary record.
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
import json
import math
import warnings
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from zoomstab.channel import (ChannelHiddenState, ErrorClass,
                              MemoryChannelModel, build_explicit_codebook,
                              build_random_codebook, build_repetition_codebook,
                              build_uncoded_codebook, classify_error,
                              decode_block, decode_table,
                              estimate_error_probabilities, MAX_OUTPUT_WORDS)
from zoomstab.misc import ConfigError, ResultsWriteError, UndersampledWarning
from zoomstab.plant import (PlantState, initial_state, is_diverged,
                            sample_noise, step_scalar, step_vector)
from zoomstab.quantizer import (QuantizerState, VectorQuantizerState,
                                control_signal, control_signal_vector,
                                decode_vector_message, encode_vector_message,
                                message_to_symbol, quantize, quantize_vector,
                                symbol_to_message, zoom_update,
                                zoom_update_vector)
from zoomstab.stability import (DriftCheckSpec, ergodic_diagnostics,
                                fit_geometric_tail, stop_state_pairs,
                                track_stopping_times, verify_drift)
from zoomstab.stats import (GapHistogram, RunningMoments,
                            mean_confidence_interval)

CODEBOOK_SPAWN_KEY = (0,)
REPLICA_SPAWN_PREFIX = 1


def replica_seed_sequence(master_seed, replica):
    """Independent seed sequence of one replica.

    Examples
    --------
    >>> replica_seed_sequence(5, 1).spawn_key
    (1, 1)
    """
    return np.random.SeedSequence(master_seed,
                                  spawn_key=(REPLICA_SPAWN_PREFIX, replica))


def build_codebook(cfg):
    """Codebook of an experiment; random codebooks use their own stream."""
    book = cfg.codebook
    M, n = cfg.message_count, cfg.n
    protected = bool(book.get('protected_z', False))
    kind = book.get('kind', 'uncoded')
    ch = cfg.channel
    if kind == 'uncoded':
        cb = build_uncoded_codebook(M, n, ch.input_size, protected)
    elif kind == 'repetition':
        cb = build_repetition_codebook(M, n, protected)
    elif kind == 'explicit':
        words = [str(w).zfill(n) if isinstance(w, int) else w
                 for w in book['words']]
        cb = build_explicit_codebook(words, protected)
    elif kind == 'random':
        dist = book.get('input_dist', 'uniform')
        if dist == 'uniform':
            dist = np.full(ch.input_size, 1./ch.input_size)
        rng = np.random.default_rng(np.random.SeedSequence(
            cfg.master_seed, spawn_key=CODEBOOK_SPAWN_KEY))
        cb = build_random_codebook(M, n, dist, rng, protected)
    else:
        raise ConfigError('unknown codebook kind {!r}'.format(kind))
    if cb.n != n:
        raise ConfigError('codewords have length {} but the block length is '
                          '{}'.format(cb.n, n))
    cb.check_alphabet(ch)
    return cb


def codebook_error_probabilities(cfg, codebook):
    """Error probabilities of the experiment's codebook (exact if feasible)."""
    ch = cfg.channel
    rule = cfg.codebook.get('decoder', 'ml')
    exact = (not isinstance(ch, MemoryChannelModel)
             and ch.output_size**codebook.n <= MAX_OUTPUT_WORDS)
    if exact:
        res = estimate_error_probabilities(codebook, ch, 'exact', rule=rule)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(
            cfg.master_seed, spawn_key=CODEBOOK_SPAWN_KEY + (1,)))
        res = estimate_error_probabilities(
            codebook, ch, 'monte_carlo', cfg.diagnostics.error_trials, rng,
            rule=rule)
    probs = {key: float(res[key]) for key in ('Pgg', 'PZg', 'PgZ', 'Pbar')}
    probs['mode'] = res['mode']
    return probs


@dataclass
class LoopContext:
    """Per-experiment constants of the closed loop."""
    cfg: object
    codebook: object
    table: Optional[np.ndarray]
    radix: np.ndarray
    noiseless: bool
    rule: str = 'ml'


def build_context(cfg, codebook):
    ch = cfg.channel
    rule = cfg.codebook.get('decoder', 'ml')
    table = None
    if ch.output_size**codebook.n <= MAX_OUTPUT_WORDS:
        table = decode_table(codebook, ch, rule)
    radix = ch.output_size**np.arange(codebook.n - 1, -1, -1)
    noiseless = (not isinstance(ch, MemoryChannelModel)
                 and ch.input_size == ch.output_size
                 and np.array_equal(ch.transition,
                                    np.identity(ch.input_size)))
    return LoopContext(cfg, codebook, table, radix, noiseless, rule)


def _cached_context(cfg, codebook):
    key = (cfg.config_hash, cfg.master_seed)
    if key not in _cached_context.cache:
        _cached_context.cache.clear()
        _cached_context.cache[key] = build_context(cfg, codebook)
    return _cached_context.cache[key]


_cached_context.cache = {}


def _send(ctx, message, rng, hidden, received=None):
    cb = ctx.codebook
    if cb.protected_z and message == cb.z_message:
        return message
    word = cb.codewords[message]
    ch = ctx.cfg.channel
    if received is not None:
        out = np.asarray(received, dtype=int)
        if out.shape != word.shape or np.any(out < 0) \
                or np.any(out >= ch.output_size):
            raise ConfigError('received word {} does not fit the channel '
                              'output alphabet'.format(out.tolist()))
    elif ctx.noiseless:
        out = word
    elif isinstance(ch, MemoryChannelModel):
        out = ch.sample(word, rng, hidden)
    else:
        out = ch.sample(word, rng)
    if ctx.table is not None:
        return int(ctx.table[int(out @ ctx.radix)])
    return decode_block(cb, out, ch, ctx.rule)


@dataclass
class BlockOutcome:
    x_path: np.ndarray
    q_next: object
    sent: int
    decoded: int
    error: ErrorClass


def simulate_block(x, q, ctx, noise, rng, hidden=None, t=0, received=None):
    """One block of the closed loop from the sampled state ``(x, q)``.

    The block consumes only the sampled state and fresh randomness (the
    `noise` of its ``n`` steps and the channel draws from `rng`), so
    replaying it from a saved state reproduces the sampled chain.

    Parameters
    ----------
    x : float or ndarray
        State at the block boundary ``t``.
    q : QuantizerState or VectorQuantizerState
        Quantizer state shared by encoder and decoder.
    ctx : LoopContext
    noise : ndarray
        Disturbances of the ``n`` steps of the block.
    rng : numpy.random.Generator
        Channel randomness.
    hidden : ChannelHiddenState, optional
    t : int
        Time of the block boundary, a multiple of ``n``.
    received : array_like, optional
        Channel output word decoded in place of a sampled one, for replaying
        recorded or scripted channel outputs.

    Returns
    -------
    BlockOutcome
    """
    cfg = ctx.cfg
    n = cfg.n
    z = ctx.codebook.z_message
    if cfg.kind == 'scalar':
        policy = cfg.policies[0]
        sent = symbol_to_message(quantize(x, q), q.K)
        decoded = _send(ctx, sent, rng, hidden, received)
        sym = message_to_symbol(decoded, q.K)
        state = PlantState(x, t)
        path = np.empty(n)
        for j in range(n):
            u = control_signal(sym, q, cfg.system, policy, t + j)
            state = step_scalar(state, u, noise[j], cfg.system)
            path[j] = state.x
        q_next = zoom_update(q, sym, policy)
    else:
        sent = encode_vector_message(quantize_vector(x, q), q.Ks)
        decoded = _send(ctx, sent, rng, hidden, received)
        sym = decode_vector_message(decoded, q.Ks)
        state = PlantState(np.asarray(x, dtype=float), t)
        path = np.empty((n, cfg.system.dim))
        for j in range(n):
            u = control_signal_vector(sym, q, cfg.system, t + j)
            state = step_vector(state, u, noise[j], cfg.system)
            path[j] = state.x
        q_next = zoom_update_vector(q, sym)
    return BlockOutcome(path, q_next, sent, decoded,
                        classify_error(sent, decoded, z))


def initial_quantizer_state(cfg):
    if cfg.kind == 'scalar':
        return QuantizerState(cfg.K[0], cfg.initial_exps[0],
                              cfg.policies[0].s)
    axes = tuple(QuantizerState(K, e, p.s) for K, e, p in
                 zip(cfg.K, cfg.initial_exps, cfg.policies))
    return VectorQuantizerState(axes, cfg.policies)


def _exps(q):
    if isinstance(q, QuantizerState):
        return np.array([q.delta_exp])
    return q.delta_exps


@dataclass
class ExperimentRecord:
    """Condensed outcome of one replica."""
    config_hash: str
    replica: int
    master_seed: int
    spawn_key: list
    horizon: int
    steps: int
    diverged: bool
    divergence_time: Optional[int]
    final_log_abs_x: float
    cesaro_x2: float
    cesaro_logx: float
    cesaro_relative_drift: float
    cesaro_checkpoints: list
    cesaro_x2_path: list
    recurrence_count: int
    perfect_zoom_fraction: float
    stop_count: int
    gap_histogram: dict = field(default_factory=dict)
    gap_histogram_large_delta: dict = field(default_factory=dict)
    error_counts: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d['record_type'] = 'replica'
        for key in ('gap_histogram', 'gap_histogram_large_delta'):
            d[key] = {str(k): v for k, v in d[key].items()}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop('record_type', None)
        for key in ('gap_histogram', 'gap_histogram_large_delta'):
            d[key] = {int(k): int(v) for k, v in d[key].items()}
        return cls(**d)


def _drift_check(cfg):
    floor = cfg.floor_delta
    c_threshold = cfg.drift_c_threshold
    common = dict(set_C=lambda s: s[1] <= c_threshold,
                  min_count=cfg.diagnostics.min_bin_count)
    if cfg.diagnostics.drift == 'log':
        return DriftCheckSpec(V=lambda s: 2*math.log2(s[1]/floor),
                              delta_fn=lambda s: 1., **common)
    return DriftCheckSpec(V=lambda s: (s[1]/floor)**2,
                          delta_fn=lambda s: max(0.5*(s[1]/floor)**2, 1.),
                          **common)


@dataclass
class SampledRun:
    """Block-boundary samples of one replica.

    `x` and `delta` hold the state and bin size at ``t = kn`` for
    ``k = 0..blocks`` (one column per axis for the vector scheme),
    `delta_exps` the lattice indices of the bin sizes and `errors` the
    decoding outcome of each completed block.
    """
    x: np.ndarray
    delta: np.ndarray
    delta_exps: np.ndarray
    errors: list
    trajectory: np.ndarray = field(repr=False)
    diverged: bool = False
    divergence_time: Optional[int] = None
    spawn_key: tuple = ()

    @property
    def blocks(self):
        return len(self.errors)


def sample_replica(cfg, replica, codebook):
    """Simulate one replica and keep its block-boundary samples.

    Returns
    -------
    SampledRun
    """
    ctx = _cached_context(cfg, codebook)
    ss = replica_seed_sequence(cfg.master_seed, replica)
    noise_rng, chan_rng, init_rng = [np.random.default_rng(s)
                                     for s in ss.spawn(3)]
    n = cfg.n
    B = cfg.horizon//n
    T = B*n
    shape = () if cfg.kind == 'scalar' else (cfg.system.dim,)
    threshold = cfg.diagnostics.divergence_threshold
    log2_threshold = math.log2(threshold)
    s = np.array([p.s for p in cfg.policies])

    noise = sample_noise(noise_rng, cfg.system.noise_std, size=(T,) + shape)
    x = initial_state(cfg.system, init_rng).x
    q = initial_quantizer_state(cfg)
    xs = np.zeros((T + 1,) + shape)
    xs[0] = x
    sample_x = np.zeros((B + 1,) + shape)
    sample_exp = np.zeros((B + 1, len(cfg.policies)), dtype=np.int64)
    errors = []
    hidden = ChannelHiddenState()
    diverged = False
    divergence_time = None
    blocks = 0
    for k in range(B + 1):
        sample_x[k] = x
        sample_exp[k] = _exps(q)
        if (is_diverged(x, threshold)
                or np.any(sample_exp[k]*s > log2_threshold)):
            diverged, divergence_time = True, k*n
            break
        if k == B:
            break
        out = simulate_block(x, q, ctx, noise[k*n:(k + 1)*n], chan_rng,
                             hidden, k*n)
        xs[k*n + 1:(k + 1)*n + 1] = out.x_path
        errors.append(out.error)
        q = out.q_next
        x = out.x_path[-1]
        blocks = k + 1

    sample_exp = sample_exp[:blocks + 1]
    with np.errstate(over='ignore'):
        sample_delta = np.exp2(sample_exp*s)
    if cfg.kind == 'scalar':
        sample_delta = sample_delta[:, 0]
    return SampledRun(sample_x[:blocks + 1], sample_delta, sample_exp,
                      errors, xs[:blocks*n + 1], diverged, divergence_time,
                      tuple(ss.spawn_key))


def run_replica(cfg, replica, codebook, verbosity=0):
    """Run one replica of the closed loop.

    Returns
    -------
    ExperimentRecord
    """
    run = sample_replica(cfg, replica, codebook)
    n = cfg.n
    threshold = cfg.diagnostics.divergence_threshold
    K = cfg.K[0] if cfg.kind == 'scalar' else np.array(cfg.K)
    sample_x, sample_delta, errors = run.x, run.delta, run.errors
    blocks = run.blocks

    diag = ergodic_diagnostics(run.trajectory, cfg.diagnostics.set_A, n,
                               sample_delta, K, threshold,
                               cfg.diagnostics.num_checkpoints)
    log = track_stopping_times(sample_x, sample_delta, K, n, errors)
    delta_min = cfg.delta_min
    verdicts = {'ams': diag.verdict(cfg.diagnostics.cesaro_tolerance)}
    if cfg.diagnostics.drift != 'none':
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', UndersampledWarning)
            pairs = [(s0, s1) for s0, s1, _ in
                     stop_state_pairs(log, sample_x, sample_delta)]
            drift = verify_drift(pairs, _drift_check(cfg))
        verdicts['drift'] = drift['verdict']

    counts = Counter(e.value for e in errors)
    final = np.asarray(sample_x[-1], dtype=float)
    with np.errstate(over='ignore', invalid='ignore'):
        final_log = float(np.log1p(np.sqrt(np.sum(final**2))))
    record = ExperimentRecord(
        config_hash=cfg.config_hash, replica=int(replica),
        master_seed=int(cfg.master_seed), spawn_key=list(run.spawn_key),
        horizon=int(cfg.horizon), steps=int(blocks*n),
        diverged=bool(run.diverged or diag.diverged),
        divergence_time=run.divergence_time,
        final_log_abs_x=final_log,
        cesaro_x2=diag.final_cesaro_x2,
        cesaro_logx=float(diag.cesaro_logx[-1]) if diag.cesaro_logx.size
        else float('nan'),
        cesaro_relative_drift=float(diag.cesaro_relative_drift),
        cesaro_checkpoints=[int(c) for c in diag.checkpoints],
        cesaro_x2_path=[float(c) for c in diag.cesaro_x2],
        recurrence_count=int(diag.recurrence_count),
        perfect_zoom_fraction=float(diag.perfect_zoom_fraction),
        stop_count=int(len(log.tau) - 1),
        gap_histogram=log.histogram().to_dict(),
        gap_histogram_large_delta=log.histogram(delta_min).to_dict(),
        error_counts={e.value: int(counts.get(e.value, 0))
                      for e in ErrorClass},
        verdicts=verdicts)
    if verbosity > 1:
        print('replica {}: diverged={} cesaro_x2={:.4g} stops={}'.format(
            replica, record.diverged, record.cesaro_x2, record.stop_count))
    return record


def _replica_task(args):
    return run_replica(*args)


def _describe(values):
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return {'mean': float('nan'), 'median': float('nan'),
                'std': float('nan'), 'ci': [float('nan'), float('nan')],
                'count': 0}
    lo, hi = mean_confidence_interval(finite)
    moments = RunningMoments.from_values(finite)
    return {'mean': float(moments.mean), 'std': math.sqrt(moments.variance),
            'median': float(np.median(finite)), 'ci': [float(lo), float(hi)],
            'count': moments.count}


def summarize(records, error_probabilities=None, kappa=None,
              cesaro_tolerance=0.05, min_gap_samples=100):
    """Cross-replica summary record.

    Parameters
    ----------
    records : sequence of ExperimentRecord
        At least one record, folded in the given (replica) order.
    error_probabilities : dict, optional
        Codebook error probabilities; with `kappa` they enable the tail
        comparison of the merged gap histogram.
    kappa : float, optional
    cesaro_tolerance : float
        A replica counts as Cesaro-stable when it did not diverge and its
        relative Cesaro drift is below this value.
    min_gap_samples : int

    Returns
    -------
    dict

    Examples
    --------
    >>> a = ExperimentRecord('h', 0, 1, [1, 0], 10, 10, True, 5, 3., 1., 1.,
    ...                      0., [1], [1.], 3, 0.5, 2)
    >>> b = ExperimentRecord('h', 1, 1, [1, 1], 10, 10, False, None, 1., 1.,
    ...                      1., 0., [1], [1.], 3, 0.5, 2)
    >>> summarize([a, b])['divergence_rate']
    0.5
    """
    assert len(records) > 0
    df = pd.DataFrame([{
        'diverged': r.diverged, 'cesaro_x2': r.cesaro_x2,
        'perfect_zoom_fraction': r.perfect_zoom_fraction,
        'cesaro_relative_drift': r.cesaro_relative_drift,
        'final_log_abs_x': r.final_log_abs_x} for r in records])
    stable = (~df['diverged']) & (df['cesaro_relative_drift']
                                  < cesaro_tolerance)

    gaps = GapHistogram()
    gaps_large = GapHistogram()
    errors = Counter()
    verdicts = {}
    for r in records:
        gaps = gaps.merge(GapHistogram.from_dict(r.gap_histogram))
        gaps_large = gaps_large.merge(
            GapHistogram.from_dict(r.gap_histogram_large_delta))
        errors.update(r.error_counts)
        for key, value in r.verdicts.items():
            verdicts.setdefault(key, Counter())[value] += 1

    summary = {
        'record_type': 'summary',
        'config_hash': records[0].config_hash,
        'master_seed': records[0].master_seed,
        'replicas': len(records),
        'divergence_rate': float(df['diverged'].mean()),
        'cesaro_stable_fraction': float(stable.mean()),
        'cesaro_x2': _describe(df['cesaro_x2']),
        'perfect_zoom_fraction': _describe(df['perfect_zoom_fraction']),
        'final_log_abs_x': _describe(df['final_log_abs_x']),
        'gap_histogram': {str(k): v for k, v in gaps.to_dict().items()},
        'error_counts': dict(errors),
        'verdicts': {k: dict(v) for k, v in verdicts.items()}}
    if error_probabilities is not None:
        summary['error_probabilities'] = dict(error_probabilities)
    if error_probabilities is not None and kappa is not None:
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', UndersampledWarning)
            tail = fit_geometric_tail(
                gaps_large, error_probabilities['PgZ'], kappa,
                min_samples=min_gap_samples,
                pgg=error_probabilities['Pgg'],
                pzg=error_probabilities['PZg'])
        summary['tail'] = {'verdict': tail['verdict'],
                           'violations': [int(k) for k in tail['violations']],
                           'samples': int(tail['samples']),
                           'k_min': int(tail['k_min']),
                           'kappa': float(kappa),
                           'slope': float(tail['slope'])}
    return summary


def check_acceptance(summary, acceptance):
    """Failed acceptance criteria of a summary (empty list if all hold).

    Examples
    --------
    >>> check_acceptance({'divergence_rate': 0.2}, {'max_divergence_rate': 0})
    ['divergence rate 0.2 > 0']
    """
    failures = []
    rate = summary.get('divergence_rate')
    if 'max_divergence_rate' in acceptance and \
            rate > acceptance['max_divergence_rate']:
        failures.append('divergence rate {} > {}'.format(
            rate, acceptance['max_divergence_rate']))
    if 'min_divergence_rate' in acceptance and \
            rate < acceptance['min_divergence_rate']:
        failures.append('divergence rate {} < {}'.format(
            rate, acceptance['min_divergence_rate']))
    if 'min_cesaro_stable_fraction' in acceptance:
        frac = summary['cesaro_stable_fraction']
        if frac < acceptance['min_cesaro_stable_fraction']:
            failures.append('Cesaro-stable fraction {} < {}'.format(
                frac, acceptance['min_cesaro_stable_fraction']))
    if 'min_perfect_zoom_fraction' in acceptance:
        frac = summary['perfect_zoom_fraction']['mean']
        if not frac > acceptance['min_perfect_zoom_fraction']:
            failures.append('mean perfect-zoom fraction {} <= {}'.format(
                frac, acceptance['min_perfect_zoom_fraction']))
    if acceptance.get('tail_consistent') and \
            summary.get('tail', {}).get('verdict') == 'violated':
        failures.append('gap tail exceeds the geometric bound at k = '
                        '{}'.format(summary['tail']['violations']))
    return failures


def json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError('cannot serialize {!r}'.format(type(obj)))


def write_record(fh, record):
    """Append one record as a JSON line and flush."""
    fh.write(json.dumps(record, default=json_default) + '\n')
    fh.flush()


def read_results(path):
    """Read a results file.

    Returns
    -------
    records : list of ExperimentRecord
    summaries : list of dict
    """
    records, summaries = [], []
    with open(path, encoding='utf-8') as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            if d.get('record_type') == 'summary':
                summaries.append(d)
            else:
                records.append(ExperimentRecord.from_dict(d))
    return records, summaries


def _pool_size(pool):
    size = getattr(pool, 'size', None) or getattr(pool, '_processes', None)
    return max(int(size or 1), 1)


def run_experiment(cfg, pool=None, verbosity=0, output=None,
                   return_summary=False):
    """Run all replicas of an experiment.

    Parameters
    ----------
    cfg : ExperimentConfig
    pool : object or None
        If a pool object is provided, replicas are distributed with its
        `map` method in batches of the pool size; records are still folded
        and written in replica order. The functionality has been tested with
        the serial and multiprocessing pools of schwimmbad.
    verbosity : int
        Level of verbosity (default is 0, i.e., no additional output).
    output : str, optional
        Results file; defaults to ``cfg.output``. Nothing is written if both
        are None.
    return_summary : bool
        If True, return ``(records, summary)``.

    Returns
    -------
    list of ExperimentRecord

    Raises
    ------
    ResultsWriteError
        If writing fails; the completed records are attached.
    """
    codebook = build_codebook(cfg)
    probs = codebook_error_probabilities(cfg, codebook)
    if verbosity > 0:
        print('Codebook error probabilities ({}): Pgg={:.3g} PZg={:.3g} '
              'PgZ={:.3g} Pbar={:.3g}'.format(probs['mode'], probs['Pgg'],
                                             probs['PZg'], probs['PgZ'],
                                             probs['Pbar']))
    path = output if output is not None else cfg.output
    records = []
    fh = None
    if path:
        try:
            fh = open(path, 'a', encoding='utf-8')
        except OSError as err:
            raise ResultsWriteError('cannot open results file {}: {}'.format(
                path, err), records) from err
    try:
        size = _pool_size(pool) if pool is not None else 1
        for start in range(0, cfg.replicas, size):
            tasks = [(cfg, i, codebook, verbosity)
                     for i in range(start, min(start + size, cfg.replicas))]
            if pool is None:
                batch = [_replica_task(t) for t in tasks]
            else:
                batch = list(pool.map(_replica_task, tasks))
            for rec in batch:
                records.append(rec)
                if fh is not None:
                    try:
                        write_record(fh, rec.to_dict())
                    except OSError as err:
                        raise ResultsWriteError(
                            'writing replica {} failed: {}'.format(
                                rec.replica, err), records) from err
            if verbosity > 0:
                print('{}/{} replicas done'.format(len(records),
                                                   cfg.replicas))
        summary = summarize(records, probs, cfg.kappa,
                            cfg.diagnostics.cesaro_tolerance,
                            cfg.diagnostics.min_gap_samples)
        if fh is not None:
            try:
                write_record(fh, summary)
            except OSError as err:
                raise ResultsWriteError('writing the summary failed: '
                                        '{}'.format(err), records) from err
    finally:
        if fh is not None:
            fh.close()
    if return_summary:
        return records, summary
    return records
