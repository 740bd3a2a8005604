"""Test cases for the zoomstab.experiment and zoomstab.cli modules.

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
import json
import math

import numpy as np

import pytest
import scipy.stats
import yaml

from zoomstab.channel import ErrorClass
from zoomstab.cli import main
from zoomstab.config import config_from_dict
from zoomstab.experiment import (ExperimentRecord, build_codebook,
                                 build_context, check_acceptance,
                                 codebook_error_probabilities,
                                 initial_quantizer_state, read_results,
                                 run_experiment, sample_replica,
                                 simulate_block, summarize)
from zoomstab.infotheory import check_second_moment_conditions
from zoomstab.misc import ConfigError, ResultsWriteError
from zoomstab.quantizer import (QuantizerState, quantize, symbol_to_message,
                                zoom_ratio)
from zoomstab.stability import track_stopping_times

S1 = {
    'schema_version': 1,
    'system': {'a': 2., 'b': 1., 'noise_std': 1.},
    'quantizer': {'n': 1, 'alpha': 0.5, 'delta': 2., 'L': 4., 's': 1.,
                  'K': 6},
    'channel': {'kind': 'noiseless', 'size': 8},
    'codebook': {'kind': 'uncoded'},
    'horizon': 20000,
    'replicas': 3,
    'master_seed': 1,
}

N1 = {
    'schema_version': 1,
    'system': {'a': 4., 'b': 1., 'noise_std': 1.},
    'quantizer': {'n': 1, 'alpha': 0.5, 'delta': 4., 'L': 4., 's': 1.,
                  'K': 'auto'},
    'channel': {'kind': 'noiseless', 'size': 2},
    'codebook': {'kind': 'random'},
    'horizon': 1000,
    'replicas': 10,
    'master_seed': 2,
}

A6 = {
    'schema_version': 1,
    'system': {'a': 2., 'b': 1., 'noise_std': 1.},
    'quantizer': {'n': 1, 'alpha': 0.5, 'delta': 2., 'L': 64., 's': 1.,
                  'K': 6},
    'channel': {'kind': 'symmetric', 'size': 8, 'eps': 0.001},
    'codebook': {'kind': 'uncoded'},
    'diagnostics': {'kappa': 0.3, 'delta_min': 32.},
    'horizon': 6000,
    'replicas': 1,
    'master_seed': 6,
}

A9 = {
    'schema_version': 1,
    'system': {'a': 1.2, 'b': 1., 'noise_std': 1.},
    'quantizer': {'n': 8, 's': math.log2(1.5)/2, 'zoom_out_steps': 16,
                  'zoom_in_steps': -1, 'L': 16., 'K': 6},
    'channel': {'kind': 'bsc', 'eps': 0.01},
    'codebook': {'kind': 'explicit', 'protected_z': True,
                 'words': ['00000000', '11010110', '01111100', '00011111',
                           '10101101', '11100011']},
    'horizon': 16000,
    'replicas': 2,
    'master_seed': 9,
}

A10 = {
    'schema_version': 1,
    'system': {'kind': 'vector', 'eigenvalues': [2., 1.25]},
    'quantizer': {'n': 1, 'alpha': 0.5, 'delta': [2., 0.75], 'L': 4.,
                  'K': [6, 4]},
    'channel': {'kind': 'noiseless', 'size': 32},
    'codebook': {'kind': 'uncoded'},
    'horizon': 10000,
    'replicas': 2,
    'master_seed': 10,
}


def as_json(record):
    return json.dumps(record.to_dict(), sort_keys=True)


@pytest.mark.usefixtures('pool')
class TestClosedLoop:

    def test_noiseless_stabilization(self):
        cfg = config_from_dict(S1, environ={})
        records, summary = run_experiment(cfg, pool=self.pool,
                                          return_summary=True)
        assert [r.replica for r in records] == [0, 1, 2]
        assert summary['divergence_rate'] == 0.
        assert summary['cesaro_stable_fraction'] >= 2/3
        assert summary['perfect_zoom_fraction']['mean'] > 0.5
        assert summary['error_counts'][ErrorClass.NONE.value] == \
            3*cfg.horizon
        assert check_acceptance(summary, {'max_divergence_rate': 0,
                                          'min_perfect_zoom_fraction': 0.5}) \
            == []

    def test_capacity_deficient_loop_diverges(self):
        cfg = config_from_dict(N1, environ={})
        assert cfg.K == (10,)
        records, summary = run_experiment(cfg, pool=self.pool,
                                          return_summary=True)
        assert summary['divergence_rate'] >= 0.9
        assert summary['final_log_abs_x']['median'] > 100.
        assert all(r.steps < cfg.horizon for r in records if r.diverged)
        assert check_acceptance(summary, {'min_divergence_rate': 0.9}) == []

    def test_replicas_are_reproducible(self):
        cfg = config_from_dict(dict(S1, horizon=2000), environ={})
        first = run_experiment(cfg, pool=self.pool)
        second = run_experiment(cfg, pool=self.pool)
        assert [as_json(r) for r in first] == [as_json(r) for r in second]
        assert first[0].cesaro_x2 != first[1].cesaro_x2
        assert first[1].spawn_key == [1, 1]
        other = run_experiment(cfg.with_overrides(master_seed=2),
                               pool=self.pool)
        assert other[0].cesaro_x2 != first[0].cesaro_x2
        assert other[0].config_hash == first[0].config_hash

    def test_vector_loop(self):
        cfg = config_from_dict(A10, environ={})
        records, summary = run_experiment(cfg, pool=self.pool,
                                          return_summary=True)
        assert summary['divergence_rate'] == 0.
        assert summary['perfect_zoom_fraction']['mean'] > 0.5
        assert all(np.isfinite(r.cesaro_x2) for r in records)


def test_geometric_tail_of_stop_gaps():
    cfg = config_from_dict(A6, environ={})
    probs = codebook_error_probabilities(cfg, build_codebook(cfg))
    assert probs['mode'] == 'exact'
    assert probs['PgZ'] == pytest.approx(0.001)
    _, summary = run_experiment(cfg, return_summary=True)
    tail = summary['tail']
    assert tail['k_min'] == 5
    assert tail['samples'] > 5000
    assert tail['verdict'] != 'violated'


def test_protected_overflow_pipeline():
    cfg = config_from_dict(A9, environ={})
    p = cfg.policies[0]
    assert p.delta == pytest.approx(0.3)
    assert p.alpha == pytest.approx(1.5**(-1/16))
    cb = build_codebook(cfg)
    assert cb.protected_z and cb.message_count == 7
    probs = codebook_error_probabilities(cfg, cb)
    assert probs['PgZ'] == 0. and probs['PZg'] == 0.
    assert probs['Pbar']*1.5**16 < 1.
    rep = check_second_moment_conditions(1.2, 0.3, p.alpha, 0.51, 8, probs,
                                         mode='a0', K=6)
    assert rep.conditions[0].satisfied
    records, summary = run_experiment(cfg, return_summary=True)
    assert summary['divergence_rate'] == 0.
    assert all(r.error_counts[ErrorClass.TYPE_II.value] == 0
               for r in records)
    assert all(r.error_counts[ErrorClass.TYPE_IB.value] == 0
               for r in records)


def test_simulate_block():
    cfg = config_from_dict(S1, environ={})
    ctx = build_context(cfg, build_codebook(cfg))
    rng = np.random.default_rng(0)
    q = QuantizerState(6, 1)
    out = simulate_block(0.3, q, ctx, np.zeros(1), rng)
    # cell [0, 2) is sent, the control cancels its midpoint
    assert out.sent == 3 and out.decoded == 3
    assert out.error == ErrorClass.NONE
    assert out.x_path[-1] == pytest.approx(-1.4)
    assert out.q_next == q
    out = simulate_block(100., q, ctx, np.zeros(1), rng)
    assert out.sent == 6
    assert out.x_path[-1] == 200.
    assert out.q_next.delta_exp == 3
    assert initial_quantizer_state(cfg).delta_exp == cfg.initial_exps[0]


def test_block_replay_from_saved_state():
    cfg = config_from_dict(dict(S1, channel={'kind': 'symmetric', 'size': 8,
                                             'eps': 0.3}), environ={})
    ctx = build_context(cfg, build_codebook(cfg))
    q = QuantizerState(6, 2)
    noise = np.random.default_rng(3).standard_normal(1)
    first = simulate_block(1.7, q, ctx, noise, np.random.default_rng(11))
    again = simulate_block(1.7, q, ctx, noise, np.random.default_rng(11))
    assert first.x_path.tolist() == again.x_path.tolist()
    assert first.q_next == again.q_next
    assert first.decoded == again.decoded


def next_block_states(ctx, start, history_blocks, seeds):
    """Next sampled state after an error-free, noise-free history."""
    xs, exps = [], []
    for seed in seeds:
        chan_rng = np.random.default_rng(seed)
        noise_rng = np.random.default_rng([seed, 1])
        x, q = start
        clean = True
        for _ in range(history_blocks):
            out = simulate_block(x, q, ctx, np.zeros(1), chan_rng)
            if out.error != ErrorClass.NONE:
                clean = False
                break
            x, q = out.x_path[-1], out.q_next
        if not clean:
            continue
        assert (x, q.delta_exp) == (-1.5, 1)
        out = simulate_block(x, q, ctx, noise_rng.standard_normal(1),
                             chan_rng)
        xs.append(out.x_path[-1])
        exps.append(out.q_next.delta_exp)
    return np.array(xs), np.array(exps)


def test_sampled_chain_forgets_its_history():
    cfg = config_from_dict(dict(S1, channel={'kind': 'symmetric', 'size': 8,
                                             'eps': 0.3}), environ={})
    ctx = build_context(cfg, build_codebook(cfg))
    # both histories end in (x, Delta) = (-1.5, 2)
    fresh = next_block_states(ctx, (-1.5, QuantizerState(6, 1)), 0,
                              range(0, 3000))
    short = next_block_states(ctx, (0.25, QuantizerState(6, 1)), 1,
                              range(3000, 6000))
    longer = next_block_states(ctx, (4.625, QuantizerState(6, 3)), 2,
                               range(6000, 9000))
    assert len(short[0]) > 1500 and len(longer[0]) > 1000
    for x, exps in (short, longer):
        assert scipy.stats.ks_2samp(fresh[0], x).pvalue > 1e-3
        table = [[np.sum(fresh[1] == 1), np.sum(fresh[1] == 3)],
                 [np.sum(exps == 1), np.sum(exps == 3)]]
        assert set(exps) == {1, 3}
        assert scipy.stats.chi2_contingency(table)[1] > 1e-3


def test_noise_free_error_free_loop_contracts():
    raw = dict(S1, system={'a': 2., 'b': 1., 'noise_std': 0.,
                           'x0_mean': 2.5, 'x0_std': 0.},
               horizon=40, replicas=1)
    cfg = config_from_dict(raw, environ={})
    run = sample_replica(cfg, 0, build_codebook(cfg))
    assert not run.diverged and run.blocks == 40
    assert set(run.errors) == {ErrorClass.NONE}
    K, s = cfg.K[0], cfg.policies[0].s
    h = [zoom_ratio(x, QuantizerState(K, int(e), s))
         for x, e in zip(run.x, run.delta_exps[:, 0])]
    assert max(abs(v) for v in h) <= 1
    assert np.all(np.diff(run.delta_exps[:, 0]) <= 0)
    assert run.delta[-1] == cfg.floor_delta
    assert run.delta[-1] <= 4.


def test_stops_match_perfect_zoom_along_trajectory():
    cfg = config_from_dict(dict(S1, channel={'kind': 'symmetric', 'size': 8,
                                             'eps': 0.02}, horizon=5000),
                           environ={})
    run = sample_replica(cfg, 0, build_codebook(cfg))
    assert not run.diverged
    K, n, s = cfg.K[0], cfg.n, cfg.policies[0].s
    h = np.array([zoom_ratio(x, QuantizerState(K, int(e), s))
                  for x, e in zip(run.x, run.delta_exps[:, 0])])
    log = track_stopping_times(run.x, run.delta, K, n, run.errors)
    stops = log.tau//n
    assert stops[0] == 0
    assert np.all(np.abs(h[stops[1:]]) <= 1)
    between = np.ones(len(h), dtype=bool)
    between[stops] = False
    assert np.all(np.abs(h[between]) > 1)
    assert log.gaps.max() > 1
    assert log.censored_blocks == len(h) - 1 - stops[-1]


def test_scripted_overflow_excursion():
    cfg = config_from_dict(dict(S1, system={'a': 2., 'b': 1.,
                                            'noise_std': 0.},
                                channel={'kind': 'symmetric', 'size': 8,
                                         'eps': 0.3}), environ={})
    cb = build_codebook(cfg)
    ctx = build_context(cfg, cb)
    rng = np.random.default_rng(0)
    z_word = cb.codewords[cb.z_message]
    # a wrong granular decode, three overflow blocks, then a clean block
    script = [cb.codewords[5], z_word, z_word, z_word, None]
    x, q = -22., QuantizerState(6, 3)
    xs, deltas, errors = [x], [q.Delta], []
    for word in script:
        if word is None:
            word = cb.codewords[symbol_to_message(quantize(x, q), q.K)]
        out = simulate_block(x, q, ctx, np.zeros(cfg.n), rng, received=word)
        x, q = out.x_path[-1], out.q_next
        xs.append(x)
        deltas.append(q.Delta)
        errors.append(out.error)
    assert xs == [-22., -84., -168., -336., -672., -64.]
    assert errors == [ErrorClass.TYPE_IA] + [ErrorClass.NONE]*4
    log = track_stopping_times(xs, deltas, 6, cfg.n, errors)
    assert log.tau.tolist() == [0, 4*cfg.n, 5*cfg.n]
    assert log.gap_steps[0] == 4*cfg.n
    first = log.intervals.iloc[0]
    assert first['first_error'] == ErrorClass.TYPE_IA.value
    assert first['n_type_ia'] == 1
    with pytest.raises(ConfigError, match='output alphabet'):
        simulate_block(-22., QuantizerState(6, 3), ctx, np.zeros(1), rng,
                       received=[8])


def test_record_round_trip_and_summary():
    rec = ExperimentRecord('h', 0, 1, [1, 0], 10, 10, False, None, 1., 2.,
                           0.5, 0.01, [1, 10], [1., 2.], 10, 0.9, 3,
                           gap_histogram={1: 2, 4: 1},
                           error_counts={'none': 10})
    d = rec.to_dict()
    assert d['record_type'] == 'replica'
    assert d['gap_histogram'] == {'1': 2, '4': 1}
    assert ExperimentRecord.from_dict(json.loads(json.dumps(d))) == rec

    other = ExperimentRecord('h', 1, 1, [1, 1], 10, 10, False, None, 1., 4.,
                             0.5, 0.2, [1, 10], [1., 4.], 10, 0.7, 2,
                             gap_histogram={1: 1, 2: 1},
                             error_counts={'none': 9, 'I-A': 1},
                             verdicts={'ams': 'consistent with AMS'})
    summary = summarize([rec, other])
    assert summary['record_type'] == 'summary'
    assert summary['cesaro_stable_fraction'] == 0.5
    assert summary['cesaro_x2']['mean'] == 3.
    assert summary['gap_histogram'] == {'1': 3, '2': 1, '4': 1}
    assert summary['error_counts'] == {'none': 19, 'I-A': 1}
    assert summary['verdicts'] == {'ams': {'consistent with AMS': 1}}
    assert 'tail' not in summary


def test_acceptance_criteria():
    summary = {'divergence_rate': 0., 'cesaro_stable_fraction': 0.8,
               'perfect_zoom_fraction': {'mean': 0.4},
               'tail': {'verdict': 'violated', 'violations': [7]}}
    failures = check_acceptance(summary, {
        'max_divergence_rate': 0., 'min_cesaro_stable_fraction': 0.9,
        'min_perfect_zoom_fraction': 0.5, 'tail_consistent': True})
    assert len(failures) == 3
    assert check_acceptance(summary, {}) == []


def test_results_file(tmp_path):
    cfg = config_from_dict(dict(S1, horizon=1000, replicas=2), environ={})
    path = str(tmp_path / 'results.jsonl')
    records = run_experiment(cfg, output=path)
    run_experiment(cfg, output=path)
    back, summaries = read_results(path)
    assert len(back) == 4 and len(summaries) == 2
    assert [as_json(r) for r in back[:2]] == [as_json(r) for r in records]
    assert summaries[0]['replicas'] == 2
    assert summaries[0]['config_hash'] == cfg.config_hash
    with pytest.raises(ResultsWriteError):
        run_experiment(cfg, output=str(tmp_path))


def write_config(tmp_path, raw, name='exp.yaml'):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return str(path)


def test_cli_simulate(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv('ZOOMSTAB_SEED', raising=False)
    config = write_config(tmp_path, dict(S1, horizon=1000))
    out = str(tmp_path / 'out.jsonl')
    assert main(['simulate', config, '--replicas', '1', '--out', out]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary['replicas'] == 1
    assert summary['master_seed'] == 1
    assert main(['simulate', config, '--replicas', '1', '--seed', '4']) == 0
    assert json.loads(capsys.readouterr().out)['master_seed'] == 4

    assert main(['analyze', out]) == 0
    assert json.loads(capsys.readouterr().out)['replicas'] == 1


def test_cli_exit_codes(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv('ZOOMSTAB_SEED', raising=False)
    assert main(['simulate', str(tmp_path / 'missing.yaml')]) == 2
    bad = write_config(tmp_path, dict(S1, quantizer={'n': 1}), 'bad.yaml')
    assert main(['simulate', bad]) == 2
    strict = write_config(tmp_path, dict(S1, horizon=1000, replicas=1,
                                         acceptance={'min_divergence_rate':
                                                     1.}), 'strict.yaml')
    assert main(['simulate', strict]) == 0
    assert main(['simulate', strict, '--assert']) == 3
    assert 'acceptance failed' in capsys.readouterr().err

    assert main(['kappa', '--a', '2', '--delta', '2', '--alpha', '1.5']) == 2
    assert main(['check-conditions', '--a', '2', '--delta', '2', '--alpha',
                 '1', '--kappa', '0.4', '--n', '10', '--pbar',
                 str(math.exp(-2.)), '--mode', 'uniform', '--assert']) == 3


def test_cli_channel_commands(capsys):
    assert main(['capacity', '--bsc', '0.1', '--eigenvalues', '1.2']) == 0
    res = json.loads(capsys.readouterr().out)
    assert res['capacity_bits'] == pytest.approx(0.531, abs=1e-3)
    assert res['threshold']['verdict'] == 'sufficient'
    assert main(['exponent', '--symmetric', '4', '0.05', '--rate',
                 '0.5']) == 0
    assert json.loads(capsys.readouterr().out)['exponent_bits'] > 0.
    assert main(['capacity', '--matrix', '[[0.5, 0.4]]']) == 2
