"""Test cases for the zoomstab.channel module.

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

from zoomstab.channel import (ChannelHiddenState, DmcModel, ErrorClass,
                              MemoryChannelModel, build_explicit_codebook,
                              build_random_codebook, build_repetition_codebook,
                              build_uncoded_codebook, classify_error,
                              decode_block, decode_table, decode_words,
                              estimate_error_probabilities, output_words,
                              transmit_block, word_index)
from zoomstab.misc import ConfigError


def test_transition_validation():
    with pytest.raises(ConfigError, match='row-stochastic'):
        DmcModel([[0.5, 0.4], [0.1, 0.9]])
    with pytest.raises(ConfigError, match='nonnegative'):
        DmcModel([[1.1, -0.1], [0., 1.]])
    assert DmcModel.erasure(0.2).output_size == 3


def test_sample_frequencies():
    ch = DmcModel.bsc(0.2)
    rng = np.random.default_rng(5)
    out = ch.sample(np.zeros(100000, dtype=int), rng)
    assert abs(out.mean() - 0.2) < 0.005
    noiseless = DmcModel.noiseless(5)
    word = np.array([0, 4, 2, 3])
    assert np.array_equal(noiseless.sample(word, rng), word)


def test_transmit_block_checks_alphabet():
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigError, match='input alphabet'):
        transmit_block(DmcModel.bsc(0.1), [0, 2], rng)


def test_gilbert_elliott_bursts():
    ch = MemoryChannelModel.gilbert_elliott(0.01, 0.1, 0., 0.5)
    assert np.allclose(ch.stationary(), [10/11, 1/11])
    rng = np.random.default_rng(9)
    hidden = ChannelHiddenState()
    flips = np.concatenate([ch.sample(np.zeros(50, dtype=int), rng, hidden)
                            for _ in range(400)])
    # stationary crossover 0.5/11
    assert abs(flips.mean() - 0.5/11) < 0.02
    # errors cluster: a flip is more likely right after a flip
    after_flip = flips[1:][flips[:-1] == 1].mean()
    assert after_flip > 2*flips.mean()
    assert np.allclose(ch.metric().transition,
                       [[1 - 0.5/11, 0.5/11], [0.5/11, 1 - 0.5/11]])


def test_memory_channel_validation():
    with pytest.raises(ConfigError, match='dimension mismatch'):
        MemoryChannelModel([[0.5, 0.5], [0.5, 0.5]], (DmcModel.bsc(0.1),))


def test_classify_error():
    z = 6
    assert classify_error(3, 3, z) == ErrorClass.NONE
    assert classify_error(3, 4, z) == ErrorClass.TYPE_IA
    assert classify_error(3, z, z) == ErrorClass.TYPE_IB
    assert classify_error(z, 0, z) == ErrorClass.TYPE_II


def test_codebook_builders():
    cb = build_uncoded_codebook(7, 1, 8)
    assert cb.codewords[:, 0].tolist() == list(range(7))
    assert cb.z_message == 6
    cb = build_repetition_codebook(3, 4, protected_z=True)
    assert cb.codewords.tolist() == [[0, 0, 0, 0], [1, 1, 1, 1],
                                     [-1, -1, -1, -1]]
    assert cb.transmitted_count == 2
    cb = build_explicit_codebook(['0011', '1100'])
    assert cb.codewords.tolist() == [[0, 0, 1, 1], [1, 1, 0, 0]]
    with pytest.raises(ConfigError, match='distinct'):
        build_explicit_codebook(['01', '01'])
    with pytest.raises(ConfigError, match='do not fit'):
        build_uncoded_codebook(9, 1, 8)
    cb = build_random_codebook(5, 6, [0.5, 0.5], np.random.default_rng(1))
    assert cb.codewords.shape == (5, 6)
    with pytest.raises(ConfigError, match='alphabet'):
        build_uncoded_codebook(7, 1, 8).check_alphabet(DmcModel.bsc(0.1))


def test_ml_decoding_ties_go_to_lowest_index():
    # output 7 of the 8-ary symmetric channel is equally likely under all
    # transmitted messages
    cb = build_uncoded_codebook(7, 1, 8)
    ch = DmcModel.symmetric(8, 0.001)
    assert decode_block(cb, [7], ch) == 0
    assert decode_block(cb, [4], ch) == 4
    # equal Hamming distances reached through different letter orders
    cb = build_explicit_codebook(['0000', '0011', '1100'])
    assert decode_block(cb, [0, 1, 1, 1], DmcModel.bsc(0.1)) == 1
    assert decode_block(cb, [1, 0, 0, 1], DmcModel.bsc(0.1)) == 0
    assert decode_block(cb, [1, 1, 0, 1], DmcModel.bsc(0.1)) == 2


def test_ml_equals_min_distance_on_bsc():
    cb = build_random_codebook(8, 7, [0.5, 0.5], np.random.default_rng(4))
    ch = DmcModel.bsc(0.05)
    words = output_words(ch, 7)
    assert np.array_equal(decode_words(cb, words, ch, 'ml'),
                          decode_words(cb, words, ch, 'min_distance'))


def test_erasure_decoding():
    cb = build_repetition_codebook(2, 3)
    ch = DmcModel.erasure(0.3)
    assert decode_block(cb, [2, 1, 2], ch) == 1
    assert decode_block(cb, [2, 2, 2], ch) == 0
    res = estimate_error_probabilities(cb, ch)
    # only the all-erased word confuses message 1
    assert np.isclose(res['Pbar'], 0.3**3)


def test_decode_table_layout():
    cb = build_repetition_codebook(2, 3)
    ch = DmcModel.bsc(0.1)
    table = decode_table(cb, ch)
    assert len(table) == 8
    assert table[word_index([1, 1, 0], 2)] == 1
    assert table[word_index([0, 0, 1], 2)] == 0
    assert word_index([1, 0, 0], 2) == 4


def test_output_word_limit():
    with pytest.raises(ConfigError, match='monte_carlo'):
        output_words(DmcModel.bsc(0.1), 21)


def test_exact_error_probabilities_symmetric_channel():
    eps = 0.001
    cb = build_uncoded_codebook(7, 1, 8)
    res = estimate_error_probabilities(cb, DmcModel.symmetric(8, eps))
    assert np.isclose(res['Pgg'], 6*eps/7)
    assert np.isclose(res['PZg'], eps/7)
    assert np.isclose(res['PgZ'], eps)
    assert np.isclose(res['Pbar'], eps)
    assert list(res['rows']['kind']) == ['granular']*6 + ['Z']
    assert np.allclose(res['confusion'].sum(axis=1), 1.)


def test_protected_overflow():
    cb = build_repetition_codebook(3, 3, protected_z=True)
    res = estimate_error_probabilities(cb, DmcModel.bsc(0.1))
    assert res['PZg'] == 0. and res['PgZ'] == 0.
    assert np.isclose(res['Pbar'], 0.028)
    assert np.all(decode_table(cb, DmcModel.bsc(0.1)) < 2)


@pytest.mark.parametrize('mode', ['exact', 'monte_carlo'])
def test_protected_overflow_rules_out_granular_to_z(mode):
    cb = build_explicit_codebook(['000', '011', '101', '110'],
                                 protected_z=True)
    ch = DmcModel.bsc(0.2)
    res = estimate_error_probabilities(cb, ch, mode, trials=5000,
                                       rng=np.random.default_rng(5))
    rows = res['rows']
    granular = rows['kind'] == 'granular'
    assert res['PZg'] == 0.
    assert np.all(rows['p_to_z'][granular] == 0.)
    assert rows['p_correct'][~granular].tolist() == [1.]
    assert res['Pgg'] > 0.
    table = decode_table(cb, ch)
    outcomes = {classify_error(m, int(d), cb.z_message)
                for m in range(cb.transmitted_count) for d in table}
    assert outcomes == {ErrorClass.NONE, ErrorClass.TYPE_IA}


def test_monte_carlo_agrees_with_exact():
    cb = build_repetition_codebook(2, 3)
    ch = DmcModel.bsc(0.1)
    exact = estimate_error_probabilities(cb, ch)
    mc = estimate_error_probabilities(cb, ch, 'monte_carlo', trials=20000,
                                      rng=np.random.default_rng(8))
    lo, hi = mc['ci']['Pbar']
    assert lo < mc['Pbar'] < hi
    assert abs(mc['Pbar'] - exact['Pbar']) < 0.005
    assert mc['trials'] == 20000


def test_monte_carlo_memory_channel():
    cb = build_repetition_codebook(2, 5)
    ch = MemoryChannelModel.gilbert_elliott(0.05, 0.2, 0.01, 0.3)
    with pytest.raises(ConfigError, match='memoryless'):
        estimate_error_probabilities(cb, ch)
    res = estimate_error_probabilities(cb, ch, 'monte_carlo', trials=2000,
                                       rng=np.random.default_rng(2))
    assert 0. <= res['Pbar'] < 0.2
