"""Discrete channels, block codebooks and decoding errors.

This module is part of zoomstab --
Adaptive zoom quantized control over noisy channels

Copyright 2026 The zoomstab developers

Channel messages are integers ``0..M-1``; the last message ``M-1`` is the
overflow symbol Z and the others are the granular messages.
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
import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import pandas as pd

from zoomstab.misc import ConfigError
from zoomstab.stats import wilson_interval

STOCHASTIC_TOL = 1e-12
MAX_OUTPUT_WORDS = 2**20
TIE_TOL = 1e-9


def _validate_stochastic(P, name):
    violations = []
    if P.ndim != 2 or P.size == 0:
        violations.append('{} must be a non-empty 2d matrix'.format(name))
    elif np.any(~np.isfinite(P)) or np.any(P < 0):
        violations.append('{} must have finite nonnegative entries'.format(
            name))
    elif np.any(np.abs(P.sum(axis=1) - 1) > STOCHASTIC_TOL):
        violations.append('{} must be row-stochastic (row sums {})'.format(
            name, P.sum(axis=1).tolist()))
    return violations


@dataclass(frozen=True)
class DmcModel:
    """Discrete memoryless channel with transition matrix ``P[q, q']``.

    Examples
    --------
    >>> ch = DmcModel.bsc(0.1)
    >>> ch.input_size, ch.output_size
    (2, 2)
    """
    transition: np.ndarray

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        violations = _validate_stochastic(P, 'channel transition matrix')
        if violations:
            raise ConfigError(violations)
        P.setflags(write=False)
        object.__setattr__(self, 'transition', P)

    @classmethod
    def bsc(cls, eps):
        """Binary symmetric channel with crossover probability `eps`."""
        return cls([[1 - eps, eps], [eps, 1 - eps]])

    @classmethod
    def erasure(cls, eps):
        """Binary erasure channel; output 2 is the erasure."""
        return cls([[1 - eps, 0., eps], [0., 1 - eps, eps]])

    @classmethod
    def noiseless(cls, k=2):
        return cls(np.identity(k))

    @classmethod
    def symmetric(cls, k, eps):
        """k-ary symmetric channel: wrong symbols share `eps` uniformly."""
        P = np.full((k, k), eps/(k - 1))
        np.fill_diagonal(P, 1 - eps)
        return cls(P)

    @classmethod
    def from_matrix(cls, matrix):
        return cls(np.asarray(matrix, dtype=float))

    @property
    def input_size(self):
        return self.transition.shape[0]

    @property
    def output_size(self):
        return self.transition.shape[1]

    @cached_property
    def log_transition(self):
        with np.errstate(divide='ignore'):
            return np.log(self.transition)

    @cached_property
    def _cdf(self):
        cdf = np.cumsum(self.transition, axis=1)
        cdf[:, -1] = 1.
        return cdf

    def sample(self, word, rng):
        """Pass `word` through the channel, one independent use per letter."""
        word = np.asarray(word, dtype=int)
        u = rng.random(word.shape)
        return (u[..., None] < self._cdf[word]).argmax(axis=-1)

    def metric(self):
        return self


@dataclass
class ChannelHiddenState:
    """Hidden state of a channel with memory, owned by one trajectory."""
    state: int = None


@dataclass(frozen=True)
class MemoryChannelModel:
    """Finite-state channel: a Markov chain selecting a DMC per use.

    Parameters
    ----------
    state_transition : array_like
        S x S row-stochastic matrix of the hidden chain.
    channels : sequence of DmcModel
        One memoryless channel per hidden state, sharing alphabets.
    """
    state_transition: np.ndarray
    channels: tuple

    def __post_init__(self):
        T = np.array(self.state_transition, dtype=float)
        channels = tuple(self.channels)
        violations = _validate_stochastic(T, 'hidden-state transition matrix')
        if not violations and T.shape[0] != T.shape[1]:
            violations.append('hidden-state transition matrix must be square')
        if not violations and T.shape[0] != len(channels):
            violations.append('dimension mismatch: {} hidden states but {} '
                              'channels'.format(T.shape[0], len(channels)))
        if len({c.transition.shape for c in channels}) > 1:
            violations.append('per-state channels must share alphabets')
        if violations:
            raise ConfigError(violations)
        T.setflags(write=False)
        object.__setattr__(self, 'state_transition', T)
        object.__setattr__(self, 'channels', channels)

    @classmethod
    def gilbert_elliott(cls, p_gb, p_bg, eps_good, eps_bad):
        """Two-state burst channel with BSC(eps_good) and BSC(eps_bad).

        Examples
        --------
        >>> ch = MemoryChannelModel.gilbert_elliott(0.1, 0.3, 0.0, 0.5)
        >>> ch.stationary().round(3).tolist()
        [0.75, 0.25]
        """
        T = [[1 - p_gb, p_gb], [p_bg, 1 - p_bg]]
        return cls(T, (DmcModel.bsc(eps_good), DmcModel.bsc(eps_bad)))

    @property
    def input_size(self):
        return self.channels[0].input_size

    @property
    def output_size(self):
        return self.channels[0].output_size

    def stationary(self):
        """Stationary law of the hidden chain."""
        T = self.state_transition
        S = T.shape[0]
        A = np.vstack([T.T - np.identity(S), np.ones(S)])
        rhs = np.zeros(S + 1)
        rhs[-1] = 1.
        pi = np.linalg.lstsq(A, rhs, rcond=None)[0]
        pi = np.clip(pi, 0., None)
        return pi/pi.sum()

    def metric(self):
        """Memoryless channel used as the decoding metric (stationary mix)."""
        pi = self.stationary()
        return DmcModel(sum(p*c.transition for p, c in zip(pi,
                                                            self.channels)))

    def sample(self, word, rng, hidden=None):
        if hidden is None:
            hidden = ChannelHiddenState()
        if hidden.state is None:
            hidden.state = int(rng.choice(len(self.channels),
                                          p=self.stationary()))
        out = np.empty(len(word), dtype=int)
        for t, q in enumerate(word):
            out[t] = self.channels[hidden.state].sample([q], rng)[0]
            hidden.state = int(rng.choice(
                len(self.channels), p=self.state_transition[hidden.state]))
        return out


def transmit_block(ch, word, rng, hidden=None):
    """Send one input word through the channel.

    Parameters
    ----------
    ch : DmcModel or MemoryChannelModel
    word : array_like of int
        Input letters.
    rng : numpy.random.Generator
    hidden : ChannelHiddenState, optional
        Hidden state of a channel with memory; advanced in place. A fresh
        stationary draw is used when omitted.

    Raises
    ------
    ConfigError
        If a letter is outside the input alphabet.

    Examples
    --------
    >>> rng = np.random.default_rng(0)
    >>> transmit_block(DmcModel.bsc(1.), [0, 1, 1], rng).tolist()
    [1, 0, 0]
    """
    word = np.asarray(word, dtype=int)
    if np.any(word < 0) or np.any(word >= ch.input_size):
        raise ConfigError('symbol outside the channel input alphabet of size '
                          '{}: {}'.format(ch.input_size, word.tolist()))
    if isinstance(ch, MemoryChannelModel):
        return ch.sample(word, rng, hidden)
    return ch.sample(word, rng)


class ErrorClass(enum.Enum):
    NONE = 'none'
    TYPE_IA = 'I-A'
    TYPE_IB = 'I-B'
    TYPE_II = 'II'


def classify_error(sent, decoded, z_message):
    """Classify a decoding outcome.

    Examples
    --------
    >>> classify_error(2, 2, 6), classify_error(2, 6, 6)
    (<ErrorClass.NONE: 'none'>, <ErrorClass.TYPE_IB: 'I-B'>)
    >>> classify_error(6, 1, 6), classify_error(1, 3, 6)
    (<ErrorClass.TYPE_II: 'II'>, <ErrorClass.TYPE_IA: 'I-A'>)
    """
    if sent == decoded:
        return ErrorClass.NONE
    if sent == z_message:
        return ErrorClass.TYPE_II
    if decoded == z_message:
        return ErrorClass.TYPE_IB
    return ErrorClass.TYPE_IA


@dataclass(frozen=True)
class BlockCodebook:
    """Map from the messages ``0..M-1`` to input words of length ``n``.

    With `protected_z` the overflow message (last row, filled with -1) is
    delivered noiselessly on a side channel and decoding of transmitted
    words never returns it.
    """
    codewords: np.ndarray
    protected_z: bool = False

    def __post_init__(self):
        cw = np.atleast_2d(np.array(self.codewords, dtype=int))
        if cw.shape[0] < 2:
            raise ConfigError('a codebook needs at least two messages')
        if np.any(cw[:self.transmitted_count] < 0):
            raise ConfigError('codeword letters must be nonnegative')
        cw.setflags(write=False)
        object.__setattr__(self, 'codewords', cw)

    @property
    def n(self):
        return self.codewords.shape[1]

    @property
    def message_count(self):
        return self.codewords.shape[0]

    @property
    def z_message(self):
        return self.message_count - 1

    @property
    def transmitted_count(self):
        """Number of messages whose codewords go through the channel."""
        return len(self.codewords) - 1 if self.protected_z else \
            len(self.codewords)

    def check_alphabet(self, ch):
        cw = self.codewords[:self.transmitted_count]
        if np.any(cw >= ch.input_size):
            raise ConfigError('codeword letters exceed the channel input '
                              'alphabet of size {}'.format(ch.input_size))


def _with_protected_row(words, protected_z):
    words = np.atleast_2d(np.asarray(words, dtype=int))
    if protected_z:
        words = np.vstack([words, np.full(words.shape[1], -1)])
    return words


def _check_distinct(words, what):
    if len(np.unique(words, axis=0)) != len(words):
        raise ConfigError('{} codewords must be distinct'.format(what))


def build_random_codebook(message_count, n, input_dist, rng,
                          protected_z=False):
    """Codebook with i.i.d. letters drawn from `input_dist`.

    Examples
    --------
    >>> cb = build_random_codebook(2, 1, [1., 0.], np.random.default_rng(3))
    >>> cb.codewords.tolist()
    [[0], [0]]
    """
    if message_count < 2:
        raise ConfigError('a codebook needs at least two messages')
    p = np.asarray(input_dist, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1) > STOCHASTIC_TOL:
        raise ConfigError('codebook input distribution must be a probability '
                          'vector')
    coded = message_count - 1 if protected_z else message_count
    words = rng.choice(p.size, size=(coded, n), p=p)
    return BlockCodebook(_with_protected_row(words, protected_z), protected_z)


def build_repetition_codebook(message_count, n, protected_z=False):
    """Message ``m`` is the letter ``m`` repeated ``n`` times."""
    coded = message_count - 1 if protected_z else message_count
    words = np.repeat(np.arange(coded)[:, None], n, axis=1)
    return BlockCodebook(_with_protected_row(words, protected_z), protected_z)


def build_uncoded_codebook(message_count, n, alphabet_size,
                           protected_z=False):
    """Messages written in base `alphabet_size` with ``n`` digits.

    Examples
    --------
    >>> build_uncoded_codebook(3, 2, 2).codewords.tolist()
    [[0, 0], [0, 1], [1, 0]]
    """
    coded = message_count - 1 if protected_z else message_count
    if coded > alphabet_size**n:
        raise ConfigError('{} messages do not fit into {} words of length {} '
                          'over an alphabet of size {}'.format(
                              coded, alphabet_size**n, n, alphabet_size))
    words = np.array(np.unravel_index(np.arange(coded),
                                      (alphabet_size,)*n)).T
    return BlockCodebook(_with_protected_row(words, protected_z), protected_z)


def build_explicit_codebook(words, protected_z=False):
    """Codebook from explicit words, e.g. ``['000', '111']``.

    Without `protected_z` the last word is the overflow codeword.
    """
    rows = [[int(c) for c in w] if isinstance(w, str) else list(w)
            for w in words]
    if len({len(r) for r in rows}) != 1:
        raise ConfigError('explicit codewords must all have the same length')
    rows = np.array(rows, dtype=int)
    _check_distinct(rows, 'explicit')
    return BlockCodebook(_with_protected_row(rows, protected_z), protected_z)


def _loglik(cb, words, ch):
    """Log-likelihoods of the transmitted messages, shape (len(words), M')."""
    logW = ch.metric().log_transition
    cw = cb.codewords[:cb.transmitted_count]
    words = np.atleast_2d(words)
    ll = np.zeros((words.shape[0], cw.shape[0]))
    for t in range(cb.n):
        ll += logW[cw[:, t]][:, words[:, t]].T
    return ll


def _distance(cb, words):
    cw = cb.codewords[:cb.transmitted_count]
    words = np.atleast_2d(words)
    return (words[:, None, :] != cw[None, :, :]).sum(axis=-1)


def decode_words(cb, words, ch, rule='ml'):
    """Decode many received words at once (rows of `words`)."""
    if rule == 'ml':
        ll = _loglik(cb, words, ch)
        best = ll.max(axis=1, keepdims=True)
        # sums over the same letters in another order may differ in the ulp
        near = ll >= best - TIE_TOL*(1 + np.abs(best))
        return np.argmax(near, axis=1)
    elif rule == 'min_distance':
        return np.argmin(_distance(cb, words), axis=1)
    raise ConfigError('unknown decoding rule {!r}; use "ml" or '
                      '"min_distance"'.format(rule))


def decode_block(cb, received, ch, rule='ml'):
    """Decode one received word.

    The maximum-likelihood rule accumulates log-likelihoods letter by letter
    and breaks ties towards the lowest message index.

    Examples
    --------
    >>> cb = build_repetition_codebook(2, 3)
    >>> decode_block(cb, [0, 1, 0], DmcModel.bsc(0.1))
    0
    """
    received = np.asarray(received, dtype=int)
    if received.shape != (cb.n,):
        raise ConfigError('received word must have length {}'.format(cb.n))
    return int(decode_words(cb, received[None, :], ch, rule)[0])


def output_words(ch, n):
    """All output words of length `n`, first letter most significant."""
    q = ch.output_size
    if q**n > MAX_OUTPUT_WORDS:
        raise ConfigError('{}**{} output words exceed the enumeration limit '
                          'of {}; use monte_carlo mode'.format(
                              q, n, MAX_OUTPUT_WORDS))
    return np.indices((q,)*n).reshape(n, -1).T


def word_index(word, q):
    return int(np.ravel_multi_index(tuple(int(y) for y in word),
                                    (q,)*len(word)))


def decode_table(cb, ch, rule='ml'):
    """Decoded message for every output word, indexed by `word_index`."""
    return decode_words(cb, output_words(ch, cb.n), ch, rule)


def _summarize_confusion(conf, z):
    granular = np.arange(conf.shape[0]) != z
    off = conf.copy()
    np.fill_diagonal(off, 0.)
    to_granular = off[:, granular].sum(axis=1)
    to_z = off[:, z]
    error = 1 - np.diag(conf)
    rows = pd.DataFrame({
        'message': np.arange(conf.shape[0]),
        'kind': np.where(granular, 'granular', 'Z'),
        'p_correct': np.diag(conf),
        'p_to_granular': to_granular,
        'p_to_z': to_z,
        'p_error': error})
    probs = {
        'Pgg': float(np.max(to_granular[granular])),
        'PZg': float(np.max(to_z[granular])),
        'PgZ': float(to_granular[z]),
        'Pbar': float(np.max(error))}
    return probs, rows


def estimate_error_probabilities(cb, ch, mode='exact', trials=10000, rng=None,
                                 rule='ml', confidence=0.95):
    """Error probabilities of a codebook over a channel.

    Parameters
    ----------
    cb : BlockCodebook
    ch : DmcModel or MemoryChannelModel
    mode : {'exact', 'monte_carlo'}
        'exact' sums the product law over all output words (memoryless
        channels only); 'monte_carlo' sends each codeword `trials` times.
    trials : int
        Transmissions per message in Monte Carlo mode.
    rng : numpy.random.Generator, optional
    rule : {'ml', 'min_distance'}
    confidence : float
        Level of the Wilson intervals reported in Monte Carlo mode.

    Returns
    -------
    dict
        ``Pgg`` (granular to other granular), ``PZg`` (granular to Z), ``PgZ``
        (Z to granular), ``Pbar`` (largest error of any message), ``rows``
        (per-message pandas.DataFrame), ``confusion`` and, in Monte Carlo
        mode, ``ci`` with Wilson intervals of the maximizing messages.

    Examples
    --------
    >>> res = estimate_error_probabilities(build_repetition_codebook(2, 3),
    ...                                    DmcModel.bsc(0.1))
    >>> round(res['Pbar'], 12)
    0.028
    """
    cb.check_alphabet(ch)
    M, z = cb.message_count, cb.z_message
    coded = cb.transmitted_count
    conf = np.zeros((M, M))
    if cb.protected_z:
        conf[z, z] = 1.

    if mode == 'exact':
        if isinstance(ch, MemoryChannelModel):
            raise ConfigError('exact mode needs a memoryless channel; use '
                              'monte_carlo mode for channels with memory')
        words = output_words(ch, cb.n)
        decoded = decode_words(cb, words, ch, rule)
        logW = ch.log_transition
        for m in range(coded):
            logp = np.zeros(len(words))
            for t in range(cb.n):
                logp += logW[cb.codewords[m, t], words[:, t]]
            conf[m, :coded] = np.bincount(decoded, weights=np.exp(logp),
                                          minlength=coded)
        probs, rows = _summarize_confusion(conf, z)
        probs.update(mode='exact', rows=rows, confusion=conf)
        return probs

    elif mode == 'monte_carlo':
        if rng is None:
            rng = np.random.default_rng()
        try:
            table = decode_table(cb, ch, rule)
        except ConfigError:
            table = None
        for m in range(coded):
            word = cb.codewords[m]
            if isinstance(ch, MemoryChannelModel):
                out = np.array([ch.sample(word, rng) for _ in range(trials)])
            else:
                out = ch.sample(np.tile(word, (trials, 1)), rng)
            if table is not None:
                idx = np.ravel_multi_index(tuple(out.T),
                                           (ch.output_size,)*cb.n)
                decoded = table[idx]
            else:
                decoded = decode_words(cb, out, ch, rule)
            conf[m, :coded] = np.bincount(decoded, minlength=coded)/trials
        probs, rows = _summarize_confusion(conf, z)
        n_trials = np.where(cb.protected_z & (rows['kind'] == 'Z'),
                            np.inf, trials)
        lo, hi = wilson_interval(np.round(rows['p_error']*trials), trials,
                                 confidence)
        rows['ci_low'] = np.where(np.isinf(n_trials), 0., lo)
        rows['ci_high'] = np.where(np.isinf(n_trials), 0., hi)
        granular = rows['kind'] == 'granular'
        ci = {}
        for key, col, sel in [('Pgg', 'p_to_granular', granular),
                              ('PZg', 'p_to_z', granular),
                              ('PgZ', 'p_to_granular', ~granular),
                              ('Pbar', 'p_error', rows['kind'].notna())]:
            i = rows.loc[sel, col].idxmax()
            if np.isinf(n_trials[i]):
                ci[key] = (0., 0.)
            else:
                ci[key] = wilson_interval(round(rows.loc[i, col]*trials),
                                          trials, confidence)
        probs.update(mode='monte_carlo', rows=rows, confusion=conf, ci=ci,
                     trials=trials)
        return probs

    raise ConfigError('unknown estimation mode {!r}; use "exact" or '
                      '"monte_carlo"'.format(mode))
