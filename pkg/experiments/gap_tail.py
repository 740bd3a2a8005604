"""Stop-gap tail of a noisy-channel loop against the geometric bound

This file is part of zoomstab --
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
import os
import sys

import numpy as np

from zoomstab.config import load_config
from zoomstab.experiment import (build_codebook, codebook_error_probabilities,
                                 run_experiment)
from zoomstab.stability import fit_geometric_tail
from zoomstab.stats import GapHistogram

plot = False
savefig = False
fontsize = 17

path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
    os.path.dirname(os.path.abspath(__file__)), 'a6.yaml')
cfg = load_config(path)

print('Example: tail of the stop-gap distribution over a {}-ary channel '
      '({} replicas of {} steps).'.format(cfg.channel.input_size,
                                          cfg.replicas, cfg.horizon))

probs = codebook_error_probabilities(cfg, build_codebook(cfg))
print('Codebook error probabilities ({}):'.format(probs['mode']))
for key in ('Pgg', 'PZg', 'PgZ', 'Pbar'):
    print('  {:5s}{:.4g}'.format(key, probs[key]))

try:
    from schwimmbad import MultiPool
    pool = MultiPool()
except ImportError:
    pool = None
records = run_experiment(cfg, pool=pool, verbosity=1)
if pool is not None:
    pool.close()

hist = GapHistogram()
for r in records:
    hist = hist.merge(GapHistogram.from_dict(r.gap_histogram_large_delta))

res = fit_geometric_tail(hist, probs['PgZ'], cfg.kappa,
                         min_samples=cfg.diagnostics.min_gap_samples,
                         pgg=probs['Pgg'], pzg=probs['PZg'])
print('kappa = {:.4g}, gaps = {}, first bounded gap k = {}'.format(
    cfg.kappa, res['samples'], res['k_min']))
if len(res['tail']):
    print(res['tail'].to_string(index=False))
print('fitted log tail slope {:.4g} (CI {:.4g} .. {:.4g})'.format(
    res['slope'], *res['slope_ci']))
print('verdict: {}'.format(res['verdict']))

if plot:
    import matplotlib
    matplotlib.use('TkAgg')
    import matplotlib.pyplot as plt
    plt.ion()

    tail = res['tail']
    fig = plt.figure(figsize=(6, 4.5))
    plt.step(tail['k'], tail['upper'], where='mid', color='steelblue',
             lw=2, label='empirical (upper limit)')
    plt.plot(tail['k'], tail['empirical'], 'o', color='steelblue',
             ms=4, label='empirical')
    mask = np.isfinite(tail['bound'])
    plt.plot(tail['k'][mask], tail['bound'][mask], 'k--', lw=1.5,
             label='geometric bound')
    plt.yscale('log')
    plt.xlabel('gap k (blocks)', fontsize=fontsize)
    plt.ylabel('P(gap >= k)', fontsize=fontsize)
    plt.legend(loc='upper right', markerfirst=False)
    plt.tight_layout()
    if savefig:
        plt.savefig('gap_tail.pdf')
