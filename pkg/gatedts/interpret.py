################################################################################
# Copyright (c) 2021-2025, National Research Foundation (SARAO)
#
# Licensed under the BSD 3-Clause License (the "License"); you may not use
# this file except in compliance with the License. You may obtain a copy
# of the License at
#
#   https://opensource.org/licenses/BSD-3-Clause
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
################################################################################

"""Interpretability analyses and exports.

The attention maps of a trained network can be compared with simple
distance matrices of the input series. Channel tower attention sits next
to a matrix of dynamic time warping (DTW) distances between channels, and
step tower attention sits next to a matrix of Euclidean distances between
time steps (the cross-sections of all channels at each step). All exports
are CSV files with a JSON manifest, aligned so that row and column n
always refer to the same channel or time step.

"""

import os
import json
import logging

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .tensor import no_grad
from .dataset import MTSSample, batchify

logger = logging.getLogger(__name__)

DISTANCE_KINDS = ('dtw-channel', 'euclid-step')


class DistanceMatrix(object):
    """Symmetric matrix of non-negative distances with zero diagonal.

    Parameters
    ----------
    kind : {'dtw-channel', 'euclid-step'}
        Distance between channels (DTW) or time steps (Euclidean)
    values : array of float, shape (n, n)
        Distances

    Raises
    ------
    ValueError
        If the matrix is not a valid distance matrix

    """
    def __init__(self, kind, values):
        if kind not in DISTANCE_KINDS:
            raise ValueError('Unknown distance kind %r, expected one of %s' % (kind, DISTANCE_KINDS))
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError('Distance matrix should be square, not shape %s' % (values.shape,))
        if (values < 0).any() or (np.diag(values) != 0).any() or \
                not np.allclose(values, values.T, rtol=0, atol=1e-9):
            raise ValueError('Matrix is not symmetric, non-negative and zero on the diagonal')
        self.kind = kind
        self.values = values

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return "<gatedts.DistanceMatrix %s n=%d at 0x%x>" % (self.kind, len(self), id(self))


def dtw(a, b):
    """Dynamic time warping distance between two univariate series.

    The accumulated cost D(i, j) = |a_i - b_j| + min(D(i-1, j), D(i, j-1),
    D(i-1, j-1)) is evaluated over the full grid (no warping window, no
    normalisation by path length).

    Parameters
    ----------
    a, b : sequence of float
        Non-empty series

    Returns
    -------
    distance : float
        Accumulated cost D(len(a), len(b)) of the cheapest warping path

    Raises
    ------
    ValueError
        If either series is empty

    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if len(a) == 0 or len(b) == 0:
        raise ValueError('DTW needs non-empty series, got lengths %d and %d' % (len(a), len(b)))
    cost = cdist(a[:, np.newaxis], b[:, np.newaxis], 'cityblock')
    acc = np.full((len(a) + 1, len(b) + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(len(a)):
        for j in range(len(b)):
            acc[i + 1, j + 1] = cost[i, j] + min(acc[i, j + 1], acc[i + 1, j], acc[i, j])
    return float(acc[-1, -1])


def _as_values(sample, true_len=None):
    if isinstance(sample, MTSSample):
        return sample.values
    values = np.asarray(sample, dtype=np.float64)
    return values if true_len is None else values[:true_len]


def channel_dtw_matrix(sample, true_len=None):
    """Pairwise DTW distances between the channels of a series.

    Parameters
    ----------
    sample : :class:`MTSSample` or array of float, shape (T, C)
        Series (only the first `true_len` steps of an array are used)
    true_len : int, optional
        Number of real time steps of a padded array

    Returns
    -------
    matrix : :class:`DistanceMatrix` object
        C x C matrix of kind 'dtw-channel'

    """
    values = _as_values(sample, true_len)
    n_channels = values.shape[1]
    dist = np.zeros((n_channels, n_channels))
    for i in range(n_channels):
        for j in range(i + 1, n_channels):
            dist[i, j] = dist[j, i] = dtw(values[:, i], values[:, j])
    return DistanceMatrix('dtw-channel', dist)


def step_euclid_matrix(sample, true_len=None):
    """Pairwise Euclidean distances between the time steps of a series.

    Entry (s, t) is the L2 distance between the C-dimensional cross-sections
    of the series at steps s and t.
    """
    values = _as_values(sample, true_len)
    return DistanceMatrix('euclid-step', squareform(pdist(values, 'euclidean')))

# --------------------------------------------------------------------------------------------------
# --- Gate statistics
# --------------------------------------------------------------------------------------------------


class GateStats(object):
    """Gate weights of a collection of series.

    Parameters
    ----------
    pairs : array of float, shape (N, 2)
        Gate weights (g1, g2) per series, each pair summing to 1

    Attributes
    ----------
    mean : tuple of float
        Average gate pair (g1 averaged, g2 as its complement)

    """
    def __init__(self, pairs):
        self.pairs = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
        if not len(self.pairs):
            raise ValueError('Gate statistics need at least one gate pair')
        g1 = float(self.pairs[:, 0].mean())
        self.mean = (g1, 1.0 - g1)

    def __len__(self):
        return len(self.pairs)

    def __repr__(self):
        return "<gatedts.GateStats samples=%d mean=(%.4f, %.4f) at 0x%x>" % \
               ((len(self),) + self.mean + (id(self),))

    def todict(self):
        return {'n_samples': len(self), 'mean_g1': self.mean[0], 'mean_g2': self.mean[1]}


def gate_stats(model, samples, batch_size=16):
    """Gate weights of a gated network on a collection of series.

    Parameters
    ----------
    model : :class:`gatedts.GatedTransformer` object
        Model of the 'gated' variant
    samples : sequence of :class:`MTSSample`
        Series (e.g. one split of a dataset)

    Returns
    -------
    stats : :class:`GateStats` object
        Per-series gate pairs (in input order) and their mean

    Raises
    ------
    ValueError
        If the model has no gate

    """
    if model.config.variant != 'gated':
        raise ValueError('Model variant %r has no gate' % (model.config.variant,))
    pairs = []
    with no_grad():
        for batch in batchify(samples, batch_size):
            pairs.append(model.forward(batch)[1].gate_weights)
    stats = GateStats(np.concatenate(pairs))
    logger.info('Average gate weights over %d series: (%.4f, %.4f)', len(stats), *stats.mean)
    return stats


def export_gate_stats(stats, out_dir):
    """Write per-series gate weights (gate_weights.csv) and their mean (gate_stats.json)."""
    _makedirs(out_dir)
    rows = np.column_stack([np.arange(len(stats)), stats.pairs])
    np.savetxt(os.path.join(out_dir, 'gate_weights.csv'), rows, fmt=['%d', '%.17g', '%.17g'],
               delimiter=',', header='sample,g1,g2', comments='')
    with open(os.path.join(out_dir, 'gate_stats.json'), 'w') as json_file:
        json.dump(stats.todict(), json_file, sort_keys=True, indent=2)
        json_file.write('\n')

# --------------------------------------------------------------------------------------------------
# --- Exports
# --------------------------------------------------------------------------------------------------


def _makedirs(path):
    if not os.path.isdir(path):
        os.makedirs(path)


def _save_matrix(out_dir, filename, matrix):
    np.savetxt(os.path.join(out_dir, filename), matrix, fmt='%.17g', delimiter=',')
    return filename


def export_attention(model, sample, out_dir, sample_id=0):
    """Export attention maps and distance matrices of one series.

    For each tower and encoder layer this writes the head-averaged attention
    map and the map of every head. The channel DTW and step Euclidean
    distance matrices of the input series complete the comparison. A
    manifest (attention.json) lists every file with its sample id, tower,
    layer and head.

    Parameters
    ----------
    model : :class:`gatedts.GatedTransformer` object
        Model (evaluated without dropout)
    sample : :class:`MTSSample` object
        Series to analyse
    out_dir : string
        Output directory (created if needed)
    sample_id : int, optional
        Identifier of the series, recorded in the manifest

    Returns
    -------
    manifest : list of dict
        One entry per file written

    """
    _makedirs(out_dir)
    with no_grad():
        _, record = model.forward_sample(sample)
    manifest = []
    for tower, attention in (('channel', record.channel_attention), ('step', record.step_attention)):
        if attention is None:
            continue
        for layer, heads in enumerate(attention):
            filename = _save_matrix(out_dir, 'attention_%s_layer%d_mean.csv' % (tower, layer), heads.mean(axis=0))
            manifest.append({'file': filename, 'kind': 'attention', 'tower': tower,
                             'layer': layer, 'head': 'mean'})
            for head, matrix in enumerate(heads):
                filename = _save_matrix(out_dir, 'attention_%s_layer%d_head%d.csv' % (tower, layer, head), matrix)
                manifest.append({'file': filename, 'kind': 'attention', 'tower': tower,
                                 'layer': layer, 'head': head})
    for matrix, filename, tower in ((channel_dtw_matrix(sample), 'dtw_channel.csv', 'channel'),
                                    (step_euclid_matrix(sample), 'euclid_step.csv', 'step')):
        _save_matrix(out_dir, filename, matrix.values)
        manifest.append({'file': filename, 'kind': matrix.kind, 'tower': tower, 'layer': None, 'head': None})
    for entry in manifest:
        entry['sample_id'] = sample_id
    with open(os.path.join(out_dir, 'attention.json'), 'w') as json_file:
        json.dump(manifest, json_file, sort_keys=True, indent=2)
        json_file.write('\n')
    logger.info('Exported %d attention and distance matrices of sample %d to %s',
                len(manifest), sample_id, out_dir)
    return manifest


def export_embeddings(model, samples, out_dir, sample_ids=None, batch_size=16):
    """Export step embeddings and classifier input features of series.

    This writes embeddings.csv with one row per real time step (columns
    sample, step, label, e_0, ..., e_{d-1}) and features.csv with one row
    per series (columns sample, label, f_0, ...), where the features are the
    fused (post-gate for the gated variant) vectors that feed the classifier.
    Projection to two dimensions is left to external tools.

    Parameters
    ----------
    model : :class:`gatedts.GatedTransformer` object
        Model (evaluated without dropout)
    samples : :class:`MTSSample` or sequence of :class:`MTSSample`
        Series to export
    out_dir : string
        Output directory (created if needed)
    sample_ids : sequence of int, optional
        Identifiers of series (their position by default)

    Returns
    -------
    filenames : list of string
        Files written (embeddings.csv is skipped for variants without step tower)

    """
    if isinstance(samples, MTSSample):
        samples = [samples]
    samples = list(samples)
    sample_ids = np.arange(len(samples)) if sample_ids is None else np.asarray(sample_ids)
    _makedirs(out_dir)
    embeddings, features = [], []
    with no_grad():
        for batch in batchify(samples, batch_size):
            _, record = model.forward(batch)
            for n, index in enumerate(batch.indices):
                single = record[n]
                label, ident = samples[index].label, sample_ids[index]
                if single.embedding_outputs is not None:
                    steps = np.arange(single.true_lens)
                    embeddings.append(np.column_stack([np.full(len(steps), ident), steps,
                                                       np.full(len(steps), label), single.embedding_outputs]))
                features.append(np.concatenate([[ident, label], single.fused_features]))
    filenames = []
    if embeddings:
        width = embeddings[0].shape[1] - 3
        header = ','.join(['sample', 'step', 'label'] + ['e_%d' % (n,) for n in range(width)])
        np.savetxt(os.path.join(out_dir, 'embeddings.csv'), np.vstack(embeddings),
                   fmt=['%d', '%d', '%d'] + ['%.17g'] * width, delimiter=',', header=header, comments='')
        filenames.append('embeddings.csv')
    width = len(features[0]) - 2
    header = ','.join(['sample', 'label'] + ['f_%d' % (n,) for n in range(width)])
    np.savetxt(os.path.join(out_dir, 'features.csv'), np.vstack(features),
               fmt=['%d', '%d'] + ['%.17g'] * width, delimiter=',', header=header, comments='')
    filenames.append('features.csv')
    logger.info('Exported embeddings and features of %d series to %s', len(samples), out_dir)
    return filenames
