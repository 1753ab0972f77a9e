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

"""Gated transformer network for multivariate time-series classification.

The network embeds a series (T steps x C channels) twice. The step tower
treats every time step as a token (a fully connected embedding followed by
tanh and a sinusoidal positional encoding), while the channel tower treats
every channel's whole series as a token (no positional encoding). Each tower
is a stack of post-norm transformer encoder layers, and a fully connected
layer with tanh reduces each tower output to a feature vector, C for the
channel tower and S for the step tower. A learned two-way softmax gate
weighs the two features before they are concatenated and classified.

The ablation variants of :class:`gatedts.ModelConfig` remove one tower,
replace the gate by plain concatenation or add causal masks.

"""

import logging

import numpy as np

from .tensor import DimensionError, Tensor, concat, no_grad
from .functional import linear
from .rng import Rng
from .model import Parameter, Model, BadModelFile, read_checkpoint
from .config import ModelConfig, ConfigError
from .layers import (embed_step, embed_channel, causal_mask, attention_mask,
                     encoder_tower, tower_feature, gate_merge)
from .dataset import Batch, MTSSample, batchify

logger = logging.getLogger(__name__)

TOWERS = ('step', 'channel')


def _layer_params(prefix, d_model, d_ff):
    """Parameters of one encoder layer."""
    return [
        Parameter(prefix + 'W_Q', (d_model, d_model), 'Query projection'),
        Parameter(prefix + 'W_K', (d_model, d_model), 'Key projection'),
        Parameter(prefix + 'W_V', (d_model, d_model), 'Value projection'),
        Parameter(prefix + 'W_O', (d_model, d_model), 'Output projection of concatenated heads'),
        Parameter(prefix + 'ln1_gamma', (d_model,), 'Attention sublayer norm gain', 'ones'),
        Parameter(prefix + 'ln1_beta', (d_model,), 'Attention sublayer norm bias', 'zeros'),
        Parameter(prefix + 'W_1', (d_model, d_ff), 'Feed-forward hidden weight'),
        Parameter(prefix + 'b_1', (d_ff,), 'Feed-forward hidden bias', 'zeros'),
        Parameter(prefix + 'W_2', (d_ff, d_model), 'Feed-forward output weight'),
        Parameter(prefix + 'b_2', (d_model,), 'Feed-forward output bias', 'zeros'),
        Parameter(prefix + 'ln2_gamma', (d_model,), 'Feed-forward sublayer norm gain', 'ones'),
        Parameter(prefix + 'ln2_beta', (d_model,), 'Feed-forward sublayer norm bias', 'zeros'),
    ]


class GTNParams(Model):
    """Complete set of learnable parameters of a gated transformer network.

    Only the parts needed by the configured variant are created, and every
    shape follows from the config alone.

    Parameters
    ----------
    config : :class:`ModelConfig` object
        Network architecture

    """
    def __init__(self, config):
        d, d_tower = config.d_model, config.d_tower
        params = []
        if config.uses_step_tower:
            params += [Parameter('step_embed.W', (config.n_channels, d), 'Step embedding weight'),
                       Parameter('step_embed.b', (d,), 'Step embedding bias', 'zeros')]
        if config.uses_channel_tower:
            params += [Parameter('channel_embed.W', (config.max_len, d), 'Channel embedding weight'),
                       Parameter('channel_embed.b', (d,), 'Channel embedding bias', 'zeros')]
        for tower in TOWERS:
            if getattr(config, 'uses_%s_tower' % (tower,)):
                for layer in range(config.n_layers):
                    params += _layer_params('%s.layer%d.' % (tower, layer), d, config.d_ff)
        flatten = config.reduction == 'flatten'
        if config.uses_step_tower:
            width = config.max_len * d if flatten else d
            params += [Parameter('step_feature.W', (width, d_tower), 'Step tower feature weight (S)'),
                       Parameter('step_feature.b', (d_tower,), 'Step tower feature bias', 'zeros')]
        if config.uses_channel_tower:
            width = config.n_channels * d if flatten else d
            params += [Parameter('channel_feature.W', (width, d_tower), 'Channel tower feature weight (C)'),
                       Parameter('channel_feature.b', (d_tower,), 'Channel tower feature bias', 'zeros')]
        if config.variant == 'gated':
            params += [Parameter('gate.W', (2 * d_tower, 2), 'Gate projection weight'),
                       Parameter('gate.b', (2,), 'Gate projection bias', 'zeros')]
        params += [Parameter('classifier.W', (config.feature_width, config.n_classes), 'Classifier weight'),
                   Parameter('classifier.b', (config.n_classes,), 'Classifier bias', 'zeros')]
        super(GTNParams, self).__init__(params)
        self.config = config
        self.header = {'config': config.todict()}

    def layers(self, tower):
        """Parameters of each encoder layer of `tower` ('step' or 'channel')."""
        return [self.group('%s.layer%d.' % (tower, layer)) for layer in range(self.config.n_layers)]


class AttentionRecord(object):
    """Intermediate quantities captured during a forward pass.

    All arrays have a leading batch axis, except for a single-sample record
    obtained by indexing, which also trims time axes to the true length.

    Attributes
    ----------
    step_attention : array of float, shape (B, n_layers, n_heads, T, T), or None
        Step tower attention matrices
    channel_attention : array of float, shape (B, n_layers, n_heads, C, C), or None
        Channel tower attention matrices
    gate_weights : array of float, shape (B, 2), or None
        Gate weights (g1, g2) of the channel and step tower features
    tower_features : dict mapping string to array of float, shape (B, d_tower)
        Tower features C ('channel') and S ('step')
    embedding_outputs : array of float, shape (B, T, d_model), or None
        Step embeddings (after positional encoding)
    channel_embeddings : array of float, shape (B, C, d_model), or None
        Channel embeddings
    fused_features : array of float, shape (B, feature_width)
        Classifier input (post-gate feature for the gated variant)
    true_lens : array of int, shape (B,)
        Number of real time steps per sample

    """
    FIELDS = ('step_attention', 'channel_attention', 'gate_weights', 'tower_features',
              'embedding_outputs', 'channel_embeddings', 'fused_features', 'true_lens')

    def __init__(self, **kwargs):
        for name in self.FIELDS:
            setattr(self, name, kwargs.get(name))
        if self.tower_features is None:
            self.tower_features = {}

    def __len__(self):
        return len(self.true_lens) if np.ndim(self.true_lens) else 1

    def __repr__(self):
        """Short human-friendly string representation of record object."""
        present = [name for name in self.FIELDS if getattr(self, name) is not None]
        return "<gatedts.AttentionRecord samples=%d fields=%s at 0x%x>" % \
               (len(self), ','.join(present), id(self))

    def __getitem__(self, index):
        """Record of a single sample, with time axes trimmed to its true length."""
        n = int(self.true_lens[index])

        def pick(array, trim_axes=()):
            if array is None:
                return None
            array = array[index]
            for axis in trim_axes:
                array = np.take(array, np.arange(n), axis=axis)
            return array

        return AttentionRecord(
            step_attention=pick(self.step_attention, (-1, -2)),
            channel_attention=pick(self.channel_attention),
            gate_weights=pick(self.gate_weights),
            tower_features=dict((k, v[index]) for k, v in self.tower_features.items()),
            embedding_outputs=pick(self.embedding_outputs, (0,)),
            channel_embeddings=pick(self.channel_embeddings),
            fused_features=pick(self.fused_features),
            true_lens=n)


class GatedTransformer(object):
    """Gated transformer network classifier.

    Parameters
    ----------
    config : :class:`ModelConfig` object
        Network architecture and ablation variant
    params : :class:`GTNParams` object, optional
        Parameters (freshly initialised from the 'init' stream of `seed` by default)
    seed : int, optional
        Seed of the initialisation and dropout streams

    """
    def __init__(self, config, params=None, seed=0):
        self.config = config
        self.seed = int(seed)
        if params is None:
            params = GTNParams(config)
            params.initialise(Rng(self.seed, 'init'))
        elif params.config != config:
            raise ConfigError('Parameters were built for %r, not %r' % (params.config, config))
        self.params = params
        self.params.header['seed'] = self.seed
        self.dropout_rng = Rng(self.seed, 'dropout')

    def __repr__(self):
        """Short human-friendly string representation of model object."""
        return "<gatedts.GatedTransformer variant=%r params=%d at 0x%x>" % \
               (self.config.variant, self.params.num_values, id(self))

    def _check_input(self, values, true_lens):
        batch_size, length, n_channels = values.shape
        if n_channels != self.config.n_channels:
            raise DimensionError('Series has %d channels but model expects %d'
                                 % (n_channels, self.config.n_channels))
        if length > self.config.max_len:
            raise DimensionError('Series of length %d exceeds max_len %d' % (length, self.config.max_len))
        true_lens = np.full(batch_size, length) if true_lens is None else np.asarray(true_lens, dtype=int)
        if true_lens.shape != (batch_size,) or (true_lens < 1).any() or (true_lens > length).any():
            raise DimensionError('True lengths %s do not suit a batch of shape %s'
                                 % (true_lens.tolist(), values.shape))
        return true_lens

    def forward(self, values, true_lens=None, training=False):
        """Classify a batch of series.

        Parameters
        ----------
        values : :class:`Batch` object, or array of float, shape (B, T, C) or (T, C)
            Zero-padded time-major series (a 2-D array is a single series)
        true_lens : sequence of int, length B, optional
            Number of real time steps per series (taken from a :class:`Batch`,
            or T by default)
        training : bool, optional
            True for training mode (dropout active)

        Returns
        -------
        logits : :class:`Tensor`, shape (B, K)
            Unnormalised class scores
        record : :class:`AttentionRecord` object
            Attention matrices, gate weights, features and embeddings

        """
        if isinstance(values, Batch):
            values, true_lens = values.values, values.true_lens
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 2:
            values = values[np.newaxis]
            true_lens = None if true_lens is None else np.atleast_1d(true_lens)
        if values.ndim != 3:
            raise DimensionError('Expected series batch of shape (B, T, C), got %s' % (values.shape,))
        true_lens = self._check_input(values, true_lens)
        config, params = self.config, self.params
        x = Tensor(values)
        kwargs = dict(dropout_p=config.dropout_p, rng=self.dropout_rng,
                      training=training, eps=config.layer_norm_eps)
        record = AttentionRecord(true_lens=true_lens)
        features = {}
        if config.uses_channel_tower:
            embedded = embed_channel(x, params.group('channel_embed.'))
            mask = causal_mask(config.n_channels) if config.channel_masked else None
            out, attention = encoder_tower(embedded, params.layers('channel'), config.n_heads, mask, **kwargs)
            features['channel'] = tower_feature(out, params.group('channel_feature.'), config.reduction)
            record.channel_attention = np.stack(attention, axis=1)
            record.channel_embeddings = embedded.data
        if config.uses_step_tower:
            embedded = embed_step(x, params.group('step_embed.'), config.max_len)
            mask = attention_mask(true_lens, values.shape[1], config.step_masked)
            out, attention = encoder_tower(embedded, params.layers('step'), config.n_heads, mask, **kwargs)
            row_mask = np.arange(values.shape[1]) < true_lens[:, np.newaxis]
            features['step'] = tower_feature(out, params.group('step_feature.'), config.reduction, row_mask)
            record.step_attention = np.stack(attention, axis=1)
            record.embedding_outputs = embedded.data
        if config.variant == 'gated':
            fused, gate = gate_merge(features['channel'], features['step'], params.group('gate.'))
            record.gate_weights = gate.data
        elif config.variant == 'concat':
            fused = concat([features['channel'], features['step']], axis=-1)
        else:
            fused, = features.values()
        record.tower_features = dict((k, v.data) for k, v in features.items())
        record.fused_features = fused.data
        logits = linear(fused, params['classifier.W'], params['classifier.b'])
        return logits, record

    def forward_sample(self, sample, training=False):
        """Classify a single :class:`MTSSample`, returning logits (K,) and its record."""
        logits, record = self.forward(sample.values[np.newaxis], [sample.true_len], training)
        return logits[0], record[0]

    def predict(self, samples, batch_size=16):
        """Predicted class indices (evaluation mode, ties to lowest index).

        Parameters
        ----------
        samples : sequence of :class:`MTSSample` or :class:`Batch` object
            Series to classify

        Returns
        -------
        labels : array of int, shape (N,)
            Argmax of logits per series, in input order

        """
        if isinstance(samples, MTSSample):
            samples = [samples]
        batches = [samples] if isinstance(samples, Batch) else batchify(samples, batch_size)
        with no_grad():
            return np.concatenate([np.argmax(self.forward(batch)[0].data, axis=-1) for batch in batches])

    def save(self, path):
        """Write checkpoint with parameters, config and seed to `path`."""
        self.params.header = {'config': self.config.todict(), 'seed': self.seed}
        with open(path, 'wb') as ckpt:
            self.params.tofile(ckpt)
        logger.debug('Saved %s checkpoint to %s', self.config.variant, path)

    @classmethod
    def load(cls, path):
        """Construct model from checkpoint file written by :meth:`save`.

        Raises
        ------
        BadModelFile
            If the file is not a valid checkpoint of this network

        """
        with open(path, 'rb') as ckpt:
            header, values = read_checkpoint(ckpt)
        try:
            config = ModelConfig.fromdict(header['config'])
            seed = int(header['seed'])
        except (KeyError, TypeError, ValueError) as exc:
            raise BadModelFile('Checkpoint %r lacks a valid model config and seed: %s' % (path, exc))
        params = GTNParams(config)
        with open(path, 'rb') as ckpt:
            params.fromfile(ckpt)
        return cls(config, params, seed)
