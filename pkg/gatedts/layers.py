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

"""Layers of the gated transformer network.

All layers act on :class:`Tensor` objects whose last two axes are (tokens,
features) and treat any leading axes as a batch. Tokens are time steps in
the step tower and channels in the channel tower. Learnable weights are
passed in as mappings from short names (e.g. 'W_Q') to parameter tensors,
as returned by :meth:`gatedts.Model.group`.

Attention masks are boolean arrays in which True marks an allowed
(query, key) pair, broadcastable to (..., heads, queries, keys).

"""

import numpy as np

from .tensor import DimensionError, Tensor, concat, matmul, mul, transpose, reshape, sum_
from .functional import tanh, relu, softmax, two_way_softmax, layer_norm, dropout, linear


def positional_encoding(length, d_model):
    """Fixed sinusoidal positional encoding.

    Parameters
    ----------
    length : int
        Number of time steps T
    d_model : int
        Embedding width d

    Returns
    -------
    pe : array of float, shape (T, d)
        PE[pos, 2i] = sin(pos / 10000^(2i/d)) and PE[pos, 2i+1] = cos(pos / 10000^(2i/d))

    """
    if length < 1 or d_model < 1:
        raise DimensionError('Positional encoding needs positive length and width, not %d x %d'
                             % (length, d_model))
    pos = np.arange(length, dtype=np.float64)[:, np.newaxis]
    cols = np.arange(d_model)
    angle = pos / 10000.0 ** (2.0 * (cols // 2) / d_model)
    return np.where(cols % 2 == 0, np.sin(angle), np.cos(angle))

# --------------------------------------------------------------------------------------------------
# --- Embeddings
# --------------------------------------------------------------------------------------------------


def embed_step(x, params, max_len):
    """Embed time steps: tanh(x W + b) + PE, shape (..., T, d).

    Parameters
    ----------
    x : :class:`Tensor`, shape (..., T, C)
        Time-major series
    params : mapping
        Weight 'W' of shape (C, d) and bias 'b' of shape (d,)
    max_len : int
        Longest allowed series length

    Raises
    ------
    DimensionError
        If T exceeds `max_len` or C does not match the weight

    """
    length, n_channels = x.shape[-2:]
    if length > max_len:
        raise DimensionError('Series of length %d exceeds max_len %d' % (length, max_len))
    weight = params['W']
    if n_channels != weight.shape[0]:
        raise DimensionError('Series has %d channels but step embedding expects %d'
                             % (n_channels, weight.shape[0]))
    return tanh(linear(x, weight, params['b'])) + positional_encoding(length, weight.shape[1])


def pad_time(x, length):
    """Zero-pad the time axis (second last) of `x` to `length` steps."""
    missing = length - x.shape[-2]
    if missing < 0:
        raise DimensionError('Series of length %d exceeds max_len %d' % (x.shape[-2], length))
    if missing == 0:
        return x
    return concat([x, Tensor(np.zeros(x.shape[:-2] + (missing, x.shape[-1])))], axis=-2)


def embed_channel(x, params):
    """Embed whole channels as tokens: tanh(x^T W + b), shape (..., C, d).

    The series is zero-padded along time to max_len, the input width of the
    weight 'W' of shape (max_len, d). No positional encoding is added, so
    the embedding treats channels as an unordered set.
    """
    weight = params['W']
    padded = pad_time(x, weight.shape[0])
    axes = tuple(range(x.ndim - 2)) + (x.ndim - 1, x.ndim - 2)
    return tanh(linear(transpose(padded, axes), weight, params['b']))

# --------------------------------------------------------------------------------------------------
# --- Masks
# --------------------------------------------------------------------------------------------------


def causal_mask(n):
    """Boolean (n, n) mask allowing query i to see keys j <= i."""
    if n < 1:
        raise DimensionError('Causal mask needs at least one token, not %d' % (n,))
    return np.tril(np.ones((n, n), dtype=bool))


def padding_mask(true_len, padded_len):
    """Boolean key mask of length `padded_len` allowing only the first `true_len` keys.

    Raises
    ------
    DimensionError
        If `true_len` is not in the range [1, `padded_len`]

    """
    if not 1 <= true_len <= padded_len:
        raise DimensionError('True length %d should be in range [1, %d]' % (true_len, padded_len))
    return np.arange(padded_len) < true_len


def attention_mask(true_lens, n, causal):
    """Combined padding and optional causal mask for a batch of token sequences.

    Parameters
    ----------
    true_lens : sequence of int, length B
        Number of real (unpadded) tokens per sequence
    n : int
        Padded number of tokens
    causal : bool
        True to add the causal constraint

    Returns
    -------
    mask : array of bool, shape (B, 1, n, n), or None
        Allowed (query, key) pairs per sequence, broadcast over heads, or
        None if every pair is allowed

    """
    keys = np.array([padding_mask(length, n) for length in true_lens])
    if keys.all() and not causal:
        return None
    mask = np.broadcast_to(keys[:, np.newaxis, np.newaxis, :], (len(keys), 1, n, n))
    return mask & causal_mask(n) if causal else mask.copy()

# --------------------------------------------------------------------------------------------------
# --- Encoder
# --------------------------------------------------------------------------------------------------


def _split_heads(x, n_heads):
    """Reshape (..., n, d) to (..., heads, n, d / heads)."""
    lead, (n, d) = x.shape[:-2], x.shape[-2:]
    x = reshape(x, lead + (n, n_heads, d // n_heads))
    k = len(lead)
    return transpose(x, tuple(range(k)) + (k + 1, k, k + 2))


def _merge_heads(x):
    """Reshape (..., heads, n, d / heads) to (..., n, d)."""
    lead, (heads, n, dk) = x.shape[:-3], x.shape[-3:]
    k = len(lead)
    x = transpose(x, tuple(range(k)) + (k + 1, k, k + 2))
    return reshape(x, lead + (n, heads * dk))


def multi_head_attention(x, params, n_heads, mask=None):
    """Multi-head scaled dot-product self-attention.

    Parameters
    ----------
    x : :class:`Tensor`, shape (..., n, d)
        Token vectors
    params : mapping
        Projections 'W_Q', 'W_K', 'W_V' and 'W_O', each of shape (d, d)
    n_heads : int
        Number of heads H, which should divide d
    mask : array of bool, optional
        Allowed (query, key) pairs, broadcastable to (..., H, n, n)

    Returns
    -------
    out : :class:`Tensor`, shape (..., n, d)
        Concatenated head outputs projected by 'W_O'
    attention : array of float, shape (..., H, n, n)
        Attention matrices, with rows summing to 1 over allowed keys

    Raises
    ------
    DimensionError
        If `n_heads` does not divide d
    DegenerateAttentionError
        If a query row has no allowed keys

    """
    d_model = x.shape[-1]
    if d_model % n_heads:
        raise DimensionError('Width %d is not divisible into %d heads' % (d_model, n_heads))
    q = _split_heads(matmul(x, params['W_Q']), n_heads)
    k = _split_heads(matmul(x, params['W_K']), n_heads)
    v = _split_heads(matmul(x, params['W_V']), n_heads)
    axes = tuple(range(k.ndim - 2)) + (k.ndim - 1, k.ndim - 2)
    scores = matmul(q, transpose(k, axes)) * (1.0 / np.sqrt(d_model // n_heads))
    attention = softmax(scores, axis=-1, mask=mask)
    out = matmul(_merge_heads(matmul(attention, v)), params['W_O'])
    return out, attention.data


def feed_forward(x, params):
    """Position-wise feed-forward network relu(x W_1 + b_1) W_2 + b_2."""
    return linear(relu(linear(x, params['W_1'], params['b_1'])), params['W_2'], params['b_2'])


def encoder_layer(x, params, n_heads, mask=None, dropout_p=0.0, rng=None, training=False, eps=1e-5):
    """Post-norm transformer encoder layer.

    This evaluates x1 = LN(x + dropout(MHA(x))) and then
    out = LN(x1 + dropout(FFN(x1))).

    Parameters
    ----------
    x : :class:`Tensor`, shape (..., n, d)
        Token vectors
    params : mapping
        Attention projections, feed-forward weights 'W_1', 'b_1', 'W_2', 'b_2'
        and layer-norm gains / biases 'ln1_gamma', 'ln1_beta', 'ln2_gamma', 'ln2_beta'
    n_heads : int
        Number of attention heads
    mask : array of bool, optional
        Allowed (query, key) pairs
    dropout_p : float, optional
        Dropout probability on both sublayer outputs
    rng : :class:`gatedts.Rng` object, optional
        Dropout stream (only needed in training mode)
    training : bool, optional
        True to apply dropout
    eps : float, optional
        Layer-norm variance offset

    Returns
    -------
    out : :class:`Tensor`, shape (..., n, d)
        Encoded token vectors
    attention : array of float, shape (..., H, n, n)
        Attention matrices of this layer

    """
    attended, attention = multi_head_attention(x, params, n_heads, mask)
    x1 = layer_norm(x + dropout(attended, dropout_p, rng, training),
                    params['ln1_gamma'], params['ln1_beta'], eps)
    out = layer_norm(x1 + dropout(feed_forward(x1, params), dropout_p, rng, training),
                     params['ln2_gamma'], params['ln2_beta'], eps)
    return out, attention


def encoder_tower(x, layers, n_heads, mask=None, dropout_p=0.0, rng=None, training=False, eps=1e-5):
    """Stack of encoder layers sharing one mask.

    Parameters
    ----------
    layers : sequence of mapping
        Parameters of each layer in order (see :func:`encoder_layer`)

    Returns
    -------
    out : :class:`Tensor`, shape (..., n, d)
        Output of last layer
    attention : list of array of float, shape (..., H, n, n)
        Attention matrices per layer

    """
    attention = []
    for params in layers:
        x, layer_attention = encoder_layer(x, params, n_heads, mask, dropout_p, rng, training, eps)
        attention.append(layer_attention)
    return x, attention

# --------------------------------------------------------------------------------------------------
# --- Tower fusion
# --------------------------------------------------------------------------------------------------


def tower_feature(h, params, reduction='flatten', row_mask=None):
    """Reduce tower output to a feature vector tanh(reduce(h) W + b).

    Parameters
    ----------
    h : :class:`Tensor`, shape (..., n, d)
        Tower output
    params : mapping
        Weight 'W' of shape (N * d, d_tower) for 'flatten' (where N is the
        configured number of tokens) or (d, d_tower) for 'mean', and bias 'b'
    reduction : {'flatten', 'mean'}, optional
        Flatten rows row-major (zero-padding up to N rows) or average rows
    row_mask : array of bool, shape (..., n), optional
        Real (True) and padded (False) rows; padded rows are zeroed for
        'flatten' and excluded from the mean

    Returns
    -------
    feature : :class:`Tensor`, shape (..., d_tower)
        Tower feature with entries in (-1, 1)

    Raises
    ------
    DimensionError
        If there are more rows than the flatten width allows

    """
    weight = params['W']
    n, d_model = h.shape[-2:]
    if row_mask is not None:
        h = mul(h, np.asarray(row_mask, dtype=np.float64)[..., np.newaxis])
    if reduction == 'mean':
        pooled = sum_(h, axis=-2)
        count = np.full(h.shape[:-2], float(n)) if row_mask is None else \
            np.asarray(row_mask, dtype=np.float64).sum(axis=-1)
        reduced = mul(pooled, 1.0 / count[..., np.newaxis])
    else:
        n_tokens = weight.shape[0] // d_model
        if n > n_tokens or weight.shape[0] != n_tokens * d_model:
            raise DimensionError('Tower output of shape %s does not fit flatten width %d'
                                 % (h.shape, weight.shape[0]))
        reduced = reshape(pad_time(h, n_tokens), h.shape[:-2] + (n_tokens * d_model,))
    return tanh(linear(reduced, weight, params['b']))


def gate_merge(channel_feature, step_feature, params):
    """Fuse tower features with a learned two-way softmax gate.

    This computes h = Concat(C, S) W + b, (g1, g2) = softmax(h) and the fused
    feature y = Concat(C g1, S g2).

    Parameters
    ----------
    channel_feature : :class:`Tensor`, shape (..., d_tower)
        Channel tower feature C
    step_feature : :class:`Tensor`, shape (..., d_tower)
        Step tower feature S
    params : mapping
        Gate weight 'W' of shape (2 d_tower, 2) and bias 'b' of shape (2,)

    Returns
    -------
    y : :class:`Tensor`, shape (..., 2 d_tower)
        Fused feature
    gate : :class:`Tensor`, shape (..., 2)
        Gate weights (g1, g2), summing to exactly 1

    """
    joined = concat([channel_feature, step_feature], axis=-1)
    gate = two_way_softmax(linear(joined, params['W'], params['b']))
    y = concat([mul(channel_feature, gate[..., 0:1]), mul(step_feature, gate[..., 1:2])], axis=-1)
    return y, gate
