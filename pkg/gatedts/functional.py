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

"""Differentiable neural-network building blocks on :class:`Tensor` objects.

These operations complement the elementwise and shape operations of
:mod:`gatedts.tensor` with the nonlinearities, normalisation, dropout and
loss needed by the transformer encoder and its classifier head.

"""

import numpy as np

from .tensor import Function, DimensionError, as_tensor, matmul, mul


class ParameterError(ValueError):
    """Operation parameter lies outside its valid range."""


class DegenerateAttentionError(ValueError):
    """Softmax slice has no allowed entries (typically a padding bug)."""

# --------------------------------------------------------------------------------------------------
# --- Activations
# --------------------------------------------------------------------------------------------------


class Tanh(Function):
    def forward(self, x):
        self.y = np.tanh(x)
        return self.y

    def backward(self, grad):
        return (grad * (1.0 - self.y * self.y),)


class Relu(Function):
    def forward(self, x):
        self.active = x > 0.0
        return np.where(self.active, x, 0.0)

    def backward(self, grad):
        # Subgradient 0 at the kink
        return (np.where(self.active, grad, 0.0),)


def tanh(x):
    """Elementwise hyperbolic tangent."""
    return Tanh.apply(x)


def relu(x):
    """Elementwise rectified linear unit, max(x, 0)."""
    return Relu.apply(x)


def linear(x, weight, bias=None):
    """Affine map `x @ weight + bias` acting on the last axis of `x`."""
    y = matmul(x, weight)
    return y if bias is None else y + bias

# --------------------------------------------------------------------------------------------------
# --- Softmax
# --------------------------------------------------------------------------------------------------


class Softmax(Function):
    def forward(self, x, axis=-1, mask=None):
        self.axis = axis
        if mask is None:
            shifted = x - x.max(axis=axis, keepdims=True)
            e = np.exp(shifted)
        else:
            try:
                allowed = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
            except ValueError:
                raise DimensionError('Mask of shape %s does not broadcast to logits of shape %s'
                                     % (np.shape(mask), x.shape))
            if not allowed.any(axis=axis).all():
                raise DegenerateAttentionError('Softmax slice along axis %d has every entry masked' % (axis,))
            z = np.where(allowed, x, -np.inf)
            shifted = z - z.max(axis=axis, keepdims=True)
            e = np.where(allowed, np.exp(shifted), 0.0)
        self.y = e / e.sum(axis=axis, keepdims=True)
        return self.y

    def backward(self, grad):
        y = self.y
        return (y * (grad - (grad * y).sum(axis=self.axis, keepdims=True)),)


class TwoWaySoftmax(Function):
    def forward(self, x):
        if x.shape[-1] != 2:
            raise DimensionError('Two-way softmax needs a last axis of length 2, got shape %s' % (x.shape,))
        d = x[..., 0] - x[..., 1]
        t = np.exp(-np.abs(d))
        small = t / (1.0 + t)
        # Complement of a value in [0, 0.5] is exact, so the pair sums to 1 exactly
        large = 1.0 - small
        first = np.where(d >= 0.0, large, small)
        second = np.where(d >= 0.0, small, large)
        self.y = np.stack([first, second], axis=-1)
        return self.y

    def backward(self, grad):
        y = self.y
        return (y * (grad - (grad * y).sum(axis=-1, keepdims=True)),)


def softmax(x, axis=-1, mask=None):
    """Softmax along an axis, with optional boolean mask of allowed entries.

    Parameters
    ----------
    x : :class:`Tensor`
        Logits
    axis : int, optional
        Axis along which the output sums to 1
    mask : array of bool, optional
        Allowed entries (True) broadcastable to the shape of `x`. Masked-out
        entries are exactly 0 in the output and receive zero gradient.

    Returns
    -------
    y : :class:`Tensor`
        Probabilities with the same shape as `x`

    Raises
    ------
    DegenerateAttentionError
        If any slice along `axis` is entirely masked out
    DimensionError
        If the mask does not broadcast to the logits

    Notes
    -----
    The maximum over allowed entries is subtracted from each slice before
    exponentiation, so large logits do not overflow.

    """
    return Softmax.apply(x, axis=axis, mask=mask)


def two_way_softmax(x):
    """Softmax over a last axis of length 2 whose pair sums to exactly 1.

    The smaller probability is evaluated with the logistic function of the
    absolute logit difference and the larger one as its complement.
    """
    return TwoWaySoftmax.apply(x)

# --------------------------------------------------------------------------------------------------
# --- Layer normalisation
# --------------------------------------------------------------------------------------------------


class LayerNorm(Function):
    def forward(self, x, gamma, beta, eps=1e-5):
        if eps <= 0.0:
            raise ParameterError('Layer norm eps should be positive, not %g' % (eps,))
        if gamma.shape != x.shape[-1:] or beta.shape != x.shape[-1:]:
            raise DimensionError('Layer norm gain %s / bias %s do not match last axis of input %s'
                                 % (gamma.shape, beta.shape, x.shape))
        mu = x.mean(axis=-1, keepdims=True)
        centred = x - mu
        var = (centred * centred).mean(axis=-1, keepdims=True)
        self.inv_std = 1.0 / np.sqrt(var + eps)
        self.xhat = centred * self.inv_std
        self.gamma = gamma
        return self.xhat * gamma + beta

    def backward(self, grad):
        xhat = self.xhat
        dxhat = grad * self.gamma
        dx = self.inv_std * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                             - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        return dx, grad * xhat, grad


def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalise over the last axis to zero mean and unit (population) variance.

    The normalised values are then scaled by `gamma` and shifted by `beta`,
    both vectors as long as the last axis of `x`.
    """
    return LayerNorm.apply(x, gamma, beta, eps=eps)

# --------------------------------------------------------------------------------------------------
# --- Dropout
# --------------------------------------------------------------------------------------------------


def dropout(x, p, rng, training):
    """Inverted dropout.

    Parameters
    ----------
    x : :class:`Tensor`
        Input activations
    p : float
        Probability of zeroing each element, in the range [0, 1)
    rng : :class:`gatedts.Rng` object
        Random number generator (the 'dropout' stream, typically)
    training : bool
        True to apply dropout, False for the identity map of evaluation mode

    Returns
    -------
    y : :class:`Tensor`
        Activations with dropped elements zeroed and survivors scaled by 1 / (1 - p)

    Raises
    ------
    ParameterError
        If `p` is outside [0, 1)

    """
    if not 0.0 <= p < 1.0:
        raise ParameterError('Dropout probability should be in range [0, 1), not %g' % (p,))
    x = as_tensor(x)
    if not training or p == 0.0:
        return x
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return mul(x, keep)

# --------------------------------------------------------------------------------------------------
# --- Loss
# --------------------------------------------------------------------------------------------------


class CrossEntropy(Function):
    def forward(self, logits, labels=None):
        if logits.ndim != 2:
            raise DimensionError('Cross entropy expects logits of shape (batch, classes), got %s'
                                 % (logits.shape,))
        batch_size, n_classes = logits.shape
        labels = np.asarray(labels)
        if labels.shape != (batch_size,):
            raise DimensionError('Expected %d labels, got array of shape %s' % (batch_size, labels.shape))
        bad = (labels < 0) | (labels >= n_classes) | (labels != np.floor(labels))
        if bad.any():
            raise ParameterError('Labels %s out of range [0, %d)' % (labels[bad].tolist(), n_classes))
        self.labels = labels.astype(int)
        shifted = logits - logits.max(axis=-1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=-1))
        rows = np.arange(batch_size)
        self.probs = np.exp(shifted - log_norm[:, np.newaxis])
        return np.asarray(np.mean(log_norm - shifted[rows, self.labels]))

    def backward(self, grad):
        delta = self.probs.copy()
        delta[np.arange(len(self.labels)), self.labels] -= 1.0
        return (grad * delta / len(self.labels),)


def cross_entropy(logits, labels):
    """Mean categorical cross-entropy of a batch of logits.

    Parameters
    ----------
    logits : :class:`Tensor`, shape (B, K)
        Unnormalised class scores
    labels : sequence of int, length B
        Class indices in the range [0, K)

    Returns
    -------
    loss : :class:`Tensor`
        Scalar mean of -log softmax(logits)[label], via log-sum-exp

    Raises
    ------
    ParameterError
        If any label is out of range

    """
    return CrossEntropy.apply(logits, labels=labels)
