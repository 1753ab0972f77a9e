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

"""Finite-difference oracle for verifying automatic differentiation."""

import logging
from collections import OrderedDict

import numpy as np

from .tensor import backward, zero_grads, no_grad

logger = logging.getLogger(__name__)


def numerical_gradient(loss_fn, tensor, h=1e-5):
    """Central finite-difference gradient of a scalar function of a tensor.

    Parameters
    ----------
    loss_fn : function, signature :class:`Tensor` = f()
        Function evaluating the scalar loss from the current tensor values
    tensor : :class:`Tensor`
        Tensor whose values are perturbed in place (and restored afterwards)
    h : float, optional
        Perturbation step

    Returns
    -------
    grad : array of float, same shape as `tensor`
        Estimated gradient, (f(x + h) - f(x - h)) / 2h per element

    """
    grad = np.zeros(tensor.shape)
    flat = tensor.data.reshape(-1)
    with no_grad():
        for n in range(flat.size):
            original = flat[n]
            flat[n] = original + h
            upper = loss_fn().item()
            flat[n] = original - h
            lower = loss_fn().item()
            flat[n] = original
            grad.flat[n] = (upper - lower) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor=1e-8, atol=0.0):
    """Elementwise |a - n| / max(|a|, |n|, floor), zero where |a - n| <= atol."""
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.where(diff <= atol, 0.0, diff / scale)


def gradient_check(loss_fn, tensors, h=1e-5, floor=1e-8, atol=0.0):
    """Compare backpropagated gradients with central finite differences.

    Parameters
    ----------
    loss_fn : function, signature :class:`Tensor` = f()
        Function evaluating the scalar loss from the current tensor values
    tensors : mapping from string to :class:`Tensor`, or sequence of :class:`Tensor`
        Leaf tensors (requiring gradients) to check
    h : float, optional
        Perturbation step of the central differences
    floor : float, optional
        Lower limit on the denominator of the relative error
    atol : float, optional
        Absolute discrepancies up to this size count as exact (this absorbs
        the roundoff floor of finite differences on tiny gradients)

    Returns
    -------
    errors : :class:`collections.OrderedDict`
        Maximum relative error per tensor, keyed by name (or sequence index)

    """
    named = tensors.items() if hasattr(tensors, 'items') else enumerate(tensors)
    named = OrderedDict(named)
    zero_grads(named.values())
    backward(loss_fn())
    errors = OrderedDict()
    for name, tensor in named.items():
        analytic = tensor.grad if tensor.grad is not None else np.zeros(tensor.shape)
        numeric = numerical_gradient(loss_fn, tensor, h)
        errors[name] = float(relative_error(analytic, numeric, floor, atol).max())
        logger.debug('Gradient check of %s: max relative error %.3g', name, errors[name])
    zero_grads(named.values())
    return errors
