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

"""Adagrad optimiser and learning rate reduction on plateau."""

import logging
from collections import OrderedDict

import numpy as np

logger = logging.getLogger(__name__)


class NumericError(ArithmeticError):
    """Gradient or loss became non-finite."""


class OptimState(object):
    """State of the Adagrad optimiser.

    Parameters
    ----------
    names : sequence of string
        Names of the parameters being optimised
    shapes : sequence of tuple of int
        Corresponding parameter shapes
    lr : float
        Base (initial) learning rate
    eps : float, optional
        Offset of the update denominator

    Attributes
    ----------
    lr : float
        Current learning rate (never above `base_lr`)
    accumulators : :class:`collections.OrderedDict`
        Sum of squared gradients per parameter, keyed by name

    """
    def __init__(self, names, shapes, lr, eps=1e-10):
        self.lr = self.base_lr = float(lr)
        self.eps = float(eps)
        self.accumulators = OrderedDict((name, np.zeros(shape)) for name, shape in zip(names, shapes))

    @classmethod
    def for_model(cls, model, lr, eps=1e-10):
        """Fresh state for all parameters of a :class:`gatedts.Model`."""
        return cls(model.keys(), [p.shape for p in model], lr, eps)

    def __repr__(self):
        """Short human-friendly string representation of state object."""
        return "<gatedts.OptimState lr=%g base_lr=%g params=%d at 0x%x>" % \
               (self.lr, self.base_lr, len(self.accumulators), id(self))


def adagrad_step(params, state):
    """Apply one Adagrad update in place.

    For each parameter theta with gradient g this accumulates acc += g^2 and
    updates theta -= lr g / (sqrt(acc) + eps), elementwise. Coordinates that
    have only seen zero gradients stay put.

    Parameters
    ----------
    params : :class:`gatedts.Model` or mapping from string to :class:`Tensor`
        Parameters with populated gradients (a missing gradient counts as zero)
    state : :class:`OptimState` object
        Optimiser state, updated in place

    Raises
    ------
    NumericError
        If a gradient has a non-finite value (nothing is updated in that case)

    """
    tensors = OrderedDict(zip(params.keys(), params.values())) if hasattr(params, 'params') \
        else OrderedDict(params.items())
    for name, tensor in tensors.items():
        if tensor.grad is not None and not np.isfinite(tensor.grad).all():
            raise NumericError('Gradient of parameter %r has non-finite values' % (name,))
    for name, tensor in tensors.items():
        if tensor.grad is None:
            continue
        grad = tensor.grad
        acc = state.accumulators[name]
        acc += grad * grad
        denom = np.sqrt(acc) + state.eps
        tensor.data -= state.lr * np.divide(grad, denom, out=np.zeros_like(grad), where=denom > 0)


class PlateauScheduler(object):
    """Reduce learning rate when the monitored loss stops improving.

    A loss counts as an improvement if it lies below best * (1 - threshold).
    After `patience` consecutive epochs without improvement, the learning
    rate is multiplied by `factor` (but not below `min_lr`) and the count
    starts afresh.

    Parameters
    ----------
    lr : float
        Initial learning rate
    factor : float, optional
        Reduction factor, in range (0, 1)
    patience : int, optional
        Number of epochs without improvement that triggers a reduction
    threshold : float, optional
        Relative improvement needed
    min_lr : float, optional
        Learning rate floor

    Attributes
    ----------
    exhausted : bool
        True once a reduction fell due while the rate was already at its floor

    """
    def __init__(self, lr, factor=0.5, patience=10, threshold=1e-4, min_lr=1e-6):
        if not 0.0 < factor < 1.0:
            raise ValueError('Plateau factor should be in range (0, 1), not %g' % (factor,))
        self.lr = float(lr)
        self.factor = factor
        self.patience = patience
        self.threshold = threshold
        self.min_lr = min_lr
        self.best = np.inf
        self.num_bad_epochs = 0
        self.num_reductions = 0
        self.exhausted = False

    def __repr__(self):
        """Short human-friendly string representation of scheduler object."""
        return "<gatedts.PlateauScheduler lr=%g best=%g bad_epochs=%d at 0x%x>" % \
               (self.lr, self.best, self.num_bad_epochs, id(self))

    def step(self, loss):
        """Register the loss of one epoch and return the (possibly reduced) rate."""
        if loss < self.best * (1.0 - self.threshold) or self.best == np.inf:
            self.best = loss
            self.num_bad_epochs = 0
            return self.lr
        self.num_bad_epochs += 1
        if self.num_bad_epochs >= self.patience:
            self.num_bad_epochs = 0
            new_lr = max(self.lr * self.factor, self.min_lr)
            if new_lr < self.lr:
                logger.info('Loss plateaued at %g, reducing learning rate from %g to %g',
                            self.best, self.lr, new_lr)
                self.lr = new_lr
                self.num_reductions += 1
            else:
                if not self.exhausted:
                    logger.warning('Loss plateaued at %g with learning rate already at floor %g',
                                   self.best, self.min_lr)
                self.exhausted = True
        return self.lr


def lr_plateau(state, train_loss_history, factor=0.5, patience=10, min_lr=1e-6, threshold=1e-4):
    """Set learning rate of optimiser state from a history of training losses.

    This replays the whole history from the base learning rate through a
    :class:`PlateauScheduler`, so it agrees with stepping one epoch at a time.

    Returns
    -------
    state : :class:`OptimState` object
        Same state object, with updated `lr`

    """
    scheduler = PlateauScheduler(state.base_lr, factor, patience, threshold, min_lr)
    for loss in train_loss_history:
        scheduler.step(loss)
    state.lr = scheduler.lr
    return state
