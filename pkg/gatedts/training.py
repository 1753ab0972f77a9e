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

"""Training loop and evaluation.

Training follows a plain recipe: Adagrad on the mean cross-entropy of
shuffled mini-batches, with the learning rate halved whenever the training
loss plateaus. The parameters with the lowest training loss are kept, and
the headline result is the test accuracy of those parameters (never the
best test accuracy seen along the way, which is logged for reference only).

"""

import logging

import numpy as np

from .tensor import backward
from .functional import cross_entropy
from .rng import Rng
from .dataset import DatasetError, batchify
from .optim import NumericError, OptimState, PlateauScheduler, adagrad_step

logger = logging.getLogger(__name__)

LOG_COLUMNS = ('epoch', 'train_loss', 'train_acc', 'test_acc', 'lr')


class EvalResult(object):
    """Outcome of evaluating a model on a split.

    Attributes
    ----------
    accuracy : float
        Fraction of correctly classified series
    confusion : array of int, shape (K, K)
        Counts of (true class, predicted class) pairs
    predictions : array of int, shape (N,)
        Predicted class per series

    """
    def __init__(self, predictions, labels, n_classes):
        self.predictions = np.asarray(predictions, dtype=int)
        labels = np.asarray(labels, dtype=int)
        self.confusion = np.zeros((n_classes, n_classes), dtype=int)
        np.add.at(self.confusion, (labels, self.predictions), 1)
        self.accuracy = float(np.trace(self.confusion)) / len(labels)

    def __repr__(self):
        return "<gatedts.EvalResult accuracy=%.4f samples=%d at 0x%x>" % \
               (self.accuracy, len(self.predictions), id(self))


def evaluate(model, samples, batch_size=16):
    """Accuracy and confusion counts of model on samples (evaluation mode).

    Parameters
    ----------
    model : :class:`gatedts.GatedTransformer` object
        Model to evaluate (dropout is off)
    samples : sequence of :class:`gatedts.MTSSample`
        Labelled series of one split

    Returns
    -------
    result : :class:`EvalResult` object
        Accuracy, confusion matrix and predictions (argmax, ties to lowest index)

    Raises
    ------
    DatasetError
        If the split is empty

    """
    samples = list(samples)
    if not samples:
        raise DatasetError('Cannot evaluate on an empty split')
    predictions = model.predict(samples, batch_size)
    return EvalResult(predictions, [s.label for s in samples], model.config.n_classes)


class TrainLog(object):
    """Per-epoch training history.

    Attributes
    ----------
    records : list of tuple
        One (epoch, train_loss, train_acc, test_acc, lr) tuple per epoch, with
        NaN accuracies on epochs without evaluation
    best_train_loss_epoch : int or None
        Epoch with the lowest training loss
    report_test_accuracy : float or None
        Test accuracy of the parameters with the lowest training loss

    """
    def __init__(self):
        self.records = []
        self.best_train_loss_epoch = None
        self.best_train_loss = np.inf
        self.report_test_accuracy = None

    def __len__(self):
        return len(self.records)

    def __repr__(self):
        """Short human-friendly string representation of log object."""
        return "<gatedts.TrainLog epochs=%d best_epoch=%s at 0x%x>" % \
               (len(self), self.best_train_loss_epoch, id(self))

    def append(self, epoch, train_loss, train_acc, test_acc, lr):
        """Add record of one epoch (epochs must increase strictly)."""
        if self.records and epoch <= self.records[-1][0]:
            raise ValueError('Epoch %d does not follow epoch %d' % (epoch, self.records[-1][0]))
        self.records.append((int(epoch), float(train_loss), float(train_acc), float(test_acc), float(lr)))
        if train_loss < self.best_train_loss:
            self.best_train_loss = float(train_loss)
            self.best_train_loss_epoch = int(epoch)
            return True
        return False

    def column(self, name):
        """Values of one column (see :data:`LOG_COLUMNS`) as an array."""
        return np.array([record[LOG_COLUMNS.index(name)] for record in self.records])

    @property
    def best_test_accuracy(self):
        """Highest evaluated test accuracy and its epoch (for reference only)."""
        test_acc = self.column('test_acc') if self.records else np.array([np.nan])
        if np.isnan(test_acc).all():
            return np.nan, None
        best = int(np.nanargmax(test_acc))
        return float(test_acc[best]), self.records[best][0]

    def to_csv(self, path):
        """Write history as CSV with columns epoch,train_loss,train_acc,test_acc,lr."""
        np.savetxt(path, np.array(self.records, dtype=np.float64).reshape(-1, len(LOG_COLUMNS)),
                   fmt=['%d', '%.17g', '%.17g', '%.17g', '%.17g'], delimiter=',',
                   header=','.join(LOG_COLUMNS), comments='')


def train(model, dataset, config, checkpoint_path=None):
    """Train model on the training split of a dataset.

    Each epoch shuffles the training set (with the 'shuffle' stream of the
    seed), forms padded batches, and for every batch evaluates the forward
    pass in training mode, the mean cross-entropy and its gradient, followed
    by an Adagrad step. The mean batch loss of the epoch then drives the
    plateau scheduler. Train and test accuracy are evaluated every
    `eval_interval` epochs. Training stops after `max_epochs` epochs or
    once the learning rate is stuck at its floor.

    Parameters
    ----------
    model : :class:`gatedts.GatedTransformer` object
        Model to train (left holding the parameters with the lowest training loss)
    dataset : :class:`gatedts.MTSDataset` object
        Dataset supplying train and test splits
    config : :class:`gatedts.TrainConfig` object
        Training recipe
    checkpoint_path : string, optional
        Checkpoint file rewritten whenever the training loss reaches a new low

    Returns
    -------
    log : :class:`TrainLog` object
        Training history, including the test accuracy to report

    Raises
    ------
    NumericError
        If the loss or a gradient becomes non-finite (the model is reset to
        the last good parameters and the checkpoint file is left intact)

    """
    params = model.params
    state = OptimState.for_model(params, config.lr, config.adagrad_eps)
    scheduler = PlateauScheduler(config.lr, config.plateau_factor, config.plateau_patience,
                                 config.plateau_threshold, config.min_lr)
    shuffle_rng = Rng(config.seed, 'shuffle')
    log = TrainLog()
    best = params.snapshot()
    logger.info('Training %s variant on %r with %d parameter values for up to %d epochs',
                model.config.variant, dataset.name, params.num_values, config.max_epochs)
    for epoch in range(1, config.max_epochs + 1):
        total_loss = 0.0
        for n, batch in enumerate(batchify(dataset.train, config.batch_size, shuffle_rng, shuffle=True)):
            params.zero_grads()
            logits, _ = model.forward(batch, training=True)
            loss = cross_entropy(logits, batch.labels)
            try:
                if not np.isfinite(loss.item()):
                    raise NumericError('Loss became non-finite in epoch %d, batch %d' % (epoch, n))
                backward(loss)
                adagrad_step(params, state)
            except NumericError:
                params.restore(best)
                logger.error('Training aborted in epoch %d, restored parameters of epoch %s',
                             epoch, log.best_train_loss_epoch)
                raise
            logger.debug('Epoch %d batch %d: loss %.6f', epoch, n, loss.item())
            total_loss += loss.item() * len(batch)
        train_loss = total_loss / len(dataset.train)
        if epoch % config.eval_interval == 0:
            train_acc = evaluate(model, dataset.train, config.batch_size).accuracy
            test_acc = evaluate(model, dataset.test, config.batch_size).accuracy if dataset.test else np.nan
        else:
            train_acc = test_acc = np.nan
        if log.append(epoch, train_loss, train_acc, test_acc, state.lr):
            best = params.snapshot()
            if checkpoint_path:
                model.save(checkpoint_path)
        logger.info('Epoch %d: train loss %.6f, train acc %.4f, test acc %.4f, lr %g',
                    epoch, train_loss, train_acc, test_acc, state.lr)
        state.lr = scheduler.step(train_loss)
        if scheduler.exhausted:
            logger.info('Stopping early after epoch %d: learning rate at floor %g and loss not improving',
                        epoch, config.min_lr)
            break
    params.restore(best)
    if dataset.test:
        log.report_test_accuracy = evaluate(model, dataset.test, config.batch_size).accuracy
    best_test, best_test_epoch = log.best_test_accuracy
    logger.info('Best training loss %.6f in epoch %d gives test accuracy %s (best test accuracy seen: %s in epoch %s)',
                log.best_train_loss, log.best_train_loss_epoch, log.report_test_accuracy,
                best_test, best_test_epoch)
    return log
