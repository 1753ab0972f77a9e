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

"""Labelled multivariate time-series datasets.

A dataset directory has the following layout::

  meta.json          {"format_version": 1, "name": ..., "n_channels": C,
                      "n_classes": K, "max_len": T_max,
                      "splits": {"train": N_train, "test": N_test},
                      "class_names": [...] or null}
  train/labels.txt   one class index per line, in sample order
  train/00000.csv    one series: a row per time step, comma-separated channels
  train/00001.csv    ...
  test/...           same as train

Values are loaded verbatim (no scaling or centring). They are written with
17 significant digits so that saving and loading is bit-exact.

"""

import os
import json
import logging

import numpy as np

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
SPLITS = ('train', 'test')


class DatasetError(ValueError):
    """Dataset is missing, malformed or inconsistent with its metadata."""


class MTSSample(object):
    """One labelled multivariate time series.

    Parameters
    ----------
    values : array-like of float, shape (T, C)
        Time-major series values (finite)
    label : int
        Class index

    Raises
    ------
    DatasetError
        If the series is empty, not 2-D or has non-finite values, or the
        label is negative

    """
    def __init__(self, values, label):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DatasetError('Series should be a non-empty (T, C) matrix, got shape %s' % (values.shape,))
        if not np.isfinite(values).all():
            bad = tuple(np.argwhere(~np.isfinite(values))[0])
            raise DatasetError('Series has non-finite value %r at (step, channel) = %s' % (values[bad], bad))
        if int(label) != label or label < 0:
            raise DatasetError('Label should be a non-negative integer, not %r' % (label,))
        self.values = values
        self.label = int(label)

    @property
    def true_len(self):
        """Number of time steps T."""
        return self.values.shape[0]

    @property
    def n_channels(self):
        return self.values.shape[1]

    def __repr__(self):
        """Short human-friendly string representation of sample object."""
        return "<gatedts.MTSSample T=%d C=%d label=%d at 0x%x>" % \
               (self.true_len, self.n_channels, self.label, id(self))

    def __eq__(self, other):
        return isinstance(other, MTSSample) and self.label == other.label and \
            np.array_equal(self.values, other.values)

    def __ne__(self, other):
        return not (self == other)

    __hash__ = object.__hash__


class MTSDataset(object):
    """Labelled train and test collections of multivariate time series.

    The splits are used as given and never resampled.

    Parameters
    ----------
    name : string
        Dataset name
    n_channels : int
        Number of channels C of every series
    n_classes : int
        Number of classes K
    train, test : sequence of :class:`MTSSample`
        Training and test splits
    max_len : int, optional
        Longest allowed series length (longest series by default)
    class_names : sequence of string, optional
        Names of classes in index order

    Raises
    ------
    DatasetError
        If any sample disagrees with the metadata

    """
    def __init__(self, name, n_channels, n_classes, train, test, max_len=None, class_names=None):
        self.name = name
        self.n_channels = int(n_channels)
        self.n_classes = int(n_classes)
        self.train = list(train)
        self.test = list(test)
        if max_len is None:
            max_len = max(s.true_len for s in self.train + self.test) if self.train + self.test else 1
        self.max_len = int(max_len)
        self.class_names = list(class_names) if class_names is not None else None
        self.validate()

    def validate(self):
        """Check that every sample agrees with the metadata (raises :exc:`DatasetError`)."""
        if self.n_channels < 1 or self.n_classes < 1 or self.max_len < 1:
            raise DatasetError('Dataset %r has invalid metadata C=%d, K=%d, max_len=%d'
                               % (self.name, self.n_channels, self.n_classes, self.max_len))
        if self.class_names is not None and len(self.class_names) != self.n_classes:
            raise DatasetError('Dataset %r has %d class names for %d classes'
                               % (self.name, len(self.class_names), self.n_classes))
        for split in SPLITS:
            for n, sample in enumerate(self.split(split)):
                where = '%s sample %d of dataset %r' % (split, n, self.name)
                if sample.n_channels != self.n_channels:
                    raise DatasetError('%s has %d channels, expected %d'
                                       % (where.capitalize(), sample.n_channels, self.n_channels))
                if sample.label >= self.n_classes:
                    raise DatasetError('%s has label %d out of range [0, %d)'
                                       % (where.capitalize(), sample.label, self.n_classes))
                if sample.true_len > self.max_len:
                    raise DatasetError('%s has length %d exceeding max_len %d'
                                       % (where.capitalize(), sample.true_len, self.max_len))

    def split(self, name):
        """Samples of split `name` ('train' or 'test')."""
        if name not in SPLITS:
            raise DatasetError('Unknown split %r, expected one of %s' % (name, SPLITS))
        return self.train if name == 'train' else self.test

    def __repr__(self):
        """Short human-friendly string representation of dataset object."""
        return "<gatedts.MTSDataset %r C=%d K=%d max_len=%d train=%d test=%d at 0x%x>" % \
               (self.name, self.n_channels, self.n_classes, self.max_len,
                len(self.train), len(self.test), id(self))

    @property
    def meta(self):
        """Metadata manifest as a dict."""
        return {'format_version': FORMAT_VERSION, 'name': self.name,
                'n_channels': self.n_channels, 'n_classes': self.n_classes,
                'max_len': self.max_len, 'class_names': self.class_names,
                'splits': dict((split, len(self.split(split))) for split in SPLITS)}

# --------------------------------------------------------------------------------------------------
# --- Reading and writing
# --------------------------------------------------------------------------------------------------


def _read_lines(filename):
    try:
        with open(filename, encoding='utf-8') as text_file:
            return [line.strip() for line in text_file if line.strip()]
    except (IOError, OSError, UnicodeDecodeError) as exc:
        raise DatasetError('Could not read %r: %s' % (filename, exc))


def _read_series(filename):
    """Read comma-separated series file exactly as written."""
    rows = [line.split(',') for line in _read_lines(filename)]
    if not rows:
        raise DatasetError('Series file %r is empty' % (filename,))
    widths = set(len(row) for row in rows)
    if len(widths) > 1:
        raise DatasetError('Series file %r has rows with differing channel counts %s'
                           % (filename, sorted(widths)))
    try:
        return np.array(rows, dtype=np.float64)
    except ValueError as exc:
        raise DatasetError('Series file %r has a non-numeric value: %s' % (filename, exc))


def _read_labels(filename):
    labels = []
    for line in _read_lines(filename):
        try:
            labels.append(int(line))
        except ValueError:
            raise DatasetError('Label file %r has non-integer label %r' % (filename, line))
    return labels


def load_dataset(path):
    """Load dataset from directory.

    Parameters
    ----------
    path : string
        Dataset directory containing meta.json and the split subdirectories

    Returns
    -------
    dataset : :class:`MTSDataset` object
        Validated dataset with values exactly as stored

    Raises
    ------
    DatasetError
        If the manifest is missing or the data disagrees with it (channel
        count, sample count, non-finite value, label out of range)

    """
    meta_file = os.path.join(path, 'meta.json')
    if not os.path.isfile(meta_file):
        raise DatasetError('Dataset directory %r has no meta.json manifest' % (path,))
    try:
        with open(meta_file, encoding='utf-8') as json_file:
            meta = json.load(json_file)
        name = meta.get('name', os.path.basename(os.path.normpath(path)))
        n_channels, n_classes, max_len = meta['n_channels'], meta['n_classes'], meta['max_len']
        counts = meta['splits']
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise DatasetError('Invalid manifest %r: %s' % (meta_file, exc))
    version = meta.get('format_version', FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise DatasetError('Manifest %r has unsupported format version %r' % (meta_file, version))
    splits = {}
    for split in SPLITS:
        split_dir = os.path.join(path, split)
        labels = _read_labels(os.path.join(split_dir, 'labels.txt'))
        if len(labels) != counts.get(split, 0):
            raise DatasetError('Split %r of %r has %d labels but manifest lists %d samples'
                               % (split, path, len(labels), counts.get(split, 0)))
        samples = []
        for n, label in enumerate(labels):
            filename = os.path.join(split_dir, '%05d.csv' % (n,))
            try:
                samples.append(MTSSample(_read_series(filename), label))
            except DatasetError as exc:
                raise DatasetError('%s (in %r)' % (exc, filename))
        splits[split] = samples
    dataset = MTSDataset(name, n_channels, n_classes, splits['train'], splits['test'],
                         max_len, meta.get('class_names'))
    logger.info('Loaded dataset %r: %d train / %d test samples, C=%d, K=%d, max_len=%d',
                dataset.name, len(dataset.train), len(dataset.test),
                dataset.n_channels, dataset.n_classes, dataset.max_len)
    return dataset


def save_dataset(dataset, path):
    """Write dataset to directory in the format read by :func:`load_dataset`."""
    for split in SPLITS:
        split_dir = os.path.join(path, split)
        if not os.path.isdir(split_dir):
            os.makedirs(split_dir)
        samples = dataset.split(split)
        with open(os.path.join(split_dir, 'labels.txt'), 'w') as label_file:
            label_file.writelines('%d\n' % (sample.label,) for sample in samples)
        for n, sample in enumerate(samples):
            np.savetxt(os.path.join(split_dir, '%05d.csv' % (n,)), sample.values,
                       fmt='%.17g', delimiter=',')
    with open(os.path.join(path, 'meta.json'), 'w') as json_file:
        json.dump(dataset.meta, json_file, sort_keys=True, indent=2)
        json_file.write('\n')
    logger.info('Saved dataset %r to %s', dataset.name, path)

# --------------------------------------------------------------------------------------------------
# --- Batching
# --------------------------------------------------------------------------------------------------


class Batch(object):
    """Zero-padded batch of series.

    Attributes
    ----------
    values : array of float, shape (B, T_b, C)
        Series padded with zeros to the longest true length T_b in the batch
    true_lens : array of int, shape (B,)
        Number of real time steps per series
    labels : array of int, shape (B,)
        Class indices
    indices : array of int, shape (B,)
        Positions of the series in the list given to :func:`batchify`

    """
    def __init__(self, samples, indices=None):
        samples = list(samples)
        if not samples:
            raise DatasetError('Cannot form a batch from an empty list of samples')
        self.true_lens = np.array([s.true_len for s in samples], dtype=int)
        self.labels = np.array([s.label for s in samples], dtype=int)
        self.indices = np.arange(len(samples)) if indices is None else np.asarray(indices, dtype=int)
        self.values = np.zeros((len(samples), self.true_lens.max(), samples[0].n_channels))
        for n, sample in enumerate(samples):
            self.values[n, :sample.true_len] = sample.values

    def __len__(self):
        return len(self.labels)

    def __repr__(self):
        """Short human-friendly string representation of batch object."""
        return "<gatedts.Batch shape=%s at 0x%x>" % (self.values.shape, id(self))

    def samples(self):
        """Unpad the batch back into its original samples."""
        return [MTSSample(values[:n], label)
                for values, n, label in zip(self.values, self.true_lens, self.labels)]


def batchify(samples, batch_size=16, rng=None, shuffle=False):
    """Group samples into zero-padded batches.

    Parameters
    ----------
    samples : sequence of :class:`MTSSample`
        Samples to batch
    batch_size : int, optional
        Maximum number of samples per batch (the last batch may be smaller)
    rng : :class:`gatedts.Rng` object, optional
        Random stream used to shuffle (required if `shuffle` is True)
    shuffle : bool, optional
        True to randomise the sample order before batching

    Returns
    -------
    batches : list of :class:`Batch` objects
        Batches, each padded to its own longest series

    Raises
    ------
    DatasetError
        If `samples` is empty

    """
    samples = list(samples)
    if not samples:
        raise DatasetError('Cannot batch an empty list of samples')
    if batch_size < 1:
        raise ValueError('Batch size should be at least 1, not %d' % (batch_size,))
    if shuffle:
        if rng is None:
            raise ValueError('Shuffling needs a random stream')
        order = rng.permutation(len(samples))
    else:
        order = np.arange(len(samples))
    return [Batch([samples[i] for i in chunk], chunk)
            for chunk in (order[start:start + batch_size] for start in range(0, len(order), batch_size))]

# --------------------------------------------------------------------------------------------------
# --- Synthetic data
# --------------------------------------------------------------------------------------------------


class SynthSpec(object):
    """Recipe for a synthetic dataset of noisy sinusoids.

    Series of class k have values x[t, c] = s a_c sin(w_k t + phi_k + theta_c)
    plus Gaussian noise, where the class sets the frequency w_k and phase
    phi_k, each channel has its own amplitude a_c and phase offset theta_c,
    and s is a random amplitude scale in [1 - jitter, 1 + jitter] per series.

    Parameters
    ----------
    n_classes : int, optional
        Number of classes
    n_channels : int, optional
        Number of channels
    min_len, max_len : int, optional
        Range of series lengths (inclusive)
    noise : float, optional
        Standard deviation of additive Gaussian noise
    train_per_class, test_per_class : int, optional
        Number of series per class in each split
    jitter : float, optional
        Relative amplitude variation between series

    """
    def __init__(self, n_classes=2, n_channels=4, min_len=20, max_len=30, noise=0.1,
                 train_per_class=100, test_per_class=50, jitter=0.1):
        if not 1 <= min_len <= max_len:
            raise ValueError('Length range [%d, %d] is invalid' % (min_len, max_len))
        self.n_classes = n_classes
        self.n_channels = n_channels
        self.min_len = min_len
        self.max_len = max_len
        self.noise = noise
        self.train_per_class = train_per_class
        self.test_per_class = test_per_class
        self.jitter = jitter

    def __repr__(self):
        return "<gatedts.SynthSpec K=%d C=%d T=%d-%d noise=%g at 0x%x>" % \
               (self.n_classes, self.n_channels, self.min_len, self.max_len, self.noise, id(self))


def synth_dataset(spec, rng, name='synthetic'):
    """Generate a synthetic dataset of class-specific sinusoids.

    Parameters
    ----------
    spec : :class:`SynthSpec` object
        Recipe of dataset
    rng : :class:`gatedts.Rng` object
        Random stream (typically 'synth')
    name : string, optional
        Dataset name

    Returns
    -------
    dataset : :class:`MTSDataset` object
        Dataset with `spec.max_len` as its max_len, classes interleaved

    """
    freqs = 0.3 + 0.25 * np.arange(spec.n_classes)
    phases = np.pi * np.arange(spec.n_classes) / spec.n_classes
    amplitudes = 1.0 + 0.5 * np.arange(spec.n_channels) / spec.n_channels
    offsets = 0.5 * np.pi * np.arange(spec.n_channels) / spec.n_channels

    def make_split(per_class):
        samples = []
        for _ in range(per_class):
            for k in range(spec.n_classes):
                length = rng.integers(spec.min_len, spec.max_len + 1)
                scale = rng.uniform(1.0 - spec.jitter, 1.0 + spec.jitter)
                t = np.arange(length)[:, np.newaxis]
                clean = scale * amplitudes * np.sin(freqs[k] * t + phases[k] + offsets)
                samples.append(MTSSample(clean + spec.noise * rng.normal(shape=clean.shape), k))
        return samples

    train = make_split(spec.train_per_class)
    test = make_split(spec.test_per_class)
    return MTSDataset(name, spec.n_channels, spec.n_classes, train, test, spec.max_len)


def nearest_neighbour_accuracy(dataset):
    """Test accuracy of a 1-nearest-neighbour Euclidean classifier.

    Each pair of series is compared over their common prefix of time steps.
    This serves as a separability check for datasets.
    """
    correct = 0
    for sample in dataset.test:
        distances = [np.linalg.norm(sample.values[:ref.true_len] - ref.values[:sample.true_len])
                     for ref in dataset.train]
        correct += dataset.train[int(np.argmin(distances))].label == sample.label
    return correct / len(dataset.test)
