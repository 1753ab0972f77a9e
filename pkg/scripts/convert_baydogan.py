#!/usr/bin/env python
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
#
# Tool that converts a multivariate time-series archive file in MATLAB format
# into a gatedts dataset directory.
#
# The archive keeps each dataset in a .mat file holding a struct called `mts`
# with fields `train`, `trainlabels`, `test` and `testlabels`. The `train` and
# `test` fields are cell arrays of C x T matrices (channels by time steps, with
# T varying between series for some datasets) and the label fields are vectors
# of class labels. For example:
#
#   ./convert_baydogan.py JapaneseVowels.mat data/JapaneseVowels
#
# Labels are remapped to 0 .. K-1 in sorted order, and the original labels are
# kept as class names. The longest series sets max_len.
#

import argparse
import logging
import os
import sys

import numpy as np
import scipy.io

import gatedts


def _label_name(label):
    """Original label as a string (integral values without decimals)."""
    label = np.asarray(label).item()
    if isinstance(label, float) and label.is_integer():
        label = int(label)
    return str(label).strip()


def read_archive(filename, name=None):
    """Read a multivariate archive .mat file into a dataset.

    Parameters
    ----------
    filename : string
        MATLAB file with struct `mts`
    name : string, optional
        Dataset name (file name without extension by default)

    Returns
    -------
    dataset : :class:`gatedts.MTSDataset` object
        Dataset with time-major series and labels remapped to 0 .. K-1

    Raises
    ------
    gatedts.DatasetError
        If the file lacks the expected struct or holds invalid series

    """
    if name is None:
        name = os.path.splitext(os.path.basename(filename))[0]
    try:
        mts = scipy.io.loadmat(filename, struct_as_record=False, squeeze_me=False)['mts'][0, 0]
        splits = dict((split, (np.asarray(getattr(mts, split)).ravel(),
                               np.asarray(getattr(mts, split + 'labels')).ravel()))
                      for split in gatedts.dataset.SPLITS)
    except (IOError, OSError, ValueError, KeyError, IndexError, AttributeError) as exc:
        raise gatedts.DatasetError('Could not read archive struct mts from %r: %s' % (filename, exc))
    names = sorted(set(_label_name(label) for _, labels in splits.values() for label in labels),
                   key=lambda s: (float(s), s) if _is_number(s) else (np.inf, s))
    index = dict((label, n) for n, label in enumerate(names))
    samples = {}
    for split, (series, labels) in splits.items():
        if len(series) != len(labels):
            raise gatedts.DatasetError('Split %r of %r has %d series but %d labels'
                                       % (split, filename, len(series), len(labels)))
        samples[split] = [gatedts.MTSSample(np.asarray(values, dtype=np.float64).T, index[_label_name(label)])
                          for values, label in zip(series, labels)]
    n_channels = samples['train'][0].n_channels
    return gatedts.MTSDataset(name, n_channels, len(names), samples['train'], samples['test'],
                              class_names=names)


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_cmd_line():
    """
    Parse the script command-line arguments.

    Returns
    -------
    config : argparse.Namespace
        Command-line arguments
    """
    parser = argparse.ArgumentParser(
        description="""
            Convert a multivariate time-series archive .mat file (struct mts)
            into a gatedts dataset directory.
        """)
    parser.add_argument('filename', help="MATLAB file with struct mts")
    parser.add_argument('out', help="Output dataset directory")
    parser.add_argument('--name', help="Dataset name [file name without extension]")
    config = parser.parse_args()

    if not os.path.exists(config.filename):
        parser.error("\nFile {} does not exist!\n".format(config.filename))

    return config


def main():
    config = parse_cmd_line()
    logging.basicConfig(level=logging.INFO, format='%(name)s %(levelname)s %(message)s')
    try:
        dataset = read_archive(config.filename, config.name)
    except gatedts.DatasetError as exc:
        print("\nConversion failed!\n{}".format(exc))
        sys.exit(1)
    gatedts.save_dataset(dataset, config.out)
    print("Converted {!r}: C={}, K={}, max_len={}, {} train / {} test series".format(
        dataset.name, dataset.n_channels, dataset.n_classes, dataset.max_len,
        len(dataset.train), len(dataset.test)))


if __name__ == "__main__":
    main()
