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

import argparse
import collections
import os
import sys

import numpy as np

import gatedts


def validate_dataset(path):
    """
    Load a dataset directory and summarise it.

    Parameters
    ----------
    path : string
        Dataset directory

    Returns
    -------
    dataset_validation_pass : bool
        Dataset validation status.
    """
    try:
        dataset = gatedts.load_dataset(path)
    except gatedts.DatasetError as exception:
        print("\nDataset Error!\n{}".format(exception))
        return False
    print(repr(dataset))
    for split in gatedts.dataset.SPLITS:
        samples = dataset.split(split)
        if not samples:
            print("{:>5}: empty".format(split))
            continue
        lengths = np.array([s.true_len for s in samples])
        counts = collections.Counter(s.label for s in samples)
        print("{:>5}: {} series, lengths {}-{}, class counts {}".format(
            split, len(samples), lengths.min(), lengths.max(),
            [counts.get(k, 0) for k in range(dataset.n_classes)]))
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
            Validate a gatedts dataset directory (manifest, labels and series
            files) and summarise its splits.
        """)
    parser.add_argument('path', help="Dataset directory")
    config = parser.parse_args()

    if not os.path.isdir(config.path):
        parser.error("\nDirectory {} does not exist!\n".format(config.path))

    return config


def main():
    config = parse_cmd_line()
    if validate_dataset(config.path):
        print("No errors found in {}".format(config.path))
    else:
        sys.exit(1)


if __name__ == "__main__":
    main()
