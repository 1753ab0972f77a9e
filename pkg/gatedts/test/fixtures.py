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

"""Small models and datasets shared by the tests."""

import numpy as np

import gatedts


def small_config(variant='gated', n_channels=3, n_classes=2, max_len=6, **kwargs):
    """Tiny network that keeps finite-difference checks fast."""
    fields = dict(n_channels=n_channels, n_classes=n_classes, max_len=max_len, d_model=4,
                  n_heads=2, n_layers=1, d_ff=8, d_tower=3, dropout_p=0.0, variant=variant)
    fields.update(kwargs)
    return gatedts.ModelConfig(**fields)


def toy_samples(seed=1, lengths=(6, 4), n_channels=3, n_classes=2):
    """Random labelled series of the given lengths."""
    rng = np.random.RandomState(seed)
    return [gatedts.MTSSample(rng.randn(length, n_channels), n % n_classes)
            for n, length in enumerate(lengths)]


def toy_dataset(seed=1, n_train=6, n_test=4, n_channels=3, n_classes=2, min_len=3, max_len=6):
    """Random dataset of short series with variable lengths."""
    rng = np.random.RandomState(seed)

    def make(count):
        return [gatedts.MTSSample(rng.randn(rng.randint(min_len, max_len + 1), n_channels), n % n_classes)
                for n in range(count)]
    return gatedts.MTSDataset('toy', n_channels, n_classes, make(n_train), make(n_test), max_len)
