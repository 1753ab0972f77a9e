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

"""Seeded random number streams split by purpose.

Every source of randomness in a run draws from an :class:`Rng` stream
identified by a seed and a purpose name. The underlying algorithm is the
PCG64 permuted congruential generator of :mod:`numpy.random`, and each
stream is seeded by a :class:`numpy.random.SeedSequence` built from the
run seed with the purpose index as its spawn key. Streams are therefore
independent of each other and of the order in which they are used: changing
the dropout rate does not change the initial weights. Initialisation further
draws each parameter from its own sub-stream keyed by the parameter name
(see :meth:`Rng.spawn`), so all ablation variants sharing a seed start from
identical initial parameters for the parts they have in common.

"""

import zlib

import numpy as np

#: Purposes of random streams, mapped to their spawn key in this order
STREAMS = ('init', 'dropout', 'shuffle', 'synth')


class Rng(object):
    """Deterministic random number stream for one purpose.

    Parameters
    ----------
    seed : int
        Run seed (any non-negative integer, typically 64-bit)
    stream : {'init', 'dropout', 'shuffle', 'synth'}, optional
        Purpose of the stream

    Raises
    ------
    ValueError
        If the seed is negative or the stream name is unknown

    """

    def __init__(self, seed=0, stream='init'):
        if stream not in STREAMS:
            raise ValueError("Unknown random stream %r, expected one of %s" % (stream, STREAMS))
        seed = int(seed)
        if seed < 0:
            raise ValueError('Random seed should be non-negative, not %d' % (seed,))
        self.seed = seed
        self.stream = stream
        seed_seq = np.random.SeedSequence(seed, spawn_key=(STREAMS.index(stream),))
        self._generator = np.random.Generator(np.random.PCG64(seed_seq))

    def __repr__(self):
        """Short human-friendly string representation of stream object."""
        return "<gatedts.Rng seed=%d stream=%r at 0x%x>" % (self.seed, self.stream, id(self))

    @property
    def state(self):
        """Internal state of bit generator (a dict, as used by numpy)."""
        return self._generator.bit_generator.state

    @state.setter
    def state(self, state):
        self._generator.bit_generator.state = state

    def sibling(self, stream):
        """Fresh stream for another purpose with the same seed."""
        return Rng(self.seed, stream)

    def spawn(self, name):
        """Independent sub-stream of this stream keyed by `name` (a parameter name, say).

        The sub-stream depends only on the seed, the purpose and the name, not
        on how much of this stream has been used.
        """
        child = Rng(self.seed, self.stream)
        key = (STREAMS.index(self.stream), zlib.crc32(name.encode('utf-8')))
        seed_seq = np.random.SeedSequence(self.seed, spawn_key=key)
        child._generator = np.random.Generator(np.random.PCG64(seed_seq))
        return child

    def random(self, shape=None):
        """Uniform samples in [0, 1)."""
        return self._generator.random(shape)

    def uniform(self, low, high, shape=None):
        """Uniform samples in [low, high)."""
        return self._generator.uniform(low, high, shape)

    def normal(self, loc=0.0, scale=1.0, shape=None):
        """Gaussian samples."""
        return self._generator.normal(loc, scale, shape)

    def integers(self, low, high, shape=None):
        """Integer samples in [low, high)."""
        return self._generator.integers(low, high, shape)

    def permutation(self, n):
        """Random permutation of range(n)."""
        return self._generator.permutation(n)
