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

"""Tests for the rng module."""

import unittest

import numpy as np

import gatedts


class TestRng(unittest.TestCase):
    """Test seeded random streams."""

    def test_reproducible(self):
        """Same seed and stream reproduce the same numbers."""
        a, b = gatedts.Rng(42, 'init'), gatedts.Rng(42, 'init')
        np.testing.assert_array_equal(a.random(10), b.random(10))
        np.testing.assert_array_equal(a.normal(shape=(2, 3)), b.normal(shape=(2, 3)))
        np.testing.assert_array_equal(a.permutation(20), b.permutation(20))

    def test_streams_independent(self):
        """Different streams or seeds produce different numbers."""
        x = gatedts.Rng(42, 'init').random(10)
        self.assertFalse(np.array_equal(x, gatedts.Rng(42, 'dropout').random(10)))
        self.assertFalse(np.array_equal(x, gatedts.Rng(43, 'init').random(10)))
        # Drawing from one stream leaves a sibling untouched
        rng = gatedts.Rng(42, 'init')
        rng.random(1000)
        np.testing.assert_array_equal(rng.sibling('dropout').random(10), gatedts.Rng(42, 'dropout').random(10))

    def test_state(self):
        rng = gatedts.Rng(7, 'shuffle')
        state = rng.state
        first = rng.integers(0, 100, 5)
        rng.state = state
        np.testing.assert_array_equal(rng.integers(0, 100, 5), first)

    def test_ranges(self):
        rng = gatedts.Rng(3, 'synth')
        u = rng.uniform(-2.0, 5.0, 1000)
        self.assertTrue((u >= -2.0).all() and (u < 5.0).all())
        n = rng.integers(0, 3, 1000)
        np.testing.assert_array_equal(np.unique(n), [0, 1, 2])
        np.testing.assert_array_equal(np.sort(rng.permutation(7)), np.arange(7))

    def test_invalid(self):
        self.assertRaises(ValueError, gatedts.Rng, 0, 'bogus')
        self.assertRaises(ValueError, gatedts.Rng, -1, 'init')
        self.assertTrue(repr(gatedts.Rng(5, 'dropout')).startswith("<gatedts.Rng seed=5 stream='dropout'"))

    def test_spawn(self):
        """Named sub-streams ignore how much of the parent was used."""
        rng = gatedts.Rng(11, 'init')
        first = rng.spawn('a.W').random(5)
        rng.random(100)
        np.testing.assert_array_equal(rng.spawn('a.W').random(5), first)
        self.assertFalse(np.array_equal(rng.spawn('a.b').random(5), first))
        self.assertFalse(np.array_equal(gatedts.Rng(11, 'dropout').spawn('a.W').random(5), first))
