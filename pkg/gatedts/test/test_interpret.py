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

"""Tests for the interpret module."""

import os
import json
import shutil
import tempfile
import unittest

import numpy as np

import gatedts
from gatedts.interpret import export_gate_stats

from .fixtures import small_config, toy_samples


def recursive_dtw(a, b):
    """Memoised textbook recursion of the DTW accumulated cost."""
    memo = {}

    def cost(i, j):
        if (i, j) not in memo:
            if i == 0 and j == 0:
                prev = 0.0
            elif i == 0:
                prev = cost(i, j - 1)
            elif j == 0:
                prev = cost(i - 1, j)
            else:
                prev = min(cost(i - 1, j), cost(i, j - 1), cost(i - 1, j - 1))
            memo[i, j] = abs(a[i] - b[j]) + prev
        return memo[i, j]
    return cost(len(a) - 1, len(b) - 1)


def warping_paths(n, m):
    """All monotone warping paths from (0, 0) to (n - 1, m - 1)."""
    if n == 1 and m == 1:
        return [[(0, 0)]]
    paths = []
    for di, dj in ((1, 0), (0, 1), (1, 1)):
        if n - di >= 1 and m - dj >= 1:
            paths += [path + [(n - 1, m - 1)] for path in warping_paths(n - di, m - dj)]
    return paths


class TestDTW(unittest.TestCase):
    """Test dynamic time warping."""

    def test_examples(self):
        self.assertEqual(gatedts.dtw([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]), 0.0)
        self.assertEqual(gatedts.dtw([0.0], [1.0, 2.0]), 3.0)
        self.assertEqual(gatedts.dtw([0.0, 0.0, 1.0], [0.0, 1.0, 1.0]), 0.0)
        self.assertEqual(gatedts.dtw([5.0], [2.0]), 3.0)
        self.assertRaises(ValueError, gatedts.dtw, [], [1.0])

    def test_recursive_oracle(self):
        rng = np.random.RandomState(1)
        for _ in range(100):
            a, b = rng.randn(rng.randint(1, 9)), rng.randn(rng.randint(1, 9))
            self.assertEqual(gatedts.dtw(a, b), recursive_dtw(a, b))
            self.assertEqual(gatedts.dtw(a, b), gatedts.dtw(b, a))

    def test_path_enumeration(self):
        """Accumulated cost is the cheapest warping path."""
        rng = np.random.RandomState(2)
        for _ in range(30):
            a = rng.randint(-5, 6, rng.randint(1, 5)).astype(float)
            b = rng.randint(-5, 6, rng.randint(1, 5)).astype(float)
            cheapest = min(sum(abs(a[i] - b[j]) for i, j in path) for path in warping_paths(len(a), len(b)))
            self.assertEqual(gatedts.dtw(a, b), cheapest)


class TestDistanceMatrices(unittest.TestCase):
    """Test channel DTW and step Euclidean matrices."""

    def test_channel_dtw(self):
        values = np.array([[0.0, 0.0, 1.0], [1.0, 1.0, 2.0], [2.0, 2.0, 0.0]])
        matrix = gatedts.channel_dtw_matrix(gatedts.MTSSample(values, 0))
        self.assertEqual(matrix.kind, 'dtw-channel')
        self.assertEqual(matrix.values[0, 1], 0.0)
        self.assertEqual(matrix.values[0, 2], gatedts.dtw(values[:, 0], values[:, 2]))
        np.testing.assert_array_equal(matrix.values, matrix.values.T)
        padded = np.vstack([values, np.full((2, 3), 9.0)])
        np.testing.assert_array_equal(gatedts.channel_dtw_matrix(padded, 3).values, matrix.values)

    def test_step_euclid(self):
        rng = np.random.RandomState(3)
        values = rng.randn(5, 3)
        matrix = gatedts.step_euclid_matrix(values)
        self.assertEqual(len(matrix), 5)
        for s in range(5):
            for t in range(5):
                self.assertAlmostEqual(matrix.values[s, t], np.linalg.norm(values[s] - values[t]), places=12)
        self.assertEqual(gatedts.step_euclid_matrix(values[:1]).values.shape, (1, 1))

    def test_invalid(self):
        self.assertRaises(ValueError, gatedts.DistanceMatrix, 'cosine', np.zeros((2, 2)))
        self.assertRaises(ValueError, gatedts.DistanceMatrix, 'euclid-step', np.zeros((2, 3)))
        self.assertRaises(ValueError, gatedts.DistanceMatrix, 'euclid-step', [[0.0, 1.0], [2.0, 0.0]])
        self.assertRaises(ValueError, gatedts.DistanceMatrix, 'euclid-step', [[1.0, 1.0], [1.0, 0.0]])
        self.assertRaises(ValueError, gatedts.DistanceMatrix, 'euclid-step', [[0.0, -1.0], [-1.0, 0.0]])


class TestExports(unittest.TestCase):
    """Test gate statistics and attention / embedding exports."""

    def setUp(self):
        self.tempdir = tempfile.mkdtemp()
        self.samples = toy_samples(lengths=(6, 4, 5))
        self.model = gatedts.GatedTransformer(small_config('gated'), seed=1)

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def test_gate_stats(self):
        stats = gatedts.gate_stats(self.model, self.samples, batch_size=2)
        self.assertEqual(len(stats), 3)
        self.assertEqual(sum(stats.mean), 1.0)
        _, record = self.model.forward(gatedts.Batch(self.samples))
        np.testing.assert_allclose(stats.pairs, record.gate_weights, rtol=0, atol=1e-12)
        export_gate_stats(stats, self.tempdir)
        with open(os.path.join(self.tempdir, 'gate_stats.json')) as json_file:
            self.assertEqual(json.load(json_file)['n_samples'], 3)
        rows = np.loadtxt(os.path.join(self.tempdir, 'gate_weights.csv'), delimiter=',', skiprows=1)
        np.testing.assert_array_equal(rows[:, 1:], stats.pairs)
        concat = gatedts.GatedTransformer(small_config('concat'), seed=1)
        self.assertRaises(ValueError, gatedts.gate_stats, concat, self.samples)
        self.assertRaises(ValueError, gatedts.GateStats, np.zeros((0, 2)))

    def test_attention(self):
        sample = self.samples[1]
        out_dir = os.path.join(self.tempdir, 'sample')
        manifest = gatedts.export_attention(self.model, sample, out_dir, sample_id=7)
        self.assertEqual(len(manifest), 8)
        self.assertTrue(all(entry['sample_id'] == 7 for entry in manifest))
        with open(os.path.join(out_dir, 'attention.json')) as json_file:
            self.assertEqual(json.load(json_file), manifest)
        _, record = self.model.forward_sample(sample)
        step_mean = np.loadtxt(os.path.join(out_dir, 'attention_step_layer0_mean.csv'), delimiter=',')
        self.assertEqual(step_mean.shape, (4, 4))
        np.testing.assert_array_equal(step_mean, record.step_attention[0].mean(axis=0))
        head = np.loadtxt(os.path.join(out_dir, 'attention_channel_layer0_head1.csv'), delimiter=',')
        np.testing.assert_array_equal(head, record.channel_attention[0, 1])
        np.testing.assert_allclose(head.sum(axis=1), 1.0, rtol=0, atol=1e-12)
        dtw = np.loadtxt(os.path.join(out_dir, 'dtw_channel.csv'), delimiter=',')
        np.testing.assert_array_equal(dtw, gatedts.channel_dtw_matrix(sample).values)
        euclid = np.loadtxt(os.path.join(out_dir, 'euclid_step.csv'), delimiter=',')
        self.assertEqual(euclid.shape, (4, 4))

    def test_single_tower_attention(self):
        model = gatedts.GatedTransformer(small_config('channel+mask'), seed=2)
        manifest = gatedts.export_attention(model, self.samples[0], self.tempdir)
        towers = [entry['tower'] for entry in manifest if entry['kind'] == 'attention']
        self.assertEqual(towers, ['channel'] * 3)
        head = np.loadtxt(os.path.join(self.tempdir, 'attention_channel_layer0_head0.csv'), delimiter=',')
        self.assertTrue((head[np.triu_indices(3, 1)] == 0.0).all())

    def test_embeddings(self):
        filenames = gatedts.export_embeddings(self.model, self.samples, self.tempdir, sample_ids=[10, 11, 12],
                                              batch_size=2)
        self.assertEqual(filenames, ['embeddings.csv', 'features.csv'])
        with open(os.path.join(self.tempdir, 'embeddings.csv')) as csv_file:
            self.assertEqual(csv_file.readline().strip(), 'sample,step,label,e_0,e_1,e_2,e_3')
        embeddings = np.loadtxt(os.path.join(self.tempdir, 'embeddings.csv'), delimiter=',', skiprows=1)
        self.assertEqual(embeddings.shape, (15, 7))
        np.testing.assert_array_equal(embeddings[:6, 0], 10)
        np.testing.assert_array_equal(embeddings[6:10, 1], np.arange(4))
        features = np.loadtxt(os.path.join(self.tempdir, 'features.csv'), delimiter=',', skiprows=1)
        self.assertEqual(features.shape, (3, 8))
        np.testing.assert_array_equal(features[:, 1], [0, 1, 0])
        _, record = self.model.forward_sample(self.samples[2])
        np.testing.assert_allclose(features[2, 2:], record.fused_features, rtol=0, atol=1e-12)
        filenames = gatedts.export_embeddings(gatedts.GatedTransformer(small_config('channel'), seed=1),
                                              self.samples[0], os.path.join(self.tempdir, 'channel'))
        self.assertEqual(filenames, ['features.csv'])
