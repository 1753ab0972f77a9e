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

"""Tests for the gtn module."""

import os
import shutil
import tempfile
import unittest
from collections import OrderedDict

import numpy as np

import gatedts
from gatedts.config import VARIANTS

from .fixtures import small_config, toy_samples


class TestGTNParams(unittest.TestCase):
    """Test parameter sets per variant."""

    def test_names(self):
        gated = gatedts.GTNParams(small_config('gated'))
        self.assertEqual(gated['gate.W'].shape, (6, 2))
        self.assertEqual(gated['step_feature.W'].shape, (24, 3))
        self.assertEqual(gated['channel_feature.W'].shape, (12, 3))
        self.assertEqual(gated['channel_embed.W'].shape, (6, 4))
        self.assertEqual(gated['classifier.W'].shape, (6, 2))
        self.assertEqual(len(gated.layers('step')), 1)
        self.assertEqual(sorted(gated.layers('channel')[0].keys()),
                         sorted(['W_Q', 'W_K', 'W_V', 'W_O', 'W_1', 'b_1', 'W_2', 'b_2',
                                 'ln1_gamma', 'ln1_beta', 'ln2_gamma', 'ln2_beta']))
        concat = gatedts.GTNParams(small_config('concat'))
        self.assertEqual(set(gated.keys()) - set(concat.keys()), set(['gate.W', 'gate.b']))
        step = gatedts.GTNParams(small_config('step+mask'))
        self.assertFalse(any(name.startswith('channel') for name in step.keys()))
        self.assertEqual(step['classifier.W'].shape, (3, 2))
        mean = gatedts.GTNParams(small_config('channel', reduction='mean'))
        self.assertEqual(mean['channel_feature.W'].shape, (4, 3))

    def test_shared_init(self):
        """Variants sharing a seed start with identical common parameters."""
        gated = gatedts.GatedTransformer(small_config('gated'), seed=5).params
        channel = gatedts.GatedTransformer(small_config('channel'), seed=5).params
        for name in channel.keys():
            if name in gated and gated[name].shape == channel[name].shape:
                np.testing.assert_array_equal(gated[name].data, channel[name].data, err_msg=name)
        np.testing.assert_array_equal(gated['channel.layer0.ln1_gamma'].data, np.ones(4))


class TestForward(unittest.TestCase):
    """Test forward pass of every variant."""

    def setUp(self):
        self.samples = toy_samples(lengths=(6, 4, 5))
        self.batch = gatedts.Batch(self.samples)

    def test_outputs(self):
        for variant in VARIANTS:
            model = gatedts.GatedTransformer(small_config(variant), seed=1)
            logits, record = model.forward(self.batch)
            self.assertEqual(logits.shape, (3, 2))
            self.assertTrue(np.isfinite(logits.data).all())
            config = model.config
            self.assertEqual(record.step_attention is not None, config.uses_step_tower)
            self.assertEqual(record.channel_attention is not None, config.uses_channel_tower)
            self.assertEqual(record.gate_weights is not None, variant == 'gated')
            self.assertEqual(record.fused_features.shape, (3, config.feature_width))
            if config.uses_step_tower:
                self.assertEqual(record.step_attention.shape, (3, 1, 2, 6, 6))
                self.assertEqual(record.embedding_outputs.shape, (3, 6, 4))
            if config.uses_channel_tower:
                self.assertEqual(record.channel_attention.shape, (3, 1, 2, 3, 3))

    def test_masks(self):
        """Causal masks leave zero weight above the diagonal, padding masks on padded keys."""
        model = gatedts.GatedTransformer(small_config('concat', use_causal_mask_channel=True), seed=2)
        _, record = model.forward(self.batch)
        upper = np.triu(np.ones((6, 6), dtype=bool), 1)
        self.assertTrue((record.step_attention[..., upper] == 0.0).all())
        self.assertTrue((record.channel_attention[..., np.triu(np.ones((3, 3), dtype=bool), 1)] == 0.0).all())
        self.assertTrue((record.step_attention[1, ..., 4:] == 0.0).all())
        model = gatedts.GatedTransformer(small_config('step'), seed=2)
        _, record = model.forward(self.batch)
        self.assertTrue((record.step_attention[0] > 0.0).all())
        self.assertTrue((record.step_attention[1, ..., 4:] == 0.0).all())

    def test_gate_sums(self):
        model = gatedts.GatedTransformer(small_config('gated'), seed=3)
        _, record = model.forward(self.batch)
        np.testing.assert_array_equal(record.gate_weights.sum(axis=-1), 1.0)
        c, s = record.tower_features['channel'], record.tower_features['step']
        g = record.gate_weights
        np.testing.assert_allclose(record.fused_features, np.hstack([c * g[:, :1], s * g[:, 1:]]), rtol=1e-15)

    def test_padding_invariance(self):
        """A padded sample in a batch classifies as it does on its own."""
        for variant in VARIANTS:
            model = gatedts.GatedTransformer(small_config(variant), seed=4)
            batched, record = model.forward(self.batch)
            for n, sample in enumerate(self.samples):
                logits, single = model.forward_sample(sample)
                np.testing.assert_allclose(batched.data[n], logits.data, rtol=0, atol=1e-8, err_msg=variant)
                if single.step_attention is not None:
                    trimmed = record[n].step_attention
                    self.assertEqual(trimmed.shape[-1], sample.true_len)
                    np.testing.assert_allclose(trimmed, single.step_attention, rtol=0, atol=1e-10)

    def test_gradients(self):
        """Backpropagation agrees with finite differences for every variant."""
        batch = gatedts.Batch(toy_samples(lengths=(6, 4)))
        for variant in VARIANTS:
            model = gatedts.GatedTransformer(small_config(variant), seed=5)
            tensors = OrderedDict(zip(model.params.keys(), model.params.values()))

            def loss():
                return gatedts.cross_entropy(model.forward(batch)[0], batch.labels)
            errors = gatedts.gradient_check(loss, tensors, atol=1e-9)
            worst = max(errors, key=errors.get)
            self.assertLess(errors[worst], 1e-6, '%s: %s' % (variant, worst))

    def test_forced_gate(self):
        """A gate saturated towards one tower matches that tower's single-tower variant."""
        gated = gatedts.GatedTransformer(small_config('gated'), seed=6)
        channel = gatedts.GatedTransformer(small_config('channel'), seed=6)
        gated.params['gate.W'] = np.zeros((6, 2))
        gated.params['gate.b'] = [0.0, -800.0]
        channel.params['classifier.W'] = gated.params['classifier.W'].data[:3]
        channel.params['classifier.b'] = gated.params['classifier.b'].data
        for name in channel.params.keys():
            np.testing.assert_array_equal(channel.params[name].data,
                                          gated.params[name].data[:channel.params[name].shape[0]])
        logits_gated, record = gated.forward(self.batch)
        logits_channel, _ = channel.forward(self.batch)
        np.testing.assert_array_equal(record.gate_weights, [[1.0, 0.0]] * 3)
        np.testing.assert_allclose(logits_gated.data, logits_channel.data, rtol=0, atol=1e-12)

    def test_dropout(self):
        """Training mode is stochastic only when dropout is enabled."""
        model = gatedts.GatedTransformer(small_config('gated', dropout_p=0.3), seed=7)
        train1 = model.forward(self.batch, training=True)[0].data
        train2 = model.forward(self.batch, training=True)[0].data
        self.assertFalse(np.array_equal(train1, train2))
        eval1 = model.forward(self.batch)[0].data
        np.testing.assert_array_equal(model.forward(self.batch)[0].data, eval1)

    def test_bad_input(self):
        model = gatedts.GatedTransformer(small_config('gated'), seed=8)
        self.assertRaises(gatedts.DimensionError, model.forward, np.zeros((1, 7, 3)))
        self.assertRaises(gatedts.DimensionError, model.forward, np.zeros((1, 5, 2)))
        self.assertRaises(gatedts.DimensionError, model.forward, np.zeros((2, 5, 3)), [5, 6])
        self.assertRaises(gatedts.DimensionError, model.forward, np.zeros((2, 5, 3)), [5, 0])
        self.assertRaises(gatedts.DimensionError, model.forward, np.zeros(3))
        logits, _ = model.forward(np.zeros((5, 3)))
        self.assertEqual(logits.shape, (1, 2))

    def test_predict(self):
        model = gatedts.GatedTransformer(small_config('gated'), seed=9)
        predictions = model.predict(self.samples, batch_size=2)
        expected = np.argmax(model.forward(self.batch)[0].data, axis=-1)
        np.testing.assert_array_equal(predictions, expected)
        self.assertEqual(model.predict(self.samples[0]).tolist(), [expected[0]])


class TestCheckpoint(unittest.TestCase):
    """Test saving and loading trained models."""

    def setUp(self):
        self.tempdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def test_round_trip(self):
        path = os.path.join(self.tempdir, 'model.ckpt')
        model = gatedts.GatedTransformer(small_config('concat', reduction='mean'), seed=10)
        model.save(path)
        loaded = gatedts.GatedTransformer.load(path)
        self.assertEqual(loaded.config, model.config)
        self.assertEqual(loaded.seed, 10)
        self.assertEqual(loaded.params, model.params)
        batch = gatedts.Batch(toy_samples())
        np.testing.assert_array_equal(loaded.forward(batch)[0].data, model.forward(batch)[0].data)
        with open(path, 'rb') as ckpt:
            first = ckpt.read()
        loaded.save(path)
        with open(path, 'rb') as ckpt:
            self.assertEqual(ckpt.read(), first)

    def test_bad_checkpoint(self):
        path = os.path.join(self.tempdir, 'model.ckpt')
        params = gatedts.Model([gatedts.Parameter('x', (2,))])
        params.header = {'config': {'variant': 'gated'}}
        with open(path, 'wb') as ckpt:
            params.tofile(ckpt)
        self.assertRaises(gatedts.BadModelFile, gatedts.GatedTransformer.load, path)
        with open(path, 'wb') as ckpt:
            ckpt.write(b'garbage')
        self.assertRaises(gatedts.BadModelFile, gatedts.GatedTransformer.load, path)

    def test_mismatched_params(self):
        params = gatedts.GTNParams(small_config('gated'))
        self.assertRaises(gatedts.ConfigError, gatedts.GatedTransformer, small_config('concat'), params)
