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

"""Tests for the training module."""

import os
import shutil
import tempfile
import unittest

import numpy as np

import gatedts

from .fixtures import small_config, toy_dataset


def synthetic_task():
    spec = gatedts.SynthSpec(n_classes=2, n_channels=2, min_len=5, max_len=8, noise=0.05,
                             train_per_class=8, test_per_class=4)
    return gatedts.synth_dataset(spec, gatedts.Rng(3, 'synth'), 'sines')


class TestEvaluation(unittest.TestCase):
    """Test accuracy and confusion counts."""

    def test_result(self):
        result = gatedts.EvalResult([0, 1, 1, 2], [0, 1, 2, 2], 3)
        self.assertEqual(result.accuracy, 0.75)
        np.testing.assert_array_equal(result.confusion, [[1, 0, 0], [0, 1, 0], [0, 1, 1]])

    def test_evaluate(self):
        dataset = toy_dataset()
        model = gatedts.GatedTransformer(small_config(), seed=0)
        result = gatedts.evaluate(model, dataset.test, batch_size=3)
        np.testing.assert_array_equal(result.predictions, model.predict(dataset.test))
        self.assertEqual(result.confusion.sum(), 4)
        self.assertRaises(gatedts.DatasetError, gatedts.evaluate, model, [])


class TestTrainLog(unittest.TestCase):
    """Test training history."""

    def setUp(self):
        self.tempdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def test_log(self):
        log = gatedts.TrainLog()
        self.assertTrue(log.append(1, 0.9, 0.5, 0.5, 0.1))
        self.assertFalse(log.append(2, 0.95, np.nan, np.nan, 0.1))
        self.assertTrue(log.append(3, 0.5, 0.75, 0.25, 0.05))
        self.assertEqual(log.best_train_loss_epoch, 3)
        self.assertEqual(log.best_test_accuracy, (0.5, 1))
        np.testing.assert_array_equal(log.column('lr'), [0.1, 0.1, 0.05])
        self.assertRaises(ValueError, log.append, 3, 0.1, 0.0, 0.0, 0.1)
        path = os.path.join(self.tempdir, 'log.csv')
        log.to_csv(path)
        with open(path) as csv_file:
            lines = csv_file.read().splitlines()
        self.assertEqual(lines[0], 'epoch,train_loss,train_acc,test_acc,lr')
        self.assertEqual(lines[1], '1,0.90000000000000002,0.5,0.5,0.10000000000000001')
        self.assertEqual(lines[2].split(',')[2], 'nan')
        self.assertEqual(len(lines), 4)

    def test_empty(self):
        best, epoch = gatedts.TrainLog().best_test_accuracy
        self.assertTrue(np.isnan(best))
        self.assertIsNone(epoch)


class TestTrain(unittest.TestCase):
    """Test training loop."""

    def setUp(self):
        self.tempdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def test_learns(self):
        """Training loss drops well below chance on separable sinusoids."""
        dataset = synthetic_task()
        model = gatedts.GatedTransformer(small_config(n_channels=2, max_len=8), seed=1)
        config = gatedts.TrainConfig(lr=0.05, batch_size=4, max_epochs=60, eval_interval=20, seed=1)
        log = gatedts.train(model, dataset, config)
        self.assertEqual(len(log), 60)
        self.assertLess(log.best_train_loss, 0.7 * log.records[0][1])
        self.assertTrue(np.isnan(log.column('test_acc')[:19]).all())
        self.assertFalse(np.isnan(log.column('test_acc')[19]))
        self.assertIsNotNone(log.report_test_accuracy)
        self.assertGreaterEqual(gatedts.evaluate(model, dataset.train).accuracy, 0.75)

    def test_deterministic(self):
        """Same seed gives the same trajectory and parameters."""
        dataset = toy_dataset()
        config = gatedts.TrainConfig(lr=0.01, batch_size=4, max_epochs=3, seed=5)
        runs = []
        for _ in range(2):
            model = gatedts.GatedTransformer(small_config(dropout_p=0.1), seed=5)
            runs.append((gatedts.train(model, dataset, config), model))
        np.testing.assert_array_equal(np.array(runs[0][0].records), np.array(runs[1][0].records))
        self.assertEqual(runs[0][1].params, runs[1][1].params)

    def test_checkpoint(self):
        """Checkpoint holds the parameters with the lowest training loss."""
        path = os.path.join(self.tempdir, 'best.ckpt')
        dataset = toy_dataset()
        model = gatedts.GatedTransformer(small_config('concat'), seed=2)
        config = gatedts.TrainConfig(lr=0.01, batch_size=3, max_epochs=4, seed=2)
        log = gatedts.train(model, dataset, config, path)
        loaded = gatedts.GatedTransformer.load(path)
        self.assertEqual(loaded.params, model.params)
        self.assertEqual(log.report_test_accuracy, gatedts.evaluate(loaded, dataset.test).accuracy)

    def test_early_stop(self):
        """Training stops once the rate is at its floor and the loss is stuck."""
        dataset = toy_dataset()
        model = gatedts.GatedTransformer(small_config('step'), seed=3)
        config = gatedts.TrainConfig(lr=0.01, min_lr=0.01, plateau_patience=1, plateau_threshold=1.0,
                                     max_epochs=50, seed=3)
        log = gatedts.train(model, dataset, config)
        self.assertEqual(len(log), 2)

    def test_numeric_error(self):
        """Non-finite loss aborts training and leaves the checkpoint intact."""
        path = os.path.join(self.tempdir, 'best.ckpt')
        dataset = toy_dataset()
        model = gatedts.GatedTransformer(small_config('channel'), seed=4)
        config = gatedts.TrainConfig(lr=0.01, batch_size=3, max_epochs=2, seed=4)
        gatedts.train(model, dataset, config, path)
        with open(path, 'rb') as ckpt:
            contents = ckpt.read()
        model.params['classifier.b'] = [np.nan, 0.0]
        before = model.params.snapshot()
        self.assertRaises(gatedts.NumericError, gatedts.train, model, dataset, config, path)
        for name, value in model.params.snapshot().items():
            np.testing.assert_array_equal(value, before[name])
        with open(path, 'rb') as ckpt:
            self.assertEqual(ckpt.read(), contents)

    def test_zero_learning_rate(self):
        """A zero learning rate leaves every parameter bit-identical."""
        dataset = toy_dataset()
        model = gatedts.GatedTransformer(small_config(dropout_p=0.1), seed=6)
        before = model.params.snapshot()
        config = gatedts.TrainConfig(lr=0.0, min_lr=0.0, batch_size=4, max_epochs=5, seed=6)
        log = gatedts.train(model, dataset, config)
        self.assertEqual(len(log), 5)
        for name, value in model.params.snapshot().items():
            np.testing.assert_array_equal(value, before[name])

    def test_sinusoid_benchmark(self):
        """Gated and concat variants separate four-channel sinusoids of length 20-30."""
        spec = gatedts.SynthSpec(n_classes=2, n_channels=4, min_len=20, max_len=30,
                                 train_per_class=100, test_per_class=50)
        dataset = gatedts.synth_dataset(spec, gatedts.Rng(0, 'synth'), 'sines')
        self.assertEqual((len(dataset.train), len(dataset.test)), (200, 100))
        config = gatedts.TrainConfig(lr=0.01, batch_size=16, max_epochs=40, eval_interval=10, seed=0)
        for variant, target in (('gated', 0.95), ('concat', 0.90)):
            model = gatedts.GatedTransformer(small_config(variant, n_channels=4, max_len=30, d_model=16,
                                                          n_heads=2, d_ff=32, d_tower=16), seed=0)
            log = gatedts.train(model, dataset, config)
            self.assertGreaterEqual(log.report_test_accuracy, target, variant)

    @unittest.skipUnless(os.environ.get('GATEDTS_JAPANESE_VOWELS'),
                         'set GATEDTS_JAPANESE_VOWELS to a converted JapaneseVowels directory')
    def test_japanese_vowels(self):
        """Default gated network on JapaneseVowels (slow: hours on one core)."""
        dataset = gatedts.load_dataset(os.environ['GATEDTS_JAPANESE_VOWELS'])
        run = gatedts.RunConfig().fill_from_dataset(dataset)
        model = gatedts.GatedTransformer(run.model_config(), seed=run.seed)
        log = gatedts.train(model, dataset, run.train_config())
        self.assertGreaterEqual(log.report_test_accuracy, 0.9)
