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

"""Unit test suite for gatedts."""

import logging
import sys
import unittest

from gatedts.test import test_tensor
from gatedts.test import test_functional
from gatedts.test import test_rng
from gatedts.test import test_model
from gatedts.test import test_config
from gatedts.test import test_layers
from gatedts.test import test_gtn
from gatedts.test import test_dataset
from gatedts.test import test_optim
from gatedts.test import test_training
from gatedts.test import test_interpret
from gatedts.test import test_cli

# Enable verbose logging to stdout for gatedts module - see output via pytest -s flag
logger = logging.getLogger("gatedts")
logger.setLevel(logging.DEBUG)
ch = logging.StreamHandler(sys.stdout)
ch.setLevel(logging.DEBUG)
ch.setFormatter(logging.Formatter("LOG: %(name)s %(levelname)s %(message)s"))
logger.addHandler(ch)


def suite():
    loader = unittest.TestLoader()
    testsuite = unittest.TestSuite()
    testsuite.addTests(loader.loadTestsFromModule(test_tensor))
    testsuite.addTests(loader.loadTestsFromModule(test_functional))
    testsuite.addTests(loader.loadTestsFromModule(test_rng))
    testsuite.addTests(loader.loadTestsFromModule(test_model))
    testsuite.addTests(loader.loadTestsFromModule(test_config))
    testsuite.addTests(loader.loadTestsFromModule(test_layers))
    testsuite.addTests(loader.loadTestsFromModule(test_gtn))
    testsuite.addTests(loader.loadTestsFromModule(test_dataset))
    testsuite.addTests(loader.loadTestsFromModule(test_optim))
    testsuite.addTests(loader.loadTestsFromModule(test_training))
    testsuite.addTests(loader.loadTestsFromModule(test_interpret))
    testsuite.addTests(loader.loadTestsFromModule(test_cli))
    return testsuite


if __name__ == '__main__':
    unittest.main(defaultTest='suite')
