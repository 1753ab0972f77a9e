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

"""Gated transformer networks for multivariate time-series classification.

This package classifies multivariate time series with two transformer
encoder towers, one attending across time steps and one across channels,
whose features are fused by a learned two-way gate. It is self-contained:
a small reverse-mode automatic differentiation library on top of numpy
provides the gradients, and the package includes the training recipe, the
ablation variants and exports for interpreting trained models (attention
maps, DTW and Euclidean distance matrices, gate weights and embeddings).

"""

import logging as _logging

from .tensor import (Tensor, DimensionError, backward, zero_grads, no_grad,
                     set_grad_enabled, is_grad_enabled, matmul, concat, transpose, reshape)
from .functional import (ParameterError, DegenerateAttentionError, softmax, two_way_softmax,
                         layer_norm, tanh, relu, dropout, cross_entropy)
from .rng import Rng
from .gradcheck import gradient_check
from .model import Parameter, Model, BadModelFile
from .config import ModelConfig, TrainConfig, RunConfig, ConfigError, VARIANTS
from .dataset import (MTSSample, MTSDataset, DatasetError, Batch, SynthSpec, load_dataset,
                      save_dataset, batchify, synth_dataset, nearest_neighbour_accuracy)
from .gtn import GTNParams, AttentionRecord, GatedTransformer
from .optim import NumericError, OptimState, PlateauScheduler, adagrad_step, lr_plateau
from .training import TrainLog, EvalResult, train, evaluate
from .interpret import (DistanceMatrix, GateStats, dtw, channel_dtw_matrix, step_euclid_matrix,
                        gate_stats, export_attention, export_embeddings)


# Setup library logger and add a print-like handler used when no logging is configured
class _NoConfigFilter(_logging.Filter):
    """Filter which only allows event if top-level logging is not configured."""
    def filter(self, record):
        return 1 if not _logging.root.handlers else 0


_no_config_handler = _logging.StreamHandler()
_no_config_handler.setFormatter(_logging.Formatter(_logging.BASIC_FORMAT))
_no_config_handler.addFilter(_NoConfigFilter())
logger = _logging.getLogger(__name__)
logger.addHandler(_no_config_handler)

# BEGIN VERSION CHECK
# Get package version when locally imported from repo or via -e develop install
try:
    import katversion as _katversion
except ImportError:
    import time as _time
    __version__ = "0.0+unknown.{}".format(_time.strftime('%Y%m%d%H%M'))
else:
    __version__ = _katversion.get_version(__path__[0])
# END VERSION CHECK
