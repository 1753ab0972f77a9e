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

"""Model, training and run configuration.

The configuration classes are plain keyword-argument containers with every
default spelled out, validated on construction. Each can be expressed as a
dict (:meth:`todict`) or a JSON description string with sorted keys
(:attr:`description`) and reconstructed from either of them.

The ablation variants select the encoder towers and attention masks:

============  ============  ===============  ================
Variant       Step tower    Channel tower    Fusion
============  ============  ===============  ================
step          unmasked      -                -
step+mask     causal        -                -
channel       -             unmasked         -
channel+mask  -             causal           -
concat        per flag      per flag         concatenation
gated         per flag      per flag         gate
============  ============  ===============  ================

The two-tower variants take their masks from `use_causal_mask_step` and
`use_causal_mask_channel`. Padded time steps are always hidden from the step
tower, whatever the variant.

"""

import json
import numbers
from collections import OrderedDict

VARIANTS = ('step', 'step+mask', 'channel', 'channel+mask', 'concat', 'gated')
REDUCTIONS = ('flatten', 'mean')


class ConfigError(ValueError):
    """Configuration value is missing or invalid."""


def _check_int(name, value, minimum=None, optional=False):
    if value is None and optional:
        return None
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) and \
            not (isinstance(value, numbers.Real) and float(value).is_integer()):
        raise ConfigError('Config field %r should be an integer, not %r' % (name, value))
    value = int(value)
    if minimum is not None and value < minimum:
        raise ConfigError('Config field %r should be at least %d, not %d' % (name, minimum, value))
    return value


def _check_float(name, value, low=None, high=None, low_open=False, high_open=False):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ConfigError('Config field %r should be a number, not %r' % (name, value))
    value = float(value)
    too_low = low is not None and (value <= low if low_open else value < low)
    too_high = high is not None and (value >= high if high_open else value > high)
    if too_low or too_high:
        interval = '%s%s, %s%s' % ('(' if low_open else '[', low, high, ')' if high_open else ']')
        raise ConfigError('Config field %r should be in range %s, not %g' % (name, interval, value))
    return value


def _check_choice(name, value, choices):
    if value not in choices:
        raise ConfigError('Config field %r should be one of %s, not %r' % (name, choices, value))
    return value


def _check_bool(name, value):
    if not isinstance(value, bool):
        raise ConfigError('Config field %r should be true or false, not %r' % (name, value))
    return value


class _Config(object):
    """Keyword-argument container with defaults, validation and JSON form."""

    _DEFAULTS = OrderedDict()

    def __init__(self, **kwargs):
        unknown = sorted(set(kwargs) - set(self._DEFAULTS))
        if unknown:
            raise ConfigError('Unknown %s field(s): %s' % (self.__class__.__name__, ', '.join(unknown)))
        for name, default in self._DEFAULTS.items():
            setattr(self, name, kwargs.get(name, default))
        self.validate()

    def validate(self):
        """Check field values, normalising their types (raises :exc:`ConfigError`)."""
        raise NotImplementedError

    def todict(self):
        """All fields as an ordered dict."""
        return OrderedDict((name, getattr(self, name)) for name in self._DEFAULTS)

    @classmethod
    def fromdict(cls, fields):
        """Construct config from dict of fields (missing ones take defaults)."""
        return cls(**dict(fields))

    @property
    def description(self):
        """Complete JSON string representation of config."""
        return json.dumps(self.todict(), sort_keys=True)

    @classmethod
    def fromstring(cls, description):
        """Construct config from JSON :attr:`description` string."""
        try:
            fields = json.loads(description)
        except ValueError:
            raise ConfigError('Invalid %s description string %r' % (cls.__name__, description))
        if not isinstance(fields, dict):
            raise ConfigError('Invalid %s description string %r' % (cls.__name__, description))
        return cls.fromdict(fields)

    def replace(self, **kwargs):
        """Copy of config with some fields changed."""
        fields = self.todict()
        fields.update(kwargs)
        return self.fromdict(fields)

    def __eq__(self, other):
        return isinstance(other, self.__class__) and self.todict() == other.todict()

    def __ne__(self, other):
        return not (self == other)

    def __hash__(self):
        return hash(self.description)

    def __repr__(self):
        """Short human-friendly string representation of config object."""
        fields = ', '.join('%s=%r' % item for item in self.todict().items())
        return "%s(%s)" % (self.__class__.__name__, fields)


class ModelConfig(_Config):
    """Architecture of a gated transformer network.

    Parameters
    ----------
    n_channels : int
        Number of channels C per time step
    n_classes : int
        Number of classes K
    max_len : int
        Longest series length T_max (width of the channel embedding and of
        the flattened step-tower feature)
    d_model : int, optional
        Embedding width
    n_heads : int, optional
        Number of attention heads (divides `d_model`)
    n_layers : int, optional
        Number of encoder layers per tower
    d_ff : int, optional
        Hidden width of position-wise feed-forward networks
    d_tower : int, optional
        Width of each tower feature (C and S)
    dropout_p : float, optional
        Dropout probability in the encoder layers
    variant : {'step', 'step+mask', 'channel', 'channel+mask', 'concat', 'gated'}, optional
        Ablation variant
    use_causal_mask_step : bool, optional
        Causal mask in the step tower of two-tower variants
    use_causal_mask_channel : bool, optional
        Causal mask (over listed channel order) in the channel tower of
        two-tower variants
    layer_norm_eps : float, optional
        Variance offset of layer normalisation
    reduction : {'flatten', 'mean'}, optional
        How tower outputs are reduced to a vector before the feature layer

    Raises
    ------
    ConfigError
        If any field is missing or invalid

    """

    _DEFAULTS = OrderedDict([
        ('n_channels', None),
        ('n_classes', None),
        ('max_len', None),
        ('d_model', 64),
        ('n_heads', 4),
        ('n_layers', 2),
        ('d_ff', 256),
        ('d_tower', 128),
        ('dropout_p', 0.2),
        ('variant', 'gated'),
        ('use_causal_mask_step', True),
        ('use_causal_mask_channel', False),
        ('layer_norm_eps', 1e-5),
        ('reduction', 'flatten'),
    ])

    def validate(self):
        for name in ('n_channels', 'n_classes', 'max_len'):
            if getattr(self, name) is None:
                raise ConfigError('Config field %r is required (it is normally taken from the dataset)'
                                  % (name,))
        self.n_channels = _check_int('n_channels', self.n_channels, 1)
        self.n_classes = _check_int('n_classes', self.n_classes, 2)
        self.max_len = _check_int('max_len', self.max_len, 1)
        self.d_model = _check_int('d_model', self.d_model, 1)
        self.n_heads = _check_int('n_heads', self.n_heads, 1)
        if self.d_model % self.n_heads:
            raise ConfigError('d_model=%d is not divisible by n_heads=%d' % (self.d_model, self.n_heads))
        self.n_layers = _check_int('n_layers', self.n_layers, 1)
        self.d_ff = _check_int('d_ff', self.d_ff, 1)
        self.d_tower = _check_int('d_tower', self.d_tower, 1)
        self.dropout_p = _check_float('dropout_p', self.dropout_p, 0.0, 1.0, high_open=True)
        _check_choice('variant', self.variant, VARIANTS)
        _check_bool('use_causal_mask_step', self.use_causal_mask_step)
        _check_bool('use_causal_mask_channel', self.use_causal_mask_channel)
        self.layer_norm_eps = _check_float('layer_norm_eps', self.layer_norm_eps, 0.0, low_open=True)
        _check_choice('reduction', self.reduction, REDUCTIONS)

    @property
    def two_towers(self):
        """True if the variant fuses a step and a channel tower."""
        return self.variant in ('concat', 'gated')

    @property
    def uses_step_tower(self):
        return self.two_towers or self.variant.startswith('step')

    @property
    def uses_channel_tower(self):
        return self.two_towers or self.variant.startswith('channel')

    @property
    def step_masked(self):
        """True if the step tower applies a causal mask."""
        return self.variant == 'step+mask' or (self.two_towers and self.use_causal_mask_step)

    @property
    def channel_masked(self):
        """True if the channel tower applies a causal mask."""
        return self.variant == 'channel+mask' or (self.two_towers and self.use_causal_mask_channel)

    @property
    def feature_width(self):
        """Width of the (possibly fused) feature vector entering the classifier."""
        return self.d_tower * (2 if self.two_towers else 1)


class TrainConfig(_Config):
    """Training recipe: Adagrad with learning rate reduction on plateau.

    Parameters
    ----------
    lr : float, optional
        Initial (base) learning rate
    batch_size : int, optional
        Number of samples per batch
    max_epochs : int, optional
        Maximum number of passes over the training set
    eval_interval : int, optional
        Evaluate train and test accuracy every this many epochs
    plateau_factor : float, optional
        Learning rate multiplier on plateau, in range (0, 1)
    plateau_patience : int, optional
        Number of epochs without improvement that triggers a reduction
    plateau_threshold : float, optional
        Relative improvement of the best training loss that counts
    min_lr : float, optional
        Learning rate floor
    adagrad_eps : float, optional
        Offset in the denominator of the Adagrad update
    seed : int, optional
        Seed of all random streams (initialisation, dropout, shuffling)

    """

    _DEFAULTS = OrderedDict([
        ('lr', 0.0001),
        ('batch_size', 16),
        ('max_epochs', 500),
        ('eval_interval', 1),
        ('plateau_factor', 0.5),
        ('plateau_patience', 10),
        ('plateau_threshold', 1e-4),
        ('min_lr', 1e-6),
        ('adagrad_eps', 1e-10),
        ('seed', 0),
    ])

    def validate(self):
        self.lr = _check_float('lr', self.lr, 0.0)
        self.batch_size = _check_int('batch_size', self.batch_size, 1)
        self.max_epochs = _check_int('max_epochs', self.max_epochs, 1)
        self.eval_interval = _check_int('eval_interval', self.eval_interval, 1)
        self.plateau_factor = _check_float('plateau_factor', self.plateau_factor, 0.0, 1.0,
                                           low_open=True, high_open=True)
        self.plateau_patience = _check_int('plateau_patience', self.plateau_patience, 1)
        self.plateau_threshold = _check_float('plateau_threshold', self.plateau_threshold, 0.0)
        self.min_lr = _check_float('min_lr', self.min_lr, 0.0)
        self.adagrad_eps = _check_float('adagrad_eps', self.adagrad_eps, 0.0)
        self.seed = _check_int('seed', self.seed, 0)


class RunConfig(_Config):
    """Everything needed to reproduce a run, as one flat set of fields.

    This combines the dataset path, output directory and every field of
    :class:`ModelConfig` and :class:`TrainConfig`. Dataset-derived fields
    (`n_channels`, `n_classes`, `max_len`) may be left as None until
    :meth:`fill_from_dataset` is called.

    """

    _DEFAULTS = OrderedDict([('dataset', None), ('out', None)] +
                            list(ModelConfig._DEFAULTS.items()) +
                            list(TrainConfig._DEFAULTS.items()))

    DATASET_FIELDS = ('n_channels', 'n_classes', 'max_len')

    def validate(self):
        if self.dataset is not None and not isinstance(self.dataset, str):
            raise ConfigError('Config field %r should be a path, not %r' % ('dataset', self.dataset))
        if self.out is not None and not isinstance(self.out, str):
            raise ConfigError('Config field %r should be a path, not %r' % ('out', self.out))
        model_fields = self._model_fields()
        # Dataset-derived fields get placeholder values so the rest can be checked early
        placeholders = dict((name, 1 if name != 'n_classes' else 2)
                            for name in self.DATASET_FIELDS if model_fields[name] is None)
        model_fields.update(placeholders)
        model = ModelConfig(**model_fields)
        train = self.train_config()
        for name, value in list(model.todict().items()) + list(train.todict().items()):
            if name not in placeholders:
                setattr(self, name, value)

    def _model_fields(self):
        return dict((name, getattr(self, name)) for name in ModelConfig._DEFAULTS)

    def model_config(self):
        """Model part of run config (requires dataset-derived fields)."""
        return ModelConfig(**self._model_fields())

    def train_config(self):
        """Training part of run config."""
        return TrainConfig(**dict((name, getattr(self, name)) for name in TrainConfig._DEFAULTS))

    def update(self, overrides):
        """Copy of config with the non-None entries of `overrides` applied."""
        fields = self.todict()
        fields.update((k, v) for k, v in overrides.items() if v is not None)
        return self.fromdict(fields)

    def fill_from_dataset(self, dataset):
        """Copy of config with dataset-derived fields taken from `dataset`.

        Raises
        ------
        ConfigError
            If a field was given explicitly but disagrees with the dataset

        """
        fields = self.todict()
        for name in self.DATASET_FIELDS:
            actual = getattr(dataset, name)
            if fields[name] is not None and fields[name] != actual:
                raise ConfigError('Config has %s=%d but dataset %r has %s=%d'
                                  % (name, fields[name], dataset.name, name, actual))
            fields[name] = actual
        return self.fromdict(fields)

    @classmethod
    def fromfile(cls, path):
        """Load (possibly partial) run config from flat JSON file."""
        try:
            with open(path) as json_file:
                fields = json.load(json_file)
        except (IOError, OSError) as exc:
            raise ConfigError('Could not read config file %r: %s' % (path, exc))
        except ValueError as exc:
            raise ConfigError('Config file %r is not valid JSON: %s' % (path, exc))
        if not isinstance(fields, dict):
            raise ConfigError('Config file %r should contain a JSON object' % (path,))
        return cls.fromdict(fields)

    def tofile(self, path):
        """Write complete run config (every field spelled out) as flat JSON."""
        with open(path, 'w') as json_file:
            json.dump(self.todict(), json_file, sort_keys=True, indent=2)
            json_file.write('\n')
