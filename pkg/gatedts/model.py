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

"""Model base class.

This provides a base class for learnable parameter sets, handling the
initialisation, loading, saving, display and comparison of parameters.

The checkpoint container is a versioned binary file with three parts::

  GATEDTS-CHECKPOINT 1\n
  {"header": {...}, "params": [["name", [shape...]], ...]}\n
  <little-endian 64-bit floats of every parameter in order, row-major>

The JSON line has sorted keys and no optional whitespace, so a checkpoint
is byte-identical across platforms for identical parameters and header.

"""

import json
import hashlib
import logging
from collections import OrderedDict

import numpy as np

from .tensor import Tensor, zero_grads

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b'GATEDTS-CHECKPOINT'
CHECKPOINT_VERSION = 1
INITS = ('glorot', 'zeros', 'ones')


class Parameter(object):
    """Generic learnable model parameter.

    This bundles a named leaf :class:`Tensor` with its documentation and
    initialisation scheme.

    Parameters
    ----------
    name : string
        Parameter name (dotted path such as 'step.layer0.W_Q')
    shape : sequence of int
        Parameter shape
    doc : string, optional
        Documentation string describing parameter
    init : {'glorot', 'zeros', 'ones'}, optional
        Initialisation scheme: 'glorot' draws uniformly in +-sqrt(6 / (fan_in +
        fan_out)) with fan_in and fan_out the first and last extents
    value : array-like, optional
        Initial value (*init* scheme applied with zeros for 'glorot' by default)

    Attributes
    ----------
    tensor : :class:`Tensor`
        Leaf tensor holding the value and gradient

    """
    def __init__(self, name, shape, doc='', init='glorot', value=None):
        if init not in INITS:
            raise ValueError("Unknown initialisation %r for parameter %r, expected one of %s"
                             % (init, name, INITS))
        self.name = name
        self.shape = tuple(int(n) for n in shape)
        self.__doc__ = doc
        self.init = init
        if value is None:
            value = np.ones(self.shape) if init == 'ones' else np.zeros(self.shape)
        self.tensor = Tensor(np.broadcast_to(value, self.shape), requires_grad=True)

    @property
    def value(self):
        """Parameter values as an array."""
        return self.tensor.data

    @value.setter
    def value(self, value):
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self.shape:
            raise ValueError('Parameter %r has shape %s, cannot assign array of shape %s'
                             % (self.name, self.shape, value.shape))
        self.tensor.data[...] = value

    @property
    def grad(self):
        """Accumulated gradient (or None)."""
        return self.tensor.grad

    def initialise(self, rng):
        """Draw a fresh value according to the initialisation scheme."""
        if self.init == 'glorot':
            fan_in, fan_out = self.shape[0], self.shape[-1]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.value = rng.uniform(-limit, limit, self.shape)
        else:
            self.value = np.full(self.shape, 1.0 if self.init == 'ones' else 0.0)

    def __repr__(self):
        """Short human-friendly string representation of parameter object."""
        return "<gatedts.Parameter %s shape=%s at 0x%x>" % (self.name, self.shape, id(self))


class BadModelFile(Exception):
    """Unable to load model from checkpoint file (unrecognised format)."""
    pass


class Model(object):
    """Base class for models consisting of named learnable parameters.

    The base class handles the construction / initialisation, loading,
    saving, display and comparison of models. A Model consists of a sequence
    of Parameters and an optional header dict stored alongside them in
    checkpoints.

    Parameter tensors may be accessed and modified via a dict-like interface
    mapping names to :class:`Tensor` objects.

    Parameters
    ----------
    params : sequence of :class:`Parameter` objects
        Full set of model parameters in the expected order

    """
    def __init__(self, params):
        self.header = {}
        self.params = OrderedDict((p.name, p) for p in params)

    def __len__(self):
        """Number of parameter tensors in full model."""
        return len(self.params)

    def __iter__(self):
        """Iterate over parameter objects."""
        return iter(self.params.values())

    def __contains__(self, key):
        return key in self.params

    @property
    def num_values(self):
        """Total number of scalar parameter values."""
        return sum(p.tensor.size for p in self)

    def param_strs(self):
        """Justified (name, shape, doc) strings for all parameters."""
        name_len = max(len(p.name) for p in self)
        shape_strs = ['x'.join(str(n) for n in p.shape) for p in self]
        shape_len = max(len(s) for s in shape_strs)
        return [(p.name.ljust(name_len), s.ljust(shape_len), p.__doc__)
                for p, s in zip(self, shape_strs)]

    def __repr__(self):
        """Short human-friendly string representation of model object."""
        return "<gatedts.%s params=%d values=%d at 0x%x>" % \
               (self.__class__.__name__, len(self), self.num_values, id(self))

    def __str__(self):
        """Verbose human-friendly string representation of model object."""
        summary = "%s has %d parameter tensors with %d values" % \
                  (self.__class__.__name__, len(self), self.num_values)
        return summary + ':\n' + '\n'.join(('%s  %s  %s' % ps).rstrip() for ps in self.param_strs())

    def fingerprint(self):
        """SHA-256 hex digest of parameter names, shapes and values."""
        digest = hashlib.sha256()
        for p in self:
            digest.update(p.name.encode('utf-8'))
            digest.update(np.asarray(p.shape, dtype='<i8').tobytes())
            digest.update(p.value.astype('<f8').tobytes())
        return digest.hexdigest()

    def __eq__(self, other):
        """Equality comparison operator (parameter names, shapes and values only)."""
        if not isinstance(other, Model):
            return NotImplemented
        return list(self.keys()) == list(other.keys()) and \
            all(np.array_equal(a.value, b.value) and a.shape == b.shape for a, b in zip(self, other))

    def __ne__(self, other):
        """Inequality comparison operator (parameter values only)."""
        return not (self == other)

    def __hash__(self):
        """Base hash on parameter fingerprint, just like equality operator."""
        return hash(self.fingerprint())

    def __getitem__(self, key):
        """Access parameter tensor by name."""
        return self.params[key].tensor

    def __setitem__(self, key, value):
        """Modify parameter values by name."""
        self.params[key].value = value

    def keys(self):
        """List of parameter names in the expected order."""
        return list(self.params.keys())

    def values(self):
        """List of parameter tensors in the expected order."""
        return [p.tensor for p in self]

    def group(self, prefix):
        """Parameter tensors whose names start with `prefix`, keyed by the remainder."""
        return OrderedDict((name[len(prefix):], p.tensor)
                           for name, p in self.params.items() if name.startswith(prefix))

    def initialise(self, rng):
        """Draw fresh values for all parameters, each from its own sub-stream of `rng`.

        Parameters with the same name and shape get the same initial value
        from the same stream, whatever other parameters the model has.
        """
        for param in self:
            param.initialise(rng.spawn(param.name))

    def zero_grads(self):
        """Clear the accumulated gradients of all parameters."""
        zero_grads(self.values())

    def snapshot(self):
        """Copy of all parameter values, keyed by name."""
        return OrderedDict((p.name, p.value.copy()) for p in self)

    def restore(self, snapshot):
        """Load parameter values from a :meth:`snapshot`."""
        for name, value in snapshot.items():
            self[name] = value

    def tofile(self, file_like):
        """Save model to checkpoint file (both header and parameters).

        Parameters
        ----------
        file-like : object
            Binary file-like object with write() method

        """
        layout = {'header': self.header, 'params': [[p.name, list(p.shape)] for p in self]}
        file_like.write(b'%s %d\n' % (CHECKPOINT_MAGIC, CHECKPOINT_VERSION))
        file_like.write(json.dumps(layout, sort_keys=True, separators=(',', ':')).encode('utf-8') + b'\n')
        for param in self:
            file_like.write(np.ascontiguousarray(param.value, dtype='<f8').tobytes())

    def fromfile(self, file_like):
        """Load model from checkpoint file (both header and parameters).

        Parameters
        ----------
        file-like : object
            Binary file-like object with readline() and read() methods

        Raises
        ------
        BadModelFile
            If the file is not a checkpoint or its parameters do not match

        """
        header, values = read_checkpoint(file_like)
        expected = [(p.name, p.shape) for p in self]
        found = [(name, value.shape) for name, value in values.items()]
        if found != expected:
            missing = sorted(set(expected) - set(found))
            extra = sorted(set(found) - set(expected))
            raise BadModelFile('Checkpoint parameters do not match %s (missing %s, unexpected %s)'
                               % (self.__class__.__name__, missing, extra))
        self.header = header
        for name, value in values.items():
            self[name] = value


def read_checkpoint(file_like):
    """Read header and parameter values from checkpoint file.

    Parameters
    ----------
    file-like : object
        Binary file-like object with readline() and read() methods

    Returns
    -------
    header : dict
        Checkpoint header
    values : :class:`collections.OrderedDict`
        Parameter values as arrays, keyed by name in stored order

    Raises
    ------
    BadModelFile
        If the file is not a checkpoint or is truncated

    """
    filename = getattr(file_like, 'name', '')
    source = ('file %r' % (filename,)) if filename else 'file-like object'
    try:
        magic, version = file_like.readline().split()
        version = int(version)
    except ValueError:
        raise BadModelFile('Could not read checkpoint from %s (no checkpoint signature)' % (source,))
    if magic != CHECKPOINT_MAGIC:
        raise BadModelFile('Could not read checkpoint from %s (no checkpoint signature)' % (source,))
    if version != CHECKPOINT_VERSION:
        raise BadModelFile('Checkpoint in %s has unsupported version %d' % (source, version))
    try:
        layout = json.loads(file_like.readline().decode('utf-8'))
        header, params = layout['header'], layout['params']
    except (ValueError, KeyError, TypeError) as exc:
        raise BadModelFile('Could not read checkpoint layout from %s\n\nOriginal exception: %s'
                           % (source, exc))
    values = OrderedDict()
    for name, shape in params:
        shape = tuple(shape)
        count = int(np.prod(shape))
        buf = file_like.read(8 * count)
        if len(buf) != 8 * count:
            raise BadModelFile('Checkpoint in %s is truncated at parameter %r' % (source, name))
        values[name] = np.frombuffer(buf, dtype='<f8').astype(np.float64).reshape(shape)
    if file_like.read(1):
        raise BadModelFile('Checkpoint in %s has trailing data' % (source,))
    return header, values
