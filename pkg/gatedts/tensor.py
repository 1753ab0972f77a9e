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

"""Dense tensors with reverse-mode automatic differentiation.

This module provides a minimal :class:`Tensor` that wraps a :mod:`numpy`
array of 64-bit floats and records the operation that produced it. Calling
:func:`backward` on a scalar tensor walks this lineage (a directed acyclic
graph rooted at the leaves) in reverse topological order and accumulates
gradients into every leaf that requires them.

Each differentiable operation is a :class:`Function` subclass with a
`forward` method acting on arrays and a `backward` method mapping the
gradient of the output to gradients of the inputs. Standard :mod:`numpy`
broadcasting applies to the elementwise operations, and broadcast gradients
are summed back to the shape of each input.

Lineage recording can be switched off, which is useful for evaluation and
export passes that never call :func:`backward`::

  with gatedts.no_grad():
      logits, record = model.forward(batch)

"""

import threading
import contextlib

import numpy as np


class DimensionError(ValueError):
    """Tensor shapes are incompatible with the requested operation."""

# --------------------------------------------------------------------------------------------------
# --- Grad mode
# --------------------------------------------------------------------------------------------------


class _GradModeCvar(threading.local):
    enabled = True


_grad_mode_cvar = _GradModeCvar()


def set_grad_enabled(enabled):
    """Switch lineage recording on or off (permanently, for this thread).

    Parameters
    ----------
    enabled : bool
        True if new tensors should record the operations that produced them

    Returns
    -------
    previous_enabled : bool
        Previous setting, which can be passed back to restore it

    """
    previous_enabled = _grad_mode_cvar.enabled
    _grad_mode_cvar.enabled = bool(enabled)
    return previous_enabled


def is_grad_enabled():
    """True if new tensors record their lineage (the default)."""
    return _grad_mode_cvar.enabled


@contextlib.contextmanager
def no_grad():
    """Switch off lineage recording temporarily via context manager."""
    previous_enabled = set_grad_enabled(False)
    try:
        yield
    finally:
        set_grad_enabled(previous_enabled)

# --------------------------------------------------------------------------------------------------
# --- CLASS :  Tensor
# --------------------------------------------------------------------------------------------------


class Lineage(object):
    """Record of the operation and parent tensors that produced a tensor."""

    __slots__ = ('function', 'parents')

    def __init__(self, function, parents):
        self.function = function
        self.parents = tuple(parents)


class Tensor(object):
    """Dense n-dimensional array of 64-bit floats with an optional gradient.

    Parameters
    ----------
    data : array-like
        Tensor values (copied and converted to float64). Every extent of the
        resulting array has to be at least 1.
    requires_grad : bool, optional
        True if :func:`backward` should accumulate a gradient into this tensor

    Attributes
    ----------
    data : array of float, shape *shape*
        Tensor values
    grad : array of float, shape *shape*, or None
        Accumulated gradient, available after :func:`backward`
    lineage : :class:`Lineage` object or None
        Operation that produced the tensor (None for leaves)

    Raises
    ------
    DimensionError
        If the data has a zero-length extent

    """

    # Let numpy defer to our reflected operators (e.g. for `array * tensor`)
    __array_priority__ = 1000

    def __init__(self, data, requires_grad=False):
        self.data = _checked_array(np.array(data, dtype=np.float64))
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.lineage = None

    @classmethod
    def _wrap(cls, array):
        """Wrap array without copying it (used for operation outputs)."""
        tensor = cls.__new__(cls)
        tensor.data = _checked_array(np.asarray(array, dtype=np.float64))
        tensor.requires_grad = False
        tensor.grad = None
        tensor.lineage = None
        return tensor

    @property
    def shape(self):
        """Extents of tensor, as a tuple."""
        return self.data.shape

    @property
    def ndim(self):
        """Number of tensor dimensions."""
        return self.data.ndim

    @property
    def size(self):
        """Total number of values in tensor."""
        return self.data.size

    @property
    def is_leaf(self):
        """True if tensor was not produced by a recorded operation."""
        return self.lineage is None

    def __repr__(self):
        """Short human-friendly string representation of tensor object."""
        op = (' op=%s' % (self.lineage.function.name,)) if self.lineage else ''
        return "<gatedts.Tensor shape=%s requires_grad=%s%s at 0x%x>" % \
               (self.shape, self.requires_grad, op, id(self))

    def __len__(self):
        return len(self.data)

    def item(self):
        """Value of a single-element tensor as a Python float."""
        return self.data.item()

    def numpy(self):
        """Tensor values as a numpy array (no copy)."""
        return self.data

    def detach(self):
        """New leaf tensor sharing no lineage (values copied)."""
        return Tensor(self.data)

    def backward(self):
        """Accumulate gradients of this scalar tensor into all leaves."""
        backward(self)

    # Arithmetic operators
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return slice_(self, key)

    # Shape manipulation shortcuts
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = shape[0]
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = axes[0]
        return transpose(self, axes if axes else None)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def _checked_array(array):
    """Ensure that every extent of array is at least 1."""
    if 0 in array.shape:
        raise DimensionError('Tensor extents must all be at least 1, got shape %s' % (array.shape,))
    return array


def as_tensor(x):
    """Turn `x` into a :class:`Tensor` (constants do not require gradients)."""
    return x if isinstance(x, Tensor) else Tensor(x)


def zero_grads(tensors):
    """Clear accumulated gradients of a sequence of tensors."""
    for tensor in tensors:
        tensor.grad = None

# --------------------------------------------------------------------------------------------------
# --- CLASS :  Function
# --------------------------------------------------------------------------------------------------


class Function(object):
    """Differentiable operation on one or more tensors.

    Subclasses implement :meth:`forward`, which receives the arrays of the
    input tensors (plus any keyword arguments given to :meth:`apply`), and
    :meth:`backward`, which receives the gradient of the output and returns
    one gradient (or None) per input. Gradients may have broadcast shapes;
    they are summed back to the input shapes by :func:`backward`.

    Parameters
    ----------
    parents : sequence of :class:`Tensor`
        Input tensors of the operation

    """

    def __init__(self, *parents):
        self.parents = parents

    @property
    def name(self):
        return self.__class__.__name__

    def forward(self, *arrays, **kwargs):
        raise NotImplementedError('Forward pass not implemented for %s' % (self.name,))

    def backward(self, grad):
        raise NotImplementedError('Backward pass not implemented for %s' % (self.name,))

    @classmethod
    def apply(cls, *inputs, **kwargs):
        """Evaluate the operation and record it in the lineage of the output."""
        parents = [as_tensor(x) for x in inputs]
        function = cls(*parents)
        out = Tensor._wrap(function.forward(*[p.data for p in parents], **kwargs))
        if is_grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out.lineage = Lineage(function, parents)
        return out


def _unbroadcast(grad, shape):
    """Sum out the axes along which an input of `shape` was broadcast."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _topological_order(root):
    """Tensors in lineage of `root` that require gradients, parents first."""
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node.lineage is not None:
            for parent in reversed(node.lineage.parents):
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(loss):
    """Accumulate gradients of a scalar tensor into all leaves requiring them.

    Repeated calls accumulate into existing gradients, so clear them with
    :func:`zero_grads` in between updates.

    Parameters
    ----------
    loss : :class:`Tensor`
        Scalar (single-element) tensor with intact lineage

    Raises
    ------
    DimensionError
        If `loss` has more than one element
    ValueError
        If `loss` does not depend on any tensor requiring gradients

    """
    if loss.size != 1:
        raise DimensionError('Gradients can only be computed for a scalar tensor, '
                             'not one with shape %s' % (loss.shape,))
    if not loss.requires_grad:
        raise ValueError('Tensor does not depend on any tensor requiring gradients')
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        grad = grads.pop(id(node), None)
        if grad is None:
            continue
        if node.lineage is None:
            node.grad = grad.copy() if node.grad is None else node.grad + grad
            continue
        parent_grads = node.lineage.function.backward(grad)
        for parent, parent_grad in zip(node.lineage.parents, parent_grads):
            if parent_grad is None or not parent.requires_grad:
                continue
            parent_grad = _unbroadcast(np.asarray(parent_grad, dtype=np.float64), parent.shape)
            key = id(parent)
            grads[key] = grads[key] + parent_grad if key in grads else parent_grad

# --------------------------------------------------------------------------------------------------
# --- Elementwise arithmetic
# --------------------------------------------------------------------------------------------------


def _broadcast_shape(a, b):
    try:
        return np.broadcast(a, b).shape
    except ValueError:
        raise DimensionError('Shapes %s and %s cannot be broadcast together' % (a.shape, b.shape))


class Add(Function):
    def forward(self, a, b):
        _broadcast_shape(a, b)
        return a + b

    def backward(self, grad):
        return grad, grad


class Sub(Function):
    def forward(self, a, b):
        _broadcast_shape(a, b)
        return a - b

    def backward(self, grad):
        return grad, -grad


class Mul(Function):
    def forward(self, a, b):
        _broadcast_shape(a, b)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return grad * self.b, grad * self.a


class Neg(Function):
    def forward(self, a):
        return -a

    def backward(self, grad):
        return (-grad,)


class Scale(Function):
    def forward(self, a, factor):
        self.factor = float(factor)
        return a * self.factor

    def backward(self, grad):
        return (grad * self.factor,)


def add(a, b):
    """Elementwise sum of two tensors (with broadcasting)."""
    return Add.apply(a, b)


def sub(a, b):
    """Elementwise difference of two tensors (with broadcasting)."""
    return Sub.apply(a, b)


def mul(a, b):
    """Elementwise product of two tensors (with broadcasting)."""
    return Mul.apply(a, b)


def neg(a):
    """Elementwise negation."""
    return Neg.apply(a)


def scale(a, factor):
    """Multiply tensor by a constant scalar factor."""
    return Scale.apply(a, factor=factor)

# --------------------------------------------------------------------------------------------------
# --- Matrix product
# --------------------------------------------------------------------------------------------------


class MatMul(Function):
    def forward(self, a, b):
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise DimensionError('Cannot multiply matrices of shapes %s and %s' % (a.shape, b.shape))
        try:
            np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
        except ValueError:
            raise DimensionError('Cannot multiply matrix stacks of shapes %s and %s' % (a.shape, b.shape))
        self.a, self.b = a, b
        return np.matmul(a, b)

    def backward(self, grad):
        return (np.matmul(grad, np.swapaxes(self.b, -1, -2)),
                np.matmul(np.swapaxes(self.a, -1, -2), grad))


def matmul(a, b):
    """Matrix product of `a` (..., M, K) and `b` (..., K, N).

    Leading axes are treated as a stack of matrices and broadcast as in
    :func:`numpy.matmul`.

    Raises
    ------
    DimensionError
        If the inner extents do not match (the message names both shapes)

    """
    return MatMul.apply(a, b)

# --------------------------------------------------------------------------------------------------
# --- Reductions
# --------------------------------------------------------------------------------------------------


def _normalised_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if np.isscalar(axis) else tuple(axis)
    return tuple(sorted(ax % ndim for ax in axes))


class Sum(Function):
    def forward(self, a, axis=None, keepdims=False):
        self.shape = a.shape
        self.axes = _normalised_axes(axis, a.ndim)
        self.keepdims = keepdims
        return np.asarray(a.sum(axis=self.axes, keepdims=keepdims))

    def backward(self, grad):
        if not self.keepdims:
            grad = np.expand_dims(grad, self.axes)
        return (np.broadcast_to(grad, self.shape),)


def sum_(a, axis=None, keepdims=False):
    """Sum of tensor values along the given axis (or axes)."""
    return Sum.apply(a, axis=axis, keepdims=keepdims)


def mean(a, axis=None, keepdims=False):
    """Mean of tensor values along the given axis (or axes)."""
    a = as_tensor(a)
    count = int(np.prod([a.shape[ax] for ax in _normalised_axes(axis, a.ndim)]))
    return scale(sum_(a, axis, keepdims), 1.0 / count)

# --------------------------------------------------------------------------------------------------
# --- Shape manipulation
# --------------------------------------------------------------------------------------------------


class Reshape(Function):
    def forward(self, a, shape):
        self.shape = a.shape
        try:
            return a.reshape(shape)
        except ValueError:
            raise DimensionError('Cannot reshape tensor of shape %s to %s' % (a.shape, tuple(shape)))

    def backward(self, grad):
        return (grad.reshape(self.shape),)


class Transpose(Function):
    def forward(self, a, axes=None):
        self.axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
        if sorted(ax % a.ndim for ax in self.axes) != list(range(a.ndim)):
            raise DimensionError('Axes %s do not permute tensor of shape %s' % (self.axes, a.shape))
        return np.transpose(a, self.axes)

    def backward(self, grad):
        return (np.transpose(grad, np.argsort([ax % grad.ndim for ax in self.axes])),)


class Concat(Function):
    def forward(self, *arrays, **kwargs):
        axis = kwargs.get('axis', 0)
        try:
            out = np.concatenate(arrays, axis=axis)
        except (ValueError, IndexError):
            raise DimensionError('Cannot concatenate tensors of shapes %s along axis %d'
                                 % (', '.join(str(a.shape) for a in arrays), axis))
        self.axis = axis % out.ndim
        self.splits = np.cumsum([a.shape[self.axis] for a in arrays])[:-1]
        return out

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


class Slice(Function):
    def forward(self, a, key):
        self.shape, self.key = a.shape, key
        try:
            out = a[key]
        except IndexError as err:
            raise DimensionError('Cannot index tensor of shape %s with %r (%s)' % (a.shape, key, err))
        return np.array(out, dtype=np.float64, ndmin=0)

    def backward(self, grad):
        full = np.zeros(self.shape)
        if _is_basic_index(self.key):
            full[self.key] += grad
        else:
            # Repeated fancy indices must accumulate
            np.add.at(full, self.key, grad)
        return (full,)


def _is_basic_index(key):
    """True if `key` only contains integers, slices, ellipses and new axes."""
    items = key if isinstance(key, tuple) else (key,)
    return all(item is None or item is Ellipsis or isinstance(item, (slice, int, np.integer))
               for item in items)


def reshape(a, shape):
    """Tensor with the same values in a new shape (row-major order)."""
    return Reshape.apply(a, shape=tuple(shape))


def transpose(a, axes=None):
    """Permute tensor axes (reverse them by default)."""
    return Transpose.apply(a, axes=axes)


def concat(tensors, axis=0):
    """Join a sequence of tensors along an existing axis."""
    return Concat.apply(*tensors, axis=axis)


def slice_(a, key):
    """Select part of a tensor via standard numpy indexing."""
    return Slice.apply(a, key=key)
