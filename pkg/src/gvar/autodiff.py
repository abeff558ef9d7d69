"""Small reverse-mode automatic differentiation engine on top of numpy.

Only the handful of operations needed to train multilayer perceptrons with the
GVAR loss are provided. Every tensor holds a float64 ``numpy.ndarray``; the graph
is recorded eagerly during the forward pass and consumed by :meth:`Tensor.backward`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from gvar.errors import DimensionError, UsageError

FORMAT_VERSION = 1


class Tensor:
    """A node of the computation graph.

    Leaves created with ``requires_grad=True`` accumulate gradients into ``grad``.
    Interior nodes keep references to their parents and a closure that maps the
    node's output gradient to the parents' gradients.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.grad = np.zeros_like(self.data) if requires_grad and not _parents else None
        self._parents = _parents
        self._backward = _backward
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def numpy(self):
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        other = _lift(other)
        out = self.data + other.data

        def backward(g):
            return _unbroadcast(g, self.shape), _unbroadcast(g, other.shape)

        return _node(out, (self, other), backward)

    __radd__ = __add__

    def __sub__(self, other):
        other = _lift(other)
        out = self.data - other.data

        def backward(g):
            return _unbroadcast(g, self.shape), -_unbroadcast(g, other.shape)

        return _node(out, (self, other), backward)

    def __rsub__(self, other):
        return _lift(other) - self

    def __neg__(self):
        return _node(-self.data, (self,), lambda g: (-g,))

    def __mul__(self, other):
        other = _lift(other)
        a, b = self.data, other.data

        def backward(g):
            return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)

        return _node(a * b, (self, other), backward)

    __rmul__ = __mul__

    def __matmul__(self, other):
        other = _lift(other)
        a, b = self.data, other.data
        if a.ndim not in (1, 2) or b.ndim != 2:
            raise DimensionError(f"matmul supports (n,) or (m,n) @ (n,k); got {a.shape} @ {b.shape}")
        if a.shape[-1] != b.shape[0]:
            raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")

        def backward(g):
            if a.ndim == 1:
                return g @ b.T, np.outer(a, g)
            return g @ b.T, a.T @ g

        return _node(a @ b, (self, other), backward)

    # -- elementwise ------------------------------------------------------
    def relu(self):
        mask = self.data > 0
        return _node(self.data * mask, (self,), lambda g: (g * mask,))

    def abs(self):
        # np.sign(0) == 0, so the L1 subgradient at exactly zero is zero
        sgn = np.sign(self.data)
        return _node(np.abs(self.data), (self,), lambda g: (g * sgn,))

    def square(self):
        a = self.data
        return _node(a * a, (self,), lambda g: (2.0 * a * g,))

    # -- reductions and shape ---------------------------------------------
    def sum(self):
        shape = self.shape
        return _node(np.sum(self.data), (self,), lambda g: (np.broadcast_to(g, shape).copy(),))

    def mean(self):
        n = self.size
        shape = self.shape
        return _node(np.mean(self.data), (self,), lambda g: (np.full(shape, g / n),))

    def reshape(self, *shape):
        old = self.shape
        return _node(self.data.reshape(*shape), (self,), lambda g: (g.reshape(old),))

    def __getitem__(self, index):
        shape = self.shape

        basic = isinstance(index, (slice, int)) or (
            isinstance(index, tuple) and all(isinstance(i, (slice, int)) for i in index))

        def backward(g):
            full = np.zeros(shape)
            if basic:
                full[index] = g
            else:
                np.add.at(full, index, g)
            return (full,)

        return _node(self.data[index], (self,), backward)

    # -- backprop ---------------------------------------------------------
    def backward(self):
        """Accumulate d(self)/d(leaf) into every leaf's ``grad`` buffer.

        The node must be a scalar. The graph is consumed: intermediate references
        are dropped, and a second call raises :class:`UsageError`.
        """
        if self._consumed:
            raise UsageError("backward() called twice on the same graph")
        if self.data.ndim != 0:
            raise UsageError(f"backward() needs a scalar loss, got shape {self.shape}")
        order = _topological(self)
        grads = {id(self): np.ones(())}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.grad is not None:
                    node.grad += g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        for node in order:
            if node._parents:
                node._parents = ()
                node._backward = None
        self._consumed = True


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(out, parents, backward):
    return Tensor(out, _parents=parents, _backward=backward)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def batched_matvec(mats, vecs):
    """Row-wise matrix-vector product: ``out[b, i] = sum_j mats[b, i, j] * vecs[b, j]``."""
    mats, vecs = _lift(mats), _lift(vecs)
    m, v = mats.data, vecs.data
    if m.ndim != 3 or v.ndim != 2 or m.shape[0] != v.shape[0] or m.shape[2] != v.shape[1]:
        raise DimensionError(f"batched_matvec shapes incompatible: {m.shape} and {v.shape}")
    out = np.einsum("bij,bj->bi", m, v)

    def backward(g):
        return g[:, :, None] * v[:, None, :], np.einsum("bij,bi->bj", m, g)

    return _node(out, (mats, vecs), backward)


def concat(tensors, axis=0):
    """Concatenate tensors along ``axis``."""
    tensors = [_lift(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


@dataclass
class ParamStore:
    """Named trainable tensors plus optimizer state.

    Every entry of ``params`` is a leaf :class:`Tensor` whose ``grad`` array is
    the paired gradient buffer. Adam moments live in ``_m``/``_v`` and persist
    across :func:`step_optimizer` calls.
    """

    params: dict = field(default_factory=dict)
    rng_seed: int = 0
    _m: dict = field(default_factory=dict, repr=False)
    _v: dict = field(default_factory=dict, repr=False)
    _t: int = 0

    def add(self, name, value):
        if name in self.params:
            raise UsageError(f"duplicate parameter name {name!r}")
        self.params[name] = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        return self.params[name]

    def __getitem__(self, name):
        return self.params[name]

    def __iter__(self):
        return iter(self.params)

    def names(self):
        return list(self.params)

    def zero_grad(self):
        for p in self.params.values():
            p.grad.fill(0.0)

    def grads(self):
        return {k: p.grad for k, p in self.params.items()}

    def flat(self):
        """All parameters concatenated into one vector (in insertion order)."""
        return np.concatenate([p.data.ravel() for p in self.params.values()])

    def to_dict(self):
        return {
            name: {"shape": list(p.shape), "data": p.data.ravel().tolist()}
            for name, p in self.params.items()
        }

    @classmethod
    def from_dict(cls, payload, rng_seed=0):
        store = cls(rng_seed=rng_seed)
        for name, entry in payload.items():
            data = np.asarray(entry["data"], dtype=np.float64)
            shape = tuple(entry["shape"])
            if data.size != int(np.prod(shape, dtype=np.int64)):
                raise DimensionError(f"parameter {name!r}: {data.size} values for shape {shape}")
            store.add(name, data.reshape(shape))
        return store


def init_mlp(layer_spec, seed):
    """Create MLP parameters with fan-in scaled uniform initialisation.

    Weights and biases of each layer are drawn from U(-b, b) with
    ``b = 1 / sqrt(fan_in)``. The wider ``sqrt(6 / fan_in)`` bound makes the
    initial coefficient outputs so large that Adam at lr 1e-4 cannot settle
    within a thousand epochs.
    """
    layer_spec = [int(w) for w in layer_spec]
    if len(layer_spec) < 2 or min(layer_spec) < 1:
        raise DimensionError(f"layer_spec needs >= 2 positive widths, got {layer_spec}")
    rng = np.random.default_rng(seed)
    store = ParamStore(rng_seed=int(seed))
    for layer, (fan_in, fan_out) in enumerate(zip(layer_spec[:-1], layer_spec[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        store.add(f"W{layer}", rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        store.add(f"b{layer}", rng.uniform(-bound, bound, size=fan_out))
    return store


def forward_mlp(params, layer_spec, x):
    """Evaluate the MLP on a vector ``(width,)`` or a batch ``(n, width)``.

    Hidden layers use ReLU; the output layer is linear.
    """
    x = _lift(x)
    if x.data.ndim not in (1, 2) or x.shape[-1] != layer_spec[0]:
        raise DimensionError(f"input of shape {x.shape} does not match input width {layer_spec[0]}")
    n_layers = len(layer_spec) - 1
    h = x
    for layer in range(n_layers):
        w, b = params[f"W{layer}"], params[f"b{layer}"]
        if w.shape != (layer_spec[layer], layer_spec[layer + 1]):
            raise DimensionError(f"W{layer} has shape {w.shape}, layer_spec implies "
                                 f"{(layer_spec[layer], layer_spec[layer + 1])}")
        h = h @ w + b
        if layer < n_layers - 1:
            h = h.relu()
    return h


def step_optimizer(params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update using the gradients currently held in ``params``."""
    params._t += 1
    t = params._t
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in params.params.items():
        g = p.grad
        m = params._m.get(name)
        if m is None:
            m = params._m[name] = np.zeros_like(g)
            params._v[name] = np.zeros_like(g)
        v = params._v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def checkpoint_dict(params, layer_spec):
    return {
        "format_version": FORMAT_VERSION,
        "layer_spec": [int(w) for w in layer_spec],
        "seed": int(params.rng_seed),
        "parameters": params.to_dict(),
    }


def save_checkpoint(path, params, layer_spec):
    with open(path, "w") as fh:
        json.dump(checkpoint_dict(params, layer_spec), fh)


def params_from_checkpoint(doc):
    """Inverse of :func:`checkpoint_dict`; returns ``(params, layer_spec)``."""
    if doc.get("format_version") != FORMAT_VERSION:
        raise UsageError(f"unsupported checkpoint format_version {doc.get('format_version')!r}")
    params = ParamStore.from_dict(doc["parameters"], rng_seed=doc.get("seed", 0))
    return params, list(doc["layer_spec"])


def load_checkpoint(path):
    with open(path) as fh:
        return params_from_checkpoint(json.load(fh))
