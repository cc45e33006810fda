"""Reverse-mode automatic differentiation over dense float64 arrays.

A graph is built once (define-then-run): leaves are inputs, trainable
parameters, or constants, and every operation appends a node whose
parents already exist, so the node list is always in topological order.
``eval`` binds input arrays and runs a forward sweep; ``backward`` runs a
single reverse sweep from a scalar root, accumulating gradients
additively at fan-out, and returns one gradient per trainable parameter.

Supported broadcasting is deliberately narrow: elementwise ops accept
equal shapes or a scalar on either side, nothing else.  Batched network
code therefore expands biases explicitly (see :mod:`mbdl.autodiff.layers`).
A graph instance may be used by only one thread at a time; eval/backward
share per-node cached values with no locking.
"""

import numpy as np

from ..errors import NonFiniteValue, ShapeMismatch
from . import functional as F


class Node:
    __slots__ = ("graph", "index", "op", "parents", "shape", "name",
                 "payload", "trainable", "value", "grad")

    def __init__(self, graph, index, op, parents, shape, name, payload=None,
                 trainable=False):
        self.graph = graph
        self.index = index
        self.op = op
        self.parents = tuple(parents)
        self.shape = tuple(shape)
        self.name = name
        self.payload = payload
        self.trainable = trainable
        self.value = None
        self.grad = None

    def __repr__(self):
        return f"Node({self.name}, op={self.op}, shape={self.shape})"


def _coerce(value, what):
    # note: asarray with order="C" keeps 0-d arrays 0-d, unlike ascontiguousarray
    arr = np.asarray(value, dtype=np.float64, order="C")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{what}: non-finite entries")
    return arr


def _is_scalar(shape):
    return shape == ()


def _reduce_to(grad, shape):
    # gradients for a scalar operand broadcast against a tensor collapse by summation
    if _is_scalar(shape) and grad.shape != ():
        return np.asarray(grad.sum())
    return grad


class ExprGraph:
    """Expression graph with named inputs and trainable parameters."""

    def __init__(self):
        self.nodes = []
        self.inputs = {}
        self.parameters = {}
        self.by_name = {}
        self.root = None

    # -- construction -------------------------------------------------

    def _register(self, op, parents, shape, name, payload=None, trainable=False):
        if name is None:
            name = f"{op}_{len(self.nodes)}"
        if name in self.by_name:
            raise ValueError(f"node name {name!r} already used")
        for p in parents:
            if p.graph is not self:
                raise ValueError(f"node {p.name!r} belongs to a different graph")
        node = Node(self, len(self.nodes), op, parents, shape, name, payload,
                    trainable)
        self.nodes.append(node)
        self.by_name[name] = node
        return node

    def node(self, ref):
        """Resolve a node reference: a Node passes through, a str looks up."""
        if isinstance(ref, str):
            try:
                return self.by_name[ref]
            except KeyError:
                raise KeyError(f"no node named {ref!r}") from None
        return ref

    def input(self, name, shape):
        node = self._register("input", (), tuple(shape), name)
        self.inputs[name] = node
        return node

    def parameter(self, name, value):
        value = _coerce(value, f"parameter {name!r}")
        node = self._register("parameter", (), value.shape, name, trainable=True)
        node.value = value
        self.parameters[name] = node
        return node

    def constant(self, value, name=None):
        value = _coerce(value, f"constant {name or '<anon>'}")
        node = self._register("constant", (), value.shape, name)
        node.value = value
        return node

    # -- elementwise arithmetic ----------------------------------------

    def _elementwise_pair(self, op, a, b, name):
        if a.shape == b.shape or _is_scalar(a.shape) or _is_scalar(b.shape):
            shape = a.shape if not _is_scalar(a.shape) else b.shape
        else:
            raise ShapeMismatch(
                f"{op}: shapes {a.shape} and {b.shape} are neither equal nor "
                f"scalar-vs-tensor (nodes {a.name!r}, {b.name!r})")
        return self._register(op, (a, b), shape, name)

    def add(self, a, b, name=None):
        return self._elementwise_pair("add", a, b, name)

    def sub(self, a, b, name=None):
        return self._elementwise_pair("sub", a, b, name)

    def mul(self, a, b, name=None):
        return self._elementwise_pair("mul", a, b, name)

    def neg(self, a, name=None):
        return self._register("neg", (a,), a.shape, name)

    def smul(self, a, scalar, name=None):
        return self._register("smul", (a,), a.shape, name, payload=float(scalar))

    # -- linear algebra -------------------------------------------------

    def matmul(self, a, b, name=None):
        if len(a.shape) != 2:
            raise ShapeMismatch(f"matmul: left operand {a.name!r} must be 2-D")
        if len(b.shape) == 2:
            if a.shape[1] != b.shape[0]:
                raise ShapeMismatch(
                    f"matmul: inner dims {a.shape} @ {b.shape} "
                    f"(nodes {a.name!r}, {b.name!r})")
            shape = (a.shape[0], b.shape[1])
        elif len(b.shape) == 1:
            if a.shape[1] != b.shape[0]:
                raise ShapeMismatch(
                    f"matmul: inner dims {a.shape} @ {b.shape} "
                    f"(nodes {a.name!r}, {b.name!r})")
            shape = (a.shape[0],)
        else:
            raise ShapeMismatch(f"matmul: right operand {b.name!r} must be 1-D or 2-D")
        return self._register("matmul", (a, b), shape, name)

    def transpose(self, a, name=None):
        if len(a.shape) != 2:
            raise ShapeMismatch(f"transpose: node {a.name!r} must be 2-D")
        return self._register("transpose", (a,), (a.shape[1], a.shape[0]), name)

    # -- activations ------------------------------------------------------

    def relu(self, a, name=None):
        return self._register("relu", (a,), a.shape, name)

    def sigmoid(self, a, name=None):
        return self._register("sigmoid", (a,), a.shape, name)

    def softsign(self, a, name=None):
        return self._register("softsign", (a,), a.shape, name)

    def softplus(self, a, name=None):
        return self._register("softplus", (a,), a.shape, name)

    def exp(self, a, clamp=None, name=None):
        return self._register("exp", (a,), a.shape, name,
                              payload=None if clamp is None else float(clamp))

    def tanh_interval(self, a, lo, hi, name=None):
        if not hi > lo:
            raise ValueError(f"tanh_interval needs hi > lo, got [{lo}, {hi}]")
        return self._register("tanh_interval", (a,), a.shape, name,
                              payload=(float(lo), float(hi)))

    def soft_threshold(self, a, b, name=None):
        if not (a.shape == b.shape or _is_scalar(b.shape)):
            raise ShapeMismatch(
                f"soft_threshold: threshold {b.name!r} must be scalar or match "
                f"{a.name!r} shape {a.shape}")
        return self._register("soft_threshold", (a, b), a.shape, name)

    def softmax(self, a, name=None):
        if len(a.shape) not in (1, 2):
            raise ShapeMismatch(f"softmax: node {a.name!r} must be 1-D or 2-D")
        return self._register("softmax", (a,), a.shape, name)

    # -- reductions and losses -------------------------------------------

    def square(self, a, name=None):
        return self._register("square", (a,), a.shape, name)

    def sum(self, a, name=None):
        return self._register("sum", (a,), (), name)

    def mse(self, pred, target, name=None):
        if pred.shape != target.shape:
            raise ShapeMismatch(
                f"mse: shapes {pred.shape} vs {target.shape} "
                f"(nodes {pred.name!r}, {target.name!r})")
        return self._register("mse", (pred, target), (), name)

    def cross_entropy(self, probs, onehot, name=None):
        if probs.shape != onehot.shape:
            raise ShapeMismatch(
                f"cross_entropy: shapes {probs.shape} vs {onehot.shape} "
                f"(nodes {probs.name!r}, {onehot.name!r})")
        return self._register("cross_entropy", (probs, onehot), (), name)

    # -- structural ops ----------------------------------------------------

    def shift_cols(self, a, shift, period=None, name=None):
        """Shift columns by ``shift`` within consecutive blocks of ``period``
        columns (default: the whole width); vacated columns become zero."""
        if len(a.shape) != 2:
            raise ShapeMismatch(f"shift_cols: node {a.name!r} must be 2-D")
        period = a.shape[1] if period is None else int(period)
        if period <= 0 or a.shape[1] % period:
            raise ShapeMismatch(
                f"shift_cols: width {a.shape[1]} not a multiple of period {period}")
        if abs(shift) >= period:
            raise ValueError("shift_cols: |shift| must be < period")
        return self._register("shift_cols", (a,), a.shape, name,
                              payload=(int(shift), period))

    def concat_rows(self, parts, name=None):
        parts = tuple(parts)
        if not parts:
            raise ValueError("concat_rows needs at least one node")
        ndim = len(parts[0].shape)
        if ndim not in (1, 2) or any(len(p.shape) != ndim for p in parts):
            raise ShapeMismatch("concat_rows: operands must all be 1-D or all 2-D")
        if ndim == 2:
            width = parts[0].shape[1]
            if any(p.shape[1] != width for p in parts):
                raise ShapeMismatch("concat_rows: column counts differ")
            shape = (sum(p.shape[0] for p in parts), width)
        else:
            shape = (sum(p.shape[0] for p in parts),)
        return self._register("concat_rows", parts, shape, name)

    def toeplitz_from_kernels(self, kernels, n, name=None):
        """Expand kernels (C, L) into the (n, C*n) matrix whose c-th block is
        the causal convolution matrix of kernel c: block[i, j] = k[c, i-j]."""
        if len(kernels.shape) != 2:
            raise ShapeMismatch("toeplitz_from_kernels: kernels must be (C, L)")
        c, ell = kernels.shape
        n = int(n)
        if ell > n:
            raise ShapeMismatch(
                f"toeplitz_from_kernels: kernel length {ell} exceeds size {n}")
        return self._register("toeplitz_from_kernels", (kernels,), (n, c * n),
                              name, payload=n)

    # -- execution --------------------------------------------------------

    def eval(self, bindings=None, root=None):
        """Forward pass. ``bindings`` maps input names to arrays; returns the
        value of ``root`` (default: the last node added)."""
        bindings = dict(bindings or {})
        unknown = set(bindings) - set(self.inputs)
        if unknown:
            raise ValueError(f"bindings for unknown inputs: {sorted(unknown)}")
        for name, node in self.inputs.items():
            if name not in bindings:
                raise ValueError(f"missing binding for input {name!r}")
            arr = _coerce(bindings[name], f"input {name!r}")
            if arr.shape != node.shape:
                raise ShapeMismatch(
                    f"input {name!r}: bound shape {arr.shape}, declared {node.shape}")
            node.value = arr
        root = self.node(root) if root is not None else self.root or self.nodes[-1]
        for node in self.nodes[: root.index + 1]:
            if node.op in ("input", "parameter", "constant"):
                continue
            args = [p.value for p in node.parents]
            value = _FORWARD[node.op](node, args)
            value = np.asarray(value, dtype=np.float64)
            if value.shape != node.shape:
                raise ShapeMismatch(
                    f"node {node.name!r}: computed shape {value.shape}, "
                    f"expected {node.shape}")
            if not np.all(np.isfinite(value)):
                raise NonFiniteValue(f"node {node.name!r}: non-finite value")
            node.value = value
        return root.value

    def backward(self, root=None):
        """Reverse sweep from a scalar root (default: last node / set root).

        Returns {parameter name: gradient array}; parameters the root does
        not depend on get zero gradients.  Requires a preceding eval.
        """
        root = self.node(root) if root is not None else self.root or self.nodes[-1]
        if root.value is None:
            raise RuntimeError("backward called before eval")
        if root.shape != ():
            raise ValueError(
                f"backward needs a scalar root, got {root.name!r} "
                f"with shape {root.shape}")
        for node in self.nodes:
            node.grad = None
        root.grad = np.asarray(1.0)
        for node in reversed(self.nodes[: root.index + 1]):
            if node.grad is None or not node.parents:
                continue
            args = [p.value for p in node.parents]
            pgrads = _BACKWARD[node.op](node, node.grad, args)
            for parent, pg in zip(node.parents, pgrads):
                if pg is None:
                    continue
                pg = _reduce_to(np.asarray(pg, dtype=np.float64), parent.shape)
                if parent.grad is None:
                    parent.grad = pg.copy()
                else:
                    parent.grad = parent.grad + pg
        out = {}
        for name, node in self.parameters.items():
            out[name] = node.grad if node.grad is not None else np.zeros(node.shape)
        return out

    # -- parameter access ---------------------------------------------------

    def get_params(self):
        return {name: node.value for name, node in self.parameters.items()}

    def set_param(self, name, value):
        node = self.parameters[name]
        arr = _coerce(value, f"parameter {name!r}")
        if arr.shape != node.shape:
            raise ShapeMismatch(
                f"parameter {name!r}: new shape {arr.shape}, declared {node.shape}")
        node.value = arr

    def set_params(self, values):
        for name, value in values.items():
            self.set_param(name, value)


# ---------------------------------------------------------------------------
# forward kernels


def _fw_add(node, args):
    return args[0] + args[1]


def _fw_sub(node, args):
    return args[0] - args[1]


def _fw_mul(node, args):
    return args[0] * args[1]


def _fw_neg(node, args):
    return -args[0]


def _fw_smul(node, args):
    return args[0] * node.payload


def _fw_matmul(node, args):
    return args[0] @ args[1]


def _fw_transpose(node, args):
    return args[0].T


def _fw_relu(node, args):
    return F.relu(args[0])


def _fw_sigmoid(node, args):
    return F.sigmoid(args[0])


def _fw_softsign(node, args):
    return F.softsign(args[0])


def _fw_softplus(node, args):
    return F.softplus(args[0])


def _fw_exp(node, args):
    return F.exp_clamped(args[0], node.payload)


def _fw_tanh_interval(node, args):
    lo, hi = node.payload
    return F.tanh_interval(args[0], lo, hi)


def _fw_soft_threshold(node, args):
    return F.soft_threshold(args[0], args[1])


def _fw_softmax(node, args):
    return F.softmax(args[0], axis=0)


def _fw_square(node, args):
    return args[0] ** 2


def _fw_sum(node, args):
    return np.asarray(args[0].sum())


def _batch_cols(arr):
    return arr.shape[1] if arr.ndim == 2 else 1


def _fw_mse(node, args):
    p, t = args
    return np.asarray(np.sum((p - t) ** 2) / _batch_cols(p))


def _fw_cross_entropy(node, args):
    p, t = args
    if np.any(p < -1e-9) or np.any(p > 1.0 + 1e-9):
        raise ValueError(
            f"node {node.name!r}: cross_entropy probabilities outside [0, 1]")
    logp = np.log(np.clip(p, F.PROB_FLOOR, 1.0))
    return np.asarray(-np.sum(t * logp) / _batch_cols(p))


def _shift_blocks(arr, shift, period):
    rows, cols = arr.shape
    blocks = arr.reshape(rows, cols // period, period)
    out = np.zeros_like(blocks)
    if shift > 0:
        out[:, :, shift:] = blocks[:, :, :-shift]
    elif shift < 0:
        out[:, :, :shift] = blocks[:, :, -shift:]
    else:
        out[:] = blocks
    return out.reshape(rows, cols)


def _fw_shift_cols(node, args):
    shift, period = node.payload
    return _shift_blocks(args[0], shift, period)


def _fw_concat_rows(node, args):
    return np.concatenate(args, axis=0)


def _fw_toeplitz(node, args):
    kernels = args[0]
    c, ell = kernels.shape
    n = node.payload
    out = np.zeros((n, c * n))
    idx = np.arange(n)
    for ci in range(c):
        for t in range(ell):
            rows = idx[t:]
            out[rows, ci * n + rows - t] = kernels[ci, t]
    return out


_FORWARD = {
    "add": _fw_add, "sub": _fw_sub, "mul": _fw_mul, "neg": _fw_neg,
    "smul": _fw_smul, "matmul": _fw_matmul, "transpose": _fw_transpose,
    "relu": _fw_relu, "sigmoid": _fw_sigmoid, "softsign": _fw_softsign,
    "softplus": _fw_softplus, "exp": _fw_exp, "tanh_interval": _fw_tanh_interval,
    "soft_threshold": _fw_soft_threshold, "softmax": _fw_softmax,
    "square": _fw_square, "sum": _fw_sum, "mse": _fw_mse,
    "cross_entropy": _fw_cross_entropy, "shift_cols": _fw_shift_cols,
    "concat_rows": _fw_concat_rows, "toeplitz_from_kernels": _fw_toeplitz,
}


# ---------------------------------------------------------------------------
# backward kernels: return one gradient per parent (None = no flow)


def _bw_add(node, g, args):
    return g, g


def _bw_sub(node, g, args):
    return g, -g


def _bw_mul(node, g, args):
    return g * args[1], g * args[0]


def _bw_neg(node, g, args):
    return (-g,)


def _bw_smul(node, g, args):
    return (g * node.payload,)


def _bw_matmul(node, g, args):
    a, b = args
    if b.ndim == 2:
        return g @ b.T, a.T @ g
    return np.outer(g, b), a.T @ g


def _bw_transpose(node, g, args):
    return (g.T,)


def _bw_relu(node, g, args):
    return (g * (args[0] > 0),)


def _bw_sigmoid(node, g, args):
    s = node.value
    return (g * s * (1.0 - s),)


def _bw_softsign(node, g, args):
    return (g / (1.0 + np.abs(args[0])) ** 2,)


def _bw_softplus(node, g, args):
    return (g * F.sigmoid(args[0]),)


def _bw_exp(node, g, args):
    d = node.value
    if node.payload is not None:
        d = d * (np.abs(args[0]) < node.payload)
    return (g * d,)


def _bw_tanh_interval(node, g, args):
    lo, hi = node.payload
    t = np.tanh(args[0])
    return (g * (hi - lo) * 0.5 * (1.0 - t * t),)


def _bw_soft_threshold(node, g, args):
    x, b = args
    mask = np.abs(x) > b
    return g * mask, -np.sign(x) * mask * g


def _bw_softmax(node, g, args):
    y = node.value
    if y.ndim == 1:
        return (y * (g - np.dot(g, y)),)
    return (y * (g - np.sum(g * y, axis=0, keepdims=True)),)


def _bw_square(node, g, args):
    return (2.0 * args[0] * g,)


def _bw_sum(node, g, args):
    return (np.full(args[0].shape, float(g)),)


def _bw_mse(node, g, args):
    p, t = args
    d = 2.0 * (p - t) / _batch_cols(p) * float(g)
    return d, -d


def _bw_cross_entropy(node, g, args):
    p, t = args
    clipped = np.clip(p, F.PROB_FLOOR, 1.0)
    scale = float(g) / _batch_cols(p)
    return -t / clipped * scale, -np.log(clipped) * scale


def _bw_shift_cols(node, g, args):
    shift, period = node.payload
    return (_shift_blocks(g, -shift, period),)


def _bw_concat_rows(node, g, args):
    out = []
    offset = 0
    for a in args:
        out.append(g[offset: offset + a.shape[0]])
        offset += a.shape[0]
    return tuple(out)


def _bw_toeplitz(node, g, args):
    kernels = args[0]
    c, ell = kernels.shape
    n = node.payload
    gk = np.zeros_like(kernels)
    idx = np.arange(n)
    for ci in range(c):
        for t in range(ell):
            rows = idx[t:]
            gk[ci, t] = g[rows, ci * n + rows - t].sum()
    return (gk,)


_BACKWARD = {
    "add": _bw_add, "sub": _bw_sub, "mul": _bw_mul, "neg": _bw_neg,
    "smul": _bw_smul, "matmul": _bw_matmul, "transpose": _bw_transpose,
    "relu": _bw_relu, "sigmoid": _bw_sigmoid, "softsign": _bw_softsign,
    "softplus": _bw_softplus, "exp": _bw_exp, "tanh_interval": _bw_tanh_interval,
    "soft_threshold": _bw_soft_threshold, "softmax": _bw_softmax,
    "square": _bw_square, "sum": _bw_sum, "mse": _bw_mse,
    "cross_entropy": _bw_cross_entropy, "shift_cols": _bw_shift_cols,
    "concat_rows": _bw_concat_rows, "toeplitz_from_kernels": _bw_toeplitz,
}


def eval_graph(graph, bindings=None, root=None):
    """Functional alias for ExprGraph.eval."""
    return graph.eval(bindings, root)


def backward(graph, root=None):
    """Functional alias for ExprGraph.backward."""
    return graph.backward(root)
