"""Minimal dense feed-forward networks with taped reverse-mode gradients and
a decoupled-weight-decay Adam optimizer.

This is the single neural substrate used everywhere: the encoder, the
decoder, and the flow field are all ``MultilayerNet`` instances. Activations
are applied between layers only; the output layer is linear. Gradients come
from an explicit tape recorded during the forward pass, which is exact and
fully deterministic for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "leakyrelu", "celu")

_LEAKY_SLOPE = 0.01


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "leakyrelu":
        return np.where(z > 0, z, _LEAKY_SLOPE * z)
    if name == "celu":
        return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0).astype(np.float64)
    if name == "leakyrelu":
        return np.where(z > 0, 1.0, _LEAKY_SLOPE)
    if name == "celu":
        return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class GradientTape:
    """Forward intermediates needed to reproduce exact parameter gradients."""

    inputs: list = field(default_factory=list)      # per-layer inputs
    preacts: list = field(default_factory=list)     # per-layer pre-activations
    squeezed: bool = False                          # input was a single vector


class MultilayerNet:
    """Affine layers with an elementwise activation in between.

    ``dims`` chains input through hidden widths to the output width, e.g.
    ``[2, 16, 32, 16, 4]``. Weights use seeded He-uniform initialization,
    biases start at zero.
    """

    def __init__(self, dims, activation: str = "relu", seed: int = 0):
        dims = [int(d) for d in dims]
        if len(dims) < 2:
            raise ValueError("need at least an input and an output width")
        if any(d < 1 for d in dims):
            raise ValueError(f"layer widths must be positive, got {dims}")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")
        self.dims = dims
        self.activation = activation
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / fan_in)
            self.weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def params(self) -> list:
        """Live parameter arrays, interleaved [W0, b0, W1, b1, ...]."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def zero_grads(self) -> list:
        return [np.zeros_like(p) for p in self.params()]

    def forward(self, x, record: bool = False):
        """Apply the network to a vector or a (batch, in) matrix.

        With ``record=True`` returns ``(output, tape)`` for a later
        ``backward`` call.
        """
        a = np.asarray(x, dtype=np.float64)
        squeezed = a.ndim == 1
        if squeezed:
            a = a[None, :]
        if a.shape[1] != self.dims[0]:
            raise ValueError(f"input width {a.shape[1]} does not match first layer ({self.dims[0]})")
        tape = GradientTape(squeezed=squeezed) if record else None
        last = self.n_layers - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if record:
                tape.inputs.append(a)
            z = a @ w.T + b
            if record:
                tape.preacts.append(z)
            a = _act(self.activation, z) if l < last else z
        if squeezed:
            a = a[0]
        return (a, tape) if record else a

    def backward(self, tape: GradientTape, upstream, grads: list | None = None):
        """Reverse-mode sweep for one recorded forward pass.

        ``upstream`` is the loss gradient at the network output. Parameter
        gradients are accumulated into ``grads`` (a ``zero_grads``-shaped
        list, freshly allocated when omitted); the gradient with respect to
        the network input is returned alongside.
        """
        g = np.asarray(upstream, dtype=np.float64)
        if tape.squeezed:
            g = g[None, :]
        if grads is None:
            grads = self.zero_grads()
        for l in range(self.n_layers - 1, -1, -1):
            if l < self.n_layers - 1:
                g = g * _act_grad(self.activation, tape.preacts[l])
            grads[2 * l] += g.T @ tape.inputs[l]
            grads[2 * l + 1] += g.sum(axis=0)
            g = g @ self.weights[l]
        if tape.squeezed:
            g = g[0]
        return grads, g


class AdamW:
    """Adam with decoupled weight decay, operating in place on a parameter list."""

    def __init__(self, params: list, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.step_count = 0

    def step(self, grads: list) -> None:
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p
            p -= self.lr * update


CHECKPOINT_VERSION = 1


def net_to_dict(net: MultilayerNet) -> dict:
    """JSON-ready checkpoint: dims, activation, flat row-major parameters."""
    return {
        "format_version": CHECKPOINT_VERSION,
        "dims": list(net.dims),
        "activation": net.activation,
        "layers": [
            {"weights": w.ravel().tolist(), "bias": b.tolist()}
            for w, b in zip(net.weights, net.biases)
        ],
    }


def net_from_dict(data: dict) -> MultilayerNet:
    version = data.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint format version {version!r}")
    net = MultilayerNet(data["dims"], activation=data["activation"])
    if len(data["layers"]) != net.n_layers:
        raise ValueError("checkpoint layer count does not match dims")
    for l, layer in enumerate(data["layers"]):
        w = np.asarray(layer["weights"], dtype=np.float64).reshape(net.weights[l].shape)
        b = np.asarray(layer["bias"], dtype=np.float64)
        if b.shape != net.biases[l].shape:
            raise ValueError(f"checkpoint bias shape mismatch in layer {l}")
        net.weights[l] = w
        net.biases[l] = b
    return net
