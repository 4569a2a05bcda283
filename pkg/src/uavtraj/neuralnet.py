"""Dense networks with explicit forward/backward passes.

Everything is float64 and framework-free: layers are affine maps with
rectified-linear hidden units and a configurable output activation, the
optimizer is a hand-rolled adaptive-moment scheme, and gradients are exact
reverse-mode derivatives of the forward map (checked against finite
differences in the test suite).
"""

from __future__ import annotations

import numpy as np

from . import backend

ACTIVATION_CODES = {
    "linear": backend.LINEAR,
    "relu": backend.RELU,
    "tanh": backend.TANH,
}


class Mlp:
    """Fully-connected network defined by its layer widths."""

    def __init__(self, widths, hidden_activation="relu", output_activation="linear",
                 rng=None, final_scale=3e-3):
        if len(widths) < 2:
            raise ValueError("need at least an input and an output width")
        if hidden_activation not in ACTIVATION_CODES or output_activation not in ACTIVATION_CODES:
            raise ValueError("unknown activation")
        self.widths = tuple(int(w) for w in widths)
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation
        rng = rng or np.random.default_rng(0)
        self.weights = []
        self.biases = []
        n_layers = len(self.widths) - 1
        for i in range(n_layers):
            fan_in, fan_out = self.widths[i], self.widths[i + 1]
            # Fan-in scaling keeps early activations moderate; the small
            # final layer starts the outputs near the action-range midpoint.
            bound = final_scale if i == n_layers - 1 else 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def n_layers(self):
        return len(self.weights)

    def _act_code(self, layer):
        name = self.output_activation if layer == self.n_layers - 1 else self.hidden_activation
        return ACTIVATION_CODES[name]

    def forward(self, x):
        """Returns (output, cache); cache feeds backward()."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        a = np.ascontiguousarray(np.atleast_2d(x))
        activations = [a]
        for i in range(self.n_layers):
            a = backend.ops.dense_act_forward(a, self.weights[i], self.biases[i],
                                              self._act_code(i))
            activations.append(a)
        y = activations[-1][0] if single else activations[-1]
        return y, (activations, single)

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_output):
        """Gradients of sum(grad_output * output) w.r.t. parameters and input.

        Returns ([(dW, db), ...] in layer order, dL/dx). Batch gradients are
        summed over the batch dimension.
        """
        activations, single = cache
        delta = np.ascontiguousarray(np.atleast_2d(np.asarray(grad_output, dtype=np.float64)))
        grads = [None] * self.n_layers
        for i in range(self.n_layers - 1, -1, -1):
            gw, gb, gx = backend.ops.dense_act_backward(
                delta, activations[i + 1], activations[i], self.weights[i],
                self._act_code(i))
            grads[i] = (gw, gb)
            delta = gx
        grad_x = delta[0] if single else delta
        return grads, grad_x

    def parameters(self):
        """Flat list [W0, b0, W1, b1, ...]; the live arrays, not copies."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def set_parameters(self, params):
        mine = self.parameters()
        if len(mine) != len(params):
            raise ValueError("parameter count mismatch")
        for dst, src in zip(mine, params):
            dst[...] = src

    def clone(self):
        other = Mlp.__new__(Mlp)
        other.widths = self.widths
        other.hidden_activation = self.hidden_activation
        other.output_activation = self.output_activation
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def save(self, path):
        arrays = {f"w{i}": w for i, w in enumerate(self.weights)}
        arrays.update({f"b{i}": b for i, b in enumerate(self.biases)})
        np.savez(
            path,
            widths=np.array(self.widths, dtype=np.int64),
            hidden_activation=self.hidden_activation,
            output_activation=self.output_activation,
            **arrays,
        )

    @classmethod
    def load(cls, path):
        data = np.load(path, allow_pickle=False)
        net = cls.__new__(cls)
        net.widths = tuple(int(w) for w in data["widths"])
        net.hidden_activation = str(data["hidden_activation"])
        net.output_activation = str(data["output_activation"])
        net.weights = [np.ascontiguousarray(data[f"w{i}"]) for i in range(len(net.widths) - 1)]
        net.biases = [np.ascontiguousarray(data[f"b{i}"]) for i in range(len(net.widths) - 1)]
        return net


class Adam:
    """Adaptive-moment optimizer over a fixed parameter list."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        """One in-place update; grads must align with params."""
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            backend.ops.adam_update(
                p.reshape(-1), np.ascontiguousarray(g, dtype=np.float64).reshape(-1),
                m.reshape(-1), v.reshape(-1),
                self.t, self.lr, self.beta1, self.beta2, self.eps)

    def state_arrays(self):
        arrays = {f"m{i}": m for i, m in enumerate(self.m)}
        arrays.update({f"v{i}": v for i, v in enumerate(self.v)})
        arrays["t"] = np.array(self.t, dtype=np.int64)
        arrays["lr"] = np.array(self.lr, dtype=np.float64)
        return arrays

    def load_state_arrays(self, data):
        self.t = int(data["t"])
        self.lr = float(data["lr"])
        self.m = [np.ascontiguousarray(data[f"m{i}"]) for i in range(len(self.m))]
        self.v = [np.ascontiguousarray(data[f"v{i}"]) for i in range(len(self.v))]


def flatten_grads(net_grads):
    """[(dW, db), ...] -> flat list aligned with Mlp.parameters()."""
    out = []
    for gw, gb in net_grads:
        out.extend((gw, gb))
    return out


def soft_update(target: Mlp, online: Mlp, tau):
    """target <- tau * online + (1 - tau) * target, parameter-wise."""
    for t_arr, o_arr in zip(target.parameters(), online.parameters()):
        t_arr[...] = tau * o_arr + (1.0 - tau) * t_arr
