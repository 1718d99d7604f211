"""Model assembly for the three compared networks.

CTN  : Concat -> Linear 1200 -> PReLU -> Linear 300 -> PReLU
       -> Linear 100 -> PReLU -> Linear 100 -> PReLU -> Linear zdim
BLN  : Bilinear* 1200 -> SumPool 4 -> L2Norm -> Linear 100 -> PReLU
       -> Linear 100 -> PReLU -> Linear zdim
CAN  : CAU* 1200 -> SumPool 4 -> Softmin -> Linear 100 -> PReLU
       -> Linear 100 -> PReLU -> Linear zdim

The feature extractor is the identity, so the relation layer sees the raw
normalized patch vectors. The parameter registry routes each tensor to the
right optimizer: only CAN's U and V are constrained non-negative.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import layers as L

MODEL_KINDS = ("ctn", "bln", "can")


@dataclass
class ModelConfig:
    kind: str
    zdim: int
    input_dim: int = 121
    relation_units: int = 1200
    pooled_units: int = 300
    hidden: tuple = (100, 100)

    def __post_init__(self):
        self.kind = self.kind.lower()
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}, expected {MODEL_KINDS}")
        if self.zdim < 1:
            raise ValueError(f"zdim must be >= 1, got {self.zdim}")
        if self.kind in ("bln", "can") and self.relation_units % self.pooled_units:
            raise ValueError(
                f"relation_units={self.relation_units} must be a multiple of "
                f"pooled_units={self.pooled_units}"
            )

    @property
    def pool_group(self):
        return self.relation_units // self.pooled_units

    def to_dict(self):
        return {
            "kind": self.kind,
            "zdim": self.zdim,
            "input_dim": self.input_dim,
            "relation_units": self.relation_units,
            "pooled_units": self.pooled_units,
            "hidden": list(self.hidden),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", (100, 100)))
        return cls(**d)


@dataclass
class RegistryEntry:
    name: str
    tensor: np.ndarray
    constraint: str  # "nonneg" | "free"


class ParamRegistry:
    """Ordered name -> tensor map with per-tensor constraint tags."""

    def __init__(self):
        self.entries = []
        self._by_name = {}

    def add(self, name, tensor, constraint):
        if name in self._by_name:
            raise ValueError(f"duplicate registry entry {name!r}")
        e = RegistryEntry(name, tensor, constraint)
        self.entries.append(e)
        self._by_name[name] = e
        return e

    def __getitem__(self, name):
        return self._by_name[name]

    def names(self):
        return [e.name for e in self.entries]

    def num_params(self):
        return int(sum(e.tensor.size for e in self.entries))


class Model:
    """An ordered layer stack with a two-input relation layer in front."""

    def __init__(self, config, layer_list):
        self.config = config
        self.layers = layer_list

    def forward(self, x, y):
        """Run the stack on a batch (or single pair) of patch vectors."""
        x = np.asarray(x)
        y = np.asarray(y)
        single = x.ndim == 1
        if single:
            x, y = x[None, :], y[None, :]
        peak = max(np.max(np.abs(x)), np.max(np.abs(y)))
        if peak > 0.5 + 1e-6:
            warnings.warn(
                f"input exceeds the normalized range [-0.5, 0.5] (max abs {peak:.3g})",
                RuntimeWarning,
                stacklevel=2,
            )
        trace = []
        out = None
        for layer in self.layers:
            if layer.two_input:
                out, cache = layer.forward(x, y)
            else:
                out, cache = layer.forward(out)
            trace.append(cache)
        if single:
            return out[0], trace
        return out, trace

    def backward(self, trace, grad_z):
        """Backpropagate; returns gradients keyed by registry names."""
        grad_z = np.asarray(grad_z)
        if grad_z.ndim == 1:
            grad_z = grad_z[None, :]
        if len(trace) != len(self.layers):
            raise ValueError("trace depth does not match the layer stack")
        grads = {}
        g = grad_z
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            gin, pgrads = layer.backward(trace[i], g)
            for pname, pg in pgrads.items():
                grads[f"{i}.{pname}"] = pg
            if layer.two_input:
                break
            g = gin
        return grads

    def registry(self):
        reg = ParamRegistry()
        for i, layer in enumerate(self.layers):
            cons = layer.constraints()
            for pname, tensor in layer.params().items():
                reg.add(f"{i}.{pname}", tensor, cons[pname])
        return reg


def _init_linear(rng, fan_out, fan_in, dtype):
    s = 1.0 / np.sqrt(fan_in)
    w = rng.uniform(-s, s, size=(fan_out, fan_in)).astype(dtype)
    b = np.zeros((1, fan_out), dtype=dtype)
    return L.Linear(w, b)


def _mlp_tail(rng, in_dim, hidden, zdim, dtype):
    tail = []
    prev = in_dim
    for h in hidden:
        tail.append(_init_linear(rng, h, prev, dtype))
        tail.append(L.PRelu(dtype=dtype))
        prev = h
    tail.append(_init_linear(rng, zdim, prev, dtype))
    return tail


def build_model(config, rng, dtype=np.float32):
    """Build a model and its parameter registry from a seeded generator."""
    n = config.input_dim
    k = config.relation_units
    if config.kind == "ctn":
        stack = [L.Concat()]
        stack += _mlp_tail(
            rng, 2 * n, (k, config.pooled_units) + config.hidden, config.zdim, dtype
        )
    elif config.kind == "bln":
        s = 1.0 / np.sqrt(n)
        u = rng.uniform(-s, s, size=(k, n)).astype(dtype)
        v = rng.uniform(-s, s, size=(k, n)).astype(dtype)
        stack = [L.BilinearRankOne(u, v), L.SumPool(config.pool_group), L.L2Norm()]
        stack += _mlp_tail(rng, config.pooled_units, config.hidden, config.zdim, dtype)
    else:  # can
        hi = 1.0 / np.sqrt(n)
        u = rng.uniform(1e-4, hi, size=(k, n)).astype(dtype)
        v = rng.uniform(1e-4, hi, size=(k, n)).astype(dtype)
        stack = [L.CauRankOne(u, v), L.SumPool(config.pool_group), L.Softmin()]
        stack += _mlp_tail(rng, config.pooled_units, config.hidden, config.zdim, dtype)
    model = Model(config, stack)
    return model, model.registry()
