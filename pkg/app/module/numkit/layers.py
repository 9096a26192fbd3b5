"""
Dense layers and multilayer perceptrons with hand-written backpropagation.

Forward passes cache what the backward pass needs; backward is a pure function of
that cache and the upstream gradient.
"""

from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from app.core.errors import ShapeError, StateError
from app.module.numkit.functional import Matrix, as_matrix, ensure_finite, relu, relu_grad

Activation = Literal["relu", "identity"]


class GradSet(Mapping[str, np.ndarray]):
    """Named gradient tensors, shape-matched to a parameter mapping."""

    def __init__(self, grads: dict[str, np.ndarray] | None = None):
        self._grads: dict[str, np.ndarray] = dict(grads or {})

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "GradSet":
        return cls({name: np.zeros_like(value) for name, value in params.items()})

    def __getitem__(self, name: str) -> np.ndarray:
        return self._grads[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._grads)

    def __len__(self) -> int:
        return len(self._grads)

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        self._grads[name] = value

    def prefixed(self, prefix: str) -> "GradSet":
        return GradSet({f"{prefix}.{name}": value for name, value in self._grads.items()})

    def update(self, other: Mapping[str, np.ndarray]) -> None:
        self._grads.update(other)

    def zero(self) -> None:
        for value in self._grads.values():
            value.fill(0.0)

    def check_congruent(self, params: Mapping[str, np.ndarray]) -> None:
        missing = set(params) - set(self._grads)
        if missing:
            raise ShapeError("Gradients missing for parameters", details=", ".join(sorted(missing)))
        for name, value in params.items():
            if self._grads[name].shape != value.shape:
                raise ShapeError(f"Gradient shape {self._grads[name].shape} does not match parameter {name} {value.shape}")


@dataclass(eq=False)
class DenseLayer:
    weights: np.ndarray  # in x out
    bias: np.ndarray  # out
    activation: Activation = "relu"

    def __post_init__(self):
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise ShapeError("Dense layer weight/bias dimensions are inconsistent", details=f"{self.weights.shape} vs {self.bias.shape}")
        if self.activation not in ("relu", "identity"):
            raise ShapeError(f"Unknown activation: {self.activation}")

    @classmethod
    def initialized(cls, in_dim: int, out_dim: int, activation: Activation, rng: np.random.Generator) -> "DenseLayer":
        """He-uniform for ReLU layers, Glorot-uniform for identity layers, zero bias."""
        limit = np.sqrt(6.0 / in_dim) if activation == "relu" else np.sqrt(6.0 / (in_dim + out_dim))
        weights = rng.uniform(-limit, limit, size=(in_dim, out_dim))
        return cls(weights=weights, bias=np.zeros(out_dim), activation=activation)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[1]

    def parameters(self) -> dict[str, np.ndarray]:
        return {"weight": self.weights, "bias": self.bias}

    def preactivation(self, x: Matrix) -> Matrix:
        return x @ self.weights + self.bias

    def activate(self, u: Matrix) -> Matrix:
        return relu(u) if self.activation == "relu" else u

    def backward(self, x: Matrix, u: Matrix, upstream: Matrix) -> tuple[dict[str, np.ndarray], Matrix]:
        du = upstream * relu_grad(u) if self.activation == "relu" else upstream
        return {"weight": x.T @ du, "bias": du.sum(axis=0)}, du @ self.weights.T


@dataclass
class _LayerCache:
    inputs: Matrix
    pre: Matrix
    mask: np.ndarray | None


@dataclass(eq=False)
class Mlp:
    layers: list[DenseLayer]
    dropout_rate: float = 0.0
    _cache: list[_LayerCache] | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("An Mlp needs at least one layer")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ShapeError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ShapeError(f"Layer dimensions do not chain: {prev.out_dim} -> {nxt.in_dim}")

    @classmethod
    def build(cls, dims: Sequence[int], activations: Sequence[Activation], seed: int, dropout_rate: float = 0.0) -> "Mlp":
        if len(activations) != len(dims) - 1:
            raise ShapeError("Need one activation per layer")
        rng = np.random.default_rng(seed)
        layers = [DenseLayer.initialized(d_in, d_out, act, rng) for d_in, d_out, act in zip(dims, dims[1:], activations)]
        return cls(layers=layers, dropout_rate=dropout_rate)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> dict[str, np.ndarray]:
        """Live parameter arrays keyed layers.{i}.weight / layers.{i}.bias."""
        params = {}
        for i, layer in enumerate(self.layers):
            for name, value in layer.parameters().items():
                params[f"layers.{i}.{name}"] = value
        return params

    def param_count(self) -> int:
        return sum(value.size for value in self.parameters().values())

    def forward(self, x, training: bool = False, seed: int = 0, keep_cache: bool = True) -> Matrix:
        """Forward pass; dropout after hidden layers only when training (inverted convention)."""
        h = as_matrix(x, cols=self.in_dim)
        use_dropout = training and self.dropout_rate > 0.0
        rng = np.random.default_rng(seed) if use_dropout else None
        cache = []
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            u = layer.preactivation(h)
            out = layer.activate(u)
            mask = None
            if rng is not None and i < last:
                mask = (rng.random(out.shape) >= self.dropout_rate) / (1.0 - self.dropout_rate)
                out = out * mask
            cache.append(_LayerCache(inputs=h, pre=u, mask=mask))
            h = out
        ensure_finite(h, "mlp output")
        if keep_cache:
            self._cache = cache
        return h

    def backward(self, upstream) -> tuple[GradSet, Matrix]:
        """Gradients for every parameter and for the input of the last cached forward pass."""
        if self._cache is None:
            raise StateError("mlp backward called without a matching forward pass")
        grad = as_matrix(upstream, name="upstream_grad")
        expected = (self._cache[-1].pre.shape[0], self.out_dim)
        if grad.shape != expected:
            raise StateError(f"upstream gradient shape {grad.shape} does not match the cached forward output {expected}")
        grads = GradSet()
        for i in range(len(self.layers) - 1, -1, -1):
            entry = self._cache[i]
            if entry.mask is not None:
                grad = grad * entry.mask
            layer_grads, grad = self.layers[i].backward(entry.inputs, entry.pre, grad)
            for name, value in layer_grads.items():
                grads[f"layers.{i}.{name}"] = value
        return GradSet({name: grads[name] for name in self.parameters()}), grad

    def clear_cache(self) -> None:
        self._cache = None
