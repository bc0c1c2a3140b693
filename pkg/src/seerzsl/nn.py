"""Dense layers, initialization, dropout, Adam, and train-loop controls."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, add, matmul, relu, sigmoid, tanh

__all__ = [
    "init_params",
    "dropout_mask",
    "Dense",
    "Mlp",
    "Adam",
    "adam_step",
    "TrainControls",
    "schedule_step",
    "clip_global_norm",
]

_ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh, "none": None}


def _draw_init(shape: tuple[int, ...], scheme: str, rng: np.random.Generator) -> np.ndarray:
    if any(s <= 0 for s in shape):
        raise ValueError(f"init_params: zero or negative extent in shape {shape}")
    fan_in = shape[0]
    fan_out = shape[-1]
    if scheme == "kaiming":
        return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
    if scheme == "xavier":
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape)
    raise ValueError(f"unknown initialization scheme {scheme!r}")


def init_params(shape, scheme: str, seed: int) -> Tensor:
    """Kaiming-normal or Xavier-uniform parameter draw, deterministic per seed."""
    return Tensor(_draw_init(tuple(shape), scheme, np.random.default_rng(seed)))


def _draw_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    keep = (rng.random(size=shape) >= rate).astype(np.float64)
    return keep / (1.0 - rate)


def dropout_mask(shape, rate: float, training: bool, seed: int) -> Tensor:
    """Inverted-dropout keep mask; all ones at inference or rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return Tensor(np.ones(shape))
    return Tensor(_draw_mask(tuple(shape), rate, np.random.default_rng(seed)))


class Dense:
    """Affine map with an optional elementwise activation.

    Weight is ``[in, out]``, bias ``[out]``. Initialization follows the
    activation: kaiming for relu, xavier otherwise.
    """

    def __init__(self, in_dim: int, out_dim: int, activation: str = "none", *,
                 rng: np.random.Generator, scheme: str | None = None):
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if scheme is None:
            scheme = "kaiming" if activation == "relu" else "xavier"
        self.activation = activation
        self.weight = Tensor(_draw_init((in_dim, out_dim), scheme, rng))
        self.bias = Tensor(np.zeros(out_dim))

    def __call__(self, x: Tensor) -> Tensor:
        out = add(matmul(x, self.weight), self.bias)
        act = _ACTIVATIONS[self.activation]
        return out if act is None else act(out)

    def params(self) -> list[Tensor]:
        return [self.weight, self.bias]

    def set_params(self, params: list[Tensor]) -> None:
        self.weight, self.bias = params


class Mlp:
    """Stack of Dense layers with inverted dropout on hidden activations."""

    def __init__(self, widths: list[int], hidden_activation: str = "relu",
                 out_activation: str = "none", *, rng: np.random.Generator,
                 dropout: float = 0.0):
        if len(widths) < 2:
            raise ValueError("an Mlp needs at least input and output widths")
        if not 0.0 <= dropout < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {dropout}")
        self.dropout = dropout
        self.layers = []
        for i in range(len(widths) - 1):
            act = hidden_activation if i < len(widths) - 2 else out_activation
            self.layers.append(Dense(widths[i], widths[i + 1], act, rng=rng))

    def __call__(self, x: Tensor, *, training: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        h = x
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if training and self.dropout > 0.0 and i < len(self.layers) - 1:
                if rng is None:
                    raise ValueError("training-mode forward with dropout needs an rng")
                h = h * Tensor(_draw_mask(h.shape, self.dropout, rng))
        return h

    def params(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.params()]

    def set_params(self, params: list[Tensor]) -> None:
        it = iter(params)
        for layer in self.layers:
            layer.set_params([next(it), next(it)])


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: "Adam",
              lr: float) -> list[np.ndarray]:
    """One bias-corrected Adam update; returns fresh parameter arrays."""
    return state.step(params, grads, lr)


class Adam:
    """Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8)."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: list[np.ndarray] = []
        self.v: list[np.ndarray] = []

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> list[np.ndarray]:
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        if len(params) != len(self.m):
            raise ValueError("parameter count changed under the optimizer")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            checksum = float(np.asarray(g).sum())
            if checksum != checksum or checksum in (np.inf, -np.inf):
                raise FloatingPointError("non-finite gradient in Adam step")
            m, v = self.m[i], self.v[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            step = v / bc2
            np.sqrt(step, out=step)
            step += self.eps
            np.divide(m, step, out=step)
            step *= lr / bc1
            out.append(p - step)
        return out

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {"t": np.array([float(self.t)])}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            arrays[f"m{i}"] = m
            arrays[f"v{i}"] = v
        return arrays

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.t = int(arrays["t"][0])
        n = sum(1 for k in arrays if k.startswith("m"))
        self.m = [np.array(arrays[f"m{i}"]) for i in range(n)]
        self.v = [np.array(arrays[f"v{i}"]) for i in range(n)]


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> list[np.ndarray]:
    """Scale the whole gradient list so its joint L2 norm is at most max_norm."""
    total = np.sqrt(sum(float((g * g).sum()) for g in grads))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return [g * scale for g in grads]


@dataclass
class TrainControls:
    """Exponential learning-rate decay plus patience-based early stopping."""

    base_lr: float = 1e-3
    decay: float = 0.97
    patience: int = 20
    mode: str = "max"
    best: float | None = field(default=None)
    bad_epochs: int = field(default=0)

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ValueError("base learning rate must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        if self.mode not in ("max", "min"):
            raise ValueError("mode must be 'max' or 'min'")


def schedule_step(controls: TrainControls, epoch: int, val_metric: float | None) -> tuple[float, bool]:
    """Learning rate for this epoch and whether patience is exhausted."""
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    lr = controls.base_lr * controls.decay ** epoch
    if val_metric is None:
        return lr, False
    improved = (
        controls.best is None
        or (controls.mode == "max" and val_metric > controls.best)
        or (controls.mode == "min" and val_metric < controls.best)
    )
    if improved:
        controls.best = val_metric
        controls.bad_epochs = 0
    else:
        controls.bad_epochs += 1
    return lr, controls.bad_epochs >= controls.patience
