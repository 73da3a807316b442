"""The embedding unmasking network: four fully connected d -> d layers.

Layers 1-3 are FC -> BatchNorm -> LeakyReLU; layer 4 is FC -> BatchNorm.
Forward and backward passes are written out by hand in numpy. The backward
pass goes through the batch-statistics terms of BatchNorm exactly, which is
what the finite-difference tests pin down.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BatchTooSmall,
    CacheMismatch,
    DimensionMismatch,
    InvalidDimension,
    ShapeMismatch,
)
from .rng import CounterRng

NUM_LAYERS = 4
_INIT_STREAM = 11


@dataclass
class EumParameters:
    """Weights, biases and BatchNorm state for all four layers.

    weights[i] is d x d with one output unit per row; the bn_* lists hold
    one length-d array per layer. running_mean/var are inference-time
    statistics, updated only by forward_train.
    """

    d: int
    leaky_slope: float
    bn_epsilon: float
    bn_momentum: float
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    bn_gamma: list[np.ndarray]
    bn_beta: list[np.ndarray]
    bn_running_mean: list[np.ndarray]
    bn_running_var: list[np.ndarray]

    def copy(self) -> "EumParameters":
        return EumParameters(
            d=self.d,
            leaky_slope=self.leaky_slope,
            bn_epsilon=self.bn_epsilon,
            bn_momentum=self.bn_momentum,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            bn_gamma=[g.copy() for g in self.bn_gamma],
            bn_beta=[b.copy() for b in self.bn_beta],
            bn_running_mean=[m.copy() for m in self.bn_running_mean],
            bn_running_var=[v.copy() for v in self.bn_running_var],
        )


@dataclass
class ForwardCache:
    """Everything the backward pass needs from one forward_train call."""

    batch: np.ndarray
    fc_inputs: list[np.ndarray] = field(default_factory=list)   # input to each FC
    pre_bn: list[np.ndarray] = field(default_factory=list)      # z = x W^T + b
    bn_mean: list[np.ndarray] = field(default_factory=list)
    bn_inv_std: list[np.ndarray] = field(default_factory=list)  # 1/sqrt(var+eps)
    bn_normalized: list[np.ndarray] = field(default_factory=list)
    post_bn: list[np.ndarray] = field(default_factory=list)     # gamma*norm + beta


@dataclass
class ParamGrads:
    """Gradients shaped like the trainable arrays, plus d(loss)/d(input)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    bn_gamma: list[np.ndarray]
    bn_beta: list[np.ndarray]
    input_grad: np.ndarray


def init_params(
    d: int,
    seed: int,
    leaky_slope: float = 0.01,
    bn_epsilon: float = 1e-5,
    bn_momentum: float = 0.9,
) -> EumParameters:
    """Fresh parameters: variance-scaled gaussian weights, identity BatchNorm.

    Weight entries are N(0, 2 / (d * (1 + slope^2))), the scaling that keeps
    activation magnitudes stable under LeakyReLU for any d.
    """
    if not isinstance(d, int) or d < 1:
        raise InvalidDimension(f"dimension must be a positive integer, got {d!r}")
    rng = CounterRng(seed, stream=_INIT_STREAM)
    std = float(np.sqrt(2.0 / (d * (1.0 + leaky_slope**2))))
    weights = [rng.normal(d * d, sigma=std).reshape(d, d) for _ in range(NUM_LAYERS)]
    return EumParameters(
        d=d,
        leaky_slope=leaky_slope,
        bn_epsilon=bn_epsilon,
        bn_momentum=bn_momentum,
        weights=weights,
        biases=[np.zeros(d) for _ in range(NUM_LAYERS)],
        bn_gamma=[np.ones(d) for _ in range(NUM_LAYERS)],
        bn_beta=[np.zeros(d) for _ in range(NUM_LAYERS)],
        bn_running_mean=[np.zeros(d) for _ in range(NUM_LAYERS)],
        bn_running_var=[np.ones(d) for _ in range(NUM_LAYERS)],
    )


def _check_batch(params: EumParameters, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != params.d:
        raise DimensionMismatch(
            f"batch shape {batch.shape} incompatible with dimension {params.d}"
        )
    return batch


def _leaky_relu(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


def forward_train(params: EumParameters, batch) -> tuple[np.ndarray, ForwardCache]:
    """Training-mode forward pass: BatchNorm uses batch statistics.

    Updates running statistics in place
    (running <- momentum * running + (1 - momentum) * batch).
    Returns the N x d outputs and the cache backward() needs.
    """
    batch = _check_batch(params, batch)
    n = batch.shape[0]
    if n < 2:
        raise BatchTooSmall(f"training forward needs N >= 2, got {n}")

    cache = ForwardCache(batch=batch)
    h = batch
    mom = params.bn_momentum
    for i in range(NUM_LAYERS):
        cache.fc_inputs.append(h)
        z = h @ params.weights[i].T + params.biases[i]
        mean = z.mean(axis=0)
        var = np.mean((z - mean) ** 2, axis=0)  # population variance
        inv_std = 1.0 / np.sqrt(var + params.bn_epsilon)
        normalized = (z - mean) * inv_std
        post_bn = params.bn_gamma[i] * normalized + params.bn_beta[i]

        params.bn_running_mean[i] = mom * params.bn_running_mean[i] + (1.0 - mom) * mean
        params.bn_running_var[i] = mom * params.bn_running_var[i] + (1.0 - mom) * var

        cache.pre_bn.append(z)
        cache.bn_mean.append(mean)
        cache.bn_inv_std.append(inv_std)
        cache.bn_normalized.append(normalized)
        cache.post_bn.append(post_bn)

        h = _leaky_relu(post_bn, params.leaky_slope) if i < NUM_LAYERS - 1 else post_bn
    return h, cache


def forward_infer(params: EumParameters, batch) -> np.ndarray:
    """Inference-mode forward pass: BatchNorm uses running statistics.

    Accepts N >= 1 and never mutates the parameters.
    """
    batch = _check_batch(params, batch)
    h = batch
    for i in range(NUM_LAYERS):
        z = h @ params.weights[i].T + params.biases[i]
        inv_std = 1.0 / np.sqrt(params.bn_running_var[i] + params.bn_epsilon)
        post_bn = params.bn_gamma[i] * (z - params.bn_running_mean[i]) * inv_std
        post_bn += params.bn_beta[i]
        h = _leaky_relu(post_bn, params.leaky_slope) if i < NUM_LAYERS - 1 else post_bn
    return h


def backward(params: EumParameters, cache: ForwardCache, grad_outputs) -> ParamGrads:
    """Exact gradients of a scalar loss through the whole network.

    grad_outputs is d(loss)/d(outputs) for the forward_train call that
    produced the cache. Returns gradients for W, b, gamma, beta of every
    layer plus d(loss)/d(input batch) for diagnostics.
    """
    grad_outputs = np.asarray(grad_outputs, dtype=np.float64)
    if len(cache.pre_bn) != NUM_LAYERS:
        raise CacheMismatch("cache does not hold all layers")
    if grad_outputs.shape != cache.post_bn[-1].shape:
        raise CacheMismatch(
            f"grad shape {grad_outputs.shape} vs outputs {cache.post_bn[-1].shape}"
        )
    if cache.fc_inputs[0].shape[1] != params.d:
        raise CacheMismatch("cache produced for a different dimension")

    n = cache.batch.shape[0]
    d_weights: list[np.ndarray] = [None] * NUM_LAYERS  # type: ignore[list-item]
    d_biases: list[np.ndarray] = [None] * NUM_LAYERS  # type: ignore[list-item]
    d_gamma: list[np.ndarray] = [None] * NUM_LAYERS  # type: ignore[list-item]
    d_beta: list[np.ndarray] = [None] * NUM_LAYERS  # type: ignore[list-item]

    g = grad_outputs
    for i in reversed(range(NUM_LAYERS)):
        if i < NUM_LAYERS - 1:
            # LeakyReLU: slope on the negative side of the BN output
            g = g * np.where(cache.post_bn[i] > 0, 1.0, params.leaky_slope)

        # BatchNorm backward with batch-statistics terms
        x_norm = cache.bn_normalized[i]
        d_gamma[i] = np.sum(g * x_norm, axis=0)
        d_beta[i] = np.sum(g, axis=0)
        dxn = g * params.bn_gamma[i]
        dz = (cache.bn_inv_std[i] / n) * (
            n * dxn - dxn.sum(axis=0) - x_norm * np.sum(dxn * x_norm, axis=0)
        )

        # FC backward: z = x W^T + b
        d_weights[i] = dz.T @ cache.fc_inputs[i]
        d_biases[i] = dz.sum(axis=0)
        g = dz @ params.weights[i]

    return ParamGrads(
        weights=d_weights,
        biases=d_biases,
        bn_gamma=d_gamma,
        bn_beta=d_beta,
        input_grad=g,
    )


def sgd_step(params: EumParameters, grads: ParamGrads, lr: float) -> EumParameters:
    """Vanilla SGD update p <- p - lr * g on every trainable array.

    Running BatchNorm statistics are left untouched. Updates in place and
    returns the same object.
    """
    for i in range(NUM_LAYERS):
        for p, g in (
            (params.weights[i], grads.weights[i]),
            (params.biases[i], grads.biases[i]),
            (params.bn_gamma[i], grads.bn_gamma[i]),
            (params.bn_beta[i], grads.bn_beta[i]),
        ):
            if p.shape != g.shape:
                raise ShapeMismatch(f"layer {i + 1}: {p.shape} vs {g.shape}")
            p -= lr * g
    return params
