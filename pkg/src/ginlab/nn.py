"""Layers and optimizer: linear maps, batch normalization, inverted dropout,
and Adam with the stepped learning-rate schedule."""

from __future__ import annotations

import numpy as np

from .tensor import ShapeError, Tape, Tensor, add_bias, matmul, relu

BN_VARIANCE_FLOOR = 1e-5
BN_MOMENTUM = 0.1


def glorot_uniform(fan_in: int, fan_out: int, shape, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Linear:
    """y = x W + b with uniform variance-preserving initialization."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.weight = Tensor(glorot_uniform(in_dim, out_dim, (in_dim, out_dim), rng))
        self.bias = Tensor(np.zeros(out_dim))

    def __call__(self, x: Tensor, tape: Tape | None = None, exact: bool = False) -> Tensor:
        return add_bias(matmul(x, self.weight, tape, exact), self.bias, tape)

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


class BatchNorm1d:
    """Per-column normalization with learnable scale/shift and running stats.

    Training normalizes with batch statistics (variance floored at
    BN_VARIANCE_FLOOR) and updates running statistics with momentum
    BN_MOMENTUM; eval normalizes with the running statistics.
    """

    def __init__(self, dim: int):
        self.gamma = Tensor(np.ones(dim))
        self.beta = Tensor(np.zeros(dim))
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)

    def parameters(self) -> list[Tensor]:
        return [self.gamma, self.beta]

    def __call__(self, x: Tensor, mode: str, tape: Tape | None = None) -> Tensor:
        if x.values.ndim != 2 or x.shape[1] != self.gamma.shape[0]:
            raise ShapeError(
                f"batchnorm over {self.gamma.shape[0]} columns got input {x.shape}"
            )
        if mode == "train":
            mean = x.values.mean(axis=0)
            var = x.values.var(axis=0)
            self.running_mean = (1 - BN_MOMENTUM) * self.running_mean + BN_MOMENTUM * mean
            self.running_var = (1 - BN_MOMENTUM) * self.running_var + BN_MOMENTUM * var
        elif mode == "eval":
            mean = self.running_mean
            var = self.running_var
        else:
            raise ValueError(f"unknown mode {mode!r}")
        inv_std = 1.0 / np.sqrt(var + BN_VARIANCE_FLOOR)
        xhat = (x.values - mean) * inv_std
        out = Tensor(self.gamma.values * xhat + self.beta.values)
        if tape is not None:
            gamma, beta = self.gamma, self.beta
            batch_mode = mode == "train"

            def bwd():
                if out.grad is None:
                    return
                dgamma = (out.grad * xhat).sum(axis=0)
                dbeta = out.grad.sum(axis=0)
                gamma.grad = dgamma if gamma.grad is None else gamma.grad + dgamma
                beta.grad = dbeta if beta.grad is None else beta.grad + dbeta
                dxhat = out.grad * gamma.values
                if batch_mode:
                    # mean and variance both depend on x
                    dx = (
                        dxhat
                        - dxhat.mean(axis=0)
                        - xhat * (dxhat * xhat).mean(axis=0)
                    ) * inv_std
                else:
                    dx = dxhat * inv_std
                x.grad = dx if x.grad is None else x.grad + dx

            tape.record(bwd)
        return out


def dropout(
    x: Tensor,
    p: float,
    mode: str,
    rng: int | np.random.Generator,
    tape: Tape | None = None,
) -> Tensor:
    """Inverted dropout: kept entries scaled by 1/(1-p); identity in eval mode."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if mode == "eval" or p == 0.0:
        return x
    if mode != "train":
        raise ValueError(f"unknown mode {mode!r}")
    gen = np.random.default_rng(rng) if isinstance(rng, int) else rng
    mask = (gen.random(x.shape) >= p) / (1.0 - p)
    out = Tensor(x.values * mask)
    if tape is not None:

        def bwd():
            if out.grad is None:
                return
            if x.grad is None:
                x.grad = out.grad * mask
            else:
                x.grad += out.grad * mask

        tape.record(bwd)
    return out


def mlp2(in_dim: int, hidden: int, out_dim: int, rng: np.random.Generator) -> list[Linear]:
    return [Linear(in_dim, hidden, rng), Linear(hidden, out_dim, rng)]


class Adam:
    """Adam with bias correction and a base-rate halving schedule.

    Learning rate at a given epoch is base_lr * decay ** (epoch // decay_every).
    """

    def __init__(
        self,
        params: list[Tensor],
        base_lr: float = 0.01,
        decay: float = 0.5,
        decay_every: int = 50,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.base_lr = base_lr
        self.decay = decay
        self.decay_every = decay_every
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.values) for p in params]
        self.v = [np.zeros_like(p.values) for p in params]

    def learning_rate(self, epoch: int) -> float:
        return self.base_lr * self.decay ** (epoch // self.decay_every)

    def step(self, epoch: int) -> None:
        lr = self.learning_rate(epoch)
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                continue
            if g.shape != p.values.shape:
                raise ShapeError(f"gradient shape {g.shape} != parameter {p.values.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.values -= lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: Adam, epoch: int) -> None:
    """Functional form: install grads, apply one scheduled Adam update."""
    for p, g in zip(params, grads):
        p.grad = g
    state.step(epoch)
    state.zero_grad()
