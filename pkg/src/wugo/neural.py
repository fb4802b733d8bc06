"""Minimal differentiable-network core.

Everything here is specialised to the one architecture the surrogates use:
a two-layer perceptron y = W2 tanh(W1 x + b1) + b2. Gradients are exact and
written out by hand, including the parameter gradients of the WGAN gradient
penalty, which need the derivative of the network's input gradient.

Parameters live in one flat vector; the layer matrices are reshaped views of
it, so optimiser updates on the flat vector are visible to the layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TrainingDivergence(RuntimeError):
    """Raised when a training step encounters non-finite numbers."""


class Mlp:
    """Two-layer perceptron with tanh hidden activation."""

    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int, rng: np.random.Generator):
        if hidden_dim < 1:
            raise ValueError("hidden_dim must be positive")
        self.in_dim, self.hidden_dim, self.out_dim = in_dim, hidden_dim, out_dim
        n = hidden_dim * in_dim + hidden_dim + out_dim * hidden_dim + out_dim
        self.params = np.empty(n)
        self._bind_views()
        # Uniform +-1/sqrt(fan_in) for each layer's weights and biases.
        s1, s2 = 1.0 / np.sqrt(in_dim), 1.0 / np.sqrt(hidden_dim)
        k = hidden_dim * in_dim + hidden_dim
        self.params[:k] = rng.uniform(-s1, s1, size=k)
        self.params[k:] = rng.uniform(-s2, s2, size=n - k)

    def _bind_views(self):
        h, i, o = self.hidden_dim, self.in_dim, self.out_dim
        p = self.params
        a = 0
        self.w1 = p[a : a + h * i].reshape(h, i); a += h * i
        self.b1 = p[a : a + h]; a += h
        self.w2 = p[a : a + o * h].reshape(o, h); a += o * h
        self.b2 = p[a : a + o]

    @property
    def n_params(self) -> int:
        return self.params.size

    def clone(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.in_dim, other.hidden_dim, other.out_dim = (
            self.in_dim, self.hidden_dim, self.out_dim,
        )
        other.params = self.params.copy()
        other._bind_views()
        return other

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Batch forward pass; x is (B, in_dim), result (B, out_dim)."""
        x = np.atleast_2d(x)
        if x.shape[1] != self.in_dim:
            raise ValueError(f"input has {x.shape[1]} features, expected {self.in_dim}")
        return np.tanh(x @ self.w1.T + self.b1) @ self.w2.T + self.b2

    def forward_cached(self, x: np.ndarray):
        x = np.atleast_2d(x)
        t = np.tanh(x @ self.w1.T + self.b1)
        return t @ self.w2.T + self.b2, (x, t)

    def backward(self, cache, grad_out: np.ndarray) -> np.ndarray:
        """Exact parameter gradients given d(loss)/d(output); returns a flat vector."""
        x, t = cache
        grad_out = np.atleast_2d(grad_out)
        dw2 = grad_out.T @ t
        db2 = grad_out.sum(axis=0)
        du = (grad_out @ self.w2) * (1.0 - t * t)
        dw1 = du.T @ x
        db1 = du.sum(axis=0)
        return np.concatenate([dw1.ravel(), db1, dw2.ravel(), db2])

    def input_gradient(self, x: np.ndarray) -> np.ndarray:
        """d(output)/d(input) for scalar-output networks; (B, in_dim)."""
        if self.out_dim != 1:
            raise ValueError("input_gradient requires out_dim == 1")
        x = np.atleast_2d(x)
        t = np.tanh(x @ self.w1.T + self.b1)
        s = (1.0 - t * t) * self.w2[0]
        return s @ self.w1


def response_gradient(disc: Mlp, x: np.ndarray) -> np.ndarray:
    """d D / d(first input coordinate) for a scalar critic, per batch row."""
    if disc.out_dim != 1:
        raise ValueError("critic must have scalar output")
    t = np.tanh(x @ disc.w1.T + disc.b1)
    return ((1.0 - t * t) * disc.w2[0]) @ disc.w1[:, 0]


def penalty_at(disc: Mlp, x_hat: np.ndarray, cond: np.ndarray, lam: float = 1.0):
    """Gradient penalty lam * mean_i (|dD/dx(x_hat_i, cond_i)| - 1)^2 and its
    exact parameter gradients.

    The critic input is the response coordinate followed by the condition, so
    the penalised gradient is the scalar dD/d(response). The parameter
    gradients differentiate that closed form directly.
    """
    if disc.out_dim != 1:
        raise ValueError("critic must have scalar output")
    x_hat = np.asarray(x_hat, dtype=float).ravel()
    cond = np.atleast_2d(cond)
    inp = np.concatenate([x_hat[:, None], cond], axis=1)
    nb = inp.shape[0]

    t = np.tanh(inp @ disc.w1.T + disc.b1)  # (B, H)
    s = 1.0 - t * t
    v = disc.w1[:, 0]                        # response-coordinate weights
    w2 = disc.w2[0]
    g = s @ (w2 * v)                         # (B,) critic response-gradients

    absg = np.abs(g)
    penalty = lam * float(np.mean((absg - 1.0) ** 2))

    # dP/dg_i, with the batch mean and lam folded in.
    q = (2.0 * lam / nb) * (absg - 1.0) * np.sign(g)

    qs = q @ s                               # (H,)
    e = (q[:, None] * t) * s                 # (B, H)
    dw2 = (v * qs)[None, :]
    dw1 = -2.0 * ((w2 * v)[:, None] * (e.T @ inp))
    dw1[:, 0] += w2 * qs
    db1 = -2.0 * (w2 * v) * e.sum(axis=0)
    db2 = np.zeros(1)
    grads = np.concatenate([dw1.ravel(), db1, dw2.ravel(), db2])
    return penalty, grads


def gradient_penalty(
    disc: Mlp,
    real: np.ndarray,
    fake: np.ndarray,
    cond: np.ndarray,
    rng: np.random.Generator,
    lam: float = 1.0,
):
    """WGAN-GP term on random interpolates between real and fake responses."""
    real = np.asarray(real, dtype=float).ravel()
    fake = np.asarray(fake, dtype=float).ravel()
    u = rng.random(real.shape[0])
    x_hat = u * real + (1.0 - u) * fake
    return penalty_at(disc, x_hat, cond, lam)


class AdamState:
    """Standard bias-corrected Adam over a flat parameter vector."""

    def __init__(self, n_params: int, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay

    def step(self, params: np.ndarray, grads: np.ndarray, lr: float | None = None) -> None:
        if grads.shape != params.shape:
            raise ValueError("gradient and parameter shapes differ")
        if not np.all(np.isfinite(grads)):
            raise TrainingDivergence(
                f"non-finite gradient at Adam step {self.t + 1}"
            )
        a = self.lr if lr is None else lr
        self.t += 1
        self.m += (1.0 - self.beta1) * (grads - self.m)
        self.v += (1.0 - self.beta2) * (grads * grads - self.v)
        mhat = self.m / (1.0 - self.beta1**self.t)
        vhat = self.v / (1.0 - self.beta2**self.t)
        params -= a * mhat / (np.sqrt(vhat) + self.eps)
        if self.weight_decay:
            params -= a * self.weight_decay * params  # decoupled decay


@dataclass(frozen=True)
class StepLrSchedule:
    """lr(e) = base_lr * gamma^floor(e / step_epochs)."""

    base_lr: float = 1e-1
    gamma: float = 1e-1
    step_epochs: int = 30

    def lr(self, epoch: int) -> float:
        return self.base_lr * self.gamma ** (epoch // self.step_epochs)
