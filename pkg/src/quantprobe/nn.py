"""Minimal differentiable kernel for the three probe architectures.

Dense/ReLU/losses/BiLSTM with hand-derived backward passes, plus SGD with
classical momentum and global-norm gradient clipping. Everything runs in
float64; forward calls cache what their backward needs, so the usage pattern
is strictly forward -> backward -> step per batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import QuantProbeError, ShapeError

Array = np.ndarray


class NonFiniteGradient(QuantProbeError):
    """Raised by the optimizer when a gradient contains NaN or infinity."""


def _check_shapes(a: Array, b: Array, op: str):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


@dataclass
class Param:
    value: Array
    grad: Array = field(init=False)
    momentum: Array = field(init=False)

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.momentum = np.zeros_like(self.value)


class ParamSet:
    """Named parameters with matching gradient and momentum buffers."""

    def __init__(self):
        self._params: dict[str, Param] = {}

    def add(self, name: str, value: Array) -> Param:
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        p = Param(value)
        self._params[name] = p
        return p

    def __iter__(self):
        return iter(self._params.items())

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def names(self) -> list[str]:
        return list(self._params)

    def count(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def global_grad_norm(self) -> float:
        total = 0.0
        for p in self._params.values():
            total += float(np.sum(p.grad * p.grad))
        return float(np.sqrt(total))

    def zero_grads(self):
        for p in self._params.values():
            p.grad.fill(0.0)

    def snapshot(self) -> dict[str, Array]:
        return {name: p.value.copy() for name, p in self._params.items()}

    def restore(self, snap: dict[str, Array]):
        for name, p in self._params.items():
            np.copyto(p.value, snap[name])


def sgd_step(params: ParamSet, lr: float, momentum: float, clip_norm: float | None = 5.0):
    """Clip gradients jointly by global L2 norm, apply classical momentum,
    update parameters in place, zero gradients."""
    norm = params.global_grad_norm()
    if not np.isfinite(norm):
        raise NonFiniteGradient(f"global gradient norm is {norm}")
    scale = 1.0
    if clip_norm is not None and norm > clip_norm:
        scale = clip_norm / norm
    for _, p in params:
        g = p.grad if scale == 1.0 else p.grad * scale
        p.momentum *= momentum
        p.momentum += g
        p.value -= lr * p.momentum
    params.zero_grads()


# --- layers -------------------------------------------------------------

class Dense:
    """y = x @ W + b with uniform +-fan_in^(-1/2) init."""

    def __init__(self, params: ParamSet, name: str, in_dim: int, out_dim: int,
                 rng: np.random.Generator):
        bound = in_dim ** -0.5
        self.W = params.add(f"{name}.W", rng.uniform(-bound, bound, (in_dim, out_dim)))
        self.b = params.add(f"{name}.b", rng.uniform(-bound, bound, out_dim))
        self._x: Array | None = None

    def forward(self, x: Array) -> Array:
        if x.shape[1] != self.W.value.shape[0]:
            raise ShapeError(
                f"dense: input {x.shape} incompatible with weights {self.W.value.shape}")
        self._x = x
        return x @ self.W.value + self.b.value

    def backward(self, dout: Array) -> Array:
        x = self._x
        self.W.grad += x.T @ dout
        self.b.grad += dout.sum(axis=0)
        return dout @ self.W.value.T


class ReLU:
    def forward(self, x: Array) -> Array:
        self._mask = x > 0.0  # subgradient at 0 is 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout: Array) -> Array:
        return np.where(self._mask, dout, 0.0)


# --- losses -------------------------------------------------------------

def mse(pred: Array, target: Array) -> tuple[float, Array]:
    """Mean squared error over all entries; returns (loss, dloss/dpred)."""
    _check_shapes(pred, target, "mse")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, (2.0 / diff.size) * diff


def summed_mse(pred: Array, target: Array) -> tuple[float, Array]:
    """Per-column MSEs added together (two-output range loss)."""
    _check_shapes(pred, target, "summed_mse")
    diff = pred - target
    n = diff.shape[0]
    loss = float(np.sum(np.mean(diff * diff, axis=0)))
    return loss, (2.0 / n) * diff


def softmax(logits: Array) -> Array:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_xent(logits: Array, labels: Array) -> tuple[float, Array]:
    """Mean categorical cross-entropy from raw logits and integer labels."""
    if logits.shape[0] != labels.shape[0]:
        raise ShapeError(f"softmax_xent: {logits.shape[0]} logits vs {labels.shape[0]} labels")
    n = logits.shape[0]
    p = softmax(logits)
    picked = p[np.arange(n), labels]
    loss = float(-np.mean(np.log(np.maximum(picked, 1e-300))))
    dlogits = p
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


# --- BiLSTM --------------------------------------------------------------

def _sigmoid(x: Array) -> Array:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class _LSTMDirection:
    """One direction of the BiLSTM. Gate layout along the 4H axis: i, f, g, o.

    Masked recurrence: once t reaches an example's length, its hidden and cell
    states freeze, so the state after the last step equals the state at each
    example's final valid token.
    """

    def __init__(self, params: ParamSet, name: str, in_dim: int, hidden: int,
                 rng: np.random.Generator):
        bound = hidden ** -0.5
        self.hidden = hidden
        self.Wx = params.add(f"{name}.Wx", rng.uniform(-bound, bound, (in_dim, 4 * hidden)))
        self.Wh = params.add(f"{name}.Wh", rng.uniform(-bound, bound, (hidden, 4 * hidden)))
        b = rng.uniform(-bound, bound, 4 * hidden)
        b[hidden:2 * hidden] = 1.0  # forget-gate bias
        self.b = params.add(f"{name}.b", b)

    def forward(self, x: Array, mask: Array) -> Array:
        """x: [B, T, in_dim]; mask: [B, T] in {0, 1}. Returns final h [B, H]."""
        B, T, _ = x.shape
        H = self.hidden
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        self._cache = []
        self._x = x
        self._mask = mask
        for t in range(T):
            z = x[:, t, :] @ self.Wx.value + h @ self.Wh.value + self.b.value
            i = _sigmoid(z[:, :H])
            f = _sigmoid(z[:, H:2 * H])
            g = np.tanh(z[:, 2 * H:3 * H])
            o = _sigmoid(z[:, 3 * H:])
            c_new = f * c + i * g
            tanh_c = np.tanh(c_new)
            h_new = o * tanh_c
            m = mask[:, t:t + 1]
            self._cache.append((h, c, i, f, g, o, tanh_c, m))
            h = m * h_new + (1.0 - m) * h
            c = m * c_new + (1.0 - m) * c
        return h

    def backward(self, dh_final: Array) -> Array:
        """BPTT from the gradient of the final hidden state; returns dx."""
        x, mask = self._x, self._mask
        B, T, _ = x.shape
        H = self.hidden
        dx = np.zeros_like(x)
        dh = dh_final.copy()
        dc = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            h_prev, c_prev, i, f, g, o, tanh_c, m = self._cache[t]
            dh_step = m * dh
            dh_carry = (1.0 - m) * dh
            dc_step = m * dc
            dc_carry = (1.0 - m) * dc
            do = dh_step * tanh_c
            dc_new = dc_step + dh_step * o * (1.0 - tanh_c * tanh_c)
            df = dc_new * c_prev
            di = dc_new * g
            dg = dc_new * i
            dz = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ], axis=1)
            self.Wx.grad += x[:, t, :].T @ dz
            self.Wh.grad += h_prev.T @ dz
            self.b.grad += dz.sum(axis=0)
            dx[:, t, :] = dz @ self.Wx.value.T
            dh = dz @ self.Wh.value.T + dh_carry
            dc = dc_new * f + dc_carry
        return dx


class BiLSTM:
    """Bidirectional LSTM returning the concatenated final hidden states."""

    def __init__(self, params: ParamSet, name: str, in_dim: int, hidden: int,
                 rng: np.random.Generator):
        self.fwd = _LSTMDirection(params, f"{name}.fwd", in_dim, hidden, rng)
        self.bwd = _LSTMDirection(params, f"{name}.bwd", in_dim, hidden, rng)
        self.hidden = hidden

    @staticmethod
    def _reverse(x: Array, lengths: Array) -> Array:
        """Reverse each sequence within its valid length, keeping padding last."""
        out = np.zeros_like(x)
        for b, n in enumerate(lengths):
            out[b, :n] = x[b, n - 1::-1]
        return out

    def forward(self, x: Array, lengths: Array) -> Array:
        B, T, _ = x.shape
        if lengths.shape != (B,):
            raise ShapeError(f"lengths shape {lengths.shape} does not match batch {x.shape}")
        if np.any(lengths < 1) or np.any(lengths > T):
            raise ShapeError(f"lengths out of range for T={T}")
        mask = (np.arange(T)[None, :] < lengths[:, None]).astype(np.float64)
        self._lengths = lengths
        h_f = self.fwd.forward(x, mask)
        h_b = self.bwd.forward(self._reverse(x, lengths), mask)
        return np.concatenate([h_f, h_b], axis=1)

    def backward(self, dout: Array) -> Array:
        H = self.hidden
        dx_f = self.fwd.backward(dout[:, :H])
        dx_b_rev = self.bwd.backward(dout[:, H:])
        return dx_f + self._reverse(dx_b_rev, self._lengths)


# --- in-product gradient check (used by the selftest command) -------------

def finite_difference_check(loss_fn, params: ParamSet, h: float = 1e-5,
                            rel_tol: float = 1e-4, abs_tol: float = 1e-7) -> float:
    """Compare analytic gradients against central differences; returns the
    worst relative error and raises AssertionError when out of tolerance.

    loss_fn() must run forward+backward and leave gradients accumulated.
    """
    params.zero_grads()
    loss_fn()
    analytic = {name: p.grad.copy() for name, p in params}
    params.zero_grads()
    worst = 0.0
    for name, p in params:
        flat = p.value.reshape(-1)
        gflat = analytic[name].reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            lo_plus = loss_fn()
            params.zero_grads()
            flat[k] = orig - h
            lo_minus = loss_fn()
            params.zero_grads()
            flat[k] = orig
            fd = (lo_plus - lo_minus) / (2 * h)
            diff = abs(fd - gflat[k])
            denom = max(abs(fd), abs(gflat[k]))
            rel = diff / denom if denom > 0 else 0.0
            if diff > abs_tol and rel > rel_tol:
                raise AssertionError(
                    f"gradient mismatch at {name}[{k}]: analytic={gflat[k]:.8g} fd={fd:.8g}")
            worst = max(worst, rel if denom > 0 else 0.0)
    return worst
