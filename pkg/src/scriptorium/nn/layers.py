"""Differentiable layers over float32 numpy arrays.

Convolutional layers use (B, C, H, W) layout; recurrent and linear layers use
(B, T, F).  Each layer caches what its backward pass needs; ``backward``
returns the gradient with respect to the input and accumulates parameter
gradients, so call ``zero_grads`` between steps.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


class ShapeError(Exception):
    """Input incompatible with a layer; message names the layer."""


def _uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class Layer:
    name = ""

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def zero_grads(self) -> None:
        for g in self.grads().values():
            g[...] = 0.0


class Conv2d(Layer):
    """Stride-1 2D convolution with zero padding.

    Implemented as a sum of shifted batched matmuls over kernel offsets,
    which keeps memory linear in the input (no full im2col buffer).
    """

    def __init__(self, name, in_ch, out_ch, kernel, padding, rng):
        self.name = name
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kh, self.kw = kernel
        self.ph, self.pw = padding
        fan_in = in_ch * self.kh * self.kw
        self.weight = _uniform_init(rng, (out_ch, in_ch, self.kh, self.kw), fan_in)
        self.bias = _uniform_init(rng, (out_ch,), fan_in)
        self.dweight = np.zeros_like(self.weight)
        self.dbias = np.zeros_like(self.bias)
        self._cache = None

    def out_size(self, h: int, w: int) -> tuple[int, int]:
        return h + 2 * self.ph - self.kh + 1, w + 2 * self.pw - self.kw + 1

    def forward(self, x, train=False, rng=None):
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise ShapeError(f"{self.name}: expected (B,{self.in_ch},H,W), got {x.shape}")
        b, _, h, w = x.shape
        ho, wo = self.out_size(h, w)
        if ho < 1 or wo < 1:
            raise ShapeError(f"{self.name}: input {h}x{w} too small for kernel")
        xp = np.pad(x, ((0, 0), (0, 0), (self.ph, self.ph), (self.pw, self.pw)))
        xt = np.ascontiguousarray(xp.transpose(0, 2, 3, 1))  # (B, Hp, Wp, C)
        wr = self.weight.transpose(2, 3, 1, 0)  # (kh, kw, C, O)
        out = np.zeros((b, ho, wo, self.out_ch), dtype=np.float32)
        for ki in range(self.kh):
            for kj in range(self.kw):
                out += xt[:, ki:ki + ho, kj:kj + wo, :] @ wr[ki, kj]
        out += self.bias
        self._cache = (xt, (b, h, w, ho, wo))
        return np.ascontiguousarray(out.transpose(0, 3, 1, 2))

    def backward(self, dout):
        xt, (b, h, w, ho, wo) = self._cache
        dt = np.ascontiguousarray(dout.transpose(0, 2, 3, 1))  # (B, Ho, Wo, O)
        dflat = dt.reshape(-1, self.out_ch)
        wr = self.weight.transpose(2, 3, 1, 0)
        dxt = np.zeros_like(xt)
        for ki in range(self.kh):
            for kj in range(self.kw):
                patch = xt[:, ki:ki + ho, kj:kj + wo, :].reshape(-1, self.in_ch)
                self.dweight[:, :, ki, kj] += (dflat.T @ patch)
                dxt[:, ki:ki + ho, kj:kj + wo, :] += dt @ wr[ki, kj].T
        self.dbias += dout.sum(axis=(0, 2, 3))
        dxp = dxt.transpose(0, 3, 1, 2)
        if self.ph or self.pw:
            dxp = dxp[:, :, self.ph:self.ph + h, self.pw:self.pw + w]
        return np.ascontiguousarray(dxp)

    def params(self):
        return {f"{self.name}.weight": self.weight, f"{self.name}.bias": self.bias}

    def grads(self):
        return {f"{self.name}.weight": self.dweight, f"{self.name}.bias": self.dbias}


class MaxPool2x2(Layer):
    """2x2 max pooling with stride 2; trailing odd rows/columns are dropped."""

    def __init__(self, name):
        self.name = name
        self._cache = None

    @staticmethod
    def out_size(h: int, w: int) -> tuple[int, int]:
        return h // 2, w // 2

    def forward(self, x, train=False, rng=None):
        b, c, h, w = x.shape
        ho, wo = h // 2, w // 2
        if ho < 1 or wo < 1:
            raise ShapeError(f"{self.name}: input {h}x{w} too small to pool")
        view = x[:, :, : ho * 2, : wo * 2].reshape(b, c, ho, 2, wo, 2)
        windows = view.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, ho, wo, 4)
        idx = windows.argmax(axis=-1)
        out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
        self._cache = (x.shape, idx)
        return out

    def backward(self, dout):
        (b, c, h, w), idx = self._cache
        ho, wo = h // 2, w // 2
        dwin = np.zeros((b, c, ho, wo, 4), dtype=np.float32)
        np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
        dx = np.zeros((b, c, h, w), dtype=np.float32)
        dx[:, :, : ho * 2, : wo * 2] = (
            dwin.reshape(b, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, ho * 2, wo * 2)
        )
        return dx


class ReLU(Layer):
    def __init__(self, name):
        self.name = name
        self._mask = None

    def forward(self, x, train=False, rng=None):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0).astype(np.float32)

    def backward(self, dout):
        return np.where(self._mask, dout, 0.0).astype(np.float32)


class Sigmoid(Layer):
    """Forward-only output squashing (used by the segmentation head)."""

    def __init__(self, name):
        self.name = name

    def forward(self, x, train=False, rng=None):
        return expit(x).astype(np.float32)

    def backward(self, dout):
        raise NotImplementedError(f"{self.name}: sigmoid head is inference-only")


class BatchNorm2d(Layer):
    """Per-channel batch normalization over (B, H, W)."""

    def __init__(self, name, channels, momentum=0.1, eps=1e-5):
        self.name = name
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.weight = np.ones(channels, dtype=np.float32)
        self.bias = np.zeros(channels, dtype=np.float32)
        self.running_mean = np.zeros(channels, dtype=np.float32)
        self.running_var = np.ones(channels, dtype=np.float32)
        self.dweight = np.zeros_like(self.weight)
        self.dbias = np.zeros_like(self.bias)
        self._cache = None

    def forward(self, x, train=False, rng=None):
        if x.shape[1] != self.channels:
            raise ShapeError(f"{self.name}: expected {self.channels} channels, got {x.shape[1]}")
        if train:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            n = x.shape[0] * x.shape[2] * x.shape[3]
            unbiased = var * n / max(n - 1, 1)
            self.running_mean += self.momentum * (mean - self.running_mean)
            self.running_var += self.momentum * (unbiased - self.running_var)
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
        out = xhat * self.weight[None, :, None, None] + self.bias[None, :, None, None]
        self._cache = (xhat, inv_std, train)
        return out.astype(np.float32)

    def backward(self, dout):
        xhat, inv_std, was_train = self._cache
        self.dweight += (dout * xhat).sum(axis=(0, 2, 3))
        self.dbias += dout.sum(axis=(0, 2, 3))
        w_inv = (self.weight * inv_std)[None, :, None, None]
        if not was_train:
            return (dout * w_inv).astype(np.float32)
        n = dout.shape[0] * dout.shape[2] * dout.shape[3]
        dxhat = dout * self.weight[None, :, None, None]
        mean_d = dxhat.mean(axis=(0, 2, 3), keepdims=True)
        mean_dx = (dxhat * xhat).mean(axis=(0, 2, 3), keepdims=True)
        dx = (dxhat - mean_d - xhat * mean_dx) * inv_std[None, :, None, None]
        return dx.astype(np.float32)

    def params(self):
        return {f"{self.name}.weight": self.weight, f"{self.name}.bias": self.bias}

    def grads(self):
        return {f"{self.name}.weight": self.dweight, f"{self.name}.bias": self.dbias}

    def buffers(self):
        return {
            f"{self.name}.running_mean": self.running_mean,
            f"{self.name}.running_var": self.running_var,
        }


class Dropout(Layer):
    """Inverted dropout; identity at inference."""

    def __init__(self, name, p):
        self.name = name
        self.p = p
        self._mask = None

    def forward(self, x, train=False, rng=None):
        if not train or self.p <= 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.p
        self._mask = (rng.random(x.shape) < keep).astype(np.float32) / keep
        return (x * self._mask).astype(np.float32)

    def backward(self, dout):
        if self._mask is None:
            return dout
        return (dout * self._mask).astype(np.float32)


class Collapse(Layer):
    """(B, C, H, W) -> (B, W, C*H): width becomes time, channels x height
    become the frame feature vector."""

    def __init__(self, name):
        self.name = name
        self._shape = None

    def forward(self, x, train=False, rng=None):
        b, c, h, w = x.shape
        self._shape = x.shape
        return np.ascontiguousarray(x.transpose(0, 3, 1, 2).reshape(b, w, c * h))

    def backward(self, dout):
        b, c, h, w = self._shape
        return np.ascontiguousarray(dout.reshape(b, w, c, h).transpose(0, 2, 3, 1))


def _sigmoid(x):
    return expit(x)


class _LstmDirection:
    """Single-direction LSTM over (B, T, F); gate order i, f, g, o."""

    def __init__(self, prefix, input_size, hidden, rng):
        self.prefix = prefix
        self.input_size = input_size
        self.hidden = hidden
        h = hidden
        self.w_ih = _uniform_init(rng, (4 * h, input_size), input_size)
        self.w_hh = _uniform_init(rng, (4 * h, h), h)
        self.b_ih = np.zeros(4 * h, dtype=np.float32)
        self.b_hh = np.zeros(4 * h, dtype=np.float32)
        self.b_ih[h:2 * h] = 1.0  # forget-gate bias starts open
        self.dw_ih = np.zeros_like(self.w_ih)
        self.dw_hh = np.zeros_like(self.w_hh)
        self.db_ih = np.zeros_like(self.b_ih)
        self.db_hh = np.zeros_like(self.b_hh)
        self._cache = None

    def forward(self, x):
        b, t, _ = x.shape
        h = self.hidden
        hs = np.zeros((t + 1, b, h), dtype=np.float32)
        cs = np.zeros((t + 1, b, h), dtype=np.float32)
        gates = np.zeros((t, b, 4 * h), dtype=np.float32)
        x_proj = x @ self.w_ih.T + (self.b_ih + self.b_hh)
        for step in range(t):
            raw = x_proj[:, step, :] + hs[step] @ self.w_hh.T
            i = _sigmoid(raw[:, :h])
            f = _sigmoid(raw[:, h:2 * h])
            g = np.tanh(raw[:, 2 * h:3 * h])
            o = _sigmoid(raw[:, 3 * h:])
            cs[step + 1] = f * cs[step] + i * g
            hs[step + 1] = o * np.tanh(cs[step + 1])
            gates[step] = np.concatenate([i, f, g, o], axis=1)
        self._cache = (x, hs, cs, gates)
        return hs[1:].transpose(1, 0, 2)  # (B, T, H)

    def backward(self, dout):
        x, hs, cs, gates = self._cache
        b, t, _ = x.shape
        h = self.hidden
        dx = np.zeros_like(x)
        dh_next = np.zeros((b, h), dtype=np.float32)
        dc_next = np.zeros((b, h), dtype=np.float32)
        for step in range(t - 1, -1, -1):
            i = gates[step][:, :h]
            f = gates[step][:, h:2 * h]
            g = gates[step][:, 2 * h:3 * h]
            o = gates[step][:, 3 * h:]
            c_new = cs[step + 1]
            tanh_c = np.tanh(c_new)
            dh = dout[:, step, :] + dh_next
            do = dh * tanh_c
            dc = dh * o * (1.0 - tanh_c ** 2) + dc_next
            di = dc * g
            dg = dc * i
            df = dc * cs[step]
            dc_next = dc * f
            draw = np.concatenate(
                [di * i * (1 - i), df * f * (1 - f), dg * (1 - g ** 2), do * o * (1 - o)],
                axis=1,
            ).astype(np.float32)
            self.dw_ih += draw.T @ x[:, step, :]
            self.dw_hh += draw.T @ hs[step]
            db = draw.sum(axis=0)
            self.db_ih += db
            self.db_hh += db
            dx[:, step, :] = draw @ self.w_ih
            dh_next = draw @ self.w_hh
        return dx

    def params(self):
        return {
            f"{self.prefix}.w_ih": self.w_ih,
            f"{self.prefix}.w_hh": self.w_hh,
            f"{self.prefix}.b_ih": self.b_ih,
            f"{self.prefix}.b_hh": self.b_hh,
        }

    def grads(self):
        return {
            f"{self.prefix}.w_ih": self.dw_ih,
            f"{self.prefix}.w_hh": self.dw_hh,
            f"{self.prefix}.b_ih": self.db_ih,
            f"{self.prefix}.b_hh": self.db_hh,
        }


class BiLSTM(Layer):
    """Bidirectional LSTM; outputs are the concatenated directions."""

    def __init__(self, name, input_size, hidden, rng):
        self.name = name
        self.input_size = input_size
        self.hidden = hidden
        self.fw = _LstmDirection(f"{name}.fw", input_size, hidden, rng)
        self.bw = _LstmDirection(f"{name}.bw", input_size, hidden, rng)

    def forward(self, x, train=False, rng=None):
        if x.ndim != 3 or x.shape[2] != self.input_size:
            raise ShapeError(f"{self.name}: expected (B,T,{self.input_size}), got {x.shape}")
        out_f = self.fw.forward(x)
        out_b = self.bw.forward(x[:, ::-1, :])[:, ::-1, :]
        return np.concatenate([out_f, out_b], axis=2)

    def backward(self, dout):
        h = self.hidden
        dx_f = self.fw.backward(dout[:, :, :h])
        dx_b = self.bw.backward(dout[:, ::-1, h:])[:, ::-1, :]
        return (dx_f + dx_b).astype(np.float32)

    def params(self):
        return {**self.fw.params(), **self.bw.params()}

    def grads(self):
        return {**self.fw.grads(), **self.bw.grads()}


class AxisBiLSTM(Layer):
    """Bidirectional LSTM swept along one spatial axis of a (B, C, H, W) map.

    axis "x" scans columns within each row; axis "y" scans rows within each
    column.  Inference-only (used by the segmentation topology).
    """

    def __init__(self, name, input_size, hidden, axis, rng):
        if axis not in ("x", "y"):
            raise ValueError("axis must be 'x' or 'y'")
        self.name = name
        self.axis = axis
        self.hidden = hidden
        self.inner = BiLSTM(f"{name}.{axis}", input_size, hidden, rng)

    def forward(self, x, train=False, rng=None):
        b, c, h, w = x.shape
        if self.axis == "x":
            seq = x.transpose(0, 2, 3, 1).reshape(b * h, w, c)
            out = self.inner.forward(seq)
            return np.ascontiguousarray(
                out.reshape(b, h, w, 2 * self.hidden).transpose(0, 3, 1, 2)
            )
        seq = x.transpose(0, 3, 2, 1).reshape(b * w, h, c)
        out = self.inner.forward(seq)
        return np.ascontiguousarray(
            out.reshape(b, w, h, 2 * self.hidden).transpose(0, 3, 2, 1)
        )

    def backward(self, dout):
        raise NotImplementedError(f"{self.name}: segmentation layers are inference-only")

    def params(self):
        return self.inner.params()

    def grads(self):
        return self.inner.grads()


class Linear(Layer):
    def __init__(self, name, in_features, out_features, rng):
        self.name = name
        self.in_features = in_features
        self.weight = _uniform_init(rng, (out_features, in_features), in_features)
        self.bias = _uniform_init(rng, (out_features,), in_features)
        self.dweight = np.zeros_like(self.weight)
        self.dbias = np.zeros_like(self.bias)
        self._cache = None

    def forward(self, x, train=False, rng=None):
        if x.shape[-1] != self.in_features:
            raise ShapeError(f"{self.name}: expected feature size {self.in_features}, got {x.shape[-1]}")
        self._cache = x
        return (x @ self.weight.T + self.bias).astype(np.float32)

    def backward(self, dout):
        x = self._cache
        flat_x = x.reshape(-1, x.shape[-1])
        flat_d = dout.reshape(-1, dout.shape[-1])
        self.dweight += flat_d.T @ flat_x
        self.dbias += flat_d.sum(axis=0)
        return (dout @ self.weight).astype(np.float32)

    def params(self):
        return {f"{self.name}.weight": self.weight, f"{self.name}.bias": self.bias}

    def grads(self):
        return {f"{self.name}.weight": self.dweight, f"{self.name}.bias": self.dbias}


class LogSoftmax(Layer):
    """Log-softmax over the last axis."""

    def __init__(self, name):
        self.name = name
        self._out = None

    def forward(self, x, train=False, rng=None):
        shifted = x - x.max(axis=-1, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        self._out = out.astype(np.float32)
        return self._out

    def backward(self, dout):
        softmax = np.exp(self._out)
        return (dout - softmax * dout.sum(axis=-1, keepdims=True)).astype(np.float32)
