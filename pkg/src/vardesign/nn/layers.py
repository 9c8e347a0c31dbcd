"""Network layers and the spec-driven Net container.

A network is described by a list of plain dicts (JSON-friendly), e.g.

    [{"kind": "conv2d", "in": 1, "out": 8, "kernel": 3, "stride": 2, "pad": 1},
     {"kind": "lrelu"},
     {"kind": "residual", "body": [...]},
     {"kind": "flatten"},
     {"kind": "dense", "in": 1536, "out": 24}]

Net builds the layers with seeded Kaiming-uniform weights and zero biases,
names every parameter by its layer index, and re-raises shape errors with
that index so a bad config points at the offending layer.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor

LEAKY_SLOPE = 0.2


def kaiming_uniform(rng: np.random.Generator, shape: tuple[int, ...],
                    fan_in: int, dtype) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Layer:
    """Base layer: stateless unless it defines weights."""

    kind = "layer"

    def __init__(self):
        self.name = self.kind

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def params(self) -> list[tuple[str, Tensor]]:
        return []

    def spec(self) -> dict:
        return {"kind": self.kind}


class Dense(Layer):
    kind = "dense"

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, dtype):
        super().__init__()
        self.n_in, self.n_out = int(n_in), int(n_out)
        self.weight = Tensor(kaiming_uniform(rng, (self.n_in, self.n_out), self.n_in, dtype),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(self.n_out, dtype=dtype), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"dense expects (N, {self.n_in}), got {x.shape}")
        return T.add(T.matmul(x, self.weight), self.bias)

    def params(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def spec(self):
        return {"kind": self.kind, "in": self.n_in, "out": self.n_out}


class Conv2d(Layer):
    """Cross-correlation with zero padding, square kernel."""

    kind = "conv2d"

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int, pad: int,
                 rng: np.random.Generator, dtype):
        super().__init__()
        self.c_in, self.c_out = int(c_in), int(c_out)
        self.kernel, self.stride, self.pad = int(kernel), int(stride), int(pad)
        fan_in = self.c_in * self.kernel * self.kernel
        self.weight = Tensor(
            kaiming_uniform(rng, (self.c_out, fan_in), fan_in, dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(self.c_out, dtype=dtype), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 4 or x.shape[1] != self.c_in:
            raise ValueError(f"conv2d expects (N, {self.c_in}, H, W), got {x.shape}")
        n, _, h, w = x.shape
        k, s, p = self.kernel, self.stride, self.pad
        out_h = (h + 2 * p - k) // s + 1
        out_w = (w + 2 * p - k) // s + 1
        cols = T.im2col(x.data, (k, k), s, p)  # (N, C*k*k, L)
        weight, bias = self.weight, self.bias
        y = np.einsum("fc,ncl->nfl", weight.data, cols, optimize=True)
        y = y.reshape(n, self.c_out, out_h, out_w) + bias.data[:, None, None]

        def backward(grad):
            gmat = grad.reshape(n, self.c_out, -1)
            if bias.requires_grad:
                bias._accumulate(gmat.sum(axis=(0, 2)).astype(bias.dtype))
            if weight.requires_grad:
                weight._accumulate(
                    np.einsum("nfl,ncl->fc", gmat, cols, optimize=True).astype(weight.dtype))
            if x.requires_grad:
                dcols = np.einsum("fc,nfl->ncl", weight.data, gmat, optimize=True)
                x._accumulate(T.col2im(dcols, self.c_in, h, w, (k, k), s, p))

        return T._make(y, (x, weight, bias), backward)

    def params(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def spec(self):
        return {"kind": self.kind, "in": self.c_in, "out": self.c_out,
                "kernel": self.kernel, "stride": self.stride, "pad": self.pad}


class ConvTranspose2d(Layer):
    """Adjoint of Conv2d: output size (in-1)*stride - 2*pad + kernel."""

    kind = "conv_transpose2d"

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int, pad: int,
                 rng: np.random.Generator, dtype):
        super().__init__()
        self.c_in, self.c_out = int(c_in), int(c_out)
        self.kernel, self.stride, self.pad = int(kernel), int(stride), int(pad)
        taps = self.c_out * self.kernel * self.kernel
        fan_in = self.c_in * self.kernel * self.kernel
        self.weight = Tensor(
            kaiming_uniform(rng, (self.c_in, taps), fan_in, dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(self.c_out, dtype=dtype), requires_grad=True)

    def out_size(self, size: int) -> int:
        return (size - 1) * self.stride - 2 * self.pad + self.kernel

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 4 or x.shape[1] != self.c_in:
            raise ValueError(f"conv_transpose2d expects (N, {self.c_in}, H, W), got {x.shape}")
        n, _, h, w = x.shape
        k, s, p = self.kernel, self.stride, self.pad
        out_h, out_w = self.out_size(h), self.out_size(w)
        if out_h <= 0 or out_w <= 0:
            raise ValueError(f"conv_transpose2d output {out_h}x{out_w} is empty for input {x.shape}")
        weight, bias = self.weight, self.bias
        xmat = x.data.reshape(n, self.c_in, -1)
        cols = np.einsum("ct,ncl->ntl", weight.data, xmat, optimize=True)
        y = T.col2im(cols, self.c_out, out_h, out_w, (k, k), s, p)
        y = y + bias.data[:, None, None]

        def backward(grad):
            if bias.requires_grad:
                bias._accumulate(grad.sum(axis=(0, 2, 3)).astype(bias.dtype))
            gcols = T.im2col(grad, (k, k), s, p)  # (N, c_out*k*k, h*w)
            if weight.requires_grad:
                weight._accumulate(
                    np.einsum("ncl,ntl->ct", xmat, gcols, optimize=True).astype(weight.dtype))
            if x.requires_grad:
                dx = np.einsum("ct,ntl->ncl", weight.data, gcols, optimize=True)
                x._accumulate(dx.reshape(x.shape))

        return T._make(y, (x, weight, bias), backward)

    def params(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def spec(self):
        return {"kind": self.kind, "in": self.c_in, "out": self.c_out,
                "kernel": self.kernel, "stride": self.stride, "pad": self.pad}


class Conv1d(Layer):
    """1-D cross-correlation, implemented as a height-1 Conv2d."""

    kind = "conv1d"

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int, pad: int,
                 rng: np.random.Generator, dtype):
        super().__init__()
        self.c_in, self.c_out = int(c_in), int(c_out)
        self.kernel, self.stride, self.pad = int(kernel), int(stride), int(pad)
        fan_in = self.c_in * self.kernel
        self.weight = Tensor(
            kaiming_uniform(rng, (self.c_out, fan_in), fan_in, dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(self.c_out, dtype=dtype), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 3 or x.shape[1] != self.c_in:
            raise ValueError(f"conv1d expects (N, {self.c_in}, W), got {x.shape}")
        n, _, w = x.shape
        k, s, p = self.kernel, self.stride, self.pad
        # pad width only, then reuse the 2-D helpers on a height-1 image
        xw = np.pad(x.data, ((0, 0), (0, 0), (p, p))) if p else x.data
        wp = w + 2 * p
        cols = T.im2col(xw[:, :, None, :], (1, k), s, 0)
        weight, bias = self.weight, self.bias
        y = np.einsum("fc,ncl->nfl", weight.data, cols, optimize=True) + bias.data[:, None]

        def backward(grad):
            if bias.requires_grad:
                bias._accumulate(grad.sum(axis=(0, 2)).astype(bias.dtype))
            if weight.requires_grad:
                weight._accumulate(
                    np.einsum("nfl,ncl->fc", grad, cols, optimize=True).astype(weight.dtype))
            if x.requires_grad:
                dcols = np.einsum("fc,nfl->ncl", weight.data, grad, optimize=True)
                dx = T.col2im(dcols, self.c_in, 1, wp, (1, k), s, 0).reshape(n, self.c_in, wp)
                x._accumulate(dx[:, :, p:p + w] if p else dx)

        return T._make(y, (x, weight, bias), backward)

    def params(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]

    def spec(self):
        return {"kind": self.kind, "in": self.c_in, "out": self.c_out,
                "kernel": self.kernel, "stride": self.stride, "pad": self.pad}


class LeakyRelu(Layer):
    kind = "lrelu"

    def __init__(self, slope: float = LEAKY_SLOPE):
        super().__init__()
        self.slope = float(slope)

    def forward(self, x: Tensor) -> Tensor:
        return T.leaky_relu(x, self.slope)

    def spec(self):
        return {"kind": self.kind, "slope": self.slope}


class Relu(Layer):
    kind = "relu"

    def forward(self, x: Tensor) -> Tensor:
        return T.relu(x)


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x: Tensor) -> Tensor:
        return T.sigmoid(x)


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x: Tensor) -> Tensor:
        return T.reshape(x, (x.shape[0], -1))


class Reshape(Layer):
    kind = "reshape"

    def __init__(self, shape: tuple[int, ...]):
        super().__init__()
        self.target = tuple(int(s) for s in shape)

    def forward(self, x: Tensor) -> Tensor:
        return T.reshape(x, (x.shape[0],) + self.target)

    def spec(self):
        return {"kind": self.kind, "shape": list(self.target)}


class Residual(Layer):
    """y = body(x) + skip(x); skip is identity, or 1x1 conv when channels change."""

    kind = "residual"

    def __init__(self, body: list[Layer], c_in: int | None, c_out: int | None,
                 rng: np.random.Generator, dtype):
        super().__init__()
        self.body = body
        self.skip = None
        if c_in is not None and c_out is not None and c_in != c_out:
            self.skip = Conv2d(c_in, c_out, 1, 1, 0, rng, dtype)

    def forward(self, x: Tensor) -> Tensor:
        y = x
        for layer in self.body:
            y = layer.forward(y)
        shortcut = self.skip.forward(x) if self.skip is not None else x
        if y.shape != shortcut.shape:
            raise ValueError(f"residual body output {y.shape} does not match skip {shortcut.shape}")
        return T.add(y, shortcut)

    def params(self):
        out = []
        for i, layer in enumerate(self.body):
            for name, p in layer.params():
                out.append((f"{self.name}.body{i}.{name}", p))
        if self.skip is not None:
            for name, p in self.skip.params():
                out.append((f"{self.name}.skip.{name}", p))
        return out

    def spec(self):
        entry = {"kind": self.kind, "body": [layer.spec() for layer in self.body]}
        if self.skip is not None:
            entry["in"] = self.skip.c_in
            entry["out"] = self.skip.c_out
        return entry


def _build_layer(entry: dict, rng: np.random.Generator, dtype) -> Layer:
    kind = entry.get("kind")
    if kind == "dense":
        return Dense(entry["in"], entry["out"], rng, dtype)
    if kind == "conv2d":
        return Conv2d(entry["in"], entry["out"], entry["kernel"],
                      entry.get("stride", 1), entry.get("pad", 0), rng, dtype)
    if kind == "conv_transpose2d":
        return ConvTranspose2d(entry["in"], entry["out"], entry["kernel"],
                               entry.get("stride", 1), entry.get("pad", 0), rng, dtype)
    if kind == "conv1d":
        return Conv1d(entry["in"], entry["out"], entry["kernel"],
                      entry.get("stride", 1), entry.get("pad", 0), rng, dtype)
    if kind == "lrelu":
        return LeakyRelu(entry.get("slope", LEAKY_SLOPE))
    if kind == "relu":
        return Relu()
    if kind == "sigmoid":
        return Sigmoid()
    if kind == "flatten":
        return Flatten()
    if kind == "reshape":
        return Reshape(entry["shape"])
    if kind == "residual":
        body = [_build_layer(sub, rng, dtype) for sub in entry["body"]]
        return Residual(body, entry.get("in"), entry.get("out"), rng, dtype)
    raise ValueError(f"unknown layer kind {kind!r}")


class Net:
    """Sequential network built from a JSON-friendly spec list."""

    def __init__(self, spec: list[dict], seed: int = 0, dtype=np.float64,
                 rng: np.random.Generator | None = None):
        if rng is None:
            rng = np.random.default_rng(seed)
        self.dtype = np.dtype(dtype)
        self.layers: list[Layer] = []
        for i, entry in enumerate(spec):
            layer = _build_layer(entry, rng, self.dtype)
            layer.name = f"layer{i}.{layer.kind}"
            self.layers.append(layer)

    def forward(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            try:
                x = layer.forward(x)
            except ValueError as err:
                raise ValueError(f"layer {i} ({layer.kind}): {err}") from None
        return x

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def params(self) -> list[tuple[str, Tensor]]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def spec(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]

    def n_params(self) -> int:
        return sum(p.data.size for _, p in self.params())
