"""Minimal layer containers on top of :mod:`binet.tensor`."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, conv2d, sigmoid, tanh


class Module:
    """Parameter container; parameters are discovered from public attributes in definition order."""

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            key = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(key + "."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{key}.{i}."))
        return out


def uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> Tensor:
    bound = np.sqrt(1.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(np.float32), requires_grad=True)


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, padding: int | None = None, bias: bool = True):
        self.stride = stride
        self.padding = kernel // 2 if padding is None else padding
        fan_in = cin * kernel * kernel
        self.weight = uniform_init(rng, (cout, cin, kernel, kernel), fan_in)
        self.bias = uniform_init(rng, (cout,), fan_in) if bias else None

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)


class ConvGRUCell(Module):
    """Convolutional GRU: the input path may be strided, the hidden path is not.

    z = s(Wz x + Uz h), r = s(Wr x + Ur h), n = tanh(Wn x + Un (r * h)),
    h' = h + z * (n - h).
    """

    def __init__(self, cin: int, hidden: int, rng: np.random.Generator, stride: int = 1,
                 kernel: int = 3):
        self.hidden = hidden
        self.stride = stride
        self.x_conv = Conv2d(cin, 3 * hidden, kernel, rng, stride=stride)
        self.h_conv = Conv2d(hidden, 2 * hidden, kernel, rng, bias=False)
        self.hn_conv = Conv2d(hidden, hidden, kernel, rng, bias=False)

    def zero_state(self, n: int, height: int, width: int, dtype=np.float32) -> Tensor:
        return Tensor(np.zeros((n, self.hidden, height, width), dtype=dtype))

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        k = self.hidden
        gx = self.x_conv(x)
        gh = self.h_conv(h)
        z = sigmoid(gx[:, :k] + gh[:, :k])
        r = sigmoid(gx[:, k:2 * k] + gh[:, k:])
        n = tanh(gx[:, 2 * k:] + self.hn_conv(r * h))
        return h + z * (n - h)
