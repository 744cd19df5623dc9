"""Layer modules and architecture descriptors.

A network is a plain Python object composed of these modules; its
serializable description (layer kinds, sizes, activations, head names)
is what checkpoint digests are computed over, so an architecture change
invalidates old checkpoints.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad

_ACTIVATIONS = {
    "relu": ad.relu,
    "softplus": ad.softplus,
    "tanh": ad.tanh,
    "linear": lambda v: v,
}


def _he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype):
    bound = math.sqrt(6.0 / max(1, fan_in))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Module:
    """Base: tracks child modules and exposes flat parameter lists."""

    def children(self):
        for v in self.__dict__.values():
            if isinstance(v, Module):
                yield v
            elif isinstance(v, (list, tuple)):
                for item in v:
                    if isinstance(item, Module):
                        yield item

    def parameters(self) -> list[ad.Var]:
        out = list(getattr(self, "_params", []))
        for child in self.children():
            out.extend(child.parameters())
        return out

    def named_parameters(self, prefix: str = "") -> list[tuple[str, ad.Var]]:
        out = []
        own = getattr(self, "_param_names", [])
        for name, var in own:
            out.append((f"{prefix}{name}", var))
        for key, v in self.__dict__.items():
            if isinstance(v, Module):
                out.extend(v.named_parameters(f"{prefix}{key}."))
            elif isinstance(v, (list, tuple)):
                for i, item in enumerate(v):
                    if isinstance(item, Module):
                        out.extend(item.named_parameters(f"{prefix}{key}.{i}."))
        return out

    def spec(self) -> dict:
        raise NotImplementedError


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, activation: str = "relu",
                 rng: np.random.Generator | None = None, dtype=np.float32,
                 bias_init: float = 0.0):
        rng = rng or np.random.default_rng(0)
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.n_in = n_in
        self.n_out = n_out
        self.activation = activation
        self.w = ad.parameter(_he_uniform(rng, (n_in, n_out), n_in, dtype))
        self.b = ad.parameter(np.full(n_out, bias_init, dtype=dtype))
        self._params = [self.w, self.b]
        self._param_names = [("w", self.w), ("b", self.b)]

    def __call__(self, x: ad.Var) -> ad.Var:
        return _ACTIVATIONS[self.activation](ad.add(ad.matmul(x, self.w), self.b))

    def spec(self):
        return {"kind": "dense", "in": self.n_in, "out": self.n_out,
                "activation": self.activation}


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int,
                 activation: str = "relu", pad: int | None = None,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.c_in = c_in
        self.c_out = c_out
        self.kernel = kernel
        self.stride = stride
        self.pad = kernel // 2 if pad is None else pad
        self.activation = activation
        fan_in = c_in * kernel * kernel
        self.w = ad.parameter(_he_uniform(rng, (c_out, c_in, kernel, kernel), fan_in, dtype))
        self.b = ad.parameter(np.zeros(c_out, dtype=dtype))
        self._params = [self.w, self.b]
        self._param_names = [("w", self.w), ("b", self.b)]

    def __call__(self, x: ad.Var) -> ad.Var:
        return _ACTIVATIONS[self.activation](
            ad.conv2d(x, self.w, self.b, stride=self.stride, pad=self.pad)
        )

    def spec(self):
        return {"kind": "conv2d", "in": self.c_in, "out": self.c_out,
                "kernel": self.kernel, "stride": self.stride, "pad": self.pad,
                "activation": self.activation}


class MLP(Module):
    """Stack of Dense layers; the last layer takes its own activation."""

    def __init__(self, sizes: list[int], activation: str = "relu",
                 final_activation: str | None = None,
                 rng: np.random.Generator | None = None, dtype=np.float32,
                 final_bias_init: float = 0.0):
        rng = rng or np.random.default_rng(0)
        self.layers = []
        for i in range(len(sizes) - 1):
            last = i == len(sizes) - 2
            act = (final_activation if final_activation is not None else activation) if last else activation
            self.layers.append(Dense(sizes[i], sizes[i + 1], act, rng=rng, dtype=dtype,
                                     bias_init=final_bias_init if last else 0.0))

    def __call__(self, x: ad.Var) -> ad.Var:
        for layer in self.layers:
            x = layer(x)
        return x

    def spec(self):
        return {"kind": "mlp", "layers": [l.spec() for l in self.layers]}


class ConvStack(Module):
    """Sequence of Conv2d layers followed by a flatten."""

    def __init__(self, c_in: int, channels: list[int], kernels: list[int],
                 strides: list[int], rng: np.random.Generator | None = None,
                 dtype=np.float32):
        if not (len(channels) == len(kernels) == len(strides)):
            raise ValueError("channels/kernels/strides must have equal length")
        rng = rng or np.random.default_rng(0)
        self.layers = []
        prev = c_in
        for c, k, s in zip(channels, kernels, strides):
            self.layers.append(Conv2d(prev, c, k, s, rng=rng, dtype=dtype))
            prev = c

    def __call__(self, x: ad.Var) -> ad.Var:
        for layer in self.layers:
            x = layer(x)
        return ad.flatten(x)

    def out_features(self, h: int, w: int) -> int:
        c = None
        for layer in self.layers:
            h = (h + 2 * layer.pad - layer.kernel) // layer.stride + 1
            w = (w + 2 * layer.pad - layer.kernel) // layer.stride + 1
            c = layer.c_out
        return c * h * w

    def spec(self):
        return {"kind": "conv_stack", "layers": [l.spec() for l in self.layers]}
