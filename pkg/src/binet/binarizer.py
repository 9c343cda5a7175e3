"""Binarisation of tanh-bounded activations into {-1, +1} codes.

The backward rule is the straight-through estimator: the incoming gradient
is passed to the encoder unchanged, whatever the forward mode.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, _make

MODES = ("stochastic", "deterministic", "identity")


def straight_through_backward(upstream_grad: np.ndarray) -> np.ndarray:
    return upstream_grad


def binarize_stochastic(x: Tensor, rng: np.random.Generator) -> Tensor:
    """Draw b = +1 with probability (1 + x) / 2, so that E[b] = x."""
    d = np.clip(x.data, -1.0, 1.0)
    u = rng.random(d.shape, dtype=np.float64)
    b = np.where(u < (1.0 + d) / 2.0, 1.0, -1.0).astype(x.dtype)
    return _make(b, "binarize", (x,), lambda g: (straight_through_backward(g),))


def binarize_deterministic(x: Tensor) -> Tensor:
    """sign(x) with sign(0) = +1."""
    b = np.where(x.data >= 0, 1.0, -1.0).astype(x.dtype)
    return _make(b, "binarize", (x,), lambda g: (straight_through_backward(g),))


def binarize_identity(x: Tensor) -> Tensor:
    # smooth surrogate for finite-difference checks; same backward as the real thing
    return _make(x.data.copy(), "binarize", (x,), lambda g: (straight_through_backward(g),))


def binarize(x: Tensor, mode: str, rng: np.random.Generator | None = None) -> Tensor:
    if mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic binarisation needs a random generator")
        return binarize_stochastic(x, rng)
    if mode == "deterministic":
        return binarize_deterministic(x)
    if mode == "identity":
        return binarize_identity(x)
    raise ValueError(f"unknown binarisation mode {mode!r}")
