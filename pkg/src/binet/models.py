"""Patch codec architectures: ConvAR, ConvGRU-OSR and their binary-inpainting variants.

Every model maps a 32x32 patch (or its residual) to a 2x2x32 binary code per
iteration, i.e. 128 bits or 0.125 bpp. Variants with context decode their
first iteration from the 3x3 neighbourhood of codes assembled into a 6x6x32
block; later iterations see only the patch's own code.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .binarizer import binarize
from .nn import Conv2d, ConvGRUCell, Module
from .tensor import ShapeError, Tensor, abs_, depth_to_space, mean, no_grad, tanh

PATCH = 32
CODE_CHANNELS = 32
CODE_SIZE = 2
BITS_PER_PATCH = CODE_CHANNELS * CODE_SIZE * CODE_SIZE
CONTEXT_SIZE = 3 * CODE_SIZE

CONV_AR = "ConvAR"
CONV_GRU_OSR = "ConvGRU-OSR"
BINET_AR = "BINetAR"
BINET_OSR = "BINetOSR"
SINET = "SINet"
MASKED_BINET = "MaskedBINet"
VARIANTS = (CONV_AR, CONV_GRU_OSR, BINET_AR, BINET_OSR, SINET, MASKED_BINET)


class DimensionError(ValueError):
    """Image dimensions are not a multiple of the patch size."""


class CodeUnderflowError(ValueError):
    """Fewer iterations of codes are available than were requested."""


@dataclass(frozen=True)
class ModelConfig:
    enc_channels: tuple[int, int, int] = (64, 128, 256)
    dec_channels: tuple[int, int, int] = (512, 512, 256)
    rnn_channels: tuple[int, int, int] = (256, 256, 128)
    code_channels: int = CODE_CHANNELS

    def __post_init__(self):
        for c in (*self.dec_channels, *self.rnn_channels):
            if c % 4:
                raise ValueError(f"decoder widths must be divisible by 4, got {c}")
        if self.code_channels * CODE_SIZE * CODE_SIZE != BITS_PER_PATCH:
            raise ValueError("code must hold exactly 128 bits per patch")


# ---------------------------------------------------------------------------
# building blocks


class Encoder(Module):
    """Four stride-2 3x3 convolutions, 32x32 -> 2x2, tanh throughout."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator, in_channels: int = 3):
        c = (in_channels, *cfg.enc_channels, cfg.code_channels)
        self.convs = [Conv2d(c[i], c[i + 1], 3, rng, stride=2) for i in range(4)]

    def __call__(self, x: Tensor) -> Tensor:
        for conv in self.convs:
            x = tanh(conv(x))
        return x


class Decoder(Module):
    """Code (2x2) or code context (6x6) -> 32x32x3 via four depth-to-space stages.

    The context head is a valid 5x5 convolution, so each of the two output
    positions per axis sees part of all three code blocks along that axis.
    """

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator, context: bool = False):
        d0, d1, d2 = cfg.dec_channels
        code = cfg.code_channels
        self.context = context
        self.head = Conv2d(code, d0, 5, rng, padding=0) if context else Conv2d(code, d0, 3, rng)
        self.convs = [Conv2d(d0 // 4, d1, 3, rng), Conv2d(d1 // 4, d2, 3, rng),
                      Conv2d(d2 // 4, 12, 3, rng)]

    def __call__(self, code: Tensor) -> Tensor:
        x = depth_to_space(tanh(self.head(code)), 2)
        x = depth_to_space(tanh(self.convs[0](x)), 2)
        x = depth_to_space(tanh(self.convs[1](x)), 2)
        return tanh(depth_to_space(self.convs[2](x), 2))


class RecurrentEncoder(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        e0, e1, e2 = cfg.enc_channels
        self.conv_in = Conv2d(3, e0, 3, rng, stride=2)
        self.gru1 = ConvGRUCell(e0, e1, rng, stride=2)
        self.gru2 = ConvGRUCell(e1, e2, rng, stride=2)
        self.conv_out = Conv2d(e2, cfg.code_channels, 3, rng, stride=2)

    def zero_state(self, n: int, dtype=np.float32) -> list[Tensor]:
        return [self.gru1.zero_state(n, 8, 8, dtype), self.gru2.zero_state(n, 4, 4, dtype)]

    def __call__(self, x: Tensor, state: list[Tensor] | None):
        if state is None:
            state = self.zero_state(x.shape[0], x.dtype)
        h = tanh(self.conv_in(x))
        s1 = self.gru1(h, state[0])
        s2 = self.gru2(s1, state[1])
        return tanh(self.conv_out(s2)), [s1, s2]


class RecurrentDecoder(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator, context: bool = False):
        r0, r1, r2 = cfg.rnn_channels
        code = cfg.code_channels
        self.head = Conv2d(code, r0, 3, rng)
        self.context_head = Conv2d(code, r0, 5, rng, padding=0) if context else None
        self.gru1 = ConvGRUCell(r0, r0, rng)
        self.gru2 = ConvGRUCell(r0 // 4, r1, rng)
        self.gru3 = ConvGRUCell(r1 // 4, r2, rng)
        self.conv_out = Conv2d(r2 // 4, 12, 3, rng)

    def zero_state(self, n: int, dtype=np.float32) -> list[Tensor]:
        return [self.gru1.zero_state(n, 2, 2, dtype), self.gru2.zero_state(n, 4, 4, dtype),
                self.gru3.zero_state(n, 8, 8, dtype)]

    def __call__(self, code: Tensor, state: list[Tensor] | None, use_context: bool = False):
        if state is None:
            state = self.zero_state(code.shape[0], code.dtype)
        head = self.context_head if use_context else self.head
        x = tanh(head(code))
        s1 = self.gru1(x, state[0])
        s2 = self.gru2(depth_to_space(s1, 2), state[1])
        s3 = self.gru3(depth_to_space(s2, 2), state[2])
        out = tanh(depth_to_space(self.conv_out(depth_to_space(s3, 2)), 2))
        return out, [s1, s2, s3]


# ---------------------------------------------------------------------------
# patch grid and code context


@dataclass(frozen=True)
class PatchGrid:
    rows: int
    cols: int
    patch_size: int = PATCH

    @classmethod
    def for_shape(cls, height: int, width: int, patch_size: int = PATCH) -> "PatchGrid":
        if height <= 0 or width <= 0:
            raise DimensionError(f"empty image {width}x{height}")
        if height % patch_size or width % patch_size:
            raise DimensionError(
                f"image {width}x{height} is not divisible into {patch_size}x{patch_size} patches")
        return cls(height // patch_size, width // patch_size, patch_size)

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def height(self) -> int:
        return self.rows * self.patch_size

    @property
    def width(self) -> int:
        return self.cols * self.patch_size

    def index(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise IndexError(f"patch ({row}, {col}) outside {self.rows}x{self.cols} grid")
        return row * self.cols + col

    def neighbours(self, row: int, col: int) -> list[int | None]:
        """Row-major 3x3 neighbourhood indices; None where off-grid."""
        self.index(row, col)
        out = []
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                r, c = row + dr, col + dc
                out.append(r * self.cols + c if 0 <= r < self.rows and 0 <= c < self.cols else None)
        return out

    def split(self, image: np.ndarray) -> np.ndarray:
        c, h, w = image.shape
        if (h, w) != (self.height, self.width):
            raise DimensionError(f"image {w}x{h} does not match grid {self.width}x{self.height}")
        p = self.patch_size
        return np.ascontiguousarray(
            image.reshape(c, self.rows, p, self.cols, p).transpose(1, 3, 0, 2, 4)
            .reshape(self.size, c, p, p))

    def merge(self, patches: np.ndarray) -> np.ndarray:
        n, c, p, _ = patches.shape
        return np.ascontiguousarray(
            patches.reshape(self.rows, self.cols, c, p, p).transpose(2, 0, 3, 1, 4)
            .reshape(c, self.height, self.width))


CONTEXT_PAD = 0.0


def assemble_context(codes: np.ndarray, grid: PatchGrid, row: int, col: int) -> np.ndarray:
    """3x3 neighbourhood of (32, 2, 2) codes -> (32, 6, 6); off-grid blocks are zero."""
    ctx = np.full((CODE_CHANNELS, CONTEXT_SIZE, CONTEXT_SIZE), CONTEXT_PAD, dtype=np.float32)
    for k, idx in enumerate(grid.neighbours(row, col)):
        if idx is None:
            continue
        dr, dc = divmod(k, 3)
        ctx[:, 2 * dr:2 * dr + 2, 2 * dc:2 * dc + 2] = codes[idx].reshape(CODE_CHANNELS, 2, 2)
    return ctx


def assemble_all_contexts(codes: np.ndarray, grid: PatchGrid) -> np.ndarray:
    """Vectorised :func:`assemble_context` for every patch, row-major."""
    c = codes.reshape(grid.rows, grid.cols, CODE_CHANNELS, CODE_SIZE, CODE_SIZE)
    padded = np.full((grid.rows + 2, grid.cols + 2, CODE_CHANNELS, CODE_SIZE, CODE_SIZE),
                     CONTEXT_PAD, dtype=np.float32)
    padded[1:-1, 1:-1] = c
    win = sliding_window_view(padded, (3, 3), axis=(0, 1))  # rows, cols, C, y, x, dr, dc
    ctx = win.transpose(0, 1, 2, 5, 3, 6, 4)
    return np.ascontiguousarray(ctx).reshape(grid.size, CODE_CHANNELS, CONTEXT_SIZE, CONTEXT_SIZE)


def blocks_to_patches(blocks: np.ndarray) -> np.ndarray:
    """(B, 3, 96, 96) -> (9B, 3, 32, 32), neighbourhood-major then row-major."""
    b, c = blocks.shape[:2]
    p = PATCH
    return np.ascontiguousarray(
        blocks.reshape(b, c, 3, p, 3, p).transpose(0, 2, 4, 1, 3, 5).reshape(b * 9, c, p, p))


def codes_to_context(codes: Tensor, blocks: int) -> Tensor:
    """Differentiable (9B, 32, 2, 2) -> (B, 32, 6, 6) arrangement used in training."""
    c = codes.reshape(blocks, 3, 3, CODE_CHANNELS, CODE_SIZE, CODE_SIZE)
    return c.transpose(0, 3, 1, 4, 2, 5).reshape(blocks, CODE_CHANNELS, CONTEXT_SIZE, CONTEXT_SIZE)


def center_mask(n: int, dtype=np.float32) -> np.ndarray:
    m = np.ones((n, CODE_CHANNELS, CONTEXT_SIZE, CONTEXT_SIZE), dtype=dtype)
    m[:, :, 2:4, 2:4] = 0.0
    return m


# ---------------------------------------------------------------------------
# residual algebra and losses


def ar_step(r_prev, auto_i: Callable):
    """Additive reconstruction: r_i = r_{i-1} - Auto_i(r_{i-1})."""
    return r_prev - auto_i(r_prev)


def osr_step(r0, r_prev, auto_i: Callable):
    """One-shot reconstruction: r_i = r_0 - Auto_i(r_{i-1})."""
    return r0 - auto_i(r_prev)


def loss_inpaint(pc: Tensor, pc_hat: Tensor) -> Tensor:
    return mean(abs_(pc - pc_hat))


def loss_baseline(residuals: Sequence[Tensor]) -> Tensor:
    if not residuals:
        raise ValueError("loss_baseline needs at least one residual")
    total = mean(abs_(residuals[0]))
    for r in residuals[1:]:
        total = total + mean(abs_(r))
    return total


def loss_binet(inpaint_residual: Tensor, later_residuals: Sequence[Tensor]) -> Tensor:
    total = mean(abs_(inpaint_residual))
    for r in later_residuals:
        total = total + mean(abs_(r))
    return total


# ---------------------------------------------------------------------------
# the model


class _Stage:
    """Auto_i as a callable: encode, binarise, (assemble context), decode.

    Keeps the emitted code and decoder output for the driver.
    """

    def __init__(self, model: "CodecModel", i: int, mode: str, rng, enc_state, dec_state,
                 blocks: int | None):
        self.model, self.i, self.mode, self.rng = model, i, mode, rng
        self.enc_state, self.dec_state = enc_state, dec_state
        self.blocks = blocks
        self.code: Tensor | None = None
        self.output: Tensor | None = None

    def __call__(self, r_prev: Tensor) -> Tensor:
        m = self.model
        act, self.enc_state = m._encode(self.i, r_prev, self.enc_state)
        self.code = binarize(act, self.mode, self.rng)
        inp = self.code
        if self.blocks is not None:
            inp = codes_to_context(self.code, self.blocks)
            if self.enc_state is not None:
                # only the central patch keeps encoding after the first iteration
                self.enc_state = [
                    s.reshape(self.blocks, 9, *s.shape[1:])[:, 4] for s in self.enc_state]
        self.output, self.dec_state = m._decode(self.i, inp, self.dec_state)
        return self.output


class CodecModel(Module):
    def __init__(self, variant: str, iterations: int = 16, config: ModelConfig | None = None,
                 seed: int = 0):
        if variant not in VARIANTS or variant == SINET:
            raise ValueError(f"unknown codec variant {variant!r}")
        if iterations < 1:
            raise ValueError("iterations must be >= 1")
        self.variant = variant
        self.iterations = iterations
        self.config = config or ModelConfig()
        rng = np.random.default_rng(seed)
        if self.recurrent:
            self.encoder = RecurrentEncoder(self.config, rng)
            self.decoder = RecurrentDecoder(self.config, rng, context=self.uses_context)
        else:
            self.encoders = [Encoder(self.config, rng) for _ in range(iterations)]
            self.decoders = [Decoder(self.config, rng, context=self.uses_context and i == 0)
                             for i in range(iterations)]

    # -- variant properties ----------------------------------------------
    @property
    def recurrent(self) -> bool:
        return self.variant in (CONV_GRU_OSR, BINET_OSR)

    @property
    def uses_context(self) -> bool:
        return self.variant in (BINET_AR, BINET_OSR, MASKED_BINET)

    @property
    def masked(self) -> bool:
        return self.variant == MASKED_BINET

    @property
    def crop_size(self) -> int:
        return 3 * PATCH if self.uses_context else PATCH

    def parameters(self) -> dict[str, Tensor]:
        return self.named_parameters()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        if set(params) != set(state):
            missing = sorted(set(params) ^ set(state))
            raise KeyError(f"weight names do not match model: {missing[:5]}")
        for k, p in params.items():
            if p.shape != tuple(state[k].shape):
                raise ShapeError(f"{k}: expected {p.shape}, got {state[k].shape}")
            p.data = np.array(state[k], dtype=np.float32)

    def _check_iteration(self, i: int) -> None:
        if not 1 <= i <= self.iterations:
            raise ValueError(f"iteration {i} outside 1..{self.iterations}")

    # -- single-step primitives --------------------------------------------
    def _encode(self, i: int, x: Tensor, state):
        if self.recurrent:
            return self.encoder(x, state)
        return self.encoders[i - 1](x), None

    def _decode(self, i: int, inp: Tensor, state):
        context = self.uses_context and i == 1
        expected = CONTEXT_SIZE if context else CODE_SIZE
        if inp.ndim != 4 or inp.shape[1:] != (self.config.code_channels, expected, expected):
            raise ShapeError(
                f"{self.variant} iteration {i} expects (N, 32, {expected}, {expected}) input, "
                f"got {inp.shape}")
        if context and self.masked:
            inp = inp * Tensor(center_mask(inp.shape[0], inp.dtype))
        if self.recurrent:
            return self.decoder(inp, state, use_context=context)
        return self.decoders[i - 1](inp), None

    # -- training graph ------------------------------------------------------
    def forward(self, batch: np.ndarray, mode: str = "stochastic",
                rng: np.random.Generator | None = None,
                iterations: int | None = None) -> tuple[Tensor, list[Tensor]]:
        """Differentiable unroll over ``iterations``; returns (target, residuals).

        ``batch`` holds 32x32 patches, or 96x96 blocks for context variants, in [-1, 1].
        """
        iterations = iterations or self.iterations
        blocks = None
        if self.uses_context:
            if batch.shape[-1] != 3 * PATCH or batch.shape[-2] != 3 * PATCH:
                raise ShapeError(f"{self.variant} trains on 96x96 blocks, got {batch.shape}")
            blocks = batch.shape[0]
            x0 = Tensor(blocks_to_patches(batch))
            target = Tensor(np.ascontiguousarray(batch[:, :, PATCH:2 * PATCH, PATCH:2 * PATCH]))
        else:
            if batch.shape[-2:] != (PATCH, PATCH):
                raise ShapeError(f"{self.variant} trains on 32x32 patches, got {batch.shape}")
            x0 = target = Tensor(batch)
        residuals: list[Tensor] = []
        r = x0
        enc_state = dec_state = None
        for i in range(1, iterations + 1):
            stage = _Stage(self, i, mode, rng, enc_state, dec_state, blocks if i == 1 else None)
            if self.recurrent or i == 1:
                r = osr_step(target, r, stage)
            else:
                r = ar_step(r, stage)
            enc_state, dec_state = stage.enc_state, stage.dec_state
            residuals.append(r)
        return target, residuals

    def loss(self, batch: np.ndarray, mode: str = "stochastic",
             rng: np.random.Generator | None = None) -> Tensor:
        _, residuals = self.forward(batch, mode, rng)
        if self.uses_context:
            return loss_binet(residuals[0], residuals[1:])
        return loss_baseline(residuals)

    # -- inference -------------------------------------------------------------
    def run(self, grid: PatchGrid, iterations: int, patches: np.ndarray | None = None,
            codes: np.ndarray | None = None, order: Sequence[int] | None = None,
            chunk: int | None = None, keep_recons: bool = False):
        """Shared encoder/decoder driver over a patch grid.

        With ``patches`` the patches are encoded and ``codes`` is produced;
        otherwise ``codes`` (P, I, 32, 2, 2) are decoded. Patches are pushed
        through in ``order``, ``chunk`` at a time. Returns the codes and the
        decoder-side reconstructions (final, or one per iteration).
        """
        self._check_iteration(iterations)
        n = grid.size
        order = np.arange(n) if order is None else np.asarray(order)
        if sorted(order.tolist()) != list(range(n)):
            raise ValueError("order must be a permutation of the patch indices")
        chunk = chunk or n
        parts = [order[s:s + chunk] for s in range(0, n, chunk)]
        encoding = patches is not None
        if encoding:
            x = np.asarray(patches, dtype=np.float32)
            codes = np.zeros((n, iterations, CODE_CHANNELS, CODE_SIZE, CODE_SIZE), np.float32)
            r = x.copy()
        elif codes.shape[1] < iterations:
            raise CodeUnderflowError(
                f"codes hold {codes.shape[1]} iterations, {iterations} requested")
        recon = np.zeros((n, 3, PATCH, PATCH), np.float32)
        recons = []
        enc_state: list[np.ndarray] | None = None
        dec_state: list[np.ndarray] | None = None
        with no_grad():
            for i in range(1, iterations + 1):
                if encoding:
                    for idx in parts:
                        st = None if enc_state is None else [Tensor(s[idx]) for s in enc_state]
                        act, st = self._encode(i, Tensor(r[idx]), st)
                        codes[idx, i - 1] = binarize(act, "deterministic").data
                        enc_state = _store(enc_state, st, idx, n)
                context = self.uses_context and i == 1
                inputs = assemble_all_contexts(codes[:, 0], grid) if context else codes[:, i - 1]
                out = np.empty_like(recon)
                for idx in parts:
                    st = None if dec_state is None else [Tensor(s[idx]) for s in dec_state]
                    o, st = self._decode(i, Tensor(inputs[idx]), st)
                    out[idx] = o.data
                    dec_state = _store(dec_state, st, idx, n)
                if self.recurrent:
                    recon = out
                else:
                    recon = recon + out
                if encoding:
                    r = x - out if (self.recurrent or i == 1) else r - out
                if keep_recons:
                    recons.append(np.clip(recon, -1.0, 1.0))
        return codes, (recons if keep_recons else np.clip(recon, -1.0, 1.0))


def _store(state, new, idx, n):
    if new is None:
        return None
    if state is None:
        state = [np.zeros((n, *s.shape[1:]), dtype=np.float32) for s in new]
    for s, t in zip(state, new):
        s[idx] = t.data
    return state


# ---------------------------------------------------------------------------
# public per-patch / per-image API


def _as_batch(x: np.ndarray, ndim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float32)
    if x.ndim == ndim - 1:
        return x[None], True
    return x, False


def encode_patch(model: CodecModel, patch_or_residual: np.ndarray, iteration: int,
                 state: list[np.ndarray] | None = None):
    """One iteration of encoding; returns (128-bit code(s), encoder state or None)."""
    model._check_iteration(iteration)
    x, single = _as_batch(patch_or_residual, 4)
    with no_grad():
        st = None if state is None else [Tensor(s) for s in state]
        act, st = model._encode(iteration, Tensor(x), st)
        code = binarize(act, "deterministic").data.reshape(len(x), BITS_PER_PATCH)
    new_state = None if st is None else [s.data for s in st]
    return (code[0] if single else code), new_state


def decode_patch(model: CodecModel, context: np.ndarray, iteration: int,
                 state: list[np.ndarray] | None = None):
    """One iteration of decoding from a (32, 6, 6) context or a (32, 2, 2) code.

    Iterations without context use only the central 2x2 block of a 6x6 input.
    """
    model._check_iteration(iteration)
    c, single = _as_batch(context, 4)
    if c.ndim == 2:
        c = c.reshape(len(c), CODE_CHANNELS, CODE_SIZE, CODE_SIZE)
    wants_context = model.uses_context and iteration == 1
    if not wants_context and c.shape[-1] == CONTEXT_SIZE:
        c = np.ascontiguousarray(c[:, :, 2:4, 2:4])
    with no_grad():
        st = None if state is None else [Tensor(s) for s in state]
        out, st = model._decode(iteration, Tensor(c), st)
    new_state = None if st is None else [s.data for s in st]
    return (out.data[0] if single else out.data), new_state


def compress_image(model: CodecModel, image: np.ndarray, iterations: int | None = None,
                   order: Sequence[int] | None = None, chunk: int | None = None) -> np.ndarray:
    """Encode a (3, H, W) image in [-1, 1]; returns codes shaped (patches, iterations, 32, 2, 2)."""
    iterations = iterations or model.iterations
    grid = PatchGrid.for_shape(image.shape[1], image.shape[2])
    codes, _ = model.run(grid, iterations, patches=grid.split(image), order=order, chunk=chunk)
    return codes


def decompress_image(model: CodecModel, codes: np.ndarray, grid: PatchGrid,
                     iterations: int | None = None, order: Sequence[int] | None = None,
                     chunk: int | None = None) -> np.ndarray:
    """Decode the first ``iterations`` codes of every patch into a (3, H, W) image."""
    iterations = iterations or codes.shape[1]
    if codes.shape[0] != grid.size:
        raise CodeUnderflowError(f"codes cover {codes.shape[0]} patches, grid has {grid.size}")
    _, recon = model.run(grid, iterations, codes=codes, order=order, chunk=chunk)
    return grid.merge(recon)


def progressive_reconstructions(model: CodecModel, image: np.ndarray,
                                iterations: int | None = None) -> tuple[np.ndarray, list[np.ndarray]]:
    """Codes plus the decoder-side image after each iteration."""
    iterations = iterations or model.iterations
    grid = PatchGrid.for_shape(image.shape[1], image.shape[2])
    codes = compress_image(model, image, iterations)
    _, recons = model.run(grid, iterations, codes=codes, keep_recons=True)
    return codes, [grid.merge(r) for r in recons]


def config_from_state(variant: str, state: dict[str, np.ndarray]) -> ModelConfig:
    """Recover layer widths from weight shapes."""
    if variant in (CONV_GRU_OSR, BINET_OSR):
        enc = (state["encoder.conv_in.weight"].shape[0],
               state["encoder.gru1.hn_conv.weight"].shape[0],
               state["encoder.gru2.hn_conv.weight"].shape[0])
        rnn = (state["decoder.gru1.hn_conv.weight"].shape[0],
               state["decoder.gru2.hn_conv.weight"].shape[0],
               state["decoder.gru3.hn_conv.weight"].shape[0])
        return ModelConfig(enc_channels=enc, rnn_channels=rnn)
    enc = tuple(state[f"encoders.0.convs.{k}.weight"].shape[0] for k in range(3))
    dec = (state["decoders.0.head.weight"].shape[0],
           state["decoders.0.convs.0.weight"].shape[0],
           state["decoders.0.convs.1.weight"].shape[0])
    return ModelConfig(enc_channels=enc, dec_channels=dec)

