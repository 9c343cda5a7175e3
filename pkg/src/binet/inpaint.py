"""Sequential-inpainting baseline (SINet) and classical intra predictors.

SINet predicts a patch from the *reconstructions* of its causal neighbours
(top-left, top, top-right, left), produced by a frozen one-iteration ConvAR
compressor. The public entry points only accept binary codes or a
:class:`DecodedContext`, so original pixels can never reach the inpainter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .binarizer import binarize
from .models import (CONV_AR, PATCH, SINET, CodecModel, Decoder, Encoder, ModelConfig,
                     blocks_to_patches, loss_inpaint)
from .nn import Module
from .tensor import Tensor, no_grad

# positions of the causal neighbours in a row-major 3x3 neighbourhood
CAUSAL = (0, 1, 2, 3)
_TOKEN = object()


@dataclass(frozen=True)
class DecodedContext:
    """Decoded causal neighbours, shape (N, 4, 3, 32, 32). Built by :meth:`SINet.decode_context`."""

    patches: np.ndarray
    _token: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._token is not _TOKEN:
            raise TypeError("DecodedContext can only be produced by decoding binary codes")


class SINet(Module):
    variant = SINET
    iterations = 1
    uses_context = True
    crop_size = 3 * PATCH

    def __init__(self, config: ModelConfig | None = None, seed: int = 0,
                 compressor: CodecModel | None = None):
        self.config = config or ModelConfig()
        if compressor is None:
            compressor = CodecModel(CONV_AR, iterations=1, config=self.config, seed=seed + 1)
        if compressor.variant != CONV_AR or compressor.iterations != 1:
            raise ValueError("SINet's compressor must be a one-iteration ConvAR")
        self._compressor = compressor
        rng = np.random.default_rng(seed)
        self.enc = Encoder(self.config, rng, in_channels=3 * len(CAUSAL))
        self.dec = Decoder(self.config, rng)

    @property
    def compressor(self) -> CodecModel:
        return self._compressor

    def parameters(self) -> dict[str, Tensor]:
        # the compressor is frozen: only the inpainter trains
        return {f"inpainter.{k}": v for k, v in self.named_parameters().items()}

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {f"compressor.{k}": v for k, v in self._compressor.state_dict().items()}
        out.update({k: v.data for k, v in self.parameters().items()})
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        comp = {k[len("compressor."):]: v for k, v in state.items() if k.startswith("compressor.")}
        self._compressor.load_state_dict(comp)
        params = self.parameters()
        for k, p in params.items():
            p.data = np.array(state[k], dtype=np.float32)
        extra = set(state) - set(params) - {f"compressor.{k}" for k in comp}
        if extra:
            raise KeyError(f"unexpected weights: {sorted(extra)[:5]}")

    def encode_neighbours(self, blocks: np.ndarray) -> np.ndarray:
        """Codes of the causal neighbours of each 96x96 block: (N, 4, 32, 2, 2)."""
        n = blocks.shape[0]
        patches = blocks_to_patches(blocks).reshape(n, 9, 3, PATCH, PATCH)[:, list(CAUSAL)]
        with no_grad():
            act, _ = self._compressor._encode(1, Tensor(patches.reshape(n * 4, 3, PATCH, PATCH)), None)
            codes = binarize(act, "deterministic").data
        return codes.reshape(n, 4, *codes.shape[1:])

    def decode_context(self, codes: np.ndarray) -> DecodedContext:
        codes = np.asarray(codes, dtype=np.float32)
        if codes.ndim != 5 or codes.shape[1] != len(CAUSAL):
            raise ValueError(f"expected (N, 4, 32, 2, 2) neighbour codes, got {codes.shape}")
        if not np.all(np.abs(codes) == 1.0):
            raise ValueError("neighbour codes must be exactly -1 or +1")
        n = codes.shape[0]
        with no_grad():
            out, _ = self._compressor._decode(1, Tensor(codes.reshape(n * 4, *codes.shape[2:])), None)
        return DecodedContext(out.data.reshape(n, 4, 3, PATCH, PATCH), _TOKEN)

    def predict_tensor(self, context: DecodedContext) -> Tensor:
        return sinet_predict(context, self)

    def predict(self, neighbour_codes: np.ndarray) -> np.ndarray:
        with no_grad():
            return self.predict_tensor(self.decode_context(neighbour_codes)).data

    def forward(self, batch: np.ndarray, mode: str = "stochastic", rng=None):
        target = Tensor(np.ascontiguousarray(batch[:, :, PATCH:2 * PATCH, PATCH:2 * PATCH]))
        pred = self.predict_tensor(self.decode_context(self.encode_neighbours(batch)))
        return target, [target - pred]

    def loss(self, batch: np.ndarray, mode: str = "stochastic", rng=None) -> Tensor:
        target = Tensor(np.ascontiguousarray(batch[:, :, PATCH:2 * PATCH, PATCH:2 * PATCH]))
        pred = self.predict_tensor(self.decode_context(self.encode_neighbours(batch)))
        return loss_inpaint(target, pred)


def sinet_predict(decoded_context: DecodedContext, inpaint_decoder: SINet) -> Tensor:
    """Central patch prediction from decoded causal neighbours."""
    if not isinstance(decoded_context, DecodedContext):
        raise TypeError("SINet predicts from decoded neighbour reconstructions only")
    p = decoded_context.patches
    x = Tensor(np.ascontiguousarray(p.reshape(p.shape[0], -1, PATCH, PATCH)))
    return inpaint_decoder.dec(inpaint_decoder.enc(x))


# ---------------------------------------------------------------------------
# WebP-style intra prediction

INTRA_MODES = ("DC", "H", "V", "TM")


def intra_predict(mode: str, top: np.ndarray | None, left: np.ndarray | None,
                  corner: np.ndarray | None = None, size: int = PATCH,
                  value_range: tuple[float, float] = (-1.0, 1.0)) -> np.ndarray:
    """Predict a (C, size, size) block from its decoded borders.

    ``top`` and ``left`` are (C, size) pixel rows/columns, ``corner`` is the
    (C,) top-left pixel. Missing borders are None; a mode whose borders are
    missing falls back to DC over whatever is available. TM is the TrueMotion
    rule left[i] + top[j] - corner, clamped to ``value_range``.
    """
    if mode not in INTRA_MODES:
        raise ValueError(f"unknown intra mode {mode!r}")
    borders = [b for b in (top, left) if b is not None]
    channels = borders[0].shape[0] if borders else 3
    needs = {"DC": (), "H": (left,), "V": (top,), "TM": (top, left, corner)}[mode]
    if mode == "DC" or any(b is None for b in needs):
        if not borders:
            mid = 0.5 * (value_range[0] + value_range[1])
            return np.full((channels, size, size), mid, dtype=np.float32)
        dc = np.concatenate(borders, axis=1).mean(axis=1)
        return np.broadcast_to(dc[:, None, None], (channels, size, size)).astype(np.float32)
    if mode == "H":
        return np.repeat(left[:, :, None], size, axis=2).astype(np.float32)
    if mode == "V":
        return np.repeat(top[:, None, :], size, axis=1).astype(np.float32)
    tm = left[:, :, None] + top[:, None, :] - np.asarray(corner)[:, None, None]
    return np.clip(tm, *value_range).astype(np.float32)


def intra_from_image(mode: str, image: np.ndarray, row: int, col: int, size: int = PATCH) -> np.ndarray:
    """Intra prediction for patch (row, col) from the borders in an already-decoded image."""
    y, x = row * size, col * size
    top = image[:, y - 1, x:x + size] if y > 0 else None
    left = image[:, y:y + size, x - 1] if x > 0 else None
    corner = image[:, y - 1, x - 1] if y > 0 and x > 0 else None
    return intra_predict(mode, top, left, corner, size)
