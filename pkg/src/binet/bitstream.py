"""Bit packing plus the BINC (compressed image) and BINW (weights) file formats.

BINC layout, little-endian::

    "BINC" | u16 version | u32 width | u32 height | u16 patch | u16 iterations | u16 bits
    payload: codes in patch-major, iteration-minor order, 128 bits per code,
             MSB-first, zero-padded to a whole byte at the end of the file

There is no checksum or entropy-coding layer: a flipped payload byte decodes
to a different, still valid, set of codes.
"""

from __future__ import annotations

import io
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import (BITS_PER_PATCH, CODE_CHANNELS, CODE_SIZE, PATCH, SINET, VARIANTS,
                     CodecModel, ModelConfig, PatchGrid, config_from_state)

BINC_MAGIC = b"BINC"
BINW_MAGIC = b"BINW"
BINC_VERSION = 1
BINW_VERSION = 1
_BINC_HEADER = struct.Struct("<4sHIIHHH")
HEADER_BYTES = _BINC_HEADER.size


class FormatError(ValueError):
    """Base for malformed files; ``code`` distinguishes the failure."""

    code = "format"


class BadMagicError(FormatError):
    code = "bad-magic"


class VersionError(FormatError):
    code = "bad-version"


class TruncatedError(FormatError):
    code = "truncated"


def pack_bits(code: np.ndarray) -> bytes:
    """±1 values to bytes: -1 is bit 0, +1 is bit 1, MSB first."""
    c = np.asarray(code).ravel()
    if not np.all((c == 1) | (c == -1)):
        raise ValueError("codes must contain only -1 and +1")
    return np.packbits(c > 0, bitorder="big").tobytes()


def unpack_bits(data: bytes, count: int) -> np.ndarray:
    """Inverse of :func:`pack_bits` for the first ``count`` bits."""
    if len(data) * 8 < count:
        raise TruncatedError(f"need {count} bits, have {len(data) * 8}")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=count, bitorder="big")
    return bits.astype(np.float32) * 2 - 1


@dataclass
class CompressedFile:
    width: int
    height: int
    iterations: int
    codes: np.ndarray  # (patches, iterations, 32, 2, 2) of ±1
    patch: int = PATCH
    bits: int = BITS_PER_PATCH
    version: int = BINC_VERSION

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image dimensions must be positive, got {self.width}x{self.height}")
        if self.patch != PATCH or self.bits != BITS_PER_PATCH:
            raise ValueError("only 32x32 patches with 128-bit codes are supported")
        self.codes = np.asarray(self.codes, dtype=np.float32)
        expected = (self.grid.size, self.iterations, CODE_CHANNELS, CODE_SIZE, CODE_SIZE)
        if self.codes.shape != expected:
            raise ValueError(f"codes shaped {self.codes.shape}, header implies {expected}")

    @property
    def grid(self) -> PatchGrid:
        return PatchGrid.for_shape(self.height, self.width)

    @property
    def payload_bits(self) -> int:
        return self.grid.size * self.iterations * self.bits

    @property
    def payload_bytes(self) -> int:
        return (self.payload_bits + 7) // 8


def encode_compressed(f: CompressedFile) -> bytes:
    header = _BINC_HEADER.pack(BINC_MAGIC, f.version, f.width, f.height, f.patch,
                               f.iterations, f.bits)
    return header + pack_bits(f.codes)


def decode_compressed(data: bytes) -> CompressedFile:
    if len(data) < HEADER_BYTES:
        if not BINC_MAGIC.startswith(data[:4]):
            raise BadMagicError("not a BINC file")
        raise TruncatedError(f"header needs {HEADER_BYTES} bytes, file has {len(data)}")
    magic, version, width, height, patch, iterations, bits = _BINC_HEADER.unpack_from(data)
    if magic != BINC_MAGIC:
        raise BadMagicError(f"expected magic {BINC_MAGIC!r}, got {magic!r}")
    if version != BINC_VERSION:
        raise VersionError(f"unsupported BINC version {version}")
    if width % patch or height % patch or patch != PATCH or bits != BITS_PER_PATCH:
        raise FormatError(f"inconsistent header: {width}x{height}, patch {patch}, {bits} bits")
    n = (width // patch) * (height // patch)
    total = n * iterations * bits
    payload = data[HEADER_BYTES:]
    need = (total + 7) // 8
    if len(payload) < need:
        raise TruncatedError(f"payload has {len(payload)} bytes, header requires {need}")
    if len(payload) > need:
        raise FormatError(f"{len(payload) - need} trailing bytes after payload")
    codes = unpack_bits(payload, total).reshape(n, iterations, CODE_CHANNELS, CODE_SIZE, CODE_SIZE)
    return CompressedFile(width, height, iterations, codes, patch, bits, version)


def atomic_write(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_compressed(path: str | Path, f: CompressedFile) -> int:
    data = encode_compressed(f)
    atomic_write(path, data)
    return len(data)


def read_compressed(path: str | Path) -> CompressedFile:
    return decode_compressed(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# BINW weights


def encode_weights(variant: str, iterations: int, tensors: dict[str, np.ndarray]) -> bytes:
    out = io.BytesIO()
    tag = variant.encode()
    out.write(BINW_MAGIC)
    out.write(struct.pack("<HH", BINW_VERSION, len(tag)))
    out.write(tag)
    out.write(struct.pack("<HI", iterations, len(tensors)))
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f4")
        key = name.encode()
        out.write(struct.pack("<H", len(key)))
        out.write(key)
        out.write(struct.pack("<B", arr.ndim))
        out.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.write(np.ascontiguousarray(arr).tobytes())
    return out.getvalue()


def decode_weights(data: bytes) -> tuple[str, int, dict[str, np.ndarray]]:
    view = memoryview(data)
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(view):
            raise TruncatedError(f"weight file ends at byte {len(view)}, needed {pos + n}")
        chunk = bytes(view[pos:pos + n])
        pos += n
        return chunk

    if take(4) != BINW_MAGIC:
        raise BadMagicError("not a BINW file")
    version, tag_len = struct.unpack("<HH", take(4))
    if version != BINW_VERSION:
        raise VersionError(f"unsupported BINW version {version}")
    variant = take(tag_len).decode()
    iterations, count = struct.unpack("<HI", take(6))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode()
        (rank,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(take(4 * size), dtype="<f4").reshape(shape).astype(np.float32)
    if pos != len(view):
        raise FormatError(f"{len(view) - pos} trailing bytes in weight file")
    return variant, iterations, tensors


def save_model(path: str | Path, model) -> None:
    atomic_write(path, encode_weights(model.variant, model.iterations, model.state_dict()))


def _sinet_config(state: dict[str, np.ndarray]) -> ModelConfig:
    # the inpainter mirrors a one-iteration ConvAR layout
    renamed = {}
    for k, v in state.items():
        if k.startswith("inpainter.enc."):
            renamed["encoders.0." + k[len("inpainter.enc."):]] = v
        elif k.startswith("inpainter.dec."):
            renamed["decoders.0." + k[len("inpainter.dec."):]] = v
    return config_from_state("ConvAR", renamed)


def load_model(path: str | Path):
    """Rebuild a :class:`CodecModel` (or SINet) with the stored weights."""
    variant, iterations, state = decode_weights(Path(path).read_bytes())
    if variant not in VARIANTS:
        raise FormatError(f"unknown variant tag {variant!r}")
    if variant == SINET:
        from .inpaint import SINet
        model = SINet(_sinet_config(state))
    else:
        model = CodecModel(variant, iterations, config_from_state(variant, state))
    model.load_state_dict(state)
    return model
