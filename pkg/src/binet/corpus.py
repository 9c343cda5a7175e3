"""Desk-scale lossless corpus built from the photographs bundled with scikit-image.

Every source photograph (optionally downscaled by ``scale``) is cut into
non-overlapping square tiles, 256 pixels by default. Tiles are dealt
round-robin into train / valid / test so each split sees most sources. Grayscale sources are replicated to three channels.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from skimage import data

from .imageio import resize_to, save_image

TILE = 256
SOURCES = {
    "astronaut": data.astronaut,
    "chelsea": data.chelsea,
    "coffee": data.coffee,
    "rocket": data.rocket,
    "motorcycle": lambda: data.stereo_motorcycle()[0],
    "ihc": data.immunohistochemistry,
    "camera": data.camera,
    "brick": data.brick,
    "grass": data.grass,
    "gravel": data.gravel,
    "moon": data.moon,
    "page": data.page,
    "coins": data.coins,
    "clock": data.clock,
    "cell": data.cell,
    "hubble": data.hubble_deep_field,
}
SPLIT_CYCLE = ("train", "valid", "train", "train", "valid", "train", "test", "train", "valid", "train")


def _source(name: str, scale: int = 1) -> np.ndarray:
    im = np.asarray(SOURCES[name]())
    if im.ndim == 2:
        im = np.repeat(im[..., None], 3, axis=2)
    im = np.ascontiguousarray(im[..., :3].transpose(2, 0, 1)).astype(np.uint8)
    _, h, w = im.shape
    return resize_to(im, w // scale, h // scale) if scale > 1 else im


def tiles(max_images: int = 50, scale: int = 1,
          tile: int = TILE) -> dict[str, list[tuple[str, np.ndarray]]]:
    """Deterministic {split: [(name, (3,tile,tile) uint8)]} with at most ``max_images`` in total."""
    per_source = []
    for name in SOURCES:
        im = _source(name, scale)
        _, h, w = im.shape
        cuts = [(name, im[:, y:y + tile, x:x + tile])
                for y in range(0, h - tile + 1, tile) for x in range(0, w - tile + 1, tile)]
        per_source.append(cuts)
    flat = []
    for k in range(max(len(c) for c in per_source)):
        flat.extend(c[k] for c in per_source if k < len(c))
    flat = flat[:max_images]
    out: dict[str, list[tuple[str, np.ndarray]]] = {"train": [], "valid": [], "test": []}
    for i, (name, cut) in enumerate(flat):
        out[SPLIT_CYCLE[i % len(SPLIT_CYCLE)]].append((f"{i:03d}_{name}", cut))
    return out


def write_corpus(root: str | Path, max_images: int = 50, scale: int = 1, tile: int = TILE) -> Path:
    root = Path(root)
    for split, items in tiles(max_images, scale, tile).items():
        (root / split).mkdir(parents=True, exist_ok=True)
        for name, cut in items:
            save_image(root / split / f"{name}.png", cut)
    return root
