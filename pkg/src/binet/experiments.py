"""Desk-scale experiment drivers shared by the acceptance tests and ``scripts/``.

- :func:`training_comparison` trains 1-iteration ConvAR and BINetAR with
  identical settings and reports each best-checkpoint validation loss.
- :func:`inpainting_comparison` trains masked BINet and SINet and scores both
  on held-out patches.
- :func:`overfit_single_patch` drives any variant to memorise one crop.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .inpaint import SINet
from .metrics import capped, psnr, ssim
from .models import (BINET_AR, CONV_AR, MASKED_BINET, PATCH, SINET, CodecModel, ModelConfig)
from .tensor import backward, no_grad
from .training import (Adam, Dataset, TrainConfig, TrainResult, crops, denormalize,
                       evaluate_loss, normalize, train)

log = logging.getLogger(__name__)

# desk-scale schedule: a few hundred epochs on <= 50 images, decays scaled down with it;
# batch 8 gives several optimiser steps per epoch on a 30-image training split
DESK_TRAIN = TrainConfig(batch_size=8, lr=5e-4, decay_epochs=(200, 300, 350), max_epochs=400,
                         patience=200)


@dataclass
class ComparisonRun:
    seed: int
    scores: dict[str, float]
    results: dict[str, TrainResult]
    seconds: float
    extra: dict[str, float] = field(default_factory=dict)


def training_comparison(dataset: Dataset, seed: int, config: TrainConfig = DESK_TRAIN,
                        model_config: ModelConfig | None = None,
                        variants: tuple[str, ...] = (CONV_AR, BINET_AR)) -> ComparisonRun:
    """Best-checkpoint validation L1 of each 1-iteration variant under the same seed.

    ``extra`` holds the same checkpoints' validation L1 with sign-binarised codes.
    """
    t0 = time.perf_counter()
    cfg = replace(config, seed=seed)
    results, scores, extra = {}, {}, {}
    for v in variants:
        model = CodecModel(v, 1, model_config, seed=seed)
        results[v] = train(model, dataset, cfg)
        scores[v] = results[v].best_valid
        valid = crops(dataset.images("valid"), "center", model.crop_size)
        extra[f"{v}_deterministic"] = evaluate_loss(model, valid, cfg.batch_size)
        log.info("seed %d %s best valid %.5f at epoch %d (sign codes %.5f)", seed, v, scores[v],
                 results[v].best_epoch, extra[f"{v}_deterministic"])
    return ComparisonRun(seed, scores, results, time.perf_counter() - t0, extra)


def heldout_blocks(images: list[np.ndarray], stride: int = 16) -> np.ndarray:
    """All 96x96 blocks at ``stride`` offsets, normalised to [-1, 1]."""
    size = 3 * PATCH
    out = []
    for im in images:
        _, h, w = im.shape
        for y in range(0, h - size + 1, stride):
            for x in range(0, w - size + 1, stride):
                out.append(normalize(im[:, y:y + size, x:x + size]))
    return np.stack(out)


def predict_centres(model, blocks: np.ndarray, batch: int = 32) -> np.ndarray:
    """Centre-patch predictions of a masked BINet or SINet, deterministic binarisation."""
    out = []
    with no_grad():
        for s in range(0, len(blocks), batch):
            target, residuals = model.forward(blocks[s:s + batch], "deterministic")
            out.append(target.data - residuals[0].data)
    return np.clip(np.concatenate(out), -1.0, 1.0)


def patch_scores(blocks: np.ndarray, predictions: np.ndarray) -> tuple[float, float]:
    """Mean PSNR (capped) and SSIM over centre patches, in byte space."""
    truth = denormalize(blocks[:, :, PATCH:2 * PATCH, PATCH:2 * PATCH])
    pred = denormalize(predictions)
    p = float(np.mean([capped(psnr(a, b)) for a, b in zip(truth, pred)]))
    s = float(np.mean([ssim(a, b) for a, b in zip(truth, pred)]))
    return p, s


def inpainting_comparison(dataset: Dataset, seed: int, config: TrainConfig = DESK_TRAIN,
                          model_config: ModelConfig | None = None) -> ComparisonRun:
    """Masked BINet vs SINet (its ConvAR compressor trained first) on test-split blocks."""
    t0 = time.perf_counter()
    cfg = replace(config, seed=seed)
    blocks = heldout_blocks(dataset.images("test"))
    masked = CodecModel(MASKED_BINET, 1, model_config, seed=seed)
    compressor = CodecModel(CONV_AR, 1, model_config, seed=seed + 1)
    results = {MASKED_BINET: train(masked, dataset, cfg), "compressor": train(compressor, dataset, cfg)}
    sinet = SINet(compressor.config, seed=seed, compressor=compressor)
    results[SINET] = train(sinet, dataset, cfg)
    scores = {}
    for name, model in ((MASKED_BINET, masked), (SINET, sinet)):
        p, s = patch_scores(blocks, predict_centres(model, blocks))
        scores[f"{name}_psnr"], scores[f"{name}_ssim"] = p, s
        log.info("seed %d %s PSNR %.3f SSIM %.4f on %d patches", seed, name, p, s, len(blocks))
    return ComparisonRun(seed, scores, results, time.perf_counter() - t0)


def build_model(variant: str, iterations: int, model_config: ModelConfig | None, seed: int):
    if variant == SINET:
        return SINet(model_config, seed=seed)
    return CodecModel(variant, iterations, model_config, seed=seed)


def reconstruction_l1(model, sample: np.ndarray) -> float:
    """Mean |x - x_hat| of the final reconstruction, deterministic binarisation."""
    with no_grad():
        _, residuals = model.forward(sample, "deterministic")
    return float(np.mean(np.abs(residuals[-1].data)))


def overfit_single_patch(model, sample: np.ndarray, steps: int = 500, lr: float = 1e-3,
                         target: float = 0.05, seed: int = 0) -> tuple[int | None, list[float]]:
    """Optimise on one crop; returns the first step reaching ``target`` L1 (or None) and the trace."""
    rng = np.random.default_rng(seed)
    opt = Adam(model.parameters())
    trace = []
    for step in range(1, steps + 1):
        opt.zero_grad()
        backward(model.loss(sample, "stochastic", rng))
        opt.step(lr)
        l1 = reconstruction_l1(model, sample)
        trace.append(l1)
        if l1 < target:
            return step, trace
    return None, trace


def single_crop(image: np.ndarray, size: int) -> np.ndarray:
    return crops([image], "center", size)


def corpus_or_build(root: str | Path) -> Dataset:
    """Dataset at ``root``, writing the bundled desk corpus there first if it is missing."""
    from .corpus import write_corpus
    root = Path(root)
    if not (root / "train").is_dir():
        write_corpus(root)
    return Dataset.from_dir(root)
