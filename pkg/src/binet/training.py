"""Data handling, Adam and the epoch loop with step-decay schedule and early stopping."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from .imageio import load_image
from .models import ModelConfig
from .tensor import Tensor, backward, no_grad

log = logging.getLogger(__name__)

LOSSLESS_SUFFIXES = {".png", ".bmp", ".ppm", ".pgm", ".tif", ".tiff"}


class NumericError(ArithmeticError):
    """Non-finite values reached the optimiser."""


@dataclass
class TrainConfig:
    batch_size: int = 32
    lr: float = 1e-4
    decay_epochs: tuple[int, ...] = (3000, 10000, 14000)
    decay_factor: float = 2.0
    max_epochs: int = 15000
    patch_size: int = 32
    patience: int = 200
    seed: int = 0
    # validation measures the training objective: stochastic codes, fixed draws per pass
    valid_binarizer: str = "stochastic"
    valid_draws: int = 4

    def __post_init__(self):
        self.decay_epochs = tuple(sorted(int(e) for e in self.decay_epochs))
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1 or self.valid_draws < 1:
            raise ValueError("batch_size, max_epochs, patience and valid_draws must be positive")
        if self.valid_binarizer not in ("stochastic", "deterministic"):
            raise ValueError(f"valid_binarizer must be stochastic or deterministic, "
                             f"got {self.valid_binarizer!r}")
        if self.decay_factor < 1:
            raise ValueError("decay_factor must be >= 1 (the schedule never increases)")


_MODEL_KEYS = {"enc_channels", "dec_channels", "rnn_channels"}


def _parse_value(raw: str, like):
    if isinstance(like, tuple):
        return tuple(int(v) for v in raw.replace(" ", "").split(",") if v)
    if isinstance(like, bool):
        return raw.lower() in ("1", "true", "yes")
    return type(like)(raw)


def parse_config_text(text: str) -> tuple[TrainConfig, ModelConfig]:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    train_defaults, model_defaults = TrainConfig(), ModelConfig()
    train_kw, model_kw = {}, {}
    train_keys = {f.name for f in fields(TrainConfig)}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in train_keys:
            train_kw[key] = _parse_value(raw, getattr(train_defaults, key))
        elif key in _MODEL_KEYS:
            model_kw[key] = _parse_value(raw, getattr(model_defaults, key))
        else:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
    return TrainConfig(**train_kw), ModelConfig(**model_kw)


def load_config(path: str | Path) -> tuple[TrainConfig, ModelConfig]:
    return parse_config_text(Path(path).read_text())


# ---------------------------------------------------------------------------
# data


def normalize(pixels: np.ndarray) -> np.ndarray:
    """uint8 [0, 255] -> float32 [-1, 1]."""
    return (np.asarray(pixels, dtype=np.float32) / 127.5 - 1.0).astype(np.float32)


def denormalize(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`normalize`, rounded to nearest and clamped to bytes."""
    return np.clip(np.rint((np.asarray(x, dtype=np.float64) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def sample_patch(image: np.ndarray, mode: str, rng: np.random.Generator | None = None,
                 size: int = 32) -> np.ndarray:
    """Crop a (C, size, size) window; ``center`` is deterministic, ``random`` uses ``rng``."""
    _, h, w = image.shape
    if h < size or w < size:
        raise ValueError(f"image {w}x{h} is smaller than the {size}x{size} crop")
    if mode == "center":
        y, x = (h - size) // 2, (w - size) // 2
    elif mode == "random":
        if rng is None:
            raise ValueError("random crops need a random generator")
        y = int(rng.integers(0, h - size + 1))
        x = int(rng.integers(0, w - size + 1))
    else:
        raise ValueError(f"unknown crop mode {mode!r}")
    return image[:, y:y + size, x:x + size]


@dataclass
class Dataset:
    """Lossless images split into train / valid / test, in sorted path order."""

    train: list[Path] = field(default_factory=list)
    valid: list[Path] = field(default_factory=list)
    test: list[Path] = field(default_factory=list)

    def __post_init__(self):
        for split in ("train", "valid", "test"):
            paths = sorted(Path(p) for p in getattr(self, split))
            lossy = [p for p in paths if p.suffix.lower() not in LOSSLESS_SUFFIXES]
            if lossy:
                raise ValueError(f"only losslessly stored images are admitted, got {lossy[0]}")
            setattr(self, split, paths)
        self._cache: dict[Path, np.ndarray] = {}

    @classmethod
    def from_dir(cls, root: str | Path) -> "Dataset":
        """``root/{train,valid,test}/*``; non-image files are ignored."""
        root = Path(root)
        splits = {}
        for split in ("train", "valid", "test"):
            d = root / split
            splits[split] = [p for p in d.iterdir() if p.suffix.lower() in LOSSLESS_SUFFIXES] \
                if d.is_dir() else []
        return cls(**splits)

    def images(self, split: str) -> list[np.ndarray]:
        out = []
        for p in getattr(self, split):
            if p not in self._cache:
                self._cache[p] = load_image(p)
            out.append(self._cache[p])
        return out


# ---------------------------------------------------------------------------
# optimisation


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Step decay; a boundary epoch already uses the decayed rate."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    halvings = sum(1 for e in config.decay_epochs if epoch >= e)
    return config.lr / config.decay_factor ** halvings


@dataclass
class AdamMoments:
    first: dict[str, np.ndarray] = field(default_factory=dict)
    second: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
              moments: AdamMoments, step: int, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> tuple[dict[str, np.ndarray], AdamMoments]:
    """One bias-corrected Adam update; ``step`` counts from 1."""
    bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise NumericError(f"non-finite gradient at step {step} in {', '.join(bad[:5])}")
    new_params, first, second = {}, {}, {}
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    for k, p in params.items():
        g = grads.get(k)
        if g is None:
            new_params[k] = p
            first[k], second[k] = moments.first.get(k), moments.second.get(k)
            continue
        m = moments.first.get(k)
        v = moments.second.get(k)
        m = (1 - beta1) * g if m is None else beta1 * m + (1 - beta1) * g
        v = (1 - beta2) * g * g if v is None else beta2 * v + (1 - beta2) * g * g
        new_params[k] = (p - lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype)
        first[k], second[k] = m, v
    return new_params, AdamMoments(first, second)


class Adam:
    def __init__(self, params: dict[str, Tensor]):
        self.params = params
        self.moments = AdamMoments()
        self.step_count = 0

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, lr: float) -> None:
        grads = {k: p.grad for k, p in self.params.items() if p.grad is not None}
        new, moments = adam_step({k: p.data for k, p in self.params.items()}, grads,
                                 self.moments, self.step_count + 1, lr)
        self.step_count += 1
        self.moments = moments
        for k, p in self.params.items():
            p.data = new[k]


# ---------------------------------------------------------------------------
# training loop


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    valid_loss: float


@dataclass
class TrainResult:
    history: list[EpochRecord]
    best_epoch: int
    best_valid: float
    best_state: dict[str, np.ndarray]
    stopped_early: bool


def crops(images: Iterable[np.ndarray], mode: str, size: int,
          rng: np.random.Generator | None = None) -> np.ndarray:
    return np.stack([normalize(sample_patch(im, mode, rng, size)) for im in images])


VALID_SEED = 20_201


def evaluate_loss(model, batch: np.ndarray, batch_size: int = 32, mode: str = "deterministic",
                  draws: int = 1) -> float:
    """Mean training objective over ``batch``.

    Stochastic mode averages ``draws`` passes from a generator reseeded on
    every call, so two evaluations of the same weights agree exactly.
    """
    if mode == "deterministic":
        draws = 1
    rng = np.random.default_rng(VALID_SEED)
    total = 0.0
    with no_grad():
        for _ in range(draws):
            for s in range(0, len(batch), batch_size):
                part = batch[s:s + batch_size]
                total += model.loss(part, mode, rng).item() * len(part)
    return total / (len(batch) * draws)


def train(model, dataset: Dataset, config: TrainConfig,
          on_epoch: Callable[[EpochRecord], None] | None = None) -> TrainResult:
    """Fit ``model`` on random crops, early-stopping on centre-crop validation loss.

    One epoch draws one random crop (32x32, or 96x96 for context models)
    from every training image. On return the model holds the best weights.
    """
    train_images = dataset.images("train")
    valid_images = dataset.images("valid")
    if not train_images or not valid_images:
        raise ValueError("training needs non-empty train and valid splits")
    rng = np.random.default_rng(config.seed)
    size = model.crop_size
    valid_batch = crops(valid_images, "center", size)
    params = model.parameters()
    opt = Adam(params)
    history: list[EpochRecord] = []
    best_valid, best_epoch = math.inf, -1
    best_state = {k: p.data.copy() for k, p in params.items()}
    stopped_early = False
    for epoch in range(config.max_epochs):
        lr = lr_at(epoch, config)
        order = rng.permutation(len(train_images))
        batch = crops([train_images[i] for i in order], "random", size, rng)
        seen, total = 0, 0.0
        for s in range(0, len(batch), config.batch_size):
            part = batch[s:s + config.batch_size]
            loss = model.loss(part, "stochastic", rng)
            opt.zero_grad()
            backward(loss)
            try:
                opt.step(lr)
            except NumericError as exc:
                log.warning("epoch %d aborted: %s", epoch, exc)
                break
            total += loss.item() * len(part)
            seen += len(part)
        train_loss = total / seen if seen else math.nan
        valid_loss = evaluate_loss(model, valid_batch, config.batch_size, config.valid_binarizer,
                                   config.valid_draws)
        rec = EpochRecord(epoch, lr, train_loss, valid_loss)
        history.append(rec)
        if on_epoch:
            on_epoch(rec)
        if valid_loss < best_valid:
            best_valid, best_epoch = valid_loss, epoch
            best_state = {k: p.data.copy() for k, p in params.items()}
        elif epoch - best_epoch >= config.patience:
            stopped_early = True
            break
    for k, p in params.items():
        p.data = best_state[k]
    return TrainResult(history, best_epoch, best_valid, best_state, stopped_early)


def write_history(path: str | Path, history: Iterable[EpochRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "lr", "train_loss", "valid_loss"])
        for r in history:
            w.writerow([r.epoch, repr(r.lr), repr(r.train_loss), repr(r.valid_loss)])


def read_history(path: str | Path) -> list[EpochRecord]:
    with open(path, newline="") as fh:
        return [EpochRecord(int(r["epoch"]), float(r["lr"]), float(r["train_loss"]),
                            float(r["valid_loss"])) for r in csv.DictReader(fh)]
