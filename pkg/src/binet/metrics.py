"""PSNR, windowed SSIM, rate-distortion curves, AUC and Bjontegaard BD-rate."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .models import CodecModel, PatchGrid
from .training import denormalize, normalize

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03
BPP_PER_ITERATION = 0.125
METRICS = ("ssim", "psnr")


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 255.0) -> float:
    """10 log10(peak^2 / MSE); identical inputs give ``math.inf``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_shape(a, b)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(peak * peak / mse))


def capped(score: float, cap: float = PSNR_CAP) -> float:
    return min(score, cap)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    # separable correlation over the last two axes, valid positions only
    k = len(g)
    x = sliding_window_view(x, k, axis=-2) @ g
    return sliding_window_view(x, k, axis=-1) @ g


def ssim_map(a: np.ndarray, b: np.ndarray, data_range: float = 255.0) -> np.ndarray:
    """Local SSIM per channel at valid window positions, shape (C, H-10, W-10)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_shape(a, b)
    if a.ndim == 2:
        a, b = a[None], b[None]
    if min(a.shape[-2:]) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {a.shape[-2:]}")
    g = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 255.0) -> float:
    """Mean SSIM: averaged spatially within each channel, then over channels."""
    m = ssim_map(a, b, data_range)
    return float(np.mean(m.mean(axis=(-2, -1))))


# ---------------------------------------------------------------------------
# rate-distortion


@dataclass(frozen=True)
class RdCurve:
    metric: str
    bpp: tuple[float, ...]
    score: tuple[float, ...]

    def __post_init__(self):
        bpp = tuple(float(v) for v in self.bpp)
        score = tuple(float(v) for v in self.score)
        if len(bpp) != len(score):
            raise ValueError("bpp and score lengths differ")
        if any(b1 <= b0 for b0, b1 in zip(bpp, bpp[1:])):
            raise ValueError("bpp must be strictly increasing")
        object.__setattr__(self, "bpp", bpp)
        object.__setattr__(self, "score", score)

    def __len__(self) -> int:
        return len(self.bpp)

    def scaled_rate(self, factor: float) -> "RdCurve":
        return RdCurve(self.metric, tuple(b * factor for b in self.bpp), self.score)


def _score(metric: str, a: np.ndarray, b: np.ndarray) -> float:
    if metric == "ssim":
        return ssim(a, b)
    if metric == "psnr":
        return capped(psnr(a, b))
    raise ValueError(f"unknown metric {metric!r}")


def rd_curves(model: CodecModel, images: Sequence[np.ndarray], iterations: int | None = None,
              metrics: Iterable[str] = METRICS,
              return_recons: bool = False):
    """Score the reassembled image after every iteration, averaged over ``images``.

    ``images`` are (3, H, W) uint8 with H and W multiples of 32. Point i sits
    at 0.125 i bpp. With ``return_recons`` the per-image, per-iteration uint8
    reconstructions are returned too.
    """
    iterations = iterations or model.iterations
    metrics = tuple(metrics)
    if not images:
        raise ValueError("rd curve needs at least one image")
    sums = {m: np.zeros(iterations) for m in metrics}
    all_recons = []
    for im in images:
        grid = PatchGrid.for_shape(im.shape[1], im.shape[2])
        x = normalize(im)
        codes, _ = model.run(grid, iterations, patches=grid.split(x))
        _, recons = model.run(grid, iterations, codes=codes, keep_recons=True)
        pix = [denormalize(grid.merge(r)) for r in recons]
        for m in metrics:
            sums[m] += [_score(m, im, p) for p in pix]
        if return_recons:
            all_recons.append(pix)
    bpp = tuple(BPP_PER_ITERATION * i for i in range(1, iterations + 1))
    curves = {m: RdCurve(m, bpp, tuple(sums[m] / len(images))) for m in metrics}
    return (curves, all_recons) if return_recons else curves


def rd_curve(model: CodecModel, images: Sequence[np.ndarray], iterations: int | None = None,
             metric: str = "ssim") -> RdCurve:
    return rd_curves(model, images, iterations, (metric,))[metric]


def auc(curve: RdCurve) -> float:
    """Trapezoidal area under the curve over its bpp span."""
    if len(curve) < 2:
        raise ValueError("AUC needs at least 2 points")
    return float(np.trapezoid(curve.score, curve.bpp))


def bd_rate(reference: RdCurve, test: RdCurve) -> float:
    """Bjontegaard rate difference in percent; negative means ``test`` needs fewer bits.

    log(rate) is fitted as a cubic in quality for both curves and the fits are
    integrated over the shared quality interval.
    """
    for name, c in (("reference", reference), ("test", test)):
        if len(c) < 4:
            raise ValueError(f"{name} curve has {len(c)} points; BD-rate needs at least 4")
        if min(c.bpp) <= 0:
            raise ValueError(f"{name} curve has non-positive rates")
    q_ref = np.asarray(reference.score)
    q_test = np.asarray(test.score)
    lo = max(q_ref.min(), q_test.min())
    hi = min(q_ref.max(), q_test.max())
    if not hi > lo:
        raise ValueError(
            f"quality ranges do not overlap: reference [{q_ref.min():.4g}, {q_ref.max():.4g}], "
            f"test [{q_test.min():.4g}, {q_test.max():.4g}]")
    p_ref = np.polyint(np.polyfit(q_ref, np.log(reference.bpp), 3))
    p_test = np.polyint(np.polyfit(q_test, np.log(test.bpp), 3))
    int_ref = np.polyval(p_ref, hi) - np.polyval(p_ref, lo)
    int_test = np.polyval(p_test, hi) - np.polyval(p_test, lo)
    avg = (int_test - int_ref) / (hi - lo)
    return float((np.exp(avg) - 1.0) * 100.0)


# ---------------------------------------------------------------------------
# CSV


def write_curves(path: str | Path, curves: Iterable[RdCurve]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "bpp", "score"])
        for c in curves:
            for b, s in zip(c.bpp, c.score):
                w.writerow([c.metric, repr(b), repr(capped(s) if c.metric == "psnr" else s)])


def read_curves(path: str | Path) -> dict[str, RdCurve]:
    rows: dict[str, list[tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["metric", "bpp", "score"]:
            raise ValueError(f"{path}: expected header metric,bpp,score")
        for r in reader:
            rows.setdefault(r["metric"], []).append((float(r["bpp"]), float(r["score"])))
    return {m: RdCurve(m, *zip(*sorted(pts))) for m, pts in rows.items()}
