import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from binet.metrics import (RdCurve, auc, bd_rate, psnr, rd_curve, rd_curves, read_curves, ssim,
                           write_curves)
from binet.models import CONV_AR, CodecModel, ModelConfig


def naive_ssim(a, b, L=255.0):
    # direct per-window evaluation with an explicit 2-D Gaussian
    x = np.arange(11) - 5.0
    g = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / (2 * 1.5 ** 2))
    g /= g.sum()
    c1, c2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    per_channel = []
    for ch in range(a.shape[0]):
        vals = []
        for i in range(a.shape[1] - 10):
            for j in range(a.shape[2] - 10):
                wa = a[ch, i:i + 11, j:j + 11].astype(np.float64)
                wb = b[ch, i:i + 11, j:j + 11].astype(np.float64)
                ma, mb = (g * wa).sum(), (g * wb).sum()
                va = (g * (wa - ma) ** 2).sum()
                vb = (g * (wb - mb) ** 2).sum()
                cov = (g * (wa - ma) * (wb - mb)).sum()
                vals.append((2 * ma * mb + c1) * (2 * cov + c2)
                            / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2)))
        per_channel.append(np.mean(vals))
    return float(np.mean(per_channel))


def naive_psnr(a, b, peak=255.0):
    total = 0.0
    for x, y in zip(a.ravel().tolist(), b.ravel().tolist()):
        total += (x - y) ** 2
    return 10 * math.log10(peak ** 2 / (total / a.size))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ssim_matches_naive_windows(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, (3, 32, 32)).astype(np.uint8)
    b = np.clip(a + rng.normal(0, 30, a.shape), 0, 255).astype(np.uint8)
    assert abs(ssim(a, b) - naive_ssim(a, b)) < 1e-5


def test_ssim_identity_and_anticorrelation():
    rng = np.random.default_rng(0)
    x = rng.integers(0, 256, (3, 40, 33)).astype(np.uint8)
    assert ssim(x, x) == 1.0
    binary = (rng.random((1, 24, 24)) < 0.5).astype(np.float64)
    assert ssim(binary, 1 - binary, data_range=1.0) < 0


def test_ssim_rejects_small_and_mismatched():
    with pytest.raises(ValueError):
        ssim(np.zeros((3, 10, 32)), np.zeros((3, 10, 32)))
    with pytest.raises(ValueError):
        ssim(np.zeros((3, 16, 16)), np.zeros((3, 16, 17)))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_ssim_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, (3, 16, 16))
    b = rng.integers(0, 256, (3, 16, 16))
    s = ssim(a, b)
    assert abs(s - ssim(b, a)) < 1e-9 and -1 <= s <= 1


def test_psnr_cases():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 256, (3, 8, 8)).astype(np.float64)
    b = rng.integers(0, 256, (3, 8, 8)).astype(np.float64)
    assert psnr(a, a) == math.inf
    assert psnr(np.zeros((2, 2)), np.full((2, 2), 255.0)) == 0.0
    assert abs(psnr(a, b) - naive_psnr(a, b)) < 1e-6
    with pytest.raises(ValueError):
        psnr(a, b[:, :4])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(-100, 100))
def test_psnr_shift_invariance(seed, c):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, (3, 8, 8)).astype(np.float64)
    b = rng.integers(0, 256, (3, 8, 8)).astype(np.float64)
    assert psnr(a, b) == psnr(a + c, b + c)


def test_auc_simple_shapes():
    assert auc(RdCurve("ssim", [0.5, 1.0, 2.5], [0.7, 0.7, 0.7])) == pytest.approx(0.7 * 2.0)
    assert auc(RdCurve("ssim", [0.0, 1.0], [0.0, 1.0])) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        auc(RdCurve("ssim", [1.0], [0.5]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(3, 12))
def test_auc_matches_dense_riemann_and_is_additive(seed, n):
    rng = np.random.default_rng(seed)
    bpp = np.cumsum(rng.uniform(0.05, 0.5, n))
    score = rng.uniform(0, 1, n)
    c = RdCurve("ssim", bpp, score)
    xs = np.linspace(bpp[0], bpp[-1], 400_001)
    ys = np.interp(xs, bpp, score)
    riemann = np.sum((ys[1:] + ys[:-1]) / 2 * np.diff(xs))
    assert abs(auc(c) - riemann) < 1e-9
    k = n // 2
    left = RdCurve("ssim", bpp[:k + 1], score[:k + 1])
    right = RdCurve("ssim", bpp[k:], score[k:])
    assert auc(c) == pytest.approx(auc(left) + auc(right), abs=1e-12)


def test_rdcurve_requires_increasing_rates():
    with pytest.raises(ValueError):
        RdCurve("ssim", [0.1, 0.1], [0.2, 0.3])


def synthetic(quality, log_rate):
    q = np.asarray(quality, dtype=np.float64)
    return RdCurve("ssim", np.exp(log_rate(q)), q)


def test_bd_rate_identity_and_halving():
    q = np.linspace(0.5, 0.95, 8)
    ref = synthetic(q, lambda x: -3 + 6 * x)
    assert bd_rate(ref, ref) == 0.0
    assert abs(bd_rate(ref, ref.scaled_rate(0.5)) - (-50.0)) < 0.1


def test_bd_rate_matches_analytic_integral():
    # both log-rates are exact cubics, so the fits are exact and the oracle is a plain integral
    ref_lr = lambda q: -4 + 5 * q - 2 * q ** 2 + q ** 3
    diff = lambda q: 0.3 - 0.8 * q + 0.4 * q ** 2
    q_ref = np.linspace(0.4, 0.9, 6)
    q_test = np.linspace(0.5, 0.97, 7)
    ref = synthetic(q_ref, ref_lr)
    test = synthetic(q_test, lambda q: ref_lr(q) + diff(q))
    lo, hi = 0.5, 0.9
    mean_diff = integrate.quad(diff, lo, hi)[0] / (hi - lo)
    expected = (math.exp(mean_diff) - 1) * 100
    assert abs(bd_rate(ref, test) - expected) < 0.1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31))
def test_bd_rate_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    q = np.sort(rng.uniform(0.3, 0.95, 6))
    q[1:] = np.maximum(q[1:], q[:-1] + 1e-3)
    a = RdCurve("ssim", np.cumsum(rng.uniform(0.1, 0.5, 6)), q)
    b = a.scaled_rate(float(rng.uniform(0.3, 3.0)))
    ab, ba = bd_rate(a, b), bd_rate(b, a)
    assert np.sign(ab) == -np.sign(ba)
    # exact in the log domain: log(1 + ab) = -log(1 + ba)
    assert abs(math.log1p(ab / 100) + math.log1p(ba / 100)) < 1e-6


def test_bd_rate_errors():
    q = np.linspace(0.1, 0.2, 5)
    a = synthetic(q, lambda x: x)
    with pytest.raises(ValueError, match="overlap"):
        bd_rate(a, synthetic(q + 0.5, lambda x: x))
    with pytest.raises(ValueError, match="at least 4"):
        bd_rate(a, synthetic(q[:3], lambda x: x))


def test_curve_csv_roundtrip(tmp_path):
    c1 = RdCurve("ssim", [0.125, 0.25], [0.5, 0.75])
    c2 = RdCurve("psnr", [0.125, 0.25], [20.0, math.inf])
    write_curves(tmp_path / "c.csv", [c1, c2])
    back = read_curves(tmp_path / "c.csv")
    assert back["ssim"] == c1
    assert back["psnr"].score == (20.0, 100.0)


class Identity:
    """Perfect codec stand-in: every iteration reconstructs exactly."""

    iterations = 3

    def run(self, grid, iterations, patches=None, codes=None, keep_recons=False, **_):
        if patches is not None:
            self._p = patches
            return np.zeros((len(patches), iterations, 32, 2, 2)), None
        return codes, [self._p] * iterations


def test_rd_curve_grid_and_identity_codec():
    rng = np.random.default_rng(0)
    images = [rng.integers(0, 256, (3, 64, 96), dtype=np.uint8) for _ in range(2)]
    c = rd_curve(Identity(), images, 3)
    assert c.bpp == (0.125, 0.25, 0.375)
    assert c.score == (1.0, 1.0, 1.0)


def test_rd_curve_deterministic():
    m = CodecModel(CONV_AR, 2, ModelConfig(enc_channels=(8, 8, 8), dec_channels=(16, 16, 8)))
    im = [np.random.default_rng(1).integers(0, 256, (3, 64, 64), dtype=np.uint8)]
    assert rd_curves(m, im) == rd_curves(m, im)
