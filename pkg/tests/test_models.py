import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binet import tensor as T
from binet.models import (BINET_AR, BINET_OSR, BITS_PER_PATCH, CONTEXT_PAD, CONV_AR, CONV_GRU_OSR,
                          MASKED_BINET, CodeUnderflowError, CodecModel, DimensionError, ModelConfig,
                          PatchGrid, ar_step, assemble_all_contexts, assemble_context,
                          blocks_to_patches, codes_to_context, compress_image, config_from_state,
                          decode_patch, decompress_image, encode_patch, loss_baseline, loss_binet,
                          loss_inpaint, osr_step, progressive_reconstructions)
from binet.tensor import ShapeError, Tensor

SMALL = ModelConfig(enc_channels=(8, 8, 8), dec_channels=(16, 16, 8), rnn_channels=(8, 8, 8))
CODECS = (CONV_AR, CONV_GRU_OSR, BINET_AR, BINET_OSR, MASKED_BINET)


def small(variant, iterations=3, seed=0):
    return CodecModel(variant, iterations, SMALL, seed=seed)


def random_image(rng, rows=3, cols=4):
    return rng.uniform(-1, 1, size=(3, 32 * rows, 32 * cols)).astype(np.float32)


def test_grid_rejects_indivisible():
    with pytest.raises(DimensionError):
        PatchGrid.for_shape(224, 330)
    with pytest.raises(DimensionError):
        PatchGrid.for_shape(0, 32)


def test_grid_neighbours_offgrid():
    g = PatchGrid(2, 3)
    assert g.neighbours(0, 0) == [None, None, None, None, 0, 1, None, 3, 4]
    with pytest.raises(IndexError):
        g.neighbours(2, 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**16))
def test_split_merge_roundtrip(rows, cols, seed):
    g = PatchGrid(rows, cols)
    im = np.random.default_rng(seed).normal(size=(3, g.height, g.width)).astype(np.float32)
    patches = g.split(im)
    np.testing.assert_array_equal(patches[g.index(rows - 1, 0)], im[:, -32:, :32])
    np.testing.assert_array_equal(g.merge(patches), im)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**16))
def test_vectorised_context_matches_per_patch(rows, cols, seed):
    g = PatchGrid(rows, cols)
    codes = np.random.default_rng(seed).choice([-1.0, 1.0], size=(g.size, 32, 2, 2))
    allc = assemble_all_contexts(codes.astype(np.float32), g)
    for r in range(rows):
        for c in range(cols):
            np.testing.assert_array_equal(allc[g.index(r, c)], assemble_context(codes, g, r, c))


def test_context_layout_and_padding():
    g = PatchGrid(2, 2)
    codes = np.stack([np.full((32, 2, 2), k + 1.0) for k in range(4)])
    ctx = assemble_context(codes, g, 0, 0)
    # centre block is the patch itself, right/below neighbours follow, top/left row is pad
    assert np.all(ctx[:, 2:4, 2:4] == 1) and np.all(ctx[:, 2:4, 4:6] == 2)
    assert np.all(ctx[:, 4:6, 2:4] == 3) and np.all(ctx[:, 4:6, 4:6] == 4)
    assert np.all(ctx[:, :2, :] == CONTEXT_PAD) and np.all(ctx[:, :, :2] == CONTEXT_PAD)


def test_training_context_matches_grid_context():
    rng = np.random.default_rng(0)
    blocks = rng.normal(size=(2, 3, 96, 96)).astype(np.float32)
    patches = blocks_to_patches(blocks)
    g = PatchGrid(3, 3)
    np.testing.assert_array_equal(patches[:9], g.split(blocks[0]))
    codes = rng.choice([-1.0, 1.0], size=(18, 32, 2, 2)).astype(np.float32)
    ctx = codes_to_context(Tensor(codes), 2).data
    np.testing.assert_array_equal(ctx[1], assemble_context(codes[9:], g, 1, 1))


@pytest.mark.parametrize("variant", CODECS)
def test_encode_patch_is_128_bits_and_deterministic(variant):
    m = small(variant)
    patch = np.zeros((3, 32, 32), np.float32)
    c1, s1 = encode_patch(m, patch, 1)
    c2, _ = encode_patch(m, patch, 1)
    assert c1.shape == (BITS_PER_PATCH,) and set(np.unique(c1)) <= {-1.0, 1.0}
    np.testing.assert_array_equal(c1, c2)
    assert (s1 is not None) == m.recurrent
    with pytest.raises(ValueError):
        encode_patch(m, patch, 4)


@pytest.mark.parametrize("variant", CODECS)
def test_decode_patch_range_and_context_shapes(variant):
    m = small(variant)
    ctx = np.random.default_rng(1).choice([-1.0, 1.0], size=(32, 6, 6)).astype(np.float32)
    out, _ = decode_patch(m, ctx, 1)
    assert out.shape == (3, 32, 32) and out.min() >= -1 and out.max() <= 1
    if m.uses_context:
        with pytest.raises(ShapeError):
            decode_patch(m, ctx[:, 2:4, 2:4], 1)
    else:
        # non-context models read only the central 2x2 block
        np.testing.assert_array_equal(decode_patch(m, ctx[:, 2:4, 2:4], 1)[0], out)


def test_ar_and_osr_step_algebra():
    r0 = Tensor(np.linspace(-1, 1, 12).reshape(3, 4))
    assert np.all(osr_step(r0, r0, lambda r: r0).data == 0)
    outs = []

    def auto(r):
        o = r * 0.3 + 0.1
        outs.append(o)
        return o

    r = r0
    for _ in range(5):
        r = ar_step(r, auto)
    np.testing.assert_allclose(r0.data, sum(o.data for o in outs) + r.data, atol=1e-12)


def test_losses():
    rng = np.random.default_rng(0)
    rs = [Tensor(rng.normal(size=(2, 3, 4, 4))) for _ in range(3)]
    expected = sum(np.mean(np.abs(r.data)) for r in rs)
    assert loss_baseline(rs).item() == pytest.approx(expected, abs=1e-12)
    assert loss_binet(rs[0], rs[1:]).item() == pytest.approx(expected, abs=1e-12)
    pc, hat = Tensor(rng.normal(size=(2, 3))), Tensor(rng.normal(size=(2, 3)))
    assert loss_inpaint(pc, hat).item() == pytest.approx(np.mean(np.abs(pc.data - hat.data)))
    with pytest.raises(ValueError):
        loss_baseline([])


@pytest.mark.parametrize("variant", [CONV_AR, BINET_AR])
def test_forward_telescopes(variant):
    m = small(variant, iterations=4)
    rng = np.random.default_rng(0)
    batch = rng.uniform(-1, 1, size=(2, 3, m.crop_size, m.crop_size)).astype(np.float32)
    stages = []
    target, residuals = m.forward(batch, "deterministic")
    # rebuild outputs from consecutive residuals: o_1 = x - r_1, o_i = r_{i-1} - r_i
    outs = [target.data - residuals[0].data] + [
        a.data - b.data for a, b in zip(residuals, residuals[1:])]
    np.testing.assert_allclose(target.data, sum(outs) + residuals[-1].data, atol=1e-5)
    assert len(residuals) == 4 and not stages


@pytest.mark.parametrize("variant", CODECS)
def test_forward_shapes_and_loss(variant):
    m = small(variant, iterations=2)
    rng = np.random.default_rng(0)
    batch = rng.uniform(-1, 1, size=(2, 3, m.crop_size, m.crop_size)).astype(np.float32)
    loss = m.loss(batch, "stochastic", rng)
    assert loss.shape == () and np.isfinite(loss.item())
    T.backward(loss)
    assert all(p.grad is not None for p in m.parameters().values())
    with pytest.raises(ShapeError):
        m.forward(np.zeros((1, 3, 64, 64), np.float32))


def test_context_only_at_first_iteration():
    m = small(BINET_AR, 3)
    assert m.decoders[0].context and not any(d.context for d in m.decoders[1:])


@pytest.mark.parametrize("variant", CODECS)
def test_compress_decompress_agree_with_progressive(variant):
    m = small(variant, 3)
    im = random_image(np.random.default_rng(0))
    codes, recons = progressive_reconstructions(m, im)
    grid = PatchGrid.for_shape(*im.shape[1:])
    assert codes.shape == (12, 3, 32, 2, 2)
    for k in (1, 3):
        np.testing.assert_array_equal(decompress_image(m, codes, grid, k), recons[k - 1])
    np.testing.assert_array_equal(compress_image(m, im), codes)
    with pytest.raises(CodeUnderflowError):
        decompress_image(m, codes[:, :2], grid, 3)


@pytest.mark.parametrize("variant", CODECS)
def test_patch_order_invariance(variant):
    m = small(variant, 2)
    im = random_image(np.random.default_rng(3))
    grid = PatchGrid.for_shape(*im.shape[1:])
    order = np.random.default_rng(4).permutation(grid.size)
    codes = compress_image(m, im)
    np.testing.assert_array_equal(compress_image(m, im, order=order, chunk=1), codes)
    ref = decompress_image(m, codes, grid)
    np.testing.assert_array_equal(decompress_image(m, codes, grid, order=order, chunk=5), ref)


def test_state_dict_roundtrip_and_config_inference():
    for variant in CODECS:
        m = small(variant, 2, seed=1)
        cfg = config_from_state(variant, m.state_dict())
        assert cfg.enc_channels == SMALL.enc_channels
        m2 = CodecModel(variant, 2, cfg, seed=9)
        m2.load_state_dict(m.state_dict())
        for k, v in m.state_dict().items():
            np.testing.assert_array_equal(m2.state_dict()[k], v)
    with pytest.raises(KeyError):
        small(CONV_AR, 2).load_state_dict(small(CONV_AR, 3).state_dict())


def test_variant_validation():
    with pytest.raises(ValueError):
        CodecModel("SINet")
    with pytest.raises(ValueError):
        CodecModel("ResNet")
    with pytest.raises(ValueError):
        CodecModel(CONV_AR, 0)
