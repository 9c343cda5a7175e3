import numpy as np
import pytest

from binet import bitstream
from binet.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, build_parser, main
from binet.imageio import load_image, save_image
from binet.metrics import read_curves
from binet.models import CONV_AR, MASKED_BINET, CodecModel, ModelConfig, PatchGrid
from binet.training import denormalize, normalize

TINY_CFG = "max_epochs = 2\nlr = 1e-3\nenc_channels = 8,8,8\ndec_channels = 16,16,8\n" \
           "rnn_channels = 8,8,8\n"


@pytest.fixture
def corpus(tmp_path):
    rng = np.random.default_rng(0)
    for split, n in (("train", 3), ("valid", 2), ("test", 1)):
        (tmp_path / "corpus" / split).mkdir(parents=True)
        for i in range(n):
            save_image(tmp_path / "corpus" / split / f"{i}.png",
                       rng.integers(0, 256, (3, 96, 128), dtype=np.uint8))
    (tmp_path / "tiny.cfg").write_text(TINY_CFG)
    return tmp_path


@pytest.fixture
def model_file(tmp_path):
    m = CodecModel(CONV_AR, 4, ModelConfig(enc_channels=(8, 8, 8), dec_channels=(16, 16, 8)), seed=2)
    path = tmp_path / "m.binw"
    bitstream.save_model(path, m)
    return path


def test_help_lists_every_flag():
    sub = build_parser()._subparsers._group_actions[0].choices
    assert set(sub) == {"train", "encode", "decode", "eval", "bdrate", "inpaint-demo"}
    flags = {opt for p in sub.values() for a in p._actions for opt in a.option_strings}
    for f in ("--model", "--variant", "--iterations", "--input", "--output", "--seed", "--config",
              "--resize", "--no-resize", "--metric"):
        assert f in flags


def test_unknown_flag_and_variant_rejected(tmp_path):
    assert main(["encode", "--bogus"]) == EXIT_USAGE
    assert main(["train", "--variant", "ResNet", "--input", str(tmp_path), "--output", "x"]) == EXIT_USAGE


def test_missing_checkpoint_is_io_error(tmp_path):
    img = tmp_path / "a.png"
    save_image(img, np.zeros((3, 32, 32), np.uint8))
    assert main(["encode", "--model", str(tmp_path / "nope.binw"), "--input", str(img),
                 "--output", str(tmp_path / "x.binc")]) == EXIT_IO


def test_indivisible_dims_need_resize(tmp_path, model_file):
    img = tmp_path / "odd.png"
    save_image(img, np.zeros((3, 50, 70), np.uint8))
    out = tmp_path / "x.binc"
    assert main(["encode", "--model", str(model_file), "--input", str(img), "--output", str(out)]) \
        == EXIT_USAGE
    assert not out.exists()
    assert main(["encode", "--model", str(model_file), "--input", str(img), "--output", str(out),
                 "--resize"]) == EXIT_OK
    assert bitstream.read_compressed(out).width == 320


def test_encode_decode_matches_eval_path(tmp_path, model_file):
    rng = np.random.default_rng(1)
    img = tmp_path / "a.png"
    pixels = rng.integers(0, 256, (3, 64, 96), dtype=np.uint8)
    save_image(img, pixels)
    before = img.read_bytes()
    binc, png = tmp_path / "a.binc", tmp_path / "a_dec.png"
    assert main(["encode", "--model", str(model_file), "--input", str(img), "--output", str(binc)]) == 0
    assert img.read_bytes() == before
    for k in (1, 4):
        assert main(["decode", "--model", str(model_file), "--input", str(binc), "--output", str(png),
                     "--iterations", str(k)]) == 0
        m = bitstream.load_model(model_file)
        grid = PatchGrid.for_shape(64, 96)
        codes, recon = m.run(grid, 4, patches=grid.split(normalize(pixels)), keep_recons=True)
        np.testing.assert_array_equal(load_image(png), denormalize(grid.merge(recon[k - 1])))
    assert main(["decode", "--model", str(model_file), "--input", str(binc), "--output", str(png),
                 "--iterations", "5"]) == EXIT_USAGE


def test_corrupt_file_is_io_error(tmp_path, model_file):
    bad = tmp_path / "bad.binc"
    bad.write_bytes(b"NOPE" + bytes(40))
    assert main(["decode", "--model", str(model_file), "--input", str(bad),
                 "--output", str(tmp_path / "o.png")]) == EXIT_IO


def test_eval_and_bdrate(tmp_path, model_file, capsys):
    d = tmp_path / "imgs"
    d.mkdir()
    save_image(d / "a.png", np.random.default_rng(0).integers(0, 256, (3, 64, 64), dtype=np.uint8))
    csv = tmp_path / "c.csv"
    assert main(["eval", "--model", str(model_file), "--input", str(d), "--output", str(csv),
                 "--no-resize", "--recon-dir", str(tmp_path / "rec")]) == 0
    curves = read_curves(csv)
    assert curves["ssim"].bpp == (0.125, 0.25, 0.375, 0.5) and "psnr" in curves
    assert len(list((tmp_path / "rec").iterdir())) == 4
    capsys.readouterr()
    assert main(["bdrate", "--reference", str(csv), "--input", str(csv), "--metric", "ssim"]) == 0
    assert "0.00%" in capsys.readouterr().out


def test_train_writes_checkpoint_and_history(corpus):
    out = corpus / "m.binw"
    rc = main(["train", "--variant", MASKED_BINET, "--input", str(corpus / "corpus"), "--output",
               str(out), "--config", str(corpus / "tiny.cfg"), "--seed", "3"])
    assert rc == 0
    assert bitstream.load_model(out).variant == MASKED_BINET
    lines = (corpus / "m.history.csv").read_text().splitlines()
    assert lines[0] == "epoch,lr,train_loss,valid_loss" and len(lines) == 3


def test_inpaint_demo(corpus, capsys):
    c = corpus / "corpus"
    cfg = str(corpus / "tiny.cfg")
    assert main(["train", "--variant", MASKED_BINET, "--input", str(c), "--output",
                 str(corpus / "mb.binw"), "--config", cfg]) == 0
    assert main(["train", "--variant", "SINet", "--input", str(c), "--output",
                 str(corpus / "s.binw"), "--config", cfg]) == 0
    capsys.readouterr()
    out = corpus / "demo.png"
    assert main(["inpaint-demo", "--model", str(corpus / "mb.binw"), "--sinet-model",
                 str(corpus / "s.binw"), "--input", str(c / "test" / "0.png"), "--output", str(out),
                 "--no-resize"]) == 0
    text = capsys.readouterr().out
    for name in ("binet", "sinet", "DC", "H", "V", "TM"):
        assert f"{name}: PSNR" in text
    # a 3x4 grid has 4 patches with a full causal neighbourhood, stacked vertically; 7 columns
    assert load_image(out).shape == (3, 4 * 32, 7 * 32)
