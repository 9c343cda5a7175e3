"""``binet`` command-line entry point.

Exit codes: 0 success, 2 usage/validation, 3 I/O or file format, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import bitstream
from .imageio import ImageReadError, load_image, resize_to, save_image
from .inpaint import CAUSAL, INTRA_MODES, SINet, intra_from_image
from .metrics import METRICS, bd_rate, psnr, rd_curves, read_curves, ssim, write_curves
from .models import (CONV_AR, PATCH, SINET, VARIANTS, CodecModel, DimensionError, PatchGrid,
                     assemble_all_contexts, decode_patch)
from .tensor import ShapeError
from .training import (LOSSLESS_SUFFIXES, Dataset, NumericError, TrainConfig, denormalize,
                       load_config, normalize, train, write_history)

log = logging.getLogger("binet")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
EVAL_SIZE = (320, 224)  # width, height


class UsageError(ValueError):
    pass


def _threads() -> int | None:
    raw = os.environ.get("BINEC_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"BINEC_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("BINEC_THREADS must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="binet", description="Patch-based binary-code image codec.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, *, model=True, iterations=False, resize=False, metric=False):
        if model:
            sp.add_argument("--model", type=Path, required=True, help="BINW weight file")
        if iterations:
            sp.add_argument("--iterations", type=int, help="number of iterations (default: all)")
        if resize:
            sp.add_argument("--resize", dest="resize", action="store_true", default=None,
                            help="resize inputs to 320x224 first")
            sp.add_argument("--no-resize", dest="resize", action="store_false",
                            help="keep native size (must be divisible by 32)")
        if metric:
            sp.add_argument("--metric", choices=METRICS, help="restrict to one metric")
        sp.add_argument("--seed", type=int, default=0, help="random seed")

    t = sub.add_parser("train", help="train a model on a corpus directory")
    t.add_argument("--variant", choices=VARIANTS, required=True)
    t.add_argument("--iterations", type=int, default=1)
    t.add_argument("--input", type=Path, required=True, help="corpus with train/ and valid/")
    t.add_argument("--output", type=Path, required=True, help="BINW file to write")
    t.add_argument("--config", type=Path, help="key=value training/width config")
    t.add_argument("--compressor", type=Path,
                   help="SINet only: pretrained 1-iteration ConvAR (trained first if omitted)")
    common(t, model=False)

    e = sub.add_parser("encode", help="compress an image to a .binc file")
    e.add_argument("--input", type=Path, required=True)
    e.add_argument("--output", type=Path, required=True)
    common(e, iterations=True, resize=True)

    d = sub.add_parser("decode", help="decode a .binc file to PNG")
    d.add_argument("--input", type=Path, required=True)
    d.add_argument("--output", type=Path, required=True)
    common(d, iterations=True)

    v = sub.add_parser("eval", help="rate-distortion curve over an image or directory")
    v.add_argument("--input", type=Path, required=True)
    v.add_argument("--output", type=Path, required=True, help="curve CSV")
    v.add_argument("--recon-dir", type=Path, help="also write per-iteration reconstructions here")
    common(v, iterations=True, resize=True, metric=True)

    b = sub.add_parser("bdrate", help="BD-rate of a test curve against a reference curve")
    b.add_argument("--reference", type=Path, required=True, help="reference curve CSV")
    b.add_argument("--input", type=Path, required=True, help="test curve CSV")
    b.add_argument("--output", type=Path, help="optional CSV report")
    common(b, model=False, metric=True)

    i = sub.add_parser("inpaint-demo", help="masked BINet vs SINet vs intra prediction")
    i.add_argument("--input", type=Path, required=True)
    i.add_argument("--output", type=Path, required=True, help="PNG strip")
    i.add_argument("--sinet-model", type=Path, required=True)
    common(i, resize=True)
    return p


# ---------------------------------------------------------------------------
# helpers


def _load_model(path: Path):
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    return bitstream.load_model(path)


def _load_input_image(path: Path, resize: bool) -> np.ndarray:
    im = load_image(path)
    if resize:
        return resize_to(im, *EVAL_SIZE)
    _, h, w = im.shape
    if h % PATCH or w % PATCH:
        raise UsageError(f"{path} is {w}x{h}; dimensions must be multiples of {PATCH} "
                         "(pass --resize)")
    return im


def _image_paths(path: Path) -> list[Path]:
    if path.is_dir():
        paths = sorted(p for p in path.iterdir() if p.suffix.lower() in LOSSLESS_SUFFIXES)
        if not paths:
            raise FileNotFoundError(f"no lossless images in {path}")
        return paths
    if not path.is_file():
        raise FileNotFoundError(f"input not found: {path}")
    return [path]


def _check_iterations(n: int | None, limit: int) -> int:
    if n is None:
        return limit
    if not 1 <= n <= limit:
        raise UsageError(f"--iterations must be in 1..{limit}, got {n}")
    return n


def _atomic_text(path: Path, writer) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _fmt_pct(x: float) -> str:
    return f"{round(x, 2) + 0.0:.2f}%"


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    if args.iterations < 1:
        raise UsageError("--iterations must be >= 1")
    tcfg, mcfg = load_config(args.config) if args.config else (TrainConfig(), None)
    tcfg.seed = args.seed
    if not args.input.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {args.input}")
    ds = Dataset.from_dir(args.input)
    if not ds.train or not ds.valid:
        raise UsageError(f"{args.input} needs non-empty train/ and valid/ subdirectories")

    def report(tag):
        return lambda r: log.info("%s epoch %d lr %.3g train %.5f valid %.5f",
                                  tag, r.epoch, r.lr, r.train_loss, r.valid_loss)

    if args.variant == SINET:
        if args.iterations != 1:
            raise UsageError("SINet is a single-iteration model")
        if args.compressor:
            comp = _load_model(args.compressor)
            if comp.variant != CONV_AR or comp.iterations != 1:
                raise UsageError("--compressor must be a 1-iteration ConvAR model")
        else:
            comp = CodecModel(CONV_AR, 1, mcfg, seed=args.seed + 1)
            train(comp, ds, tcfg, report("compressor"))
        model = SINet(comp.config, seed=args.seed, compressor=comp)
    else:
        model = CodecModel(args.variant, args.iterations, mcfg, seed=args.seed)
    res = train(model, ds, tcfg, report(args.variant))
    bitstream.save_model(args.output, model)
    hist = args.output.with_suffix(".history.csv")
    _atomic_text(hist, lambda p: write_history(p, res.history))
    print(f"best epoch {res.best_epoch} valid {res.best_valid:.6f}; wrote {args.output} and {hist}")
    return EXIT_OK


def cmd_encode(args) -> int:
    model = _load_model(args.model)
    if model.variant == SINET:
        raise UsageError("SINet is a predictor, not a codec")
    iters = _check_iterations(args.iterations, model.iterations)
    im = _load_input_image(args.input, bool(args.resize))
    grid = PatchGrid.for_shape(im.shape[1], im.shape[2])
    codes, _ = model.run(grid, iters, patches=grid.split(normalize(im)))
    f = bitstream.CompressedFile(im.shape[2], im.shape[1], iters, codes)
    size = bitstream.write_compressed(args.output, f)
    print(f"wrote {args.output}: {size} bytes, {f.payload_bits} payload bits, "
          f"{f.payload_bits / (f.width * f.height):.3f} bpp")
    return EXIT_OK


def cmd_decode(args) -> int:
    model = _load_model(args.model)
    if model.variant == SINET:
        raise UsageError("SINet is a predictor, not a codec")
    f = bitstream.read_compressed(args.input)
    iters = _check_iterations(args.iterations, min(f.iterations, model.iterations))
    _, recon = model.run(f.grid, iters, codes=f.codes)
    save_image(args.output, denormalize(f.grid.merge(recon)))
    print(f"wrote {args.output} from {iters} of {f.iterations} iterations")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load_model(args.model)
    if model.variant == SINET:
        raise UsageError("SINet is a predictor, not a codec")
    iters = _check_iterations(args.iterations, model.iterations)
    resize = True if args.resize is None else args.resize
    paths = _image_paths(args.input)
    images = [_load_input_image(p, resize) for p in paths]
    metrics = (args.metric,) if args.metric else METRICS
    curves, recons = rd_curves(model, images, iters, metrics, return_recons=True)
    _atomic_text(args.output, lambda p: write_curves(p, curves.values()))
    if args.recon_dir:
        args.recon_dir.mkdir(parents=True, exist_ok=True)
        for path, per_iter in zip(paths, recons):
            for i, im in enumerate(per_iter, 1):
                save_image(args.recon_dir / f"{path.stem}_it{i:02d}.png", im)
    for m, c in curves.items():
        print(f"{m}: " + " ".join(f"{b:.3f}:{s:.4f}" for b, s in zip(c.bpp, c.score)))
    return EXIT_OK


def cmd_bdrate(args) -> int:
    ref = read_curves(args.reference)
    test = read_curves(args.input)
    metrics = [args.metric] if args.metric else [m for m in METRICS if m in ref and m in test]
    if not metrics:
        raise UsageError("the two curve files share no metric")
    rows = []
    for m in metrics:
        if m not in ref or m not in test:
            raise UsageError(f"metric {m!r} missing from one of the curve files")
        value = bd_rate(ref[m], test[m])
        rows.append((m, value))
        print(f"BD-rate ({m}): {_fmt_pct(value)}")
    if args.output:
        _atomic_text(args.output, lambda p: Path(p).write_text(
            "metric,bd_rate_percent\n" + "".join(f"{m},{v!r}\n" for m, v in rows)))
    return EXIT_OK


def cmd_inpaint_demo(args) -> int:
    binet = _load_model(args.model)
    sinet = _load_model(args.sinet_model)
    if not isinstance(sinet, SINet):
        raise UsageError("--sinet-model must hold a SINet")
    if isinstance(binet, SINet) or not binet.uses_context:
        raise UsageError("--model must hold a BINet variant (MaskedBINet recommended)")
    im = _load_input_image(args.input, True if args.resize is None else args.resize)
    grid = PatchGrid.for_shape(im.shape[1], im.shape[2])
    # only patches whose causal neighbourhood lies on the grid
    targets = [(r, c) for r in range(1, grid.rows) for c in range(1, grid.cols - 1)]
    if not targets:
        raise UsageError("image too small: need at least 2 rows and 3 columns of patches")
    idx = [grid.index(r, c) for r, c in targets]
    x = normalize(im)
    patches = grid.split(x)
    codes, _ = binet.run(grid, 1, patches=patches)
    pred_binet, _ = decode_patch(binet, assemble_all_contexts(codes[:, 0], grid)[idx], 1)
    comp_codes, comp_recon = sinet.compressor.run(grid, 1, patches=patches)
    neigh = np.stack([comp_codes[[grid.index(r + k // 3 - 1, c + k % 3 - 1) for k in CAUSAL], 0]
                      for r, c in targets])
    pred_sinet = sinet.predict(neigh)
    # intra predictors read their borders from the decoded ConvAR image
    recon = grid.merge(comp_recon)
    rows = [("original", patches[idx]), ("binet", pred_binet), ("sinet", pred_sinet)]
    for mode in INTRA_MODES:
        rows.append((mode, np.stack([intra_from_image(mode, recon, r, c) for r, c in targets])))
    orig = denormalize(rows[0][1])
    for name, pred in rows[1:]:
        pix = denormalize(pred)
        p = np.mean([min(psnr(o, q), 100.0) for o, q in zip(orig, pix)])
        s = np.mean([ssim(o, q) for o, q in zip(orig, pix)])
        print(f"{name:>8}: PSNR {p:.2f} dB  SSIM {s:.4f}")
    # one row per target patch, one column per method
    strip = np.concatenate([np.concatenate(list(denormalize(pred)), axis=1) for _, pred in rows],
                           axis=2)
    save_image(args.output, strip)
    print(f"wrote {args.output} ({len(targets)} patches; columns: {', '.join(n for n, _ in rows)})")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "eval": cmd_eval,
    "bdrate": cmd_bdrate,
    "inpaint-demo": cmd_inpaint_demo,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        threads = _threads()
        if threads is None:
            return COMMANDS[args.command](args)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=threads):
            return COMMANDS[args.command](args)
    except (bitstream.FormatError, ImageReadError, FileNotFoundError, IsADirectoryError,
            PermissionError, KeyError) as exc:
        print(f"binet: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, FloatingPointError) as exc:
        print(f"binet: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, DimensionError, ShapeError, ValueError) as exc:
        print(f"binet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"binet: error: {exc}", file=sys.stderr)
        return EXIT_IO


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
