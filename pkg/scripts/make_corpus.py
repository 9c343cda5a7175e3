"""Write the desk corpus (train/valid/test PNG tiles) to a directory."""

import argparse

from binet.corpus import TILE, write_corpus

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("root")
    ap.add_argument("--max-images", type=int, default=50)
    ap.add_argument("--scale", type=int, default=1, help="downscale sources before tiling")
    ap.add_argument("--tile", type=int, default=TILE, help="tile side in pixels")
    args = ap.parse_args()
    root = write_corpus(args.root, args.max_images, args.scale, args.tile)
    for split in ("train", "valid", "test"):
        print(split, len(list((root / split).glob("*.png"))))
