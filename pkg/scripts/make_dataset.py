#!/usr/bin/env python3
"""Generate a directory of synthetic training images as binary PPM files."""
import argparse
from pathlib import Path

from demosaick.datagen import make_dataset
from demosaick.pnm import write_image


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", help="output directory")
    ap.add_argument("--count", type=int, default=60)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--size", type=int, default=64, help="image height and width")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, image in make_dataset(args.count, args.seed, args.size, args.size):
        write_image(out / name, image)
    print(f"wrote {args.count} images to {out}")


if __name__ == "__main__":
    main()
