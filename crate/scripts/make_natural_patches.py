"""Cut 32x32 RGB patches from the scikit-image sample photographs.

The patches form the small natural-image corpus used by the test suite:

    python3 scripts/make_natural_patches.py crates/core/tests/data/natural32

Patch origins are drawn with a fixed seed; patches whose red channel is nearly
flat are skipped.
"""

import argparse
from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data

SOURCES = ["astronaut", "chelsea", "coffee", "rocket"]
SIZE = 32


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=Path)
    ap.add_argument("--per-image", type=int, default=15)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    for name in SOURCES:
        img = getattr(data, name)()
        h, w = img.shape[:2]
        kept = 0
        while kept < args.per_image:
            r = int(rng.integers(0, h - SIZE))
            c = int(rng.integers(0, w - SIZE))
            patch = img[r : r + SIZE, c : c + SIZE, :3]
            if patch[..., 0].std() < 8.0:
                continue
            Image.fromarray(patch).save(args.out / f"{name}_{kept:02d}.png")
            kept += 1


if __name__ == "__main__":
    main()
