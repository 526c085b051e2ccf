"""Export one CIFAR-10 class as 32x32 PNG files for `lsrf bench --preset images`.

Download and unpack the python version of CIFAR-10 yourself, then run

    python3 scripts/export_cifar.py cifar-10-batches-py out/dogs --label dog --count 100

Images are taken in file order from data_batch_1..5 and then test_batch.
"""

import argparse
import pickle
from pathlib import Path

import numpy as np
from PIL import Image


def batches(root: Path):
    for name in [f"data_batch_{i}" for i in range(1, 6)] + ["test_batch"]:
        path = root / name
        if path.exists():
            with open(path, "rb") as fh:
                yield pickle.load(fh, encoding="bytes")


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("root", type=Path, help="cifar-10-batches-py directory")
    ap.add_argument("out", type=Path)
    ap.add_argument("--label", default="dog")
    ap.add_argument("--count", type=int, default=100)
    args = ap.parse_args()
    with open(args.root / "batches.meta", "rb") as fh:
        names = [n.decode() for n in pickle.load(fh, encoding="bytes")[b"label_names"]]
    label = names.index(args.label)
    args.out.mkdir(parents=True, exist_ok=True)
    written = 0
    for batch in batches(args.root):
        for row, lab in zip(batch[b"data"], batch[b"labels"]):
            if lab != label:
                continue
            img = np.asarray(row, dtype=np.uint8).reshape(3, 32, 32).transpose(1, 2, 0)
            Image.fromarray(img).save(args.out / f"{args.label}_{written:04d}.png")
            written += 1
            if written >= args.count:
                return


if __name__ == "__main__":
    main()
