"""Cut 32x32 RGB crops from scikit-image's sample photographs into a CIFAR-binary file.

Usage: python3 scripts/make_natural.py crates/core/tests/data/natural/test_batch.bin
"""
import sys

import numpy as np
from skimage import data, transform


def main(dst):
    rng = np.random.default_rng(7)
    records = []
    for label, name in enumerate(["astronaut", "coffee", "chelsea", "rocket"]):
        img = getattr(data, name)()[..., :3]
        img = transform.rescale(img, 0.25, channel_axis=-1, anti_aliasing=True)
        img = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
        h, w, _ = img.shape
        for _ in range(12):
            y = rng.integers(0, h - 32)
            x = rng.integers(0, w - 32)
            crop = img[y:y + 32, x:x + 32]
            records.append(bytes([label]) + crop.transpose(2, 0, 1).tobytes())
    with open(dst, "wb") as f:
        f.write(b"".join(records))
    print(len(records), "records")


if __name__ == "__main__":
    main(sys.argv[1])
