"""Build the conformance test pair: a real photograph turned into a
rectified stereo pair of two constant-disparity bands (8 px and 12 px,
split at the middle row), with exact ground truth and a calib file the
matcher can consume.

Usage: python3 scripts/make_testdata.py OUTDIR
"""

import os
import sys

import numpy as np
from skimage import data


def main(outdir):
    os.makedirs(outdir, exist_ok=True)
    photo = data.camera().astype(np.float64)  # 512x512 grayscale photograph
    y0, x0, size = 240, 160, 256
    d_top, d_bot = 8, 12
    split = size // 2
    left = photo[y0:y0 + size, x0:x0 + size]
    right = np.empty_like(left)
    gt = np.empty((size, size))
    for e in range(size):
        d = d_top if e < split else d_bot
        # a point at left column l sits at right column l - d
        right[e] = photo[y0 + e, x0 + d:x0 + d + size]
        gt[e] = d
        gt[e, :d] = np.inf  # no right-eye counterpart at the left border

    def write_pgm(img, path):
        with open(path, "wb") as f:
            f.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
            f.write(np.clip(np.rint(img), 0, 255).astype(np.uint8).tobytes())

    write_pgm(left, os.path.join(outdir, "left.pgm"))
    write_pgm(right, os.path.join(outdir, "right.pgm"))

    with open(os.path.join(outdir, "gt.pfm"), "wb") as f:
        f.write(f"Pf\n{size} {size}\n-1.0\n".encode())
        f.write(gt[::-1].astype("<f4").tobytes())

    with open(os.path.join(outdir, "calib.txt"), "w") as f:
        f.write("cam0=[1000 0 128; 0 1000 128; 0 0 1]\n")
        f.write("baseline=50\n")
        f.write(f"width={size}\nheight={size}\n")
        f.write(f"ndisp={d_bot + 4}\ndoffs=0\n")
    print(outdir)


if __name__ == "__main__":
    main(sys.argv[1])
