"""Regenerate the bundled grayscale test images from scikit-image's sample data.

Each image is center-cropped to a square, converted to grayscale, resized to
256x256 with bilinear interpolation and written as an 8-bit binary PGM.
"""
import pathlib

import numpy as np
import skimage.data
from PIL import Image
from skimage.color import rgb2gray

NAMES = [
    "camera", "astronaut", "coffee", "coins", "moon", "rocket",
    "chelsea", "clock", "immunohistochemistry", "hubble_deep_field",
    "retina", "cell",
]
OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "fdri" / "data" / "images"


def main(size=256):
    OUT.mkdir(parents=True, exist_ok=True)
    for name in NAMES:
        img = getattr(skimage.data, name)()
        if img.ndim == 3:
            img = rgb2gray(img[..., :3])
        else:
            img = img.astype(float) / 255.0
        h, w = img.shape
        s = min(h, w)
        top, left = (h - s) // 2, (w - s) // 2
        img = img[top:top + s, left:left + s].astype(np.float32)
        img = np.asarray(Image.fromarray(img, mode="F").resize((size, size), Image.BILINEAR))
        img8 = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
        path = OUT / f"{name}.pgm"
        with open(path, "wb") as fh:
            fh.write(b"P5\n%d %d\n255\n" % (size, size))
            fh.write(img8.tobytes())
        print(path)


if __name__ == "__main__":
    main()
