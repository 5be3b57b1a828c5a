"""Grayscale image I/O (binary/ASCII PGM, optional PNG) and the bundled test set."""
import pathlib
from importlib import resources

import numpy as np

from ._validation import InvalidArgumentError

IMAGE_SUFFIXES = (".pgm", ".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp")


def _pgm_tokens(data):
    """Yield (token, end_offset) for the PGM header, skipping comments."""
    pos = 0
    while True:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InvalidArgumentError("truncated PGM header")
        yield data[start:pos], pos


def read_pgm(path, normalize=True):
    """Read a P5 (binary) or P2 (ASCII) PGM file.

    With ``normalize`` the result is float64 in [0, 1]; otherwise the raw
    integer samples are returned.
    """
    data = pathlib.Path(path).read_bytes()
    tokens = _pgm_tokens(data)
    magic, _ = next(tokens)
    if magic not in (b"P5", b"P2"):
        raise InvalidArgumentError(f"{path}: not a PGM file (magic {magic!r})")
    width = int(next(tokens)[0])
    height = int(next(tokens)[0])
    maxval_tok, end = next(tokens)
    maxval = int(maxval_tok)
    if not 0 < maxval < 65536:
        raise InvalidArgumentError(f"{path}: invalid maxval {maxval}")
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        start = end + 1
        count = width * height
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=start)
    else:
        raw = np.array(data[end:].split(), dtype=np.int64)[:width * height]
    img = raw.reshape(height, width)
    if not normalize:
        return img.astype(np.uint16 if maxval > 255 else np.uint8)
    return img.astype(np.float64) / maxval


def write_pgm(path, image, bits=8):
    """Write a [0, 1] float image (clipped) or an integer image as binary PGM."""
    img = np.asarray(image)
    if bits not in (8, 16):
        raise InvalidArgumentError("bits must be 8 or 16")
    maxval = 255 if bits == 8 else 65535
    if np.issubdtype(img.dtype, np.integer):
        samples = np.clip(img, 0, maxval)
    else:
        samples = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    dtype = np.dtype("u1") if bits == 8 else np.dtype(">u2")
    samples = samples.astype(dtype)
    h, w = samples.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        fh.write(samples.tobytes())


def to_grayscale(image):
    """Convert an array to float64 grayscale in [0, 1]."""
    img = np.asarray(image)
    if img.dtype == bool:
        img = img.astype(np.float64)
    elif np.issubdtype(img.dtype, np.integer):
        img = img.astype(np.float64) / np.iinfo(img.dtype).max
    else:
        img = img.astype(np.float64)
    if img.ndim == 3:
        img = img[..., :3] @ np.array([0.2125, 0.7154, 0.0721])
    if img.ndim != 2:
        raise InvalidArgumentError(f"cannot interpret array of shape {img.shape} as an image")
    return img


def resize(image, shape):
    """Bilinear resize of a 2D float image to ``(height, width)``."""
    from PIL import Image

    img = np.asarray(image, dtype=np.float32)
    if img.shape == tuple(shape):
        return img.astype(np.float64)
    out = Image.fromarray(img, mode="F").resize((shape[1], shape[0]), Image.BILINEAR)
    return np.asarray(out, dtype=np.float64)


def prepare_image(image, shape):
    """Grayscale [0, 1] image resized to ``shape``."""
    return resize(to_grayscale(image), shape)


def read_image(path):
    """Read a grayscale image as float64 in [0, 1]."""
    path = pathlib.Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    from PIL import Image

    with Image.open(path) as im:
        return to_grayscale(np.asarray(im))


def list_images(directory):
    directory = pathlib.Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"image directory not found: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def bundled_image_names():
    root = resources.files("fdri") / "data" / "images"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".pgm"))


def load_bundled_images(shape=None):
    """Bundled natural test images as ``{name: image}`` in sorted name order.

    Images are stored at 256x256; pass ``shape`` to resize them.
    """
    root = resources.files("fdri") / "data" / "images"
    out = {}
    for name in bundled_image_names():
        with resources.as_file(root / f"{name}.pgm") as p:
            img = read_pgm(p)
        out[name] = img if shape is None else resize(img, shape)
    return out
