"""Image quality (PSNR), pattern spectrum diagnostics and reconstruction timing."""
import time
from dataclasses import asdict, dataclass

import numpy as np

from ._validation import InvalidArgumentError, check_image, check_positive_int


@dataclass(frozen=True)
class QualityReport:
    psnr_db: float
    mse: float
    peak: float

    def as_dict(self):
        return asdict(self)


# pixel differences at or below this are round-off of an exact reconstruction
EXACT_ATOL = 1e-9


def psnr(reference, test, peak=1.0, atol=0.0):
    """Peak signal-to-noise ratio in dB; identical images give ``+inf``.

    If every pixel differs by at most ``atol`` the images count as identical.
    """
    ref = check_image(reference, "reference")
    tst = check_image(test, "test", shape=ref.shape)
    if not peak > 0:
        raise InvalidArgumentError(f"peak must be positive, got {peak}")
    diff = ref - tst
    if atol > 0 and np.max(np.abs(diff)) <= atol:
        diff = np.zeros_like(diff)
    mse = float(np.mean(diff ** 2))
    value = np.inf if mse == 0 else 10.0 * np.log10(peak ** 2 / mse)
    return QualityReport(float(value), mse, float(peak))


def mean_spectrum(patterns):
    """Sum of per-pattern normalized Fourier magnitudes, DC shifted to the centre.

    ``patterns`` is a ``PatternSet`` or an array of shape ``(k, height, width)``.
    """
    stack = np.asarray(getattr(patterns, "patterns", patterns), dtype=np.float64)
    if stack.ndim == 2:
        stack = stack[None]
    if stack.ndim != 3 or stack.shape[0] == 0:
        raise InvalidArgumentError("mean_spectrum needs a non-empty stack of patterns")
    mag = np.abs(np.fft.fft2(stack, axes=(-2, -1)))
    norms = np.sqrt(np.sum(mag ** 2, axis=(-2, -1), keepdims=True))
    mag = mag / np.where(norms > 0, norms, 1.0)
    return np.fft.fftshift(mag.sum(axis=0))


def high_frequency_fraction(spectrum, cutoff=np.pi / 2):
    """Fraction of a centred spectrum map lying at radial frequency above ``cutoff``."""
    spec = np.asarray(spectrum, dtype=np.float64)
    h, w = spec.shape
    wy = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(h))
    wx = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(w))
    radius = np.hypot(wx[None, :], wy[:, None])
    total = spec.sum()
    return float(spec[radius > cutoff].sum() / total) if total > 0 else 0.0


@dataclass(frozen=True)
class BenchReport:
    iterations: int
    median_ms: float
    mean_ms: float
    p99_ms: float
    precision: str
    k: int
    n: int

    def as_dict(self):
        return asdict(self)


def bench_reconstruct(P, y, iterations=20, warmup=3):
    """Wall-clock statistics of :func:`fdri.reconstruction.reconstruct`."""
    from .reconstruction import reconstruct

    iterations = check_positive_int(iterations, "iterations")
    for _ in range(warmup):
        reconstruct(P, y)
    samples = np.empty(iterations)
    for i in range(iterations):
        t0 = time.perf_counter()
        reconstruct(P, y)
        samples[i] = time.perf_counter() - t0
    ms = samples * 1e3
    return BenchReport(iterations, float(np.median(ms)), float(np.mean(ms)),
                       float(np.percentile(ms, 99)), P.dtype.name, P.k, P.n)
