"""Independent reference computations used only by the tests.

Nothing here calls into the FFT-based code paths of the package; the
package functions under test are passed in by the caller.
"""
import math

import numpy as np


def aliased_frequency(j, n):
    jj = j if j <= n // 2 else j - n
    return 2.0 * math.pi * jj / n


def gamma_direct(wx, wy, mu, eps):
    s = (1 - mu) ** 2 * (math.sin(wx) ** 2 + math.sin(wy) ** 2)
    s += mu ** 2 * (wx ** 2 + wy ** 2) / (2 * math.pi ** 2)
    return 1.0 / math.sqrt(s + eps)


def dense_circulant(weights_fn, height, width):
    """Dense ``n x n`` circulant with Fourier weights ``weights_fn(wx, wy)``.

    The convolution kernel is synthesized by an explicit cosine sum over all
    frequencies, then laid out as ``C[p, q] = c[(yp - yq) % H, (xp - xq) % W]``.
    """
    w = np.array([[weights_fn(aliased_frequency(jx, width), aliased_frequency(jy, height))
                   for jx in range(width)] for jy in range(height)])
    wy = np.array([aliased_frequency(j, height) for j in range(height)])
    wx = np.array([aliased_frequency(j, width) for j in range(width)])
    n = height * width
    kernel = np.empty((height, width))
    for dy in range(height):
        for dx in range(width):
            phase = wy[:, None] * dy + wx[None, :] * dx
            kernel[dy, dx] = np.sum(w * np.cos(phase)) / n
    ys, xs = np.divmod(np.arange(n), width)
    return kernel[(ys[:, None] - ys[None, :]) % height, (xs[:, None] - xs[None, :]) % width]


def dct_basis_direct(u, v, width, height):
    out = np.empty((height, width))
    cu = math.sqrt(1 / width) if u == 0 else math.sqrt(2 / width)
    cv = math.sqrt(1 / height) if v == 0 else math.sqrt(2 / height)
    for y in range(height):
        for x in range(width):
            out[y, x] = (cv * math.cos(math.pi * (2 * y + 1) * v / (2 * height))
                         * cu * math.cos(math.pi * (2 * x + 1) * u / (2 * width)))
    return out


def null_space(M, rtol=1e-10):
    """Orthonormal basis (columns) of the null space of ``M`` via SVD."""
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > rtol * s[0]))
    return vt[rank:].T


def sign_change_count(row):
    return sum(1 for a, b in zip(row[:-1], row[1:]) if (a > 0) != (b > 0))


def random_pm1(rng, k, n):
    return rng.choice([-1.0, 1.0], size=(k, n))


def ensemble_spectrum_deviation(pattern_fn, wavelet_fn, params, shape=(64, 64), count=200,
                                block=4):
    """Worst relative deviation of the averaged pattern power spectrum from
    ``|FT(Re g)|^2`` over ``block x block`` frequency cells with significant power.

    ``pattern_fn(params, seed, w, h)`` draws one pattern, ``wavelet_fn(params,
    w, h)`` returns the centred complex wavelet.  The overall scale is fitted.
    """
    h, w = shape
    power = np.zeros(shape)
    for seed in range(count):
        power += np.abs(np.fft.fft2(pattern_fn(params, seed, w, h))) ** 2
    power /= count
    kernel = np.fft.ifftshift(wavelet_fn(params, w, h).real)
    expected = np.abs(np.fft.fft2(kernel)) ** 2
    significant = expected > 0.01 * expected.max()
    scale = power[significant].sum() / expected[significant].sum()
    worst = 0.0
    for by in range(0, h, block):
        for bx in range(0, w, block):
            m = significant[by:by + block, bx:bx + block]
            if not m.any():
                continue
            e = expected[by:by + block, bx:bx + block][m].sum() * scale
            p = power[by:by + block, bx:bx + block][m].sum()
            worst = max(worst, abs(p - e) / e)
    return worst
