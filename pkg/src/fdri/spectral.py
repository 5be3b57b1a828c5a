"""Fourier-domain regularization filter and FFT-based circulant operators.

The quadratic criterion ``E(x) = x^T C x`` is defined by a circulant matrix
``C`` that is diagonal in the 2D DFT basis.  Everything here works with the
diagonal ``gamma = |C_hat|^(-1/2)`` and applies powers of ``C`` through FFTs.

Note that the gradient transfer functions ``sin(omega)`` vanish at the Nyquist
frequency, so for ``mu = 0`` the filter there is bounded only by ``eps``.
Mixing in the ``|omega|`` penalty (``mu > 0``, default 0.5) removes that
degeneracy.
"""
import os
from dataclasses import dataclass

import numpy as np
import scipy.fft

from ._validation import ConsistencyError, InvalidArgumentError, check_image

DEFAULT_EPS = 1e-5
DEFAULT_MU = 0.5
IMAG_RTOL = 1e-6


def fft_workers():
    """Thread count for FFTs: ``FDRI_THREADS`` if set, else all cores."""
    env = os.environ.get("FDRI_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _axis_frequencies(n):
    j = np.arange(n)
    j = np.where(j <= n // 2, j, j - n)
    return 2.0 * np.pi * j / n


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Angular frequencies (radians/pixel) of every DFT index of an image.

    ``omega_x`` and ``omega_y`` have shape ``(height, width)`` and use the
    unshifted DFT ordering; indices above N/2 alias to negative frequencies
    and the Nyquist index maps to ``+pi``.
    """

    width: int
    height: int
    omega_x: np.ndarray
    omega_y: np.ndarray

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def omegas(self):
        """``(n, 2)`` array of ``(omega_x, omega_y)`` in row-major order."""
        return np.stack([self.omega_x.ravel(), self.omega_y.ravel()], axis=1)

    def negate_index(self):
        """Flat index of ``-omega`` for each flat index (central symmetry map)."""
        iy = (-np.arange(self.height)) % self.height
        ix = (-np.arange(self.width)) % self.width
        return (iy[:, None] * self.width + ix[None, :]).ravel()


def freq_grid(width, height):
    """Build the frequency grid for a ``height x width`` image."""
    if int(width) != width or int(height) != height or width < 1 or height < 1:
        raise InvalidArgumentError(
            f"grid dimensions must be positive integers, got {width}x{height}")
    width, height = int(width), int(height)
    wy, wx = np.meshgrid(_axis_frequencies(height), _axis_frequencies(width),
                         indexing="ij")
    wx.setflags(write=False)
    wy.setflags(write=False)
    return FrequencyGrid(width, height, wx, wy)


@dataclass(frozen=True, eq=False)
class SpectralFilter:
    grid: FrequencyGrid
    gamma: np.ndarray
    mu: float
    eps: float

    @property
    def shape(self):
        return self.grid.shape


def gamma_values(omega_x, omega_y, mu=DEFAULT_MU, eps=DEFAULT_EPS):
    """Evaluate the composite filter weight at the given frequencies."""
    wx = np.asarray(omega_x, dtype=np.float64)
    wy = np.asarray(omega_y, dtype=np.float64)
    grad = np.sin(wx) ** 2 + np.sin(wy) ** 2
    highpass = (wx ** 2 + wy ** 2) / (2.0 * np.pi ** 2)
    return 1.0 / np.sqrt((1.0 - mu) ** 2 * grad + mu ** 2 * highpass + eps)


def build_gamma(grid, mu=DEFAULT_MU, eps=DEFAULT_EPS):
    """Build the regularization filter for ``grid``.

    Parameters
    ----------
    grid : FrequencyGrid
    mu : float
        Trade-off in [0, 1] between the gradient terms (``mu = 0``) and the
        ``|omega|`` high-frequency penalty (``mu = 1``).
    eps : float
        Positive floor added under the square root.

    Returns
    -------
    SpectralFilter
    """
    mu = float(mu)
    eps = float(eps)
    if not 0.0 <= mu <= 1.0:
        raise InvalidArgumentError(f"mu must lie in [0, 1], got {mu}")
    if not eps > 0.0 or not np.isfinite(eps):
        raise InvalidArgumentError(f"eps must be positive and finite, got {eps}")
    gamma = gamma_values(grid.omega_x, grid.omega_y, mu, eps)
    gamma.setflags(write=False)
    return SpectralFilter(grid, gamma, mu, eps)


def _multiplier(filt, power):
    if power not in (-2, -1, 1, 2):
        raise InvalidArgumentError(f"power must be one of -2, -1, 1, 2, got {power}")
    # C_hat = gamma^-2, so C^(p/2) has Fourier weights gamma^(-p)
    return filt.gamma ** (-power)


def apply_circulant(filt, image, power):
    """Apply ``C^(power/2)`` to an image (or a stack of images) via 2D FFT.

    ``power=-2`` applies ``C^-1`` (Fourier weights ``gamma**2``), ``power=-1``
    applies the filter itself (``gamma``), ``power=1`` and ``power=2`` apply
    ``C^(1/2)`` and ``C``.  Input may have shape ``(height, width)`` or
    ``(batch, height, width)``.

    The imaginary residue of the inverse FFT is checked against
    ``1e-6 * ||output||`` and then dropped.
    """
    arr = np.asarray(image)
    if arr.ndim == 2:
        arr = check_image(arr, shape=filt.shape)
    elif arr.ndim == 3 and arr.shape[1:] == filt.shape:
        arr = arr.astype(np.float64, copy=False)
    else:
        raise InvalidArgumentError(
            f"image shape {arr.shape} does not match filter grid {filt.shape}")
    weights = _multiplier(filt, power)
    workers = fft_workers()
    spec = scipy.fft.fft2(arr, axes=(-2, -1), workers=workers)
    spec *= weights
    out = scipy.fft.ifft2(spec, axes=(-2, -1), workers=workers, overwrite_x=True)
    real_norm = np.sqrt(np.sum(out.real ** 2, axis=(-2, -1)))
    imag_norm = np.sqrt(np.sum(out.imag ** 2, axis=(-2, -1)))
    if np.any(imag_norm > IMAG_RTOL * real_norm + 1e-300):
        worst = float(np.max(imag_norm / np.maximum(real_norm, 1e-300)))
        raise ConsistencyError(
            f"circulant output has imaginary residue {worst:.3g} (relative); "
            "filter is not centrally symmetric")
    return np.ascontiguousarray(out.real)


def criterion(filt, image):
    """Quadratic criterion ``x^T C x`` evaluated in the Fourier domain."""
    x = check_image(image, shape=filt.shape)
    xhat = scipy.fft.fft2(x, norm="ortho", workers=fft_workers())
    return float(np.sum(filt.gamma ** -2 * np.abs(xhat) ** 2))
