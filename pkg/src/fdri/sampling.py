"""Sampling-pattern generation, database-driven selection and binarization.

Three protocols are supported:

* ``dct`` -- orthonormal 2D DCT-II basis functions,
* ``walsh-hadamard`` -- separable products of sequency-ordered Walsh functions,
* ``morlet-noise`` -- real parts of Morlet wavelets circularly convolved with
  seeded white Gaussian noise.

Patterns are ``(height, width)`` float arrays.  Binarized patterns take values
in {-1, +1}, which models differential detection of the on/off mirror states.
"""
import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft
import scipy.linalg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import (InvalidArgumentError, check_positive_int,
                          is_power_of_two)
from .images import prepare_image

PROTOCOLS = ("dct", "walsh-hadamard", "morlet-noise")
_ALIASES = {"walsh": "walsh-hadamard", "hadamard": "walsh-hadamard",
            "morlet": "morlet-noise"}


def normalize_protocol(protocol):
    protocol = _ALIASES.get(protocol, protocol)
    if protocol not in PROTOCOLS:
        raise InvalidArgumentError(
            f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    return protocol


def _resolution(resolution):
    if np.ndim(resolution) == 0:
        n = check_positive_int(resolution, "resolution")
        return n, n
    h, w = resolution
    return check_positive_int(h, "height"), check_positive_int(w, "width")


def n_from_ratio(ratio, n_pixels):
    """Number of patterns for a compression ratio, ``floor(ratio * n)``."""
    if not 0.0 < ratio <= 1.0:
        raise InvalidArgumentError(f"compression ratio must lie in (0, 1], got {ratio}")
    return max(1, int(np.floor(ratio * n_pixels + 1e-9)))


@dataclass(frozen=True, eq=False)
class PatternSet:
    """Ordered stack of sampling patterns, most significant first.

    ``patterns`` has shape ``(k, height, width)``.  ``ids`` identifies each
    pattern: ``(u, v)`` for DCT, ``(s_x, s_y)`` for Walsh-Hadamard and a dict of
    Morlet parameters for morlet-noise.
    """

    protocol: str
    patterns: np.ndarray
    binarized: bool = False
    selection_meta: dict = field(default_factory=dict)
    seed: int = 0
    ids: tuple = ()

    def __len__(self):
        return self.patterns.shape[0]

    @property
    def shape(self):
        return self.patterns.shape[1:]


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    """``k x n`` matrix whose rows are flattened patterns."""

    entries: np.ndarray
    shape: tuple
    provenance: dict = field(default_factory=dict)

    @property
    def k(self):
        return self.entries.shape[0]

    @property
    def n(self):
        return self.entries.shape[1]

    @cached_property
    def _digest(self):
        return matrix_digest(self.entries)

    def digest(self):
        return self._digest


def matrix_digest(entries):
    """SHA-256 of a matrix' shape, dtype and little-endian payload."""
    arr = np.ascontiguousarray(entries)
    h = hashlib.sha256()
    h.update(f"{arr.shape}|{arr.dtype.str}".encode())
    h.update(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class MorletParams:
    sigma: float
    n_p: float
    theta: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidArgumentError(f"sigma must be positive, got {self.sigma}")
        if not self.n_p > 0:
            raise InvalidArgumentError(f"n_p must be positive, got {self.n_p}")


# ---------------------------------------------------------------- DCT

def dct_1d(u, n):
    """Orthonormal DCT-II basis vector of frequency ``u`` and length ``n``."""
    x = np.arange(n)
    scale = np.sqrt(1.0 / n) if u == 0 else np.sqrt(2.0 / n)
    return scale * np.cos(np.pi * (2 * x + 1) * u / (2 * n))


def dct_basis_function(u, v, width, height):
    """2D DCT-II basis function; ``u`` varies along x (width), ``v`` along y."""
    if not (0 <= u < width and 0 <= v < height):
        raise InvalidArgumentError(
            f"DCT index ({u}, {v}) out of range for {width}x{height}")
    return np.outer(dct_1d(v, height), dct_1d(u, width))


def dct_zigzag_order(width, height):
    """JPEG-style zigzag scan of (u, v) index pairs."""
    order = []
    for d in range(width + height - 1):
        us = [u for u in range(width) if 0 <= d - u < height]
        if d % 2 == 1:
            us = us[::-1]
        order.extend((u, d - u) for u in us)
    return order


# ---------------------------------------------------------------- Walsh

def sign_changes(row):
    s = np.sign(row)
    return int(np.count_nonzero(s[1:] != s[:-1]))


def walsh_signs(n):
    """Sequency-ordered +-1 Walsh matrix; row ``s`` has exactly ``s`` sign changes."""
    if not is_power_of_two(n):
        raise InvalidArgumentError(f"Walsh functions need a power-of-two size, got {n}")
    h = scipy.linalg.hadamard(n).astype(np.float64)
    order = np.argsort([sign_changes(r) for r in h], kind="stable")
    return h[order]


def walsh_matrix(n):
    """Sequency-ordered Walsh matrix with orthonormal rows (``n`` a power of 2)."""
    return walsh_signs(n) / np.sqrt(n)


def _walsh_2d(signs_y, signs_x, sx, sy):
    # scale once so every entry is exactly +-fl(1/sqrt(n))
    n = signs_y.shape[0] * signs_x.shape[0]
    return np.outer(signs_y[sy], signs_x[sx]) * (1.0 / np.sqrt(n))


def walsh_default_order(width, height):
    """Ascending sequency sum, ties by ascending ``s_x``."""
    pairs = [(sx, sy) for sy in range(height) for sx in range(width)]
    return sorted(pairs, key=lambda p: (p[0] + p[1], p[0]))


def walsh_hadamard_function(s, width, height):
    """2D Walsh-Hadamard function with values +-1/sqrt(n).

    ``s`` is either a sequency pair ``(s_x, s_y)`` or an integer rank into the
    default low-sequency ordering (see :func:`walsh_default_order`).
    """
    if not (is_power_of_two(width) and is_power_of_two(height)):
        raise InvalidArgumentError(
            f"Walsh-Hadamard patterns need power-of-two sizes, got {width}x{height}")
    if np.ndim(s) == 0:
        if not 0 <= s < width * height:
            raise InvalidArgumentError(f"Walsh index {s} out of range")
        sx, sy = walsh_default_order(width, height)[int(s)]
    else:
        sx, sy = s
        if not (0 <= sx < width and 0 <= sy < height):
            raise InvalidArgumentError(f"Walsh index {s} out of range")
    return _walsh_2d(walsh_signs(height), walsh_signs(width), sx, sy)


# ---------------------------------------------------------------- Morlet

def morlet_wavelet(params, width, height):
    """Complex Morlet wavelet centred at pixel ``(height // 2, width // 2)``.

    The offset ``kappa`` and normalization are computed on the discrete grid
    so that the result has zero mean and unit l2 norm.
    """
    x = np.arange(width) - width // 2
    y = np.arange(height) - height // 2
    yy, xx = np.meshgrid(y, x, indexing="ij")
    envelope = np.exp(-(xx ** 2 + yy ** 2) / (2.0 * params.sigma ** 2))
    k = np.pi * params.n_p / (2.0 * params.sigma)
    carrier = np.exp(1j * k * (xx * np.cos(params.theta) + yy * np.sin(params.theta)))
    kappa = np.sum(envelope * carrier) / np.sum(envelope)
    g = envelope * (carrier - kappa)
    return g / np.linalg.norm(g)


def morlet_kappa(params, width, height):
    """Zero-mean offset of the discrete wavelet (for diagnostics)."""
    x = np.arange(width) - width // 2
    y = np.arange(height) - height // 2
    yy, xx = np.meshgrid(y, x, indexing="ij")
    envelope = np.exp(-(xx ** 2 + yy ** 2) / (2.0 * params.sigma ** 2))
    k = np.pi * params.n_p / (2.0 * params.sigma)
    carrier = np.exp(1j * k * (xx * np.cos(params.theta) + yy * np.sin(params.theta)))
    return complex(np.sum(envelope * carrier) / np.sum(envelope))


def _standardize(p):
    p = p - p.mean()
    norm = np.linalg.norm(p)
    return p / norm if norm > 0 else p


def morlet_noise_pattern(params, seed, width, height):
    """Real part of a Morlet wavelet circularly convolved with white noise.

    The noise is drawn from ``numpy.random.default_rng(seed)``; the result is
    standardized to zero mean and unit l2 norm.
    """
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((height, width))
    kernel = np.fft.ifftshift(morlet_wavelet(params, width, height).real)
    pattern = scipy.fft.irfft2(scipy.fft.rfft2(kernel) * scipy.fft.rfft2(noise),
                               s=(height, width))
    return _standardize(pattern)


def sigma_schedule(omega, sigma_min, sigma_max, omega_min, omega_max, theta=0.0):
    """Envelope width and period count for a target spatial frequency.

    ``sigma`` falls linearly from ``sigma_max`` at ``omega_min`` to ``sigma_min``
    at ``omega_max``, and ``n_p = 2 * sigma * omega``.
    """
    if not sigma_min < sigma_max:
        raise InvalidArgumentError("sigma_min must be smaller than sigma_max")
    if not omega_min <= omega <= omega_max:
        raise InvalidArgumentError(
            f"omega {omega} outside [{omega_min}, {omega_max}]")
    if omega_max == omega_min:
        sigma = float(sigma_max)
    else:
        sigma = sigma_min + (sigma_max - sigma_min) * (omega_max - omega) / (omega_max - omega_min)
    return MorletParams(sigma=float(sigma), n_p=float(2.0 * sigma * omega), theta=float(theta))


def _pattern_seed(seed, i):
    return int(np.random.SeedSequence([int(seed), int(i)]).generate_state(1)[0])


def radial_spectrum_band(images, floor=0.01):
    """Significant radial-frequency band of a database's mean DFT magnitude.

    Returns ``(radii, weights, lo, hi)`` where ``radii`` are bin centres in
    radians/pixel, ``weights`` the total magnitude per bin (DC excluded) and
    ``[lo, hi]`` the range of bins whose mean magnitude is at least ``floor``
    times the largest non-DC bin mean.
    """
    stack = np.asarray(images, dtype=np.float64)
    h, w = stack.shape[1:]
    mag = np.mean(np.abs(scipy.fft.fft2(stack, axes=(-2, -1))), axis=0)
    grid_y, grid_x = np.meshgrid(2 * np.pi * np.fft.fftfreq(h),
                                 2 * np.pi * np.fft.fftfreq(w), indexing="ij")
    radius = np.hypot(grid_x, grid_y)
    step = 2 * np.pi / min(h, w)
    bins = np.rint(radius / step).astype(int)
    nbins = bins.max() + 1
    totals = np.bincount(bins.ravel(), weights=mag.ravel(), minlength=nbins)
    counts = np.bincount(bins.ravel(), minlength=nbins)
    means = np.where(counts > 0, totals / np.maximum(counts, 1), 0.0)
    totals[0] = means[0] = 0.0
    keep = np.nonzero(means >= floor * means.max())[0]
    radii = np.arange(nbins) * step
    return radii, totals, radii[keep.min()], radii[keep.max()]


def _morlet_frequencies(k, db, shape):
    """Target frequencies (in units of pi rad/pixel), ascending."""
    h, w = shape
    if db is None:
        lo, hi = 2.0 / min(h, w), 0.5
        return np.linspace(lo, hi, k) if k > 1 else np.array([lo]), {"rule": "uniform-default"}
    radii, weights, lo_r, hi_r = radial_spectrum_band(db)
    lo, hi = lo_r / np.pi, min(hi_r / np.pi, 1.0)
    in_band = (radii / np.pi >= lo) & (radii / np.pi <= hi)
    om = radii[in_band] / np.pi
    cdf = np.cumsum(weights[in_band])
    cdf /= cdf[-1]
    q = (np.arange(k) + 0.5) / k
    # piecewise-linear inverse CDF between bin centres
    cdf_pts = np.concatenate([[0.0], cdf])
    om_pts = np.concatenate([[om[0]], om])
    omegas = np.clip(np.interp(q, cdf_pts, om_pts), lo, hi)
    return omegas, {"rule": "database", "omega_min": float(lo), "omega_max": float(hi)}


def _db_stack(image_db, shape):
    if image_db is None or len(image_db) == 0:
        return None
    return np.stack([prepare_image(img, shape) for img in image_db])


def _db_digest(stack):
    if stack is None:
        return None
    return hashlib.sha256(np.ascontiguousarray(stack).tobytes()).hexdigest()


def select_patterns(protocol, k, image_db, resolution, seed=0, sigma_min=2.0,
                    sigma_max=None, n_orientations=8):
    """Select ``k`` sampling patterns ranked by relevance to an image database.

    For ``dct`` and ``walsh-hadamard`` every database image is transformed and
    basis functions are ranked by mean absolute coefficient (ties broken by
    ascending ``(u + v, u)``).  For ``morlet-noise`` target frequencies are
    drawn from the database's mean radial spectrum, orientations cycle over
    ``[0, pi)`` and every pattern gets its own noise realization.  Without a
    database a fixed low-frequency ordering is used.
    """
    protocol = normalize_protocol(protocol)
    h, w = _resolution(resolution)
    n = h * w
    k = check_positive_int(k, "k")
    if protocol != "morlet-noise" and k > n:
        raise InvalidArgumentError(f"k={k} exceeds the basis size n={n}")
    if protocol == "walsh-hadamard" and not (is_power_of_two(h) and is_power_of_two(w)):
        raise InvalidArgumentError(
            f"Walsh-Hadamard patterns need power-of-two sizes, got {w}x{h}")
    db = _db_stack(image_db, (h, w))
    meta = {"resolution": [h, w], "db_digest": _db_digest(db),
            "n_images": 0 if db is None else int(db.shape[0])}

    if protocol == "dct":
        if db is None:
            ids = dct_zigzag_order(w, h)[:k]
            meta["rule"] = "zigzag"
        else:
            score = np.mean(np.abs(scipy.fft.dctn(db, axes=(-2, -1), norm="ortho")), axis=0)
            vv, uu = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
            order = np.lexsort((uu.ravel(), (uu + vv).ravel(), -score.ravel()))[:k]
            ids = [(int(uu.ravel()[i]), int(vv.ravel()[i])) for i in order]
            meta["rule"] = "mean-abs-coefficient"
        basis_x = np.stack([dct_1d(u, w) for u in range(w)])
        basis_y = np.stack([dct_1d(v, h) for v in range(h)])
        patterns = np.stack([np.outer(basis_y[v], basis_x[u]) for u, v in ids])
        return PatternSet(protocol, patterns, False, meta, int(seed), tuple(ids))

    if protocol == "walsh-hadamard":
        sgn_x, sgn_y = walsh_signs(w), walsh_signs(h)
        wx, wy = sgn_x / np.sqrt(w), sgn_y / np.sqrt(h)
        if db is None:
            ids = walsh_default_order(w, h)[:k]
            meta["rule"] = "sequency-sum"
        else:
            coeffs = np.einsum("ij,bjk,lk->bil", wy, db, wx)
            score = np.mean(np.abs(coeffs), axis=0)
            sy, sx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
            order = np.lexsort((sx.ravel(), (sx + sy).ravel(), -score.ravel()))[:k]
            ids = [(int(sx.ravel()[i]), int(sy.ravel()[i])) for i in order]
            meta["rule"] = "mean-abs-coefficient"
        patterns = np.stack([_walsh_2d(sgn_y, sgn_x, sx, sy) for sx, sy in ids])
        return PatternSet(protocol, patterns, False, meta, int(seed), tuple(ids))

    if sigma_max is None:
        sigma_max = min(h, w) / 4.0
    omegas, band = _morlet_frequencies(k, db, (h, w))
    meta.update(band)
    meta.update(sigma_min=float(sigma_min), sigma_max=float(sigma_max),
                n_orientations=int(n_orientations))
    lo, hi = float(omegas.min()), float(omegas.max())
    if "omega_min" in band:
        lo, hi = band["omega_min"], band["omega_max"]
    patterns, ids = [], []
    for i, om in enumerate(omegas):
        theta = np.pi * (i % n_orientations) / n_orientations
        params = sigma_schedule(float(om), sigma_min, sigma_max, lo, hi, theta)
        pseed = _pattern_seed(seed, i)
        patterns.append(morlet_noise_pattern(params, pseed, w, h))
        ids.append({"sigma": params.sigma, "n_p": params.n_p,
                    "theta": params.theta, "seed": pseed})
    return PatternSet(protocol, np.stack(patterns), False, meta, int(seed), tuple(ids))


def binarize(pattern_set):
    """Threshold every pattern at its own mean: ``>= mean`` -> +1, else -1."""
    if pattern_set.binarized:
        raise InvalidArgumentError("pattern set is already binarized")
    p = pattern_set.patterns
    means = p.mean(axis=(1, 2), keepdims=True)
    binary = np.where(p >= means, 1.0, -1.0)
    return PatternSet(pattern_set.protocol, binary, True,
                      dict(pattern_set.selection_meta), pattern_set.seed, pattern_set.ids)


def assemble_measurement_matrix(pattern_set, include_white=False, dtype=np.float64):
    """Stack flattened patterns as rows; optionally prepend an all-ones row."""
    if len(pattern_set) == 0:
        raise InvalidArgumentError("cannot assemble a measurement matrix from an empty set")
    shape = tuple(int(s) for s in pattern_set.shape)
    rows = pattern_set.patterns.reshape(len(pattern_set), -1)
    if include_white:
        rows = np.vstack([np.ones((1, rows.shape[1])), rows])
    entries = np.ascontiguousarray(rows, dtype=dtype)
    entries.setflags(write=False)
    provenance = {
        "protocol": pattern_set.protocol,
        "binarized": bool(pattern_set.binarized),
        "seed": int(pattern_set.seed),
        "resolution": list(shape),
        "include_white": bool(include_white),
        "selection": pattern_set.selection_meta,
    }
    return MeasurementMatrix(entries, shape, provenance)


def as_measurement_matrix(M, shape=None):
    """Coerce an array (with ``shape``) or a MeasurementMatrix."""
    if isinstance(M, MeasurementMatrix):
        return M
    arr = np.asarray(M)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"measurement matrix must be 2D, got {arr.shape}")
    if shape is None:
        side = int(round(np.sqrt(arr.shape[1])))
        if side * side != arr.shape[1]:
            raise InvalidArgumentError(
                "image_shape is required for non-square pixel counts")
        shape = (side, side)
    shape = tuple(int(s) for s in shape)
    if shape[0] * shape[1] != arr.shape[1]:
        raise InvalidArgumentError(
            f"image shape {shape} does not match {arr.shape[1]} matrix columns")
    return MeasurementMatrix(arr, shape, {})


class PatternSelector(TransformerMixin, BaseEstimator):
    """Choose sampling patterns from an image database, sklearn-style.

    ``fit`` takes a sequence of images (or ``None`` for the database-free
    ordering) and stores ``pattern_set_`` and ``measurement_matrix_``.
    ``transform`` simulates noiseless single-pixel measurements of images.

    Parameters
    ----------
    protocol : {'dct', 'walsh-hadamard', 'morlet-noise'}
    ratio : float
        Compression ratio ``k / n``; ignored when ``n_patterns`` is set.
    n_patterns : int, optional
    resolution : int or (height, width)
    binarize : bool
    include_white : bool or None
        Prepend an all-ones row to the measurement matrix.  ``None`` enables it
        for morlet-noise only, whose zero-mean patterns never see the image mean.
    seed : int
    """

    def __init__(self, protocol="dct", ratio=0.03, n_patterns=None, resolution=128,
                 binarize=True, include_white=None, seed=0):
        self.protocol = protocol
        self.ratio = ratio
        self.n_patterns = n_patterns
        self.resolution = resolution
        self.binarize = binarize
        self.include_white = include_white
        self.seed = seed

    def fit(self, X=None, y=None):
        h, w = _resolution(self.resolution)
        k = self.n_patterns if self.n_patterns is not None else n_from_ratio(self.ratio, h * w)
        pset = select_patterns(self.protocol, k, X, (h, w), seed=self.seed)
        if self.binarize:
            pset = binarize(pset)
        self.pattern_set_ = pset
        white = self.include_white
        if white is None:
            white = pset.protocol == "morlet-noise"
        self.measurement_matrix_ = assemble_measurement_matrix(pset, white)
        self.n_patterns_ = self.measurement_matrix_.k
        return self

    def transform(self, X):
        check_is_fitted(self, "measurement_matrix_")
        M = self.measurement_matrix_
        images = np.asarray(X, dtype=np.float64)
        if images.ndim == 2 and images.shape == M.shape:
            images = images[None]
        if images.ndim == 3:
            images = images.reshape(images.shape[0], -1)
        if images.ndim != 2 or images.shape[1] != M.n:
            raise InvalidArgumentError(
                f"expected images of shape {M.shape} or rows of length {M.n}")
        return images @ M.entries.T
