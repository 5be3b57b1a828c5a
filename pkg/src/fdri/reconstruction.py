"""Precomputation of reconstruction matrices and single mat-vec reconstruction.

Given a ``k x n`` measurement matrix ``M`` and the regularization filter, the
reconstruction matrix is

    P = C^-1 M^T (M C^-1 M^T)^-1,

so that ``x0 = P y`` minimizes ``x^T C x`` subject to ``M x = y``.  The same
matrix can be written as ``Gamma (M Gamma)^+`` with ``Gamma = C^(-1/2)``.

``ReconstructionMatrix.entries`` stores ``P`` as a C-contiguous (row-major)
``n x k`` array, which is the fastest layout for the per-frame mat-vec.
"""
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import InvalidArgumentError, RankDeficiencyError
from .sampling import as_measurement_matrix, matrix_digest
from .spectral import DEFAULT_EPS, DEFAULT_MU, apply_circulant, build_gamma, freq_grid

METHODS = ("fdri-direct", "fdri-svd", "pinv")
MAX_CONDITION = 1.0 / np.sqrt(np.finfo(np.float64).eps)
DEFAULT_MEMORY_BUDGET = 256 * 2 ** 20
# right-inverse tolerance recorded with every matrix, checked by `verify`
RIGHT_INVERSE_TOL = {"float64": 1e-8, "float32": 1e-3}


@dataclass(frozen=True, eq=False)
class ReconstructionMatrix:
    entries: np.ndarray
    shape: tuple
    method: str
    provenance: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def k(self):
        return self.entries.shape[1]

    @property
    def dtype(self):
        return self.entries.dtype

    def astype(self, dtype):
        dtype = np.dtype(dtype)
        entries = np.ascontiguousarray(self.entries, dtype=dtype)
        entries.setflags(write=False)
        prov = dict(self.provenance, precision=dtype.name)
        return ReconstructionMatrix(entries, self.shape, self.method, prov)


@dataclass
class PrecomputeReport:
    stage_seconds: dict
    condition: float
    solver: str
    regularization: float = 0.0

    def as_dict(self):
        return {"stage_seconds": dict(self.stage_seconds), "condition": self.condition,
                "solver": self.solver, "regularization": self.regularization}


def _rows_per_block(n, budget, bytes_per_pixel=48):
    return max(1, int(budget // (bytes_per_pixel * n)))


def _apply_rows(filt, rows, shape, power, budget, out=None):
    """Apply a circulant power to every row of ``rows`` (reshaped to images)."""
    k, n = rows.shape
    if out is None:
        out = np.empty((k, n), dtype=np.float64)
    step = _rows_per_block(n, budget)
    for i0 in range(0, k, step):
        blk = np.asarray(rows[i0:i0 + step], dtype=np.float64).reshape(-1, *shape)
        out[i0:i0 + step] = apply_circulant(filt, blk, power).reshape(-1, n)
    return out


def _check_filter(M, filt):
    if filt.shape != tuple(M.shape):
        raise InvalidArgumentError(
            f"filter grid {filt.shape} does not match pattern resolution {M.shape}")


def _provenance(M, method, filt, precision="float64"):
    prov = {"m_digest": M.digest(), "method": method, "precision": precision,
            "resolution": list(M.shape)}
    if filt is not None:
        prov.update(mu=filt.mu, eps=filt.eps)
    return prov


def scaled_condition(G):
    """2-norm condition number of ``D^-1/2 G D^-1/2`` with ``D = diag(G)``."""
    d = np.sqrt(np.abs(np.diag(G)))
    if np.any(d == 0):
        return np.inf
    return float(np.linalg.cond(G / d[:, None] / d[None, :]))


def solve_gram(G, rhs):
    """Solve ``G X = rhs`` for a symmetric positive-definite Gram matrix.

    The system is Jacobi-scaled, checked for conditioning and factorized by
    Cholesky.  If Cholesky fails on an acceptably conditioned matrix, a
    diagonal jitter of ``1e-10 * trace / k`` is added and a pivoted LU is used.
    Returns ``(X, condition, solver, jitter)``.
    """
    k = G.shape[0]
    d = np.sqrt(np.abs(np.diag(G)))
    if np.any(d == 0):
        raise RankDeficiencyError("Gram matrix has a zero diagonal entry (zero pattern?)",
                                  condition=np.inf)
    Gs = G / d[:, None] / d[None, :]
    cond = float(np.linalg.cond(Gs))
    if not cond <= MAX_CONDITION:
        raise RankDeficiencyError(
            f"Gram matrix is numerically singular: scaled condition {cond:.3g} exceeds "
            f"{MAX_CONDITION:.3g}; rows of M are (nearly) linearly dependent",
            condition=cond)
    rhs_s = rhs / d[:, None]
    try:
        factor = scipy.linalg.cho_factor(Gs, lower=True, check_finite=False)
        X = scipy.linalg.cho_solve(factor, rhs_s, check_finite=False)
        solver, jitter = "cholesky", 0.0
    except np.linalg.LinAlgError:
        jitter = 1e-10 * np.trace(Gs) / k
        lu = scipy.linalg.lu_factor(Gs + jitter * np.eye(k), check_finite=False)
        X = scipy.linalg.lu_solve(lu, rhs_s, check_finite=False)
        solver = "lu+jitter"
    return X / d[:, None], cond, solver, float(jitter)


def precompute_fdri_direct(M, filt, memory_budget=DEFAULT_MEMORY_BUDGET, dtype=np.float64):
    """Reconstruction matrix from the Gram form ``C^-1 M^T (M C^-1 M^T)^-1``.

    ``C^-1`` is applied to pattern blocks by FFT so peak memory stays close to
    ``M`` plus the output.

    Raises
    ------
    RankDeficiencyError
        If the rows of ``M`` are numerically dependent.
    """
    M = as_measurement_matrix(M)
    _check_filter(M, filt)
    rows = M.entries
    k, n = rows.shape
    times = {}
    t0 = time.perf_counter()
    G = np.empty((k, k))
    step = _rows_per_block(n, memory_budget)
    for i0 in range(0, k, step):
        blk = np.asarray(rows[i0:i0 + step], dtype=np.float64).reshape(-1, *M.shape)
        B_blk = apply_circulant(filt, blk, -2).reshape(-1, n)
        G[:, i0:i0 + step] = rows @ B_blk.T
    G = 0.5 * (G + G.T)
    times["gram"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    X, cond, solver, jitter = solve_gram(G, np.asarray(rows, dtype=np.float64))
    times["solve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    cols = _apply_rows(filt, X, M.shape, -2, memory_budget, out=X)
    times["apply"] = time.perf_counter() - t0
    report = PrecomputeReport(times, cond, solver, jitter)
    return _finish(cols, M, "fdri-direct", filt, dtype), report


def _svd_pinv_rows(A):
    """Rows of ``(A^+)^T`` via a truncated SVD, plus the effective condition."""
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    tol = max(A.shape) * np.finfo(np.float64).eps * s[0]
    keep = s > tol
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    cond = float((s[0] / s[keep][-1]) ** 2)
    return (U * inv) @ Vt, cond, int(keep.sum())


def precompute_fdri_svd(M, filt, memory_budget=DEFAULT_MEMORY_BUDGET, dtype=np.float64):
    """Reconstruction matrix from the pseudoinverse form ``Gamma (M Gamma)^+``.

    Singular values below ``max(k, n) * eps * s_max`` are discarded, so
    rank-deficient ``M`` is accepted.
    """
    M = as_measurement_matrix(M)
    _check_filter(M, filt)
    times = {}
    t0 = time.perf_counter()
    A = _apply_rows(filt, M.entries, M.shape, -1, memory_budget)
    times["operator"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    rows, cond, rank = _svd_pinv_rows(A)
    del A
    times["svd"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    cols = _apply_rows(filt, rows, M.shape, -1, memory_budget, out=rows)
    times["apply"] = time.perf_counter() - t0
    report = PrecomputeReport(times, cond, f"svd(rank={rank})")
    return _finish(cols, M, "fdri-svd", filt, dtype), report


def precompute_pinv(M, dtype=np.float64):
    """Plain Moore-Penrose pseudoinverse ``M^+`` (minimal l2-norm solutions).

    Uses ``M^T (M M^T)^-1`` when ``M`` has well-conditioned full row rank and
    falls back to the truncated SVD otherwise.
    """
    M = as_measurement_matrix(M)
    rows = np.asarray(M.entries, dtype=np.float64)
    times = {}
    t0 = time.perf_counter()
    G = rows @ rows.T
    try:
        cols, cond, solver, jitter = solve_gram(G, rows)
    except RankDeficiencyError:
        cols, cond, rank = _svd_pinv_rows(rows)
        solver, jitter = f"svd(rank={rank})", 0.0
    times["solve"] = time.perf_counter() - t0
    report = PrecomputeReport(times, cond, solver, jitter)
    return _finish(cols, M, "pinv", None, dtype), report


def _finish(cols, M, method, filt, dtype):
    """Wrap ``P^T`` (``k x n``) as a row-major ``n x k`` matrix."""
    dtype = np.dtype(dtype)
    entries = np.ascontiguousarray(cols.T, dtype=dtype)
    entries.setflags(write=False)
    return ReconstructionMatrix(entries, tuple(M.shape), method,
                                _provenance(M, method, filt, dtype.name))


def precompute(M, method="fdri-direct", mu=DEFAULT_MU, eps=DEFAULT_EPS,
               memory_budget=DEFAULT_MEMORY_BUDGET, dtype=np.float64):
    """Dispatch to one of the precompute methods by name."""
    if method not in METHODS:
        raise InvalidArgumentError(f"unknown method {method!r}; expected one of {METHODS}")
    M = as_measurement_matrix(M)
    if method == "pinv":
        return precompute_pinv(M, dtype=dtype)
    filt = build_gamma(freq_grid(M.shape[1], M.shape[0]), mu, eps)
    if method == "fdri-direct":
        return precompute_fdri_direct(M, filt, memory_budget, dtype)
    return precompute_fdri_svd(M, filt, memory_budget, dtype)


def reconstruct(P, y):
    """Reconstruct ``x0 = P y`` as an image (or a stack for 2D ``y``).

    No clipping is applied.  A float32 matrix uses the single-precision path.
    """
    y = np.asarray(y)
    if y.shape[-1] != P.k or y.ndim not in (1, 2):
        raise InvalidArgumentError(
            f"measurement vector length {y.shape[-1] if y.ndim else 0} does not match k={P.k}")
    y = y.astype(P.dtype, copy=False)
    if y.ndim == 1:
        return (P.entries @ y).reshape(P.shape)
    return (y @ P.entries.T).reshape(y.shape[0], *P.shape)


def right_inverse_error(M, P):
    """``max |M P - I_k|``."""
    M = as_measurement_matrix(M)
    prod = np.asarray(M.entries, dtype=np.float64) @ np.asarray(P.entries, dtype=np.float64)
    return float(np.max(np.abs(prod - np.eye(M.k))))


class FDRIReconstructor(TransformerMixin, BaseEstimator):
    """Closed-form Fourier-domain regularized inversion as an sklearn transformer.

    ``fit`` takes the measurement matrix (a ``MeasurementMatrix`` or a ``k x n``
    array plus ``image_shape``) and precomputes ``reconstruction_matrix_``.
    ``transform`` maps measurement rows ``(n_samples, k)`` to flattened images
    ``(n_samples, n)``; ``inverse_transform`` applies the forward model.

    Parameters
    ----------
    mu : float
        Filter trade-off in [0, 1].
    eps : float
        Filter floor; very large values reduce the method to the pseudoinverse.
    method : {'fdri-direct', 'fdri-svd', 'pinv'}
    image_shape : (height, width), optional
        Required when fitting on a plain array with non-square pixel count.
    dtype : str
        Storage precision of the reconstruction matrix.
    memory_budget : int
        Working memory in bytes for blockwise precomputation.
    """

    def __init__(self, mu=DEFAULT_MU, eps=DEFAULT_EPS, method="fdri-direct",
                 image_shape=None, dtype="float64", memory_budget=DEFAULT_MEMORY_BUDGET):
        self.mu = mu
        self.eps = eps
        self.method = method
        self.image_shape = image_shape
        self.dtype = dtype
        self.memory_budget = memory_budget

    def fit(self, X, y=None):
        M = as_measurement_matrix(X, self.image_shape)
        P, report = precompute(M, self.method, self.mu, self.eps,
                               self.memory_budget, self.dtype)
        self.measurement_matrix_ = M
        self.reconstruction_matrix_ = P
        self.report_ = report
        self.n_features_in_ = M.k
        return self

    def transform(self, X):
        check_is_fitted(self, "reconstruction_matrix_")
        Y = np.asarray(X)
        if Y.ndim == 1:
            Y = Y[None]
        P = self.reconstruction_matrix_
        return reconstruct(P, Y).reshape(Y.shape[0], P.n)

    def inverse_transform(self, X):
        check_is_fitted(self, "measurement_matrix_")
        images = np.asarray(X, dtype=np.float64).reshape(-1, self.measurement_matrix_.n)
        return images @ self.measurement_matrix_.entries.T

    def reconstruct(self, y):
        """Reconstruct one measurement vector (or a batch) as image(s)."""
        check_is_fitted(self, "reconstruction_matrix_")
        return reconstruct(self.reconstruction_matrix_, y)

    def score(self, X, y):
        """Mean PSNR (peak 1, clipped to [0, 1]) of reconstructions of ``X`` vs images ``y``."""
        from .metrics import psnr

        recon = self.transform(X)
        truth = np.asarray(y, dtype=np.float64).reshape(recon.shape)
        shape = self.reconstruction_matrix_.shape
        vals = [psnr(t.reshape(shape), np.clip(r, 0, 1).reshape(shape)).psnr_db
                for t, r in zip(truth, recon)]
        return float(np.mean(vals))
