"""Exception types and input validation helpers shared across the package."""
import numpy as np


class InvalidArgumentError(ValueError):
    """Raised when an argument violates a documented precondition."""


class ConsistencyError(RuntimeError):
    """Raised when an internal numerical invariant is violated."""


class RankDeficiencyError(np.linalg.LinAlgError):
    """Raised when a Gram matrix is too ill-conditioned to factorize."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ProvenanceError(ValueError):
    """Raised when stored digests do not match the data they describe."""


def check_image(image, name="image", shape=None):
    """Return ``image`` as a finite 2D float64 array.

    If ``shape`` is given the image must have exactly that (height, width).
    """
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidArgumentError(f"{name} has a zero dimension: {arr.shape}")
    if np.iscomplexobj(arr):
        raise InvalidArgumentError(f"{name} must be real-valued")
    arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    if shape is not None and arr.shape != tuple(shape):
        raise InvalidArgumentError(
            f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def check_matrix(matrix, name="matrix", dtype=np.float64):
    arr = np.asarray(matrix)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidArgumentError(
            f"{name} must be a non-empty 2D array, got shape {arr.shape}")
    if dtype is not None:
        arr = arr.astype(dtype, copy=False)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return arr


def check_positive_int(value, name):
    if isinstance(value, (bool, np.bool_)) or int(value) != value or value < 1:
        raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def is_power_of_two(n):
    n = int(n)
    return n >= 1 and (n & (n - 1)) == 0
