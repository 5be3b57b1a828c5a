"""Binary matrix container with a JSON metadata sidecar.

Layout of ``<path>`` (little-endian, 32-byte header)::

    offset  size  field
    0       4     magic b"FDRI"
    4       4     version (uint32, currently 1)
    8       4     dtype code (uint32: 1 = float32, 2 = float64)
    12      4     reserved (zero)
    16      8     rows (uint64)
    24      8     cols (uint64)
    32      ...   row-major payload, rows * cols * itemsize bytes

``<path>.json`` holds ``{"format": ..., "digest": <sha256 of payload>,
"metadata": {...}}``.  Loading recomputes the digest and raises
:class:`ProvenanceError` on mismatch.
"""
import hashlib
import json
import pathlib
import struct

import numpy as np

from ._validation import InvalidArgumentError, ProvenanceError

MAGIC = b"FDRI"
VERSION = 1
HEADER = struct.Struct("<4sIIIQQ")
DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
CODE_OF = {"float32": 1, "float64": 2}


def sidecar_path(path):
    return pathlib.Path(str(path) + ".json")


def save_matrix(path, matrix, metadata=None):
    """Write a 2D float32/float64 array and its metadata sidecar."""
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise InvalidArgumentError("container payload must be 2D")
    if arr.dtype.name not in CODE_OF:
        arr = arr.astype(np.float64)
    code = CODE_OF[arr.dtype.name]
    payload = np.ascontiguousarray(arr, dtype=DTYPE_CODES[code])
    digest = hashlib.sha256(memoryview(payload).cast("B")).hexdigest()
    path = pathlib.Path(path)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, code, 0, arr.shape[0], arr.shape[1]))
        fh.write(memoryview(payload).cast("B"))
    side = {"format": "fdri-container", "version": VERSION, "dtype": arr.dtype.name,
            "rows": int(arr.shape[0]), "cols": int(arr.shape[1]), "digest": digest,
            "metadata": metadata or {}}
    sidecar_path(path).write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    return digest


def load_matrix(path, verify=True):
    """Read a container; returns ``(array, metadata, digest)``."""
    path = pathlib.Path(path)
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise InvalidArgumentError(f"{path}: truncated container header")
        magic, version, code, _, rows, cols = HEADER.unpack(head)
        if magic != MAGIC:
            raise InvalidArgumentError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise InvalidArgumentError(f"{path}: unsupported container version {version}")
        if code not in DTYPE_CODES:
            raise InvalidArgumentError(f"{path}: unknown dtype code {code}")
        dtype = DTYPE_CODES[code]
        payload = fh.read()
    if len(payload) != rows * cols * dtype.itemsize:
        raise InvalidArgumentError(
            f"{path}: payload has {len(payload)} bytes, expected {rows * cols * dtype.itemsize}")
    side_file = sidecar_path(path)
    side = json.loads(side_file.read_text()) if side_file.exists() else {}
    digest = hashlib.sha256(payload).hexdigest()
    if verify and side.get("digest") not in (None, digest):
        raise ProvenanceError(f"{path}: payload digest does not match {side_file.name}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(rows, cols)
    return arr.astype(dtype.newbyteorder("="), copy=False), side.get("metadata", {}), digest


# ---------------------------------------------------------------- typed wrappers

def save_pattern_set(path, pattern_set):
    k = len(pattern_set)
    meta = {
        "kind": "pattern-set",
        "protocol": pattern_set.protocol,
        "binarized": bool(pattern_set.binarized),
        "seed": int(pattern_set.seed),
        "resolution": [int(s) for s in pattern_set.shape],
        "selection": pattern_set.selection_meta,
        "ids": [list(i) if isinstance(i, tuple) else i for i in pattern_set.ids],
    }
    return save_matrix(path, pattern_set.patterns.reshape(k, -1), meta)


def load_pattern_set(path):
    from .sampling import PatternSet

    arr, meta, _ = load_matrix(path)
    if meta.get("kind") != "pattern-set":
        raise InvalidArgumentError(f"{path}: not a pattern-set container")
    h, w = meta["resolution"]
    ids = tuple(tuple(i) if isinstance(i, list) else i for i in meta.get("ids", []))
    return PatternSet(meta["protocol"], np.array(arr, dtype=np.float64).reshape(-1, h, w),
                      meta["binarized"], meta.get("selection", {}), meta["seed"], ids)


def save_reconstruction(path, P, report=None, **extra):
    """Write ``P`` (row-major ``n x k``).  Timings are left out of the sidecar
    so repeated runs produce identical files."""
    meta = dict(P.provenance, kind="reconstruction-matrix", method=P.method,
                resolution=[int(s) for s in P.shape], **extra)
    if report is not None:
        meta["condition"] = report.condition
        meta["solver"] = report.solver
        meta["regularization"] = report.regularization
    return save_matrix(path, P.entries, meta)


def load_reconstruction(path, M=None):
    """Load a reconstruction matrix; with ``M`` also check its provenance digest."""
    from .reconstruction import ReconstructionMatrix

    arr, meta, _ = load_matrix(path)
    if meta.get("kind") != "reconstruction-matrix":
        raise InvalidArgumentError(f"{path}: not a reconstruction-matrix container")
    if M is not None and meta.get("m_digest") != M.digest():
        raise ProvenanceError(
            f"{path}: reconstruction matrix was computed for a different measurement matrix")
    arr = np.array(arr)
    arr.setflags(write=False)
    prov = {key: value for key, value in meta.items()
            if key not in ("kind", "condition", "solver", "regularization")}
    return ReconstructionMatrix(arr, tuple(meta["resolution"]), meta["method"], prov)


def save_measurement(path, mv):
    meta = {"kind": "measurement-vector", "noise_sigma": mv.noise_sigma, "seed": mv.seed,
            "source_digest": mv.source_digest}
    return save_matrix(path, np.asarray(mv.values, dtype=np.float64)[None, :], meta)


def load_measurement(path):
    from .simulator import MeasurementVector

    arr, meta, _ = load_matrix(path)
    if meta.get("kind") != "measurement-vector":
        raise InvalidArgumentError(f"{path}: not a measurement-vector container")
    return MeasurementVector(np.array(arr[0], dtype=np.float64), meta["noise_sigma"],
                             meta["seed"], meta["source_digest"])
