"""Simulated single-pixel measurements and a real-time frame-stream pipeline.

A producer thread emits one measurement vector per frame period
(``k / dmd_rate`` seconds) into a bounded queue and the consumer reconstructs
each frame with a single mat-vec.  Two clocks are available: ``simulated``
(deterministic timestamps, compute time still measured) and ``wall``
(real sleeps, used for deadline benchmarks).
"""
import queue
import threading
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import InvalidArgumentError, check_image
from .metrics import EXACT_ATOL, psnr
from .reconstruction import reconstruct
from .sampling import as_measurement_matrix


@dataclass(frozen=True, eq=False)
class MeasurementVector:
    values: np.ndarray
    noise_sigma: float
    seed: int
    source_digest: str

    def __len__(self):
        return self.values.shape[0]


def measure(M, scene, noise_sigma=0.0, seed=0):
    """Simulate ``y = M x + noise`` for one scene.

    The noise is iid Gaussian with standard deviation
    ``noise_sigma * ||M x|| / sqrt(k)``, i.e. ``noise_sigma`` is a noise to
    RMS-signal ratio.  ``noise_sigma = 0`` gives the exact product.
    """
    M = as_measurement_matrix(M)
    x = check_image(scene, "scene", shape=M.shape).ravel()
    if noise_sigma < 0:
        raise InvalidArgumentError("noise_sigma must be non-negative")
    y = M.entries @ x.astype(M.entries.dtype, copy=False)
    y = y.astype(np.float64)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        scale = noise_sigma * np.linalg.norm(y) / np.sqrt(M.k)
        y = y + scale * rng.standard_normal(M.k)
    y.setflags(write=False)
    return MeasurementVector(y, float(noise_sigma), int(seed), M.digest())


@dataclass
class StreamConfig:
    """Frame-stream settings.

    ``frame_source`` is an iterable of scene images; ``k`` defaults to the row
    count of the measurement matrix.
    """

    frame_source: object
    dmd_rate: float = 22000.0
    k: int = None
    noise_sigma: float = 0.0
    seed: int = 0
    clock: str = "simulated"
    queue_size: int = 4
    compare_to_source: bool = True

    def frame_period(self, k):
        return k / self.dmd_rate


@dataclass
class StreamReport:
    mode: str
    k: int
    dmd_rate: float
    frame_period_s: float
    frame_rate_hz: float
    deadline_misses: int
    frames: list = field(default_factory=list)

    def as_dict(self):
        return asdict(self)


def run_stream(config, P, M):
    """Run the producer/consumer pipeline over ``config.frame_source``.

    Returns ``(report, reconstructions)``; reconstructions are in input order.
    A frame whose latency (emission to finished reconstruction) exceeds the
    frame period is counted as a deadline miss.
    """
    M = as_measurement_matrix(M)
    if P.k != M.k or tuple(P.shape) != tuple(M.shape):
        raise InvalidArgumentError("reconstruction matrix does not match measurement matrix")
    if not config.dmd_rate > 0:
        raise InvalidArgumentError("dmd_rate must be positive")
    if config.clock not in ("simulated", "wall"):
        raise InvalidArgumentError(f"unknown clock {config.clock!r}")
    k = config.k if config.k is not None else M.k
    if k != M.k:
        raise InvalidArgumentError(f"config k={k} does not match M with {M.k} rows")
    period = config.frame_period(k)
    wall = config.clock == "wall"

    scenes = iter(config.frame_source)
    if wall:
        # the optical measurement is not host work: generate vectors up front
        prepared = [(s, measure(M, s, config.noise_sigma, config.seed + i))
                    for i, s in enumerate(scenes)]
        scenes = iter(prepared)

    q = queue.Queue(maxsize=max(1, config.queue_size))
    done = object()
    errors = []

    def produce():
        try:
            t0 = time.perf_counter()
            for i, item in enumerate(scenes):
                if wall:
                    scene, y = item
                    deadline = t0 + (i + 1) * period
                    delay = deadline - time.perf_counter()
                    if delay > 0:
                        time.sleep(delay)
                    stamp = time.perf_counter()
                else:
                    scene = item
                    y = measure(M, scene, config.noise_sigma, config.seed + i)
                    stamp = (i + 1) * period
                q.put((i, scene, y, stamp))
        except Exception as exc:  # surfaced in the consumer thread
            errors.append(exc)
        finally:
            q.put(done)

    producer = threading.Thread(target=produce, name="fdri-producer", daemon=True)
    producer.start()

    records, frames, finished = [], [], []
    misses = 0
    while True:
        item = q.get()
        if item is done:
            break
        i, scene, y, stamp = item
        t_start = time.perf_counter()
        x = reconstruct(P, y.values)
        t_end = time.perf_counter()
        latency = (t_end - stamp) if wall else (t_end - t_start)
        if latency > period:
            misses += 1
        rec = {"frame_index": i, "latency_ms": latency * 1e3}
        if config.compare_to_source:
            rec["psnr_vs_source"] = psnr(scene, np.clip(x, 0.0, 1.0), atol=EXACT_ATOL).psnr_db
        records.append(rec)
        frames.append(x)
        finished.append(t_end if wall else stamp)
    producer.join()
    if errors:
        raise errors[0]

    n = len(frames)
    if not wall:
        rate = n / finished[-1] if n else 0.0
    elif n > 1:
        rate = (n - 1) / (finished[-1] - finished[0])
    else:
        rate = 1.0 / period
    report = StreamReport(config.clock, k, float(config.dmd_rate), period, float(rate),
                          misses, records)
    return report, frames
