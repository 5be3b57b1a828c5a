import numpy as np
import pytest

from fdri import (InvalidArgumentError, StreamConfig, assemble_measurement_matrix,
                  dct_basis_function, measure, precompute, run_stream, select_patterns)
from fdri.reconstruction import ReconstructionMatrix
from fdri.sampling import as_measurement_matrix

from oracles import random_pm1


def test_zero_scene(rng):
    M = as_measurement_matrix(rng.standard_normal((5, 16)), (4, 4))
    mv = measure(M, np.zeros((4, 4)))
    np.testing.assert_array_equal(mv.values, 0.0)
    assert len(mv) == 5 and mv.source_digest == M.digest()


def test_basis_scene_gives_unit_vector():
    pset = select_patterns("dct", 64, None, 8)
    M = assemble_measurement_matrix(pset)
    row = pset.ids.index((2, 5))
    y = measure(M, dct_basis_function(2, 5, 8, 8)).values
    expected = np.zeros(64)
    expected[row] = 1.0
    np.testing.assert_allclose(y, expected, atol=1e-12)


def test_hand_written_inner_products():
    scene = np.arange(16, dtype=float).reshape(4, 4) / 16
    rows = np.zeros((2, 16))
    rows[0, [0, 5, 10, 15]] = 1.0    # diagonal
    rows[1, :4] = -1.0               # minus first row
    rows[1, 12:] = 2.0               # twice last row
    M = as_measurement_matrix(rows, (4, 4))
    y = measure(M, scene).values
    diag = (0 + 5 + 10 + 15) / 16
    other = -(0 + 1 + 2 + 3) / 16 + 2 * (12 + 13 + 14 + 15) / 16
    np.testing.assert_allclose(y, [diag, other], rtol=1e-15)


def test_measure_noise(rng):
    M = as_measurement_matrix(random_pm1(rng, 400, 64), (8, 8))
    scene = rng.random((8, 8))
    clean = measure(M, scene).values
    a = measure(M, scene, 0.1, seed=3)
    b = measure(M, scene, 0.1, seed=3)
    assert a.values.tobytes() == b.values.tobytes()
    resid = a.values - clean
    expected_std = 0.1 * np.linalg.norm(clean) / np.sqrt(400)
    assert np.std(resid) == pytest.approx(expected_std, rel=0.15)
    with pytest.raises(InvalidArgumentError):
        measure(M, np.zeros((4, 4)))
    with pytest.raises(InvalidArgumentError):
        measure(M, scene, -1.0)


def _random_pair(rng, k, side, dtype=np.float64):
    M = as_measurement_matrix(random_pm1(rng, k, side * side).astype(dtype), (side, side))
    P = ReconstructionMatrix(rng.standard_normal((side * side, k)).astype(dtype),
                             (side, side), "random")
    return M, P


def test_frame_rate_in_simulated_clock(rng):
    M, P = _random_pair(rng, 1966, 8)
    cfg = StreamConfig([rng.random((8, 8)) for _ in range(5)], dmd_rate=22000.0,
                       compare_to_source=False)
    report, frames = run_stream(cfg, P, M)
    assert report.frame_period_s == pytest.approx(1966 / 22000)
    assert report.frame_period_s * 1e3 == pytest.approx(89.36, abs=0.01)
    assert report.frame_rate_hz == pytest.approx(11.19, abs=0.01)
    assert report.frame_rate_hz == pytest.approx(22000 / 1966, rel=1e-9)
    assert len(frames) == 5 and report.deadline_misses == 0


def test_static_scene_is_deterministic(rng):
    M, P = _random_pair(rng, 20, 8)
    scene = rng.random((8, 8))
    report, frames = run_stream(StreamConfig([scene] * 10), P, M)
    assert all(f.tobytes() == frames[0].tobytes() for f in frames)
    assert [r["frame_index"] for r in report.frames] == list(range(10))


def test_stream_preserves_order(rng):
    M, P = _random_pair(rng, 20, 8)
    scenes = [rng.random((8, 8)) for _ in range(12)]
    cfg = StreamConfig(scenes, queue_size=2, compare_to_source=False)
    _, frames = run_stream(cfg, P, M)
    for scene, frame in zip(scenes, frames):
        np.testing.assert_allclose(frame.ravel(), P.entries @ (M.entries @ scene.ravel()))


def test_complete_sampling_f32_stream(rng):
    pset = select_patterns("dct", 256, None, 16)
    M = assemble_measurement_matrix(pset)
    P, _ = precompute(M, "fdri-direct")
    scenes = [rng.random((16, 16)) for _ in range(4)]
    report, frames = run_stream(StreamConfig(scenes), P.astype(np.float32), M)
    for s, f in zip(scenes, frames):
        assert np.linalg.norm(f - s) / np.linalg.norm(s) < 1e-6
    assert all(r["psnr_vs_source"] > 100 for r in report.frames)


def test_wall_clock_short_stream(rng):
    M, P = _random_pair(rng, 40, 8)
    cfg = StreamConfig([rng.random((8, 8)) for _ in range(5)], dmd_rate=2000.0, clock="wall")
    report, frames = run_stream(cfg, P, M)
    assert report.mode == "wall" and len(frames) == 5
    assert report.frame_rate_hz == pytest.approx(50.0, rel=0.3)
    assert report.deadline_misses == 0


def test_empty_source_ends_cleanly(rng):
    M, P = _random_pair(rng, 4, 4)
    report, frames = run_stream(StreamConfig([]), P, M)
    assert frames == [] and report.frames == []


def test_stream_errors(rng):
    M, P = _random_pair(rng, 4, 4)
    with pytest.raises(InvalidArgumentError):
        run_stream(StreamConfig([], dmd_rate=0), P, M)
    with pytest.raises(InvalidArgumentError):
        run_stream(StreamConfig([], clock="sundial"), P, M)
    M2, _ = _random_pair(rng, 5, 4)
    with pytest.raises(InvalidArgumentError):
        run_stream(StreamConfig([]), P, M2)
    # producer errors surface in the caller
    with pytest.raises(InvalidArgumentError):
        run_stream(StreamConfig([np.zeros((3, 3))]), P, M)
