import numpy as np
import pytest

from fdri import (InvalidArgumentError, PatternSet, bench_reconstruct, mean_spectrum, psnr,
                  select_patterns)
from fdri.reconstruction import ReconstructionMatrix, reconstruct


def test_psnr_identical_is_infinite(rng):
    x = rng.random((8, 8))
    r = psnr(x, x)
    assert r.psnr_db == np.inf and r.mse == 0 and r.peak == 1.0


def test_psnr_constant_offset():
    x = np.full((4, 4), 0.5)
    r = psnr(x, x + 0.1)
    assert r.mse == pytest.approx(0.01)
    assert r.psnr_db == pytest.approx(20.0)


def test_psnr_inverted_checkerboard():
    board = (np.indices((6, 6)).sum(axis=0) % 2).astype(float)
    r = psnr(board, 1 - board)
    assert r.mse == 1.0 and r.psnr_db == 0.0


def test_psnr_peak_convention():
    x = np.zeros((4, 4))
    assert psnr(x, x + 2.0, peak=255.0).psnr_db == pytest.approx(10 * np.log10(255 ** 2 / 4))


def test_psnr_atol_snaps_roundoff(rng):
    x = rng.random((8, 8))
    assert psnr(x, x + 1e-12, atol=1e-9).psnr_db == np.inf
    assert np.isfinite(psnr(x, x + 1e-12).psnr_db)


def test_psnr_errors():
    with pytest.raises(InvalidArgumentError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(InvalidArgumentError):
        psnr(np.zeros((4, 4)), np.zeros((4, 4)), peak=0)


def test_psnr_symmetric(rng):
    a, b = rng.random((8, 8)), rng.random((8, 8))
    assert psnr(a, b).psnr_db == psnr(b, a).psnr_db


def test_psnr_decreases_with_noise(rng):
    x = rng.random((32, 32))
    noise = rng.standard_normal((32, 32))
    values = [psnr(x, x + a * noise).psnr_db for a in (0.01, 0.02, 0.05, 0.1, 0.2)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_mean_spectrum_constant_pattern():
    spec = mean_spectrum(PatternSet("dct", np.ones((1, 8, 8))))
    assert spec[4, 4] == pytest.approx(1.0)
    assert np.sum(spec) == pytest.approx(1.0)


def test_mean_spectrum_complete_dct_covers_all_frequencies():
    spec = mean_spectrum(select_patterns("dct", 64, None, 8))
    assert np.all(spec > 0)


def test_mean_spectrum_sign_invariant(rng):
    pats = rng.standard_normal((5, 8, 8))
    flipped = pats * np.array([1, -1, 1, -1, -1])[:, None, None]
    np.testing.assert_allclose(mean_spectrum(pats), mean_spectrum(flipped), rtol=1e-12)


def test_mean_spectrum_empty():
    with pytest.raises(InvalidArgumentError):
        mean_spectrum(np.zeros((0, 4, 4)))


def test_bench_single_row(rng):
    P = ReconstructionMatrix(rng.standard_normal((65536, 1)).astype(np.float32), (256, 256), "x")
    rep = bench_reconstruct(P, np.ones(1), iterations=10)
    assert rep.k == 1 and rep.n == 65536 and rep.precision == "float32"
    assert rep.median_ms < 5.0
    assert rep.p99_ms >= rep.median_ms


def test_bench_does_not_perturb(rng):
    P = ReconstructionMatrix(rng.standard_normal((64, 8)), (8, 8), "x")
    y = rng.standard_normal(8)
    before = reconstruct(P, y)
    bench_reconstruct(P, y, iterations=5)
    assert reconstruct(P, y).tobytes() == before.tobytes()
    with pytest.raises(InvalidArgumentError):
        bench_reconstruct(P, y, iterations=0)
