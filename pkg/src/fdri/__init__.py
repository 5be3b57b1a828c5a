"""Single-pixel imaging simulation with Fourier-domain regularized inversion (FDRI)."""
from ._validation import (ConsistencyError, InvalidArgumentError, ProvenanceError,
                          RankDeficiencyError)
from .evaluation import Comparison, compare_methods
from .metrics import (BenchReport, QualityReport, bench_reconstruct, high_frequency_fraction,
                      mean_spectrum, psnr)
from .reconstruction import (FDRIReconstructor, PrecomputeReport, ReconstructionMatrix,
                             precompute, precompute_fdri_direct, precompute_fdri_svd,
                             precompute_pinv, reconstruct, right_inverse_error)
from .sampling import (MeasurementMatrix, MorletParams, PatternSelector, PatternSet,
                       assemble_measurement_matrix, binarize, dct_basis_function,
                       morlet_noise_pattern, morlet_wavelet, select_patterns, sigma_schedule,
                       walsh_hadamard_function)
from .simulator import MeasurementVector, StreamConfig, StreamReport, measure, run_stream
from .spectral import (FrequencyGrid, SpectralFilter, apply_circulant, build_gamma, criterion,
                       freq_grid)

__version__ = "0.1.0"
