"""FDRI versus pseudoinverse comparison on an image set."""
from dataclasses import dataclass, field

import numpy as np

from .metrics import EXACT_ATOL, psnr
from .reconstruction import precompute, reconstruct
from .sampling import (assemble_measurement_matrix, binarize, n_from_ratio, normalize_protocol,
                       select_patterns)
from .simulator import measure
from .spectral import DEFAULT_EPS, DEFAULT_MU


@dataclass
class Comparison:
    protocol: str
    binarized: bool
    k: int
    n: int
    mu: float
    eps: float
    names: list = field(default_factory=list)
    psnr_fdri: np.ndarray = None
    psnr_pinv: np.ndarray = None

    @property
    def mean_fdri(self):
        return float(np.mean(self.psnr_fdri))

    @property
    def mean_pinv(self):
        return float(np.mean(self.psnr_pinv))

    @property
    def fdri_wins(self):
        return int(np.sum(self.psnr_fdri >= self.psnr_pinv))

    def as_dict(self):
        return {"protocol": self.protocol, "binarized": self.binarized, "k": self.k,
                "n": self.n, "mu": self.mu, "eps": self.eps,
                "images": {name: {"psnr_fdri": float(f), "psnr_pinv": float(p)}
                           for name, f, p in zip(self.names, self.psnr_fdri, self.psnr_pinv)},
                "mean_psnr_fdri": self.mean_fdri, "mean_psnr_pinv": self.mean_pinv,
                "fdri_wins": self.fdri_wins}


def compare_methods(images, selection_db, resolution, ratio=0.03, protocol="dct",
                    binarized=True, mu=DEFAULT_MU, eps=DEFAULT_EPS, noise_sigma=0.0, seed=0):
    """Select patterns on ``selection_db`` and score FDRI and pinv on ``images``.

    ``images`` maps names to ``resolution x resolution`` scenes in [0, 1].
    Reconstructions are clipped to [0, 1] before PSNR.  Zero-mean Morlet
    patterns get an extra all-ones row so the image mean is measured.
    """
    protocol = normalize_protocol(protocol)
    k = n_from_ratio(ratio, resolution * resolution)
    pset = select_patterns(protocol, k, selection_db, resolution, seed=seed)
    if binarized:
        pset = binarize(pset)
    M = assemble_measurement_matrix(pset, include_white=protocol == "morlet-noise")
    P_fdri, _ = precompute(M, "fdri-direct", mu, eps)
    P_pinv, _ = precompute(M, "pinv")
    rows = []
    for name, img in images.items():
        y = measure(M, img, noise_sigma, seed).values
        rows.append([psnr(img, np.clip(reconstruct(P, y), 0, 1), atol=EXACT_ATOL).psnr_db
                     for P in (P_fdri, P_pinv)])
    arr = np.array(rows).reshape(-1, 2)
    return Comparison(protocol, pset.binarized, M.k, resolution * resolution, mu, eps,
                      list(images), arr[:, 0], arr[:, 1])
