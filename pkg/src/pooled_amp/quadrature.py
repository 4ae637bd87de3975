"""Evaluation of expectations over centred Gaussian vectors.

Two backends share one interface.  Monte Carlo draws a fixed standard normal
sample (common random numbers across calls with the same seed) and maps it
through the symmetric square root of the covariance.  Gauss-Hermite uses a
tensor rule over the active eigen-subspace of the covariance, so a rank
deficient covariance costs nothing in the null directions.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import itertools

import numpy as np

from .errors import ValidationError
from .linalg import sqrtm_psd, sym

MAX_TENSOR_POINTS = 2_000_000


@lru_cache(maxsize=16)
def _standard_normal(seed: int, n: int, d: int) -> np.ndarray:
    out = np.random.default_rng(seed).standard_normal((n, d))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def _hermite_grid(n_nodes: int, d: int):
    x, w = np.polynomial.hermite.hermgauss(n_nodes)
    x = x * np.sqrt(2.0)
    w = w / np.sqrt(np.pi)
    pts = np.array(list(itertools.product(x, repeat=d))) if d else np.zeros((1, 0))
    wts = np.prod(np.array(list(itertools.product(w, repeat=d))), axis=1) if d else np.ones(1)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


@dataclass(frozen=True)
class GaussianQuadSpec:
    method: str = "monte-carlo"
    n_samples: int = 200_000
    n_nodes: int = 80
    seed: int = 20240601

    def __post_init__(self):
        if self.method not in ("monte-carlo", "gauss-hermite"):
            raise ValidationError(f"unknown quadrature method {self.method!r}")
        if self.n_samples < 1 or self.n_nodes < 1:
            raise ValidationError("quadrature sizes must be at least 1")

    @property
    def is_mc(self) -> bool:
        return self.method == "monte-carlo"

    def standard(self, d: int) -> np.ndarray:
        """The shared standard normal sample, shape ``(n_samples, d)``."""
        return _standard_normal(self.seed, self.n_samples, d)

    def nodes(self, cov):
        """Points ``(N, d)`` and weights ``(N,)`` for ``N(0, cov)``."""
        cov = sym(np.atleast_2d(cov))
        d = cov.shape[0]
        if self.is_mc:
            pts = self.standard(d) @ sqrtm_psd(cov)
            return pts, np.full(pts.shape[0], 1.0 / pts.shape[0])
        w, V = np.linalg.eigh(cov)
        scale = float(np.max(np.abs(w))) if w.size else 0.0
        active = w > 1e-12 * max(scale, 1e-300)
        r = int(active.sum())
        if self.n_nodes**r > MAX_TENSOR_POINTS:
            raise ValidationError(f"Gauss-Hermite grid of {self.n_nodes}^{r} points is too large")
        xi, wts = _hermite_grid(self.n_nodes, r)
        pts = (xi * np.sqrt(w[active])) @ V[:, active].T if r else np.zeros((1, d))
        return pts, wts

    def to_dict(self) -> dict:
        return {"method": self.method, "n_samples": self.n_samples,
                "n_nodes": self.n_nodes, "seed": self.seed}


def weighted_mean_se(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Mean and (for equal weights) the Monte Carlo standard error, entrywise."""
    values = np.asarray(values, dtype=float)
    mean = np.tensordot(weights, values, axes=(0, 0))
    n = values.shape[0]
    var = np.tensordot(weights, (values - mean) ** 2, axes=(0, 0))
    return mean, np.sqrt(var / max(n - 1, 1))
