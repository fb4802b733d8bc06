"""Acquisition functions: WU regret, lower confidence bound, expected improvement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .surrogates import GaussianPosterior

ACQUISITION_KINDS = ("wu_regret", "lcb", "ei_mc", "ei_gaussian")


class AcquisitionError(ValueError):
    pass


@dataclass(frozen=True)
class AcquisitionConfig:
    kind: str = "wu_regret"
    kappa: float = 2.0
    mc_samples: int = 10_000

    def __post_init__(self):
        if self.kind not in ACQUISITION_KINDS:
            raise AcquisitionError(f"unknown acquisition kind {self.kind!r}")
        if not math.isfinite(self.kappa) or self.kappa < 0:
            raise AcquisitionError("kappa must be finite and non-negative")
        if self.kind == "ei_mc" and self.mc_samples < 1:
            raise AcquisitionError("ei_mc needs at least one sample")


def wu_regret(f_hat, sigma_w, kappa: float):
    """Exploitation minus kappa times Wasserstein uncertainty; minimised."""
    sigma_w = np.asarray(sigma_w, dtype=float)
    if np.any(sigma_w < 0):
        raise AcquisitionError("sigma_w must be non-negative")
    out = np.asarray(f_hat, dtype=float) - kappa * sigma_w
    return float(out) if out.ndim == 0 else out


def lcb(post: GaussianPosterior, kappa: float) -> float:
    """Posterior mean minus kappa times posterior std; minimised."""
    return float(wu_regret(post.mean, post.std, kappa))


def lcb_values(means: np.ndarray, stds: np.ndarray, kappa: float) -> np.ndarray:
    return wu_regret(means, stds, kappa)


def ei_mc(sample, f_min: float) -> float:
    """Monte-Carlo expected improvement: mean positive part of f_min - x."""
    values = np.asarray(getattr(sample, "values", sample), dtype=float).ravel()
    if values.size == 0:
        raise AcquisitionError("empty sample")
    return float(np.maximum(0.0, f_min - values).mean())


def _phi(z):
    return np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)


def _norm_cdf(z):
    # Complementary error function keeps the deep lower tail accurate.
    return 0.5 * erfc(-z / math.sqrt(2))


def ei_gaussian_values(means: np.ndarray, stds: np.ndarray, f_min: float) -> np.ndarray:
    """Closed-form EI for Gaussian posteriors: sigma * (z Phi(z) + phi(z))."""
    means = np.atleast_1d(np.asarray(means, dtype=float))
    stds = np.atleast_1d(np.asarray(stds, dtype=float))
    if np.any(stds < 0):
        raise AcquisitionError("posterior std must be non-negative")
    means, stds = np.broadcast_arrays(means, stds)
    out = np.empty(means.shape)
    pos = stds > 0
    z = (f_min - means[pos]) / stds[pos]
    out[pos] = stds[pos] * (z * _norm_cdf(z) + _phi(z))
    out[~pos] = np.maximum(0.0, f_min - means[~pos])
    return np.clip(out, 0.0, None)


def ei_gaussian(post: GaussianPosterior, f_min: float) -> float:
    return float(ei_gaussian_values(np.array([post.mean]), np.array([post.std]), f_min)[0])
