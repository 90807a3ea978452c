"""Prior distributions and the per-pixel noise model used by the fitter.

Three prior families cover the usual states of knowledge about a
particle: :class:`Uniform` for pure range constraints, :class:`Gaussian`
for a best estimate with an error bar, and :class:`BoundedGaussian` for
an estimate that must additionally respect hard physical limits (e.g. a
manufacturer-quoted radius that cannot be negative).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Uniform",
    "Gaussian",
    "BoundedGaussian",
    "Prior",
    "log_prior",
    "NoiseModel",
    "estimate_noise",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Uniform:
    """Flat density on [lo, hi], normalized."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"require lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def scale(self) -> float:
        return self.hi - self.lo

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def log_density(self, v):
        v = np.asarray(v, dtype=float)
        out = np.where(
            (v >= self.lo) & (v <= self.hi), -math.log(self.hi - self.lo), -np.inf
        )
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(self.lo, self.hi, size=size)

    def recentered(self, center: float) -> "Uniform":
        half = 0.5 * (self.hi - self.lo)
        return Uniform(center - half, center + half)


@dataclass(frozen=True)
class Gaussian:
    """Normal density with mean mu and standard deviation sigma, normalized."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def scale(self) -> float:
        return self.sigma

    @property
    def center(self) -> float:
        return self.mu

    def log_density(self, v):
        v = np.asarray(v, dtype=float)
        t = (v - self.mu) / self.sigma
        out = -0.5 * t * t - math.log(self.sigma) - _LOG_SQRT_2PI
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size=None):
        return rng.normal(self.mu, self.sigma, size=size)

    def recentered(self, center: float) -> "Gaussian":
        return Gaussian(center, self.sigma)


@dataclass(frozen=True)
class BoundedGaussian:
    """Gaussian log-density inside [lo, hi], -inf outside.

    Unnormalized: the truncation constant is omitted because it does not
    affect sampling.
    """

    mu: float
    sigma: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.lo < self.hi:
            raise ValueError(f"require lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def scale(self) -> float:
        return self.sigma

    @property
    def center(self) -> float:
        return self.mu

    def log_density(self, v):
        v = np.asarray(v, dtype=float)
        t = (v - self.mu) / self.sigma
        dens = -0.5 * t * t - math.log(self.sigma) - _LOG_SQRT_2PI
        out = np.where((v >= self.lo) & (v <= self.hi), dens, -np.inf)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size=None):
        # rejection from the parent Gaussian; support is assumed to carry
        # non-negligible mass, which holds for physically sensible priors
        n = int(np.prod(size)) if size is not None else 1
        out = np.empty(n)
        filled = 0
        for _ in range(1000):
            draw = rng.normal(self.mu, self.sigma, size=max(n - filled, 1) * 2)
            good = draw[(draw >= self.lo) & (draw <= self.hi)]
            take = min(len(good), n - filled)
            out[filled : filled + take] = good[:take]
            filled += take
            if filled == n:
                break
        else:
            raise RuntimeError(
                f"could not draw from BoundedGaussian({self.mu}, {self.sigma}, "
                f"[{self.lo}, {self.hi}]): support carries too little mass"
            )
        return float(out[0]) if size is None else out.reshape(size)

    def recentered(self, center: float) -> "BoundedGaussian":
        shift = center - self.mu
        return BoundedGaussian(center, self.sigma, self.lo + shift, self.hi + shift)


Prior = Uniform | Gaussian | BoundedGaussian


def log_prior(priors, v) -> float | np.ndarray:
    """Sum of per-parameter log prior densities.

    ``v`` may be a single vector of length len(priors) or a batch of shape
    (B, len(priors)); returns a float or a (B,) array.  Any parameter
    outside its support makes the total -inf.
    """
    v = np.asarray(v, dtype=float)
    batch = v.ndim == 2
    if v.shape[-1] != len(priors):
        raise ValueError(
            f"parameter vector has {v.shape[-1]} entries, expected {len(priors)}"
        )
    total = np.zeros(v.shape[0]) if batch else 0.0
    for i, p in enumerate(priors):
        total = total + p.log_density(v[..., i])
    return total


@dataclass(frozen=True)
class NoiseModel:
    """Per-pixel Gaussian noise level, in normalized-intensity units."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"noise sigma must be positive, got {self.sigma}")


def estimate_noise(hologram, window: tuple[int, int, int, int]) -> NoiseModel:
    """Estimate the noise level from a particle-free region.

    ``window`` is (i0, j0, width, height) in pixels; the estimate is the
    standard deviation of the intensity inside it.
    """
    i0, j0, w, h = window
    from .core import crop

    region = crop(hologram, i0, j0, w, h)
    sigma = float(np.std(region.intensity))
    if sigma == 0:
        raise ValueError("designated region has zero variance; cannot estimate noise")
    return NoiseModel(sigma=sigma)
