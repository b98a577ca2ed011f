"""
Colored noise generation

White Gaussian noise is convolved with a Gaussian kernel of width sigma
(truncated at 4 sigma, unit l2 energy), giving the autocorrelation
exp(-h^2 / (4 sigma^2)). The result is whitened by its sample covariance
and colored by the Cholesky factor of the target covariance, so the sample
covariance of every draw equals the target. ColoredNoiseStream serves the
same process without a length limit, for plants that step indefinitely.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, signal

from agent.base import as_matrix


@dataclass(frozen=True, eq=False)
class ColoredNoiseConfig:
    """Kernel width, target covariance and seed of a noise source"""
    sigma: float
    covariance: np.ndarray
    seed: int

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        covariance = as_matrix(self.covariance, 'covariance')
        try:
            linalg.cholesky(covariance, lower=True)
        except linalg.LinAlgError as e:
            raise ValueError(f"noise covariance must be positive definite: {e}") from e
        covariance.setflags(write=False)
        object.__setattr__(self, 'covariance', covariance)

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]


def kernel_half_width(sigma: float, dt: float) -> int:
    """Kernel support on each side of the center, in samples"""
    return int(math.ceil(4.0 * sigma / dt)) if sigma > 0 else 0


def gaussian_kernel(sigma: float, dt: float) -> np.ndarray:
    half = kernel_half_width(sigma, dt)
    if half == 0:
        return np.ones(1)
    t = np.arange(-half, half + 1) * dt
    kernel = np.exp(-t ** 2 / (2.0 * sigma ** 2))
    return kernel / np.sqrt(np.sum(kernel ** 2))


def colored_noise(n_samples: int, cfg: ColoredNoiseConfig, dt: float) -> np.ndarray:
    """
    Draw a colored noise sequence

    Args:
        n_samples: Sequence length
        cfg: Kernel width, target covariance and seed
        dt: Sampling interval

    Returns:
        n_samples x d array

    Raises:
        ValueError: If n_samples does not exceed the kernel support
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    half = kernel_half_width(cfg.sigma, dt)
    if n_samples <= max(2 * half + 1, cfg.dim):
        raise ValueError(
            f"n_samples={n_samples} must exceed the kernel support of {2 * half + 1} samples "
            f"and the noise dimension {cfg.dim}"
        )

    rng = np.random.default_rng(cfg.seed)
    white = rng.standard_normal((n_samples + 2 * half, cfg.dim))
    if half:
        filtered = signal.fftconvolve(white, gaussian_kernel(cfg.sigma, dt)[:, None], mode='valid', axes=0)
    else:
        filtered = white

    sample_cov = filtered.T @ filtered / n_samples
    whitening = linalg.cholesky(sample_cov, lower=True)
    unit = linalg.solve_triangular(whitening, filtered.T, lower=True).T
    return unit @ linalg.cholesky(cfg.covariance, lower=True).T


class ColoredNoiseStream:
    """
    Unbounded colored noise, drawn chunk by chunk from one white sequence

    Each chunk is convolved together with the last 2 * half_width white
    samples of the previous one, so the autocorrelation carries across
    chunk boundaries. Filtered unit white noise already has unit variance;
    samples are colored by the Cholesky factor of the target covariance
    without per-chunk whitening, so the covariance holds in expectation.
    """

    def __init__(self, cfg: ColoredNoiseConfig, dt: float, chunk_size: int = 4096):
        if dt <= 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        self.cfg = cfg
        self.half = kernel_half_width(cfg.sigma, dt)
        self.kernel = gaussian_kernel(cfg.sigma, dt)[:, None]
        self.factor = linalg.cholesky(cfg.covariance, lower=True)
        self.chunk_size = max(chunk_size, 2 * self.half + 1)
        self.rng = np.random.default_rng(cfg.seed)
        self.tail = self.rng.standard_normal((2 * self.half, cfg.dim))
        self.position = 0
        self.buffer = self._draw()

    def _draw(self) -> np.ndarray:
        white = np.concatenate([self.tail, self.rng.standard_normal((self.chunk_size, self.cfg.dim))])
        self.tail = white[white.shape[0] - 2 * self.half:]
        filtered = signal.fftconvolve(white, self.kernel, mode='valid', axes=0) if self.half else white
        return filtered @ self.factor.T

    def next(self) -> np.ndarray:
        if self.position == self.chunk_size:
            self.position = 0
            self.buffer = self._draw()
        sample = self.buffer[self.position]
        self.position += 1
        return sample
