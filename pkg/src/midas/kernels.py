"""Smoothing kernels with unit covariance and their bandwidth-scaled versions.

Two families are provided. The Gaussian kernel is the standard normal
density on R^d. The Epanechnikov kernel is the product of one-dimensional
Epanechnikov densities rescaled to unit variance, i.e. supported on
[-sqrt(5), sqrt(5)] per coordinate.

All evaluation functions are vectorized over leading axes: an input of
shape ``(..., d)`` gives an output of shape ``(...)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Kernel",
    "kernel_density",
    "kernel_log_density",
    "scaled_density",
    "scaled_log_density",
    "kernel_sample",
]

_LOG_2PI = np.log(2.0 * np.pi)
_SQRT5 = np.sqrt(5.0)
# (3/4)(1 - t^2) on [-1, 1] has variance 1/5; u = sqrt(5) t has unit variance
_EPAN_PEAK = 3.0 / (4.0 * _SQRT5)

FAMILIES = ("gaussian", "epanechnikov")


@dataclass(frozen=True)
class Kernel:
    """A mean-zero, identity-covariance probability density on R^d.

    Parameters
    ----------
    family : {"gaussian", "epanechnikov"}
        Kernel family.
    dim : int
        Dimension d of the space.
    """

    family: str = "gaussian"
    dim: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"kernel dimension must be a positive integer, got {self.dim!r}")

    @property
    def peak(self) -> float:
        """Density value at the origin."""
        if self.family == "gaussian":
            return float(np.exp(-0.5 * self.dim * _LOG_2PI))
        return float(_EPAN_PEAK**self.dim)

    @property
    def support_radius(self) -> float:
        """Half-width of the per-coordinate support (``inf`` for Gaussian)."""
        return np.inf if self.family == "gaussian" else float(_SQRT5)

    def _check(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 0 or u.shape[-1] != self.dim:
            raise ValueError(
                f"expected points with trailing dimension {self.dim}, got shape {u.shape}"
            )
        return u

    def log_density(self, u):
        """Log of K(u); ``-inf`` outside the support."""
        u = self._check(u)
        if self.family == "gaussian":
            return -0.5 * np.sum(u * u, axis=-1) - 0.5 * self.dim * _LOG_2PI
        inside = np.all(np.abs(u) < _SQRT5, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            per_coord = np.log(np.clip(1.0 - u * u / 5.0, 0.0, None))
            out = np.sum(per_coord, axis=-1) + self.dim * np.log(_EPAN_PEAK)
        return np.where(inside, out, -np.inf)

    def density(self, u):
        """K(u)."""
        return np.exp(self.log_density(u))

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw from K.

        Returns an array of shape ``(d,)`` when `size` is None, else
        ``(size, d)``. Gaussian draws consume one ``standard_normal`` call;
        Epanechnikov draws consume one ``uniform`` call for three
        auxiliary variates per coordinate.
        """
        shape = (self.dim,) if size is None else (int(size), self.dim)
        if self.family == "gaussian":
            return rng.standard_normal(shape)
        # Devroye's rule: of three U(-1, 1) variates, take the second if the
        # third has the largest modulus, else the third.
        v = rng.uniform(-1.0, 1.0, size=(3,) + shape)
        a = np.abs(v)
        take_second = (a[2] >= a[1]) & (a[2] >= a[0])
        return _SQRT5 * np.where(take_second, v[1], v[2])


def kernel_log_density(kernel: Kernel, u):
    return kernel.log_density(u)


def kernel_density(kernel: Kernel, u):
    """Evaluate K(u) for a unit-covariance kernel."""
    return kernel.density(u)


def scaled_log_density(kernel: Kernel, b, x, center):
    """Log of K_b(x - center) = log(b^{-d} K((x - center) / b)).

    `b` may be a scalar or an array broadcastable against the leading
    axes of ``x - center``.
    """
    b = np.asarray(b, dtype=float)
    if np.any(b <= 0):
        raise ValueError("bandwidth must be positive")
    u = (np.asarray(x, dtype=float) - np.asarray(center, dtype=float)) / b[..., None]
    return kernel.log_density(u) - kernel.dim * np.log(b)


def scaled_density(kernel: Kernel, b, x, center):
    """K_b(x - center) with K_b(v) = b^{-d} K(v / b)."""
    return np.exp(scaled_log_density(kernel, b, x, center))


def kernel_sample(kernel: Kernel, rng: np.random.Generator, size: int | None = None):
    return kernel.sample(rng, size)
