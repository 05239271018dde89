"""Evaluation metrics for weighted particle approximations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .policy import DegenerateWeightsError
from .targets import UnsupportedError

__all__ = [
    "WeightedSampleSet",
    "StepQuantile",
    "weighted_quantile",
    "w2_1d",
    "sliced_w2",
    "self_normalized_estimate",
    "effective_sample_size",
    "clt_diagnostic",
    "grid_distance",
    "from_store",
]


@dataclass(frozen=True)
class WeightedSampleSet:
    """Points with nonnegative weights, read in self-normalized form.

    Parameters
    ----------
    points : ndarray, shape (N, d)
    weights : ndarray, shape (N,)
        Nonnegative with a positive sum. Weights may be given on any
        scale; use :meth:`from_log_weights` when they span many orders of
        magnitude.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if pts.shape[0] != w.size:
            raise ValueError("points and weights have different lengths")
        if np.any(w < 0) or np.any(np.isnan(w)):
            raise ValueError("weights must be nonnegative")
        if not w.sum() > 0:
            raise DegenerateWeightsError("weights sum to zero")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_log_weights(cls, points, log_weights):
        lw = np.asarray(log_weights, dtype=float)
        finite = np.isfinite(lw)
        if not finite.any():
            raise DegenerateWeightsError("all log-weights are -inf")
        return cls(points, np.exp(lw - lw[finite].max()))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def normalized_weights(self):
        return self.weights / self.weights.sum()


def from_store(store, weights: str = "raw") -> WeightedSampleSet:
    """Weighted measure of a particle store.

    ``weights="raw"`` uses the importance weights ``w_i``; ``"effective"``
    uses the decayed mixture weights ``W_{i,N}``.
    """
    if weights == "raw":
        return WeightedSampleSet.from_log_weights(store.positions, store.log_raw_weights)
    if weights == "effective":
        return WeightedSampleSet.from_log_weights(store.positions, store.log_base_scores)
    raise ValueError("weights must be 'raw' or 'effective'")


@dataclass(frozen=True)
class StepQuantile:
    """Right-continuous step CDF of a weighted discrete measure on R.

    ``values`` are sorted distinct support points and ``cdf[k]`` is the
    mass of ``(-inf, values[k]]``; ``cdf[-1] == 1``.
    """

    values: np.ndarray
    cdf: np.ndarray

    def __call__(self, u):
        """Generalized inverse ``inf{x : F(x) >= u}``."""
        u = np.asarray(u, dtype=float)
        k = np.searchsorted(self.cdf, u, side="left")
        return self.values[np.minimum(k, self.values.size - 1)]


def weighted_quantile(values, weights) -> StepQuantile:
    values = np.asarray(values, dtype=float).reshape(-1)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if values.size != weights.size:
        raise ValueError("values and weights differ in length")
    total = weights.sum()
    if not total > 0:
        raise DegenerateWeightsError("zero total weight")
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    keep = np.ones(v.size, dtype=bool)
    keep[:-1] = v[1:] != v[:-1]  # last of each run of ties
    cdf = np.cumsum(w)[keep] / total
    cdf[-1] = 1.0
    return StepQuantile(v[keep], cdf)


def _w2_sq(mu: StepQuantile, nu: StepQuantile) -> float:
    knots = np.union1d(mu.cdf, nu.cdf)
    knots = knots[(knots > 0) & (knots < 1)]
    edges = np.concatenate(([0.0], knots, [1.0]))
    widths = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    diff = mu(mids) - nu(mids)
    return float(np.sum(widths * diff * diff))


def w2_1d(mu: StepQuantile, nu: StepQuantile) -> float:
    """Exact Wasserstein-2 distance between two weighted measures on R.

    Both quantile functions are constant between consecutive knots of the
    merged CDF levels, so the integral of their squared difference is a
    finite sum.
    """
    return float(np.sqrt(_w2_sq(mu, nu)))


def sliced_w2(a: WeightedSampleSet, b: WeightedSampleSet, n_proj: int = 100, rng=None) -> float:
    """Monte Carlo estimate of ``E_theta[W_2(theta#a, theta#b)^2]``.

    Directions are normalized Gaussian vectors, uniform on the sphere.
    Note the returned value is the mean *squared* 1-D distance.
    """
    if a.dim != b.dim:
        raise ValueError("sample sets have different dimensions")
    if n_proj < 1:
        raise ValueError("n_proj must be positive")
    rng = np.random.default_rng(rng)
    theta = rng.standard_normal((int(n_proj), a.dim))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    pa = a.points @ theta.T
    pb = b.points @ theta.T
    total = 0.0
    for j in range(theta.shape[0]):
        total += _w2_sq(weighted_quantile(pa[:, j], a.weights), weighted_quantile(pb[:, j], b.weights))
    return total / theta.shape[0]


def self_normalized_estimate(samples: WeightedSampleSet, h: Callable) -> float:
    """``sum_i w_i h(X_i) / sum_i w_i``."""
    vals = np.asarray(h(samples.points), dtype=float).reshape(-1)
    return float(np.dot(samples.normalized_weights, vals))


def effective_sample_size(weights) -> float:
    """``(sum w)^2 / sum w^2``."""
    w = np.asarray(weights, dtype=float)
    s = w.sum()
    if not s > 0:
        raise DegenerateWeightsError("zero total weight")
    p = w / s
    return float(1.0 / np.dot(p, p))


def clt_diagnostic(run_factory: Callable, h: Callable, R: int, n: int, mu_h: float, mu_h2: float):
    """Compare the spread of ``sqrt(n) (mu_hat_n(h) - mu(h))`` to ``sigma^2(h)``.

    Parameters
    ----------
    run_factory : callable
        ``run_factory(r)`` returns a :class:`WeightedSampleSet` of size
        `n` from an independent run indexed by ``r``.
    h : callable
        Test function, vectorized over points ``(N, d)``.
    R : int
        Number of independent runs (at least 20).
    n : int
        Sample size of each run.
    mu_h, mu_h2 : float
        Exact values of ``∫ h f`` and ``∫ h^2 f``.

    Returns
    -------
    dict
        ``empirical_var``, ``target_var``, ``ratio`` and the rescaled errors.
    """
    if R < 20:
        raise ValueError("at least 20 repetitions are needed")
    errors = np.empty(R)
    for r in range(R):
        est = self_normalized_estimate(run_factory(r), h)
        errors[r] = np.sqrt(n) * (est - mu_h)
    target_var = float(mu_h2 - mu_h**2)
    emp = float(np.var(errors, ddof=1))
    ratio = emp / target_var if target_var > 0 else (0.0 if emp == 0 else np.inf)
    return {"empirical_var": emp, "target_var": target_var, "ratio": ratio, "errors": errors}


def grid_distance(density_a: Callable, density_b: Callable, lower, upper, num=2001):
    """Sup-norm and Riemann L1 distance of two densities on a grid (d <= 2).

    Parameters
    ----------
    density_a, density_b : callable
        Vectorized over points of shape ``(N, d)``.
    lower, upper : array_like, shape (d,)
        Box corners.
    num : int or sequence of int
        Grid points per axis.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    d = lower.size
    if d > 2:
        raise UnsupportedError("grid distances are only supported for d <= 2")
    nums = np.broadcast_to(np.asarray(num), (d,))
    axes = [np.linspace(lower[i], upper[i], int(nums[i])) for i in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    diff = np.abs(np.asarray(density_a(pts), float) - np.asarray(density_b(pts), float))
    cell = np.prod([(upper[i] - lower[i]) / (int(nums[i]) - 1) for i in range(d)])
    return {"sup_abs": float(diff.max()), "l1": float(diff.sum() * cell)}
