"""Unnormalized target densities and heavy-tailed exploration densities.

A :class:`TargetDensity` wraps a vectorized unnormalized log-density
``log f_u`` and, for the synthetic benchmarks, an exact sampler of the
normalized target. :class:`ExplorationDensity` is the fixed component
``q0`` mixed into every policy; it is normalized and can be sampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln, logsumexp

__all__ = [
    "UnsupportedError",
    "TargetDensity",
    "ExplorationDensity",
    "log_unnorm_density",
    "make_toy_target",
    "reference_sample",
    "default_exploration",
    "TOY_TARGETS",
]

TOY_TARGETS = ("coldstart", "mixture", "anisotropic", "fourmodes")

_LOG_2PI = np.log(2.0 * np.pi)


class UnsupportedError(RuntimeError):
    """Raised when an operation is not available for a given object."""


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != dim:
        raise ValueError(f"expected points with trailing dimension {dim}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class TargetDensity:
    """Unnormalized target density ``f_u`` on R^d.

    Parameters
    ----------
    dim : int
        Dimension d.
    log_unnorm : callable
        Maps an array of shape ``(..., d)`` to ``log f_u`` of shape
        ``(...)``. May return ``-inf``.
    sampler : callable, optional
        ``sampler(M, rng)`` returning ``M`` exact i.i.d. draws from the
        normalized target, shape ``(M, d)``.
    name : str
    params : dict
        Construction parameters, echoed into run manifests.
    log_norm : float, optional
        ``log`` of the normalizing constant, i.e. ``log ∫ f_u``, when known.
    """

    dim: int
    log_unnorm: Callable[[np.ndarray], np.ndarray]
    sampler: Optional[Callable[[int, np.random.Generator], np.ndarray]] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    log_norm: Optional[float] = None

    def __call__(self, x):
        return log_unnorm_density(self, x)

    def scaled(self, factor: float) -> "TargetDensity":
        """The same target with ``f_u`` multiplied by a positive constant."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        shift = float(np.log(factor))
        base = self.log_unnorm
        log_norm = None if self.log_norm is None else self.log_norm + shift
        return TargetDensity(
            self.dim,
            lambda x: base(x) + shift,
            self.sampler,
            self.name,
            dict(self.params, scale=factor),
            log_norm,
        )

    def normalized(self) -> "TargetDensity":
        """The normalized density f (requires a known normalizing constant)."""
        if self.log_norm is None:
            raise UnsupportedError(f"target {self.name!r} has no known normalizing constant")
        return self.scaled(float(np.exp(-self.log_norm)))


def log_unnorm_density(target: TargetDensity, x):
    """Evaluate ``log f_u`` at one point (shape ``(d,)``) or many (``(n, d)``)."""
    x = _as_points(x, target.dim)
    return target.log_unnorm(x)


def reference_sample(target: TargetDensity, M: int, rng: np.random.Generator):
    """Draw ``M`` exact samples from the normalized target."""
    if target.sampler is None:
        raise UnsupportedError(f"target {target.name!r} has no exact sampler")
    if M < 1:
        raise ValueError("M must be positive")
    return target.sampler(int(M), rng)


# ---------------------------------------------------------------------------
# Gaussian mixtures


def _gaussian_mixture(means, covs, weights, name, params, unnormalized_peak=False):
    """Mixture of Gaussians with diagonal covariances.

    With ``unnormalized_peak`` (single component only) the log-density is
    the bare quadratic ``-(x-mu)^T S^{-1} (x-mu) / 2`` so its maximum is 0.
    """
    means = np.atleast_2d(np.asarray(means, dtype=float))
    variances = np.atleast_2d(np.asarray(covs, dtype=float))
    weights = np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    k, d = means.shape
    log_w = np.log(weights)
    log_det = np.sum(np.log(variances), axis=1)
    log_const = log_w - 0.5 * (d * _LOG_2PI + log_det)
    sd = np.sqrt(variances)
    params = dict(params, means=means.tolist(), variances=variances.tolist(), weights=weights.tolist())

    if unnormalized_peak:
        assert k == 1

        def log_unnorm(x):
            z = (x - means[0]) / sd[0]
            return -0.5 * np.sum(z * z, axis=-1)

        log_norm = float(0.5 * (d * _LOG_2PI + log_det[0]))
    else:

        def log_unnorm(x):
            z = (x[..., None, :] - means) / sd
            return logsumexp(log_const - 0.5 * np.sum(z * z, axis=-1), axis=-1)

        log_norm = 0.0

    def sampler(M, rng):
        comp = rng.choice(k, size=M, p=weights)
        return means[comp] + sd[comp] * rng.standard_normal((M, d))

    return TargetDensity(d, log_unnorm, sampler, name, params, log_norm)


def make_toy_target(kind: str, dim: int = 2) -> TargetDensity:
    """Build one of the synthetic benchmark targets.

    Parameters
    ----------
    kind : {"coldstart", "mixture", "anisotropic", "fourmodes"}
        ``coldstart``: N((5/sqrt(d)) 1, (0.16/d) I), with log-density equal
        to 0 at the mean. ``mixture``: equal-weight mixture of
        N(±(1/(2 sqrt(d))) 1, (0.16/d) I). ``anisotropic``: same means with
        covariance (0.16/d) Diag(10, 1, ..., 1). ``fourmodes``: equal-weight
        mixture in d=2 with means (0,0), (10,0), (0,10), (10,10) and
        covariance 0.1 I.
    dim : int
    """
    d = int(dim)
    if d < 1:
        raise ValueError("dimension must be positive")
    params = {"kind": kind, "dim": d}
    if kind == "coldstart":
        mean = np.full(d, 5.0 / np.sqrt(d))
        var = np.full(d, 0.4**2 / d)
        return _gaussian_mixture(mean, var, [1.0], kind, params, unnormalized_peak=True)
    if kind in ("mixture", "anisotropic"):
        mu = np.full(d, 1.0 / (2.0 * np.sqrt(d)))
        var = np.full(d, 0.4**2 / d)
        if kind == "anisotropic":
            var[0] *= 10.0
        return _gaussian_mixture([mu, -mu], [var, var], [0.5, 0.5], kind, params)
    if kind == "fourmodes":
        if d != 2:
            raise ValueError("the four-mode target is defined in dimension 2 only")
        means = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]]
        var = [[0.1, 0.1]] * 4
        return _gaussian_mixture(means, var, [0.25] * 4, kind, params)
    raise ValueError(f"unknown toy target {kind!r}; expected one of {TOY_TARGETS}")


# ---------------------------------------------------------------------------
# Exploration density


@dataclass(frozen=True)
class ExplorationDensity:
    """Normalized Gaussian or multivariate Student-t density.

    Parameters
    ----------
    family : {"gaussian", "student"}
    location : array_like, shape (d,)
    scale : array_like, shape (d,) or (d, d)
        Covariance (Gaussian) or shape matrix (Student-t). A vector is
        read as a diagonal.
    dof : float
        Degrees of freedom of the Student-t.
    """

    family: str
    location: np.ndarray
    scale: np.ndarray
    dof: float = 3.0

    def __post_init__(self):
        if self.family not in ("gaussian", "student"):
            raise ValueError(f"unknown exploration family {self.family!r}")
        loc = np.atleast_1d(np.asarray(self.location, dtype=float))
        scale = np.asarray(self.scale, dtype=float)
        if scale.ndim <= 1:
            scale = np.diag(np.broadcast_to(scale, loc.shape).astype(float))
        if scale.shape != (loc.size, loc.size):
            raise ValueError("scale must be (d,) or (d, d)")
        chol = np.linalg.cholesky(scale)
        if self.dof <= 0:
            raise ValueError("dof must be positive")
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_half_logdet", float(np.sum(np.log(np.diag(chol)))))

    @property
    def dim(self) -> int:
        return self.location.size

    def log_density(self, x):
        x = _as_points(x, self.dim)
        diff = x - self.location
        flat = diff.reshape(-1, self.dim)
        z = solve_triangular(self._chol, flat.T, lower=True).T
        maha = np.sum(z * z, axis=-1).reshape(diff.shape[:-1])
        d = self.dim
        if self.family == "gaussian":
            return -0.5 * maha - 0.5 * d * _LOG_2PI - self._half_logdet
        nu = self.dof
        return (
            gammaln(0.5 * (nu + d))
            - gammaln(0.5 * nu)
            - 0.5 * d * np.log(nu * np.pi)
            - self._half_logdet
            - 0.5 * (nu + d) * np.log1p(maha / nu)
        )

    def density(self, x):
        return np.exp(self.log_density(x))

    def sample(self, rng: np.random.Generator, size: int):
        """Draw ``size`` points; shape ``(size, d)``.

        Consumes one ``standard_normal`` call and, for Student-t, one
        ``chisquare`` call.
        """
        z = rng.standard_normal((int(size), self.dim)) @ self._chol.T
        if self.family == "student":
            g = rng.chisquare(self.dof, size=int(size)) / self.dof
            z = z / np.sqrt(g)[:, None]
        return self.location + z

    def describe(self) -> dict:
        out = {
            "family": self.family,
            "location": self.location.tolist(),
            "scale_diag": np.diag(self.scale).tolist(),
        }
        if self.family == "student":
            out["dof"] = self.dof
        return out


def default_exploration(kind: str, dim: int) -> ExplorationDensity:
    """The exploration density paired with each benchmark target.

    ``coldstart``: Gaussian N(0, (5/d) I). ``mixture``/``anisotropic``:
    Student-t(3) at 0 with shape (5/d) I. ``fourmodes``: Student-t(3)
    at (5, 5) with shape 10 I. ``logistic``: Student-t(3) at 0 with
    identity shape.
    """
    d = int(dim)
    if kind == "coldstart":
        return ExplorationDensity("gaussian", np.zeros(d), np.full(d, 5.0 / d))
    if kind in ("mixture", "anisotropic"):
        return ExplorationDensity("student", np.zeros(d), np.full(d, 5.0 / d), dof=3.0)
    if kind == "fourmodes":
        return ExplorationDensity("student", np.full(2, 5.0), np.full(2, 10.0), dof=3.0)
    if kind == "logistic":
        return ExplorationDensity("student", np.zeros(d), np.ones(d), dof=3.0)
    raise ValueError(f"no default exploration density for {kind!r}")
