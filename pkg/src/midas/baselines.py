"""Annealed importance sampling with random-walk Metropolis moves."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import WeightedSampleSet
from .targets import ExplorationDensity, TargetDensity

__all__ = ["AISConfig", "AISResult", "geometric_schedule", "rw_metropolis_step", "ais_run"]


@dataclass(frozen=True)
class AISConfig:
    """Annealed importance sampling settings.

    ``proposal_scale=None`` means ``0.5 / sqrt(d)``.
    """

    K: int = 10
    batch: int = 300
    n_mh: int = 20
    beta_min: float = 1e-4
    proposal_scale: float | None = None

    def __post_init__(self):
        if self.K < 1 or self.batch < 1 or self.n_mh < 0:
            raise ValueError("need K >= 1, batch >= 1, n_mh >= 0")
        if not 0.0 < self.beta_min < 1.0:
            raise ValueError("beta_min must lie in (0, 1)")

    def scale_for(self, d: int) -> float:
        return 0.5 / np.sqrt(d) if self.proposal_scale is None else float(self.proposal_scale)

    @property
    def nominal_evaluations(self) -> int:
        """The headline count ``K * batch * n_mh``."""
        return self.K * self.batch * self.n_mh

    @property
    def actual_evaluations(self) -> int:
        """One evaluation per weight update plus one per Metropolis proposal."""
        return self.K * self.batch * (self.n_mh + 1)


@dataclass
class AISResult:
    samples: WeightedSampleSet
    log_weights: np.ndarray
    evaluations: int
    nominal_evaluations: int
    acceptance: list = field(default_factory=list)


def geometric_schedule(K: int, beta_min: float):
    """``beta_k = beta_min ** (1 - k/K)`` for ``k = 0..K``."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if not 0.0 < beta_min < 1.0:
        raise ValueError("beta_min must lie in (0, 1)")
    k = np.arange(K + 1)
    betas = beta_min ** (1.0 - k / K)
    betas[-1] = 1.0
    return betas


def rw_metropolis_step(log_density, x, scale, rng: np.random.Generator, current_logp=None):
    """One random-walk Metropolis update, vectorized over rows of `x`.

    Consumes exactly two RNG calls: the Gaussian proposal, then the
    uniforms for the accept test.

    Returns
    -------
    x_new, logp_new, accepted
        With `current_logp` omitted only ``x_new`` is returned.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    lp = np.atleast_1d(log_density(xs)) if current_logp is None else np.atleast_1d(current_logp)
    prop = xs + scale * rng.standard_normal(xs.shape)
    lp_prop = np.atleast_1d(log_density(prop))
    u = rng.random(xs.shape[0])
    with np.errstate(invalid="ignore"):
        delta = lp_prop - lp
    accept = np.log(u) < np.where(np.isnan(delta), -np.inf, delta)
    out = np.where(accept[:, None], prop, xs)
    new_lp = np.where(accept, lp_prop, lp)
    if current_logp is None:
        return out[0] if single else out
    return (out[0] if single else out), new_lp, accept


def ais_run(config: AISConfig, target: TargetDensity, q0: ExplorationDensity, rng: np.random.Generator) -> AISResult:
    """Anneal a batch from ``q0`` to ``f_u`` along ``q0^(1-beta) f_u^beta``.

    For each level ``k = 1..K`` the log-weight gains
    ``(beta_k - beta_{k-1}) (log f_u(X) - log q0(X))`` and then `n_mh`
    Metropolis steps target the level-``k`` density.
    """
    d = target.dim
    betas = geometric_schedule(config.K, config.beta_min)
    scale = config.scale_for(d)
    x = q0.sample(rng, config.batch)
    log_w = np.zeros(config.batch)
    acc_rates = []
    evals = 0
    for k in range(1, config.K + 1):
        log_f = target.log_unnorm(x)
        log_q = q0.log_density(x)
        evals += config.batch
        log_w = log_w + (betas[k] - betas[k - 1]) * (log_f - log_q)
        beta = betas[k]

        def level(y, beta=beta):
            return beta * target.log_unnorm(y) + (1.0 - beta) * q0.log_density(y)

        lp = beta * log_f + (1.0 - beta) * log_q
        n_acc = 0
        for _ in range(config.n_mh):
            x, lp, acc = rw_metropolis_step(level, x, scale, rng, current_logp=lp)
            n_acc += int(acc.sum())
            evals += config.batch
        acc_rates.append(n_acc / (config.batch * config.n_mh) if config.n_mh else float("nan"))
    samples = WeightedSampleSet.from_log_weights(x, log_w)
    return AISResult(samples, log_w, evals, config.nominal_evaluations, acc_rates)
