"""MIDAS and SubMIDAS driver loops, hyperparameter schedules and a validator.

One algorithm step ``n`` draws a batch from the current policy ``q_{n-1}``
(or its subsampled version), evaluates the target once per drawn point,
and inserts the batch with step size ``gamma_n`` and bandwidth ``b_n``.
The first step draws ``m0`` points from ``q0`` when burn-in is enabled.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .kernels import Kernel
from .policy import MixturePolicy, ParticleStore, subsample_proposal
from .targets import ExplorationDensity, TargetDensity

__all__ = [
    "InconsistencyError",
    "Schedule",
    "RunConfig",
    "StepRecord",
    "schedule_values",
    "midas_run",
    "submidas_run",
    "run_sampler",
    "SamplerRun",
    "PowerLaw",
    "ScheduleFamily",
    "ValidationReport",
    "validate_schedule",
]


class InconsistencyError(RuntimeError):
    """An importance weight was not finite (the proposal vanished at a draw)."""


@dataclass(frozen=True)
class Schedule:
    """Step sizes, bandwidths, mixture rates and subsample sizes.

    Defaults::

        gamma_n = 1 / (n + 10)
        b_n     = (0.4 / sqrt(d)) * (m n / 10000 + 1) ** (-1 / (4 + d))
        lam_n   = 1 / log(m n + 10)
        ell_n   = ceil(n ** 0.5)

    with ``lam_n = 0.5`` for ``n <= 10`` and a first batch of 2000 points
    when burn-in is on.

    ``lambda_kind="power"`` replaces the mixture rate by
    ``min(1, lambda_scale * (m n + 10) ** -lambda_exponent)``. Setting
    `bandwidth_scale` overrides ``0.4 / sqrt(d)`` and `bandwidth_exponent`
    overrides ``1 / (4 + d)``.
    """

    gamma_scale: float = 1.0
    gamma_offset: float = 10.0
    gamma_exponent: float = 1.0
    bandwidth_scale: Optional[float] = None
    bandwidth_exponent: Optional[float] = None
    bandwidth_ref: float = 10000.0
    lambda_kind: str = "log"
    lambda_scale: float = 1.0
    lambda_exponent: float = 0.5
    subsample_exponent: float = 0.5
    burnin: bool = True
    burnin_batch: int = 2000
    burnin_lambda: float = 0.5
    burnin_steps: int = 10

    def __post_init__(self):
        if self.lambda_kind not in ("log", "power"):
            raise ValueError("lambda_kind must be 'log' or 'power'")
        if self.gamma_scale <= 0 or self.gamma_exponent < 0:
            raise ValueError("gamma_scale must be positive and gamma_exponent nonnegative")
        if self.burnin_batch < 1:
            raise ValueError("burnin_batch must be positive")

    def gamma(self, n: int) -> float:
        return self.gamma_scale * (n + self.gamma_offset) ** (-self.gamma_exponent)

    def bandwidth(self, n: int, m: int, d: int) -> float:
        scale = 0.4 / math.sqrt(d) if self.bandwidth_scale is None else self.bandwidth_scale
        expo = 1.0 / (4 + d) if self.bandwidth_exponent is None else self.bandwidth_exponent
        return scale * (m * n / self.bandwidth_ref + 1.0) ** (-expo)

    def mixture(self, n: int, m: int) -> float:
        if self.burnin and n <= self.burnin_steps:
            return self.burnin_lambda
        if self.lambda_kind == "log":
            return min(1.0, self.lambda_scale / math.log(m * n + 10.0))
        return min(1.0, self.lambda_scale * (m * n + 10.0) ** (-self.lambda_exponent))

    def subsample(self, n: int) -> int:
        return max(1, math.ceil(n**self.subsample_exponent - 1e-12))

    def first_batch(self, m: int) -> int:
        return self.burnin_batch if self.burnin else m


def schedule_values(schedule: Schedule, n: int, m: int, d: int):
    """``(gamma_n, b_n, lam_n, ell_n)`` at step ``n >= 1``."""
    if n < 1:
        raise ValueError("schedule index n must be >= 1")
    return (
        schedule.gamma(n),
        schedule.bandwidth(n, m, d),
        schedule.mixture(n, m),
        schedule.subsample(n),
    )


@dataclass
class RunConfig:
    """Settings of a single sampler run.

    `budget` is the total number of target evaluations. The first step
    uses ``schedule.first_batch(batch)`` points, the others `batch`
    points; the last batch is truncated to fit the budget.
    """

    eta: float = 1.0
    budget: int = 60000
    batch: int = 300
    algorithm: str = "submidas"
    schedule: Schedule = field(default_factory=Schedule)
    kernel: str = "gaussian"
    seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.algorithm not in ("midas", "submidas"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.budget < 1 or self.batch < 1:
            raise ValueError("budget and batch must be positive")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["schedule"] = asdict(self.schedule)
        return out


@dataclass
class StepRecord:
    """Per-step bookkeeping returned by :meth:`SamplerRun.step`."""

    step: int
    size: int
    gamma: float
    bandwidth: float
    lam: float
    ell: Optional[int]
    seconds: float


class SamplerRun:
    """Step-by-step state of one MIDAS or SubMIDAS run.

    :func:`run_sampler` drives this loop to the budget; stepping by hand
    allows timing or inspecting individual steps.
    """

    def __init__(self, config: RunConfig, target: TargetDensity, q0: ExplorationDensity, rng: np.random.Generator):
        if q0.dim != target.dim:
            raise ValueError("q0 and target dimensions differ")
        self.config = config
        self.target = target
        self.q0 = q0
        self.rng = rng
        self.store = ParticleStore(
            target.dim, config.eta, Kernel(config.kernel, target.dim), capacity=min(config.budget, 1 << 20)
        )
        self.used = 0
        self.n = 0
        self.lam = 1.0  # q_0 is the exploration density itself

    @property
    def done(self) -> bool:
        return self.used >= self.config.budget

    def step(self, algorithm: Optional[str] = None) -> StepRecord:
        """Run step ``n + 1``; `algorithm` overrides ``config.algorithm`` for this step."""
        cfg, sched, rng = self.config, self.config.schedule, self.rng
        t0 = time.perf_counter()
        n = self.n + 1
        m, d = cfg.batch, self.target.dim
        size = min(sched.first_batch(m) if n == 1 else m, max(cfg.budget - self.used, 1))
        policy = MixturePolicy(self.store, self.q0, self.lam)
        ell = None
        if (algorithm or cfg.algorithm) == "submidas" and n >= 2:
            ell = sched.subsample(n - 1)
            policy = subsample_proposal(policy, ell, rng)
        x = policy.sample(rng, size)
        log_w = self.target.log_unnorm(x) - policy.log_density(x)
        if np.any(np.isnan(log_w)) or np.any(log_w == np.inf):
            raise InconsistencyError(f"non-finite importance weight at step {n}")
        gamma = sched.gamma(n)
        b = sched.bandwidth(n, m, d)
        self.store.insert(x, log_w, gamma, b, batch_scale=size)
        self.used += size
        self.n = n
        self.lam = sched.mixture(n, m)
        self.store.final_lambda = self.lam
        return StepRecord(n, size, gamma, b, self.lam, ell, time.perf_counter() - t0)


def run_sampler(
    config: RunConfig,
    target: TargetDensity,
    q0: ExplorationDensity,
    rng: np.random.Generator,
    on_checkpoint: Optional[Callable[[ParticleStore, int], None]] = None,
    records: Optional[list] = None,
) -> ParticleStore:
    """Run MIDAS or SubMIDAS (per ``config.algorithm``) until the budget is spent.

    `on_checkpoint(store, evaluations)` is called each time the number of
    target evaluations crosses a multiple of ``config.checkpoint_every``
    and once at the end. The store must not be modified by the callback.
    Step records are appended to `records` when given.
    """
    run = SamplerRun(config, target, q0, rng)
    next_mark = config.checkpoint_every if config.checkpoint_every > 0 else None
    while not run.done:
        rec = run.step()
        if records is not None:
            records.append(rec)
        if on_checkpoint is not None and next_mark is not None and next_mark <= run.used < config.budget:
            on_checkpoint(run.store, run.used)
            while next_mark <= run.used:
                next_mark += config.checkpoint_every
    if on_checkpoint is not None:
        on_checkpoint(run.store, run.used)
    return run.store


def midas_run(config, target, q0, rng, on_checkpoint=None, records=None) -> ParticleStore:
    """Algorithm with the full O(n) policy density at every step."""
    if config.algorithm != "midas":
        config = RunConfig(**{**config.__dict__, "algorithm": "midas"})
    return run_sampler(config, target, q0, rng, on_checkpoint, records)


def submidas_run(config, target, q0, rng, on_checkpoint=None, records=None) -> ParticleStore:
    """Subsampled variant: at step n, proposal over ``ell_{n-1}`` resampled particles."""
    if config.algorithm != "submidas":
        config = RunConfig(**{**config.__dict__, "algorithm": "submidas"})
    return run_sampler(config, target, q0, rng, on_checkpoint, records)


def current_policy(store: ParticleStore, q0: ExplorationDensity, lam: Optional[float] = None) -> MixturePolicy:
    """The full policy after the last step of a run."""
    if lam is None:
        lam = getattr(store, "final_lambda", 0.0)
    return MixturePolicy(store, q0, lam)


# ---------------------------------------------------------------------------
# schedule validation


@dataclass(frozen=True)
class PowerLaw:
    """``scale * n ** (-exponent) * log(n) ** log_power``."""

    scale: float
    exponent: float
    log_power: float = 0.0


@dataclass(frozen=True)
class ScheduleFamily:
    """Asymptotic descriptors of ``(gamma_n, b_n, lam_n)``.

    ``lam`` is either a :class:`PowerLaw` or the string ``"log"`` meaning
    ``lam_n ~ C / log n``.
    """

    gamma: PowerLaw
    bandwidth: PowerLaw
    lam: object = "log"

    @classmethod
    def from_schedule(cls, schedule: Schedule, d: int) -> "ScheduleFamily":
        """Tail descriptors of a concrete :class:`Schedule` (offsets drop out)."""
        gamma = PowerLaw(schedule.gamma_scale, schedule.gamma_exponent)
        bexp = 1.0 / (4 + d) if schedule.bandwidth_exponent is None else schedule.bandwidth_exponent
        bandwidth = PowerLaw(1.0, bexp)
        if schedule.lambda_kind == "log":
            lam = "log"
        else:
            lam = PowerLaw(schedule.lambda_scale, schedule.lambda_exponent)
        return cls(gamma, bandwidth, lam)


@dataclass
class ValidationReport:
    """Outcome of :func:`validate_schedule`.

    ``status`` is ``"pass"``, ``"fail"`` or ``"indeterminate"``;
    ``reason`` names the first condition that did not pass.
    ``checks`` records every evaluated condition.
    """

    status: str
    reason: str = ""
    branch: str = ""
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return asdict(self)


def _frac(v) -> Fraction:
    return Fraction(v).limit_denominator(10**6)


def validate_schedule(family: ScheduleFamily, eta: float, d: int) -> ValidationReport:
    """Check step-size, bandwidth and mixture-rate conditions for convergence.

    Conditions, in order:

    1. ``gamma_n``, ``b_n``, ``lam_n`` decrease to 0.
    2. ``gamma_n = C n^-alpha`` with ``alpha`` in (1/2, 1) and ``C > 0``, or
       ``alpha = 1`` and ``C > 1``; this implies ``sum gamma_n^2 < inf``.
    3. For ``eta >= 1/2``: ``n gamma^2 log n / (lam b^d) -> 0``; for
       ``eta < 1/2``: ``n gamma^2 log n / (lam^(2(1-eta)) b^(2d(1-eta))) -> 0``,
       decided by exponent arithmetic on n with log factors tracked
       separately.

    Exponents are compared as exact rationals (denominators up to 1e6).
    """
    checks = []
    g, bw, lam = family.gamma, family.bandwidth, family.lam
    if not isinstance(g, PowerLaw) or not isinstance(bw, PowerLaw):
        return ValidationReport("indeterminate", "unsupported functional family", checks=checks)
    if not (isinstance(lam, PowerLaw) or lam == "log"):
        return ValidationReport("indeterminate", "unsupported mixture-rate family", checks=checks)
    alpha, k = _frac(g.exponent), _frac(g.log_power)
    beta = _frac(bw.exponent)

    def decreasing(p: PowerLaw):
        e, lp = _frac(p.exponent), _frac(p.log_power)
        return p.scale > 0 and (e > 0 or (e == 0 and lp < 0))

    mono = decreasing(g) and decreasing(bw) and (lam == "log" or decreasing(lam))
    checks.append(("decreasing to 0", mono))
    if not mono:
        which = [name for name, p in (("gamma", g), ("bandwidth", bw)) if not decreasing(p)]
        if lam != "log" and not decreasing(lam):
            which.append("lambda")
        return ValidationReport("fail", f"not decreasing to 0: {', '.join(which)}", checks=checks)

    # Sum of squares: n^(-2 alpha) log^(2k) n summable iff 2 alpha > 1, or 2 alpha = 1 and 2k < -1.
    summable = 2 * alpha > 1 or (2 * alpha == 1 and 2 * k < -1)
    checks.append(("sum gamma^2 < inf", summable))
    if not summable:
        return ValidationReport("fail", "sum of gamma_n^2 diverges", checks=checks)
    first = None  # (status, reason) of the first condition that does not pass
    if k != 0:
        first = ("indeterminate", "step size with log factor: step-size regularity not covered")
        checks.append(("step-size regularity", None))
    elif alpha > 1:
        first = ("fail", "gamma_n decays faster than 1/n")
        checks.append(("step-size regularity", False))
    elif alpha == 1 and not g.scale > 1:
        first = ("indeterminate", "alpha = 1 requires C > 1")
        checks.append(("step-size regularity", False))
    else:
        checks.append(("step-size regularity", True))

    # ratio = n gamma^2 log n / (lam^a b^(d a)), a = 1 or 2(1 - eta);
    # lam ~ n^-rho log^l n, b ~ n^-beta log^kb n.
    # Evaluated even after an earlier miss so the report carries the branch.
    if lam == "log":
        rho, lam_log = Fraction(0), Fraction(-1)
    else:
        rho, lam_log = _frac(lam.exponent), _frac(lam.log_power)
    if eta >= 0.5:
        branch, a = "eta >= 1/2", Fraction(1)
    else:
        branch, a = "eta < 1/2", 2 * (1 - _frac(eta))
    p_n = 1 - 2 * alpha + a * (rho + d * beta)
    p_log = 1 + 2 * k - a * (lam_log + d * _frac(bw.log_power))
    ok_ratio = p_n < 0 or (p_n == 0 and p_log < 0)
    checks.append((f"ratio condition ({branch}): n^{p_n} log^{p_log} n -> 0", ok_ratio))
    if first is None and not ok_ratio:
        first = ("fail", f"ratio condition ({branch}) does not vanish: n exponent {p_n}, log exponent {p_log}")
    if first is not None:
        return ValidationReport(first[0], first[1], branch, checks)
    return ValidationReport("pass", "", branch, checks)
