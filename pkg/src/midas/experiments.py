"""Experiment configuration and orchestration.

An experiment is a grid of runs over algorithms, learning rates and
seeds. Each run writes its own metrics CSV and JSON-lines manifest under
``<out>/runs/<run id>/``; the sweep then reduces them into
``<out>/aggregate.csv``.

Random streams: run ``(seed index i, algorithm index a, eta index e)``
samples with ``SeedSequence(seed, spawn_key=(i, a, e, 0))``. The
reference sample of seed ``i`` comes from ``spawn_key=(i, 0, 0, 1)`` and
is shared by all runs of that seed. Sliced-Wasserstein directions use
``spawn_key=(i, a, e, 2)``.
"""

from __future__ import annotations

import dataclasses
import importlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .baselines import AISConfig, ais_run
from .io import append_jsonl, read_csv, write_csv, write_particle_dump, write_weighted_samples
from .logistic import generate_waveform, load_dataset, logistic_posterior, predictive_accuracy, split_dataset
from .metrics import WeightedSampleSet, from_store, sliced_w2
from .samplers import RunConfig, Schedule, ScheduleFamily, run_sampler, validate_schedule
from .targets import TOY_TARGETS, default_exploration, make_toy_target, reference_sample

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "parse_config",
    "run_experiment",
    "run_single",
    "validate",
    "run_streams",
    "aggregate",
    "moment_estimates",
]

EXPERIMENTS = TOY_TARGETS + ("bayeslogistic", "custom")
ALGORITHMS = ("midas", "submidas", "ais")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass
class ExperimentSpec:
    """Fully resolved experiment settings (flat, JSON-serializable)."""

    experiment: str = "coldstart"
    dim: int = 2
    etas: list = field(default_factory=lambda: [1.0])
    seeds: object = 1
    seed: int = 0
    algorithms: list = field(default_factory=lambda: ["submidas"])
    budget: int = 60000
    batch: int = 300
    checkpoint_every: int = 6000
    kernel: str = "gaussian"
    weights: str = "raw"
    n_proj: int = 100
    ref_size: int = 10000
    dumps: str = "final"
    out: str = "midas-out"
    jobs: int = 1
    # schedule
    gamma_scale: float = 1.0
    gamma_offset: float = 10.0
    gamma_exponent: float = 1.0
    bandwidth_scale: Optional[float] = None
    bandwidth_exponent: Optional[float] = None
    lambda_kind: str = "log"
    lambda_scale: float = 1.0
    lambda_exponent: float = 0.5
    subsample_exponent: float = 0.5
    burnin: bool = True
    burnin_batch: int = 2000
    burnin_lambda: float = 0.5
    burnin_steps: int = 10
    # exploration density
    q0_dof: float = 3.0
    # annealed importance sampling
    ais_levels: list = field(default_factory=lambda: [5, 10, 30])
    ais_batch: int = 300
    ais_n_mh: int = 20
    ais_beta_min: float = 1e-4
    ais_proposal_scale: Optional[float] = None
    ais_match_budget: bool = False
    # logistic regression
    data_path: Optional[str] = None
    header: bool = False
    train_size: int = 400
    split_seed: int = 0
    data_seed: int = 0
    prior_a: float = 1.0
    prior_b: float = 0.01
    # custom target "module:factory", factory(dim) -> (target, q0)
    target_factory: Optional[str] = None

    def schedule(self) -> Schedule:
        return Schedule(
            gamma_scale=self.gamma_scale,
            gamma_offset=self.gamma_offset,
            gamma_exponent=self.gamma_exponent,
            bandwidth_scale=self.bandwidth_scale,
            bandwidth_exponent=self.bandwidth_exponent,
            lambda_kind=self.lambda_kind,
            lambda_scale=self.lambda_scale,
            lambda_exponent=self.lambda_exponent,
            subsample_exponent=self.subsample_exponent,
            burnin=self.burnin,
            burnin_batch=self.burnin_batch,
            burnin_lambda=self.burnin_lambda,
            burnin_steps=self.burnin_steps,
        )

    def seed_indices(self) -> list:
        """Seed indices of the sweep: ``range(seeds)`` or the explicit list."""
        if isinstance(self.seeds, int):
            return list(range(self.seeds))
        return list(self.seeds)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# keys without influence on results, left out of run manifests so that
# artifacts are byte-identical across output locations and job counts
_NOT_ECHOED = ("out", "jobs")
_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentSpec)}
_LIST_KEYS = {"etas": float, "algorithms": str, "ais_levels": int}
_OPTIONAL_FLOATS = {"bandwidth_scale", "bandwidth_exponent", "ais_proposal_scale"}
_OPTIONAL_STRS = {"data_path", "target_factory"}


def _coerce(key, value):
    """Convert a JSON value or a command-line string to the field's type."""
    if key == "seeds":
        if isinstance(value, str) and "," not in value:
            value = _coerce("seed", value)
        if isinstance(value, (str, list, tuple)):
            items = value.split(",") if isinstance(value, str) else value
            out = [_coerce("seed", v.strip() if isinstance(v, str) else v) for v in items if str(v).strip()]
            if len(set(out)) != len(out) or any(v < 0 for v in out):
                raise ConfigError(f"seeds: explicit seed indices must be distinct and nonnegative, got {value!r}")
            return out
        return _coerce("seed", value)
    if key in _LIST_KEYS:
        kind = _LIST_KEYS[key]
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        if not isinstance(value, (list, tuple)):
            value = [value]
        try:
            return [kind(v.strip()) if isinstance(v, str) else kind(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a list of {kind.__name__}, got {value!r}") from None
    default = _FIELDS[key].default
    if key in _OPTIONAL_FLOATS or key in _OPTIONAL_STRS:
        if value is None or (isinstance(value, str) and value.lower() in ("", "none", "null")):
            return None
        kind = float if key in _OPTIONAL_FLOATS else str
    else:
        kind = type(default)
    if kind is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "1", "yes", "false", "0", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if kind is int:
        if isinstance(value, bool):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, int):
            return value
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                pass
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if kind is float:
        if isinstance(value, bool):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    if not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string, got {value!r}")
    return value


def _check(spec: ExperimentSpec):
    if spec.experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: must be one of {EXPERIMENTS}, got {spec.experiment!r}")
    if not spec.etas:
        raise ConfigError("etas: at least one learning rate is required")
    for eta in spec.etas:
        if not 0.0 < eta <= 1.0:
            raise ConfigError(f"etas: learning rate must lie in (0, 1], got {eta}")
    if not spec.algorithms:
        raise ConfigError("algorithms: at least one algorithm is required")
    for a in spec.algorithms:
        if a not in ALGORITHMS:
            raise ConfigError(f"algorithms: unknown algorithm {a!r}; expected one of {ALGORITHMS}")
    if not spec.seed_indices():
        raise ConfigError("seeds: at least one seed is required")
    if spec.seed < 0:
        raise ConfigError("seed: must be nonnegative")
    if spec.dim < 1:
        raise ConfigError("dim: must be positive")
    if spec.experiment == "fourmodes" and spec.dim != 2:
        raise ConfigError("dim: the fourmodes experiment is two-dimensional")
    if spec.budget < 1 or spec.batch < 1:
        raise ConfigError("budget/batch: must be positive")
    first = spec.burnin_batch if spec.burnin else spec.batch
    if spec.budget < first and any(a != "ais" for a in spec.algorithms):
        raise ConfigError(f"budget: must cover the first batch ({first} evaluations)")
    if spec.checkpoint_every < 0:
        raise ConfigError("checkpoint_every: must be nonnegative")
    if spec.weights not in ("raw", "effective"):
        raise ConfigError("weights: must be 'raw' or 'effective'")
    if spec.dumps not in ("none", "final", "checkpoints"):
        raise ConfigError("dumps: must be 'none', 'final' or 'checkpoints'")
    if spec.kernel not in ("gaussian", "epanechnikov"):
        raise ConfigError("kernel: must be 'gaussian' or 'epanechnikov'")
    if spec.lambda_kind not in ("log", "power"):
        raise ConfigError("lambda_kind: must be 'log' or 'power'")
    if spec.experiment == "custom" and not spec.target_factory:
        raise ConfigError("target_factory: required for the custom experiment")
    if spec.jobs < 1:
        raise ConfigError("jobs: must be positive")
    for k in spec.ais_levels:
        if k < 1:
            raise ConfigError("ais_levels: each level count must be positive")
    if not 0.0 < spec.ais_beta_min < 1.0:
        raise ConfigError("ais_beta_min: must lie in (0, 1)")


def parse_config(path=None, overrides: Optional[dict] = None) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from a flat JSON file and overrides.

    Keys in `overrides` (typically command-line flags) take precedence
    over the file. Unknown keys and ill-typed values raise
    :class:`ConfigError`.
    """
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path}: expected a flat JSON object")
        values.update(data)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}; valid keys: {sorted(_FIELDS)}")
    spec = ExperimentSpec(**{k: _coerce(k, v) for k, v in values.items()})
    _check(spec)
    return spec


def run_streams(base_seed: int, seed_index: int, algo_index: int = 0, eta_index: int = 0):
    """Sampler, reference and projection generators of one run."""

    def gen(*key):
        return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=key))

    return (
        gen(seed_index, algo_index, eta_index, 0),
        gen(seed_index, 0, 0, 1),
        gen(seed_index, algo_index, eta_index, 2),
    )


def _problem(spec: ExperimentSpec):
    """Target, exploration density, and (for logistic regression) the test set."""
    if spec.experiment in TOY_TARGETS:
        target = make_toy_target(spec.experiment, spec.dim)
        q0 = default_exploration(spec.experiment, spec.dim)
        if q0.family == "student" and spec.q0_dof != q0.dof:
            q0 = dataclasses.replace(q0, dof=spec.q0_dof)
        return target, q0, None
    if spec.experiment == "bayeslogistic":
        if spec.data_path:
            train, test = load_dataset(spec.data_path, spec.train_size, spec.split_seed, spec.header)
        else:
            train, test = split_dataset(generate_waveform(5000, spec.data_seed), spec.train_size, spec.split_seed)
        target = logistic_posterior(train, spec.prior_a, spec.prior_b)
        q0 = default_exploration("logistic", target.dim)
        if spec.q0_dof != q0.dof:
            q0 = dataclasses.replace(q0, dof=spec.q0_dof)
        return target, q0, test
    module, _, name = spec.target_factory.partition(":")
    try:
        factory = getattr(importlib.import_module(module), name)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"target_factory: cannot import {spec.target_factory!r} ({exc})") from None
    target, q0 = factory(spec.dim)
    return target, q0, None


def _run_id(algo, eta, seed_index):
    return f"{algo}_eta{eta:g}_seed{seed_index:03d}" if algo != "ais" else f"ais_seed{seed_index:03d}"


def run_single(spec: ExperimentSpec, algo_index: int, eta_index: int, seed_index: int, out_dir) -> Path:
    """Execute one run of the grid and write its artifacts to `out_dir`."""
    algo = spec.algorithms[algo_index]
    eta = spec.etas[eta_index] if algo != "ais" else float("nan")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.jsonl"
    timings = out_dir / "timings.jsonl"
    for p in (manifest, timings):
        if p.exists():
            p.unlink()
    target, q0, test = _problem(spec)
    rng, ref_rng, proj_rng = run_streams(spec.seed, seed_index, algo_index, eta_index)
    reference = None
    if test is None and target.sampler is not None:
        ref_pts = reference_sample(target, spec.ref_size, ref_rng)
        reference = WeightedSampleSet(ref_pts, np.ones(ref_pts.shape[0]))
    append_jsonl(
        manifest,
        {
            "kind": "config",
            "version": __version__,
            "run": {"algorithm": algo, "eta": None if algo == "ais" else eta, "seed_index": seed_index},
            "spec": {k: v for k, v in spec.to_dict().items() if k not in _NOT_ECHOED},
            "target": target.params,
            "q0": q0.describe(),
            "validation": validate(spec, eta if algo != "ais" else 1.0).to_dict() if algo != "ais" else None,
        },
    )
    metric_rows = []
    estimate_rows = []
    is_logistic = test is not None

    def evaluate(samples: WeightedSampleSet, budget: int, extra: dict):
        row = {"budget": budget, "seed": seed_index, "eta": eta, "algo": algo}
        if is_logistic:
            row["accuracy"] = predictive_accuracy(samples, test)
        elif reference is not None:
            sw = sliced_w2(samples, reference, spec.n_proj, proj_rng)
            row["sw2"] = sw
            row["log_sw2"] = float(np.log(sw)) if sw > 0 else float("-inf")
        metric_rows.append(row)
        estimate_rows.extend([samples.points.shape[0], h, repr(v)] for h, v in moment_estimates(samples).items())
        append_jsonl(manifest, {"kind": "checkpoint", "budget": budget, **extra, **row})

    t_start = time.perf_counter()
    if algo == "ais":
        for K in spec.ais_levels:
            cfg = AISConfig(K, _ais_batch(spec, K), spec.ais_n_mh, spec.ais_beta_min, spec.ais_proposal_scale)
            t0 = time.perf_counter()
            res = ais_run(cfg, target, q0, rng)
            evaluate(
                res.samples,
                res.evaluations,
                {"K": K, "nominal_evaluations": res.nominal_evaluations, "acceptance": res.acceptance},
            )
            append_jsonl(timings, {"K": K, "seconds": time.perf_counter() - t0})
            if spec.dumps != "none":
                write_weighted_samples(out_dir / f"ais_K{K}.csv", res.samples)
    else:
        config = RunConfig(
            eta=eta,
            budget=spec.budget,
            batch=spec.batch,
            algorithm=algo,
            schedule=spec.schedule(),
            kernel=spec.kernel,
            seed=seed_index,
            checkpoint_every=spec.checkpoint_every,
        )

        def on_checkpoint(store, used):
            t0 = time.perf_counter()
            evaluate(from_store(store, spec.weights), used, {"particles": len(store), "steps": store.steps})
            if spec.dumps == "checkpoints" or (spec.dumps == "final" and used >= spec.budget):
                write_particle_dump(out_dir / f"particles_{used:09d}.csv", store)
            append_jsonl(
                timings,
                {"budget": used, "elapsed": time.perf_counter() - t_start, "eval_seconds": time.perf_counter() - t0},
            )

        run_sampler(config, target, q0, rng, on_checkpoint)

    value_cols = ["accuracy"] if is_logistic else (["sw2", "log_sw2"] if reference is not None else [])
    header = ["budget", "seed", "eta", "algo"] + value_cols
    write_csv(
        out_dir / "metrics.csv",
        header,
        ([_fmt(r[h]) for h in header] for r in metric_rows),
    )
    write_csv(out_dir / "estimates.csv", ["n", "h_id", "estimate"], estimate_rows)
    return out_dir


def moment_estimates(samples: WeightedSampleSet) -> dict:
    """Self-normalized estimates of each coordinate's mean (``x_j``) and second moment (``x_j^2``)."""
    p = samples.normalized_weights
    first = p @ samples.points
    second = p @ samples.points**2
    out = {f"x_{j}": float(v) for j, v in enumerate(first)}
    out.update({f"x_{j}^2": float(v) for j, v in enumerate(second)})
    return out


def _ais_batch(spec: ExperimentSpec, K: int) -> int:
    """AIS batch size; with `ais_match_budget` the largest batch within `budget`."""
    if not spec.ais_match_budget:
        return spec.ais_batch
    batch = spec.budget // (K * (spec.ais_n_mh + 1))
    if batch < 1:
        raise ConfigError(f"budget: too small for AIS with K={K} and n_mh={spec.ais_n_mh}")
    return batch


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _job(args):
    spec_dict, a, e, s, path = args
    run_single(ExperimentSpec(**spec_dict), a, e, s, path)
    return path


def run_experiment(spec: ExperimentSpec) -> Path:
    """Run every (algorithm, eta, seed) combination and aggregate the metrics."""
    _check(spec)
    out = Path(spec.out)
    try:
        (out / "runs").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    with open(out / "spec.json", "w", encoding="utf-8", newline="\n") as fh:
        echo = {k: v for k, v in spec.to_dict().items() if k not in _NOT_ECHOED}
        json.dump({"version": __version__, **echo}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    jobs = []
    for a, algo in enumerate(spec.algorithms):
        eta_indices = [0] if algo == "ais" else range(len(spec.etas))
        for e in eta_indices:
            for s in spec.seed_indices():
                run_dir = out / "runs" / _run_id(algo, spec.etas[e], s)
                jobs.append((spec.to_dict(), a, e, s, str(run_dir)))
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            run_dirs = list(pool.map(_job, jobs))
    else:
        run_dirs = [_job(j) for j in jobs]
    aggregate([Path(p) for p in run_dirs], out / "aggregate.csv")
    return out


def aggregate(run_dirs, path):
    """Mean metric per (algo, eta, budget) over runs, sorted by those keys."""
    groups = {}
    value_key = None
    for d in run_dirs:
        for row in read_csv(Path(d) / "metrics.csv"):
            if "accuracy" in row:
                value_key = "accuracy"
            elif "log_sw2" in row:
                value_key = "log_sw2"
            else:
                continue
            key = (row["algo"], row["eta"], int(row["budget"]))
            groups.setdefault(key, []).append(row)
    if value_key is None:
        write_csv(path, ["budget", "eta", "algo", "n_runs"], [])
        return path

    def sort_key(k):
        return (k[0], float(k[1]), k[2])

    if value_key == "accuracy":
        header = ["budget", "eta", "algo", "mean_accuracy", "n_runs"]
        rows = [
            [str(k[2]), k[1], k[0], repr(float(np.mean([float(r["accuracy"]) for r in v]))), str(len(v))]
            for k, v in sorted(groups.items(), key=lambda kv: sort_key(kv[0]))
        ]
    else:
        header = ["budget", "eta", "algo", "mean_log_sw2", "mean_sw2", "n_runs"]
        rows = [
            [
                str(k[2]),
                k[1],
                k[0],
                repr(float(np.mean([float(r["log_sw2"]) for r in v]))),
                repr(float(np.mean([float(r["sw2"]) for r in v]))),
                str(len(v)),
            ]
            for k, v in sorted(groups.items(), key=lambda kv: sort_key(kv[0]))
        ]
    write_csv(path, header, rows)
    return path


def validate(spec: ExperimentSpec, eta: Optional[float] = None):
    """Schedule validation report for the configured schedule at learning rate `eta`."""
    eta = spec.etas[0] if eta is None else eta
    d = spec.dim
    if spec.experiment == "fourmodes":
        d = 2
    return validate_schedule(ScheduleFamily.from_schedule(spec.schedule(), d), eta, d)
