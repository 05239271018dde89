"""Command-line entry point: ``midas {run,sweep,eval,validate-schedule,predict}``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 failed
schedule validation under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .experiments import (
    ConfigError,
    _problem,
    moment_estimates,
    parse_config,
    run_experiment,
    run_single,
    run_streams,
    validate,
)
from .io import read_weighted_samples, write_csv
from .logistic import DatasetParseError, posterior_predict, predictive_accuracy
from .metrics import WeightedSampleSet, sliced_w2
from .targets import UnsupportedError, reference_sample

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_STRICT = 0, 2, 3, 4

# flag dest -> config key
_FLAG_KEYS = {
    "experiment": "experiment",
    "dim": "dim",
    "eta": "etas",
    "algo": "algorithms",
    "budget": "budget",
    "batch": "batch",
    "seed": "seed",
    "seeds": "seeds",
    "checkpoint_every": "checkpoint_every",
    "out": "out",
    "jobs": "jobs",
    "weights": "weights",
    "n_proj": "n_proj",
    "ref_size": "ref_size",
    "data": "data_path",
    "header": "header",
    "train_size": "train_size",
    "split_seed": "split_seed",
}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat JSON file of experiment keys")
    p.add_argument("--experiment", "--target", dest="experiment", help="coldstart, mixture, anisotropic, fourmodes, bayeslogistic or custom")
    p.add_argument("--dim", type=str)
    p.add_argument("--eta", help="learning rate, or comma-separated list for sweeps")
    p.add_argument("--algo", help="midas, submidas or ais (comma-separated for sweeps)")
    p.add_argument("--budget", type=str)
    p.add_argument("--batch", type=str)
    p.add_argument("--seed", type=str, help="base seed")
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=str)
    p.add_argument("--out", help="output directory (or file for eval/predict)")
    p.add_argument("--weights", choices=("raw", "effective"))
    p.add_argument("--n-proj", dest="n_proj", type=str)
    p.add_argument("--ref-size", dest="ref_size", type=str)
    p.add_argument("--data", help="dataset CSV for bayeslogistic")
    p.add_argument("--header", action="store_const", const=True, default=None, help="dataset has a header row")
    p.add_argument("--train-size", dest="train_size", type=str)
    p.add_argument("--split-seed", dest="split_seed", type=str)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--strict", action="store_true", help="exit 4 when schedule validation fails")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="midas", description="Adaptive importance sampling by mirror descent.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="one run: first algorithm and eta, seed index 0")
    _common(p)
    p = sub.add_parser("sweep", help="all (algorithm, eta, seed) runs plus aggregate.csv")
    _common(p)
    p.add_argument("--seeds", help="number of seeds, or comma-separated seed indices")
    p.add_argument("--jobs", type=str, help="concurrent runs")
    p = sub.add_parser("eval", help="recompute metrics from a particle dump")
    _common(p)
    p.add_argument("dump", help="particle dump CSV")
    p.add_argument("--seed-index", dest="seed_index", type=int, default=0, help="seed index of the reference sample")
    p = sub.add_parser("validate-schedule", help="check schedule conditions for the configured eta and dim")
    _common(p)
    p = sub.add_parser("predict", help="posterior predictive on the test split from a dump")
    _common(p)
    p.add_argument("dump", help="particle dump CSV")
    return parser


def _spec_from_args(args):
    overrides = {}
    for dest, key in _FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            overrides[key] = v
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value
    return parse_config(args.config, overrides)


def _print(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True, default=str) + "\n")


def _validation_exit(spec, strict):
    failed = False
    for eta in spec.etas:
        report = validate(spec, eta)
        _print({"eta": eta, "dim": spec.dim, **report.to_dict()})
        failed |= report.status == "fail"
    return EXIT_STRICT if (strict and failed) else EXIT_OK


def _cmd_run(args, spec):
    code = _validation_exit(spec, args.strict)
    if code:
        return code
    out = run_single(spec, 0, 0, spec.seed_indices()[0], spec.out)
    _print({"out": str(out)})
    return EXIT_OK


def _cmd_sweep(args, spec):
    code = _validation_exit(spec, args.strict)
    if code:
        return code
    out = run_experiment(spec)
    _print({"out": str(out), "aggregate": str(Path(out) / "aggregate.csv")})
    return EXIT_OK


def _cmd_eval(args, spec):
    samples = read_weighted_samples(args.dump, spec.weights)
    target, _, test = _problem(spec)
    row = {"n": samples.points.shape[0]}
    if test is not None:
        row["accuracy"] = predictive_accuracy(samples, test)
    else:
        _, ref_rng, proj_rng = run_streams(spec.seed, args.seed_index)
        try:
            ref = reference_sample(target, spec.ref_size, ref_rng)
        except UnsupportedError as exc:
            raise ConfigError(f"experiment: {exc}") from None
        sw = sliced_w2(samples, WeightedSampleSet(ref, np.ones(ref.shape[0])), spec.n_proj, proj_rng)
        row["sw2"], row["log_sw2"] = sw, float(np.log(sw))
    _print(row)
    if args.out:
        est = moment_estimates(samples)
        write_csv(args.out, ["n", "h_id", "estimate"], ([row["n"], h, repr(v)] for h, v in est.items()))
    return EXIT_OK


def _cmd_predict(args, spec):
    if spec.experiment != "bayeslogistic":
        raise ConfigError("experiment: predict requires bayeslogistic")
    samples = read_weighted_samples(args.dump, spec.weights)
    _, _, test = _problem(spec)
    prob = posterior_predict(samples, test.features)
    pred = np.where(prob >= 0.5, 1, -1)
    acc = float(np.mean(pred == test.labels))
    if args.out:
        rows = ([i, repr(float(p)), int(c), int(y)] for i, (p, c, y) in enumerate(zip(prob, pred, test.labels)))
        write_csv(args.out, ["index", "prob", "pred", "label"], rows)
    _print({"n_test": len(test), "accuracy": acc})
    return EXIT_OK


def _cmd_validate(args, spec):
    return _validation_exit(spec, args.strict)


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "eval": _cmd_eval,
    "validate-schedule": _cmd_validate,
    "predict": _cmd_predict,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = _spec_from_args(args)
        return _COMMANDS[args.command](args, spec)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except DatasetParseError as exc:
        sys.stderr.write(f"dataset error: {exc}\n")
        return EXIT_IO
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
