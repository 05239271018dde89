"""Bayesian logistic regression: datasets, posterior target and prediction.

The model has weights ``w`` in R^p and a precision ``beta > 0``::

    beta ~ Gamma(shape=a, rate=b)
    w | beta ~ N(0, I / beta)
    P(c = 1 | w, z) = 1 / (1 + exp(-w.z)),  c in {-1, +1}

The sampler works on ``theta = (w, s)`` with ``s = log beta`` so that the
support is all of R^(p+1); the log-density carries the Jacobian ``+ s``.
No intercept is added: include a constant column in the features if one
is wanted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit, gammaln

from .metrics import WeightedSampleSet
from .policy import DegenerateWeightsError
from .targets import TargetDensity

__all__ = [
    "DatasetParseError",
    "LabeledDataset",
    "load_dataset",
    "split_dataset",
    "logistic_posterior",
    "log_likelihood",
    "posterior_predict",
    "predictive_accuracy",
    "generate_waveform",
    "write_dataset",
]

_LOG_2PI = np.log(2.0 * np.pi)


class DatasetParseError(ValueError):
    """A dataset row could not be parsed; the message carries the row number."""


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix ``(N, p)`` and labels in {-1, +1}."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        z = np.atleast_2d(np.asarray(self.features, dtype=float))
        c = np.asarray(self.labels, dtype=float).reshape(-1)
        if z.shape[0] != c.size:
            raise ValueError("feature rows and labels differ in count")
        if not np.all(np.isin(c, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "features", z)
        object.__setattr__(self, "labels", c)

    def __len__(self):
        return self.labels.size

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


_LABELS = {"-1": -1.0, "1": 1.0, "+1": 1.0, "0": -1.0, "-1.0": -1.0, "1.0": 1.0, "0.0": -1.0}


def _read_rows(path, header):
    rows, labels = [], []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise DatasetParseError(f"row {lineno}: expected features and a label")
            token = row[-1].strip()
            if token not in _LABELS:
                raise DatasetParseError(f"row {lineno}: label {token!r} is not one of -1, 1, 0")
            try:
                feats = [float(cell) for cell in row[:-1]]
            except ValueError as exc:
                raise DatasetParseError(f"row {lineno}: {exc}") from None
            if width is None:
                width = len(feats)
            elif len(feats) != width:
                raise DatasetParseError(f"row {lineno}: expected {width} features, got {len(feats)}")
            rows.append(feats)
            labels.append(_LABELS[token])
    if not rows:
        raise DatasetParseError(f"{path}: no data rows")
    return LabeledDataset(np.array(rows), np.array(labels))


def split_dataset(data: LabeledDataset, train_size: int, split_seed: int):
    """Shuffle with ``default_rng(split_seed)`` and cut off `train_size` rows."""
    n = len(data)
    if not 0 < train_size < n:
        raise ValueError(f"train_size must lie in (0, {n}), got {train_size}")
    perm = np.random.default_rng(split_seed).permutation(n)
    tr, te = perm[:train_size], perm[train_size:]
    return (
        LabeledDataset(data.features[tr], data.labels[tr]),
        LabeledDataset(data.features[te], data.labels[te]),
    )


def load_dataset(path, train_size: int, split_seed: int = 0, header: bool = False):
    """Read a CSV of features followed by a label and split it.

    Labels may be ``-1``/``1`` or ``0``/``1`` (0 is mapped to -1).

    Returns
    -------
    train, test : LabeledDataset
    """
    data = _read_rows(Path(path), header)
    return split_dataset(data, train_size, split_seed)


def write_dataset(path, data: LabeledDataset):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for z, c in zip(data.features, data.labels):
            w.writerow([repr(float(v)) for v in z] + [str(int(c))])


def generate_waveform(n: int = 5000, seed: int = 0, positive_class: int = 0, standardize: bool = True):
    """Breiman's waveform generator (21 noisy features, 3 classes), binarized.

    Each class is a random convex combination of two of three triangular
    base waves ``h1(i) = max(6 - |i - 11|, 0)``, ``h2(i) = h1(i - 4)``,
    ``h3(i) = h1(i + 4)`` over ``i = 1..21``, plus N(0, 1) noise per
    coordinate: class 0 mixes (h1, h2), class 1 (h1, h3), class 2
    (h2, h3). Classes are equiprobable. The binary label is +1 for
    `positive_class` and -1 for the two others. With `standardize`,
    every feature is shifted and scaled to zero mean and unit variance.
    """
    rng = np.random.default_rng(seed)
    i = np.arange(1, 22)
    h1 = np.maximum(6 - np.abs(i - 11), 0.0)
    h2 = np.maximum(6 - np.abs(i - 15), 0.0)
    h3 = np.maximum(6 - np.abs(i - 7), 0.0)
    pairs = [(h1, h2), (h1, h3), (h2, h3)]
    cls = rng.integers(0, 3, size=n)
    u = rng.random(n)
    base_a = np.stack([pairs[k][0] for k in cls])
    base_b = np.stack([pairs[k][1] for k in cls])
    z = u[:, None] * base_a + (1 - u[:, None]) * base_b + rng.standard_normal((n, 21))
    if standardize:
        z = (z - z.mean(axis=0)) / z.std(axis=0)
    labels = np.where(cls == positive_class, 1.0, -1.0)
    return LabeledDataset(z, labels)


def log_likelihood(w, data: LabeledDataset):
    """``sum_i log sigma(c_i w.z_i)`` for each row of `w` (shape ``(..., p)``)."""
    w = np.asarray(w, dtype=float)
    margins = (w @ data.features.T) * data.labels
    return -np.sum(np.logaddexp(0.0, -margins), axis=-1)


def logistic_posterior(data: LabeledDataset, a: float = 1.0, b: float = 0.01) -> TargetDensity:
    """Unnormalized log posterior over ``theta = (w, log beta)``.

    ``log f_u = loglik(w) + log Gamma(e^s; a, b) + s + log N(w; 0, e^-s I)``.
    """
    if not (a > 0 and b > 0):
        raise ValueError("hyperparameters a and b must be positive")
    p = data.n_features
    const_gamma = a * np.log(b) - gammaln(a)

    def log_prior(theta):
        w, s = theta[..., :p], theta[..., p]
        beta = np.exp(s)
        lg = const_gamma + (a - 1.0) * s - b * beta + s
        ln = -0.5 * p * _LOG_2PI + 0.5 * p * s - 0.5 * beta * np.sum(w * w, axis=-1)
        return lg + ln

    def log_unnorm(theta):
        return log_likelihood(theta[..., :p], data) + log_prior(theta)

    target = TargetDensity(p + 1, log_unnorm, None, "logistic", {"a": a, "b": b, "n_train": len(data)})
    object.__setattr__(target, "log_prior", log_prior)
    return target


def posterior_predict(particles: WeightedSampleSet, z):
    """Self-normalized posterior predictive ``P(c = 1 | z)``.

    `z` may be one feature vector ``(p,)`` or a matrix ``(M, p)``. The
    last coordinate of each particle (``log beta``) is ignored.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zz = np.atleast_2d(z)
    p = zz.shape[1]
    if particles.dim != p + 1:
        raise ValueError(f"particles have dimension {particles.dim}, model expects {p + 1}")
    wts = particles.weights
    if not wts.sum() > 0:
        raise DegenerateWeightsError("all weights are zero")
    keep = wts > 0
    w = particles.points[keep, :p]
    pw = wts[keep] / wts[keep].sum()
    out = np.empty(zz.shape[0])
    chunk = max(1, 4_000_000 // max(1, w.shape[0]))
    for start in range(0, zz.shape[0], chunk):
        probs = expit(zz[start : start + chunk] @ w.T)
        out[start : start + chunk] = probs @ pw
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if single else out


def predictive_accuracy(particles: WeightedSampleSet, test: LabeledDataset) -> float:
    """Fraction of test rows whose thresholded prediction matches the label.

    A probability of exactly 1/2 predicts +1.
    """
    if len(test) == 0:
        raise ValueError("empty test set")
    prob = posterior_predict(particles, test.features)
    pred = np.where(prob >= 0.5, 1.0, -1.0)
    return float(np.mean(pred == test.labels))
