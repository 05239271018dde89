import numpy as np
import pytest
from scipy import stats
from scipy.special import logsumexp

from midas.targets import (
    ExplorationDensity,
    TargetDensity,
    UnsupportedError,
    default_exploration,
    log_unnorm_density,
    make_toy_target,
    reference_sample,
)

MODES = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])


def test_coldstart_peak_is_zero():
    t = make_toy_target("coldstart", 3)
    mean = np.full(3, 5 / np.sqrt(3))
    assert log_unnorm_density(t, mean) == 0.0
    assert t.params["means"][0] == pytest.approx(list(mean))


def test_coldstart_mean_d4():
    t = make_toy_target("coldstart", 4)
    assert np.allclose(t.params["means"][0], [2.5, 2.5, 2.5, 2.5])


def test_mixture_modes_d1():
    t = make_toy_target("mixture", 1)
    assert sorted(np.ravel(t.params["means"])) == pytest.approx([-0.5, 0.5])


def test_anisotropic_first_marginal_variance():
    t = make_toy_target("anisotropic", 2)
    assert np.asarray(t.params["variances"])[0][0] == pytest.approx(0.8)
    assert np.asarray(t.params["variances"])[0][1] == pytest.approx(0.08)


def test_fourmodes_density_at_mode():
    t = make_toy_target("fourmodes", 2)
    own = stats.multivariate_normal([0, 0], 0.1 * np.eye(2)).logpdf([0, 0])
    assert log_unnorm_density(t, [0.0, 0.0]) == pytest.approx(np.log(0.25) + own, rel=1e-13)
    # cross-mode contributions at (0,0)
    others = [stats.multivariate_normal(m, 0.1 * np.eye(2)).pdf([0, 0]) for m in MODES[1:]]
    assert max(others) < 1e-100


def test_fourmodes_requires_d2():
    with pytest.raises(ValueError):
        make_toy_target("fourmodes", 3)


def test_unknown_target():
    with pytest.raises(ValueError):
        make_toy_target("banana", 2)


def test_dimension_mismatch():
    t = make_toy_target("coldstart", 2)
    with pytest.raises(ValueError):
        log_unnorm_density(t, np.zeros(3))


@pytest.mark.parametrize("kind,dim", [("coldstart", 2), ("mixture", 3), ("anisotropic", 2), ("fourmodes", 2)])
def test_normalizing_constant_matches_mixture_sum(kind, dim):
    t = make_toy_target(kind, dim).normalized()
    x = reference_sample(t, 5, np.random.default_rng(0))
    p = t.params
    means = np.array(p["means"])
    var = np.array(p["variances"])
    w = np.array(p["weights"])
    comps = np.stack(
        [stats.multivariate_normal(m, np.diag(v)).logpdf(x) for m, v in zip(means, var)]
    )
    expected = logsumexp(comps + np.log(w)[:, None], axis=0)
    assert np.allclose(t.log_unnorm(x), expected, rtol=1e-12, atol=1e-12)


def test_coldstart_reference_mean():
    t = make_toy_target("coldstart", 2)
    x = reference_sample(t, 100_000, np.random.default_rng(1))
    assert np.allclose(x.mean(axis=0), 5 / np.sqrt(2), atol=0.01)


def test_mixture_reference_balance():
    t = make_toy_target("mixture", 1)
    x = reference_sample(t, 100_000, np.random.default_rng(2))
    assert np.mean(x[:, 0] > 0) == pytest.approx(0.5, abs=0.01)


def test_fourmodes_reference_shares():
    t = make_toy_target("fourmodes", 2)
    x = reference_sample(t, 100_000, np.random.default_rng(3))
    lab = np.argmin(((x[:, None, :] - MODES) ** 2).sum(-1), axis=1)
    assert np.allclose(np.bincount(lab, minlength=4) / x.shape[0], 0.25, atol=0.01)


@pytest.mark.parametrize("kind,dim", [("coldstart", 2), ("anisotropic", 3)])
def test_reference_ks_per_coordinate(kind, dim):
    t = make_toy_target(kind, dim)
    x = reference_sample(t, 100_000, np.random.default_rng(4))
    p = t.params
    means = np.array(p["means"])
    var = np.array(p["variances"])
    for j in range(dim):

        def cdf(v, j=j):
            return np.mean([stats.norm(m[j], np.sqrt(s[j])).cdf(v) for m, s in zip(means, var)], axis=0)

        assert stats.kstest(x[:, j], cdf).pvalue > 1e-3


def test_scaled_target_shifts_log_density():
    t = make_toy_target("mixture", 2)
    x = np.random.default_rng(0).normal(size=(10, 2))
    assert np.allclose(t.scaled(1000.0).log_unnorm(x) - t.log_unnorm(x), np.log(1000.0), rtol=0, atol=1e-12)


def test_reference_sample_unsupported():
    t = TargetDensity(1, lambda x: -0.5 * np.sum(x * x, axis=-1))
    with pytest.raises(UnsupportedError):
        reference_sample(t, 10, np.random.default_rng(0))
    with pytest.raises(UnsupportedError):
        t.normalized()


@pytest.mark.parametrize("family,dof", [("gaussian", 3.0), ("student", 3.0), ("student", 7.5)])
def test_exploration_log_density_matches_scipy(family, dof):
    loc = np.array([1.0, -2.0, 0.5])
    shape = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.2], [0.0, 0.2, 0.5]])
    q = ExplorationDensity(family, loc, shape, dof)
    x = np.random.default_rng(0).normal(size=(20, 3)) * 3
    if family == "gaussian":
        ref = stats.multivariate_normal(loc, shape).logpdf(x)
    else:
        ref = stats.multivariate_t(loc, shape, df=dof).logpdf(x)
    assert np.allclose(q.log_density(x), ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("family", ["gaussian", "student"])
def test_exploration_sampling_ks(family):
    q = ExplorationDensity(family, np.array([5.0]), np.array([10.0]), 3.0)
    x = q.sample(np.random.default_rng(7), 100_000)[:, 0]
    dist = stats.norm(5, np.sqrt(10)) if family == "gaussian" else stats.t(3, 5, np.sqrt(10))
    assert stats.kstest(x, dist.cdf).pvalue > 1e-3


@pytest.mark.parametrize("kind,dim", [("coldstart", 1), ("coldstart", 4), ("mixture", 2), ("anisotropic", 2), ("fourmodes", 2)])
def test_exploration_dominates_target(kind, dim):
    # f_u / q0 stays bounded on a wide box
    t = make_toy_target(kind, dim)
    q0 = default_exploration(kind, dim)
    rng = np.random.default_rng(0)
    x = rng.uniform(-60, 60, size=(50_000, dim))
    center = reference_sample(t, 5_000, rng)
    pts = np.vstack([x, center])
    ratio = t.log_unnorm(pts) - q0.log_density(pts)
    far = np.vstack([x * 10, x * 100])
    ratio_far = t.log_unnorm(far) - q0.log_density(far)
    assert np.all(np.isfinite(ratio) | (ratio == -np.inf))
    assert ratio_far.max() <= ratio.max()


def test_default_exploration_unknown():
    with pytest.raises(ValueError):
        default_exploration("banana", 2)
