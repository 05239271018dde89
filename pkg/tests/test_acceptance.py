"""Acceptance criteria, each run at its stated tolerance.

Every test records one ``criterion k: PASS|FAIL`` line, shown in the
terminal summary, before asserting.
"""

import copy
import math
import time
import warnings
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate, optimize, stats
from scipy.special import expit

from midas.baselines import AISConfig, ais_run
from midas.experiments import run_streams
from midas.logistic import generate_waveform, logistic_posterior, predictive_accuracy, split_dataset
from midas.metrics import (
    WeightedSampleSet,
    clt_diagnostic,
    from_store,
    grid_distance,
    sliced_w2,
    w2_1d,
    weighted_quantile,
)
from midas.samplers import (
    PowerLaw,
    RunConfig,
    SamplerRun,
    Schedule,
    ScheduleFamily,
    current_policy,
    run_sampler,
    validate_schedule,
)
from midas.targets import default_exploration, make_toy_target, reference_sample

pytestmark = pytest.mark.acceptance

FOUR_MODES = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0], [10.0, 10.0]])


def reference_set(target, rng, size=10_000):
    pts = reference_sample(target, size, rng)
    return WeightedSampleSet(pts, np.ones(size))


def final_sw(store, target, seed_index, algo_index=0, eta_index=0, n_proj=100):
    _, ref_rng, proj_rng = run_streams(0, seed_index, algo_index, eta_index)
    return sliced_w2(from_store(store), reference_set(target, ref_rng), n_proj, proj_rng)


# 1 -------------------------------------------------------------------------


def test_scale_invariance(report):
    t0 = time.perf_counter()
    target = make_toy_target("coldstart", 2)
    q0 = default_exploration("coldstart", 2)
    cfg = RunConfig(eta=1.0, budget=10_000, batch=300, algorithm="midas")
    a = run_sampler(cfg, target, q0, np.random.default_rng(3))
    b = run_sampler(cfg, target.scaled(1000.0), q0, np.random.default_rng(3))
    elapsed = time.perf_counter() - t0
    same_pos = a.positions.tobytes() == b.positions.tobytes()
    eff_err = float(np.max(np.abs(b.normalized_weights() / a.normalized_weights() - 1)))
    raw_err = float(np.max(np.abs(b.raw_weights / a.raw_weights / 1000.0 - 1)))
    ok = same_pos and eff_err <= 1e-12 and raw_err <= 1e-12 and elapsed < 10
    report(
        1,
        ok,
        f"positions identical={same_pos}, effective weight rel err={eff_err:.1e}, "
        f"raw ratio rel err={raw_err:.1e}, {elapsed:.1f}s",
    )
    assert ok


# 2 -------------------------------------------------------------------------


def test_density_convergence(report):
    target = make_toy_target("coldstart", 1)
    q0 = default_exploration("coldstart", 1)
    sched = Schedule(gamma_scale=2.0, bandwidth_scale=0.1, lambda_kind="power", lambda_exponent=0.5)
    cfg = RunConfig(eta=1.0, budget=20_000, batch=10, algorithm="midas", schedule=sched)
    f = stats.norm(5.0, 0.4)
    sups, l1s = [], []
    for s in range(50):
        store = run_sampler(cfg, target, q0, run_streams(0, s)[0])
        policy = current_policy(store, q0)
        out = grid_distance(policy.density, lambda x: f.pdf(x[:, 0]), [5.0 - 1.6], [5.0 + 1.6])
        sups.append(out["sup_abs"])
        l1s.append(out["l1"])
    good = int(np.sum((np.array(sups) <= 0.08) & (np.array(l1s) <= 0.10)))
    ok = good >= 45
    report(2, ok, f"{good}/50 seeds within sup<=0.08 and L1<=0.10 (max sup {max(sups):.3f}, max L1 {max(l1s):.3f})")
    assert ok


# 3 -------------------------------------------------------------------------


def test_mode_recovery_vs_eta(report):
    target = make_toy_target("fourmodes", 2)
    q0 = default_exploration("fourmodes", 2)
    etas = {0: 0.25, 1: 1.0}
    covered, log_sw = {}, {}
    for e, eta in etas.items():
        cfg = RunConfig(eta=eta, budget=60_000, batch=300, algorithm="submidas")
        hits, logs = 0, []
        for s in range(50):
            store = run_sampler(cfg, target, q0, run_streams(0, s, 0, e)[0])
            samples = from_store(store)
            lab = np.argmin(((samples.points[:, None, :] - FOUR_MODES) ** 2).sum(-1), axis=1)
            mass = np.bincount(lab, weights=samples.normalized_weights, minlength=4)
            hits += bool(np.all(mass >= 0.02))
            logs.append(math.log(final_sw(store, target, s, 0, e)))
        covered[eta], log_sw[eta] = hits / 50, float(np.mean(logs))
    ok = covered[0.25] >= covered[1.0] and log_sw[0.25] < log_sw[1.0]
    report(
        3,
        ok,
        f"all-mode coverage eta=0.25 {covered[0.25]:.2f} vs eta=1 {covered[1.0]:.2f}; "
        f"mean log SW eta=0.25 {log_sw[0.25]:.3f} vs eta=1 {log_sw[1.0]:.3f}",
    )
    assert ok


# 4 -------------------------------------------------------------------------


def bump(x):
    u = (np.asarray(x)[:, 0] - 5.0) / 1.2
    return np.clip(1.0 - u * u, 0.0, None) ** 2


def test_estimator_clt(report):
    target = make_toy_target("coldstart", 1)
    q0 = default_exploration("coldstart", 1)
    f = stats.norm(5.0, 0.4)
    mu_h = integrate.quad(lambda x: bump([[x]])[0] * f.pdf(x), 3.8, 6.2, epsabs=1e-13)[0]
    mu_h2 = integrate.quad(lambda x: bump([[x]])[0] ** 2 * f.pdf(x), 3.8, 6.2, epsabs=1e-13)[0]
    n = 5000
    cfg = RunConfig(eta=1.0, budget=n, batch=10, algorithm="midas", schedule=Schedule(burnin=False))

    def factory(r):
        return from_store(run_sampler(cfg, target, q0, run_streams(0, r)[0]))

    out = clt_diagnostic(factory, bump, 200, n, mu_h, mu_h2)
    ok = 0.5 <= out["ratio"] <= 2.0
    report(4, ok, f"var ratio {out['ratio']:.3f} (empirical {out['empirical_var']:.4f}, sigma^2 {out['target_var']:.4f})")
    assert ok


# 5 -------------------------------------------------------------------------


def test_holder_and_variance_ordering(report):
    details, ok = [], True
    for kind in ("coldstart", "mixture", "anisotropic"):
        target = make_toy_target(kind, 2).normalized()
        q0 = default_exploration(kind, 2)
        store = run_sampler(RunConfig(eta=0.5, budget=30_000), target, q0, np.random.default_rng(8))
        lw, step = store.log_raw_weights, store.step_index
        late = step > step.max() / 2
        w_eta = np.exp(0.5 * lw[late])
        bound = 1 + 3 * w_eta.std(ddof=1) / math.sqrt(w_eta.size)
        violations = 0
        for k in range(1, step.max() + 1):
            w = np.exp(lw[step == k])
            if np.unique(w).size >= 2 and np.var(w**0.5, ddof=1) > np.var(w, ddof=1):
                violations += 1
        ok &= bool(w_eta.mean() <= bound) and violations == 0
        details.append(f"{kind}: mean w^eta {w_eta.mean():.3f} <= {bound:.3f}, var violations {violations}")
    report(5, ok, "; ".join(details))
    assert ok


# 6 -------------------------------------------------------------------------


def test_wasserstein_oracles(report):
    def q(v, w=None):
        v = np.asarray(v, float)
        return weighted_quantile(v, np.ones(v.size) if w is None else w)

    e1 = abs(w2_1d(q([0.0]), q([1.0])) - 1.0)
    e2 = abs(w2_1d(q([0.0]), q([0.0, 2.0])) - math.sqrt(2.0))
    sw_ok = True
    rows = []
    for x in (np.array([3.0, 4.0]), np.array([1.0, -2.0, 0.5, 2.0])):
        d = x.size
        est = sliced_w2(WeightedSampleSet(np.zeros((1, d)), [1.0]), WeightedSampleSet(x[None], [1.0]), 10_000, np.random.default_rng(0))
        theta = np.random.default_rng(0).standard_normal((10_000, d))
        theta /= np.linalg.norm(theta, axis=1, keepdims=True)
        se = ((theta @ x) ** 2).std(ddof=1) / 100.0
        z = abs(est - x @ x / d) / se
        sw_ok &= bool(z < 3)
        rows.append(f"d={d} |z|={z:.2f}")
    ok = e1 <= 1e-12 and e2 <= 1e-12 and sw_ok
    report(6, ok, f"w2 errors {e1:.1e}, {e2:.1e}; sliced " + ", ".join(rows))
    assert ok


# 7 -------------------------------------------------------------------------


def test_submidas_complexity(report):
    target = make_toy_target("coldstart", 2)
    q0 = default_exploration("coldstart", 2)
    run = SamplerRun(RunConfig(eta=1.0, budget=10**7, batch=10, algorithm="submidas"), target, q0, np.random.default_rng(0))
    while run.n < 10_000:
        run.step()

    def per_step(algorithm, steps):
        r = copy.deepcopy(run)
        t0 = time.perf_counter()
        for _ in range(steps):
            r.step(algorithm)
        return (time.perf_counter() - t0) / steps

    t_full = per_step("midas", 10)
    t_sub = per_step("submidas", 200)
    speed_ok = t_sub <= 0.25 * t_full

    sw = {"midas": [], "submidas": []}
    for s in range(20):
        for a, algo in enumerate(("midas", "submidas")):
            cfg = RunConfig(eta=1.0, budget=20_000, batch=300, algorithm=algo)
            store = run_sampler(cfg, target, q0, run_streams(0, s, a)[0])
            sw[algo].append(final_sw(store, target, s, a))
    ratio = float(np.mean(sw["submidas"]) / np.mean(sw["midas"]))
    quality_ok = 0.5 <= ratio <= 2.0
    ok = speed_ok and quality_ok
    report(
        7,
        ok,
        f"per-step at n=1e4: submidas {t_sub:.2e}s vs midas {t_full:.2e}s (x{t_sub / t_full:.3f}); "
        f"mean SW ratio submidas/midas {ratio:.2f}",
    )
    assert ok


# 8 -------------------------------------------------------------------------


def test_beats_ais_cold_start(report):
    target = make_toy_target("coldstart", 4)
    q0 = default_exploration("coldstart", 4)
    budget = 60_000
    midas_logs = []
    ais_logs = {5: [], 10: [], 30: []}
    for s in range(20):
        store = run_sampler(RunConfig(eta=1.0, budget=budget, algorithm="submidas"), target, q0, run_streams(0, s, 0)[0])
        midas_logs.append(math.log(final_sw(store, target, s, 0)))
        rng, ref_rng, proj_rng = run_streams(0, s, 1)
        ref = reference_set(target, ref_rng)
        for K in ais_logs:
            res = ais_run(AISConfig(K=K, batch=budget // (K * 21)), target, q0, rng)
            ais_logs[K].append(math.log(sliced_w2(res.samples, ref, 100, proj_rng)))
    m = float(np.mean(midas_logs))
    ais_means = {K: float(np.mean(v)) for K, v in ais_logs.items()}
    best = min(ais_means.values())
    ok = m < best
    detail = ", ".join(f"K={K} {v:.2f}" for K, v in ais_means.items())
    report(8, ok, f"mean log SW midas {m:.2f} vs AIS {detail}")
    assert ok


# 9 -------------------------------------------------------------------------


def map_oracle(train, a=1.0, b=0.01):
    """MAP of the (w, log beta) posterior by L-BFGS with a hand-written gradient."""
    z, c = train.features, train.labels
    p = z.shape[1]

    def neg(theta):
        w, s = theta[:p], theta[p]
        beta = math.exp(s)
        m = c * (z @ w)
        val = np.sum(np.logaddexp(0.0, -m)) - (a + 0.5 * p) * s + beta * (b + 0.5 * w @ w)
        gw = -(z.T @ (c * expit(-m))) + beta * w
        gs = -(a + 0.5 * p) + beta * (b + 0.5 * w @ w)
        return val, np.append(gw, gs)

    res = optimize.minimize(neg, np.zeros(p + 1), jac=True, method="L-BFGS-B", options={"maxiter": 10_000, "gtol": 1e-10})
    return res.x[:p]


def test_bayesian_logistic_regression(report):
    train, test = split_dataset(generate_waveform(5000, seed=0), 400, split_seed=0)
    target = logistic_posterior(train)
    q0 = default_exploration("logistic", target.dim)
    w_map = map_oracle(train)
    map_acc = float(np.mean(np.where(test.features @ w_map >= 0, 1.0, -1.0) == test.labels))
    acc = {}
    for e, eta in enumerate((0.25, 1.0)):
        cfg = RunConfig(eta=eta, budget=200_000, batch=300, algorithm="submidas")
        vals = []
        for s in range(20):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                store = run_sampler(cfg, target, q0, run_streams(0, s, 0, e)[0])
            vals.append(predictive_accuracy(from_store(store), test))
        acc[eta] = float(np.mean(vals))
    ok = abs(acc[0.25] - map_acc) <= 0.03 and acc[0.25] >= acc[1.0]
    report(9, ok, f"accuracy eta=0.25 {acc[0.25]:.4f}, eta=1 {acc[1.0]:.4f}, MAP oracle {map_acc:.4f}")
    assert ok


# 10 ------------------------------------------------------------------------


def test_schedule_validator(report):
    def fam(alpha=1.0, C=2.0, d=2, beta=None):
        beta = 1.0 / (4 + d) if beta is None else beta
        return ScheduleFamily(PowerLaw(C, alpha), PowerLaw(1.0, beta), "log")

    results = []
    results.append(validate_schedule(fam(d=2), 0.75, 2).status == "pass")
    results.append(validate_schedule(fam(alpha=0.4), 0.75, 2).status == "fail")
    # n gamma^2 log n / (lam^(3/2) b^(3d/2)) at d=10: exponent 1 - 2 + (3/2)(10/14) = 1/14 > 0
    net = 1 - 2 + Fraction(3, 2) * 10 * Fraction(1, 14)
    results.append(validate_schedule(fam(d=10), 0.25, 10).status == ("fail" if net >= 0 else "pass"))
    for alpha in (0.55, 0.75, 0.99):
        for C in (0.1, 1.0, 5.0):
            r = validate_schedule(fam(alpha=alpha, C=C, d=1, beta=0.02), 1.0, 1)
            results.append(r.status == "pass" and ("step-size regularity", True) in r.checks)
    results.append(validate_schedule(fam(alpha=1.0, C=1.5, d=1, beta=0.02), 1.0, 1).status == "pass")
    results.append(validate_schedule(fam(alpha=1.0, C=1.0, d=1, beta=0.02), 1.0, 1).status != "pass")
    ok = all(results)
    report(10, ok, f"{sum(results)}/{len(results)} validator cases as listed")
    assert ok
