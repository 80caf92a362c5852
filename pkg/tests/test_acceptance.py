"""Acceptance checks, one group per criterion.

Run with ``pytest tests/test_acceptance.py`` to get a PASS/FAIL line per
criterion at the end of the report. Criteria 3 and 4 read finished benchmark
repetitions from ``benchmark_cache/`` (override with DDPGP_BENCHMARK_CACHE)
and recompute any that are missing, which takes hours.
"""
import dataclasses
import os
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, stats

from ddpgp import bvn
from ddpgp.baselines import kaplan_meier, lpml
from ddpgp.cli import main
from ddpgp.data import ObservedRecord, coarsen_arrays, make_dataset
from ddpgp.estimands import ArmDraw, stratum_progression_mass, tau_draws
from ddpgp.gibbs import (
    ChainConfig,
    Context,
    PosteriorChain,
    run_chains,
    step3_update_sigma,
    step4_update_theta_star,
    step5_update_beta,
    sweep,
)
from ddpgp.model import ArmData, Hyperparameters, ModelState, empirical_bayes_init, observed_likelihood, stick_weights
from ddpgp.simulation import FitSettings, ScenarioSpec, run_repetitions

REPO = Path(__file__).resolve().parents[1]
CACHE = Path(os.environ.get("DDPGP_BENCHMARK_CACHE", REPO / "benchmark_cache"))

C1 = "bvn primitives match quadrature / Monte Carlo oracles on 100 instances in < 1 s"
C2 = "sampler: conjugate oracle (K=1, n=200) and Geweke test (n=5, censored)"
C3 = "scenario 1 BNP survival RMSE <= 0.03 per arm; scenario 2 BNP below Naive"
C4 = "tau RMSE smallest at rho=0.5 in every scenario; scenario 1 at rho=0.5 <= 0.12"
C5 = "tau identities: identical arms, arm swap, rho=0 independent-integral oracle"
C6 = "Kaplan-Meier hand fixture; LPML direct-summation oracle"
C7 = "bit-identical results under a fixed seed regardless of worker count"
C8 = "brain-trial numbers are not reproducible (data unavailable); documented"


def batch_means_se(x, n_batches=50):
    x = np.asarray(x, dtype=float)
    m = x.size // n_batches
    b = x[: m * n_batches].reshape(n_batches, m).mean(axis=1)
    return b.std(ddof=1) / np.sqrt(n_batches)


# --------------------------------------------------------------------------
# 1


def _bvn_instances(rng, n=100):
    out = []
    for _ in range(n):
        s1, s2 = rng.uniform(0.3, 2.0, 2)
        r = rng.uniform(-0.95, 0.95)
        sigma = np.array([[s1 * s1, r * s1 * s2], [r * s1 * s2, s2 * s2]])
        mu = rng.normal(0, 1, 2)
        out.append({
            "bvn": bvn.Bvn(mu, sigma), "mu": mu, "sigma": sigma, "r": r,
            "a": rng.normal(0, 1.5), "b": rng.normal(0, 1.5),
            "c": rng.normal(0, 1), "y": rng.normal(0, 1.5),
        })
    return out


def _std_cdf_oracle(a, b, r):
    f = lambda x: stats.norm.pdf(x) * stats.norm.cdf((b - r * x) / np.sqrt(1 - r * r))  # noqa: E731
    return integrate.quad(f, -np.inf, a, epsabs=1e-13, epsrel=1e-12)[0]


def _pdf(inst, s, t):
    return stats.multivariate_normal(inst["mu"], inst["sigma"]).pdf([s, t])


@pytest.mark.criterion(1, C1)
def test_c1_bvn_against_quadrature():
    rng = np.random.default_rng(1001)
    inst = _bvn_instances(rng)
    t0 = time.perf_counter()
    got = [
        (
            bvn.bvn_cdf(d["a"], d["b"], d["r"]),
            bvn.quadrant_upper_prob(d["bvn"], d["c"]),
            bvn.halfplane_slice(d["bvn"], d["y"], d["c"]),
            bvn.slice_ge(d["bvn"], d["y"], d["c"]),
        )
        for d in inst
    ]
    elapsed = time.perf_counter() - t0
    worst = 0.0
    for d, (cdf, quad, half, sl) in zip(inst, got):
        sd = np.sqrt(np.diag(d["sigma"]))
        oracle_quad = _std_cdf_oracle(-(d["c"] - d["mu"][0]) / sd[0], -(d["c"] - d["mu"][1]) / sd[1], d["r"])
        oracle_half = integrate.quad(lambda t: _pdf(d, d["y"], t), d["c"], np.inf, epsabs=1e-13)[0]
        oracle_slice = integrate.quad(lambda s: _pdf(d, s, d["y"]), d["c"], np.inf, epsabs=1e-13)[0]
        errs = [
            abs(cdf - _std_cdf_oracle(d["a"], d["b"], d["r"])),
            abs(quad - oracle_quad), abs(half - oracle_half), abs(sl - oracle_slice),
        ]
        worst = max(worst, *errs)
    print(f"\n[c1] max abs error {worst:.2e}, library time {elapsed * 1e3:.1f} ms")
    assert worst <= 1e-7
    assert elapsed < 1.0


@pytest.mark.criterion(1, C1)
def test_c1_quadrant_against_monte_carlo():
    rng = np.random.default_rng(1002)
    inst = _bvn_instances(rng)
    n = 200_000
    diff, var = 0.0, 0.0
    for d in inst:
        p = bvn.quadrant_upper_prob(d["bvn"], d["c"])
        y = rng.multivariate_normal(d["mu"], d["sigma"], size=n)
        hat = np.mean((y[:, 0] > d["c"]) & (y[:, 1] > d["c"]))
        diff += hat - p
        var += p * (1 - p) / n
    z = diff / np.sqrt(var)
    print(f"\n[c1] pooled Monte Carlo z = {z:.2f}")
    assert abs(z) <= 3.0


# --------------------------------------------------------------------------
# 2a: conjugate oracles with K = 1 and no censoring


@pytest.fixture(scope="module")
def conjugate_setup():
    rng = np.random.default_rng(2001)
    n = 200
    x = rng.uniform(-1.5, 1.5, n)
    design = np.column_stack([np.ones(n), x])
    y = np.column_stack([1.0 + 0.5 * np.sin(2 * x), 2.0 + 0.3 * x])
    y = y + rng.multivariate_normal([0, 0], [[0.3, 0.1], [0.1, 0.2]], size=n)
    arm = ArmData(np.arange(n), design, y[:, 0], y[:, 1], np.ones(n, int), np.ones(n, int))
    hp = Hyperparameters(np.array([[0.5, 0.0], [1.5, 0.0]]), 2.0, lambda0=6.0,
                         psi=np.array([[0.8, 0.1], [0.1, 0.6]]), k_trunc=1)
    return arm, hp, y


@pytest.mark.criterion(2, C2)
def test_c2a_beta_conjugate(conjugate_setup):
    arm, hp, y = conjugate_setup
    n = arm.n
    ctx = Context.build(arm, hp)
    sigma = np.array([[0.3, 0.1], [0.1, 0.2]])
    # closed form: vec(Y) ~ N(A b, Sigma (x) I + I (x) R), b ~ N(b0, Lambda0)
    a = np.kron(np.eye(2), arm.design)
    v = np.kron(sigma, np.eye(n)) + np.kron(np.eye(2), ctx.cache.r)
    vi_a = np.linalg.solve(v, a)
    l0i = np.linalg.inv(np.kron(np.eye(2), hp.lambda0_cov[0]))
    cov = np.linalg.inv(a.T @ vi_a + l0i)
    mean = cov @ (vi_a.T @ y.T.ravel() + l0i @ hp.beta0.ravel())
    rng = np.random.default_rng(2002)
    state = ModelState(np.ones(1), np.ones(1), np.repeat((hp.beta0 @ arm.design.T)[None], 1, 0),
                       hp.beta0[None].copy(), sigma, 1.0, np.zeros(n, int), y.copy())
    draws = []
    for it in range(6000):
        step4_update_theta_star(state, ctx, rng)
        step5_update_beta(state, ctx, rng)
        if it >= 1000:
            draws.append(state.beta[0].ravel().copy())
    draws = np.array(draws)
    z = [(draws[:, q].mean() - mean[q]) / batch_means_se(draws[:, q]) for q in range(4)]
    print(f"\n[c2a] beta z-scores {np.round(z, 2)}")
    assert np.all(np.abs(z) <= 3.0)


@pytest.mark.criterion(2, C2)
def test_c2a_sigma_conjugate(conjugate_setup):
    arm, hp, y = conjugate_setup
    n = arm.n
    rng = np.random.default_rng(2003)
    theta = np.column_stack([0.9 + 0.4 * np.sin(2 * arm.design[:, 1]), 2.0 + 0.3 * arm.design[:, 1]])
    state = ModelState(np.ones(1), np.ones(1), theta.T[None].copy(), hp.beta0[None].copy(),
                       np.eye(2), 1.0, np.zeros(n, int), y.copy())
    resid = y - theta
    expected = (hp.psi + resid.T @ resid) / (hp.lambda0 + n - 3)
    draws = np.array([step3_update_sigma(state, hp, rng).sigma.copy() for _ in range(4000)])
    z = [
        (draws[:, i, j].mean() - expected[i, j]) / (draws[:, i, j].std(ddof=1) / np.sqrt(len(draws)))
        for i, j in ((0, 0), (0, 1), (1, 1))
    ]
    print(f"\n[c2a] sigma z-scores {np.round(z, 2)}")
    assert np.all(np.abs(z) <= 3.0)


# --------------------------------------------------------------------------
# 2b: Geweke joint-distribution test


GEWEKE_CYCLES = 100_000


def _geweke_prior(n, k):
    x = np.linspace(-1.0, 1.0, n)
    design = np.column_stack([np.ones(n), x])
    hp = Hyperparameters(np.array([[0.0, 0.5], [1.0, 0.5]]), 1.0, lambda0=12.0,
                         psi=9.0 * np.array([[0.5, 0.2], [0.2, 0.6]]), lambda1=2.0, lambda2=2.0, k_trunc=k)
    censor = np.array([0.0, 0.5, 1.0, 1.5, 2.0])[:n]
    return design, hp, censor


def _draw_latent(state, design, censor, rng):
    n = design.shape[0]
    gamma = rng.choice(state.k, size=n, p=state.w)
    mu = state.theta[gamma, :, np.arange(n)]
    y = mu + rng.multivariate_normal([0.0, 0.0], state.sigma, size=n)
    t1, t2, d, xi = coarsen_arrays(y[:, 0], y[:, 1], censor)
    arm = ArmData(np.arange(n), design, t1, t2, d, xi)
    return gamma, y, arm


def _prior_params(hp, design, chol_r, rng):
    k, n = hp.k_trunc, design.shape[0]
    alpha = rng.gamma(hp.lambda1, 1.0 / hp.lambda2)
    v = rng.beta(1.0, alpha, k)
    v[-1] = 1.0
    sigma = stats.invwishart.rvs(df=hp.lambda0, scale=hp.psi, random_state=rng)
    beta = hp.beta0[None] + np.einsum("jpq,kjq->kjp", np.linalg.cholesky(hp.lambda0_cov), rng.standard_normal((k, 2, hp.p)))
    theta = np.einsum("np,kjp->kjn", design, beta) + np.einsum("nm,kjm->kjn", chol_r, rng.standard_normal((k, 2, n)))
    return alpha, v, sigma, beta, theta


def _moments(alpha, sigma, beta):
    """Test functions: first and second moments of alpha, Sigma entries and beta entries."""
    s = np.array([sigma[0, 0], sigma[0, 1], sigma[1, 1]])
    b = beta.reshape(beta.shape[0], -1).mean(axis=0)
    b2 = (beta.reshape(beta.shape[0], -1) ** 2).mean(axis=0)
    return np.concatenate([[alpha, alpha * alpha], s, s * s, b, b2])


MOMENT_NAMES = (["alpha", "alpha^2", "S11", "S12", "S22", "S11^2", "S12^2", "S22^2"]
                + [f"beta{j}{q}" for j in (1, 2) for q in (0, 1)]
                + [f"beta{j}{q}^2" for j in (1, 2) for q in (0, 1)])


@pytest.mark.criterion(2, C2)
def test_c2b_geweke():
    t_start = time.perf_counter()
    n, k = 5, 3
    design, hp, censor = _geweke_prior(n, k)
    rng = np.random.default_rng(2004)
    # marginal-conditional simulator: independent prior draws
    chol_r = np.linalg.cholesky(Context.build(ArmData(np.arange(n), design, censor, censor, np.zeros(n, int),
                                                      np.zeros(n, int)), hp).cache.r)
    mc = np.array([_moments(*[p for i, p in enumerate(_prior_params(hp, design, chol_r, rng)) if i in (0, 2, 3)])
                   for _ in range(GEWEKE_CYCLES)])
    # successive-conditional simulator: Gibbs sweep, then fresh data from the current parameters
    alpha, v, sigma, beta, theta = _prior_params(hp, design, chol_r, rng)
    state = ModelState(v, stick_weights(v), theta, beta, sigma, alpha, np.zeros(n, int), np.zeros((n, 2)))
    state.gamma, state.y, arm = _draw_latent(state, design, censor, rng)
    ctx = Context.build(arm, hp)
    sc = np.empty_like(mc)
    cases = np.zeros(4)
    for it in range(GEWEKE_CYCLES):
        sweep(state, ctx, rng)
        sc[it] = _moments(state.alpha, state.sigma, state.beta)
        state.gamma, state.y, arm = _draw_latent(state, design, censor, rng)
        ctx = dataclasses.replace(ctx, arm=arm)
        cases += [m.sum() for m in arm.case_masks()]
    se = np.sqrt(np.array([batch_means_se(sc[:, j], 100) ** 2 for j in range(sc.shape[1])])
                 + mc.var(axis=0, ddof=1) / GEWEKE_CYCLES)
    z = (sc.mean(axis=0) - mc.mean(axis=0)) / se
    elapsed = time.perf_counter() - t_start
    share = cases / cases.sum()
    print(f"\n[c2b] {GEWEKE_CYCLES} cycles in {elapsed:.0f} s; case shares (full, prog only, death only, "
          f"both censored) {np.round(share, 3)}")
    for name, zz in zip(MOMENT_NAMES, z):
        print(f"[c2b]   {name:9s} z = {zz:+.2f}")
    assert np.all(share[1:] > 0.05), "censoring patterns should all be exercised"
    assert np.all(np.abs(z) <= 4.0)
    assert elapsed <= 30 * 60


# --------------------------------------------------------------------------
# 3 and 4: desk-scale simulation study


@pytest.fixture(scope="module")
def benchmark_reports():
    settings = FitSettings()
    reps = {1: 20, 2: 20, 3: 10}
    return {sc: run_repetitions(ScenarioSpec(sc), r, settings, cache_dir=CACHE) for sc, r in reps.items()}


@pytest.mark.criterion(3, C3)
def test_c3_survival_rmse(benchmark_reports):
    r1, r2 = benchmark_reports[1], benchmark_reports[2]
    assert not r1.failures and not r2.failures
    s1 = [r1.mean_rmse(1, "bnp", arm=a) for a in (0, 1)]
    bnp2 = [r2.mean_rmse(1, "bnp", arm=a) for a in (0, 1)]
    naive2 = [r2.mean_rmse(1, "naive", arm=a) for a in (0, 1)]
    print(f"\n[c3] scenario 1 BNP survival RMSE by arm {np.round(s1, 4)}")
    print(f"[c3] scenario 2 BNP {np.round(bnp2, 4)} vs Naive {np.round(naive2, 4)}")
    assert all(v <= 0.03 for v in s1)
    assert all(b < m for b, m in zip(bnp2, naive2))


@pytest.mark.criterion(4, C4)
@pytest.mark.parametrize("scenario", [1, 2, 3])
def test_c4_tau_rho_ordering(benchmark_reports, scenario):
    rep = benchmark_reports[scenario]
    assert rep.reps >= 10 and not rep.failures
    means = {rho: rep.mean_rmse(2, "bnp", rho=rho) for rho in (0.2, 0.5, 0.8)}
    print(f"\n[c4] scenario {scenario} mean tau RMSE by rho {({k: round(v, 4) for k, v in means.items()})}")
    assert means[0.5] < means[0.2] and means[0.5] < means[0.8]


@pytest.mark.criterion(4, C4)
def test_c4_scenario1_tau_level(benchmark_reports):
    value = benchmark_reports[1].mean_rmse(2, "bnp", rho=0.5)
    print(f"\n[c4] scenario 1 mean tau RMSE at rho=0.5: {value:.4f}")
    assert value <= 0.12


# --------------------------------------------------------------------------
# 5


def _chain(arm, rng, shift=0.0, s=5, k=3, n=6):
    x = np.linspace(-1, 1, n)
    v = rng.uniform(0.2, 0.8, (s, k))
    v[:, -1] = 1
    w = np.array([stick_weights(r) for r in v])
    theta = rng.normal(0, 0.5, (s, k, 2, n)) + np.array([3.0, 4.0 + shift])[None, None, :, None]
    sigma = np.repeat(np.array([[0.5, 0.2], [0.2, 0.6]])[None], s, 0)
    return PosteriorChain(arm, "bnp", w, sigma, np.ones(s), np.zeros((s, k, 2, 2)), theta,
                          np.column_stack([np.ones(n), x]), np.arange(n), 0.1)


U = np.exp([2.5, 3.0, 3.5, 4.0, 4.5])


@pytest.mark.criterion(5, C5)
def test_c5_identities():
    rng = np.random.default_rng(5001)
    c0 = _chain(0, rng)
    same = dataclasses.replace(c0, arm=1)
    ones, _ = tau_draws(c0, same, None, U, [0.0, 0.2, 0.5, 0.8])
    assert np.max(np.abs(ones - 1.0)) <= 1e-6
    c1 = _chain(1, rng, shift=0.3)
    fwd, _ = tau_draws(c0, c1, None, U, [0.2, 0.5, 0.8])
    back, _ = tau_draws(c1, c0, None, U, [0.2, 0.5, 0.8])
    assert np.max(np.abs(fwd * back - 1.0)) <= 1e-12


@pytest.mark.criterion(5, C5)
def test_c5_rho_zero_oracle():
    rng = np.random.default_rng(5002)
    c0, c1 = _chain(0, rng, s=1), _chain(1, rng, shift=0.4, s=1)
    a0 = ArmDraw(c0.w[0], c0.theta[0], c0.sigma[0])
    a1 = ArmDraw(c1.w[0], c1.theta[0], c1.sigma[0])

    def oracle(num, other, s):
        vals = []
        for i in range(num.loc.shape[-1]):
            inner = lambda t: sum(  # noqa: E731
                w * stats.norm.pdf(t, m[1, i], np.sqrt(num.sigma[1, 1]))
                * stats.norm.cdf(s, m[0, i] + num.sigma[0, 1] / num.sigma[1, 1] * (t - m[1, i]),
                                 np.sqrt(num.sigma[0, 0] - num.sigma[0, 1] ** 2 / num.sigma[1, 1]))
                for w, m in zip(num.w, num.loc)
            )
            joint = integrate.quad(inner, s, np.inf, epsabs=1e-13, epsrel=1e-11)[0]
            surv = sum(w * stats.norm.sf(s, m[1, i], np.sqrt(other.sigma[1, 1])) for w, m in zip(other.w, other.loc))
            vals.append(joint * surv)
        return np.mean(vals)

    log_u = np.log(U)
    num = np.array([oracle(a1, a0, s) for s in log_u])
    den = np.array([oracle(a0, a1, s) for s in log_u])
    got, _ = tau_draws(c0, c1, None, U, [0.0])
    assert np.allclose(stratum_progression_mass(a1, a0, log_u, [0.0])[0], num, atol=1e-6, rtol=0)
    assert np.max(np.abs(got[0, 0] - num / den)) <= 1e-6


# --------------------------------------------------------------------------
# 6


@pytest.mark.criterion(6, C6)
def test_c6_kaplan_meier_fixture():
    # times 1, 2, 2+, 3, 4+, 5: S = 5/6, 5/6 * 4/5, * 2/3, unchanged, 0
    km = kaplan_meier([1, 2, 2, 3, 4, 5], [1, 1, 0, 1, 0, 1])
    assert list(km.times) == [1, 2, 3, 4, 5]
    exact = [Fraction(5, 6), Fraction(2, 3), Fraction(4, 9), Fraction(4, 9), Fraction(0)]
    # exact rationals, compared to within double rounding (a few ulp)
    for got, want in zip(km.survival, exact):
        assert abs(Fraction(float(got)) - want) <= 4 * np.finfo(float).eps * want
    assert list(km.at_risk) == [6, 5, 3, 2, 1] and list(km.events) == [1, 1, 1, 0, 1]


@pytest.mark.criterion(6, C6)
def test_c6_lpml_oracle():
    rng = np.random.default_rng(6001)
    n, s, k = 10, 50, 3
    delta = np.array([1, 1, 0, 1, 0, 1, 1, 0, 1, 1])
    xi = np.array([1, 0, 1, 1, 0, 0, 1, 1, 1, 0])
    t2 = rng.uniform(1.0, 3.0, n)
    t1 = np.where(delta == 1, t2 - rng.uniform(0.1, 0.8, n), t2)
    ds = make_dataset(t1, t2, delta, xi, np.zeros(n), rng.normal(size=(n, 1)))
    v = rng.uniform(0.2, 0.8, (s, k))
    v[:, -1] = 1
    chain = PosteriorChain(0, "bnp", np.array([stick_weights(r) for r in v]),
                           np.repeat(np.array([[0.4, 0.1], [0.1, 0.5]])[None], s, 0), np.ones(s),
                           np.zeros((s, k, 2, 2)), rng.normal(1.5, 0.6, (s, k, 2, n)), ds.design(), np.arange(n), 0.1)
    f1, f2 = ds.fitting_times()
    total = 0.0
    for i in range(n):
        rec = ObservedRecord(f1[i], f2[i], int(delta[i]), int(xi[i]), 0, ())
        lik = [observed_likelihood(chain.state(d), rec, i) for d in range(s)]
        total += -np.log(np.mean(1.0 / np.array(lik)))
    assert abs(lpml(chain, ds).lpml - total) <= 1e-10


# --------------------------------------------------------------------------
# 7


@pytest.mark.criterion(7, C7)
def test_c7_sampler_workers():
    ds = make_dataset(*_tiny_data())
    hp = empirical_bayes_init(ds, 0, k_trunc=4)
    cfg = ChainConfig(iterations=40, burn_in=10, thin=3, seed=17, chains=3)
    a = run_chains(ds, 0, hp, cfg, workers=1)
    b = run_chains(ds, 0, hp, cfg, workers=3)
    for name in ("w", "sigma", "alpha", "beta", "theta"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def _tiny_data():
    rng = np.random.default_rng(7001)
    n = 40
    yp, yd, c = rng.normal(1, 1, n), rng.normal(2, 1, n), rng.uniform(1.5, 3.5, n)
    t1, t2, d, xi = coarsen_arrays(yp, yd, c)
    return t1, t2, d, xi, rng.integers(0, 2, n), rng.normal(size=(n, 1))


@pytest.mark.criterion(7, C7)
def test_c7_repetitions_workers():
    tiny = FitSettings(iterations=30, burn_in=10, thin=5, k_trunc=4, tau_draws=3, tau_nodes=16)
    a = run_repetitions(ScenarioSpec(2, n=40, seed=3), 2, tiny, workers=1)
    b = run_repetitions(ScenarioSpec(2, n=40, seed=3), 2, tiny, workers=2)
    assert a.to_dict() == b.to_dict()


@pytest.mark.criterion(7, C7)
def test_c7_commands(tmp_path):
    fast = ["--iterations", "30", "--burn-in", "10", "--thin", "4", "--k", "4", "--seed", "5"]
    runs = {}
    for tag, workers in (("a", "1"), ("b", "2")):
        out = tmp_path / tag
        assert main(["simulate", "--scenario", "3", "--n", "50", "--seed", "5", "--out", str(out / "sim")]) == 0
        assert main(["fit", "--data", str(out / "sim" / "data.csv"), "--chains", "2", "--workers", workers,
                     *fast, "--out", str(out / "fit")]) == 0
        assert main(["estimand", "--chains-dir", str(out / "fit"), "--grid-points", "6", "--nodes", "16",
                     "--out", str(out / "est")]) == 0
        assert main(["report", "--chains-dir", str(out / "fit"), "--data", str(out / "sim" / "data.csv"),
                     "--out", str(out / "rep")]) == 0
        runs[tag] = {
            p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*"))
            if p.is_file() and p.name != "config.resolved"
        }
    assert runs["a"].keys() == runs["b"].keys() and len(runs["a"]) > 10
    for name in runs["a"]:
        assert runs["a"][name] == runs["b"][name], name


# --------------------------------------------------------------------------
# 8


@pytest.mark.criterion(8, C8)
def test_c8_documented():
    readme = (REPO / "README.md").read_text().lower()
    assert "not reproducible" in readme and "brain" in readme
