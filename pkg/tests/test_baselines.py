import numpy as np
import pytest

from ddpgp.baselines import kaplan_meier, lpml, log_likelihood_matrix, fit_naive
from ddpgp.data import ObservedRecord, make_dataset
from ddpgp.gibbs import ChainConfig, PosteriorChain, run_chain
from ddpgp.model import empirical_bayes_init, observed_likelihood


def test_km_hand_fixture():
    km = kaplan_meier([1, 2, 2, 3, 4, 5], [1, 1, 0, 1, 0, 1])
    assert np.array_equal(km.times, [1, 2, 3, 4, 5])
    assert np.allclose(km.survival, [5 / 6, 2 / 3, 4 / 9, 4 / 9, 0.0], rtol=0, atol=1e-15)
    assert np.array_equal(km.at_risk, [6, 5, 3, 2, 1])
    assert np.array_equal(km.events, [1, 1, 1, 0, 1])
    assert km.greenwood_var[2] == pytest.approx((4 / 9) ** 2 * 0.25, rel=1e-14)
    assert km(0.5) == 1.0 and km(2.5) == pytest.approx(2 / 3) and km(10) == 0.0
    assert np.all(km.lo <= km.survival) and np.all(km.survival <= km.hi)
    assert km.lo[-1] == km.hi[-1] == 0.0


def test_km_no_events_and_validation():
    km = kaplan_meier([3.0, 4.0], [0, 0])
    assert np.all(km.survival == 1.0)
    with pytest.raises(ValueError):
        kaplan_meier([], [])
    with pytest.raises(ValueError):
        kaplan_meier([0.0, 1.0], [1, 1])


def lpml_setup(rng, s=50, n=10, k=3):
    t1 = rng.uniform(0.5, 2.0, n)
    t2 = t1 + rng.uniform(0.1, 1.0, n)
    delta = np.array([1, 1, 0, 1, 0, 1, 1, 0, 1, 1])[:n]
    xi = np.array([1, 0, 1, 1, 0, 0, 1, 1, 1, 0])[:n]
    t1 = np.where(delta == 0, t2, t1)
    ds = make_dataset(t1, t2, delta, xi, np.zeros(n), rng.normal(size=(n, 1)))
    v = rng.uniform(0.2, 0.8, (s, k))
    v[:, -1] = 1
    w = v * np.concatenate([np.ones((s, 1)), np.cumprod(1 - v[:, :-1], axis=1)], axis=1)
    theta = rng.normal(1.5, 0.6, (s, k, 2, n))
    sigma = np.repeat(np.array([[0.4, 0.1], [0.1, 0.5]])[None], s, 0)
    chain = PosteriorChain(0, "bnp", w, sigma, np.ones(s), np.zeros((s, k, 2, 2)), theta, ds.design(),
                           np.arange(n), 0.1)
    return ds, chain


def test_lpml_matches_direct_summation(rng):
    ds, chain = lpml_setup(rng)
    t1, t2 = ds.fitting_times()
    total = 0.0
    for i in range(ds.n):
        rec = ObservedRecord(t1[i], t2[i], int(ds.delta[i]), int(ds.xi[i]), 0, ())
        lik = np.array([observed_likelihood(chain.state(s), rec, i) for s in range(chain.n_draws)])
        total += np.log(1.0 / np.mean(1.0 / lik))
    res = lpml(chain, ds)
    assert res.lpml == pytest.approx(total, abs=1e-10)
    assert res.to_dict()["n_nonfinite"] == 0


def test_lpml_single_and_duplicated_draws(rng):
    ds, chain = lpml_setup(rng)
    one = chain.subset([3])
    ll = log_likelihood_matrix(one, ds)[0]
    assert lpml(one, ds).lpml == pytest.approx(ll.sum(), abs=1e-12)
    dup = chain.subset([3, 3, 3, 3])
    assert lpml(dup, ds).lpml == pytest.approx(ll.sum(), abs=1e-10)
    with pytest.raises(ValueError):
        log_likelihood_matrix(one, ds, scope="bogus")


def test_lpml_survival_scope(rng):
    ds, chain = lpml_setup(rng)
    res = lpml(chain, ds, scope="survival")
    assert np.isfinite(res.lpml) and res.scope == "survival"


def test_naive_recovers_regression(rng):
    n = 300
    x = rng.normal(size=(n, 1))
    yp = 1.0 + 0.5 * x[:, 0] + rng.normal(0, 0.4, n)
    yd = 2.5 - 0.3 * x[:, 0] + 0.5 * (yp - 1.0 - 0.5 * x[:, 0]) + rng.normal(0, 0.3, n)
    ds = make_dataset(yp, np.maximum(yd, yp + 1e-3), np.ones(n), np.ones(n), np.zeros(n), x)
    ch = fit_naive(ds, 0, ChainConfig(iterations=1500, burn_in=300, thin=3, seed=4))
    assert ch.kind == "naive" and ch.k == 1 and np.all(ch.w == 1.0)
    t1, t2 = ds.fitting_times()
    coef, *_ = np.linalg.lstsq(ds.design(), np.column_stack([t1, t2]), rcond=None)
    assert np.allclose(ch.beta[:, 0].mean(axis=0), coef.T, atol=0.03)
    loc = ch.locations()
    assert loc.shape == (ch.n_draws, 1, 2, n)


def test_naive_and_bnp_lpml_on_shared_data(small_dataset):
    cfg = ChainConfig(iterations=60, burn_in=20, thin=2, seed=1)
    bnp = run_chain(small_dataset, 0, empirical_bayes_init(small_dataset, 0, k_trunc=5), cfg)
    naive = fit_naive(small_dataset, 0, cfg)
    for ch in (bnp, naive):
        res = lpml(ch, small_dataset)
        assert np.isfinite(res.lpml) and res.log_cpo.size == ch.rows.size
