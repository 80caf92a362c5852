"""Blocked Gibbs sampler for the per-arm DDP-GP mixture.

One sweep runs, in order: stick fractions, DP mass, kernel covariance,
component locations, GP mean coefficients, then memberships jointly with the
latent event times.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import cached_property
from math import log

import numpy as np
from scipy import linalg, stats

from .bvn import NegligibleMassError, _std_truncnorm, sample_quadrant
from .kernel import build_kernel, kriging_matrix
from .model import (
    ArmData,
    ModelState,
    _cond_params,
    initial_state,
    log_case_masses,
    log_weights,
    stick_weights,
)

log_ = logging.getLogger(__name__)

_LOG_MIN_MASS = log(1e-300)
_V_CLAMP = 1.0 - 1e-12


class SamplerError(RuntimeError):
    def __init__(self, message, iteration=None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 5000
    burn_in: int = 2000
    thin: int = 10
    seed: int = 0
    k_trunc: int = None
    chains: int = 1

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must be smaller than iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")

    @property
    def n_draws(self):
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class Context:
    """Everything fixed for the life of a fit: data, kernel, cached solves."""

    arm: ArmData
    hp: object
    cache: object
    rinv_x: np.ndarray
    beta_cov: np.ndarray
    beta_chol: np.ndarray
    prior_pull: np.ndarray

    @classmethod
    def build(cls, arm, hp, cache=None):
        cache = cache or build_kernel(arm.design, hp.epsilon)
        x = arm.design
        rinv_x = linalg.cho_solve((cache.chol, True), x, check_finite=False)
        xtrx = x.T @ rinv_x
        cov = np.empty_like(hp.lambda0_cov)
        pull = np.empty(hp.beta0.shape)
        for j in range(2):
            l0inv = np.linalg.inv(hp.lambda0_cov[j])
            cov[j] = np.linalg.inv(xtrx + l0inv)
            cov[j] = 0.5 * (cov[j] + cov[j].T)
            pull[j] = l0inv @ hp.beta0[j]
        return cls(arm, hp, cache, rinv_x, cov, np.linalg.cholesky(cov), pull)


# --------------------------------------------------------------------------
# the six updates


def step1_update_weights(state, rng):
    """Redraw stick fractions given memberships and recompute the weights."""
    k = state.k
    n_h = state.counts()
    tail = np.concatenate([np.cumsum(n_h[::-1])[::-1][1:], [0]])
    v = np.empty(k)
    v[:-1] = rng.beta(1.0 + n_h[:-1], state.alpha + tail[:-1])
    v[-1] = 1.0
    state.v = v
    state.w = stick_weights(v)
    return state


def step2_update_alpha(state, hp, rng):
    v = state.v[:-1]
    if np.any(v >= _V_CLAMP):
        log_.debug("clamping %d stick fraction(s) at 1 - 1e-12", int(np.sum(v >= _V_CLAMP)))
        v = np.minimum(v, _V_CLAMP)
    shape = hp.lambda1 + state.k - 1
    rate = hp.lambda2 - np.sum(np.log1p(-v))
    state.alpha = float(rng.gamma(shape, 1.0 / rate))
    return state


def _member_means(state):
    return state.theta[state.gamma, :, np.arange(state.gamma.size)]


def sample_inverse_wishart(df, scale, rng):
    return np.atleast_2d(stats.invwishart.rvs(df=df, scale=scale, random_state=rng))


def step3_update_sigma(state, hp, rng):
    resid = state.y - _member_means(state) if state.y.size else np.zeros((0, 2))
    scatter = hp.psi + resid.T @ resid
    s = sample_inverse_wishart(hp.lambda0 + resid.shape[0], scatter, rng)
    state.sigma = 0.5 * (s + s.T)
    return state


def _members(gamma, k):
    order = np.argsort(gamma, kind="stable")
    bounds = np.searchsorted(gamma[order], np.arange(k + 1))
    return [order[bounds[h]:bounds[h + 1]] for h in range(k)]


def step4_update_theta_star(state, ctx, rng):
    """Redraw each component's GP values at the observed rows.

    Uses pathwise conditioning: a prior draw from N(X beta, R) corrected by the
    members' adjusted responses. This is the same Gaussian as the precision
    form (R^-1 + U'U / s^2)^-1 but needs only an n_h x n_h factorization.
    """
    r = ctx.cache.r
    n = ctx.arm.n
    k = state.k
    s11, s12, s22, v1g2, v2g1 = _cond_params(state.sigma)
    noise = (v1g2, v2g1)
    means = np.einsum("np,kjp->kjn", ctx.arm.design, state.beta)
    dev = ctx.cache.chol @ rng.standard_normal((n, 2 * k))
    prior = means + dev.T.reshape(k, 2, n)
    members = _members(state.gamma, k)
    y = state.y
    for h in range(k):
        idx = members[h]
        if idx.size == 0:
            state.theta[h] = prior[h]
            continue
        r_cols = r[:, idx]
        r_aa = r_cols[idx]
        for j in range(2):
            if j == 0:
                yt = y[idx, 0] - s12 / s22 * (y[idx, 1] - state.theta[h, 1, idx])
            else:
                yt = y[idx, 1] - s12 / s11 * (y[idx, 0] - state.theta[h, 0, idx])
            f = prior[h, j]
            e = np.sqrt(noise[j]) * rng.standard_normal(idx.size)
            a = r_aa.copy()
            a[np.diag_indices_from(a)] += noise[j]
            try:
                cf = linalg.cho_factor(a, lower=True, check_finite=False)
            except linalg.LinAlgError as exc:
                raise SamplerError(f"factorization failed for component {h}, endpoint {j + 1}") from exc
            corr = linalg.cho_solve(cf, yt - f[idx] - e, check_finite=False)
            state.theta[h, j] = f + r_cols @ corr
    return state


def step5_update_beta(state, ctx, rng):
    rhs = state.theta @ ctx.rinv_x + ctx.prior_pull[None]
    mean = np.einsum("jpq,kjq->kjp", ctx.beta_cov, rhs)
    z = rng.standard_normal(mean.shape)
    state.beta = mean + np.einsum("jpq,kjq->kjp", ctx.beta_chol, z)
    return state


def augment(theta, w, sigma, arm, gamma_prev, y_prev, rng):
    """Joint draw of memberships and latent times given component locations.

    ``theta`` is (K, 2, n). Returns new (gamma, y) and the number of subjects
    whose region mass underflowed for every component (those keep their
    previous values).
    """
    mu1 = theta[:, 0, :].T
    mu2 = theta[:, 1, :].T
    lm = log_case_masses(mu1, mu2, sigma, arm.t1, arm.t2, arm.delta, arm.xi)
    lp = lm + log_weights(w)[None, :]
    top = lp.max(axis=1)
    ok = np.isfinite(top)
    n = arm.n
    gamma = gamma_prev.copy()
    u = rng.random(n)
    if ok.any():
        prob = np.exp(lp[ok] - top[ok, None])
        cdf = np.cumsum(prob, axis=1)
        pick = (cdf < (u[ok] * cdf[:, -1])[:, None]).sum(axis=1)
        gamma[ok] = np.minimum(pick, w.size - 1)
    chosen = lm[np.arange(n), gamma]
    ok &= chosen >= _LOG_MIN_MASS
    degenerate = int(n - ok.sum())
    gamma[~ok] = gamma_prev[~ok]
    y = y_prev.copy()
    m1 = mu1[np.arange(n), gamma]
    m2 = mu2[np.arange(n), gamma]
    s11, s12, s22, v1g2, v2g1 = _cond_params(sigma)
    full, prog_cens, death_only, both_cens = arm.case_masks()
    y[full, 0] = arm.t1[full]
    y[full, 1] = arm.t2[full]
    sel = prog_cens & ok
    if sel.any():
        cm = m2[sel] + s12 / s11 * (arm.t1[sel] - m1[sel])
        sd = np.sqrt(v2g1)
        y[sel, 0] = arm.t1[sel]
        y[sel, 1] = cm + sd * _std_truncnorm((arm.t2[sel] - cm) / sd, np.full(cm.shape, np.inf), rng)
    sel = death_only & ok
    if sel.any():
        cm = m1[sel] + s12 / s22 * (arm.t2[sel] - m2[sel])
        sd = np.sqrt(v1g2)
        y[sel, 1] = arm.t2[sel]
        y[sel, 0] = cm + sd * _std_truncnorm((arm.t1[sel] - cm) / sd, np.full(cm.shape, np.inf), rng)
    sel = both_cens & ok
    if sel.any():
        y[sel] = sample_quadrant(
            np.column_stack([m1[sel], m2[sel]]), sigma, arm.t2[sel], rng, log_mass=chosen[sel]
        )
    # guard the strict inequalities against rounding at the boundary
    y[prog_cens, 1] = np.maximum(y[prog_cens, 1], np.nextafter(arm.t2[prog_cens], np.inf))
    y[death_only, 0] = np.maximum(y[death_only, 0], np.nextafter(arm.t1[death_only], np.inf))
    y[both_cens] = np.maximum(y[both_cens], np.nextafter(arm.t2[both_cens], np.inf)[:, None])
    return gamma, y, degenerate


def step6_update_membership_and_augment(state, ctx, rng):
    gamma, y, degenerate = augment(state.theta, state.w, state.sigma, ctx.arm, state.gamma, state.y, rng)
    if degenerate:
        log_.info("%d subject(s) had underflowing region mass; kept previous membership", degenerate)
    state.gamma = gamma
    state.y = y
    return state


def sweep(state, ctx, rng):
    step1_update_weights(state, rng)
    step2_update_alpha(state, ctx.hp, rng)
    step3_update_sigma(state, ctx.hp, rng)
    step4_update_theta_star(state, ctx, rng)
    step5_update_beta(state, ctx, rng)
    step6_update_membership_and_augment(state, ctx, rng)
    return state


# --------------------------------------------------------------------------
# chains


@dataclass
class PosteriorChain:
    """Thinned post-burn-in draws for one arm, stacked along the first axis.

    ``theta`` holds component locations at the arm's own rows; ``design`` is
    the pooled design matrix of the whole dataset and ``rows`` the arm's
    positions in it.
    """

    arm: int
    kind: str
    w: np.ndarray
    sigma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    theta: np.ndarray
    design: np.ndarray
    rows: np.ndarray
    epsilon: float
    config: dict = field(default_factory=dict)

    @property
    def n_draws(self):
        return self.w.shape[0]

    @property
    def k(self):
        return self.w.shape[1]

    def state(self, s):
        return ModelState(
            v=np.full(self.k, np.nan), w=self.w[s], theta=self.theta[s], beta=self.beta[s],
            sigma=self.sigma[s], alpha=float(self.alpha[s]), gamma=None, y=None,
        )

    def subset(self, idx):
        idx = np.asarray(idx)
        return PosteriorChain(
            self.arm, self.kind, self.w[idx], self.sigma[idx], self.alpha[idx], self.beta[idx],
            self.theta[idx], self.design, self.rows, self.epsilon, dict(self.config),
        )

    @cached_property
    def _kriging(self):
        other = np.setdiff1d(np.arange(self.design.shape[0]), self.rows)
        if self.kind != "bnp" or other.size == 0:
            return other, None
        cache = build_kernel(self.design[self.rows], self.epsilon)
        return other, kriging_matrix(cache, self.design[other])

    def locations(self):
        """Component locations at every pooled row, shape (S, K, 2, N).

        Own rows use the sampled GP values; the other arm's rows use the
        kriging mean given those values.
        """
        s, k = self.n_draws, self.k
        out = np.empty((s, k, 2, self.design.shape[0]))
        if self.kind == "naive":
            return np.einsum("np,skjp->skjn", self.design, self.beta)
        out[..., self.rows] = self.theta
        other, m = self._kriging
        if other.size:
            xa = self.design[self.rows]
            resid = self.theta - np.einsum("np,skjp->skjn", xa, self.beta)
            out[..., other] = np.einsum("np,skjp->skjn", self.design[other], self.beta) + resid @ m.T
        return out

    def predict_locations(self, x_design):
        """Kriging means of every component at new design rows, (S, K, 2, m)."""
        x_design = np.atleast_2d(x_design)
        mean = np.einsum("np,skjp->skjn", x_design, self.beta)
        if self.kind == "naive":
            return mean
        cache = build_kernel(self.design[self.rows], self.epsilon)
        m = kriging_matrix(cache, x_design)
        resid = self.theta - np.einsum("np,skjp->skjn", self.design[self.rows], self.beta)
        return mean + resid @ m.T

    def traces(self):
        """Per-draw scalar summaries (alpha, sigma entries, occupied components)."""
        return {
            "alpha": self.alpha,
            "sigma11": self.sigma[:, 0, 0],
            "sigma12": self.sigma[:, 0, 1],
            "sigma22": self.sigma[:, 1, 1],
            "k_eff": np.sum(self.w > 0.01, axis=1),
        }


def pool_chains(chains):
    first = chains[0]
    cat = lambda name: np.concatenate([getattr(c, name) for c in chains])  # noqa: E731
    return PosteriorChain(
        first.arm, first.kind, cat("w"), cat("sigma"), cat("alpha"), cat("beta"), cat("theta"),
        first.design, first.rows, first.epsilon, dict(first.config),
    )


def chain_seed(master_seed, *path):
    """Generator for a (master seed, index...) path; independent of worker count."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, path)]))


def run_chain(ds, arm, hp, cfg, chain_index=0, callback=None):
    """Fit one arm with the blocked Gibbs sampler and return thinned draws."""
    if cfg.k_trunc is not None and cfg.k_trunc != hp.k_trunc:
        hp = type(hp)(**{**hp.__dict__, "k_trunc": cfg.k_trunc})
    arm_data = ArmData.from_dataset(ds, arm)
    ctx = Context.build(arm_data, hp)
    rng = chain_seed(cfg.seed, arm, chain_index)
    state = initial_state(arm_data, hp, rng)
    draws = {k: [] for k in ("w", "sigma", "alpha", "beta", "theta")}
    for it in range(1, cfg.iterations + 1):
        try:
            sweep(state, ctx, rng)
        except (SamplerError, NegligibleMassError, np.linalg.LinAlgError, ValueError) as exc:
            raise SamplerError(str(exc), it) from exc
        if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            draws["w"].append(state.w.copy())
            draws["sigma"].append(state.sigma.copy())
            draws["alpha"].append(state.alpha)
            draws["beta"].append(state.beta.copy())
            draws["theta"].append(state.theta.copy())
        if callback is not None:
            callback(it, state)
    return PosteriorChain(
        arm=int(arm), kind="bnp", w=np.array(draws["w"]), sigma=np.array(draws["sigma"]),
        alpha=np.array(draws["alpha"]), beta=np.array(draws["beta"]), theta=np.array(draws["theta"]),
        design=ds.design(), rows=arm_data.rows, epsilon=hp.epsilon,
        config={**asdict(cfg), "k_trunc": hp.k_trunc},
    )


def _run_one(args):
    fit, ds, arm, hp, cfg, idx = args
    return fit(ds, arm, hp, cfg, chain_index=idx)


def run_chains(ds, arm, hp, cfg, workers=1, fit=run_chain):
    """``cfg.chains`` independently seeded chains, pooled after burn-in."""
    jobs = [(fit, ds, arm, hp, cfg, i) for i in range(cfg.chains)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chains = list(ex.map(_run_one, jobs))
    else:
        chains = [_run_one(j) for j in jobs]
    return chains[0] if len(chains) == 1 else pool_chains(chains)


def effective_sample_size(x):
    """Initial-positive-sequence ESS of a 1-D trace."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4 or np.var(x) == 0:
        return float(n)
    xc = x - x.mean()
    f = np.fft.rfft(xc, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (np.arange(n, 0, -1) * x.var())
    tau = -1.0
    for m in range(0, n - 1, 2):
        pair = acf[m] + acf[m + 1]
        if pair < 0:
            break
        tau += 2.0 * pair
    return float(n / max(tau, 1e-12))
