"""Comparators and fit statistics.

* a naive parametric model: one bivariate normal regression per arm with
  conjugate normal / inverse-Wishart priors, fitted with the same latent-time
  augmentation as the mixture model;
* the Kaplan-Meier product-limit estimator;
* LPML from conditional predictive ordinates.
"""
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special, stats

from .gibbs import PosteriorChain, SamplerError, augment, chain_seed, sample_inverse_wishart
from .model import ArmData, empirical_bayes_init, initial_augmentation, log_case_masses, log_weights


@dataclass
class NaiveState:
    beta_p: np.ndarray
    beta_d: np.ndarray
    s: np.ndarray
    y: np.ndarray

    @property
    def beta(self):
        return np.stack([self.beta_p, self.beta_d])


@dataclass(frozen=True)
class NaivePrior:
    tau2_p: float = 100.0
    tau2_d: float = 100.0
    nu: float = 4.0
    psi: np.ndarray = None


def _regression_draw(x, y, noise_var, prior_var, rng):
    p = x.shape[1]
    prec = x.T @ x / noise_var + np.eye(p) / prior_var
    chol = np.linalg.cholesky(prec)
    mean = np.linalg.solve(prec, x.T @ y / noise_var)
    return mean + np.linalg.solve(chol.T, rng.standard_normal(p))


def naive_sweep(state, arm, prior, rng):
    x = arm.design
    resid = state.y - np.column_stack([x @ state.beta_p, x @ state.beta_d])
    s = sample_inverse_wishart(prior.nu + arm.n, prior.psi + resid.T @ resid, rng)
    state.s = 0.5 * (s + s.T)
    s11, s12, s22 = state.s[0, 0], state.s[0, 1], state.s[1, 1]
    yt = state.y[:, 0] - s12 / s22 * (state.y[:, 1] - x @ state.beta_d)
    state.beta_p = _regression_draw(x, yt, s11 - s12 * s12 / s22, prior.tau2_p, rng)
    yt = state.y[:, 1] - s12 / s11 * (state.y[:, 0] - x @ state.beta_p)
    state.beta_d = _regression_draw(x, yt, s22 - s12 * s12 / s11, prior.tau2_d, rng)
    theta = (state.beta @ x.T)[None]  # (1, 2, n)
    _, state.y, _ = augment(theta, np.ones(1), state.s, arm, np.zeros(arm.n, dtype=int), state.y, rng)
    return state


def fit_naive(ds, arm, cfg, chain_index=0, prior=None):
    """Gibbs fit of the naive bivariate-normal regression for one arm."""
    arm_data = ArmData.from_dataset(ds, arm)
    eb = empirical_bayes_init(ds, arm, k_trunc=1)
    prior = prior or NaivePrior()
    if prior.psi is None:
        prior = NaivePrior(prior.tau2_p, prior.tau2_d, prior.nu, eb.psi)
    rng = chain_seed(cfg.seed, arm, chain_index, 1)
    state = NaiveState(eb.beta0[0].copy(), eb.beta0[1].copy(), prior.psi.copy(), initial_augmentation(arm_data))
    keep = {"beta": [], "s": []}
    for it in range(1, cfg.iterations + 1):
        try:
            naive_sweep(state, arm_data, prior, rng)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise SamplerError(str(exc), it) from exc
        if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            keep["beta"].append(state.beta.copy())
            keep["s"].append(state.s.copy())
    beta = np.array(keep["beta"])[:, None]  # (S, 1, 2, p)
    n_draws = beta.shape[0]
    theta = np.einsum("np,skjp->skjn", arm_data.design, beta)
    return PosteriorChain(
        arm=int(arm), kind="naive", w=np.ones((n_draws, 1)), sigma=np.array(keep["s"]),
        alpha=np.full(n_draws, np.nan), beta=beta, theta=theta, design=ds.design(),
        rows=arm_data.rows, epsilon=0.0,
        config={**asdict(cfg), "tau2_p": prior.tau2_p, "tau2_d": prior.tau2_d, "nu": prior.nu},
    )


# --------------------------------------------------------------------------
# Kaplan-Meier


@dataclass
class KmCurve:
    """Product-limit estimate at each distinct observed time."""

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    greenwood_var: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        pos = np.searchsorted(self.times, t, side="right")
        s = np.concatenate([[1.0], self.survival])
        return s[pos]

    def rows(self):
        return [
            {"time": float(a), "survival": float(b), "at_risk": int(c), "events": int(d),
             "lo": float(e), "hi": float(f)}
            for a, b, c, d, e, f in zip(self.times, self.survival, self.at_risk, self.events, self.lo, self.hi)
        ]


def kaplan_meier(times, events, level=0.95):
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=int)
    if times.size == 0:
        raise ValueError("kaplan_meier needs at least one observation")
    if np.any(times <= 0):
        raise ValueError("times must be positive")
    uniq = np.unique(times)
    d = np.array([np.sum((times == u) & (events == 1)) for u in uniq])
    n = np.array([np.sum(times >= u) for u in uniq])
    surv = np.cumprod(1.0 - d / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        gw = np.cumsum(np.where(n > d, d / (n * (n - d)), 0.0))
        var = surv**2 * gw
        z = stats.norm.ppf(0.5 + level / 2)
        log_s = np.log(surv)
        se = np.sqrt(gw) / np.abs(log_s)
        loglog = np.log(-log_s)
        lo = np.exp(-np.exp(loglog + z * se))
        hi = np.exp(-np.exp(loglog - z * se))
    degenerate = (surv <= 0) | (surv >= 1) | ~np.isfinite(se)
    lo = np.where(degenerate, surv, lo)
    hi = np.where(degenerate, surv, hi)
    return KmCurve(uniq, surv, n, d, var, lo, hi)


# --------------------------------------------------------------------------
# LPML


@dataclass
class LpmlResult:
    lpml: float
    log_cpo: np.ndarray
    scope: str
    arm: int

    def to_dict(self):
        return {
            "arm": self.arm, "scope": self.scope, "lpml": self.lpml,
            "n_nonfinite": int(np.sum(~np.isfinite(self.log_cpo))),
        }


def log_likelihood_matrix(chain, ds, scope="joint"):
    """log L_i for each draw (rows) and each subject of the chain's arm (columns)."""
    arm = ArmData.from_dataset(ds, chain.arm)
    out = np.empty((chain.n_draws, arm.n))
    for s in range(chain.n_draws):
        theta, w, sigma = chain.theta[s], chain.w[s], chain.sigma[s]
        lw = log_weights(w)[None, :]
        if scope == "joint":
            lm = log_case_masses(theta[:, 0, :].T, theta[:, 1, :].T, sigma, arm.t1, arm.t2, arm.delta, arm.xi)
        elif scope == "survival":
            sd2 = np.sqrt(sigma[1, 1])
            zz = (arm.t2[:, None] - theta[:, 1, :].T) / sd2
            lm = np.where(
                arm.xi[:, None] == 1,
                -0.5 * zz * zz - np.log(sd2 * np.sqrt(2 * np.pi)),
                special.log_ndtr(-zz),
            )
        else:
            raise ValueError("scope must be 'joint' or 'survival'")
        out[s] = special.logsumexp(lm + lw, axis=1)
    return out


def lpml(chain, ds, scope="joint"):
    """Sum over subjects of log CPO, CPO_i = 1 / mean_s(1 / L_i^s)."""
    if chain.n_draws < 1:
        raise ValueError("chain has no draws")
    ll = log_likelihood_matrix(chain, ds, scope)
    with np.errstate(over="ignore"):
        log_cpo = np.log(ll.shape[0]) - special.logsumexp(-ll, axis=0)
    log_cpo = np.where(np.any(~np.isfinite(ll) & (ll < 0), axis=0), -np.inf, log_cpo)
    return LpmlResult(float(np.sum(log_cpo)), log_cpo, scope, chain.arm)
