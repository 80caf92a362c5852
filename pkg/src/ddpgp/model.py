"""DDP-GP mixture for one treatment arm.

Per arm the joint law of (log progression, log death) given covariates x is a
stick-breaking mixture of bivariate normals with a shared covariance and
component locations theta_h(x) that follow GP priors with linear means.
The state keeps theta_h only at the arm's observed covariate rows.
"""
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special
from scipy.cluster.vq import kmeans2

from .bvn import log_bvn_pdf, log_quadrant_mass, log_ray_mass

DEFAULT_K = 20


@dataclass
class Hyperparameters:
    """Prior settings.

    beta0 : (2, p) prior means of the GP mean coefficients, one row per endpoint
    lambda0_cov : (2, p, p) prior covariances of those coefficients
    lambda0 : inverse-Wishart degrees of freedom for the kernel covariance
    psi : (2, 2) inverse-Wishart scale
    lambda1, lambda2 : Gamma shape / rate for the DP mass
    """

    beta0: np.ndarray
    lambda0_cov: np.ndarray
    lambda0: float = 4.0
    psi: np.ndarray = field(default_factory=lambda: np.eye(2))
    lambda1: float = 1.0
    lambda2: float = 1.0
    k_trunc: int = DEFAULT_K
    epsilon: float = 0.1

    def __post_init__(self):
        self.beta0 = np.atleast_2d(np.asarray(self.beta0, dtype=float))
        p = self.beta0.shape[1]
        cov = np.asarray(self.lambda0_cov, dtype=float)
        if cov.ndim == 0:
            cov = np.broadcast_to(np.eye(p) * cov, (2, p, p)).copy()
        elif cov.ndim == 2:
            cov = np.broadcast_to(cov, (2, p, p)).copy()
        self.lambda0_cov = cov
        self.psi = np.asarray(self.psi, dtype=float)
        if self.lambda0 <= 3:
            raise ValueError("lambda0 must exceed 3 for a finite prior mean of Sigma")
        if np.any(np.linalg.eigvalsh(self.psi) <= 0):
            raise ValueError("psi must be positive definite")
        if int(self.k_trunc) < 1:
            raise ValueError("k_trunc must be positive")
        self.k_trunc = int(self.k_trunc)

    @property
    def p(self):
        return self.beta0.shape[1]

    def to_dict(self):
        return {
            "beta0_1": self.beta0[0].tolist(),
            "beta0_2": self.beta0[1].tolist(),
            "lambda0_cov_1": self.lambda0_cov[0].ravel().tolist(),
            "lambda0_cov_2": self.lambda0_cov[1].ravel().tolist(),
            "lambda0": self.lambda0,
            "psi": [self.psi[0, 0], self.psi[0, 1], self.psi[1, 1]],
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "k_trunc": self.k_trunc,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, d):
        b = np.array([d["beta0_1"], d["beta0_2"]], dtype=float)
        p = b.shape[1]
        cov = np.array([np.reshape(d["lambda0_cov_1"], (p, p)), np.reshape(d["lambda0_cov_2"], (p, p))])
        s11, s12, s22 = d["psi"]
        return cls(
            beta0=b, lambda0_cov=cov, lambda0=float(d["lambda0"]),
            psi=np.array([[s11, s12], [s12, s22]]), lambda1=float(d["lambda1"]),
            lambda2=float(d["lambda2"]), k_trunc=int(d["k_trunc"]), epsilon=float(d["epsilon"]),
        )


def write_hyperparameters(hp, path):
    with open(path, "w") as fh:
        for key, val in hp.to_dict().items():
            if isinstance(val, list):
                val = ", ".join(repr(float(v)) for v in val)
            fh.write(f"{key} = {val}\n")
    return path


def read_hyperparameters(path):
    raw = read_flat_config(path)
    d = {}
    for key, val in raw.items():
        if key.startswith(("beta0", "lambda0_cov", "psi")):
            d[key] = [float(v) for v in val.split(",")]
        else:
            d[key] = val
    return Hyperparameters.from_dict(d)


def read_flat_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


@dataclass(frozen=True)
class ArmData:
    """The slice of a dataset belonging to one arm, ready for fitting."""

    rows: np.ndarray
    design: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    delta: np.ndarray
    xi: np.ndarray

    @property
    def n(self):
        return self.rows.size

    @classmethod
    def from_dataset(cls, ds, arm, jitter=1e-6):
        rows = ds.arm(arm)
        if rows.size == 0:
            raise ValueError(f"arm {arm} has no subjects")
        t1, t2 = ds.fitting_times(jitter)
        return cls(rows, ds.design()[rows], t1[rows], t2[rows], ds.delta[rows].copy(), ds.xi[rows].copy())

    def case_masks(self):
        d, x = self.delta, self.xi
        return (d == 1) & (x == 1), (d == 1) & (x == 0), (d == 0) & (x == 1), (d == 0) & (x == 0)


@dataclass(frozen=True)
class MixtureComponent:
    v: float
    w: float
    theta_star: np.ndarray
    beta: np.ndarray


@dataclass
class ModelState:
    """Mutable chain state for one arm.

    v, w : (K,) stick fractions and weights (v[K-1] is 1 by construction)
    theta : (K, 2, n) component locations at the observed rows
    beta : (K, 2, p) GP mean coefficients
    sigma : (2, 2) kernel covariance
    alpha : DP mass
    gamma : (n,) memberships in 0..K-1
    y : (n, 2) augmented (log progression, log death)
    """

    v: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    alpha: float
    gamma: np.ndarray
    y: np.ndarray

    @property
    def k(self):
        return self.w.size

    @property
    def components(self):
        return [
            MixtureComponent(float(self.v[h]), float(self.w[h]), self.theta[h], self.beta[h])
            for h in range(self.k)
        ]

    def counts(self):
        return np.bincount(self.gamma, minlength=self.k)

    def copy(self):
        return replace(
            self, v=self.v.copy(), w=self.w.copy(), theta=self.theta.copy(), beta=self.beta.copy(),
            sigma=self.sigma.copy(), gamma=self.gamma.copy(), y=self.y.copy(),
        )


def stick_weights(v):
    """w_h = v_h prod_{l<h}(1 - v_l); the last weight takes the remaining stick."""
    v = np.asarray(v, dtype=float)
    rest = np.concatenate([[1.0], np.cumprod(1.0 - v[:-1])])
    w = v * rest
    w[-1] = rest[-1]
    return w


def empirical_bayes_init(ds, arm, k_trunc=DEFAULT_K, epsilon=0.1, lambda0_diag=10.0):
    """Hyperparameters from a complete-case bivariate regression within ``arm``.

    The GP mean coefficients are centred at the least-squares fit of (t1, t2)
    on the design among subjects with both events observed; Psi is the
    residual covariance so that, with 4 degrees of freedom, the prior mean of
    Sigma equals it.
    """
    rows = ds.arm(arm)
    full = rows[(ds.delta[rows] == 1) & (ds.xi[rows] == 1)]
    x = ds.design()[full]
    p = x.shape[1]
    if full.size < p + 1:
        raise ValueError(
            f"arm {arm}: {full.size} complete cases, need at least {p + 1} for empirical Bayes; "
            "supply hyperparameters explicitly"
        )
    t1, t2 = ds.fitting_times()
    y = np.column_stack([t1[full], t2[full]])
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    dof = max(full.size - p, 1)
    psi = resid.T @ resid / dof
    if np.any(np.linalg.eigvalsh(psi) <= 1e-10):
        psi = psi + 1e-6 * np.eye(2)
    return Hyperparameters(
        beta0=coef.T, lambda0_cov=np.eye(p) * lambda0_diag, lambda0=4.0, psi=psi,
        lambda1=1.0, lambda2=1.0, k_trunc=k_trunc, epsilon=epsilon,
    )


def initial_augmentation(arm_data, margin=0.5):
    """Start values for (Y_P, Y_D) inside each subject's censoring region."""
    t1, t2 = arm_data.t1, arm_data.t2
    full, prog_cens, death_only, both_cens = arm_data.case_masks()
    y = np.column_stack([t1, t2]).astype(float)
    y[prog_cens, 1] = t2[prog_cens] + margin
    y[death_only, 0] = t1[death_only] + margin
    y[both_cens] = (t2[both_cens] + margin)[:, None]
    return y


def initial_state(arm_data, hp, rng):
    """k-means memberships on (t1, t2), locations at the prior regression mean."""
    k = hp.k_trunc
    n = arm_data.n
    pts = np.column_stack([arm_data.t1, arm_data.t2])
    n_clusters = min(5, k, n)
    if n_clusters > 1:
        _, labels = kmeans2(pts, n_clusters, minit="++", seed=rng)
    else:
        labels = np.zeros(n, dtype=int)
    mean = hp.beta0 @ arm_data.design.T  # (2, n)
    theta = np.broadcast_to(mean, (k, 2, n)).copy()
    beta = np.broadcast_to(hp.beta0, (k, 2, hp.p)).copy()
    v = np.full(k, 0.5)
    v[-1] = 1.0
    return ModelState(
        v=v, w=stick_weights(v), theta=theta, beta=beta, sigma=hp.psi.copy(), alpha=1.0,
        gamma=labels.astype(int), y=initial_augmentation(arm_data),
    )


# --------------------------------------------------------------------------
# functionals of a state at a given subject


def _cond_params(sigma):
    s11, s12, s22 = sigma[0, 0], sigma[0, 1], sigma[1, 1]
    return s11, s12, s22, s11 - s12 * s12 / s22, s22 - s12 * s12 / s11


def log_case_masses(mu1, mu2, sigma, t1, t2, delta, xi):
    """Log of each component's contribution to the observed-data likelihood.

    ``mu1``, ``mu2`` are (m, K) component locations for m subjects; returns
    (m, K) unweighted log masses picking the factor matching (delta, xi).
    """
    s11, s12, s22, v1g2, v2g1 = _cond_params(sigma)
    t1c = np.asarray(t1, dtype=float)[:, None]
    t2c = np.asarray(t2, dtype=float)[:, None]
    delta = np.asarray(delta)
    xi = np.asarray(xi)
    out = np.empty(np.shape(mu1))
    full = (delta == 1) & (xi == 1)
    prog_cens = (delta == 1) & (xi == 0)
    death_only = (delta == 0) & (xi == 1)
    both_cens = (delta == 0) & (xi == 0)
    if full.any():
        out[full] = log_bvn_pdf(t1c[full], t2c[full], mu1[full], mu2[full], sigma)
    if prog_cens.any():
        m1, m2, y1, c = mu1[prog_cens], mu2[prog_cens], t1c[prog_cens], t2c[prog_cens]
        cm = m2 + s12 / s11 * (y1 - m1)
        out[prog_cens] = log_ray_mass(y1, m1, s11, cm, np.sqrt(v2g1), c)
    if death_only.any():
        m1, m2, y2, c = mu1[death_only], mu2[death_only], t2c[death_only], t1c[death_only]
        cm = m1 + s12 / s22 * (y2 - m2)
        out[death_only] = log_ray_mass(y2, m2, s22, cm, np.sqrt(v1g2), c)
    if both_cens.any():
        m1, m2 = mu1[both_cens], mu2[both_cens]
        c = np.broadcast_to(t2c[both_cens], m1.shape)
        out[both_cens] = log_quadrant_mass(m1, m2, sigma, c)
    return out


def log_weights(w):
    with np.errstate(divide="ignore"):
        return np.log(w)


def mixture_density(state, x_index, yp, yd):
    """Mixture density of (log progression, log death) for subject ``x_index``."""
    mu = state.theta[:, :, x_index]
    yp = np.asarray(yp, dtype=float)
    yd = np.asarray(yd, dtype=float)
    lp = log_bvn_pdf(yp[..., None], yd[..., None], mu[:, 0], mu[:, 1], state.sigma)
    out = np.exp(lp) @ state.w
    return out if np.ndim(out) else float(out)


def death_marginal_cdf(state, x_index, t):
    mu2 = state.theta[:, 1, x_index]
    sd2 = np.sqrt(state.sigma[1, 1])
    t = np.asarray(t, dtype=float)
    out = special.ndtr((t[..., None] - mu2) / sd2) @ state.w
    return out if np.ndim(out) else float(out)


def progression_conditional_cdf(state, x_index, s, t):
    """P(Y_P <= s | Y_D = t) for s <= t under the mixture at subject ``x_index``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s > t):
        raise ValueError("progression_conditional_cdf requires s <= t")
    mu1 = state.theta[:, 0, x_index]
    mu2 = state.theta[:, 1, x_index]
    s11, s12, s22, v1g2, _ = _cond_params(state.sigma)
    tt = t[..., None]
    lw = log_weights(state.w) - 0.5 * (tt - mu2) ** 2 / s22
    lw = lw - special.logsumexp(lw, axis=-1, keepdims=True)
    cm = mu1 + s12 / s22 * (tt - mu2)
    out = np.sum(np.exp(lw) * special.ndtr((s[..., None] - cm) / np.sqrt(v1g2)), axis=-1)
    return out if np.ndim(out) else float(out)


def observed_likelihood(state, record, x_index):
    """Likelihood contribution of one observed record under the mixture."""
    mu = state.theta[:, :, x_index]
    lm = log_case_masses(
        mu[None, :, 0], mu[None, :, 1], state.sigma,
        np.array([record.t1]), np.array([record.t2]), np.array([record.delta]), np.array([record.xi]),
    )[0]
    return float(np.exp(special.logsumexp(lm + log_weights(state.w))))
