"""Scalar and bivariate Gaussian primitives.

Densities, orthant probabilities, half-line slices of the bivariate normal,
truncated samplers and the Gaussian copula. Everything that touches the
likelihood, the data augmentation step or the causal estimand goes through
this module.

The bivariate CDF follows the Drezner-Wesolowsky / Genz single-integral
reduction evaluated with a fixed 20-point Gauss-Legendre rule.
"""
from dataclasses import dataclass
from math import log, pi, sqrt

import numpy as np
from scipy import special

__all__ = [
    "Bvn",
    "CopulaSpec",
    "std_normal_cdf",
    "std_normal_quantile",
    "bvn_cdf",
    "bvn_upper",
    "quadrant_upper_prob",
    "halfplane_slice",
    "slice_ge",
    "sample_truncated_normal",
    "sample_bvn_region",
    "sample_quadrant",
    "copula_joint_survival",
    "copula_conditional_survival",
    "NegligibleMassError",
]

_GL_T, _GL_W = np.polynomial.legendre.leggauss(20)
# nodes mapped to (0, 2) as in Genz's bvnu
_GL_X = 1.0 + _GL_T
_TWO_PI = 2.0 * pi
_LOG_MIN_MASS = log(1e-300)
_TAIL_CUT = 5.0


class NegligibleMassError(ValueError):
    """Raised when a truncation region carries (numerically) no mass."""


@dataclass(frozen=True)
class Bvn:
    """Bivariate normal with mean ``mu`` and covariance ``sigma``."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(2)
        sigma = np.asarray(self.sigma, dtype=float).reshape(2, 2)
        if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12):
            raise ValueError("sigma must be symmetric")
        if sigma[0, 0] <= 0 or sigma[1, 1] <= 0 or np.linalg.det(sigma) <= 0:
            raise ValueError("sigma must be positive definite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def sd(self):
        return np.sqrt(np.diag(self.sigma))

    @property
    def corr(self):
        s1, s2 = self.sd
        return self.sigma[0, 1] / (s1 * s2)

    def cond_2_given_1(self, y1):
        """Mean and sd of the second coordinate given the first equals ``y1``."""
        s11, s12, s22 = self.sigma[0, 0], self.sigma[0, 1], self.sigma[1, 1]
        mean = self.mu[1] + s12 / s11 * (np.asarray(y1, dtype=float) - self.mu[0])
        return mean, sqrt(s22 - s12 * s12 / s11)

    def cond_1_given_2(self, y2):
        s11, s12, s22 = self.sigma[0, 0], self.sigma[0, 1], self.sigma[1, 1]
        mean = self.mu[0] + s12 / s22 * (np.asarray(y2, dtype=float) - self.mu[1])
        return mean, sqrt(s11 - s12 * s12 / s22)

    def pdf(self, y1, y2):
        return np.exp(log_bvn_pdf(y1, y2, self.mu[0], self.mu[1], self.sigma))


@dataclass(frozen=True)
class CopulaSpec:
    rho: float

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("copula correlation must lie in [-1, 1]")


def std_normal_cdf(x):
    return special.ndtr(x)


def std_normal_quantile(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)) or np.any(np.isnan(p)):
        raise ValueError("quantile argument must lie strictly inside (0, 1)")
    out = special.ndtri(p)
    return out if out.ndim else float(out)


def log_norm_pdf(x, mean, var):
    return -0.5 * (np.log(2 * pi * var) + (x - mean) ** 2 / var)


def log_bvn_pdf(y1, y2, mu1, mu2, sigma):
    """Log density of a bivariate normal with a shared 2x2 covariance."""
    s11, s12, s22 = sigma[0, 0], sigma[0, 1], sigma[1, 1]
    det = s11 * s22 - s12 * s12
    d1 = y1 - mu1
    d2 = y2 - mu2
    q = (s22 * d1 * d1 - 2 * s12 * d1 * d2 + s11 * d2 * d2) / det
    return -0.5 * q - np.log(_TWO_PI) - 0.5 * np.log(det)


def _bvnu_finite(h, k, r):
    """Genz's BVNU for finite 1-D arrays: P(X > h, Y > k) with corr ``r``."""
    out = np.zeros(h.shape)
    hk = h * k
    low = np.abs(r) < 0.925
    if low.any():
        hh, kk, rr = h[low], k[low], r[low]
        hs = 0.5 * (hh * hh + kk * kk)
        asr = 0.5 * np.arcsin(rr)
        sn = np.sin(asr[:, None] * _GL_X)
        val = np.exp((sn * hk[low][:, None] - hs[:, None]) / (1.0 - sn * sn)) @ _GL_W
        out[low] = val * asr / _TWO_PI + special.ndtr(-hh) * special.ndtr(-kk)
    high = ~low
    if high.any():
        hh, kk, rr = h[high], k[high], r[high]
        neg = rr < 0
        kk = np.where(neg, -kk, kk)
        hkk = hh * kk
        part = np.zeros(hh.shape)
        lt1 = np.abs(rr) < 1
        if lt1.any():
            h1, k1, r1, hk1 = hh[lt1], kk[lt1], rr[lt1], hkk[lt1]
            as_ = 1.0 - r1 * r1
            a = np.sqrt(as_)
            bs = (h1 - k1) ** 2
            asr = -0.5 * (bs / as_ + hk1)
            c = (4.0 - hk1) / 8.0
            d = (12.0 - hk1) / 80.0
            with np.errstate(over="ignore", under="ignore"):
                bvn = np.where(
                    asr > -100,
                    a * np.exp(asr) * (1 - c * (bs - as_) * (1 - d * bs) / 3 + c * d * as_ * as_),
                    0.0,
                )
                b = np.sqrt(bs)
                sp = sqrt(_TWO_PI) * special.ndtr(-b / a)
                bvn = bvn - np.where(
                    hk1 > -100,
                    np.exp(-0.5 * np.minimum(hk1, 200.0)) * sp * b * (1 - c * bs * (1 - d * bs) / 3),
                    0.0,
                )
                a2 = 0.5 * a
                xs = (a2[:, None] * _GL_X) ** 2
                asr2 = -0.5 * (bs[:, None] / xs + hk1[:, None])
                ok = asr2 > -100
                sp2 = 1 + c[:, None] * xs * (1 + 5 * d[:, None] * xs)
                rs = np.sqrt(1 - xs)
                ep = np.exp(-(hk1[:, None] / 2) * xs / (1 + rs) ** 2) / rs
                term = np.where(ok, np.exp(np.where(ok, asr2, 0.0)) * (sp2 - ep), 0.0) @ _GL_W
            part[lt1] = (a2 * term - bvn) / _TWO_PI
        res = np.empty(hh.shape)
        pos = ~neg
        res[pos] = part[pos] + special.ndtr(-np.maximum(hh[pos], kk[pos]))
        hn, kn, pn = hh[neg], kk[neg], part[neg]
        lower = np.where(
            hn < 0,
            special.ndtr(kn) - special.ndtr(hn),
            special.ndtr(-hn) - special.ndtr(-kn),
        )
        res[neg] = np.where(hn >= kn, -pn, lower - pn)
        out[high] = res
    return np.clip(out, 0.0, 1.0)


def bvn_upper(h, k, rho):
    """P(X > h, Y > k) for a standard bivariate normal with correlation ``rho``.

    Broadcasts over its arguments. Infinite limits are handled exactly and
    ``|rho| = 1`` reduces to the comonotone / countermonotone case.
    """
    h, k, r = np.broadcast_arrays(
        np.asarray(h, dtype=float), np.asarray(k, dtype=float), np.asarray(rho, dtype=float)
    )
    shape = h.shape
    h, k, r = h.ravel(), k.ravel(), np.clip(r.ravel(), -1.0, 1.0)
    out = np.empty(h.shape)
    pinf = (h == np.inf) | (k == np.inf)
    hninf = (h == -np.inf) & ~pinf
    kninf = (k == -np.inf) & ~pinf & ~hninf
    out[pinf] = 0.0
    out[hninf] = special.ndtr(-k[hninf])
    out[kninf] = special.ndtr(-h[kninf])
    fin = ~(pinf | hninf | kninf)
    if fin.any():
        out[fin] = _bvnu_finite(h[fin], k[fin], r[fin])
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def bvn_cdf(a, b, rho):
    """Lower-orthant probability P(X <= a, Y <= b) of a standard bivariate normal."""
    return bvn_upper(-np.asarray(a, dtype=float), -np.asarray(b, dtype=float), rho)


def _standardize_quadrant(mu1, mu2, sigma, c):
    s1 = sqrt(sigma[0, 0])
    s2 = sqrt(sigma[1, 1])
    r = sigma[0, 1] / (s1 * s2)
    return (c - mu1) / s1, (c - mu2) / s2, r


def quadrant_upper_prob(bvn, c):
    """P(S > c, T > c) under ``bvn``."""
    h, k, r = _standardize_quadrant(bvn.mu[0], bvn.mu[1], bvn.sigma, np.asarray(c, dtype=float))
    return bvn_upper(h, k, r)


def halfplane_slice(bvn, y1, c):
    """Integral over t > c of the joint density at (y1, t)."""
    y1 = np.asarray(y1, dtype=float)
    mean, sd = bvn.cond_2_given_1(y1)
    out = np.exp(log_norm_pdf(y1, bvn.mu[0], bvn.sigma[0, 0])) * special.ndtr((mean - c) / sd)
    return out if np.ndim(out) else float(out)


def slice_ge(bvn, t, c):
    """Integral over s > c of the joint density at (s, t)."""
    t = np.asarray(t, dtype=float)
    mean, sd = bvn.cond_1_given_2(t)
    out = np.exp(log_norm_pdf(t, bvn.mu[1], bvn.sigma[1, 1])) * special.ndtr((mean - c) / sd)
    return out if np.ndim(out) else float(out)


def log_quadrant_mass(mu1, mu2, sigma, c):
    """Vectorized log P(S > c, T > c); ``-inf`` where the mass underflows."""
    h, k, r = _standardize_quadrant(mu1, mu2, sigma, c)
    with np.errstate(divide="ignore"):
        return np.log(bvn_upper(h, k, r))


def log_ray_mass(y_fixed, mu_fixed, var_fixed, cond_mean, cond_sd, c):
    """Vectorized log of  phi(y_fixed) * P(free coordinate > c | fixed coordinate)."""
    return log_norm_pdf(y_fixed, mu_fixed, var_fixed) + special.log_ndtr((cond_mean - c) / cond_sd)


# --------------------------------------------------------------------------
# samplers


def _leans_low(a, b):
    """True where (a, b) sits mostly below zero; (-inf, inf) counts as centred."""
    with np.errstate(invalid="ignore"):
        return (a + b) < 0


def _log_interval_mass(a, b):
    """log(Phi(b) - Phi(a)) computed on the side with better precision."""
    flip = _leans_low(a, b)
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    la = special.log_ndtr(-lo)
    lb = special.log_ndtr(-hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        return la + np.log1p(-np.exp(lb - la))


def _std_truncnorm(a, b, rng):
    """Standard normal restricted to (a, b); arrays of equal shape."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a < b)):
        raise ValueError("truncation interval requires lo < hi")
    logm = _log_interval_mass(a, b)
    if np.any(~(logm >= _LOG_MIN_MASS)):
        raise NegligibleMassError("truncation interval has mass below 1e-300")
    # reflect so the interval leans to the upper side
    flip = _leans_low(a, b)
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    z = np.empty(a.shape)
    tail = lo > _TAIL_CUT
    body = ~tail
    if body.any():
        u = rng.random(int(body.sum()))
        pa = special.ndtr(-lo[body])
        pb = special.ndtr(-hi[body])
        q = pa - u * (pa - pb)
        zb = -special.ndtri(q)
        z[body] = np.clip(zb, lo[body], hi[body])
    if tail.any():
        z[tail] = _exp_tail(lo[tail], hi[tail], rng)
    return np.where(flip, -z, z)


def _exp_tail(a, b, rng):
    """Exponential-proposal rejection for (a, b) with a > 5; truncated proposal keeps b exact."""
    lam = 0.5 * (a + np.sqrt(a * a + 4.0))
    width = b - a
    with np.errstate(over="ignore"):
        top = -np.expm1(-lam * width)
    out = np.empty(a.shape)
    pending = np.arange(a.size)
    while pending.size:
        u = rng.random(pending.size)
        e = -np.log1p(-u * top[pending]) / lam[pending]
        z = a[pending] + e
        v = rng.random(pending.size)
        acc = np.log(v) <= -0.5 * (z - lam[pending]) ** 2
        out[pending[acc]] = z[acc]
        pending = pending[~acc]
    return out


def sample_truncated_normal(mu, sd, lo, hi, rng):
    """Draw from N(mu, sd^2) restricted to (lo, hi).

    Inverse-CDF in the body of the distribution, exponential-proposal rejection
    when the interval sits beyond five standard deviations. Arguments broadcast;
    a scalar call returns a float.
    """
    mu, sd, lo, hi = np.broadcast_arrays(
        np.asarray(mu, dtype=float), np.asarray(sd, dtype=float),
        np.asarray(lo, dtype=float), np.asarray(hi, dtype=float),
    )
    if np.any(sd <= 0):
        raise ValueError("sd must be positive")
    z = _std_truncnorm(((lo - mu) / sd).ravel(), ((hi - mu) / sd).ravel(), rng)
    out = (mu.ravel() + sd.ravel() * z).reshape(mu.shape)
    out = np.clip(out, lo, hi)
    return out if out.ndim else float(out)


def _quadrant_inverse(mu, sigma, c, rng):
    """Exact draw on {s > c, t > c}: invert the s-marginal, then t | s."""
    s1 = sqrt(sigma[0, 0])
    s2 = sqrt(sigma[1, 1])
    r = sigma[0, 1] / (s1 * s2)
    k = (c - mu[:, 1]) / s2
    total = bvn_upper((c - mu[:, 0]) / s1, k, r)
    target = rng.random(c.size) * total
    lo = c.copy()
    hi = np.maximum(c, mu[:, 0]) + 40.0 * s1
    for _ in range(55):
        mid = 0.5 * (lo + hi)
        q = bvn_upper((mid - mu[:, 0]) / s1, k, r)
        above = q > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    s = 0.5 * (lo + hi)
    s = np.where(s > c, s, np.nextafter(c, np.inf))
    cm = mu[:, 1] + sigma[0, 1] / sigma[0, 0] * (s - mu[:, 0])
    csd = sqrt(sigma[1, 1] - sigma[0, 1] ** 2 / sigma[0, 0])
    t = cm + csd * _std_truncnorm((c - cm) / csd, np.full(c.shape, np.inf), rng)
    t = np.where(t > c, t, np.nextafter(c, np.inf))
    return np.column_stack([s, t])


def sample_quadrant(mu, sigma, c, rng, log_mass=None, accept_floor=0.01):
    """Vectorized draws from N(mu_i, sigma) restricted to {s > c_i, t > c_i}.

    Rows whose region mass is at least ``accept_floor`` use plain rejection from
    the untruncated normal; the rest use the exact marginal-inversion sampler.
    """
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    c = np.broadcast_to(np.asarray(c, dtype=float), (mu.shape[0],)).copy()
    if log_mass is None:
        log_mass = log_quadrant_mass(mu[:, 0], mu[:, 1], sigma, c)
    if np.any(~(log_mass >= _LOG_MIN_MASS)):
        raise NegligibleMassError("quadrant has mass below 1e-300")
    out = np.empty(mu.shape)
    easy = log_mass >= log(accept_floor)
    if easy.any():
        chol = np.linalg.cholesky(sigma)
        idx = np.flatnonzero(easy)
        while idx.size:
            z = rng.standard_normal((idx.size, 2)) @ chol.T + mu[idx]
            ok = (z[:, 0] > c[idx]) & (z[:, 1] > c[idx])
            out[idx[ok]] = z[ok]
            idx = idx[~ok]
    hard = ~easy
    if hard.any():
        out[hard] = _quadrant_inverse(mu[hard], sigma, c[hard], rng)
    return out


def sample_bvn_region(bvn, region, rng):
    """One draw from ``bvn`` restricted to a region.

    ``region`` is one of ``("quadrant", c)``, ``("ray_t", s, c)`` (s fixed,
    t > c) or ``("ray_s", t, c)`` (t fixed, s > c).
    """
    kind = region[0]
    if kind == "quadrant":
        c = float(region[1])
        if c == -np.inf:
            return rng.multivariate_normal(bvn.mu, bvn.sigma, method="cholesky")
        return sample_quadrant(bvn.mu[None, :], bvn.sigma, np.array([c]), rng)[0]
    if kind == "ray_t":
        s, c = float(region[1]), float(region[2])
        mean, sd = bvn.cond_2_given_1(s)
        return np.array([s, sample_truncated_normal(mean, sd, c, np.inf, rng)])
    if kind == "ray_s":
        t, c = float(region[1]), float(region[2])
        mean, sd = bvn.cond_1_given_2(t)
        return np.array([sample_truncated_normal(mean, sd, c, np.inf, rng), t])
    raise ValueError(f"unknown region {kind!r}")


# --------------------------------------------------------------------------
# Gaussian copula


def copula_joint_survival(u0, u1, rho):
    """P(V > v, W > w) given the marginal CDF values u0 = G0(v), u1 = G1(w)."""
    u0 = np.asarray(u0, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    rho = float(rho)
    if rho >= 1.0:
        out = 1.0 - np.maximum(u0, u1)
    elif rho <= -1.0:
        out = np.maximum(1.0 - u0 - u1, 0.0)
    else:
        # upper orthant of the normal scores, P(X > a, Y > b)
        out = bvn_upper(special.ndtri(u0), special.ndtri(u1), rho)
    out = np.clip(out, 0.0, 1.0)
    return out if np.ndim(out) else float(out)


def conditional_survival_scores(a_target, a_given, rho):
    """P(X > a_target | Y = a_given) for standard normal scores with corr ``rho``."""
    a_target = np.asarray(a_target, dtype=float)
    a_given = np.asarray(a_given, dtype=float)
    if rho >= 1.0:
        return np.where(a_given > a_target, 1.0, np.where(a_given < a_target, 0.0, 0.5))
    if rho <= -1.0:
        return np.where(-a_given > a_target, 1.0, np.where(-a_given < a_target, 0.0, 0.5))
    return special.ndtr((rho * a_given - a_target) / sqrt(1.0 - rho * rho))


def copula_conditional_survival(u_target, u_given, rho):
    """P(target score > Phi^-1(u_target) | other score = Phi^-1(u_given))."""
    out = conditional_survival_scores(special.ndtri(u_target), special.ndtri(u_given), float(rho))
    return out if np.ndim(out) else float(out)
