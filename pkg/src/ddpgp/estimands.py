"""Posterior functionals: marginal survival, the principal-stratum risk ratio
tau(u) under a Gaussian copula between the arms' death times, and pointwise
credible bands.

All inputs are log-scale internally; grids are passed and reported in days.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .bvn import conditional_survival_scores

log_ = logging.getLogger(__name__)

DEFAULT_RHOS = (0.2, 0.5, 0.8)
N_GRID = 34
LOG_GRID_MAX = 10.0
_SCORE_CLIP = 38.0


def default_log_grid(n=N_GRID, upper=LOG_GRID_MAX):
    """n equally spaced interior points of the log-time interval (0, upper)."""
    return upper * np.arange(1, n + 1) / (n + 1)


def default_grid(n=N_GRID, upper=LOG_GRID_MAX):
    return np.exp(default_log_grid(n, upper))


@dataclass
class Summary:
    point: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


@dataclass
class SurvivalCurve:
    t_grid: np.ndarray
    point: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    arm: int = None
    draws: np.ndarray = field(default=None, repr=False)

    def rows(self):
        return [
            {"t": float(t), "mean": float(m), "lo": float(a), "hi": float(b)}
            for t, m, a, b in zip(self.t_grid, self.point, self.lo, self.hi)
        ]


@dataclass
class EstimandCurve:
    u_grid: np.ndarray
    point: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    rho: float
    n_unstable: int = 0
    draws: np.ndarray = field(default=None, repr=False)

    def rows(self):
        return [
            {"u": float(u), "mean": float(m), "lo": float(a), "hi": float(b)}
            for u, m, a, b in zip(self.u_grid, self.point, self.lo, self.hi)
        ]


def summarize(draws, level=0.95):
    """Pointwise posterior mean and equal-tailed quantile band over axis 0.

    NaN entries (unstable draws) are ignored point by point.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.shape[0] < 2:
        raise ValueError("need at least two draws to summarize")
    a = (1.0 - level) / 2.0
    with np.errstate(invalid="ignore"), _quiet_nan():
        point = np.nanmean(draws, axis=0)
        lo, hi = np.nanquantile(draws, [a, 1.0 - a], axis=0)
    # guard against float round-off when the band collapses
    lo = np.minimum(lo, point)
    hi = np.maximum(hi, point)
    return Summary(point, lo, hi)


class _quiet_nan:
    def __enter__(self):
        import warnings

        self._w = warnings.catch_warnings()
        self._w.__enter__()
        warnings.simplefilter("ignore", RuntimeWarning)

    def __exit__(self, *exc):
        return self._w.__exit__(*exc)


def _draw_index(n, max_draws):
    if max_draws is None or max_draws >= n:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, max_draws).round().astype(int))


def _survival_at(loc2, w, sd2, log_t):
    """Mixture survival of log death at each (grid, x): (G, N)."""
    z = (log_t[:, None, None] - loc2[None, :, :]) / sd2
    return np.einsum("gkn,k->gn", special.ndtr(-z), w)


def marginal_survival(chain, ds, t_grid, x_rows=None, max_draws=None):
    """Posterior of S(t) = mean over covariate rows of P(death > t | x).

    Averages over all rows of the dataset unless ``x_rows`` restricts them.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    log_t = np.log(t_grid)
    idx = _draw_index(chain.n_draws, max_draws)
    sub = chain.subset(idx)
    loc = sub.locations()
    rows = np.arange(loc.shape[-1]) if x_rows is None else np.asarray(x_rows)
    out = np.empty((idx.size, t_grid.size))
    for s in range(idx.size):
        sd2 = np.sqrt(sub.sigma[s, 1, 1])
        out[s] = _survival_at(loc[s, :, 1][:, rows], sub.w[s], sd2, log_t).mean(axis=1)
    sm = summarize(out) if out.shape[0] > 1 else Summary(out[0], out[0], out[0])
    return SurvivalCurve(t_grid, sm.point, sm.lo, sm.hi, chain.arm, out)


def predict_profile(chain, ds, x_new, t_grid, max_draws=None):
    """Survival curve for a new covariate profile given on the raw scale."""
    x_new = np.atleast_1d(np.asarray(x_new, dtype=float))
    xs = ds.standardization.apply(x_new) if ds.standardization is not None else x_new
    design = np.concatenate([[1.0], xs])[None, :]
    idx = _draw_index(chain.n_draws, max_draws)
    sub = chain.subset(idx)
    loc = sub.predict_locations(design)
    log_t = np.log(np.asarray(t_grid, dtype=float))
    out = np.empty((idx.size, log_t.size))
    for s in range(idx.size):
        out[s] = _survival_at(loc[s, :, 1], sub.w[s], np.sqrt(sub.sigma[s, 1, 1]), log_t)[:, 0]
    sm = summarize(out) if out.shape[0] > 1 else Summary(out[0], out[0], out[0])
    return SurvivalCurve(np.asarray(t_grid, dtype=float), sm.point, sm.lo, sm.hi, chain.arm, out)


# --------------------------------------------------------------------------
# tau(u)


@dataclass
class ArmDraw:
    """One posterior draw of one arm, restricted to the covariate rows used."""

    w: np.ndarray  # (K,)
    loc: np.ndarray  # (K, 2, N)
    sigma: np.ndarray  # (2, 2)

    def pruned(self, floor):
        keep = self.w > floor
        if not keep.any():
            keep = self.w == self.w.max()
        return ArmDraw(self.w[keep], self.loc[keep], self.sigma)


def _scores_from_survival(surv):
    with np.errstate(divide="ignore"):
        return np.clip(-special.ndtri(np.clip(surv, 0.0, 1.0)), -_SCORE_CLIP, _SCORE_CLIP)


def stratum_progression_mass(num, other, log_u, rhos, n_nodes=64):
    """Per-u, per-rho  E_x P(Y_P^num < u, Y_D^num >= u, Y_D^other >= u).

    ``num`` supplies the progression sub-distribution and death density,
    ``other`` the death margin joined through the Gaussian copula.
    Returns an array (len(rhos), len(log_u)).
    """
    gl_t, gl_w = np.polynomial.legendre.leggauss(n_nodes)
    s11, s12, s22 = num.sigma[0, 0], num.sigma[0, 1], num.sigma[1, 1]
    sd2 = np.sqrt(s22)
    slope = s12 / s22
    sd1g2 = np.sqrt(s11 - s12 * s12 / s22)
    sd2_other = np.sqrt(other.sigma[1, 1])
    th1 = num.loc[:, 0, :]  # (K, N)
    th2 = num.loc[:, 1, :]
    w = num.w
    lo_x = th2.min(axis=0) - 8.0 * sd2  # (N,)
    hi_x = th2.max(axis=0) + 8.0 * sd2
    out = np.zeros((len(rhos), log_u.size))
    for g, s in enumerate(log_u):
        surv_other = special.ndtr((other.loc[:, 1, :] - s) / sd2_other).T @ other.w  # (N,)
        a_score = _scores_from_survival(surv_other)
        lo = np.maximum(lo_x, s)
        hi = np.maximum(hi_x, lo)
        half = 0.5 * (hi - lo)
        t = lo[None, :] + half[None, :] * (1.0 + gl_t[:, None])  # (m, N)
        z = (t[:, None, :] - th2[None]) / sd2  # (m, K, N)
        dens = np.exp(-0.5 * z * z) / (sd2 * np.sqrt(2 * np.pi))
        cond = special.ndtr((s - th1[None] - slope * sd2 * z) / sd1g2)
        gv = np.einsum("mkn,k->mn", dens * cond, w)
        surv_num = np.einsum("mkn,k->mn", special.ndtr(-z), w)
        b_score = _scores_from_survival(surv_num)
        for r, rho in enumerate(rhos):
            if rho == 0.0:
                cop = np.broadcast_to(surv_other, gv.shape)
            else:
                cop = conditional_survival_scores(a_score[None, :], b_score, rho)
            integral = half * (gl_w @ (gv * cop))  # (N,)
            out[r, g] = integral.mean()
    return out


def _arm_draws(chain, idx, rows):
    loc = chain.subset(idx).locations()[..., rows]
    return [ArmDraw(chain.w[i], loc[s], chain.sigma[i]) for s, i in enumerate(idx)]


def tau_draws(chain0, chain1, ds, u_grid, rhos, n_nodes=64, max_draws=None,
              weight_floor=1e-8, x_rows=None, unstable_floor=1e-12):
    """Per-draw tau(u) for each rho: array (len(rhos), S, len(u_grid)).

    Draw k of arm 0 is paired with draw k of arm 1. Grid points whose
    denominator falls below ``unstable_floor`` are NaN.
    """
    rhos = [float(r) for r in np.atleast_1d(rhos)]
    for r in rhos:
        if not -1.0 <= r <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
    n_pair = min(chain0.n_draws, chain1.n_draws)
    idx = _draw_index(n_pair, max_draws)
    n_rows = chain0.design.shape[0]
    rows = np.arange(n_rows) if x_rows is None else np.asarray(x_rows)
    log_u = np.log(np.asarray(u_grid, dtype=float))
    d0 = _arm_draws(chain0, idx, rows)
    d1 = _arm_draws(chain1, idx, rows)
    out = np.empty((len(rhos), idx.size, log_u.size))
    unstable = 0
    for s in range(idx.size):
        a0 = d0[s].pruned(weight_floor)
        a1 = d1[s].pruned(weight_floor)
        num = stratum_progression_mass(a1, a0, log_u, rhos, n_nodes)
        den = stratum_progression_mass(a0, a1, log_u, rhos, n_nodes)
        bad = den < unstable_floor
        unstable += int(bad.sum())
        with np.errstate(divide="ignore", invalid="ignore"):
            out[:, s] = np.where(bad, np.nan, num / np.where(bad, 1.0, den))
    if unstable:
        log_.info("%d (draw, grid point, rho) combinations had a vanishing denominator", unstable)
    return out, unstable


def tau_curves(chain0, chain1, ds, u_grid, rhos=DEFAULT_RHOS, **kw):
    """tau(u) posterior summaries for several copula correlations at once."""
    rhos = [float(r) for r in np.atleast_1d(rhos)]
    draws, _ = tau_draws(chain0, chain1, ds, u_grid, rhos, **kw)
    curves = {}
    for r, rho in enumerate(rhos):
        d = draws[r]
        n_bad = int(np.isnan(d).sum())
        sm = summarize(d) if d.shape[0] > 1 else Summary(d[0], d[0], d[0])
        curves[rho] = EstimandCurve(np.asarray(u_grid, dtype=float), sm.point, sm.lo, sm.hi, rho, n_bad, d)
    return curves


def tau_curve(chain0, chain1, ds, u_grid, rho, **kw):
    return tau_curves(chain0, chain1, ds, u_grid, [rho], **kw)[float(rho)]
