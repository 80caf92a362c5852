"""Simulation scenarios, ground-truth curves and the repetition harness.

Three scenarios share the covariate law and mean structure

    Y_P^z = 1.5 z + 0.6 X1 + 2 X2 + eps
    Y_D^z = 4 z + 0.3 X1 + X2 (+ 0.5 sqrt(X1) in scenario 3) + nu

with X1 ~ N(4.5, 1) truncated to (2, 7.5), X2 ~ Bern(0.4), Z ~ Bern(0.5) and
log C ~ U(8, 10). (eps, nu) has mean (0, 1.5), unit variances and
correlation 0.75: bivariate normal in scenarios 1 and 3, a scaled bivariate
t with 3 degrees of freedom in scenario 2. The two arms' death errors are
joined by a Gaussian copula with correlation ``rho_true``.

Ground truth (marginal survival and tau) is computed by deterministic
quadrature over the covariate law rather than by Monte Carlo.
"""
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import special, stats

from .bvn import bvn_upper, conditional_survival_scores
from .data import PotentialRecord, coarsen_arrays, make_dataset

log_ = logging.getLogger(__name__)

SCENARIOS = (1, 2, 3)
ERR_CORR = 0.75
DEATH_SHIFT = 1.5
T_DF = 3
_COND_VAR = 1.0 - ERR_CORR**2
# tau is scored only where the principal stratum and both progression masses are non-negligible
TAU_STRATUM_FLOOR = 0.05
TAU_MASS_FLOOR = 1e-3


@dataclass(frozen=True)
class ScenarioSpec:
    id: int
    n: int = 500
    rho_true: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.id not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}, got {self.id}")
        if self.n < 10:
            raise ValueError("n must be at least 10")
        if not -1.0 < self.rho_true < 1.0:
            raise ValueError("rho_true must lie in (-1, 1)")


# --------------------------------------------------------------------------
# model pieces


def death_mean(scenario, z, x1, x2):
    """Death mean excluding the error's own mean of 1.5."""
    m = 4.0 * z + 0.3 * x1 + x2
    if scenario == 3:
        m = m + 0.5 * np.sqrt(x1)
    return m


def progression_mean(z, x1, x2):
    return 1.5 * z + 0.6 * x1 + 2.0 * x2


class _ErrorLaw:
    """Centered death error e = nu - 1.5 and eps | e for one scenario."""

    def __init__(self, scenario):
        self.heavy = scenario == 2
        self._scale = np.sqrt((T_DF - 2.0) / T_DF)

    def sf(self, e):
        if self.heavy:
            return stats.t.sf(np.asarray(e) / self._scale, T_DF)
        return special.ndtr(-np.asarray(e))

    def isf(self, q):
        if self.heavy:
            return self._scale * stats.t.isf(q, T_DF)
        return -special.ndtri(q)

    def from_normal_score(self, g):
        """Error with normal score g, precise in both tails."""
        q = special.ndtr(-np.abs(g))
        return np.sign(g) * self.isf(q)

    def eps_given_e(self, e):
        """(location, scale, df) of eps | e; df None for normal."""
        loc = ERR_CORR * e
        if self.heavy:
            # conditional of a bivariate t: df + 1, scale inflated by the Mahalanobis term
            d2 = e * e / self._scale**2
            scale = np.sqrt((T_DF + d2) / (T_DF + 1.0) * _COND_VAR * self._scale**2)
            return loc, scale, T_DF + 1.0
        return loc, np.full(np.shape(e), np.sqrt(_COND_VAR)), None

    def eps_cdf_given_e(self, bound, e):
        loc, scale, df = self.eps_given_e(e)
        zz = (bound - loc) / scale
        return stats.t.cdf(zz, df) if df else special.ndtr(zz)

    def sample_eps(self, e, rng):
        loc, scale, df = self.eps_given_e(e)
        noise = rng.standard_t(df, e.shape) if df else rng.standard_normal(e.shape)
        return loc + scale * noise


def sample_covariates(n, rng):
    a, b = (2.0 - 4.5), (7.5 - 4.5)
    x1 = stats.truncnorm.rvs(a, b, loc=4.5, scale=1.0, size=n, random_state=rng)
    x2 = (rng.random(n) < 0.4).astype(float)
    return x1, x2


@dataclass
class PotentialOutcomes:
    """Latent potential outcomes for every subject (log scale)."""

    yp0: np.ndarray
    yp1: np.ndarray
    yd0: np.ndarray
    yd1: np.ndarray
    c0: np.ndarray
    c1: np.ndarray

    def records(self):
        return [PotentialRecord(*map(float, r)) for r in zip(self.yp0, self.yp1, self.yd0, self.yd1, self.c0, self.c1)]


def sample_potential_outcomes(scenario, x1, x2, rng, rho_true=0.5):
    n = x1.size
    law = _ErrorLaw(scenario)
    g = rng.multivariate_normal([0.0, 0.0], [[1.0, rho_true], [rho_true, 1.0]], size=n)
    e0 = law.from_normal_score(g[:, 0])
    e1 = law.from_normal_score(g[:, 1])
    eps0 = law.sample_eps(e0, rng)
    eps1 = law.sample_eps(e1, rng)
    c = rng.uniform(8.0, 10.0, size=(n, 2))
    return PotentialOutcomes(
        yp0=progression_mean(0, x1, x2) + eps0,
        yp1=progression_mean(1, x1, x2) + eps1,
        yd0=death_mean(scenario, 0, x1, x2) + DEATH_SHIFT + e0,
        yd1=death_mean(scenario, 1, x1, x2) + DEATH_SHIFT + e1,
        c0=c[:, 0],
        c1=c[:, 1],
    )


def generate_scenario(spec, rng=None):
    """Coarsened single-arm dataset and the latent potential outcomes."""
    rng = rng if rng is not None else np.random.default_rng(np.random.SeedSequence([spec.seed, spec.id]))
    z = (rng.random(spec.n) < 0.5).astype(int)
    x1, x2 = sample_covariates(spec.n, rng)
    po = sample_potential_outcomes(spec.id, x1, x2, rng, spec.rho_true)
    yp = np.where(z == 1, po.yp1, po.yp0)
    yd = np.where(z == 1, po.yd1, po.yd0)
    c = np.where(z == 1, po.c1, po.c0)
    t1, t2, delta, xi = coarsen_arrays(yp, yd, c)
    ds = make_dataset(t1, t2, delta, xi, z, np.column_stack([x1, x2]), covariate_names=("x1", "x2"))
    return ds, po


# --------------------------------------------------------------------------
# ground truth by quadrature


@lru_cache(maxsize=None)
def covariate_quadrature(n_nodes=64):
    """Support points and weights for the population law of (X1, X2)."""
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    x1 = 4.75 + 2.75 * t
    w1 = w * stats.norm.pdf(x1, 4.5, 1.0)
    w1 = w1 / w1.sum()
    x1s = np.concatenate([x1, x1])
    x2s = np.concatenate([np.zeros(n_nodes), np.ones(n_nodes)])
    ws = np.concatenate([0.6 * w1, 0.4 * w1])
    return x1s, x2s, ws


def true_survival(scenario, arm, t_days):
    """Population death-time survival for one arm at times in days."""
    law = _ErrorLaw(scenario)
    x1, x2, w = covariate_quadrature()
    log_t = np.log(np.atleast_1d(np.asarray(t_days, dtype=float)))
    e = log_t[:, None] - death_mean(scenario, arm, x1, x2)[None, :] - DEATH_SHIFT
    return law.sf(e) @ w


def stratum_survival(scenario, u_days, rho_true=0.5):
    """Population P(Y_D^0 >= u, Y_D^1 >= u) under the generating copula."""
    law = _ErrorLaw(scenario)
    x1, x2, w = covariate_quadrature()
    log_u = np.log(np.atleast_1d(np.asarray(u_days, dtype=float)))[:, None]
    a0 = -special.ndtri(law.sf(log_u - death_mean(scenario, 0, x1, x2) - DEATH_SHIFT))
    a1 = -special.ndtri(law.sf(log_u - death_mean(scenario, 1, x1, x2) - DEATH_SHIFT))
    return bvn_upper(a0, a1, rho_true) @ w


def tau_evaluation_grid(scenario, rho_true=0.5, grid=None,
                        stratum_floor=TAU_STRATUM_FLOOR, mass_floor=TAU_MASS_FLOOR):
    """Points of the survival grid where tau is informed by the data.

    Keeps u where P(survive to u under both arms) >= ``stratum_floor`` and the
    numerator and denominator masses of tau are both >= ``mass_floor``.
    """
    from .estimands import default_grid

    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    log_u = np.log(grid)
    num = np.array([_stratum_mass(scenario, 1, s, rho_true, 400) for s in log_u])
    den = np.array([_stratum_mass(scenario, 0, s, rho_true, 400) for s in log_u])
    keep = (stratum_survival(scenario, grid, rho_true) >= stratum_floor) & (num >= mass_floor) & (den >= mass_floor)
    return grid[keep]


def _stratum_mass(scenario, num_arm, log_s, rho, n_nodes):
    """E_x P(Y_P^num < s, Y_D^num >= s, Y_D^other >= s) at one log time."""
    law = _ErrorLaw(scenario)
    other = 1 - num_arm
    x1, x2, wx = covariate_quadrature()
    md_num = death_mean(scenario, num_arm, x1, x2) + DEATH_SHIFT
    md_oth = death_mean(scenario, other, x1, x2) + DEATH_SHIFT
    mp_num = progression_mean(num_arm, x1, x2)
    q0 = law.sf(log_s - md_num)  # (X,)
    a_score = -special.ndtri(np.clip(law.sf(log_s - md_oth), 0.0, 1.0))
    r, wr = np.polynomial.legendre.leggauss(n_nodes)
    r = 0.5 * (r + 1.0)
    wr = 0.5 * wr
    # q = q0 r^2 smooths the endpoint at q = 0
    q = q0[None, :] * r[:, None] ** 2
    jac = 2.0 * q0[None, :] * r[:, None]
    e = law.isf(q)
    v = law.eps_cdf_given_e(log_s - mp_num[None, :], e)
    b_score = -special.ndtri(q)
    cop = conditional_survival_scores(np.broadcast_to(a_score, q.shape), b_score, rho)
    inner = (wr[:, None] * jac * v * cop).sum(axis=0)
    return float(inner @ wx)


def true_tau(scenario, u_days, rho_true=0.5, n_nodes=400):
    """Population tau(u) under the generating copula correlation."""
    log_u = np.log(np.atleast_1d(np.asarray(u_days, dtype=float)))
    out = np.empty(log_u.size)
    for g, s in enumerate(log_u):
        num = _stratum_mass(scenario, 1, s, rho_true, n_nodes)
        den = _stratum_mass(scenario, 0, s, rho_true, n_nodes)
        out[g] = num / den if den > 0 else np.nan
    return out


def monte_carlo_truth(scenario, u_days, n_draws, rng, rho_true=0.5):
    """Monte Carlo survival and tau from simulated potential outcomes (for checks)."""
    x1, x2 = sample_covariates(n_draws, rng)
    po = sample_potential_outcomes(scenario, x1, x2, rng, rho_true)
    log_u = np.log(np.atleast_1d(np.asarray(u_days, dtype=float)))[:, None]
    s0 = (po.yd0[None] >= log_u).mean(axis=1)
    s1 = (po.yd1[None] >= log_u).mean(axis=1)
    both = (po.yd0[None] >= log_u) & (po.yd1[None] >= log_u)
    num = (both & (po.yp1[None] < log_u)).sum(axis=1)
    den = (both & (po.yp0[None] < log_u)).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.where(den > 0, num / den, np.nan)
    return {"surv0": s0, "surv1": s1, "tau": tau, "num": num, "den": den}


# --------------------------------------------------------------------------
# metrics


def _truth_values(truth, grid):
    return np.asarray(truth(grid) if callable(truth) else truth, dtype=float)


def survival_rmse(fitted, truth):
    """RMSE of the posterior-mean survival curve on its grid."""
    err = np.asarray(fitted.point) - _truth_values(truth, fitted.t_grid)
    return float(np.sqrt(np.mean(err**2)))


def tau_rmse(fitted, truth):
    """RMSE of the posterior-mean tau curve; grid points with no estimate are skipped."""
    err = np.asarray(fitted.point) - _truth_values(truth, fitted.u_grid)
    err = err[np.isfinite(err)]
    if err.size == 0:
        return float("nan")
    return float(np.sqrt(np.mean(err**2)))


# --------------------------------------------------------------------------
# repetitions


@dataclass(frozen=True)
class FitSettings:
    iterations: int = 3000
    burn_in: int = 1000
    thin: int = 10
    k_trunc: int = 20
    rhos: tuple = (0.2, 0.5, 0.8)
    tau_draws: int = 50
    tau_nodes: int = 32
    methods: tuple = ("bnp", "naive")

    @classmethod
    def paper_scale(cls, **kw):
        return cls(iterations=5000, burn_in=2000, thin=10, tau_draws=None, tau_nodes=64, **kw)

    def key(self):
        blob = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass
class RepetitionReport:
    scenario: int
    reps: int
    settings: dict
    survival: list = field(default_factory=list)  # {rep, method, arm, rmse}
    tau: list = field(default_factory=list)  # {rep, method, rho, rmse}
    failures: list = field(default_factory=list)  # {rep, error}

    def _aggregate(self, records, by):
        out = []
        keys = sorted({tuple(r[k] for k in by) for r in records})
        for key in keys:
            vals = np.array([r["rmse"] for r in records if tuple(r[k] for k in by) == key], dtype=float)
            vals = vals[np.isfinite(vals)]
            row = {"scenario": self.scenario, **dict(zip(by, key)), "n": int(vals.size)}
            row["mean"] = float(vals.mean()) if vals.size else float("nan")
            row["sd"] = float(vals.std(ddof=1)) if vals.size > 1 else float("nan")
            out.append(row)
        return out

    def table1(self):
        """Survival RMSE by method and arm."""
        return self._aggregate(self.survival, ("method", "arm"))

    def table2(self):
        """tau RMSE by method and copula correlation."""
        return self._aggregate(self.tau, ("method", "rho"))

    def mean_rmse(self, table, method, **match):
        rows = self.table1() if table == 1 else self.table2()
        for r in rows:
            if r["method"] == method and all(r[k] == v for k, v in match.items()):
                return r["mean"]
        raise KeyError((table, method, match))

    def to_dict(self):
        return {
            "scenario": self.scenario, "reps": self.reps, "settings": self.settings,
            "survival": self.survival, "tau": self.tau, "failures": self.failures,
            "table1": self.table1(), "table2": self.table2(),
        }


def repetition_seed(master_seed, scenario, rep):
    return np.random.SeedSequence([int(master_seed), int(scenario), int(rep)])


def run_one_repetition(spec, rep, settings, master_seed=0):
    """Simulate one dataset, fit each method on both arms and score the curves."""
    from .baselines import fit_naive
    from .estimands import default_grid, marginal_survival, tau_curves
    from .gibbs import ChainConfig, run_chain
    from .model import empirical_bayes_init

    ss = repetition_seed(master_seed, spec.id, rep)
    data_seq, chain_seq = ss.spawn(2)
    ds, _ = generate_scenario(ScenarioSpec(spec.id, spec.n, spec.rho_true, spec.seed), np.random.default_rng(data_seq))
    chain_seed = int(chain_seq.generate_state(1)[0])
    cfg = ChainConfig(settings.iterations, settings.burn_in, settings.thin, chain_seed, settings.k_trunc)
    grid = default_grid()
    u_grid = tau_evaluation_grid(spec.id, spec.rho_true)
    truth_tau = true_tau(spec.id, u_grid, spec.rho_true)
    survival, tau = [], []
    for method in settings.methods:
        if method == "bnp":
            chains = [run_chain(ds, a, empirical_bayes_init(ds, a, k_trunc=settings.k_trunc), cfg) for a in (0, 1)]
        elif method == "naive":
            chains = [fit_naive(ds, a, cfg) for a in (0, 1)]
        else:
            raise ValueError(f"unknown method {method!r}")
        for a in (0, 1):
            curve = marginal_survival(chains[a], ds, grid)
            rmse = survival_rmse(curve, lambda t, a=a: true_survival(spec.id, a, t))
            survival.append({"rep": rep, "method": method, "arm": a, "rmse": rmse})
        curves = tau_curves(chains[0], chains[1], ds, u_grid, settings.rhos,
                            n_nodes=settings.tau_nodes, max_draws=settings.tau_draws)
        for rho, c in curves.items():
            tau.append({"rep": rep, "method": method, "rho": rho, "rmse": tau_rmse(c, truth_tau)})
    return {"rep": rep, "survival": survival, "tau": tau}


def _rep_job(args):
    spec, rep, settings, master_seed, cache_dir = args
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"s{spec.id}_n{spec.n}_r{rep}_seed{master_seed}_{settings.key()}.json"
        if path.exists():
            return json.loads(path.read_text())
    try:
        out = run_one_repetition(spec, rep, settings, master_seed)
    except Exception as exc:  # a failed repetition is reported, not fatal
        log_.warning("repetition %d of scenario %d failed: %s", rep, spec.id, exc)
        return {"rep": rep, "error": f"{type(exc).__name__}: {exc}"}
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(out))
    return out


def run_repetitions(spec, reps, settings=None, workers=1, master_seed=None, cache_dir=None):
    """Independent seeded repetitions of one scenario; results do not depend on ``workers``.

    With ``cache_dir`` each finished repetition is stored on disk and reused
    on later calls with identical settings.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    settings = settings or FitSettings()
    master_seed = spec.seed if master_seed is None else master_seed
    jobs = [(spec, r, settings, master_seed, cache_dir) for r in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_rep_job, jobs))
    else:
        results = [_rep_job(j) for j in jobs]
    report = RepetitionReport(spec.id, reps, {**asdict(settings), "n": spec.n, "rho_true": spec.rho_true,
                                              "master_seed": master_seed})
    for res in results:
        if "error" in res:
            report.failures.append(res)
            continue
        report.survival.extend(res["survival"])
        report.tau.extend(res["tau"])
    return report
