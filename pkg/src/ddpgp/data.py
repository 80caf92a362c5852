"""Semi-competing-risks records, covariate standardization and CSV I/O.

Times are kept on the log scale internally. A record holds

* ``t1`` -- log of min(progression, death, censoring)
* ``t2`` -- log of min(death, censoring)
* ``delta`` -- 1 if progression was observed first
* ``xi`` -- 1 if death was observed
* ``z`` -- treatment arm
* ``x`` -- baseline covariates
"""
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

REQUIRED_COLUMNS = ("t1", "t2", "delta", "xi", "z")
TIE_JITTER = 1e-6


class DataValidationError(ValueError):
    """Raised for malformed rows or records that break the coarsening rules."""

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = list(rows)


@dataclass(frozen=True)
class ObservedRecord:
    t1: float
    t2: float
    delta: int
    xi: int
    z: int
    x: tuple

    def problems(self):
        out = []
        if self.delta not in (0, 1) or self.xi not in (0, 1) or self.z not in (0, 1):
            out.append("indicators must be 0/1")
        if self.t1 > self.t2:
            out.append("t1 > t2")
        if self.delta == 0 and self.t1 != self.t2:
            out.append("delta = 0 requires t1 == t2")
        return out


@dataclass(frozen=True)
class PotentialRecord:
    """Simulation ground truth for one subject (log scale)."""

    yp0: float
    yp1: float
    yd0: float
    yd1: float
    c0: float
    c1: float


def coarsen(p, z):
    """Observed record implied by potential outcomes under arm ``z`` (covariates empty)."""
    yp = p.yp1 if z else p.yp0
    yd = p.yd1 if z else p.yd0
    c = p.c1 if z else p.c0
    t2 = min(yd, c)
    return ObservedRecord(
        t1=min(yp, t2), t2=t2, delta=int(yp < t2), xi=int(yd < c), z=int(z), x=()
    )


def coarsen_arrays(yp, yd, c):
    """Vectorized coarsening; returns (t1, t2, delta, xi)."""
    yp, yd, c = (np.asarray(v, dtype=float) for v in (yp, yd, c))
    t2 = np.minimum(yd, c)
    t1 = np.minimum(yp, t2)
    return t1, t2, (yp < t2).astype(int), (yd < c).astype(int)


@dataclass(frozen=True)
class Standardization:
    """Per-column (mean, sd); binary columns carry (0, 1) and ``binary=True``."""

    mean: np.ndarray
    sd: np.ndarray
    binary: np.ndarray

    def apply(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.sd

    def invert(self, xs):
        return np.asarray(xs, dtype=float) * self.sd + self.mean


def _is_binary(col):
    return bool(np.all((col == 0) | (col == 1)))


def fit_standardization(x):
    x = np.asarray(x, dtype=float)
    d = x.shape[1]
    mean = np.zeros(d)
    sd = np.ones(d)
    binary = np.zeros(d, dtype=bool)
    for j in range(d):
        col = x[:, j]
        if _is_binary(col):
            binary[j] = True
            continue
        s = col.std(ddof=1) if col.size > 1 else 0.0
        if not s > 0:
            raise DataValidationError(f"covariate column {j} has zero variance")
        mean[j] = col.mean()
        sd[j] = s
    return Standardization(mean, sd, binary)


@dataclass(frozen=True)
class Dataset:
    """Immutable column store for one trial.

    ``x_raw`` keeps covariates on their original scale, ``x`` the standardized
    values used by the model.
    """

    t1: np.ndarray
    t2: np.ndarray
    delta: np.ndarray
    xi: np.ndarray
    z: np.ndarray
    x_raw: np.ndarray
    covariate_names: tuple = ()
    standardization: Standardization = None
    x: np.ndarray = field(default=None)

    def __post_init__(self):
        for name in ("t1", "t2", "x_raw"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for name in ("delta", "xi", "z"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=int))
        if self.x_raw.ndim == 1:
            object.__setattr__(self, "x_raw", self.x_raw[:, None])
        if not self.covariate_names:
            names = tuple(f"x{j + 1}" for j in range(self.x_raw.shape[1]))
            object.__setattr__(self, "covariate_names", names)
        if self.x is None:
            x = self.x_raw if self.standardization is None else self.standardization.apply(self.x_raw)
            object.__setattr__(self, "x", x)
        for arr in (self.t1, self.t2, self.delta, self.xi, self.z, self.x, self.x_raw):
            arr.setflags(write=False)

    @property
    def n(self):
        return self.t1.size

    @property
    def d(self):
        return self.x.shape[1]

    def design(self):
        """Intercept plus standardized covariates."""
        return np.column_stack([np.ones(self.n), self.x])

    def arm(self, z):
        return np.flatnonzero(self.z == z)

    def record(self, i):
        return ObservedRecord(
            float(self.t1[i]), float(self.t2[i]), int(self.delta[i]), int(self.xi[i]),
            int(self.z[i]), tuple(self.x[i]),
        )

    def validate(self):
        bad = []
        for i in range(self.n):
            if self.record(i).problems():
                bad.append(i)
        if bad:
            raise DataValidationError(f"{len(bad)} record(s) violate coarsening rules: rows {bad[:20]}", bad)
        if np.any(~np.isfinite(self.x_raw)):
            raise DataValidationError("missing or non-finite covariates")
        return self

    def fitting_times(self, jitter=TIE_JITTER):
        """(t1, t2) with progression/death ties broken by moving t1 down by ``jitter``."""
        t1 = self.t1.copy()
        tie = (self.delta == 1) & (self.t1 >= self.t2)
        t1[tie] = self.t2[tie] - jitter
        return t1, self.t2.copy()


def make_dataset(t1, t2, delta, xi, z, x, covariate_names=(), standardize_covariates=True):
    """Build, validate and (optionally) standardize a dataset from log-scale columns."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    ds = Dataset(t1, t2, delta, xi, z, x, tuple(covariate_names))
    ds.validate()
    return standardize(ds) if standardize_covariates else ds


def standardize(ds):
    """Return a copy whose continuous covariates have mean 0 and variance 1.

    Standardization is always fitted on the raw values, so calling this on an
    already standardized dataset changes nothing.
    """
    st = fit_standardization(ds.x_raw)
    return Dataset(ds.t1, ds.t2, ds.delta, ds.xi, ds.z, ds.x_raw, ds.covariate_names, st)


def _parse_float(v, row, col):
    try:
        return float(v)
    except (TypeError, ValueError):
        raise DataValidationError(f"row {row}: column {col!r} is not numeric: {v!r}", [row]) from None


def ingest_csv(path, time_scale="days", schema=None, standardize_covariates=True):
    """Read a trial CSV.

    Parameters
    ----------
    path : str or Path
    time_scale : {"days", "log"}
        How the ``t1``/``t2`` columns are expressed in the file.
    schema : dict, optional
        Maps the canonical names ``t1, t2, delta, xi, z`` to file column names.
        All other columns are treated as covariates.
    """
    if time_scale not in ("days", "log"):
        raise ValueError("time_scale must be 'days' or 'log'")
    schema = {k: k for k in REQUIRED_COLUMNS} | dict(schema or {})
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [schema[k] for k in REQUIRED_COLUMNS if schema[k] not in header]
        if missing:
            raise DataValidationError(f"missing required columns: {missing}")
        mapped = set(schema[k] for k in REQUIRED_COLUMNS)
        cov_names = [h for h in header if h not in mapped]
        cols = {k: [] for k in REQUIRED_COLUMNS}
        xs = []
        for row_idx, row in enumerate(reader):
            if None in row or any(v is None for v in row.values()):
                raise DataValidationError(f"row {row_idx}: wrong number of fields", [row_idx])
            vals = {k: _parse_float(row[schema[k]], row_idx, schema[k]) for k in REQUIRED_COLUMNS}
            if time_scale == "days" and (vals["t1"] <= 0 or vals["t2"] <= 0):
                raise DataValidationError(f"row {row_idx}: times must be positive", [row_idx])
            for k in REQUIRED_COLUMNS:
                cols[k].append(vals[k])
            xrow = []
            for name in cov_names:
                v = row[name]
                if v is None or v.strip() == "":
                    raise DataValidationError(f"row {row_idx}: missing covariate {name!r}", [row_idx])
                xrow.append(_parse_float(v, row_idx, name))
            xs.append(xrow)
    if not xs:
        raise DataValidationError("no data rows")
    t1 = np.asarray(cols["t1"])
    t2 = np.asarray(cols["t2"])
    if time_scale == "days":
        t1, t2 = np.log(t1), np.log(t2)
    for k in ("delta", "xi", "z"):
        arr = np.asarray(cols[k])
        bad = np.flatnonzero((arr != 0) & (arr != 1))
        if bad.size:
            raise DataValidationError(f"column {k!r} must be 0/1; offending rows {bad.tolist()[:20]}", bad)
    x = np.asarray(xs, dtype=float).reshape(len(xs), len(cov_names))
    return make_dataset(
        t1, t2, np.asarray(cols["delta"], dtype=int), np.asarray(cols["xi"], dtype=int),
        np.asarray(cols["z"], dtype=int), x, cov_names, standardize_covariates,
    )


def export_csv(ds, path, time_scale="days"):
    """Write ``ds`` in the format read by :func:`ingest_csv` (raw covariates)."""
    t1, t2 = ds.t1, ds.t2
    if time_scale == "days":
        t1, t2 = np.exp(t1), np.exp(t2)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(REQUIRED_COLUMNS) + list(ds.covariate_names))
        for i in range(ds.n):
            w.writerow(
                [repr(float(t1[i])), repr(float(t2[i])), int(ds.delta[i]), int(ds.xi[i]), int(ds.z[i])]
                + [repr(float(v)) for v in ds.x_raw[i]]
            )
    return path
