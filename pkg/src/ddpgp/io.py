"""Plain-text serialization: chains as JSON lines, curves and tables as CSV,
scalars as JSON.

A chain file starts with one header record (arm, model kind, settings and the
pooled design matrix) followed by one record per retained draw. Floats are
written with ``repr`` precision, so a read-back chain is bit-identical.
"""
import csv
import json
import math
from pathlib import Path

import numpy as np

from .gibbs import PosteriorChain

CHAIN_FORMAT = "ddpgp-chain/1"


def _clean(obj):
    """JSON-safe copy: arrays to lists, NaN/inf to None."""
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _array(v):
    return np.array(v, dtype=float)  # None becomes nan


def write_json(obj, path):
    path = Path(path)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def write_rows(rows, path, fieldnames=None):
    """Write a list of dicts as CSV (floats at full precision)."""
    path = Path(path)
    rows = list(rows)
    fieldnames = fieldnames or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v for k, v in r.items()})
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_chain(chain, path):
    path = Path(path)
    header = {
        "format": CHAIN_FORMAT, "arm": chain.arm, "kind": chain.kind, "epsilon": chain.epsilon,
        "rows": chain.rows, "design": chain.design, "config": chain.config, "n_draws": chain.n_draws,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(_clean(header), sort_keys=True) + "\n")
        for s in range(chain.n_draws):
            rec = {
                "alpha": chain.alpha[s], "beta": chain.beta[s], "sigma": chain.sigma[s],
                "theta": chain.theta[s], "w": chain.w[s],
            }
            fh.write(json.dumps(_clean(rec), sort_keys=True) + "\n")
    return path


def read_chain(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"chain file not found: {path}")
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty chain file")
    header = json.loads(lines[0])
    if header.get("format") != CHAIN_FORMAT:
        raise ValueError(f"{path}: not a chain file (format {header.get('format')!r})")
    draws = [json.loads(ln) for ln in lines[1:]]
    if len(draws) != header["n_draws"]:
        raise ValueError(f"{path}: expected {header['n_draws']} draws, found {len(draws)}")
    stack = lambda key: np.array([_array(d[key]) for d in draws])  # noqa: E731
    return PosteriorChain(
        arm=int(header["arm"]), kind=header["kind"], w=stack("w"), sigma=stack("sigma"),
        alpha=np.array([np.nan if d["alpha"] is None else d["alpha"] for d in draws], dtype=float),
        beta=stack("beta"), theta=stack("theta"), design=_array(header["design"]),
        rows=np.array(header["rows"], dtype=int), epsilon=float(header["epsilon"]),
        config=header["config"],
    )


def write_traces(chain, path):
    tr = chain.traces()
    rows = [{"draw": s, **{k: v[s] for k, v in tr.items()}} for s in range(chain.n_draws)]
    return write_rows(rows, path, ["draw", *tr])
