"""Batch command-line front end.

    ddpgp simulate  --scenario 1 --n 500 --seed 7 --out sim
    ddpgp fit       --data sim/data.csv --model bnp --out fit
    ddpgp estimand  --chains-dir fit --rho 0.2 0.5 0.8 --out tau
    ddpgp report    --chains-dir fit --data sim/data.csv --out report
    ddpgp benchmark --scenarios 1 2 3 --reps 20 --workers 4 --out bench

Every option may also come from a flat ``key = value`` file given with
``--config``; flags on the command line win. Each run writes the resolved
settings to ``<out>/config.resolved``, which can be passed back through
``--config`` to repeat the run.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O error.
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .bvn import NegligibleMassError
from .data import DataValidationError
from .model import read_flat_config

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
PAPER_REPS = 500
DESK_REPS = 20

log_ = logging.getLogger("ddpgp")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="flat key = value file with option defaults")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--paper-scale", action="store_true", help="full-size chain and repetition settings")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="ddpgp", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a scenario dataset and its truth")
    p.add_argument("--scenario", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--rho-true", type=float, default=0.5)

    p = sub.add_parser("fit", parents=[common], help="fit both arms and write chains")
    p.add_argument("--data", required=True)
    p.add_argument("--time-scale", choices=("days", "log"), default="days")
    p.add_argument("--model", choices=("bnp", "naive"), default="bnp")
    p.add_argument("--iterations", type=int, default=5000)
    p.add_argument("--burn-in", type=int, default=2000)
    p.add_argument("--thin", type=int, default=10)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--k", type=int, default=20, help="truncation level")
    p.add_argument("--epsilon", type=float, default=0.1, help="GP nugget scale")

    p = sub.add_parser("estimand", parents=[common], help="tau(u) curves from fitted chains")
    p.add_argument("--chains-dir", required=True)
    p.add_argument("--rho", type=float, nargs="+", default=[0.2, 0.5, 0.8])
    p.add_argument("--grid-points", type=int, default=34)
    p.add_argument("--nodes", type=int, default=64, help="quadrature nodes per integral")
    p.add_argument("--max-draws", type=int, default=None)

    p = sub.add_parser("report", parents=[common], help="survival curves, Kaplan-Meier and LPML")
    p.add_argument("--chains-dir", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--time-scale", choices=("days", "log"), default="days")
    p.add_argument("--grid-points", type=int, default=34)

    p = sub.add_parser("benchmark", parents=[common], help="repeated simulations, RMSE tables")
    p.add_argument("--scenarios", type=int, nargs="+", choices=(1, 2, 3), default=[1, 2, 3])
    p.add_argument("--reps", type=int, default=None, help=f"default {DESK_REPS}, {PAPER_REPS} at paper scale")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--rho", type=float, nargs="+", default=[0.2, 0.5, 0.8])
    p.add_argument("--cache-dir", default=None, help="reuse finished repetitions stored here")
    return parser, sub.choices


# --------------------------------------------------------------------------
# config handling


def _coerce(action, raw):
    if isinstance(action, argparse._StoreTrueAction):
        low = raw.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"option {action.dest}: expected a boolean, got {raw!r}")
        return low in ("true", "1", "yes")
    conv = action.type or str
    if action.nargs in ("+", "*"):
        return [conv(tok) for tok in raw.replace(",", " ").split()]
    if raw.strip().lower() == "none":
        return None
    return conv(raw)


def load_config_defaults(subparser, path):
    raw = read_flat_config(path)
    actions = {a.dest: a for a in subparser._actions}
    out = {}
    for key, val in raw.items():
        dest = key.replace("-", "_")
        if dest == "command":
            continue
        if dest not in actions or dest in ("config", "help"):
            raise ValueError(f"{path}: unknown option {key!r}")
        out[dest] = _coerce(actions[dest], val)
    return out


def parse_args(argv=None):
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    command = next((a for a in argv if a in subs), None)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    config = pre.parse_known_args(argv)[0].config
    if command and config:
        sp = subs[command]
        defaults = load_config_defaults(sp, config)
        for a in sp._actions:
            if a.dest in defaults and a.required:
                a.required = False
        sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def write_resolved_config(args, out):
    lines = [f"command = {args.command}"]
    for key in sorted(vars(args)):
        if key in ("command", "config"):
            continue
        val = getattr(args, key)
        if isinstance(val, (list, tuple)):
            val = " ".join(str(v) for v in val)
        lines.append(f"{key} = {val}")
    path = Path(out) / "config.resolved"
    path.write_text("\n".join(lines) + "\n")
    return path


# --------------------------------------------------------------------------
# commands


def _grid(n):
    from .estimands import default_grid

    return default_grid(n)


def cmd_simulate(args, out):
    from .data import export_csv
    from .simulation import ScenarioSpec, generate_scenario, tau_evaluation_grid, true_survival, true_tau

    spec = ScenarioSpec(args.scenario, args.n, args.rho_true, args.seed)
    ds, po = generate_scenario(spec)
    export_csv(ds, out / "data.csv")
    rows = [
        {"id": i, "z": int(ds.z[i]), "yp0": po.yp0[i], "yp1": po.yp1[i], "yd0": po.yd0[i],
         "yd1": po.yd1[i], "c0": po.c0[i], "c1": po.c1[i]}
        for i in range(ds.n)
    ]
    io.write_rows(rows, out / "potential_outcomes.csv")
    grid = _grid(34)
    u = tau_evaluation_grid(spec.id, spec.rho_true)
    io.write_json({
        "scenario": spec.id, "n": spec.n, "rho_true": spec.rho_true, "seed": spec.seed,
        "t_grid_days": grid,
        "survival_arm0": true_survival(spec.id, 0, grid), "survival_arm1": true_survival(spec.id, 1, grid),
        "tau_all_grid": true_tau(spec.id, grid, spec.rho_true),
        "u_grid_days": u, "tau": true_tau(spec.id, u, spec.rho_true),
    }, out / "truth.json")
    return [out / "data.csv", out / "truth.json"]


def _chain_config(args):
    from .gibbs import ChainConfig

    if args.paper_scale:
        it, burn, thin = 5000, 2000, 10
    else:
        it, burn, thin = args.iterations, args.burn_in, args.thin
    return ChainConfig(it, burn, thin, args.seed, args.k, args.chains)


def cmd_fit(args, out):
    from .baselines import fit_naive
    from .data import ingest_csv
    from .gibbs import pool_chains, run_chains
    from .model import empirical_bayes_init, write_hyperparameters

    ds = ingest_csv(args.data, time_scale=args.time_scale)
    cfg = _chain_config(args)
    written = []
    for arm in (0, 1):
        if args.model == "bnp":
            hp = empirical_bayes_init(ds, arm, k_trunc=args.k, epsilon=args.epsilon)
            write_hyperparameters(hp, out / f"hyperparameters_arm{arm}.txt")
            chain = run_chains(ds, arm, hp, cfg, workers=args.workers)
        else:
            chain = pool_chains([fit_naive(ds, arm, cfg, chain_index=c) for c in range(cfg.chains)])
        written.append(io.write_chain(chain, out / f"chain_arm{arm}.jsonl"))
        io.write_traces(chain, out / f"traces_arm{arm}.csv")
    return written


def _load_chains(chains_dir):
    d = Path(chains_dir)
    return [io.read_chain(d / f"chain_arm{a}.jsonl") for a in (0, 1)]


def cmd_estimand(args, out):
    from .estimands import tau_curves

    c0, c1 = _load_chains(args.chains_dir)
    grid = _grid(args.grid_points)
    curves = tau_curves(c0, c1, None, grid, args.rho, n_nodes=args.nodes, max_draws=args.max_draws)
    written = []
    for rho, curve in curves.items():
        stem = f"tau_rho{rho:g}"
        io.write_rows(curve.rows(), out / f"{stem}.csv")
        io.write_json({"rho": rho, "model": c0.kind, "n_unstable": curve.n_unstable, "curve": curve.rows()},
                      out / f"{stem}.json")
        written.append(out / f"{stem}.csv")
    return written


def cmd_report(args, out):
    from .baselines import kaplan_meier, lpml
    from .data import ingest_csv
    from .estimands import marginal_survival

    ds = ingest_csv(args.data, time_scale=args.time_scale)
    chains = _load_chains(args.chains_dir)
    grid = _grid(args.grid_points)
    table = {}
    for arm, chain in enumerate(chains):
        if chain.design.shape != ds.design().shape or not np.allclose(chain.design, ds.design()):
            raise DataValidationError("chains were not fitted to this dataset")
        curve = marginal_survival(chain, ds, grid)
        io.write_rows(curve.rows(), out / f"survival_arm{arm}.csv")
        sel = ds.z == arm
        km = kaplan_meier(np.exp(ds.t2[sel]), ds.xi[sel])
        io.write_rows(km.rows(), out / f"km_arm{arm}.csv")
        table[f"arm{arm}"] = {scope: lpml(chain, ds, scope).lpml for scope in ("joint", "survival")}
    io.write_json({"model": chains[0].kind, "lpml": table}, out / "lpml.json")
    return [out / "lpml.json"]


def cmd_benchmark(args, out):
    from .simulation import FitSettings, ScenarioSpec, run_repetitions

    reps = args.reps or (PAPER_REPS if args.paper_scale else DESK_REPS)
    settings = FitSettings.paper_scale(rhos=tuple(args.rho)) if args.paper_scale else FitSettings(rhos=tuple(args.rho))
    t1, t2, full = [], [], []
    for sc in args.scenarios:
        rep = run_repetitions(ScenarioSpec(sc, args.n, 0.5, args.seed), reps, settings,
                              workers=args.workers, cache_dir=args.cache_dir)
        t1.extend(rep.table1())
        t2.extend(rep.table2())
        full.append(rep.to_dict())
        for f in rep.failures:
            log_.warning("scenario %d repetition %d failed: %s", sc, f["rep"], f["error"])
    io.write_rows(t1, out / "table1.csv", ["scenario", "method", "arm", "n", "mean", "sd"])
    io.write_rows(t2, out / "table2.csv", ["scenario", "method", "rho", "n", "mean", "sd"])
    io.write_json({"reports": full}, out / "benchmark.json")
    return [out / "table1.csv", out / "table2.csv"]


COMMANDS = {
    "simulate": cmd_simulate, "fit": cmd_fit, "estimand": cmd_estimand,
    "report": cmd_report, "benchmark": cmd_benchmark,
}


def main(argv=None):
    try:
        args = parse_args(argv)
    except (ValueError, OSError) as exc:
        print(f"ddpgp: error: {exc}", file=sys.stderr)
        return EXIT_IO if isinstance(exc, OSError) else EXIT_VALIDATION
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_resolved_config(args, out)
        for path in COMMANDS[args.command](args, out):
            log_.info("wrote %s", path)
    except DataValidationError as exc:
        print(f"ddpgp: invalid data: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NegligibleMassError, np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        print(f"ddpgp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"ddpgp: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"ddpgp: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
