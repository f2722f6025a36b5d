"""Command-line experiment runner.

    python -m hypolab tunneling --config tun.ini --out results/
    python -m hypolab accept-all --threads 4

Each experiment writes one or more CSV tables and a ``<experiment>.json``
summary into ``--out``. Exit status: 0 on success, 1 when acceptance checks
fail, 2 for config or usage errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, default_config, load_config
from .errors import HypolabError
from .geometry import CotangentState, flow_geodesic, from_name, normalize_covector
from .numerics import fit_loglinear
from .observability import (
    frequency_cost_experiment,
    gevrey_cost_experiment,
    lowfreq_cost_experiment,
    parabolic_tradeoff_experiment,
    tunneling_experiment,
    write_table_csv,
)
from .spectral import SpectralVector, build_basis, subelliptic_ratio
from .transmutation import I_asymptotic, I_of_lambda, laplace_sweep, transmute, write_sweep_csv

log = logging.getLogger("hypolab")

EXIT_OK, EXIT_ACCEPT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def write_summary(summary: dict, dest) -> None:
    with open(dest, "w", encoding="utf-8") as fh:
        json.dump({k: _jsonable(v) for k, v in summary.items()}, fh, sort_keys=True, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# experiments: each returns ({csv name: (header, rows)}, summary dict)
# ---------------------------------------------------------------------------

def run_spectrum(cfg: ExperimentConfig):
    b = build_basis(cfg.operator)
    closed = cfg.operator.gamma == 0
    header = ["n", "branch", "lambda"] + (["lambda_exact"] if closed else [])
    rows = []
    for n, br, lam in zip(b.fourier_n, b.branches, b.lambdas):
        row = [int(n), int(br), float(lam)]
        if closed:
            row.append(float((br * math.pi / 2) ** 2 + (cfg.operator.frequency(n)) ** 2))
        rows.append(row)
    out = {"modes": len(b), "lambda_min": float(b.lambdas.min()), "lambda_max": float(b.lambdas.max())}
    if closed:
        exact = np.array([r[3] for r in rows])
        out["max_rel_error"] = float(np.max(np.abs(b.lambdas / exact - 1)))
        out["pass_closed_form"] = out["max_rel_error"] <= 1e-6
    ground = b.ground_modes()
    nz = ground.fourier_n != 0
    if np.count_nonzero(nz) >= 2 and cfg.operator.gamma > 0:
        fit = fit_loglinear(np.log(np.abs(ground.fourier_n[nz])), np.log(ground.lambdas[nz]))
        out["growth_exponent"] = fit.slope
        out["growth_exponent_theory"] = 2.0 / (1 + cfg.operator.gamma)
    return {"spectrum": (header, rows)}, out


def run_tunneling(cfg):
    b = build_basis(cfg.operator)
    r = tunneling_experiment(b, cfg.region, cfg.params["powers"])
    e = r.extras
    header = ["n", "lambda", "mass"] + (["prefactor_ratio"] if "prefactor_ratio" in e else [])
    rows = []
    for i, (n, lam, m) in enumerate(zip(e["fourier_n"], r.lambdas, e["masses"])):
        row = [int(n), float(lam), float(m)]
        if "prefactor_ratio" in e:
            row.append(float(e["prefactor_ratio"][i]))
        rows.append(row)
    out = r.summary()
    out.pop("best_power", None)
    out["best_power"] = e["best_power"]
    for p, v in e["r2_by_power"].items():
        out[f"r2_power_{p:g}"] = v
    out["pass_exponent"] = 0.081 <= e["exponent_in_lambda"] <= 0.099
    return {"tunneling": (header, rows)}, out


def run_geodesics(cfg):
    p = cfg.params
    system = from_name(p["system"], cfg.operator.gamma)
    x0 = np.asarray(p["x0"], dtype=float)
    xi0 = np.asarray(p["xi0"], dtype=float)
    if x0.size != system.dim or xi0.size != system.dim:
        raise ConfigError(f"x0/xi0: need {system.dim} components for {system.name}", 0, "x0", cfg.source)
    st = CotangentState(x0, normalize_covector(system, x0, xi0))
    path = flow_geodesic(system, st, p["S"], cfg.tolerances["ode_step"])
    header = (["s"] + [f"x{i + 1}" for i in range(system.dim)] + [f"xi{i + 1}" for i in range(system.dim)]
              + ["ell"])
    rows = [[s, *x, *xi, l] for s, x, xi, l in zip(path.s, path.x, path.xi, path.ell)]
    out = {"system": system.name, "S": p["S"], "step": cfg.tolerances["ode_step"], "drift": path.drift,
           "ell0": path.ell0, "pass_drift": path.drift <= 1e-8}
    return {"geodesic": (header, [[float(v) for v in r] for r in rows])}, out


def run_transmute(cfg):
    tp = cfg.transmute
    sweep = laplace_sweep(tp, cfg.params["lambdas"])
    b = build_basis(cfg.operator)
    y0 = SpectralVector.random(b, np.random.default_rng(cfg.seed))
    w = transmute(tp, y0)
    rows = []
    for j in range(len(b)):
        lam = float(b.lambdas[j])
        asym = I_asymptotic(tp, lam) if lam >= 1 else float("nan")
        rows.append([int(b.fourier_n[j]), int(b.branches[j]), lam, I_of_lambda(tp, lam), asym,
                     float(y0.coeffs[j]), float(w.ut.coeffs[j])])
    out = {"alpha": tp.alpha, "T": tp.T, "S": tp.S, "correction_exponent": sweep.correction_exponent,
           "position_zero": bool(np.all(w.u.coeffs == 0.0)), "modes": len(b)}
    for lam, r in zip(sweep.lambdas, sweep.ratio):
        out[f"ratio_at_{lam:g}"] = float(r)
    tables = {"transmute": (["n", "branch", "lambda", "I", "I_asym", "y0", "velocity"], rows),
              "laplace_sweep": sweep}
    return tables, out


def run_lowfreq(cfg):
    b = build_basis(cfg.operator)
    r = lowfreq_cost_experiment(b, cfg.region, cfg.params["T"], cfg.params["lambda_grid"])
    rows = [[float(l), int(d), float(m), float(c)]
            for l, d, m, c in zip(r.lambdas, r.extras["dims"], r.gram_min_eigs, r.extras["cost"])]
    out = r.summary()
    return {"lowfreq_cost": (["lambda", "dim", "gram_min_eig", "cost"], rows)}, out


def run_parabolic(cfg):
    b = build_basis(cfg.operator)
    p = cfg.params
    rows, info = parabolic_tradeoff_experiment(b, cfg.region, p["T_list"], p["eta"],
                                               random_count=p["random_count"], seed=cfg.seed)
    betas = [r[1] for r in rows]
    out = {"T0": info["T0"], "eta": info["eta"], "threshold_slope": info["threshold_fit"].slope,
           "beta_finite": all(math.isfinite(x) for x in betas),
           "beta_decreasing": all(x > y for x, y in zip(betas, betas[1:]))}
    return {"parabolic": (["T", "beta_min", "T0", "beta_theory"], rows)}, out


def run_gevrey(cfg):
    b = build_basis(cfg.operator)
    p = cfg.params
    rows, info = gevrey_cost_experiment(b, cfg.region, p["T"], p["theta_list"],
                                        random_count=p["random_count"], seed=cfg.seed)
    ps = [r[1] for r in rows]
    out = {"theta0": info["theta0"], "power_decreasing": all(x > y for x, y in zip(ps, ps[1:]))}
    return {"gevrey": (["theta", "p_min", "theta0", "p_theory"], rows)}, out


def run_frequency(cfg):
    b = build_basis(cfg.operator)
    p = cfg.params
    rows, info = frequency_cost_experiment(b, cfg.region, p["T"], random_count=p["random_count"],
                                           seed=cfg.seed, bin_width=p["bin_width"])
    out = {"exponent": info["exponent"], "exponent_drop_last": info.get("exponent_drop_last"),
           "bins": len(rows), "monotone": all(x[1] <= y[1] for x, y in zip(rows, rows[1:]))}
    return {"frequency_cost": (["Lambda", "max_cost", "count"], rows)}, out


def run_subelliptic(cfg):
    p = cfg.params
    edges = p["bands"]
    rows = []
    for lo, hi in zip(edges, edges[1:]):
        r = subelliptic_ratio(cfg.operator, p["trials"], band=(lo, hi), seed=cfg.seed,
                              nx1=p["nx1"], nx2=p["nx2"])
        rows.append([int(lo), int(hi), float(r.max()), float(r.mean())])
    maxima = [r[2] for r in rows]
    change = max((abs(b / a - 1) for a, b in zip(maxima, maxima[1:])), default=0.0)
    out = {"max_adjacent_change": change, "ratio_max": max(maxima), "pass_band_stable": change < 0.5}
    return {"subelliptic": (["band_lo", "band_hi", "ratio_max", "ratio_mean"], rows)}, out


RUNNERS = {
    "spectrum": run_spectrum,
    "tunneling": run_tunneling,
    "geodesics": run_geodesics,
    "transmute": run_transmute,
    "lowfreq_cost": run_lowfreq,
    "parabolic": run_parabolic,
    "gevrey": run_gevrey,
    "frequency_cost": run_frequency,
    "subelliptic": run_subelliptic,
}


def run(cfg: ExperimentConfig, stream=None) -> int:
    """Run one configured experiment, writing artifacts into ``cfg.output_dir``."""
    stream = stream or sys.stdout
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.experiment == "accept_all":
        return _accept_all(cfg, out_dir, stream)
    tables, summary = RUNNERS[cfg.experiment](cfg)
    for name, table in tables.items():
        if name == "laplace_sweep":
            write_sweep_csv(table, out_dir / "laplace_sweep.csv")
            continue
        write_table_csv(*table, out_dir / f"{name}.csv")
    summary = {**{k: v for k, v in summary.items() if not k.startswith("config.")}, **_echo(cfg)}
    write_summary(summary, out_dir / f"{cfg.experiment}.json")
    print(f"{cfg.experiment}: wrote {', '.join(sorted(tables))} to {out_dir}",
          file=stream)
    return EXIT_OK


def _echo(cfg):
    out = {(k if k.startswith("tolerance.") else f"config.{k}"): v for k, v in cfg.echo().items()}
    out["version"] = __version__
    return out


def _accept_all(cfg, out_dir, stream):
    from .acceptance import run_all

    results = run_all(threads=cfg.operator.threads, seed=cfg.seed, echo=lambda s: print(s, file=stream))
    rows = [[r.number, r.title, int(r.passed), r.seconds] for r in results]
    write_table_csv(["criterion", "title", "passed", "seconds"], rows, out_dir / "acceptance.csv")
    summary = {f"criterion_{r.number:02d}": r.passed for r in results}
    for r in results:
        for k, v in r.measured.items():
            summary[f"criterion_{r.number:02d}.{k}"] = v
    failed = [r.number for r in results if not r.passed]
    summary["failed"] = failed
    summary.update(_echo(cfg))
    write_summary(summary, out_dir / "accept_all.json")
    if failed:
        print("failed criteria: " + ", ".join(str(n) for n in failed), file=stream)
        return EXIT_ACCEPT
    print("all criteria passed", file=stream)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hypolab", description="Hypoelliptic observability experiments.")
    ap.add_argument("--version", action="version", version=f"hypolab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name.replace("_", "-"), help=f"run the {name.replace('_', ' ')} experiment")
        sp.add_argument("--config", type=Path, help="INI config file")
        sp.add_argument("--out", type=Path, help="output directory (default: config output_dir or .)")
        sp.add_argument("--threads", type=int, help="worker threads for basis construction")
        sp.add_argument("--seed", type=int, help="random seed")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    name = args.command.replace("-", "_")
    overrides = {"threads": args.threads, "seed": args.seed, "out": args.out}
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("threads: must be >= 1", 0, "threads", "--threads")
        cfg = load_config(args.config, name, overrides) if args.config else default_config(name, overrides)
    except ConfigError as exc:
        print(f"hypolab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg)
    except ConfigError as exc:
        print(f"hypolab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HypolabError, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"hypolab: numerical failure in {name} ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
